//! The acceptance battery: one function per criterion, each returning a
//! pass/fail outcome with the measured quantities in the detail string.
//! Everything is seeded, so outcomes are reproducible run to run.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacity::{self, DiscreteSet};
use crate::differentiability::{self, DiffOptions};
use crate::geom::{self, AxisBox, Grid};
use crate::kernels::{self, Kernel, PvOutcome};
use crate::levelset;
use crate::lipschitz::{self, LipschitzOptions};
use crate::measures::{GridDensity, RadonMeasure};
use crate::operators::{self, EpsilonSchedule};
use crate::quad::QUADRATURE_TOL;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:2} [{}] {:<38} {:7.1}s  {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn outcome(
    id: u8,
    name: &'static str,
    started: Instant,
    passed: bool,
    detail: String,
) -> CriterionOutcome {
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Newton sphere theorem: the potential of 10⁴ equal atoms on the unit
/// sphere matches `1/max(|x|, 1)` to 1e-3 at 100 seeded points, in under
/// five seconds.
pub fn criterion_1() -> CriterionOutcome {
    let start = Instant::now();
    let kernel = Kernel::newtonian(3).unwrap();
    let mu = RadonMeasure::sphere_shell_atoms(&[0.0; 3], 1.0, 10_000, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut points = Vec::with_capacity(100);
    while points.len() < 100 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        // the atom approximation cannot resolve the shell itself; stay a
        // couple of lattice spacings away from it
        if (geom::norm(&p) - 1.0).abs() >= 0.2 {
            points.push(p);
        }
    }
    let field = operators::potential(&kernel, &mu, &points).unwrap();
    let max_rel = points
        .iter()
        .zip(field.scalars())
        .map(|(p, v)| {
            let expected = 1.0 / geom::norm(p).max(1.0);
            ((v - expected) / expected).abs()
        })
        .fold(0.0, f64::max);
    let seconds = start.elapsed().as_secs_f64();
    let passed = max_rel <= 1e-3 && seconds < 5.0;
    outcome(
        1,
        "Newton sphere theorem",
        start,
        passed,
        format!("max relative error {max_rel:.2e} (≤ 1e-3), runtime {seconds:.2}s (< 5s)"),
    )
}

/// Capacity homogeneity: doubling the ball radius scales the capacity by
/// `2^{N-1}` within 5%, for N = 2 and N = 3, each dimension within 60
/// seconds. N = 2 runs at mesh r/16; N = 3 at r/8, the precondition bound
/// (r/16 would need a ~17000-variable dense program).
pub fn criterion_2() -> CriterionOutcome {
    let start = Instant::now();
    let mut detail = String::new();
    let mut passed = true;
    for (dim, ratio) in [(2usize, 16.0f64), (3, 8.0)] {
        let dim_start = Instant::now();
        let small = capacity::capacity_of_ball(dim, 1.0, 1.0 / ratio).unwrap();
        let large = capacity::capacity_of_ball(dim, 2.0, 2.0 / ratio).unwrap();
        let expected = 2.0f64.powi(dim as i32 - 1);
        let observed = large.value / small.value;
        let seconds = dim_start.elapsed().as_secs_f64();
        let ok = (observed / expected - 1.0).abs() <= 0.05 && seconds < 60.0;
        passed &= ok;
        detail.push_str(&format!(
            "N={dim}: ratio {observed:.4} vs {expected} ({seconds:.1}s); "
        ));
    }
    outcome(2, "capacity homogeneity", start, passed, detail)
}

fn unit_mass_atoms(seed: u64) -> RadonMeasure {
    let window = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    RadonMeasure::seeded_unit_atoms(&window, 8, seed).unwrap()
}

/// Weak capacitary inequality: for 20 seeded unit-mass atom measures in
/// the unit square, every sampled threshold satisfies `t·Cap_est ≤ 1.10`.
pub fn criterion_3() -> CriterionOutcome {
    let start = Instant::now();
    let window = Grid::new(vec![-0.5, -0.5], 1.0 / 16.0, vec![32, 32]).unwrap();
    let kernel = Kernel::riesz(2).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 100..120u64 {
        let mu = unit_mass_atoms(seed);
        let field = operators::potential(&kernel, &mu, &window.centers()).unwrap();
        let t_samples = differentiability::dyadic_t_samples(field.scalars(), -3..=3);
        let report = capacity::weak_capacity_norm(&mu, &window, &t_samples).unwrap();
        worst = worst.max(report.sup_product / mu.total_variation());
    }
    let seconds = start.elapsed().as_secs_f64();
    let passed = worst <= 1.10 && seconds < 600.0;
    outcome(
        3,
        "weak capacitary inequality",
        start,
        passed,
        format!("worst t·Cap/‖μ‖ = {worst:.4} (≤ 1.10), runtime {seconds:.0}s (< 600s)"),
    )
}

fn seeded_cube_union(seed: u64, h: f64, subdivision: usize) -> DiscreteSet {
    // a random subset of a 10×10 lattice of cubes, rediscretized at
    // h/subdivision so mesh halving keeps the geometry identical
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    for i in 0..10i64 {
        for j in 0..10i64 {
            if rng.random_bool(0.35) {
                kept.push((i, j));
            }
        }
    }
    if kept.is_empty() {
        kept.push((5, 5));
    }
    let fine = h / subdivision as f64;
    let mut centers = Vec::new();
    for (i, j) in kept {
        for a in 0..subdivision as i64 {
            for b in 0..subdivision as i64 {
                centers.push(vec![
                    i as f64 * h + (a as f64 + 0.5) * fine,
                    j as f64 * h + (b as f64 + 0.5) * fine,
                ]);
            }
        }
    }
    DiscreteSet::from_centers(2, fine, centers).unwrap()
}

/// Lebesgue–capacity comparison: over 20 seeded cube unions the worst
/// ratio `|E|^{1/2}/Cap_est(E)` is finite and moves at most 10% under one
/// mesh halving of the same geometry.
pub fn criterion_4() -> CriterionOutcome {
    let start = Instant::now();
    let mut max_coarse: f64 = 0.0;
    let mut max_fine: f64 = 0.0;
    for seed in 500..520u64 {
        let coarse = capacity::lebesgue_capacity_check(&seeded_cube_union(seed, 0.1, 1)).unwrap();
        let fine = capacity::lebesgue_capacity_check(&seeded_cube_union(seed, 0.1, 2)).unwrap();
        max_coarse = max_coarse.max(coarse.ratio);
        max_fine = max_fine.max(fine.ratio);
    }
    let drift = (max_fine - max_coarse).abs() / max_coarse;
    let passed = max_coarse.is_finite() && max_fine.is_finite() && drift <= 0.10;
    outcome(
        4,
        "Lebesgue-capacity comparison",
        start,
        passed,
        format!("max ratio {max_coarse:.4} -> {max_fine:.4} under halving, drift {drift:.3} (≤ 0.10)"),
    )
}

/// Pointwise Lipschitz estimate: calibrate the constant on ten seeded
/// measures, verify ten held-out measures stay within 1.10 of it, and
/// check the weak-L¹ size of the dominating function is bounded with
/// small refinement drift.
pub fn criterion_5() -> CriterionOutcome {
    let start = Instant::now();
    let kernel = Kernel::riesz(2).unwrap();
    let window = AxisBox::new(vec![-0.5, -0.5], vec![1.5, 1.5]).unwrap();
    let options = LipschitzOptions::for_window(&window);
    let run = |seed: u64| {
        let mu = unit_mass_atoms(seed);
        lipschitz::lipschitz_check(&kernel, &mu, &window, 1000, seed ^ 0xABCD, &options).unwrap()
    };
    let calibration: Vec<_> = (200..210u64).map(run).collect();
    let empirical_c = calibration
        .iter()
        .map(|r| r.empirical_c)
        .fold(0.0, f64::max);
    let held_out: Vec<_> = (300..310u64).map(run).collect();
    let worst_held_out = held_out.iter().map(|r| r.worst_ratio).fold(0.0, f64::max);
    let no_violation = worst_held_out <= 1.10 * empirical_c;

    let weak_bound = calibration
        .iter()
        .chain(&held_out)
        .map(|r| r.weak_l1_of_i)
        .fold(0.0, f64::max);
    let worst_drift = calibration
        .iter()
        .chain(&held_out)
        .map(|r| r.refinement_drift)
        .fold(0.0, f64::max);
    let seconds = start.elapsed().as_secs_f64();
    let passed =
        no_violation && weak_bound.is_finite() && worst_drift <= 0.10 && seconds < 600.0;
    outcome(
        5,
        "pointwise Lipschitz estimate",
        start,
        passed,
        format!(
            "C = {empirical_c:.4}, held-out worst {worst_held_out:.4} (≤ {:.4}); weak-L¹ ≤ {weak_bound:.3}, drift {worst_drift:.3} (≤ 0.10); {seconds:.0}s",
            1.10 * empirical_c
        ),
    )
}

/// Gradient formula: the assembled gradient matches central finite
/// differences of the potential to 1e-5 at 100 points away from the
/// support, for an even kernel and for an odd homogeneous kernel.
pub fn criterion_6() -> CriterionOutcome {
    let start = Instant::now();
    let density_grid = Grid::new(vec![2.0, 2.0], 0.125, vec![8, 8]).unwrap();
    let density = GridDensity::from_fn(density_grid, |y| {
        (-geom::dot(&geom::sub(y, &[2.5, 2.5]), &geom::sub(y, &[2.5, 2.5])) / 0.08).exp()
    })
    .unwrap();
    let mu = RadonMeasure::new(
        2,
        vec![(vec![2.0, -1.5], 0.6), (vec![-2.25, 1.75], 0.4)],
        Some(density),
    )
    .unwrap();
    let schedule = EpsilonSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut points = Vec::new();
    while points.len() < 100 {
        let p = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if mu.distance_to_support(&p) >= 0.5 {
            points.push(p);
        }
    }
    let mut worst: f64 = 0.0;
    let mut all_defined = true;
    for k in [Kernel::riesz(2).unwrap(), Kernel::axial(2, 0).unwrap()] {
        for p in &points {
            let grad = operators::gradient_potential(&k, &mu, p, &schedule).unwrap();
            let Some(value) = grad.value else {
                all_defined = false;
                continue;
            };
            let step = 1e-4;
            let mut fd = vec![0.0; 2];
            for ax in 0..2 {
                let mut up = p.clone();
                let mut down = p.clone();
                up[ax] += step;
                down[ax] -= step;
                let plus = operators::potential(&k, &mu, &[up]).unwrap().scalars()[0];
                let minus = operators::potential(&k, &mu, &[down]).unwrap().scalars()[0];
                fd[ax] = (plus - minus) / (2.0 * step);
            }
            let rel = geom::dist(&value, &fd) / geom::norm(&fd).max(1e-12);
            worst = worst.max(rel);
        }
    }
    let passed = all_defined && worst <= 1e-5;
    outcome(
        6,
        "gradient formula",
        start,
        passed,
        format!("max relative FD mismatch {worst:.2e} (≤ 1e-5), all points defined: {all_defined}"),
    )
}

/// Counterexample kernel: the flux limit exists along the log-period-2π
/// sequence and fails along the log-period-π sequence, whose observed
/// oscillation dwarfs the quadrature tolerance.
pub fn criterion_7() -> CriterionOutcome {
    let start = Instant::now();
    let k = Kernel::oscillating(2).unwrap();
    let order = 256;
    let seq_2pi: Vec<f64> = (1..=5)
        .map(|j| (-2.0 * std::f64::consts::PI * j as f64).exp())
        .collect();
    let converged = matches!(
        kernels::pv_vector_along(&k, &seq_2pi, order).unwrap(),
        PvOutcome::Converged { .. }
    );
    let seq_pi: Vec<f64> = (0..=5)
        .map(|j| (-std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * j as f64).exp())
        .collect();
    let (diverged, oscillation) = match kernels::pv_vector_along(&k, &seq_pi, order).unwrap() {
        PvOutcome::Diverged { oscillation, .. } => (true, oscillation),
        PvOutcome::Converged { .. } => (false, 0.0),
    };
    let passed = converged && diverged && oscillation >= 10.0 * QUADRATURE_TOL;
    outcome(
        7,
        "oscillating-flux counterexample",
        start,
        passed,
        format!(
            "2π-sequence converged: {converged}; π-sequence oscillation {oscillation:.3} (≥ {:.0e})",
            10.0 * QUADRATURE_TOL
        ),
    )
}

fn poisson_bump() -> RadonMeasure {
    let n = 24;
    let grid = Grid::new(vec![-0.5, -0.5, -0.5], 1.0 / n as f64, vec![n, n, n]).unwrap();
    let raw = GridDensity::from_fn(grid, |y| (-geom::dot(y, y) / (2.0 * 0.22 * 0.22)).exp())
        .unwrap();
    let mu = RadonMeasure::from_density(raw).unwrap();
    let mass = mu.total_variation();
    mu.scaled(1.0 / mass)
}

/// Poisson identity: at interior points the summed pure second derivatives
/// equal `c_N·N·V_N·μ̃` within 2%; at far exterior points the sum vanishes
/// to 1e-4 absolute.
pub fn criterion_8() -> CriterionOutcome {
    let start = Instant::now();
    let mu = poisson_bump();
    let grid = mu.density.as_ref().unwrap().grid.clone();
    let schedule = EpsilonSchedule::default();
    let cn = levelset::newtonian_constant(3);
    let vn = geom::unit_ball_volume(3);
    let mut rng = ChaCha8Rng::seed_from_u64(81);

    // interior: seeded cell centers within the bump core
    let mut interior = Vec::new();
    while interior.len() < 50 {
        let flat = rng.random_range(0..grid.len());
        let c = grid.center(flat);
        if geom::norm(&c) <= 0.25 && !interior.contains(&c) {
            interior.push(c);
        }
    }
    let mut worst_rel: f64 = 0.0;
    let mut defined = true;
    for x in &interior {
        let mut total = 0.0;
        let mut ok = true;
        for j in 0..3 {
            match levelset::second_derivative_pv(&mu, x, j, &schedule).unwrap().value {
                Some(v) => total += v,
                None => ok = false,
            }
        }
        let density = mu.density_at(x, &mu.default_density_radii()).unwrap().value;
        match (ok, density) {
            (true, Some(dens)) => {
                let expected = cn * 3.0 * vn * dens;
                worst_rel = worst_rel.max(((total - expected) / expected).abs());
            }
            _ => defined = false,
        }
    }

    // exterior: points at distance ≥ 1 from the support box
    let mut exterior = Vec::new();
    while exterior.len() < 50 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-2.5..2.5)).collect();
        if mu.distance_to_support(&p) >= 1.0 {
            exterior.push(p);
        }
    }
    let mut worst_abs: f64 = 0.0;
    for x in &exterior {
        let mut total = 0.0;
        for j in 0..3 {
            match levelset::second_derivative_pv(&mu, x, j, &schedule).unwrap().value {
                Some(v) => total += v,
                None => defined = false,
            }
        }
        worst_abs = worst_abs.max(total.abs());
    }
    let passed = defined && worst_rel <= 0.02 && worst_abs <= 1e-4;
    outcome(
        8,
        "Poisson identity",
        start,
        passed,
        format!(
            "interior relative error {worst_rel:.2e} (≤ 2e-2), exterior |ΔP| {worst_abs:.2e} (≤ 1e-4)"
        ),
    )
}

/// Level-set density decay: for the uniform ball, the a.c. mass in a band
/// around an interior level drops by at least 1.8 per band halving.
pub fn criterion_9() -> CriterionOutcome {
    let start = Instant::now();
    let n = 48;
    let grid = Grid::new(vec![-1.05, -1.05, -1.05], 2.1 / n as f64, vec![n, n, n]).unwrap();
    let density = GridDensity::from_fn(grid, |y| if geom::norm(y) <= 1.0 { 1.0 } else { 0.0 })
        .unwrap();
    let mu = RadonMeasure::from_density(density).unwrap();
    let bands = [0.42, 0.21, 0.105];
    let decay = levelset::levelset_density_check(&mu, 5.2, &bands, n).unwrap();
    let ratios: Vec<f64> = decay
        .rows
        .windows(2)
        .map(|pair| pair[0].ac_mass / pair[1].ac_mass)
        .collect();
    let passed = ratios.iter().all(|r| *r >= 1.8);
    outcome(
        9,
        "level-set density decay",
        start,
        passed,
        format!("band-mass decay ratios {ratios:?} (each ≥ 1.8)"),
    )
}

/// Capacity-sense differentiability: with the true gradient the index
/// decays by ≥ 1.8 per halving over three halvings; with the gradient
/// perturbed by 0.5·e₁ it stays ≥ 0.2 at the smallest radius.
pub fn criterion_10() -> CriterionOutcome {
    let start = Instant::now();
    let k = Kernel::riesz(2).unwrap();
    let mu = RadonMeasure::from_atoms(
        2,
        vec![(vec![3.0, 0.5], 0.7), (vec![2.5, -1.0], 0.3)],
    )
    .unwrap();
    let a = vec![0.0, 0.0];
    let radii = [0.4, 0.2, 0.1, 0.05];
    let options = DiffOptions::default();
    let gradient = operators::gradient_potential(&k, &mu, &a, &EpsilonSchedule::default())
        .unwrap()
        .value
        .unwrap();
    let exact = differentiability::capacity_diff_index(&k, &mu, &a, &gradient, &radii, &options)
        .unwrap();
    let ratios: Vec<f64> = exact
        .per_radius_index
        .windows(2)
        .map(|p| p[0] / p[1])
        .collect();
    let decays = ratios.iter().all(|r| *r >= 1.8);

    let mut perturbed_gradient = gradient.clone();
    perturbed_gradient[0] += 0.5;
    let perturbed = differentiability::capacity_diff_index(
        &k,
        &mu,
        &a,
        &perturbed_gradient,
        &radii,
        &options,
    )
    .unwrap();
    let floor = perturbed.per_radius_index[perturbed.per_radius_index.len() - 1];
    let passed = decays && floor >= 0.2;
    outcome(
        10,
        "capacity-differentiability trend",
        start,
        passed,
        format!("decay ratios {ratios:?} (≥ 1.8); perturbed smallest-radius index {floor:.3} (≥ 0.2)"),
    )
}

/// Run every criterion in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ]
}
