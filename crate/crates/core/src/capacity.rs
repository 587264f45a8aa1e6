//! Capacity of discretized compact sets in the de la Vallée Poussin sense
//! for the kernel `|x|^{-(N-1)}`: the supremum of the mass of nonnegative
//! measures supported on the set whose Riesz potential stays below one.
//!
//! Sets are unions of equal cubes; candidate measures put a uniform
//! density on each cube (point masses would have infinite self-potential
//! and force the trivial measure). The potential constraint is enforced at
//! the cube centers plus a sub-lattice of refinement points, which can
//! only enlarge the feasible set, so the reported value is upper-biased
//! relative to the true capacity and tightens under refinement.

use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{self, Grid};
use crate::kernels::Kernel;
use crate::lp::{self, DenseLp};
use crate::measures::RadonMeasure;
use crate::operators;
use crate::{Error, Result};

/// Union of pairwise disjoint cubes of common side `h` given by centers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSet {
    pub dimension: usize,
    pub h: f64,
    pub centers: Vec<Vec<f64>>,
}

impl DiscreteSet {
    pub fn from_centers(dimension: usize, h: f64, centers: Vec<Vec<f64>>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid(format!("cube side must be positive, got {h}")));
        }
        for c in &centers {
            if c.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: c.len(),
                });
            }
        }
        // disjointness: cubes of side h must be separated by at least h on
        // some axis; duplicate lattice positions are the realistic failure
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let overlap = (0..dimension).all(|ax| {
                    (centers[i][ax] - centers[j][ax]).abs() < h * (1.0 - 1e-9)
                });
                if overlap {
                    return Err(Error::invalid(format!(
                        "cubes at {:?} and {:?} overlap",
                        centers[i], centers[j]
                    )));
                }
            }
        }
        Ok(DiscreteSet {
            dimension,
            h,
            centers,
        })
    }

    /// Cube discretization of the ball `B(center, r)`: lattice cubes of
    /// side `h` anchored at the ball center whose centers lie in the ball.
    pub fn ball(dimension: usize, center: &[f64], r: f64, h: f64) -> Result<Self> {
        if !(r > 0.0) || !(h > 0.0) {
            return Err(Error::invalid("ball discretization needs positive radius and mesh"));
        }
        let m = (r / h).ceil() as isize + 1;
        let mut centers = Vec::new();
        let mut idx = vec![-m; dimension];
        'outer: loop {
            let c: Vec<f64> = (0..dimension)
                .map(|ax| center[ax] + (idx[ax] as f64 + 0.5) * h)
                .collect();
            if geom::dist(&c, center) <= r {
                centers.push(c);
            }
            let mut ax = dimension;
            loop {
                if ax == 0 {
                    break 'outer;
                }
                ax -= 1;
                idx[ax] += 1;
                if idx[ax] < m {
                    break;
                }
                idx[ax] = -m;
            }
        }
        DiscreteSet::from_centers(dimension, h, centers)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Lebesgue measure of the cube union.
    pub fn lebesgue_measure(&self) -> f64 {
        self.centers.len() as f64 * self.h.powi(self.dimension as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BiasDirection {
    Approx,
    LowerBiased,
    UpperBiased,
}

/// Capacity estimate with its certificate: the candidate measure weights,
/// the largest constraint value they attain, and discretization metadata.
#[derive(Debug, Clone, Serialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub mesh: f64,
    pub constraint_points: usize,
    pub direction: BiasDirection,
    pub weights: Vec<f64>,
    pub certificate_max_constraint: f64,
    pub lp_pivots: usize,
}

/// Potential at `p` of a unit mass spread uniformly over the cube of side
/// `h` centered at `c`: the Riesz kernel at the center distance outside
/// the cube, a singular cell integral inside.
fn cube_potential(kernel: &Kernel, p: &[f64], c: &[f64], h: f64) -> f64 {
    // work in cube-relative coordinates so translated sets assemble
    // bit-identical programs
    let rel = geom::sub(p, c);
    let inside = rel.iter().all(|ri| ri.abs() < h / 2.0 * (1.0 - 1e-12));
    if inside {
        let dim = p.len();
        let lo = vec![-h / 2.0; dim];
        let hi = vec![h / 2.0; dim];
        crate::quad::integrate_box_singular(&lo, &hi, &rel, 5, &mut |z| {
            kernel.value(&geom::sub(&rel, z))
        }) / h.powi(dim as i32)
    } else {
        kernel.value(&rel)
    }
}

fn constraint_points(set: &DiscreteSet, refinement: usize) -> Vec<(usize, Vec<f64>)> {
    // (owning cell, point); the owning cell marks where the singular rule applies
    let dim = set.dimension;
    let mut points: Vec<(usize, Vec<f64>)> = Vec::new();
    for (ci, c) in set.centers.iter().enumerate() {
        points.push((ci, c.clone()));
    }
    if refinement >= 2 {
        let k = refinement;
        let mut offsets: Vec<Vec<f64>> = Vec::new();
        let mut idx = vec![0usize; dim];
        'outer: loop {
            let off: Vec<f64> = idx
                .iter()
                .map(|&i| ((i as f64 + 0.5) / k as f64 - 0.5) * set.h)
                .collect();
            // skip the exact center, it is already a constraint point
            if off.iter().any(|&o| o != 0.0) {
                offsets.push(off);
            }
            let mut ax = dim;
            loop {
                if ax == 0 {
                    break 'outer;
                }
                ax -= 1;
                idx[ax] += 1;
                if idx[ax] < k {
                    break;
                }
                idx[ax] = 0;
            }
        }
        for (ci, c) in set.centers.iter().enumerate() {
            for off in &offsets {
                points.push((ci, geom::add(c, off)));
            }
        }
    }
    points
}

/// Default pivot cap used by the capacity programs.
pub fn default_pivot_cap(cells: usize, constraints: usize) -> usize {
    50 * (cells + constraints) + 1000
}

/// Capacity of a cube union by linear programming: maximize the total
/// mass of per-cube uniform densities subject to the Riesz potential
/// staying ≤ 1 at every constraint point. `refinement ≥ 2` adds a
/// `refinement^N` sub-lattice of constraint points per cube.
pub fn capacity_lp(set: &DiscreteSet, refinement: usize) -> Result<CapacityEstimate> {
    if set.is_empty() {
        return Err(Error::EmptyInput("capacity of an empty set"));
    }
    let kernel = Kernel::riesz(set.dimension)?;
    let points = constraint_points(set, refinement);
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|(_, p)| {
            set.centers
                .iter()
                .map(|c| cube_potential(&kernel, p, c, set.h))
                .collect()
        })
        .collect();
    let n = set.len();
    let lp = DenseLp {
        objective: vec![1.0; n],
        rows,
        rhs: vec![1.0; points.len()],
    };
    let sol = lp::solve(&lp, default_pivot_cap(n, points.len()))?;
    let certificate_max_constraint = lp
        .rows
        .iter()
        .map(|row| row.iter().zip(&sol.x).map(|(a, w)| a * w).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(CapacityEstimate {
        value: sol.value,
        mesh: set.h,
        constraint_points: points.len(),
        direction: BiasDirection::UpperBiased,
        weights: sol.x,
        certificate_max_constraint,
        lp_pivots: sol.pivots,
    })
}

/// Capacity of the ball `B(0, r)` discretized at mesh `h ≤ r/8`.
pub fn capacity_of_ball(dimension: usize, r: f64, h: f64) -> Result<CapacityEstimate> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("ball radius must be positive, got {r}")));
    }
    if h > r / 8.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "ball capacity needs mesh h ≤ r/8, got h = {h} for r = {r}"
        )));
    }
    let set = DiscreteSet::ball(dimension, &vec![0.0; dimension], r, h)?;
    capacity_lp(&set, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SizeKind {
    Lebesgue,
    Capacity,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakNormEntry {
    pub t: f64,
    /// Lebesgue measure or capacity estimate of the superlevel set.
    pub size: f64,
    pub product: f64,
    pub cells: usize,
}

/// Empirical weak norm `sup_t t·(size of {field > t})` over sampled
/// thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct WeakNormReport {
    pub size_kind: SizeKind,
    pub entries: Vec<WeakNormEntry>,
    pub sup_product: f64,
    pub reference_total_variation: f64,
}

/// Weak capacitary norm of the Riesz potential of a nonnegative measure:
/// for each threshold, collect the window cells where the potential
/// exceeds it, estimate their capacity, and report `sup_t t·Cap`.
///
/// The window must contain the support of the measure. Superlevel sets are
/// intersected with the window, so entries at thresholds low enough for
/// the set to reach the window boundary are conservative (clipped); the
/// per-threshold cell counts make such entries visible.
pub fn weak_capacity_norm(
    mu: &RadonMeasure,
    window: &Grid,
    t_samples: &[f64],
) -> Result<WeakNormReport> {
    if !mu.is_nonnegative() {
        return Err(Error::invalid("weak capacitary norm needs a nonnegative measure"));
    }
    if t_samples.is_empty() {
        return Err(Error::EmptyInput("threshold samples"));
    }
    if window.dim() != mu.dimension {
        return Err(Error::DimensionMismatch {
            expected: mu.dimension,
            found: window.dim(),
        });
    }
    if let Some((lo, hi)) = mu.support_bounds() {
        let inside = (0..mu.dimension).all(|ax| {
            lo[ax] >= window.origin[ax]
                && hi[ax] <= window.origin[ax] + window.h * window.shape[ax] as f64
        });
        if !inside {
            return Err(Error::invalid(
                "the window must contain the support of the measure",
            ));
        }
    }
    let kernel = Kernel::riesz(mu.dimension)?;
    let centers = window.centers();
    let field = operators::potential(&kernel, mu, &centers)?;
    let values = field.scalars();

    let mut entries = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let cells: Vec<Vec<f64>> = centers
            .iter()
            .zip(values)
            .filter(|(_, v)| **v > t)
            .map(|(c, _)| c.clone())
            .collect();
        let count = cells.len();
        let size = if cells.is_empty() {
            0.0
        } else {
            capacity_lp(&DiscreteSet::from_centers(mu.dimension, window.h, cells)?, 1)?.value
        };
        entries.push(WeakNormEntry {
            t,
            size,
            product: t * size,
            cells: count,
        });
    }
    let sup_product = entries.iter().map(|e| e.product).fold(0.0, f64::max);
    Ok(WeakNormReport {
        size_kind: SizeKind::Capacity,
        entries,
        sup_product,
        reference_total_variation: mu.total_variation(),
    })
}

/// Comparison of `|E|^{(N-1)/N}` against the capacity estimate.
#[derive(Debug, Clone, Serialize)]
pub struct LebesgueCapacityReport {
    pub lebesgue_measure: f64,
    pub capacity: CapacityEstimate,
    /// `|E|^{(N-1)/N} / Cap_est(E)`.
    pub ratio: f64,
}

pub fn lebesgue_capacity_check(set: &DiscreteSet) -> Result<LebesgueCapacityReport> {
    if set.is_empty() {
        return Err(Error::EmptyInput("Lebesgue-capacity comparison of an empty set"));
    }
    let capacity = capacity_lp(set, 1)?;
    let n = set.dimension as f64;
    let lebesgue_measure = set.lebesgue_measure();
    let ratio = lebesgue_measure.powf((n - 1.0) / n) / capacity.value;
    Ok(LebesgueCapacityReport {
        lebesgue_measure,
        capacity,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lattice_set(h: f64, cells: &[(i64, i64)]) -> DiscreteSet {
        let centers = cells
            .iter()
            .map(|&(i, j)| vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h])
            .collect();
        DiscreteSet::from_centers(2, h, centers).unwrap()
    }

    #[test]
    fn overlapping_cubes_are_rejected() {
        assert!(DiscreteSet::from_centers(
            2,
            1.0,
            vec![vec![0.5, 0.5], vec![0.6, 0.5]],
        )
        .is_err());
        assert!(DiscreteSet::from_centers(2, 1.0, vec![vec![0.5, 0.5], vec![1.5, 0.5]]).is_ok());
    }

    #[test]
    fn empty_set_is_rejected() {
        let set = DiscreteSet {
            dimension: 2,
            h: 0.1,
            centers: vec![],
        };
        assert!(capacity_lp(&set, 1).is_err());
        assert!(lebesgue_capacity_check(&set).is_err());
    }

    #[test]
    fn single_cube_capacity_scales_like_mesh_to_dimension_minus_one() {
        // a single cube of side h is an exact rescaling: value ∝ h^{N-1}
        let big = capacity_lp(&lattice_set(0.5, &[(0, 0)]), 2).unwrap();
        let small = capacity_lp(&lattice_set(0.25, &[(0, 0)]), 2).unwrap();
        assert_relative_eq!(big.value / small.value, 2.0, max_relative = 1e-10);
        assert!(small.value > 0.0);
    }

    #[test]
    fn capacity_is_monotone_in_the_set() {
        let inner = lattice_set(0.25, &[(0, 0), (1, 0)]);
        let outer = lattice_set(0.25, &[(0, 0), (1, 0), (0, 1), (3, 3)]);
        let vi = capacity_lp(&inner, 1).unwrap().value;
        let vo = capacity_lp(&outer, 1).unwrap().value;
        assert!(vi <= vo + 1e-12);
    }

    #[test]
    fn certificate_holds_and_mass_matches_value() {
        let set = DiscreteSet::ball(2, &[0.0, 0.0], 1.0, 0.125).unwrap();
        let est = capacity_lp(&set, 1).unwrap();
        assert!(est.certificate_max_constraint <= 1.0 + 1e-9);
        let mass: f64 = est.weights.iter().sum();
        assert_relative_eq!(mass, est.value, epsilon = 1e-9);
        assert!(est.weights.iter().all(|w| *w >= 0.0));
        assert_eq!(est.direction, BiasDirection::UpperBiased);
    }

    #[test]
    fn adding_constraint_points_never_increases_the_value() {
        let set = DiscreteSet::ball(2, &[0.0, 0.0], 0.5, 0.0625).unwrap();
        let coarse = capacity_lp(&set, 1).unwrap();
        let fine = capacity_lp(&set, 2).unwrap();
        assert!(fine.value <= coarse.value + 1e-10);
        assert!(fine.constraint_points > coarse.constraint_points);
    }

    #[test]
    fn capacity_rescales_exactly_with_the_set() {
        let e = lattice_set(0.25, &[(0, 0), (1, 0), (0, 1), (2, 2)]);
        let scaled = DiscreteSet::from_centers(
            2,
            0.5,
            e.centers.iter().map(|c| geom::scale(c, 2.0)).collect(),
        )
        .unwrap();
        let v1 = capacity_lp(&e, 2).unwrap().value;
        let v2 = capacity_lp(&scaled, 2).unwrap().value;
        assert_relative_eq!(v2, 2.0 * v1, max_relative = 1e-10);
    }

    #[test]
    fn ball_capacity_examples() {
        // positive value, exact translation invariance, homogeneity ratio
        let v = capacity_of_ball(2, 0.5, 0.0625).unwrap();
        assert!(v.value > 0.0);

        let at_origin = DiscreteSet::ball(2, &[0.0, 0.0], 0.5, 0.0625).unwrap();
        let moved = DiscreteSet::ball(2, &[5.0, 5.0], 0.5, 0.0625).unwrap();
        let v0 = capacity_lp(&at_origin, 1).unwrap();
        let v5 = capacity_lp(&moved, 1).unwrap();
        assert_eq!(v0.value, v5.value);

        let v2 = capacity_of_ball(2, 1.0, 0.125).unwrap();
        let ratio = v2.value / v.value;
        assert!(
            (ratio / 2.0 - 1.0).abs() <= 0.05,
            "homogeneity ratio {ratio} too far from 2"
        );
    }

    #[test]
    fn ball_capacity_rejects_coarse_meshes() {
        assert!(capacity_of_ball(2, 1.0, 0.2).is_err());
        assert!(capacity_of_ball(2, 0.0, 0.01).is_err());
    }

    #[test]
    fn disc_capacity_sits_near_its_mesh_extrapolation() {
        // Richardson extrapolation over mesh halvings as the oracle; the
        // value at h = 1/16 must sit within 5% of the extrapolated limit
        let values: Vec<f64> = [0.125, 0.0625, 0.03125]
            .iter()
            .map(|&h| {
                let set = DiscreteSet::ball(2, &[0.0, 0.0], 1.0, h).unwrap();
                capacity_lp(&set, 1).unwrap().value
            })
            .collect();
        let (c0, c1, c2) = (values[0], values[1], values[2]);
        // fit value(h) = v∞ + c·h^p through the three meshes
        let p = ((c0 - c1) / (c1 - c2)).ln() / 2.0f64.ln();
        assert!(p.is_finite() && p > 0.0, "non-monotone mesh sequence: {values:?}");
        let v_inf = c2 - (c1 - c2) / (2.0f64.powf(p) - 1.0);
        assert!(
            ((c1 - v_inf) / v_inf).abs() <= 0.05,
            "h = 1/16 value {c1} vs extrapolated {v_inf}"
        );
        // independent cross-check: the planar constraint problem for the
        // kernel 1/|x| coincides with the electrostatic capacity of the
        // conducting unit disc, 2/π
        let closed_form = 2.0 / std::f64::consts::PI;
        assert!(
            ((c2 - closed_form) / closed_form).abs() <= 0.01,
            "finest value {c2} vs 2/π"
        );
    }

    #[test]
    fn isolated_point_capacity_vanishes_under_mesh_refinement() {
        // cubes shrinking onto three fixed points lose capacity by at least
        // 1.5x per halving
        let points = [vec![0.0, 0.0], vec![1.0, 0.25], vec![-0.5, 0.75]];
        let mut previous = f64::INFINITY;
        for k in 2..5 {
            let h = 2.0f64.powi(-k);
            let set = DiscreteSet::from_centers(2, h, points.to_vec()).unwrap();
            let v = capacity_lp(&set, 1).unwrap().value;
            if previous.is_finite() {
                assert!(previous / v >= 1.5, "{previous} -> {v}");
            }
            previous = v;
        }
    }

    #[test]
    fn weak_capacity_norm_examples() {
        let window = Grid::new(vec![-0.5, -0.5], 0.125, vec![16, 16]).unwrap();
        // zero measure: identically zero report
        let zero = RadonMeasure::zero(2);
        let t = vec![0.25, 0.5, 1.0];
        let rep = weak_capacity_norm(&zero, &window, &t).unwrap();
        assert_eq!(rep.sup_product, 0.0);

        // doubling the measure and the thresholds doubles the products
        let mu = RadonMeasure::from_atoms(
            2,
            vec![(vec![0.1, 0.0], 0.6), (vec![-0.2, 0.15], 0.4)],
        )
        .unwrap();
        let rep1 = weak_capacity_norm(&mu, &window, &[0.5, 1.0, 2.0]).unwrap();
        let rep2 = weak_capacity_norm(&mu.scaled(2.0), &window, &[1.0, 2.0, 4.0]).unwrap();
        for (a, b) in rep1.entries.iter().zip(&rep2.entries) {
            assert_eq!(a.cells, b.cells);
            assert_relative_eq!(2.0 * a.product, b.product, max_relative = 1e-9);
        }
        // signed measures are rejected
        assert!(weak_capacity_norm(&mu.scaled(-1.0), &window, &t).is_err());
    }

    #[test]
    fn lebesgue_capacity_ratio_is_scale_invariant_for_balls() {
        let small = lebesgue_capacity_check(&DiscreteSet::ball(2, &[0.0, 0.0], 0.5, 0.0625).unwrap())
            .unwrap();
        let large = lebesgue_capacity_check(&DiscreteSet::ball(2, &[0.0, 0.0], 1.0, 0.125).unwrap())
            .unwrap();
        assert_relative_eq!(small.ratio, large.ratio, max_relative = 1e-10);
    }

    #[test]
    fn splitting_mass_apart_does_not_increase_the_ratio() {
        let one = lebesgue_capacity_check(&lattice_set(0.125, &[(0, 0)])).unwrap();
        let two = lebesgue_capacity_check(&lattice_set(0.125, &[(0, 0), (40, 40)])).unwrap();
        assert!(two.ratio <= one.ratio + 1e-12);
    }
}
