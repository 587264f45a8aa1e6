//! Level sets of Newtonian potentials: the gradient field
//! `∇P = c_N·(x/|x|^N ⋆ μ)`, pure second derivatives through the
//! principal-value formula `∂_j²P = c_N·(p.v. (|y|² - N·y_j²)/|y|^{N+2} ⋆ μ
//! + V_N·μ̃)`, band-discretized level sets, and the decay of the
//! absolutely continuous mass restricted to shrinking bands.

use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{self, Grid};
use crate::kernels::Kernel;
use crate::measures::{DensityValue, RadonMeasure};
use crate::operators::{self, EpsilonSchedule, FieldKind, FieldSample, FieldValues};
use crate::quad::integrate_box_singular;
use crate::{Error, Result};

/// Gradient constant of the Newtonian kernel: `-(N-2)` for `N ≥ 3`, `-1`
/// in the plane.
pub fn newtonian_constant(dim: usize) -> f64 {
    if dim == 2 {
        -1.0
    } else {
        -((dim as f64) - 2.0)
    }
}

/// `∇P = c_N·(x/|x|^N ⋆ μ)` by direct summation, density cells through
/// their centers and the self-cell by the singular rule. Evaluation at an
/// atom is rejected.
pub fn newtonian_gradient(mu: &RadonMeasure, points: &[Vec<f64>]) -> Result<FieldSample> {
    let dim = mu.dimension;
    if dim < 2 {
        return Err(Error::invalid("newtonian gradient needs dimension at least 2"));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        for (loc, _) in &mu.atoms {
            if geom::dist(p, loc) < operators::ATOM_EXCLUSION_DIST {
                return Err(Error::AtomCollision(p.clone()));
            }
        }
    }
    let cn = newtonian_constant(dim);
    let axial: Vec<Kernel> = (0..dim).map(|j| Kernel::axial(dim, j)).collect::<Result<_>>()?;
    let centers_flat = operators::flattened_centers(mu);
    let values: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            (0..dim)
                .map(|j| {
                    let k = &axial[j];
                    let mut acc = 0.0;
                    for (loc, w) in &mu.atoms {
                        acc += w * k.value_of_diff(x, loc);
                    }
                    if let Some(d) = &mu.density {
                        let cell_vol = d.grid.cell_volume();
                        let own = d.grid.cell_containing(x);
                        for flat in 0..d.grid.len() {
                            let v = d.values[flat];
                            if v == 0.0 {
                                continue;
                            }
                            if own == Some(flat) {
                                let (lo, hi) = d.grid.cell_bounds(flat);
                                acc += v * integrate_box_singular(&lo, &hi, x, 5, &mut |y| {
                                    k.value(&geom::sub(x, y))
                                });
                            } else {
                                acc += v
                                    * cell_vol
                                    * k.value_of_diff(x, &centers_flat[flat * dim..][..dim]);
                            }
                        }
                    }
                    cn * acc
                })
                .collect()
        })
        .collect();
    Ok(FieldSample {
        points: points.to_vec(),
        values: FieldValues::Vector(values),
        kind: FieldKind::Gradient,
    })
}

/// The pure-second-derivative kernel `(|y|² - N·y_j²)/|y|^{N+2}`,
/// evaluated at `x - c` without allocating.
fn second_derivative_kernel_diff(dim: usize, j: usize, x: &[f64], c: &[f64]) -> f64 {
    let mut r_sq = 0.0;
    for ax in 0..dim {
        let d = x[ax] - c[ax];
        r_sq += d * d;
    }
    let dj = x[j] - c[j];
    (r_sq - dim as f64 * dj * dj) / r_sq.sqrt().powi(dim as i32 + 2)
}

/// One pure second derivative of the Newtonian potential at `x`, split
/// into the converged truncation limit and the local-density term.
#[derive(Debug, Clone, Serialize)]
pub struct SecondDerivativePv {
    pub axis: usize,
    /// `c_N·(pv + V_N·μ̃)` when both ingredients are defined.
    pub value: Option<f64>,
    /// Limit of the truncated convolutions along the schedule.
    pub pv_term: Option<f64>,
    pub local_density: DensityValue,
}

pub fn second_derivative_pv(
    mu: &RadonMeasure,
    x: &[f64],
    j: usize,
    schedule: &EpsilonSchedule,
) -> Result<SecondDerivativePv> {
    let dim = mu.dimension;
    if j >= dim {
        return Err(Error::invalid(format!("axis {j} out of range for dimension {dim}")));
    }
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    let centers_flat = operators::flattened_centers(mu);
    let truncated: Vec<f64> = schedule
        .entries()
        .iter()
        .map(|&eps| {
            let eps_sq = eps * eps;
            let mut acc = 0.0;
            for (loc, w) in &mu.atoms {
                if geom::dist(x, loc) > eps {
                    acc += w * second_derivative_kernel_diff(dim, j, x, loc);
                }
            }
            if let Some(d) = &mu.density {
                let cell_vol = d.grid.cell_volume();
                for flat in 0..d.grid.len() {
                    let v = d.values[flat];
                    if v == 0.0 {
                        continue;
                    }
                    let c = &centers_flat[flat * dim..][..dim];
                    let mut d_sq = 0.0;
                    for ax in 0..dim {
                        let dv = x[ax] - c[ax];
                        d_sq += dv * dv;
                    }
                    if d_sq > eps_sq {
                        acc += v * cell_vol * second_derivative_kernel_diff(dim, j, x, c);
                    }
                }
            }
            acc
        })
        .collect();
    let tail = &truncated[truncated.len() - 3..];
    let settled = tail
        .iter()
        .all(|u| tail.iter().all(|v| (u - v).abs() <= operators::TRUNCATION_SETTLE_TOL));
    let pv_term = settled.then(|| tail[2]);
    let local_density = mu.density_at(x, &mu.default_density_radii())?;
    let cn = newtonian_constant(dim);
    let vn = geom::unit_ball_volume(dim);
    let value = match (pv_term, local_density.value) {
        (Some(pv), Some(dens)) => Some(cn * (pv + vn * dens)),
        _ => None,
    };
    Ok(SecondDerivativePv {
        axis: j,
        value,
        pv_term,
        local_density,
    })
}

/// Cells of a sampled grid field lying in the band `|P - c| ≤ band`.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSetSkeleton {
    pub level: f64,
    pub band: f64,
    pub cells_in_band: Vec<usize>,
    pub band_volume: f64,
}

pub fn extract_level_set(grid: &Grid, values: &[f64], c: f64, band: f64) -> LevelSetSkeleton {
    let cells_in_band: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| (**v - c).abs() <= band)
        .map(|(i, _)| i)
        .collect();
    let band_volume = cells_in_band.len() as f64 * grid.cell_volume();
    LevelSetSkeleton {
        level: c,
        band,
        cells_in_band,
        band_volume,
    }
}

/// Full level-set report: band cells with gradient norms, Laplacian values
/// and the per-cell absolutely continuous density.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSetReport {
    pub level: f64,
    pub band: f64,
    pub cells: Vec<Vec<f64>>,
    pub gradient_norms: Vec<f64>,
    /// `Σ_j ∂_j²P` per cell, when requested and convergent.
    pub laplacian_values: Vec<Option<f64>>,
    /// Cells whose Laplacian fell back to the grid stencil because the
    /// truncation limit did not settle.
    pub stencil_fallback: Vec<bool>,
    pub density_values: Vec<f64>,
    pub band_volume: f64,
}

#[derive(Debug, Clone)]
pub struct LevelSetOptions {
    pub schedule: EpsilonSchedule,
    pub with_laplacian: bool,
    /// Grid used when the measure carries no density: cells per axis over
    /// the doubled support box.
    pub fallback_cells: usize,
}

impl Default for LevelSetOptions {
    fn default() -> Self {
        LevelSetOptions {
            schedule: EpsilonSchedule::default(),
            with_laplacian: false,
            fallback_cells: 32,
        }
    }
}

/// Grid on which level sets of the potential of `mu` are sampled: the
/// density's own grid when present, otherwise a covering grid of the
/// doubled support box.
pub fn levelset_grid(mu: &RadonMeasure, fallback_cells: usize) -> Result<Grid> {
    if let Some(d) = &mu.density {
        return Ok(d.grid.clone());
    }
    let Some((lo, hi)) = mu.support_bounds() else {
        return Err(Error::EmptyInput("level set of the zero measure"));
    };
    let radius: f64 = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| b - a)
        .fold(1.0f64, f64::max);
    let wlo: Vec<f64> = lo.iter().map(|v| v - radius).collect();
    let whi: Vec<f64> = hi.iter().map(|v| v + radius).collect();
    let h = (whi[0] - wlo[0]) / fallback_cells as f64;
    Grid::covering(&wlo, &whi, h)
}

pub fn levelset_report(
    mu: &RadonMeasure,
    c: f64,
    band: f64,
    options: &LevelSetOptions,
) -> Result<LevelSetReport> {
    if !(band >= 0.0) {
        return Err(Error::invalid("band must be nonnegative"));
    }
    let kernel = Kernel::newtonian(mu.dimension)?;
    let grid = levelset_grid(mu, options.fallback_cells)?;
    let centers = grid.centers();
    let field = operators::potential(&kernel, mu, &centers)?;
    let skeleton = extract_level_set(&grid, field.scalars(), c, band);

    let cells: Vec<Vec<f64>> = skeleton
        .cells_in_band
        .iter()
        .map(|&i| grid.center(i))
        .collect();
    let gradient_norms: Vec<f64> = if cells.is_empty() {
        Vec::new()
    } else {
        newtonian_gradient(mu, &cells)?
            .vectors()
            .iter()
            .map(|g| geom::norm(g))
            .collect()
    };
    let density_values: Vec<f64> = skeleton
        .cells_in_band
        .iter()
        .map(|&i| mu.density.as_ref().map(|d| d.values[i]).unwrap_or(0.0))
        .collect();

    let mut laplacian_values = vec![None; cells.len()];
    let mut stencil_fallback = vec![false; cells.len()];
    if options.with_laplacian {
        for (slot, (cell_idx, x)) in skeleton.cells_in_band.iter().zip(&cells).enumerate() {
            let mut total = 0.0;
            let mut ok = true;
            for j in 0..mu.dimension {
                match second_derivative_pv(mu, x, j, &options.schedule)?.value {
                    Some(v) => total += v,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                laplacian_values[slot] = Some(total);
            } else {
                // truncation failed to settle: fall back to the grid stencil
                stencil_fallback[slot] = true;
                laplacian_values[slot] =
                    stencil_laplacian(&grid, field.scalars(), *cell_idx);
            }
        }
    }
    Ok(LevelSetReport {
        level: c,
        band,
        cells,
        gradient_norms,
        laplacian_values,
        stencil_fallback,
        density_values,
        band_volume: skeleton.band_volume,
    })
}

/// Second-order stencil Laplacian of a sampled grid field; `None` at
/// boundary cells.
pub fn stencil_laplacian(grid: &Grid, values: &[f64], flat: usize) -> Option<f64> {
    let dim = grid.dim();
    let multi = grid.multi_index(flat);
    let mut acc = -2.0 * dim as f64 * values[flat];
    for ax in 0..dim {
        if multi[ax] == 0 || multi[ax] + 1 >= grid.shape[ax] {
            return None;
        }
        let mut up = multi.clone();
        up[ax] += 1;
        let mut down = multi.clone();
        down[ax] -= 1;
        acc += values[grid.flat_index(&up)] + values[grid.flat_index(&down)];
    }
    Some(acc / (grid.h * grid.h))
}

/// Mass of the absolutely continuous part restricted to shrinking bands.
#[derive(Debug, Clone, Serialize)]
pub struct BandDecayRow {
    pub band: f64,
    pub ac_mass: f64,
    pub band_volume: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecayVerdict {
    Consistent,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetDecay {
    pub level: f64,
    pub rows: Vec<BandDecayRow>,
    pub verdict: DecayVerdict,
}

/// For each band, the a.c. mass `Σ ρ_cell·h^N` over cells with
/// `|P - c| ≤ band`. The verdict is `Consistent` when the restricted mass
/// shrinks at least proportionally to the band over three or more bands.
pub fn levelset_density_check(
    mu: &RadonMeasure,
    c: f64,
    bands: &[f64],
    fallback_cells: usize,
) -> Result<LevelSetDecay> {
    if bands.is_empty() {
        return Err(Error::EmptyInput("band list"));
    }
    for pair in bands.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::invalid("bands must be strictly decreasing"));
        }
    }
    let kernel = Kernel::newtonian(mu.dimension)?;
    let grid = levelset_grid(mu, fallback_cells)?;
    let centers = grid.centers();
    let field = operators::potential(&kernel, mu, &centers)?;
    let cell_vol = grid.cell_volume();
    let rows: Vec<BandDecayRow> = bands
        .iter()
        .map(|&band| {
            let skeleton = extract_level_set(&grid, field.scalars(), c, band);
            let ac_mass: f64 = skeleton
                .cells_in_band
                .iter()
                .map(|&i| mu.density.as_ref().map(|d| d.values[i]).unwrap_or(0.0) * cell_vol)
                .sum();
            BandDecayRow {
                band,
                ac_mass,
                band_volume: skeleton.band_volume,
                cells: skeleton.cells_in_band.len(),
            }
        })
        .collect();
    // proportional decay with slack; vanished masses count as decayed
    let mut consistent = rows.len() >= 3;
    for pair in rows.windows(2) {
        let band_ratio = pair[1].band / pair[0].band;
        if pair[0].ac_mass > 0.0 {
            let mass_ratio = pair[1].ac_mass / pair[0].ac_mass;
            if mass_ratio > band_ratio * 1.2 {
                consistent = false;
            }
        }
    }
    Ok(LevelSetDecay {
        level: c,
        rows,
        verdict: if consistent {
            DecayVerdict::Consistent
        } else {
            DecayVerdict::Inconclusive
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GridDensity;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom_gradient_matches_the_closed_form() {
        let mu = RadonMeasure::from_atoms(3, vec![(vec![0.0, 0.0, 0.0], 1.0)]).unwrap();
        let g = newtonian_gradient(&mu, &[vec![2.0, 0.0, 0.0]]).unwrap();
        let got = &g.vectors()[0];
        // ∇|x|^{-1} at (2,0,0) is (-1/4, 0, 0)
        assert_relative_eq!(got[0], -0.25, max_relative = 1e-14);
        assert_eq!(got[1], 0.0);
        assert_eq!(got[2], 0.0);
    }

    #[test]
    fn zero_measure_has_zero_gradient_and_atoms_are_rejected() {
        let zero = RadonMeasure::zero(2);
        let g = newtonian_gradient(&zero, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(g.vectors()[0], vec![0.0, 0.0]);
        let mu = RadonMeasure::from_atoms(2, vec![(vec![1.0, 1.0], 1.0)]).unwrap();
        assert!(matches!(
            newtonian_gradient(&mu, &[vec![1.0, 1.0]]),
            Err(Error::AtomCollision(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences_of_the_potential() {
        let grid = Grid::new(vec![1.0, 1.0, 1.0], 0.125, vec![8, 8, 8]).unwrap();
        let d = GridDensity::from_fn(grid, |y| {
            (-geom::dot(&geom::sub(y, &[1.5, 1.5, 1.5]), &geom::sub(y, &[1.5, 1.5, 1.5]))
                / 0.08)
                .exp()
        })
        .unwrap();
        let mu = RadonMeasure::new(3, vec![(vec![1.2, 1.8, 1.4], 0.5)], Some(d)).unwrap();
        let kernel = Kernel::newtonian(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.6..0.4)).collect();
            if mu.distance_to_support(&x) < 0.5 {
                continue;
            }
            let g = newtonian_gradient(&mu, &[x.clone()]).unwrap();
            let step = 1e-5;
            for ax in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[ax] += step;
                xm[ax] -= step;
                let up = operators::potential(&kernel, &mu, &[xp]).unwrap().scalars()[0];
                let um = operators::potential(&kernel, &mu, &[xm]).unwrap().scalars()[0];
                let fd = (up - um) / (2.0 * step);
                assert_relative_eq!(
                    g.vectors()[0][ax],
                    fd,
                    max_relative = 1e-5,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn second_derivative_kernels_sum_to_zero_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dim in [2usize, 3] {
            for _ in 0..50 {
                let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                if geom::norm(&y) < 0.1 {
                    continue;
                }
                let origin = vec![0.0; dim];
                let total: f64 = (0..dim)
                    .map(|j| second_derivative_kernel_diff(dim, j, &y, &origin))
                    .sum();
                let scale: f64 = (0..dim)
                    .map(|j| second_derivative_kernel_diff(dim, j, &y, &origin).abs())
                    .fold(1e-300, f64::max);
                assert!(total.abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn far_atom_second_derivative_matches_the_kernel_hessian() {
        // independent oracle: the diagonal Hessian entries of the
        // Newtonian kernel itself
        let a = vec![3.0, -1.0, 2.0];
        let w = 0.8;
        let mu = RadonMeasure::from_atoms(3, vec![(a.clone(), w)]).unwrap();
        let kernel = Kernel::newtonian(3).unwrap();
        let x = vec![0.5, 0.5, 0.0];
        let sched = EpsilonSchedule::default();
        let hess = kernel.hessian(&geom::sub(&x, &a));
        for j in 0..3 {
            let sd = second_derivative_pv(&mu, &x, j, &sched).unwrap();
            assert_relative_eq!(sd.value.unwrap(), w * hess[j][j], max_relative = 1e-12);
        }
    }

    fn smooth_bump_3d(n: usize) -> RadonMeasure {
        let h = 1.0 / n as f64;
        let grid = Grid::new(vec![-0.5, -0.5, -0.5], h, vec![n, n, n]).unwrap();
        let d = GridDensity::from_fn(grid, |y| (-geom::dot(y, y) / (2.0 * 0.22 * 0.22)).exp())
            .unwrap();
        RadonMeasure::from_density(d).unwrap()
    }

    #[test]
    fn interior_laplacian_matches_the_stencil_and_the_density() {
        let mu = smooth_bump_3d(24);
        let d = mu.density.as_ref().unwrap();
        let grid = d.grid.clone();
        let kernel = Kernel::newtonian(3).unwrap();
        let field = operators::potential(&kernel, &mu, &grid.centers()).unwrap();
        let sched = EpsilonSchedule::default();
        let cn = newtonian_constant(3);
        let vn = geom::unit_ball_volume(3);
        // interior cells near the bump center
        for multi in [[12usize, 12, 12], [11, 12, 13], [13, 11, 12]] {
            let flat = grid.flat_index(&multi);
            let x = grid.center(flat);
            let pv_sum: f64 = (0..3)
                .map(|j| {
                    second_derivative_pv(&mu, &x, j, &sched)
                        .unwrap()
                        .value
                        .unwrap()
                })
                .sum();
            let stencil = stencil_laplacian(&grid, field.scalars(), flat).unwrap();
            assert_relative_eq!(pv_sum, stencil, max_relative = 0.02);
            assert_relative_eq!(pv_sum, cn * 3.0 * vn * d.values[flat], max_relative = 0.02);
        }
    }

    #[test]
    fn single_atom_band_is_an_annulus() {
        let mu = RadonMeasure::from_atoms(2, vec![(vec![0.0, 0.0], 1.0)]).unwrap();
        let grid = Grid::new(vec![-1.0, -1.0], 0.0625, vec![32, 32]).unwrap();
        let kernel = Kernel::newtonian(2).unwrap();
        let field = operators::potential(&kernel, &mu, &grid.centers()).unwrap();
        // P = log(1/r): level c corresponds to radius e^{-c}
        let c = 0.6f64;
        let band = 0.1;
        let skeleton = extract_level_set(&grid, field.scalars(), c, band);
        assert!(!skeleton.cells_in_band.is_empty());
        let (r_hi, r_lo) = ((-(c - band)).exp(), (-(c + band)).exp());
        for &i in &skeleton.cells_in_band {
            let r = geom::norm(&grid.center(i));
            assert!(r >= r_lo * (1.0 - 1e-12) && r <= r_hi * (1.0 + 1e-12));
        }
        // zero band keeps only exact hits: generically none on a grid
        let exact = extract_level_set(&grid, field.scalars(), c, 0.0);
        assert!(exact.cells_in_band.is_empty());
        // shrinking the band shrinks the volume monotonically
        let half = extract_level_set(&grid, field.scalars(), c, band / 2.0);
        assert!(half.band_volume <= skeleton.band_volume);
        assert!(half
            .cells_in_band
            .iter()
            .all(|i| skeleton.cells_in_band.contains(i)));
    }

    fn uniform_ball_3d(cells: usize) -> RadonMeasure {
        let h = 2.1 / cells as f64;
        let grid = Grid::new(vec![-1.05, -1.05, -1.05], h, vec![cells, cells, cells]).unwrap();
        let d = GridDensity::from_fn(grid, |y| if geom::norm(y) <= 1.0 { 1.0 } else { 0.0 })
            .unwrap();
        RadonMeasure::from_density(d).unwrap()
    }

    #[test]
    fn uniform_ball_band_mass_tracks_the_radial_closed_form() {
        // P(x) = 2π(R² - r²/3) inside the ball: the band |P - c| ≤ b is a
        // shell whose mass has an explicit closed form
        let mu = uniform_ball_3d(32);
        let c = 5.2;
        let bands = [0.6, 0.3, 0.15];
        let decay = levelset_density_check(&mu, c, &bands, 32).unwrap();
        let shell_mass = |b: f64| {
            let r3 = |p: f64| (3.0f64 * (1.0 - p / (2.0 * std::f64::consts::PI))).powf(1.5);
            4.0 * std::f64::consts::PI / 3.0 * (r3(c - b) - r3(c + b))
        };
        for row in &decay.rows {
            assert_relative_eq!(row.ac_mass, shell_mass(row.band), max_relative = 0.08);
        }
        for pair in decay.rows.windows(2) {
            let ratio = pair[0].ac_mass / pair[1].ac_mass;
            assert!(ratio >= 1.8, "band mass decay {ratio} below 1.8");
        }
        assert_eq!(decay.verdict, DecayVerdict::Consistent);
    }

    #[test]
    fn degenerate_band_cases() {
        let mu = uniform_ball_3d(12);
        // level above the potential maximum: empty bands, zero mass
        let decay = levelset_density_check(&mu, 50.0, &[0.4, 0.2, 0.1], 12).unwrap();
        assert!(decay.rows.iter().all(|r| r.ac_mass == 0.0 && r.cells == 0));
        // pure atom measure: a.c. mass vanishes identically
        let atom = RadonMeasure::from_atoms(3, vec![(vec![0.0, 0.0, 0.0], 1.0)]).unwrap();
        let decay = levelset_density_check(&atom, 1.0, &[0.4, 0.2, 0.1], 16).unwrap();
        assert!(decay.rows.iter().all(|r| r.ac_mass == 0.0));
        assert_eq!(decay.verdict, DecayVerdict::Consistent);
        // band lists must decrease
        assert!(levelset_density_check(&mu, 5.0, &[0.1, 0.2], 12).is_err());
    }

    #[test]
    fn gradient_median_shrinks_with_the_band_on_flat_level_sets() {
        // a hollow shell has constant potential inside the cavity: that
        // level set has positive volume and zero gradient, so shrinking
        // bands concentrate on cavity cells and the median |∇P| drops
        let n = 24;
        let h = 2.1 / n as f64;
        let grid = Grid::new(vec![-1.05, -1.05, -1.05], h, vec![n, n, n]).unwrap();
        let d = GridDensity::from_fn(grid.clone(), |y| {
            let r = geom::norm(y);
            if (0.6..=1.0).contains(&r) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let mu = RadonMeasure::from_density(d).unwrap();
        let kernel = Kernel::newtonian(3).unwrap();
        // cavity potential value
        let c = operators::potential(&kernel, &mu, &[vec![0.0, 0.0, 0.0]])
            .unwrap()
            .scalars()[0];
        let field = operators::potential(&kernel, &mu, &grid.centers()).unwrap();
        let mut medians = Vec::new();
        for band in [0.8, 0.4, 0.2] {
            let skeleton = extract_level_set(&grid, field.scalars(), c, band);
            let cells: Vec<Vec<f64>> = skeleton
                .cells_in_band
                .iter()
                .map(|&i| grid.center(i))
                .collect();
            assert!(!cells.is_empty());
            let mut norms: Vec<f64> = newtonian_gradient(&mu, &cells)
                .unwrap()
                .vectors()
                .iter()
                .map(|g| geom::norm(g))
                .collect();
            norms.sort_by(f64::total_cmp);
            medians.push(norms[norms.len() / 2]);
        }
        assert!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "medians not decreasing: {medians:?}"
        );
    }

    #[test]
    fn levelset_report_collects_aligned_columns() {
        let mu = uniform_ball_3d(16);
        let report = levelset_report(&mu, 5.2, 0.5, &LevelSetOptions::default()).unwrap();
        assert!(!report.cells.is_empty());
        assert_eq!(report.cells.len(), report.gradient_norms.len());
        assert_eq!(report.cells.len(), report.density_values.len());
        assert_eq!(report.cells.len(), report.laplacian_values.len());
        assert_relative_eq!(
            report.band_volume,
            report.cells.len() as f64 * (2.1f64 / 16.0).powi(3),
            max_relative = 1e-12
        );
        // every reported cell carries the unit density of the ball interior
        assert!(report.density_values.iter().all(|v| *v == 1.0));
    }
}
