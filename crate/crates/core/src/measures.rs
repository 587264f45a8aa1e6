//! Finite signed Radon measures as weighted atoms plus a cell-averaged
//! grid density, with total variation, restriction, ball masses, the local
//! density (limit of ball averages) and mollification.
//!
//! Singular-continuous parts such as surface measures are approximated by
//! atoms carrying quadrature weights; `sphere_shell_atoms` builds that
//! approximation for spheres.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{self, classify_cube_ball, AxisBox, CubeBallRelation, Grid, SplitMix64};
use crate::quad::integrate_box;
use crate::{Error, Result};

/// Relative agreement required of the last three ball averages before the
/// local density is declared; matches the grid model's resolution.
pub const DENSITY_SETTLE_REL_TOL: f64 = 1e-3;

/// Nominal Monte Carlo sample count per partially covered cell in
/// ball-overlap volumes (stratified, fixed per-cell seeds).
pub const OVERLAP_SAMPLES_PER_CELL: usize = 10_000;

const OVERLAP_SEED: u64 = 0x7A5E_D0C5_11AB_90E3;

/// Cell-averaged density on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    #[serde(flatten)]
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "density has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("density values must be finite"));
        }
        Ok(GridDensity { grid, values })
    }

    /// Sample a function at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        GridDensity::new(grid, values)
    }
}

/// Region kinds accepted by `RadonMeasure::restrict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// Closed ball `|x - center| ≤ radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Open complement `|x - center| > radius`.
    BallComplement { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => geom::dist(p, center) <= *radius,
            Region::BallComplement { center, radius } => geom::dist(p, center) > *radius,
        }
    }

    pub fn complement(&self) -> Region {
        match self {
            Region::Ball { center, radius } => Region::BallComplement {
                center: center.clone(),
                radius: *radius,
            },
            Region::BallComplement { center, radius } => Region::Ball {
                center: center.clone(),
                radius: *radius,
            },
        }
    }
}

/// Ball averages of a measure around a point, with the extrapolated local
/// density when the averages settle.
#[derive(Debug, Clone, Serialize)]
pub struct DensityValue {
    pub location: Vec<f64>,
    /// `None` encodes "undefined": the averages did not settle.
    pub value: Option<f64>,
    pub radii_used: Vec<f64>,
    pub averages: Vec<f64>,
}

/// Finite signed Radon measure: `Σ wᵢ·δ_{aᵢ} + density·Lebesgue`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadonMeasure {
    pub dimension: usize,
    pub atoms: Vec<(Vec<f64>, f64)>,
    #[serde(default)]
    pub density: Option<GridDensity>,
}

impl RadonMeasure {
    pub fn new(
        dimension: usize,
        atoms: Vec<(Vec<f64>, f64)>,
        density: Option<GridDensity>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("measure dimension must be positive"));
        }
        for (loc, w) in &atoms {
            if loc.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: loc.len(),
                });
            }
            if !w.is_finite() || loc.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("atom locations and weights must be finite"));
            }
        }
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                if atoms[i].0 == atoms[j].0 {
                    return Err(Error::invalid(format!(
                        "duplicate atom location {:?}",
                        atoms[i].0
                    )));
                }
            }
        }
        if let Some(d) = &density {
            if d.grid.dim() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: d.grid.dim(),
                });
            }
        }
        Ok(RadonMeasure {
            dimension,
            atoms,
            density,
        })
    }

    pub fn zero(dimension: usize) -> Self {
        RadonMeasure {
            dimension,
            atoms: Vec::new(),
            density: None,
        }
    }

    pub fn from_atoms(dimension: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        RadonMeasure::new(dimension, atoms, None)
    }

    pub fn from_density(density: GridDensity) -> Result<Self> {
        let dim = density.grid.dim();
        RadonMeasure::new(dim, Vec::new(), Some(density))
    }

    /// Total variation `Σ|wᵢ| + hᴺ·Σ|ρ_c|`; exact for this representation.
    pub fn total_variation(&self) -> f64 {
        let atom_part: f64 = self.atoms.iter().map(|(_, w)| w.abs()).sum();
        let density_part: f64 = self
            .density
            .as_ref()
            .map(|d| d.grid.cell_volume() * d.values.iter().map(|v| v.abs()).sum::<f64>())
            .unwrap_or(0.0);
        atom_part + density_part
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|(_, w)| *w >= 0.0)
            && self
                .density
                .as_ref()
                .map(|d| d.values.iter().all(|v| *v >= 0.0))
                .unwrap_or(true)
    }

    /// Restriction to a region: atoms by membership, density cells by
    /// cell-center membership, so restricting to a region and to its
    /// complement partitions the measure exactly.
    pub fn restrict(&self, region: &Region) -> RadonMeasure {
        let atoms = self
            .atoms
            .iter()
            .filter(|(loc, _)| region.contains(loc))
            .cloned()
            .collect();
        let density = self.density.as_ref().map(|d| {
            let values = (0..d.grid.len())
                .map(|i| {
                    if region.contains(&d.grid.center(i)) {
                        d.values[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            GridDensity {
                grid: d.grid.clone(),
                values,
            }
        });
        RadonMeasure {
            dimension: self.dimension,
            atoms,
            density,
        }
    }

    pub fn translate(&self, shift: &[f64]) -> RadonMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|(loc, w)| (geom::add(loc, shift), *w))
            .collect();
        let density = self.density.as_ref().map(|d| GridDensity {
            grid: Grid {
                origin: geom::add(&d.grid.origin, shift),
                h: d.grid.h,
                shape: d.grid.shape.clone(),
            },
            values: d.values.clone(),
        });
        RadonMeasure {
            dimension: self.dimension,
            atoms,
            density,
        }
    }

    pub fn scaled(&self, factor: f64) -> RadonMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|(loc, w)| (loc.clone(), w * factor))
            .collect();
        let density = self.density.as_ref().map(|d| GridDensity {
            grid: d.grid.clone(),
            values: d.values.iter().map(|v| v * factor).collect(),
        });
        RadonMeasure {
            dimension: self.dimension,
            atoms,
            density,
        }
    }

    /// Sum of two measures. Densities must live on the same grid (or be
    /// absent); coincident atoms merge their weights.
    pub fn try_add(&self, other: &RadonMeasure) -> Result<RadonMeasure> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        let mut atoms = self.atoms.clone();
        for (loc, w) in &other.atoms {
            if let Some(entry) = atoms.iter_mut().find(|(l, _)| l == loc) {
                entry.1 += w;
            } else {
                atoms.push((loc.clone(), *w));
            }
        }
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(a), Some(b)) => {
                if a.grid != b.grid {
                    return Err(Error::invalid(
                        "cannot add measures with densities on different grids",
                    ));
                }
                Some(GridDensity {
                    grid: a.grid.clone(),
                    values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
                })
            }
        };
        RadonMeasure::new(self.dimension, atoms, density)
    }

    /// Bounding box of atoms and density support, `None` for the zero measure.
    pub fn support_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let dim = self.dimension;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut any = false;
        for (loc, w) in &self.atoms {
            if *w != 0.0 {
                any = true;
                for ax in 0..dim {
                    lo[ax] = lo[ax].min(loc[ax]);
                    hi[ax] = hi[ax].max(loc[ax]);
                }
            }
        }
        if let Some(d) = &self.density {
            for i in 0..d.grid.len() {
                if d.values[i] != 0.0 {
                    any = true;
                    let (clo, chi) = d.grid.cell_bounds(i);
                    for ax in 0..dim {
                        lo[ax] = lo[ax].min(clo[ax]);
                        hi[ax] = hi[ax].max(chi[ax]);
                    }
                }
            }
        }
        if any {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Distance from a point to the measure's support (atoms and nonzero
    /// density cells).
    pub fn distance_to_support(&self, p: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for (loc, w) in &self.atoms {
            if *w != 0.0 {
                best = best.min(geom::dist(p, loc));
            }
        }
        if let Some(d) = &self.density {
            for i in 0..d.grid.len() {
                if d.values[i] != 0.0 {
                    let (lo, hi) = d.grid.cell_bounds(i);
                    let gap_sq: f64 = (0..self.dimension)
                        .map(|ax| {
                            let g = (lo[ax] - p[ax]).max(p[ax] - hi[ax]).max(0.0);
                            g * g
                        })
                        .sum();
                    best = best.min(gap_sq.sqrt());
                }
            }
        }
        best
    }

    /// Measure of the closed ball `B(a, r)`. Atoms enter exactly; density
    /// cells enter exactly when fully inside or fully containing the ball,
    /// and through a stratified fixed-seed Monte Carlo overlap volume when
    /// the boundary crosses them.
    pub fn ball_mass(&self, a: &[f64], r: f64) -> f64 {
        let mut mass: f64 = self
            .atoms
            .iter()
            .filter(|(loc, _)| geom::dist(loc, a) <= r)
            .map(|(_, w)| w)
            .sum();
        if let Some(d) = &self.density {
            let vol_ball = geom::unit_ball_volume(self.dimension) * r.powi(self.dimension as i32);
            for flat in d.grid.cells_near_ball(a, r) {
                let v = d.values[flat];
                if v == 0.0 {
                    continue;
                }
                let (lo, hi) = d.grid.cell_bounds(flat);
                let overlap = match classify_cube_ball(&lo, &hi, a, r) {
                    CubeBallRelation::Disjoint => 0.0,
                    CubeBallRelation::CubeInsideBall => d.grid.cell_volume(),
                    CubeBallRelation::BallInsideCube => vol_ball,
                    CubeBallRelation::Partial => cell_ball_overlap(&lo, &hi, a, r, flat),
                };
                mass += v * overlap;
            }
        }
        mass
    }

    /// Ball averages `μ(B(a, r))/|B(a, r)|` along a decreasing radius list,
    /// extrapolated to the local density when the last three agree within
    /// `DENSITY_SETTLE_REL_TOL`.
    pub fn density_at(&self, a: &[f64], radii: &[f64]) -> Result<DensityValue> {
        if radii.is_empty() {
            return Err(Error::EmptyInput("density radius list"));
        }
        for pair in radii.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err(Error::invalid("density radii must be strictly decreasing"));
            }
        }
        let r_min = radii[radii.len() - 1];
        if !(r_min > 0.0) {
            return Err(Error::invalid("density radii must be positive"));
        }
        if let Some(d) = &self.density {
            if r_min < d.grid.h / 4.0 * (1.0 - 1e-12) {
                return Err(Error::invalid(format!(
                    "smallest density radius {r_min} is below h/4 = {}; the cell-averaged model \
                     is exact there",
                    d.grid.h / 4.0
                )));
            }
        }
        let vn = geom::unit_ball_volume(self.dimension);
        let averages: Vec<f64> = radii
            .iter()
            .map(|&r| self.ball_mass(a, r) / (vn * r.powi(self.dimension as i32)))
            .collect();
        let value = if averages.len() >= 3 {
            let tail = &averages[averages.len() - 3..];
            let settled = tail.iter().all(|&u| {
                tail.iter()
                    .all(|&v| (u - v).abs() <= DENSITY_SETTLE_REL_TOL * u.abs().max(v.abs()) + 1e-12)
            });
            settled.then(|| tail.iter().sum::<f64>() / 3.0)
        } else {
            None
        };
        Ok(DensityValue {
            location: a.to_vec(),
            value,
            radii_used: radii.to_vec(),
            averages,
        })
    }

    /// Default radius list for `density_at`: tied to the grid resolution
    /// when a density is present, a dyadic sweep otherwise. The small radii
    /// stay strictly inside half a cell so that at cell centers the ball
    /// sits in a single cell and the averages settle exactly.
    pub fn default_density_radii(&self) -> Vec<f64> {
        match &self.density {
            Some(d) => {
                let h = d.grid.h;
                vec![2.0 * h, h, 0.45 * h, h / 3.0, h / 4.0]
            }
            None => (0..=14).map(|j| 2.0f64.powi(-j)).collect(),
        }
    }

    /// Mollification `μ ⋆ φ_r` with the C¹ bump
    /// `φ(z) = c_φ·(1 - |z|²)²` on `|z| < 1`, returned as cell averages on
    /// a grid of step `h_out` (defaults to `r/4`, must not exceed it).
    pub fn mollify(&self, r: f64, h_out: Option<f64>) -> Result<RadonMeasure> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!(
                "mollification radius must be positive, got {r}"
            )));
        }
        let h_out = h_out.unwrap_or(r / 4.0);
        if !(h_out > 0.0) || h_out > r / 4.0 * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "mollified grid step must satisfy 0 < h_out ≤ r/4, got {h_out}"
            )));
        }
        let Some((lo, hi)) = self.support_bounds() else {
            return Ok(RadonMeasure::zero(self.dimension));
        };
        let dim = self.dimension;
        let pad = r + h_out;
        let wlo: Vec<f64> = lo.iter().map(|v| v - pad).collect();
        let whi: Vec<f64> = hi.iter().map(|v| v + pad).collect();
        let grid = Grid::covering(&wlo, &whi, h_out)?;
        let bump = MollifierBump::new(dim, r);

        let mut values = vec![0.0; grid.len()];
        let reach = r + 0.5 * h_out * (dim as f64).sqrt();
        for (flat, value) in values.iter_mut().enumerate() {
            let (tlo, thi) = grid.cell_bounds(flat);
            let tcenter = grid.center(flat);
            let mut acc = 0.0;
            for (loc, w) in &self.atoms {
                if geom::dist(loc, &tcenter) <= reach {
                    acc += w * integrate_box(&tlo, &thi, 3, &mut |x| bump.eval(&geom::sub(x, loc)));
                }
            }
            if let Some(d) = &self.density {
                let src_reach = reach + 0.5 * d.grid.h * (dim as f64).sqrt();
                for src in d.grid.cells_near_ball(&tcenter, src_reach) {
                    let v = d.values[src];
                    if v == 0.0 {
                        continue;
                    }
                    let (slo, shi) = d.grid.cell_bounds(src);
                    acc += v
                        * integrate_box(&tlo, &thi, 3, &mut |x| {
                            integrate_box(&slo, &shi, 3, &mut |y| bump.eval(&geom::sub(x, y)))
                        });
                }
            }
            *value = acc / grid.cell_volume();
        }
        RadonMeasure::new(dim, Vec::new(), Some(GridDensity::new(grid, values)?))
    }

    /// Atoms with equal weights approximating the uniform surface measure
    /// of total mass `total_weight` on the sphere `|x - center| = radius`
    /// (Fibonacci lattice for N = 3, equal angles for N = 2).
    pub fn sphere_shell_atoms(
        center: &[f64],
        radius: f64,
        count: usize,
        total_weight: f64,
    ) -> Result<RadonMeasure> {
        let dim = center.len();
        if !(radius > 0.0) || count == 0 {
            return Err(Error::invalid(
                "sphere shell needs a positive radius and atom count",
            ));
        }
        let w = total_weight / count as f64;
        let atoms: Vec<(Vec<f64>, f64)> = match dim {
            2 => (0..count)
                .map(|i| {
                    let theta = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / count as f64;
                    (
                        vec![
                            center[0] + radius * theta.cos(),
                            center[1] + radius * theta.sin(),
                        ],
                        w,
                    )
                })
                .collect(),
            3 => {
                let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
                (0..count)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                        let rho = (1.0 - z * z).max(0.0).sqrt();
                        let phi = golden * i as f64;
                        (
                            vec![
                                center[0] + radius * rho * phi.cos(),
                                center[1] + radius * rho * phi.sin(),
                                center[2] + radius * z,
                            ],
                            w,
                        )
                    })
                    .collect()
            }
            d => return Err(Error::UnsupportedDimension(d)),
        };
        RadonMeasure::from_atoms(dim, atoms)
    }

    /// Seeded nonnegative atom measure with unit total variation, uniform
    /// locations in `window`.
    pub fn seeded_unit_atoms(window: &AxisBox, count: usize, seed: u64) -> Result<RadonMeasure> {
        if count == 0 {
            return Err(Error::invalid("atom count must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = window.dim();
        let mut atoms: Vec<(Vec<f64>, f64)> = (0..count)
            .map(|_| {
                let loc: Vec<f64> = (0..dim)
                    .map(|ax| rng.random_range(window.lo[ax]..window.hi[ax]))
                    .collect();
                let w: f64 = rng.random_range(0.2..1.0);
                (loc, w)
            })
            .collect();
        let total: f64 = atoms.iter().map(|(_, w)| *w).sum();
        for (_, w) in &mut atoms {
            *w /= total;
        }
        RadonMeasure::from_atoms(dim, atoms)
    }
}

/// Normalized C¹ bump `φ_r(z) = c_φ·r^{-N}·(1 - |z/r|²)²` on `|z| < r`.
pub struct MollifierBump {
    dim: usize,
    r: f64,
    norm_const: f64,
}

impl MollifierBump {
    pub fn new(dim: usize, r: f64) -> Self {
        let n = dim as f64;
        // ∫_{B(0,1)} (1-|z|²)² dz = ω_N·(1/N - 2/(N+2) + 1/(N+4))
        let radial = 1.0 / n - 2.0 / (n + 2.0) + 1.0 / (n + 4.0);
        let norm_const = 1.0 / (geom::unit_sphere_area(dim) * radial);
        MollifierBump { dim, r, norm_const }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let t = geom::dot(z, z) / (self.r * self.r);
        if t >= 1.0 {
            0.0
        } else {
            self.norm_const / self.r.powi(self.dim as i32) * (1.0 - t) * (1.0 - t)
        }
    }
}

/// Stratified jittered Monte Carlo estimate of `|cell ∩ B(a, r)|` with a
/// deterministic per-cell stream.
fn cell_ball_overlap(lo: &[f64], hi: &[f64], a: &[f64], r: f64, cell_index: usize) -> f64 {
    let dim = lo.len();
    let strata_per_axis = match dim {
        1 => OVERLAP_SAMPLES_PER_CELL,
        2 => 100,
        3 => 21,
        _ => (OVERLAP_SAMPLES_PER_CELL as f64)
            .powf(1.0 / dim as f64)
            .round() as usize,
    };
    let mut stream =
        SplitMix64::new(OVERLAP_SEED ^ (cell_index as u64).wrapping_mul(0x9E3779B97F4A7C15));
    let r_sq = r * r;
    let mut inside = 0usize;
    let mut total = 0usize;
    let shape = vec![strata_per_axis; dim];
    let mut idx = vec![0usize; dim];
    loop {
        let mut d_sq = 0.0;
        for ax in 0..dim {
            let t = (idx[ax] as f64 + stream.next_f64()) / strata_per_axis as f64;
            let x = lo[ax] + t * (hi[ax] - lo[ax]);
            d_sq += (x - a[ax]) * (x - a[ax]);
        }
        if d_sq <= r_sq {
            inside += 1;
        }
        total += 1;
        let mut ax = dim;
        loop {
            if ax == 0 {
                let volume: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
                return volume * inside as f64 / total as f64;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}
