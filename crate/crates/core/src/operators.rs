//! Field evaluation: the potential `K ⋆ μ`, the Hardy–Littlewood maximal
//! function of a measure, truncated and maximal singular integrals of
//! `∇K`, and the gradient of the potential assembled from the truncated
//! limit, the surface-flux vector and the local density.
//!
//! Suprema are taken over explicit radius and truncation lists, so maximal
//! values are lower bounds for the true suprema; limits report a
//! converged value or are flagged undefined when the tail does not settle.

use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{self, max_abs_diff};
use crate::kernels::{pv_vector_along, Kernel, PvOutcome};
use crate::measures::{DensityValue, RadonMeasure};
use crate::quad::integrate_box_singular;
use crate::{Error, Result};

/// Evaluation points closer than this to an atom get the +∞ flag instead
/// of a potential value.
pub const ATOM_EXCLUSION_DIST: f64 = 1e-12;

/// Two truncated singular integrals closer than this (max-entry) are
/// treated as equal when deciding that the truncation limit exists.
pub const TRUNCATION_SETTLE_TOL: f64 = 1e-6;

/// Default quadrature order passed to the surface-flux rule.
pub const DEFAULT_FLUX_ORDER: usize = 64;

/// Strictly decreasing truncation radii; the default is dyadic,
/// `ε_j = 2^{-j}` for `j = 0..=40`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSchedule {
    entries: Vec<f64>,
}

impl EpsilonSchedule {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 3 {
            return Err(Error::invalid("schedule needs at least 3 entries"));
        }
        for pair in entries.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err(Error::invalid("schedule must be strictly decreasing"));
            }
        }
        if !(entries[entries.len() - 1] > 0.0) {
            return Err(Error::invalid("schedule entries must be positive"));
        }
        Ok(EpsilonSchedule { entries })
    }

    pub fn dyadic(max_exponent: u32) -> Self {
        EpsilonSchedule {
            entries: (0..=max_exponent)
                .map(|j| 2.0f64.powi(-(j as i32)))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule::dyadic(40)
    }
}

/// Geometric radius list from `r_min` up to at least `r_max` (factor √2),
/// for maximal-function evaluation.
pub fn geometric_radii(r_min: f64, r_max: f64) -> Vec<f64> {
    assert!(r_min > 0.0 && r_max > r_min);
    let factor = std::f64::consts::SQRT_2;
    let mut radii = vec![r_min];
    while *radii.last().unwrap() < r_max {
        let next = radii.last().unwrap() * factor;
        radii.push(next);
    }
    radii
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldKind {
    Potential,
    Gradient,
    Maximal,
    TruncatedSingular,
    MaximalSingular,
    Remainder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FieldValues {
    Scalar(Vec<f64>),
    Vector(Vec<Vec<f64>>),
}

/// Values of a scalar or vector field on an evaluation point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub points: Vec<Vec<f64>>,
    pub values: FieldValues,
    pub kind: FieldKind,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn scalars(&self) -> &[f64] {
        match &self.values {
            FieldValues::Scalar(v) => v,
            FieldValues::Vector(_) => panic!("scalar access to a vector field"),
        }
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        match &self.values {
            FieldValues::Vector(v) => v,
            FieldValues::Scalar(_) => panic!("vector access to a scalar field"),
        }
    }

    /// One CSV row per point: coordinates then value components.
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> std::io::Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            match &self.values {
                FieldValues::Scalar(v) => row.push(format!("{}", v[i])),
                FieldValues::Vector(v) => row.extend(v[i].iter().map(|c| format!("{c}"))),
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_dims(k: &Kernel, mu: &RadonMeasure, points: &[Vec<f64>]) -> Result<()> {
    if k.dimension() != mu.dimension {
        return Err(Error::DimensionMismatch {
            expected: k.dimension(),
            found: mu.dimension,
        });
    }
    for p in points {
        if p.len() != k.dimension() {
            return Err(Error::DimensionMismatch {
                expected: k.dimension(),
                found: p.len(),
            });
        }
    }
    Ok(())
}

/// Density cell centers flattened to one contiguous buffer (stride = dim),
/// precomputed once per operator call so the per-point loops stay
/// allocation-free.
pub(crate) fn flattened_centers(mu: &RadonMeasure) -> Vec<f64> {
    match &mu.density {
        Some(d) => {
            let dim = d.grid.dim();
            let mut flat = Vec::with_capacity(d.grid.len() * dim);
            for i in 0..d.grid.len() {
                flat.extend_from_slice(&d.grid.center(i));
            }
            flat
        }
        None => Vec::new(),
    }
}

fn potential_at_with(k: &Kernel, mu: &RadonMeasure, centers_flat: &[f64], x: &[f64]) -> f64 {
    let dim = k.dimension();
    let mut acc = 0.0;
    for (loc, w) in &mu.atoms {
        if geom::dist(loc, x) < ATOM_EXCLUSION_DIST {
            return f64::INFINITY;
        }
        acc += w * k.value_of_diff(x, loc);
    }
    if let Some(d) = &mu.density {
        let cell_vol = d.grid.cell_volume();
        let own_cell = d.grid.cell_containing(x);
        for flat in 0..d.grid.len() {
            let v = d.values[flat];
            if v == 0.0 {
                continue;
            }
            if own_cell == Some(flat) {
                // singular self-cell term: integrate K over the cell
                let (lo, hi) = d.grid.cell_bounds(flat);
                acc += v * integrate_box_singular(&lo, &hi, x, 5, &mut |y| {
                    k.value(&geom::sub(x, y))
                });
            } else {
                acc += v * cell_vol * k.value_of_diff(x, &centers_flat[flat * dim..][..dim]);
            }
        }
    }
    acc
}

#[cfg(test)]
pub(crate) fn potential_at(k: &Kernel, mu: &RadonMeasure, x: &[f64]) -> f64 {
    potential_at_with(k, mu, &flattened_centers(mu), x)
}

/// The potential `K ⋆ μ` at each point: direct summation over atoms and
/// density cell centers, with the singular self-cell integrated by a
/// split Gauss rule. Points within `ATOM_EXCLUSION_DIST` of an atom are
/// flagged +∞.
pub fn potential(k: &Kernel, mu: &RadonMeasure, points: &[Vec<f64>]) -> Result<FieldSample> {
    check_dims(k, mu, points)?;
    let centers_flat = flattened_centers(mu);
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| potential_at_with(k, mu, &centers_flat, x))
        .collect();
    Ok(FieldSample {
        points: points.to_vec(),
        values: FieldValues::Scalar(values),
        kind: FieldKind::Potential,
    })
}

/// Hardy–Littlewood maximal function over the given radius list:
/// `max_r |μ(B(x, r))| / |B(x, r)|`, a lower bound for the supremum over
/// all radii.
pub fn maximal_function(
    mu: &RadonMeasure,
    points: &[Vec<f64>],
    radii: &[f64],
) -> Result<FieldSample> {
    if radii.is_empty() {
        return Err(Error::EmptyInput("maximal-function radius list"));
    }
    for pair in radii.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::invalid("radius list must be strictly increasing"));
        }
    }
    if !(radii[0] > 0.0) {
        return Err(Error::invalid("radii must be positive"));
    }
    for p in points {
        if p.len() != mu.dimension {
            return Err(Error::DimensionMismatch {
                expected: mu.dimension,
                found: p.len(),
            });
        }
    }
    let vn = geom::unit_ball_volume(mu.dimension);
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| {
            radii
                .iter()
                .map(|&r| mu.ball_mass(x, r).abs() / (vn * r.powi(mu.dimension as i32)))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(FieldSample {
        points: points.to_vec(),
        values: FieldValues::Scalar(values),
        kind: FieldKind::Maximal,
    })
}

/// Truncated singular integral `∫_{|x-y| > ε} ∇K(x-y) dμ(y)`. Atoms sum
/// directly; density cells enter through their centers when the center
/// clears the cutoff (the cutoff itself removes the singularity).
pub fn truncated_singular(k: &Kernel, mu: &RadonMeasure, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_dims(k, mu, std::slice::from_ref(&x.to_vec()))?;
    if !(eps > 0.0) {
        return Err(Error::invalid(format!(
            "truncation radius must be positive, got {eps}"
        )));
    }
    Ok(truncated_singular_with(k, mu, &flattened_centers(mu), x, eps))
}

pub(crate) fn truncated_singular_with(
    k: &Kernel,
    mu: &RadonMeasure,
    centers_flat: &[f64],
    x: &[f64],
    eps: f64,
) -> Vec<f64> {
    let dim = k.dimension();
    let eps_sq = eps * eps;
    let mut acc = vec![0.0; dim];
    for (loc, w) in &mu.atoms {
        if dist_sq(x, loc) > eps_sq {
            k.add_scaled_gradient(x, loc, *w, &mut acc);
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
            if dist_sq(x, c) > eps_sq {
                k.add_scaled_gradient(x, c, v * cell_vol, &mut acc);
            }
        }
    }
    acc
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ax in 0..a.len() {
        let d = a[ax] - b[ax];
        acc += d * d;
    }
    acc
}

/// Maximal singular integral `max_ε |T_ε(μ)(x)|` (Euclidean norm) over the
/// schedule; a lower bound for the supremum over all truncations.
pub fn maximal_singular(
    k: &Kernel,
    mu: &RadonMeasure,
    points: &[Vec<f64>],
    schedule: &EpsilonSchedule,
) -> Result<FieldSample> {
    check_dims(k, mu, points)?;
    let centers_flat = flattened_centers(mu);
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| {
            schedule
                .entries()
                .iter()
                .map(|&eps| geom::norm(&truncated_singular_with(k, mu, &centers_flat, x, eps)))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(FieldSample {
        points: points.to_vec(),
        values: FieldValues::Scalar(values),
        kind: FieldKind::MaximalSingular,
    })
}

/// The gradient of `K ⋆ μ` at `a`, split as truncated limit plus flux
/// times local density.
#[derive(Debug, Clone, Serialize)]
pub struct GradientPotential {
    /// `T(μ)(a) + L⃗·μ̃(a)` when all three ingredients are defined.
    pub value: Option<Vec<f64>>,
    /// Limit of the truncated singular integrals along the schedule.
    pub principal_value: Option<Vec<f64>>,
    /// Flux vector `L⃗` along the schedule, when it converges.
    pub flux_vector: Option<Vec<f64>>,
    pub local_density: DensityValue,
}

/// Evaluate `(∇K ⋆ μ)(a) = T(μ)(a) + L⃗·μ̃(a)` along the given truncation
/// schedule. Any ingredient that fails to settle makes the value
/// undefined; that marks the almost-everywhere exceptional set, not a
/// failure.
pub fn gradient_potential(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    schedule: &EpsilonSchedule,
) -> Result<GradientPotential> {
    check_dims(k, mu, std::slice::from_ref(&a.to_vec()))?;
    // truncated limit
    let centers_flat = flattened_centers(mu);
    let truncs: Vec<Vec<f64>> = schedule
        .entries()
        .iter()
        .map(|&eps| truncated_singular_with(k, mu, &centers_flat, a, eps))
        .collect();
    let tail = &truncs[truncs.len() - 3..];
    let settled = tail
        .iter()
        .flat_map(|u| tail.iter().map(move |v| max_abs_diff(u, v)))
        .all(|d| d <= TRUNCATION_SETTLE_TOL);
    let principal_value = settled.then(|| tail[2].clone());

    // flux vector along the same schedule
    let flux_vector = match pv_vector_along(k, schedule.entries(), DEFAULT_FLUX_ORDER)? {
        PvOutcome::Converged { limit, .. } => Some(limit),
        PvOutcome::Diverged { .. } => None,
    };

    let local_density = mu.density_at(a, &mu.default_density_radii())?;

    let value = match (&principal_value, &flux_vector, local_density.value) {
        (Some(t), Some(l), Some(dens)) => {
            Some(t.iter().zip(l).map(|(ti, li)| ti + li * dens).collect())
        }
        _ => None,
    };
    Ok(GradientPotential {
        value,
        principal_value,
        flux_vector,
        local_density,
    })
}
