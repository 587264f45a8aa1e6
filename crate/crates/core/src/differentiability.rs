//! First-order remainder functionals on shrinking balls: the normalized
//! weak-capacity index of differentiability in the capacity sense, its
//! maximal version over radii, and the comparison Lᵖ and weak-Lᵖ indices
//! with Lebesgue measure in place of capacity.
//!
//! The remainder of `u = K ⋆ μ` at `a` with candidate gradient `v` is
//! `|u(x) - u(a) - v·(x-a)| / |x-a|`, sampled on a cell window around `a`
//! that excludes the center cell (the quotient is defined for x ≠ a).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::capacity::{self, DiscreteSet};
use crate::geom;
use crate::kernels::Kernel;
use crate::measures::RadonMeasure;
use crate::operators::{self, EpsilonSchedule, FieldKind, FieldSample, FieldValues};
use crate::{Error, Result};

/// Default mesh divisor: each window of radius `r` is gridded at `h = r/16`.
pub const DEFAULT_MESH_RATIO: usize = 16;

/// Default dyadic exponent range for threshold grids, scaled by the field
/// median.
pub const DEFAULT_T_EXPONENTS: std::ops::RangeInclusive<i32> = -10..=20;

/// Options shared by the per-radius indices.
#[derive(Debug, Clone)]
pub struct DiffOptions {
    /// Window mesh is `radius / mesh_ratio`.
    pub mesh_ratio: usize,
    /// Thresholds are `median·2^k` for `k` in this range.
    pub t_exponents: std::ops::RangeInclusive<i32>,
}

impl Default for DiffOptions {
    fn default() -> Self {
        DiffOptions {
            mesh_ratio: DEFAULT_MESH_RATIO,
            t_exponents: DEFAULT_T_EXPONENTS,
        }
    }
}

/// Dyadic threshold grid scaled by the median of the (nonnegative) field
/// values; the sup over such a grid sits within a factor 2 of the sup over
/// all thresholds.
pub fn dyadic_t_samples(values: &[f64], exponents: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2].max(1e-300);
    exponents.map(|k| median * 2.0f64.powi(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiffVerdict {
    DifferentiableTrend,
    Inconclusive,
}

/// Per-radius capacity-sense differentiability indices and the decay
/// verdict over the final radius halvings.
#[derive(Debug, Clone, Serialize)]
pub struct DiffReport {
    pub center: Vec<f64>,
    pub gradient: Vec<f64>,
    pub radii: Vec<f64>,
    pub per_radius_index: Vec<f64>,
    pub verdict: DiffVerdict,
}

/// Remainder quotient field on the window `B(a, radius)` gridded at mesh
/// `h`, excluding the cell at the center.
pub fn remainder_field(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    gradient: &[f64],
    radius: f64,
    h: f64,
) -> Result<FieldSample> {
    let (points, values) = remainder_window(k, mu, a, gradient, radius, h)?;
    Ok(FieldSample {
        points,
        values: FieldValues::Scalar(values),
        kind: FieldKind::Remainder,
    })
}

/// Window cells (centers on the lattice `a + i·h`, center cell excluded)
/// and remainder values.
fn remainder_window(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    gradient: &[f64],
    radius: f64,
    h: f64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("window radius must be positive, got {radius}")));
    }
    if !(h > 0.0) || h > radius / 8.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "window mesh must satisfy 0 < h ≤ radius/8, got h = {h} for radius {radius}"
        )));
    }
    if gradient.len() != k.dimension() || a.len() != k.dimension() {
        return Err(Error::DimensionMismatch {
            expected: k.dimension(),
            found: gradient.len().max(a.len()),
        });
    }
    let u_center = operators::potential(k, mu, std::slice::from_ref(&a.to_vec()))?.scalars()[0];
    if !u_center.is_finite() {
        return Err(Error::AtomCollision(a.to_vec()));
    }
    let dim = k.dimension();
    let m = (radius / h).ceil() as isize;
    let mut centers = Vec::new();
    let mut idx = vec![-m; dim];
    'outer: loop {
        if idx.iter().any(|&i| i != 0) {
            let c: Vec<f64> = (0..dim)
                .map(|ax| a[ax] + idx[ax] as f64 * h)
                .collect();
            if geom::dist(&c, a) <= radius {
                centers.push(c);
            }
        }
        let mut ax = dim;
        loop {
            if ax == 0 {
                break 'outer;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] <= m {
                break;
            }
            idx[ax] = -m;
        }
    }
    let field = operators::potential(k, mu, &centers)?;
    let values: Vec<f64> = centers
        .iter()
        .zip(field.scalars())
        .map(|(x, &u)| {
            let dx = geom::sub(x, a);
            (u - u_center - geom::dot(gradient, &dx)).abs() / geom::norm(&dx)
        })
        .collect();
    Ok((centers, values))
}

/// Ball capacity at the window's own anchored lattice. The program is
/// translation invariant, so the value depends only on (dim, radius,
/// mesh) and is memoized across calls.
fn ball_capacity_cached(dim: usize, radius: f64, h: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (dim, radius.to_bits(), h.to_bits());
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let value =
        capacity::capacity_lp(&DiscreteSet::ball(dim, &vec![0.0; dim], radius, h)?, 1)?.value;
    cache.lock().unwrap().insert(key, value);
    Ok(value)
}

/// `sup_t t·Cap_est({remainder > t}) / Cap_est(B(a, r))` for one radius.
/// Thresholds descend; once `t·Cap(ball)` (with slack for estimator
/// non-monotonicity) falls below the running sup, smaller thresholds
/// cannot contribute and are skipped.
fn capacity_index_for_radius(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    gradient: &[f64],
    radius: f64,
    options: &DiffOptions,
) -> Result<f64> {
    let h = radius / options.mesh_ratio as f64;
    let (cells, rem) = remainder_window(k, mu, a, gradient, radius, h)?;
    let ball_value = ball_capacity_cached(k.dimension(), radius, h)?;
    let mut thresholds = dyadic_t_samples(&rem, options.t_exponents.clone());
    thresholds.sort_by(|x, y| y.total_cmp(x));
    let mut sup = 0.0f64;
    for &t in &thresholds {
        if t * ball_value * 1.2 <= sup {
            break;
        }
        let over: Vec<Vec<f64>> = cells
            .iter()
            .zip(&rem)
            .filter(|(_, v)| **v > t)
            .map(|(c, _)| c.clone())
            .collect();
        if over.is_empty() {
            continue;
        }
        let cap = capacity::capacity_lp(&DiscreteSet::from_centers(k.dimension(), h, over)?, 1)?;
        sup = sup.max(t * cap.value);
    }
    Ok(sup / ball_value)
}

/// Capacity-sense differentiability index along decreasing radii, with the
/// trend verdict: decay by at least a factor 2 over each of the last two
/// radius halvings.
pub fn capacity_diff_index(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    gradient: &[f64],
    radii: &[f64],
    options: &DiffOptions,
) -> Result<DiffReport> {
    validate_radii(radii)?;
    let per_radius_index: Vec<f64> = radii
        .iter()
        .map(|&r| capacity_index_for_radius(k, mu, a, gradient, r, options))
        .collect::<Result<_>>()?;
    let verdict = trend_verdict(radii, &per_radius_index);
    Ok(DiffReport {
        center: a.to_vec(),
        gradient: gradient.to_vec(),
        radii: radii.to_vec(),
        per_radius_index,
        verdict,
    })
}

fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::EmptyInput("radius list"));
    }
    for pair in radii.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::invalid("radii must be strictly decreasing"));
        }
    }
    if !(radii[radii.len() - 1] > 0.0) {
        return Err(Error::invalid("radii must be positive"));
    }
    Ok(())
}

fn trend_verdict(radii: &[f64], indices: &[f64]) -> DiffVerdict {
    if radii.len() < 3 {
        return DiffVerdict::Inconclusive;
    }
    // factor-2 decay per radius halving, with 5% slack: the smooth case
    // decays at exactly that rate, so a strict test would flip on
    // discretization wobble
    let n = radii.len();
    for step in [n - 2, n - 1] {
        let halving = (radii[step] / radii[step - 1] - 0.5).abs() <= 0.05;
        let decays = indices[step] <= 0.5 * indices[step - 1] * 1.05;
        if !halving || !decays {
            return DiffVerdict::Inconclusive;
        }
    }
    DiffVerdict::DifferentiableTrend
}

/// The maximal normalized remainder functional: the capacity index with
/// `v = (∇K ⋆ μ)(a)`, maximized over the radius list. `None` when the
/// gradient itself is undefined at `a`.
#[derive(Debug, Clone, Serialize)]
pub struct SFunctionalReport {
    pub center: Vec<f64>,
    pub gradient: Option<Vec<f64>>,
    pub value: Option<f64>,
    pub report: Option<DiffReport>,
}

pub fn s_functional(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    radii: &[f64],
    options: &DiffOptions,
) -> Result<SFunctionalReport> {
    validate_radii(radii)?;
    let grad = operators::gradient_potential(k, mu, a, &EpsilonSchedule::default())?;
    let Some(gradient) = grad.value else {
        return Ok(SFunctionalReport {
            center: a.to_vec(),
            gradient: None,
            value: None,
            report: None,
        });
    };
    let report = capacity_diff_index(k, mu, a, &gradient, radii, options)?;
    let value = report
        .per_radius_index
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok(SFunctionalReport {
        center: a.to_vec(),
        gradient: Some(gradient),
        value: Some(value),
        report: Some(report),
    })
}

/// Normalized Lᵖ means of the remainder over shrinking windows,
/// `(⨍_{B(a,r)} rem^p)^{1/p}` per radius, for `1 ≤ p < N/(N-1)`.
pub fn lp_diff_index(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    gradient: &[f64],
    p: f64,
    radii: &[f64],
    options: &DiffOptions,
) -> Result<Vec<f64>> {
    let n = k.dimension() as f64;
    if !(1.0 <= p) || !(p < n / (n - 1.0)) {
        return Err(Error::invalid(format!(
            "exponent p = {p} outside [1, N/(N-1)) for N = {n}"
        )));
    }
    validate_radii(radii)?;
    radii
        .iter()
        .map(|&r| {
            let h = r / options.mesh_ratio as f64;
            let (_, rem) = remainder_window(k, mu, a, gradient, r, h)?;
            if rem.is_empty() {
                return Ok(0.0);
            }
            let mean = rem.iter().map(|v| v.powf(p)).sum::<f64>() / rem.len() as f64;
            Ok(mean.powf(1.0 / p))
        })
        .collect()
}

/// Weak Lebesgue analogue of the capacity index:
/// `r^{-N}·sup_t t^{N/(N-1)}·|{rem > t}|` per radius.
pub fn weak_lp_diff_index(
    k: &Kernel,
    mu: &RadonMeasure,
    a: &[f64],
    gradient: &[f64],
    radii: &[f64],
    options: &DiffOptions,
) -> Result<Vec<f64>> {
    validate_radii(radii)?;
    let n = k.dimension() as f64;
    let q = n / (n - 1.0);
    radii
        .iter()
        .map(|&r| {
            let h = r / options.mesh_ratio as f64;
            let (_, rem) = remainder_window(k, mu, a, gradient, r, h)?;
            let cell_vol = h.powi(k.dimension() as i32);
            let sup = dyadic_t_samples(&rem, options.t_exponents.clone())
                .into_iter()
                .map(|t| {
                    let measure = rem.iter().filter(|v| **v > t).count() as f64 * cell_vol;
                    t.powf(q) * measure
                })
                .fold(0.0, f64::max);
            Ok(sup / r.powi(k.dimension() as i32))
        })
        .collect()
}
