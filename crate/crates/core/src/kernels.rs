//! Convolution kernels with Calderón–Zygmund-type growth control:
//! `|∇ʲK(x)| ≤ C·|x|^{-(N-1+j)}` for j = 0, 1, 2 in the max-entry norm.
//!
//! Built-in kernels: the Riesz kernel `|x|^{-(N-1)}`, the Newtonian kernel
//! (`|x|^{-(N-2)}` for N ≥ 3, `log(1/|x|)` in the plane), an axially odd
//! homogeneous kernel `x_m·|x|^{-N}`, and the oscillating kernel
//! `sin(log(1/|x|))·|x|^{-(N-1)}·x₁/|x|` whose surface flux has no limit as
//! the radius shrinks.
//!
//! The module also provides growth-bound audits, the surface-flux integral
//! `∫_{|x|=ε} K(x)·x/|x| dσ(x)` and its limit along truncation sequences,
//! which is the atom coefficient in the distributional gradient of `K`.

use serde::Serialize;

use crate::geom::{self, max_abs, max_abs_diff};
use crate::quad::sphere_quadrature;
use crate::{Error, Result};

/// Sign behavior of a kernel under `x ↦ -x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Even,
    Odd,
    Neither,
}

/// Two surface fluxes whose max-entry distance is below this value are
/// treated as equal by `pv_vector_along`. Chosen well below the O(1)
/// oscillation amplitude of the oscillating kernel.
pub const PV_CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Form {
    /// `|x|^{-(N-1)}`
    Riesz,
    /// `|x|^{-(N-2)}` for N ≥ 3, `log(1/|x|)` for N = 2
    Newtonian,
    /// `sin(log(1/|x|))·|x|^{-(N-1)}·x₁/|x|`
    Oscillating,
    /// `x_m·|x|^{-N}`, homogeneous of degree -(N-1) and odd
    Axial(usize),
}

/// A kernel evaluable off the origin together with its first two
/// derivatives, its declared parity, growth constant and homogeneity.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    dimension: usize,
    growth_constant: f64,
    parity: Parity,
    homogeneity_degree: Option<f64>,
    form: Form,
}

impl Kernel {
    /// Riesz kernel `|x|^{-(N-1)}`; the kernel of the capacity definition.
    pub fn riesz(dimension: usize) -> Result<Self> {
        check_dim(dimension)?;
        let n = dimension as f64;
        Ok(Kernel {
            dimension,
            growth_constant: n * n - 1.0,
            parity: Parity::Even,
            homogeneity_degree: Some(-(n - 1.0)),
            form: Form::Riesz,
        })
    }

    /// Newtonian kernel: `|x|^{-(N-2)}` for N ≥ 3 and `log(1/|x|)` for N = 2.
    /// Its growth constant is valid on `|x| ≤ 1` only (the bound with
    /// exponent N-1 fails at infinity).
    pub fn newtonian(dimension: usize) -> Result<Self> {
        check_dim(dimension)?;
        let n = dimension as f64;
        Ok(Kernel {
            dimension,
            growth_constant: if dimension == 2 { 2.0 } else { (n - 2.0) * (n + 1.0) },
            parity: Parity::Even,
            homogeneity_degree: if dimension >= 3 { Some(-(n - 2.0)) } else { None },
            form: Form::Newtonian,
        })
    }

    /// The counterexample kernel `sin(log(1/|x|))·|x|^{-(N-1)}·x₁/|x|`: it
    /// satisfies the growth bounds but its surface flux oscillates, so the
    /// principal value of its gradient exists only along suitable sequences.
    pub fn oscillating(dimension: usize) -> Result<Self> {
        check_dim(dimension)?;
        let n = dimension as f64;
        Ok(Kernel {
            dimension,
            growth_constant: n * n + 7.0 * n + 4.0,
            parity: Parity::Odd,
            homogeneity_degree: None,
            form: Form::Oscillating,
        })
    }

    /// Odd homogeneous kernel `x_axis·|x|^{-N}` of degree -(N-1); up to the
    /// dimensional constant this is the kernel of each first derivative of
    /// the Newtonian potential.
    pub fn axial(dimension: usize, axis: usize) -> Result<Self> {
        check_dim(dimension)?;
        if axis >= dimension {
            return Err(Error::invalid(format!(
                "axis {axis} out of range for dimension {dimension}"
            )));
        }
        let n = dimension as f64;
        Ok(Kernel {
            dimension,
            growth_constant: n * n + 5.0 * n,
            parity: Parity::Odd,
            homogeneity_degree: Some(-(n - 1.0)),
            form: Form::Axial(axis),
        })
    }

    /// Kernel selection by CLI name.
    pub fn by_name(name: &str, dimension: usize) -> Result<Self> {
        match name {
            "riesz" => Kernel::riesz(dimension),
            "newtonian" => Kernel::newtonian(dimension),
            "oscillating" => Kernel::oscillating(dimension),
            other => Err(Error::invalid(format!(
                "unknown kernel '{other}' (expected riesz, newtonian or oscillating)"
            ))),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Degree of homogeneity, when the kernel is homogeneous.
    pub fn homogeneity_degree(&self) -> Option<f64> {
        self.homogeneity_degree
    }

    /// True when the surface flux is independent of the radius, i.e. the
    /// kernel is homogeneous of the critical degree -(N-1).
    pub fn has_constant_flux(&self) -> bool {
        let critical = -((self.dimension - 1) as f64);
        self.homogeneity_degree
            .map(|d| (d - critical).abs() < 1e-12)
            .unwrap_or(false)
    }

    fn check_point(&self, x: &[f64]) {
        assert_eq!(
            x.len(),
            self.dimension,
            "kernel of dimension {} evaluated at a point of dimension {}",
            self.dimension,
            x.len()
        );
        assert!(
            x.iter().any(|&v| v != 0.0),
            "kernel evaluated at the origin"
        );
    }

    /// Kernel value at `x ≠ 0`. Panics at the origin.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.check_point(x);
        let r = geom::norm(x);
        let n = self.dimension as i32;
        match self.form {
            Form::Riesz => r.powi(-(n - 1)),
            Form::Newtonian => {
                if self.dimension == 2 {
                    -r.ln()
                } else {
                    r.powi(-(n - 2))
                }
            }
            Form::Oscillating => (-r.ln()).sin() * x[0] * r.powi(-n),
            Form::Axial(m) => x[m] * r.powi(-n),
        }
    }

    /// `K(x - y)` without intermediate allocation; the hot path of the
    /// direct-summation operators. Panics when `x = y`.
    pub fn value_of_diff(&self, x: &[f64], y: &[f64]) -> f64 {
        let dim = self.dimension;
        let mut r_sq = 0.0;
        for ax in 0..dim {
            let d = x[ax] - y[ax];
            r_sq += d * d;
        }
        assert!(r_sq > 0.0, "kernel evaluated at the origin");
        let r = r_sq.sqrt();
        let n = dim as i32;
        match self.form {
            Form::Riesz => r.powi(-(n - 1)),
            Form::Newtonian => {
                if dim == 2 {
                    -r.ln()
                } else {
                    r.powi(-(n - 2))
                }
            }
            Form::Oscillating => (-r.ln()).sin() * (x[0] - y[0]) * r.powi(-n),
            Form::Axial(m) => (x[m] - y[m]) * r.powi(-n),
        }
    }

    /// Accumulate `w·∇K(x - y)` into `acc` without allocating. Panics when
    /// `x = y`.
    pub fn add_scaled_gradient(&self, x: &[f64], y: &[f64], w: f64, acc: &mut [f64]) {
        let dim = self.dimension;
        let mut r_sq = 0.0;
        for ax in 0..dim {
            let d = x[ax] - y[ax];
            r_sq += d * d;
        }
        assert!(r_sq > 0.0, "kernel gradient evaluated at the origin");
        let r = r_sq.sqrt();
        let n = dim as i32;
        match self.form {
            Form::Riesz => {
                let c = w * -((n - 1) as f64) * r.powi(-(n + 1));
                for ax in 0..dim {
                    acc[ax] += c * (x[ax] - y[ax]);
                }
            }
            Form::Newtonian => {
                let c = if dim == 2 {
                    -w / r_sq
                } else {
                    w * -((n - 2) as f64) * r.powi(-n)
                };
                for ax in 0..dim {
                    acc[ax] += c * (x[ax] - y[ax]);
                }
            }
            Form::Oscillating => {
                let log_inv = -r.ln();
                let s = log_inv.sin();
                let c = log_inv.cos();
                let rn2 = r.powi(-(n + 2));
                let coef = (n as f64 * s + c) * rn2;
                let d0 = x[0] - y[0];
                for ax in 0..dim {
                    let d = x[ax] - y[ax];
                    let kron = if ax == 0 { r_sq * rn2 * s } else { 0.0 };
                    acc[ax] += w * (kron - d0 * d * coef);
                }
            }
            Form::Axial(m) => {
                let rn = r.powi(-n);
                let rn2 = r.powi(-(n + 2));
                let dm = x[m] - y[m];
                for ax in 0..dim {
                    let d = x[ax] - y[ax];
                    let kron = if ax == m { rn } else { 0.0 };
                    acc[ax] += w * (kron - n as f64 * dm * d * rn2);
                }
            }
        }
    }

    /// Gradient of the kernel at `x ≠ 0`. Panics at the origin.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.check_point(x);
        let mut out = vec![0.0; self.dimension];
        let origin = vec![0.0; self.dimension];
        self.add_scaled_gradient(x, &origin, 1.0, &mut out);
        out
    }

    /// Hessian of the kernel at `x ≠ 0`, as a dim×dim matrix in row-major
    /// nested vectors. Panics at the origin.
    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.check_point(x);
        let dim = self.dimension;
        let n = dim as f64;
        let r = geom::norm(x);
        let radial_hessian = |a: f64| -> Vec<Vec<f64>> {
            // second derivatives of r^{-a}
            let c1 = -a * r.powi(-(a as i32) - 2);
            let c2 = a * (a + 2.0) * r.powi(-(a as i32) - 4);
            (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            let kron = if i == j { c1 } else { 0.0 };
                            kron + c2 * x[i] * x[j]
                        })
                        .collect()
                })
                .collect()
        };
        match self.form {
            Form::Riesz => radial_hessian(n - 1.0),
            Form::Newtonian => {
                if dim == 2 {
                    // second derivatives of -ln r
                    let rr = r * r;
                    (0..dim)
                        .map(|i| {
                            (0..dim)
                                .map(|j| {
                                    let kron = if i == j { -1.0 / rr } else { 0.0 };
                                    kron + 2.0 * x[i] * x[j] / (rr * rr)
                                })
                                .collect()
                        })
                        .collect()
                } else {
                    radial_hessian(n - 2.0)
                }
            }
            Form::Oscillating => {
                let s = (-r.ln()).sin();
                let c = (-r.ln()).cos();
                let rn2 = r.powi(-(dim as i32) - 2);
                let rn4 = r.powi(-(dim as i32) - 4);
                let a = n * s + c;
                let b = (1.0 - 2.0 * n - n * n) * s - (2.0 * n + 2.0) * c;
                (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|j| {
                                let mut v = 0.0;
                                if i == 0 {
                                    v -= x[j] * rn2 * a;
                                }
                                if j == 0 {
                                    v -= x[i] * rn2 * a;
                                }
                                if i == j {
                                    v -= x[0] * rn2 * a;
                                }
                                v - x[0] * x[i] * x[j] * rn4 * b
                            })
                            .collect()
                    })
                    .collect()
            }
            Form::Axial(m) => {
                let rn2 = r.powi(-(dim as i32) - 2);
                let rn4 = r.powi(-(dim as i32) - 4);
                (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|j| {
                                let mut v = 0.0;
                                if i == m {
                                    v -= n * x[j] * rn2;
                                }
                                if j == m {
                                    v -= n * x[i] * rn2;
                                }
                                if i == j {
                                    v -= n * x[m] * rn2;
                                }
                                v + n * (n + 2.0) * x[m] * x[i] * x[j] * rn4
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

fn check_dim(dimension: usize) -> Result<()> {
    if dimension < 2 {
        return Err(Error::invalid(format!(
            "kernel dimension must be at least 2, got {dimension}"
        )));
    }
    Ok(())
}

/// Outcome of a growth-bound audit: the observed maxima of
/// `|∇ʲK(x)|·|x|^{N-1+j}` over the sample set, one per derivative order.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthAudit {
    pub max_ratio: [f64; 3],
    pub growth_constant: f64,
    /// Norm used for vectors and matrices in the ratios.
    pub norm: &'static str,
    pub samples: usize,
    pub passes: bool,
}

/// Audit the growth bounds of `k` over a sample of nonzero points.
pub fn audit_growth(k: &Kernel, samples: &[Vec<f64>]) -> Result<GrowthAudit> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("growth audit sample set"));
    }
    let n = k.dimension() as f64;
    let mut max_ratio = [0.0f64; 3];
    for x in samples {
        if x.len() != k.dimension() {
            return Err(Error::DimensionMismatch {
                expected: k.dimension(),
                found: x.len(),
            });
        }
        let r = geom::norm(x);
        if r == 0.0 {
            return Err(Error::invalid("growth audit sample at the origin"));
        }
        max_ratio[0] = max_ratio[0].max(k.value(x).abs() * r.powf(n - 1.0));
        max_ratio[1] = max_ratio[1].max(max_abs(&k.gradient(x)) * r.powf(n));
        let hess = k.hessian(x);
        let hess_max = hess.iter().map(|row| max_abs(row)).fold(0.0, f64::max);
        max_ratio[2] = max_ratio[2].max(hess_max * r.powf(n + 1.0));
    }
    let c = k.growth_constant();
    Ok(GrowthAudit {
        max_ratio,
        growth_constant: c,
        norm: "max-entry",
        samples: samples.len(),
        passes: max_ratio.iter().all(|&m| m <= c),
    })
}

/// The vector `∫_{|x|=ε} K(x)·x/|x| dσ(x)` by sphere quadrature.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceFlux {
    pub radius: f64,
    pub flux: Vec<f64>,
    pub quadrature_nodes: usize,
}

/// Compute the surface flux of `k` on the sphere of radius `eps`, with
/// `order` quadrature nodes per angular coordinate.
pub fn surface_flux(k: &Kernel, eps: f64, order: usize) -> Result<SurfaceFlux> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("flux radius must be positive, got {eps}")));
    }
    let rule = sphere_quadrature(k.dimension(), eps, order)?;
    let mut flux = vec![0.0; k.dimension()];
    for (x, w) in &rule {
        let kv = k.value(x);
        let r = geom::norm(x);
        for (f, xi) in flux.iter_mut().zip(x) {
            *f += w * kv * xi / r;
        }
    }
    Ok(SurfaceFlux {
        radius: eps,
        flux,
        quadrature_nodes: rule.len(),
    })
}

/// Result of following the surface flux along a truncation sequence.
#[derive(Debug, Clone, Serialize)]
pub enum PvOutcome {
    /// The last three fluxes agree within `PV_CONVERGENCE_TOL`; `limit` is
    /// their componentwise mean.
    Converged {
        limit: Vec<f64>,
        fluxes: Vec<SurfaceFlux>,
    },
    /// No limit along this sequence; `oscillation` is the largest max-entry
    /// distance between any two observed fluxes.
    Diverged {
        oscillation: f64,
        fluxes: Vec<SurfaceFlux>,
    },
}

impl PvOutcome {
    pub fn limit(&self) -> Option<&[f64]> {
        match self {
            PvOutcome::Converged { limit, .. } => Some(limit),
            PvOutcome::Diverged { .. } => None,
        }
    }
}

/// Follow the surface flux along a strictly decreasing sequence of radii
/// and report either the limit vector or divergence. This is the atom
/// coefficient of the distributional gradient when it converges.
pub fn pv_vector_along(k: &Kernel, eps_sequence: &[f64], order: usize) -> Result<PvOutcome> {
    if eps_sequence.len() < 3 {
        return Err(Error::invalid(
            "truncation sequence must contain at least 3 radii",
        ));
    }
    for pair in eps_sequence.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::invalid("truncation sequence must be strictly decreasing"));
        }
    }
    if !(eps_sequence[eps_sequence.len() - 1] > 0.0) {
        return Err(Error::invalid("truncation radii must be positive"));
    }
    let fluxes: Vec<SurfaceFlux> = eps_sequence
        .iter()
        .map(|&eps| surface_flux(k, eps, order))
        .collect::<Result<_>>()?;
    let tail = &fluxes[fluxes.len() - 3..];
    let converged = tail
        .iter()
        .flat_map(|a| tail.iter().map(move |b| max_abs_diff(&a.flux, &b.flux)))
        .all(|d| d <= PV_CONVERGENCE_TOL);
    if converged {
        let dim = k.dimension();
        let limit: Vec<f64> = (0..dim)
            .map(|i| tail.iter().map(|f| f.flux[i]).sum::<f64>() / 3.0)
            .collect();
        Ok(PvOutcome::Converged { limit, fluxes })
    } else {
        let mut oscillation = 0.0f64;
        for a in &fluxes {
            for b in &fluxes {
                oscillation = oscillation.max(max_abs_diff(&a.flux, &b.flux));
            }
        }
        Ok(PvOutcome::Diverged { oscillation, fluxes })
    }
}
