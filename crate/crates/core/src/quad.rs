//! Quadrature rules: Gauss–Legendre on intervals and tensor boxes,
//! corner-graded rules for cell integrals of singular kernels, and the
//! sphere rules used by the surface-flux integrals (uniform trapezoid on
//! the circle, Gauss–Legendre × uniform product on the 2-sphere).

use crate::{Error, Result};

/// Absolute tolerance attributed to the built-in sphere rules on the smooth
/// integrands they are applied to. Flux comparisons quote this value.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = if n == 1 {
                1.0
            } else {
                n as f64 * (x * p1 - p0) / (x * x - 1.0)
            };
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn for_each_multi_index(shape: &[usize], mut body: impl FnMut(&[usize])) {
    let dim = shape.len();
    let mut idx = vec![0usize; dim];
    loop {
        body(&idx);
        let mut ax = dim;
        loop {
            if ax == 0 {
                return;
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

/// Tensor-product Gauss–Legendre integral of `f` over the box `[lo, hi]`
/// with `pts` nodes per axis.
pub fn integrate_box(lo: &[f64], hi: &[f64], pts: usize, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let dim = lo.len();
    let (nodes, weights) = gauss_legendre(pts);
    let shape = vec![pts; dim];
    let mut total = 0.0;
    let mut x = vec![0.0; dim];
    for_each_multi_index(&shape, |idx| {
        let mut w = 1.0;
        for ax in 0..dim {
            let half = 0.5 * (hi[ax] - lo[ax]);
            x[ax] = 0.5 * (lo[ax] + hi[ax]) + half * nodes[idx[ax]];
            w *= half * weights[idx[ax]];
        }
        total += w * f(&x);
    });
    total
}

/// Integral of `f` over `[lo, hi]` when `f` has an integrable point
/// singularity at `s` (a point of the closed box), of strength up to
/// `|x - s|^{-(dim-1)}` or logarithmic.
///
/// The box is split at `s` into up to `2^dim` sub-boxes with the singular
/// point at a corner; each sub-box is integrated by a graded
/// (pyramid/Duffy) transform whose Jacobian absorbs the singularity, with
/// `pts`-node tensor Gauss rules in the transformed variables.
pub fn integrate_box_singular(
    lo: &[f64],
    hi: &[f64],
    s: &[f64],
    pts: usize,
    f: &mut dyn FnMut(&[f64]) -> f64,
) -> f64 {
    let dim = lo.len();
    // signed extents of the sub-box segments on each axis
    let mut segments: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for ax in 0..dim {
        let mut segs = Vec::new();
        let sp = s[ax].clamp(lo[ax], hi[ax]);
        if sp - lo[ax] > 0.0 {
            segs.push(lo[ax] - sp);
        }
        if hi[ax] - sp > 0.0 {
            segs.push(hi[ax] - sp);
        }
        if segs.is_empty() {
            return 0.0; // zero-width box
        }
        segments.push(segs);
    }

    let (nodes, weights) = gauss_legendre(pts);
    // map GL nodes to (0, 1]
    let unit_nodes: Vec<f64> = nodes.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let unit_weights: Vec<f64> = weights.iter().map(|w| 0.5 * w).collect();

    let seg_counts: Vec<usize> = segments.iter().map(|v| v.len()).collect();
    let mut total = 0.0;
    let mut x = vec![0.0; dim];
    for_each_multi_index(&seg_counts, |seg_idx| {
        // extents of this sub-box away from the singular corner
        let ext: Vec<f64> = (0..dim).map(|ax| segments[ax][seg_idx[ax]]).collect();
        let vol: f64 = ext.iter().map(|e| e.abs()).product();
        // one pyramid per principal axis: coordinates (u, v_1, .., v_{dim-1})
        // with x_p = e_p·u and x_j = e_j·u·v_j, Jacobian |∏e|·u^{dim-1}
        for principal in 0..dim {
            let shape = vec![pts; dim];
            for_each_multi_index(&shape, |idx| {
                let u = unit_nodes[idx[principal]];
                let mut w = vol * unit_weights[idx[principal]] * u.powi(dim as i32 - 1);
                for ax in 0..dim {
                    if ax == principal {
                        x[ax] = s[ax].clamp(lo[ax], hi[ax]) + ext[ax] * u;
                    } else {
                        w *= unit_weights[idx[ax]];
                        x[ax] = s[ax].clamp(lo[ax], hi[ax]) + ext[ax] * u * unit_nodes[idx[ax]];
                    }
                }
                total += w * f(&x);
            });
        }
    });
    total
}

/// Quadrature nodes and weights for the surface integral
/// `∫_{|x - center| = radius} f dσ`, with `σ` the (dim−1)-dimensional
/// surface measure.
///
/// dim = 2 uses an `order`-point uniform trapezoid on the circle; dim = 3 a
/// Gauss–Legendre rule of `order` points in the polar cosine times a
/// `2·order`-point uniform azimuthal grid. Higher dimensions are not
/// supported.
pub fn sphere_quadrature(dim: usize, radius: f64, order: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("sphere radius must be positive, got {radius}")));
    }
    if order < 2 {
        return Err(Error::invalid("sphere quadrature order must be at least 2"));
    }
    match dim {
        2 => {
            let w = 2.0 * std::f64::consts::PI * radius / order as f64;
            Ok((0..order)
                .map(|i| {
                    let theta = 2.0 * std::f64::consts::PI * i as f64 / order as f64;
                    (vec![radius * theta.cos(), radius * theta.sin()], w)
                })
                .collect())
        }
        3 => {
            let (unodes, uweights) = gauss_legendre(order);
            let n_phi = 2 * order;
            let wphi = 2.0 * std::f64::consts::PI / n_phi as f64;
            let mut out = Vec::with_capacity(order * n_phi);
            for (u, wu) in unodes.iter().zip(&uweights) {
                let sin_theta = (1.0 - u * u).max(0.0).sqrt();
                for j in 0..n_phi {
                    let phi = wphi * j as f64;
                    let x = vec![
                        radius * sin_theta * phi.cos(),
                        radius * sin_theta * phi.sin(),
                        radius * u,
                    ];
                    out.push((x, radius * radius * wu * wphi));
                }
            }
            Ok(out)
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{norm, unit_sphere_area};
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=12usize {
            let (nodes, weights) = gauss_legendre(n);
            for deg in 0..=(2 * n - 1) {
                let integral: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                assert!(
                    (integral - exact).abs() < 1e-13,
                    "n={n} deg={deg}: {integral} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn box_rule_matches_separable_integral() {
        let value = integrate_box(&[0.0, -1.0], &[2.0, 1.0], 6, &mut |x| {
            x[0].powi(3) * (1.0 + x[1] * x[1])
        });
        // ∫0^2 x³ dx · ∫-1^1 (1+y²) dy = 4 · 8/3
        assert_relative_eq!(value, 4.0 * 8.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn singular_rule_handles_riesz_kernel_in_the_plane() {
        // ∫ over the unit square centered at 0 of 1/|y| dy = 4·ln(1 + √2)
        let exact = 4.0 * (1.0 + 2.0f64.sqrt()).ln();
        let approx5 = integrate_box_singular(&[-0.5, -0.5], &[0.5, 0.5], &[0.0, 0.0], 5, &mut |y| {
            1.0 / norm(y)
        });
        assert_relative_eq!(approx5, exact, max_relative = 1e-6);
    }

    #[test]
    fn singular_rule_handles_off_center_points_and_3d() {
        // self-convergence for 1/|y|² over a cube with an off-center singular point
        let s = [0.1, -0.05, 0.2];
        let mut f = |y: &[f64]| {
            let d: f64 = y.iter().zip(&s).map(|(a, b)| (a - b) * (a - b)).sum();
            1.0 / d
        };
        let coarse = integrate_box_singular(&[-0.5; 3], &[0.5; 3], &s, 5, &mut f);
        let fine = integrate_box_singular(&[-0.5; 3], &[0.5; 3], &s, 16, &mut f);
        assert_relative_eq!(coarse, fine, max_relative = 2e-3);
    }

    #[test]
    fn singular_rule_with_smooth_integrand_matches_plain_rule() {
        let mut f = |y: &[f64]| (y[0] + 2.0) * (y[1] - 3.0);
        let a = integrate_box(&[0.0, 0.0], &[1.0, 2.0], 8, &mut f);
        let b = integrate_box_singular(&[0.0, 0.0], &[1.0, 2.0], &[0.25, 0.5], 8, &mut f);
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn sphere_rules_integrate_low_moments_exactly() {
        for dim in [2usize, 3] {
            for radius in [0.5, 1.0, 2.0] {
                let rule = sphere_quadrature(dim, radius, 24).unwrap();
                let area: f64 = rule.iter().map(|(_, w)| w).sum();
                let exact_area = unit_sphere_area(dim) * radius.powi(dim as i32 - 1);
                assert_relative_eq!(area, exact_area, max_relative = 1e-12);
                // ∫ x₁² dσ = r²/dim · area
                let m2: f64 = rule.iter().map(|(x, w)| w * x[0] * x[0]).sum();
                assert_relative_eq!(
                    m2,
                    radius * radius / dim as f64 * exact_area,
                    max_relative = 1e-12
                );
                // odd moment vanishes
                let m1: f64 = rule.iter().map(|(x, w)| w * x[0]).sum();
                assert!(m1.abs() < 1e-12 * exact_area);
            }
        }
    }

    #[test]
    fn sphere_rule_rejects_unsupported_dimensions() {
        assert!(matches!(
            sphere_quadrature(4, 1.0, 8),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(sphere_quadrature(2, -1.0, 8).is_err());
    }
}
