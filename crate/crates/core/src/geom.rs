//! Small dense vector helpers, ball constants, uniform grids and
//! cube/ball intersection classification used by the measure and
//! operator modules.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Max-entry norm of a vector or flattened matrix.
pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Max-entry distance between two vectors.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Volume of the unit ball in `R^n`, exact at integer arguments via the
/// two-step recursion `V_n = V_{n-2} · 2π/n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// Surface area of the unit sphere in `R^n` (length of the circle for n = 2).
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Uniform cell grid: cell `i` has center `origin + (i + 1/2)·h` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, h: f64, shape: Vec<usize>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("grid cell side must be positive, got {h}")));
        }
        if origin.len() != shape.len() || shape.is_empty() {
            return Err(Error::invalid("grid origin and shape must have equal, nonzero length"));
        }
        if shape.iter().any(|&s| s == 0) {
            return Err(Error::invalid("grid shape entries must be positive"));
        }
        Ok(Grid { origin, h, shape })
    }

    /// Smallest grid of mesh `h` whose cells cover the box `[lo, hi]`.
    pub fn covering(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let shape: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (((b - a) / h).ceil() as usize).max(1))
            .collect();
        Grid::new(lo.to_vec(), h, shape)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        let mut idx = vec![0usize; self.dim()];
        for ax in (0..self.dim()).rev() {
            idx[ax] = rem % self.shape[ax];
            rem /= self.shape[ax];
        }
        idx
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut flat = 0usize;
        for ax in 0..self.dim() {
            flat = flat * self.shape[ax] + multi[ax];
        }
        flat
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let multi = self.multi_index(flat);
        multi
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.origin[ax] + (i as f64 + 0.5) * self.h)
            .collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `p`, or `None` outside the grid.
    /// Points on a shared face belong to the higher cell.
    pub fn cell_containing(&self, p: &[f64]) -> Option<usize> {
        let mut multi = Vec::with_capacity(self.dim());
        for ax in 0..self.dim() {
            let t = (p[ax] - self.origin[ax]) / self.h;
            if t < 0.0 || t >= self.shape[ax] as f64 {
                return None;
            }
            multi.push(t.floor() as usize);
        }
        Some(self.flat_index(&multi))
    }

    pub fn cell_bounds(&self, flat: usize) -> (Vec<f64>, Vec<f64>) {
        let multi = self.multi_index(flat);
        let lo: Vec<f64> = multi
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.origin[ax] + i as f64 * self.h)
            .collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + self.h).collect();
        (lo, hi)
    }

    /// Flat indices of all cells whose bounding box intersects `B(center, r)`.
    pub fn cells_near_ball(&self, center: &[f64], r: f64) -> Vec<usize> {
        let dim = self.dim();
        let mut lo_idx = vec![0isize; dim];
        let mut hi_idx = vec![0isize; dim];
        for ax in 0..dim {
            lo_idx[ax] = (((center[ax] - r) - self.origin[ax]) / self.h).floor() as isize;
            hi_idx[ax] = (((center[ax] + r) - self.origin[ax]) / self.h).floor() as isize;
            lo_idx[ax] = lo_idx[ax].max(0);
            hi_idx[ax] = hi_idx[ax].min(self.shape[ax] as isize - 1);
            if lo_idx[ax] > hi_idx[ax] {
                return Vec::new();
            }
        }
        let mut out = Vec::new();
        let mut cursor = lo_idx.clone();
        loop {
            let multi: Vec<usize> = cursor.iter().map(|&i| i as usize).collect();
            out.push(self.flat_index(&multi));
            let mut ax = dim;
            loop {
                if ax == 0 {
                    return out;
                }
                ax -= 1;
                cursor[ax] += 1;
                if cursor[ax] <= hi_idx[ax] {
                    break;
                }
                cursor[ax] = lo_idx[ax];
            }
        }
    }
}

/// Relation between an axis-aligned cube and a ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeBallRelation {
    Disjoint,
    CubeInsideBall,
    BallInsideCube,
    Partial,
}

/// Classify the cube `[lo, hi]` against the closed ball `B(center, r)`.
pub fn classify_cube_ball(lo: &[f64], hi: &[f64], center: &[f64], r: f64) -> CubeBallRelation {
    let mut dmin_sq = 0.0;
    let mut dmax_sq = 0.0;
    let mut ball_inside = true;
    for ax in 0..lo.len() {
        let c = center[ax];
        let below = (lo[ax] - c).max(0.0);
        let above = (c - hi[ax]).max(0.0);
        let gap = below.max(above);
        dmin_sq += gap * gap;
        let far = (c - lo[ax]).abs().max((hi[ax] - c).abs());
        dmax_sq += far * far;
        if c - r < lo[ax] || c + r > hi[ax] {
            ball_inside = false;
        }
    }
    let r_sq = r * r;
    if dmin_sq >= r_sq {
        CubeBallRelation::Disjoint
    } else if dmax_sq <= r_sq {
        CubeBallRelation::CubeInsideBall
    } else if ball_inside {
        CubeBallRelation::BallInsideCube
    } else {
        CubeBallRelation::Partial
    }
}

/// Axis-aligned box window, used for pair sampling and report grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("window corners must have equal, nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::DegenerateWindow(format!("lo {lo:?} not strictly below hi {hi:?}")));
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(ax, &v)| v >= self.lo[ax] && v <= self.hi[ax])
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Deterministic counter-based generator for per-cell sample streams.
/// (splitmix64; used so Monte Carlo cell overlap is reproducible and
/// independent of evaluation order.)
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform sample in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_volumes_match_closed_forms() {
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(
            unit_ball_volume(3),
            4.0 * std::f64::consts::PI / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(unit_sphere_area(2), 2.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-15);
    }

    #[test]
    fn grid_round_trips_indices() {
        let g = Grid::new(vec![-1.0, 0.0], 0.5, vec![4, 3]).unwrap();
        assert_eq!(g.len(), 12);
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
            let c = g.center(flat);
            assert_eq!(g.cell_containing(&c), Some(flat));
        }
        assert_eq!(g.cell_containing(&[-1.2, 0.1]), None);
    }

    #[test]
    fn cube_ball_classification_cases() {
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        assert_eq!(
            classify_cube_ball(&lo, &hi, &[5.0, 5.0], 1.0),
            CubeBallRelation::Disjoint
        );
        assert_eq!(
            classify_cube_ball(&lo, &hi, &[0.5, 0.5], 2.0),
            CubeBallRelation::CubeInsideBall
        );
        assert_eq!(
            classify_cube_ball(&lo, &hi, &[0.5, 0.5], 0.25),
            CubeBallRelation::BallInsideCube
        );
        assert_eq!(
            classify_cube_ball(&lo, &hi, &[0.0, 0.5], 0.25),
            CubeBallRelation::Partial
        );
    }

    #[test]
    fn cells_near_ball_covers_the_ball() {
        let g = Grid::new(vec![0.0, 0.0], 0.25, vec![8, 8]).unwrap();
        let cells = g.cells_near_ball(&[1.0, 1.0], 0.4);
        // every cell within the ball radius must be listed
        for flat in 0..g.len() {
            let c = g.center(flat);
            if dist(&c, &[1.0, 1.0]) <= 0.4 {
                assert!(cells.contains(&flat));
            }
        }
    }
}
