//! Sampling grids in the flat chart `z = θ + i y`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CollarError, Result};
use crate::geometry::{rho_of_y, y_of_rho, Collar};

/// How nodes are spread over `[y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Spacing {
    /// Equispaced in `y`.
    #[default]
    Y,
    /// Equispaced in `ρ`, which resolves the collar ends.
    Rho,
}

/// `n + 1` nodes on `[y_lo, y_hi]`, equispaced in the parameter chosen by
/// `spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    pub y_lo: f64,
    pub y_hi: f64,
    /// Number of intervals.
    pub n: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

pub const MIN_INTERVALS: usize = 16;

impl YGrid {
    pub fn new(y_lo: f64, y_hi: f64, n: usize) -> Result<Self> {
        if n < MIN_INTERVALS {
            return Err(CollarError::GridMismatch(format!(
                "need at least {MIN_INTERVALS} intervals, got {n}"
            )));
        }
        if !(y_lo < y_hi) || y_lo <= -FRAC_PI_2 || y_hi >= FRAC_PI_2 {
            return Err(CollarError::GridMismatch(format!(
                "grid [{y_lo}, {y_hi}] must be a nonempty subinterval of (−π/2, π/2)"
            )));
        }
        Ok(YGrid {
            y_lo,
            y_hi,
            n,
            spacing: Spacing::Y,
        })
    }

    pub fn with_spacing(mut self, spacing: Spacing) -> Self {
        self.spacing = spacing;
        self
    }

    /// The whole collar, `[−y(R), y(R)]`.
    pub fn covering(collar: &Collar, n: usize) -> Result<Self> {
        let top = collar.y_max();
        YGrid::new(-top, top, n)
    }

    /// A grid inside the collar with spacing `2y(R)/n` that has `y0` as a node.
    pub fn with_node(collar: &Collar, n: usize, y0: f64) -> Result<Self> {
        let top = collar.y_max();
        if y0.abs() >= top {
            return Err(CollarError::domain(format!("y0 = {y0} outside the collar")));
        }
        let h = 2.0 * top / n as f64;
        let below = ((y0 + top) / h).floor();
        let lo = y0 - below * h;
        YGrid::new(lo, lo + (n - 1) as f64 * h, n - 1)
    }

    /// Parameter of the point at height `y`.
    pub fn xi(&self, y: f64) -> f64 {
        match self.spacing {
            Spacing::Y => y,
            Spacing::Rho => rho_of_y(y),
        }
    }

    fn y_of_xi(&self, xi: f64) -> f64 {
        match self.spacing {
            Spacing::Y => xi,
            Spacing::Rho => y_of_rho(xi),
        }
    }

    /// `dy/dξ` at height `y`.
    pub fn jacobian(&self, y: f64) -> f64 {
        match self.spacing {
            Spacing::Y => 1.0,
            Spacing::Rho => y.cos(),
        }
    }

    /// Parameter step between nodes.
    pub fn h(&self) -> f64 {
        (self.xi(self.y_hi) - self.xi(self.y_lo)) / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.n {
            self.y_hi
        } else if j == 0 {
            self.y_lo
        } else {
            self.y_of_xi(self.xi(self.y_lo) + j as f64 * self.h())
        }
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.y(j)).collect()
    }

    /// Fractional node index of `y`, clamped to the grid.
    fn position(&self, y: f64) -> f64 {
        ((self.xi(y) - self.xi(self.y_lo)) / self.h()).clamp(0.0, self.n as f64)
    }

    /// Index of the node at `y`, if there is one (to 1e−9 of a step).
    pub fn node_of(&self, y: f64) -> Option<usize> {
        let t = (self.xi(y) - self.xi(self.y_lo)) / self.h();
        let j = t.round();
        if (t - j).abs() < 1e-9 && j >= 0.0 && j <= self.n as f64 {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Trapezoid weights for `∫ f dy`, taken in the grid parameter.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w: Vec<f64> = self.ys().iter().map(|&y| h * self.jacobian(y)).collect();
        w[0] *= 0.5;
        w[self.n] *= 0.5;
        w
    }

    pub fn check_same(&self, other: &YGrid) -> Result<()> {
        if self != other {
            return Err(CollarError::GridMismatch(format!("{self:?} differs from {other:?}")));
        }
        Ok(())
    }

    pub fn check_samples(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(CollarError::GridMismatch(format!(
                "{len} samples on a grid of {} nodes",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `d/dy` of grid samples: central differences in the grid parameter,
/// second-order one-sided at the ends.
pub fn derivative(values: &[Complex64], grid: &YGrid) -> Vec<Complex64> {
    let n = values.len();
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    if n < 3 {
        return d;
    }
    let inv = 1.0 / (2.0 * grid.h());
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) * inv;
    }
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv;
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv;
    for (j, v) in d.iter_mut().enumerate() {
        *v /= grid.jacobian(grid.y(j));
    }
    d
}

/// Cubic Lagrange interpolation of grid samples at `y`, in the grid parameter.
pub fn interpolate(values: &[Complex64], grid: &YGrid, y: f64) -> Complex64 {
    if let Some(j) = grid.node_of(y) {
        return values[j];
    }
    let t = grid.position(y);
    let base = (t.floor() as isize - 1).clamp(0, grid.n as isize - 3) as usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        let xi = (base + i) as f64;
        let mut l = 1.0;
        for k in 0..4 {
            if k != i {
                let xk = (base + k) as f64;
                l *= (t - xk) / (xi - xk);
            }
        }
        acc += values[base + i] * l;
    }
    acc
}

/// Half-offset θ nodes `θ_i = (i + ½)δ/N`, which never contain `θ = 0`.
#[derive(Clone)]
pub struct ThetaGrid {
    delta: f64,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ThetaGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThetaGrid").field("delta", &self.delta).field("n", &self.n).finish()
    }
}

impl ThetaGrid {
    pub fn new(delta: f64, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(CollarError::GridMismatch(format!("need at least 4 θ samples, got {n}")));
        }
        let mut planner = FftPlanner::new();
        Ok(ThetaGrid {
            delta,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    /// Smallest power of two `≥ max(floor, 2·k_max + 2)`.
    pub fn for_modes(delta: f64, k_max: usize, floor: usize) -> Result<Self> {
        ThetaGrid::new(delta, floor.max(2 * k_max + 2).next_power_of_two())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.delta / self.n as f64
    }

    pub fn step(&self) -> f64 {
        self.delta / self.n as f64
    }

    /// Largest mode resolved without ambiguity, `N/2 − 1`.
    pub fn k_max(&self) -> usize {
        self.n / 2 - 1
    }

    /// Mode coefficients `g_k`, `|k| ≤ N/2 − 1`, of samples `Σ g_k e^{2πikθ/δ}`.
    pub fn analyze(&self, samples: &[Complex64]) -> Vec<(i32, Complex64)> {
        let mut buf = samples.to_vec();
        self.forward.process(&mut buf);
        let n = self.n as i32;
        let k_max = self.k_max() as i32;
        (-k_max..=k_max)
            .map(|k| {
                let idx = k.rem_euclid(n) as usize;
                let shift = Complex64::from_polar(1.0 / self.n as f64, -PI * k as f64 / self.n as f64);
                (k, buf[idx] * shift)
            })
            .collect()
    }

    /// Samples of `Σ g_k e^{2πikθ/δ}` at the θ nodes.
    pub fn synthesize(&self, modes: &[(i32, Complex64)]) -> Result<Vec<Complex64>> {
        let n = self.n as i32;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for &(k, g) in modes {
            if k.unsigned_abs() as usize > self.k_max() {
                return Err(CollarError::Aliasing {
                    samples: self.n,
                    k_max: k.unsigned_abs() as usize,
                    needed: 2 * k.unsigned_abs() as usize + 2,
                });
            }
            buf[k.rem_euclid(n) as usize] += g * Complex64::from_polar(1.0, PI * k as f64 / self.n as f64);
        }
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    /// `D_n = Δθ Σ_i f(θ_i) e^{2πinθ_i/δ}` for all `n` modulo `N`, indexed by
    /// `n mod N`.
    pub fn weight_moments(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inverse.process(&mut buf);
        let step = self.step();
        buf.iter()
            .enumerate()
            .map(|(idx, v)| *v * Complex64::from_polar(step, PI * idx as f64 / self.n as f64))
            .collect()
    }

    /// `D_n` from [`weight_moments`](Self::weight_moments) output.
    pub fn moment(&self, moments: &[Complex64], n: i32) -> Complex64 {
        let idx = n.rem_euclid(self.n as i32) as usize;
        // the half-offset phase is e^{iπ·idx/N} for the stored index; convert
        // it to the phase for n itself
        let wraps = (n - idx as i32) / self.n as i32;
        if wraps % 2 == 0 {
            moments[idx]
        } else {
            -moments[idx]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_collar;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn node_grid_contains_the_point() {
        let col = make_collar(0.1, 0).unwrap();
        let g = YGrid::with_node(&col, 512, 0.3).unwrap();
        assert!(g.node_of(0.3).is_some());
        assert!(g.y_lo >= -col.y_max() && g.y_hi <= col.y_max());
        assert!(YGrid::new(0.0, 1.0, 4).is_err());
        assert!(YGrid::new(0.0, 2.0, 40).is_err());
    }

    #[test]
    fn derivative_is_second_order() {
        let err = |n: usize| {
            let g = YGrid::new(-1.0, 1.0, n).unwrap();
            let v: Vec<_> = g.ys().iter().map(|&y| c(y.sin(), (2.0 * y).exp())).collect();
            let d = derivative(&v, &g);
            g.ys()
                .iter()
                .zip(&d)
                .map(|(&y, dv)| (dv - c(y.cos(), 2.0 * (2.0 * y).exp())).norm())
                .fold(0.0, f64::max)
        };
        let ratio = err(200) / err(400);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn interpolation_is_cubic() {
        let g = YGrid::new(0.0, 1.0, 20).unwrap();
        let v: Vec<_> = g.ys().iter().map(|&y| c(y * y * y - y, 1.0)).collect();
        for y in [0.013, 0.5, 0.97, 1.0] {
            assert!((interpolate(&v, &g, y) - c(y * y * y - y, 1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn theta_round_trip_and_moments() {
        let t = ThetaGrid::new(0.1, 16).unwrap();
        let modes = vec![(0, c(1.0, 0.5)), (3, c(-0.2, 0.1)), (-7, c(0.0, 2.0))];
        let s = t.synthesize(&modes).unwrap();
        for i in 0..16 {
            let th = t.theta(i);
            let direct: Complex64 = modes
                .iter()
                .map(|&(k, g)| g * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * th / 0.1))
                .sum();
            assert!((s[i] - direct).norm() < 1e-13);
        }
        let back = t.analyze(&s);
        for (k, g) in back {
            let want = modes.iter().find(|m| m.0 == k).map(|m| m.1).unwrap_or_default();
            assert!((g - want).norm() < 1e-14);
        }
        let f: Vec<f64> = (0..16).map(|i| 1.0 + t.theta(i).sin()).collect();
        let mom = t.weight_moments(&f);
        for n in [-20, -3, 0, 5, 17] {
            let direct: Complex64 = (0..16)
                .map(|i| f[i] * t.step() * Complex64::from_polar(1.0, 2.0 * PI * n as f64 * t.theta(i) / 0.1))
                .sum();
            assert!((t.moment(&mom, n) - direct).norm() < 1e-13, "{n}");
        }
        assert!(t.synthesize(&[(8, c(1.0, 0.0))]).is_err());
    }
}
