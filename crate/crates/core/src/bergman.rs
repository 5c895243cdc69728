//! Bergman density of the truncated mode space and the degenerating-collar
//! counterexample.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CollarError, Result};
use crate::geometry::{make_collar, Collar, CollarPoint, EPS1};
use crate::logspace::{ln_cosh, log_sum_exp};
use crate::quadrature::QuadratureSpec;
use crate::sections::{decompose_boundary, log_l2_sq_norm, log_mode_sq_norm, CoeffMap, ModeSection};

/// `N_k = δ ∫_{−R}^{R} |w|^{2k} cosh^{1−2m} ρ dρ`.
pub fn mode_sq_norm(collar: &Collar, k: i32, m: i32, q: &QuadratureSpec) -> Result<f64> {
    Ok(log_full_mode_sq_norm(collar, k, m, q)?.exp())
}

/// `ln N_k`; stays finite where `N_k` itself overflows.
pub fn log_full_mode_sq_norm(collar: &Collar, k: i32, m: i32, q: &QuadratureSpec) -> Result<f64> {
    if k.unsigned_abs() as usize > collar.k_max() {
        return Err(CollarError::domain(format!(
            "mode {k} beyond k_max = {}",
            collar.k_max()
        )));
    }
    let r = collar.half_width();
    log_mode_sq_norm(collar, k, m, -r, r, q)
}

/// `ln N_k` for `k = −k_max..=k_max`, indexed by `k + k_max`.
#[derive(Debug, Clone)]
pub struct ModeNorms {
    k_max: usize,
    m: i32,
    log_norms: Vec<f64>,
}

impl ModeNorms {
    pub fn compute(collar: &Collar, m: i32, q: &QuadratureSpec) -> Result<Self> {
        let k_max = collar.k_max();
        // N_{−k} = N_k by the reflection ρ ↦ −ρ
        let half = (0..=k_max as i32)
            .map(|k| log_full_mode_sq_norm(collar, k, m, q))
            .collect::<Result<Vec<_>>>()?;
        let mut log_norms = Vec::with_capacity(2 * k_max + 1);
        log_norms.extend(half.iter().rev());
        log_norms.extend(&half[1..]);
        Ok(ModeNorms { k_max, m, log_norms })
    }

    pub fn log_norm(&self, k: i32) -> f64 {
        self.log_norms[(k + self.k_max as i32) as usize]
    }

    /// Log of each density term `|w|^{2k} cosh^{−2m} ρ / N_k` at `ρ`.
    fn log_terms(&self, collar: &Collar, rho: f64) -> Vec<f64> {
        let lw = -collar.rate() * crate::geometry::y_of_rho(rho);
        let base = -2.0 * self.m as f64 * ln_cosh(rho);
        (-(self.k_max as i32)..=self.k_max as i32)
            .map(|k| 2.0 * k as f64 * lw + base - self.log_norm(k))
            .collect()
    }

    /// `(ln density, dominant mode share)` at `ρ`.
    pub fn log_density(&self, collar: &Collar, rho: f64) -> (f64, f64) {
        let terms = self.log_terms(collar, rho);
        let total = log_sum_exp(&terms);
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (total, (top - total).exp())
    }

    /// The `k = 0` term alone.
    pub fn log_k0_term(&self, rho: f64) -> f64 {
        -2.0 * self.m as f64 * ln_cosh(rho) - self.log_norm(0)
    }
}

/// `Σ_{|k| ≤ k_max} ‖w^k (dz)^m‖²(p) / N_k`.
pub fn density(collar: &Collar, m: i32, p: &CollarPoint, q: &QuadratureSpec) -> Result<f64> {
    let norms = ModeNorms::compute(collar, m, q)?;
    Ok(norms.log_density(collar, p.rho).0.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub rho: f64,
    pub density: f64,
    pub dominant_mode_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub delta: f64,
    pub m: i32,
    pub k_max: usize,
    pub rho0: f64,
    pub rows: Vec<DensityRow>,
    pub at_x0: f64,
    /// The `k = 0` contribution at `x₀`.
    pub k0_at_x0: f64,
    pub error: Option<String>,
}

/// Density profile on `rows` equispaced values of `ρ` across the collar,
/// plus the value at `x₀ = (ρ₀, 0)`.
pub fn density_report(collar: &Collar, m: i32, rows: usize, q: &QuadratureSpec) -> Result<DensityReport> {
    let rho0 = collar.rho0()?;
    let norms = ModeNorms::compute(collar, m, q)?;
    let r = collar.half_width();
    let rows = (0..rows)
        .map(|i| {
            let rho = if rows == 1 { 0.0 } else { -r + 2.0 * r * i as f64 / (rows - 1) as f64 };
            let (l, share) = norms.log_density(collar, rho);
            DensityRow {
                rho,
                density: l.exp(),
                dominant_mode_share: share,
            }
        })
        .collect();
    Ok(DensityReport {
        delta: collar.delta(),
        m,
        k_max: collar.k_max(),
        rho0,
        rows,
        at_x0: norms.log_density(collar, rho0).0.exp(),
        k0_at_x0: norms.log_k0_term(rho0).exp(),
        error: None,
    })
}

/// Number of profile rows in [`density_scan`].
pub const SCAN_ROWS: usize = 17;

/// One [`DensityReport`] per δ, in input order. Failures are recorded in the
/// report's `error` field.
pub fn density_scan(deltas: &[f64], m: i32, k_max: usize, q: &QuadratureSpec) -> Vec<DensityReport> {
    deltas
        .par_iter()
        .map(|&delta| {
            let run = || -> Result<DensityReport> {
                if !(delta > 0.0 && delta < EPS1) {
                    return Err(CollarError::domain(format!("delta = {delta} outside (0, ε₁)")));
                }
                density_report(&make_collar(delta, k_max)?, m, SCAN_ROWS, q)
            };
            run().unwrap_or_else(|e| DensityReport {
                delta,
                m,
                k_max,
                rho0: f64::NAN,
                rows: Vec::new(),
                at_x0: f64::NAN,
                k0_at_x0: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

/// Default boundary data of the counterexample: `A = {1: 1}`.
pub fn default_left() -> CoeffMap {
    CoeffMap::from([(1, num_complex::Complex64::new(1.0, 0.0))])
}

/// Default boundary data of the counterexample: `B = {0: 1, −1: 1}`.
pub fn default_right() -> CoeffMap {
    let one = num_complex::Complex64::new(1.0, 0.0);
    CoeffMap::from([(0, one), (-1, one)])
}

/// `S_i = g_i (dz)^m` from left data on `k ≥ 1` and right data on `k ≤ 0`.
pub fn counterexample_sections(
    collar: &Collar,
    m: i32,
    left: &CoeffMap,
    right: &CoeffMap,
) -> Result<(ModeSection, ModeSection, ModeSection)> {
    if let Some(k) = left.keys().find(|k| **k < 1) {
        return Err(CollarError::domain(format!("left boundary data must use k ≥ 1, found {k}")));
    }
    if let Some(k) = right.keys().find(|k| **k > 0) {
        return Err(CollarError::domain(format!("right boundary data must use k ≤ 0, found {k}")));
    }
    decompose_boundary(collar, left, right, 0.0, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub delta: f64,
    pub m: i32,
    pub k_max: usize,
    pub rho0: f64,
    pub density_x0: f64,
    pub mu1: f64,
    pub ratio1: f64,
    pub ratio2: f64,
    pub ratio3: f64,
    pub predicted_ratio2: f64,
    /// Upper envelope for `ratio1` over all admissible left data.
    pub envelope1: f64,
    /// Upper envelope for `ratio3` over all admissible right data.
    pub envelope3: f64,
    pub within_envelopes: bool,
}

/// `ln(‖S‖²(x₀) / ‖S‖²_{L²(C)})`.
fn log_ratio(s: &ModeSection, collar: &Collar, rho0: f64, q: &QuadratureSpec) -> Result<f64> {
    let r = collar.half_width();
    Ok(s.log_pointwise_sq_norm(collar, rho0, 0.0) - log_l2_sq_norm(s, collar, -r, r, q)?)
}

/// Pointwise-to-L² ratios of the three counterexample sections at
/// `x₀ = (ρ₀, 0)` with default boundary data, compared with their rates.
pub fn counterexample_report(collar: &Collar, m: i32, q: &QuadratureSpec) -> Result<CounterexampleReport> {
    let delta = collar.delta();
    let rho0 = collar.rho0()?;
    let r = collar.half_width();
    let wide = collar.with_k_max(collar.k_max().max(1));
    let (s1, s2, s3) = counterexample_sections(&wide, m, &default_left(), &default_right())?;
    let ratio1 = log_ratio(&s1, &wide, rho0, q)?.exp();
    let ratio3 = log_ratio(&s3, &wide, rho0, q)?.exp();
    let log_n0 = log_mode_sq_norm(collar, 0, m, -r, r, q)?;
    let ratio2 = log_ratio(&s2, collar, rho0, q)?.exp();
    let mu1 = (log_n0 - delta.ln()).exp();
    let mf = m as f64;
    let predicted_ratio2 = ((mf - 1.0) * delta.ln() - mu1.ln() - mf * EPS1.ln()).exp();

    let qq = -4.0 * PI / (delta * (rho0 - 1.0).cosh());
    let log_env1 = qq - (-qq.exp()).ln_1p() + (2.0 * mf - 1.0) * (EPS1 / (2.0 * delta)).ln() - delta.ln();
    let log_env3 = 2f64.ln() - PI * PI / delta + (2.0 * mf - 1.0) * ln_cosh(r) - (delta * r).ln();
    let norms = ModeNorms::compute(collar, m, q)?;
    Ok(CounterexampleReport {
        delta,
        m,
        k_max: collar.k_max(),
        rho0,
        density_x0: norms.log_density(collar, rho0).0.exp(),
        mu1,
        ratio1,
        ratio2,
        ratio3,
        predicted_ratio2,
        envelope1: log_env1.exp(),
        envelope3: log_env3.exp(),
        within_envelopes: ratio1 <= log_env1.exp() && ratio3 <= log_env3.exp(),
    })
}

/// Lower-bound profile `√m / (D (1 + e^{π/δ_x} / (√m δ_x²))`, evaluated in
/// log space.
pub fn partial_estimate_profile(m: i32, delta_x: f64, d: f64) -> Result<f64> {
    Ok(log_partial_estimate_profile(m, delta_x, d)?.exp())
}

/// Natural log of [`partial_estimate_profile`], finite for any `δ_x > 0`.
pub fn log_partial_estimate_profile(m: i32, delta_x: f64, d: f64) -> Result<f64> {
    if m < 1 || !(delta_x > 0.0) || !(d > 0.0) {
        return Err(CollarError::domain(format!(
            "profile needs m ≥ 1, δ_x > 0, D > 0 (got {m}, {delta_x}, {d})"
        )));
    }
    let sm = (m as f64).sqrt();
    let x = PI / delta_x - sm.ln() - 2.0 * delta_x.ln();
    // ln(1 + e^x)
    let softplus = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    Ok(sm.ln() - d.ln() - softplus)
}
