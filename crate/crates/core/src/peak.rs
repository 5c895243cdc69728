//! Sections peaked at a point: a cut-off local frame corrected by a weighted
//! `∂̄` solve.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bergman::log_partial_estimate_profile;
use crate::dbar::{
    add_modes, apply_dbar, eval_modes, fit_holomorphic, hormander_check, sampled_sq_norm, solve_dbar, DbarOptions, DbarRhs,
    DbarSolution, HormanderCheck, ModeSamples,
};
use crate::error::{CollarError, Result};
use crate::geometry::{collar_distance, eta_clamped, inj_radius_model, rho_of_y, y_of_rho, Collar, CollarPoint};
use crate::grid::{ThetaGrid, YGrid};
use crate::sections::ModeSection;
use crate::weights::WeightSpec;

/// Sampling and acceptance parameters for [`peak_section`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSettings {
    /// Intervals of the `y`-grid across the collar.
    pub n_y: usize,
    /// θ samples; the solve keeps holomorphic modes up to `n_theta/2 − 1`.
    pub n_theta: usize,
    /// The Hörmander ratio is compared with `tolerance_factor/(m − 1)`.
    pub tolerance_factor: f64,
}

impl Default for PeakSettings {
    fn default() -> Self {
        PeakSettings {
            n_y: 2048,
            n_theta: 64,
            tolerance_factor: 2.0,
        }
    }
}

/// `e^{m (c₁ Δz + c₂ Δz²)}`, `Δz = z − z₀`, with `c₁ = −i tan y₀` and
/// `c₂ = −sec²y₀/4`, at flat offset `(θ − θ₀, y)`. The pointwise norm
/// `|F| cos^m y` is stationary at `y₀` and decays like `e^{−m s²/2}` in the
/// hyperbolic distance `s`.
pub fn peak_frame(m: i32, y0: f64, dtheta: f64, y: f64) -> Complex64 {
    let t = y0.tan();
    let c2 = -0.25 / (y0.cos() * y0.cos());
    let dz = Complex64::new(dtheta, y - y0);
    (m as f64 * (Complex64::new(0.0, -t) * dz + c2 * dz * dz)).exp()
}

/// The weight used for a peak at `ρ₀`: the collar weight where it is
/// defined, the thick-part log weight centred at the point otherwise.
pub fn peak_weight(collar: &Collar, rho0: f64) -> WeightSpec {
    let r = collar.half_width();
    if r > 4.0 && rho0.abs() < r - 4.0 {
        WeightSpec::collar_peak(rho0)
    } else {
        WeightSpec::thick_log(rho0)
    }
}

/// Sampled cut-off frame `ηF` and its `∂̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakData {
    pub grid: YGrid,
    pub y0: f64,
    /// Model injectivity radius at the point.
    pub delta_x0: f64,
    /// `k_max` of the θ sampling.
    pub k_max: usize,
    pub frame: ModeSamples,
    pub rhs: DbarRhs,
}

impl PeakData {
    /// `‖ηF‖²_{L²} / ‖F‖²(x₀)`, evaluated without forming `cos^{2m} y₀`.
    pub fn relative_frame_sq_norm(&self, delta: f64) -> f64 {
        let m = self.rhs.power as f64;
        let ln_c0 = self.y0.cos().ln();
        let w: Vec<f64> = self
            .grid
            .trapezoid_weights()
            .iter()
            .zip(self.grid.ys())
            .map(|(t, y)| t.ln() + 2.0 * m * (y.cos().ln() - ln_c0) - 2.0 * y.cos().ln())
            .collect();
        delta
            * self
                .frame
                .values()
                .flat_map(|v| v.iter().zip(&w).filter(|(z, _)| z.norm() > 0.0))
                .map(|(z, lw)| (lw + 2.0 * z.norm().ln()).exp())
                .sum::<f64>()
    }
}

pub fn peak_rhs(collar: &Collar, m: i32, rho0: f64, settings: &PeakSettings) -> Result<PeakData> {
    if m < 2 {
        return Err(CollarError::domain(format!("peak sections need m ≥ 2, got {m}")));
    }
    let r = collar.half_width();
    let delta_x0 = inj_radius_model(collar, rho0);
    if !(rho0.abs() + 0.5 * delta_x0 < r) {
        return Err(CollarError::domain(format!(
            "cut-off disk of radius {} around ρ₀ = {rho0} leaves the collar",
            0.5 * delta_x0
        )));
    }
    let delta = collar.delta();
    let y0 = y_of_rho(rho0);
    let grid = YGrid::with_node(collar, settings.n_y, y0)?;
    let theta = ThetaGrid::new(delta, settings.n_theta)?;
    let x0 = CollarPoint { rho: rho0, theta: 0.0 };
    let rows: Vec<Vec<(i32, Complex64)>> = grid
        .ys()
        .par_iter()
        .map(|&y| {
            let rho = rho_of_y(y).clamp(-r, r);
            let samples: Vec<Complex64> = (0..theta.len())
                .map(|i| {
                    let th = theta.theta(i);
                    let d = collar_distance(collar, &CollarPoint { rho, theta: th }, &x0);
                    let eta = eta_clamped(2.0 * d / delta_x0);
                    if eta == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let mut dt = th.rem_euclid(delta);
                    if dt > 0.5 * delta {
                        dt -= delta;
                    }
                    eta * peak_frame(m, y0, dt, y)
                })
                .collect();
            if samples.iter().all(|z| z.norm() == 0.0) {
                Vec::new()
            } else {
                theta.analyze(&samples)
            }
        })
        .collect();
    let k_max = theta.k_max();
    let mut frame = ModeSamples::new();
    for (j, row) in rows.iter().enumerate() {
        for &(k, g) in row {
            frame.entry(k).or_insert_with(|| vec![Complex64::new(0.0, 0.0); grid.len()])[j] = g;
        }
    }
    let rhs = apply_dbar(&frame, &grid, collar, m)?;
    Ok(PeakData {
        grid,
        y0,
        delta_x0,
        k_max,
        frame,
        rhs,
    })
}

/// Diagnostics of a peak-section run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub delta: f64,
    pub m: i32,
    pub rho0: f64,
    pub weight: WeightSpec,
    pub delta_x0: f64,
    /// `‖S‖(x₀)`.
    pub s_at_x0: f64,
    /// `‖S‖_{L²}`.
    pub s_l2: f64,
    /// `‖S‖(x₀)/‖S‖_{L²}`.
    pub ratio: f64,
    /// `‖F‖(x₀) = cos^m y₀`.
    pub frame_at_x0: f64,
    /// `|u(x₀)| cos^m y₀`.
    pub u_at_x0: f64,
    /// `u(x₀)` is below `1e−3·‖S‖(x₀)`.
    pub u_negligible: bool,
    /// `S(x₀)` equals `F(x₀)` to 0.1%.
    pub reproduces_frame: bool,
    /// `‖ηF‖²_{L²}`.
    pub frame_sq_norm: f64,
    /// `‖ηF‖²_{L²} / ‖F‖²(x₀)`.
    pub relative_frame_sq_norm: f64,
    /// `ln profile(m, δ_{x₀}, 1)`.
    pub log_profile_unit: f64,
    /// Smallest `D` with `ratio ≥ profile(m, δ_{x₀}, D)`.
    pub fitted_d: f64,
    pub hormander: HormanderCheck,
    pub kernel_residual: f64,
    pub gram_condition: f64,
    /// Relative L² distance from `S` to its fitted mode expansion.
    pub holomorphic_defect: f64,
}

impl PeakReport {
    /// `ratio ≥ profile(m, δ_{x₀}, d)`.
    pub fn meets_profile(&self, d: f64) -> bool {
        self.ratio.ln() >= self.log_profile_unit - d.ln()
    }
}

/// `S = ηF − u` where `u` is the weighted minimal solution of `∂̄u = ∂̄(ηF)`.
pub fn peak_section(
    collar: &Collar,
    m: i32,
    rho0: f64,
    settings: &PeakSettings,
) -> Result<(ModeSection, PeakReport, DbarSolution)> {
    let data = peak_rhs(collar, m, rho0, settings)?;
    let wide = collar.with_k_max(data.k_max);
    let weight = peak_weight(collar, rho0);
    let sol = solve_dbar(&data.rhs, &wide, &weight, &DbarOptions::default())?;
    let grid = data.grid;
    let delta = collar.delta();
    let rate = collar.rate();
    let s = add_modes(&data.frame, &sol.modes, Complex64::new(-1.0, 0.0));

    let cos_m = data.y0.cos().powi(m);
    let s_x0 = eval_modes(&s, &grid, rate, data.y0, 0.0);
    let u_x0 = eval_modes(&sol.modes, &grid, rate, data.y0, 0.0);
    let s_at_x0 = s_x0.norm() * cos_m;
    let s_l2 = sampled_sq_norm(&s, &grid, delta, m).sqrt();
    let ratio = s_at_x0 / s_l2;
    let log_profile_unit = log_partial_estimate_profile(m, data.delta_x0, 1.0)?;

    let (section, defect) = fit_holomorphic(&s, &grid, rate, m, None)?;
    let hormander = hormander_check(&sol, settings.tolerance_factor);
    let report = PeakReport {
        delta,
        m,
        rho0,
        weight,
        delta_x0: data.delta_x0,
        s_at_x0,
        s_l2,
        ratio,
        frame_at_x0: cos_m,
        u_at_x0: u_x0.norm() * cos_m,
        u_negligible: u_x0.norm() * cos_m <= 1e-3 * s_at_x0,
        reproduces_frame: (s_x0 - 1.0).norm() <= 1e-3,
        frame_sq_norm: sampled_sq_norm(&data.frame, &grid, delta, m),
        relative_frame_sq_norm: data.relative_frame_sq_norm(delta),
        log_profile_unit,
        fitted_d: (log_profile_unit - ratio.ln()).exp(),
        hormander,
        kernel_residual: sol.kernel_residual,
        gram_condition: sol.gram_condition,
        holomorphic_defect: defect,
    };
    Ok((section, report, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_collar;

    #[test]
    fn frame_norm_is_stationary_at_the_point() {
        let (m, rho0) = (16, 0.7);
        let y0 = y_of_rho(rho0);
        let log_norm = |rho: f64| {
            let y = y_of_rho(rho);
            2.0 * (peak_frame(m, y0, 0.0, y).norm().ln() + m as f64 * y.cos().ln())
        };
        let h = 1e-5;
        let d = (log_norm(rho0 + h) - log_norm(rho0 - h)) / (2.0 * h);
        assert!(d.abs() <= 1e-6, "{d}");
    }

    #[test]
    fn core_peak_section_meets_the_profile() {
        let col = make_collar(0.1, 0).unwrap();
        let (section, rep, _) = peak_section(&col, 16, 0.0, &PeakSettings::default()).unwrap();
        assert!(rep.u_negligible && rep.reproduces_frame);
        assert!(rep.s_at_x0 > 0.0);
        assert!(rep.kernel_residual < 1e-8);
        assert!(rep.meets_profile(100.0));
        assert!(rep.ratio <= 4.0);
        assert!(!section.is_zero());
    }

    #[test]
    fn frame_mass_scales_like_one_over_m() {
        let col = make_collar(0.1, 0).unwrap();
        let rho0 = crate::geometry::counterexample_rho0(&col).unwrap().abs();
        let st = PeakSettings {
            n_y: 8192,
            n_theta: 256,
            tolerance_factor: 2.0,
        };
        let a = peak_rhs(&col, 512, rho0, &st).unwrap().relative_frame_sq_norm(0.1);
        let b = peak_rhs(&col, 1024, rho0, &st).unwrap().relative_frame_sq_norm(0.1);
        assert!((a / b - 2.0).abs() <= 0.4, "{}", a / b);
    }

    #[test]
    fn peak_weight_falls_back_off_the_core() {
        let col = make_collar(0.1, 0).unwrap();
        assert!(matches!(peak_weight(&col, 0.0), WeightSpec::CollarPeak { .. }));
        assert!(matches!(peak_weight(&col, -2.47), WeightSpec::ThickLog { .. }));
    }

    #[test]
    fn rejects_disks_leaving_the_collar() {
        let col = make_collar(0.1, 0).unwrap();
        let r = col.half_width();
        assert!(peak_rhs(&col, 16, r - 0.01, &PeakSettings::default()).is_err());
        assert!(peak_rhs(&col, 1, 0.0, &PeakSettings::default()).is_err());
    }
}
