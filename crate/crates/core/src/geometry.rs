//! Keen collars of constant curvature −1.
//!
//! A collar of core length `δ` is `(−R, R) × ℝ/δℤ` with metric
//! `dρ² + cosh²ρ dθ²`, where `δ sinh R = ε₁`. The flat chart is
//! `z = θ + i y` with `y = gd(ρ) = 2 arctan e^ρ − π/2`, and the global
//! holomorphic coordinate is `w = exp(2πi z / δ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{CollarError, Result};
use crate::logspace::LogComplex;

/// Keen's area floor `ε₁ = 8/√5`.
pub const EPS1: f64 = 3.577_708_763_999_663_5;

/// Default thick-part injectivity constant `ε₂ = ε₁/36`.
pub const EPS2_DEFAULT: f64 = EPS1 / 36.0;

/// Lower comparison constant for the model injectivity radius. Only used in
/// report checks.
pub const EPS5_DEFAULT: f64 = 0.25;

/// Default upper clamp of the model injectivity radius: no loop in a collar
/// is shorter than its core, and points of the collar boundary have
/// injectivity radius below `ε₁/2`.
pub const INJ_RADIUS_CAP_DEFAULT: f64 = 0.5 * EPS1;

/// Window `(ε₃, ε₄)` for the band constants `δ cosh(R ± 4)` and friends.
pub const EPS3_DEFAULT: f64 = 0.01;
pub const EPS4_DEFAULT: f64 = 500.0;

/// Recommended upper bound on δ; larger values are accepted with a warning.
pub const DELTA_SOFT_MAX: f64 = 0.5;

/// Sup of `|η′|` for the quintic smoothstep cutoff.
pub const ETA_D1_MAX: f64 = 3.75;
/// Sup of `|η″|`, `40/√3`.
pub const ETA_D2_MAX: f64 = 23.094_010_767_585_03;

/// Geometry of one collar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collar {
    delta: f64,
    half_width: f64,
    k_max: usize,
}

impl Collar {
    pub fn new(delta: f64, k_max: usize) -> Result<Self> {
        make_collar(delta, k_max)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Hyperbolic half-width `R`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn with_k_max(&self, k_max: usize) -> Collar {
        Collar { k_max, ..*self }
    }

    /// `y(R)`, the half-height of the collar in the flat chart.
    pub fn y_max(&self) -> f64 {
        y_of_rho(self.half_width)
    }

    /// Rate `2π/δ` of the holomorphic coordinate.
    pub fn rate(&self) -> f64 {
        2.0 * PI / self.delta
    }

    pub fn point(&self, rho: f64, theta: f64) -> Result<CollarPoint> {
        CollarPoint::new(self, rho, theta)
    }

    pub fn rho0(&self) -> Result<f64> {
        counterexample_rho0(self)
    }
}

/// Builds the collar with core length `delta`; `R = asinh(ε₁/δ)`.
pub fn make_collar(delta: f64, k_max: usize) -> Result<Collar> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(CollarError::domain(format!(
            "collar core length must be positive and finite, got {delta}"
        )));
    }
    if delta > DELTA_SOFT_MAX {
        log::warn!("delta = {delta} exceeds the thin-collar regime (≤ {DELTA_SOFT_MAX})");
    }
    Ok(Collar {
        delta,
        half_width: (EPS1 / delta).asinh(),
        k_max,
    })
}

/// A point `(ρ, θ)` of a collar; `θ` is reduced into `[0, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarPoint {
    pub rho: f64,
    pub theta: f64,
}

impl CollarPoint {
    pub fn new(collar: &Collar, rho: f64, theta: f64) -> Result<Self> {
        let r = collar.half_width;
        if !rho.is_finite() || rho.abs() > r * (1.0 + 1e-14) {
            return Err(CollarError::domain(format!(
                "rho = {rho} outside the collar [-{r}, {r}]"
            )));
        }
        if !theta.is_finite() {
            return Err(CollarError::domain("theta must be finite"));
        }
        Ok(CollarPoint {
            rho: rho.clamp(-r, r),
            theta: theta.rem_euclid(collar.delta),
        })
    }
}

/// `y = 2 arctan e^ρ − π/2`, evaluated as the Gudermannian `atan(sinh ρ)`.
pub fn y_of_rho(rho: f64) -> f64 {
    rho.sinh().atan()
}

/// Inverse of [`y_of_rho`] on `(−π/2, π/2)`.
pub fn rho_of_y(y: f64) -> f64 {
    y.tan().asinh()
}

/// `cosh ρ` expressed through the flat coordinate: `1/cos y`.
pub fn cosh_of_y(y: f64) -> f64 {
    1.0 / y.cos()
}

/// `arctan e^ρ`, accurate for both signs of ρ.
pub fn arctan_exp(rho: f64) -> f64 {
    0.5 * (y_of_rho(rho) + FRAC_PI_2)
}

/// The holomorphic coordinate in log space:
/// `ln|w| = −(2π/δ) y(ρ)`, `arg w = 2πθ/δ`.
pub fn w_coordinate(collar: &Collar, p: &CollarPoint) -> LogComplex {
    let rate = collar.rate();
    LogComplex::new(-rate * y_of_rho(p.rho), rate * p.theta)
}

/// `ln|w|` at signed distance ρ.
pub fn log_abs_w(collar: &Collar, rho: f64) -> f64 {
    -collar.rate() * y_of_rho(rho)
}

/// The counterexample depth: `ρ₀ < 0` with `δ cosh²ρ₀ = ε₁`.
pub fn counterexample_rho0(collar: &Collar) -> Result<f64> {
    let delta = collar.delta;
    if delta >= EPS1 {
        return Err(CollarError::domain(format!(
            "delta = {delta} ≥ ε₁: δ cosh²ρ₀ = ε₁ has no solution with ρ₀ < 0"
        )));
    }
    Ok(-(EPS1 / delta).sqrt().acosh())
}

/// Model injectivity radius `min(½ δ cosh ρ, cap)`.
pub fn inj_radius_model(collar: &Collar, rho: f64) -> f64 {
    inj_radius_model_capped(collar, rho, INJ_RADIUS_CAP_DEFAULT)
}

pub fn inj_radius_model_capped(collar: &Collar, rho: f64, cap: f64) -> f64 {
    (0.5 * collar.delta * rho.cosh()).min(cap)
}

/// Quintic smoothstep cutoff: 1 on `[0, ½]`, 0 on `[1, ∞)`, `C²`.
pub fn cutoff_eta(t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(CollarError::domain(format!("cutoff argument must be ≥ 0, got {t}")));
    }
    Ok(eta_clamped(t))
}

/// [`cutoff_eta`] extended by 1 to negative arguments.
pub fn eta_clamped(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let s = 2.0 * t - 1.0;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// `η′(t)`, zero outside `(½, 1)`.
pub fn eta_d1(t: f64) -> f64 {
    if t <= 0.5 || t >= 1.0 {
        0.0
    } else {
        let s = 2.0 * t - 1.0;
        -60.0 * s * s * (1.0 - s) * (1.0 - s)
    }
}

/// `η″(t)`, zero outside `(½, 1)`.
pub fn eta_d2(t: f64) -> f64 {
    if t <= 0.5 || t >= 1.0 {
        0.0
    } else {
        let s = 2.0 * t - 1.0;
        -240.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
    }
}

/// Area of a geodesic disk of radius `r` at curvature −1, `2π(cosh r − 1)`.
pub fn hyperbolic_disk_area(radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(CollarError::domain(format!("radius must be positive, got {radius}")));
    }
    let s = (0.5 * radius).sinh();
    Ok(4.0 * PI * s * s)
}

/// Band constants around the collar boundary, computed in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandConstants {
    pub applicable: bool,
    pub delta_cosh_r: f64,
    pub delta_sinh_r: f64,
    pub delta_cosh_r_plus4: f64,
    pub delta_cosh_r_minus4: f64,
    pub delta_sinh_r_plus4: f64,
    pub delta_sinh_r_minus4: f64,
    pub delta_exp_r_plus4: f64,
    pub delta_exp_r_minus4: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub within_window: bool,
}

pub fn band_constants_report(collar: &Collar) -> BandConstants {
    let ln_d = collar.delta.ln();
    let r = collar.half_width;
    // δ·cosh x and δ·sinh x for x ≥ 0 via e^{ln δ + x}(1 ± e^{-2x})/2
    let dcosh = |x: f64| (ln_d + x - std::f64::consts::LN_2).exp() * (1.0 + (-2.0 * x).exp());
    let dsinh = |x: f64| (ln_d + x - std::f64::consts::LN_2).exp() * (-(-2.0 * x).exp_m1());
    let dexp = |x: f64| (ln_d + x).exp();
    let applicable = r > 4.0;
    let mut b = BandConstants {
        applicable,
        delta_cosh_r: dcosh(r),
        delta_sinh_r: dsinh(r),
        delta_cosh_r_plus4: dcosh(r + 4.0),
        delta_cosh_r_minus4: dcosh((r - 4.0).abs()),
        delta_sinh_r_plus4: dsinh(r + 4.0),
        delta_sinh_r_minus4: dsinh(r - 4.0),
        delta_exp_r_plus4: dexp(r + 4.0),
        delta_exp_r_minus4: dexp(r - 4.0),
        eps3: EPS3_DEFAULT,
        eps4: EPS4_DEFAULT,
        within_window: false,
    };
    if applicable {
        let vals = [
            b.delta_cosh_r,
            b.delta_sinh_r,
            b.delta_cosh_r_plus4,
            b.delta_cosh_r_minus4,
            b.delta_sinh_r_plus4,
            b.delta_sinh_r_minus4,
            b.delta_exp_r_plus4,
            b.delta_exp_r_minus4,
        ];
        b.within_window = vals.iter().all(|v| *v > b.eps3 && *v < b.eps4);
    }
    b
}

/// Geodesic distance between two collar points, using the Fermi-coordinate
/// law of cosines `cosh d = cosh ρ₁ cosh ρ₂ cosh Δθ − sinh ρ₁ sinh ρ₂`
/// minimised over the lifts of `Δθ`.
pub fn collar_distance(collar: &Collar, a: &CollarPoint, b: &CollarPoint) -> f64 {
    let delta = collar.delta;
    let mut dt = (a.theta - b.theta).rem_euclid(delta);
    if dt > 0.5 * delta {
        dt = delta - dt;
    }
    let (r1, r2) = (a.rho, b.rho);
    // cosh d − 1 = cosh ρ₁ cosh ρ₂ (cosh Δθ − 1) + cosh(ρ₁ − ρ₂) − 1
    let h = 2.0 * (0.5 * dt).sinh().powi(2);
    let c = 2.0 * (0.5 * (r1 - r2)).sinh().powi(2);
    let x = r1.cosh() * r2.cosh() * h + c;
    // acosh(1 + x) = 2 asinh(sqrt(x/2))
    2.0 * (0.5 * x).sqrt().asinh()
}
