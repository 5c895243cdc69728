//! Singular weights `φ` on a collar.
//!
//! `φ₁ = log|w/w₀ − 1|` has a logarithmic pole at `x₀ = (ρ₀, 0)`,
//! `φ₂ = log|w/w_{p₀} − 1|` one at `p₀ = (ρ_p, 0)`, and
//! `φ₃ = φ₁ − αφ₂` with `α = 2 arctan(e^{ρ₀})/π`. The collar weight is
//! `2η(|ρ| − (R−3))φ₃`, so `e^{−φ}` behaves like `d^{−2}` at `x₀`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CollarError, Result};
use crate::geometry::{
    arctan_exp, collar_distance, eta_clamped, eta_d1, eta_d2, inj_radius_model, log_abs_w, rho_of_y, y_of_rho, Collar,
    CollarPoint, EPS2_DEFAULT,
};
use crate::logspace::LogComplex;
use crate::quadrature::QuadratureSpec;

/// Points closer than this to a pole are rejected.
pub const SINGULAR_RADIUS: f64 = 1e-9;

/// Selects the weight `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum WeightSpec {
    /// Collar weight peaked at `(rho0, 0)`; `p0_rho` defaults to `R − 1`.
    CollarPeak { rho0: f64, p0_rho: Option<f64> },
    /// `2η(d/ε₂) log(d/ε₂)` in the distance to `(center_rho, 0)`.
    ThickLog {
        eps2: f64,
        #[serde(default)]
        center_rho: f64,
    },
    Zero,
}

impl WeightSpec {
    pub fn collar_peak(rho0: f64) -> Self {
        WeightSpec::CollarPeak { rho0, p0_rho: None }
    }

    pub fn thick_log(center_rho: f64) -> Self {
        WeightSpec::ThickLog {
            eps2: EPS2_DEFAULT,
            center_rho,
        }
    }

    /// Resolves defaults and checks the weight against the collar.
    pub fn prepare(&self, collar: &Collar) -> Result<PreparedWeight> {
        let r = collar.half_width();
        match *self {
            WeightSpec::Zero => Ok(PreparedWeight::Zero),
            WeightSpec::ThickLog { eps2, center_rho } => {
                if !(eps2 > 0.0) {
                    return Err(CollarError::domain(format!("eps2 must be positive, got {eps2}")));
                }
                if center_rho.abs() > r {
                    return Err(CollarError::domain(format!("center ρ = {center_rho} outside the collar")));
                }
                Ok(PreparedWeight::Thick(ThickWeight {
                    collar: *collar,
                    eps2,
                    center: CollarPoint {
                        rho: center_rho,
                        theta: 0.0,
                    },
                }))
            }
            WeightSpec::CollarPeak { rho0, p0_rho } => {
                if r <= 4.0 {
                    return Err(CollarError::domain(format!(
                        "collar peak weight needs R > 4, got R = {r:.6}"
                    )));
                }
                if !(rho0.abs() < r - 4.0) {
                    return Err(CollarError::domain(format!(
                        "collar peak weight needs |ρ₀| < R − 4 = {:.6}, got {rho0}",
                        r - 4.0
                    )));
                }
                let p0 = p0_rho.unwrap_or(r - 1.0);
                if !(p0 > rho0.abs() && p0 < r) {
                    return Err(CollarError::domain(format!(
                        "p₀ at ρ = {p0} must lie between |ρ₀| and R"
                    )));
                }
                let a = rho0.abs();
                Ok(PreparedWeight::Peak(PeakWeight {
                    collar: *collar,
                    sign: if rho0 < 0.0 { -1.0 } else { 1.0 },
                    rho0: a,
                    p0,
                    alpha: alpha_of(a),
                    ln_w0: log_abs_w(collar, a),
                    ln_wp: log_abs_w(collar, p0),
                }))
            }
        }
    }
}

/// `α = 2 arctan(e^{ρ₀})/π`.
pub fn alpha_of(rho0: f64) -> f64 {
    2.0 * arctan_exp(rho0) / PI
}

/// A [`WeightSpec`] with all collar-dependent constants resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreparedWeight {
    Peak(PeakWeight),
    Thick(ThickWeight),
    Zero,
}

impl PreparedWeight {
    /// `φ(ρ, θ)`.
    pub fn eval(&self, rho: f64, theta: f64) -> Result<f64> {
        match self {
            PreparedWeight::Peak(p) => p.collar_weight(rho, theta),
            PreparedWeight::Thick(t) => {
                let d = t.distance(rho, theta);
                if d < SINGULAR_RADIUS {
                    return Err(CollarError::Singularity {
                        which: "thick centre",
                        distance: d,
                    });
                }
                Ok(thick_weight(t.eps2, d))
            }
            PreparedWeight::Zero => Ok(0.0),
        }
    }

    /// The point where `e^{−φ}` fails to be integrable, if any.
    pub fn pole(&self) -> Option<CollarPoint> {
        match self {
            PreparedWeight::Peak(p) => Some(CollarPoint {
                rho: p.sign * p.rho0,
                theta: 0.0,
            }),
            PreparedWeight::Thick(t) => Some(t.center),
            PreparedWeight::Zero => None,
        }
    }
}

/// The collar weight built from `φ₃`, stored in the reflected frame where
/// `ρ₀ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakWeight {
    collar: Collar,
    sign: f64,
    rho0: f64,
    p0: f64,
    alpha: f64,
    ln_w0: f64,
    ln_wp: f64,
}

impl PeakWeight {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn frame(&self, rho: f64, theta: f64) -> (f64, f64) {
        (self.sign * rho, self.sign * theta)
    }

    fn check(&self, rho: f64, theta: f64) -> Result<()> {
        let c = &self.collar;
        let p = CollarPoint {
            rho,
            theta: theta.rem_euclid(c.delta()),
        };
        for (which, centre) in [("x0", self.rho0), ("p0", self.p0)] {
            let d = collar_distance(c, &p, &CollarPoint { rho: centre, theta: 0.0 });
            if d < SINGULAR_RADIUS {
                return Err(CollarError::Singularity { which, distance: d });
            }
        }
        Ok(())
    }

    /// `(φ₁, φ₂)` at a point.
    pub fn components(&self, rho: f64, theta: f64) -> Result<(f64, f64)> {
        let (rho, theta) = self.frame(rho, theta);
        self.check(rho, theta)?;
        let rate = self.collar.rate();
        let lw = log_abs_w(&self.collar, rho);
        let phase = rate * theta;
        let phi1 = LogComplex::new(lw - self.ln_w0, phase).ln_abs_minus_one();
        let phi2 = LogComplex::new(lw - self.ln_wp, phase).ln_abs_minus_one();
        Ok((phi1, phi2))
    }

    pub fn phi3(&self, rho: f64, theta: f64) -> Result<f64> {
        let (a, b) = self.components(rho, theta)?;
        Ok(a - self.alpha * b)
    }

    /// `2η(|ρ| − (R−3)) φ₃`, identically zero for `|ρ| ≥ R − 2`.
    pub fn collar_weight(&self, rho: f64, theta: f64) -> Result<f64> {
        let eta = eta_clamped(rho.abs() - (self.collar.half_width() - 3.0));
        if eta == 0.0 {
            return Ok(0.0);
        }
        Ok(2.0 * eta * self.phi3(rho, theta)?)
    }

    /// `(|∇φ₁|, |∇φ₂|)` in the hyperbolic metric.
    pub fn grad_components(&self, rho: f64, theta: f64) -> Result<(f64, f64)> {
        let (rho_f, theta_f) = self.frame(rho, theta);
        self.check(rho_f, theta_f)?;
        let rate = self.collar.rate();
        let lw = log_abs_w(&self.collar, rho_f);
        let phase = rate * theta_f;
        let base = rate / rho.cosh();
        // |1 − w_*/w| = |w_*/w − 1|
        let g1 = base * (-LogComplex::new(self.ln_w0 - lw, -phase).ln_abs_minus_one()).exp();
        let g2 = base * (-LogComplex::new(self.ln_wp - lw, -phase).ln_abs_minus_one()).exp();
        Ok((g1, g2))
    }

    /// `(i/2π)∂∂̄φ / ω_g` of the glued weight, by a 5-point stencil in the
    /// flat chart with step `h`.
    fn curvature_ratio(&self, rho: f64, theta: f64, h: f64) -> Result<f64> {
        let y = y_of_rho(rho);
        let f = |dy: f64, dt: f64| self.collar_weight(rho_of_y(y + dy), theta + dt);
        let lap = (f(h, 0.0)? + f(-h, 0.0)? + f(0.0, h)? + f(0.0, -h)? - 4.0 * f(0.0, 0.0)?) / (h * h);
        Ok(lap * y.cos().powi(2) / (4.0 * PI))
    }
}

/// Thick-part weight around a centre point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThickWeight {
    collar: Collar,
    eps2: f64,
    center: CollarPoint,
}

impl ThickWeight {
    pub fn distance(&self, rho: f64, theta: f64) -> f64 {
        let p = CollarPoint {
            rho,
            theta: theta.rem_euclid(self.collar.delta()),
        };
        collar_distance(&self.collar, &p, &self.center)
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }
}

/// `2η(d/ε₂) log(d/ε₂)`; `−∞` at `d = 0`.
pub fn thick_weight(eps2: f64, d: f64) -> f64 {
    if d <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let t = d / eps2;
    let eta = eta_clamped(t);
    if eta == 0.0 {
        0.0
    } else {
        2.0 * eta * t.ln()
    }
}

/// `Δ_g` of [`thick_weight`] as a function of `d`, via the radial form
/// `φ″ + coth(d) φ′` at curvature −1.
pub fn thick_weight_laplacian(eps2: f64, d: f64) -> f64 {
    let t = d / eps2;
    let (e0, e1, e2) = (eta_clamped(t), eta_d1(t), eta_d2(t));
    let l = t.ln();
    let d1 = 2.0 / eps2 * (e1 * l + e0 / t);
    let d2 = 2.0 / (eps2 * eps2) * (e2 * l + 2.0 * e1 / t - e0 / (t * t));
    d2 + d1 / d.tanh()
}

/// `φ₃` at `p`.
pub fn phi3(collar: &Collar, spec: &WeightSpec, p: &CollarPoint) -> Result<f64> {
    match spec.prepare(collar)? {
        PreparedWeight::Peak(w) => w.phi3(p.rho, p.theta),
        _ => Err(CollarError::domain("phi3 needs a CollarPeak weight")),
    }
}

/// The glued collar weight at `p`.
pub fn collar_weight(collar: &Collar, spec: &WeightSpec, p: &CollarPoint) -> Result<f64> {
    match spec.prepare(collar)? {
        PreparedWeight::Peak(w) => w.collar_weight(p.rho, p.theta),
        _ => Err(CollarError::domain("collar_weight needs a CollarPeak weight")),
    }
}

pub fn grad_phi_components(collar: &Collar, spec: &WeightSpec, p: &CollarPoint) -> Result<(f64, f64)> {
    match spec.prepare(collar)? {
        PreparedWeight::Peak(w) => w.grad_components(p.rho, p.theta),
        _ => Err(CollarError::domain("grad_phi_components needs a CollarPeak weight")),
    }
}

/// Largest 5-point Laplacian of `φ₃` in the `(θ, y)` chart over `points`,
/// with step `h`. Zero up to `O(h²)` since `φ₃` is harmonic off its poles.
pub fn phi3_laplacian_residual(collar: &Collar, spec: &WeightSpec, points: &[CollarPoint], h: f64) -> Result<f64> {
    let w = match spec.prepare(collar)? {
        PreparedWeight::Peak(w) => w,
        _ => return Err(CollarError::domain("harmonicity check needs a CollarPeak weight")),
    };
    let mut worst: f64 = 0.0;
    for p in points {
        let y = y_of_rho(p.rho);
        let f = |dy: f64, dt: f64| w.phi3(rho_of_y(y + dy), p.theta + dt);
        let lap = (f(h, 0.0)? + f(-h, 0.0)? + f(0.0, h)? + f(0.0, -h)? - 4.0 * f(0.0, 0.0)?) / (h * h);
        worst = worst.max(lap.abs());
    }
    Ok(worst)
}

/// Sampling density for [`weight_certificate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateGrid {
    pub n_rho: usize,
    pub n_theta: usize,
    /// Points per side of the box sampled around the pole.
    pub n_disk: usize,
}

impl Default for CertificateGrid {
    fn default() -> Self {
        CertificateGrid {
            n_rho: 200,
            n_theta: 64,
            n_disk: 81,
        }
    }
}

/// Pass thresholds for the three measured constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateCeilings {
    pub sup_phi: f64,
    pub lower_gap: f64,
    pub curvature: f64,
}

impl Default for CertificateCeilings {
    fn default() -> Self {
        CertificateCeilings {
            sup_phi: 50.0,
            lower_gap: 20.0,
            curvature: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCertificate {
    /// `sup φ`.
    pub sup_phi: f64,
    /// Smallest `C` with `φ ≥ 2 log d − 2π/δ_{x₀} − C` on the sampled disk.
    pub lower_gap: f64,
    /// Smallest `C ≥ 0` with `(i/2π)∂∂̄φ ≥ −C ω_g` on the grid.
    pub curvature_floor: f64,
    pub diverges_at_x0: bool,
    pub pass: bool,
}

/// Measures the constants bounding `φ` from above, from below near the pole,
/// and the negative part of its curvature.
pub fn weight_certificate(
    collar: &Collar,
    spec: &WeightSpec,
    grid: &CertificateGrid,
    ceilings: &CertificateCeilings,
    q: &QuadratureSpec,
) -> Result<WeightCertificate> {
    q.validate()?;
    if grid.n_rho < 3 || grid.n_theta < 2 || grid.n_disk < 3 {
        return Err(CollarError::domain("certificate grid too coarse"));
    }
    let weight = spec.prepare(collar)?;
    let pole = match weight.pole() {
        None => {
            return Ok(WeightCertificate {
                sup_phi: 0.0,
                lower_gap: 0.0,
                curvature_floor: 0.0,
                diverges_at_x0: false,
                pass: true,
            })
        }
        Some(p) => p,
    };
    let r = collar.half_width();
    let delta = collar.delta();
    let n_t = grid.n_theta;
    let rhos: Vec<f64> = (0..grid.n_rho)
        .map(|i| -r + 2.0 * r * (i as f64 + 0.5) / grid.n_rho as f64)
        .collect();
    let thetas: Vec<f64> = (0..n_t).map(|j| (j as f64 + 0.5) * delta / n_t as f64).collect();

    let sup_phi = rhos
        .par_iter()
        .map(|&rho| {
            thetas
                .iter()
                .map(|&t| weight.eval(rho, t))
                .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    let dx0 = inj_radius_model(collar, pole.rho);
    let lower_gap = disk_lower_gap(collar, &weight, &pole, dx0, grid.n_disk)?;

    let curvature_floor = match &weight {
        PreparedWeight::Thick(t) => {
            let n = 4000;
            let worst = (1..n)
                .map(|i| thick_weight_laplacian(t.eps2, t.eps2 * i as f64 / n as f64))
                .fold(f64::INFINITY, f64::min);
            (-worst / (4.0 * PI)).max(0.0)
        }
        PreparedWeight::Peak(p) => {
            let worst = rhos
                .par_iter()
                .map(|&rho| -> Result<f64> {
                    let mut lo = f64::INFINITY;
                    for &t in &thetas {
                        let here = CollarPoint { rho, theta: t };
                        let dz = pole_flat_distance(collar, &weight, &here);
                        let h = 2e-3 * (delta / (2.0 * PI)).min(dz);
                        if y_of_rho(rho).abs() + h >= y_of_rho(r) {
                            continue;
                        }
                        lo = lo.min(p.curvature_ratio(rho, t, h)?);
                    }
                    Ok(lo)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            (-worst).max(0.0)
        }
        PreparedWeight::Zero => 0.0,
    };

    let pass =
        sup_phi <= ceilings.sup_phi && lower_gap <= ceilings.lower_gap && curvature_floor <= ceilings.curvature;
    Ok(WeightCertificate {
        sup_phi,
        lower_gap,
        curvature_floor,
        diverges_at_x0: true,
        pass,
    })
}

/// Flat-chart distance from a point to the nearest pole of the weight.
fn pole_flat_distance(collar: &Collar, weight: &PreparedWeight, p: &CollarPoint) -> f64 {
    let delta = collar.delta();
    let mut poles = Vec::new();
    match weight {
        PreparedWeight::Peak(w) => {
            poles.push(w.sign * w.rho0);
            poles.push(w.sign * w.p0);
        }
        PreparedWeight::Thick(t) => poles.push(t.center.rho),
        PreparedWeight::Zero => {}
    }
    let y = y_of_rho(p.rho);
    let mut dt = p.theta.rem_euclid(delta);
    dt = dt.min(delta - dt);
    poles
        .iter()
        .map(|&pr| (y - y_of_rho(pr)).hypot(dt))
        .fold(f64::INFINITY, f64::min)
}

/// `max (2 log d − 2π/δ_{x₀} − φ)` over a box of `n × n` points around the
/// pole, restricted to `0 < d ≤ δ_{x₀}`.
fn disk_lower_gap(collar: &Collar, weight: &PreparedWeight, pole: &CollarPoint, dx0: f64, n: usize) -> Result<f64> {
    let r = collar.half_width();
    let half_theta = dx0 / pole.rho.cosh();
    let mut gap = f64::NEG_INFINITY;
    for i in 0..n {
        // an even count of offsets keeps the pole itself off the grid
        let s = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
        let rho = pole.rho + s * dx0;
        if rho.abs() >= r {
            continue;
        }
        for j in 0..n {
            let u = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
            let theta = pole.theta + u * half_theta;
            let p = CollarPoint {
                rho,
                theta: theta.rem_euclid(collar.delta()),
            };
            let d = collar_distance(collar, &p, pole);
            if d > dx0 || d < SINGULAR_RADIUS {
                continue;
            }
            let phi = weight.eval(rho, theta)?;
            gap = gap.max(2.0 * d.ln() - 2.0 * PI / dx0 - phi);
        }
    }
    Ok(gap)
}
