//! Collar generators of `K^{m₀}` and a corona-type decomposition
//! `S = Σ Tᵢ Uᵢ` of sections of `K^m` over a single collar.
//!
//! The generator is the holomorphic part of the cutoff section
//! `u₁ = δ^{−1/2} η̃ (dz)^{m₀}`, where `η̃(ρ) = η(|ρ| − (R − 1))` equals 1 on
//! `|ρ| ≤ R − ½`. Removing the minimal solution of `∂̄u = ∂̄u₁` leaves
//! `U′ = u₁ − u`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dbar::{fit_holomorphic, solve_dbar, DbarOptions, DbarRhs, ModeSamples};
use crate::error::{CollarError, Result};
use crate::geometry::{eta_clamped, eta_d1, rho_of_y, y_of_rho, Collar};
use crate::grid::{Spacing, ThetaGrid, YGrid};
use crate::logspace::{ln_cosh, log_sum_exp, Amplitude};
use crate::quadrature::{adaptive_simpson, QuadratureSpec};
use crate::sections::{log_l2_sq_norm, ModeSection};
use crate::weights::WeightSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `η̃(ρ)`.
pub fn collar_cutoff(collar: &Collar, rho: f64) -> f64 {
    eta_clamped(rho.abs() - (collar.half_width() - 1.0))
}

/// `dη̃/dy`.
fn collar_cutoff_dy(collar: &Collar, y: f64) -> f64 {
    let rho = rho_of_y(y);
    eta_d1(rho.abs() - (collar.half_width() - 1.0)) * rho.signum() * rho.cosh()
}

/// `∫ η̃^p cos^{2m₀−2} y dy` over the collar.
fn cutoff_moment(collar: &Collar, m0: i32, p: i32, q: &QuadratureSpec) -> Result<f64> {
    let r = collar.half_width();
    let ym = collar.y_max();
    let yb = y_of_rho(r - 0.5);
    let f = |y: f64| collar_cutoff(collar, rho_of_y(y)).powi(p) * y.cos().powi(2 * m0 - 2);
    let mut total = 0.0;
    for (a, b) in [(-ym, -yb), (-yb, yb), (yb, ym)] {
        total += adaptive_simpson(f, a, b, 1e-14, q)?;
    }
    Ok(total)
}

/// Grid controls shared by the generator and the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoronaSettings {
    pub n_y: usize,
    pub n_theta: usize,
    /// Lower bound on `Σ‖Uⱼ‖²` wherever it is divided by.
    pub denominator_floor: f64,
    /// Relative tolerance on the reconstruction and holomorphy residuals.
    pub tolerance: f64,
    /// Largest mode kept when projecting `Tᵢ`.
    pub k_keep: usize,
}

impl Default for CoronaSettings {
    fn default() -> Self {
        CoronaSettings {
            n_y: 8192,
            n_theta: 128,
            denominator_floor: 1e-10,
            tolerance: 1e-6,
            k_keep: 32,
        }
    }
}

/// The generator `U′` together with the pieces of its construction.
#[derive(Debug, Clone, Serialize)]
pub struct Generator {
    pub section: ModeSection,
    /// `u = αu₁ + u′` on `C(R − 2)`.
    pub alpha: f64,
    /// `U′ = α′ v₁ + v₂` with `v₂ ⟂ v₁` on `C(R)`.
    pub alpha_generator: f64,
    /// `β₁₁ = (U′, v₁)` over `C(R)`.
    pub beta: f64,
    /// `‖u‖²` over the collar.
    pub u_sq_norm: f64,
    /// `‖u‖² / δ^{2m₀−1}`.
    pub u_scaled: f64,
    /// `‖u − αu₁‖` over `C(R − 2)`.
    pub u_perp_norm: f64,
    /// Share of `‖U′‖²` carried by the mode `k = 0`.
    pub k0_share: f64,
    /// Relative misfit of the holomorphic projection of `u₁ − u`.
    pub defect: f64,
}

impl Generator {
    /// `ln ‖U′‖(0)`, the pointwise norm on the core geodesic.
    pub fn log_core_norm(&self, collar: &Collar) -> f64 {
        0.5 * self.section.log_pointwise_sq_norm(collar, 0.0, 0.0)
    }
}

pub fn collar_generator(collar: &Collar, m0: i32, settings: &CoronaSettings) -> Result<Generator> {
    if m0 < 1 {
        return Err(CollarError::domain(format!("m0 must be ≥ 1, got {m0}")));
    }
    if collar.half_width() <= 3.0 {
        return Err(CollarError::domain(format!(
            "collar half-width {} too small for a generator",
            collar.half_width()
        )));
    }
    let delta = collar.delta();
    let scale = delta.powf(-0.5);
    let grid = YGrid::covering(collar, settings.n_y)?.with_spacing(Spacing::Rho);
    let ys = grid.ys();
    let u1: Vec<Complex64> = ys
        .iter()
        .map(|&y| Complex64::new(scale * collar_cutoff(collar, rho_of_y(y)), 0.0))
        .collect();
    let v: Vec<Complex64> = ys
        .iter()
        .map(|&y| Complex64::new(0.0, 0.5 * scale * collar_cutoff_dy(collar, y)))
        .collect();
    let rhs = DbarRhs::new(m0, grid, ModeSamples::from([(0, v)]))?;
    let sol = solve_dbar(&rhs, collar, &WeightSpec::Zero, &DbarOptions::default())?;
    let u = sol.modes.get(&0).cloned().unwrap_or_else(|| vec![ZERO; grid.len()]);
    let holo: Vec<Complex64> = u1.iter().zip(&u).map(|(a, b)| a - b).collect();
    let (section, defect) = fit_holomorphic(&ModeSamples::from([(0, holo)]), &grid, collar.rate(), m0, None)?;

    let q = QuadratureSpec::default();
    let c0 = section.coeff(0).value().re;
    let mass1 = cutoff_moment(collar, m0, 1, &q)?;
    let mass2 = cutoff_moment(collar, m0, 2, &q)?;
    // (U′, v₁) only sees the k = 0 coefficient
    let beta = c0 * scale * delta * mass1;
    let alpha_generator = beta / mass2;
    // on C(R − 2) both u and u₁ are constant multiples of (dz)^{m₀}
    let alpha = 1.0 - c0 / scale;

    let inner = collar.half_width() - 2.0;
    let mut perp = 0.0;
    for ((j, &y), t) in ys.iter().enumerate().zip(grid.trapezoid_weights()) {
        if rho_of_y(y).abs() <= inner {
            perp += t * (u[j] - alpha * u1[j]).norm_sqr() * y.cos().powi(2 * m0 - 2);
        }
    }
    let total = log_l2_sq_norm(&section, collar, -collar.half_width(), collar.half_width(), &q)?;
    let k0 = log_l2_sq_norm(
        &section.filter(|k| k == 0),
        collar,
        -collar.half_width(),
        collar.half_width(),
        &q,
    )?;
    Ok(Generator {
        section,
        alpha,
        alpha_generator,
        beta,
        u_sq_norm: sol.weighted_sq_norm,
        u_scaled: sol.weighted_sq_norm / delta.powi(2 * m0 - 1),
        u_perp_norm: (delta * perp).sqrt(),
        k0_share: (k0 - total).exp(),
        defect,
    })
}

/// Exponential decay of a section orthogonal to the generator, measured as
/// `ln(‖U″‖(ρ)/‖U″‖) − m₀(R − |ρ|) ≈ c − ε₆ e^{R−|ρ|}`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub eps6_hat: f64,
    /// `e^c` of the upper envelope through the fit points.
    pub sup_ratio: f64,
    /// Largest excess of a refined sample over the envelope.
    pub max_violation: f64,
    pub grad_ratio: f64,
    pub grad_max_violation: f64,
    /// Asymptotic slope `2π/ε₁` for `w^{±1}`.
    pub model_eps6: f64,
}

fn log_grad_norm(u: &ModeSection, collar: &Collar, rho: f64, theta: f64) -> f64 {
    let y = y_of_rho(rho);
    let f = u.eval_amplitude(collar, rho, theta);
    let df = u.eval_dz_amplitude(collar, rho, theta);
    let twist = f.scale(Complex64::new(0.0, u.power() as f64 * y.tan()));
    df.add(&twist).ln_abs() - (u.power() + 1) as f64 * ln_cosh(rho)
}

fn envelope_samples(
    u: &ModeSection,
    collar: &Collar,
    n: usize,
    log_norm: f64,
    grad: bool,
) -> Vec<(f64, f64)> {
    let r = collar.half_width();
    let top = r - 3.0;
    let m0 = u.power() as f64;
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let rho = top * i as f64 / n as f64;
            let mut best = f64::NEG_INFINITY;
            for s in [-1.0, 1.0] {
                for t in 0..16 {
                    let theta = collar.delta() * t as f64 / 16.0;
                    let v = if grad {
                        log_grad_norm(u, collar, s * rho, theta)
                    } else {
                        0.5 * u.log_pointwise_sq_norm(collar, s * rho, theta)
                    };
                    best = best.max(v);
                }
            }
            ((r - rho).exp(), best - log_norm - m0 * (r - rho))
        })
        .collect()
}

fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

pub fn orthogonal_decay_check(u: &ModeSection, collar: &Collar) -> Result<DecayReport> {
    if !u.coeff(0).is_zero() {
        return Err(CollarError::domain("section has a k = 0 component; it is not orthogonal to the generator"));
    }
    if u.is_zero() {
        return Err(CollarError::domain("zero section has no decay profile"));
    }
    if collar.half_width() <= 4.0 {
        return Err(CollarError::domain("collar too short for a decay fit"));
    }
    let r = collar.half_width();
    let log_norm = 0.5 * log_l2_sq_norm(u, collar, -r, r, &QuadratureSpec::default())?;
    let n = 64;
    let coarse = envelope_samples(u, collar, n, log_norm, false);
    let (_, slope) = least_squares_line(&coarse);
    let eps = -slope;
    let c = coarse.iter().map(|(x, l)| l + eps * x).fold(f64::NEG_INFINITY, f64::max);
    let fine = envelope_samples(u, collar, 4 * n, log_norm, false);
    let excess = fine.iter().map(|(x, l)| l + eps * x - c).fold(f64::NEG_INFINITY, f64::max);

    let gc = envelope_samples(u, collar, n, log_norm, true);
    let g_c = gc.iter().map(|(x, l)| l + eps * x).fold(f64::NEG_INFINITY, f64::max);
    let gf = envelope_samples(u, collar, 4 * n, log_norm, true);
    let g_excess = gf.iter().map(|(x, l)| l + eps * x - g_c).fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayReport {
        eps6_hat: eps,
        sup_ratio: c.exp(),
        max_violation: excess.exp(),
        grad_ratio: g_c.exp(),
        grad_max_violation: g_excess.exp(),
        model_eps6: 2.0 * std::f64::consts::PI / crate::geometry::EPS1,
    })
}

/// Certified lower bound on `‖U‖` over `|ρ| ≤ R − r`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NonvanishingReport {
    pub r: f64,
    /// Largest certified `|ρ|`.
    pub rho_star: f64,
    /// Smallest certified lower bound on `‖U‖` over `|ρ| ≤ ρ*`.
    pub margin: f64,
    pub certified: bool,
}

/// Lower bound of `|c₀| − Σ_{k≠0} |c_k||w|^k` times `cos^{m} y` over `[ρa, ρb]`.
fn interval_lower_bound(u: &ModeSection, collar: &Collar, ra: f64, rb: f64) -> f64 {
    let (ya, yb) = (y_of_rho(ra), y_of_rho(rb));
    let rate = collar.rate();
    let c0 = u.coeff(0).ln_abs();
    let tail: Vec<f64> = u
        .coeffs()
        .filter(|(k, c)| *k != 0 && !c.is_zero())
        .map(|(k, c)| c.ln_abs() + (-rate * k as f64 * ya).max(-rate * k as f64 * yb))
        .collect();
    let ratio = (log_sum_exp(&tail) - c0).exp();
    if !(ratio < 1.0) {
        return 0.0;
    }
    let cos_min = ya.abs().max(yb.abs()).cos();
    c0.exp() * (1.0 - ratio) * cos_min.powi(u.power())
}

pub fn nonvanishing_radius(u: &ModeSection, collar: &Collar) -> Result<NonvanishingReport> {
    if u.coeff(0).is_zero() {
        return Ok(NonvanishingReport {
            r: collar.half_width(),
            rho_star: 0.0,
            margin: 0.0,
            certified: false,
        });
    }
    let r = collar.half_width();
    let step = 0.01;
    let mut reach = [r, r];
    for (side, sign) in [-1.0, 1.0].into_iter().enumerate() {
        let mut a = 0.0;
        while a < r {
            let b = (a + step).min(r);
            let lb = interval_lower_bound(u, collar, sign * a, sign * b);
            if lb <= 0.0 {
                reach[side] = a;
                break;
            }
            a = b;
        }
    }
    let rho_star = reach[0].min(reach[1]);
    if rho_star == 0.0 {
        return Ok(NonvanishingReport {
            r,
            rho_star,
            margin: 0.0,
            certified: false,
        });
    }
    let mut margin = f64::INFINITY;
    for sign in [-1.0, 1.0] {
        let mut a = 0.0;
        while a < rho_star {
            let b = (a + step).min(rho_star);
            margin = margin.min(interval_lower_bound(u, collar, sign * a, sign * b));
            a = b;
        }
    }
    Ok(NonvanishingReport {
        r: (r - rho_star).max(2.0),
        rho_star,
        margin,
        certified: true,
    })
}

/// `U₁ = U′/β₁₁` followed by normalised `w^k (dz)^{m₀}`, with the Gram data
/// of the family on the whole collar.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratorFamily {
    pub m0: i32,
    pub members: Vec<ModeSection>,
    /// Mode of each extra member; the generator is listed as 0.
    pub modes: Vec<i32>,
    /// `(Uᵢ, Uⱼ)` over the collar.
    pub gram: Vec<Vec<Complex64>>,
    /// `M` with `M G M^H = I`.
    pub orthonormalizer: Vec<Vec<Complex64>>,
    pub least_eigenvalue: f64,
    /// Condition number after scaling the Gram matrix to unit diagonal.
    pub scaled_condition: f64,
    /// Largest `|Gᵢⱼ|/√(GᵢᵢGⱼⱼ)` off the diagonal.
    pub max_coherence: f64,
    /// `max |M G M^H − I|`.
    pub orthonormal_defect: f64,
    /// `min_θ Σ‖Uⱼ‖²` on the core geodesic.
    pub core_sum: f64,
}

const MAX_SCALED_CONDITION: f64 = 1e12;

pub fn build_family(collar: &Collar, generator: &Generator, extra_modes: &[i32]) -> Result<GeneratorFamily> {
    let m0 = generator.section.power();
    if generator.beta == 0.0 || !generator.beta.is_finite() {
        return Err(CollarError::domain("generator has no component along the cutoff section"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &k in extra_modes {
        if k == 0 || !seen.insert(k) {
            return Err(CollarError::domain(format!("extra modes must be distinct and nonzero, got {extra_modes:?}")));
        }
    }
    let r = collar.half_width();
    let q = QuadratureSpec::default();
    let u1 = generator.section.scale(Complex64::new(1.0 / generator.beta, 0.0));
    let c1 = u1.coeff(0).value();
    let mut members = vec![u1.clone()];
    let mut modes = vec![0];
    for &k in extra_modes {
        let raw = ModeSection::monomial(m0, k)?;
        let ln = log_l2_sq_norm(&raw, collar, -r, r, &q)?;
        let mut unit = ModeSection::new(m0)?;
        unit.set(k, Amplitude::new(Complex64::new(1.0, 0.0), -0.5 * ln))?;
        // (Uᵢ′, v₁) / (U₁, v₁); only k = 0 coefficients meet v₁
        let gamma = unit.coeff(0).value() / c1;
        let corrected = if gamma == ZERO { unit } else { unit.add(&u1.scale(-gamma))? };
        members.push(corrected);
        modes.push(k);
    }
    let d = members.len();
    let mut g = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = crate::sections::l2_inner(&members[i], &members[j], collar, -r, r, &q)?;
        }
    }
    let diag: Vec<f64> = (0..d).map(|i| g[(i, i)].re).collect();
    let scaled = DMatrix::from_fn(d, d, |i, j| g[(i, j)] / (diag[i] * diag[j]).sqrt());
    let eig = scaled.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    let scaled_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(scaled_condition <= MAX_SCALED_CONDITION) {
        return Err(CollarError::Conditioning { condition: scaled_condition });
    }
    let least_eigenvalue = g.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let chol = g
        .clone()
        .cholesky()
        .ok_or(CollarError::Conditioning { condition: f64::INFINITY })?;
    let l = chol.l();
    let mut m = DMatrix::<Complex64>::identity(d, d);
    if !l.solve_lower_triangular_mut(&mut m) {
        return Err(CollarError::Conditioning { condition: f64::INFINITY });
    }
    let check = &m * &g * m.adjoint() - DMatrix::<Complex64>::identity(d, d);
    let orthonormal_defect = check.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut max_coherence: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                max_coherence = max_coherence.max(scaled[(i, j)].norm());
            }
        }
    }
    let core_sum = (0..32)
        .map(|t| {
            let theta = collar.delta() * t as f64 / 32.0;
            members
                .iter()
                .map(|u| u.log_pointwise_sq_norm(collar, 0.0, theta).exp())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    let rows = |a: &DMatrix<Complex64>| (0..d).map(|i| (0..d).map(|j| a[(i, j)]).collect()).collect();
    Ok(GeneratorFamily {
        m0,
        members,
        modes,
        gram: rows(&g),
        orthonormalizer: rows(&m),
        least_eigenvalue,
        scaled_condition,
        max_coherence,
        orthonormal_defect,
        core_sum,
    })
}

/// Sup and L² norm of one product `TᵢUᵢ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TermNorm {
    pub sup: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoronaReport {
    pub generators: usize,
    pub m: i32,
    pub m0: i32,
    /// `sup‖S − ΣTᵢUᵢ‖ / sup‖S‖` over the sample grid.
    pub residual_sup: f64,
    /// `‖S − ΣTᵢUᵢ‖ / ‖S‖` over the collar.
    pub residual_l2: f64,
    /// Pointwise distance of each assembled `Tᵢ` from its holomorphic
    /// projection, relative to the sup of the projection.
    pub dbar_residuals: Vec<f64>,
    pub norms: Vec<TermNorm>,
    /// Smallest `Σ‖Uⱼ‖²` where it is divided by.
    pub min_denominator: f64,
    pub pass: bool,
}

/// Samples of `Σ c_k λ_k w^k` along the θ nodes at height `y`.
fn section_row(s: &ModeSection, rate: f64, y: f64, theta: &ThetaGrid, deriv: bool) -> Result<Vec<Complex64>> {
    let mut modes = Vec::new();
    for (k, c) in s.coeffs() {
        if c.is_zero() {
            continue;
        }
        let e = c.exponent - rate * k as f64 * y;
        if e > crate::logspace::MAX_EXPONENT {
            return Err(CollarError::Overflow { mode: k, exponent: e });
        }
        let lam = if deriv { Complex64::new(0.0, rate * k as f64) } else { Complex64::new(1.0, 0.0) };
        modes.push((k, c.mantissa * lam * e.exp()));
    }
    theta.synthesize(&modes)
}

fn row_sup(s: &ModeSection, rate: f64, grid: &YGrid, theta: &ThetaGrid) -> Result<f64> {
    let p = s.power();
    let sups: Result<Vec<f64>> = grid
        .ys()
        .into_par_iter()
        .map(|y| {
            let row = section_row(s, rate, y, theta, false)?;
            Ok(row.iter().map(|z| z.norm()).fold(0.0, f64::max) * y.cos().powi(p))
        })
        .collect();
    Ok(sups?.into_iter().fold(0.0, f64::max))
}

fn to_mode_samples(rows: &[Vec<(i32, Complex64)>]) -> ModeSamples {
    let mut out = ModeSamples::new();
    for (j, row) in rows.iter().enumerate() {
        for &(k, v) in row {
            out.entry(k).or_insert_with(|| vec![ZERO; rows.len()])[j] = v;
        }
    }
    out
}

/// Pointwise Wolff data on one θ row.
struct RowData {
    /// `b_k`, analysed into θ modes.
    b: Vec<Vec<(i32, Complex64)>>,
    /// `c_ik` for `i ≠ k`, in [`pairs`] order.
    c: Vec<Vec<(i32, Complex64)>>,
    min_den: f64,
}

fn pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (0..d).filter(move |&k| k != i).map(move |k| (i, k))).collect()
}

#[allow(clippy::too_many_arguments)]
fn wolff_row(
    s: &ModeSection,
    family: &GeneratorFamily,
    collar: &Collar,
    theta: &ThetaGrid,
    y: f64,
    floor: f64,
) -> Result<RowData> {
    let rate = collar.rate();
    let d = family.members.len();
    let rho = rho_of_y(y);
    let eta = collar_cutoff(collar, rho);
    let eta_y = collar_cutoff_dy(collar, y);
    let half_i = Complex64::new(0.0, 0.5);
    let fs = section_row(s, rate, y, theta, false)?;
    let mut f = Vec::with_capacity(d);
    let mut df = Vec::with_capacity(d);
    for u in &family.members {
        f.push(section_row(u, rate, y, theta, false)?);
        df.push(section_row(u, rate, y, theta, true)?);
    }
    let n = theta.len();
    let metric = y.cos().powi(2 * family.m0);
    let mut b = vec![vec![ZERO; n]; d];
    let mut db = vec![vec![ZERO; n]; d];
    let mut min_den = f64::INFINITY;
    for t in 0..n {
        let sig: f64 = (0..d).map(|j| f[j][t].norm_sqr()).sum();
        let p: Complex64 = (0..d).map(|j| f[j][t] * df[j][t].conj()).sum();
        if eta < 1.0 {
            min_den = min_den.min(sig * metric);
            if !(sig * metric >= floor) {
                return Err(CollarError::DenominatorFloor {
                    value: sig * metric,
                    floor,
                    rho,
                    theta: theta.theta(t),
                });
            }
        }
        let lead = if eta > 0.0 {
            let v = f[0][t].norm_sqr() * metric;
            if !(v >= floor) {
                return Err(CollarError::DenominatorFloor {
                    value: v,
                    floor,
                    rho,
                    theta: theta.theta(t),
                });
            }
            fs[t] / f[0][t]
        } else {
            ZERO
        };
        for k in 0..d {
            let own = if k == 0 { lead } else { ZERO };
            let mut bk = own * eta;
            let mut dbk = half_i * eta_y * own;
            if eta < 1.0 {
                let share = fs[t] * f[k][t].conj() / sig;
                bk += (1.0 - eta) * share;
                dbk -= half_i * eta_y * share;
                dbk += (1.0 - eta) * fs[t] * (df[k][t].conj() / sig - f[k][t].conj() * p / (sig * sig));
            }
            b[k][t] = bk;
            db[k][t] = dbk;
        }
    }
    let mut c = Vec::new();
    for (i, k) in pairs(d) {
        let v: Vec<Complex64> = (0..n)
            .map(|t| {
                if eta < 1.0 {
                    let sig: f64 = (0..d).map(|j| f[j][t].norm_sqr()).sum();
                    db[k][t] * f[i][t].conj() / sig
                } else {
                    ZERO
                }
            })
            .collect();
        c.push(theta.analyze(&v));
    }
    Ok(RowData {
        b: b.iter().map(|v| theta.analyze(v)).collect(),
        c,
        min_den,
    })
}

/// Solves `S = Σ Tᵢ Uᵢ` with holomorphic `Tᵢ` of power `m − m₀`.
///
/// `bᵢ` is `η̃ S/U₁` blended with `⟨S, Uᵢ⟩/Σ‖Uⱼ‖²` near the collar ends,
/// and `Tᵢ = bᵢ + Σ_k (b_ik − b_ki) U_k` with `∂̄b_ik = ⟨∂̄b_k, Uᵢ⟩/Σ‖Uⱼ‖²`.
/// The assembled `Tᵢ` are projected onto modes `|k| ≤ k_keep`.
pub fn corona_decompose(
    s: &ModeSection,
    family: &GeneratorFamily,
    collar: &Collar,
    settings: &CoronaSettings,
) -> Result<(Vec<ModeSection>, CoronaReport)> {
    let m = s.power();
    let m0 = family.m0;
    if m < 2 * m0 {
        return Err(CollarError::PowerMismatch(format!(
            "corona decomposition needs m ≥ 2·m0, got m = {m}, m0 = {m0}"
        )));
    }
    let d = family.members.len();
    let rate = collar.rate();
    let theta = ThetaGrid::new(collar.delta(), settings.n_theta)?;
    let grid = YGrid::covering(collar, settings.n_y)?.with_spacing(Spacing::Rho);
    let wide = collar.with_k_max(theta.k_max());
    let ys = grid.ys();

    let rows: Result<Vec<RowData>> = ys
        .par_iter()
        .map(|&y| wolff_row(s, family, collar, &theta, y, settings.denominator_floor))
        .collect();
    let rows = rows?;
    let min_denominator = rows.iter().map(|r| r.min_den).fold(f64::INFINITY, f64::min);
    let pair_list = pairs(d);
    let c_samples: Vec<ModeSamples> = (0..pair_list.len())
        .map(|p| to_mode_samples(&rows.iter().map(|r| r.c[p].clone()).collect::<Vec<_>>()))
        .collect();
    let b_samples: Vec<ModeSamples> = (0..d)
        .map(|k| to_mode_samples(&rows.iter().map(|r| r.b[k].clone()).collect::<Vec<_>>()))
        .collect();
    drop(rows);

    let solved: Result<Vec<ModeSamples>> = c_samples
        .into_par_iter()
        .map(|c| {
            let rhs = DbarRhs::new(m - 2 * m0, grid, c)?;
            Ok(solve_dbar(&rhs, &wide, &WeightSpec::Zero, &DbarOptions::default())?.modes)
        })
        .collect();
    let solved = solved?;
    let pair_index = |i: usize, k: usize| pair_list.iter().position(|&p| p == (i, k)).unwrap_or(usize::MAX);

    // Tᵢ = bᵢ + Σ_k (b_ik − b_ki) U_k, row by row in θ
    let t_rows: Result<Vec<Vec<Vec<(i32, Complex64)>>>> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let y = ys[j];
            let at = |ms: &ModeSamples| -> Vec<(i32, Complex64)> { ms.iter().map(|(&k, v)| (k, v[j])).collect() };
            let f: Vec<Vec<Complex64>> = family
                .members
                .iter()
                .map(|u| section_row(u, rate, y, &theta, false))
                .collect::<Result<_>>()?;
            let mut out = Vec::with_capacity(d);
            for i in 0..d {
                let mut t = theta.synthesize(&at(&b_samples[i]))?;
                for k in 0..d {
                    if k == i {
                        continue;
                    }
                    let bik = theta.synthesize(&at(&solved[pair_index(i, k)]))?;
                    let bki = theta.synthesize(&at(&solved[pair_index(k, i)]))?;
                    for n in 0..t.len() {
                        t[n] += (bik[n] - bki[n]) * f[k][n];
                    }
                }
                out.push(theta.analyze(&t));
            }
            Ok(out)
        })
        .collect();
    let t_rows = t_rows?;

    let mut sections = Vec::with_capacity(d);
    let mut dbar_residuals = Vec::with_capacity(d);
    for i in 0..d {
        let raw = to_mode_samples(&t_rows.iter().map(|r| r[i].clone()).collect::<Vec<_>>());
        let (proj, _) = fit_holomorphic(&raw, &grid, rate, m - m0, Some(settings.k_keep))?;
        let p = m - m0;
        let diffs: Result<Vec<(f64, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|j| {
                let y = ys[j];
                let raw_row = theta.synthesize(&raw.iter().map(|(&k, v)| (k, v[j])).collect::<Vec<_>>())?;
                let proj_row = section_row(&proj, rate, y, &theta, false)?;
                let w = y.cos().powi(p);
                let diff = raw_row.iter().zip(&proj_row).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                let top = proj_row.iter().map(|z| z.norm()).fold(0.0, f64::max);
                Ok((diff * w, top * w))
            })
            .collect();
        let (diff, top) = diffs?.into_iter().fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        dbar_residuals.push(if top > 0.0 { diff / top } else { diff });
        sections.push(proj);
    }

    let r = collar.half_width();
    let q = QuadratureSpec::default();
    let mut residual = s.clone();
    let mut norms = Vec::with_capacity(d);
    for (t, u) in sections.iter().zip(&family.members) {
        let term = t.product(u)?;
        let l2 = if term.is_zero() { 0.0 } else { (0.5 * log_l2_sq_norm(&term, collar, -r, r, &q)?).exp() };
        norms.push(TermNorm {
            sup: row_sup(&term, rate, &grid, &theta)?,
            l2,
        });
        residual = residual.add(&term.scale(Complex64::new(-1.0, 0.0)))?;
    }
    let (residual_sup, residual_l2) = if s.is_zero() {
        let sup = row_sup(&residual, rate, &grid, &theta)?;
        (sup, sup)
    } else {
        let sup = row_sup(&residual, rate, &grid, &theta)? / row_sup(s, rate, &grid, &theta)?;
        let l2 = if residual.is_zero() {
            0.0
        } else {
            (0.5 * (log_l2_sq_norm(&residual, collar, -r, r, &q)? - log_l2_sq_norm(s, collar, -r, r, &q)?)).exp()
        };
        (sup, l2)
    };
    let tol = settings.tolerance;
    let pass = residual_sup <= tol
        && residual_l2 <= tol
        && dbar_residuals.iter().all(|&e| e <= tol)
        && norms.iter().all(|n| n.sup.is_finite() && n.l2.is_finite());
    let report = CoronaReport {
        generators: d,
        m,
        m0,
        residual_sup,
        residual_l2,
        dbar_residuals,
        norms,
        min_denominator,
        pass,
    };
    Ok((sections, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_collar;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quick() -> CoronaSettings {
        CoronaSettings {
            n_y: 4096,
            ..CoronaSettings::default()
        }
    }

    fn family(delta: f64) -> (Collar, Generator, GeneratorFamily) {
        let c = make_collar(delta, 64).unwrap();
        let g = collar_generator(&c, 2, &quick()).unwrap();
        let f = build_family(&c, &g, &[1, -1]).unwrap();
        (c, g, f)
    }

    fn boundary_normalised(c: &Collar, m: i32, k_max: i32, seed: u64) -> ModeSection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ModeSection::new(m).unwrap();
        for k in -k_max..=k_max {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            s.set(k, Amplitude::new(z, -c.rate() * k.abs() as f64 * c.y_max())).unwrap();
        }
        s
    }

    #[test]
    fn generator_is_the_projected_cutoff_constant() {
        let (c, g, _) = family(0.05);
        // independent oracle: composite Simpson in ρ of η̃ against cosh^{−2m₀+1}
        let r = c.half_width();
        let n = 200_000;
        let h = 2.0 * r / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=n {
            let rho = -r + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let base = w * rho.cosh().powi(-3);
            num += base * collar_cutoff(&c, rho);
            den += base;
        }
        let expect = c.delta().powf(-0.5) * num / den;
        let got = g.section.coeff(0).value().re;
        assert!((got / expect - 1.0).abs() < 1e-6, "{got} vs {expect}");
        assert!(g.k0_share >= 0.9);
        assert!(g.log_core_norm(&c).exp() >= 0.5 / c.delta().sqrt());
        assert!(g.alpha.abs() <= c.delta().powf(1.5));
        assert!((g.alpha_generator - 1.0).abs() < 0.5);
    }

    #[test]
    fn generator_defect_scales_like_delta_power() {
        let a = collar_generator(&make_collar(0.1, 64).unwrap(), 2, &quick()).unwrap();
        let b = collar_generator(&make_collar(0.05, 64).unwrap(), 2, &quick()).unwrap();
        let q = a.u_scaled / b.u_scaled;
        assert!((0.25..=4.0).contains(&q), "{q}");
    }

    #[test]
    fn orthogonal_modes_decay_towards_the_core() {
        let c = make_collar(0.05, 64).unwrap();
        for k in [1, -1] {
            let rep = orthogonal_decay_check(&ModeSection::monomial(2, k).unwrap(), &c).unwrap();
            assert!(rep.eps6_hat >= 1.0, "k={k}: {}", rep.eps6_hat);
            assert!(rep.max_violation <= 1.05);
            assert!(rep.grad_max_violation <= 1.05);
        }
        assert!(orthogonal_decay_check(&ModeSection::monomial(2, 0).unwrap(), &c).is_err());
    }

    #[test]
    fn gradient_norm_matches_finite_differences() {
        // |∇U| = |∂_z f + i m₀ tan y f| cos^{m₀+1}y with ∂_z = ½(∂_θ − i∂_y)
        let c = make_collar(0.1, 64).unwrap();
        let u = ModeSection::monomial(2, 1).unwrap().add(&ModeSection::monomial(2, 0).unwrap()).unwrap();
        let (rho, theta) = (0.7, 0.013);
        let y = y_of_rho(rho);
        let f = |y: f64, t: f64| u.eval_amplitude(&c, rho_of_y(y), t).value();
        let h = 1e-6;
        let dz = 0.5 * ((f(y, theta + h) - f(y, theta - h)) / (2.0 * h))
            - Complex64::new(0.0, 0.5) * ((f(y + h, theta) - f(y - h, theta)) / (2.0 * h));
        let expect = (dz + Complex64::new(0.0, 2.0 * y.tan()) * f(y, theta)).norm() * y.cos().powi(3);
        let got = log_grad_norm(&u, &c, rho, theta).exp();
        assert!((got / expect - 1.0).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn nonvanishing_radius_is_certified() {
        let (c, g, _) = family(0.05);
        let rep = nonvanishing_radius(&g.section, &c).unwrap();
        assert!(rep.certified && rep.r <= 5.0 && rep.margin > 0.0);
        let pure = ModeSection::monomial(2, 0).unwrap();
        assert_eq!(nonvanishing_radius(&pure, &c).unwrap().r, 2.0);
        let mut nudged = pure.clone();
        nudged.set(3, Amplitude::new(Complex64::new(1e-300, 0.0), -3.0 * c.rate() * c.y_max())).unwrap();
        assert_eq!(nonvanishing_radius(&nudged, &c).unwrap().r, 2.0);
        let off = nonvanishing_radius(&ModeSection::monomial(2, 1).unwrap(), &c).unwrap();
        assert!(!off.certified && off.r == c.half_width());
    }

    #[test]
    fn family_is_nearly_orthogonal() {
        let (c, _, f) = family(0.05);
        assert_eq!(f.members.len(), 3);
        assert!(f.max_coherence <= 0.2);
        assert!(f.orthonormal_defect <= 1e-8);
        assert!(f.least_eigenvalue > 0.0 && f.core_sum > 0.0);
        let g = collar_generator(&c, 2, &quick()).unwrap();
        assert!(build_family(&c, &g, &[1, 1]).is_err());
        assert!(build_family(&c, &g, &[0]).is_err());
    }

    #[test]
    fn zero_section_decomposes_to_zero() {
        let (c, _, f) = family(0.05);
        let (t, rep) = corona_decompose(&ModeSection::new(6).unwrap(), &f, &c, &quick()).unwrap();
        assert!(t.iter().all(ModeSection::is_zero));
        assert_eq!(rep.residual_sup, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn decomposition_is_linear_and_reconstructs() {
        let (c, _, f) = family(0.05);
        let s = boundary_normalised(&c, 6, 16, 11);
        let (t, rep) = corona_decompose(&s, &f, &c, &quick()).unwrap();
        assert!(rep.residual_sup <= 1e-6 && rep.residual_l2 <= 1e-6, "{rep:?}");
        assert_eq!(rep.generators, 3);
        let (t2, _) = corona_decompose(&s.scale(Complex64::new(2.0, 0.0)), &f, &c, &quick()).unwrap();
        for (a, b) in t.iter().zip(&t2) {
            assert_eq!(a.scale(Complex64::new(2.0, 0.0)), *b);
        }
    }

    #[test]
    fn decomposition_rejects_bad_input() {
        let (c, _, f) = family(0.05);
        let s = boundary_normalised(&c, 3, 2, 1);
        assert!(matches!(
            corona_decompose(&s, &f, &c, &quick()),
            Err(CollarError::PowerMismatch(_))
        ));
        let strict = CoronaSettings {
            denominator_floor: 1e10,
            ..quick()
        };
        let s = boundary_normalised(&c, 6, 2, 1);
        assert!(matches!(
            corona_decompose(&s, &f, &c, &strict),
            Err(CollarError::DenominatorFloor { .. })
        ));
    }
}
