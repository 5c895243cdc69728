//! Truncated Laurent sections `f(w)·(dz)^m` of `K^m` over a collar.
//!
//! Coefficients are referenced to the core geodesic, where `|w| = 1`. Each is
//! an [`Amplitude`] so that data propagated in from a collar boundary, with
//! factors like `e^{−97k}`, survives without underflow.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CollarError, Result};
use crate::geometry::{y_of_rho, Collar, CollarPoint};
use crate::logspace::{ln_cosh, Amplitude, LogComplex, MAX_EXPONENT};
use crate::quadrature::{log_mode_integral, QuadratureSpec};

/// Sparse coefficient map `k ↦ c_k` for Fourier and boundary data.
pub type CoeffMap = BTreeMap<i32, Complex64>;

/// `Σ c_k w^k (dz)^m` with finitely many modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSection {
    power: i32,
    coeffs: BTreeMap<i32, Amplitude>,
}

impl ModeSection {
    pub fn new(power: i32) -> Result<Self> {
        if power < 1 {
            return Err(CollarError::domain(format!("section power must be ≥ 1, got {power}")));
        }
        Ok(ModeSection {
            power,
            coeffs: BTreeMap::new(),
        })
    }

    /// Section with core-referenced linear coefficients.
    pub fn from_coeffs(power: i32, coeffs: &CoeffMap) -> Result<Self> {
        let mut s = ModeSection::new(power)?;
        for (&k, &c) in coeffs {
            s.set(k, Amplitude::linear(c))?;
        }
        Ok(s)
    }

    /// `w^k (dz)^m`.
    pub fn monomial(power: i32, k: i32) -> Result<Self> {
        let mut s = ModeSection::new(power)?;
        s.set(k, Amplitude::linear(Complex64::new(1.0, 0.0)))?;
        Ok(s)
    }

    pub fn power(&self) -> i32 {
        self.power
    }

    pub fn set(&mut self, k: i32, c: Amplitude) -> Result<()> {
        if !(c.mantissa.re.is_finite() && c.mantissa.im.is_finite() && c.exponent.is_finite()) {
            return Err(CollarError::domain(format!("non-finite amplitude for mode {k}")));
        }
        self.coeffs.insert(k, c);
        Ok(())
    }

    pub fn coeff(&self, k: i32) -> Amplitude {
        self.coeffs
            .get(&k)
            .copied()
            .unwrap_or_else(|| Amplitude::linear(Complex64::new(0.0, 0.0)))
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i32, Amplitude)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    /// Modes carrying a nonzero amplitude.
    pub fn support(&self) -> Vec<i32> {
        self.coeffs
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(&k, _)| k)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(Amplitude::is_zero)
    }

    /// Largest `|k|` with a nonzero coefficient.
    pub fn max_mode(&self) -> usize {
        self.support().iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Multiplies every coefficient by `c`. Exact when `c` is a power of two.
    pub fn scale(&self, c: Complex64) -> ModeSection {
        ModeSection {
            power: self.power,
            coeffs: self.coeffs.iter().map(|(&k, a)| (k, a.scale(c))).collect(),
        }
    }

    pub fn add(&self, other: &ModeSection) -> Result<ModeSection> {
        same_power(self, other)?;
        let mut out = self.clone();
        for (&k, c) in &other.coeffs {
            let sum = out.coeff(k).add(c);
            out.coeffs.insert(k, sum);
        }
        Ok(out)
    }

    /// Tensor product in `K^{m_a + m_b}`; coefficients convolve.
    pub fn product(&self, other: &ModeSection) -> Result<ModeSection> {
        let mut out = ModeSection::new(self.power + other.power)?;
        for (&j, a) in &self.coeffs {
            for (&k, b) in &other.coeffs {
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                let t = Amplitude::new(a.mantissa * b.mantissa, a.exponent + b.exponent);
                let sum = out.coeff(j + k).add(&t);
                out.coeffs.insert(j + k, sum);
            }
        }
        Ok(out)
    }

    /// Restriction to the modes selected by `keep`.
    pub fn filter(&self, keep: impl Fn(i32) -> bool) -> ModeSection {
        ModeSection {
            power: self.power,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&k, _)| keep(k))
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    /// Errors when a mode exceeds the collar's truncation order.
    pub fn check_modes(&self, collar: &Collar) -> Result<()> {
        let k_max = collar.k_max();
        match self.max_mode() {
            k if k > k_max => Err(CollarError::domain(format!(
                "section uses mode |k| = {k} beyond k_max = {k_max}"
            ))),
            _ => Ok(()),
        }
    }

    /// Linear coefficients; underflow to zero is allowed.
    pub fn linear_coeffs(&self) -> CoeffMap {
        self.coeffs.iter().map(|(&k, c)| (k, c.value())).collect()
    }

    /// `Σ_{|k| ≥ k_from} |c_k|`, a crude truncation indicator.
    pub fn tail_magnitude(&self, k_from: usize) -> f64 {
        self.coeffs
            .iter()
            .filter(|(k, _)| k.unsigned_abs() as usize >= k_from)
            .map(|(_, c)| c.ln_abs().exp())
            .sum()
    }

    /// `f(w)` at `(ρ, θ)` as an amplitude, with exponents combined in log space.
    pub fn eval_amplitude(&self, collar: &Collar, rho: f64, theta: f64) -> Amplitude {
        self.eval_weighted(collar, rho, theta, |_| Complex64::new(1.0, 0.0))
    }

    /// `Σ c_k λ(k) w^k` at `(ρ, θ)`.
    fn eval_weighted(&self, collar: &Collar, rho: f64, theta: f64, lambda: impl Fn(i32) -> Complex64) -> Amplitude {
        let rate = collar.rate();
        let lw = -rate * y_of_rho(rho);
        let arg = rate * theta;
        let mut top = f64::NEG_INFINITY;
        for (&k, c) in &self.coeffs {
            if !c.is_zero() {
                top = top.max(c.exponent + k as f64 * lw);
            }
        }
        if top == f64::NEG_INFINITY {
            return Amplitude::linear(Complex64::new(0.0, 0.0));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (&k, c) in &self.coeffs {
            if c.is_zero() {
                continue;
            }
            let e = c.exponent + k as f64 * lw - top;
            if e < -MAX_EXPONENT {
                continue;
            }
            acc += c.mantissa * lambda(k) * Complex64::from_polar(e.exp(), k as f64 * arg);
        }
        Amplitude::new(acc, top)
    }

    /// `f(w(p))`. Fails when the combined exponent leaves the `f64` range.
    pub fn eval_f(&self, collar: &Collar, p: &CollarPoint) -> Result<Complex64> {
        let a = self.eval_amplitude(collar, p.rho, p.theta);
        self.finite_value(collar, p.rho, a)
    }

    /// `∂f/∂z = Σ c_k (2πik/δ) w^k` at `(ρ, θ)`.
    pub fn eval_dz_amplitude(&self, collar: &Collar, rho: f64, theta: f64) -> Amplitude {
        let rate = collar.rate();
        self.eval_weighted(collar, rho, theta, |k| Complex64::new(0.0, rate * k as f64))
    }

    fn finite_value(&self, collar: &Collar, rho: f64, a: Amplitude) -> Result<Complex64> {
        if a.exponent > MAX_EXPONENT {
            let lw = -collar.rate() * y_of_rho(rho);
            let mode = self
                .coeffs
                .iter()
                .filter(|(_, c)| !c.is_zero())
                .max_by(|x, y| {
                    (x.1.exponent + *x.0 as f64 * lw).total_cmp(&(y.1.exponent + *y.0 as f64 * lw))
                })
                .map(|(&k, _)| k)
                .unwrap_or(0);
            return Err(CollarError::Overflow {
                mode,
                exponent: a.exponent,
            });
        }
        Ok(a.value())
    }

    /// `ln ‖f (dz)^m‖²(ρ) = 2 ln|f| − 2m ln cosh ρ`.
    pub fn log_pointwise_sq_norm(&self, collar: &Collar, rho: f64, theta: f64) -> f64 {
        2.0 * self.eval_amplitude(collar, rho, theta).ln_abs() - 2.0 * self.power as f64 * ln_cosh(rho)
    }

    /// `‖f (dz)^m‖² = |f|² cosh^{−2m} ρ`.
    pub fn pointwise_sq_norm(&self, collar: &Collar, p: &CollarPoint) -> Result<f64> {
        let l = self.log_pointwise_sq_norm(collar, p.rho, p.theta);
        if l > 2.0 * MAX_EXPONENT {
            let a = self.eval_amplitude(collar, p.rho, p.theta);
            self.finite_value(collar, p.rho, a)?;
            return Err(CollarError::Overflow { mode: 0, exponent: 0.5 * l });
        }
        Ok(l.exp())
    }

    /// Samples of `f` on the circle at `ρ`, `n` equispaced θ values from 0.
    pub fn sample_circle(&self, collar: &Collar, rho: f64, n: usize) -> Result<Vec<Complex64>> {
        let h = collar.delta() / n as f64;
        (0..n)
            .map(|j| {
                let a = self.eval_amplitude(collar, rho, j as f64 * h);
                self.finite_value(collar, rho, a)
            })
            .collect()
    }
}

fn same_power(a: &ModeSection, b: &ModeSection) -> Result<()> {
    if a.power != b.power {
        return Err(CollarError::PowerMismatch(format!(
            "sections of K^{} and K^{} cannot be combined",
            a.power, b.power
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffEntry {
    Plain(i32, f64, f64),
    Scaled(i32, f64, f64, f64),
}

#[derive(Serialize, Deserialize)]
struct SectionRepr {
    power: i32,
    coeffs: Vec<CoeffEntry>,
    reference: String,
}

impl Serialize for ModeSection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&k, c)| {
                if c.exponent == 0.0 {
                    CoeffEntry::Plain(k, c.mantissa.re, c.mantissa.im)
                } else {
                    CoeffEntry::Scaled(k, c.mantissa.re, c.mantissa.im, c.exponent)
                }
            })
            .collect();
        SectionRepr {
            power: self.power,
            coeffs,
            reference: "core".to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModeSection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = SectionRepr::deserialize(d)?;
        if repr.reference != "core" {
            return Err(D::Error::custom(format!(
                "unsupported coefficient reference {:?}",
                repr.reference
            )));
        }
        let mut s = ModeSection::new(repr.power).map_err(D::Error::custom)?;
        for e in repr.coeffs {
            let (k, a) = match e {
                CoeffEntry::Plain(k, re, im) => (k, Amplitude::linear(Complex64::new(re, im))),
                CoeffEntry::Scaled(k, re, im, ex) => (k, Amplitude::new(Complex64::new(re, im), ex)),
            };
            s.set(k, a).map_err(D::Error::custom)?;
        }
        Ok(s)
    }
}

/// `ln N_k` on `[ρ_lo, ρ_hi]`, where
/// `N_k = δ ∫ |w|^{2k} cosh^{1−2m} ρ dρ = δ ∫ e^{−(4πk/δ) y} cos^{2m−2} y dy`.
pub fn log_mode_sq_norm(
    collar: &Collar,
    k: i32,
    m: i32,
    rho_lo: f64,
    rho_hi: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    let r = collar.half_width() * (1.0 + 1e-14);
    if !(rho_lo < rho_hi) || rho_lo < -r || rho_hi > r {
        return Err(CollarError::domain(format!(
            "integration range [{rho_lo}, {rho_hi}] not inside the collar"
        )));
    }
    let c = 2.0 * collar.rate() * k as f64;
    let v = log_mode_integral(c, m, y_of_rho(rho_lo), y_of_rho(rho_hi), q)?;
    Ok(collar.delta().ln() + v)
}

/// `⟨a, b⟩` over `ρ_lo < ρ < ρ_hi`; modes are orthogonal in θ, so this is
/// `Σ_k a_k b̄_k N_k`.
pub fn l2_inner(
    a: &ModeSection,
    b: &ModeSection,
    collar: &Collar,
    rho_lo: f64,
    rho_hi: f64,
    q: &QuadratureSpec,
) -> Result<Complex64> {
    same_power(a, b)?;
    let mut terms = Vec::new();
    for (&k, ca) in &a.coeffs {
        let cb = b.coeff(k);
        if ca.is_zero() || cb.is_zero() {
            continue;
        }
        let ln_n = log_mode_sq_norm(collar, k, a.power, rho_lo, rho_hi, q)?;
        terms.push((ca.mantissa * cb.mantissa.conj(), ca.exponent + cb.exponent + ln_n));
    }
    let top = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if top > MAX_EXPONENT {
        return Err(CollarError::Overflow { mode: 0, exponent: top });
    }
    Ok(terms.iter().map(|(z, e)| z * e.exp()).sum())
}

/// `ln ‖a‖²` over `ρ_lo < ρ < ρ_hi`, finite for any amplitudes.
pub fn log_l2_sq_norm(a: &ModeSection, collar: &Collar, rho_lo: f64, rho_hi: f64, q: &QuadratureSpec) -> Result<f64> {
    let mut terms = Vec::new();
    for (&k, c) in &a.coeffs {
        if c.is_zero() {
            continue;
        }
        terms.push(2.0 * c.ln_abs() + log_mode_sq_norm(collar, k, a.power, rho_lo, rho_hi, q)?);
    }
    Ok(crate::logspace::log_sum_exp(&terms))
}

/// Factor carrying a mode-`k` Fourier coefficient from the circle at
/// `ρ_from` to the circle at `ρ_to`: `|w(ρ_to)/w(ρ_from)|^k`.
pub fn propagate_mode(collar: &Collar, k: i32, rho_from: f64, rho_to: f64) -> LogComplex {
    if k == 0 {
        return LogComplex::ONE;
    }
    let l = -collar.rate() * k as f64 * (y_of_rho(rho_to) - y_of_rho(rho_from));
    LogComplex::new(l, 0.0)
}

/// Splits boundary data into the three pieces of a holomorphic section:
/// positive modes from the left circle `ρ = −(R−b)`, the mean from the
/// right circle, and negative modes from the right circle `ρ = R−b`.
pub fn decompose_boundary(
    collar: &Collar,
    left: &CoeffMap,
    right: &CoeffMap,
    band: f64,
    m: i32,
) -> Result<(ModeSection, ModeSection, ModeSection)> {
    let r = collar.half_width();
    if !(band >= 0.0 && band < r) {
        return Err(CollarError::domain(format!("band {band} must lie in [0, {r})")));
    }
    let k_max = collar.k_max() as i32;
    for k in left.keys().chain(right.keys()) {
        if k.abs() > k_max {
            return Err(CollarError::domain(format!(
                "boundary mode {k} beyond k_max = {k_max}"
            )));
        }
    }
    let edge = r - band;
    let mut g1 = ModeSection::new(m)?;
    let mut g2 = ModeSection::new(m)?;
    let mut g3 = ModeSection::new(m)?;
    for (&k, &a) in left.range(1..) {
        let f = propagate_mode(collar, k, -edge, 0.0);
        g1.set(k, Amplitude::new(a, f.log_modulus))?;
    }
    if let Some(&b0) = right.get(&0) {
        g2.set(0, Amplitude::linear(b0))?;
    }
    for (&k, &b) in right.range(..0) {
        let f = propagate_mode(collar, k, edge, 0.0);
        g3.set(k, Amplitude::new(b, f.log_modulus))?;
    }
    Ok((g1, g2, g3))
}

/// Fourier coefficients `p_k/δ` of samples on one circle, for `|k| ≤ k_max`.
pub fn fourier_boundary(samples: &[Complex64], collar: &Collar) -> Result<CoeffMap> {
    let n = samples.len();
    let k_max = collar.k_max();
    if n < 2 * k_max + 1 {
        return Err(CollarError::Aliasing {
            samples: n,
            k_max,
            needed: 2 * k_max + 1,
        });
    }
    let mut buf = samples.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let mut out = CoeffMap::new();
    for (j, v) in buf.iter().enumerate() {
        let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
        if k.unsigned_abs() as usize <= k_max {
            out.insert(k as i32, v * scale);
        }
    }
    Ok(out)
}

/// Pointwise `⟨S, U⟩` in `K^{m₁}`, `m₁ = U.power`, keeping the
/// `(dz)^{m−m₁}` factor: `f_S conj(f_U) cosh^{−2m₁} ρ`.
pub fn contract(s: &ModeSection, u: &ModeSection, collar: &Collar, p: &CollarPoint) -> Result<Complex64> {
    let a = contract_amplitude(s, u, collar, p.rho, p.theta)?;
    if a.exponent > MAX_EXPONENT {
        return Err(CollarError::Overflow { mode: 0, exponent: a.exponent });
    }
    Ok(a.value())
}

pub fn contract_amplitude(s: &ModeSection, u: &ModeSection, collar: &Collar, rho: f64, theta: f64) -> Result<Amplitude> {
    if u.power > s.power {
        return Err(CollarError::PowerMismatch(format!(
            "cannot contract K^{} against K^{}",
            s.power, u.power
        )));
    }
    let fs = s.eval_amplitude(collar, rho, theta);
    let fu = u.eval_amplitude(collar, rho, theta);
    Ok(Amplitude::new(
        fs.mantissa * fu.mantissa.conj(),
        fs.exponent + fu.exponent - 2.0 * u.power as f64 * ln_cosh(rho),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_collar;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let col = make_collar(0.1, 4).unwrap();
        let one = ModeSection::monomial(2, 0).unwrap();
        let p = col.point(1.3, 0.07).unwrap();
        assert_eq!(one.eval_f(&col, &p).unwrap(), c(1.0, 0.0));
        let w = ModeSection::monomial(2, 1).unwrap();
        let v = w.eval_f(&col, &col.point(0.0, 0.05).unwrap()).unwrap();
        assert!((v - c(-1.0, 0.0)).norm() < 1e-12);
        let r = col.half_width();
        let a = w.eval_amplitude(&col, r, 0.0);
        assert!((a.ln_abs() + 96.940_297_459_6).abs() < 1e-6);
        let big = ModeSection::monomial(2, -9).unwrap();
        assert!(matches!(
            big.eval_f(&col, &col.point(r, 0.0).unwrap()),
            Err(CollarError::Overflow { mode: -9, .. })
        ));
    }

    #[test]
    fn pointwise_norm_examples() {
        let col = make_collar(0.1, 4).unwrap();
        let one = ModeSection::monomial(1, 0).unwrap();
        assert_eq!(one.pointwise_sq_norm(&col, &col.point(0.0, 0.0).unwrap()).unwrap(), 1.0);
        let two = ModeSection::monomial(2, 0).unwrap();
        let p0 = col.point(col.rho0().unwrap(), 0.0).unwrap();
        let v = two.pointwise_sq_norm(&col, &p0).unwrap();
        assert!((v * 1280.0 - 1.0).abs() < 1e-12);
        let doubled = two.scale(c(2.0, 0.0));
        assert!((doubled.pointwise_sq_norm(&col, &p0).unwrap() / v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn l2_examples() {
        let col = make_collar(0.1, 8).unwrap();
        let q = QuadratureSpec::default();
        let r = col.half_width();
        let w = ModeSection::monomial(2, 1).unwrap();
        let one = ModeSection::monomial(2, 0).unwrap();
        assert_eq!(l2_inner(&w, &one, &col, -r, r, &q).unwrap(), c(0.0, 0.0));
        let n = l2_inner(&one, &one, &col, -r, r, &q).unwrap();
        assert!((n.re - 0.157_078_178_269_7).abs() < 1e-11 && n.im == 0.0);
        let three = ModeSection::monomial(3, 0).unwrap();
        assert!(matches!(
            l2_inner(&one, &three, &col, -r, r, &q),
            Err(CollarError::PowerMismatch(_))
        ));
    }

    #[test]
    fn propagation_examples() {
        let col = make_collar(0.1, 4).unwrap();
        let r = col.half_width();
        assert_eq!(propagate_mode(&col, 0, -1.0, 2.0).log_modulus, 0.0);
        assert_eq!(propagate_mode(&col, 5, 1.5, 1.5).log_modulus, 0.0);
        let f = propagate_mode(&col, 1, 0.0, r);
        let oracle = -(4.0 * PI / 0.1) * (r.exp().atan() - PI / 4.0);
        assert!((f.log_modulus - oracle).abs() < 1e-10);
    }

    #[test]
    fn decompose_examples() {
        let col = make_collar(0.1, 4).unwrap();
        let mut right = CoeffMap::new();
        right.insert(0, c(1.0, 0.0));
        let (g1, g2, g3) = decompose_boundary(&col, &CoeffMap::new(), &right, 0.0, 2).unwrap();
        assert!(g1.is_zero() && g3.is_zero());
        assert_eq!(g2, ModeSection::monomial(2, 0).unwrap());
        let mut left = CoeffMap::new();
        left.insert(1, c(1.0, 0.0));
        let (g1, _, _) = decompose_boundary(&col, &left, &CoeffMap::new(), 0.0, 2).unwrap();
        let r = col.half_width();
        let oracle = propagate_mode(&col, 1, 0.0, r).log_modulus;
        assert!((g1.coeff(1).ln_abs() - oracle).abs() < 1e-10);
    }

    #[test]
    fn fourier_examples() {
        let col = make_collar(0.1, 3).unwrap();
        let coeffs = fourier_boundary(&[c(2.0, -1.0); 8], &col).unwrap();
        assert!((coeffs[&0] - c(2.0, -1.0)).norm() < 1e-15);
        assert!(coeffs.iter().filter(|(k, _)| **k != 0).all(|(_, v)| v.norm() < 1e-15));
        let samples: Vec<_> = (0..8)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / 8.0))
            .collect();
        let coeffs = fourier_boundary(&samples, &col).unwrap();
        assert!((coeffs[&1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(matches!(
            fourier_boundary(&samples[..6], &col),
            Err(CollarError::Aliasing { needed: 7, .. })
        ));
    }

    #[test]
    fn contract_examples() {
        let col = make_collar(0.1, 3).unwrap();
        let p = col.point(0.0, 0.0).unwrap();
        let s = ModeSection::monomial(3, 1).unwrap();
        let u = ModeSection::monomial(1, 0).unwrap();
        assert!((contract(&s, &u, &col, &p).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(contract(&u, &s, &col, &p).is_err());
        let q = col.point(-1.1, 0.03).unwrap();
        let two = ModeSection::monomial(2, 0).unwrap();
        let v = contract(&two, &two, &col, &q).unwrap();
        assert!((v.re - two.pointwise_sq_norm(&col, &q).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut s = ModeSection::new(3).unwrap();
        s.set(-2, Amplitude::new(c(0.1, 1.0 / 3.0), -812.25)).unwrap();
        s.set(0, Amplitude::linear(c(std::f64::consts::E, -0.0))).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"reference\":\"core\""));
        let back: ModeSection = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<ModeSection>(r#"{"power":1,"coeffs":[],"reference":"edge"}"#).is_err());
    }
}
