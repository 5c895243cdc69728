//! Log-space complex numbers.
//!
//! Powers `w^k` on a thin collar reach `e^{±10^3}`, far outside `f64`. Values
//! are carried as `(log_modulus, phase)` and only exponentiated once exponents
//! have been combined.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Exponent beyond which `exp` overflows `f64`.
pub const MAX_EXPONENT: f64 = 700.0;

/// A complex number stored as `(ln|z|, arg z)`.
///
/// `log_modulus == -inf` encodes zero. The phase lies in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_modulus: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex {
        log_modulus: f64::NEG_INFINITY,
        phase: 0.0,
    };
    pub const ONE: LogComplex = LogComplex {
        log_modulus: 0.0,
        phase: 0.0,
    };

    pub fn new(log_modulus: f64, phase: f64) -> Self {
        LogComplex {
            log_modulus,
            phase: wrap_phase(phase),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::new(0.0, 0.0) {
            return Self::ZERO;
        }
        LogComplex::new(z.norm().ln(), z.arg())
    }

    pub fn is_zero(&self) -> bool {
        self.log_modulus == f64::NEG_INFINITY
    }

    pub fn mul(self, other: LogComplex) -> LogComplex {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        LogComplex::new(self.log_modulus + other.log_modulus, self.phase + other.phase)
    }

    pub fn powi(self, k: i32) -> LogComplex {
        if k == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return Self::ZERO;
        }
        LogComplex::new(self.log_modulus * k as f64, self.phase * k as f64)
    }

    pub fn conj(self) -> LogComplex {
        LogComplex::new(self.log_modulus, -self.phase)
    }

    /// Linear value; underflows to zero, overflows to infinity.
    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_modulus.exp(), self.phase)
    }

    /// `ln|z - 1|`, stable for `|z|` anywhere in `(0, ∞)`.
    pub fn ln_abs_minus_one(self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let l = self.log_modulus;
        if l <= 0.0 {
            ln_abs_unit_offset(l, self.phase)
        } else {
            // |z - 1| = |z| * |1 - 1/z|
            l + ln_abs_unit_offset(-l, -self.phase)
        }
    }
}

/// `ln|e^{l + iφ} - 1|` for `l <= 0`, via
/// `|z-1|^2 = (1 - e^l)^2 + 4 e^l sin^2(φ/2)`.
fn ln_abs_unit_offset(l: f64, phase: f64) -> f64 {
    let r = l.exp();
    if r < 0.5 {
        // |z-1|^2 - 1 = r (r - 2 cos φ), kept to full relative precision
        return 0.5 * (r * (r - 2.0 * phase.cos())).ln_1p();
    }
    let a = -l.exp_m1();
    let s = (0.5 * phase).sin();
    let sq = a * a + 4.0 * l.exp() * s * s;
    0.5 * sq.ln()
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    if phase > -PI && phase <= PI {
        return phase;
    }
    let two_pi = 2.0 * PI;
    let mut p = phase.rem_euclid(two_pi);
    if p > PI {
        p -= two_pi;
    }
    p
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `ln Σ e^{x_i}` over a slice; `-inf` for an empty or all-`-inf` slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// A complex amplitude `mantissa * e^{exponent}`.
///
/// Scaling the mantissa by a power of two is exact, so linear pipelines stay
/// bit-for-bit linear while the exponent keeps magnitudes like `e^{-3000}`
/// representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude {
    pub mantissa: Complex64,
    pub exponent: f64,
}

impl Amplitude {
    pub fn new(mantissa: Complex64, exponent: f64) -> Self {
        Amplitude { mantissa, exponent }
    }

    pub fn linear(value: Complex64) -> Self {
        Amplitude {
            mantissa: value,
            exponent: 0.0,
        }
    }

    pub fn from_log(z: LogComplex) -> Self {
        if z.is_zero() {
            return Amplitude::linear(Complex64::new(0.0, 0.0));
        }
        Amplitude {
            mantissa: Complex64::from_polar(1.0, z.phase),
            exponent: z.log_modulus,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.norm().ln() + self.exponent
        }
    }

    pub fn to_log(&self) -> LogComplex {
        if self.is_zero() {
            return LogComplex::ZERO;
        }
        LogComplex::new(self.ln_abs(), self.mantissa.arg())
    }

    /// Linear value; may underflow or overflow.
    pub fn value(&self) -> Complex64 {
        if self.exponent == 0.0 {
            self.mantissa
        } else {
            self.mantissa * self.exponent.exp()
        }
    }

    pub fn scale(&self, c: Complex64) -> Amplitude {
        Amplitude {
            mantissa: self.mantissa * c,
            exponent: self.exponent,
        }
    }

    /// Sum of two amplitudes, expressed at the larger of the two exponents.
    pub fn add(&self, other: &Amplitude) -> Amplitude {
        if other.is_zero() {
            return *self;
        }
        if self.is_zero() {
            return *other;
        }
        if self.exponent >= other.exponent {
            Amplitude {
                mantissa: self.mantissa + other.mantissa * (other.exponent - self.exponent).exp(),
                exponent: self.exponent,
            }
        } else {
            other.add(self)
        }
    }
}
