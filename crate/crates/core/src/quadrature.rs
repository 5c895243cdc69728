//! Adaptive Simpson quadrature for mode integrals.
//!
//! Every L² norm on the collar reduces to
//! `∫ exp(−c·y) cos^{2m−2} y dy` over a `y`-interval, where `c = 4πk/δ`
//! can be in the tens of thousands. The integrand is shifted by its maximum
//! before integration so the result comes back as a logarithm.

use serde::{Deserialize, Serialize};

use crate::error::{CollarError, Result};

/// Controls for [`log_mode_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Initial number of Simpson panels.
    pub panels: usize,
    pub rel_tol: f64,
    /// Maximum bisection depth per panel.
    pub max_refine: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            panels: 16,
            rel_tol: 1e-10,
            max_refine: 40,
        }
    }
}

impl QuadratureSpec {
    pub fn new(panels: usize, rel_tol: f64, max_refine: usize) -> Result<Self> {
        let q = QuadratureSpec {
            panels,
            rel_tol,
            max_refine,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels < 8 {
            return Err(CollarError::domain(format!(
                "quadrature needs at least 8 panels, got {}",
                self.panels
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(CollarError::domain(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_refine == 0 {
            return Err(CollarError::domain("max_refine must be positive"));
        }
        Ok(())
    }
}

/// Exponent of the mode integrand, `−c·y + (2m−2)·ln cos y`.
#[inline]
fn log_integrand(c: f64, power: i32, y: f64) -> f64 {
    let e = 2.0 * power as f64 - 2.0;
    if e == 0.0 {
        -c * y
    } else {
        -c * y + e * y.cos().ln()
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

struct Simpson<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    max_depth: usize,
    failed: bool,
    evals: usize,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    fn panel(&mut self, a: f64, b: f64, fa: f64, fb: f64) -> Panel {
        let m = 0.5 * (a + b);
        let fm = (self.f)(m);
        self.evals += 1;
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        }
    }

    fn refine(&mut self, p: Panel, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (p.a + p.b);
        let left = self.panel(p.a, m, p.fa, p.fm);
        let right = self.panel(m, p.b, p.fm, p.fb);
        let both = left.whole + right.whole;
        let err = both - p.whole;
        if err.abs() <= 15.0 * tol || err.abs() <= 1e-14 * both.abs() {
            return both + err / 15.0;
        }
        if depth >= self.max_depth || m <= p.a || m >= p.b {
            self.failed = true;
            return both + err / 15.0;
        }
        self.refine(left, 0.5 * tol, depth + 1) + self.refine(right, 0.5 * tol, depth + 1)
    }
}

/// Adaptive Simpson integral of a nonnegative function over `breaks`,
/// refined until the absolute error estimate is below `abs_tol`.
fn simpson_pass<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    panels: usize,
    abs_tol: f64,
    max_depth: usize,
) -> (f64, bool) {
    let mut s = Simpson {
        f,
        max_depth,
        failed: false,
        evals: 0,
    };
    let span = breaks[breaks.len() - 1] - breaks[0];
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = ((panels as f64) * (hi - lo) / span).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        let mut fa = f(lo);
        for i in 0..n {
            let a = lo + i as f64 * h;
            let b = if i + 1 == n { hi } else { a + h };
            let fb = f(b);
            let p = s.panel(a, b, fa, fb);
            let tol = abs_tol * (b - a) / span;
            total += s.refine(p, tol, 0);
            fa = fb;
        }
    }
    (total, s.failed)
}

/// `ln ∫_{y_lo}^{y_hi} exp(−c·y) cos^{2m−2} y dy`.
///
/// The interval is split at the interior maximiser of the integrand, the
/// integrand is divided by its maximum, and refinement runs until the error
/// estimate is below `rel_tol` of the integral.
pub fn log_mode_integral(c: f64, power: i32, y_lo: f64, y_hi: f64, q: &QuadratureSpec) -> Result<f64> {
    q.validate()?;
    if !(y_lo < y_hi) {
        return Err(CollarError::domain(format!(
            "empty integration interval [{y_lo}, {y_hi}]"
        )));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    if y_lo <= -half_pi || y_hi >= half_pi {
        return Err(CollarError::domain("integration interval leaves (−π/2, π/2)"));
    }
    let e = 2.0 * power as f64 - 2.0;
    let mut peak_y = if log_integrand(c, power, y_lo) >= log_integrand(c, power, y_hi) { y_lo } else { y_hi };
    if e > 0.0 {
        let ys = (-c / e).atan();
        if ys > y_lo && ys < y_hi {
            peak_y = ys;
        }
    }
    // Offsets from the peak keep `c·t` small where the integrand matters;
    // evaluating `−c·y` directly would carry absolute rounding of order `c`.
    // cos(peak + t)/cos(peak) = 1 − 2 sin²(t/2) − tan(peak) sin t stays
    // accurate where cos(peak + t) itself is tiny.
    let tan_peak = peak_y.tan();
    let f = |t: f64| {
        let tail = if e == 0.0 {
            0.0
        } else {
            let h = (0.5 * t).sin();
            e * (-2.0 * h * h - tan_peak * t.sin()).ln_1p()
        };
        (-c * t + tail).exp()
    };
    let shift = log_integrand(c, power, peak_y);
    let mut breaks = vec![y_lo - peak_y];
    if peak_y > y_lo && peak_y < y_hi {
        breaks.push(0.0);
    }
    breaks.push(y_hi - peak_y);

    // The peak has value 1 and width at least min(span, 1/|g'|), which bounds
    // the integral from below for the first pass.
    let slope = c.abs() + e.abs() * y_lo.tan().abs().max(y_hi.tan().abs());
    let width = (y_hi - y_lo).min(1.0 / slope.max(1e-300));
    let mut estimate = 0.25 * width;
    let mut previous = f64::NAN;
    for _ in 0..4 {
        let (value, failed) = simpson_pass(&f, &breaks, q.panels, q.rel_tol * estimate, q.max_refine);
        if failed || !(value > 0.0) || !value.is_finite() {
            return Err(CollarError::Accuracy {
                rel_tol: q.rel_tol,
                previous: shift + estimate.ln(),
                last: shift + value.ln(),
            });
        }
        if value >= 0.5 * estimate {
            return Ok(shift + value.ln());
        }
        previous = value;
        estimate = value;
    }
    Err(CollarError::Accuracy {
        rel_tol: q.rel_tol,
        previous: shift + previous.ln(),
        last: shift + estimate.ln(),
    })
}

/// Plain adaptive Simpson for a smooth function on `[a, b]`, to absolute
/// tolerance `abs_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, q: &QuadratureSpec) -> Result<f64> {
    q.validate()?;
    let (v, failed) = simpson_pass(&f, &[a, b], q.panels, abs_tol, q.max_refine);
    if failed {
        let (coarse, _) = simpson_pass(&f, &[a, b], q.panels, abs_tol * 16.0, q.max_refine / 2);
        return Err(CollarError::Accuracy {
            rel_tol: q.rel_tol,
            previous: coarse,
            last: v,
        });
    }
    Ok(v)
}
