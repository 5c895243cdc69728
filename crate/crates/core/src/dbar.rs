//! Weighted minimal solutions of `∂̄u = v` on the collar, mode by mode in θ.
//!
//! Data live on a [`YGrid`] as one sampled profile per Fourier mode:
//! `u = Σ_k g_k(y) e^{2πikθ/δ} (dz)^m`. Writing `a_k = 2πk/δ`,
//! `∂̄(g_k e^{ia_kθ}) = (i/2)(g_k′ + a_k g_k) e^{ia_kθ}`, so each mode is a
//! linear first-order ODE. The particular solution is corrected by the
//! weighted-orthogonal projection onto the holomorphic modes `|k| ≤ k_max`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CollarError, Result};
use crate::geometry::{rho_of_y, y_of_rho, Collar, CollarPoint};
use crate::grid::{derivative, interpolate, ThetaGrid, YGrid};
use crate::logspace::Amplitude;
use crate::sections::ModeSection;
use crate::weights::{PreparedWeight, WeightSpec};

/// Mode index → samples on a [`YGrid`].
pub type ModeSamples = BTreeMap<i32, Vec<Complex64>>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn check_samples(power: i32, grid: &YGrid, modes: &ModeSamples) -> Result<()> {
    if power < 0 {
        return Err(CollarError::domain(format!("power must be ≥ 0, got {power}")));
    }
    for (k, v) in modes {
        grid.check_samples(v.len())?;
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CollarError::domain(format!("mode {k} has non-finite samples")));
        }
    }
    Ok(())
}

fn sup_abs(modes: &ModeSamples) -> f64 {
    modes.values().flat_map(|v| v.iter().map(|z| z.norm())).fold(0.0, f64::max)
}

/// Sampled `(0,1)`-form data `Σ_k v_k(y) e^{2πikθ/δ} dz̄ ⊗ (dz)^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarRhs {
    pub power: i32,
    pub grid: YGrid,
    pub modes: ModeSamples,
}

impl DbarRhs {
    pub fn new(power: i32, grid: YGrid, modes: ModeSamples) -> Result<Self> {
        check_samples(power, &grid, &modes)?;
        Ok(DbarRhs { power, grid, modes })
    }

    pub fn zero(power: i32, grid: YGrid) -> Self {
        DbarRhs {
            power,
            grid,
            modes: ModeSamples::new(),
        }
    }

    /// Modes with at least one nonzero sample.
    pub fn support(&self) -> Vec<i32> {
        self.modes
            .iter()
            .filter(|(_, v)| v.iter().any(|z| *z != ZERO))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn scale(&self, a: Complex64) -> DbarRhs {
        DbarRhs {
            power: self.power,
            grid: self.grid,
            modes: self.modes.iter().map(|(k, v)| (*k, v.iter().map(|z| z * a).collect())).collect(),
        }
    }

    pub fn add(&self, other: &DbarRhs) -> Result<DbarRhs> {
        if self.power != other.power {
            return Err(CollarError::PowerMismatch(format!("{} vs {}", self.power, other.power)));
        }
        self.grid.check_same(&other.grid)?;
        Ok(DbarRhs {
            power: self.power,
            grid: self.grid,
            modes: add_modes(&self.modes, &other.modes, Complex64::new(1.0, 0.0)),
        })
    }

    /// Largest sample modulus over all modes.
    pub fn sup_norm(&self) -> f64 {
        sup_abs(&self.modes)
    }
}

/// `a + s·b` modewise.
pub fn add_modes(a: &ModeSamples, b: &ModeSamples, s: Complex64) -> ModeSamples {
    let mut out = a.clone();
    for (k, v) in b {
        let slot = out.entry(*k).or_insert_with(|| vec![ZERO; v.len()]);
        for (x, y) in slot.iter_mut().zip(v) {
            *x += s * y;
        }
    }
    out
}

/// Value at `(y, θ)` of the function with the given mode profiles.
pub fn eval_modes(modes: &ModeSamples, grid: &YGrid, rate: f64, y: f64, theta: f64) -> Complex64 {
    modes
        .iter()
        .map(|(k, v)| interpolate(v, grid, y) * Complex64::from_polar(1.0, rate * *k as f64 * theta))
        .sum()
}

/// Discrete `∂̄` of sampled sections: `v_k = (i/2)(g_k′ + a_k g_k)`.
pub fn apply_dbar(samples: &ModeSamples, grid: &YGrid, collar: &Collar, m: i32) -> Result<DbarRhs> {
    check_samples(m, grid, samples)?;
    let half_i = Complex64::new(0.0, 0.5);
    let modes = samples
        .iter()
        .map(|(k, g)| {
            let a = collar.rate() * *k as f64;
            let d = derivative(g, grid);
            let v = d.iter().zip(g).map(|(dg, g)| half_i * (dg + a * g)).collect();
            (*k, v)
        })
        .collect();
    Ok(DbarRhs {
        power: m,
        grid: *grid,
        modes,
    })
}

/// `I_p(λ) = ∫₀¹ e^{−λ(1−τ)} τ^p dτ` for `p = 0..3`, `λ ≥ 0`.
fn exp_moments(lambda: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    if lambda <= 1.0 {
        for (p, slot) in out.iter_mut().enumerate() {
            let mut term = 1.0 / (p as f64 + 1.0);
            let mut sum = term;
            for n in 0..40 {
                term *= -lambda / (p as f64 + n as f64 + 2.0);
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *slot = sum;
        }
    } else {
        out[0] = -(-lambda).exp_m1() / lambda;
        for p in 1..4 {
            out[p] = (1.0 - p as f64 * out[p - 1]) / lambda;
        }
    }
    out
}

/// Monomial coefficients of the four Lagrange polynomials on the nodes.
fn lagrange_coeffs(nodes: [f64; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        let mut deg = 0;
        for (k, &xk) in nodes.iter().enumerate() {
            if k == i {
                continue;
            }
            for d in (0..=deg).rev() {
                poly[d + 1] += poly[d];
                poly[d] *= -xk;
            }
            deg += 1;
            denom *= nodes[i] - xk;
        }
        for d in 0..4 {
            out[i][d] = poly[d] / denom;
        }
    }
    out
}

/// Solves `g′ + a g = s`, `a ≥ 0`, on increasing nodes `ys` from
/// `g(ys[0]) = 0`, with exact exponential weights against the cubic
/// interpolant of `s`.
fn march(s: &[Complex64], ys: &[f64], a: f64) -> Vec<Complex64> {
    let n = s.len();
    let mut g = vec![ZERO; n];
    let mut cached: Option<(f64, [f64; 4])> = None;
    for j in 0..n - 1 {
        let base = if j == 0 {
            0
        } else if j + 2 >= n {
            n - 4
        } else {
            j - 1
        };
        let h = ys[j + 1] - ys[j];
        let offsets: [f64; 4] = std::array::from_fn(|i| (ys[base + i] - ys[j]) / h);
        let moments = match cached {
            Some((hc, mom)) if hc == h => mom,
            _ => {
                let mom = exp_moments(a * h);
                cached = Some((h, mom));
                mom
            }
        };
        let c = lagrange_coeffs(offsets);
        let mut acc = (-a * h).exp() * g[j];
        for i in 0..4 {
            let w = h * (0..4).map(|p| c[i][p] * moments[p]).sum::<f64>();
            acc += w * s[base + i];
        }
        g[j + 1] = acc;
    }
    g
}

/// A particular solution of `g′ + a g = −2i v`, integrated in the direction
/// in which `e^{−a y}` decays.
fn particular(v: &[Complex64], ys: &[f64], a: f64) -> Vec<Complex64> {
    let m2i = Complex64::new(0.0, -2.0);
    if a >= 0.0 {
        let s: Vec<_> = v.iter().map(|z| m2i * z).collect();
        march(&s, ys, a)
    } else {
        let s: Vec<_> = v.iter().rev().map(|z| -m2i * z).collect();
        let flipped: Vec<f64> = ys.iter().rev().map(|y| -y).collect();
        let mut g = march(&s, &flipped, -a);
        g.reverse();
        g
    }
}

/// Controls for [`solve_dbar`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbarOptions {
    /// Lower bound on the θ samples used to integrate the weight.
    pub min_theta_samples: usize,
    /// Largest accepted condition number of the scaled Gram matrix.
    pub max_condition: f64,
}

impl Default for DbarOptions {
    fn default() -> Self {
        DbarOptions {
            min_theta_samples: 64,
            max_condition: 1e12,
        }
    }
}

/// Sampled weighted minimal solution of `∂̄u = v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarSolution {
    pub power: i32,
    pub grid: YGrid,
    pub modes: ModeSamples,
    /// `∫ |u|² cos^{2m−2}y e^{−φ} dθ dy`.
    pub weighted_sq_norm: f64,
    /// `∫ |v|² cos^{2m}y e^{−φ} dθ dy`.
    pub rhs_weighted_sq_norm: f64,
    /// Largest normalised weighted inner product with a retained kernel element.
    pub kernel_residual: f64,
    /// Condition number of the Jacobi-scaled Gram matrix.
    pub gram_condition: f64,
    /// Point where `u` was forced to vanish because `e^{−φ}` is not integrable there.
    pub vanishes_at: Option<CollarPoint>,
}

impl DbarSolution {
    pub fn sup_norm(&self) -> f64 {
        sup_abs(&self.modes)
    }
}

/// Discrete weighted inner product on mode profiles.
struct Form {
    delta: f64,
    theta: ThetaGrid,
    /// `D_n(y_j)` rows, absent for the zero weight.
    moments: Option<Vec<Vec<Complex64>>>,
    /// `e^{−φ}` was divided by `e^{log_scale}` before sampling.
    log_scale: f64,
}

impl Form {
    fn build(weight: &PreparedWeight, collar: &Collar, grid: &YGrid, k_span: usize, opts: &DbarOptions) -> Result<Form> {
        let theta = ThetaGrid::for_modes(collar.delta(), k_span, opts.min_theta_samples)?;
        if let PreparedWeight::Zero = weight {
            return Ok(Form {
                delta: collar.delta(),
                theta,
                moments: None,
                log_scale: 0.0,
            });
        }
        let r = collar.half_width();
        let phis: Vec<Vec<f64>> = grid
            .ys()
            .par_iter()
            .map(|&y| {
                let rho = rho_of_y(y).clamp(-r, r);
                (0..theta.len()).map(|i| weight.eval(rho, theta.theta(i))).collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let floor = phis.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        let moments = phis
            .par_iter()
            .map(|row| {
                let w: Vec<f64> = row.iter().map(|phi| (floor - phi).exp()).collect();
                theta.weight_moments(&w)
            })
            .collect();
        Ok(Form {
            delta: collar.delta(),
            theta,
            moments: Some(moments),
            log_scale: -floor,
        })
    }

    fn moment(&self, j: usize, n: i32) -> Complex64 {
        match &self.moments {
            None => {
                if n == 0 {
                    Complex64::new(self.delta, 0.0)
                } else {
                    ZERO
                }
            }
            Some(rows) => self.theta.moment(&rows[j], n),
        }
    }

    /// `Σ_j w_j Σ_{k,l} f_k ḡ_l D_{k−l}(y_j)`, still divided by `e^{log_scale}`.
    fn inner(&self, f: &ModeSamples, g: &ModeSamples, w: &[f64]) -> Complex64 {
        let mut acc = ZERO;
        for (k, fk) in f {
            for (l, gl) in g {
                if self.moments.is_none() && k != l {
                    continue;
                }
                let n = k - l;
                let mut s = ZERO;
                for j in 0..w.len() {
                    if fk[j] == ZERO || gl[j] == ZERO {
                        continue;
                    }
                    s += w[j] * fk[j] * gl[j].conj() * self.moment(j, n);
                }
                acc += s;
            }
        }
        acc
    }
}

fn cos_weights(grid: &YGrid, exponent: i32) -> Vec<f64> {
    grid.trapezoid_weights()
        .iter()
        .zip(grid.ys())
        .map(|(t, y)| t * y.cos().powi(exponent))
        .collect()
}

/// Holomorphic mode `w^k` sampled as `exp(−a_k y − σ_k)`, scaled to peak 1.
fn kernel_mode(grid: &YGrid, rate: f64, k: i32) -> Vec<Complex64> {
    let a = rate * k as f64;
    let sigma = (-a * grid.y_lo).max(-a * grid.y_hi);
    grid.ys().iter().map(|y| Complex64::new((-a * y - sigma).exp(), 0.0)).collect()
}

/// `∫ |g|² cos^{2m−2}y dθ dy` for sampled sections, unweighted.
pub fn sampled_sq_norm(modes: &ModeSamples, grid: &YGrid, delta: f64, m: i32) -> f64 {
    let w = cos_weights(grid, 2 * m - 2);
    delta
        * modes
            .values()
            .map(|v| v.iter().zip(&w).map(|(z, w)| w * z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
}

/// Weighted minimal solution of `∂̄u = v`.
///
/// When `e^{−φ}` has a non-integrable pole inside the grid, only solutions
/// vanishing there have finite weighted norm; the solution is then made to
/// vanish at the pole and projected against the holomorphic modes that also
/// vanish there.
pub fn solve_dbar(rhs: &DbarRhs, collar: &Collar, weight: &WeightSpec, opts: &DbarOptions) -> Result<DbarSolution> {
    check_samples(rhs.power, &rhs.grid, &rhs.modes)?;
    let grid = rhs.grid;
    let m = rhs.power;
    let rate = collar.rate();
    let prepared = weight.prepare(collar)?;
    let k_kernel = collar.k_max() as i32;
    let k_data = rhs.modes.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
    let form = Form::build(&prepared, collar, &grid, collar.k_max() + k_data.max(collar.k_max()), opts)?;
    let section_w = cos_weights(&grid, 2 * m - 2);
    let form_w = cos_weights(&grid, 2 * m);
    let scale = form.log_scale.exp();

    let ys = grid.ys();
    let particular_modes: ModeSamples = rhs
        .modes
        .par_iter()
        .map(|(k, v)| (*k, particular(v, &ys, rate * *k as f64)))
        .collect();

    let kernel: Vec<(i32, ModeSamples)> = (-k_kernel..=k_kernel)
        .map(|k| (k, ModeSamples::from([(k, kernel_mode(&grid, rate, k))])))
        .collect();

    let pole = prepared
        .pole()
        .filter(|p| {
            let y = y_of_rho(p.rho);
            y >= grid.y_lo && y <= grid.y_hi
        });

    let mut u0 = particular_modes;
    let basis: Vec<ModeSamples> = match pole {
        None => kernel.into_iter().map(|(_, b)| b).collect(),
        Some(p) => {
            let y0 = y_of_rho(p.rho);
            let values: Vec<Complex64> = kernel.iter().map(|(_, b)| eval_modes(b, &grid, rate, y0, p.theta)).collect();
            // the pivot is the mode largest at the pole relative to its own
            // norm, so that subtracting it never dominates another mode
            let score: Vec<f64> = kernel
                .iter()
                .zip(&values)
                .map(|((_, b), v)| v.norm_sqr() / sampled_sq_norm(b, &grid, collar.delta(), m))
                .collect();
            let pivot = (0..values.len()).max_by(|&i, &j| score[i].total_cmp(&score[j])).unwrap_or(0);
            let pv = values[pivot];
            let pivot_mode = kernel[pivot].1.clone();
            let at_pole = eval_modes(&u0, &grid, rate, y0, p.theta);
            u0 = add_modes(&u0, &pivot_mode, -at_pole / pv);
            kernel
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != pivot)
                .map(|(i, (_, b))| add_modes(b, &pivot_mode, -values[i] / pv))
                .collect()
        }
    };

    let nb = basis.len();
    let mut u = u0;
    let mut condition = 1.0;
    if nb > 0 && !u.is_empty() {
        let gram_rows: Vec<Vec<Complex64>> = (0..nb)
            .into_par_iter()
            .map(|s| (0..nb).map(|t| form.inner(&basis[t], &basis[s], &section_w)).collect())
            .collect();
        let gram = DMatrix::from_fn(nb, nb, |s, t| gram_rows[s][t]);
        let diag: Vec<f64> = (0..nb).map(|s| gram[(s, s)].re).collect();
        if diag.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(CollarError::Conditioning { condition: f64::INFINITY });
        }
        let scaled = DMatrix::from_fn(nb, nb, |s, t| gram[(s, t)] / (diag[s] * diag[t]).sqrt());
        let eig = scaled.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        if condition > opts.max_condition {
            return Err(CollarError::Conditioning { condition });
        }
        let inv_sqrt: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
        // two rounds: the second removes what cancellation left of the first
        for _ in 0..2 {
            let r: Vec<Complex64> = (0..nb)
                .into_par_iter()
                .map(|s| form.inner(&u, &basis[s], &section_w))
                .collect();
            let rv = DVector::from_fn(nb, |s, _| r[s] * inv_sqrt[s]);
            let vh = eig.eigenvectors.adjoint();
            let mut y = &vh * rv;
            for (i, l) in eig.eigenvalues.iter().enumerate() {
                y[i] /= *l;
            }
            let c = &eig.eigenvectors * y;
            for s in 0..nb {
                u = add_modes(&u, &basis[s], -c[s] * inv_sqrt[s]);
            }
        }
    }

    let u_norm = form.inner(&u, &u, &section_w).re.max(0.0);
    let mut residual: f64 = 0.0;
    if u_norm > 0.0 {
        for b in &basis {
            let bn = form.inner(b, b, &section_w).re;
            let ip = form.inner(&u, b, &section_w);
            residual = residual.max(ip.norm() / (u_norm * bn).sqrt());
        }
    }
    let rhs_norm = form.inner(&rhs.modes, &rhs.modes, &form_w).re.max(0.0);
    Ok(DbarSolution {
        power: m,
        grid,
        modes: u,
        weighted_sq_norm: u_norm * scale,
        rhs_weighted_sq_norm: rhs_norm * scale,
        kernel_residual: residual,
        gram_condition: condition,
        vanishes_at: pole,
    })
}

/// `(∫‖u‖²e^{−φ}) / (∫‖v‖²e^{−φ})`, zero for zero data.
pub fn hormander_ratio(sol: &DbarSolution) -> f64 {
    if sol.rhs_weighted_sq_norm > 0.0 {
        sol.weighted_sq_norm / sol.rhs_weighted_sq_norm
    } else {
        0.0
    }
}

/// A ratio compared with `tolerance_factor/(m − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HormanderCheck {
    pub ratio: f64,
    /// `1/(m − 1)`.
    pub model_constant: f64,
    pub bound: f64,
    pub within: bool,
}

pub fn hormander_check(sol: &DbarSolution, tolerance_factor: f64) -> HormanderCheck {
    let ratio = hormander_ratio(sol);
    let model_constant = if sol.power > 1 {
        1.0 / (sol.power - 1) as f64
    } else {
        f64::INFINITY
    };
    let bound = tolerance_factor * model_constant;
    HormanderCheck {
        ratio,
        model_constant,
        bound,
        within: ratio <= bound,
    }
}

/// `‖apply_dbar(u) − v‖_∞ / ‖v‖_∞`.
pub fn dbar_residual(sol: &DbarSolution, rhs: &DbarRhs, collar: &Collar) -> Result<f64> {
    sol.grid.check_same(&rhs.grid)?;
    let back = apply_dbar(&sol.modes, &sol.grid, collar, sol.power)?;
    let diff = add_modes(&back.modes, &rhs.modes, Complex64::new(-1.0, 0.0));
    let scale = rhs.sup_norm();
    let err = sup_abs(&diff);
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Least-squares `c_k` with `S_k(y) ≈ c_k e^{−a_k y}` per mode, and the
/// relative L² misfit. Modes beyond `k_keep` are dropped and count as misfit.
pub fn fit_holomorphic(
    s: &ModeSamples,
    grid: &YGrid,
    rate: f64,
    m: i32,
    k_keep: Option<usize>,
) -> Result<(ModeSection, f64)> {
    let w: Vec<f64> = grid
        .trapezoid_weights()
        .iter()
        .zip(grid.ys())
        .map(|(t, y)| t * y.cos().powi(2 * m - 2))
        .collect();
    let mut section = ModeSection::new(m)?;
    let (mut miss, mut total) = (0.0, 0.0);
    for (k, v) in s {
        let keep = k_keep.is_none_or(|kk| k.unsigned_abs() as usize <= kk);
        let a = rate * *k as f64;
        let sigma = (-a * grid.y_lo).max(-a * grid.y_hi);
        let e: Vec<f64> = grid.ys().iter().map(|y| (-a * y - sigma).exp()).collect();
        let num: Complex64 = (0..v.len()).map(|j| w[j] * e[j] * v[j]).sum();
        let den: f64 = (0..v.len()).map(|j| w[j] * e[j] * e[j]).sum();
        let c = if den > 0.0 && keep { num / den } else { ZERO };
        for j in 0..v.len() {
            miss += w[j] * (v[j] - c * e[j]).norm_sqr();
            total += w[j] * v[j].norm_sqr();
        }
        if c.norm() > 0.0 {
            section.set(*k, Amplitude::new(c, -sigma))?;
        }
    }
    Ok((section, if total > 0.0 { (miss / total).sqrt() } else { 0.0 }))
}
