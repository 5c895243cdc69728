//! Executes a [`RunConfig`] and collects its report.

use collar_core::bergman::{counterexample_report, density_report, SCAN_ROWS};
use collar_core::corona::{build_family, collar_generator, corona_decompose, CoronaSettings};
use collar_core::dbar::{dbar_residual, hormander_check, solve_dbar, DbarOptions, ModeSamples};
use collar_core::geometry::{make_collar, y_of_rho};
use collar_core::peak::{peak_section, PeakSettings};
use collar_core::sections::decompose_boundary;
use collar_core::weights::{weight_certificate, CertificateCeilings, CertificateGrid};
use collar_core::{Amplitude, CoeffMap, DbarRhs, ModeSection, QuadratureSpec, WeightSpec, YGrid};
use log::info;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::args::{Command, RunConfig, WeightKind};
use crate::emit::{float, Report};
use crate::error::CliError;

/// Header shared by `density-scan` and `counterexample`.
pub const SCAN_HEADER: [&str; 9] = [
    "delta",
    "m",
    "k_max",
    "rho0",
    "density_x0",
    "ratio2",
    "predicted_ratio2",
    "ratio1",
    "ratio3",
];

/// Profile constant a peak section must meet.
const PROFILE_D: f64 = 100.0;

type Out = Result<Report, CliError>;

pub fn run(cfg: &RunConfig) -> Out {
    info!("running {:?} for deltas {:?}", cfg.command, cfg.deltas);
    match cfg.command {
        Command::DensityScan => scan(cfg, true),
        Command::Counterexample => scan(cfg, false),
        Command::Decompose => decompose(cfg),
        Command::WeightsCert => weights_cert(cfg),
        Command::DbarCheck => dbar_check(cfg),
        Command::PeakSection => peak(cfg),
        Command::Corona => corona(cfg),
    }
}

fn weight_spec(kind: WeightKind, rho0: f64) -> WeightSpec {
    match kind {
        WeightKind::Zero => WeightSpec::Zero,
        WeightKind::CollarPeak => WeightSpec::collar_peak(rho0),
        WeightKind::ThickLog => WeightSpec::thick_log(rho0),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::numeric(format!("json: {e}")))
}

fn random_coeff(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn scan(cfg: &RunConfig, with_profile: bool) -> Out {
    let q = QuadratureSpec::default();
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    let mut pass = true;
    for &delta in &cfg.deltas {
        let collar = make_collar(delta, cfg.k_max)?;
        let r = counterexample_report(&collar, cfg.m, &q)?;
        rows.push(vec![
            float(r.delta),
            r.m.to_string(),
            r.k_max.to_string(),
            float(r.rho0),
            float(r.density_x0),
            float(r.ratio2),
            float(r.predicted_ratio2),
            float(r.ratio1),
            float(r.ratio3),
        ]);
        let mut doc = to_json(&r)?;
        if with_profile {
            let profile = density_report(&collar, cfg.m, SCAN_ROWS, &q)?;
            pass &= profile.rows.iter().all(|row| row.density > 0.0);
            doc["profile"] = to_json(&profile.rows)?;
        } else {
            pass &= r.within_envelopes;
        }
        pass &= r.density_x0 > 0.0 && r.density_x0.is_finite();
        docs.push(doc);
    }
    Ok(Report {
        header: SCAN_HEADER.to_vec(),
        rows,
        json: Value::Array(docs),
        pass,
    })
}

fn decompose(cfg: &RunConfig) -> Out {
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    let mut pass = true;
    for &delta in &cfg.deltas {
        let collar = make_collar(delta, cfg.k_max)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let k = cfg.k_max as i32;
        let left: CoeffMap = (1..=k).map(|j| (j, random_coeff(&mut rng))).collect();
        let right: CoeffMap = (-k..=0).map(|j| (j, random_coeff(&mut rng))).collect();
        let pieces = decompose_boundary(&collar, &left, &right, cfg.band, cfg.m)?;
        let sum = pieces.0.add(&pieces.1)?.add(&pieces.2)?;

        let r = collar.half_width();
        let edge = r - cfg.band;
        let (yl, yr) = (y_of_rho(-edge), y_of_rho(edge));
        let rate = collar.rate();
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for _ in 0..200 {
            let rho = rng.gen_range(-edge..=edge);
            let theta = rng.gen_range(0.0..delta);
            let y = y_of_rho(rho);
            let mut direct = Complex64::new(0.0, 0.0);
            for (&j, &a) in left.iter().chain(right.iter()) {
                let y_from = if j > 0 { yl } else { yr };
                direct += a * Complex64::from_polar((-rate * j as f64 * (y - y_from)).exp(), rate * j as f64 * theta);
            }
            let got = sum.eval_amplitude(&collar, rho, theta).value();
            scale = scale.max(direct.norm());
            worst = worst.max((got - direct).norm());
        }
        let rel = if scale > 0.0 { worst / scale } else { 0.0 };
        pass &= rel <= 1e-9;

        let mut coeffs = Vec::new();
        for (name, piece) in [("g1", &pieces.0), ("g2", &pieces.1), ("g3", &pieces.2)] {
            for (j, a) in piece.coeffs() {
                rows.push(vec![
                    float(delta),
                    name.to_string(),
                    j.to_string(),
                    float(a.mantissa.re),
                    float(a.mantissa.im),
                    float(a.exponent),
                ]);
                coeffs.push(json!({"piece": name, "k": j, "re": a.mantissa.re, "im": a.mantissa.im, "log_scale": a.exponent}));
            }
        }
        docs.push(json!({
            "delta": delta,
            "m": cfg.m,
            "k_max": cfg.k_max,
            "band": cfg.band,
            "seed": cfg.seed,
            "max_rel_error": rel,
            "pass": rel <= 1e-9,
            "coefficients": coeffs,
        }));
    }
    Ok(Report {
        header: vec!["delta", "piece", "k", "re", "im", "log_scale"],
        rows,
        json: Value::Array(docs),
        pass,
    })
}

fn weights_cert(cfg: &RunConfig) -> Out {
    let q = QuadratureSpec::default();
    let rho0 = cfg.rho0.unwrap_or(0.0);
    let spec = weight_spec(cfg.weight, rho0);
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    let mut pass = true;
    for &delta in &cfg.deltas {
        let collar = make_collar(delta, cfg.k_max)?;
        let cert = weight_certificate(&collar, &spec, &CertificateGrid::default(), &CertificateCeilings::default(), &q)?;
        pass &= cert.pass;
        rows.push(vec![
            float(delta),
            to_json(&cfg.weight)?.as_str().unwrap_or_default().to_string(),
            float(rho0),
            float(cert.sup_phi),
            float(cert.lower_gap),
            float(cert.curvature_floor),
            cert.diverges_at_x0.to_string(),
            cert.pass.to_string(),
        ]);
        let mut doc = to_json(&cert)?;
        doc["delta"] = json!(delta);
        doc["weight"] = to_json(&spec)?;
        docs.push(doc);
    }
    Ok(Report {
        header: vec!["delta", "weight", "rho0", "sup_phi", "lower_gap", "curvature_floor", "diverges_at_x0", "pass"],
        rows,
        json: Value::Array(docs),
        pass,
    })
}

/// Gaussian bumps in `y` on a few modes within `k_max`.
fn smooth_rhs(grid: YGrid, power: i32, k_max: usize) -> Result<DbarRhs, CliError> {
    let bump = |y: f64, c0: f64| (-((y - c0) / 0.3).powi(2)).exp();
    let mut modes = ModeSamples::new();
    for (k, c0, amp) in [(0i32, 0.0, Complex64::new(1.0, 0.0)), (1, -0.3, Complex64::new(0.5, 0.2)), (-2, 0.4, Complex64::new(-0.3, 0.6))] {
        if k.unsigned_abs() as usize <= k_max {
            modes.insert(k, grid.ys().iter().map(|&y| amp * bump(y, c0)).collect());
        }
    }
    Ok(DbarRhs::new(power, grid, modes)?)
}

fn dbar_check(cfg: &RunConfig) -> Out {
    let spec = weight_spec(cfg.weight, cfg.rho0.unwrap_or(0.0));
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    let mut pass = true;
    for &delta in &cfg.deltas {
        let collar = make_collar(delta, cfg.k_max)?;
        let mut runs = Vec::new();
        let mut prev: Option<f64> = None;
        let mut ok = true;
        for level in 0..3 {
            let n = cfg.n_y << level;
            let rhs = smooth_rhs(YGrid::covering(&collar, n)?, cfg.m, cfg.k_max)?;
            let sol = solve_dbar(&rhs, &collar, &spec, &DbarOptions::default())?;
            let residual = dbar_residual(&sol, &rhs, &collar)?;
            let ratio = prev.map_or(f64::NAN, |p| p / residual);
            if prev.is_some() {
                ok &= (3.5..=4.5).contains(&ratio);
            }
            let h = hormander_check(&sol, 2.0);
            ok &= sol.kernel_residual <= 1e-8 && h.within;
            prev = Some(residual);
            rows.push(vec![
                float(delta),
                n.to_string(),
                float(residual),
                float(ratio),
                float(sol.kernel_residual),
                float(h.ratio),
                float(h.bound),
                h.within.to_string(),
            ]);
            runs.push(json!({
                "n_y": n,
                "residual": residual,
                "ratio": if ratio.is_finite() { json!(ratio) } else { Value::Null },
                "kernel_residual": sol.kernel_residual,
                "gram_condition": sol.gram_condition,
                "hormander": to_json(&h)?,
            }));
        }
        pass &= ok;
        docs.push(json!({"delta": delta, "m": cfg.m, "weight": to_json(&spec)?, "runs": runs, "pass": ok}));
    }
    Ok(Report {
        header: vec![
            "delta",
            "n_y",
            "residual",
            "ratio",
            "kernel_residual",
            "hormander_ratio",
            "hormander_bound",
            "hormander_within",
        ],
        rows,
        json: Value::Array(docs),
        pass,
    })
}

fn peak(cfg: &RunConfig) -> Out {
    let settings = PeakSettings {
        n_y: cfg.n_y,
        n_theta: cfg.n_theta,
        ..PeakSettings::default()
    };
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    let mut pass = true;
    for &delta in &cfg.deltas {
        let collar = make_collar(delta, cfg.k_max)?;
        let rho0 = match cfg.rho0 {
            Some(r) => r,
            None => collar.rho0()?,
        };
        let (_, rep, _) = peak_section(&collar, cfg.m, rho0, &settings)?;
        let ok = rep.u_negligible && rep.reproduces_frame && rep.ratio > 0.0 && rep.meets_profile(PROFILE_D);
        pass &= ok;
        rows.push(vec![
            float(delta),
            cfg.m.to_string(),
            float(rho0),
            float(rep.delta_x0),
            float(rep.s_at_x0),
            float(rep.s_l2),
            float(rep.ratio),
            float(rep.frame_at_x0),
            float(rep.u_at_x0),
            float(rep.fitted_d),
            float(rep.hormander.ratio),
            float(rep.hormander.bound),
            rep.hormander.within.to_string(),
            float(rep.kernel_residual),
            float(rep.holomorphic_defect),
            rep.reproduces_frame.to_string(),
            ok.to_string(),
        ]);
        docs.push(to_json(&rep)?);
    }
    Ok(Report {
        header: vec![
            "delta",
            "m",
            "rho0",
            "delta_x0",
            "s_at_x0",
            "s_l2",
            "ratio",
            "frame_at_x0",
            "u_at_x0",
            "fitted_d",
            "hormander_ratio",
            "hormander_bound",
            "hormander_within",
            "kernel_residual",
            "holomorphic_defect",
            "reproduces_frame",
            "pass",
        ],
        rows,
        json: Value::Array(docs),
        pass,
    })
}

fn corona(cfg: &RunConfig) -> Out {
    let settings = CoronaSettings {
        n_y: cfg.n_y,
        n_theta: cfg.n_theta,
        denominator_floor: cfg.floor,
        tolerance: cfg.tolerance,
        ..CoronaSettings::default()
    };
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    let mut pass = true;
    for &delta in &cfg.deltas {
        let collar = make_collar(delta, cfg.k_max)?;
        let generator = collar_generator(&collar, cfg.m0, &settings)?;
        let family = build_family(&collar, &generator, &cfg.extra_modes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let top = (cfg.k_max / 4).max(1) as i32;
        let mut s = ModeSection::new(cfg.m)?;
        for k in -top..=top {
            let a = Amplitude::new(random_coeff(&mut rng), -collar.rate() * k.abs() as f64 * collar.y_max());
            s.set(k, a)?;
        }
        let (_, rep) = corona_decompose(&s, &family, &collar, &settings)?;
        pass &= rep.pass;
        for (i, n) in rep.norms.iter().enumerate() {
            rows.push(vec![
                float(delta),
                i.to_string(),
                family.modes[i].to_string(),
                float(n.sup),
                float(n.l2),
                float(rep.dbar_residuals[i]),
                float(rep.residual_sup),
                float(rep.residual_l2),
                float(rep.min_denominator),
                rep.pass.to_string(),
            ]);
        }
        docs.push(json!({
            "delta": delta,
            "seed": cfg.seed,
            "generator": to_json(&generator)?,
            "family": {
                "modes": family.modes,
                "least_eigenvalue": family.least_eigenvalue,
                "scaled_condition": family.scaled_condition,
                "max_coherence": family.max_coherence,
                "orthonormal_defect": family.orthonormal_defect,
                "core_sum": family.core_sum,
            },
            "report": to_json(&rep)?,
        }));
    }
    Ok(Report {
        header: vec![
            "delta",
            "generator",
            "mode",
            "term_sup",
            "term_l2",
            "dbar_residual",
            "residual_sup",
            "residual_l2",
            "min_denominator",
            "pass",
        ],
        rows,
        json: Value::Array(docs),
        pass,
    })
}
