use collar_core::grid::ThetaGrid;
use collar_core::sections::{decompose_boundary, fourier_boundary, l2_inner, log_l2_sq_norm, propagate_mode};
use collar_core::{Amplitude, CoeffMap, Collar, ModeSection, QuadratureSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn coeffs(k_max: i32) -> impl Strategy<Value = CoeffMap> {
    prop::collection::btree_map(-k_max..=k_max, (-1.0f64..1.0, -1.0f64..1.0), 1..6)
        .prop_map(|m| m.into_iter().map(|(k, (a, b))| (k, Complex64::new(a, b))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn add_and_scale_act_pointwise(
        a in coeffs(4), b in coeffs(4), re in -2.0f64..2.0, im in -2.0f64..2.0,
        s in -0.9f64..0.9, theta in 0.0f64..1.0,
    ) {
        let c = Collar::new(0.2, 8).unwrap();
        let (sa, sb) = (ModeSection::from_coeffs(2, &a).unwrap(), ModeSection::from_coeffs(2, &b).unwrap());
        let z = Complex64::new(re, im);
        let comb = sa.scale(z).add(&sb).unwrap();
        let (rho, th) = (s * c.half_width(), theta * c.delta());
        let lhs = comb.eval_amplitude(&c, rho, th).value();
        let rhs = z * sa.eval_amplitude(&c, rho, th).value() + sb.eval_amplitude(&c, rho, th).value();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn product_convolves_coefficients(a in coeffs(3), b in coeffs(3)) {
        let sa = ModeSection::from_coeffs(1, &a).unwrap();
        let sb = ModeSection::from_coeffs(2, &b).unwrap();
        let p = sa.product(&sb).unwrap();
        prop_assert_eq!(p.power(), 3);
        for k in -6..=6 {
            let mut want = Complex64::new(0.0, 0.0);
            for (&i, &x) in &a {
                if let Some(&y) = b.get(&(k - i)) {
                    want += x * y;
                }
            }
            prop_assert!((p.coeff(k).value() - want).norm() <= 1e-14 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn distinct_modes_are_exactly_orthogonal(j in -6i32..=6, k in -6i32..=6, m in 1i32..5) {
        prop_assume!(j != k);
        let c = Collar::new(0.1, 8).unwrap();
        let r = c.half_width();
        let q = QuadratureSpec::default();
        let a = ModeSection::monomial(m, j).unwrap();
        let b = ModeSection::monomial(m, k).unwrap();
        prop_assert_eq!(l2_inner(&a, &b, &c, -r, r, &q).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn nonzero_sections_have_positive_norm(a in coeffs(4), m in 1i32..5) {
        prop_assume!(a.values().any(|z| z.norm() > 0.0));
        let c = Collar::new(0.1, 8).unwrap();
        let r = c.half_width();
        let s = ModeSection::from_coeffs(m, &a).unwrap();
        let q = QuadratureSpec::default();
        let ln = log_l2_sq_norm(&s, &c, -r, r, &q).unwrap();
        prop_assert!(ln.is_finite());
        if let Ok(v) = l2_inner(&s, &s, &c, -r, r, &q) {
            prop_assert!(v.re > 0.0);
            prop_assert!(v.im.abs() <= 1e-14 * v.re);
            prop_assert!((v.re.ln() - ln).abs() <= 1e-12 * (1.0 + ln.abs()));
        }
    }

    #[test]
    fn fourier_coefficients_satisfy_parseval(a in coeffs(8), n in 17usize..80) {
        let c = Collar::new(0.3, 8).unwrap();
        let samples: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = j as f64 / n as f64;
                a.iter().map(|(&k, &z)| z * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * t)).sum()
            })
            .collect();
        prop_assume!(n > 2 * 8);
        let got = fourier_boundary(&samples, &c).unwrap();
        let energy: f64 = got.values().map(|z| z.norm_sqr()).sum();
        let mean: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        prop_assert!((energy - mean).abs() <= 1e-12 * mean.max(1e-300));
    }

    #[test]
    fn propagation_composes(k in -8i32..=8, a in -1.0f64..1.0, b in -1.0f64..1.0, d in -1.0f64..1.0) {
        let c = Collar::new(0.1, 8).unwrap();
        let r = c.half_width();
        let (a, b, d) = (a * r, b * r, d * r);
        let two = propagate_mode(&c, k, a, b).mul(propagate_mode(&c, k, b, d));
        let one = propagate_mode(&c, k, a, d);
        prop_assert!((two.log_modulus - one.log_modulus).abs() <= 1e-12 * (1.0 + one.log_modulus.abs()));
    }

    #[test]
    fn boundary_pieces_reconstruct_the_section(a in coeffs(6), s in -1.0f64..1.0, theta in 0.0f64..1.0) {
        let c = Collar::new(0.1, 8).unwrap();
        let r = c.half_width();
        let f = ModeSection::from_coeffs(2, &a).unwrap();
        let band = 1.0;
        let (left, right) = (circle_coeffs(&f, &c, -(r - band)), circle_coeffs(&f, &c, r - band));
        let (g1, g2, g3) = decompose_boundary(&c, &left, &right, band, 2).unwrap();
        let g = g1.add(&g2).unwrap().add(&g3).unwrap();
        let (rho, th) = (s * r, theta * c.delta());
        let want = f.eval_amplitude(&c, rho, th);
        let got = g.eval_amplitude(&c, rho, th);
        let scale = want.ln_abs().max(got.ln_abs());
        prop_assume!(scale.is_finite());
        let diff = (want.mantissa * (want.exponent - scale).exp() - got.mantissa * (got.exponent - scale).exp()).norm();
        prop_assert!(diff <= 1e-9, "diff {diff}");
    }

    #[test]
    fn theta_analysis_inverts_synthesis(a in coeffs(5)) {
        let g = ThetaGrid::for_modes(0.25, 5, 16).unwrap();
        let modes: Vec<(i32, Complex64)> = a.into_iter().collect();
        let back = g.analyze(&g.synthesize(&modes).unwrap());
        for (k, z) in back {
            let want = modes.iter().find(|m| m.0 == k).map(|m| m.1).unwrap_or_default();
            prop_assert!((z - want).norm() <= 1e-13);
        }
    }
}

fn circle_coeffs(f: &ModeSection, c: &Collar, rho: f64) -> CoeffMap {
    f.coeffs()
        .map(|(k, a): (i32, Amplitude)| {
            let p = propagate_mode(c, k, 0.0, rho);
            (k, Amplitude::new(a.mantissa, a.exponent + p.log_modulus).value())
        })
        .collect()
}
