use collar_core::bergman::{density, density_report};
use collar_core::{Collar, CollarPoint, QuadratureSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn density_is_positive_and_constant_on_circles(
        delta in 0.01f64..0.5, m in 1i32..6, k_max in 0usize..12, s in -1.0f64..1.0,
    ) {
        let c = Collar::new(delta, k_max).unwrap();
        let q = QuadratureSpec::default();
        let rho = s * c.half_width();
        let a = density(&c, m, &CollarPoint::new(&c, rho, 0.0).unwrap(), &q).unwrap();
        let b = density(&c, m, &CollarPoint::new(&c, rho, delta / 3.0).unwrap(), &q).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn density_grows_with_the_mode_range(delta in 0.01f64..0.5, m in 1i32..6, k_max in 0usize..10, s in -1.0f64..1.0) {
        let q = QuadratureSpec::default();
        let lo = Collar::new(delta, k_max).unwrap();
        let hi = Collar::new(delta, k_max + 1).unwrap();
        let rho = s * lo.half_width();
        let a = density(&lo, m, &CollarPoint::new(&lo, rho, 0.0).unwrap(), &q).unwrap();
        let b = density(&hi, m, &CollarPoint::new(&hi, rho, 0.0).unwrap(), &q).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn density_at_the_reference_point_drops_with_delta(delta in 0.002f64..0.2, m in 2i32..6, k_max in 0usize..8) {
        let q = QuadratureSpec::default();
        let big = density_report(&Collar::new(delta, k_max).unwrap(), m, 3, &q).unwrap();
        let small = density_report(&Collar::new(delta / 2.0, k_max).unwrap(), m, 3, &q).unwrap();
        prop_assert!(small.at_x0 < big.at_x0, "{} vs {}", small.at_x0, big.at_x0);
        prop_assert!(big.rows.iter().all(|r| r.density > 0.0 && r.dominant_mode_share > 0.0 && r.dominant_mode_share <= 1.0));
    }
}
