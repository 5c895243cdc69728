use collar_core::dbar::{dbar_residual, solve_dbar, DbarOptions, ModeSamples};
use collar_core::geometry::{y_of_rho, Collar};
use collar_core::{DbarRhs, WeightSpec, YGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn bump_rhs(collar: &Collar, grid: YGrid, amps: &[(f64, f64)]) -> DbarRhs {
    let r = collar.half_width();
    let (lo, hi) = (y_of_rho(-(r - 2.0).max(0.5)), y_of_rho((r - 2.0).max(0.5)));
    let mut modes = ModeSamples::new();
    for (i, &(a, b)) in amps.iter().enumerate() {
        let k = i as i32 - (amps.len() / 2) as i32;
        let z = Complex64::new(a, b);
        let v = grid
            .ys()
            .iter()
            .map(|&y| if y > lo && y < hi { z * ((y - lo) * (hi - y)).powi(3) * (1.0 + k as f64 * y) } else { Complex64::new(0.0, 0.0) })
            .collect();
        modes.insert(k, v);
    }
    DbarRhs::new(2, grid, modes).unwrap()
}

fn amps() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5)
}

fn sup_diff(a: &ModeSamples, b: &ModeSamples) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| {
            let (x, y) = (a.get(k), b.get(k));
            let n = x.or(y).map_or(0, |v| v.len());
            (0..n)
                .map(|j| {
                    let p = x.map_or(Complex64::new(0.0, 0.0), |v| v[j]);
                    let q = y.map_or(Complex64::new(0.0, 0.0), |v| v[j]);
                    (p - q).norm()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_is_linear_in_the_data(
        v in amps(), w in amps(), re in -2.0f64..2.0, im in -2.0f64..2.0, thick in any::<bool>(),
    ) {
        let c = Collar::new(0.5, 2).unwrap();
        let grid = YGrid::covering(&c, 256).unwrap();
        let weight = if thick { WeightSpec::thick_log(0.0) } else { WeightSpec::Zero };
        let opts = DbarOptions::default();
        let a = Complex64::new(re, im);
        let (rv, rw) = (bump_rhs(&c, grid, &v), bump_rhs(&c, grid, &w));
        let combined = solve_dbar(&rv.scale(a).add(&rw).unwrap(), &c, &weight, &opts).unwrap();
        let sv = solve_dbar(&rv, &c, &weight, &opts).unwrap();
        let sw = solve_dbar(&rw, &c, &weight, &opts).unwrap();
        let mut expect = ModeSamples::new();
        for (k, x) in &sv.modes {
            expect.insert(*k, x.iter().map(|z| z * a).collect());
        }
        for (k, y) in &sw.modes {
            let e = expect.entry(*k).or_insert_with(|| vec![Complex64::new(0.0, 0.0); y.len()]);
            for (p, q) in e.iter_mut().zip(y) {
                *p += q;
            }
        }
        let scale = combined.sup_norm().max(1e-300);
        prop_assert!(sup_diff(&combined.modes, &expect) <= 1e-10 * scale);
    }

    #[test]
    fn solution_reproduces_the_data(v in amps()) {
        let c = Collar::new(0.5, 2).unwrap();
        let grid = YGrid::covering(&c, 512).unwrap();
        let rhs = bump_rhs(&c, grid, &v);
        let sol = solve_dbar(&rhs, &c, &WeightSpec::Zero, &DbarOptions::default()).unwrap();
        prop_assert!(dbar_residual(&sol, &rhs, &c).unwrap() <= 1e-3);
        prop_assert!(sol.kernel_residual <= 1e-8);
        prop_assert!(sol.weighted_sq_norm >= 0.0 && sol.rhs_weighted_sq_norm >= 0.0);
    }
}
