use dirac_congruence::angular_algebra::{rotation_closed_form, EulerAngles, SpinCoefficients};
use dirac_congruence::cli_harness::RunConfig;
use dirac_congruence::reference_solver::{read_field_bytes, write_field_bytes, Grid3, SpinorField};
use dirac_congruence::spinor_core::{majorana_deviation, majorana_join, majorana_split};
use dirac_congruence::trajectory_engine::{speed_via_bound_formula, velocity};
use dirac_congruence::PhysicalParams;
use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn spinor() -> impl Strategy<Value = SpinCoefficients> {
    prop::array::uniform8(-1.0f64..1.0)
        .prop_map(|v| SpinCoefficients::new(C64::new(v[0], v[1]), C64::new(v[2], v[3]), C64::new(v[4], v[5]), C64::new(v[6], v[7])))
}

fn angles() -> impl Strategy<Value = EulerAngles> {
    (0.05f64..3.09, 0.0f64..6.28, 0.0f64..12.56).prop_map(|(a, b, g)| EulerAngles::raw(a, b, g))
}

proptest! {
    #[test]
    fn majorana_split_and_join_are_inverse(psi in spinor()) {
        let (r, i) = majorana_split(&psi);
        prop_assert!(majorana_deviation(&r) < 1e-14 && majorana_deviation(&i) < 1e-14);
        prop_assert!((majorana_join(&r, &i).unwrap() - psi).norm() < 1e-14);
    }

    #[test]
    fn majorana_speed_is_never_below_c(psi in spinor(), th in angles(), c in 0.5f64..3.0) {
        let p = PhysicalParams::new(1.0, 1.0, c).unwrap();
        let (r, _) = majorana_split(&psi);
        if let (Ok(v), Ok(s)) = (velocity(&r, &th, &p, 1e-6), speed_via_bound_formula(&r, &th, &p, 1e-6)) {
            let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(speed >= c * (1.0 - 1e-9));
            prop_assert!((speed - s).abs() <= 1e-8 * s, "{} {}", speed, s);
        }
    }

    #[test]
    fn rotations_are_proper_orthogonal(th in angles()) {
        let r = rotation_closed_form(&th);
        prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-13);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn field_bytes_roundtrip(n in 2usize..5, l in 0.5f64..30.0, seed in spinor(), t in -5.0f64..5.0) {
        let mut f = SpinorField::from_fn(Grid3::new(n, l), PhysicalParams::default(), |x| seed * C64::from_polar(1.0, x[0] - x[2]));
        f.time = t;
        prop_assert_eq!(read_field_bytes(&write_field_bytes(&f)).unwrap(), f);
    }

    #[test]
    fn configurations_roundtrip_through_toml(per_axis in 2usize..64, nodes in prop::array::uniform3(1usize..12), dt in 1e-4f64..0.1, seed in any::<u64>()) {
        let mut cfg = RunConfig::default();
        cfg.labels.per_axis = per_axis;
        cfg.labels.angle_nodes = nodes;
        cfg.labels.reduce_gamma = nodes[2] % 2 == 0;
        cfg.time.dt = dt;
        cfg.seed = seed;
        if seed > i64::MAX as u64 {
            prop_assert!(cfg.validate().is_err() && cfg.to_toml().is_err());
        } else {
            prop_assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        }
    }
}
