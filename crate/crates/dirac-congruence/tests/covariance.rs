use dirac_congruence::angular_algebra::{AngleGrid, EulerAngles, SpinCoefficients};
use dirac_congruence::covariance::{
    check_material_covariance, check_velocity_transform, label_shift_functions, plane_wave_covariance, BoostParams,
    CovarianceError, PlaneWave,
};
use dirac_congruence::reference_solver::Grid3;
use dirac_congruence::spinor_core::majorana_split;
use dirac_congruence::trajectory_engine::{integrate_bundle, Branch, InitialState, IntegrationOptions, LabelGrid, Mode};
use dirac_congruence::PhysicalParams;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tilted() -> SpinCoefficients {
    let mut v = SpinCoefficients::zeros();
    v[0] = C64::from(0.6_f64.cos());
    v[1] = C64::from_polar(0.6_f64.sin(), 0.9);
    v
}

#[test]
fn boosts_beyond_first_order_are_refused() {
    assert!(matches!(BoostParams::new([0.02, 0.0, 0.0]), Err(CovarianceError::EpsTooLarge { .. })));
    assert!(plane_wave_covariance(PhysicalParams::default(), [0.0, 0.0, 0.05], 0).is_err());
}

/// Velocity and density laws hold to second order in ε for arbitrary Majorana components.
#[test]
fn velocity_law_residual_is_quadratic_on_random_spinors() {
    let p = PhysicalParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let psi = SpinCoefficients::from_fn(|_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let phi = majorana_split(&psi).1;
        let th = EulerAngles::raw(rng.gen_range(0.3..2.8), rng.gen_range(0.0..6.2), rng.gen_range(0.0..12.5));
        let dir = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let res = |s: f64| check_velocity_transform(&phi, &th, &BoostParams::new(dir.map(|d| d * s)).unwrap(), &p);
        let (Ok(a), Ok(b)) = (res(4e-3), res(2e-3)) else { continue };
        if a.velocity_residual < 1e-12 {
            continue;
        }
        assert!(a.boosted_speed_ratio >= 1.0 - 1e-9);
        let order = (a.velocity_residual / b.velocity_residual).log2();
        assert!(order > 1.7, "velocity order {order}");
        let order = (a.density_residual / b.density_residual).log2();
        assert!(order > 1.7 || a.density_residual < 1e-12, "density order {order}");
    }
}

/// Material residuals on a spin-tilted rest wave shrink quadratically with the boost.
#[test]
fn material_covariance_on_a_tilted_rest_wave() {
    let p = PhysicalParams::default();
    let w = p.omega();
    let wave = PlaneWave::rest(tilted(), &p).unwrap();
    let grid = Grid3::new(3, 3.0);
    let mut opts = IntegrationOptions::new(Mode::SelfContained, 0.008 / w, 1.0 / w);
    opts.record_every = 1;
    opts.record_deformation = true;
    opts.record_velocity = true;
    let labels = LabelGrid::new(
        grid,
        AngleGrid::cluster(EulerAngles::raw(1.3, 0.8, 2.1), 1e-4),
        Branch::I,
        InitialState::Uniform { pol: tilted() },
    )
    .unwrap();
    let site = labels.label(labels.angles.flat(1, 1, 1), grid.index(1, 1, 1));
    let bundle = integrate_bundle(labels, p, &opts, None).unwrap();
    let shift = label_shift_functions(&bundle, Some(&[site])).unwrap();
    assert!(shift.identity_residual < 1e-6, "{}", shift.identity_residual);

    let eps = [1e-3, -2e-3, 5e-4];
    let check = |s: f64| {
        let b = BoostParams::new(eps.map(|e| e * s)).unwrap();
        check_material_covariance(&bundle, &shift, Some(&wave), &b, 2).unwrap()
    };
    let (big, small) = (check(1.0), check(0.5));
    for (name, a, b) in [
        ("density", big.density, small.density),
        ("density_vs_field", big.density_vs_field, small.density_vs_field),
        ("velocity", big.velocity, small.velocity),
        ("label_path", big.label_path, small.label_path),
    ] {
        assert!(a.is_finite() && b.is_finite(), "{name}");
        assert!(a < 1e-4, "{name} {a}");
        assert!(a < 1e-11 || (a / b).log2() > 1.6, "{name} {a} {b}");
    }
}
