use dirac_congruence::angular_algebra::{AngleGrid, SpinCoefficients};
use dirac_congruence::reference_solver::{GaussianPacket, Grid3};
use dirac_congruence::trajectory_engine::{
    integrate_bundle, read_bundle, reconstruct_dirac, write_bundle, Branch, InitialState, IntegrationOptions,
    LabelFlag, LabelGrid, Mode, OracleSampler, TrajectoryError,
};
use dirac_congruence::PhysicalParams;
use num_complex::Complex64 as C64;

fn e1() -> SpinCoefficients {
    let mut v = SpinCoefficients::zeros();
    v[0] = C64::from(1.0);
    v
}

fn uniform_bundle(branch: Branch, t_end: f64) -> dirac_congruence::trajectory_engine::TrajectoryBundle {
    let p = PhysicalParams::default();
    let labels = LabelGrid::new(
        Grid3::new(3, 6.0),
        AngleGrid::quadrature(2, 2, 4),
        branch,
        InitialState::Uniform { pol: e1() },
    )
    .unwrap();
    let mut o = IntegrationOptions::new(Mode::SelfContained, 0.02 / p.omega(), t_end);
    o.record_every = 5;
    integrate_bundle(labels, p, &o, None).unwrap()
}

#[test]
fn bundles_survive_a_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let t_end = 1.0 / PhysicalParams::default().omega();
    let r = uniform_bundle(Branch::R, t_end);
    let i = uniform_bundle(Branch::I, t_end);
    let (pr, pi) = (dir.path().join("r.bin"), dir.path().join("i.bin"));
    write_bundle(&pr, &r).unwrap();
    write_bundle(&pi, &i).unwrap();
    let (r2, i2) = (read_bundle(&pr).unwrap(), read_bundle(&pi).unwrap());
    assert_eq!(r2.snapshots, r.snapshots);
    assert_eq!(r2.branch, Branch::R);
    let out = Grid3::new(3, 6.0);
    let (a, ca) = reconstruct_dirac(&r, &i, t_end, out).unwrap();
    let (b, cb) = reconstruct_dirac(&r2, &i2, t_end, out).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a.max_abs_diff(&b), 0.0);
}

#[test]
fn oversized_steps_are_refused() {
    let p = PhysicalParams::default();
    let labels = LabelGrid::new(Grid3::new(2, 4.0), AngleGrid::quadrature(2, 2, 4), Branch::R, InitialState::Uniform {
        pol: e1(),
    })
    .unwrap();
    let o = IntegrationOptions::new(Mode::SelfContained, 0.2 / p.omega(), 1.0);
    assert!(matches!(integrate_bundle(labels, p, &o, None), Err(TrajectoryError::StepTooLarge { .. })));
}

#[test]
fn validation_needs_an_oracle() {
    let p = PhysicalParams::default();
    let grid = Grid3::new(16, 20.0);
    let (init, _) = InitialState::gaussian(GaussianPacket::default(), grid, p);
    let labels = LabelGrid::new(Grid3::new(2, 20.0), AngleGrid::quadrature(2, 2, 4), Branch::R, init).unwrap();
    let o = IntegrationOptions::new(Mode::Validation, 0.01 / p.omega(), 0.1 / p.omega());
    assert!(integrate_bundle(labels, p, &o, None).is_err());
}

fn packet_gap(t_end: f64) -> f64 {
    let p = PhysicalParams::default();
    let grid = Grid3::new(16, 20.0);
    let (init, field) = InitialState::gaussian(GaussianPacket::default(), grid, p);
    let dt = t_end / 8.0;
    let labels = |b| {
        LabelGrid::new(Grid3::new(8, 20.0), AngleGrid::quadrature(2, 2, 4).reduce_gamma(), b, init.clone()).unwrap()
    };
    let oracle = OracleSampler::new(field, Branch::R, 2, 6);
    let o = |m| IntegrationOptions::new(m, dt, t_end);
    let v = integrate_bundle(labels(Branch::R), p, &o(Mode::Validation), Some(&oracle)).unwrap();
    let s = integrate_bundle(labels(Branch::R), p, &o(Mode::SelfContained), None).unwrap();
    assert!(s.min_speed_ratio >= 1.0 - 1e-9 && v.min_speed_ratio >= 1.0 - 1e-9);
    let (fv, fs) = (v.final_snapshot(), s.final_snapshot());
    let mut worst = 0.0f64;
    for l in 0..fv.q.len() {
        let near = v.labels.q0_of(l).iter().map(|x| x * x).sum::<f64>().sqrt() < 4.0;
        if fv.flags[l] == LabelFlag::Ok && fs.flags[l] == LabelFlag::Ok && near {
            for k in 0..3 {
                worst = worst.max((fv.q[l][k] - fs.q[l][k]).abs());
            }
        }
    }
    worst
}

/// Both modes start from the same velocity field, so on a packet their paths separate
/// no faster than t².
#[test]
fn self_contained_agrees_with_validation_at_short_times() {
    let w = PhysicalParams::default().omega();
    let (a, b) = (packet_gap(0.02 / w), packet_gap(0.04 / w));
    println!("{a:e} {b:e}");
    assert!(b < 1e-3, "{b}");
    assert!((b / a).log2() > 1.7, "{a} {b}");
}
