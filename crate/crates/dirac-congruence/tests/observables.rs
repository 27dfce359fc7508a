use dirac_congruence::angular_algebra::{AngleGrid, EulerAngles, SpinCoefficients};
use dirac_congruence::observables::{
    flow_table, path_phase_check, FieldProbe, FieldSamples, ObservablesError,
};
use dirac_congruence::reference_solver::{Grid3, SpinorField};
use dirac_congruence::spinor_core::GammaSet;
use dirac_congruence::PhysicalParams;
use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;

/// Positive-energy plane wave u·e^{i(k·x − Et/ħ)}.
struct PlaneWaveProbe {
    params: PhysicalParams,
    k: [f64; 3],
    u: SpinCoefficients,
    e: f64,
}

impl PlaneWaveProbe {
    fn new(params: PhysicalParams, k: [f64; 3]) -> Self {
        let g = GammaSet::dirac();
        let mut h = g.gamma[0] * C64::from(params.m * params.c * params.c);
        for i in 0..3 {
            h += g.alpha(i + 1) * C64::from(params.c * params.hbar * k[i]);
        }
        let eig = SymmetricEigen::new(h);
        let top = (0..4).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        Self { params, k, u: eig.eigenvectors.column(top).into_owned(), e: eig.eigenvalues[top] }
    }

    fn at(&self, x: [f64; 3], t: f64) -> SpinCoefficients {
        let ph = (0..3).map(|i| self.k[i] * x[i]).sum::<f64>() - self.e * t / self.params.hbar;
        self.u * C64::from_polar(1.0, ph)
    }
}

impl FieldProbe for PlaneWaveProbe {
    fn probe(&self, x: [f64; 3], t: f64) -> Result<(SpinCoefficients, [SpinCoefficients; 3]), ObservablesError> {
        let psi = self.at(x, t);
        Ok((psi, std::array::from_fn(|i| psi * C64::new(0.0, self.k[i]))))
    }

    fn params(&self) -> PhysicalParams {
        self.params
    }
}

fn start() -> ([f64; 3], EulerAngles) {
    ([0.3, -1.0, 2.0], EulerAngles::raw(1.2, 0.4, 0.9))
}

#[test]
fn rest_wave_phase_is_exact_along_either_flow() {
    let p = PhysicalParams::default();
    let probe = PlaneWaveProbe::new(p, [0.0; 3]);
    let (x, a) = start();
    for modified in [false, true] {
        let chk = path_phase_check(&probe, x, a, 0.0, 0.01 / p.omega(), 200, modified).unwrap();
        assert!(chk.mismatch < 1e-12, "{}", chk.mismatch);
        assert_eq!(chk.phase.len(), 201);
    }
}

/// Along the drift flow dS/dt = −Q on a moving wave, converging with the step;
/// the mean modified angular velocity leaves an O(1) mismatch.
#[test]
fn moving_wave_phase_tracks_the_drift_flow() {
    let p = PhysicalParams::default();
    let probe = PlaneWaveProbe::new(p, [0.4, -0.2, 0.3]);
    let (x, a) = start();
    let run = |h: f64, modified| path_phase_check(&probe, x, a, 0.0, h / p.omega(), (1.0 / h) as usize, modified).unwrap();
    let (coarse, fine) = (run(0.02, false).mismatch, run(0.01, false).mismatch);
    assert!(coarse < 1e-9 && fine < coarse / 8.0, "{coarse} {fine}");
    let literal = run(0.01, true).mismatch;
    assert!(literal > 0.1, "{literal}");
}

#[test]
fn flow_table_has_no_quantum_potential_on_plane_waves() {
    let p = PhysicalParams::default();
    let grid = Grid3::new(4, 8.0);
    let angles = AngleGrid::quadrature(2, 2, 4).nodes();
    for k in [[0.0; 3], [2.0 * std::f64::consts::PI / 8.0, 0.0, 0.0]] {
        let probe = PlaneWaveProbe::new(p, k);
        let f = SpinorField::from_fn(grid, p, |x| probe.at(x, 0.0));
        let rows = flow_table(&FieldSamples::from_field(&f, 1), &angles, 1e-3);
        assert!(!rows.is_empty() && rows.len() <= grid.len() * angles.len());
        for r in &rows {
            assert!(r.flow.q.abs() < 1e-12, "{}", r.flow.q);
            assert!(r.density > 0.0);
            let speed = r.flow.v_trans.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(speed >= p.c * (1.0 - 1e-9), "{speed}");
            assert_eq!(r.flow.v_ang, [0.0, 0.0, -p.omega()]);
        }
    }
}
