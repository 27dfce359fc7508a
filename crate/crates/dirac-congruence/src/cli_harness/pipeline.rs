//! State loading and the evolve/reconstruct steps shared by subcommands and scenarios.

use super::config::{InitialSpec, RunConfig};
use super::HarnessError;
use crate::angular_algebra::SpinCoefficients;
use crate::reference_solver::{plane_wave_field, read_field, spectral_propagate, SpinorField};
use crate::trajectory_engine::{
    integrate_bundle, reconstruct_dirac, Branch, InitialState, IntegrationOptions, LabelFlag, LabelGrid, Mode,
    OracleSampler, TrajectoryBundle,
};
use num_complex::Complex64 as C64;

/// Relative deviation of ∫Ψ†Ψ from 1 that triggers renormalisation of a loaded field.
pub const NORM_TOL: f64 = 1e-6;
/// Per-label tolerance on |ψJ − ψ₀|/max ψ₀.
pub const CONSERVATION_TOL: f64 = 1e-6;

/// Initial data ready for both solvers.
#[derive(Clone, Debug)]
pub struct LoadedState {
    pub field: SpinorField,
    pub initial: InitialState,
    pub warnings: Vec<String>,
}

fn spinor(v: &[[f64; 2]; 4]) -> SpinCoefficients {
    SpinCoefficients::new(
        C64::new(v[0][0], v[0][1]),
        C64::new(v[1][0], v[1][1]),
        C64::new(v[2][0], v[2][1]),
        C64::new(v[3][0], v[3][1]),
    )
}

/// Builds the initial field named by the config, renormalising with a warning when needed.
pub fn load_state(cfg: &RunConfig) -> Result<LoadedState, HarnessError> {
    let p = cfg.physics;
    let grid = cfg.grid();
    let mut warnings = Vec::new();
    match &cfg.initial {
        InitialSpec::PlaneWave { polarization } => {
            let mut pol = spinor(polarization);
            let n2 = pol.norm_squared();
            if !(n2 > 0.0) {
                return Err(HarnessError::ConfigInvalid("plane-wave polarization is zero".into()));
            }
            if (n2 - 1.0).abs() > NORM_TOL {
                warnings.push(format!("NormalizationWarning: |pol|² = {n2:.6e}, rescaled to 1"));
                pol /= C64::from(n2.sqrt());
            }
            Ok(LoadedState {
                field: plane_wave_field(grid, p, pol, 0.0),
                initial: InitialState::Uniform { pol },
                warnings,
            })
        }
        InitialSpec::GaussianPacket { .. } => {
            let packet = cfg.packet().expect("gaussian spec");
            let (initial, field) = InitialState::gaussian(packet, grid, p);
            Ok(LoadedState { field, initial, warnings })
        }
        InitialSpec::File { path } => {
            let mut field = read_field(path)?;
            if field.grid != grid {
                return Err(HarnessError::ConfigInvalid(format!(
                    "{} holds a {}³ grid of side {}, the config asks for {}³ of side {}",
                    path.display(),
                    field.grid.n,
                    field.grid.l,
                    grid.n,
                    grid.l
                )));
            }
            if field.params != p {
                warnings.push(format!(
                    "file parameters {:?} replaced by the configured {:?}",
                    field.params, p
                ));
                field.params = p;
            }
            let n2 = field.norm_squared();
            if !(n2 > 0.0) {
                return Err(HarnessError::Numerical(format!("{} holds a zero field", path.display())));
            }
            if (n2 - 1.0).abs() > NORM_TOL {
                warnings.push(format!("NormalizationWarning: ∫Ψ†Ψ = {n2:.9e}, rescaled to 1"));
                field.scale(C64::from(1.0 / n2.sqrt()));
            }
            field.time = 0.0;
            Ok(LoadedState {
                initial: InitialState::from_field(&field),
                field,
                warnings,
            })
        }
    }
}

/// Integrates one branch with the configured labels, mode and step.
pub fn integrate_branch(
    cfg: &RunConfig,
    state: &LoadedState,
    branch: Branch,
    parallel: bool,
    record_every: usize,
) -> Result<TrajectoryBundle, HarnessError> {
    let labels = LabelGrid::new(cfg.label_space(), cfg.angle_grid(), branch, state.initial.clone())?;
    let mut opts = IntegrationOptions::new(cfg.mode, cfg.time.dt, cfg.time.t_end);
    opts.parallel = parallel;
    opts.record_every = record_every;
    let oracle = match cfg.mode {
        Mode::Validation => Some(OracleSampler::new(
            state.field.clone(),
            branch,
            cfg.oracle.factor,
            cfg.oracle.order,
        )),
        Mode::SelfContained => None,
    };
    Ok(integrate_bundle(labels, cfg.physics, &opts, oracle.as_ref())?)
}

/// Ψ at t_end from both bundles on the configured grid, with the coverage.
pub fn reconstruct(
    cfg: &RunConfig,
    r: &TrajectoryBundle,
    i: &TrajectoryBundle,
) -> Result<(SpinorField, f64), HarnessError> {
    if r.branch != Branch::R || i.branch != Branch::I {
        return Err(HarnessError::ConfigInvalid("reconstruction needs one R and one I bundle".into()));
    }
    Ok(reconstruct_dirac(r, i, cfg.time.t_end, cfg.grid())?)
}

/// Spectral reference at time t.
pub fn reference_at(state: &LoadedState, t: f64) -> Result<SpinorField, HarnessError> {
    if t == state.field.time {
        return Ok(state.field.clone());
    }
    Ok(spectral_propagate(&state.field, t - state.field.time)?)
}

/// Density conservation ψJ = ψ₀ along paths at the final snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conservation {
    /// Unflagged labels meeting [`CONSERVATION_TOL`], over all unflagged labels.
    pub fraction: f64,
    pub worst: f64,
    pub flagged: usize,
    pub labels: usize,
}

pub fn conservation(b: &TrajectoryBundle) -> Conservation {
    let s = b.final_snapshot();
    let m = b.labels.psi0_max();
    let (mut ok, mut good, mut worst) = (0usize, 0usize, 0.0f64);
    for l in 0..s.flags.len() {
        if s.flags[l] != LabelFlag::Ok {
            continue;
        }
        ok += 1;
        let e = (s.psi[l] * s.jac[l] - b.labels.psi0[l]).abs() / m;
        worst = worst.max(e);
        if e <= CONSERVATION_TOL {
            good += 1;
        }
    }
    Conservation {
        fraction: if ok == 0 { 0.0 } else { good as f64 / ok as f64 },
        worst,
        flagged: s.flags.len() - ok,
        labels: s.flags.len(),
    }
}
