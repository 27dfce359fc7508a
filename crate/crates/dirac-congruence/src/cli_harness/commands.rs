//! Subcommand dispatch: each command runs a pipeline, writes its artifacts and a report.

use super::config::RunConfig;
use super::pipeline::{conservation, integrate_branch, load_state, reconstruct, reference_at};
use super::report::{Check, RunReport};
use super::scenarios::{self, ScenarioOptions, SPEED_FLOOR};
use super::HarnessError;
use crate::angular_algebra::AngleGrid;
use crate::observables::{field_polar_study, flow_table, FieldSamples};
use crate::reference_solver::{write_field, write_field_csv};
use crate::trajectory_engine::{read_bundle, write_bundle, write_bundle_csv, Branch, Mode, TrajectoryBundle};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Largest grids and bundles that also get CSV copies.
const CSV_MAX_POINTS: usize = 4096;
const CSV_MAX_ROWS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    /// Operator identities, γ recovery and the current decomposition.
    Verify,
    /// Spectral evolution of the initial state to t_end.
    EvolveRef,
    /// Trajectory bundles for the configured branches.
    EvolveTraj,
    /// Ψ at t_end from bundle_R.bin and bundle_I.bin in the output directory.
    Reconstruct,
    /// Trajectory reconstruction against the spectral reference.
    Compare,
    Covariance { eps: [f64; 3], halvings: usize },
    /// Polar residual study plus a CSV of Q and mean velocities.
    Observables { stride: usize },
    PlanewaveDemo,
    /// Every acceptance criterion.
    Acceptance,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::EvolveRef => "evolve-ref",
            Command::EvolveTraj => "evolve-traj",
            Command::Reconstruct => "reconstruct",
            Command::Compare => "compare",
            Command::Covariance { .. } => "covariance",
            Command::Observables { .. } => "observables",
            Command::PlanewaveDemo => "planewave-demo",
            Command::Acceptance => "acceptance",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: RunConfig,
    /// Serial execution and byte-stable reports.
    pub deterministic: bool,
    pub parallel: bool,
    /// Write artifacts and report.json into the output directory.
    pub write: bool,
}

impl Invocation {
    pub fn new(command: Command, config: RunConfig) -> Self {
        Self { command, config, deterministic: false, parallel: false, write: true }
    }

    fn scenario_options(&self) -> ScenarioOptions {
        ScenarioOptions {
            parallel: self.parallel && !self.deterministic,
            timed: !self.deterministic,
            seed: self.config.seed,
        }
    }
}

struct Out<'a> {
    dir: &'a Path,
    write: bool,
    report: &'a mut RunReport,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> Option<PathBuf> {
        if !self.write {
            return None;
        }
        self.report.artifacts.push(name.to_string());
        Some(self.dir.join(name))
    }

    fn bundle(&mut self, b: &TrajectoryBundle) -> Result<(), HarnessError> {
        let tag = match b.branch {
            Branch::R => "R",
            Branch::I => "I",
        };
        if let Some(p) = self.path(&format!("bundle_{tag}.bin")) {
            write_bundle(&p, b)?;
        }
        if b.labels.len() * b.snapshots.len() <= CSV_MAX_ROWS {
            if let Some(p) = self.path(&format!("bundle_{tag}.csv")) {
                write_bundle_csv(&p, b)?;
            }
        }
        Ok(())
    }

    fn field(&mut self, name: &str, f: &crate::reference_solver::SpinorField) -> Result<(), HarnessError> {
        if let Some(p) = self.path(&format!("{name}.bin")) {
            write_field(&p, f)?;
        }
        if f.grid.len() <= CSV_MAX_POINTS {
            if let Some(p) = self.path(&format!("{name}.csv")) {
                write_field_csv(&p, f)?;
            }
        }
        Ok(())
    }
}

fn io_err(p: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", p.display()))
}

/// Runs one subcommand. Check failures are reported, not returned as errors.
pub fn execute(inv: &Invocation) -> Result<RunReport, HarnessError> {
    let start = Instant::now();
    let cfg = &inv.config;
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    if inv.write {
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    }
    let mut report = RunReport::new(inv.command.name(), cfg, inv.deterministic);
    let opts = inv.scenario_options();
    let mut out = Out { dir: &dir, write: inv.write, report: &mut report };
    match &inv.command {
        Command::Verify => verify(&mut out, &opts)?,
        Command::EvolveRef => evolve_ref(cfg, &mut out)?,
        Command::EvolveTraj => evolve_traj(cfg, &opts, &mut out)?,
        Command::Reconstruct => reconstruct_cmd(cfg, &mut out)?,
        Command::Compare => compare(cfg, &opts, &mut out)?,
        Command::Covariance { eps, halvings } => {
            let c = scenarios::boost_covariance(cfg.physics, *eps, *halvings)?;
            out.report.criteria.push(c);
        }
        Command::Observables { stride } => observables(cfg, *stride, &mut out)?,
        Command::PlanewaveDemo => {
            let run = scenarios::plane_wave_demo(cfg, &opts)?;
            out.bundle(&run.r)?;
            out.bundle(&run.i)?;
            out.field("reconstructed", &run.field)?;
            out.report.criteria.push(run.result);
        }
        Command::Acceptance => {
            let all = scenarios::run_acceptance(&opts, |_| {})?;
            out.report.criteria = all;
        }
    }
    report.finish();
    if !inv.deterministic {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    if inv.write {
        report.write(&dir.join("report.json"))?;
    }
    Ok(report)
}

fn verify(out: &mut Out, opts: &ScenarioOptions) -> Result<(), HarnessError> {
    out.report.criteria.push(scenarios::identities(opts));
    out.report.criteria.push(scenarios::gamma_recovery());
    let p = out.report.config.physics;
    out.report.criteria.push(scenarios::current_decomposition(p, None, opts)?);
    Ok(())
}

fn load(cfg: &RunConfig, out: &mut Out) -> Result<super::pipeline::LoadedState, HarnessError> {
    let s = load_state(cfg)?;
    out.report.warnings.extend(s.warnings.iter().cloned());
    Ok(s)
}

fn evolve_ref(cfg: &RunConfig, out: &mut Out) -> Result<(), HarnessError> {
    let state = load(cfg, out)?;
    let f = reference_at(&state, cfg.time.t_end)?;
    let (n0, n1) = (state.field.norm_squared(), f.norm_squared());
    out.report.push(Check::at_most("norm_drift", (n1 - n0).abs() / n0, 1e-10));
    out.field("reference", &f)?;
    Ok(())
}

fn run_branches(
    cfg: &RunConfig,
    opts: &ScenarioOptions,
    out: &mut Out,
) -> Result<(super::pipeline::LoadedState, Vec<TrajectoryBundle>), HarnessError> {
    let state = load(cfg, out)?;
    let mut bundles = Vec::new();
    for branch in cfg.branch.branches() {
        let b = integrate_branch(cfg, &state, branch, opts.parallel, 0)?;
        out.report.push(Check::at_least(
            format!("min_speed_ratio_{branch:?}"),
            b.min_speed_ratio,
            SPEED_FLOOR,
        ));
        match cfg.mode {
            Mode::Validation => {
                let c = conservation(&b);
                out.report.push(
                    Check::at_least(format!("conserved_fraction_{branch:?}"), c.fraction, 0.999)
                        .with_detail(format!("worst {:.2e}", c.worst)),
                );
            }
            Mode::SelfContained => {
                out.report.push(Check::at_least(
                    format!("kept_fraction_{branch:?}"),
                    b.kept_fraction(b.final_snapshot()),
                    0.999,
                ));
            }
        }
        out.bundle(&b)?;
        bundles.push(b);
    }
    Ok((state, bundles))
}

fn evolve_traj(cfg: &RunConfig, opts: &ScenarioOptions, out: &mut Out) -> Result<(), HarnessError> {
    run_branches(cfg, opts, out).map(|_| ())
}

fn reconstruct_cmd(cfg: &RunConfig, out: &mut Out) -> Result<(), HarnessError> {
    let r = read_bundle(&out.dir.join("bundle_R.bin"))?;
    let i = read_bundle(&out.dir.join("bundle_I.bin"))?;
    let (f, coverage) = reconstruct(cfg, &r, &i)?;
    let finite = f.psi.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    out.report.push(Check::flag("finite_field", finite).with_detail(format!("coverage {coverage:.4}")));
    out.field("reconstructed", &f)?;
    Ok(())
}

fn compare(cfg: &RunConfig, opts: &ScenarioOptions, out: &mut Out) -> Result<(), HarnessError> {
    let mut both = cfg.clone();
    both.branch = super::config::BranchSpec::Both;
    let (state, bundles) = run_branches(&both, opts, out)?;
    let (f, coverage) = reconstruct(cfg, &bundles[0], &bundles[1])?;
    let reference = reference_at(&state, cfg.time.t_end)?;
    out.report.push(
        Check::at_most("relative_l2", f.relative_l2(&reference), 0.01).with_detail(format!("coverage {coverage:.4}")),
    );
    out.field("reconstructed", &f)?;
    out.field("reference", &reference)?;
    Ok(())
}

fn observables(cfg: &RunConfig, stride: usize, out: &mut Out) -> Result<(), HarnessError> {
    let state = load(cfg, out)?;
    let study = field_polar_study("config", &state.field, cfg.time.t_end, cfg.time.dt, 2, stride)?;
    out.report.push(Check::all_at_least("squared_density_order", &study.order_squared, 1.8));
    out.report.push(Check::all_at_least("mean_continuity_order", &study.order_continuity, 1.8));
    out.report.push(Check::all_at_least("phase_law_drift_order", &study.order_hj_drift, 1.8));
    out.report.push(Check::at_most("dual_route_velocity", study.max_dual_route, 1e-8));
    out.report.push(Check::at_least("min_speed_ratio", study.min_speed_ratio, SPEED_FLOOR));
    if !crate::observables::study::second_order(&study.order_hj_literal) {
        out.report.warnings.push(format!(
            "phase law with the mean modified angular velocity: orders {:.3?}",
            study.order_hj_literal
        ));
    }
    let at = reference_at(&state, cfg.time.t_end)?;
    let samples = FieldSamples::from_field(&at, stride);
    let rows = flow_table(&samples, &AngleGrid::quadrature(2, 2, 4).nodes(), 1e-3);
    if let Some(p) = out.path("observables.csv") {
        let file = std::fs::File::create(&p).map_err(|e| io_err(&p, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "x,y,z,alpha,beta,gamma,density,q,vx,vy,vz,v_alpha,v_beta,v_gamma")?;
            for r in &rows {
                let v = r.flow.v_trans;
                let a = r.flow.v_ang_modified;
                writeln!(
                    w,
                    "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    r.x[0], r.x[1], r.x[2], r.angles[0], r.angles[1], r.angles[2], r.density, r.flow.q, v[0], v[1],
                    v[2], a[0], a[1], a[2]
                )?;
            }
            w.flush()
        };
        body().map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}
