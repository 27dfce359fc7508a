use clap::{Args, Parser, Subcommand};
use dirac_congruence::cli_harness::{
    execute, BranchSpec, Command, HarnessError, Invocation, Overrides, RunConfig, EXIT_ERROR,
};
use dirac_congruence::trajectory_engine::Mode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "dirac-congruence", version, about = "Trajectory construction of free Dirac evolution")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; defaults depend on the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Serial execution and byte-stable outputs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads (1 when deterministic).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Time step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    labels_per_axis: Option<usize>,
    /// Angle nodes as "na,nb,ng".
    #[arg(long, global = true, value_parser = parse_nodes)]
    angle_nodes: Option<[usize; 3]>,
    /// R, I or both.
    #[arg(long, global = true)]
    branch: Option<BranchSpec>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Operator identities, Dirac-matrix recovery and current decomposition.
    Verify,
    /// Spectral reference evolution to T.
    EvolveRef,
    /// Integrate trajectory bundles.
    EvolveTraj,
    /// Rebuild Ψ(T) from bundle_R.bin and bundle_I.bin in the output directory.
    Reconstruct,
    /// Trajectory reconstruction against the spectral reference (relative L2 ≤ 1%).
    Compare,
    /// First-order boost covariance on the rest-frame plane wave.
    Covariance {
        /// Boost ε = v/c as "ex,ey,ez".
        #[arg(long, value_parser = parse_vec3, default_value = "0.000666666666666667,0.000333333333333333,-0.000666666666666667")]
        eps: [f64; 3],
        #[arg(long, default_value_t = 1)]
        halvings: usize,
    },
    /// Polar residuals and a CSV of the quantum potential and mean velocities.
    Observables {
        /// Sample every n-th grid point per axis.
        #[arg(long, default_value_t = 4)]
        stride: usize,
    },
    /// The zero-momentum plane wave over one period, checked against closed-form paths.
    PlanewaveDemo,
    /// Every acceptance criterion.
    Acceptance,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_list<const N: usize, T: std::str::FromStr>(s: &str) -> Result<[T; N], String> {
    let v: Vec<T> = s
        .split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| format!("cannot parse '{x}'")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated values"))
}

fn parse_nodes(s: &str) -> Result<[usize; 3], String> {
    parse_list(s)
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_list(s)
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => match cli.command {
            Cmd::PlanewaveDemo => RunConfig::plane_wave_demo(),
            _ => RunConfig::default(),
        },
    };
    cfg.apply(&Overrides {
        mode: c.mode,
        dt: c.dt,
        t_end: c.t_end,
        labels_per_axis: c.labels_per_axis,
        angle_nodes: c.angle_nodes,
        branch: c.branch,
        output_dir: c.out.clone(),
    });
    cfg.validate()?;
    if c.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(0);
    }

    let workers = if c.deterministic { 1 } else { c.workers.unwrap_or(0) };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| HarnessError::Numerical(format!("thread pool: {e}")))?;
    let parallel = !c.deterministic && rayon::current_num_threads() > 1;

    let command = match cli.command {
        Cmd::Verify => Command::Verify,
        Cmd::EvolveRef => Command::EvolveRef,
        Cmd::EvolveTraj => Command::EvolveTraj,
        Cmd::Reconstruct => Command::Reconstruct,
        Cmd::Compare => Command::Compare,
        Cmd::Covariance { eps, halvings } => Command::Covariance { eps, halvings },
        Cmd::Observables { stride } => Command::Observables { stride },
        Cmd::PlanewaveDemo => Command::PlanewaveDemo,
        Cmd::Acceptance => Command::Acceptance,
    };
    let mut inv = Invocation::new(command, cfg);
    inv.deterministic = c.deterministic;
    inv.parallel = parallel;
    let report = execute(&inv)?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for cr in &report.criteria {
        println!("{}", cr.line());
    }
    for ch in &report.checks {
        println!(
            "{} {:<32} {:>12.4e}  (limit {:.1e})",
            if ch.passed { "ok  " } else { "FAIL" },
            ch.name,
            ch.value,
            ch.tolerance
        );
    }
    println!(
        "{}: {}  [{}]",
        report.subcommand,
        if report.passed { "passed" } else { "failed" },
        inv.config.output_dir.join("report.json").display()
    );
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
