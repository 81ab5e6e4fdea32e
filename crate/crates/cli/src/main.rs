//! `spde-taylor`: trees, simulations and convergence experiments.
//!
//! Exit codes: 0 success, 1 configuration or runtime error, 2 invalid tree
//! operation, 3 failed `--assert` check.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spde_taylor::evaluator::{identity_check, PathRecord};
use spde_taylor::harness::{self, ErrorReport, MAX_CI_WIDTH};
use spde_taylor::sampler::{path_rng, FineRecord, StepCovariance, TimeIntegralMode};
use spde_taylor::schemes::{integrate, ExactNoise, StepWorkspace};
use spde_taylor::trees::{DerivationPath, NodeAddr, RenderFormat, SWood, TreeError};
use thiserror::Error;

use config::{Config, IdentitySection, SlopeCheck};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("assertion failed: {0}")]
    Assert(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Runtime(_) => 1,
            CliError::Tree(_) => 2,
            CliError::Assert(_) => 3,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(name = "spde-taylor", version, about = "Stochastic trees, SPDE Taylor schemes and strong-order experiments")]
struct Cli {
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive woods and inspect their trees.
    Trees {
        #[command(subcommand)]
        action: TreesAction,
    },
    /// Integrate every configured scheme on one noise path.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo strong-error experiment.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Exit with status 3 if a configured slope check fails.
        #[arg(long = "assert")]
        assert_checks: bool,
        /// Also compare Φ(w) with Φ(E_a w) on one record.
        #[arg(long)]
        identity_check: bool,
    },
}

#[derive(Args)]
struct PathArg {
    /// Expansion steps from w0, e.g. "(2,1) (4,1)".
    #[arg(long, default_value = "")]
    path: String,
}

#[derive(Subcommand)]
enum TreesAction {
    /// Print the derived wood and its active nodes.
    Derive {
        #[command(flatten)]
        path: PathArg,
    },
    /// Order of the derived wood at (γ, δ) and the tree attaining it.
    Order {
        #[command(flatten)]
        path: PathArg,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
    },
    /// List active nodes.
    Acn {
        #[command(flatten)]
        path: PathArg,
    },
    /// Render the derived wood.
    Render {
        #[command(flatten)]
        path: PathArg,
        #[arg(long, value_enum, default_value_t = Format::Ascii)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Ascii,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Trees { action } => cmd_trees(action),
        Command::Simulate { config } => cmd_simulate(cli, config),
        Command::Converge {
            config,
            assert_checks,
            identity_check,
        } => cmd_converge(cli, config, *assert_checks, *identity_check),
    }
}

fn derive(path: &PathArg) -> Result<SWood, CliError> {
    let p: DerivationPath = path.path.parse()?;
    Ok(SWood::derive(&p)?)
}

fn cmd_trees(action: &TreesAction) -> Result<(), CliError> {
    match action {
        TreesAction::Derive { path } => {
            let w = derive(path)?;
            println!("{} trees", w.len());
            print!("{}", w.render(RenderFormat::Ascii));
            println!("active nodes: {}", join_addrs(&w.active_nodes()));
        }
        TreesAction::Order { path, gamma, delta } => {
            let w = derive(path)?;
            let (ord, idx) = w.order(*gamma, *delta)?;
            println!("{ord}");
            println!("witness: t{idx} (ord = {})", w.tree(idx).order());
        }
        TreesAction::Acn { path } => {
            let w = derive(path)?;
            println!("{}", join_addrs(&w.active_nodes()));
        }
        TreesAction::Render { path, format } => {
            let w = derive(path)?;
            let f = match format {
                Format::Dot => RenderFormat::Dot,
                Format::Ascii => RenderFormat::Ascii,
            };
            print!("{}", w.render(f));
        }
    }
    Ok(())
}

fn join_addrs(a: &[NodeAddr]) -> String {
    a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Loads the config and applies command-line overrides.
fn effective_config(cli: &Cli, path: &Path) -> Result<Config, CliError> {
    let mut c = Config::load(path)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.output.dir = o.clone();
    }
    Ok(c)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Creates the output directory and echoes the effective config and seed.
fn prepare_out(c: &Config) -> Result<PathBuf, CliError> {
    let dir = c.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    write(&dir.join("config.toml"), &c.canonical())?;
    write(
        &dir.join("run.txt"),
        &format!("seed: {}\nconfig_hash: {}\n", c.seed, c.hash()),
    )?;
    Ok(dir)
}

fn cmd_simulate(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let c = effective_config(cli, path)?;
    let sim = c
        .simulate
        .clone()
        .ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
    if sim.steps == 0 || !(sim.horizon > 0.0) {
        return Err(CliError::Config("simulate needs steps ≥ 1 and horizon > 0".into()));
    }
    let model = c.build_model()?;
    let schemes = c.schemes()?;
    let mode = c.time_integrals(&model, &schemes)?;
    let u0 = c.initial(&model)?;
    let h = sim.horizon / sim.steps as f64;
    let cov = StepCovariance::new(&model, h, mode, None).map_err(runtime)?;
    let ws = StepWorkspace::new(&model, h).map_err(runtime)?;
    let dir = prepare_out(&c)?;
    for &s in &schemes {
        // every scheme sees the same noise
        let mut noise = ExactNoise::new(&model, &cov, path_rng(c.seed, 0));
        let traj = integrate(s, &model, &ws, &u0, sim.steps, &mut noise).map_err(runtime)?;
        let file = dir.join(format!("{}_trajectory.csv", s.name()));
        let mut w = csv::Writer::from_path(&file).map_err(runtime)?;
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend((1..=model.dim()).map(|k| format!("u{k}")));
        w.write_record(&header).map_err(runtime)?;
        for (k, y) in traj.iter().enumerate() {
            let mut row = vec![k.to_string(), (k as f64 * h).to_string()];
            row.extend(y.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
        println!("{s}: {} steps -> {}", sim.steps, file.display());
    }
    Ok(())
}

fn cmd_converge(cli: &Cli, path: &Path, assert_checks: bool, identity: bool) -> Result<(), CliError> {
    let c = effective_config(cli, path)?;
    let spec = c.experiment_spec()?;
    let checks = c
        .checks
        .iter()
        .map(|k| validate_check(k, &c.schemes))
        .collect::<Result<Vec<_>, _>>()?;
    let reports = harness::run(&spec).map_err(|e| match e {
        harness::HarnessError::InvalidLadder(_) | harness::HarnessError::TooFewPaths { .. } => {
            CliError::Config(e.to_string())
        }
        other => runtime(other),
    })?;
    let dir = prepare_out(&c)?;
    for r in &reports {
        harness::emit(r, &dir).map_err(runtime)?;
        let slope = r
            .regression
            .map(|g| format!("{:.3} [{:.3}, {:.3}]", g.slope, g.ci_low, g.ci_high))
            .unwrap_or_else(|| "undefined".into());
        println!("{} ({}): slope {slope}, {}", r.scheme, r.mode.name(), r.verdict());
        if let Err(e) = r.check_precision() {
            log::warn!("{e}");
        }
    }
    if identity {
        let text = run_identity(&c, c.identity.clone().unwrap_or_default())?;
        print!("{text}");
        write(&dir.join("identity.txt"), &text)?;
    }
    let mut failed = Vec::new();
    for k in &checks {
        let (ok, line) = evaluate_check(k, &reports);
        println!("{} {line}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(line);
        }
    }
    if assert_checks && !failed.is_empty() {
        return Err(CliError::Assert(failed.join("; ")));
    }
    Ok(())
}

fn validate_check<'a>(k: &'a SlopeCheck, schemes: &[String]) -> Result<&'a SlopeCheck, CliError> {
    let known = |s: &str| schemes.iter().any(|x| x == s);
    if !known(&k.scheme) {
        return Err(CliError::Config(format!("check names unlisted scheme `{}`", k.scheme)));
    }
    match (&k.exceeds, k.by, k.min.or(k.max)) {
        (Some(other), Some(_), None) if known(other) => Ok(k),
        (None, None, Some(_)) => Ok(k),
        _ => Err(CliError::Config(format!(
            "check on `{}` needs either min/max or exceeds+by over a listed scheme",
            k.scheme
        ))),
    }
}

fn slope_of(reports: &[ErrorReport], scheme: &str) -> Option<(f64, f64)> {
    reports
        .iter()
        .find(|r| r.scheme.name() == scheme)
        .and_then(|r| r.regression)
        .map(|g| (g.slope, g.ci_width()))
}

fn evaluate_check(k: &SlopeCheck, reports: &[ErrorReport]) -> (bool, String) {
    let Some((s, width)) = slope_of(reports, &k.scheme) else {
        return (false, format!("{}: slope undefined", k.scheme));
    };
    let precise = width <= MAX_CI_WIDTH;
    if let (Some(other), Some(by)) = (&k.exceeds, k.by) {
        let Some((o, _)) = slope_of(reports, other) else {
            return (false, format!("{other}: slope undefined"));
        };
        let ok = s - o >= by && precise;
        return (ok, format!("{} - {other} = {:.3} (need ≥ {by})", k.scheme, s - o));
    }
    let lo = k.min.unwrap_or(f64::NEG_INFINITY);
    let hi = k.max.unwrap_or(f64::INFINITY);
    let ok = (lo..=hi).contains(&s) && precise;
    let mut line = format!("{}: slope {s:.3} in [{lo}, {hi}]", k.scheme);
    if !precise {
        let _ = write!(line, ", interval width {width:.3} exceeds {MAX_CI_WIDTH}");
    }
    (ok, line)
}

fn run_identity(c: &Config, id: IdentitySection) -> Result<String, CliError> {
    let model = c.build_model()?;
    let u0 = c.initial(&model)?;
    let path: DerivationPath = id.path.parse()?;
    let wood = SWood::derive(&path)?;
    let at: DerivationPath = id.at.parse()?;
    let [at] = at.steps() else {
        return Err(CliError::Config(format!("identity.at must be one node, got `{}`", id.at)));
    };
    if id.substeps < 2 || id.substeps % 2 != 0 || !(id.h > 0.0) {
        return Err(CliError::Config("identity needs h > 0 and an even substep count".into()));
    }
    let rates = model.reference_rates();
    let cov = StepCovariance::new(&model, id.h / id.substeps as f64, TimeIntegralMode::Diagonal, rates.as_deref())
        .map_err(runtime)?;
    let fine = FineRecord::generate(&cov, id.substeps, &mut path_rng(c.seed, 0)).map_err(runtime)?;
    let rec = PathRecord::new(&model, fine, &u0, 0.0);
    let r = identity_check(&wood, *at, &model, &rec).map_err(|e| match e {
        spde_taylor::evaluator::EvalError::Tree(t) => CliError::Tree(t),
        other => runtime(other),
    })?;
    let w = if id.path.trim().is_empty() { "w0".to_string() } else { id.path.clone() };
    Ok(format!(
        "identity: wood {w}, expand {at}, h {}, substeps {}\nresidual: {:e}\nquadrature_bound: {:e}\ndelta_u_norm: {:e}\n",
        id.h, id.substeps, r.residual, r.quadrature_bound, r.delta_u_norm
    ))
}
