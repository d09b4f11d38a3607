use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use mathonet::benchmarks::{generate_dataset, Dataset, SystemKind, SystemSpec};
use mathonet::hybrid::{discover_stencil, rescale_stencil, StencilModel};
use mathonet::io;
use mathonet::par::Exec;
use mathonet::trainer::{discover, Discovery, DiscoveryReport, TrainConfig};
use mathonet::validation::{mc_uncertainty, simulate_discovered};
use mathonet::{Error, MathONet, Model};

#[derive(Parser)]
#[command(name = "mathonet", version, about = "Sparse symbolic equation discovery with MathONet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset (CSV plus JSON sidecar).
    Gen(GenArgs),
    /// Run the λ × restart sweep and write report, model, posterior and history.
    Discover(DiscoverArgs),
    /// Integrate discovered right-hand sides with RK4.
    Simulate(SimulateArgs),
    /// Monte-Carlo predictive band under the diagonal posterior.
    Uncertainty(UncertaintyArgs),
    /// Print the per-cycle table of a discovery report.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    system: SystemKind,
    /// Standard deviation of the Gaussian noise added to the targets.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with any subset of the training configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting preset; defaults to the system named in the dataset sidecar.
    #[arg(long)]
    preset: Option<SystemKind>,
    /// Output column, 1-based as in `y1`, `y2`, …, or `all`.
    #[arg(long, default_value = "all")]
    target: String,
    /// Force the reaction–diffusion stencil model (automatic for fisher_kpp data).
    #[arg(long)]
    stencil: bool,
    /// Grid spacing for the stencil model when the sidecar has no grid.
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated λ grid.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Override any configuration field: `--set field=<json value>`.
    #[arg(long = "set", value_name = "FIELD=JSON")]
    overrides: Vec<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// One model file per state dimension, in order (space- or comma-separated).
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    /// Comma-separated initial state.
    #[arg(long, value_delimiter = ',', required = true)]
    x0: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Number of RK4 steps.
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UncertaintyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Posterior variances written by `discover`.
    #[arg(long)]
    posterior: PathBuf,
    /// Dataset whose input rows are evaluated.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    report: PathBuf,
    /// Also list the final cycle of every run.
    #[arg(long)]
    runs: bool,
}

#[derive(Serialize, serde::Deserialize)]
struct Posterior {
    zeta: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Uncertainty(a) => cmd_uncertainty(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::Config(_)) => 2,
        Some(Error::NoCandidates(_)) => 4,
        _ => 3,
    }
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<ExitCode> {
    let spec = SystemSpec::for_system(a.system);
    let ds = generate_dataset(&spec, a.noise, a.seed)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    io::write_dataset(&ds, &a.out)?;
    println!("wrote {} rows ({} inputs, {} outputs) to {}", ds.len(), ds.n_inputs(), ds.n_outputs(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn load_config(a: &DiscoverArgs, ds: &Dataset) -> anyhow::Result<TrainConfig> {
    let preset = a
        .preset
        .or_else(|| ds.meta.as_ref().and_then(|m| m.system.parse().ok()));
    let base = match preset {
        Some(SystemKind::Lorenz) => TrainConfig::lorenz(),
        Some(SystemKind::LotkaVolterra) => TrainConfig::lotka_volterra(),
        Some(SystemKind::FisherKpp) => TrainConfig::fisher_kpp(),
        None => TrainConfig::default(),
    };
    let mut value = serde_json::to_value(&base)?;
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let Value::Object(fields) = file else {
            return Err(Error::Config(format!("{}: expected a JSON object", path.display())).into());
        };
        value.as_object_mut().unwrap().extend(fields);
    }
    let mut set = |k: &str, v: Value| {
        value[k] = v;
    };
    if let Some(c) = a.cycles {
        set("n_cycle", c.into());
    }
    if let Some(e) = a.epochs {
        set("n_epoch", e.into());
        set("decay_every", e.into());
    }
    if let Some(l) = &a.lambda {
        set("lambda_grid", serde_json::to_value(l)?);
    }
    if let Some(r) = a.restarts {
        set("restarts", r.into());
    }
    if let Some(s) = a.seed {
        set("seed", s.into());
    }
    if let Some(lr) = a.lr {
        set("learning_rate", lr.into());
    }
    if let Some(k) = a.kappa {
        set("kappa", k.into());
        set("kappa_g", k.into());
    }
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects FIELD=JSON, got `{o}`")))?;
        // Bare words are taken as strings so `--set optimizer=sgd` works.
        let v: Value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        set(k.trim(), v);
    }
    let cfg: TrainConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, v: &impl Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_outputs<M: Model + Serialize>(dir: &Path, d: &Discovery<M>) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &d.report)?;
    if let Some(m) = &d.model {
        write_json(&dir.join("model.json"), m)?;
    }
    if let Some(z) = &d.zeta {
        write_json(&dir.join("posterior.json"), &Posterior { zeta: z.clone() })?;
    }
    io::write_history(&d.report.winner_history, dir.join("history.csv"))?;
    Ok(())
}

fn cmd_discover(a: DiscoverArgs) -> anyhow::Result<ExitCode> {
    let ds = io::read_dataset(&a.data)?;
    let cfg = load_config(&a, &ds)?;
    let exec = Exec::new(a.jobs);
    let is_fisher = ds.meta.as_ref().is_some_and(|m| m.system == SystemKind::FisherKpp.name());
    let stencil = a.stencil || is_fisher;
    let targets: Vec<usize> = if stencil || a.target == "all" {
        (0..ds.n_outputs()).collect()
    } else {
        match a.target.parse::<usize>() {
            Ok(t) if (1..=ds.n_outputs()).contains(&t) => vec![t - 1],
            _ => {
                return Err(Error::Config(format!(
                    "--target must be `all` or a column in 1..={}, got `{}`",
                    ds.n_outputs(),
                    a.target
                ))
                .into())
            }
        }
    };
    fs::create_dir_all(&a.out)?;
    let mut failed = false;
    for &t in &targets {
        let dir = a.out.join(format!("y{}", t + 1));
        let report: DiscoveryReport = if stencil {
            let d = discover_stencil(&ds, a.dx, &cfg, &exec)?;
            write_outputs(&dir, &d)?;
            if let Some(m) = &d.model {
                match rescale_stencil(m) {
                    Ok(r) => write_json(&dir.join("stencil.json"), &r)?,
                    // The winner can legitimately lose its stencil to pruning.
                    Err(mathonet::Error::DegenerateStencil) => eprintln!("y{}: stencil was pruned away; no stencil.json", t + 1),
                    Err(e) => return Err(e.into()),
                }
            }
            d.report
        } else {
            let d = discover(&ds, t, &cfg, &exec)?;
            write_outputs(&dir, &d)?;
            d.report
        };
        match &report.winner {
            Some(w) => println!("y{}' = {}  (terms {}, val_mse {:.3e})", t + 1, w.expression, w.term_count, w.val_mse),
            None => {
                eprintln!("y{}: every run diverged; see {}", t + 1, dir.join("report.json").display());
                failed = true;
            }
        }
    }
    Ok(if failed { ExitCode::from(4) } else { ExitCode::SUCCESS })
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<ExitCode> {
    let models = a
        .models
        .iter()
        .map(|p| MathONet::load(p).with_context(|| format!("loading model {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let tr = simulate_discovered(&models, &a.x0, a.dt, a.steps)?;
    io::write_trajectory(&tr, &a.out)?;
    match tr.diverged_at {
        Some(step) => println!("diverged at step {step}; wrote {} states", tr.states.len()),
        None => println!("wrote {} states to {}", tr.states.len(), a.out.display()),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_uncertainty(a: UncertaintyArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let post: Posterior = serde_json::from_str(
        &fs::read_to_string(&a.posterior).with_context(|| format!("loading posterior {}", a.posterior.display()))?,
    )?;
    let ds = io::read_dataset(&a.data)?;
    let exec = Exec::new(a.jobs);
    // Stencil models carry a kernel; anything else is a plain network.
    let band = if serde_json::from_str::<Value>(&text)?.get("kernel").is_some() {
        mc_uncertainty(&StencilModel::from_json(&text)?, &post.zeta, &ds.x, a.samples, a.seed, &exec)?
    } else {
        mc_uncertainty(&MathONet::from_json(&text)?, &post.zeta, &ds.x, a.samples, a.seed, &exec)?
    };
    io::write_band(&band, &a.out)?;
    println!("wrote {} rows from {} samples to {}", band.mean.len(), band.samples, a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let r: DiscoveryReport = serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", a.report.display())))?;
    println!("target y{}  method {}", r.target + 1, r.method);
    let Some(w) = &r.winner else {
        println!("no winner: all {} runs diverged", r.runs.len());
        return Ok(ExitCode::from(4));
    };
    println!("winner (lambda {:e}, seed {}): {}", w.lambda, w.seed, w.expression);
    println!("{:>5} {:>6} {:>6} {:>12} {:>12}", "cycle", "terms", "conn", "val_mse", "train_mse");
    for c in &r.winner_history {
        println!(
            "{:>5} {:>6} {:>6} {:>12.4e} {:>12.4e}",
            c.cycle, c.term_count, c.active_connections, c.val_mse, c.train_mse
        );
    }
    if a.runs {
        println!();
        println!("{:>10} {:>6} {:>9} {:>6} {:>12}", "lambda", "seed", "status", "terms", "val_mse");
        for run in &r.runs {
            let last = run.cycles.last();
            println!(
                "{:>10.1e} {:>6} {:>9} {:>6} {:>12.4e}",
                run.lambda,
                run.seed,
                format!("{:?}", run.status).to_lowercase(),
                last.map_or(0, |c| c.term_count),
                last.map_or(f64::NAN, |c| c.val_mse)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
