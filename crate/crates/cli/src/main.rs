//! `feedopt`: estimation, simulation and the three experiment studies.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use feedopt::estimation::{estimate, EstimationOptions};
use feedopt::experiments::{run_montecarlo_g, run_rideshare, run_simulate, run_tracking, write_montecarlo_csv};
use feedopt::rideshare::{DemandProfile, RegionGraph};
use feedopt::{Error, EstimationMethod, LtiSystem, Result, Signal};

use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "feedopt",
    version,
    about = "Steady-state gain estimation and online feedback optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON configuration, checked against the bundled schema
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the steady-state gain from input/output CSV files
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        u: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long)]
        w: Option<PathBuf>,
        /// exact, constant-noise or min-norm
        #[arg(long)]
        method: Option<String>,
        /// Hankel depth, an upper bound on the observability index
        #[arg(long)]
        nu: Option<usize>,
        /// Block row used to read off the gain (1-indexed)
        #[arg(long)]
        block: Option<usize>,
    },
    /// Simulate a plant in open loop
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Plant JSON {"A","B","C","D","E"}
        #[arg(long)]
        system: Option<PathBuf>,
        /// Input CSV; a constant input from the config otherwise
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Monte Carlo precision of the estimated gain over system sizes
    #[command(name = "montecarlo-g")]
    MontecarloG {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical tracking error against the tracking bound
    Tracking {
        #[command(flatten)]
        common: Common,
    },
    /// Adaptive versus fixed-markup pricing on a ride-service fleet
    Rideshare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        demand: Option<PathBuf>,
    },
}

struct Context {
    cfg: ExperimentConfig,
    seed: u64,
    trials: Option<usize>,
    out: PathBuf,
}

impl Context {
    fn new(common: &Common, experiment: &str) -> Result<Self> {
        let cfg = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.expect_experiment(experiment)?;
        let trials = common.trials.or(cfg.trials);
        if trials == Some(0) {
            return Err(Error::Config("--trials must be at least 1".into()));
        }
        let out = match (&common.out, &cfg.output_dir) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => cfg.resolve(o),
            (None, None) => PathBuf::from("."),
        };
        fs::create_dir_all(&out)?;
        Ok(Self {
            seed: common.seed.or(cfg.seed).unwrap_or(0),
            trials,
            out,
            cfg,
        })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        log::info!("writing {}", path.display());
        Ok(BufWriter::new(File::create(path)?))
    }

    /// A flag wins over the config entry, which is resolved against the config directory.
    fn path(&self, flag: &Option<PathBuf>, entry: &Option<String>) -> Option<PathBuf> {
        flag.clone().or_else(|| entry.as_ref().map(|p| self.cfg.resolve(p)))
    }
}

fn read_signal(path: &Path) -> Result<Signal> {
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    Signal::read_csv(file).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn required(p: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.ok_or_else(|| Error::Config(format!("{what} is required")))
}

fn write_json<T: serde::Serialize>(ctx: &Context, name: &str, value: &T) -> Result<()> {
    let mut w = ctx.create(name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn cmd_estimate(
    common: &Common,
    u: &Option<PathBuf>,
    y: &Option<PathBuf>,
    w: &Option<PathBuf>,
    method: &Option<String>,
    nu: Option<usize>,
    block: Option<usize>,
) -> Result<()> {
    let ctx = Context::new(common, "estimate")?;
    let sec = &ctx.cfg.estimate;
    let u = read_signal(&required(ctx.path(u, &sec.u), "--u")?)?;
    let y = read_signal(&required(ctx.path(y, &sec.y), "--y")?)?;
    let w = ctx.path(w, &sec.w).map(|p| read_signal(&p)).transpose()?;
    let method = match method {
        Some(m) => m.parse()?,
        None => sec.method.unwrap_or(EstimationMethod::MinNormUnknownNoise),
    };
    let nu = nu.or(sec.nu).ok_or_else(|| Error::Config("--nu is required".into()))?;
    let mut opts = EstimationOptions::new(nu).with_block(block.or(sec.block).unwrap_or(1));
    if let Some(order) = sec.excitation_order {
        opts = opts.with_excitation_order(order);
    }
    let est = estimate(method, &u, &y, w.as_ref(), &opts)?;
    write_json(&ctx, "estimate.json", &est)?;
    println!("{}", serde_json::to_string_pretty(&est)?);
    Ok(())
}

fn cmd_simulate(common: &Common, system: &Option<PathBuf>, input: &Option<PathBuf>) -> Result<()> {
    let ctx = Context::new(common, "simulate")?;
    let sec = &ctx.cfg.simulate;
    let sys_path = required(ctx.path(system, &sec.system), "--system")?;
    let sys = LtiSystem::from_json(&fs::read_to_string(&sys_path)?)?;
    let u = ctx.path(input, &sec.input_file).map(|p| read_signal(&p)).transpose()?;
    let traj = run_simulate(&sys, &sec.settings, u, ctx.seed)?;
    for (name, sig) in [("u", &traj.u), ("w", &traj.w), ("x", &traj.x), ("y", &traj.y)] {
        sig.write_csv(ctx.create(&format!("{name}.csv"))?)?;
    }
    println!("simulated {} steps into {}", traj.len(), ctx.out.display());
    Ok(())
}

fn cmd_montecarlo(common: &Common) -> Result<()> {
    let ctx = Context::new(common, "montecarlo-g")?;
    let mut settings = ctx.cfg.montecarlo.clone();
    settings.seed = ctx.seed;
    settings.trials = ctx.trials.unwrap_or(settings.trials);
    let rows = run_montecarlo_g(&settings)?;
    write_montecarlo_csv(&rows, ctx.create("montecarlo_g.csv")?)?;
    for r in &rows {
        println!(
            "n={} trials={} skipped={} mean_error={} mean_prediction_error={}",
            r.n, r.trials, r.skipped, r.mean_error, r.mean_prediction_error
        );
    }
    Ok(())
}

fn cmd_tracking(common: &Common) -> Result<()> {
    let ctx = Context::new(common, "tracking")?;
    let report = run_tracking(&ctx.cfg.tracking, ctx.seed, ctx.trials.unwrap_or(100))?;
    report.write_csv(ctx.create("tracking.csv")?)?;
    report.write_terms_csv(ctx.create("tracking_terms.csv")?)?;
    write_json(&ctx, "tracking_constants.json", &report.constants)?;
    let c = &report.constants;
    println!(
        "eta={} beta1={} beta2={} gamma3={} trials={}",
        c.eta, c.beta1, c.beta2, c.gamma3, report.trials
    );
    Ok(())
}

fn cmd_rideshare(common: &Common, graph: &Option<PathBuf>, demand: &Option<PathBuf>) -> Result<()> {
    let ctx = Context::new(common, "rideshare")?;
    let sec = &ctx.cfg.rideshare;
    let graph = ctx
        .path(graph, &sec.graph_file)
        .map(|p| RegionGraph::from_json(&fs::read_to_string(p)?))
        .transpose()?;
    let n_regions = graph
        .as_ref()
        .map(|g| g.n_regions())
        .unwrap_or(sec.settings.day.n_regions);
    let demand = ctx
        .path(demand, &sec.demand_file)
        .map(|p| -> Result<DemandProfile> {
            let file = File::open(&p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
            DemandProfile::read_csv(file, n_regions, sec.settings.day.slot_minutes)
        })
        .transpose()?;
    let scenario = sec.settings.scenario(graph, demand)?;
    let cmp = run_rideshare(&scenario, ctx.seed, ctx.trials.unwrap_or(100))?;
    cmp.write_csv(ctx.create("rideshare.csv")?)?;
    let (profit_a, profit_f) = cmp.mean_profit();
    let (rides_a, rides_f) = cmp.mean_accepted();
    let summary = serde_json::json!({
        "seeds": cmp.cumulative_profit.len(),
        "mean_cumulative_profit": {"adaptive": profit_a, "fixed": profit_f},
        "mean_accepted_rides": {"adaptive": rides_a, "fixed": rides_f},
        "max_mass_drift": cmp.mass_drift,
        "prices_feasible": cmp.prices_feasible,
    });
    write_json(&ctx, "rideshare_summary.json", &summary)?;
    println!("profit adaptive={profit_a} fixed={profit_f}; rides adaptive={rides_a} fixed={rides_f}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate {
            common,
            u,
            y,
            w,
            method,
            nu,
            block,
        } => cmd_estimate(common, u, y, w, method, *nu, *block),
        Command::Simulate { common, system, input } => cmd_simulate(common, system, input),
        Command::MontecarloG { common } => cmd_montecarlo(common),
        Command::Tracking { common } => cmd_tracking(common),
        Command::Rideshare { common, graph, demand } => cmd_rideshare(common, graph, demand),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
