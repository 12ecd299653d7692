use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sprinklers::analysis::Orientation;
use sprinklers::experiment::{
    compute_bound_table, create_output, default_bound_loads, default_delay_sizes, delay_analysis, run_configs,
    write_bound_csv, write_delay_csv, write_sim_csv, ExperimentPlan, DEFAULT_BOUND_SIZES,
};

#[derive(Parser)]
#[command(name = "sprinklers", version, about = "Sprinklers switch simulator and stability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation sweep and write sim_results.csv.
    RunSim(RunSim),
    /// Tabulate the per-queue overload bound and write bound_table.csv.
    ComputeBound(ComputeBound),
    /// Expected queue length of the cycle-level chain; writes delay_analysis.csv.
    DelayAnalysis(DelayAnalysis),
}

#[derive(Args)]
struct RunSim {
    /// Experiment plan in TOML.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled plan: paper-fig5 (uniform) or paper-fig6 (diagonal).
    #[arg(long)]
    preset: Option<String>,
    /// Run every grid point with this single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Run every grid point with seeds 1..=K.
    #[arg(long, value_name = "K")]
    seeds: Option<u64>,
    /// Measured slots per run (after warm-up).
    #[arg(long)]
    duration: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Write a per-slot event log for every run into <out>/traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ComputeBound {
    /// Switch sizes (columns).
    #[arg(long = "n", value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Total loads (rows).
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct DelayAnalysis {
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    /// Switch sizes.
    #[arg(long = "n", value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Also solve the chain with the transition probabilities swapped.
    #[arg(long)]
    audit_orientation: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn run_sim(args: RunSim) -> Result<ExitCode> {
    let mut plan = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentPlan::from_toml(&text)?
        }
        (None, Some(name)) => ExperimentPlan::preset(name)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(seed) = args.seed {
        plan.set_seeds(&[seed]);
    }
    if let Some(k) = args.seeds {
        plan.set_seeds(&(1..=k).collect::<Vec<_>>());
    }
    if let Some(d) = args.duration {
        plan.set_duration(d);
    }
    let configs = plan.configs()?;
    let trace_dir = args.trace.then(|| args.out.join("traces"));
    if let Some(dir) = &trace_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let (path, file) = create_output(&args.out, "sim_results.csv")?;

    let start = Instant::now();
    eprintln!("running {} simulations", configs.len());
    let outcome = run_configs(&configs, trace_dir.as_deref());
    write_sim_csv(&outcome.rows, file)?;
    eprintln!("wrote {} rows to {} in {:.1?}", outcome.rows.len(), path.display(), start.elapsed());

    for f in &outcome.failures {
        let c = &f.config;
        eprintln!(
            "FAILED {} n={} load={} {} seed={}: {}",
            c.policy, c.n_ports, c.traffic.load, c.traffic.dest_dist, c.seed, f.error
        );
    }
    Ok(if outcome.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn compute_bound(args: ComputeBound) -> Result<ExitCode> {
    let sizes = if args.sizes.is_empty() { DEFAULT_BOUND_SIZES.to_vec() } else { args.sizes };
    let loads = if args.rho.is_empty() { default_bound_loads() } else { args.rho };
    let table = compute_bound_table(&sizes, &loads);
    let (path, file) = create_output(&args.out, "bound_table.csv")?;
    write_bound_csv(&table, file)?;
    write_bound_csv(&table, std::io::stdout().lock())?;
    eprintln!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn delay(args: DelayAnalysis) -> Result<ExitCode> {
    let sizes = if args.sizes.is_empty() { default_delay_sizes() } else { args.sizes };
    let mut orientations = vec![Orientation::ArrivalConsistent];
    if args.audit_orientation {
        orientations.push(Orientation::AsPrinted);
    }
    let rows = delay_analysis(args.rho, &sizes, &orientations)?;
    let (path, file) = create_output(&args.out, "delay_analysis.csv")?;
    write_delay_csv(&rows, file)?;
    write_delay_csv(&rows, std::io::stdout().lock())?;
    eprintln!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunSim(a) => run_sim(a),
        Command::ComputeBound(a) => compute_bound(a),
        Command::DelayAnalysis(a) => delay(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
