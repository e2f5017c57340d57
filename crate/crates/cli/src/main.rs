use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spb_maxsat::analysis::{weight_dynamics, write_csv};
use spb_maxsat::harness::{self, BenchOptions, BkcMap, LabeledConfig};
use spb_maxsat::init::InitMode;
use spb_maxsat::protocol::{solve_to_protocol, write_oracle};
use spb_maxsat::search::{Preset, SolverConfig};
use spb_maxsat::weighting::{WeightingMode, DEFAULT_DECAY_FACTOR, DEFAULT_DECAY_THRESHOLD};
use spb_maxsat::{brute_force_opt, parse_wcnf_file};

#[derive(Parser)]
#[command(
    name = "spb-maxsat",
    version,
    about = "Local search for (weighted) partial MaxSAT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a WCNF instance, printing MSE-style o/s/v lines.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Exact optimum by enumeration (at most 24 variables).
    Oracle { file: PathBuf },
    /// Run solver configurations over a directory of instances.
    Bench(BenchArgs),
    /// Tabulate the growth of the SPB weight increments as CSV.
    Dynamics {
        #[arg(long, default_value_t = 1.001)]
        delta: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Debug)]
struct SolverArgs {
    /// Wall-clock limit in seconds (ignored when --max-flips is given).
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Stop after this many flips; makes runs deterministic.
    #[arg(long)]
    max_flips: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// BMS sample count.
    #[arg(long)]
    k: Option<usize>,
    /// Hard clause weight increment.
    #[arg(long)]
    h_inc: Option<f64>,
    /// Proportion for the adaptive SPB weight update.
    #[arg(long)]
    delta: Option<f64>,
    /// spb | constant | all-adaptive
    #[arg(long, default_value = "spb")]
    mode: WeightingMode,
    /// auto | pms | wpms
    #[arg(long, default_value = "auto")]
    preset: Preset,
    /// decimation | random
    #[arg(long, default_value = "decimation")]
    init: InitMode,
    #[arg(long, default_value_t = DEFAULT_DECAY_THRESHOLD)]
    decay_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_DECAY_FACTOR)]
    decay_factor: f64,
}

impl SolverArgs {
    fn to_config(&self) -> SolverConfig {
        SolverConfig {
            preset: self.preset,
            k: self.k,
            h_inc: self.h_inc,
            delta: self.delta,
            mode: self.mode,
            decay_threshold: self.decay_threshold,
            decay_factor: self.decay_factor,
            init: self.init,
            cutoff_seconds: Some(self.time_limit),
            max_flips: self.max_flips,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// File of `<instance> <best known cost>` lines.
    #[arg(long)]
    bkc: Option<PathBuf>,
    /// Solver configurations as `name=flags`, separated by `;` or repeated,
    /// e.g. `--config "spb=;d1=--mode constant"`.
    #[arg(long = "config")]
    configs: Vec<String>,
    /// Directory receiving report.json and runs.jsonl.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Wrapper for parsing the flag string of a `--config` entry.
#[derive(Parser)]
#[command(no_binary_name = true)]
struct ConfigFlags {
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_configs(specs: &[String]) -> Result<Vec<LabeledConfig>> {
    let mut configs = Vec::new();
    for entry in specs.iter().flat_map(|s| s.split(';')) {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let (name, flags) = entry.split_once('=').unwrap_or((entry, ""));
        let name = name.trim();
        if name.is_empty() {
            bail!("configuration `{entry}` has no name");
        }
        if configs.iter().any(|c: &LabeledConfig| c.label == name) {
            bail!("duplicate configuration name `{name}`");
        }
        let parsed = ConfigFlags::try_parse_from(flags.split_whitespace())
            .with_context(|| format!("in configuration `{name}`"))?;
        configs.push(LabeledConfig {
            label: name.to_string(),
            config: parsed.solver.to_config(),
        });
    }
    if configs.is_empty() {
        configs.push(LabeledConfig {
            label: "spb-maxsat".into(),
            config: SolverConfig::default(),
        });
    }
    Ok(configs)
}

fn run_solve(file: &PathBuf, args: &SolverArgs) -> Result<()> {
    let formula =
        parse_wcnf_file(file).with_context(|| format!("cannot read {}", file.display()))?;
    eprintln!(
        "c {} variables, {} hard and {} soft clauses",
        formula.num_vars(),
        formula.num_hard(),
        formula.num_soft()
    );
    let cfg = args.to_config();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = solve_to_protocol(&formula, &cfg, &mut out)?;
    let rate = if result.elapsed > 0.0 {
        result.flips as f64 / result.elapsed
    } else {
        0.0
    };
    eprintln!(
        "c preset {} k {} h_inc {} delta {} mode {}",
        result.config.preset,
        result.config.k,
        result.config.weighting.h_inc,
        result.config.weighting.delta,
        result.config.weighting.mode
    );
    for imp in &result.trace {
        eprintln!(
            "c improvement step {} time {:.3}s cost {}",
            imp.step, imp.elapsed, imp.cost
        );
    }
    eprintln!(
        "c {} flips in {:.3}s ({:.0} flips/s), stopped by {:?}",
        result.flips, result.elapsed, rate, result.termination
    );
    Ok(())
}

fn run_oracle(file: &PathBuf) -> Result<()> {
    let formula =
        parse_wcnf_file(file).with_context(|| format!("cannot read {}", file.display()))?;
    let optimum = brute_force_opt(&formula)?;
    write_oracle(&mut io::stdout().lock(), &optimum)?;
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let configs = parse_configs(&args.configs)?;
    let bkc = match &args.bkc {
        Some(path) => harness::load_bkc(path)?,
        None => BkcMap::new(),
    };
    let options = BenchOptions {
        time_limit: args.time_limit,
        jobs: args.jobs,
    };
    let outcome = harness::run_benchmark(&args.dir, &configs, &options, &bkc)?;
    harness::write_outputs(&args.out, &outcome)?;
    print!("{}", outcome.report.render_table());
    Ok(())
}

fn run_dynamics(delta: f64, steps: u64, out: Option<&PathBuf>) -> Result<()> {
    if delta.is_nan() || delta < 1.0 {
        bail!("--delta must be at least 1");
    }
    if steps == 0 {
        bail!("--steps must be at least 1");
    }
    let rows = weight_dynamics(delta, steps);
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { file, solver } => run_solve(file, solver),
        Command::Oracle { file } => run_oracle(file),
        Command::Bench(args) => run_bench(args),
        Command::Dynamics { delta, steps, out } => run_dynamics(*delta, *steps, out.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
