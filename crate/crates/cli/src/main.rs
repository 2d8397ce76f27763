use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use jpdf::adapt::AutoSelectConfig;
use jpdf::harness::{emit_experiment, load_config, run_experiment, ExperimentConfig};
use jpdf::metrics::{complexity, complexity_auto, complexity_csv, Algorithm, ComplexityReport};

#[derive(Parser)]
#[command(name = "jpdf-sim", version, about = "Monte Carlo SER and complexity runs for MSER-JPDF receivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Like `run`, but the config must contain a [sweep] section.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Per-symbol operation counts of every receiver row.
    Complexity(ComplexityArgs),
}

#[derive(Args)]
struct RunOpts {
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs per point
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Receive antennas L
    #[arg(short = 'L', long, default_value_t = 40)]
    antennas: usize,
    /// Observation window P
    #[arg(short = 'P', long, default_value_t = 3)]
    window: usize,
    /// Reduced rank D
    #[arg(short = 'D', long, default_value_t = 10)]
    rank: usize,
    /// Preprocessor length I
    #[arg(short = 'I', long = "pre-len", default_value_t = 12)]
    pre_len: usize,
    /// Branches B
    #[arg(short = 'B', long, default_value_t = 4)]
    branches: usize,
    /// BPSK or M-QAM (e.g. 16-QAM)
    #[arg(short = 'c', long, default_value = "BPSK")]
    constellation: String,
    /// Also report the automatic-selection row for D in DMIN..=D, I in IMIN..=I
    #[arg(long, num_args = 2, value_names = ["DMIN", "IMIN"])]
    auto: Option<Vec<usize>>,
    /// Write complexity.csv there instead of printing
    #[arg(long)]
    out: Option<PathBuf>,
}

fn apply(cfg: &mut ExperimentConfig, opts: &RunOpts) -> Result<()> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(r) = opts.runs {
        cfg.runs = r;
    }
    if let Some(w) = opts.workers {
        cfg.workers = w;
    }
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(jpdf::Error::Validation(problems).into());
    }
    Ok(())
}

fn simulate(path: &Path, opts: &RunOpts, need_sweep: bool) -> Result<()> {
    let mut cfg = load_config(path)?;
    if need_sweep && cfg.sweep.is_none() {
        bail!("{} has no [sweep] section; use `run` for a single point", path.display());
    }
    apply(&mut cfg, opts)?;
    let res = run_experiment(&cfg)?;
    let files = emit_experiment(&res, &opts.out, &cfg)?;
    println!("{:<32} {:>10} {:>10} {:>10}", "receiver", res.axis.label(), "ser", "±95%");
    for s in res.summaries.iter().flatten() {
        println!("{:<32} {:>10} {:>10.5} {:>10.5}", s.label, s.x, s.ser, s.ci_halfwidth);
    }
    println!("wrote {}", files.ser.display());
    println!("wrote {}", files.sidecar.display());
    if let Some(l) = &files.learning {
        println!("wrote {}", l.display());
    }
    println!("wrote {}", files.summary.display());
    Ok(())
}

fn complexity_rows(a: &ComplexityArgs) -> Result<Vec<ComplexityReport>> {
    let c = jpdf::harness::config::parse_constellation(&a.constellation)?;
    let bpsk = c.is_bpsk();
    let rows = [
        Algorithm::FullRankLms,
        Algorithm::FullRankMser,
        Algorithm::MserJio,
        Algorithm::Eig,
        Algorithm::MserMswf,
        Algorithm::MserJpdf,
    ];
    let mut out = Vec::with_capacity(rows.len() + 1);
    for alg in rows {
        out.push(complexity(alg, a.antennas, a.window, a.rank, a.pre_len, a.branches, bpsk)?);
    }
    if let Some(v) = &a.auto {
        let auto = AutoSelectConfig {
            d_min: v[0],
            d_max: a.rank,
            i_min: v[1],
            i_max: a.pre_len,
        };
        out.push(complexity_auto(a.antennas, a.window, &auto, a.branches, bpsk)?);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, opts } => simulate(&config, &opts, false),
        Command::Sweep { config, opts } => simulate(&config, &opts, true),
        Command::Complexity(a) => {
            let csv = complexity_csv(&complexity_rows(&a)?);
            match &a.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    let p = dir.join("complexity.csv");
                    std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?;
                    println!("wrote {}", p.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
