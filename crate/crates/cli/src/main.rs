use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsimle::runner::{self, ExperimentConfig, TheorySuiteConfig};
use rsimle::trainer::Objective;
use rsimle::Error;

/// IMLE and RS-IMLE experiments on toy point sets.
#[derive(Parser)]
#[command(name = "rsimle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one generator per seed and write metrics, curves and plots.
    Train(RunArgs),
    /// Train RS-IMLE at every epsilon of `sweep.epsilons` for every seed.
    Sweep(RunArgs),
    /// Minimum-distance laws, Monte Carlo overlays and KS checks.
    Theory(TheoryArgs),
    /// Re-render the SVG plots of a finished run from its CSV files.
    Plot(DirArgs),
    /// Re-evaluate the saved generators of a finished run.
    Eval(DirArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Rejection radius, in the units of `trainer.epsilon_units`.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_objective)]
    objective: Option<Objective>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` assignments applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value = "out/theory")]
    out: PathBuf,
    /// Monte Carlo trials per m.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DirArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    out: PathBuf,
    /// Experiment file supplying `metrics.*` for `eval`; defaults to the run's `config.txt`.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(args: &RunArgs) -> rsimle::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file_unchecked(path)?,
        None => ExperimentConfig::default(),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seeds) = &args.seed {
        cfg.seeds = seeds.clone();
    }
    if let Some(e) = args.epsilon {
        cfg.trainer.epsilon = e;
    }
    if let Some(o) = args.objective {
        cfg.trainer.objective = o;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::DegenerateEpsilon { .. } => 3,
        _ => 1,
    }
}

fn train(args: &RunArgs) -> rsimle::Result<()> {
    let cfg = load_config(args)?;
    let summary = runner::run(&cfg)?;
    println!("seed\tobjective\tfrechet\tprecision\trecall\tsample_to_data");
    for s in &summary.seeds {
        let m = &s.metrics;
        println!(
            "{}\t{}\t{:.5}\t{:.3}\t{:.3}\t{:.5}",
            s.seed, s.objective, m.frechet, m.precision, m.recall, m.mean_sample_to_data
        );
    }
    println!("wrote {}", summary.out_dir.display());
    Ok(())
}

fn sweep(args: &RunArgs) -> rsimle::Result<()> {
    let cfg = load_config(args)?;
    let summary = runner::sweep(&cfg)?;
    println!("seed\tepsilon\tmean_acceptance\trecall\tsample_to_data");
    for p in &summary.points {
        println!(
            "{}\t{}\t{:.4}\t{:.3}\t{:.5}",
            p.seed, p.epsilon, p.mean_acceptance_rate, p.metrics.recall, p.metrics.mean_sample_to_data
        );
    }
    println!("wrote {}", summary.sweep_csv.display());
    Ok(())
}

fn theory(args: &TheoryArgs) -> rsimle::Result<bool> {
    let cfg = TheorySuiteConfig {
        trials: args.trials,
        seed: args.seed,
        ..TheorySuiteConfig::default()
    };
    let report = runner::run_theory_suite(&args.out, &cfg)?;
    println!("m\tks\tcritical\tpass");
    for r in &report.ks {
        println!("{}\t{:.5}\t{:.5}\t{}", r.m, r.statistic, r.critical, r.pass);
    }
    println!("wrote {}", args.out.display());
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Theory(a) => theory(a),
        Command::Plot(a) => runner::plot_dir(&a.out).map(|paths| {
            for p in paths {
                println!("wrote {}", p.display());
            }
            true
        }),
        Command::Eval(a) => {
            let path = a.config.clone().unwrap_or_else(|| a.out.join("config.txt"));
            let metrics = ExperimentConfig::from_file_unchecked(&path).map(|c| c.metrics);
            metrics.and_then(|m| runner::eval_dir(&a.out, &m)).map(|(path, rows)| {
                for (s, m) in rows {
                    println!("{s}\tfrechet {:.5}\trecall {:.3}", m.frechet, m.recall);
                }
                println!("wrote {}", path.display());
                true
            })
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: KS check failed for at least one m");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
