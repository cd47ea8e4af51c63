use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use dnbq::harness::{
    emit_report, run_batch, run_experiment, summarize_csv_file, to_csv, ExperimentConfig,
    FairnessReport, Format, Mode,
};
use dnbq::lincheck::{
    check, random_history_campaign, CampaignConfig, CounterSpec, History, QueueSpec, RegisterSpec,
    Target,
};
use dnbq::Algorithm;

#[derive(Parser)]
#[command(
    version,
    about = "Queue linearizability checks and fairness benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SpecName {
    Queue,
    Counter,
    Register,
}

#[derive(Subcommand)]
enum Command {
    /// Check a recorded history for linearizability.
    Check {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "queue")]
        spec: SpecName,
    },
    /// Check randomized concurrent histories under the controlled scheduler.
    Campaign {
        #[arg(long = "impl")]
        target: Target,
        /// Process count, `N` or `LO..=HI`.
        #[arg(long, default_value = "2..=4")]
        procs: String,
        /// Operations per history, `N` or `LO..=HI`.
        #[arg(long, default_value = "6..=12")]
        ops: String,
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Write failing histories into this directory, one file per seed.
        #[arg(long)]
        failures: Option<PathBuf>,
        /// Stop after this many failures.
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Run one timed fairness experiment.
    Bench {
        #[arg(long = "impl")]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 2)]
        enq: usize,
        #[arg(long, default_value_t = 2)]
        deq: usize,
        /// Per-process slowdown factors, enqueuers first.
        #[arg(long, value_delimiter = ',')]
        slowdown: Vec<u32>,
        #[arg(long, default_value_t = 1000)]
        mu_us: u64,
        #[arg(long, default_value_t = 30.0)]
        secs: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "both")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Two enqueuers and two dequeuers with one of each slowed by k, over a range of k.
    Sweep {
        #[arg(long = "impl")]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 2)]
        k_from: u32,
        #[arg(long, default_value_t = 20)]
        k_to: u32,
        #[arg(long, default_value_t = 1)]
        k_step: u32,
        #[arg(long, default_value_t = 30.0)]
        secs: f64,
        #[arg(long, default_value_t = 1000)]
        mu_us: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Experiments run at the same time.
        #[arg(long, default_value_t = 4)]
        parallel: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize CSV reports written by `bench` or `sweep`.
    Summarize { file: PathBuf },
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<usize>, String> {
    let bad = || format!("bad range `{s}`");
    match s.split_once("..=") {
        Some((lo, hi)) => Ok(lo.parse().map_err(|_| bad())?..=hi.parse().map_err(|_| bad())?),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            Ok(n..=n)
        }
    }
}

fn finish(report: &FairnessReport, out: Option<&PathBuf>, format: Format) -> Result<bool, String> {
    match out {
        Some(path) => emit_report(report, path, format).map_err(|e| e.to_string())?,
        None => match format {
            Format::Csv => print!("{}", to_csv(report).map_err(|e| e.to_string())?),
            Format::Json => print!(
                "{}",
                dnbq::harness::to_json(report).map_err(|e| e.to_string())?
            ),
        },
    }
    if !report.audit.is_clean() {
        eprintln!("queue audit failed: {:?}", report.audit);
    }
    Ok(report.audit.is_clean())
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Check { file, spec } => {
            let text =
                std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let history = History::parse(&text).map_err(|e| format!("{}: {e}", file.display()))?;
            let verdict = match spec {
                SpecName::Queue => check(&history, &QueueSpec),
                SpecName::Counter => check(&history, &CounterSpec),
                SpecName::Register => check(&history, &RegisterSpec),
            }
            .map_err(|e| e.to_string())?;
            match &verdict.witness {
                Some(order) => println!("linearizable; order {order:?}"),
                None => println!("not linearizable"),
            }
            Ok(verdict.linearizable)
        }
        Command::Campaign {
            target,
            procs,
            ops,
            seeds,
            first_seed,
            failures,
            stop_after,
        } => {
            let mut cfg = CampaignConfig::new(
                target,
                parse_range(&procs)?,
                parse_range(&ops)?,
                first_seed..first_seed + seeds,
            );
            cfg.stop_after = stop_after;
            let report = random_history_campaign(&cfg);
            println!("{report}");
            for f in &report.failures {
                println!("seed {}: {:?}", f.seed, f.kind);
                if let Some(dir) = &failures {
                    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
                    let path = dir.join(format!("{target}-seed-{}.history", f.seed));
                    std::fs::write(&path, f.to_string()).map_err(|e| e.to_string())?;
                }
            }
            Ok(report.is_clean())
        }
        Command::Bench {
            algorithm,
            enq,
            deq,
            slowdown,
            mu_us,
            secs,
            seed,
            mode,
            out,
            format,
        } => {
            let cfg = ExperimentConfig::new(algorithm, enq, deq)
                .with_slowdown(slowdown)
                .with_base_delay(Duration::from_micros(mu_us))
                .with_duration(Duration::from_secs_f64(secs))
                .with_seed(seed)
                .with_mode(mode);
            let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
            finish(&report, out.as_ref(), format)
        }
        Command::Sweep {
            algorithm,
            k_from,
            k_to,
            k_step,
            secs,
            mu_us,
            seed,
            parallel,
            out,
        } => {
            let configs: Vec<_> = (k_from..=k_to)
                .step_by(k_step.max(1) as usize)
                .map(|k| {
                    ExperimentConfig::slow_pair(algorithm, k)
                        .with_base_delay(Duration::from_micros(mu_us))
                        .with_duration(Duration::from_secs_f64(secs))
                        .with_seed(seed)
                })
                .collect();
            let mut text = String::new();
            let mut clean = true;
            for r in run_batch(&configs, parallel) {
                let r = r.map_err(|e| e.to_string())?;
                clean &= r.audit.is_clean();
                text += &to_csv(&r).map_err(|e| e.to_string())?;
            }
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| e.to_string())?,
                None => print!("{text}"),
            }
            Ok(clean)
        }
        Command::Summarize { file } => {
            let summary = summarize_csv_file(&file).map_err(|e| e.to_string())?;
            print!("{}", summary.render());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
