use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polyxport::harness::config::FlightReport;
use polyxport::harness::{configure_threads, emit, load_config, run, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "polyxport",
    version,
    about = "Polycrystal Lorentz gas experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 gives reference single-threaded runs).
    #[arg(long, env = "POLYXPORT_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides the sample count.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Stationarity,
    Ncollision,
    Marginals,
}

#[derive(Subcommand)]
enum Command {
    /// Tables of the single-medium kernels.
    Kernels(Common),
    /// Ψ-family values along one ray.
    Psi(Common),
    /// Microscopic free paths for each radius. `--out` may name a `.csv`
    /// file for the samples; the other outputs go next to it.
    Microsim {
        #[command(flatten)]
        args: SampleArgs,
        /// Overrides the radius schedule (comma separated, decreasing).
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
    },
    /// The limiting flight process.
    Flight {
        #[command(flatten)]
        common: Common,
        /// Overrides the particle count
        #[arg(long)]
        particles: Option<usize>,
        /// Overrides the final time
        #[arg(long)]
        time: Option<f64>,
        /// Which statistics to report
        #[arg(long, value_enum)]
        report: Option<ReportArg>,
    },
    /// Free path convergence study.
    Freepath(SampleArgs),
    /// Joint (free path, impact) convergence study.
    Transition(SampleArgs),
    /// Poisson baseline checks.
    Poisson(SampleArgs),
    /// Stationarity of the initial law under the flight.
    Stationarity {
        #[command(flatten)]
        common: Common,
        /// Overrides the particle count
        #[arg(long)]
        particles: Option<usize>,
        /// Overrides the final time
        #[arg(long)]
        time: Option<f64>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    use ExperimentKind as K;
    let mut radii = None;
    let (common, accepted, samples, time, report): (
        Common,
        Vec<K>,
        Option<usize>,
        Option<f64>,
        Option<ReportArg>,
    ) = match cli.command {
        Command::Kernels(c) => (c, vec![K::KernelTables], None, None, None),
        Command::Psi(c) => (c, vec![K::Psi], None, None, None),
        Command::Microsim { args, r } => {
            radii = r;
            (args.common, vec![K::Microsim], args.samples, None, None)
        }
        Command::Freepath(a) => (a.common, vec![K::Freepath], a.samples, None, None),
        Command::Transition(a) => (a.common, vec![K::Transition], a.samples, None, None),
        Command::Poisson(a) => (a.common, vec![K::PoissonBaseline], a.samples, None, None),
        Command::Flight {
            common,
            particles,
            time,
            report,
        } => (
            common,
            vec![K::Flight, K::Stationarity],
            particles,
            time,
            report,
        ),
        Command::Stationarity {
            common,
            particles,
            time,
        } => (common, vec![K::Stationarity], particles, time, None),
    };
    if let Some(t) = common.threads {
        configure_threads(t).context("configuring worker threads")?;
    }
    let mut cfg = load_config(&common.config, &accepted, common.seed)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(n) = samples {
        cfg.samples = n;
    }
    if let Some(r) = radii {
        cfg.r_schedule = r;
    }
    if cfg.experiment == K::Microsim {
        cfg.output.samples = true;
    }
    if let Some(t) = time {
        cfg.flight.time = t;
    }
    if let Some(r) = report {
        cfg.experiment = K::Flight;
        cfg.flight.report = match r {
            ReportArg::Stationarity => FlightReport::Stationarity,
            ReportArg::Ncollision => FlightReport::Ncollision,
            ReportArg::Marginals => FlightReport::Marginals,
        };
    }
    cfg.validate()?;
    let report = run(&cfg)?;
    let samples_file = common.out.extension().is_some_and(|e| e == "csv");
    let dir = match common.out.parent() {
        Some(p) if samples_file && !p.as_os_str().is_empty() => p.to_path_buf(),
        _ if samples_file => PathBuf::from("."),
        _ => common.out.clone(),
    };
    let mut files = emit(&report, &dir).with_context(|| format!("writing to {}", dir.display()))?;
    if samples_file {
        let from = dir.join("microsim.csv");
        if let Some(f) = files.iter_mut().find(|f| **f == from) {
            std::fs::rename(&from, &common.out)
                .with_context(|| format!("writing {}", common.out.display()))?;
            *f = common.out.clone();
        }
    }
    let verdicts = &report.summary["verdicts"];
    if let Some(map) = verdicts.as_object() {
        for (name, ok) in map {
            println!(
                "{} {name}",
                if ok.as_bool() == Some(true) {
                    "PASS"
                } else {
                    "FAIL"
                }
            );
        }
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(report.passed())
}
