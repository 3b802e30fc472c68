use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use stripgreen::decay::AlphaSchedule;
use stripgreen::harness::{
    emit_plots, run, ExperimentSpec, RunConfig, RunOptions, RunSummary, CONFIG_VERSION,
};
use stripgreen::model::PotentialDist;

#[derive(Parser)]
#[command(
    name = "stripgreen",
    version,
    about = "Green's-function fluctuation and localization experiments on the Anderson strip"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, env = "STRIPGREEN_OUT", default_value = "results")]
    out: PathBuf,
    /// Thread count; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Also write a gnuplot script per CSV.
    #[arg(long)]
    emit_plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments of a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated experiment names or kinds.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Decay profile and fitted rate of the Green's function.
    Decay {
        #[arg(long = "W")]
        width: usize,
        #[arg(long = "L")]
        length: usize,
        #[arg(long = "E", default_value_t = 0.0, allow_hyphen_values = true)]
        energy: f64,
        /// `uniform:h`, `cauchy:γ` or `free`.
        #[arg(long, default_value = "uniform:1")]
        dist: String,
        /// Number of profiles.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Lyapunov spectrum by transfer matrices.
    Lyapunov {
        /// One width or a comma-separated list.
        #[arg(long = "W", value_delimiter = ',')]
        widths: Vec<usize>,
        #[arg(long = "E", default_value_t = 0.0, allow_hyphen_values = true)]
        energy: f64,
        #[arg(long, default_value = "uniform:1")]
        dist: String,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Multi-scale rate recursion.
    Msa {
        #[arg(long)]
        l0: f64,
        #[arg(long)]
        m0: f64,
        #[arg(long = "W", default_value_t = 1)]
        width: usize,
        /// One exponent or a comma-separated schedule.
        #[arg(long, default_value = "2")]
        alpha: String,
        #[arg(long)]
        target: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Gnuplot scripts for an existing results directory.
    Plots { dir: PathBuf },
}

fn parse_dist(s: &str) -> anyhow::Result<Option<PotentialDist>> {
    if s == "free" {
        return Ok(None);
    }
    let (kind, p) = s
        .split_once(':')
        .with_context(|| format!("distribution `{s}`: expected kind:param or free"))?;
    let p: f64 = p
        .parse()
        .with_context(|| format!("distribution parameter `{p}`"))?;
    let d = match kind {
        "uniform" => PotentialDist::Uniform(p),
        "cauchy" => PotentialDist::Cauchy(p),
        _ => bail!("unknown distribution kind `{kind}`"),
    };
    d.validate()?;
    Ok(Some(d))
}

fn parse_alpha(s: &str) -> anyhow::Result<AlphaSchedule> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("alpha schedule `{s}`"))?;
    Ok(match v.as_slice() {
        [a] => AlphaSchedule::Constant(*a),
        _ => AlphaSchedule::List(v),
    })
}

fn single(name: &str, dist: Option<PotentialDist>, seed: u64, spec: ExperimentSpec) -> RunConfig {
    RunConfig {
        version: CONFIG_VERSION,
        seed,
        distributions: dist.map(|d| ("dist".to_string(), d)).into_iter().collect(),
        domains: BTreeMap::new(),
        experiments: BTreeMap::from([(name.to_string(), spec)]),
    }
}

fn options(config: RunConfig, seed: Option<u64>, only: Vec<String>, c: Common) -> RunOptions {
    RunOptions {
        config,
        seed,
        workers: c.workers,
        out: c.out,
        emit_plot: c.emit_plot,
        only,
    }
}

fn report(s: &RunSummary) {
    for name in &s.ran {
        let e = &s.manifest.experiments[name];
        let status = if e.passed { "PASS" } else { "FAIL" };
        println!("{status} {name} ({}, {:.2} s)", e.kind, e.wall_seconds);
    }
    for f in s.failures() {
        eprintln!("failed check: {f}");
    }
    if let Some(p) = &s.plots {
        for m in &p.missing {
            eprintln!("missing CSV skipped: {m}");
        }
        for w in &p.warnings {
            eprintln!("warning: {w}");
        }
    }
}

fn main_inner() -> anyhow::Result<bool> {
    let opts = match Cli::parse().command {
        Command::Run {
            config,
            seed,
            only,
            common,
        } => options(RunConfig::load(&config)?, seed, only, common),
        Command::Decay {
            width,
            length,
            energy,
            dist,
            samples,
            seed,
            common,
        } => {
            let d = parse_dist(&dist)?;
            let spec = ExperimentSpec::Decay {
                width,
                length,
                energy,
                dist: d.map(|_| "dist".to_string()),
                profiles: samples,
                tail_fraction: 0.5,
                transfer_steps: None,
            };
            options(single("decay", d, seed, spec), None, vec![], common)
        }
        Command::Lyapunov {
            widths,
            energy,
            dist,
            steps,
            seed,
            common,
        } => {
            let d = parse_dist(&dist)?;
            let spec = ExperimentSpec::Lyapunov {
                widths,
                energy,
                dist: d.map(|_| "dist".to_string()),
                steps,
                reortho: 10,
            };
            options(single("lyapunov", d, seed, spec), None, vec![], common)
        }
        Command::Msa {
            l0,
            m0,
            width,
            alpha,
            target,
            common,
        } => {
            let spec = ExperimentSpec::Msa {
                l0,
                m0,
                width,
                alpha: parse_alpha(&alpha)?,
                target,
                eps: 0.5,
                beta: 1.0,
            };
            options(single("msa", None, 0, spec), None, vec![], common)
        }
        Command::Plots { dir } => {
            let p = emit_plots(&dir)?;
            for s in &p.scripts {
                println!("{}", s.display());
            }
            for m in &p.missing {
                eprintln!("missing CSV skipped: {m}");
            }
            for w in &p.warnings {
                eprintln!("warning: {w}");
            }
            return Ok(true);
        }
    };
    let summary = run(&opts)?;
    report(&summary);
    Ok(summary.passed())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
