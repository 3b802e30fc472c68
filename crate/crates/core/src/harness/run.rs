//! Deterministic execution of a run config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::output::{csv_bytes, write_atomic, Check, ManifestEntry, RunManifest, MANIFEST_FILE};
use super::plots::{emit_plots, PlotReport};
use super::runners::run_experiment;
use crate::rng::derive_seed;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: RunConfig,
    /// Replaces the config's master seed.
    pub seed: Option<u64>,
    /// Thread count; `None` uses all cores. Never changes results.
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub emit_plot: bool,
    /// Experiment names or kinds; empty runs everything.
    pub only: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub ran: Vec<String>,
    pub plots: Option<PlotReport>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.ran.iter().all(|n| self.manifest.experiments[n].passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.manifest
            .failures()
            .into_iter()
            .filter(|f| self.ran.iter().any(|n| f.starts_with(&format!("{n}: "))))
            .collect()
    }
}

/// Seed of a named experiment, independent of which others are run.
pub fn experiment_seed(master: u64, name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    let mut tag = [0u8; 8];
    tag.copy_from_slice(&digest[..8]);
    derive_seed(master, &[u64::from_le_bytes(tag)])
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn select(cfg: &RunConfig, only: &[String]) -> anyhow::Result<Vec<String>> {
    if only.is_empty() {
        return Ok(cfg.experiments.keys().cloned().collect());
    }
    for o in only {
        if !cfg.experiments.iter().any(|(n, e)| n == o || e.kind() == o) {
            bail!("--only `{o}` matches no experiment name or kind in the config");
        }
    }
    Ok(cfg
        .experiments
        .iter()
        .filter(|(n, e)| only.iter().any(|o| o == *n || o == e.kind()))
        .map(|(n, _)| n.clone())
        .collect())
}

fn run_one(cfg: &RunConfig, name: &str, master: u64, out: &Path) -> anyhow::Result<ManifestEntry> {
    let spec = &cfg.experiments[name];
    let seed = experiment_seed(master, name);
    let t0 = Instant::now();
    let (files, checks) = match run_experiment(cfg, spec, seed) {
        Ok(res) => {
            let file = format!("{name}.csv");
            write_atomic(&out.join(&file), &csv_bytes(&res.rows)?)?;
            (vec![file], res.checks)
        }
        Err(e) => (vec![], vec![Check::new("completed", false, e.to_string())]),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(ManifestEntry {
        kind: spec.kind().to_string(),
        seed,
        files,
        checks,
        passed,
        wall_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Runs the selected experiments, writes `<name>.csv` for each and merges
/// the results into `manifest.json`. Entries of experiments not rerun are
/// kept when the config and seed are unchanged.
pub fn run(opts: &RunOptions) -> anyhow::Result<RunSummary> {
    let cfg = &opts.config;
    cfg.validate()?;
    let master = opts.seed.unwrap_or(cfg.seed);
    let names = select(cfg, &opts.only)?;
    std::fs::create_dir_all(&opts.out)
        .with_context(|| format!("creating {}", opts.out.display()))?;

    let started = unix_now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build()?;
    let entries: Vec<anyhow::Result<ManifestEntry>> = pool.install(|| {
        names
            .par_iter()
            .map(|n| run_one(cfg, n, master, &opts.out))
            .collect()
    });

    let hash = cfg.hash();
    let mut experiments = BTreeMap::new();
    if !opts.only.is_empty() && opts.out.join(MANIFEST_FILE).exists() {
        let old = RunManifest::load(&opts.out)?;
        if old.config_hash == hash && old.seed == master {
            experiments = old
                .experiments
                .into_iter()
                .filter(|(n, _)| cfg.experiments.contains_key(n))
                .collect();
        }
    }
    for (n, e) in names.iter().zip(entries) {
        experiments.insert(n.clone(), e?);
    }
    let manifest = RunManifest {
        config_hash: hash,
        seed: master,
        versions: BTreeMap::from([(
            env!("CARGO_PKG_NAME").to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        )]),
        started,
        finished: unix_now(),
        experiments,
    };
    manifest.save(&opts.out)?;
    let plots = if opts.emit_plot {
        Some(emit_plots(&opts.out)?)
    } else {
        None
    };
    Ok(RunSummary {
        manifest,
        ran: names,
        plots,
    })
}
