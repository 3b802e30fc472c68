//! Run configuration: named distributions and domains plus a set of named
//! experiments referring to them.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decay::AlphaSchedule;
use crate::model::{CouplingSpec, PotentialDist};
use crate::stats::ExperimentConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub distributions: BTreeMap<String, PotentialDist>,
    #[serde(default)]
    pub domains: BTreeMap<String, DomainSpec>,
    pub experiments: BTreeMap<String, ExperimentSpec>,
}

/// Strip width, box lengths and the deterministic part of the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct DomainSpec {
    #[serde(rename = "W")]
    pub width: usize,
    pub l_grid: Vec<usize>,
    #[serde(rename = "E", default)]
    pub energy: f64,
    #[serde(default)]
    pub coupling: CouplingSpec,
}

fn default_reortho() -> usize {
    10
}

fn default_eps() -> f64 {
    0.5
}

fn default_beta() -> f64 {
    1.0
}

fn default_tail() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Schur factorization and resolvent identity on random strips.
    #[serde(rename_all = "camelCase")]
    Identities {
        instances: usize,
        #[serde(rename = "maxW")]
        max_width: usize,
        #[serde(rename = "maxL")]
        max_length: usize,
    },
    #[serde(rename_all = "camelCase")]
    Degrees {
        widths: Vec<usize>,
        lengths: Vec<usize>,
        draws: usize,
    },
    #[serde(rename_all = "camelCase")]
    Nonvanishing {
        #[serde(rename = "W")]
        width: usize,
        #[serde(rename = "L")]
        length: usize,
        #[serde(rename = "E", default)]
        energy: f64,
        #[serde(rename = "T")]
        threshold: f64,
        dist: String,
        trials: usize,
        scanned: usize,
        scans: usize,
    },
    #[serde(rename_all = "camelCase")]
    Logpot {
        measures: usize,
        grid_points: usize,
        m: usize,
    },
    VarianceScan {
        domain: String,
        dist: String,
        samples: usize,
    },
    #[serde(rename_all = "camelCase")]
    Wegner {
        domain: String,
        dist: String,
        samples: usize,
        t_grid: Vec<f64>,
    },
    Moments {
        domain: String,
        dist: String,
        samples: usize,
        orders: Vec<f64>,
    },
    /// `delta0` defaults to the fitted variance slope on the same domain.
    WeakDecay {
        domain: String,
        dist: String,
        samples: usize,
        #[serde(default)]
        delta0: Option<f64>,
    },
    /// A missing `dist` is the free operator.
    #[serde(rename_all = "camelCase")]
    Decay {
        #[serde(rename = "W")]
        width: usize,
        #[serde(rename = "L")]
        length: usize,
        #[serde(rename = "E", default)]
        energy: f64,
        #[serde(default)]
        dist: Option<String>,
        profiles: usize,
        #[serde(default = "default_tail")]
        tail_fraction: f64,
        /// Transfer steps for the cross-check, none to skip it.
        #[serde(default)]
        transfer_steps: Option<usize>,
    },
    #[serde(rename_all = "camelCase")]
    Lyapunov {
        widths: Vec<usize>,
        #[serde(rename = "E", default)]
        energy: f64,
        #[serde(default)]
        dist: Option<String>,
        steps: usize,
        #[serde(default = "default_reortho")]
        reortho: usize,
    },
    #[serde(rename_all = "camelCase")]
    Msa {
        l0: f64,
        m0: f64,
        #[serde(rename = "W")]
        width: usize,
        alpha: AlphaSchedule,
        target: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    #[serde(rename_all = "camelCase")]
    Cartan {
        samples: usize,
        c: f64,
        h_grid: Vec<f64>,
    },
    Sector {
        #[serde(rename = "K")]
        ks: Vec<usize>,
        samples: usize,
    },
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Identities { .. } => "identities",
            ExperimentSpec::Degrees { .. } => "degrees",
            ExperimentSpec::Nonvanishing { .. } => "nonvanishing",
            ExperimentSpec::Logpot { .. } => "logpot",
            ExperimentSpec::VarianceScan { .. } => "variance-scan",
            ExperimentSpec::Wegner { .. } => "wegner",
            ExperimentSpec::Moments { .. } => "moments",
            ExperimentSpec::WeakDecay { .. } => "weak-decay",
            ExperimentSpec::Decay { .. } => "decay",
            ExperimentSpec::Lyapunov { .. } => "lyapunov",
            ExperimentSpec::Msa { .. } => "msa",
            ExperimentSpec::Cartan { .. } => "cartan",
            ExperimentSpec::Sector { .. } => "sector",
        }
    }

    fn references(&self) -> (Option<&str>, Option<&str>) {
        match self {
            ExperimentSpec::VarianceScan { domain, dist, .. }
            | ExperimentSpec::Wegner { domain, dist, .. }
            | ExperimentSpec::Moments { domain, dist, .. }
            | ExperimentSpec::WeakDecay { domain, dist, .. } => (Some(domain), Some(dist)),
            ExperimentSpec::Nonvanishing { dist, .. } => (None, Some(dist)),
            ExperimentSpec::Decay { dist, .. } | ExperimentSpec::Lyapunov { dist, .. } => {
                (None, dist.as_deref())
            }
            _ => (None, None),
        }
    }

    /// Experiments on `log Σ`, which needs two columns.
    fn needs_sigma(&self) -> bool {
        matches!(
            self,
            ExperimentSpec::VarianceScan { .. }
                | ExperimentSpec::Moments { .. }
                | ExperimentSpec::WeakDecay { .. }
        )
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()
            .with_context(|| format!("validating {}", path.display()))?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical re-serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            );
        }
        for (name, d) in &self.distributions {
            d.validate()
                .with_context(|| format!("distribution `{name}`"))?;
        }
        for (name, d) in &self.domains {
            if d.width == 0 || d.l_grid.is_empty() || d.l_grid.contains(&0) {
                bail!("domain `{name}`: need W >= 1 and a non-empty grid of positive L");
            }
            d.coupling
                .build(d.width)
                .with_context(|| format!("domain `{name}`"))?;
        }
        for (name, e) in &self.experiments {
            let ctx = || format!("experiment `{name}`");
            let (domain, dist) = e.references();
            if let Some(d) = dist {
                if !self.distributions.contains_key(d) {
                    bail!("{}: unknown distribution `{d}`", ctx());
                }
            }
            if let Some(d) = domain {
                let Some(spec) = self.domains.get(d) else {
                    bail!("{}: unknown domain `{d}`", ctx());
                };
                if e.needs_sigma() {
                    if let Some(l) = spec.l_grid.iter().find(|&&l| l < 2) {
                        bail!(
                            "{}: domain `{d}` has L = {l}, so b = a and Σ is undefined",
                            ctx()
                        );
                    }
                }
            }
        }
        Ok(())
    }

    pub fn experiment_config(
        &self,
        domain: &str,
        dist: &str,
        samples: usize,
        seed: u64,
    ) -> ExperimentConfig {
        let d = &self.domains[domain];
        ExperimentConfig {
            width: d.width,
            l_grid: d.l_grid.clone(),
            energy: d.energy,
            coupling: d.coupling.clone(),
            dist: self.distributions[dist],
            samples,
            seed,
            output: None,
        }
    }

    pub fn distribution(&self, name: Option<&str>) -> Option<PotentialDist> {
        name.map(|n| self.distributions[n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "version": 1,
        "seed": 3,
        "distributions": {"u": {"kind": "uniform", "param": 1.0}},
        "domains": {"d": {"W": 1, "lGrid": [1, 4]}},
        "experiments": {"v": {"kind": "variance-scan", "domain": "d", "dist": "u", "samples": 10}}
    }"#;

    #[test]
    fn single_column_sigma_rejected_before_running() {
        let cfg: RunConfig = serde_json::from_str(SMALL).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("b = a"), "{err}");
    }

    #[test]
    fn unknown_keys_and_references_rejected() {
        assert!(serde_json::from_str::<RunConfig>(&SMALL.replace("\"seed\"", "\"sede\"")).is_err());
        let bad = SMALL
            .replace("\"dist\": \"u\"", "\"dist\": \"x\"")
            .replace("[1, 4]", "[4]");
        let cfg: RunConfig = serde_json::from_str(&bad).unwrap();
        assert!(cfg.validate().is_err());
        let missing_version = SMALL.replace("\"version\": 1,", "");
        assert!(serde_json::from_str::<RunConfig>(&missing_version).is_err());
    }

    #[test]
    fn hash_is_stable_under_reformatting() {
        let a: RunConfig = serde_json::from_str(SMALL).unwrap();
        let b: RunConfig = serde_json::from_str(&SMALL.replace('\n', " ")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
