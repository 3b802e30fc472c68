//! CSV tables, pass/fail checks and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// One long-format result line. Columns that do not apply stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub width: Option<usize>,
    pub length: Option<usize>,
    pub statistic: String,
    pub param: Option<f64>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: Option<usize>,
    pub excluded_fraction: Option<f64>,
}

impl Row {
    pub fn new(statistic: &str, value: f64) -> Self {
        Row {
            width: None,
            length: None,
            statistic: statistic.to_string(),
            param: None,
            value,
            stderr: None,
            n: None,
            excluded_fraction: None,
        }
    }

    pub fn w(mut self, w: usize) -> Self {
        self.width = Some(w);
        self
    }

    pub fn l(mut self, l: usize) -> Self {
        self.length = Some(l);
        self
    }

    pub fn param(mut self, p: f64) -> Self {
        self.param = Some(p);
        self
    }

    pub fn stderr(mut self, s: f64) -> Self {
        self.stderr = Some(s);
        self
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn excluded(mut self, f: f64) -> Self {
        self.excluded_fraction = Some(f);
        self
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "W",
    "L",
    "statistic",
    "param",
    "value",
    "stderr",
    "n",
    "excludedFraction",
];

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn csv_bytes(rows: &[Row]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            opt(r.width, |v| v.to_string()),
            opt(r.length, |v| v.to_string()),
            r.statistic.clone(),
            opt(r.param, format_float),
            format_float(r.value),
            opt(r.stderr, format_float),
            opt(r.n, |v| v.to_string()),
            opt(r.excluded_fraction, format_float),
        ])?;
    }
    Ok(w.into_inner()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    pub fn row(&mut self, r: Row) {
        self.rows.push(r);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestEntry {
    pub kind: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
    pub experiments: BTreeMap<String, ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.experiments.values().all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.experiments
            .iter()
            .flat_map(|(name, e)| {
                e.checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(move |c| format!("{name}: {} ({})", c.name, c.detail))
            })
            .collect()
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let p = dir.join(MANIFEST_FILE);
        let text =
            std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

/// Writes through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    tmp.set_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}
