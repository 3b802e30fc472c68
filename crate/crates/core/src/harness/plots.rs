//! Gnuplot scripts for the result tables.

use std::path::{Path, PathBuf};

use anyhow::bail;

use super::output::{write_atomic, RunManifest, MANIFEST_FILE};

#[derive(Debug, Clone, Default)]
pub struct PlotReport {
    pub scripts: Vec<PathBuf>,
    /// CSV files named in the manifest but absent.
    pub missing: Vec<String>,
    pub warnings: Vec<String>,
}

const PREAMBLE: &str = "set datafile separator ','\nset terminal pngcairo size 900,600\n";

fn series(csv: &str, stat: &str, x: &str, y: &str, title: &str) -> String {
    format!("'{csv}' every ::1 using (strcol(3) eq '{stat}' ? {x} : NaN):{y} with linespoints title '{title}'")
}

fn script(kind: &str, csv: &str, stem: &str) -> String {
    let mut s = format!("{PREAMBLE}set output '{stem}.png'\n");
    match kind {
        "variance-scan" => {
            s += "set xlabel 'L - 2'\nset ylabel 'var log Σ'\n";
            s += &format!(
                "f(x) = a*x + b\nfit f(x) '{csv}' every ::1 using (strcol(3) eq 'varLogSigma' ? $2-2 : NaN):5 via a, b\n"
            );
            s += &format!(
                "plot '{csv}' every ::1 using (strcol(3) eq 'varLogSigma' ? $2-2 : NaN):5:6 with yerrorbars title 'var log Σ', \\\n     f(x) title sprintf('slope %.4g', a)\n"
            );
        }
        "lyapunov" => {
            s += "set xlabel 'W^2'\nset ylabel 'γ'\nset logscale y\n";
            s += &format!(
                "g(x) = exp(p - q*x)\nfit log(g(x)) '{csv}' every ::1 using (strcol(3) eq 'gamma' ? $1**2 : NaN):(log($5)) via p, q\n"
            );
            s += &format!(
                "plot '{csv}' every ::1 using (strcol(3) eq 'gamma' ? $1**2 : NaN):5:6 with yerrorbars title 'γ', \\\n     g(x) title sprintf('exp(%.3g - %.3g W^2)', p, q)\n"
            );
        }
        "decay" => {
            s += "set xlabel 'distance'\nset ylabel 'mean log |G|'\n";
            s += &format!("plot {}\n", series(csv, "meanLogG", "$4", "5", "profile"));
        }
        "wegner" => {
            s += "set xlabel 'T'\nset ylabel 'T · P(tail)'\nset logscale x\n";
            s += &format!(
                "plot {}, \\\n     {}\n",
                series(csv, "entryTail", "$4", "5", "entry"),
                series(csv, "normTail", "$4", "5", "norm / |Λ|")
            );
        }
        "weak-decay" => {
            s += "set xlabel 'L'\nset ylabel 'probability'\n";
            s += &format!(
                "plot {}, \\\n     {}\n",
                series(csv, "lower", "$2", "5", "P(log Σ <= -sqrt(L δ0)/2)"),
                series(csv, "upper", "$2", "5", "P(log Σ >= sqrt(L δ0)/2)")
            );
        }
        "moments" => {
            s += "set xlabel 'L'\nset ylabel 'E |log Σ|^s'\nset logscale y\n";
            s += &format!(
                "plot {}, \\\n     {}\n",
                series(csv, "moment", "$2", "5", "moment"),
                series(csv, "envelope", "$2", "5", "envelope")
            );
        }
        _ => {
            s += "set xlabel 'row'\nset ylabel 'value'\n";
            s += &format!("plot '{csv}' every ::1 using 0:5 with points title '{kind}'\n");
        }
    }
    s
}

/// Writes `<name>.gp` next to every CSV listed in the manifest.
pub fn emit_plots(dir: &Path) -> anyhow::Result<PlotReport> {
    let mut report = PlotReport::default();
    if !dir.join(MANIFEST_FILE).exists() {
        let has_csv = std::fs::read_dir(dir)
            .map(|rd| {
                rd.flatten()
                    .any(|e| e.path().extension().is_some_and(|x| x == "csv"))
            })
            .unwrap_or(false);
        if has_csv {
            bail!("{} has CSV files but no {MANIFEST_FILE}", dir.display());
        }
        report
            .warnings
            .push(format!("no results in {}", dir.display()));
        return Ok(report);
    }
    let manifest = RunManifest::load(dir)?;
    for entry in manifest.experiments.values() {
        for file in &entry.files {
            if !dir.join(file).exists() {
                report.missing.push(file.clone());
                continue;
            }
            let stem = file.trim_end_matches(".csv");
            let path = dir.join(format!("{stem}.gp"));
            write_atomic(&path, script(&entry.kind, file, stem).as_bytes())?;
            report.scripts.push(path);
        }
    }
    if report.scripts.is_empty() {
        report.warnings.push("no CSV files to plot".into());
    }
    Ok(report)
}
