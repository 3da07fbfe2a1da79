//! Merges per-seed logs into mean and standard-deviation curves.
//!
//! A variant is any directory holding `seed_<s>/log.csv` children. The
//! report writes `comparison.csv` (one row per variant and update),
//! `final.csv` (one row per variant) and `expectations.txt` into the
//! scanned directory. It reads nothing else and modifies no run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use semexp_core::rl::LogRow;
use walkdir::WalkDir;

use crate::error::{HarnessError, Result};
use crate::formats::write_file;
use crate::logs::{read_log, LOG_FILE};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const FINAL_FILE: &str = "final.csv";
pub const EXPECTATIONS_FILE: &str = "expectations.txt";

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantSummary {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Last evaluated success rate of each seed, in `seeds` order.
    pub final_success: Vec<f64>,
    /// Mean intrinsic reward over the first and last tenth of updates, per seed.
    pub early_intrinsic: Vec<f64>,
    pub late_intrinsic: Vec<f64>,
}

impl VariantSummary {
    pub fn final_success_mean_std(&self) -> (f64, f64) {
        mean_std(&self.final_success)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub variants: Vec<VariantSummary>,
    /// Soft expectations about ablation variants, checked when both sides exist.
    pub notes: Vec<String>,
}

impl Report {
    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.name == name)
    }
}

fn seed_of(dir: &Path) -> Option<u64> {
    dir.file_name()?.to_str()?.strip_prefix("seed_")?.parse().ok()
}

/// Variant name to `(seed, log path)` pairs, sorted.
fn discover(root: &Path) -> BTreeMap<String, Vec<(u64, PathBuf)>> {
    let mut found: BTreeMap<String, Vec<(u64, PathBuf)>> = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name().into_iter().filter_map(|e| e.ok()) {
        if entry.file_name() != LOG_FILE {
            continue;
        }
        let Some(seed_dir) = entry.path().parent() else { continue };
        let (Some(seed), Some(variant_dir)) = (seed_of(seed_dir), seed_dir.parent()) else {
            continue;
        };
        let rel = variant_dir.strip_prefix(root).unwrap_or(variant_dir);
        let name = if rel.as_os_str().is_empty() {
            root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| ".".into())
        } else {
            rel.to_string_lossy().replace('\\', "/")
        };
        found.entry(name).or_default().push((seed, entry.path().to_path_buf()));
    }
    for runs in found.values_mut() {
        runs.sort();
    }
    found
}

fn tenth_mean(rows: &[LogRow], late: bool) -> f64 {
    let k = (rows.len() / 10).max(1).min(rows.len());
    let slice = if late { &rows[rows.len() - k..] } else { &rows[..k] };
    slice.iter().map(|r| r.mean_intrinsic).sum::<f64>() / slice.len().max(1) as f64
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Scans `root`, writes the comparison files and returns the summary.
pub fn report(root: &Path) -> Result<Report> {
    if !root.is_dir() {
        return Err(HarnessError::Usage(format!("{} is not a directory", root.display())));
    }
    let found = discover(root);
    if found.is_empty() {
        return Err(HarnessError::Usage(format!("no seed_*/log.csv runs under {}", root.display())));
    }
    let mut comparison = String::from(
        "variant,update,env_steps,seeds,success_mean,success_std,intrinsic_mean,intrinsic_std,return_mean,return_std\n",
    );
    let mut finals = String::from("variant,seeds,final_success_mean,final_success_std,early_intrinsic_mean,late_intrinsic_mean\n");
    let mut variants = Vec::new();
    for (name, runs) in &found {
        let logs = runs
            .iter()
            .map(|(_, p)| read_log(p))
            .collect::<Result<Vec<_>>>()?;
        let longest = logs.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..longest {
            let rows: Vec<&LogRow> = logs.iter().filter_map(|l| l.get(i)).collect();
            let succ: Vec<f64> = rows.iter().filter_map(|r| r.success_rate).collect();
            let intr: Vec<f64> = rows.iter().map(|r| r.mean_intrinsic).collect();
            let ret: Vec<f64> = rows.iter().filter_map(|r| r.mean_return).collect();
            let (sm, ss) = mean_std(&succ);
            let (im, is) = mean_std(&intr);
            let (rm, rs) = mean_std(&ret);
            comparison.push_str(&format!(
                "{name},{},{},{},{},{},{},{},{},{}\n",
                rows[0].update,
                rows[0].env_steps,
                rows.len(),
                fmt(sm),
                fmt(ss),
                fmt(im),
                fmt(is),
                fmt(rm),
                fmt(rs)
            ));
        }
        let summary = VariantSummary {
            name: name.clone(),
            seeds: runs.iter().map(|(s, _)| *s).collect(),
            final_success: logs
                .iter()
                .map(|l| l.iter().rev().find_map(|r| r.success_rate).unwrap_or(f64::NAN))
                .collect(),
            early_intrinsic: logs.iter().map(|l| tenth_mean(l, false)).collect(),
            late_intrinsic: logs.iter().map(|l| tenth_mean(l, true)).collect(),
        };
        let (fm, fs) = summary.final_success_mean_std();
        finals.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            summary.seeds.len(),
            fmt(fm),
            fmt(fs),
            fmt(mean_std(&summary.early_intrinsic).0),
            fmt(mean_std(&summary.late_intrinsic).0)
        ));
        variants.push(summary);
    }
    let mut rep = Report { variants, notes: Vec::new() };
    rep.notes = expectations(&rep);
    write_file(&root.join(COMPARISON_FILE), comparison.as_bytes())?;
    write_file(&root.join(FINAL_FILE), finals.as_bytes())?;
    let mut text = rep.notes.join("\n");
    text.push('\n');
    write_file(&root.join(EXPECTATIONS_FILE), text.as_bytes())?;
    Ok(rep)
}

/// Soft ablation checks: fewer, summed questions asked every step should
/// not lose to two averaged questions or to a sparser inquiry period.
fn expectations(rep: &Report) -> Vec<String> {
    let pairs = [
        ("n2_mean_k1", "n1_sum_k1", "n=2/mean does not beat n=1/sum"),
        ("n1_sum_k10", "n1_sum_k1", "k=10 does not beat k=1"),
    ];
    let mut out = Vec::new();
    for (challenger, reference, label) in pairs {
        if let (Some(c), Some(r)) = (rep.variant(challenger), rep.variant(reference)) {
            let (cm, rm) = (c.final_success_mean_std().0, r.final_success_mean_std().0);
            let held = !(cm > rm);
            out.push(format!(
                "{label}: {} ({challenger} {cm:.3} vs {reference} {rm:.3})",
                if held { "holds" } else { "does not hold" }
            ));
        }
    }
    if out.is_empty() {
        out.push("no ablation pairs present".into());
    }
    out
}
