//! Tables and plot data from finished run directories. Inputs are only read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bgcnn::attack::{AlgorithmSummary, AttackRow};
use serde::{Deserialize, Serialize};

use crate::record::{self, Summary};
use crate::{CliError, CliResult};

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n − 1)p`), the default of R and NumPy.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub run: String,
    pub algorithm: String,
    pub phase: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxplotRow {
    pub fn new(run: &str, algorithm: &str, phase: &str, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            run: run.into(),
            algorithm: algorithm.into(),
            phase: phase.into(),
            n: v.len(),
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub summaries: Vec<(PathBuf, Summary)>,
    pub tables: String,
    pub boxplot: Vec<BoxplotRow>,
}

fn run_name(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string())
}

fn read_attack_rows(path: &Path) -> CliResult<Vec<AttackRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .collect::<Result<Vec<AttackRow>, _>>()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn pct(mean: f64, sd: f64) -> String {
    format!("{:.1} ± {:.1}", 100.0 * mean, 100.0 * sd)
}

/// Builds the report for `runs` without writing anything.
pub fn build_report(runs: &[PathBuf]) -> CliResult<Report> {
    let mut summaries = Vec::new();
    for dir in runs {
        summaries.push((dir.clone(), record::read_json::<Summary>(&dir.join("summary.json"))?));
    }

    let mut tables = String::new();
    // accuracy: (dataset, method) × labels per class
    let mut cells: BTreeMap<(String, String), BTreeMap<usize, String>> = BTreeMap::new();
    let mut label_counts = std::collections::BTreeSet::new();
    for (_, s) in &summaries {
        if !matches!(s.task.as_str(), "train_gcnn" | "train_bayesian") {
            continue;
        }
        label_counts.insert(s.per_class);
        for m in &s.methods {
            cells
                .entry((s.dataset.clone(), m.method.clone()))
                .or_default()
                .insert(s.per_class, pct(m.mean, m.sd));
        }
    }
    if !cells.is_empty() {
        let _ = writeln!(tables, "## Test accuracy (%)\n");
        let header: Vec<String> = label_counts.iter().map(|c| format!("{c} labels/class")).collect();
        let _ = writeln!(tables, "| dataset | method | {} |", header.join(" | "));
        let _ = writeln!(tables, "|---|---|{}", "---|".repeat(label_counts.len()));
        for ((ds, method), row) in &cells {
            let vals: Vec<&str> = label_counts.iter().map(|c| row.get(c).map_or("", String::as_str)).collect();
            let _ = writeln!(tables, "| {ds} | {method} | {} |", vals.join(" | "));
        }
        let _ = writeln!(tables);
    }

    let mut boxplot = Vec::new();
    for (dir, s) in &summaries {
        let summary_path = dir.join("attack_summary.json");
        if s.task != "attack" || !summary_path.is_file() {
            continue;
        }
        let name = run_name(dir);
        let algs: Vec<AlgorithmSummary> = record::read_json(&summary_path)?;
        let _ = writeln!(tables, "## Random attack: {name}\n");
        let _ = writeln!(tables, "| algorithm | targets | accuracy, no attack | accuracy, attack | margin, no attack | margin, attack |");
        let _ = writeln!(tables, "|---|---|---|---|---|---|");
        for a in &algs {
            for g in std::iter::once(&a.overall).chain(&a.groups) {
                let label = match g.group {
                    None => "all".to_string(),
                    Some(grp) => serde_json::to_value(grp).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                };
                let _ = writeln!(
                    tables,
                    "| {} | {label} | {:.2}% | {:.2}% | {:.3} | {:.3} |",
                    a.algorithm.name(),
                    100.0 * g.no_attack_accuracy,
                    100.0 * g.attack_accuracy,
                    g.no_attack_mean_margin,
                    g.attack_mean_margin
                );
            }
        }
        let _ = writeln!(tables);

        let rows = read_attack_rows(&dir.join("attack_rows.csv"))?;
        // per-target margins averaged over trials
        let mut per_target: BTreeMap<(String, usize), (f64, f64, usize)> = BTreeMap::new();
        for r in &rows {
            let e = per_target.entry((r.algorithm.name().to_string(), r.target)).or_insert((0.0, 0.0, 0));
            e.0 += r.pre_margin;
            e.1 += r.post_margin;
            e.2 += 1;
        }
        let mut by_alg: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for ((alg, _), (pre, post, n)) in per_target {
            let e = by_alg.entry(alg).or_default();
            e.0.push(pre / n as f64);
            e.1.push(post / n as f64);
        }
        for (alg, (pre, post)) in by_alg {
            boxplot.push(BoxplotRow::new(&name, &alg, "no_attack", &pre));
            boxplot.push(BoxplotRow::new(&name, &alg, "attack", &post));
        }
    }

    let other: Vec<&(PathBuf, Summary)> = summaries.iter().filter(|(_, s)| s.task == "mmsbm_fit").collect();
    if !other.is_empty() {
        let _ = writeln!(tables, "## Block model fits\n");
        let _ = writeln!(tables, "| run | dataset | mean log joint | sd |");
        let _ = writeln!(tables, "|---|---|---|---|");
        for (dir, s) in other {
            for m in &s.methods {
                let _ = writeln!(tables, "| {} | {} | {:.3} | {:.3} |", run_name(dir), s.dataset, m.mean, m.sd);
            }
        }
    }
    Ok(Report { summaries, tables, boxplot })
}

/// Writes `tables.md` and `boxplot.csv` into `out`.
pub fn cmd_report(runs: &[PathBuf], out: &Path) -> CliResult<Summary> {
    if runs.is_empty() {
        return Err(CliError::invalid("report needs at least one run directory"));
    }
    let rep = build_report(runs)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(bgcnn::Error::Io { path: out.into(), source: e }))?;
    record::write_atomic(&out.join("tables.md"), &rep.tables)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rep.boxplot {
        w.serialize(row).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    if rep.boxplot.is_empty() {
        w.write_record(["run", "algorithm", "phase", "n", "min", "q1", "median", "q3", "max", "mean"])
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Validation(e.to_string()))?;
    record::write_atomic(&out.join("boxplot.csv"), &String::from_utf8_lossy(&bytes))?;
    Ok(Summary {
        config_hash: String::new(),
        version: record::VERSION.into(),
        task: "report".into(),
        dataset: String::new(),
        per_class: 0,
        repetitions: rep.summaries.len(),
        methods: rep.summaries.into_iter().flat_map(|(_, s)| s.methods).collect(),
    })
}
