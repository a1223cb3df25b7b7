//! Raw dataset layouts to container conversion.
//!
//! Two layouts are recognized in the input directory:
//!
//! * LINQS citation data: `<name>.content` (`id f_1 … f_d label`, whitespace
//!   separated) and `<name>.cites` (`cited citing`).
//! * Plain CSV: `edges.csv` (`src,dst`), `features.csv` (`id,f0,…`) and
//!   `labels.csv` (`id,label[,role]`), each with a header row.
//!
//! Node ids may be arbitrary strings; node order follows the feature rows.
//! Edge rows that mention unknown ids are dropped and counted.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use bgcnn::graph::{load_dataset, write_container, LoadOptions, Manifest, NodeRole};
use bgcnn::rng::{self, tags};
use bgcnn::sparse::Csr;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvertOptions {
    pub name: Option<String>,
    /// Test nodes drawn at random when the input carries no roles.
    pub n_test: usize,
    pub seed: u64,
    pub expect_nodes: Option<usize>,
    pub expect_edge_rows: Option<usize>,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        Self { name: None, n_test: 1000, seed: 0, expect_nodes: None, expect_edge_rows: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvertReport {
    pub manifest: Manifest,
    pub undirected_edges: usize,
    pub dropped_edge_rows: usize,
    pub classes: Vec<String>,
}

struct Raw {
    name: String,
    ids: Vec<String>,
    features: Vec<Vec<f64>>,
    labels: Vec<Option<String>>,
    roles: Option<Vec<NodeRole>>,
    edges: Vec<(String, String)>,
}

fn parse_err(file: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::invalid(bgcnn::Error::Parse { file: file.display().to_string(), line, message: message.into() })
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn find_with_ext(dir: &Path, ext: &str) -> CliResult<Option<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
    let mut hits: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    hits.sort();
    Ok(hits.into_iter().next())
}

fn read_linqs(content: &Path, cites: &Path) -> CliResult<Raw> {
    let mut raw = Raw {
        name: content.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        ids: Vec::new(),
        features: Vec::new(),
        labels: Vec::new(),
        roles: None,
        edges: Vec::new(),
    };
    let mut width = None;
    for (i, line) in read(content)?.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(parse_err(content, i + 1, "expected id, features and label"));
        }
        let d = fields.len() - 2;
        if *width.get_or_insert(d) != d {
            return Err(parse_err(content, i + 1, format!("{d} features, earlier rows have {}", width.unwrap_or(0))));
        }
        let feats = fields[1..=d]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| parse_err(content, i + 1, "non-numeric feature"))?;
        raw.ids.push(fields[0].to_string());
        raw.features.push(feats);
        raw.labels.push(Some(fields[d + 1].to_string()));
    }
    for (i, line) in read(cites)?.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.len() {
            0 => continue,
            2 => raw.edges.push((fields[0].to_string(), fields[1].to_string())),
            n => return Err(parse_err(cites, i + 1, format!("expected 2 ids, got {n} fields"))),
        }
    }
    Ok(raw)
}

fn csv_records(path: &Path, min_fields: usize) -> CliResult<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < min_fields {
            return Err(parse_err(path, line, format!("expected at least {min_fields} fields, got {}", rec.len())));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn read_csv_layout(dir: &Path) -> CliResult<Raw> {
    let mut raw = Raw {
        name: dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        ids: Vec::new(),
        features: Vec::new(),
        labels: Vec::new(),
        roles: None,
        edges: Vec::new(),
    };
    let fpath = dir.join("features.csv");
    let mut width = None;
    for (line, rec) in csv_records(&fpath, 2)? {
        let d = rec.len() - 1;
        if *width.get_or_insert(d) != d {
            return Err(parse_err(&fpath, line, format!("{d} features, earlier rows have {}", width.unwrap_or(0))));
        }
        let feats = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| parse_err(&fpath, line, "non-numeric feature"))?;
        raw.ids.push(rec[0].to_string());
        raw.features.push(feats);
    }
    let index: HashMap<&str, usize> = raw.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    raw.labels = vec![None; raw.ids.len()];
    let mut roles = vec![NodeRole::Unlabeled; raw.ids.len()];
    let mut any_role = false;
    let lpath = dir.join("labels.csv");
    for (line, rec) in csv_records(&lpath, 2)? {
        let &i = index
            .get(&rec[0])
            .ok_or_else(|| parse_err(&lpath, line, format!("unknown node id {:?}", &rec[0])))?;
        if !rec[1].is_empty() {
            raw.labels[i] = Some(rec[1].to_string());
        }
        if let Some(role) = rec.get(2).filter(|r| !r.is_empty()) {
            any_role = true;
            roles[i] = serde_json::from_value(serde_json::Value::String(role.into()))
                .map_err(|_| parse_err(&lpath, line, format!("unknown role {role:?}")))?;
        }
    }
    if any_role {
        raw.roles = Some(roles);
    }
    let epath = dir.join("edges.csv");
    for (line, rec) in csv_records(&epath, 2)? {
        if rec.len() != 2 {
            return Err(parse_err(&epath, line, format!("expected 2 fields, got {}", rec.len())));
        }
        raw.edges.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(raw)
}

/// Converts the raw dataset in `input` and writes a container to `output`.
pub fn cmd_convert(input: &Path, output: &Path, opts: &ConvertOptions) -> CliResult<ConvertReport> {
    let raw = match (find_with_ext(input, "content")?, find_with_ext(input, "cites")?) {
        (Some(content), Some(cites)) => read_linqs(&content, &cites)?,
        _ if input.join("features.csv").is_file() => read_csv_layout(input)?,
        _ => return Err(CliError::Validation(format!("{}: no recognized raw layout", input.display()))),
    };
    let n = raw.ids.len();
    let index: HashMap<&str, usize> = raw.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != n {
        return Err(CliError::invalid("duplicate node ids"));
    }
    let mut edges = Vec::with_capacity(raw.edges.len());
    let mut dropped = 0;
    for (a, b) in &raw.edges {
        match (index.get(a.as_str()), index.get(b.as_str())) {
            (Some(&i), Some(&j)) => edges.push((i, j)),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} edge rows with unknown node ids");
    }

    let classes: Vec<String> = raw.labels.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let class_of: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let labels: Vec<Option<usize>> = raw.labels.iter().map(|l| l.as_deref().map(|c| class_of[c])).collect();
    let roles = match raw.roles {
        Some(r) => r,
        None => {
            let mut labeled: Vec<usize> = (0..n).filter(|&i| labels[i].is_some()).collect();
            labeled.shuffle(&mut rng::rng_from(opts.seed, &[tags::SPLIT, 1]));
            let mut roles = vec![NodeRole::Unlabeled; n];
            for (k, &i) in labeled.iter().enumerate() {
                roles[i] = if k < opts.n_test { NodeRole::Test } else { NodeRole::TrainPool };
            }
            roles
        }
    };
    let d = raw.features.first().map_or(0, Vec::len);
    let trip = raw
        .features
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)));
    let feats = Csr::from_triplets(n, d, trip.collect())?;
    let name = opts.name.clone().unwrap_or(raw.name);
    let order: Vec<usize> = (0..n).collect();
    write_container(output, &name, classes.len(), &edges, &feats, &labels, &roles, &order)?;

    let ds = load_dataset(output, LoadOptions::default())?;
    if let Some(want) = opts.expect_nodes {
        if want != ds.manifest.n_nodes {
            return Err(CliError::Validation(format!("expected {want} nodes, converted {}", ds.manifest.n_nodes)));
        }
    }
    if let Some(want) = opts.expect_edge_rows {
        if want != ds.edge_rows {
            return Err(CliError::Validation(format!("expected {want} edge rows, converted {}", ds.edge_rows)));
        }
    }
    Ok(ConvertReport { manifest: ds.manifest, undirected_edges: ds.graph.n_edges(), dropped_edge_rows: dropped, classes })
}
