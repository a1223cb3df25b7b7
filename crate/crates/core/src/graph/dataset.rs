//! Portable dataset container.
//!
//! A container is a directory holding `manifest.json` plus three CSV files:
//!
//! * `edges.csv`, header `src,dst`, zero-based node ids. Direction is ignored.
//! * `features.csv`, header `node,f0,...,f{d-1}`, one row per node.
//! * `labels.csv`, header `node,class,role`; `class` may be empty for nodes
//!   without a label, `role` is one of `train_pool`, `test`, `unlabeled`.
//!
//! Row order in `labels.csv` defines the container order used by fixed splits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Graph, LabelSet, NodeRole};
use crate::error::{Error, Result};
use crate::sparse::Csr;

pub const MANIFEST_FORMAT: &str = "bgcnn-container";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerFiles {
    pub edges: String,
    pub features: String,
    pub labels: String,
}

impl Default for ContainerFiles {
    fn default() -> Self {
        Self {
            edges: "edges.csv".into(),
            features: "features.csv".into(),
            labels: "labels.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub n_nodes: usize,
    pub n_classes: usize,
    pub feature_dim: usize,
    /// Number of rows in `edges.csv` (citation records, before symmetrization).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_edge_rows: Option<usize>,
    #[serde(default)]
    pub files: ContainerFiles,
}

fn default_format() -> String {
    MANIFEST_FORMAT.into()
}

fn default_version() -> u32 {
    MANIFEST_VERSION
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// L1-normalize feature rows.
    pub row_normalize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { row_normalize: true }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub graph: Graph,
    pub features: FeatureMatrix<f64>,
    pub labels: LabelSet,
    /// Rows read from `edges.csv`.
    pub edge_rows: usize,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(file: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.display().to_string(),
        line: line as usize,
        message: message.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(f))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<usize> {
    let header = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    for (i, want) in expected.iter().enumerate() {
        if header.get(i) != Some(*want) {
            return Err(parse_err(
                path,
                1,
                format!("expected header column {i} to be `{want}`, got {:?}", header.get(i)),
            ));
        }
    }
    Ok(header.len())
}

fn parse_field<F: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    idx: usize,
    what: &str,
) -> Result<F> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let raw = rec
        .get(idx)
        .ok_or_else(|| parse_err(path, line, format!("missing field `{what}`")))?;
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("field `{what}`: cannot parse {raw:?}")))
}

pub fn load_dataset(dir: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest_path = if dir.is_file() {
        dir.to_path_buf()
    } else {
        dir.join("manifest.json")
    };
    let base: PathBuf = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest: Manifest = serde_json::from_str(&read_to_string(&manifest_path)?).map_err(|e| {
        parse_err(&manifest_path, e.line() as u64, e.to_string())
    })?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(parse_err(
            &manifest_path,
            0,
            format!("unknown container format {:?}", manifest.format),
        ));
    }
    let n = manifest.n_nodes;

    // edges
    let edges_path = base.join(&manifest.files.edges);
    let mut rdr = csv_reader(&edges_path)?;
    check_header(&edges_path, &mut rdr, &["src", "dst"])?;
    let mut raw = Vec::new();
    let mut self_loops = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(&edges_path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(&edges_path, line, format!("expected 2 fields, got {}", rec.len())));
        }
        let a: usize = parse_field(&edges_path, &rec, 0, "src")?;
        let b: usize = parse_field(&edges_path, &rec, 1, "dst")?;
        if a >= n || b >= n {
            return Err(parse_err(&edges_path, line, format!("node id out of range 0..{n}")));
        }
        if a == b {
            self_loops += 1;
            continue;
        }
        raw.push((a, b));
    }
    let edge_rows = raw.len() + self_loops;
    if let Some(want) = manifest.n_edge_rows {
        if want != edge_rows {
            return Err(parse_err(
                &manifest_path,
                0,
                format!("manifest declares {want} edge rows, {} found", edge_rows),
            ));
        }
    }
    let graph = Graph::from_edges(n, raw.iter().copied())?;
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self-loops", edges_path.display());
    }
    if graph.n_edges() != raw.len() {
        log::warn!(
            "{}: {} edge rows symmetrized to {} undirected edges",
            edges_path.display(),
            raw.len(),
            graph.n_edges()
        );
    }

    // features
    let feat_path = base.join(&manifest.files.features);
    let mut rdr = csv_reader(&feat_path)?;
    let width = check_header(&feat_path, &mut rdr, &["node"])?;
    if width != manifest.feature_dim + 1 {
        return Err(parse_err(
            &feat_path,
            1,
            format!("header has {} feature columns, manifest says {}", width - 1, manifest.feature_dim),
        ));
    }
    let mut trip = Vec::new();
    let mut seen = vec![false; n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(&feat_path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(&feat_path, line, format!("expected {width} fields, got {}", rec.len())));
        }
        let node: usize = parse_field(&feat_path, &rec, 0, "node")?;
        if node >= n || seen[node] {
            return Err(parse_err(&feat_path, line, format!("invalid or repeated node {node}")));
        }
        seen[node] = true;
        for j in 0..manifest.feature_dim {
            let v: f64 = parse_field(&feat_path, &rec, j + 1, "feature")?;
            if !v.is_finite() {
                return Err(parse_err(&feat_path, line, "non-finite feature value"));
            }
            if v != 0.0 {
                trip.push((node, j, v));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(parse_err(&feat_path, 0, format!("no feature row for node {missing}")));
    }
    let mut features = FeatureMatrix::new(Csr::from_triplets(n, manifest.feature_dim, trip)?);
    if opts.row_normalize {
        features = features.row_normalized();
    }

    // labels
    let lab_path = base.join(&manifest.files.labels);
    let mut rdr = csv_reader(&lab_path)?;
    check_header(&lab_path, &mut rdr, &["node", "class", "role"])?;
    let mut labels = vec![None; n];
    let mut roles = vec![NodeRole::Unlabeled; n];
    let mut order = Vec::new();
    let mut seen = vec![false; n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(&lab_path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_err(&lab_path, line, format!("expected 3 fields, got {}", rec.len())));
        }
        let node: usize = parse_field(&lab_path, &rec, 0, "node")?;
        if node >= n || seen[node] {
            return Err(parse_err(&lab_path, line, format!("invalid or repeated node {node}")));
        }
        seen[node] = true;
        let class = match rec.get(1).unwrap_or("") {
            "" => None,
            _ => {
                let c: usize = parse_field(&lab_path, &rec, 1, "class")?;
                if c >= manifest.n_classes {
                    return Err(parse_err(&lab_path, line, format!("class {c} >= n_classes")));
                }
                Some(c)
            }
        };
        let role = match rec.get(2).unwrap_or("") {
            "train_pool" => NodeRole::TrainPool,
            "test" => NodeRole::Test,
            "unlabeled" => NodeRole::Unlabeled,
            other => return Err(parse_err(&lab_path, line, format!("unknown role {other:?}"))),
        };
        if class.is_none() && role != NodeRole::Unlabeled {
            return Err(parse_err(&lab_path, line, "train_pool/test node without class"));
        }
        labels[node] = class;
        roles[node] = role;
        order.push(node);
    }
    let labels = LabelSet::new(manifest.n_classes, labels, roles, order)?;

    Ok(Dataset {
        manifest,
        graph,
        features,
        labels,
        edge_rows,
    })
}

/// Writes a container. `edges` are written verbatim (raw citation rows).
pub fn write_container(
    dir: impl AsRef<Path>,
    name: &str,
    n_classes: usize,
    edges: &[(usize, usize)],
    features: &Csr<f64>,
    labels: &[Option<usize>],
    roles: &[NodeRole],
    order: &[usize],
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = features.n_rows();
    if labels.len() != n || roles.len() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows, {} labels, {} roles",
            labels.len(),
            roles.len()
        )));
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        name: name.into(),
        n_nodes: n,
        n_classes,
        feature_dim: features.n_cols(),
        n_edge_rows: Some(edges.len()),
        files: ContainerFiles::default(),
    };

    let create = |file: &str| -> Result<BufWriter<File>> {
        let p = dir.join(file);
        Ok(BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?))
    };
    let io = |p: &str| {
        let p = dir.join(p);
        move |e: std::io::Error| Error::io(&p, e)
    };

    let mut w = create(&manifest.files.edges)?;
    let e_io = io(&manifest.files.edges);
    writeln!(w, "src,dst").map_err(&e_io)?;
    for &(a, b) in edges {
        writeln!(w, "{a},{b}").map_err(&e_io)?;
    }
    w.flush().map_err(&e_io)?;

    let mut w = create(&manifest.files.features)?;
    let f_io = io(&manifest.files.features);
    let d = features.n_cols();
    let header: Vec<String> = std::iter::once("node".to_string())
        .chain((0..d).map(|j| format!("f{j}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(&f_io)?;
    let mut row = vec![0.0f64; d];
    for r in 0..n {
        row.iter_mut().for_each(|v| *v = 0.0);
        for (c, v) in features.row(r) {
            row[c] = v;
        }
        write!(w, "{r}").map_err(&f_io)?;
        for v in &row {
            if *v == 0.0 {
                write!(w, ",0").map_err(&f_io)?;
            } else {
                write!(w, ",{v}").map_err(&f_io)?;
            }
        }
        writeln!(w).map_err(&f_io)?;
    }
    w.flush().map_err(&f_io)?;

    let mut w = create(&manifest.files.labels)?;
    let l_io = io(&manifest.files.labels);
    writeln!(w, "node,class,role").map_err(&l_io)?;
    let mut listed = vec![false; n];
    let rest: Vec<usize> = (0..n).collect();
    for &i in order.iter().chain(rest.iter()) {
        if i >= n || listed[i] {
            continue;
        }
        listed[i] = true;
        let class = labels[i].map(|c| c.to_string()).unwrap_or_default();
        let role = match roles[i] {
            NodeRole::TrainPool => "train_pool",
            NodeRole::Test => "test",
            NodeRole::Unlabeled => "unlabeled",
        };
        writeln!(w, "{i},{class},{role}").map_err(&l_io)?;
    }
    w.flush().map_err(&l_io)?;

    let mpath = dir.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}
