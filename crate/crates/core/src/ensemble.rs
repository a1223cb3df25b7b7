//! The Bayesian GCNN ensemble.
//!
//! A base GCNN trained on the observed graph initializes the block model (from
//! its softmax) and, by default, every per-graph GCNN (from its weights). The
//! block model is then refined `n_mmsbm_iters` steps per graph; each refined
//! model yields one sampled graph, one trained GCNN and `S` dropout samples.
//! The prediction is the mean of all `N_G · S` softmax samples.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcnn::{self, GcnnConfig, GcnnWeights};
use crate::graph::{normalize_adjacency, FeatureMatrix, Graph, LabelSet};
use crate::mmsbm::{edge_probability, init_from_softmax, BlockParams, ExpandedParams, MmsbmChain, MmsbmHyper};
use crate::rng::{self, tags};
use crate::sampler::{sample_graph, SampleMethod, SampledGraph};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// `N_G`: sampled graphs.
    pub n_graphs: usize,
    /// `S`: dropout samples per graph.
    pub n_dropout_samples: usize,
    /// `N_b`: block-model iterations before each graph is drawn.
    pub n_mmsbm_iters: usize,
    pub gcnn: GcnnConfig,
    pub mmsbm: MmsbmHyper,
    pub seed: u64,
    /// Continue one block-model chain across graphs instead of restarting from the softmax initialization.
    pub warm_start_mmsbm: bool,
    /// Start each per-graph GCNN from the base GCNN's weights instead of a fresh draw.
    pub warm_start_weights: bool,
    pub sample_method: SampleMethod,
    /// Keep the `N_G · S` softmax samples in the prediction.
    pub keep_samples: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_graphs: 10,
            n_dropout_samples: 5,
            n_mmsbm_iters: 200,
            gcnn: GcnnConfig::default(),
            mmsbm: MmsbmHyper::default(),
            seed: 0,
            warm_start_mmsbm: true,
            warm_start_weights: true,
            sample_method: SampleMethod::Exact,
            keep_samples: false,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_graphs == 0 || self.n_dropout_samples == 0 {
            return Err(Error::InvalidParameter("n_graphs and n_dropout_samples must be >= 1".into()));
        }
        self.gcnn.validate()?;
        self.mmsbm.validate()
    }
}

/// Random streams of an ensemble run, each derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    BaseGcnn,
    Mmsbm,
    GraphSample,
    GraphGcnn,
    Dropout,
}

/// Seed for `stage` of graph `i` (ignored by [`Stage::BaseGcnn`]).
pub fn stage_seed(master: u64, stage: Stage, i: usize) -> u64 {
    let s = match stage {
        Stage::BaseGcnn => return rng::derive_seed(master, &[tags::ENSEMBLE, 0]),
        Stage::Mmsbm => 1,
        Stage::GraphSample => 2,
        Stage::GraphGcnn => 3,
        Stage::Dropout => 4,
    };
    rng::derive_seed(master, &[tags::ENSEMBLE, s, i as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction<T> {
    /// Mean softmax, `n_nodes × K`.
    pub mean: Array2<T>,
    /// Argmax of each mean row (ties to the lowest class).
    pub labels: Vec<usize>,
    pub samples: Option<Vec<Array2<T>>>,
}

impl<T: Scalar> EnsemblePrediction<T> {
    pub fn accuracy(&self, labels: &LabelSet, nodes: &[usize]) -> f64 {
        gcnn::accuracy(&self.mean, labels, nodes)
    }

    /// Mutual information between the prediction and the sample index:
    /// `H(mean) − mean_s H(sample_s)` per node. Zero exactly when every sample row agrees.
    pub fn disagreement(&self) -> Option<Vec<f64>> {
        let samples = self.samples.as_ref()?;
        let entropy = |row: ndarray::ArrayView1<'_, T>| -> f64 {
            row.iter().map(|v| v.as_f64()).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
        };
        let n = samples.len() as f64;
        Some(
            (0..self.mean.nrows())
                .map(|a| {
                    if samples.iter().all(|s| s.row(a) == samples[0].row(a)) {
                        return 0.0;
                    }
                    let within: f64 = samples.iter().map(|s| entropy(s.row(a))).sum::<f64>() / n;
                    (entropy(self.mean.row(a)) - within).max(0.0)
                })
                .collect(),
        )
    }

    /// Entropy of the per-node distribution of sample argmax labels.
    pub fn vote_entropy(&self) -> Option<Vec<f64>> {
        let samples = self.samples.as_ref()?;
        let k = self.mean.ncols();
        let n = samples.len() as f64;
        Some(
            (0..self.mean.nrows())
                .map(|a| {
                    let mut votes = vec![0usize; k];
                    for s in samples {
                        votes[gcnn::argmax(s.row(a).iter().copied())] += 1;
                    }
                    votes.iter().filter(|&&v| v > 0).map(|&v| -(v as f64 / n) * (v as f64 / n).ln()).sum::<f64>().max(0.0)
                })
                .collect(),
        )
    }
}

/// Entrywise mean of equally shaped softmax matrices, accumulated in the given order.
pub fn aggregate<T: Scalar>(samples: &[Array2<T>], keep: bool) -> Result<EnsemblePrediction<T>> {
    let first = samples.first().ok_or_else(|| Error::InvalidParameter("no samples to aggregate".into()))?;
    if let Some(s) = samples.iter().find(|s| s.dim() != first.dim()) {
        return Err(Error::Shape(format!("sample {:?} differs from {:?}", s.dim(), first.dim())));
    }
    // running mean: exact when all samples are equal
    let mut mean = first.clone();
    for (k, s) in samples.iter().enumerate().skip(1) {
        let w = T::of_usize(k + 1);
        ndarray::Zip::from(&mut mean).and(s).for_each(|m, &x| *m += (x - *m) / w);
    }
    let labels = mean.axis_iter(Axis(0)).map(|r| gcnn::argmax(r.iter().copied())).collect();
    Ok(EnsemblePrediction {
        mean,
        labels,
        samples: keep.then(|| samples.to_vec()),
    })
}

/// Everything an ensemble run produces besides the prediction itself.
#[derive(Debug, Clone)]
pub struct EnsembleOutput<T> {
    pub prediction: EnsemblePrediction<T>,
    /// Deterministic softmax of the base GCNN on the observed graph.
    pub base_softmax: Array2<T>,
    pub base_weights: GcnnWeights<T>,
    /// Block model used for each sampled graph.
    pub block_history: Vec<BlockParams<T>>,
    /// Final expanded parameters of the (last) chain.
    pub final_params: ExpandedParams<T>,
    pub sampled: Vec<SampledGraph>,
}

/// Runs the full ensemble on the observed graph `g`.
pub fn run<T: Scalar>(g: &Graph, x: &FeatureMatrix<T>, labels: &LabelSet, cfg: &EnsembleConfig) -> Result<EnsembleOutput<T>> {
    cfg.validate()?;
    if g.n_nodes() != x.n_rows() || g.n_nodes() != labels.n_nodes() {
        return Err(Error::Shape("graph, features and labels disagree on node count".into()));
    }
    let a_obs = normalize_adjacency::<T>(g);
    let base_cfg = GcnnConfig { seed: stage_seed(cfg.seed, Stage::BaseGcnn, 0), ..cfg.gcnn.clone() };
    let base = gcnn::train(&a_obs, x, labels, &base_cfg, None)?;
    let base_softmax = gcnn::predict(&base.weights, cfg.gcnn.activation, &a_obs, x)?;
    let init = init_from_softmax(base_softmax.view(), g, &cfg.mmsbm)?;

    // The chain only sees the observed graph, so all block models can be fitted
    // first and the per-graph work run in parallel afterwards.
    let mut block_history = Vec::with_capacity(cfg.n_graphs);
    let mut final_params = init.clone();
    let mut chain = MmsbmChain::new(g, init.clone(), cfg.mmsbm.clone(), stage_seed(cfg.seed, Stage::Mmsbm, 0))?;
    for i in 0..cfg.n_graphs {
        if !cfg.warm_start_mmsbm && i > 0 {
            chain = MmsbmChain::new(g, init.clone(), cfg.mmsbm.clone(), stage_seed(cfg.seed, Stage::Mmsbm, i))?;
        }
        chain
            .run(g, cfg.n_mmsbm_iters)
            .map_err(|e| Error::Ensemble { graph: i, stage: "block model", source: Box::new(e) })?;
        block_history.push(chain.block_params()?);
        final_params = chain.params().clone();
    }

    let per_graph: Vec<(SampledGraph, Vec<Array2<T>>)> = block_history
        .par_iter()
        .enumerate()
        .map(|(i, bp)| {
            let wrap = |stage| move |e| Error::Ensemble { graph: i, stage, source: Box::new(e) };
            let sampled = sample_graph(bp, cfg.mmsbm.delta, stage_seed(cfg.seed, Stage::GraphSample, i), cfg.sample_method)
                .map_err(wrap("graph sampling"))?;
            let a_i = normalize_adjacency::<T>(&sampled.graph);
            let gcfg = GcnnConfig { seed: stage_seed(cfg.seed, Stage::GraphGcnn, i), ..cfg.gcnn.clone() };
            let init_w = cfg.warm_start_weights.then_some(&base.weights);
            let trained = gcnn::train(&a_i, x, labels, &gcfg, init_w).map_err(wrap("gcnn training"))?;
            let samples = gcnn::mc_dropout_predict(
                &trained.weights,
                cfg.gcnn.activation,
                &a_i,
                x,
                cfg.gcnn.dropout_rate,
                cfg.n_dropout_samples,
                stage_seed(cfg.seed, Stage::Dropout, i),
            )
            .map_err(wrap("dropout sampling"))?;
            Ok((sampled, samples))
        })
        .collect::<Result<_>>()?;

    let mut sampled = Vec::with_capacity(cfg.n_graphs);
    let mut all = Vec::with_capacity(cfg.n_graphs * cfg.n_dropout_samples);
    for (sg, s) in per_graph {
        sampled.push(sg);
        all.extend(s);
    }
    Ok(EnsembleOutput {
        prediction: aggregate(&all, cfg.keep_samples)?,
        base_softmax,
        base_weights: base.weights,
        block_history,
        final_params,
        sampled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: usize,
    pub b: usize,
    /// Link probability averaged over the supplied block models.
    pub probability: f64,
    /// `None` when either endpoint is unlabeled.
    pub same_label: Option<bool>,
    pub degree_a: usize,
    pub degree_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    /// Observed edges, least probable first.
    pub weakest_edges: Vec<EdgeRecord>,
    /// Unobserved pairs, most probable first.
    pub strongest_non_edges: Vec<EdgeRecord>,
}

/// Ranks observed edges by ascending and non-edges by descending mean link
/// probability under `history`, keeping `top_m` of each. Ties are broken by
/// node ids.
pub fn posterior_edge_report<T: Scalar>(
    history: &[BlockParams<T>],
    g: &Graph,
    labels: &LabelSet,
    delta: f64,
    top_m: usize,
) -> Result<EdgeReport> {
    if history.is_empty() {
        return Err(Error::InvalidParameter("empty block-model history".into()));
    }
    if let Some(bp) = history.iter().find(|bp| bp.n_nodes() != g.n_nodes()) {
        return Err(Error::Shape(format!("block model has {} nodes, graph {}", bp.n_nodes(), g.n_nodes())));
    }
    let d = T::of(delta);
    let mean_prob = |a: usize, b: usize| -> f64 {
        history
            .iter()
            .map(|bp| edge_probability(bp.pi.row(a), bp.pi.row(b), bp.beta.view(), d).as_f64())
            .sum::<f64>()
            / history.len() as f64
    };
    let record = |a: usize, b: usize, probability: f64| EdgeRecord {
        a,
        b,
        probability,
        same_label: labels.label(a).zip(labels.label(b)).map(|(x, y)| x == y),
        degree_a: g.degree(a),
        degree_b: g.degree(b),
    };
    let by_prob = |x: &EdgeRecord, y: &EdgeRecord| x.probability.total_cmp(&y.probability).then((x.a, x.b).cmp(&(y.a, y.b)));

    let mut weakest: Vec<EdgeRecord> = g.edges().par_iter().map(|&(a, b)| record(a, b, mean_prob(a, b))).collect();
    weakest.sort_by(by_prob);
    weakest.truncate(top_m);

    let n = g.n_nodes();
    let mut strongest: Vec<EdgeRecord> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let nbrs = g.neighbors(a);
            let mut row: Vec<EdgeRecord> = (a + 1..n)
                .filter(|b| nbrs.binary_search(b).is_err())
                .map(|b| record(a, b, mean_prob(a, b)))
                .collect();
            row.sort_by(|x, y| by_prob(y, x));
            row.truncate(top_m);
            row
        })
        .collect();
    strongest.sort_by(|x, y| by_prob(y, x));
    strongest.truncate(top_m);
    Ok(EdgeReport { weakest_edges: weakest, strongest_non_edges: strongest })
}
