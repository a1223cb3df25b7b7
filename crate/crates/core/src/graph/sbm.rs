use ndarray::ArrayView2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dataset::{ContainerFiles, Dataset, Manifest, MANIFEST_FORMAT};
use super::{FeatureMatrix, Graph, LabelSet, NodeRole};
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::scalar::Scalar;
use crate::sparse::Csr;

pub(crate) fn draw_categorical<T: Scalar>(rng: &mut rng::Rng, probs: impl IntoIterator<Item = T>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in probs.into_iter().enumerate() {
        acc += p.as_f64();
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

pub(crate) fn check_simplex_rows<T: Scalar>(pi: ArrayView2<'_, T>) -> Result<()> {
    for (a, row) in pi.rows().into_iter().enumerate() {
        let s: f64 = row.iter().map(|v| v.as_f64()).sum();
        if row.iter().any(|v| !(v.as_f64() >= 0.0)) || (s - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "membership row {a} is not on the simplex (sum {s})"
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Samples a graph from the assortative mixed-membership block model: for each
/// pair `a < b`, draw `z_ab ~ π_a`, `z_ba ~ π_b`, and link with probability
/// `β_k` when both equal `k`, `δ` otherwise.
pub fn generate_sbm<T: Scalar>(
    pi: ArrayView2<'_, T>,
    beta: &[T],
    delta: T,
    seed: u64,
) -> Result<Graph> {
    let (n, k) = pi.dim();
    if beta.len() != k {
        return Err(Error::Shape(format!("{} strengths for {k} communities", beta.len())));
    }
    check_simplex_rows(pi)?;
    for (i, b) in beta.iter().enumerate() {
        check_probability(&format!("beta[{i}]"), b.as_f64())?;
    }
    check_probability("delta", delta.as_f64())?;

    let mut rng = rng::rng_from(seed, &[tags::SBM]);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let za = draw_categorical(&mut rng, pi.row(a).iter().copied());
            let zb = draw_categorical(&mut rng, pi.row(b).iter().copied());
            let p = if za == zb { beta[za] } else { delta }.as_f64();
            if rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    Ok(Graph::from_canonical(n, edges))
}

/// Synthetic citation-like dataset: planted partition graph plus bag-of-words
/// features that carry a noisy class signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub words_per_node: usize,
    /// Probability that a word is drawn from the node's class vocabulary.
    pub signal: f64,
    pub train_pool_per_class: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_nodes: 300,
            n_classes: 3,
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 60,
            words_per_node: 8,
            signal: 0.4,
            train_pool_per_class: 20,
            n_test: 100,
            seed: 0,
        }
    }
}

pub fn planted_dataset(cfg: &PlantedConfig) -> Result<Dataset> {
    let (n, k) = (cfg.n_nodes, cfg.n_classes);
    if k == 0 || n < k || cfg.feature_dim < k {
        return Err(Error::InvalidParameter("planted dataset needs n >= k >= 1 and feature_dim >= k".into()));
    }
    check_probability("p_in", cfg.p_in)?;
    check_probability("p_out", cfg.p_out)?;
    check_probability("signal", cfg.signal)?;
    let class: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut pi = ndarray::Array2::<f64>::zeros((n, k));
    for i in 0..n {
        pi[[i, class[i]]] = 1.0;
    }
    let graph = generate_sbm(pi.view(), &vec![cfg.p_in; k], cfg.p_out, cfg.seed)?;

    let mut rng = rng::rng_from(cfg.seed, &[tags::SBM, 1]);
    let block = cfg.feature_dim / k;
    let mut trip = Vec::new();
    for i in 0..n {
        for _ in 0..cfg.words_per_node {
            let w = if rng.random::<f64>() < cfg.signal {
                class[i] * block + rng.random_range(0..block)
            } else {
                rng.random_range(0..cfg.feature_dim)
            };
            trip.push((i, w, 1.0));
        }
    }
    // repeated words collapse to a single binary entry
    let mut feats = Csr::from_triplets(n, cfg.feature_dim, trip)?;
    feats = feats.map_rows(|_, v| v.iter_mut().for_each(|x| *x = 1.0));

    let mut roles = vec![NodeRole::Unlabeled; n];
    let mut per_class = vec![0usize; k];
    for i in 0..n {
        if per_class[class[i]] < cfg.train_pool_per_class {
            per_class[class[i]] += 1;
            roles[i] = NodeRole::TrainPool;
        }
    }
    let mut assigned = 0;
    for i in (0..n).rev() {
        if assigned == cfg.n_test {
            break;
        }
        if roles[i] == NodeRole::Unlabeled {
            roles[i] = NodeRole::Test;
            assigned += 1;
        }
    }
    let labels = LabelSet::new(k, class.into_iter().map(Some).collect(), roles, (0..n).collect())?;
    let edge_rows = graph.n_edges();
    Ok(Dataset {
        manifest: Manifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            name: "planted".into(),
            n_nodes: n,
            n_classes: k,
            feature_dim: cfg.feature_dim,
            n_edge_rows: Some(edge_rows),
            files: ContainerFiles::default(),
        },
        graph,
        features: FeatureMatrix::new(feats).row_normalized(),
        labels,
        edge_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn certain_links_give_complete_graph() {
        let pi = Array2::from_elem((6, 1), 1.0);
        let g = generate_sbm(pi.view(), &[1.0], 0.3, 1).unwrap();
        assert_eq!(g.n_edges(), 15);
    }

    #[test]
    fn impossible_links_give_empty_graph() {
        let pi = array![[0.5, 0.5], [0.2, 0.8], [1.0, 0.0]];
        let g = generate_sbm(pi.view(), &[0.0, 0.0], 0.0, 1).unwrap();
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let pi = array![[0.5, 0.6]];
        assert!(generate_sbm(pi.view(), &[0.1, 0.1], 0.0, 0).is_err());
        let pi = array![[0.5, 0.5]];
        assert!(generate_sbm(pi.view(), &[1.1, 0.1], 0.0, 0).is_err());
        assert!(generate_sbm(pi.view(), &[0.1, 0.1], -0.1, 0).is_err());
    }

    #[test]
    fn fixed_seed_reproducible() {
        let pi = Array2::from_elem((40, 2), 0.5);
        let a = generate_sbm(pi.view(), &[0.3, 0.2], 0.05, 11).unwrap();
        let b = generate_sbm(pi.view(), &[0.3, 0.2], 0.05, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn block_edge_rates_within_three_sigma() {
        let n = 200;
        let mut pi = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            pi[[i, i % 2]] = 1.0;
        }
        let g = generate_sbm(pi.view(), &[0.2, 0.2], 0.01, 5).unwrap();
        let (mut intra, mut inter) = (0usize, 0usize);
        for &(a, b) in g.edges() {
            if a % 2 == b % 2 {
                intra += 1;
            } else {
                inter += 1;
            }
        }
        let n_intra = 2 * (100 * 99 / 2);
        let n_inter = 100 * 100;
        let check = |count: usize, trials: usize, p: f64| {
            let mean = trials as f64 * p;
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (count as f64 - mean).abs() < 3.0 * sd,
                "count {count} vs {mean} ± {sd}"
            );
        };
        check(intra, n_intra, 0.2);
        check(inter, n_inter, 0.01);
    }

    #[test]
    fn single_pair_frequency_matches_analytic() {
        let pi = array![[0.7, 0.2, 0.1], [0.3, 0.3, 0.4]];
        let beta = [0.6, 0.3, 0.9];
        let delta = 0.05;
        let same: f64 = (0..3).map(|k| pi[[0, k]] * pi[[1, k]]).sum();
        let p: f64 = (0..3).map(|k| pi[[0, k]] * pi[[1, k]] * beta[k]).sum::<f64>() + (1.0 - same) * delta;
        let reps = 10_000;
        let hits = (0..reps)
            .filter(|&s| generate_sbm(pi.view(), &beta, delta, s as u64).unwrap().n_edges() == 1)
            .count();
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((hits as f64 / reps as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn planted_dataset_shapes() {
        let ds = planted_dataset(&PlantedConfig::default()).unwrap();
        assert_eq!(ds.graph.n_nodes(), 300);
        assert_eq!(ds.labels.train().len(), 60);
        assert_eq!(ds.labels.test().len(), 100);
        assert_eq!(ds.features.dim(), 60);
    }
}
