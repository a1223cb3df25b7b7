//! Graph draws from a fitted block model.
//!
//! Pairs are independent with `p_ab = Σ_k π_ak π_bk β_k + (1 − Σ_k π_ak π_bk) δ`.
//! [`SampleMethod::Exact`] visits every pair. [`SampleMethod::Fast`] produces the
//! same distribution from sparse candidate streams: a background stream that
//! proposes each pair with probability `δ` (geometric skipping over the pair
//! index), plus one stream per community with `β_k > δ` that proposes pairs with
//! the product-form probability `min(1, π_ak π_bk g_k)`. Each proposal is
//! accepted with its exact target over proposal ratio, so every pair's event is
//! an independent union whose probability is `p_ab`.

use std::io::Write as _;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{n_pairs, pair_from_index, Graph};
use crate::mmsbm::BlockParams;
use crate::rng::{self, tags};
use crate::scalar::Scalar;

pub use crate::mmsbm::edge_probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    #[default]
    Exact,
    Fast,
}

/// A sampled graph and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGraph {
    pub graph: Graph,
    /// [`BlockParams::content_hash`] of the source parameters.
    pub source_hash: String,
    pub seed: u64,
    pub method: SampleMethod,
}

/// Draws `G ~ p(G | π, β)` with cross-community link probability `delta`.
pub fn sample_graph<T: Scalar>(bp: &BlockParams<T>, delta: f64, seed: u64, method: SampleMethod) -> Result<SampledGraph> {
    bp.validate()?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta = {delta} is not a probability")));
    }
    let pi: Vec<Vec<f64>> = bp.pi.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    let beta: Vec<f64> = bp.beta.iter().map(|v| v.as_f64()).collect();
    let model = Model { pi: &pi, beta: &beta, delta };
    let beta_max = beta.iter().copied().fold(delta, f64::max);
    let edges = match method {
        // proposal bounds degenerate as max β → 1; the exact sweep has no such limit
        SampleMethod::Fast if beta_max < 1.0 - 1e-9 => model.fast(seed, 1.0 - beta_max),
        _ => model.exact(seed),
    };
    Ok(SampledGraph {
        graph: Graph::from_edges(pi.len(), edges)?,
        source_hash: bp.content_hash(),
        seed,
        method,
    })
}

struct Model<'a> {
    pi: &'a [Vec<f64>],
    beta: &'a [f64],
    delta: f64,
}

impl Model<'_> {
    fn prob(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (&self.pi[a], &self.pi[b]);
        let mut p = self.delta;
        for k in 0..self.beta.len() {
            p += pa[k] * pb[k] * (self.beta[k] - self.delta);
        }
        p.clamp(0.0, 1.0)
    }

    fn exact(&self, seed: u64) -> Vec<(usize, usize)> {
        let n = self.pi.len();
        (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let mut r = rng::rng_from(seed, &[tags::GRAPH_SAMPLE, 0, a as u64]);
                (a + 1..n).filter(move |&b| r.random::<f64>() < self.prob(a, b)).map(move |b| (a, b))
            })
            .collect()
    }

    /// Background probability: `δ`, thinned by communities with `β_k < δ`.
    fn background(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (&self.pi[a], &self.pi[b]);
        let mut p = self.delta;
        for (k, &bk) in self.beta.iter().enumerate() {
            if bk < self.delta {
                p -= pa[k] * pb[k] * (self.delta - bk);
            }
        }
        p.max(0.0)
    }

    /// Probability that stream `k` fires for `(a, b)`: sequential conditionals
    /// `s_k = t_k / (1 − Σ_{j<k} t_j)` with `t_j = π_aj π_bj (β_j − δ) / (1 − bg)`,
    /// so that `bg ∪ streams` has probability `p_ab`.
    fn stream_prob(&self, a: usize, b: usize, k: usize) -> f64 {
        let (pa, pb) = (&self.pi[a], &self.pi[b]);
        let rest = 1.0 - self.background(a, b);
        if rest <= 0.0 {
            return 0.0;
        }
        let mut before = 0.0;
        for j in 0..k {
            if self.beta[j] > self.delta {
                before += pa[j] * pb[j] * (self.beta[j] - self.delta) / rest;
            }
        }
        let t = pa[k] * pb[k] * (self.beta[k] - self.delta) / rest;
        if before >= 1.0 {
            0.0
        } else {
            (t / (1.0 - before)).clamp(0.0, 1.0)
        }
    }

    fn fast(&self, seed: u64, min_non_link: f64) -> Vec<(usize, usize)> {
        let n = self.pi.len();
        let mut edges = Vec::new();
        if self.delta > 0.0 {
            let total = n_pairs(n);
            let mut r = rng::rng_from(seed, &[tags::GRAPH_SAMPLE, 1]);
            let mut idx = 0usize;
            loop {
                idx = idx.saturating_add(geometric_skip(self.delta, &mut r));
                if idx >= total {
                    break;
                }
                let (a, b) = pair_from_index(n, idx);
                if r.random::<f64>() * self.delta < self.background(a, b) {
                    edges.push((a, b));
                }
                idx += 1;
            }
        }
        for (k, &bk) in self.beta.iter().enumerate() {
            if bk <= self.delta {
                continue;
            }
            // s_k ≤ π_ak π_bk (β_k − δ) / (1 − p_ab) ≤ π_ak π_bk g_k
            let g = (bk - self.delta) / min_non_link;
            let weights: Vec<f64> = self.pi.iter().map(|row| row[k] * g.sqrt()).collect();
            let mut r = rng::rng_from(seed, &[tags::GRAPH_SAMPLE, 2, k as u64]);
            product_candidates(&weights, &mut r, |a, b, q, u| {
                if u * q < self.stream_prob(a, b, k) {
                    edges.push((a.min(b), a.max(b)));
                }
            });
        }
        edges
    }
}

/// Number of failures before the first success of a Bernoulli(`q`) sequence.
fn geometric_skip(q: f64, r: &mut rng::Rng) -> usize {
    if q >= 1.0 {
        return 0;
    }
    let u = 1.0 - r.random::<f64>();
    let s = (u.ln() / (1.0 - q).ln()).floor();
    if s >= usize::MAX as f64 {
        usize::MAX
    } else {
        s as usize
    }
}

/// Proposes each unordered pair `(a, b)` independently with probability
/// `min(1, w_a w_b)`, calling `visit(a, b, proposal_probability, u)` with a fresh
/// uniform `u` for the caller's acceptance test. Expected work is linear in
/// the number of nodes plus proposals.
fn product_candidates(weights: &[f64], r: &mut rng::Rng, mut visit: impl FnMut(usize, usize, f64, f64)) {
    let mut order: Vec<usize> = (0..weights.len()).filter(|&a| weights[a] > 0.0).collect();
    order.sort_by(|&x, &y| weights[y].total_cmp(&weights[x]).then(x.cmp(&y)));
    let len = order.len();
    for i in 0..len {
        let wa = weights[order[i]];
        let mut j = i + 1;
        if j >= len {
            break;
        }
        let mut q = (wa * weights[order[j]]).min(1.0);
        while j < len && q > 0.0 {
            j = j.saturating_add(geometric_skip(q, r));
            if j >= len {
                break;
            }
            let q2 = (wa * weights[order[j]]).min(1.0);
            if r.random::<f64>() * q < q2 {
                let u = r.random::<f64>();
                visit(order[i], order[j], q2, u);
            }
            q = q2;
            j += 1;
        }
    }
}

/// Writes the graph's edges as an `edges.csv` file (`src,dst`, one row per undirected edge).
pub fn write_edges_csv(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let e = |err| Error::io(path, err);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(e)?);
    writeln!(w, "src,dst").map_err(e)?;
    for &(a, b) in g.edges() {
        writeln!(w, "{a},{b}").map_err(e)?;
    }
    w.flush().map_err(e)
}

/// `Σ_{a<b} p_ab`, the expected number of edges.
pub fn expected_edge_count<T: Scalar>(bp: &BlockParams<T>, delta: T) -> f64 {
    let n = bp.n_nodes();
    (0..n)
        .into_par_iter()
        .map(|a| {
            (a + 1..n)
                .map(|b| edge_probability(bp.pi.row(a), bp.pi.row(b), bp.beta.view(), delta).as_f64())
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}
