use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;

use super::gradient::{add_beta_weights, add_pi_weights, phi_grad_from_weights, theta_grad_from_weights};
use super::{BlockParams, ExpandedParams, MmsbmHyper};
use crate::error::{Error, Result};
use crate::graph::{n_pairs, pair_from_index, Graph};
use crate::rng::{self, tags};
use crate::scalar::Scalar;

/// How non-edge terms enter a gradient sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSampling {
    /// Every non-edge pair.
    Exact,
    /// Uniform sample with replacement, rescaled to be unbiased.
    MiniBatch,
}

/// `ε_t = ε0 (t + τ)^(−κ)`.
pub fn step_size(t: u64, hyper: &MmsbmHyper) -> f64 {
    hyper.eps0 * (t as f64 + hyper.tau).powf(-hyper.kappa)
}

fn check_shapes<T: Scalar>(p: &ExpandedParams<T>, g: &Graph) -> Result<()> {
    if p.n_nodes() != g.n_nodes() {
        return Err(Error::Shape(format!("{} membership rows for {} nodes", p.n_nodes(), g.n_nodes())));
    }
    Ok(())
}

/// Non-neighbors `b > a` of `a` in increasing order.
fn upper_non_neighbors(g: &Graph, a: usize) -> impl Iterator<Item = usize> + '_ {
    let nbrs = g.neighbors(a);
    let mut j = nbrs.partition_point(|&b| b <= a);
    (a + 1..g.n_nodes()).filter(move |&b| {
        while j < nbrs.len() && nbrs[j] < b {
            j += 1;
        }
        !(j < nbrs.len() && nbrs[j] == b)
    })
}

/// Uniform non-edge by rejection over all unordered pairs. Requires at least one non-edge.
fn draw_non_edge(g: &Graph, r: &mut rng::Rng) -> (usize, usize) {
    let total = n_pairs(g.n_nodes());
    loop {
        let (a, b) = pair_from_index(g.n_nodes(), r.random_range(0..total));
        if !g.has_edge(a, b) {
            return (a, b);
        }
    }
}

/// `m` uniform non-edges drawn with replacement.
pub(crate) fn sample_non_edges(g: &Graph, m: usize, r: &mut rng::Rng) -> Vec<(usize, usize)> {
    if g.n_non_edges() == 0 {
        return Vec::new();
    }
    (0..m).map(|_| draw_non_edge(g, r)).collect()
}

pub(crate) fn all_non_edges(g: &Graph) -> Vec<(usize, usize)> {
    (0..g.n_nodes()).flat_map(|a| upper_non_neighbors(g, a).map(move |b| (a, b))).collect()
}

fn theta_weights<T: Scalar>(bp: &BlockParams<T>, g: &Graph, hyper: &MmsbmHyper, sampling: PairSampling, seed: u64) -> Vec<T> {
    let delta = T::of(hyper.delta);
    let mut w = vec![T::zero(); bp.n_communities()];
    for &(a, b) in g.edges() {
        add_beta_weights(bp, delta, true, a, b, T::one(), &mut w);
    }
    let total = g.n_non_edges();
    if total == 0 {
        return w;
    }
    let m = ((hyper.nonedge_fraction * total as f64).round() as usize).max(1);
    if sampling == PairSampling::Exact || m >= total {
        for a in 0..g.n_nodes() {
            for b in upper_non_neighbors(g, a) {
                add_beta_weights(bp, delta, false, a, b, T::one(), &mut w);
            }
        }
    } else {
        let mut r = rng::rng_from(seed, &[tags::MMSBM_THETA]);
        let scale = T::of(total as f64 / m as f64);
        for _ in 0..m {
            let (a, b) = draw_non_edge(g, &mut r);
            add_beta_weights(bp, delta, false, a, b, scale, &mut w);
        }
    }
    w
}

/// `η − 1 − ρθ + θ ∘ Σ_ab g_ab(θ)`, with the non-edge part of the sum sampled per `sampling`.
pub fn theta_bracket<T: Scalar>(
    p: &ExpandedParams<T>,
    g: &Graph,
    hyper: &MmsbmHyper,
    sampling: PairSampling,
    seed: u64,
) -> Result<Array2<T>> {
    check_shapes(p, g)?;
    let bp = p.to_block_params()?;
    let grad = theta_grad_from_weights(&p.theta, &theta_weights(&bp, g, hyper, sampling, seed));
    let (c, rho) = (T::of(hyper.eta - 1.0), T::of(hyper.rho));
    Ok(ndarray::Zip::from(&p.theta).and(&grad).map_collect(|&t, &gr| c - rho * t + t * gr))
}

/// One preconditioned stochastic step on θ, mirrored to stay non-negative.
pub fn update_theta<T: Scalar>(p: &ExpandedParams<T>, g: &Graph, t: u64, hyper: &MmsbmHyper, seed: u64) -> Result<Array2<T>> {
    let eps = T::of(step_size(t, hyper));
    let b = theta_bracket(p, g, hyper, PairSampling::MiniBatch, seed)?;
    Ok(ndarray::Zip::from(&p.theta).and(&b).map_collect(|&th, &br| (th + eps * br).abs()))
}

fn phi_weights<T: Scalar>(bp: &BlockParams<T>, g: &Graph, a: usize, hyper: &MmsbmHyper, sampling: PairSampling, seed: u64) -> Vec<T> {
    let delta = T::of(hyper.delta);
    let n = g.n_nodes();
    let mut c = vec![T::zero(); bp.n_communities()];
    let nbrs = g.neighbors(a);
    for &b in nbrs {
        add_pi_weights(bp, delta, true, a, b, T::one(), &mut c);
    }
    let total = n - 1 - nbrs.len();
    if total == 0 {
        return c;
    }
    let m = hyper.n_minibatch.saturating_sub(nbrs.len());
    if sampling == PairSampling::Exact || m == 0 || m >= total {
        let mut j = 0;
        for b in 0..n {
            while j < nbrs.len() && nbrs[j] < b {
                j += 1;
            }
            if b != a && !(j < nbrs.len() && nbrs[j] == b) {
                add_pi_weights(bp, delta, false, a, b, T::one(), &mut c);
            }
        }
    } else {
        let mut r = rng::rng_from(seed, &[tags::MMSBM_PHI, a as u64]);
        let scale = T::of(total as f64 / m as f64);
        let mut drawn = 0;
        while drawn < m {
            let b = r.random_range(0..n);
            if b != a && nbrs.binary_search(&b).is_err() {
                add_pi_weights(bp, delta, false, a, b, scale, &mut c);
                drawn += 1;
            }
        }
    }
    c
}

/// Brackets `α − 1 − ρφ_a + φ_a ∘ Σ_b g_ab(φ_a)` for each node of `batch`, one row per node in batch order.
///
/// Non-neighbors are sampled `n_minibatch − |N(a)|` at a time; when that count
/// is not positive, or covers every non-neighbor, the exact sum is used.
pub fn phi_bracket<T: Scalar>(
    p: &ExpandedParams<T>,
    g: &Graph,
    batch: &[usize],
    hyper: &MmsbmHyper,
    sampling: PairSampling,
    seed: u64,
) -> Result<Array2<T>> {
    check_shapes(p, g)?;
    if let Some(&a) = batch.iter().find(|&&a| a >= g.n_nodes()) {
        return Err(Error::InvalidParameter(format!("batch node {a} out of range")));
    }
    let bp = p.to_block_params()?;
    let (c0, rho) = (T::of(hyper.alpha - 1.0), T::of(hyper.rho));
    let rows: Vec<Vec<T>> = batch
        .par_iter()
        .map(|&a| {
            let c = phi_weights(&bp, g, a, hyper, sampling, seed);
            let grad = phi_grad_from_weights(p.phi.row(a), bp.pi.row(a), &c);
            p.phi.row(a).iter().zip(grad.iter()).map(|(&f, &gr)| c0 - rho * f + f * gr).collect()
        })
        .collect();
    let k = p.n_communities();
    Ok(Array2::from_shape_vec((batch.len(), k), rows.into_iter().flatten().collect()).expect("row lengths match K"))
}

/// One preconditioned stochastic step on the φ rows of `batch`; other rows are copied unchanged.
pub fn update_phi<T: Scalar>(
    p: &ExpandedParams<T>,
    g: &Graph,
    batch: &[usize],
    t: u64,
    hyper: &MmsbmHyper,
    seed: u64,
) -> Result<Array2<T>> {
    let eps = T::of(step_size(t, hyper));
    let b = phi_bracket(p, g, batch, hyper, PairSampling::MiniBatch, seed)?;
    let mut phi = p.phi.clone();
    for (i, &a) in batch.iter().enumerate() {
        for (f, &br) in phi.row_mut(a).iter_mut().zip(b.row(i).iter()) {
            *f = (*f + eps * br).abs();
        }
    }
    Ok(phi)
}

/// `size` distinct nodes drawn uniformly (all nodes when `size ≥ n_nodes`), sorted.
pub fn sample_node_batch(n_nodes: usize, size: usize, seed: u64) -> Vec<usize> {
    if size >= n_nodes {
        return (0..n_nodes).collect();
    }
    let mut r = rng::rng_from(seed, &[tags::MMSBM_BATCH]);
    let mut v = rand::seq::index::sample(&mut r, n_nodes, size).into_vec();
    v.sort_unstable();
    v
}
