use ndarray::ArrayView1;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::{BlockParams, ExpandedParams, MmsbmHyper};
use crate::error::Result;
use crate::graph::Graph;
use crate::scalar::Scalar;

/// Probabilities below this are clamped before taking logs.
pub const LIKELIHOOD_FLOOR: f64 = 1e-15;

/// Unclamped `p(y | π_a, π_b, β)` with both indicators summed out.
#[inline]
pub(crate) fn collapsed<T: Scalar>(y: bool, pi_a: ArrayView1<'_, T>, pi_b: ArrayView1<'_, T>, beta: ArrayView1<'_, T>, delta: T) -> T {
    let f = |q: T| if y { q } else { T::one() - q };
    let fd = f(delta);
    let mut p = fd;
    for ((&xa, &xb), &bk) in pi_a.iter().zip(pi_b.iter()).zip(beta.iter()) {
        p += xa * xb * (f(bk) - fd);
    }
    p
}

/// Probability of a link between `a` and `b`.
pub fn edge_probability<T: Scalar>(pi_a: ArrayView1<'_, T>, pi_b: ArrayView1<'_, T>, beta: ArrayView1<'_, T>, delta: T) -> T {
    collapsed(true, pi_a, pi_b, beta, delta)
}

/// `log p(y_ab | π_a, π_b, β)`, floored at [`LIKELIHOOD_FLOOR`].
pub fn edge_loglik<T: Scalar>(y: bool, pi_a: ArrayView1<'_, T>, pi_b: ArrayView1<'_, T>, beta: ArrayView1<'_, T>, delta: T) -> T {
    collapsed(y, pi_a, pi_b, beta, delta).max(T::of(LIKELIHOOD_FLOOR)).ln()
}

fn gamma_log_density(x: f64, shape: f64, rate: f64) -> f64 {
    let power = if shape == 1.0 { 0.0 } else { (shape - 1.0) * x.ln() };
    shape * rate.ln() - ln_gamma(shape) + power - rate * x
}

fn log_prior<T: Scalar>(p: &ExpandedParams<T>, hyper: &MmsbmHyper) -> f64 {
    let th: f64 = p.theta.iter().map(|v| gamma_log_density(v.as_f64(), hyper.eta, hyper.rho)).sum();
    let ph: f64 = p.phi.iter().map(|v| gamma_log_density(v.as_f64(), hyper.alpha, hyper.rho)).sum();
    th + ph
}

/// Gamma log-priors plus the collapsed log-likelihood of every pair `a < b`.
pub fn log_joint<T: Scalar>(p: &ExpandedParams<T>, g: &Graph, hyper: &MmsbmHyper) -> Result<f64> {
    let bp = p.to_block_params()?;
    let delta = T::of(hyper.delta);
    let n = g.n_nodes();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|a| {
            let nbrs = g.neighbors(a);
            let mut s = 0.0;
            for b in a + 1..n {
                let y = nbrs.binary_search(&b).is_ok();
                s += edge_loglik(y, bp.pi.row(a), bp.pi.row(b), bp.beta.view(), delta).as_f64();
            }
            s
        })
        .collect();
    Ok(log_prior(p, hyper) + rows.iter().sum::<f64>())
}

/// Log joint with the non-edge part estimated from `non_edges`, each term weighted by `scale`.
pub fn log_joint_on_pairs<T: Scalar>(
    p: &ExpandedParams<T>,
    g: &Graph,
    hyper: &MmsbmHyper,
    non_edges: &[(usize, usize)],
    scale: f64,
) -> Result<f64> {
    let bp = p.to_block_params()?;
    Ok(log_prior(p, hyper) + pair_sum(&bp, hyper, g.edges(), true) + scale * pair_sum(&bp, hyper, non_edges, false))
}

fn pair_sum<T: Scalar>(bp: &BlockParams<T>, hyper: &MmsbmHyper, pairs: &[(usize, usize)], y: bool) -> f64 {
    let delta = T::of(hyper.delta);
    pairs
        .iter()
        .map(|&(a, b)| edge_loglik(y, bp.pi.row(a), bp.pi.row(b), bp.beta.view(), delta).as_f64())
        .sum()
}
