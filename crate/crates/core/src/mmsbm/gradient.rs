//! Pair gradients of the collapsed log-likelihood.
//!
//! Write `f(y; q) = q` for `y = 1`, `1 − q` otherwise, and `p` for the collapsed
//! pair likelihood. Then
//!
//! ```text
//! ∂ log p / ∂β_k   = π_ak π_bk (2y − 1) / p
//! ∂ log p / ∂π_al  = π_bl (f(y; β_l) − f(y; δ)) / p
//! ∂β_k / ∂θ_k0     = −θ_k1 / (θ_k0 + θ_k1)²
//! ∂β_k / ∂θ_k1     =  θ_k0 / (θ_k0 + θ_k1)²
//! ∂π_al / ∂φ_ak    = (1[l = k] − π_al) / Σ_j φ_aj
//! ```
//!
//! Both gradients are linear in per-pair weight vectors, so sums over many
//! pairs are accumulated in those weights and mapped to θ / φ once.

use ndarray::{Array1, Array2, ArrayView1};

use super::likelihood::collapsed;
use super::{BlockParams, ExpandedParams, MmsbmHyper, LIKELIHOOD_FLOOR};
use crate::error::Result;
use crate::scalar::Scalar;

/// Adds `scale · ∂ log p_ab / ∂β_k` to `acc[k]`. Clamped pairs contribute nothing.
#[inline]
pub(crate) fn add_beta_weights<T: Scalar>(bp: &BlockParams<T>, delta: T, y: bool, a: usize, b: usize, scale: T, acc: &mut [T]) {
    let (pa, pb) = (bp.pi.row(a), bp.pi.row(b));
    let p = collapsed(y, pa, pb, bp.beta.view(), delta);
    if p < T::of(LIKELIHOOD_FLOOR) {
        return;
    }
    let s = if y { scale / p } else { -scale / p };
    for ((w, &xa), &xb) in acc.iter_mut().zip(pa.iter()).zip(pb.iter()) {
        *w += s * xa * xb;
    }
}

/// Adds `scale · ∂ log p_ab / ∂π_a·` to `acc`.
#[inline]
pub(crate) fn add_pi_weights<T: Scalar>(bp: &BlockParams<T>, delta: T, y: bool, a: usize, b: usize, scale: T, acc: &mut [T]) {
    let (pa, pb) = (bp.pi.row(a), bp.pi.row(b));
    let p = collapsed(y, pa, pb, bp.beta.view(), delta);
    if p < T::of(LIKELIHOOD_FLOOR) {
        return;
    }
    let s = scale / p;
    for ((c, &xb), &bk) in acc.iter_mut().zip(pb.iter()).zip(bp.beta.iter()) {
        // f(1; β) − f(1; δ) = β − δ and f(0; β) − f(0; δ) = δ − β
        let diff = if y { bk - delta } else { delta - bk };
        *c += s * xb * diff;
    }
}

/// Maps accumulated β-weights to a `K × 2` θ gradient.
pub(crate) fn theta_grad_from_weights<T: Scalar>(theta: &Array2<T>, w: &[T]) -> Array2<T> {
    let mut out = Array2::zeros(theta.dim());
    for (k, &wk) in w.iter().enumerate() {
        let (t0, t1) = (theta[[k, 0]], theta[[k, 1]]);
        let s = t0 + t1;
        let s2 = s * s;
        out[[k, 0]] = -wk * t1 / s2;
        out[[k, 1]] = wk * t0 / s2;
    }
    out
}

/// Maps accumulated π-weights for node `a` to a φ_a gradient.
pub(crate) fn phi_grad_from_weights<T: Scalar>(phi_a: ArrayView1<'_, T>, pi_a: ArrayView1<'_, T>, c: &[T]) -> Array1<T> {
    let s = phi_a.sum();
    let mean: T = pi_a.iter().zip(c).map(|(&p, &ck)| p * ck).sum();
    Array1::from_iter(c.iter().map(|&ck| (ck - mean) / s))
}

/// Gradient of `log p(y_ab | ·)` with respect to θ.
pub fn grad_theta<T: Scalar>(y: bool, a: usize, b: usize, p: &ExpandedParams<T>, hyper: &MmsbmHyper) -> Result<Array2<T>> {
    let bp = p.to_block_params()?;
    let mut w = vec![T::zero(); p.n_communities()];
    add_beta_weights(&bp, T::of(hyper.delta), y, a, b, T::one(), &mut w);
    Ok(theta_grad_from_weights(&p.theta, &w))
}

/// Gradient of `log p(y_ab | ·)` with respect to the row φ_a.
pub fn grad_phi<T: Scalar>(y: bool, a: usize, b: usize, p: &ExpandedParams<T>, hyper: &MmsbmHyper) -> Result<Array1<T>> {
    let bp = p.to_block_params()?;
    let mut c = vec![T::zero(); p.n_communities()];
    add_pi_weights(&bp, T::of(hyper.delta), y, a, b, T::one(), &mut c);
    Ok(phi_grad_from_weights(p.phi.row(a), bp.pi.row(a), &c))
}
