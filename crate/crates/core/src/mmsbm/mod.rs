//! MAP inference for the assortative mixed-membership stochastic block model.
//!
//! Each node `a` holds a membership vector `π_a` on the simplex and each
//! community a strength `β_k`. For a pair `(a, b)` the link probability, after
//! summing out the two community indicators, is
//!
//! ```text
//! p(y_ab = 1) = Σ_k π_ak π_bk β_k + (1 − Σ_k π_ak π_bk) δ
//! ```
//!
//! Optimization runs in expanded-mean coordinates: `β_k = θ_k1 / (θ_k0 + θ_k1)`
//! and `π_ak = φ_ak / Σ_l φ_al`, with independent Gamma priors on every `θ`
//! and `φ` entry. Updates are preconditioned by `diag(θ)` / `diag(φ)` and kept
//! non-negative by mirroring (absolute value).

mod gradient;
mod inference;
mod likelihood;
mod update;

pub use gradient::{grad_phi, grad_theta};
pub use inference::{init_from_softmax, map_inference, write_trace, MmsbmChain, TracePoint};
pub use likelihood::{edge_loglik, edge_probability, log_joint, log_joint_on_pairs, LIKELIHOOD_FLOOR};
pub use update::{
    phi_bracket, sample_node_batch, step_size, theta_bracket, update_phi, update_theta, PairSampling,
};

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmsbmHyper {
    /// Gamma shape for θ.
    pub eta: f64,
    /// Gamma shape for φ.
    pub alpha: f64,
    /// Gamma rate shared by θ and φ.
    pub rho: f64,
    /// Cross-community link probability.
    pub delta: f64,
    /// Nodes whose φ rows are updated per iteration.
    pub n_minibatch: usize,
    pub eps0: f64,
    pub tau: f64,
    pub kappa: f64,
    /// Fraction of non-edges sampled for the θ gradient (1.0 = exact sum).
    pub nonedge_fraction: f64,
    /// φ_a = c_phi · Z_a at initialization.
    pub init_phi_scale: f64,
    /// θ_k = c_theta · (1 − β_k, β_k) at initialization.
    pub init_theta_scale: f64,
}

impl Default for MmsbmHyper {
    fn default() -> Self {
        Self {
            eta: 1.0,
            alpha: 1.0,
            rho: 0.001,
            delta: 1e-4,
            n_minibatch: 500,
            eps0: 1.0,
            tau: 1024.0,
            kappa: 0.5,
            nonedge_fraction: 0.01,
            init_phi_scale: 10.0,
            init_theta_scale: 1.0,
        }
    }
}

impl MmsbmHyper {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eta", self.eta),
            ("alpha", self.alpha),
            ("rho", self.rho),
            ("eps0", self.eps0),
            ("tau", self.tau),
            ("kappa", self.kappa),
            ("nonedge_fraction", self.nonedge_fraction),
            ("init_phi_scale", self.init_phi_scale),
            ("init_theta_scale", self.init_theta_scale),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if self.n_minibatch == 0 {
            return Err(Error::InvalidParameter("n_minibatch must be >= 1".into()));
        }
        Ok(())
    }
}

/// Non-negative expanded-mean parameters: `theta` is `K × 2` (columns θ_k0, θ_k1),
/// `phi` is `N × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedParams<T> {
    pub theta: Array2<T>,
    pub phi: Array2<T>,
}

/// `π` (row-stochastic, `N × K`) and `β` (length `K`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T> {
    pub pi: Array2<T>,
    pub beta: Array1<T>,
}

impl<T: Scalar> ExpandedParams<T> {
    pub fn new(theta: Array2<T>, phi: Array2<T>) -> Result<Self> {
        if theta.ncols() != 2 || theta.nrows() != phi.ncols() {
            return Err(Error::Shape(format!(
                "theta {:?} incompatible with phi {:?}",
                theta.dim(),
                phi.dim()
            )));
        }
        if theta.iter().chain(phi.iter()).any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidParameter("expanded parameters must be finite and >= 0".into()));
        }
        Ok(Self { theta, phi })
    }

    pub fn n_nodes(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_communities(&self) -> usize {
        self.theta.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(self.phi.iter()).all(|v| v.is_finite())
    }

    /// Expanded coordinates reproducing `bp` exactly (up to rounding) at the given magnitudes.
    pub fn from_block(bp: &BlockParams<T>, phi_scale: f64, theta_scale: f64) -> Self {
        let (cp, ct) = (T::of(phi_scale), T::of(theta_scale));
        let phi = bp.pi.mapv(|v| v * cp);
        let mut theta = Array2::zeros((bp.beta.len(), 2));
        for (k, &b) in bp.beta.iter().enumerate() {
            theta[[k, 0]] = ct * (T::one() - b);
            theta[[k, 1]] = ct * b;
        }
        Self { theta, phi }
    }

    pub fn to_block_params(&self) -> Result<BlockParams<T>> {
        to_block_params(self)
    }
}

/// `β_k = θ_k1/(θ_k0 + θ_k1)`, `π_ak = φ_ak / Σ_l φ_al`.
pub fn to_block_params<T: Scalar>(p: &ExpandedParams<T>) -> Result<BlockParams<T>> {
    let mut beta = Array1::zeros(p.n_communities());
    for (k, row) in p.theta.rows().into_iter().enumerate() {
        let s = row[0] + row[1];
        if !(s > T::zero()) {
            return Err(Error::InvalidParameter(format!("theta row {k} sums to zero")));
        }
        beta[k] = row[1] / s;
    }
    let mut pi = p.phi.clone();
    for (a, mut row) in pi.rows_mut().into_iter().enumerate() {
        let s = row.sum();
        if !(s > T::zero()) {
            return Err(Error::InvalidParameter(format!("phi row {a} sums to zero")));
        }
        row.mapv_inplace(|v| v / s);
    }
    Ok(BlockParams { pi, beta })
}

impl<T: Scalar> BlockParams<T> {
    pub fn n_nodes(&self) -> usize {
        self.pi.nrows()
    }

    pub fn n_communities(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pi.ncols() != self.beta.len() {
            return Err(Error::Shape(format!(
                "pi has {} columns, beta has {} entries",
                self.pi.ncols(),
                self.beta.len()
            )));
        }
        crate::graph::check_simplex_rows(self.pi.view())?;
        if let Some(b) = self.beta.iter().find(|b| !(**b >= T::zero() && **b <= T::one())) {
            return Err(Error::InvalidParameter(format!("beta entry {b} outside [0, 1]")));
        }
        Ok(())
    }

    /// Stable content hash (SHA-256 over little-endian f64 values), used as graph provenance.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.pi.nrows() as u64).to_le_bytes());
        h.update((self.pi.ncols() as u64).to_le_bytes());
        for v in self.pi.iter().chain(self.beta.iter()) {
            h.update(v.as_f64().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

const PARAMS_FORMAT: &str = "bgcnn-mmsbm-params";
const PARAMS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    format: String,
    version: u32,
    iteration: u64,
    hyper: MmsbmHyper,
    theta: Vec<[f64; 2]>,
    phi: Vec<Vec<f64>>,
}

/// Versioned JSON checkpoint of the expanded parameters and hyperparameters.
pub fn params_to_json<T: Scalar>(p: &ExpandedParams<T>, hyper: &MmsbmHyper, iteration: u64) -> Result<String> {
    let rec = ParamsRecord {
        format: PARAMS_FORMAT.into(),
        version: PARAMS_VERSION,
        iteration,
        hyper: hyper.clone(),
        theta: p.theta.rows().into_iter().map(|r| [r[0].as_f64(), r[1].as_f64()]).collect(),
        phi: p.phi.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect(),
    };
    Ok(serde_json::to_string(&rec)?)
}

pub fn params_from_json<T: Scalar>(s: &str) -> Result<(ExpandedParams<T>, MmsbmHyper, u64)> {
    let rec: ParamsRecord = serde_json::from_str(s)?;
    if rec.format != PARAMS_FORMAT || rec.version != PARAMS_VERSION {
        return Err(Error::InvalidParameter(format!(
            "unsupported parameter checkpoint {} v{}",
            rec.format, rec.version
        )));
    }
    let k = rec.theta.len();
    let theta = Array2::from_shape_vec((k, 2), rec.theta.iter().flatten().map(|&v| T::of(v)).collect())
        .map_err(|e| Error::Shape(e.to_string()))?;
    let n = rec.phi.len();
    if rec.phi.iter().any(|r| r.len() != k) {
        return Err(Error::Shape("phi rows must have one entry per community".into()));
    }
    let phi = Array2::from_shape_vec((n, k), rec.phi.into_iter().flatten().map(T::of).collect())
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok((ExpandedParams::new(theta, phi)?, rec.hyper, rec.iteration))
}

pub fn save_params<T: Scalar>(
    path: impl AsRef<Path>,
    p: &ExpandedParams<T>,
    hyper: &MmsbmHyper,
    iteration: u64,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, params_to_json(p, hyper, iteration)?).map_err(|e| Error::io(path, e))
}
