use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::likelihood::log_joint_on_pairs;
use super::update::{all_non_edges, sample_non_edges, sample_node_batch, step_size, update_phi, update_theta};
use super::{BlockParams, ExpandedParams, MmsbmHyper};
use crate::error::{Error, Result};
use crate::graph::{check_simplex_rows, Graph};
use crate::rng::{self, tags};
use crate::scalar::Scalar;

/// Non-edges kept for the fixed evaluation subsample of the trace.
const EVAL_NON_EDGES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub log_joint: f64,
    pub step_size: f64,
}

/// A single MAP chain whose iteration counter (and so its step size) persists
/// across calls to [`MmsbmChain::run`].
#[derive(Debug, Clone)]
pub struct MmsbmChain<T> {
    params: ExpandedParams<T>,
    hyper: MmsbmHyper,
    seed: u64,
    iteration: u64,
    trace_every: u64,
    eval_non_edges: Vec<(usize, usize)>,
    eval_scale: f64,
    trace: Vec<TracePoint>,
}

impl<T: Scalar> MmsbmChain<T> {
    pub fn new(g: &Graph, init: ExpandedParams<T>, hyper: MmsbmHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if init.n_nodes() != g.n_nodes() {
            return Err(Error::Shape(format!("{} membership rows for {} nodes", init.n_nodes(), g.n_nodes())));
        }
        init.to_block_params()?;
        let total = g.n_non_edges();
        let (eval_non_edges, eval_scale) = if total <= EVAL_NON_EDGES {
            (all_non_edges(g), 1.0)
        } else {
            let mut r = rng::rng_from(seed, &[tags::MMSBM_THETA, u64::MAX]);
            (sample_non_edges(g, EVAL_NON_EDGES, &mut r), total as f64 / EVAL_NON_EDGES as f64)
        };
        Ok(Self {
            params: init,
            hyper,
            seed,
            iteration: 0,
            trace_every: 0,
            eval_non_edges,
            eval_scale,
            trace: Vec::new(),
        })
    }

    /// Record a trace point every `every` iterations (0 disables tracing).
    pub fn with_trace(mut self, every: u64) -> Self {
        self.trace_every = every;
        self
    }

    pub fn params(&self) -> &ExpandedParams<T> {
        &self.params
    }

    pub fn into_params(self) -> ExpandedParams<T> {
        self.params
    }

    pub fn hyper(&self) -> &MmsbmHyper {
        &self.hyper
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    pub fn block_params(&self) -> Result<BlockParams<T>> {
        self.params.to_block_params()
    }

    /// Log joint with non-edges estimated from the chain's fixed evaluation subsample.
    pub fn log_joint_estimate(&self, g: &Graph) -> Result<f64> {
        log_joint_on_pairs(&self.params, g, &self.hyper, &self.eval_non_edges, self.eval_scale)
    }

    /// Runs `iters` iterations, each one θ step followed by one φ step on a fresh node batch.
    pub fn run(&mut self, g: &Graph, iters: usize) -> Result<()> {
        if g.n_nodes() != self.params.n_nodes() {
            return Err(Error::Shape("graph does not match chain".into()));
        }
        for _ in 0..iters {
            let t = self.iteration;
            let s = rng::derive_seed(self.seed, &[t]);
            let theta = update_theta(&self.params, g, t, &self.hyper, s)?;
            self.params.theta = theta;
            let batch = sample_node_batch(g.n_nodes(), self.hyper.n_minibatch, s);
            let phi = update_phi(&self.params, g, &batch, t, &self.hyper, s)?;
            self.params.phi = phi;
            self.iteration += 1;
            if !self.params.is_finite() {
                return Err(Error::NonFiniteParameter { iteration: t });
            }
            if self.params.to_block_params().is_err() {
                return Err(Error::NonFiniteParameter { iteration: t });
            }
            if self.trace_every > 0 && self.iteration % self.trace_every == 0 {
                let lj = self.log_joint_estimate(g)?;
                self.trace.push(TracePoint {
                    iteration: self.iteration,
                    log_joint: lj,
                    step_size: step_size(t, &self.hyper),
                });
            }
        }
        Ok(())
    }

    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_trace(path, &self.trace)
    }
}

/// `iters` MAP iterations starting from `init` mapped to expanded coordinates.
pub fn map_inference<T: Scalar>(
    g: &Graph,
    init: &BlockParams<T>,
    iters: usize,
    hyper: &MmsbmHyper,
    seed: u64,
) -> Result<ExpandedParams<T>> {
    init.validate()?;
    let start = ExpandedParams::from_block(init, hyper.init_phi_scale, hyper.init_theta_scale);
    let mut chain = MmsbmChain::new(g, start, hyper.clone(), seed)?;
    chain.run(g, iters)?;
    Ok(chain.into_params())
}

/// Initial parameters from a classifier's soft assignments `z` (`N × K`).
///
/// `φ_a = c_φ z_a`. Each `β_k` is the link rate among pairs weighted by their
/// joint membership `z_ak z_bk`, clamped to `[δ, 1 − 10δ]`; a community with no
/// pair weight gets `δ`. For one-hot `z` this is the within-block edge density.
pub fn init_from_softmax<T: Scalar>(z: ArrayView2<'_, T>, g: &Graph, hyper: &MmsbmHyper) -> Result<ExpandedParams<T>> {
    hyper.validate()?;
    let (n, k) = z.dim();
    if n != g.n_nodes() || k == 0 {
        return Err(Error::Shape(format!("softmax is {n}×{k} for {} nodes", g.n_nodes())));
    }
    check_simplex_rows(z)?;
    let mut linked = vec![0.0f64; k];
    for &(a, b) in g.edges() {
        for (c, l) in linked.iter_mut().enumerate() {
            *l += z[[a, c]].as_f64() * z[[b, c]].as_f64();
        }
    }
    let beta = Array1::from_iter((0..k).map(|c| {
        let col = z.column(c);
        let s: f64 = col.iter().map(|v| v.as_f64()).sum();
        let sq: f64 = col.iter().map(|v| v.as_f64().powi(2)).sum();
        let pairs = (s * s - sq) / 2.0;
        let rate = if pairs > 0.0 { linked[c] / pairs } else { hyper.delta };
        T::of(rate.clamp(hyper.delta, 1.0 - 10.0 * hyper.delta))
    }));
    let bp = BlockParams { pi: z.to_owned(), beta };
    Ok(ExpandedParams::from_block(&bp, hyper.init_phi_scale, hyper.init_theta_scale))
}

/// Writes `iteration,log_joint,step_size` rows.
pub fn write_trace(path: impl AsRef<Path>, points: &[TracePoint]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "iteration,log_joint,step_size").map_err(|e| Error::io(path, e))?;
    for p in points {
        writeln!(f, "{},{},{}", p.iteration, p.log_joint, p.step_size).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
