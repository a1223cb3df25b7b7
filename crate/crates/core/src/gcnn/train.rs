use ndarray::Array2;
use rayon::prelude::*;

use super::model::{backward, forward};
use super::{Activation, DropoutMask, GcnnConfig, GcnnWeights, Optimizer};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelSet, PropagationMatrix};
use crate::rng::{self, tags};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub weights: GcnnWeights<T>,
    /// Training loss (with the dropout masks of that step) before each update.
    pub loss_history: Vec<T>,
}

struct Adam<T> {
    m: GcnnWeights<T>,
    v: GcnnWeights<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(like: &GcnnWeights<T>) -> Self {
        let z = GcnnWeights {
            w0: Array2::zeros(like.w0.dim()),
            w1: Array2::zeros(like.w1.dim()),
        };
        Self { m: z.clone(), v: z, t: 0 }
    }

    fn step(&mut self, w: &mut GcnnWeights<T>, g0: &Array2<T>, g1: &Array2<T>, lr: T) {
        self.t += 1;
        let (b1, b2) = (T::of(Self::BETA1), T::of(Self::BETA2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let eps = T::of(Self::EPS);
        let update = |w: &mut Array2<T>, m: &mut Array2<T>, v: &mut Array2<T>, g: &Array2<T>| {
            ndarray::Zip::from(w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *w -= lr * mh / (vh.sqrt() + eps);
            });
        };
        update(&mut w.w0, &mut self.m.w0, &mut self.v.w0, g0);
        update(&mut w.w1, &mut self.m.w1, &mut self.v.w1, g1);
    }
}

/// Trains for `cfg.epochs` full-batch steps with fresh dropout masks per step.
/// Starts from `init` when given, otherwise from a Glorot draw seeded by `cfg.seed`.
pub fn train<T: Scalar>(
    a: &PropagationMatrix<T>,
    x: &FeatureMatrix<T>,
    labels: &LabelSet,
    cfg: &GcnnConfig,
    init: Option<&GcnnWeights<T>>,
) -> Result<Trained<T>> {
    cfg.validate()?;
    if labels.train().is_empty() {
        return Err(Error::InvalidParameter("train set is empty".into()));
    }
    let n = a.n_nodes();
    let mut w = match init {
        Some(w0) => {
            if w0.feature_dim() != x.dim() || w0.hidden() != cfg.hidden_units || w0.n_classes() != labels.n_classes() {
                return Err(Error::Shape("initial weights do not match data and config".into()));
            }
            w0.clone()
        }
        None => {
            let mut r = rng::rng_from(cfg.seed, &[tags::GCNN_INIT]);
            GcnnWeights::glorot(x.dim(), cfg.hidden_units, labels.n_classes(), &mut r)
        }
    };
    let lr = T::of(cfg.learning_rate);
    let l2 = T::of(cfg.l2_coeff);
    let mut adam = Adam::new(&w);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut r = rng::rng_from(cfg.seed, &[tags::GCNN_DROPOUT, epoch as u64]);
        let masks = DropoutMask::sample(x.as_csr().nnz(), n, cfg.hidden_units, cfg.dropout_rate, &mut r);
        let (g, fwd) = backward(&w, cfg.activation, a, x, labels, l2, Some(&masks))?;
        let l = super::loss(&fwd.softmax, labels, &w, l2);
        if !l.is_finite() {
            return Err(Error::Diverged { epoch, loss: l.as_f64() });
        }
        history.push(l);
        match cfg.optimizer {
            Optimizer::Adam => adam.step(&mut w, &g.w0, &g.w1, lr),
            Optimizer::Sgd => {
                w.w0.scaled_add(-lr, &g.w0);
                w.w1.scaled_add(-lr, &g.w1);
            }
        }
        if !w.is_finite() {
            return Err(Error::Diverged { epoch, loss: l.as_f64() });
        }
    }
    Ok(Trained {
        weights: w,
        loss_history: history,
    })
}

/// Deterministic inference pass.
pub fn predict<T: Scalar>(
    w: &GcnnWeights<T>,
    act: Activation,
    a: &PropagationMatrix<T>,
    x: &FeatureMatrix<T>,
) -> Result<Array2<T>> {
    Ok(forward(w, act, a, x, None)?.softmax)
}

/// `samples` stochastic forward passes with independent dropout masks.
pub fn mc_dropout_predict<T: Scalar>(
    w: &GcnnWeights<T>,
    act: Activation,
    a: &PropagationMatrix<T>,
    x: &FeatureMatrix<T>,
    dropout_rate: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<Array2<T>>> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one dropout sample".into()));
    }
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::rng_from(seed, &[tags::MC_DROPOUT, s as u64]);
            let m = DropoutMask::sample(x.as_csr().nnz(), a.n_nodes(), w.hidden(), dropout_rate, &mut r);
            Ok(forward(w, act, a, x, Some(&m))?.softmax)
        })
        .collect()
}

/// Fraction of `nodes` whose argmax prediction equals their label (ties go to the lowest class).
pub fn accuracy<T: Scalar>(z: &Array2<T>, labels: &LabelSet, nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&i| Some(argmax(z.row(i).iter().copied())) == labels.label(i))
        .count();
    hits as f64 / nodes.len() as f64
}

pub(crate) fn argmax<T: Scalar>(row: impl Iterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (k, v) in row.enumerate() {
        if v > best_v {
            best = k;
            best_v = v;
        }
    }
    best
}
