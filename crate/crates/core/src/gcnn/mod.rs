//! Two-layer graph convolutional network with inverted dropout.
//!
//! `H1 = act(Ã (X∘M0) W0)`, `logits = Ã (H1∘M1) W1`, `Z = softmax(logits)`.
//! Dropout masks take values in `{0, 1/(1-p)}`, so the deterministic pass
//! (no masks) needs no rescaling. Training minimizes the mean cross-entropy
//! over train nodes plus `l2/2 · ‖W0‖²`.

mod model;
mod train;

pub use model::{backward, forward, loss, softmax_rows, Forward, Gradients};
pub use train::{accuracy, mc_dropout_predict, predict, train, Trained};
pub(crate) use train::argmax;

use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub(crate) fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the pre-activation value.
    pub(crate) fn derivative<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                T::one() - t * t
            }
            Activation::Linear => T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcnnConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub l2_coeff: f64,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for GcnnConfig {
    fn default() -> Self {
        Self {
            hidden_units: 16,
            learning_rate: 0.01,
            l2_coeff: 5e-4,
            dropout_rate: 0.5,
            epochs: 200,
            activation: Activation::Relu,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

impl GcnnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParameter(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.hidden_units == 0 {
            return Err(Error::InvalidParameter("hidden_units must be >= 1".into()));
        }
        if !(self.l2_coeff >= 0.0) {
            return Err(Error::InvalidParameter("l2_coeff must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnnWeights<T> {
    pub w0: Array2<T>,
    pub w1: Array2<T>,
}

const CHECKPOINT_FORMAT: &str = "bgcnn-gcnn-weights";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    format: String,
    version: u32,
    w0: MatrixRecord,
    w1: MatrixRecord,
}

fn to_record<T: Scalar>(m: &Array2<T>) -> MatrixRecord {
    MatrixRecord {
        shape: [m.nrows(), m.ncols()],
        data: m.iter().map(|v| v.as_f64()).collect(),
    }
}

fn from_record<T: Scalar>(r: MatrixRecord) -> Result<Array2<T>> {
    Array2::from_shape_vec((r.shape[0], r.shape[1]), r.data.into_iter().map(T::of).collect())
        .map_err(|e| Error::Shape(e.to_string()))
}

impl<T: Scalar> GcnnWeights<T> {
    pub fn zeros(feature_dim: usize, hidden: usize, n_classes: usize) -> Self {
        Self {
            w0: Array2::zeros((feature_dim, hidden)),
            w1: Array2::zeros((hidden, n_classes)),
        }
    }

    /// Uniform Glorot initialization, `U(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(feature_dim: usize, hidden: usize, n_classes: usize, rng: &mut Rng) -> Self {
        let mut init = |rows: usize, cols: usize| {
            let r = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || T::of(rng.random_range(-r..r)))
        };
        let w0 = init(feature_dim, hidden);
        let w1 = init(hidden, n_classes);
        Self { w0, w1 }
    }

    pub fn feature_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w0.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w1.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.w0.iter().chain(self.w1.iter()).all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CheckpointRecord {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            w0: to_record(&self.w0),
            w1: to_record(&self.w1),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: CheckpointRecord = serde_json::from_str(s)?;
        if rec.format != CHECKPOINT_FORMAT || rec.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported checkpoint {} v{}",
                rec.format, rec.version
            )));
        }
        let w = Self {
            w0: from_record(rec.w0)?,
            w1: from_record(rec.w1)?,
        };
        if w.w0.ncols() != w.w1.nrows() {
            return Err(Error::Shape("checkpoint layer shapes disagree".into()));
        }
        Ok(w)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Inverted dropout masks for one forward pass. The input mask has one entry
/// per stored feature value (zeros of the sparse feature matrix are unaffected
/// by masking); the hidden mask is dense `n × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    pub input: Vec<T>,
    pub hidden: Array2<T>,
}

impl<T: Scalar> DropoutMask<T> {
    pub fn sample(input_nnz: usize, n_nodes: usize, hidden: usize, rate: f64, rng: &mut Rng) -> Self {
        let keep = T::of(1.0 / (1.0 - rate));
        let mut draw = || {
            if rate > 0.0 && rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        };
        let input = (0..input_nnz).map(|_| draw()).collect();
        let hidden = Array2::from_shape_simple_fn((n_nodes, hidden), draw);
        Self { input, hidden }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn mask_entries_are_zero_or_scaled() {
        let mut r = rng::rng(3);
        let m = DropoutMask::<f64>::sample(100, 10, 4, 0.5, &mut r);
        assert!(m.input.iter().chain(m.hidden.iter()).all(|&v| v == 0.0 || v == 2.0));
        assert!(m.input.iter().any(|&v| v == 0.0));
        let m = DropoutMask::<f32>::sample(50, 3, 2, 0.0, &mut r);
        assert!(m.input.iter().chain(m.hidden.iter()).all(|&v| v == 1.0));
    }

    #[test]
    fn config_validation() {
        assert!(GcnnConfig::default().validate().is_ok());
        let bad = GcnnConfig { dropout_rate: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = GcnnConfig { learning_rate: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut r = rng::rng(1);
        let w = GcnnWeights::<f64>::glorot(5, 3, 2, &mut r);
        let back = GcnnWeights::<f64>::from_json(&w.to_json().unwrap()).unwrap();
        assert_eq!(w, back);
        assert!(GcnnWeights::<f64>::from_json(r#"{"format":"x","version":1,"w0":{"shape":[1,1],"data":[0]},"w1":{"shape":[1,1],"data":[0]}}"#).is_err());
    }

    #[test]
    fn glorot_range() {
        let mut r = rng::rng(2);
        let w = GcnnWeights::<f32>::glorot(10, 6, 4, &mut r);
        let r0 = (6.0f32 / 16.0).sqrt();
        assert!(w.w0.iter().all(|v| v.abs() <= r0));
        assert_eq!((w.feature_dim(), w.hidden(), w.n_classes()), (10, 6, 4));
    }
}
