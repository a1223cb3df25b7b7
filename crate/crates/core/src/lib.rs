//! Bayesian graph convolutional networks.
//!
//! The pipeline fits an assortative mixed-membership stochastic block model to
//! the observed graph (MAP, preconditioned stochastic gradient ascent), samples
//! graphs from the fitted model, trains a dropout GCN on each sampled graph and
//! averages Monte Carlo dropout predictions over graphs and weight samples.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below are what the command-line driver uses.

pub mod attack;
pub mod ensemble;
pub mod error;
pub mod gcnn;
pub mod graph;
pub mod mmsbm;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use graph::Graph;

pub type PropagationMatrix64 = graph::PropagationMatrix<f64>;
pub type FeatureMatrix64 = graph::FeatureMatrix<f64>;
pub type GcnnWeights64 = gcnn::GcnnWeights<f64>;
pub type ExpandedParams64 = mmsbm::ExpandedParams<f64>;
pub type BlockParams64 = mmsbm::BlockParams<f64>;
pub type EnsemblePrediction64 = ensemble::EnsemblePrediction<f64>;
pub type EnsembleOutput64 = ensemble::EnsembleOutput<f64>;

pub type PropagationMatrix32 = graph::PropagationMatrix<f32>;
pub type FeatureMatrix32 = graph::FeatureMatrix<f32>;
pub type GcnnWeights32 = gcnn::GcnnWeights<f32>;
pub type ExpandedParams32 = mmsbm::ExpandedParams<f32>;
pub type BlockParams32 = mmsbm::BlockParams<f32>;
pub type EnsemblePrediction32 = ensemble::EnsemblePrediction<f32>;
pub type EnsembleOutput32 = ensemble::EnsembleOutput<f32>;
