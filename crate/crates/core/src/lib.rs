//! Tracking how relationships between pairs of characters evolve over a
//! narrative: corpus handling, lexicons, per-sentence features, a
//! second-order sequence model with semi-supervised training, and evaluation.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the common
//! choices.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod lexicons;
pub mod model;
pub mod rng;
pub mod scalar;

pub use scalar::Scalar;

pub type Rational = num_rational::Ratio<i64>;
pub type Weights = model::ModelWeights<f64>;
pub type Weights32 = model::ModelWeights<f32>;
pub type ExactWeights = model::ModelWeights<Rational>;
pub type Sparse = features::SparseVector<f64>;
pub type Baseline = model::LogisticBaseline<f64>;
pub type Predicted = model::Prediction<f64>;
