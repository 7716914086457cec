//! Mine forum posts for IPv4 addresses, separate genuine addresses from
//! look-alike dot-decimal strings, label each mention malicious or benign,
//! and move trained classifiers to new forums without labels from them.
//!
//! The numeric core (feature spaces, logistic regression, seeding) is generic
//! over [`Scalar`]; the aliases below fix it to `f64` or `f32`.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod extraction;
pub mod features;
pub mod pipeline;
pub mod scalar;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FeatureSpaceF64 = features::FeatureSpace<f64>;
pub type FeatureSpaceF32 = features::FeatureSpace<f32>;
pub type FeatureVectorF64 = features::FeatureVector<f64>;
pub type FeatureVectorF32 = features::FeatureVector<f32>;
pub type ModelF64 = classifier::Model<f64>;
pub type ModelF32 = classifier::Model<f32>;
pub type HyperparamsF64 = classifier::Hyperparams<f64>;
pub type TransferConfigF64 = transfer::TransferConfig<f64>;
pub type SeedSetF64 = transfer::SeedSet<f64>;
