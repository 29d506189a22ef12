//! Malicious package detection from registry metadata.
//!
//! The library ingests npm-style registry documents, derives a fixed catalog
//! of 56 numeric features split into easy-to-manipulate (ETM) and
//! difficult-to-manipulate (DTM) groups, trains one of five classifiers on
//! labeled corpora, and measures how the trained models degrade when an
//! adversary rewrites feature values or drifts time- and interaction-based
//! signals.
//!
//! Numeric code is generic over the scalar type (`f32` or `f64`) via
//! [`scalar::Scalar`]; the `*64` aliases at the crate root are what the CLI
//! and most callers use.

pub mod adversarial;
pub mod catalog;
pub mod dataset;
pub mod evaluation;
pub mod extract;
pub mod ingest;
pub mod models;
pub mod pmi;
pub mod scalar;
pub mod seeding;

pub use scalar::Scalar;

/// Feature vector over `f64`, the default precision.
pub type FeatureVector64 = extract::FeatureVector<f64>;
/// Feature matrix over `f64`.
pub type FeatureMatrix64 = extract::FeatureMatrix<f64>;
/// Trained model over `f64`.
pub type TrainedModel64 = models::TrainedModel<f64>;

/// Single-precision variants for memory-constrained experiments.
pub type FeatureVector32 = extract::FeatureVector<f32>;
pub type FeatureMatrix32 = extract::FeatureMatrix<f32>;
pub type TrainedModel32 = models::TrainedModel<f32>;
