//! Fingerprint classification from block orientation fields.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`orientation`] estimates a block orientation field from a grayscale
//!    image and encodes every angle as the double-angle pair
//!    `(sin 2θ, cos 2θ)`.
//! 2. [`sae`] learns a compact code for those vectors with greedily stacked
//!    sparse autoencoders.
//! 3. [`softmax`] maps the top-level code to class probabilities over
//!    arch, left loop, right loop and whorl.
//! 4. [`fuzzy`] turns the ranked probabilities into a primary class, an
//!    optional secondary class, rejection and rescue flags.
//! 5. [`eval`] tallies confusion matrices and accuracies.
//!
//! [`synthgen`] produces labelled orientation fields from a zero-pole
//! singularity model so that everything above can be trained and tested
//! without a fingerprint database, and [`infogain`] scores alternative
//! angle encodings by empirical information gain.

pub mod eval;
pub mod fuzzy;
pub mod infogain;
mod label;
pub mod model;
pub mod optim;
pub mod orientation;
pub mod sae;
pub mod softmax;
pub mod synthgen;

pub use eval::ConfusionMatrix;
pub use fuzzy::{FuzzyDecision, SweepRow};
pub use infogain::{EntropyStats, SchemeGain};
pub use label::{ClassLabel, ParseLabelError};
pub use model::Model;
pub use orientation::{Encoding, FeatureVector, GrayImage, OrientationField};
pub use sae::{LayerParams, SaeHyper, StackedEncoder};
pub use softmax::SoftmaxModel;
pub use synthgen::{SingularityLayout, SynthSpec};
