//! Robust multiclass linear classification under Gaussian marginals.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] : vector primitives on the sphere, Gaussian sampling and
//!   rank-one localization by rejection.
//! * [`model`]: multiclass linear classifiers (MLC), pseudo-MLCs voting over
//!   pairwise halfspaces, the hard-instance labeling and margins.
//! * [`data`]: seeded example sources with planted ground truth and
//!   adversarial label channels, plus the text dataset format.
//! * [`metrics`]: 0-1 and pairwise errors, confusion masses and the
//!   error-decomposition check.
//! * [`learners`]: the multiclass perceptron, the pairwise projected-gradient
//!   learners (global and localized) and the tournament aggregator.
//! * [`regularity`]: critical angles and effective-boundary masses.
//! * [`lemma_lab`]: numerical checks of the structural inequalities.
//! * [`report`]: CSV/JSON rendering shared by all exporters.

pub mod data;
pub mod error;
pub mod geometry;
pub mod learners;
pub mod lemma_lab;
pub mod metrics;
pub mod model;
pub mod regularity;
pub mod report;
pub mod rng;

pub use data::{
    Dataset, ExampleSource, GroundTruth, LabeledExample, NoiseSpec, SampleSource, SourceConfig,
};
pub use error::{Error, Result};
pub use geometry::{LocalizationSpec, UnitVector};
pub use learners::{LearnerKind, Preset, TrainConfig};
pub use model::{Classifier, HardInstanceSpec, Label, MlcWeights, PseudoMlcWeights};
pub use rng::{GaussRng, Seed};
