//! Template-guided adjudication of rule-intensive queries with language models.
//!
//! The crate is organised around four pieces of machinery:
//!
//! * [`library`] builds a library of reasoning templates (seed generation,
//!   structured continuation, style transfer, evaluation and filtering);
//! * [`selector`] picks a template per query by fusing a global accuracy
//!   score with a local, query-dependent score;
//! * [`preference`] mines winner/loser template pairs and trains a pairwise
//!   preference scorer;
//! * [`engine`] runs the three reasoning stages (qualitative analysis,
//!   evidence gathering, adjudication) against an [`gateway::Provider`].
//!
//! [`eval`] measures full/partial accuracy and drives ablation sweeps.
//!
//! Numeric kernels (score normalisation, fusion, the pairwise loss and the
//! linear scorer) are generic over [`Scalar`]; the aliases at the crate root
//! fix them to `f64`, which is what the rest of the pipeline uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` deliberately rejects NaN

pub mod domain;
pub mod engine;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod hash;
pub mod library;
pub mod preference;
pub mod prompts;
pub mod rng;
mod scalar;
pub mod selector;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Per-candidate selector scores in `f64`.
pub type SelectorScores = selector::SelectorScores<f64>;
/// Selection outcome in `f64`.
pub type SelectionResult = selector::SelectionResult<f64>;
/// Selector configuration in `f64`.
pub type SelectorConfig = selector::SelectorConfig<f64>;
/// Linear preference scorer parameters in `f64`.
pub type ScorerParams = preference::ScorerParams<f64>;
/// Preference trainer configuration in `f64`.
pub type TrainerConfig = preference::TrainerConfig<f64>;
