//! Global/local template selection.
//!
//! Each retained template gets a global score `s1` (its accuracy on the
//! evaluation subset) and a local score from a [`LocalScorer`]. Both are
//! min-max normalised across the candidates and fused as
//! `lambda * s1_norm + (1 - lambda) * s2_norm`; the best fused score wins,
//! ties going to the template that comes first in the library.
//!
//! The local score is reported as an average negative log-likelihood
//! (`s2_nll`, lower is better) and fused through `s2_goodness = -s2_nll`, so
//! that higher is better on both sides of the fusion.

mod fusion;

use std::fmt;
use std::sync::Arc;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use fusion::{argmax_first, fuse, minmax_normalize, Fusion};

use crate::domain::{Query, Template, TemplateLibrary};
use crate::gateway::{Gateway, GatewayError};
use crate::library::EvalRecord;
use crate::Scalar;

/// Separator placed between the query and the template when scoring.
pub const CONTEXT_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectionError {
    #[error("library has no retained templates")]
    NoCandidates,
    #[error("no evaluation record for template `{0}`")]
    MissingRecord(String),
    #[error("empty evaluation for template `{0}`")]
    EmptyEvaluation(String),
    #[error("ambiguous evaluation for template `{0}`: {1} records")]
    AmbiguousEvaluation(String, usize),
    #[error("lambda must lie in [0, 1], got {0}")]
    BadLambda(f64),
    #[error("candidate count must be at least 1")]
    ZeroCandidates,
    #[error("local scoring failed for every candidate: {0}")]
    AllScoringFailed(String),
}

/// How many retained templates take part in selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CandidateCount {
    #[default]
    All,
    /// The `n` templates with the highest global score.
    Top(usize),
}

impl fmt::Display for CandidateCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateCount::All => f.write_str("all"),
            CandidateCount::Top(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for CandidateCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(CandidateCount::All);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("candidate count must be at least 1".into()),
            Ok(n) => Ok(CandidateCount::Top(n)),
            Err(_) => Err(format!("expected `all` or a positive count, got `{s}`")),
        }
    }
}

impl Serialize for CandidateCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CandidateCount::All => s.serialize_str("all"),
            CandidateCount::Top(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for CandidateCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => CandidateCount::from_str(&n.to_string()),
            Raw::Text(s) => CandidateCount::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LibraryOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SelectorConfig<F> {
    pub lambda: F,
    #[serde(default)]
    pub n_candidates: CandidateCount,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl<F: Scalar> Default for SelectorConfig<F> {
    fn default() -> Self {
        Self {
            lambda: F::lit(0.7),
            n_candidates: CandidateCount::All,
            tie_break: TieBreak::LibraryOrder,
        }
    }
}

impl<F: Scalar> SelectorConfig<F> {
    pub fn with_lambda(lambda: F) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.lambda >= F::zero() && self.lambda <= F::one()) {
            return Err(SelectionError::BadLambda(self.lambda.to_f64_lossy()));
        }
        if self.n_candidates == CandidateCount::Top(0) {
            return Err(SelectionError::ZeroCandidates);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SelectorScores<F> {
    pub template_id: String,
    pub s1: F,
    pub s2_nll: F,
    pub s2_goodness: F,
    pub s1_norm: F,
    pub s2_norm: F,
    pub s_final: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChosenBy {
    Fused,
    Forced,
    SingleCandidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub template_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SelectionResult<F> {
    pub template_id: String,
    pub scores: Vec<SelectorScores<F>>,
    pub chosen_by: ChosenBy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedCandidate>,
}

impl<F> SelectionResult<F> {
    /// A selection bypassed by the caller, e.g. when evaluating one template.
    pub fn forced(template_id: impl Into<String>) -> Self {
        Self {
            template_id: template_id.into(),
            scores: Vec::new(),
            chosen_by: ChosenBy::Forced,
            skipped: Vec::new(),
        }
    }
}

/// The accuracy recorded for `template_id`, optionally on one dataset.
pub fn global_score(template_id: &str, records: &[EvalRecord], dataset_id: Option<&str>) -> Result<f64, SelectionError> {
    let matching: Vec<&EvalRecord> = records
        .iter()
        .filter(|r| r.template_id == template_id && dataset_id.is_none_or(|d| r.dataset_id == d))
        .collect();
    match matching.as_slice() {
        [] => Err(SelectionError::MissingRecord(template_id.to_string())),
        [r] if r.n == 0 => Err(SelectionError::EmptyEvaluation(template_id.to_string())),
        [r] => Ok(r.accuracy),
        many => Err(SelectionError::AmbiguousEvaluation(template_id.to_string(), many.len())),
    }
}

/// Local fit of a template to a query; `goodness` is `-nll`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalScore {
    pub nll: f64,
    pub goodness: f64,
}

impl LocalScore {
    pub fn from_nll(nll: f64) -> Self {
        Self { nll, goodness: -nll }
    }
}

/// Query-dependent scoring backend for the selector.
pub trait LocalScorer: Send + Sync {
    /// Scores every candidate; failures are reported per candidate.
    fn score_candidates(&self, query: &Query, candidates: &[&Template]) -> Vec<Result<LocalScore, String>>;
}

/// Average negative log-likelihood of the template body given the query,
/// as scored by the provider.
pub fn local_score(query: &Query, template: &Template, gateway: &Gateway) -> Result<LocalScore, GatewayError> {
    let context = format!("{}{CONTEXT_SEPARATOR}", query.content);
    let score = gateway.score_continuation(&context, &template.body)?;
    Ok(LocalScore::from_nll(score.mean_nll()))
}

/// [`LocalScorer`] backed by provider log-probabilities.
#[derive(Debug, Clone)]
pub struct NllScorer {
    gateway: Gateway,
}

impl NllScorer {
    pub fn new(gateway: Gateway) -> Self {
        Self { gateway }
    }
}

impl LocalScorer for NllScorer {
    fn score_candidates(&self, query: &Query, candidates: &[&Template]) -> Vec<Result<LocalScore, String>> {
        candidates
            .par_iter()
            .map(|t| local_score(query, t, &self.gateway).map_err(|e| e.to_string()))
            .collect()
    }
}

/// Retained templates taking part in selection, in library order.
pub fn candidates<'a>(
    lib: &'a TemplateLibrary,
    count: CandidateCount,
    records: &[EvalRecord],
) -> Result<Vec<(&'a Template, f64)>, SelectionError> {
    let retained = lib
        .retained()
        .map(|t| global_score(&t.id, records, None).map(|s1| (t, s1)))
        .collect::<Result<Vec<_>, _>>()?;
    if retained.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    let keep = match count {
        CandidateCount::All => return Ok(retained),
        CandidateCount::Top(0) => return Err(SelectionError::ZeroCandidates),
        CandidateCount::Top(n) => n,
    };
    let mut order: Vec<usize> = (0..retained.len()).collect();
    // Stable sort keeps library order among equal s1.
    order.sort_by(|&a, &b| retained[b].1.total_cmp(&retained[a].1));
    let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| retained[i]).collect())
}

/// Picks the template with the best fused score for `query`.
pub fn select_template<F: Scalar>(
    query: &Query,
    lib: &TemplateLibrary,
    cfg: &SelectorConfig<F>,
    records: &[EvalRecord],
    scorer: &dyn LocalScorer,
) -> Result<SelectionResult<F>, SelectionError> {
    cfg.validate()?;
    let pool = candidates(lib, cfg.n_candidates, records)?;
    let templates: Vec<&Template> = pool.iter().map(|(t, _)| *t).collect();
    let locals = scorer.score_candidates(query, &templates);

    let mut scored = Vec::with_capacity(pool.len());
    let mut skipped = Vec::new();
    for ((t, s1), local) in pool.iter().zip(locals) {
        match local {
            Ok(ls) => scored.push((t.id.clone(), F::lit(*s1), F::lit(ls.nll), F::lit(ls.goodness))),
            Err(error) => {
                log::warn!("query {}: skipping template {}: {error}", query.id, t.id);
                skipped.push(SkippedCandidate {
                    template_id: t.id.clone(),
                    error,
                });
            }
        }
    }
    if scored.is_empty() {
        let detail = skipped.iter().map(|s| format!("{}: {}", s.template_id, s.error)).collect::<Vec<_>>().join("; ");
        return Err(SelectionError::AllScoringFailed(detail));
    }

    let s1: Vec<F> = scored.iter().map(|s| s.1).collect();
    let good: Vec<F> = scored.iter().map(|s| s.3).collect();
    let fused = fuse(cfg.lambda, &s1, &good);
    let best = argmax_first(&fused.s_final).expect("non-empty candidate list");
    let scores: Vec<SelectorScores<F>> = scored
        .into_iter()
        .enumerate()
        .map(|(i, (template_id, s1, s2_nll, s2_goodness))| SelectorScores {
            template_id,
            s1,
            s2_nll,
            s2_goodness,
            s1_norm: fused.s1_norm[i],
            s2_norm: fused.s2_norm[i],
            s_final: fused.s_final[i],
        })
        .collect();
    Ok(SelectionResult {
        template_id: scores[best].template_id.clone(),
        chosen_by: if scores.len() == 1 {
            ChosenBy::SingleCandidate
        } else {
            ChosenBy::Fused
        },
        scores,
        skipped,
    })
}

/// Configuration, evaluation records and a scoring backend bundled together.
#[derive(Clone)]
pub struct Selector {
    pub config: SelectorConfig<f64>,
    pub records: Vec<EvalRecord>,
    pub scorer: Arc<dyn LocalScorer>,
}

impl fmt::Debug for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Selector")
            .field("config", &self.config)
            .field("records", &self.records.len())
            .finish()
    }
}

impl Selector {
    pub fn new(config: SelectorConfig<f64>, records: Vec<EvalRecord>, scorer: Arc<dyn LocalScorer>) -> Self {
        Self { config, records, scorer }
    }

    pub fn with_config(&self, config: SelectorConfig<f64>) -> Self {
        Self {
            config,
            ..self.clone()
        }
    }

    pub fn select(&self, query: &Query, lib: &TemplateLibrary) -> Result<SelectionResult<f64>, SelectionError> {
        select_template(query, lib, &self.config, &self.records, self.scorer.as_ref())
    }
}
