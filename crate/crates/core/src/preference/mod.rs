//! Pairwise template preference.
//!
//! For every query in the evaluation subset, each template that answered
//! correctly is paired with each template that did not. A scorer `r(Q, T)`
//! is trained so that, with inverse temperature `beta`, the two-way softmax
//! over a pair prefers the winner:
//!
//! ```text
//! loss(Q, T+, T-) = -ln sigma(beta * (r(Q, T+) - r(Q, T-)))
//! ```
//!
//! The reference scorer is linear in hashed features (see [`features`]).

pub mod features;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use features::{feature_strings, tokenize, FeatureSpec, SparseVec};

use crate::domain::{Query, Template};
use crate::library::ScoreRecord;
use crate::rng::SplitMix64;
use crate::selector::{LocalScore, LocalScorer};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("no preference pairs to train on")]
    NoPairs,
    #[error("non-finite input to the pair loss")]
    NonFinite,
    #[error("training diverged at epoch {epoch}: mean loss {loss} exceeds {limit}")]
    Diverged { epoch: usize, loss: f64, limit: f64 },
    #[error("pair references unknown query `{0}`")]
    UnknownQuery(String),
    #[error("pair references unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid trainer configuration: {0}")]
    Config(String),
}

/// A template that answered a query correctly (`winner_id`) paired with one
/// that did not (`loser_id`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PreferencePair {
    pub query_id: String,
    pub winner_id: String,
    pub loser_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", default)]
pub struct TrainerConfig<F> {
    pub beta: F,
    pub learning_rate: F,
    pub epochs: usize,
    pub feature_dim: usize,
    pub pairs_per_category: usize,
    /// Pairs per gradient step; 0 means the full batch.
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl<F: Scalar> Default for TrainerConfig<F> {
    fn default() -> Self {
        Self {
            beta: F::lit(0.1),
            learning_rate: F::lit(0.05),
            epochs: 20,
            feature_dim: 1 << 16,
            pairs_per_category: 12_000,
            batch_size: 64,
            rng_seed: 0,
        }
    }
}

impl<F: Scalar> TrainerConfig<F> {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.beta > F::zero()) || !self.beta.is_finite() {
            return Err(TrainError::Config("beta must be positive".into()));
        }
        if !(self.learning_rate > F::zero()) || !self.learning_rate.is_finite() {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if !self.feature_dim.is_power_of_two() {
            return Err(TrainError::Config("feature_dim must be a power of two".into()));
        }
        Ok(())
    }
}

/// Weights of the linear scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ScorerParams<F> {
    pub feature_dim: usize,
    pub weights: Vec<F>,
    pub feature_spec: FeatureSpec,
}

impl<F: Scalar> ScorerParams<F> {
    pub fn zeros(feature_dim: usize) -> Self {
        assert!(feature_dim.is_power_of_two(), "feature_dim must be a power of two");
        Self {
            feature_dim,
            weights: vec![F::zero(); feature_dim],
            feature_spec: FeatureSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !self.feature_dim.is_power_of_two() || self.weights.len() != self.feature_dim {
            return Err(TrainError::Config(format!(
                "expected {} weights for a power-of-two feature_dim, found {}",
                self.feature_dim,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(TrainError::NonFinite);
        }
        Ok(())
    }

    pub fn dot(&self, phi: &SparseVec) -> F {
        phi.entries
            .iter()
            .fold(F::zero(), |acc, &(i, c)| acc + self.weights[i] * F::lit(c))
    }
}

/// `r(Q, T)`: the sum of the weights of the pair's hashed features.
pub fn score<F: Scalar>(params: &ScorerParams<F>, query: &Query, template: &Template) -> F {
    params.dot(&features::features(&query.content, &template.body, params.feature_dim))
}

fn softplus<F: Scalar>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `-ln sigma(beta * (r_plus - r_minus))`, evaluated without overflow.
pub fn pair_loss<F: Scalar>(r_plus: F, r_minus: F, beta: F) -> Result<F, TrainError> {
    if !(r_plus.is_finite() && r_minus.is_finite() && beta.is_finite()) {
        return Err(TrainError::NonFinite);
    }
    Ok(softplus(-beta * (r_plus - r_minus)))
}

/// Derivative of [`pair_loss`] with respect to `r_plus - r_minus`.
pub fn pair_loss_slope<F: Scalar>(delta: F, beta: F) -> F {
    -beta * sigmoid(-beta * delta)
}

/// Feature difference `phi(Q, T+) - phi(Q, T-)` for each pair.
pub fn pair_differences(
    pairs: &[PreferencePair],
    queries: &[Query],
    templates: &[Template],
    dim: usize,
) -> Result<Vec<SparseVec>, TrainError> {
    let q: HashMap<&str, &Query> = queries.iter().map(|x| (x.id.as_str(), x)).collect();
    let t: HashMap<&str, &Template> = templates.iter().map(|x| (x.id.as_str(), x)).collect();
    let mut cache: HashMap<(&str, &str), SparseVec> = HashMap::new();
    let mut phi = |qid: &str, tid: &str| -> Result<SparseVec, TrainError> {
        let query = *q.get(qid).ok_or_else(|| TrainError::UnknownQuery(qid.into()))?;
        let template = *t.get(tid).ok_or_else(|| TrainError::UnknownTemplate(tid.into()))?;
        Ok(cache
            .entry((query.id.as_str(), template.id.as_str()))
            .or_insert_with(|| features::features(&query.content, &template.body, dim))
            .clone())
    };
    pairs
        .iter()
        .map(|p| Ok(phi(&p.query_id, &p.winner_id)?.minus(&phi(&p.query_id, &p.loser_id)?)))
        .collect()
}

/// Mean pair loss of `params` over precomputed feature differences.
pub fn mean_loss<F: Scalar>(params: &ScorerParams<F>, diffs: &[SparseVec], beta: F) -> Result<F, TrainError> {
    if diffs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    let mut total = F::zero();
    for d in diffs {
        total = total + pair_loss(params.dot(d), F::zero(), beta)?;
    }
    Ok(total / F::lit(diffs.len() as f64))
}

/// Gradient of the mean loss over `batch` as a sparse map.
pub fn gradient<F: Scalar>(params: &ScorerParams<F>, diffs: &[&SparseVec], beta: F) -> BTreeMap<usize, F> {
    let scale = F::one() / F::lit(diffs.len() as f64);
    let mut grad: BTreeMap<usize, F> = BTreeMap::new();
    for d in diffs {
        let coef = pair_loss_slope(params.dot(d), beta) * scale;
        for &(i, c) in &d.entries {
            let g = grad.entry(i).or_insert_with(F::zero);
            *g = *g + coef * F::lit(c);
        }
    }
    grad
}

/// Fraction of pairs whose winner outscores the loser.
pub fn pairwise_accuracy<F: Scalar>(params: &ScorerParams<F>, diffs: &[SparseVec]) -> f64 {
    if diffs.is_empty() {
        return 0.0;
    }
    diffs.iter().filter(|d| params.dot(d) > F::zero()).count() as f64 / diffs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TrainOutcome<F> {
    pub params: ScorerParams<F>,
    /// Mean loss over all pairs after each epoch.
    pub loss_trace: Vec<F>,
}

/// Divergence threshold on the mean loss, ten times its value at zero weights.
pub fn divergence_limit() -> f64 {
    10.0 * std::f64::consts::LN_2
}

/// Mini-batch gradient descent on the mean pair loss over feature differences.
pub fn train_on_differences<F: Scalar>(diffs: &[SparseVec], cfg: &TrainerConfig<F>) -> Result<TrainOutcome<F>, TrainError> {
    cfg.validate()?;
    if diffs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    let mut params = ScorerParams::zeros(cfg.feature_dim);
    let batch = if cfg.batch_size == 0 { diffs.len() } else { cfg.batch_size.min(diffs.len()) };
    let mut rng = SplitMix64::new(cfg.rng_seed);
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let limit = divergence_limit();
    for epoch in 1..=cfg.epochs {
        if batch < diffs.len() {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch) {
            let members: Vec<&SparseVec> = chunk.iter().map(|&i| &diffs[i]).collect();
            for (i, g) in gradient(&params, &members, cfg.beta) {
                params.weights[i] = params.weights[i] - cfg.learning_rate * g;
            }
        }
        let loss = mean_loss(&params, diffs, cfg.beta)?;
        let loss_f = loss.to_f64_lossy();
        log::debug!("epoch {epoch}: mean loss {loss_f:.6}");
        if !(loss_f <= limit) {
            return Err(TrainError::Diverged {
                epoch,
                loss: loss_f,
                limit,
            });
        }
        loss_trace.push(loss);
    }
    Ok(TrainOutcome { params, loss_trace })
}

/// Trains the linear scorer on preference pairs.
pub fn train<F: Scalar>(
    pairs: &[PreferencePair],
    queries: &[Query],
    templates: &[Template],
    cfg: &TrainerConfig<F>,
) -> Result<TrainOutcome<F>, TrainError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    let diffs = pair_differences(pairs, queries, templates, cfg.feature_dim)?;
    train_on_differences(&diffs, cfg)
}

/// Winner/loser pairs from per-query outcomes.
///
/// Each query contributes the cross product of its correct and incorrect
/// templates. Per category (categories in sorted order, one generator seeded
/// with `rng_seed`), at most `pairs_per_category` pairs are kept by sampling
/// without replacement. The result is sorted.
pub fn build_pairs(
    records: &[ScoreRecord],
    queries: &[Query],
    pairs_per_category: usize,
    rng_seed: u64,
) -> Vec<PreferencePair> {
    let category: HashMap<&str, &str> = queries.iter().map(|q| (q.id.as_str(), q.category.as_str())).collect();
    let mut by_query: BTreeMap<&str, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for r in records {
        let slot = by_query.entry(r.query_id.as_str()).or_default();
        if r.correct {
            slot.0.push(&r.template_id);
        } else {
            slot.1.push(&r.template_id);
        }
    }
    let mut by_category: BTreeMap<&str, Vec<PreferencePair>> = BTreeMap::new();
    for (qid, (winners, losers)) in &mut by_query {
        winners.sort_unstable();
        winners.dedup();
        losers.sort_unstable();
        losers.dedup();
        let cat = category.get(qid).copied().unwrap_or("");
        let bucket = by_category.entry(cat).or_default();
        for w in winners.iter() {
            for l in losers.iter().filter(|l| *l != w) {
                bucket.push(PreferencePair {
                    query_id: qid.to_string(),
                    winner_id: w.to_string(),
                    loser_id: l.to_string(),
                });
            }
        }
    }
    let mut rng = SplitMix64::new(rng_seed);
    let mut out = Vec::new();
    for (_, bucket) in by_category {
        if bucket.len() > pairs_per_category {
            let keep = rng.sample_indices(bucket.len(), pairs_per_category);
            out.extend(keep.into_iter().map(|i| bucket[i].clone()));
        } else {
            out.extend(bucket);
        }
    }
    out.sort();
    out
}

/// [`LocalScorer`] backed by trained preference weights.
///
/// Candidates get `pi_i = softmax(beta * r_i)` over the candidate set; the
/// reported NLL is `-ln pi_i`.
#[derive(Debug, Clone)]
pub struct PreferenceScorer {
    params: ScorerParams<f64>,
    beta: f64,
}

impl PreferenceScorer {
    pub fn new(params: ScorerParams<f64>, beta: f64) -> Self {
        Self { params, beta }
    }
}

impl LocalScorer for PreferenceScorer {
    fn score_candidates(&self, query: &Query, candidates: &[&Template]) -> Vec<Result<LocalScore, String>> {
        let logits: Vec<f64> = candidates.iter().map(|t| self.beta * score(&self.params, query, t)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits.into_iter().map(|l| Ok(LocalScore::from_nll(lse - l))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Lineage;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn loss_reference_values() {
        assert!((pair_loss(0.3f64, 0.3, 0.1).unwrap() - LN_2).abs() < 1e-12);
        assert!((pair_loss(1.0f64, 0.0, 0.1).unwrap() - 0.644396660073571).abs() < 1e-12);
        assert!((pair_loss(0.0f64, 1.0, 0.1).unwrap() - 0.744396660073571).abs() < 1e-12);
        assert!(pair_loss(f64::NAN, 0.0, 0.1).is_err());
        assert!(pair_loss(7000.0, 0.0, 0.1).unwrap() >= 0.0);
        assert!((pair_loss(-7000.0f64, 0.0, 0.1).unwrap() - 700.0).abs() < 1e-9);
    }

    #[test]
    fn loss_in_f32() {
        assert!((pair_loss(1.0f32, 0.0, 0.1).unwrap() - 0.644_396_7).abs() < 1e-6);
    }

    #[test]
    fn single_weight_score() {
        let q = Query {
            id: "q".into(),
            category: String::new(),
            content: "alpha".into(),
            gold: Default::default(),
        };
        let t = Template::new("t", "t", "1. x\n2. y", Lineage::seed());
        let mut p = ScorerParams::<f64>::zeros(1 << 10);
        assert_eq!(score(&p, &q, &t), 0.0);
        p.weights[features::feature_index("q:alpha", 1 << 10)] = 2.5;
        let phi = features::features(&q.content, &t.body, 1 << 10);
        let hits: f64 = phi
            .entries
            .iter()
            .filter(|(i, _)| *i == features::feature_index("q:alpha", 1 << 10))
            .map(|(_, c)| c)
            .sum();
        assert_eq!(score(&p, &q, &t), 2.5 * hits);
    }

    fn rec(t: &str, q: &str, correct: bool) -> ScoreRecord {
        ScoreRecord {
            template_id: t.into(),
            query_id: q.into(),
            correct,
            prediction: Default::default(),
            error: None,
        }
    }

    #[test]
    fn pairs_are_a_cross_product() {
        let recs = [rec("T1", "q", true), rec("T2", "q", true), rec("T3", "q", false), rec("T1", "r", true)];
        let pairs = build_pairs(&recs, &[], 100, 0);
        let got: Vec<_> = pairs.iter().map(|p| (p.winner_id.as_str(), p.loser_id.as_str())).collect();
        assert_eq!(got, [("T1", "T3"), ("T2", "T3")]);
    }

    #[test]
    fn pair_subsampling_is_per_category_and_stable() {
        let mut recs = Vec::new();
        for q in 0..4 {
            for t in 0..6 {
                recs.push(rec(&format!("T{t}"), &format!("q{q}"), t % 2 == 0));
            }
        }
        let qs: Vec<Query> = (0..4)
            .map(|i| Query {
                id: format!("q{i}"),
                category: if i < 2 { "a" } else { "b" }.into(),
                content: String::new(),
                gold: Default::default(),
            })
            .collect();
        let a = build_pairs(&recs, &qs, 5, 3);
        assert_eq!(a.len(), 10);
        assert_eq!(a, build_pairs(&recs, &qs, 5, 3));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_epochs_gives_zero_weights() {
        let d = vec![SparseVec { entries: vec![(1, 1.0)] }];
        let cfg = TrainerConfig::<f64> {
            epochs: 0,
            feature_dim: 8,
            ..Default::default()
        };
        let out = train_on_differences(&d, &cfg).unwrap();
        assert!(out.params.weights.iter().all(|w| *w == 0.0));
        assert!((mean_loss(&out.params, &d, 0.1).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn single_pair_step_matches_closed_form() {
        let d = vec![SparseVec { entries: vec![(2, 1.0), (5, -2.0)] }];
        let cfg = TrainerConfig::<f64> {
            epochs: 1,
            learning_rate: 1.0,
            feature_dim: 8,
            batch_size: 0,
            ..Default::default()
        };
        let out = train_on_differences(&d, &cfg).unwrap();
        // At zero weights the slope is -beta * sigma(0) = -0.05.
        assert!((out.params.weights[2] - 0.05).abs() < 1e-15);
        assert!((out.params.weights[5] + 0.10).abs() < 1e-15);
    }

    #[test]
    fn divergence_guard_trips() {
        let d = vec![SparseVec { entries: vec![(0, 1.0)] }, SparseVec { entries: vec![(0, -1.0)] }];
        // With a huge step size the weight overshoots back and forth
        // between two contradictory pairs.
        let cfg = TrainerConfig::<f64> {
            epochs: 3,
            learning_rate: 1e6,
            feature_dim: 8,
            batch_size: 1,
            ..Default::default()
        };
        assert!(matches!(train_on_differences(&d, &cfg), Err(TrainError::Diverged { .. })));
    }

    proptest! {
        #[test]
        fn antisymmetric_sum_bound(a in -50.0f64..50.0, b in -50.0f64..50.0, beta in 0.01f64..2.0) {
            let s = pair_loss(a, b, beta).unwrap() + pair_loss(b, a, beta).unwrap();
            prop_assert!(s >= 2.0 * LN_2 - 1e-12);
        }

        #[test]
        fn beta_scaling_identity(a in -50.0f64..50.0, b in -50.0f64..50.0, c in 0.5f64..4.0) {
            let base = pair_loss(a, b, 0.1).unwrap();
            let scaled = pair_loss(a / c, b / c, 0.1 * c).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
