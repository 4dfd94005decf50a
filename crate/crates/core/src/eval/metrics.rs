use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::RuleIdSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("{preds} predictions for {golds} gold sets")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no examples to score")]
    Empty,
}

fn check(preds: &[RuleIdSet], golds: &[RuleIdSet]) -> Result<(), MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

pub fn exact_match(pred: &RuleIdSet, gold: &RuleIdSet) -> bool {
    pred == gold
}

pub fn overlaps(pred: &RuleIdSet, gold: &RuleIdSet) -> bool {
    !pred.is_disjoint(gold)
}

/// Share of predictions equal to their gold set.
pub fn full_accuracy(preds: &[RuleIdSet], golds: &[RuleIdSet]) -> Result<f64, MetricError> {
    check(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| exact_match(p, g)).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Share of predictions sharing at least one id with their gold set.
pub fn partial_accuracy(preds: &[RuleIdSet], golds: &[RuleIdSet]) -> Result<f64, MetricError> {
    check(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| overlaps(p, g)).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Result of one query in a benchmark run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub query_id: String,
    pub category: String,
    pub gold: RuleIdSet,
    pub prediction: RuleIdSet,
    pub correct_full: bool,
    pub correct_partial: bool,
    /// No answer could be recovered for this query.
    pub parse_failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Outcome {
    pub fn new(query_id: &str, category: &str, gold: RuleIdSet, prediction: RuleIdSet, parse_failed: bool) -> Self {
        Self {
            correct_full: exact_match(&prediction, &gold),
            correct_partial: overlaps(&prediction, &gold),
            query_id: query_id.into(),
            category: category.into(),
            gold,
            prediction,
            parse_failed,
            error: None,
        }
    }

    pub fn failed(query_id: &str, category: &str, gold: RuleIdSet, error: String) -> Self {
        let mut o = Self::new(query_id, category, gold, RuleIdSet::new(), true);
        o.error = Some(error);
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub n: usize,
    pub acc_full: f64,
    pub acc_partial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub acc_full: f64,
    pub acc_partial: f64,
    pub per_category: BTreeMap<String, CategoryMetrics>,
    pub parse_failure_rate: f64,
}

fn summarise<'a>(outcomes: impl Iterator<Item = &'a Outcome>) -> (usize, usize, usize, usize) {
    outcomes.fold((0, 0, 0, 0), |(n, f, p, e), o| {
        (n + 1, f + o.correct_full as usize, p + o.correct_partial as usize, e + o.parse_failed as usize)
    })
}

/// Aggregates outcomes globally and per category.
pub fn report_from_outcomes(outcomes: &[Outcome]) -> Result<MetricReport, MetricError> {
    if outcomes.is_empty() {
        return Err(MetricError::Empty);
    }
    let (n, full, partial, failed) = summarise(outcomes.iter());
    let mut cats: BTreeMap<&str, Vec<&Outcome>> = BTreeMap::new();
    for o in outcomes {
        cats.entry(o.category.as_str()).or_default().push(o);
    }
    let per_category = cats
        .into_iter()
        .map(|(c, os)| {
            let (cn, cf, cp, _) = summarise(os.into_iter());
            let m = CategoryMetrics {
                n: cn,
                acc_full: cf as f64 / cn as f64,
                acc_partial: cp as f64 / cn as f64,
            };
            (c.to_string(), m)
        })
        .collect();
    Ok(MetricReport {
        n,
        acc_full: full as f64 / n as f64,
        acc_partial: partial as f64 / n as f64,
        per_category,
        parse_failure_rate: failed as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ids: &[&str]) -> RuleIdSet {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn basic_cases() {
        let g = [set(&["A"]), set(&["B", "C"])];
        assert_eq!(full_accuracy(&g, &g), Ok(1.0));
        assert_eq!(partial_accuracy(&g, &g), Ok(1.0));
        assert_eq!(full_accuracy(&[set(&[])], &[set(&[])]), Ok(1.0));
        assert_eq!(partial_accuracy(&[set(&[]), set(&[])], &g), Ok(0.0));
        assert_eq!(
            full_accuracy(&g[..1], &g),
            Err(MetricError::LengthMismatch { preds: 1, golds: 2 })
        );
        assert_eq!(partial_accuracy(&[], &[]), Err(MetricError::Empty));
    }

    fn outcome(cat: &str, gold: &[&str], pred: &[&str]) -> Outcome {
        Outcome::new("q", cat, set(gold), set(pred), false)
    }

    #[test]
    fn report_per_category() {
        let r = report_from_outcomes(&[
            outcome("a", &["A"], &["A"]),
            outcome("a", &["A"], &["B"]),
            outcome("b", &["A", "B"], &["A"]),
        ])
        .unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.per_category["a"].n, 2);
        assert_eq!(r.per_category["a"].acc_full, 0.5);
        assert_eq!(r.per_category["b"].acc_full, 0.0);
        assert_eq!(r.per_category["b"].acc_partial, 1.0);
        assert!((r.acc_partial - 2.0 / 3.0).abs() < 1e-15);
    }

    fn outcome_strategy() -> impl Strategy<Value = Outcome> {
        let ids = prop::sample::subsequence(vec!["A", "B", "C", "D"], 0..=4);
        let gold = prop::sample::subsequence(vec!["A", "B", "C", "D"], 1..=4);
        (prop::sample::select(vec!["x", "y", "z"]), gold, ids).prop_map(|(c, g, p)| outcome(c, &g, &p))
    }

    proptest! {
        #[test]
        fn bounds_and_partition(mut outcomes in prop::collection::vec(outcome_strategy(), 1..40), seed in any::<u64>()) {
            let r = report_from_outcomes(&outcomes).unwrap();
            prop_assert!(0.0 <= r.acc_full && r.acc_full <= r.acc_partial && r.acc_partial <= 1.0);
            let n: usize = r.per_category.values().map(|c| c.n).sum();
            prop_assert_eq!(n, r.n);
            let full: f64 = r.per_category.values().map(|c| c.n as f64 * c.acc_full).sum::<f64>() / r.n as f64;
            let part: f64 = r.per_category.values().map(|c| c.n as f64 * c.acc_partial).sum::<f64>() / r.n as f64;
            prop_assert!((full - r.acc_full).abs() < 1e-12);
            prop_assert!((part - r.acc_partial).abs() < 1e-12);
            crate::rng::SplitMix64::new(seed).shuffle(&mut outcomes);
            prop_assert_eq!(report_from_outcomes(&outcomes).unwrap(), r);
        }
    }
}
