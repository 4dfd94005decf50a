//! Hashed features for the linear preference scorer.
//!
//! Text is lowercased and split on every non-alphanumeric character; each
//! distinct token is used once. For a query `Q` and template `T` the feature
//! strings are `q:<tok>` for query tokens, `t:<tok>` for template tokens and
//! `x:<qtok>|<ttok>` for every query/template token pair. A feature string
//! `f` lands at index `fnv1a64(f) & (dim - 1)`; colliding features add up.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::hash::fnv1a64;

/// Distinct lowercase alphanumeric tokens, sorted.
pub fn tokenize(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Feature strings of a (query, template) pair in a fixed order.
pub fn feature_strings(query: &str, template: &str) -> Vec<String> {
    let qt = tokenize(query);
    let tt = tokenize(template);
    let mut out = Vec::with_capacity(qt.len() + tt.len() + qt.len() * tt.len());
    out.extend(qt.iter().map(|t| format!("q:{t}")));
    out.extend(tt.iter().map(|t| format!("t:{t}")));
    for a in &qt {
        for b in &tt {
            out.push(format!("x:{a}|{b}"));
        }
    }
    out
}

pub fn feature_index(feature: &str, dim: usize) -> usize {
    debug_assert!(dim.is_power_of_two());
    (fnv1a64(feature.as_bytes()) & (dim as u64 - 1)) as usize
}

/// Sparse feature vector: sorted indices with their multiplicities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    fn from_indices(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(idx.len());
        for i in idx {
            match entries.last_mut() {
                Some((j, c)) if *j == i => *c += 1.0,
                _ => entries.push((i, 1.0)),
            }
        }
        Self { entries }
    }

    /// `self - other`, dropping zero entries.
    pub fn minus(&self, other: &SparseVec) -> SparseVec {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                    i += 1;
                    j += 1;
                    (ia, va - vb)
                }
                (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                    i += 1;
                    (ia, va)
                }
                (Some(&(ia, va)), None) => {
                    i += 1;
                    (ia, va)
                }
                (_, Some(&(ib, vb))) => {
                    j += 1;
                    (ib, -vb)
                }
                (None, None) => unreachable!(),
            };
            if next.1 != 0.0 {
                out.push(next);
            }
        }
        SparseVec { entries: out }
    }
}

/// `phi(Q, T)` for a feature space of size `dim` (a power of two).
pub fn features(query: &str, template: &str, dim: usize) -> SparseVec {
    SparseVec::from_indices(
        feature_strings(query, template)
            .iter()
            .map(|f| feature_index(f, dim))
            .collect(),
    )
}

/// Description stored with trained parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub hash: String,
    pub features: String,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            hash: "fnv1a-64 mod feature_dim".into(),
            features: "unigram tokens of query and of template, plus query-token x template-token pair hashes".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_distinct_and_lowercase() {
        let t: Vec<_> = tokenize("Grow 5cm, grow FAST! [claimed-effect]").into_iter().collect();
        assert_eq!(t, ["5cm", "claimed", "effect", "fast", "grow"]);
    }

    #[test]
    fn feature_strings_layout() {
        assert_eq!(feature_strings("a b", "c"), ["q:a", "q:b", "t:c", "x:a|c", "x:b|c"]);
    }

    #[test]
    fn sparse_difference() {
        let a = SparseVec::from_indices(vec![1, 3, 3, 7]);
        let b = SparseVec::from_indices(vec![3, 5, 7]);
        assert_eq!(a.minus(&b).entries, [(1, 1.0), (3, 1.0), (5, -1.0)]);
    }
}
