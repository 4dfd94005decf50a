//! Parsers for model outputs.
//!
//! Answer lines look like `ANSWER: A` or `answer: a, c`; the last such line
//! in the output wins. Match lines look like
//! `RULES: B,Q | VERDICT: supports_violation`.

use std::sync::OnceLock;

use regex::Regex;

use crate::domain::{RuleIdSet, RuleSet, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAnswer {
    /// Known rule ids named on the answer line, canonicalised.
    pub chosen: RuleIdSet,
    /// Ids on the answer line that are not in the rule set.
    pub unknown: Vec<String>,
    /// The output with the answer line removed.
    pub rationale: String,
}

fn answer_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*answer\s*:\s*([A-Za-z0-9_\-]+(?:\s*,\s*[A-Za-z0-9_\-]+)*)\s*\.?\s*$").unwrap()
    })
}

fn match_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)rules\s*:\s*([^|]*?)\s*(?:\|\s*verdict\s*:\s*([A-Za-z_]+))?\s*\.?\s*$").unwrap()
    })
}

/// Parses the last answer line. `None` when no line matches the grammar.
pub fn parse_answer(output: &str, rules: &RuleSet) -> Option<ParsedAnswer> {
    let lines: Vec<&str> = output.lines().collect();
    let (idx, caps) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| answer_line().captures(l).map(|c| (i, c)))?;
    let mut chosen = RuleIdSet::new();
    let mut unknown = Vec::new();
    for raw in caps[1].split(',').map(str::trim) {
        match rules.resolve(raw) {
            Some(id) => {
                chosen.insert(id.clone());
            }
            None => unknown.push(raw.to_string()),
        }
    }
    let rationale = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, l)| *l)
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string();
    Some(ParsedAnswer {
        chosen,
        unknown,
        rationale,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMatch {
    pub matched: RuleIdSet,
    pub dropped: Vec<String>,
    pub verdict: Option<Verdict>,
}

/// Parses the last `RULES: ... | VERDICT: ...` line.
pub fn parse_match(output: &str, rules: &RuleSet) -> Option<ParsedMatch> {
    let caps = output.lines().rev().find_map(|l| match_line().captures(l))?;
    let mut matched = RuleIdSet::new();
    let mut dropped = Vec::new();
    let list = caps[1].trim();
    if !list.eq_ignore_ascii_case("none") {
        for raw in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match rules.resolve(raw) {
                Some(id) => {
                    matched.insert(id.clone());
                }
                None => dropped.push(raw.to_string()),
            }
        }
    }
    let verdict = caps.get(2).and_then(|m| Verdict::parse(m.as_str()));
    Some(ParsedMatch {
        matched,
        dropped,
        verdict,
    })
}

/// The extracted span, or `None` for the literal `NONE` / an empty reply.
pub fn parse_extraction(output: &str) -> Option<String> {
    let text = output.trim();
    let text = strip_quotes(text).trim();
    if text.is_empty() || text.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(text.to_string())
    }
}

fn strip_quotes(s: &str) -> &str {
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('`', '`')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return &s[open.len_utf8()..s.len() - close.len_utf8()];
        }
    }
    s
}

/// Whether `span` occurs in `text`, ignoring case and runs of whitespace.
pub fn is_verbatim(span: &str, text: &str) -> bool {
    let norm = |s: &str| s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ");
    norm(text).contains(&norm(span))
}
