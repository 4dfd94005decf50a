//! Core data types shared across the crate, plus the template grammars.

mod grammar;
pub mod json;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

pub use grammar::{find_duplicate, normalize_body, parse_placeholders, parse_steps, NumberedStep, StepError};

/// Identifier of a rule, e.g. an option letter.
pub type RuleId = String;

/// A set of rule ids; ordered so serialisation is stable.
pub type RuleIdSet = BTreeSet<RuleId>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: RuleId,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compliant_option: Option<RuleId>,
}

impl RuleSet {
    /// Returns the invariant violations of this rule set; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        let mut seen = HashSet::new();
        for rule in &self.rules {
            if rule.id.trim().is_empty() {
                report.push(format!("empty id (title: {})", rule.title));
            } else if !seen.insert(rule.id.as_str()) {
                report.push(format!("duplicate id: {}", rule.id));
            }
            if rule.body.trim().is_empty() {
                report.push(format!("empty body: {}", rule.id));
            }
        }
        if let Some(opt) = &self.compliant_option {
            if !self.rules.iter().any(|r| &r.id == opt) {
                report.push(format!("unknown compliant option: {opt}"));
            }
        }
        report
    }

    pub fn contains(&self, id: &str) -> bool {
        self.rules.iter().any(|r| r.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Case-insensitive lookup returning the canonical id.
    pub fn resolve(&self, id: &str) -> Option<&RuleId> {
        let id = id.trim();
        self.rules
            .iter()
            .find(|r| r.id.eq_ignore_ascii_case(id))
            .map(|r| &r.id)
    }

    /// Rules that apply to a query category: rules with that category plus
    /// uncategorised ones. Falls back to every rule when nothing matches.
    pub fn for_category(&self, category: &str) -> Vec<&Rule> {
        let picked: Vec<&Rule> = self
            .rules
            .iter()
            .filter(|r| r.category.is_empty() || r.category == category)
            .collect();
        if picked.iter().any(|r| !r.category.is_empty()) {
            picked
        } else {
            self.rules.iter().collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    #[serde(default)]
    pub category: String,
    pub content: String,
    #[serde(default)]
    pub gold: RuleIdSet,
}

/// Checks dataset-level invariants: unique ids and, when a rule set is
/// given, gold labels drawn from it.
pub fn validate_dataset(queries: &[Query], rules: Option<&RuleSet>) -> Vec<String> {
    let mut report = Vec::new();
    let mut seen = HashSet::new();
    for q in queries {
        if !seen.insert(q.id.as_str()) {
            report.push(format!("duplicate query id: {}", q.id));
        }
        if let Some(rs) = rules {
            for g in &q.gold {
                if !rs.contains(g) {
                    report.push(format!("query {}: unknown gold rule {g}", q.id));
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Seed,
    Continuation,
    Styled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_id: Option<String>,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix_len: Option<usize>,
    /// Free-form audit note, e.g. a duplicate flag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Lineage {
    pub fn seed() -> Self {
        Self {
            seed_id: None,
            stage: Stage::Seed,
            style_tag: None,
            prefix_len: None,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStatus {
    Candidate,
    Retained,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub name: String,
    pub body: String,
    pub placeholders: Vec<String>,
    pub lineage: Lineage,
    pub status: TemplateStatus,
}

impl Template {
    /// Builds a candidate template, deriving placeholders from the body.
    pub fn new(id: impl Into<String>, name: impl Into<String>, body: impl Into<String>, lineage: Lineage) -> Self {
        let body = body.into();
        Self {
            id: id.into(),
            name: name.into(),
            placeholders: parse_placeholders(&body),
            body,
            lineage,
            status: TemplateStatus::Candidate,
        }
    }

    /// Reports placeholder and lineage invariant violations.
    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        if self.placeholders != parse_placeholders(&self.body) {
            report.push(format!("template {}: placeholders do not match body", self.id));
        }
        if self.lineage.stage == Stage::Seed && self.lineage.seed_id.is_some() {
            report.push(format!("template {}: seed carries a seed_id", self.id));
        }
        report
    }

    pub fn is_retained(&self) -> bool {
        self.status == TemplateStatus::Retained
    }
}

pub const LIBRARY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateLibrary {
    pub version: u32,
    pub task_context: String,
    pub templates: Vec<Template>,
}

impl TemplateLibrary {
    pub fn new(task_context: impl Into<String>, templates: Vec<Template>) -> Self {
        Self {
            version: LIBRARY_FORMAT_VERSION,
            task_context: task_context.into(),
            templates,
        }
    }

    pub fn retained(&self) -> impl Iterator<Item = &Template> {
        self.templates.iter().filter(|t| t.is_retained())
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Duplicate ids, per-template invariants and lineage closure.
    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        let mut seen = HashSet::new();
        for t in &self.templates {
            if !seen.insert(t.id.as_str()) {
                report.push(format!("duplicate template id: {}", t.id));
            }
            report.extend(t.validate());
            if t.lineage.stage != Stage::Seed {
                match t.lineage.seed_id.as_deref().and_then(|s| self.get(s)) {
                    Some(seed) if seed.lineage.stage == Stage::Seed => {}
                    _ => report.push(format!("template {}: seed_id does not resolve to a seed", t.id)),
                }
            }
        }
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgmentStage {
    Qualitative,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub stage: JudgmentStage,
    pub chosen: RuleIdSet,
    pub rationale: String,
    pub raw_output: String,
    /// Set when no answer line could be parsed from the output.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub parse_failed: bool,
    /// Set when the final judgment fell back to the qualitative one.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub placeholder: String,
    pub extracted: String,
    pub found: bool,
    /// True when `extracted` does not occur in the query text.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub non_verbatim: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl EvidenceItem {
    pub fn missing(placeholder: impl Into<String>, note: Option<String>) -> Self {
        Self {
            placeholder: placeholder.into(),
            extracted: String::new(),
            found: false,
            non_verbatim: false,
            note,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SupportsViolation,
    SupportsCompliance,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::SupportsViolation => "supports_violation",
            Verdict::SupportsCompliance => "supports_compliance",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "supports_violation" => Some(Verdict::SupportsViolation),
            "supports_compliance" => Some(Verdict::SupportsCompliance),
            "inconclusive" => Some(Verdict::Inconclusive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedEvidence {
    pub item: EvidenceItem,
    pub matched_rules: RuleIdSet,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
}

impl VerifiedEvidence {
    pub fn inconclusive(item: EvidenceItem, note: impl Into<String>) -> Self {
        Self {
            item,
            matched_rules: RuleIdSet::new(),
            verdict: Verdict::Inconclusive,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceChain {
    pub entries: Vec<VerifiedEvidence>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("no evidence for placeholder `{0}`")]
    Missing(String),
    #[error("evidence for `{0}` is not a placeholder of the template")]
    Unexpected(String),
    #[error("more than one evidence entry for `{0}`")]
    Duplicate(String),
}

impl EvidenceChain {
    /// Orders verified evidence by the template's placeholder order.
    ///
    /// The result depends only on the set of entries, never on the order in
    /// which they were produced.
    pub fn assemble(placeholders: &[String], entries: Vec<VerifiedEvidence>) -> Result<Self, ChainError> {
        let mut slots: Vec<Option<VerifiedEvidence>> = vec![None; placeholders.len()];
        for entry in entries {
            let pos = placeholders
                .iter()
                .position(|p| *p == entry.item.placeholder)
                .ok_or_else(|| ChainError::Unexpected(entry.item.placeholder.clone()))?;
            if slots[pos].is_some() {
                return Err(ChainError::Duplicate(entry.item.placeholder));
            }
            slots[pos] = Some(entry);
        }
        let entries = slots
            .into_iter()
            .zip(placeholders)
            .map(|(slot, p)| slot.ok_or_else(|| ChainError::Missing(p.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
