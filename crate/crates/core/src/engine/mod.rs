//! The three-stage reasoning pipeline.
//!
//! For each query the engine selects a template, forms a qualitative
//! judgment, extracts and rule-matches evidence for each template
//! placeholder, and adjudicates a final judgment over the resulting
//! evidence chain. Provider failures after selection degrade the affected
//! stage instead of aborting the query; only selection failures and
//! qualitative-stage provider failures abort.

pub mod parse;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    EvidenceChain, EvidenceItem, Judgment, JudgmentStage, Query, RuleIdSet, RuleSet, Template, TemplateLibrary,
    Verdict, VerifiedEvidence,
};
use crate::gateway::{Gateway, GatewayError, GenRequest};
use crate::prompts::{self, PromptError};
use crate::selector::{SelectionError, SelectionResult, Selector};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("{stage} stage: {source}")]
    Provider {
        stage: &'static str,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid stage configuration: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePrompts {
    pub qualitative: String,
    pub extract: String,
    #[serde(rename = "match")]
    pub match_rules: String,
    pub adjudicate: String,
}

impl Default for StagePrompts {
    fn default() -> Self {
        Self {
            qualitative: prompts::QUALITATIVE.into(),
            extract: prompts::EXTRACT.into(),
            match_rules: prompts::MATCH.into(),
            adjudicate: prompts::ADJUDICATE.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            max_tokens: 1024,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagesEnabled {
    pub evidence: bool,
    pub adjudication: bool,
}

impl Default for StagesEnabled {
    fn default() -> Self {
        Self {
            evidence: true,
            adjudication: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    #[serde(default)]
    pub prompts: StagePrompts,
    #[serde(default)]
    pub decoding: Decoding,
    #[serde(default)]
    pub stages_enabled: StagesEnabled,
}

const QUALITATIVE_SLOTS: &[&str] = &["query", "rules", "template"];
const EXTRACT_SLOTS: &[&str] = &["query", "rules", "template", "placeholder"];
const MATCH_SLOTS: &[&str] = &["query", "rules", "template", "placeholder", "evidence"];
const ADJUDICATE_SLOTS: &[&str] = &["query", "rules", "template", "initial_judgment", "chain"];

impl StageConfig {
    pub fn with_stages(evidence: bool, adjudication: bool) -> Self {
        Self {
            stages_enabled: StagesEnabled { evidence, adjudication },
            ..Self::default()
        }
    }

    /// Checks that every slot in every prompt can be filled at render time.
    pub fn validate(&self) -> Result<(), EngineError> {
        let p = &self.prompts;
        for (name, text, allowed) in [
            ("qualitative", &p.qualitative, QUALITATIVE_SLOTS),
            ("extract", &p.extract, EXTRACT_SLOTS),
            ("match", &p.match_rules, MATCH_SLOTS),
            ("adjudicate", &p.adjudicate, ADJUDICATE_SLOTS),
        ] {
            if let Some(bad) = prompts::slots(text).into_iter().find(|s| !allowed.contains(&s.as_str())) {
                return Err(EngineError::Config(format!("{name} prompt uses unknown slot `{{{bad}}}`")));
            }
        }
        if self.decoding.max_tokens == 0 || !(self.decoding.temperature >= 0.0) {
            return Err(EngineError::Config("decoding needs max_tokens >= 1 and temperature >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimedStage {
    Selection,
    Qualitative,
    Extraction,
    Matching,
    Adjudication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: TimedStage,
    /// Position in execution order, starting at 0.
    pub order: usize,
    /// Wall-clock duration; omitted unless timing capture is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub query_id: String,
    pub selection: SelectionResult<f64>,
    pub initial: Judgment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<EvidenceChain>,
    #[serde(rename = "final")]
    pub final_judgment: Judgment,
    pub timings: Vec<StageTiming>,
}

#[derive(Default)]
struct Clock {
    capture: bool,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn time<T>(&mut self, stage: TimedStage, f: impl FnOnce() -> T) -> T {
        let started = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage,
            order: self.timings.len(),
            elapsed_ms: self.capture.then(|| started.elapsed().as_secs_f64() * 1e3),
        });
        out
    }
}

/// Runs the reasoning stages against a provider.
#[derive(Clone)]
pub struct Engine {
    gateway: Gateway,
    rules: Arc<RuleSet>,
    stages: StageConfig,
    pool: Arc<rayon::ThreadPool>,
    capture_timings: bool,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("gateway", &self.gateway)
            .field("stages", &self.stages.stages_enabled)
            .finish()
    }
}

impl Engine {
    /// Builds an engine whose batch work runs on a pool sized to the
    /// gateway's concurrency limit.
    pub fn new(gateway: Gateway, rules: RuleSet, stages: StageConfig) -> Result<Self, EngineError> {
        stages.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(gateway.concurrency_limit())
            .thread_name(|i| format!("dynjudge-{i}"))
            .build()
            .map_err(|e| EngineError::Pool(e.to_string()))?;
        Ok(Self {
            gateway,
            rules: Arc::new(rules),
            stages,
            pool: Arc::new(pool),
            capture_timings: false,
        })
    }

    /// Same provider and rules, different stage configuration.
    pub fn with_stages(&self, stages: StageConfig) -> Result<Self, EngineError> {
        stages.validate()?;
        Ok(Self {
            stages,
            ..self.clone()
        })
    }

    /// Record wall-clock stage durations in traces (off by default so that
    /// traces are reproducible byte for byte).
    pub fn capture_timings(mut self, on: bool) -> Self {
        self.capture_timings = on;
        self
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn stages(&self) -> &StageConfig {
        &self.stages
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Runs `f` on the engine's bounded pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    fn rules_text(&self, query: &Query) -> String {
        self.rules
            .for_category(&query.category)
            .iter()
            .map(|r| format!("{}. {}: {}", r.id, r.title, r.body))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn request(&self, prompt: String, tag: String) -> GenRequest {
        GenRequest {
            prompt,
            max_tokens: self.stages.decoding.max_tokens,
            temperature: self.stages.decoding.temperature,
            stop: None,
            tag,
        }
    }

    /// Stage 1: an initial, holistic judgment. Provider errors propagate.
    pub fn qualitative_analysis(&self, query: &Query, template: &Template) -> Result<Judgment, EngineError> {
        let rules = self.rules_text(query);
        let prompt = prompts::render(
            &self.stages.prompts.qualitative,
            &[("query", &query.content), ("rules", &rules), ("template", &template.body)],
        )?;
        let tag = format!("qualitative/{}/{}", query.id, template.id);
        let resp = self
            .gateway
            .generate(&self.request(prompt, tag))
            .map_err(|source| EngineError::Provider {
                stage: "qualitative",
                source,
            })?;
        Ok(self.judgment_from(JudgmentStage::Qualitative, resp.text))
    }

    fn judgment_from(&self, stage: JudgmentStage, raw: String) -> Judgment {
        match parse::parse_answer(&raw, &self.rules) {
            Some(ans) => {
                let mut notes = Vec::new();
                if !ans.unknown.is_empty() {
                    notes.push(format!("dropped unknown rule ids: {}", ans.unknown.join(",")));
                }
                let parse_failed = ans.chosen.is_empty();
                if parse_failed {
                    notes.push("answer line names no known rule".into());
                }
                Judgment {
                    stage,
                    chosen: ans.chosen,
                    rationale: ans.rationale,
                    raw_output: raw,
                    parse_failed,
                    fallback: false,
                    notes,
                }
            }
            None => Judgment {
                stage,
                chosen: RuleIdSet::new(),
                rationale: raw.trim().to_string(),
                raw_output: raw,
                parse_failed: true,
                fallback: false,
                notes: vec!["no answer line".into()],
            },
        }
    }

    /// Evidence for one placeholder: a span of the query, or nothing.
    pub fn extract_evidence(&self, placeholder: &str, query: &Query, template: &Template) -> EvidenceItem {
        let rules = self.rules_text(query);
        let prompt = match prompts::render(
            &self.stages.prompts.extract,
            &[
                ("query", &query.content),
                ("rules", &rules),
                ("template", &template.body),
                ("placeholder", placeholder),
            ],
        ) {
            Ok(p) => p,
            Err(e) => return EvidenceItem::missing(placeholder, Some(e.to_string())),
        };
        let tag = format!("extract/{}/{}/{}", query.id, template.id, placeholder);
        match self.gateway.generate(&self.request(prompt, tag)) {
            Err(e) => EvidenceItem::missing(placeholder, Some(format!("extraction failed: {e}"))),
            Ok(resp) => match parse::parse_extraction(&resp.text) {
                None => EvidenceItem::missing(placeholder, None),
                Some(span) => {
                    let non_verbatim = !parse::is_verbatim(&span, &query.content);
                    EvidenceItem {
                        placeholder: placeholder.to_string(),
                        extracted: span,
                        found: true,
                        non_verbatim,
                        note: non_verbatim.then(|| "span not found verbatim in query".to_string()),
                    }
                }
            },
        }
    }

    /// Checks one evidence item against the rules. Missing evidence is
    /// inconclusive without a provider call.
    pub fn match_rules(&self, item: EvidenceItem, query: &Query, template: &Template) -> VerifiedEvidence {
        if !item.found {
            return VerifiedEvidence::inconclusive(item, "no evidence to match");
        }
        let rules = self.rules_text(query);
        let prompt = match prompts::render(
            &self.stages.prompts.match_rules,
            &[
                ("query", &query.content),
                ("rules", &rules),
                ("template", &template.body),
                ("placeholder", &item.placeholder),
                ("evidence", &item.extracted),
            ],
        ) {
            Ok(p) => p,
            Err(e) => return VerifiedEvidence::inconclusive(item, e.to_string()),
        };
        let tag = format!("match/{}/{}/{}", query.id, template.id, item.placeholder);
        let resp = match self.gateway.generate(&self.request(prompt, tag)) {
            Ok(r) => r,
            Err(e) => return VerifiedEvidence::inconclusive(item, format!("matching failed: {e}")),
        };
        let Some(parsed) = parse::parse_match(&resp.text, &self.rules) else {
            return VerifiedEvidence::inconclusive(item, "unparseable match output");
        };
        let mut notes = Vec::new();
        if !parsed.dropped.is_empty() {
            notes.push(format!("dropped unknown rule ids: {}", parsed.dropped.join(",")));
        }
        let verdict = parsed.verdict.unwrap_or_else(|| {
            notes.push("missing verdict".into());
            Verdict::Inconclusive
        });
        VerifiedEvidence {
            item,
            matched_rules: parsed.matched,
            verdict,
            note: notes.join("; "),
        }
    }

    /// Stage 3: re-evaluates the initial judgment over the evidence chain.
    ///
    /// With adjudication disabled, or when the provider fails or the output
    /// has no answer line, the initial judgment's choice is carried over.
    pub fn adjudicate(&self, initial: &Judgment, chain: &EvidenceChain, query: &Query, template: &Template) -> Judgment {
        if !self.stages.stages_enabled.adjudication {
            let mut j = initial.clone();
            j.stage = JudgmentStage::Final;
            j.notes.push("adjudication disabled: final judgment is the qualitative judgment".into());
            return j;
        }
        let fallback = |raw: String, note: String, parse_failed: bool| Judgment {
            stage: JudgmentStage::Final,
            chosen: initial.chosen.clone(),
            rationale: initial.rationale.clone(),
            raw_output: raw,
            parse_failed,
            fallback: true,
            notes: vec![note],
        };
        let rules = self.rules_text(query);
        let initial_text = render_judgment(initial);
        let chain_text = render_chain(chain);
        let prompt = match prompts::render(
            &self.stages.prompts.adjudicate,
            &[
                ("query", &query.content),
                ("rules", &rules),
                ("template", &template.body),
                ("initial_judgment", &initial_text),
                ("chain", &chain_text),
            ],
        ) {
            Ok(p) => p,
            Err(e) => return fallback(String::new(), e.to_string(), false),
        };
        let tag = format!("adjudicate/{}/{}", query.id, template.id);
        match self.gateway.generate(&self.request(prompt, tag)) {
            Err(e) => fallback(String::new(), format!("adjudication failed: {e}"), false),
            Ok(resp) => {
                let j = self.judgment_from(JudgmentStage::Final, resp.text);
                if j.parse_failed {
                    fallback(j.raw_output, "unparseable adjudication; kept initial judgment".into(), true)
                } else {
                    j
                }
            }
        }
    }

    /// Runs all stages with `template` already chosen.
    pub fn run_with_template(
        &self,
        query: &Query,
        template: &Template,
        selection: SelectionResult<f64>,
    ) -> Result<PipelineTrace, EngineError> {
        self.run_stages(query, template, selection, Clock {
            capture: self.capture_timings,
            timings: Vec::new(),
        })
    }

    fn run_stages(
        &self,
        query: &Query,
        template: &Template,
        selection: SelectionResult<f64>,
        mut clock: Clock,
    ) -> Result<PipelineTrace, EngineError> {
        let initial = clock.time(TimedStage::Qualitative, || self.qualitative_analysis(query, template))?;

        let chain = if self.stages.stages_enabled.evidence {
            let items: Vec<EvidenceItem> = clock.time(TimedStage::Extraction, || {
                template
                    .placeholders
                    .par_iter()
                    .map(|p| self.extract_evidence(p, query, template))
                    .collect()
            });
            let verified: Vec<VerifiedEvidence> = clock.time(TimedStage::Matching, || {
                items
                    .into_par_iter()
                    .map(|item| self.match_rules(item, query, template))
                    .collect()
            });
            Some(
                EvidenceChain::assemble(&template.placeholders, verified)
                    .expect("one entry per template placeholder"),
            )
        } else {
            None
        };

        let empty = EvidenceChain::default();
        let final_judgment = if self.stages.stages_enabled.adjudication {
            clock.time(TimedStage::Adjudication, || {
                self.adjudicate(&initial, chain.as_ref().unwrap_or(&empty), query, template)
            })
        } else {
            self.adjudicate(&initial, &empty, query, template)
        };

        Ok(PipelineTrace {
            query_id: query.id.clone(),
            selection,
            initial,
            chain,
            final_judgment,
            timings: clock.timings,
        })
    }

    /// Selects a template for `query` and runs all stages.
    pub fn run_pipeline(&self, query: &Query, lib: &TemplateLibrary, selector: &Selector) -> Result<PipelineTrace, EngineError> {
        let mut clock = Clock {
            capture: self.capture_timings,
            timings: Vec::new(),
        };
        let selection = clock.time(TimedStage::Selection, || selector.select(query, lib))?;
        let template = lib
            .get(&selection.template_id)
            .expect("selected template comes from the library");
        self.run_stages(query, template, selection, clock)
    }

    /// Runs many queries on the bounded pool; results keep input order.
    pub fn run_batch(
        &self,
        queries: &[Query],
        lib: &TemplateLibrary,
        selector: &Selector,
    ) -> Vec<Result<PipelineTrace, EngineError>> {
        self.install(|| queries.par_iter().map(|q| self.run_pipeline(q, lib, selector)).collect())
    }
}

fn render_ids(ids: &RuleIdSet) -> String {
    if ids.is_empty() {
        "NONE".into()
    } else {
        ids.iter().cloned().collect::<Vec<_>>().join(",")
    }
}

/// Text form of a judgment used in the adjudication prompt.
pub fn render_judgment(j: &Judgment) -> String {
    let mut s = format!("ANSWER: {}", render_ids(&j.chosen));
    if !j.rationale.is_empty() {
        s.push('\n');
        s.push_str(&j.rationale);
    }
    s
}

/// Text form of an evidence chain used in the adjudication prompt.
pub fn render_chain(chain: &EvidenceChain) -> String {
    if chain.is_empty() {
        return "(no evidence gathered)".into();
    }
    chain
        .entries
        .iter()
        .map(|e| {
            let evidence = if e.item.found {
                format!("\"{}\"", e.item.extracted)
            } else {
                "NONE".into()
            };
            let mut line = format!(
                "- [{}] evidence: {} | rules: {} | verdict: {}",
                e.item.placeholder,
                evidence,
                render_ids(&e.matched_rules),
                e.verdict.as_str()
            );
            if !e.note.is_empty() {
                line.push_str(&format!(" | note: {}", e.note));
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}
