//! Template library construction.
//!
//! `m` seed templates are generated, each seed is extended once by
//! structured continuation (`T1`), every template in `T1` is rewritten in
//! `v` styles (`T2`), and each template in `T2` is run through the reasoning
//! engine on a sampled subset `D1` of the dataset. Templates whose partial
//! accuracy on `D1` reaches `theta` are retained; the rest stay in the
//! library marked rejected. Per-query outcomes are kept as [`ScoreRecord`]s
//! for preference-pair mining.

mod generate;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use generate::{expand_with_prefix, generate_seeds, seed_id, style_transfer};

use crate::domain::json::{self, JsonError};
use crate::domain::{Query, RuleIdSet, Template, TemplateLibrary, TemplateStatus};
use crate::engine::{Engine, EngineError};
use crate::gateway::GatewayError;
use crate::hash::fnv1a64;
use crate::prompts::{LibraryPrompts, PromptError};
use crate::rng::SplitMix64;
use crate::selector::SelectionResult;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("{stage} generation: {source}")]
    Gateway {
        stage: &'static str,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("only {got} of {wanted} seed templates are valid; rejected: {}", rejected.join(" | "))]
    InsufficientSeeds {
        wanted: usize,
        got: usize,
        rejected: Vec<String>,
    },
    #[error("no evaluation record for template `{0}`")]
    MissingRecord(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Json(#[from] JsonError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Number of seed templates.
    pub m: usize,
    /// Prefix length in steps; `None` uses `n - 1` for an `n`-step seed.
    pub k: Option<usize>,
    /// Style variants per template.
    pub v: usize,
    /// Fraction of the dataset sampled into `D1`.
    pub r: f64,
    /// Minimum partial accuracy on `D1` for a template to be retained.
    pub theta: f64,
    pub rng_seed: u64,
    pub prompts: LibraryPrompts,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            m: 10,
            k: None,
            v: 2,
            r: 0.2,
            theta: 0.5,
            rng_seed: 0,
            prompts: LibraryPrompts::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.into()));
        if self.m < 1 {
            return bad("m must be at least 1");
        }
        if self.k == Some(0) {
            return bad("k must be at least 1");
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return bad("r must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Accuracy of one template on one evaluation subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub template_id: String,
    pub dataset_id: String,
    pub n: usize,
    pub correct_partial: usize,
    pub correct_full: usize,
    /// `correct_partial / n`, or 0 when `n` is 0.
    pub accuracy: f64,
}

/// Outcome of one template on one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub template_id: String,
    pub query_id: String,
    /// Whether the prediction overlaps the gold set.
    pub correct: bool,
    pub prediction: RuleIdSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One line of the build log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildNote {
    pub stage: String,
    pub subject: String,
    pub kind: String,
    pub detail: String,
}

impl BuildNote {
    pub fn new(stage: &str, subject: impl Into<String>, kind: &str, detail: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            subject: subject.into(),
            kind: kind.into(),
            detail: detail.into(),
        }
    }
}

/// Samples `max(1, floor(r * |dataset|))` queries without replacement.
pub fn sample_eval_subset(dataset: &[Query], r: f64, rng_seed: u64) -> Result<Vec<Query>, PipelineError> {
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(PipelineError::Config("r must lie in (0, 1]".into()));
    }
    let k = ((r * dataset.len() as f64).floor() as usize).clamp(1, dataset.len());
    let mut rng = SplitMix64::new(rng_seed);
    Ok(rng
        .sample_indices(dataset.len(), k)
        .into_iter()
        .map(|i| dataset[i].clone())
        .collect())
}

/// Fingerprint of an evaluation subset, stable across runs and languages.
pub fn dataset_id(d1: &[Query]) -> String {
    let joined = d1.iter().map(|q| q.id.as_str()).collect::<Vec<_>>().join("\n");
    format!("d1-{:016x}", fnv1a64(joined.as_bytes()))
}

fn aggregate(template_id: &str, dataset_id: &str, d1: &[Query], scores: &[ScoreRecord]) -> EvalRecord {
    let n = scores.len();
    let correct_partial = scores.iter().filter(|s| s.correct).count();
    let correct_full = scores
        .iter()
        .zip(d1)
        .filter(|(s, q)| s.error.is_none() && s.prediction == q.gold)
        .count();
    EvalRecord {
        template_id: template_id.to_string(),
        dataset_id: dataset_id.to_string(),
        n,
        correct_partial,
        correct_full,
        accuracy: if n == 0 { 0.0 } else { correct_partial as f64 / n as f64 },
    }
}

fn score_one(engine: &Engine, t: &Template, q: &Query) -> ScoreRecord {
    match engine.run_with_template(q, t, SelectionResult::forced(t.id.clone())) {
        Ok(trace) => {
            let prediction = trace.final_judgment.chosen;
            ScoreRecord {
                template_id: t.id.clone(),
                query_id: q.id.clone(),
                correct: !prediction.is_disjoint(&q.gold),
                prediction,
                error: None,
            }
        }
        Err(e) => {
            log::warn!("template {} on query {}: {e}", t.id, q.id);
            ScoreRecord {
                template_id: t.id.clone(),
                query_id: q.id.clone(),
                correct: false,
                prediction: RuleIdSet::new(),
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs the engine with `t` forced on every query of `d1`.
pub fn evaluate_template(engine: &Engine, t: &Template, d1: &[Query]) -> (EvalRecord, Vec<ScoreRecord>) {
    let scores: Vec<ScoreRecord> = engine.install(|| d1.par_iter().map(|q| score_one(engine, t, q)).collect());
    (aggregate(&t.id, &dataset_id(d1), d1, &scores), scores)
}

/// Evaluates every template over every query of `d1`, fanning out across
/// all (template, query) pairs. Score records come back sorted by
/// `(template_id, query_id)`.
pub fn evaluate_templates(engine: &Engine, templates: &[Template], d1: &[Query]) -> (Vec<EvalRecord>, Vec<ScoreRecord>) {
    let pairs: Vec<(usize, usize)> = (0..templates.len()).flat_map(|t| (0..d1.len()).map(move |q| (t, q))).collect();
    let flat: Vec<ScoreRecord> = engine.install(|| {
        pairs
            .par_iter()
            .map(|&(t, q)| score_one(engine, &templates[t], &d1[q]))
            .collect()
    });
    let id = dataset_id(d1);
    let records = templates
        .iter()
        .zip(flat.chunks(d1.len().max(1)))
        .map(|(t, chunk)| aggregate(&t.id, &id, d1, chunk))
        .collect();
    let mut scores = flat;
    scores.sort_by(|a, b| (&a.template_id, &a.query_id).cmp(&(&b.template_id, &b.query_id)));
    (records, scores)
}

/// Marks templates retained when their accuracy reaches `theta` and
/// rejected otherwise. Templates already rejected stay rejected.
pub fn filter_library(
    task_context: &str,
    t2: Vec<Template>,
    records: &[EvalRecord],
    theta: f64,
) -> Result<TemplateLibrary, PipelineError> {
    let mut templates = t2;
    for t in &mut templates {
        let rec = records
            .iter()
            .find(|r| r.template_id == t.id)
            .ok_or_else(|| PipelineError::MissingRecord(t.id.clone()))?;
        t.status = if t.status != TemplateStatus::Rejected && rec.accuracy >= theta {
            TemplateStatus::Retained
        } else {
            TemplateStatus::Rejected
        };
    }
    Ok(TemplateLibrary::new(task_context, templates))
}

/// The evaluation subset as persisted next to a library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetInfo {
    pub dataset_id: String,
    pub ratio: f64,
    pub rng_seed: u64,
    pub query_ids: Vec<String>,
}

/// Everything a library build produces.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutput {
    pub library: TemplateLibrary,
    pub subset: SubsetInfo,
    pub d1: Vec<Query>,
    pub records: Vec<EvalRecord>,
    pub scores: Vec<ScoreRecord>,
    pub log: Vec<BuildNote>,
    /// Sizes of `T0`, `T1` and `T2`.
    pub counts: [usize; 3],
}

pub const LIBRARY_FILE: &str = "library.json";
pub const RECORDS_FILE: &str = "records.json";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const SUBSET_FILE: &str = "d1.json";
pub const LOG_FILE: &str = "build_log.jsonl";

/// Runs the whole construction pipeline.
pub fn build_library(
    engine: &Engine,
    task_context: &str,
    dataset: &[Query],
    cfg: &PipelineConfig,
) -> Result<BuildOutput, PipelineError> {
    cfg.validate()?;
    let gateway = engine.gateway();
    let mut log = Vec::new();
    let (t0, t1, t2) = engine.install(|| -> Result<_, PipelineError> {
        let t0 = generate_seeds(gateway, &cfg.prompts, task_context, cfg.m, &mut log)?;
        let t1 = expand_with_prefix(gateway, &cfg.prompts, task_context, &t0, cfg.k, &mut log)?;
        let t2 = style_transfer(gateway, &cfg.prompts, task_context, &t1, cfg.v, &mut log)?;
        Ok((t0, t1, t2))
    })?;
    log::info!("templates: {} seeds, {} after continuation, {} after style transfer", t0.len(), t1.len(), t2.len());

    let d1 = sample_eval_subset(dataset, cfg.r, cfg.rng_seed)?;
    let (records, scores) = evaluate_templates(engine, &t2, &d1);
    let counts = [t0.len(), t1.len(), t2.len()];
    let library = filter_library(task_context, t2, &records, cfg.theta)?;
    for t in library.templates.iter().filter(|t| t.status == TemplateStatus::Rejected) {
        let acc = records.iter().find(|r| r.template_id == t.id).map_or(0.0, |r| r.accuracy);
        log.push(BuildNote::new("filter", t.id.clone(), "rejected", format!("accuracy {acc} below theta {}", cfg.theta)));
    }
    Ok(BuildOutput {
        subset: SubsetInfo {
            dataset_id: dataset_id(&d1),
            ratio: cfg.r,
            rng_seed: cfg.rng_seed,
            query_ids: d1.iter().map(|q| q.id.clone()).collect(),
        },
        library,
        d1,
        records,
        scores,
        log,
        counts,
    })
}

/// Writes the library, records, score records, subset and build log into `dir`.
pub fn write_build(dir: &Path, out: &BuildOutput) -> Result<(), PipelineError> {
    json::write_file(&dir.join(LIBRARY_FILE), &out.library)?;
    json::write_file(&dir.join(RECORDS_FILE), &out.records)?;
    json::write_jsonl(&dir.join(SCORES_FILE), &out.scores)?;
    json::write_file(&dir.join(SUBSET_FILE), &out.subset)?;
    json::write_jsonl(&dir.join(LOG_FILE), &out.log)?;
    Ok(())
}
