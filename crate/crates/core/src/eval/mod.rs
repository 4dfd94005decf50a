//! Accuracy metrics, benchmark runs and ablation sweeps.
//!
//! Full accuracy counts predictions equal to the gold set; partial accuracy
//! counts predictions that share at least one rule id with it. A query whose
//! pipeline fails, or whose output yields no answer, counts as wrong and is
//! also reported in `parse_failure_rate`.

mod metrics;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use metrics::{
    exact_match, full_accuracy, overlaps, partial_accuracy, report_from_outcomes, CategoryMetrics, MetricError,
    MetricReport, Outcome,
};

use crate::domain::json::{self, JsonError};
use crate::domain::{Query, TemplateLibrary};
use crate::engine::{Engine, EngineError, PipelineTrace, StageConfig};
use crate::selector::{CandidateCount, Selector, SelectorConfig};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("ablation plan is empty")]
    EmptyPlan,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Json(#[from] JsonError),
    #[error("csv output: {0}")]
    Csv(String),
}

/// Traces, per-query outcomes and the aggregate report of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub report: MetricReport,
    pub outcomes: Vec<Outcome>,
    /// One trace per query that completed, in dataset order.
    pub traces: Vec<PipelineTrace>,
}

/// Runs the pipeline on every query and scores the final judgments.
pub fn run_benchmark(
    engine: &Engine,
    selector: &Selector,
    dataset: &[Query],
    lib: &TemplateLibrary,
) -> Result<BenchmarkRun, EvalError> {
    let results = engine.run_batch(dataset, lib, selector);
    let mut outcomes = Vec::with_capacity(dataset.len());
    let mut traces = Vec::with_capacity(dataset.len());
    for (q, res) in dataset.iter().zip(results) {
        match res {
            Ok(trace) => {
                let f = &trace.final_judgment;
                let no_answer = f.chosen.is_empty() && (f.parse_failed || trace.initial.parse_failed);
                outcomes.push(Outcome::new(&q.id, &q.category, q.gold.clone(), f.chosen.clone(), no_answer));
                traces.push(trace);
            }
            Err(e) => {
                log::warn!("query {}: {e}", q.id);
                outcomes.push(Outcome::failed(&q.id, &q.category, q.gold.clone(), e.to_string()));
            }
        }
    }
    let report = report_from_outcomes(&outcomes)?;
    Ok(BenchmarkRun {
        report,
        outcomes,
        traces,
    })
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| EvalError::Csv(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EvalError::Csv(e.to_string()))
}

/// The report as CSV: one `overall` row, then one row per category.
pub fn report_csv(report: &MetricReport) -> Result<String, EvalError> {
    let mut rows = vec![vec![
        "overall".to_string(),
        report.n.to_string(),
        report.acc_full.to_string(),
        report.acc_partial.to_string(),
    ]];
    for (cat, m) in &report.per_category {
        rows.push(vec![cat.clone(), m.n.to_string(), m.acc_full.to_string(), m.acc_partial.to_string()]);
    }
    csv_text(&["scope", "n", "acc_full", "acc_partial"], rows)
}

/// Writes `report.json`, `report.csv`, `traces.jsonl` and `predictions.jsonl`.
pub fn write_benchmark(dir: &Path, run: &BenchmarkRun) -> Result<(), EvalError> {
    json::write_file(&dir.join(REPORT_JSON), &run.report)?;
    json::write_text(&dir.join(REPORT_CSV), &report_csv(&run.report)?)?;
    json::write_jsonl(&dir.join(TRACES_FILE), &run.traces)?;
    json::write_jsonl(&dir.join(PREDICTIONS_FILE), &run.outcomes)?;
    Ok(())
}

/// Stacked stage configurations: no enhancements, evidence gathering added
/// (`*`), then adjudication added on top (`#`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageSetting {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "*")]
    Evidence,
    #[serde(rename = "#")]
    EvidenceAndAdjudication,
}

impl StageSetting {
    pub const ALL: [StageSetting; 3] = [
        StageSetting::Baseline,
        StageSetting::Evidence,
        StageSetting::EvidenceAndAdjudication,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StageSetting::Baseline => "baseline",
            StageSetting::Evidence => "*",
            StageSetting::EvidenceAndAdjudication => "#",
        }
    }

    pub fn stages(self, base: &StageConfig) -> StageConfig {
        let (evidence, adjudication) = match self {
            StageSetting::Baseline => (false, false),
            StageSetting::Evidence => (true, false),
            StageSetting::EvidenceAndAdjudication => (true, true),
        };
        let mut cfg = base.clone();
        cfg.stages_enabled.evidence = evidence;
        cfg.stages_enabled.adjudication = adjudication;
        cfg
    }
}

impl fmt::Display for StageSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What an ablation varies. Every other setting comes from the engine and
/// selector passed to [`ablate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationPlan {
    Lambdas(Vec<f64>),
    CandidateCounts(Vec<CandidateCount>),
    StageGrid(Vec<StageSetting>),
}

impl AblationPlan {
    pub fn kind(&self) -> &'static str {
        match self {
            AblationPlan::Lambdas(_) => "lambda",
            AblationPlan::CandidateCounts(_) => "candidates",
            AblationPlan::StageGrid(_) => "stages",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AblationPlan::Lambdas(v) => v.len(),
            AblationPlan::CandidateCounts(v) => v.len(),
            AblationPlan::StageGrid(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub kind: String,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn get(&self, setting: &str) -> Option<&MetricReport> {
        self.rows.iter().find(|r| r.setting == setting).map(|r| &r.report)
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    self.kind.clone(),
                    r.setting.clone(),
                    r.report.n.to_string(),
                    r.report.acc_full.to_string(),
                    r.report.acc_partial.to_string(),
                    r.report.parse_failure_rate.to_string(),
                ]
            })
            .collect();
        csv_text(&["kind", "setting", "n", "acc_full", "acc_partial", "parse_failure_rate"], rows)
    }

    /// Writes `ablation.json` and `ablation.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        json::write_file(&dir.join("ablation.json"), self)?;
        json::write_text(&dir.join("ablation.csv"), &self.to_csv()?)?;
        Ok(())
    }
}

/// Runs one benchmark per plan point on the same data and provider.
pub fn ablate(
    engine: &Engine,
    selector: &Selector,
    dataset: &[Query],
    lib: &TemplateLibrary,
    plan: &AblationPlan,
) -> Result<AblationTable, EvalError> {
    if plan.is_empty() {
        return Err(EvalError::EmptyPlan);
    }
    let mut rows = Vec::with_capacity(plan.len());
    match plan {
        AblationPlan::Lambdas(lambdas) => {
            for &lambda in lambdas {
                let cfg = SelectorConfig {
                    lambda,
                    ..selector.config.clone()
                };
                let run = run_benchmark(engine, &selector.with_config(cfg), dataset, lib)?;
                rows.push(AblationRow {
                    setting: lambda.to_string(),
                    report: run.report,
                });
            }
        }
        AblationPlan::CandidateCounts(counts) => {
            for &n_candidates in counts {
                let cfg = SelectorConfig {
                    n_candidates,
                    ..selector.config.clone()
                };
                let run = run_benchmark(engine, &selector.with_config(cfg), dataset, lib)?;
                rows.push(AblationRow {
                    setting: n_candidates.to_string(),
                    report: run.report,
                });
            }
        }
        AblationPlan::StageGrid(settings) => {
            for &s in settings {
                let run = run_benchmark(&engine.with_stages(s.stages(engine.stages()))?, selector, dataset, lib)?;
                rows.push(AblationRow {
                    setting: s.label().to_string(),
                    report: run.report,
                });
            }
        }
    }
    Ok(AblationTable {
        kind: plan.kind().to_string(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_parse_from_json() {
        let p: AblationPlan = serde_json::from_str(r#"{"lambdas":[0,0.3,0.7,1]}"#).unwrap();
        assert_eq!(p.len(), 4);
        let p: AblationPlan = serde_json::from_str(r##"{"stage_grid":["baseline","*","#"]}"##).unwrap();
        assert_eq!(p, AblationPlan::StageGrid(StageSetting::ALL.to_vec()));
        let p: AblationPlan = serde_json::from_str(r#"{"candidate_counts":["all",5,10]}"#).unwrap();
        assert_eq!(p.kind(), "candidates");
        assert!(serde_json::from_str::<AblationPlan>(r#"{"candidate_counts":[0]}"#).is_err());
    }

    #[test]
    fn stage_settings_stack() {
        let base = StageConfig::default();
        assert!(!StageSetting::Baseline.stages(&base).stages_enabled.evidence);
        let star = StageSetting::Evidence.stages(&base).stages_enabled;
        assert!(star.evidence && !star.adjudication);
        let hash = StageSetting::EvidenceAndAdjudication.stages(&base).stages_enabled;
        assert!(hash.evidence && hash.adjudication);
    }
}
