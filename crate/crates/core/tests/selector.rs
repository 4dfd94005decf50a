//! Selector behaviour with the scripted bigram scorer.

mod common;

use std::time::Instant;

use dynjudge::domain::{Lineage, TemplateLibrary, TemplateStatus, Template};
use dynjudge::library::EvalRecord;
use dynjudge::selector::{select_template, CandidateCount, NllScorer, SelectorConfig};
use dynjudge::synthetic;

#[test]
fn selection_is_deterministic_and_respects_endpoints() {
    let f = synthetic::benchmark();
    let gw = common::gateway(&f.script, 8);
    let scorer = NllScorer::new(gw);
    for q in &f.queries {
        let a = select_template(q, &f.library, &SelectorConfig::with_lambda(0.7), &f.records, &scorer).unwrap();
        let b = select_template(q, &f.library, &SelectorConfig::with_lambda(0.7), &f.records, &scorer).unwrap();
        assert_eq!(a, b);
        let g = select_template(q, &f.library, &SelectorConfig::with_lambda(1.0), &f.records, &scorer).unwrap();
        let best_s1 = g.scores.iter().map(|s| s.s1).fold(f64::MIN, f64::max);
        assert_eq!(g.scores.iter().find(|s| s.template_id == g.template_id).unwrap().s1, best_s1);
        let l = select_template(q, &f.library, &SelectorConfig::with_lambda(0.0), &f.records, &scorer).unwrap();
        let best_nll = l.scores.iter().map(|s| s.s2_nll).fold(f64::MAX, f64::min);
        assert_eq!(l.scores.iter().find(|s| s.template_id == l.template_id).unwrap().s2_nll, best_nll);
    }
}

#[test]
fn top_n_keeps_highest_global_scores() {
    let f = synthetic::benchmark();
    let scorer = NllScorer::new(common::gateway(&f.script, 2));
    let cfg = SelectorConfig {
        n_candidates: CandidateCount::Top(3),
        ..SelectorConfig::with_lambda(0.7)
    };
    let r = select_template(&f.queries[0], &f.library, &cfg, &f.records, &scorer).unwrap();
    let ids: Vec<_> = r.scores.iter().map(|s| s.template_id.as_str()).collect();
    assert_eq!(ids, ["T1", "T3", "T5"]);
}

fn wide_library(n: usize) -> (TemplateLibrary, Vec<EvalRecord>) {
    let body = synthetic::benchmark_library().templates[0].body.clone();
    let templates = (0..n)
        .map(|i| {
            let mut t = Template::new(format!("W{i:04}"), "wide", body.clone(), Lineage::seed());
            t.status = TemplateStatus::Retained;
            t
        })
        .collect::<Vec<_>>();
    let records = (0..n)
        .map(|i| EvalRecord {
            template_id: format!("W{i:04}"),
            dataset_id: "d1".into(),
            n: 10,
            correct_partial: i % 10,
            correct_full: 0,
            accuracy: (i % 10) as f64 / 10.0,
        })
        .collect();
    (TemplateLibrary::new("wide", templates), records)
}

fn per_candidate_cost(n: usize) -> f64 {
    let f = synthetic::benchmark();
    let scorer = NllScorer::new(common::gateway(&f.script, 1));
    let (lib, records) = wide_library(n);
    let cfg = SelectorConfig::with_lambda(0.7);
    let mut samples: Vec<f64> = (0..5)
        .map(|_| {
            let started = Instant::now();
            select_template(&f.queries[0], &lib, &cfg, &records, &scorer).unwrap();
            started.elapsed().as_secs_f64() / n as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[2]
}

#[test]
fn cost_grows_at_most_linearly_with_candidates() {
    per_candidate_cost(16);
    let small = per_candidate_cost(32);
    let large = per_candidate_cost(512);
    assert!(large <= small * 1.2, "per-candidate cost {small:e} s at 32, {large:e} s at 512");
}
