//! Preference training end to end on the planted fixture.

mod common;

use std::sync::Arc;

use dynjudge::domain::json::{self, Strictness};
use dynjudge::domain::TemplateLibrary;
use dynjudge::preference::{
    pair_differences, pairwise_accuracy, train, train_on_differences, PreferenceScorer, ScorerParams, TrainError,
    TrainerConfig,
};
use dynjudge::selector::{Selector, SelectorConfig};
use dynjudge::synthetic;

fn config(epochs: usize, lr: f64, batch_size: usize) -> TrainerConfig<f64> {
    TrainerConfig {
        beta: 1.0,
        learning_rate: lr,
        epochs,
        feature_dim: 1024,
        batch_size,
        rng_seed: 9,
        ..TrainerConfig::default()
    }
}

#[test]
fn planted_weights_are_recovered() {
    let p = synthetic::planted(5, 150, 40, 0.25);
    let out = train(&p.train, &p.queries, &p.templates, &config(50, 0.2, 32)).unwrap();
    let held = pair_differences(&p.held_out, &p.queries, &p.templates, p.feature_dim).unwrap();
    let acc = pairwise_accuracy(&out.params, &held);
    assert!(acc >= 0.95, "held-out accuracy {acc}");
    assert_eq!(out.loss_trace.len(), 50);
}

#[test]
fn full_batch_loss_never_increases_with_small_steps() {
    let p = synthetic::planted(6, 60, 0, 0.0);
    let diffs = pair_differences(&p.train, &p.queries, &p.templates, p.feature_dim).unwrap();
    let mut cfg = config(30, 0.01, 0);
    cfg.beta = 0.1;
    let trace = train_on_differences(&diffs, &cfg).unwrap().loss_trace;
    assert!(trace[0] < std::f64::consts::LN_2);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let p = synthetic::planted(7, 40, 0, 0.0);
    let a = train(&p.train, &p.queries, &p.templates, &config(3, 0.1, 16)).unwrap();
    let b = train(&p.train, &p.queries, &p.templates, &config(3, 0.1, 16)).unwrap();
    assert_eq!(a, b);
    let mut other = config(3, 0.1, 16);
    other.rng_seed = 10;
    assert_ne!(train(&p.train, &p.queries, &p.templates, &other).unwrap().params, a.params);
}

#[test]
fn params_round_trip_through_json() {
    let p = synthetic::planted(8, 20, 0, 0.0);
    let out = train(&p.train, &p.queries, &p.templates, &config(2, 0.1, 0)).unwrap();
    let text = json::to_pretty(&out.params);
    let back: ScorerParams<f64> = json::from_str(&text, Strictness::Strict, "params").unwrap();
    assert_eq!(back, out.params);
}

#[test]
fn unknown_ids_and_empty_input_are_errors() {
    let p = synthetic::planted(8, 5, 0, 0.0);
    assert!(matches!(train(&[], &p.queries, &p.templates, &config(1, 0.1, 0)), Err(TrainError::NoPairs)));
    let mut bad = p.train[0].clone();
    bad.winner_id = "nope".into();
    assert!(matches!(
        train(&[bad], &p.queries, &p.templates, &config(1, 0.1, 0)),
        Err(TrainError::UnknownTemplate(_))
    ));
}

#[test]
fn trained_scorer_drives_selection() {
    let p = synthetic::planted(5, 150, 40, 0.25);
    let out = train(&p.train, &p.queries, &p.templates, &config(50, 0.2, 32)).unwrap();
    let lib = TemplateLibrary::new("planted", p.templates.clone());
    let records = p
        .templates
        .iter()
        .map(|t| dynjudge::library::EvalRecord {
            template_id: t.id.clone(),
            dataset_id: "d1".into(),
            n: 10,
            correct_partial: 5,
            correct_full: 5,
            accuracy: 0.5,
        })
        .collect();
    let selector = Selector::new(
        SelectorConfig::with_lambda(0.0),
        records,
        Arc::new(PreferenceScorer::new(out.params.clone(), 1.0)),
    );
    let mut agree = 0;
    let held: Vec<_> = p.queries.iter().filter(|q| q.category == "held_out").collect();
    for q in &held {
        let chosen = selector.select(q, &lib).unwrap().template_id;
        let best = p
            .templates
            .iter()
            .max_by(|a, b| {
                let s = |t| dynjudge::preference::score(&ScorerParams { weights: p.weights.clone(), ..out.params.clone() }, q, t);
                s(a).total_cmp(&s(b))
            })
            .unwrap();
        agree += usize::from(chosen == best.id);
    }
    assert!(agree * 10 >= held.len() * 7, "{agree} of {}", held.len());
}
