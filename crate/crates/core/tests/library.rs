//! Library construction end to end on the scripted construction fixture.

mod common;

use dynjudge::domain::{Stage, TemplateStatus};
use dynjudge::engine::{Engine, StageConfig};
use dynjudge::gateway::ScriptEntry;
use dynjudge::library::{build_library, PipelineConfig, PipelineError};
use dynjudge::synthetic;

fn build(cfg: &PipelineConfig, extra: Vec<ScriptEntry>) -> Result<dynjudge::library::BuildOutput, PipelineError> {
    let mut p = synthetic::pipeline();
    p.script.entries.splice(0..0, extra);
    let engine = Engine::new(common::gateway(&p.script, 4), p.rules.clone(), StageConfig::default()).unwrap();
    build_library(&engine, &p.task_context, &p.dataset, cfg)
}

#[test]
fn stage_sizes_and_retention() {
    let p = synthetic::pipeline();
    let out = build(&p.config, Vec::new()).unwrap();
    assert_eq!(out.counts, [3, 6, 18]);
    assert_eq!(out.library.templates.len(), 18);
    let retained: Vec<_> = out.library.retained().map(|t| t.id.clone()).collect();
    assert_eq!(retained, p.high_scorers);
    assert_eq!(out.records.len(), 18);
    assert_eq!(out.scores.len(), 18 * out.d1.len());
    assert_eq!(out.d1.len(), 4);
    let mid = out.records.iter().find(|r| r.template_id == p.mid_scorer).unwrap();
    assert_eq!(mid.accuracy, 0.5);
}

#[test]
fn lineage_links_every_template_to_its_seed() {
    let out = build(&synthetic::pipeline().config, Vec::new()).unwrap();
    for t in &out.library.templates {
        let root = t.id.split('.').next().unwrap();
        match t.lineage.stage {
            Stage::Seed => assert_eq!(t.id, root),
            Stage::Continuation => {
                assert_eq!(t.lineage.seed_id.as_deref(), Some(root));
                assert_eq!(t.lineage.prefix_len, Some(2));
            }
            Stage::Styled => {
                assert_eq!(t.lineage.seed_id.as_deref(), Some(root));
                assert!(t.lineage.style_tag.is_some());
            }
        }
        assert!(!t.placeholders.is_empty(), "{}", t.id);
    }
}

#[test]
fn theta_bounds_control_retention() {
    let base = synthetic::pipeline().config;
    let all = build(&PipelineConfig { theta: 0.0, ..base.clone() }, Vec::new()).unwrap();
    assert_eq!(all.library.retained().count(), 18);
    let mid = build(&PipelineConfig { theta: 0.5, ..base.clone() }, Vec::new()).unwrap();
    assert_eq!(mid.library.retained().count(), 3);
    let top = build(&PipelineConfig { theta: 1.0, ..base }, Vec::new()).unwrap();
    assert_eq!(top.library.retained().count(), 2);
}

#[test]
fn invalid_seed_is_retried_once() {
    let bad = vec![ScriptEntry::tag("seed/2", "Just think hard about it.")];
    let p = synthetic::pipeline();
    let good = p.script.entries.iter().find(|e| e.matcher.tag.as_deref() == Some("seed/2")).unwrap();
    let mut extra = bad.clone();
    extra.push(ScriptEntry::tag("seed/2/retry", good.response.clone()));
    let out = build(&p.config, extra).unwrap();
    assert_eq!(out.counts, [3, 6, 18]);
    assert!(out.log.iter().any(|n| n.stage == "seed" && n.kind == "retry" && n.subject == "seed-02"));

    let mut extra = bad;
    extra.push(ScriptEntry::tag("seed/2/retry", "Still no numbered steps."));
    match build(&p.config, extra) {
        Err(PipelineError::InsufficientSeeds { wanted: 3, got: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn style_variant_that_changes_placeholders_is_dropped() {
    let p = synthetic::pipeline();
    let out = build(&p.config, vec![ScriptEntry::tag("style/seed-01/1", "1. Check the [colour].\n2. Decide.")]).unwrap();
    assert_eq!(out.counts, [3, 6, 17]);
    assert!(out.library.get("seed-01.s1").is_none());
    let note = out.log.iter().find(|n| n.subject.starts_with("seed-01") && n.stage == "style").unwrap();
    assert!(note.detail.contains("placeholder set changed"), "{}", note.detail);
}

#[test]
fn rejected_templates_are_kept_for_audit() {
    let out = build(&synthetic::pipeline().config, Vec::new()).unwrap();
    let rejected = out.library.templates.iter().filter(|t| t.status == TemplateStatus::Rejected).count();
    assert_eq!(rejected, 16);
    assert_eq!(out.log.iter().filter(|n| n.kind == "rejected").count(), 16);
}

#[test]
fn config_is_validated_before_any_call() {
    let base = synthetic::pipeline().config;
    for bad in [
        PipelineConfig { m: 0, ..base.clone() },
        PipelineConfig { k: Some(0), ..base.clone() },
        PipelineConfig { r: 0.0, ..base.clone() },
        PipelineConfig { theta: 1.5, ..base.clone() },
    ] {
        assert!(matches!(build(&bad, Vec::new()), Err(PipelineError::Config(_))));
    }
}
