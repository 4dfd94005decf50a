use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{BuildNote, PipelineError};
use crate::domain::{find_duplicate, parse_placeholders, parse_steps, Lineage, Stage, Template};
use crate::gateway::{Gateway, GatewayError, GenRequest};
use crate::prompts::{self, LibraryPrompts};

const GENERATION_MAX_TOKENS: u32 = 1024;

const SEED_RETRY_SUFFIX: &str = "\n\nYour previous answer did not contain at least two numbered steps \
(\"1.\", \"2.\", ...). Answer again with numbered steps only.";

fn generate(gateway: &Gateway, prompt: String, tag: String) -> Result<String, GatewayError> {
    let mut req = GenRequest::new(prompt, tag);
    req.max_tokens = GENERATION_MAX_TOKENS;
    gateway.generate(&req).map(|r| r.text.trim().to_string())
}

fn gateway_error(stage: &'static str) -> impl Fn(GatewayError) -> PipelineError {
    move |source| PipelineError::Gateway { stage, source }
}

pub fn seed_id(index: usize) -> String {
    format!("seed-{index:02}")
}

/// Seed index, final output, notes and the rejection reason if the output
/// is still invalid.
type SeedAttempt = (usize, String, Vec<BuildNote>, Option<String>);

/// Generates `m` seed templates.
///
/// A seed without at least two numbered steps is regenerated once with a
/// corrective suffix (tag `seed/{i}/retry`). Any seed still invalid makes
/// the whole step fail, listing the rejected outputs.
pub fn generate_seeds(
    gateway: &Gateway,
    prompts: &LibraryPrompts,
    task_context: &str,
    m: usize,
    log: &mut Vec<BuildNote>,
) -> Result<Vec<Template>, PipelineError> {
    if task_context.trim().is_empty() {
        return Err(PipelineError::Config("task context is empty".into()));
    }
    let count = m.to_string();
    let outcomes: Vec<Result<SeedAttempt, PipelineError>> = (1..=m)
        .into_par_iter()
        .map(|i| {
            let index = i.to_string();
            let prompt = prompts::render(
                &prompts.seed,
                &[("task_context", task_context), ("index", &index), ("count", &count)],
            )?;
            let mut notes = Vec::new();
            let first = generate(gateway, prompt.clone(), format!("seed/{i}")).map_err(gateway_error("seed"))?;
            let err = match parse_steps(&first) {
                Ok(_) => return Ok((i, first, notes, None)),
                Err(e) => e,
            };
            notes.push(BuildNote::new("seed", seed_id(i), "retry", err.to_string()));
            let retry = generate(gateway, format!("{prompt}{SEED_RETRY_SUFFIX}"), format!("seed/{i}/retry"))
                .map_err(gateway_error("seed"))?;
            match parse_steps(&retry) {
                Ok(_) => Ok((i, retry, notes, None)),
                Err(e) => {
                    notes.push(BuildNote::new("seed", seed_id(i), "rejected", e.to_string()));
                    Ok((i, retry, notes, Some(e.to_string())))
                }
            }
        })
        .collect();

    let mut seeds = Vec::with_capacity(m);
    let mut rejected = Vec::new();
    for outcome in outcomes {
        let (i, body, notes, failure) = outcome?;
        log.extend(notes);
        match failure {
            None => seeds.push(Template::new(seed_id(i), format!("Seed template {i}"), body, Lineage::seed())),
            Some(reason) => rejected.push(format!("{}: {reason}: {body:?}", seed_id(i))),
        }
    }
    if !rejected.is_empty() {
        return Err(PipelineError::InsufficientSeeds {
            wanted: m,
            got: seeds.len(),
            rejected,
        });
    }
    Ok(seeds)
}

fn continuation_body(prefix: &str, prefix_len: usize, output: &str) -> Result<String, String> {
    if parse_steps(output).is_ok() {
        return Ok(output.to_string());
    }
    let joined = format!("{prefix}\n{output}");
    match parse_steps(&joined) {
        Ok(layout) if layout.steps.len() > prefix_len => Ok(joined),
        Ok(_) => Err("continuation adds no steps".into()),
        Err(e) => Err(format!("continuation breaks the step grammar: {e}")),
    }
}

/// One structured continuation per seed. Returns the seeds followed by the
/// continuations that validate, each right after its seed.
///
/// The model sees the first `min(k, n - 1)` steps (`k = None` means `n - 1`)
/// and completes the rest. A reply that is itself a complete numbered body is
/// taken as the whole template; otherwise it is appended to the prefix.
pub fn expand_with_prefix(
    gateway: &Gateway,
    prompts: &LibraryPrompts,
    task_context: &str,
    seeds: &[Template],
    k: Option<usize>,
    log: &mut Vec<BuildNote>,
) -> Result<Vec<Template>, PipelineError> {
    let outcomes: Vec<Result<Result<Template, BuildNote>, PipelineError>> = seeds
        .par_iter()
        .map(|seed| {
            let layout = parse_steps(&seed.body)
                .map_err(|e| PipelineError::Config(format!("seed {} is not a numbered body: {e}", seed.id)))?;
            let n = layout.steps.len();
            let prefix_len = k.unwrap_or(n - 1).clamp(1, n - 1);
            let prefix = layout.prefix(prefix_len);
            let prompt = prompts::render(
                &prompts.continuation,
                &[
                    ("task_context", task_context),
                    ("prefix_len", &prefix_len.to_string()),
                    ("prefix", &prefix),
                    ("next_step", &(prefix_len + 1).to_string()),
                ],
            )?;
            let output = generate(gateway, prompt, format!("continue/{}", seed.id)).map_err(gateway_error("continue"))?;
            let id = format!("{}.c", seed.id);
            Ok(match continuation_body(&prefix, prefix_len, &output) {
                Ok(body) => {
                    let lineage = Lineage {
                        seed_id: Some(seed.id.clone()),
                        stage: Stage::Continuation,
                        style_tag: None,
                        prefix_len: Some(prefix_len),
                        note: None,
                    };
                    Ok(Template::new(id, format!("{} (continued)", seed.name), body, lineage))
                }
                Err(reason) => Err(BuildNote::new("continue", id, "dropped", reason)),
            })
        })
        .collect();

    let mut t1: Vec<Template> = Vec::with_capacity(2 * seeds.len());
    let mut continuations = Vec::new();
    for (seed, outcome) in seeds.iter().zip(outcomes) {
        t1.push(seed.clone());
        match outcome? {
            Ok(t) => continuations.push((t1.len(), t)),
            Err(note) => {
                log::warn!("{}: {}", note.subject, note.detail);
                log.push(note);
            }
        }
    }
    // Insert each continuation after its seed, flagging exact duplicates of
    // any earlier body.
    for (offset, (pos, mut t)) in continuations.into_iter().enumerate() {
        let at = pos + offset;
        if let Some(dup) = find_duplicate(&t.body, t1[..at].iter().map(|o| (o.id.as_str(), o.body.as_str()))) {
            let note = format!("duplicate of {dup}");
            log.push(BuildNote::new("continue", t.id.clone(), "duplicate", note.clone()));
            t.lineage.note = Some(note);
        }
        t1.insert(at, t);
    }
    Ok(t1)
}

fn placeholder_diff(want: &[String], got: &[String]) -> Option<String> {
    let want: BTreeSet<&str> = want.iter().map(String::as_str).collect();
    let got: BTreeSet<&str> = got.iter().map(String::as_str).collect();
    if want == got {
        return None;
    }
    let missing: Vec<&str> = want.difference(&got).copied().collect();
    let extra: Vec<&str> = got.difference(&want).copied().collect();
    Some(format!("placeholder set changed: missing [{}], extra [{}]", missing.join(", "), extra.join(", ")))
}

/// Rewrites every template in `v` styles. Returns each original followed by
/// its valid variants.
///
/// A variant is dropped when it changes the placeholder set (names compared
/// as a set) or breaks the step grammar.
pub fn style_transfer(
    gateway: &Gateway,
    prompts: &LibraryPrompts,
    task_context: &str,
    t1: &[Template],
    v: usize,
    log: &mut Vec<BuildNote>,
) -> Result<Vec<Template>, PipelineError> {
    let jobs: Vec<(usize, usize)> = (0..t1.len()).flat_map(|i| (1..=v).map(move |j| (i, j))).collect();
    let style_count = v.to_string();
    let outcomes: Vec<Result<Result<Template, BuildNote>, PipelineError>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let parent = &t1[i];
            let prompt = prompts::render(
                &prompts.style,
                &[
                    ("task_context", task_context),
                    ("style_index", &j.to_string()),
                    ("style_count", &style_count),
                    ("template", &parent.body),
                ],
            )?;
            let body = generate(gateway, prompt, format!("style/{}/{j}", parent.id)).map_err(gateway_error("style"))?;
            let id = format!("{}.s{j}", parent.id);
            if let Some(diff) = placeholder_diff(&parent.placeholders, &parse_placeholders(&body)) {
                return Ok(Err(BuildNote::new("style", id, "dropped", diff)));
            }
            if let Err(e) = parse_steps(&body) {
                return Ok(Err(BuildNote::new("style", id, "dropped", format!("variant breaks the step grammar: {e}"))));
            }
            let lineage = Lineage {
                seed_id: Some(parent.lineage.seed_id.clone().unwrap_or_else(|| parent.id.clone())),
                stage: Stage::Styled,
                style_tag: Some(format!("style-{j}")),
                prefix_len: None,
                note: Some(format!("styled from {}", parent.id)),
            };
            Ok(Ok(Template::new(id, format!("{} (style {j})", parent.name), body, lineage)))
        })
        .collect();

    let mut t2 = Vec::with_capacity(t1.len() * (1 + v));
    let mut outcomes = outcomes.into_iter();
    for parent in t1 {
        t2.push(parent.clone());
        for _ in 0..v {
            match outcomes.next().expect("one outcome per job")? {
                Ok(t) => t2.push(t),
                Err(note) => {
                    log::warn!("{}: {}", note.subject, note.detail);
                    log.push(note);
                }
            }
        }
    }
    Ok(t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ScriptEntry, ScriptFile, ScriptedProvider};
    use std::sync::Arc;

    fn gateway(entries: Vec<ScriptEntry>) -> Gateway {
        let script = ScriptFile {
            entries,
            bigram_corpus: String::new(),
        };
        Gateway::new(Arc::new(ScriptedProvider::new(script).unwrap()), 4)
    }

    const BODY: &str = "1. Identify the [claimed effect].\n2. Check the [product type].\n3. Decide.";

    #[test]
    fn seeds_with_retry_and_rejection() {
        let gw = gateway(vec![
            ScriptEntry::tag("seed/1", BODY),
            ScriptEntry::tag("seed/2", "no steps here"),
            ScriptEntry::tag("seed/2/retry", "1. a [x]\n2. b"),
        ]);
        let mut log = Vec::new();
        let seeds = generate_seeds(&gw, &LibraryPrompts::default(), "ctx", 2, &mut log).unwrap();
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds[1].placeholders, ["x"]);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].kind, "retry");

        let gw = gateway(vec![ScriptEntry::tag("seed/*", "still no steps")]);
        let mut log = Vec::new();
        match generate_seeds(&gw, &LibraryPrompts::default(), "ctx", 1, &mut log) {
            Err(PipelineError::InsufficientSeeds { got: 0, rejected, .. }) => {
                assert!(rejected[0].contains("still no steps"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn continuation_prefix_is_capped() {
        let seed = Template::new("seed-01", "s", "1. a [x]\n2. b", Lineage::seed());
        let gw = gateway(vec![ScriptEntry::tag("continue/seed-01", "2. other ending")]);
        let mut log = Vec::new();
        let t1 = expand_with_prefix(&gw, &LibraryPrompts::default(), "ctx", &[seed], Some(5), &mut log).unwrap();
        assert_eq!(t1.len(), 2);
        assert_eq!(t1[1].lineage.prefix_len, Some(1));
        assert_eq!(t1[1].body, "1. a [x]\n2. other ending");
        assert!(log.is_empty());
    }

    #[test]
    fn duplicate_continuation_is_kept_and_flagged() {
        let seed = Template::new("seed-01", "s", BODY, Lineage::seed());
        let gw = gateway(vec![ScriptEntry::tag("continue/seed-01", BODY)]);
        let mut log = Vec::new();
        let t1 = expand_with_prefix(&gw, &LibraryPrompts::default(), "ctx", &[seed], None, &mut log).unwrap();
        assert_eq!(t1.len(), 2);
        assert_eq!(t1[1].lineage.note.as_deref(), Some("duplicate of seed-01"));
    }

    #[test]
    fn invalid_continuation_is_dropped() {
        let seed = Template::new("seed-01", "s", BODY, Lineage::seed());
        let gw = gateway(vec![ScriptEntry::tag("continue/seed-01", "5. skipped ahead")]);
        let mut log = Vec::new();
        let t1 = expand_with_prefix(&gw, &LibraryPrompts::default(), "ctx", &[seed], None, &mut log).unwrap();
        assert_eq!(t1.len(), 1);
        assert_eq!(log[0].kind, "dropped");
    }

    #[test]
    fn renamed_placeholder_drops_the_variant() {
        let t = Template::new("seed-01", "s", BODY, Lineage::seed());
        let gw = gateway(vec![
            ScriptEntry::tag("style/seed-01/1", "1. Check the [product type].\n2. Find the [claimed effect]."),
            ScriptEntry::tag("style/seed-01/2", "1. Find the [effect].\n2. Check the [product type]."),
        ]);
        let mut log = Vec::new();
        let t2 = style_transfer(&gw, &LibraryPrompts::default(), "ctx", &[t], 2, &mut log).unwrap();
        assert_eq!(t2.len(), 2);
        assert_eq!(t2[1].id, "seed-01.s1");
        assert_eq!(t2[1].lineage.seed_id.as_deref(), Some("seed-01"));
        assert!(log[0].detail.contains("missing [claimed effect]"));
        assert!(log[0].detail.contains("extra [effect]"));
    }

    #[test]
    fn zero_styles_is_identity() {
        let t = Template::new("seed-01", "s", BODY, Lineage::seed());
        let gw = gateway(vec![]);
        let t2 = style_transfer(&gw, &LibraryPrompts::default(), "ctx", std::slice::from_ref(&t), 0, &mut Vec::new()).unwrap();
        assert_eq!(t2, [t]);
    }
}
