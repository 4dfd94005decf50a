//! Prompt assets and the slot renderer.
//!
//! Prompts are plain text with `{slot}` markers; `{{` and `}}` are literal
//! braces. Every marker must be supplied at render time.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt slot `{{{0}}}` has no value")]
    Unresolved(String),
    #[error("unterminated slot starting at byte {0}")]
    Unterminated(usize),
}

/// Substitutes `{name}` markers with the matching value from `slots`.
pub fn render(template: &str, slots: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    let mut offset = 0;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            offset += pos + 2;
            continue;
        }
        if let Some(after) = tail.strip_prefix('}') {
            out.push('}');
            rest = after;
            offset += pos + 1;
            continue;
        }
        let end = tail.find('}').ok_or(PromptError::Unterminated(offset + pos))?;
        let name = &tail[1..end];
        let value = slots
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::Unresolved(name.to_string()))?;
        out.push_str(value);
        rest = &tail[end + 1..];
        offset += pos + end + 1;
    }
    out.push_str(rest);
    Ok(out)
}

/// Slot names referenced by a prompt.
pub fn slots(template: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            rest = after;
            continue;
        }
        match tail.find('}') {
            Some(end) => {
                let name = tail[1..end].to_string();
                if !names.contains(&name) {
                    names.push(name);
                }
                rest = &tail[end + 1..];
            }
            None => break,
        }
    }
    names
}

pub const QUALITATIVE: &str = "\
You are a compliance reviewer applying platform rules to a listing.

Rules:
{rules}

Listing:
{query}

Reasoning template:
{template}

Stage 1: qualitative analysis. Review all of the information above and form an
initial, holistic judgment of which rule applies. Favour the overall context over
isolated phrases.
Finish with one line of the form: ANSWER: <rule id>[,<rule id>...]";

pub const EXTRACT: &str = "\
Rules:
{rules}

Listing:
{query}

Checkpoint: [{placeholder}]

Copy the exact span of the listing that answers this checkpoint. If the listing
contains nothing relevant, reply with the single word NONE.";

pub const MATCH: &str = "\
Rules:
{rules}

Checkpoint: [{placeholder}]
Evidence: {evidence}

Check the evidence against each rule independently. Reply with one line:
RULES: <rule ids or NONE> | VERDICT: supports_violation|supports_compliance|inconclusive";

pub const ADJUDICATE: &str = "\
Rules:
{rules}

Listing:
{query}

Reasoning template:
{template}

Initial judgment:
{initial_judgment}

Evidence-rule chain:
{chain}

Stage 3: adjudication. Re-evaluate the initial judgment against the verified
evidence chain, paying attention to exemptions and conflicts between rules.
Finish with one line of the form: ANSWER: <rule id>[,<rule id>...]";

pub const SEED: &str = "\
Task context:
{task_context}

Write reasoning template {index} of {count} for this task. Use numbered steps
(\"1.\", \"2.\", ...) and mark every key checkpoint, complex decision node or
error-prone element as a [placeholder]. Do not refer to any specific listing.";

pub const CONTINUE: &str = "\
Task context:
{task_context}

Here are the first {prefix_len} steps of a reasoning template:
{prefix}

Continue the template from step {next_step}, keeping it consistent and logical.
Keep the numbering and use [placeholders] for key checkpoints.";

pub const STYLE: &str = "\
Task context:
{task_context}

Rewrite the reasoning template below in a distinct style (variant {style_index}
of {style_count}). Keep the numbered steps and keep every [placeholder] name
exactly as written.

{template}";

/// Prompts used by the library construction pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryPrompts {
    pub seed: String,
    #[serde(rename = "continue")]
    pub continuation: String,
    pub style: String,
}

impl Default for LibraryPrompts {
    fn default() -> Self {
        Self {
            seed: SEED.into(),
            continuation: CONTINUE.into(),
            style: STYLE.into(),
        }
    }
}
