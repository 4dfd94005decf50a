use std::sync::OnceLock;

use regex::Regex;

/// Placeholder names in order of first appearance.
///
/// A placeholder is a `[...]` span whose interior holds no `[` and is
/// non-empty after trimming. An opening bracket restarts the span, so in
/// `[y[z]]` only `z` is matched; unbalanced brackets simply never match.
pub fn parse_placeholders(body: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in body.char_indices() {
        match c {
            '[' => open = Some(i + 1),
            ']' => {
                if let Some(start) = open.take() {
                    let name = body[start..i].trim();
                    if !name.is_empty() && !out.iter().any(|p| p == name) {
                        out.push(name.to_string());
                    }
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberedStep {
    pub number: usize,
    /// The step's lines as written, including continuation lines.
    pub text: String,
}

/// A template body split into its preamble and numbered steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepLayout {
    pub preamble: String,
    pub steps: Vec<NumberedStep>,
}

impl StepLayout {
    /// Preamble plus the first `k` steps, as text.
    pub fn prefix(&self, k: usize) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if !self.preamble.is_empty() {
            parts.push(&self.preamble);
        }
        parts.extend(self.steps.iter().take(k).map(|s| s.text.as_str()));
        parts.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("expected at least {min} numbered steps, found {found}")]
    TooFew { min: usize, found: usize },
    #[error("step numbering broken: expected {expected}, found {found}")]
    OutOfOrder { expected: usize, found: usize },
}

fn step_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:step\s*)?(\d{1,3})\s*[.):]\s+\S").unwrap())
}

/// Splits a body into numbered steps `1..n` (consecutive, at least two).
///
/// Accepted step markers are `1.`, `1)`, `1:` and `Step 1:` at the start of
/// a line. Lines before the first marker form the preamble; other lines
/// attach to the preceding step.
pub fn parse_steps(body: &str) -> Result<StepLayout, StepError> {
    let mut preamble: Vec<&str> = Vec::new();
    let mut steps: Vec<(usize, Vec<&str>)> = Vec::new();
    for line in body.lines() {
        if let Some(cap) = step_line().captures(line) {
            let n: usize = cap[1].parse().unwrap_or(0);
            let expected = steps.len() + 1;
            if n != expected {
                return Err(StepError::OutOfOrder { expected, found: n });
            }
            steps.push((n, vec![line.trim_end()]));
        } else if let Some((_, lines)) = steps.last_mut() {
            lines.push(line.trim_end());
        } else if !line.trim().is_empty() {
            preamble.push(line.trim_end());
        }
    }
    if steps.len() < 2 {
        return Err(StepError::TooFew { min: 2, found: steps.len() });
    }
    let steps = steps
        .into_iter()
        .map(|(number, lines)| {
            let text = lines.join("\n").trim_end().to_string();
            NumberedStep { number, text }
        })
        .collect();
    Ok(StepLayout {
        preamble: preamble.join("\n"),
        steps,
    })
}

/// Whitespace-collapsed, lowercased body used for duplicate detection.
pub fn normalize_body(body: &str) -> String {
    body.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Id of the first entry whose body equals `body` after normalisation.
pub fn find_duplicate<'a, I>(body: &str, others: I) -> Option<&'a str>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let norm = normalize_body(body);
    others
        .into_iter()
        .find(|(_, other)| normalize_body(other) == norm)
        .map(|(id, _)| id)
}
