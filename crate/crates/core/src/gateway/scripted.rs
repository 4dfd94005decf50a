use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BigramModel, GatewayError, GenRequest, GenResponse, Provider, TokenScore};
use crate::domain::json::{self, JsonError, Strictness};

/// How a script entry selects requests. Exactly one field is set.
///
/// `tag` may contain `*` wildcards.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matcher {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub response: String,
}

impl ScriptEntry {
    pub fn tag(tag: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher {
                prompt_exact: None,
                tag: Some(tag.into()),
            },
            response: response.into(),
        }
    }

    pub fn prompt(prompt: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher {
                prompt_exact: Some(prompt.into()),
                tag: None,
            },
            response: response.into(),
        }
    }
}

/// On-disk script: canned responses plus the corpus of the scoring model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptFile {
    pub entries: Vec<ScriptEntry>,
    #[serde(default)]
    pub bigram_corpus: String,
}

impl ScriptFile {
    pub fn load(path: &Path, mode: Strictness) -> Result<Self, JsonError> {
        json::read_file(path, mode)
    }
}

/// Deterministic provider replaying a [`ScriptFile`].
///
/// Lookup precedence: exact prompt, then exact tag, then the first wildcard
/// tag (in file order) that matches. Earlier entries win among exact
/// duplicates.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    by_prompt: HashMap<String, usize>,
    by_tag: HashMap<String, usize>,
    wildcards: Vec<(String, usize)>,
    responses: Vec<String>,
    model: BigramModel,
}

impl ScriptedProvider {
    pub fn new(script: ScriptFile) -> Result<Self, GatewayError> {
        let mut by_prompt = HashMap::new();
        let mut by_tag = HashMap::new();
        let mut wildcards = Vec::new();
        let mut responses = Vec::with_capacity(script.entries.len());
        for (i, entry) in script.entries.into_iter().enumerate() {
            match (entry.matcher.prompt_exact, entry.matcher.tag) {
                (Some(p), None) => {
                    by_prompt.entry(p).or_insert(i);
                }
                (None, Some(t)) if t.contains('*') => wildcards.push((t, i)),
                (None, Some(t)) => {
                    by_tag.entry(t).or_insert(i);
                }
                _ => {
                    return Err(GatewayError::InvalidRequest(format!(
                        "script entry {i}: exactly one of prompt_exact or tag must be set"
                    )))
                }
            }
            responses.push(entry.response);
        }
        Ok(Self {
            by_prompt,
            by_tag,
            wildcards,
            responses,
            model: BigramModel::from_corpus(&script.bigram_corpus),
        })
    }

    pub fn from_path(path: &Path, mode: Strictness) -> Result<Self, crate::Error> {
        let script = ScriptFile::load(path, mode)?;
        Ok(Self::new(script)?)
    }

    pub fn model(&self) -> &BigramModel {
        &self.model
    }

    fn lookup(&self, req: &GenRequest) -> Option<&str> {
        self.by_prompt
            .get(&req.prompt)
            .or_else(|| self.by_tag.get(&req.tag))
            .or_else(|| {
                self.wildcards
                    .iter()
                    .find(|(pat, _)| glob_match(pat, &req.tag))
                    .map(|(_, i)| i)
            })
            .map(|&i| self.responses[i].as_str())
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError> {
        let text = self.lookup(req).ok_or_else(|| GatewayError::ScriptMiss { tag: req.tag.clone() })?;
        let cut = req
            .stop
            .iter()
            .flatten()
            .filter(|s| !s.is_empty())
            .filter_map(|s| text.find(s.as_str()))
            .min();
        let text = cut.map_or(text, |c| &text[..c]);
        Ok(GenResponse {
            text: text.to_string(),
            provider: self.name().to_string(),
            latency_ms: 0.0,
            truncated: cut.is_some(),
        })
    }

    fn score_continuation(&self, context: &str, continuation: &str) -> Result<TokenScore, GatewayError> {
        self.model.score(context, continuation)
    }
}

/// Glob match where `*` matches any (possibly empty) run of characters.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !text.starts_with(first) || text.len() < first.len() + last.len() || !text.ends_with(last) {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(pos) => rest = &rest[pos + mid.len()..],
            None => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn provider(entries: Vec<ScriptEntry>) -> ScriptedProvider {
        ScriptedProvider::new(ScriptFile {
            entries,
            bigram_corpus: String::new(),
        })
        .unwrap()
    }

    #[test]
    fn exact_prompt_lookup_is_deterministic() {
        let p = provider(vec![ScriptEntry::prompt("P1", "ANSWER: A")]);
        let req = GenRequest::new("P1", "anything");
        let a = p.generate(&req).unwrap();
        let b = p.generate(&req).unwrap();
        assert_eq!(a.text, "ANSWER: A");
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn miss_names_the_tag() {
        let p = provider(vec![]);
        let err = p.generate(&GenRequest::new("P2", "qualitative/Q1/T1")).unwrap_err();
        assert_eq!(err, GatewayError::ScriptMiss { tag: "qualitative/Q1/T1".into() });
        assert!(err.to_string().contains("qualitative/Q1/T1"));
    }

    #[test]
    fn precedence_prompt_then_tag_then_wildcard() {
        let p = provider(vec![
            ScriptEntry::tag("a/*", "wild"),
            ScriptEntry::tag("a/b", "tag"),
            ScriptEntry::prompt("exact", "prompt"),
        ]);
        assert_eq!(p.generate(&GenRequest::new("exact", "a/b")).unwrap().text, "prompt");
        assert_eq!(p.generate(&GenRequest::new("x", "a/b")).unwrap().text, "tag");
        assert_eq!(p.generate(&GenRequest::new("x", "a/c")).unwrap().text, "wild");
    }

    #[test]
    fn stop_sequences_truncate() {
        let p = provider(vec![ScriptEntry::tag("t", "keep this\nSTOP drop")]);
        let mut req = GenRequest::new("x", "t");
        req.stop = Some(vec!["STOP".into()]);
        let r = p.generate(&req).unwrap();
        assert_eq!(r.text, "keep this\n");
        assert!(r.truncated);
    }

    #[test]
    fn entry_with_both_matchers_is_rejected() {
        let mut e = ScriptEntry::tag("t", "r");
        e.matcher.prompt_exact = Some("p".into());
        assert!(ScriptedProvider::new(ScriptFile {
            entries: vec![e],
            bigram_corpus: String::new()
        })
        .is_err());
    }

    #[test]
    fn glob() {
        assert!(glob_match("adjudicate/*/T1", "adjudicate/Q7/T1"));
        assert!(!glob_match("adjudicate/*/T1", "adjudicate/Q7/T10"));
        assert!(glob_match("*", ""));
        assert!(glob_match("a*b*c", "abc"));
        assert!(glob_match("a*b*c", "axxbyyc"));
        assert!(!glob_match("a*b*c", "ac"));
        assert!(!glob_match("ab*ba", "aba"));
    }
}
