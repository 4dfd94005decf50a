//! JSON and JSONL helpers with strict/lenient handling of unknown fields.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strictness {
    /// Unknown fields are an error.
    #[default]
    Strict,
    /// Unknown fields are ignored.
    Lenient,
}

#[derive(Debug, thiserror::Error)]
pub enum JsonError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {source}")]
    Parse {
        origin: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{origin}: unknown field(s): {}", fields.join(", "))]
    UnknownFields { origin: String, fields: Vec<String> },
}

/// Parses `text`, rejecting unknown fields in strict mode.
pub fn from_str<T: DeserializeOwned>(text: &str, mode: Strictness, origin: &str) -> Result<T, JsonError> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()))
        .and_then(|v| de.end().map(|_| v))
        .map_err(|source| JsonError::Parse {
            origin: origin.to_string(),
            source,
        })?;
    if mode == Strictness::Strict && !unknown.is_empty() {
        return Err(JsonError::UnknownFields {
            origin: origin.to_string(),
            fields: unknown,
        });
    }
    Ok(value)
}

pub fn read_file<T: DeserializeOwned>(path: &Path, mode: Strictness) -> Result<T, JsonError> {
    let text = read_text(path)?;
    from_str(&text, mode, &path.display().to_string())
}

/// One value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, mode: Strictness) -> Result<Vec<T>, JsonError> {
    let text = read_text(path)?;
    parse_jsonl(&text, mode, &path.display().to_string())
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, mode: Strictness, origin: &str) -> Result<Vec<T>, JsonError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| from_str(l, mode, &format!("{origin}:{}", i + 1)))
        .collect()
}

fn read_text(path: &Path) -> Result<String, JsonError> {
    fs::read_to_string(path).map_err(|source| JsonError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Pretty JSON with a trailing newline; output is byte-stable for equal values.
pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}

pub fn to_jsonl<T: Serialize>(values: &[T]) -> String {
    let mut out = String::new();
    for v in values {
        out.push_str(&serde_json::to_string(v).expect("serialisable value"));
        out.push('\n');
    }
    out
}

pub fn write_file<T: Serialize>(path: &Path, value: &T) -> Result<(), JsonError> {
    write_text(path, &to_pretty(value))
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), JsonError> {
    write_text(path, &to_jsonl(values))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), JsonError> {
    let io_err = |source| JsonError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(text.as_bytes()).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Lineage, Query, Template};
    use proptest::prelude::*;

    #[test]
    fn strict_rejects_unknown_fields() {
        let text = r#"{"id":"q1","category":"c","content":"x","gold":["A"],"extra":1}"#;
        let err = from_str::<Query>(text, Strictness::Strict, "q").unwrap_err();
        assert!(matches!(err, JsonError::UnknownFields { ref fields, .. } if fields == &["extra"]));
        let q: Query = from_str(text, Strictness::Lenient, "q").unwrap();
        assert_eq!(q.id, "q1");
    }

    #[test]
    fn jsonl_reports_line_numbers() {
        let text = "{\"id\":\"a\",\"content\":\"x\"}\n\nnot json\n";
        let err = parse_jsonl::<Query>(text, Strictness::Strict, "data").unwrap_err();
        assert!(err.to_string().starts_with("data:3"));
    }

    proptest! {
        #[test]
        fn template_placeholders_round_trip(body in "[a-z0-9 .\\[\\]\\n]{0,80}") {
            let t = Template::new("t1", "n", body, Lineage::seed());
            let text = to_pretty(&t);
            let back: Template = from_str(&text, Strictness::Strict, "t").unwrap();
            prop_assert_eq!(&back.placeholders, &t.placeholders);
            prop_assert_eq!(back, t);
        }
    }
}
