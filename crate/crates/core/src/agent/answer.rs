use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ids::RecordId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub record_id: RecordId,
    /// A file name of the record, or `"metadata"`.
    pub specifier: String,
}

impl Source {
    pub fn new(record_id: u64, specifier: impl Into<String>) -> Self {
        Self { record_id: RecordId(record_id), specifier: specifier.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantAnswer {
    pub answer: String,
    pub sources: Vec<Source>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatViolation(pub String);

impl std::fmt::Display for FormatViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Removes one surrounding fenced code block, with or without a language tag.
fn strip_fence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return t;
    };
    match body.find('\n') {
        Some(nl) if body[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => body[nl + 1..].trim(),
        _ => body.trim(),
    }
}

/// Checks the shape of a final answer. Record existence and file names are
/// not checked here.
pub fn validate_answer(raw: &str) -> Result<AssistantAnswer, FormatViolation> {
    let bad = |m: &str| FormatViolation(m.to_owned());
    let v: Value = serde_json::from_str(strip_fence(raw)).map_err(|e| FormatViolation(format!("not valid JSON ({e})")))?;
    let obj = v.as_object().ok_or_else(|| bad("top level must be a JSON object"))?;
    if let Some(extra) = obj.keys().find(|k| *k != "answer" && *k != "sources") {
        return Err(FormatViolation(format!("unexpected field \"{extra}\"")));
    }
    let answer = match obj.get("answer") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(bad("\"answer\" must be a string")),
        None => return Err(bad("missing \"answer\"")),
    };
    let list = match obj.get("sources") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(bad("\"sources\" must be a list")),
        None => return Err(bad("missing sources")),
    };
    let mut sources = Vec::with_capacity(list.len());
    for (i, s) in list.iter().enumerate() {
        let o = s.as_object().ok_or_else(|| FormatViolation(format!("source {i} must be an object")))?;
        if let Some(extra) = o.keys().find(|k| *k != "record_id" && *k != "specifier") {
            return Err(FormatViolation(format!("source {i} has unexpected field \"{extra}\"")));
        }
        let record_id = o
            .get("record_id")
            .and_then(Value::as_u64)
            .filter(|&id| id > 0)
            .ok_or_else(|| FormatViolation(format!("source {i}: \"record_id\" must be a positive integer")))?;
        let specifier = o
            .get("specifier")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| FormatViolation(format!("source {i}: \"specifier\" must be a non-empty string")))?;
        sources.push(Source::new(record_id, specifier));
    }
    Ok(AssistantAnswer { answer, sources })
}
