//! The three repository tools offered to the model.
//!
//! Every tool runs under the calling user's grants. Access and lookup
//! failures become tool message text so the model can react to them; they
//! never name a record the user cannot read.

use std::fmt::Write;

use serde_json::{json, Value};
use thiserror::Error;

use crate::gateway::{ChatMessage, ToolCall, ToolSpec};
use crate::ids::{RecordId, UserId};
use crate::repository::{ObjectRef, RepoError};
use crate::retrieval::{Retriever, SearchError, SearchParams};

pub const SIMILARITY_SEARCH: &str = "Kadi_Similarity_Search";
pub const GET_METADATA: &str = "Kadi_Get_Meta_Data_Tool";
pub const GET_CONNECTIONS: &str = "Kadi_Get_Connections_Tool";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ToolError {
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("bad arguments for {tool}: {reason}")]
    BadArguments { tool: String, reason: String },
}

pub fn tool_specs() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            name: SIMILARITY_SEARCH.into(),
            description: "Semantic similarity search over the text of all records and files the user can access. \
                Returns the 8 most similar text chunks, each with the record id and whether it comes from the \
                record's metadata or from a file. Chunks are fragments and may be out of context or only mention \
                the topic."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": { "text": { "type": "string", "description": "Query text." } },
                "required": ["text"]
            }),
        },
        ToolSpec {
            name: GET_METADATA.into(),
            description: "Returns the metadata of a record as a JSON string: title, identifier, description, \
                extra metadata and file names. The output of this tool may be truncated."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": { "record_id": { "type": "integer" } },
                "required": ["record_id"]
            }),
        },
        ToolSpec {
            name: GET_CONNECTIONS.into(),
            description: "Lists the links of a record or collection to other records and collections, with \
                their annotations. Similar to the metadata tool, the output may be truncated."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "id": { "type": "integer" },
                    "type": { "type": "string", "enum": ["record", "collection"] }
                },
                "required": ["id", "type"]
            }),
        },
    ]
}

#[derive(Clone)]
pub struct ToolContext {
    pub retriever: Retriever,
    pub search_k: usize,
    pub search_n: usize,
    pub output_char_limit: usize,
}

impl ToolContext {
    pub fn new(retriever: Retriever) -> Self {
        Self { retriever, search_k: 50, search_n: 8, output_char_limit: 6000 }
    }
}

fn int_arg(args: &Value, tool: &str, name: &str) -> Result<u64, ToolError> {
    let bad = |reason: String| ToolError::BadArguments { tool: tool.into(), reason };
    match args.get(name) {
        Some(Value::Number(n)) => n.as_u64().ok_or_else(|| bad(format!("\"{name}\" must be a non-negative integer"))),
        Some(Value::String(s)) => s.trim().parse().map_err(|_| bad(format!("\"{name}\" must be an integer"))),
        _ => Err(bad(format!("missing \"{name}\""))),
    }
}

fn str_arg<'a>(args: &'a Value, tool: &str, name: &str) -> Result<&'a str, ToolError> {
    args.get(name).and_then(Value::as_str).ok_or_else(|| ToolError::BadArguments {
        tool: tool.into(),
        reason: format!("missing string \"{name}\""),
    })
}

/// Cuts `text` so that it plus the notice fits in `limit` characters.
pub fn truncate_output(text: String, limit: usize) -> String {
    let total = text.chars().count();
    if total <= limit {
        return text;
    }
    let notice = format!("\n[Output truncated: showing the first part of {total} characters.]");
    let keep = limit.saturating_sub(notice.chars().count());
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(&notice);
    out
}

const NO_ACCESS: &str = "The requested object does not exist or you do not have permission to access it.";

impl ToolContext {
    /// Runs one call and wraps its output in a tool message.
    pub fn execute_tool(&self, call: &ToolCall, user: &UserId) -> Result<ChatMessage, ToolError> {
        let text = match call.name.as_str() {
            SIMILARITY_SEARCH => self.similarity_search(str_arg(&call.arguments, SIMILARITY_SEARCH, "text")?, user),
            GET_METADATA => self.metadata(int_arg(&call.arguments, GET_METADATA, "record_id")?, user),
            GET_CONNECTIONS => {
                let id = int_arg(&call.arguments, GET_CONNECTIONS, "id")?;
                let kind = str_arg(&call.arguments, GET_CONNECTIONS, "type")?;
                self.connections(id, kind, user)
            }
            other => return Err(ToolError::UnknownTool(other.to_owned())),
        };
        Ok(ChatMessage::tool_result(call.id.clone(), text))
    }

    fn similarity_search(&self, text: &str, user: &UserId) -> String {
        let params = SearchParams { query: text.to_owned(), k: self.search_k, n: self.search_n };
        match self.retriever.semantic_search(&params, user) {
            Ok(resp) if resp.results.is_empty() => "No matching chunks were found.".into(),
            Ok(resp) => {
                let mut out = String::new();
                for (i, r) in resp.results.iter().enumerate() {
                    let source = match &r.file_name {
                        Some(f) => format!("file:{f}"),
                        None => "metadata".into(),
                    };
                    let _ = writeln!(out, "[{}] record_id={}, source={}", i + 1, r.record_id, source);
                    let _ = writeln!(out, "{}\n", r.text);
                }
                out.trim_end().to_owned()
            }
            Err(SearchError::EmptyQuery) => "The search text must not be empty.".into(),
            Err(e) => format!("The similarity search failed: {e}"),
        }
    }

    fn metadata(&self, id: u64, user: &UserId) -> String {
        match self.retriever.repo.get_metadata(RecordId(id), user) {
            Ok(doc) => truncate_output(doc, self.output_char_limit),
            Err(RepoError::NotFound | RepoError::Forbidden) => NO_ACCESS.into(),
            Err(e) => format!("The metadata could not be retrieved: {e}"),
        }
    }

    fn connections(&self, id: u64, kind: &str, user: &UserId) -> String {
        let repo = &self.retriever.repo;
        let links = match repo.get_connections(id, kind, user) {
            Ok(l) => l,
            Err(RepoError::InvalidObjectType(t)) => {
                return format!("Invalid object type \"{t}\". The type must be \"record\" or \"collection\".");
            }
            Err(RepoError::NotFound | RepoError::Forbidden) => return NO_ACCESS.into(),
            Err(e) => return format!("The connections could not be retrieved: {e}"),
        };
        let me = ObjectRef { id, kind: kind.parse().expect("validated by get_connections") };
        let describe = |o: ObjectRef| match repo.object_title(o, user) {
            Some(t) => format!("{} {} \"{}\"", o.kind, o.id, t),
            None => format!("{} {}", o.kind, o.id),
        };
        let mut out = format!("Connections of {}:\n", describe(me));
        if links.is_empty() {
            out.push_str("(none)");
        }
        for l in &links {
            let (dir, other) = if l.from == me { ("->", l.to) } else { ("<-", l.from) };
            let _ = writeln!(out, "  {dir} {} [annotation: {}]", describe(other), l.annotation);
        }
        truncate_output(out.trim_end().to_owned(), self.output_char_limit)
    }
}
