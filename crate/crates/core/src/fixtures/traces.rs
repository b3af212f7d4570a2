//! Scripted assistant turns for replaying known conversations through the
//! agent with a [`ScriptedChat`](crate::gateway::ScriptedChat).

use serde_json::{json, Value};

use super::lisa::{KADI_PAPER_FILE, KADI_PAPER_TITLE};
use crate::agent::{GET_CONNECTIONS, GET_METADATA, SIMILARITY_SEARCH};
use crate::gateway::{ChatMessage, ToolCall};

pub struct Trace {
    pub question: String,
    pub turns: Vec<ChatMessage>,
}

fn call(n: usize, name: &str, arguments: Value) -> ChatMessage {
    ChatMessage::tool_calls(vec![ToolCall { name: name.into(), arguments, id: format!("call_{n}") }])
}

fn answer(text: &str, sources: &[(u64, &str)]) -> ChatMessage {
    let sources: Vec<Value> = sources.iter().map(|(r, s)| json!({ "record_id": r, "specifier": s })).collect();
    ChatMessage::assistant(json!({ "answer": text, "sources": sources }).to_string())
}

/// One similarity search, then an answer citing the paper file of record 1.
pub fn locate_paper() -> Trace {
    Trace {
        question: format!("Can you locate the paper '{KADI_PAPER_TITLE}' for me?"),
        turns: vec![
            call(1, SIMILARITY_SEARCH, json!({ "text": KADI_PAPER_TITLE })),
            answer(
                &format!("The paper is available in record 1 as the file \"{KADI_PAPER_FILE}\"."),
                &[(1, KADI_PAPER_FILE)],
            ),
        ],
    }
}

/// Search, follow the solver's links, read the linked record's metadata.
pub fn dft_solver_results() -> Trace {
    Trace {
        question: "Can you find a DFT Solver? Are there any simulation results attached to it?".into(),
        turns: vec![
            call(1, SIMILARITY_SEARCH, json!({ "text": "DFT Solver" })),
            call(2, GET_CONNECTIONS, json!({ "id": 14, "type": "record" })),
            call(3, GET_METADATA, json!({ "record_id": 13 })),
            answer(
                "Yes. Record 14 is a plane-wave based DFT solver (VASP) [1]. It is linked to raw measurement \
                 results (record 13) that contain the simulation output files OUTCAR, OSZICAR and CONTCAR [2].",
                &[(14, "metadata"), (13, "metadata")],
            ),
        ],
    }
}

/// Search, then walk links model -> training -> dataset and confirm with metadata.
pub fn training_dataset() -> Trace {
    Trace {
        question: "Please locate the dataset that the breathing detection models were trained on.".into(),
        turns: vec![
            call(1, SIMILARITY_SEARCH, json!({ "text": "breathing detection models dataset" })),
            call(2, GET_CONNECTIONS, json!({ "id": 369, "type": "record" })),
            call(3, GET_CONNECTIONS, json!({ "id": 279, "type": "record" })),
            call(4, GET_METADATA, json!({ "record_id": 3 })),
            answer(
                "The breathing detection models were trained on the dataset record with ID 3, identifier \
                 'cids-breathing-detection-tfrecords_'.",
                &[(279, "metadata"), (3, "metadata")],
            ),
        ],
    }
}

/// Asks for six searches in a row before answering.
pub fn budget_overrun() -> Trace {
    let mut turns: Vec<ChatMessage> =
        (1..=6).map(|i| call(i, SIMILARITY_SEARCH, json!({ "text": format!("search {i}") }))).collect();
    turns.push(answer("I found no relevant information.", &[]));
    Trace { question: "Search as much as you can.".into(), turns }
}

/// A malformed final answer followed by a valid one.
pub fn malformed_then_valid() -> Trace {
    Trace {
        question: "What is in record 1?".into(),
        turns: vec![
            ChatMessage::assistant("Record 1 holds the literature collection."),
            answer("Record 1 holds the literature collection.", &[(1, "metadata")]),
        ],
    }
}

/// Three malformed final answers in a row.
pub fn always_malformed() -> Trace {
    Trace {
        question: "What is in record 1?".into(),
        turns: vec![
            ChatMessage::assistant("Record 1 holds the literature collection."),
            ChatMessage::assistant(r#"{"answer": "Record 1 holds papers."}"#),
            ChatMessage::assistant(r#"{"answer": "Record 1 holds papers.", "sources": [{"record_id": "one", "specifier": "metadata"}]}"#),
        ],
    }
}
