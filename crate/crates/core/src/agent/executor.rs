//! The agent's state graph:
//!
//! ```text
//! Start -> Action -> Execute Tool -> Increment Toolcount -> Action ...
//!          Action -> Correct JSON? -> End
//!                    Correct JSON? -> Action   (format retry)
//! ```

use std::sync::Arc;

use chrono::{NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::answer::{validate_answer, AssistantAnswer};
use super::prompt::{build_system_prompt, format_violation_message, remaining_calls_message};
use super::tools::{tool_specs, ToolContext};
use crate::gateway::{ChatMessage, ChatModel, ChatRequest, GatewayError, Role, ToolCall};
use crate::ids::UserId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_tool_calls: usize,
    pub json_retry_limit: usize,
    pub temperature: f32,
    pub max_tokens: Option<u32>,
    /// Date shown in the prompt; today when unset.
    #[serde(skip)]
    pub fixed_date: Option<NaiveDate>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { max_tool_calls: 5, json_retry_limit: 2, temperature: 0.0, max_tokens: None, fixed_date: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Start,
    Action,
    ExecuteTool,
    IncrementToolcount,
    CorrectJson,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRun {
    pub answer: AssistantAnswer,
    /// Messages appended during the run, in order (no system prompt).
    pub trace: Vec<ChatMessage>,
    pub tool_calls_used: usize,
    pub json_retries_used: usize,
    pub model_calls: usize,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("history must be non-empty, contain only user and assistant turns, and end with a user message: {0}")]
    InvalidHistory(String),
    #[error("language model unavailable: {0}")]
    LlmUnavailable(GatewayError),
    /// Every answer attempt violated the format. The run carries an error
    /// answer with no sources.
    #[error("no correctly formatted answer after {} attempts: {reason}", run.json_retries_used + 1)]
    AnswerFormatExhausted { reason: String, run: Box<AgentRun> },
}

pub struct Agent {
    pub tools: ToolContext,
    pub chat: Arc<dyn ChatModel>,
    pub config: AgentConfig,
}

struct State {
    history: Vec<ChatMessage>,
    start: usize,
    tool_calls_used: usize,
    json_retries_used: usize,
    model_calls: usize,
    nodes: Vec<Node>,
}

impl State {
    fn run(&self, answer: AssistantAnswer) -> AgentRun {
        AgentRun {
            answer,
            trace: self.history[self.start..].to_vec(),
            tool_calls_used: self.tool_calls_used,
            json_retries_used: self.json_retries_used,
            model_calls: self.model_calls,
            nodes: self.nodes.clone(),
        }
    }
}

fn check_history(history: &[ChatMessage]) -> Result<(), AgentError> {
    let invalid = |m: &str| Err(AgentError::InvalidHistory(m.to_owned()));
    match history.last() {
        None => return invalid("empty history"),
        Some(m) if m.role != Role::User => return invalid("last message is not from the user"),
        _ => {}
    }
    for m in history {
        if !matches!(m.role, Role::User | Role::Assistant) {
            return invalid("only user and assistant messages are accepted");
        }
        if !m.tool_calls.is_empty() || m.tool_call_id.is_some() {
            return invalid("tool fields are not accepted in client history");
        }
    }
    Ok(())
}

enum Step {
    Action,
    ExecuteTool(ChatMessage, ToolCall),
    IncrementToolcount,
    CorrectJson(String),
    End(AssistantAnswer),
}

impl Agent {
    pub fn new(tools: ToolContext, chat: Arc<dyn ChatModel>, config: AgentConfig) -> Self {
        Self { tools, chat, config }
    }

    pub fn run_agent(&self, history: &[ChatMessage], user: &UserId, instance_url: &str) -> Result<AgentRun, AgentError> {
        check_history(history)?;
        let max = self.config.max_tool_calls;
        let date = self.config.fixed_date.unwrap_or_else(|| Utc::now().date_naive());
        let mut messages = Vec::with_capacity(history.len() + 4 * max + 4);
        messages.push(build_system_prompt(user, instance_url, date, max));
        messages.extend_from_slice(history);
        let mut st = State {
            start: messages.len(),
            history: messages,
            tool_calls_used: 0,
            json_retries_used: 0,
            model_calls: 0,
            nodes: vec![Node::Start],
        };

        let mut step = Step::Action;
        loop {
            step = match step {
                Step::Action => {
                    st.nodes.push(Node::Action);
                    let tools = if st.tool_calls_used < max { tool_specs() } else { Vec::new() };
                    let offered_tools = !tools.is_empty();
                    let req = ChatRequest {
                        messages: st.history.clone(),
                        tools,
                        temperature: self.config.temperature,
                        max_tokens: self.config.max_tokens,
                    };
                    st.model_calls += 1;
                    let mut reply = self.chat.chat_complete(&req).map_err(AgentError::LlmUnavailable)?;
                    if offered_tools && !reply.tool_calls.is_empty() {
                        // One call per round; extra parallel calls are dropped
                        // so each round yields exactly one tool message.
                        reply.tool_calls.truncate(1);
                        let call = reply.tool_calls[0].clone();
                        Step::ExecuteTool(reply, call)
                    } else {
                        Step::CorrectJson(reply.content)
                    }
                }
                Step::ExecuteTool(reply, call) => {
                    st.nodes.push(Node::ExecuteTool);
                    st.history.push(reply);
                    let msg = self.tools.execute_tool(&call, user).unwrap_or_else(|e| {
                        ChatMessage::tool_result(call.id.clone(), format!("Tool call failed: {e}"))
                    });
                    st.history.push(msg);
                    Step::IncrementToolcount
                }
                Step::IncrementToolcount => {
                    st.nodes.push(Node::IncrementToolcount);
                    st.tool_calls_used += 1;
                    st.history.push(remaining_calls_message(st.tool_calls_used, max));
                    Step::Action
                }
                Step::CorrectJson(content) => {
                    st.nodes.push(Node::CorrectJson);
                    st.history.push(ChatMessage::assistant(content.clone()));
                    match validate_answer(&content) {
                        Ok(answer) => Step::End(answer),
                        Err(v) if st.json_retries_used < self.config.json_retry_limit => {
                            st.json_retries_used += 1;
                            st.history.push(format_violation_message(&v.0));
                            Step::Action
                        }
                        Err(v) => {
                            st.nodes.push(Node::End);
                            let answer = AssistantAnswer {
                                answer: format!(
                                    "Sorry, I could not produce a correctly formatted answer ({}).",
                                    v.0
                                ),
                                sources: Vec::new(),
                            };
                            return Err(AgentError::AnswerFormatExhausted { reason: v.0, run: Box::new(st.run(answer)) });
                        }
                    }
                }
                Step::End(answer) => {
                    st.nodes.push(Node::End);
                    return Ok(st.run(answer));
                }
            };
        }
    }
}
