//! Tool-using assistant: prompt construction, the three repository tools,
//! a bounded tool budget and validation of the final answer format.

mod answer;
mod executor;
mod prompt;
mod tools;

pub use answer::{validate_answer, AssistantAnswer, FormatViolation, Source};
pub use executor::{Agent, AgentConfig, AgentError, AgentRun, Node};
pub use prompt::{build_system_prompt, format_violation_message, remaining_calls_message, SYSTEM_PROMPT_TEMPLATE};
pub use tools::{
    tool_specs, truncate_output, ToolContext, ToolError, GET_CONNECTIONS, GET_METADATA, SIMILARITY_SEARCH,
};
