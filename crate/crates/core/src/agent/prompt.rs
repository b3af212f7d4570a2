use chrono::NaiveDate;

use crate::gateway::ChatMessage;
use crate::ids::UserId;

/// Versioned prompt text; `{placeholders}` are filled per run.
pub const SYSTEM_PROMPT_TEMPLATE: &str = include_str!("../../resources/system_prompt.txt");

pub fn build_system_prompt(user_id: &UserId, instance_url: &str, now: NaiveDate, max_tool_calls: usize) -> ChatMessage {
    let text = SYSTEM_PROMPT_TEMPLATE
        .replace("{max_tool_calls}", &max_tool_calls.to_string())
        .replace("{date}", &now.format("%Y-%m-%d").to_string())
        .replace("{user_id}", user_id.as_str())
        .replace("{instance_url}", instance_url);
    ChatMessage::system(text)
}

/// Budget notice appended after every tool execution.
pub fn remaining_calls_message(used: usize, max: usize) -> ChatMessage {
    ChatMessage::system(format!("You have {} tool call(s) remaining out of {max}.", max - used))
}

pub fn format_violation_message(reason: &str) -> ChatMessage {
    ChatMessage::system(format!(
        "Your previous answer did not follow the required format: {reason}. Reply again with only a JSON object \
         of the form {{\"answer\": string, \"sources\": [{{\"record_id\": integer, \"specifier\": string}}]}}."
    ))
}
