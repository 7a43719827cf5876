//! Generated replies for the offline mock backend.

use cuakit_core::parse_action;

use crate::client::{ModelRequest, Part, RequestKind};
use crate::prompts::{describe_action, CODE_HEADER, INSTRUCTION_HEADER};

/// Body of the last text part that starts with `header`.
fn after_header(req: &ModelRequest, header: &str) -> Option<String> {
    req.messages
        .iter()
        .flat_map(|m| &m.parts)
        .filter_map(|p| match p {
            Part::Text { text } => text.strip_prefix(header),
            Part::Image { .. } => None,
        })
        .last()
        .map(|s| s.trim().to_string())
}

pub(crate) fn reply(req: &ModelRequest) -> String {
    let key = req.cache_key();
    let short = &key[..8];
    let byte = u8::from_str_radix(&key[..2], 16).unwrap_or(0);
    let code = after_header(req, CODE_HEADER).unwrap_or_default();
    let described = parse_action(&code)
        .map(|a| describe_action(&a))
        .unwrap_or_else(|_| "Continue with the task.".into());
    match req.kind {
        RequestKind::Reflect => match byte % 16 {
            0 => format!(
                "<verdict>incorrect</verdict><rationale>The action does not move the task forward (ref {short}).</rationale>"
            ),
            1 => format!(
                "<verdict>redundant</verdict><rationale>The screen is unchanged after the action (ref {short}).</rationale>"
            ),
            _ => format!(
                "<verdict>correct</verdict><rationale>The action matches the task.</rationale>\
<state_change>The screen updated after: {described} (ref {short})</state_change>"
            ),
        },
        RequestKind::Generate => format!(
            "<observation>The screenshot shows the application state before the action (ref {short}).</observation>\n\
<thought>I compare the screen with the task and previous steps; the next useful move is: {described}</thought>\n\
<action>{described}</action>"
        ),
        RequestKind::Summarize => {
            let instr = after_header(req, INSTRUCTION_HEADER).unwrap_or_default();
            format!(
                "<refined_instruction>{}</refined_instruction>\
<score_alignment>7</score_alignment><score_efficiency>8</score_efficiency><score_difficulty>5</score_difficulty>",
                if instr.is_empty() { "Complete the recorded task." } else { &instr }
            )
        }
        RequestKind::Privacy => "<privacy>None</privacy>".into(),
    }
}
