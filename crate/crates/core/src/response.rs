//! Splitting full model responses into labeled sections and an action.

use serde::{Deserialize, Serialize};

use crate::dsl::{parse_action_with, split_statements, DslError, ParseOptions};
use crate::model::AgentAction;

/// Section labels recognized in `## Label:` headers.
pub const SECTION_LABELS: [&str; 4] = ["Observation", "Thought", "Action", "Code"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    /// `(label, text)` in source order.
    pub sections: Vec<(String, String)>,
    pub action: AgentAction,
    pub raw: String,
}

impl ParsedResponse {
    pub fn section(&self, label: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, t)| t.as_str())
    }
}

/// Find `## Label:` headers. Returns `(label, header_start, body_start)`.
fn headers(text: &str) -> Vec<(&'static str, usize, usize)> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        if let Some(rest) = trimmed.strip_prefix("##") {
            let rest_trim = rest.trim_start();
            for label in SECTION_LABELS {
                if let Some(after) = rest_trim.strip_prefix(label) {
                    if let Some(after_colon) = after.strip_prefix(':') {
                        let body = line_start + line.len() - after_colon.len();
                        out.push((label, line_start + indent, body));
                        break;
                    }
                }
            }
        }
        line_start += line.len();
    }
    out
}

/// Bodies of all fenced blocks (``` or '''), in order.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        let open = ["```", "'''"]
            .iter()
            .filter_map(|f| rest.find(f).map(|i| (i, *f)))
            .min();
        let Some((open, fence)) = open else {
            break;
        };
        let after = &rest[open + 3..];
        let Some(close) = after.find(fence) else {
            break;
        };
        let block = &after[..close];
        // Drop a language tag on the opening line, also when the newline is
        // an escaped `\n`.
        let tag_len = block
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(block.len());
        let tail = &block[tag_len..];
        let body = if tail.starts_with('\n') {
            &tail[1..]
        } else if tag_len > 0 && tail.starts_with("\\n") {
            &tail[2..]
        } else {
            block
        };
        out.push(body);
        rest = &after[close + 3..];
    }
    out
}

/// Split a response into sections and parse its final action expression.
pub fn extract_response(text: &str) -> Result<ParsedResponse, DslError> {
    extract_response_with(text, &ParseOptions::default())
}

/// `## Label:` sections in source order, bodies trimmed.
pub fn split_sections(text: &str) -> Vec<(String, String)> {
    let hs = headers(text);
    let mut sections = Vec::new();
    for (k, (label, _, body)) in hs.iter().enumerate() {
        let end = hs.get(k + 1).map(|h| h.1).unwrap_or(text.len());
        sections.push((label.to_string(), text[*body..end].trim().to_string()));
    }
    sections
}

pub fn extract_response_with(text: &str, opts: &ParseOptions) -> Result<ParsedResponse, DslError> {
    let sections = split_sections(text);

    let code: &str = if let Some(block) = fenced_blocks(text).last() {
        block
    } else if let Some((_, c)) = sections.iter().rev().find(|(l, _)| l == "Code") {
        c
    } else if sections.is_empty() {
        text
    } else {
        return Err(DslError::NoAction);
    };

    let action = split_statements(code)
        .last()
        .and_then(|(_, stmt)| parse_action_with(stmt, opts).ok())
        .ok_or(DslError::NoAction)?;
    Ok(ParsedResponse {
        sections,
        action,
        raw: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Button, Point};

    #[test]
    fn bare_action() {
        let r = extract_response("computer.terminate(status='success')").unwrap();
        assert!(r.sections.is_empty());
        assert!(r.action.is_terminate());
    }

    #[test]
    fn last_expression_wins() {
        let text = "## Code:\n```python\npyautogui.moveTo(x=0.1, y=0.2)\npyautogui.click(x=0.3, y=0.4)\n```";
        let r = extract_response(text).unwrap();
        assert_eq!(
            r.action,
            AgentAction::Click {
                at: Point::new(0.3, 0.4),
                button: Button::Left
            }
        );
    }

    #[test]
    fn sections_in_order() {
        let text = "## Thought:\nthink\n## Action:\ndo it\n## Code:\n```python\npyautogui.press('enter')\n```\n";
        let r = extract_response(text).unwrap();
        let labels: Vec<_> = r.sections.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["Thought", "Action", "Code"]);
        assert_eq!(r.section("Thought"), Some("think"));
    }

    #[test]
    fn single_quote_fence_with_escaped_newline() {
        let text =
            "## Action:Click the box.\n\n## Code:'''python\\npyautogui.click(x=0.157, y=0.1229)'''";
        let r = extract_response(text).unwrap();
        assert_eq!(
            r.action,
            AgentAction::Click {
                at: Point::new(0.157, 0.1229),
                button: Button::Left
            }
        );
        assert_eq!(r.section("Action"), Some("Click the box."));
    }

    #[test]
    fn no_action_when_unparsable() {
        assert_eq!(
            extract_response("## Thought:\nnothing to do").unwrap_err(),
            DslError::NoAction
        );
        assert_eq!(
            extract_response("```python\npyautogui.click(x=5.0, y=0.1)\n```").unwrap_err(),
            DslError::NoAction
        );
        assert_eq!(extract_response("").unwrap_err(), DslError::NoAction);
    }
}
