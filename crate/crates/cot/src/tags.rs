//! Parsing of tagged model replies.

use cuakit_core::model::{
    PrivacyLevel, ReflectionVerdict, StructuredCoT, TrajectorySummary, VerdictStatus,
};
use cuakit_core::split_sections;

use crate::error::CotError;

/// Trimmed content of the first `<name>...</name>` pair.
pub fn tag<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("<{name}>");
    let close = format!("</{name}>");
    let start = text.find(&open)? + open.len();
    let end = text[start..].find(&close)? + start;
    Some(text[start..end].trim())
}

fn non_empty(s: Option<&str>) -> Option<String> {
    s.filter(|t| !t.is_empty()).map(str::to_string)
}

fn bad(msg: impl Into<String>) -> CotError {
    CotError::VerdictParse(msg.into())
}

pub fn parse_verdict(text: &str) -> Result<ReflectionVerdict, CotError> {
    let raw = tag(text, "verdict").ok_or_else(|| bad("missing <verdict>"))?;
    let status = match raw.to_ascii_lowercase().as_str() {
        "correct" => VerdictStatus::Correct,
        "incorrect" => VerdictStatus::Incorrect,
        "redundant" => VerdictStatus::Redundant,
        other => return Err(bad(format!("unknown verdict {other:?}"))),
    };
    let rationale = tag(text, "rationale").unwrap_or("").to_string();
    let state_change = non_empty(tag(text, "state_change"));
    match status {
        VerdictStatus::Correct if state_change.is_none() => {
            return Err(bad("correct verdict without <state_change>"))
        }
        VerdictStatus::Incorrect | VerdictStatus::Redundant if rationale.is_empty() => {
            return Err(bad("flagged verdict without <rationale>"))
        }
        _ => {}
    }
    Ok(ReflectionVerdict {
        status,
        rationale,
        // Only correct steps carry a state change.
        state_change: state_change.filter(|_| status == VerdictStatus::Correct),
    })
}

/// Tagged fields first; `## Observation:` style sections as a fallback.
pub fn parse_cot(text: &str) -> Result<StructuredCoT, CotError> {
    let mut observation = non_empty(tag(text, "observation"));
    let mut thought = non_empty(tag(text, "thought"));
    let mut action = non_empty(tag(text, "action"));
    if observation.is_none() && thought.is_none() && action.is_none() {
        for (label, body) in split_sections(text) {
            let slot = match label.as_str() {
                "Observation" => &mut observation,
                "Thought" => &mut thought,
                "Action" => &mut action,
                _ => continue,
            };
            if slot.is_none() && !body.is_empty() {
                *slot = Some(body);
            }
        }
    }
    let cot = StructuredCoT {
        observation,
        thought,
        action_description: action.ok_or_else(|| bad("missing action description"))?,
    };
    if !cot.ladder_holds() {
        return Err(bad("observation given without thought"));
    }
    Ok(cot)
}

fn score(text: &str, name: &str) -> Result<u8, CotError> {
    let raw = tag(text, name).ok_or_else(|| bad(format!("missing <{name}>")))?;
    let v: i64 = raw
        .parse()
        .map_err(|_| bad(format!("<{name}> is not an integer: {raw:?}")))?;
    if !(1..=10).contains(&v) {
        return Err(bad(format!("<{name}> = {v} outside 1..=10")));
    }
    Ok(v as u8)
}

pub fn parse_summary(text: &str) -> Result<TrajectorySummary, CotError> {
    let refined_instruction = non_empty(tag(text, "refined_instruction"))
        .ok_or_else(|| bad("missing <refined_instruction>"))?;
    Ok(TrajectorySummary {
        refined_instruction,
        alignment: score(text, "score_alignment")?,
        efficiency: score(text, "score_efficiency")?,
        difficulty: score(text, "score_difficulty")?,
    })
}

/// Accepts `<privacy>Label</privacy>` or a bare label.
pub fn parse_privacy(text: &str) -> Result<PrivacyLevel, CotError> {
    let raw = tag(text, "privacy").unwrap_or(text.trim());
    match raw.to_ascii_lowercase().as_str() {
        "none" => Ok(PrivacyLevel::None),
        "low" => Ok(PrivacyLevel::Low),
        "medium" => Ok(PrivacyLevel::Medium),
        "high" => Ok(PrivacyLevel::High),
        other => Err(bad(format!("unknown privacy level {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        let v = parse_verdict("<verdict>Correct</verdict><state_change>menu opened</state_change>")
            .unwrap();
        assert_eq!(v.status, VerdictStatus::Correct);
        assert_eq!(v.state_change.as_deref(), Some("menu opened"));
        assert!(parse_verdict("<verdict>correct</verdict>").is_err());
        assert!(parse_verdict("<verdict>incorrect</verdict>").is_err());
        assert!(parse_verdict("<verdict>maybe</verdict><rationale>x</rationale>").is_err());
        let v =
            parse_verdict("<verdict>redundant</verdict><rationale>no effect</rationale>").unwrap();
        assert_eq!(v.status, VerdictStatus::Redundant);
        assert_eq!(v.state_change, None);
    }

    #[test]
    fn cot_from_sections() {
        let c = parse_cot("## Thought:\nthink\n\n## Action:\nClick it.\n").unwrap();
        assert_eq!(c.thought.as_deref(), Some("think"));
        assert_eq!(c.observation, None);
        assert_eq!(c.action_description, "Click it.");
        assert!(parse_cot("<observation>o</observation><action>a</action>").is_err());
    }

    #[test]
    fn summary_scores_in_range() {
        let ok =
            "<refined_instruction>Do x</refined_instruction><score_alignment>7</score_alignment>\
<score_efficiency>8</score_efficiency><score_difficulty>5</score_difficulty>";
        let s = parse_summary(ok).unwrap();
        assert_eq!((s.alignment, s.efficiency, s.difficulty), (7, 8, 5));
        let err = parse_summary(&ok.replace(">8<", ">11<")).unwrap_err();
        assert_eq!(err.code(), "verdict_parse_error");
        assert!(parse_summary(&ok.replace(">5<", ">0<")).is_err());
    }

    #[test]
    fn privacy_labels() {
        assert_eq!(parse_privacy("None").unwrap(), PrivacyLevel::None);
        assert_eq!(
            parse_privacy("<privacy>High</privacy>").unwrap(),
            PrivacyLevel::High
        );
        assert_eq!(
            parse_privacy("Secret").unwrap_err().code(),
            "verdict_parse_error"
        );
    }
}
