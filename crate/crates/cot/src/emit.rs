//! Chat-format training samples with windowed screenshot history.

use std::path::Path;

use cuakit_core::model::{CotLevel, PrivacyLevel, Trajectory};
use cuakit_core::render_action;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::Role;
use crate::error::CotError;
use crate::pipeline::{action_line, frame_path};
use crate::prompts::{agent_system, INSTRUCTION_HEADER, NEXT_MOVE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Fixed level for every sample; `None` draws per sample from `mixture`.
    pub level: Option<CotLevel>,
    /// Relative weights of L1, L2, L3.
    pub mixture: [f64; 3],
    pub seed: u64,
    pub history_images: usize,
    pub drop_flagged_steps: bool,
    pub skip_high_privacy: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            level: None,
            mixture: [1.0, 1.0, 1.0],
            seed: 0,
            history_images: 3,
            drop_flagged_steps: true,
            skip_high_privacy: true,
        }
    }
}

impl SampleConfig {
    pub fn fixed(level: CotLevel) -> Self {
        SampleConfig {
            level: Some(level),
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.history_images < 1 {
            return Err("history_images must be at least 1".into());
        }
        if self.level.is_none() {
            let total: f64 = self.mixture.iter().sum();
            if self.mixture.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
                return Err("mixture weights must be non-negative with a positive sum".into());
            }
        }
        Ok(())
    }

    /// Level for one sample: fixed, or a seeded draw keyed by trajectory and step.
    pub fn level_for(&self, traj_id: &str, step: usize) -> CotLevel {
        if let Some(l) = self.level {
            return l;
        }
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(traj_id.as_bytes());
        h.update((step as u64).to_le_bytes());
        let d = h.finalize();
        let u = u64::from_le_bytes(d[..8].try_into().unwrap()) as f64 / (u64::MAX as f64 + 1.0);
        let total: f64 = self.mixture.iter().sum();
        let mut acc = 0.0;
        for (w, level) in self
            .mixture
            .iter()
            .zip([CotLevel::L1, CotLevel::L2, CotLevel::L3])
        {
            acc += w / total;
            if u < acc {
                return level;
            }
        }
        CotLevel::L3
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl ChatMessage {
    fn text(role: Role, content: String) -> Self {
        ChatMessage {
            role,
            content: Some(content),
            image: None,
        }
    }

    fn image(path: String) -> Self {
        ChatMessage {
            role: Role::User,
            content: None,
            image: Some(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSample {
    pub id: String,
    pub trajectory: String,
    pub step: usize,
    pub level: CotLevel,
    pub messages: Vec<ChatMessage>,
}

impl ChatSample {
    pub fn images(&self) -> Vec<&str> {
        self.messages
            .iter()
            .filter_map(|m| m.image.as_deref())
            .collect()
    }

    pub fn target(&self) -> &str {
        self.messages
            .last()
            .and_then(|m| m.content.as_deref())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    /// `None` when the whole trajectory is skipped.
    pub step: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Emitted {
    pub samples: Vec<ChatSample>,
    pub skipped: Vec<Skip>,
}

/// Supervised target for step `i` at `level`.
fn target_text(traj: &Trajectory, i: usize, level: CotLevel) -> Result<String, CotError> {
    let step = &traj.steps[i];
    let missing = |what: &str| CotError::Emission {
        step: i,
        message: format!("no {what} for level {level:?}"),
    };
    let cot = step.cot.as_ref().ok_or_else(|| missing("CoT"))?;
    let mut sections = Vec::with_capacity(4);
    if level >= CotLevel::L3 {
        let o = cot
            .observation
            .as_ref()
            .ok_or_else(|| missing("observation"))?;
        sections.push(format!("## Observation:{o}"));
    }
    if level >= CotLevel::L2 {
        let t = cot.thought.as_ref().ok_or_else(|| missing("thought"))?;
        sections.push(format!("## Thought:{t}"));
    }
    sections.push(format!("## Action:{}", cot.action_description));
    sections.push(format!(
        "## Code:\n```python\n{}\n```",
        render_action(&step.action)
    ));
    Ok(format!("# Step {}:\n{}", i + 1, sections.join("\n\n")))
}

/// One sample per eligible step. Earlier steps appear as L1 action lines;
/// the last `history_images` steps up to and including the current one also
/// carry their screenshots. Image references are `image_root` joined with
/// the trajectory's frame paths.
pub fn emit_training_samples(
    traj: &Trajectory,
    cfg: &SampleConfig,
    image_root: &Path,
) -> Result<Emitted, CotError> {
    let mut out = Emitted::default();
    if cfg.skip_high_privacy && traj.privacy == Some(PrivacyLevel::High) {
        out.skipped.push(Skip {
            step: None,
            reason: "privacy_high".into(),
        });
        return Ok(out);
    }
    let window = cfg.history_images.max(1);
    let instruction = traj.effective_instruction();
    let image = |j: usize| -> Result<ChatMessage, CotError> {
        let state = traj.steps[j]
            .state
            .as_ref()
            .ok_or(CotError::MissingFrame(j))?;
        let p = frame_path(image_root, traj, &state.image);
        Ok(ChatMessage::image(p.to_string_lossy().replace('\\', "/")))
    };
    let line = |j: usize| format!("# Step {}:\n## Action:{}", j + 1, action_line(traj, j));

    for i in 0..traj.steps.len() {
        let step = &traj.steps[i];
        if cfg.drop_flagged_steps {
            let reason = if traj.annotation_errors.contains_key(&i) {
                Some("annotation_failed")
            } else {
                match &step.verdict {
                    None => Some("unreviewed"),
                    Some(v) if !v.is_correct() => Some("flagged"),
                    Some(_) => None,
                }
            };
            if let Some(reason) = reason {
                out.skipped.push(Skip {
                    step: Some(i),
                    reason: reason.into(),
                });
                continue;
            }
        }
        let level = cfg.level_for(&traj.id, i);
        let first_image = (i + 1).saturating_sub(window);
        let mut messages = vec![ChatMessage::text(Role::System, agent_system(level))];
        if first_image > 0 {
            let bundled: Vec<String> = (0..first_image).map(line).collect();
            messages.push(ChatMessage::text(Role::Assistant, bundled.join("\n\n")));
        }
        for j in first_image..i {
            messages.push(image(j)?);
            messages.push(ChatMessage::text(Role::Assistant, line(j)));
        }
        messages.push(image(i)?);
        messages.push(ChatMessage::text(
            Role::User,
            format!("{INSTRUCTION_HEADER}\n{instruction}\n{NEXT_MOVE}"),
        ));
        messages.push(ChatMessage::text(
            Role::Assistant,
            target_text(traj, i, level)?,
        ));
        out.samples.push(ChatSample {
            id: format!("{}#{}", traj.id, i),
            trajectory: traj.id.clone(),
            step: i,
            level,
            messages,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_level_ignores_mixture() {
        let cfg = SampleConfig::fixed(CotLevel::L2);
        assert!((0..50).all(|i| cfg.level_for("t", i) == CotLevel::L2));
    }

    #[test]
    fn mixture_weights_are_respected() {
        let cfg = SampleConfig {
            mixture: [1.0, 0.0, 3.0],
            ..Default::default()
        };
        let draws: Vec<CotLevel> = (0..4000).map(|i| cfg.level_for("traj", i)).collect();
        assert!(!draws.contains(&CotLevel::L2));
        let l3 = draws.iter().filter(|l| **l == CotLevel::L3).count() as f64 / 4000.0;
        assert!((l3 - 0.75).abs() < 0.03, "{l3}");
        assert_eq!(
            draws,
            (0..4000)
                .map(|i| cfg.level_for("traj", i))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn config_checks() {
        assert!(SampleConfig::default().check().is_ok());
        let bad = SampleConfig {
            history_images: 0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        let bad = SampleConfig {
            mixture: [0.0, 0.0, 0.0],
            ..Default::default()
        };
        assert!(bad.check().is_err());
    }
}
