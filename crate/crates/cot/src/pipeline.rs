//! Reflector, generator and summarizer passes over one trajectory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use cuakit_core::model::{
    PrivacyLevel, ReflectionVerdict, StructuredCoT, Trajectory, TrajectorySummary,
};
use cuakit_core::render_action;
use tracing::{debug, warn};

use crate::client::{Message, ModelClient, ModelRequest, Part, RequestKind, Role};
use crate::cues::write_cue_image;
use crate::error::CotError;
use crate::prompts::{self, describe_action, CODE_HEADER, INSTRUCTION_HEADER};
use crate::tags;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

pub struct Annotator<'a> {
    client: &'a dyn ModelClient,
    /// Directory that `Trajectory::demo` and frame paths are relative to.
    root: PathBuf,
    cue_dir: PathBuf,
    retry: RetryPolicy,
}

impl<'a> Annotator<'a> {
    pub fn new(
        client: &'a dyn ModelClient,
        root: impl Into<PathBuf>,
        cue_dir: impl Into<PathBuf>,
    ) -> Self {
        Annotator {
            client,
            root: root.into(),
            cue_dir: cue_dir.into(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn frame_path(&self, traj: &Trajectory, i: usize) -> Result<PathBuf, CotError> {
        let state = traj
            .steps
            .get(i)
            .and_then(|s| s.state.as_ref())
            .ok_or(CotError::MissingFrame(i))?;
        Ok(frame_path(&self.root, traj, &state.image))
    }

    /// The step's frame with the cue drawn on it, or the plain frame when the
    /// action has no coordinate.
    fn step_image(&self, traj: &Trajectory, i: usize) -> Result<Part, CotError> {
        let frame = self.frame_path(traj, i)?;
        match write_cue_image(&frame, &traj.steps[i].action, &self.cue_dir) {
            Ok(cued) => Part::image(&cued),
            Err(CotError::CueNotApplicable) => Part::image(&frame),
            Err(e) => Err(e),
        }
    }

    fn call<T>(
        &self,
        mut req: ModelRequest,
        parse: impl Fn(&str) -> Result<T, CotError>,
    ) -> Result<T, CotError> {
        let mut delay = self.retry.backoff_ms;
        let attempts = self.retry.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            req.attempt = attempt;
            match self.client.complete(&req).and_then(|r| parse(&r)) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    debug!(kind = ?req.kind, attempt, error = %e, "model call failed");
                    last = Some(e);
                }
            }
            if attempt + 1 < attempts && delay > 0 {
                std::thread::sleep(Duration::from_millis(delay));
                delay = delay.saturating_mul(2);
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Judge step `i` from the frames before and after it. The terminal step
    /// is compared against its own frame.
    pub fn reflect_step(&self, traj: &Trajectory, i: usize) -> Result<ReflectionVerdict, CotError> {
        let before = self.step_image(traj, i)?;
        let next = if i + 1 < traj.steps.len() { i + 1 } else { i };
        let after = Part::image(&self.frame_path(traj, next)?)?;
        let user = Message::new(
            Role::User,
            vec![
                instruction_part(traj),
                code_part(traj, i),
                Part::text("Screenshot before the action:"),
                before,
                Part::text("Screenshot after the action:"),
                after,
            ],
        );
        let req = ModelRequest::new(RequestKind::Reflect, prompts::REFLECTOR, vec![user]);
        self.call(req, tags::parse_verdict)
    }

    /// Context: system prompt, one assistant message per previous step
    /// (action line, code and reflection), then the current step.
    pub fn generate_request(&self, traj: &Trajectory, i: usize) -> Result<ModelRequest, CotError> {
        let mut messages = Vec::with_capacity(i + 1);
        for j in 0..i {
            let step = &traj.steps[j];
            let mut text = format!(
                "# Step {}:\n## Action:{}\n## Code:\n{}",
                j + 1,
                action_line(traj, j),
                render_action(&step.action)
            );
            if let Some(v) = &step.verdict {
                let detail = v.state_change.as_deref().unwrap_or(&v.rationale);
                text.push_str(&format!("\n## Reflection:{:?}: {detail}", v.status));
            }
            messages.push(Message::text(Role::Assistant, text));
        }
        messages.push(Message::new(
            Role::User,
            vec![
                instruction_part(traj),
                Part::text(format!("# Step {}:", i + 1)),
                self.step_image(traj, i)?,
                code_part(traj, i),
            ],
        ));
        Ok(ModelRequest::new(
            RequestKind::Generate,
            prompts::GENERATOR,
            messages,
        ))
    }

    pub fn generate_cot(&self, traj: &Trajectory, i: usize) -> Result<StructuredCoT, CotError> {
        let req = self.generate_request(traj, i)?;
        self.call(req, tags::parse_cot)
    }

    pub fn summarize_trajectory(&self, traj: &Trajectory) -> Result<TrajectorySummary, CotError> {
        let user = Message::new(
            Role::User,
            vec![instruction_part(traj), steps_part(traj, false)],
        );
        let req = ModelRequest::new(RequestKind::Summarize, prompts::SUMMARIZER, vec![user]);
        self.call(req, tags::parse_summary)
    }

    pub fn classify_privacy(&self, traj: &Trajectory) -> Result<PrivacyLevel, CotError> {
        let user = Message::new(
            Role::User,
            vec![instruction_part(traj), steps_part(traj, true)],
        );
        let req = ModelRequest::new(RequestKind::Privacy, prompts::PRIVACY, vec![user]);
        self.call(req, tags::parse_privacy)
    }

    /// Full pass: reflect then generate for each step in order, then the
    /// summary and privacy level. A step that fails after retries is recorded
    /// in `annotation_errors` and the pass continues.
    pub fn annotate(&self, traj: &Trajectory) -> Result<Trajectory, CotError> {
        let mut t = traj.clone();
        t.annotation_errors.clear();
        for i in 0..t.steps.len() {
            let result = self.reflect_step(&t, i).and_then(|v| {
                t.steps[i].verdict = Some(v);
                self.generate_cot(&t, i)
            });
            match result {
                Ok(cot) => t.steps[i].cot = Some(cot),
                Err(e) => {
                    warn!(trajectory = %t.id, step = i, error = %e, "step annotation failed");
                    t.annotation_errors.insert(i, format!("{}: {e}", e.code()));
                }
            }
        }
        let summary = self.summarize_trajectory(&t)?;
        t.refined_instruction = Some(summary.refined_instruction.clone());
        t.summary = Some(summary);
        t.privacy = Some(self.classify_privacy(&t)?);
        Ok(t)
    }
}

pub fn frame_path(root: &Path, traj: &Trajectory, image: &str) -> PathBuf {
    match &traj.demo {
        Some(d) => root.join(d).join(image),
        None => root.join(image),
    }
}

/// The L1 line for step `j`: its synthesized action text, else a plain
/// description of the action.
pub fn action_line(traj: &Trajectory, j: usize) -> String {
    let step = &traj.steps[j];
    match &step.cot {
        Some(c) => c.action_description.clone(),
        None => describe_action(&step.action),
    }
}

fn instruction_part(traj: &Trajectory) -> Part {
    Part::text(format!("{INSTRUCTION_HEADER}\n{}", traj.instruction))
}

fn code_part(traj: &Trajectory, i: usize) -> Part {
    Part::text(format!(
        "{CODE_HEADER}\n{}",
        render_action(&traj.steps[i].action)
    ))
}

fn steps_part(traj: &Trajectory, with_cot: bool) -> Part {
    let mut text = String::new();
    for (j, step) in traj.steps.iter().enumerate() {
        text.push_str(&format!(
            "# Step {}:\n## Action:{}\n",
            j + 1,
            action_line(traj, j)
        ));
        if with_cot {
            if let Some(c) = &step.cot {
                for s in [&c.observation, &c.thought].into_iter().flatten() {
                    text.push_str(s);
                    text.push('\n');
                }
            }
        }
        if let Some(v) = &step.verdict {
            text.push_str(&format!("## Reflection:{:?}\n", v.status));
        }
    }
    Part::text(text)
}
