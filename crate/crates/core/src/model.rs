//! Domain types shared by every pipeline stage.
//!
//! A recording is a [`RawDemonstration`]: the task instruction, a timestamped
//! input-event stream and an already-extracted frame sequence. Reduction and
//! alignment turn it into a [`Trajectory`] of state/action [`Step`]s that ends
//! in exactly one terminate action.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keys::Key;

/// Milliseconds since recording start.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    Mouse,
    Keyboard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Move,
    ButtonDown,
    ButtonUp,
    Wheel,
    KeyDown,
    KeyUp,
}

impl EventKind {
    pub fn device(self) -> Device {
        match self {
            EventKind::Move | EventKind::ButtonDown | EventKind::ButtonUp | EventKind::Wheel => {
                Device::Mouse
            }
            EventKind::KeyDown | EventKind::KeyUp => Device::Keyboard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Button {
    Left,
    Right,
    Middle,
}

impl Button {
    pub fn as_str(self) -> &'static str {
        match self {
            Button::Left => "left",
            Button::Right => "right",
            Button::Middle => "middle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Os {
    Windows,
    Macos,
    Ubuntu,
}

impl Os {
    pub fn as_str(self) -> &'static str {
        match self {
            Os::Windows => "windows",
            Os::Macos => "macos",
            Os::Ubuntu => "ubuntu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Success,
    Failure,
}

impl TaskStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Success => "success",
            TaskStatus::Failure => "failure",
        }
    }
}

/// A point in normalized screen coordinates, both axes in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn in_unit_square(self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    /// Snap to the 1e-4 grid used by the canonical text form.
    pub fn grid(self) -> GridPoint {
        GridPoint {
            x: (self.x * 10_000.0).round() as i64,
            y: (self.y * 10_000.0).round() as i64,
        }
    }

    pub fn to_pixels(self, resolution: (u32, u32)) -> (f64, f64) {
        (self.x * resolution.0 as f64, self.y * resolution.1 as f64)
    }
}

/// A point on the 1e-4 grid; used wherever positions are compared for equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: i64,
    pub y: i64,
}

/// One atomic input signal, in the exact shape of an `events.jsonl` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub t: Millis,
    pub device: Device,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub button: Option<Button>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dy: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<Key>,
}

impl RawEvent {
    fn blank(t: Millis, kind: EventKind) -> Self {
        RawEvent {
            t,
            device: kind.device(),
            kind,
            x: None,
            y: None,
            button: None,
            dx: None,
            dy: None,
            key: None,
        }
    }

    pub fn mouse_move(t: Millis, at: Point) -> Self {
        RawEvent {
            x: Some(at.x),
            y: Some(at.y),
            ..Self::blank(t, EventKind::Move)
        }
    }

    pub fn button(t: Millis, at: Point, button: Button, down: bool) -> Self {
        let kind = if down {
            EventKind::ButtonDown
        } else {
            EventKind::ButtonUp
        };
        RawEvent {
            x: Some(at.x),
            y: Some(at.y),
            button: Some(button),
            ..Self::blank(t, kind)
        }
    }

    pub fn wheel(t: Millis, at: Point, dx: i32, dy: i32) -> Self {
        RawEvent {
            x: Some(at.x),
            y: Some(at.y),
            dx: Some(dx),
            dy: Some(dy),
            ..Self::blank(t, EventKind::Wheel)
        }
    }

    pub fn key(t: Millis, key: Key, down: bool) -> Self {
        let kind = if down {
            EventKind::KeyDown
        } else {
            EventKind::KeyUp
        };
        RawEvent {
            key: Some(key),
            ..Self::blank(t, kind)
        }
    }

    pub fn position(&self) -> Option<Point> {
        Some(Point::new(self.x?, self.y?))
    }
}

/// One extracted screen frame; its image is a path relative to the
/// demonstration directory (or a content hash for in-memory fixtures).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub index: usize,
    pub t: Millis,
    pub file: String,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDemonstration {
    pub id: String,
    pub instruction: String,
    pub os: Os,
    pub resolution: (u32, u32),
    /// Outcome recorded by the annotator; absent means success.
    pub status: Option<TaskStatus>,
    pub events: Vec<RawEvent>,
    pub frames: Vec<Frame>,
    /// Opaque accessibility-tree snapshots keyed by timestamp.
    pub axtree: BTreeMap<Millis, String>,
}

/// The agent action space. Coordinates are normalized; a right click is
/// `Click` with `button = Right`; a middle click is always `MiddleClick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum AgentAction {
    Click {
        at: Point,
        button: Button,
    },
    MiddleClick {
        at: Point,
    },
    DoubleClick {
        at: Point,
        button: Button,
    },
    TripleClick {
        at: Point,
        button: Button,
    },
    MoveTo {
        at: Point,
    },
    DragTo {
        at: Point,
    },
    /// Vertical wheel; positive clicks scroll up.
    Scroll {
        clicks: i32,
        at: Option<Point>,
    },
    /// Horizontal wheel; positive clicks scroll right.
    HScroll {
        clicks: i32,
        at: Option<Point>,
    },
    Write {
        text: String,
    },
    Press {
        key: Key,
    },
    Hotkey {
        keys: Vec<Key>,
    },
    Wait,
    Terminate {
        status: TaskStatus,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionInvariantError {
    #[error("coordinate ({0}, {1}) outside [0,1]")]
    Coordinate(f64, f64),
    #[error("hotkey needs at least two keys")]
    ShortHotkey,
    #[error("hotkey keys not in canonical order")]
    HotkeyOrder,
    #[error("write text is empty")]
    EmptyText,
    #[error("scroll delta is zero")]
    ZeroScroll,
    #[error("middle-button click must be middleClick")]
    MiddleClickForm,
}

impl AgentAction {
    /// The action type name (`click`, `rightClick`, `hscroll`, ...).
    /// Right-button clicks report `rightClick` so corpus statistics line up
    /// with benchmark categories.
    pub fn type_name(&self) -> &'static str {
        match self {
            AgentAction::Click {
                button: Button::Right,
                ..
            } => "rightClick",
            AgentAction::Click { .. } => "click",
            AgentAction::MiddleClick { .. } => "middleClick",
            AgentAction::DoubleClick { .. } => "doubleClick",
            AgentAction::TripleClick { .. } => "tripleClick",
            AgentAction::MoveTo { .. } => "moveTo",
            AgentAction::DragTo { .. } => "dragTo",
            AgentAction::Scroll { .. } => "scroll",
            AgentAction::HScroll { .. } => "hscroll",
            AgentAction::Write { .. } => "write",
            AgentAction::Press { .. } => "press",
            AgentAction::Hotkey { .. } => "hotkey",
            AgentAction::Wait => "wait",
            AgentAction::Terminate { .. } => "terminate",
        }
    }

    /// The coordinate this action targets, if it has one.
    pub fn point(&self) -> Option<Point> {
        match self {
            AgentAction::Click { at, .. }
            | AgentAction::MiddleClick { at }
            | AgentAction::DoubleClick { at, .. }
            | AgentAction::TripleClick { at, .. }
            | AgentAction::MoveTo { at }
            | AgentAction::DragTo { at } => Some(*at),
            AgentAction::Scroll { at, .. } | AgentAction::HScroll { at, .. } => *at,
            _ => None,
        }
    }

    pub fn is_terminate(&self) -> bool {
        matches!(self, AgentAction::Terminate { .. })
    }

    /// Actions started by a mouse press (clicks of any multiplicity).
    pub fn is_click_like(&self) -> bool {
        matches!(
            self,
            AgentAction::Click { .. }
                | AgentAction::MiddleClick { .. }
                | AgentAction::DoubleClick { .. }
                | AgentAction::TripleClick { .. }
        )
    }

    pub fn check(&self) -> Result<(), ActionInvariantError> {
        if let Some(p) = self.point() {
            if !p.in_unit_square() {
                return Err(ActionInvariantError::Coordinate(p.x, p.y));
            }
        }
        match self {
            AgentAction::Click {
                button: Button::Middle,
                ..
            } => Err(ActionInvariantError::MiddleClickForm),
            AgentAction::Hotkey { keys } => {
                if keys.len() < 2 {
                    Err(ActionInvariantError::ShortHotkey)
                } else if crate::keys::canonical_hotkey(keys.iter().cloned()) != *keys {
                    Err(ActionInvariantError::HotkeyOrder)
                } else {
                    Ok(())
                }
            }
            AgentAction::Write { text } if text.is_empty() => Err(ActionInvariantError::EmptyText),
            AgentAction::Scroll { clicks: 0, .. } | AgentAction::HScroll { clicks: 0, .. } => {
                Err(ActionInvariantError::ZeroScroll)
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::render_action(self))
    }
}

/// Inclusive range of raw-event indices an action was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub first: usize,
    pub last: usize,
}

impl Span {
    pub fn new(first: usize, last: usize) -> Self {
        debug_assert!(first <= last);
        Span { first, last }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.first <= i && i <= self.last
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span {
            first: v[0],
            last: v[1],
        }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.first, s.last]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Correct,
    Incorrect,
    Redundant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionVerdict {
    pub status: VerdictStatus,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_change: Option<String>,
}

impl ReflectionVerdict {
    pub fn is_correct(&self) -> bool {
        self.status == VerdictStatus::Correct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CotLevel {
    L1,
    L2,
    L3,
}

/// Three-level inner monologue. Presence is a ladder: an observation implies
/// a thought, and the action description is always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredCoT {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    pub action_description: String,
}

impl StructuredCoT {
    pub fn ladder_holds(&self) -> bool {
        (self.observation.is_none() || self.thought.is_some())
            && !self.action_description.trim().is_empty()
    }

    /// Highest level this CoT can fill.
    pub fn level(&self) -> CotLevel {
        match (&self.observation, &self.thought) {
            (Some(_), Some(_)) => CotLevel::L3,
            (_, Some(_)) => CotLevel::L2,
            _ => CotLevel::L1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub refined_instruction: String,
    pub alignment: u8,
    pub efficiency: u8,
    pub difficulty: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyLevel {
    None,
    Low,
    Medium,
    High,
}

/// The screenshot a step is paired with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRef {
    pub frame: usize,
    pub frame_t: Millis,
    pub image: String,
}

/// One state/action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(with = "crate::dsl::serde_text")]
    pub action: AgentAction,
    /// Raw-event range; absent only on the appended terminal step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default, flatten, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot: Option<StructuredCoT>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ReflectionVerdict>,
}

impl Step {
    pub fn new(action: AgentAction, span: Option<Span>) -> Self {
        Step {
            action,
            span,
            state: None,
            cot: None,
            verdict: None,
        }
    }
}

/// Alignment parameters echoed into the trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMeta {
    pub idle_gap_ms: Millis,
    pub diff_threshold: f64,
    pub downsample: (u32, u32),
}

/// The `trajectory.json` record. After reduction it holds the bare action
/// sequence; after alignment every step has a state and the last step is the
/// terminate action; annotation adds CoT, verdicts and the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_instruction: Option<String>,
    pub os: Os,
    pub resolution: (u32, u32),
    /// Demonstration directory the frame images are relative to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentMeta>,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<TrajectorySummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyLevel>,
    /// Steps whose annotation failed after retries, with the error text.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotation_errors: BTreeMap<usize, String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("trajectory has no steps")]
    Empty,
    #[error("last step is not terminate")]
    MissingTerminate,
    #[error("terminate at step {0} is not the final step")]
    EarlyTerminate(usize),
    #[error("step {0} has no state frame")]
    MissingState(usize),
    #[error("step {0} keyframe does not advance past the previous step")]
    FrameOrder(usize),
    #[error("step {0} span overlaps or precedes the previous span")]
    SpanOrder(usize),
    #[error("step {0}: {1}")]
    Action(usize, ActionInvariantError),
}

impl Trajectory {
    /// Index of the terminal step (`T`).
    pub fn terminal_index(&self) -> Option<usize> {
        self.steps.len().checked_sub(1)
    }

    pub fn effective_instruction(&self) -> &str {
        self.refined_instruction
            .as_deref()
            .or(self
                .summary
                .as_ref()
                .map(|s| s.refined_instruction.as_str()))
            .unwrap_or(&self.instruction)
    }

    /// Checks the aligned-trajectory invariants: a unique trailing terminate,
    /// a state on every step, strictly increasing keyframes (the terminal step
    /// may repeat the final frame) and disjoint ordered spans.
    pub fn check(&self) -> Result<(), TrajectoryError> {
        let last = self.terminal_index().ok_or(TrajectoryError::Empty)?;
        if !self.steps[last].action.is_terminate() {
            return Err(TrajectoryError::MissingTerminate);
        }
        let mut prev_frame: Option<usize> = None;
        let mut prev_span: Option<Span> = None;
        for (i, step) in self.steps.iter().enumerate() {
            step.action
                .check()
                .map_err(|e| TrajectoryError::Action(i, e))?;
            if i != last && step.action.is_terminate() {
                return Err(TrajectoryError::EarlyTerminate(i));
            }
            let state = step
                .state
                .as_ref()
                .ok_or(TrajectoryError::MissingState(i))?;
            if let Some(p) = prev_frame {
                let ok = if i == last {
                    state.frame >= p
                } else {
                    state.frame > p
                };
                if !ok {
                    return Err(TrajectoryError::FrameOrder(i));
                }
            }
            prev_frame = Some(state.frame);
            if let Some(span) = step.span {
                if let Some(p) = prev_span {
                    if span.first <= p.last {
                        return Err(TrajectoryError::SpanOrder(i));
                    }
                }
                prev_span = Some(span);
            }
        }
        Ok(())
    }
}
