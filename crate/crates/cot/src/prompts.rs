//! System prompts and request text layout.

use cuakit_core::model::{AgentAction, Button, CotLevel, TaskStatus};

pub const INSTRUCTION_HEADER: &str = "# Task Instruction:";
pub const CODE_HEADER: &str = "# Action code:";
pub const NEXT_MOVE: &str = "Please generate the next move according to the screenshot, task instruction and previous steps (if provided).";

pub const REFLECTOR: &str = "You review one step of a recorded computer task. You see the screenshot \
before the action (with a red marker and a zoomed patch at the action coordinate when the action has \
one) and the screenshot after it. Decide whether the action was correct, incorrect or redundant for \
the task. Reply with <verdict>correct|incorrect|redundant</verdict>, a <rationale>...</rationale> \
explaining the judgement, and for correct steps a <state_change>...</state_change> describing what \
the action changed on screen.";

pub const GENERATOR: &str = "You write the inner monologue of a computer-use agent for one step of a \
recorded task. You get the task, the previous steps with their reflections, the current screenshot \
(with a red marker at the action coordinate when there is one) and the code that was executed. Reply \
with <observation>...</observation> describing the relevant screen content, <thought>...</thought> \
reasoning about progress and the next move in first person, and <action>...</action> with one \
concise instruction that names the target without coordinates.";

pub const SUMMARIZER: &str =
    "You review a whole recorded computer task. Rewrite the user's goal as a \
precise instruction that matches what the recording actually does, and score the recording from 1 \
to 10 for how well it matches the goal, how efficient it is, and how difficult the task is. Reply \
with <refined_instruction>...</refined_instruction>, <score_alignment>n</score_alignment>, \
<score_efficiency>n</score_efficiency> and <score_difficulty>n</score_difficulty>.";

pub const PRIVACY: &str = "Classify how much private or sensitive information a recorded computer \
task exposes. Reply with <privacy>None|Low|Medium|High</privacy>.";

const AGENT_INTRO: &str =
    "You are a GUI agent. You are given a task and a screenshot of the screen. \
You need to perform a series of pyautogui actions to complete the task.";

const FORMAT_OBSERVATION: &str = "Observation:\n  - Describe the current screen: the active \
application and window, the key interface elements and any content relevant to the task.\n";

const FORMAT_THOUGHT: &str =
    "Thought:\n  - Assess progress so far, reflect on errors or unexpected \
results, and reason about the most logical next action and its expected outcome. Use first-person \
perspective.\n";

const FORMAT_ACTION: &str =
    "Action:\n  - Give one clear instruction. Describe the target by name, \
shape or position, never by coordinates. For typing or key presses state the expected outcome.\n";

const FORMAT_CODE: &str = "Finally, output the action as PyAutoGUI code, or call \
computer.triple_click(x, y), computer.wait() or computer.terminate(status) where pyautogui has no \
equivalent.";

/// Agent system prompt for the given level.
pub fn agent_system(level: CotLevel) -> String {
    let mut s = String::from(AGENT_INTRO);
    s.push_str("\nFor each step, provide your response in this format:\n");
    if level >= CotLevel::L3 {
        s.push_str(FORMAT_OBSERVATION);
    }
    if level >= CotLevel::L2 {
        s.push_str(FORMAT_THOUGHT);
    }
    s.push_str(FORMAT_ACTION);
    s.push_str(FORMAT_CODE);
    s
}

/// Plain-language description of an action, used when no synthesized
/// action text exists.
pub fn describe_action(a: &AgentAction) -> String {
    let at = |p: &cuakit_core::model::Point| format!("({:.4}, {:.4})", p.x, p.y);
    let button = |b: &Button| match b {
        Button::Left => "",
        Button::Right => "right-",
        Button::Middle => "middle-",
    };
    match a {
        AgentAction::Click { at: p, button: b } => match b {
            Button::Right => format!("Right-click at {}.", at(p)),
            _ => format!("Click at {}.", at(p)),
        },
        AgentAction::MiddleClick { at: p } => format!("Middle-click at {}.", at(p)),
        AgentAction::DoubleClick { at: p, button: b } => {
            format!("Double {}click at {}.", button(b), at(p))
        }
        AgentAction::TripleClick { at: p, button: b } => {
            format!("Triple {}click at {}.", button(b), at(p))
        }
        AgentAction::MoveTo { at: p } => format!("Move the pointer to {}.", at(p)),
        AgentAction::DragTo { at: p } => format!("Drag to {}.", at(p)),
        AgentAction::Scroll { clicks, .. } => {
            let dir = if *clicks > 0 { "up" } else { "down" };
            format!("Scroll {dir} by {}.", clicks.unsigned_abs())
        }
        AgentAction::HScroll { clicks, .. } => {
            let dir = if *clicks > 0 { "right" } else { "left" };
            format!("Scroll {dir} by {}.", clicks.unsigned_abs())
        }
        AgentAction::Write { text } => format!("Type {text:?}."),
        AgentAction::Press { key } => format!("Press {key}."),
        AgentAction::Hotkey { keys } => {
            let k: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
            format!("Press {}.", k.join("+"))
        }
        AgentAction::Wait => "Wait for the screen to update.".into(),
        AgentAction::Terminate { status } => match status {
            TaskStatus::Success => "Terminate the task and report success.".into(),
            TaskStatus::Failure => "Terminate the task and report failure.".into(),
        },
    }
}
