//! Synthetic corpus with a matching benchmark and seeded predictions.

use cuakit_bench::{BBox, BenchStep, BenchTask, Direction, GoldOption, PredictionRecord};
use cuakit_core::model::{AgentAction, Button, Point, TaskStatus};
use cuakit_core::synth::SynthDemo;
use cuakit_core::{render_action, Key};
use cuakit_cot::prompts::describe_action;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const HALF_BOX: f64 = 0.03;
/// Share of predicted steps that reproduce the gold action.
const HIT_RATE: f64 = 0.75;

#[derive(Debug, Serialize)]
pub struct Truth {
    pub id: String,
    pub actions: Vec<String>,
    /// Pre-movement start of each press-initiated action.
    pub t0: Vec<Option<u64>>,
}

fn bbox(p: Point) -> BBox {
    BBox::new(
        (p.x - HALF_BOX).max(0.0),
        (p.x + HALF_BOX).min(1.0),
        (p.y - HALF_BOX).max(0.0),
        (p.y + HALF_BOX).min(1.0),
    )
}

fn screen() -> BBox {
    BBox::new(0.0, 1.0, 0.0, 1.0)
}

fn scroll_box(at: Option<Point>) -> BBox {
    at.map_or_else(screen, bbox)
}

/// Gold option for a script action; `wait` has none.
pub fn gold(a: &AgentAction) -> Option<GoldOption> {
    Some(match a {
        AgentAction::Click { at, button } => match button {
            Button::Right => GoldOption::RightClick { bbox: bbox(*at) },
            Button::Middle => GoldOption::MiddleClick { bbox: bbox(*at) },
            Button::Left => GoldOption::Click { bbox: bbox(*at) },
        },
        AgentAction::MiddleClick { at } => GoldOption::MiddleClick { bbox: bbox(*at) },
        AgentAction::DoubleClick { at, .. } => GoldOption::DoubleClick { bbox: bbox(*at) },
        AgentAction::TripleClick { at, .. } => GoldOption::TripleClick { bbox: bbox(*at) },
        AgentAction::MoveTo { at } => GoldOption::MoveTo { bbox: bbox(*at) },
        AgentAction::DragTo { at } => GoldOption::DragTo { bbox: bbox(*at) },
        AgentAction::Scroll { clicks, at } => GoldOption::Scroll {
            direction: if *clicks > 0 {
                Direction::Up
            } else {
                Direction::Down
            },
            bbox: scroll_box(*at),
        },
        AgentAction::HScroll { clicks, at } => GoldOption::Scroll {
            direction: if *clicks > 0 {
                Direction::Right
            } else {
                Direction::Left
            },
            bbox: scroll_box(*at),
        },
        AgentAction::Write { text } => GoldOption::Write {
            text: text.clone(),
            max_normalized_edit_distance: 0.1,
            case_sensitive: true,
        },
        AgentAction::Press { key } => GoldOption::Press { key: key.clone() },
        AgentAction::Hotkey { keys } => GoldOption::Hotkey { keys: keys.clone() },
        AgentAction::Wait => return None,
        AgentAction::Terminate { status } => GoldOption::Terminate { status: *status },
    })
}

fn far(p: Point) -> Point {
    let shift = |v: f64| ((v + 0.5) % 1.0 * 10_000.0).round() / 10_000.0;
    Point::new(shift(p.x), shift(p.y))
}

/// A prediction that misses the gold action.
fn miss(a: &AgentAction) -> AgentAction {
    match a {
        AgentAction::Click { at, button } => AgentAction::Click {
            at: far(*at),
            button: *button,
        },
        AgentAction::DoubleClick { at, button } => AgentAction::DoubleClick {
            at: far(*at),
            button: *button,
        },
        AgentAction::TripleClick { at, button } => AgentAction::TripleClick {
            at: far(*at),
            button: *button,
        },
        AgentAction::MiddleClick { at } => AgentAction::MiddleClick { at: far(*at) },
        AgentAction::MoveTo { at } => AgentAction::MoveTo { at: far(*at) },
        AgentAction::DragTo { at } => AgentAction::DragTo { at: far(*at) },
        AgentAction::Write { text } => AgentAction::Write {
            text: format!("{text} and more text"),
        },
        AgentAction::Terminate { status } => AgentAction::Terminate {
            status: match status {
                TaskStatus::Success => TaskStatus::Failure,
                TaskStatus::Failure => TaskStatus::Success,
            },
        },
        AgentAction::Press { key } if key.as_str() == "esc" => AgentAction::Press {
            key: Key::parse("enter").expect("key"),
        },
        _ => AgentAction::Press {
            key: Key::parse("esc").expect("key"),
        },
    }
}

/// Scrolls are predicted with an explicit position so they can be located.
fn positioned(a: &AgentAction) -> AgentAction {
    match a {
        AgentAction::Scroll { clicks, at: None } => AgentAction::Scroll {
            clicks: *clicks,
            at: Some(Point::new(0.5, 0.5)),
        },
        AgentAction::HScroll { clicks, at: None } => AgentAction::HScroll {
            clicks: *clicks,
            at: Some(Point::new(0.5, 0.5)),
        },
        other => other.clone(),
    }
}

fn response(a: &AgentAction) -> String {
    format!(
        "## Thought:\nThe next step follows from the instruction.\n## Action:\n{}\n## Code:\n```python\n{}\n```",
        describe_action(a),
        render_action(a)
    )
}

/// Actions of a synthetic demo including the final terminate step.
pub fn full_script(s: &SynthDemo) -> Vec<AgentAction> {
    let mut actions: Vec<AgentAction> = s
        .script
        .iter()
        .filter(|a| **a != AgentAction::Wait)
        .cloned()
        .collect();
    actions.push(AgentAction::Terminate {
        status: s.demo.status.unwrap_or(TaskStatus::Success),
    });
    actions
}

pub fn bench_task(s: &SynthDemo, demos_dir: &str) -> BenchTask {
    let frame_at = |t: u64| {
        s.demo
            .frames
            .iter()
            .rev()
            .find(|f| f.t <= t)
            .unwrap_or(&s.demo.frames[0])
    };
    let mut steps = Vec::new();
    for (a, truth) in s.script.iter().zip(&s.truth) {
        let Some(opt) = gold(a) else { continue };
        let start = truth.t0.unwrap_or(s.demo.events[truth.events.0].t);
        let f = frame_at(start);
        steps.push(BenchStep {
            screenshot: format!("{demos_dir}/{}/{}", s.demo.id, f.file),
            options: vec![opt],
        });
    }
    let last = s.demo.frames.last().expect("frames");
    steps.push(BenchStep {
        screenshot: format!("{demos_dir}/{}/{}", s.demo.id, last.file),
        options: vec![gold(full_script(s).last().expect("terminate")).expect("terminate option")],
    });
    BenchTask {
        id: s.demo.id.clone(),
        instruction: s.demo.instruction.clone(),
        os: s.demo.os,
        resolution: s.demo.resolution,
        steps,
    }
}

pub fn predictions(s: &SynthDemo, seed: u64, index: u64) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_9ced);
    rng.set_stream(index);
    full_script(s)
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let pred = if rng.gen_bool(HIT_RATE) {
                positioned(a)
            } else {
                miss(a)
            };
            PredictionRecord {
                task_id: s.demo.id.clone(),
                step: i,
                response: response(&pred),
            }
        })
        .collect()
}

pub fn truth(s: &SynthDemo) -> Truth {
    Truth {
        id: s.demo.id.clone(),
        actions: s.script.iter().map(render_action).collect(),
        t0: s.truth.iter().map(|t| t.t0).collect(),
    }
}
