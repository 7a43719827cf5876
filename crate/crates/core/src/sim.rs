//! Deterministic desktop simulator.
//!
//! Both reduced actions and raw events drive the same state machine, so a
//! reduction is correct when both replays end in equal states. Positions
//! are compared on the 1e-4 grid.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::keys::{canonical_hotkey, Key};
use crate::model::{AgentAction, Button, EventKind, GridPoint, RawEvent, TaskStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClickRecord {
    Press {
        button: Button,
        at: GridPoint,
    },
    Drag {
        from: Option<GridPoint>,
        to: GridPoint,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimState {
    pub pointer: Option<GridPoint>,
    /// Text field with keyboard focus; set by left clicks.
    pub focus: Option<GridPoint>,
    pub buffers: BTreeMap<Option<GridPoint>, String>,
    /// Accumulated (horizontal, vertical) wheel counts.
    pub scroll: (i64, i64),
    pub held_modifiers: BTreeSet<Key>,
    pub clicks: Vec<ClickRecord>,
    /// Non-text key presses and chords, canonical order.
    pub chords: Vec<Vec<Key>>,
    pub terminated: Option<TaskStatus>,
}

/// Replay outcome: the state plus notes about interactions the simulator
/// ignored. Warnings never take part in state equality.
#[derive(Debug, Clone, Default)]
pub struct Replay {
    pub state: SimState,
    pub warnings: Vec<String>,
}

impl SimState {
    fn type_char(&mut self, c: char) {
        self.buffers.entry(self.focus).or_default().push(c);
    }

    fn chord(&mut self, keys: Vec<Key>) {
        if keys.len() == 1 && keys[0].as_str() == "backspace" {
            self.buffers.entry(self.focus).or_default().pop();
        }
        self.chords.push(keys);
    }

    fn press(&mut self, button: Button, at: GridPoint, times: usize) {
        self.pointer = Some(at);
        if button == Button::Left {
            self.focus = Some(at);
        }
        for _ in 0..times {
            self.clicks.push(ClickRecord::Press { button, at });
        }
    }

    fn wheel(&mut self, dx: i64, dy: i64) {
        self.scroll.0 += dx;
        self.scroll.1 += dy;
    }
}

/// Apply reduced actions.
pub fn replay(actions: &[AgentAction], initial: SimState) -> Replay {
    let mut r = Replay {
        state: initial,
        warnings: Vec::new(),
    };
    for (i, a) in actions.iter().enumerate() {
        let s = &mut r.state;
        if s.terminated.is_some() {
            r.warnings
                .push(format!("action {i} after terminate ignored"));
            continue;
        }
        match a {
            AgentAction::Click { at, button } => s.press(*button, at.grid(), 1),
            AgentAction::MiddleClick { at } => s.press(Button::Middle, at.grid(), 1),
            AgentAction::DoubleClick { at, button } => s.press(*button, at.grid(), 2),
            AgentAction::TripleClick { at, button } => s.press(*button, at.grid(), 3),
            AgentAction::MoveTo { at } => s.pointer = Some(at.grid()),
            AgentAction::DragTo { at } => {
                if s.pointer.is_none() {
                    r.warnings
                        .push(format!("action {i}: drag from unknown position"));
                }
                s.clicks.push(ClickRecord::Drag {
                    from: s.pointer,
                    to: at.grid(),
                });
                s.pointer = Some(at.grid());
            }
            AgentAction::Scroll { clicks, at } | AgentAction::HScroll { clicks, at } => {
                if let Some(p) = at {
                    s.pointer = Some(p.grid());
                }
                if matches!(a, AgentAction::Scroll { .. }) {
                    s.wheel(0, *clicks as i64);
                } else {
                    s.wheel(*clicks as i64, 0);
                }
            }
            AgentAction::Write { text } => {
                for c in text.chars() {
                    s.type_char(c);
                }
            }
            AgentAction::Press { key } => s.chord(vec![key.clone()]),
            AgentAction::Hotkey { keys } => s.chord(canonical_hotkey(keys.iter().cloned())),
            AgentAction::Wait => {}
            AgentAction::Terminate { status } => s.terminated = Some(*status),
        }
    }
    r
}

#[derive(Debug, Clone)]
struct RawHold {
    button: Button,
    at: GridPoint,
}

/// Replay raw events one at a time through the same state machine.
pub fn replay_events(events: &[RawEvent], initial: SimState) -> Replay {
    let mut r = Replay {
        state: initial,
        warnings: Vec::new(),
    };
    let mut holds: Vec<RawHold> = Vec::new();
    // Modifiers currently down and whether anything used them.
    let mut mod_used: BTreeMap<Key, bool> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        let s = &mut r.state;
        let pos = e.position().map(|p| p.grid());
        match e.kind {
            EventKind::Move => {
                if pos.is_some() {
                    s.pointer = pos;
                }
            }
            EventKind::ButtonDown => {
                let (Some(at), Some(button)) = (pos, e.button) else {
                    r.warnings
                        .push(format!("event {i}: incomplete button_down"));
                    continue;
                };
                s.pointer = Some(at);
                holds.push(RawHold { button, at });
                for used in mod_used.values_mut() {
                    *used = true;
                }
            }
            EventKind::ButtonUp => {
                let (Some(at), Some(button)) = (pos, e.button) else {
                    r.warnings.push(format!("event {i}: incomplete button_up"));
                    continue;
                };
                let Some(k) = holds.iter().rposition(|h| h.button == button) else {
                    r.warnings.push(format!("event {i}: release without press"));
                    s.pointer = Some(at);
                    continue;
                };
                let hold = holds.remove(k);
                if hold.at == at {
                    s.press(button, at, 1);
                } else {
                    s.clicks.push(ClickRecord::Drag {
                        from: Some(hold.at),
                        to: at,
                    });
                    s.pointer = Some(at);
                }
            }
            EventKind::Wheel => {
                if pos.is_some() {
                    s.pointer = pos;
                }
                s.wheel(e.dx.unwrap_or(0) as i64, e.dy.unwrap_or(0) as i64);
            }
            EventKind::KeyDown => {
                let Some(key) = e.key.clone() else {
                    r.warnings.push(format!("event {i}: key_down without key"));
                    continue;
                };
                if key.is_modifier() {
                    s.held_modifiers.insert(key.clone());
                    mod_used.entry(key).or_insert(false);
                    continue;
                }
                let shift = s.held_modifiers.contains(&Key::shift());
                let others = s.held_modifiers.iter().any(|m| *m != Key::shift());
                for used in mod_used.values_mut() {
                    *used = true;
                }
                let typed = if shift {
                    key.shifted_char()
                } else {
                    key.printable_char()
                };
                match typed {
                    Some(c) if !others => s.type_char(c),
                    _ => {
                        let chord = canonical_hotkey(s.held_modifiers.iter().cloned().chain([key]));
                        s.chord(chord);
                    }
                }
            }
            EventKind::KeyUp => {
                let Some(key) = e.key.clone() else {
                    r.warnings.push(format!("event {i}: key_up without key"));
                    continue;
                };
                if key.is_modifier() {
                    s.held_modifiers.remove(&key);
                    if mod_used.remove(&key) == Some(false) {
                        s.chord(vec![key]);
                    }
                }
            }
        }
    }
    r
}
