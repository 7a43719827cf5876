//! Event-stream reduction: raw input events to the compact action sequence.
//!
//! The reducer is a single forward pass. Open gestures (a typing run, a
//! scroll run, a multi-click group, a held button) are extended while the
//! next event is compatible and flushed otherwise. Every event is assigned
//! to the unit it belongs to; spans are derived from those assignments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keys::{canonical_hotkey, Key};
use crate::model::{AgentAction, Button, EventKind, GridPoint, Millis, Point, RawEvent, Span};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducerConfig {
    /// Max down-to-down interval inside a multi-click (inclusive).
    pub double_click_window: Millis,
    pub multi_click_radius: f64,
    pub drag_min_distance: f64,
    pub scroll_merge_gap: Millis,
    pub typing_merge_gap: Millis,
}

impl Default for ReducerConfig {
    fn default() -> Self {
        ReducerConfig {
            double_click_window: 500,
            multi_click_radius: 0.01,
            drag_min_distance: 0.005,
            scroll_merge_gap: 1000,
            typing_merge_gap: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} must lie in (0, 1)")]
    Range(&'static str),
}

impl ReducerConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("double_click_window", self.double_click_window),
            ("scroll_merge_gap", self.scroll_merge_gap),
            ("typing_merge_gap", self.typing_merge_gap),
        ] {
            if v == 0 {
                return Err(ConfigError::NonPositive(name));
            }
        }
        for (name, v) in [
            ("multi_click_radius", self.multi_click_radius),
            ("drag_min_distance", self.drag_min_distance),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::Range(name));
            }
        }
        Ok(())
    }
}

/// Reduction output: actions with their event spans, plus the indices of
/// events not covered by any span (hover moves, stray releases).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reduced {
    pub steps: Vec<(AgentAction, Span)>,
    pub dropped: Vec<usize>,
}

impl Reduced {
    pub fn actions(&self) -> Vec<AgentAction> {
        self.steps.iter().map(|(a, _)| a.clone()).collect()
    }
}

type UnitId = usize;

struct TypingRun {
    id: UnitId,
    text: String,
    last_t: Millis,
}

struct ScrollRun {
    id: UnitId,
    vertical: bool,
    clicks: i32,
    at: Point,
    last_t: Millis,
}

struct ClickGroup {
    id: UnitId,
    button: Button,
    count: u8,
    anchor: Point,
    at: Point,
    last_down_t: Millis,
}

struct Hold {
    button: Button,
    down_idx: usize,
    at: Point,
    t: Millis,
    moves: Vec<usize>,
    /// Continues the open click group rather than starting a new one.
    continues_group: bool,
}

struct HeldKey {
    down_idx: usize,
    /// Unit that most recently consumed this modifier.
    used_by: Option<UnitId>,
}

struct Reducer<'a> {
    cfg: &'a ReducerConfig,
    units: Vec<Option<AgentAction>>,
    owner: Vec<Option<UnitId>>,
    typing: Option<TypingRun>,
    scroll: Option<ScrollRun>,
    group: Option<ClickGroup>,
    hold: Option<Hold>,
    held: BTreeMap<Key, HeldKey>,
    /// Unit that consumed each currently pressed non-modifier key.
    key_owner: BTreeMap<Key, UnitId>,
    /// Pointer position implied by the actions emitted so far.
    pointer: Option<GridPoint>,
}

impl<'a> Reducer<'a> {
    fn new(cfg: &'a ReducerConfig, n: usize) -> Self {
        Reducer {
            cfg,
            units: Vec::new(),
            owner: vec![None; n],
            typing: None,
            scroll: None,
            group: None,
            hold: None,
            held: BTreeMap::new(),
            key_owner: BTreeMap::new(),
            pointer: None,
        }
    }

    fn alloc(&mut self) -> UnitId {
        self.units.push(None);
        self.units.len() - 1
    }

    fn emit(&mut self, action: AgentAction, events: &[usize]) -> UnitId {
        let id = self.alloc();
        self.units[id] = Some(action);
        for &e in events {
            self.owner[e] = Some(id);
        }
        id
    }

    fn assign(&mut self, idx: usize, id: UnitId) {
        self.owner[idx] = Some(id);
    }

    fn flush_typing(&mut self) {
        if let Some(run) = self.typing.take() {
            self.units[run.id] = Some(AgentAction::Write { text: run.text });
        }
    }

    fn flush_scroll(&mut self) {
        if let Some(run) = self.scroll.take() {
            let at = Some(run.at);
            self.units[run.id] = Some(if run.vertical {
                AgentAction::Scroll {
                    clicks: run.clicks,
                    at,
                }
            } else {
                AgentAction::HScroll {
                    clicks: run.clicks,
                    at,
                }
            });
            self.pointer = Some(run.at.grid());
        }
    }

    fn flush_group(&mut self) {
        if let Some(g) = self.group.take() {
            let at = g.at;
            let button = g.button;
            self.units[g.id] = Some(match (g.count, button) {
                (1, Button::Middle) => AgentAction::MiddleClick { at },
                (1, _) => AgentAction::Click { at, button },
                (2, _) => AgentAction::DoubleClick { at, button },
                _ => AgentAction::TripleClick { at, button },
            });
            self.pointer = Some(at.grid());
        }
    }

    fn flush_all(&mut self) {
        self.flush_typing();
        self.flush_scroll();
        self.flush_group();
    }

    fn on_move(&mut self, idx: usize) {
        match &mut self.hold {
            Some(h) => h.moves.push(idx),
            None => {
                // Hover samples are dropped but still end typing and scroll runs.
                self.flush_typing();
                self.flush_scroll();
            }
        }
    }

    fn on_button_down(&mut self, idx: usize, e: &RawEvent, at: Point, button: Button) {
        self.flush_typing();
        self.flush_scroll();
        if let Some(h) = self.hold.take() {
            // A second button pressed during a hold ends the first gesture
            // as a click at its press point.
            let start = h.at;
            self.finish_hold(h, start, None);
        }
        let continues = match &self.group {
            Some(g) => {
                g.button == button
                    && g.count < 3
                    && e.t.saturating_sub(g.last_down_t) <= self.cfg.double_click_window
                    && g.anchor.distance(at) <= self.cfg.multi_click_radius
            }
            None => false,
        };
        if !continues {
            self.flush_group();
        }
        self.hold = Some(Hold {
            button,
            down_idx: idx,
            at,
            t: e.t,
            moves: Vec::new(),
            continues_group: continues,
        });
    }

    fn on_button_up(&mut self, idx: usize, at: Point, button: Button) {
        match self.hold.take() {
            Some(h) if h.button == button => self.finish_hold(h, at, Some(idx)),
            other => self.hold = other,
        }
    }

    fn finish_hold(&mut self, h: Hold, up_at: Point, up_idx: Option<usize>) {
        if h.at.distance(up_at) >= self.cfg.drag_min_distance && up_idx.is_some() {
            self.flush_group();
            let mut drag_events = h.moves.clone();
            drag_events.extend(up_idx);
            if self.pointer != Some(h.at.grid()) {
                self.emit(AgentAction::MoveTo { at: h.at }, &[h.down_idx]);
            } else {
                drag_events.push(h.down_idx);
            }
            let id = self.emit(AgentAction::DragTo { at: up_at }, &drag_events);
            self.consume_modifiers(id);
            self.pointer = Some(up_at.grid());
            return;
        }
        let id = if h.continues_group {
            let g = self.group.as_mut().expect("group open");
            g.count += 1;
            g.last_down_t = h.t;
            g.id
        } else {
            let id = self.alloc();
            self.group = Some(ClickGroup {
                id,
                button: h.button,
                count: 1,
                anchor: h.at,
                at: up_at,
                last_down_t: h.t,
            });
            id
        };
        self.assign(h.down_idx, id);
        for m in h.moves {
            self.assign(m, id);
        }
        if let Some(u) = up_idx {
            self.assign(u, id);
        }
        // Held modifiers are consumed by the gesture and produce no action.
        self.consume_modifiers(id);
    }

    fn on_wheel(&mut self, idx: usize, e: &RawEvent, at: Point) {
        self.flush_typing();
        self.flush_group();
        let dx = e.dx.unwrap_or(0);
        let dy = e.dy.unwrap_or(0);
        let vertical = dy.unsigned_abs() >= dx.unsigned_abs();
        let delta = if vertical { dy } else { dx };
        if delta == 0 {
            return;
        }
        if let Some(run) = &mut self.scroll {
            if run.vertical == vertical
                && run.clicks.signum() == delta.signum()
                && e.t.saturating_sub(run.last_t) <= self.cfg.scroll_merge_gap
            {
                run.clicks = run.clicks.saturating_add(delta);
                run.last_t = e.t;
                let id = run.id;
                self.assign(idx, id);
                return;
            }
        }
        self.flush_scroll();
        let id = self.alloc();
        self.assign(idx, id);
        self.scroll = Some(ScrollRun {
            id,
            vertical,
            clicks: delta,
            at,
            last_t: e.t,
        });
    }

    fn on_key_down(&mut self, idx: usize, e: &RawEvent, key: Key) {
        self.flush_scroll();
        self.flush_group();
        if key.is_modifier() {
            if key != Key::shift() {
                self.flush_typing();
            }
            // Auto-repeat of a held modifier is left to span coverage.
            self.held.entry(key).or_insert(HeldKey {
                down_idx: idx,
                used_by: None,
            });
            return;
        }
        let shift_held = self.held.contains_key(&Key::shift());
        let chord_mods: Vec<Key> = self
            .held
            .keys()
            .filter(|k| **k != Key::shift())
            .cloned()
            .collect();
        let id = if !chord_mods.is_empty() {
            self.flush_typing();
            let keys = canonical_hotkey(self.held.keys().cloned().chain([key.clone()]));
            let id = self.emit(AgentAction::Hotkey { keys }, &[idx]);
            self.consume_modifiers(id);
            id
        } else if let Some(c) = typed_char(&key, shift_held) {
            let continue_run = self
                .typing
                .as_ref()
                .is_some_and(|r| e.t.saturating_sub(r.last_t) <= self.cfg.typing_merge_gap);
            if !continue_run {
                self.flush_typing();
                let id = self.alloc();
                self.typing = Some(TypingRun {
                    id,
                    text: String::new(),
                    last_t: e.t,
                });
            }
            let run = self.typing.as_mut().expect("typing run");
            run.text.push(c);
            run.last_t = e.t;
            let id = run.id;
            self.assign(idx, id);
            if shift_held {
                self.consume_modifiers(id);
            }
            id
        } else {
            self.flush_typing();
            let action = if shift_held {
                AgentAction::Hotkey {
                    keys: canonical_hotkey([Key::shift(), key.clone()]),
                }
            } else {
                AgentAction::Press { key: key.clone() }
            };
            let id = self.emit(action, &[idx]);
            self.consume_modifiers(id);
            id
        };
        self.key_owner.insert(key, id);
    }

    fn consume_modifiers(&mut self, id: UnitId) {
        let downs: Vec<usize> = self.held.values().map(|h| h.down_idx).collect();
        for d in downs {
            if self.owner[d].is_none() {
                self.owner[d] = Some(id);
            }
        }
        for h in self.held.values_mut() {
            h.used_by = Some(id);
        }
    }

    fn on_key_up(&mut self, idx: usize, key: Key) {
        if key.is_modifier() {
            let Some(h) = self.held.remove(&key) else {
                return;
            };
            match h.used_by {
                Some(id) => self.assign(idx, id),
                None => {
                    // A lone tap.
                    self.flush_all();
                    self.emit(AgentAction::Press { key }, &[h.down_idx, idx]);
                }
            }
            return;
        }
        if let Some(id) = self.key_owner.remove(&key) {
            self.assign(idx, id);
        }
    }

    fn finish(mut self, events: &[RawEvent]) -> Reduced {
        // A hold clipped before its release and modifiers never released
        // produce no action.
        self.flush_all();
        let n = events.len();
        let mut first: Vec<Option<(usize, usize)>> = vec![None; self.units.len()];
        for (i, o) in self.owner.iter().enumerate() {
            if let Some(id) = o {
                let slot = &mut first[*id];
                *slot = Some(match *slot {
                    None => (i, i),
                    Some((a, b)) => (a.min(i), b.max(i)),
                });
            }
        }
        let mut items: Vec<(usize, usize, AgentAction)> = Vec::new();
        for (id, unit) in self.units.into_iter().enumerate() {
            if let (Some(action), Some((a, b))) = (unit, first[id]) {
                items.push((a, b, action));
            }
        }
        items.sort_by_key(|(a, _, _)| *a);
        let mut steps = Vec::with_capacity(items.len());
        let mut prev_last: Option<usize> = None;
        for (a, b, action) in items {
            let start = match prev_last {
                Some(p) => a.max(p + 1),
                None => a,
            };
            if start >= n {
                continue;
            }
            let end = b.max(start);
            steps.push((action, Span::new(start, end)));
            prev_last = Some(end);
        }
        let mut covered = vec![false; n];
        for (_, s) in &steps {
            for c in &mut covered[s.first..=s.last] {
                *c = true;
            }
        }
        let dropped = (0..n).filter(|i| !covered[*i]).collect();
        Reduced { steps, dropped }
    }
}

fn typed_char(key: &Key, shift: bool) -> Option<char> {
    if shift {
        key.shifted_char()
    } else {
        key.printable_char()
    }
}

/// Reduce an event stream. Events missing the fields their kind needs are
/// skipped (validation reports them).
pub fn reduce_events(events: &[RawEvent], cfg: &ReducerConfig) -> Reduced {
    let mut r = Reducer::new(cfg, events.len());
    for (idx, e) in events.iter().enumerate() {
        match e.kind {
            EventKind::Move => r.on_move(idx),
            EventKind::ButtonDown => {
                if let (Some(at), Some(b)) = (e.position(), e.button) {
                    r.on_button_down(idx, e, at, b);
                }
            }
            EventKind::ButtonUp => {
                if let (Some(at), Some(b)) = (e.position(), e.button) {
                    r.on_button_up(idx, at, b);
                }
            }
            EventKind::Wheel => {
                if let Some(at) = e.position() {
                    r.on_wheel(idx, e, at);
                }
            }
            EventKind::KeyDown => {
                if let Some(k) = &e.key {
                    r.on_key_down(idx, e, k.clone());
                }
            }
            EventKind::KeyUp => {
                if let Some(k) = &e.key {
                    r.on_key_up(idx, k.clone());
                }
            }
        }
    }
    r.finish(events)
}

pub fn reduce(demo: &crate::model::RawDemonstration, cfg: &ReducerConfig) -> Reduced {
    reduce_events(&demo.events, cfg)
}
