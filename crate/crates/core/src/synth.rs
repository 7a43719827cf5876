//! Seeded synthetic demonstrations with known ground truth.
//!
//! A random canonical action script is lowered to a jittered raw event
//! stream and a frame sequence whose screen changes shortly after every
//! action (plus injected distractor changes). The script, the pre-movement
//! start of every press and the change times are kept as ground truth.

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interchange::{write_demo, InterchangeError, FRAME_DIR};
use crate::keys::{canonical_hotkey, key_for_char, Key};
use crate::model::{
    AgentAction, Button, Frame, Millis, Os, Point, RawDemonstration, RawEvent, TaskStatus,
};

pub const FRAME_W: u32 = 128;
pub const FRAME_H: u32 = 72;
pub const FRAME_INTERVAL: Millis = 100;
/// Delay between an action's last event and the screen reacting.
pub const REACTION_DELAY: Millis = 150;

const PRINTABLE: &str =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,-_@!?:/()";
const PRESS_KEYS: &[&str] = &[
    "enter",
    "tab",
    "esc",
    "backspace",
    "delete",
    "home",
    "end",
    "pageup",
    "pagedown",
    "up",
    "down",
    "left",
    "right",
    "f2",
    "f5",
    "f11",
    "win",
];
const CHORD_KEYS: &[&str] = &[
    "a", "c", "v", "x", "z", "s", "t", "w", "f", "n", "l", "1", "tab", "enter", "left", "right",
    "delete", "f4",
];
const CHORD_MODS: &[&str] = &["ctrl", "alt", "shift", "cmd", "win"];

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn key(name: &str) -> Key {
    Key::parse(name).expect("static key name")
}

fn grid_coord(rng: &mut impl Rng) -> f64 {
    rng.gen_range(200..=9800) as f64 / 10_000.0
}

fn grid_point(rng: &mut impl Rng) -> Point {
    Point::new(grid_coord(rng), grid_coord(rng))
}

fn far_point(rng: &mut impl Rng, from: Option<Point>, min: f64) -> Point {
    loop {
        let p = grid_point(rng);
        if from.map_or(true, |f| f.distance(p) >= min) {
            return p;
        }
    }
}

/// Random canonical action script of `len` actions (no terminate). Drags
/// appear as `moveTo` + `dragTo` pairs and count as two actions.
pub fn random_script(rng: &mut impl Rng, len: usize) -> Vec<AgentAction> {
    let mut out: Vec<AgentAction> = Vec::with_capacity(len + 1);
    let mut pointer: Option<Point> = None;
    while out.len() < len {
        let last_write = matches!(out.last(), Some(AgentAction::Write { .. }));
        let roll = rng.gen_range(0..100);
        let action = match roll {
            0..=24 => {
                let at = grid_point(rng);
                let button = if rng.gen_bool(0.15) {
                    Button::Right
                } else {
                    Button::Left
                };
                AgentAction::Click { at, button }
            }
            25..=27 => AgentAction::MiddleClick {
                at: grid_point(rng),
            },
            28..=35 => AgentAction::DoubleClick {
                at: grid_point(rng),
                button: Button::Left,
            },
            36..=39 => AgentAction::TripleClick {
                at: grid_point(rng),
                button: Button::Left,
            },
            40..=47 if out.len() + 2 <= len => {
                let from = far_point(rng, pointer, 0.05);
                let to = far_point(rng, Some(from), 0.05);
                out.push(AgentAction::MoveTo { at: from });
                pointer = Some(to);
                out.push(AgentAction::DragTo { at: to });
                continue;
            }
            48..=55 => {
                let mut clicks = rng.gen_range(1..=10);
                if rng.gen_bool(0.5) {
                    clicks = -clicks;
                }
                let at = Some(grid_point(rng));
                if rng.gen_bool(0.8) {
                    AgentAction::Scroll { clicks, at }
                } else {
                    AgentAction::HScroll { clicks, at }
                }
            }
            56..=74 if !last_write => {
                let chars: Vec<char> = PRINTABLE.chars().collect();
                let n = rng.gen_range(1..=12);
                let text: String = (0..n).map(|_| *chars.choose(rng).expect("chars")).collect();
                AgentAction::Write { text }
            }
            75..=86 => AgentAction::Press {
                key: key(PRESS_KEYS.choose(rng).expect("keys")),
            },
            87..=99 => {
                let n_mods = if rng.gen_bool(0.75) { 1 } else { 2 };
                let mods: Vec<&str> = CHORD_MODS.choose_multiple(rng, n_mods).cloned().collect();
                let k = key(CHORD_KEYS.choose(rng).expect("keys"));
                if mods == ["shift"] && k.printable_char().is_some() {
                    // shift + printable is typing, not a chord.
                    continue;
                }
                let keys = canonical_hotkey(mods.iter().map(|m| key(m)).chain([k]));
                AgentAction::Hotkey { keys }
            }
            _ => continue,
        };
        if let Some(p) = action.point() {
            pointer = Some(p);
        }
        out.push(action);
    }
    out
}

/// Ground truth recorded while lowering one script action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTruth {
    /// Index range of the action's events in the raw stream.
    pub events: (usize, usize),
    /// Press time for press-initiated actions.
    pub press_t: Option<Millis>,
    /// Start of the pre-movement phase (equals `press_t` without movement).
    pub t0: Option<Millis>,
    pub end_t: Millis,
}

struct Lowering<'r, R: Rng> {
    rng: &'r mut R,
    events: Vec<RawEvent>,
    t: Millis,
    pointer: Option<Point>,
}

impl<R: Rng> Lowering<'_, R> {
    fn step(&mut self, lo: Millis, hi: Millis) -> Millis {
        self.t += self.rng.gen_range(lo..=hi);
        self.t
    }

    /// Jittered path to `to`; the final sample lands exactly on it.
    fn move_to(&mut self, to: Point) -> Option<Millis> {
        let from = match self.pointer {
            Some(p) => p,
            None => grid_point(self.rng),
        };
        let n = self.rng.gen_range(3..=12);
        let mut first = None;
        for k in 1..=n {
            let t = self.step(16, 40);
            first.get_or_insert(t);
            let p = if k == n {
                to
            } else {
                let f = k as f64 / n as f64;
                let jx = self.rng.gen_range(-0.01..0.01);
                let jy = self.rng.gen_range(-0.01..0.01);
                Point::new(
                    (from.x + (to.x - from.x) * f + jx).clamp(0.0, 1.0),
                    (from.y + (to.y - from.y) * f + jy).clamp(0.0, 1.0),
                )
            };
            self.events.push(RawEvent::mouse_move(t, p));
        }
        self.pointer = Some(to);
        first
    }

    fn approach(&mut self, to: Point, allow_teleport: bool) -> Option<Millis> {
        if allow_teleport && self.rng.gen_bool(0.15) {
            self.pointer = Some(to);
            return None;
        }
        self.move_to(to)
    }

    fn click(&mut self, at: Point, button: Button, times: usize) -> (Millis, Option<Millis>) {
        let moved = self.approach(at, true);
        let press_t = self.step(16, 40);
        for k in 0..times {
            if k > 0 {
                self.step(80, 200);
            }
            let down_t = self.t;
            self.events.push(RawEvent::button(down_t, at, button, true));
            let up_t = self.step(50, 120);
            self.events.push(RawEvent::button(up_t, at, button, false));
        }
        (press_t, Some(moved.unwrap_or(press_t)))
    }

    fn tap(&mut self, k: &Key) {
        let t = self.step(30, 150);
        self.events.push(RawEvent::key(t, k.clone(), true));
        let t = self.step(30, 90);
        self.events.push(RawEvent::key(t, k.clone(), false));
    }

    fn write(&mut self, text: &str) {
        let mut pending_up: Option<Key> = None;
        for c in text.chars() {
            let (k, shifted) = key_for_char(c).expect("typable character");
            if shifted {
                if let Some(p) = pending_up.take() {
                    let t = self.step(10, 40);
                    self.events.push(RawEvent::key(t, p, false));
                }
                let shift = Key::shift();
                let t = self.step(40, 200);
                self.events.push(RawEvent::key(t, shift.clone(), true));
                self.tap(&k);
                let t = self.step(10, 60);
                self.events.push(RawEvent::key(t, shift, false));
                continue;
            }
            let t = self.step(40, 200);
            // Rollover: the next key goes down before the previous one is up.
            let rollover = pending_up.as_ref().is_some_and(|p| *p != k);
            if !rollover {
                if let Some(p) = pending_up.take() {
                    self.events.push(RawEvent::key(t, p, false));
                    self.step(5, 30);
                }
            }
            self.events.push(RawEvent::key(self.t, k.clone(), true));
            if let Some(p) = pending_up.take() {
                let t = self.step(10, 40);
                self.events.push(RawEvent::key(t, p, false));
            }
            if self.rng.gen_bool(0.3) {
                pending_up = Some(k);
            } else {
                let t = self.step(30, 90);
                self.events.push(RawEvent::key(t, k, false));
            }
        }
        if let Some(p) = pending_up {
            let t = self.step(20, 90);
            self.events.push(RawEvent::key(t, p, false));
        }
    }

    fn scroll(&mut self, clicks: i32, at: Point, vertical: bool) {
        self.approach(at, true);
        let sign = clicks.signum();
        let mut left = clicks.abs();
        let mut first = true;
        while left > 0 {
            let chunk = self.rng.gen_range(1..=left.min(3));
            left -= chunk;
            let t = if first {
                self.step(16, 60)
            } else {
                self.step(30, 120)
            };
            first = false;
            let (dx, dy) = if vertical {
                (0, sign * chunk)
            } else {
                (sign * chunk, 0)
            };
            self.events.push(RawEvent::wheel(t, at, dx, dy));
        }
        self.pointer = Some(at);
    }
}

/// Lower a script to raw events. Returns the events and per-action truth.
pub fn lower_script(
    rng: &mut impl Rng,
    script: &[AgentAction],
) -> (Vec<RawEvent>, Vec<ActionTruth>) {
    let mut lw = Lowering {
        rng,
        events: Vec::new(),
        t: 0,
        pointer: None,
    };
    lw.t = lw.rng.gen_range(500..=1000);
    let mut truth = Vec::with_capacity(script.len());
    let mut i = 0;
    while i < script.len() {
        let first_event = lw.events.len();
        let mut press = None;
        match &script[i] {
            AgentAction::Click { at, button } => press = Some(lw.click(*at, *button, 1)),
            AgentAction::MiddleClick { at } => press = Some(lw.click(*at, Button::Middle, 1)),
            AgentAction::DoubleClick { at, button } => press = Some(lw.click(*at, *button, 2)),
            AgentAction::TripleClick { at, button } => press = Some(lw.click(*at, *button, 3)),
            AgentAction::MoveTo { at } => {
                let Some(AgentAction::DragTo { at: to }) = script.get(i + 1) else {
                    panic!("moveTo must precede dragTo in synthetic scripts");
                };
                let moved = lw.approach(*at, false);
                let press_t = lw.step(16, 40);
                lw.events
                    .push(RawEvent::button(press_t, *at, Button::Left, true));
                truth.push(ActionTruth {
                    events: (first_event, lw.events.len() - 1),
                    press_t: Some(press_t),
                    t0: Some(moved.unwrap_or(press_t)),
                    end_t: press_t,
                });
                let drag_first = lw.events.len();
                lw.move_to(*to);
                let up_t = lw.step(16, 40);
                lw.events
                    .push(RawEvent::button(up_t, *to, Button::Left, false));
                truth.push(ActionTruth {
                    events: (drag_first, lw.events.len() - 1),
                    press_t: None,
                    t0: None,
                    end_t: up_t,
                });
                lw.step(2100, 3000);
                i += 2;
                continue;
            }
            AgentAction::DragTo { .. } => panic!("dragTo without moveTo in synthetic script"),
            AgentAction::Scroll { clicks, at } | AgentAction::HScroll { clicks, at } => {
                let at = at.expect("synthetic scrolls carry a position");
                let vertical = matches!(script[i], AgentAction::Scroll { .. });
                lw.scroll(*clicks, at, vertical);
            }
            AgentAction::Write { text } => lw.write(text),
            AgentAction::Press { key } => lw.tap(key),
            AgentAction::Hotkey { keys } => {
                let (mods, rest) = keys.split_at(keys.len() - 1);
                for m in mods {
                    let t = lw.step(20, 80);
                    lw.events.push(RawEvent::key(t, m.clone(), true));
                }
                lw.tap(&rest[0]);
                for m in mods.iter().rev() {
                    let t = lw.step(20, 80);
                    lw.events.push(RawEvent::key(t, m.clone(), false));
                }
            }
            AgentAction::Wait | AgentAction::Terminate { .. } => {}
        }
        let end_t = lw.t;
        truth.push(ActionTruth {
            events: (first_event, lw.events.len().saturating_sub(1)),
            press_t: press.map(|p| p.0),
            t0: press.and_then(|p| p.1),
            end_t,
        });
        lw.step(2100, 3000);
        i += 1;
    }
    (lw.events, truth)
}

/// One screen change: a filled rectangle appearing at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenChange {
    pub t: Millis,
    pub rect: (u32, u32, u32, u32),
    pub color: [u8; 3],
}

#[derive(Debug, Clone)]
pub struct SynthDemo {
    pub demo: RawDemonstration,
    pub script: Vec<AgentAction>,
    pub truth: Vec<ActionTruth>,
    pub base: [u8; 3],
    pub changes: Vec<ScreenChange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub min_actions: usize,
    pub max_actions: usize,
    /// Upper bound on distractor screen changes per demonstration.
    pub max_distractors: usize,
    pub failure_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_actions: 3,
            max_actions: 10,
            max_distractors: 4,
            failure_rate: 0.1,
        }
    }
}

const RESOLUTIONS: [(u32, u32); 4] = [(1280, 720), (1920, 1080), (2560, 1440), (3840, 2160)];

fn random_change(rng: &mut impl Rng, t: Millis, current: [u8; 3]) -> ScreenChange {
    // At least a quarter of the screen flips to a clearly different shade.
    let w = rng.gen_range(FRAME_W / 2..=FRAME_W);
    let h = rng.gen_range(FRAME_H / 2..=FRAME_H);
    let x = rng.gen_range(0..=FRAME_W - w);
    let y = rng.gen_range(0..=FRAME_H - h);
    let cur = current[0] as i32;
    let mut v;
    loop {
        v = rng.gen_range(0..=255);
        if (v - cur).abs() >= 96 {
            break;
        }
    }
    let v = v as u8;
    ScreenChange {
        t,
        rect: (x, y, w, h),
        color: [v, v, v],
    }
}

fn describe(script: &[AgentAction]) -> String {
    let names: Vec<&str> = script.iter().map(|a| a.type_name()).collect();
    format!("Perform {} steps: {}", script.len(), names.join(", "))
}

/// Generate demonstration `index` of the corpus seeded by `seed`.
pub fn synth_demo(seed: u64, index: u64, cfg: &SynthConfig) -> SynthDemo {
    let mut rng = rng_for(seed, index);
    let len = rng.gen_range(cfg.min_actions..=cfg.max_actions);
    let script = random_script(&mut rng, len);
    let (events, truth) = lower_script(&mut rng, &script);
    let end = events.last().map_or(0, |e| e.t) + 600;
    let n_frames = (end / FRAME_INTERVAL + 1) as usize;

    let base_v = rng.gen_range(0..=255u8);
    let base = [base_v, base_v, base_v];
    let mut change_times: Vec<Millis> = truth.iter().map(|a| a.end_t + REACTION_DELAY).collect();
    let n_distract = rng.gen_range(0..=cfg.max_distractors);
    for _ in 0..n_distract {
        change_times.push(rng.gen_range(0..end));
    }
    change_times.sort_unstable();
    let mut changes = Vec::with_capacity(change_times.len());
    let mut shade = base;
    for t in change_times {
        let c = random_change(&mut rng, t, shade);
        shade = c.color;
        changes.push(c);
    }

    let frames = (0..n_frames)
        .map(|i| Frame {
            index: i,
            t: i as Millis * FRAME_INTERVAL,
            file: format!("{FRAME_DIR}/{i:06}.png"),
            w: FRAME_W,
            h: FRAME_H,
        })
        .collect();
    let os = *[Os::Windows, Os::Macos, Os::Ubuntu]
        .choose(&mut rng)
        .expect("os");
    let resolution = *RESOLUTIONS.choose(&mut rng).expect("res");
    let status = if rng.gen_bool(cfg.failure_rate) {
        Some(TaskStatus::Failure)
    } else {
        None
    };
    let demo = RawDemonstration {
        id: format!("demo_{index:05}"),
        instruction: describe(&script),
        os,
        resolution,
        status,
        events,
        frames,
        axtree: BTreeMap::new(),
    };
    SynthDemo {
        demo,
        script,
        truth,
        base,
        changes,
    }
}

impl SynthDemo {
    /// Render every frame. Frames are built incrementally; a change is
    /// visible in every frame with `t >= change.t`.
    pub fn render_frames(&self) -> Vec<RgbImage> {
        let mut img = RgbImage::from_pixel(FRAME_W, FRAME_H, Rgb(self.base));
        let mut next = 0;
        let mut out = Vec::with_capacity(self.demo.frames.len());
        for f in &self.demo.frames {
            while next < self.changes.len() && self.changes[next].t <= f.t {
                let c = &self.changes[next];
                let (x, y, w, h) = c.rect;
                for yy in y..y + h {
                    for xx in x..x + w {
                        img.put_pixel(xx, yy, Rgb(c.color));
                    }
                }
                next += 1;
            }
            out.push(img.clone());
        }
        out
    }

    /// Write the demonstration directory including frame images.
    pub fn write(&self, dir: &Path) -> Result<(), InterchangeError> {
        write_demo(dir, &self.demo, 1_700_000_000_000)?;
        let frame_dir = dir.join(FRAME_DIR);
        std::fs::create_dir_all(&frame_dir).map_err(|source| InterchangeError::Io {
            path: frame_dir.clone(),
            source,
        })?;
        for (f, img) in self.demo.frames.iter().zip(self.render_frames()) {
            let path = dir.join(&f.file);
            img.save(&path).map_err(|e| InterchangeError::Io {
                path: path.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
        }
        Ok(())
    }
}
