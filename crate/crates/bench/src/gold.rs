//! Benchmark tasks, gold options and the per-kind step matcher.

use cuakit_core::keys::canonical_hotkey;
use cuakit_core::model::{AgentAction, Os, Point, TaskStatus};
use cuakit_core::Key;
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Inclusive box in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        BBox {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.x_min <= p.x && p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }

    pub fn is_valid(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        unit(self.x_min)
            && unit(self.x_max)
            && unit(self.y_min)
            && unit(self.y_max)
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

fn default_bound() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

/// One acceptable action at a benchmark step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum GoldOption {
    Click {
        bbox: BBox,
    },
    RightClick {
        bbox: BBox,
    },
    MiddleClick {
        bbox: BBox,
    },
    DoubleClick {
        bbox: BBox,
    },
    TripleClick {
        bbox: BBox,
    },
    MoveTo {
        bbox: BBox,
    },
    DragTo {
        bbox: BBox,
    },
    Scroll {
        direction: Direction,
        bbox: BBox,
    },
    Write {
        text: String,
        #[serde(default = "default_bound")]
        max_normalized_edit_distance: f64,
        #[serde(default = "yes")]
        case_sensitive: bool,
    },
    Press {
        key: Key,
    },
    Hotkey {
        keys: Vec<Key>,
    },
    Terminate {
        status: TaskStatus,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Coord,
    Content,
    Function,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Coord, Category::Content, Category::Function];
}

impl GoldOption {
    /// Action type name, aligned with `AgentAction::type_name`.
    pub fn type_name(&self) -> &'static str {
        match self {
            GoldOption::Click { .. } => "click",
            GoldOption::RightClick { .. } => "rightClick",
            GoldOption::MiddleClick { .. } => "middleClick",
            GoldOption::DoubleClick { .. } => "doubleClick",
            GoldOption::TripleClick { .. } => "tripleClick",
            GoldOption::MoveTo { .. } => "moveTo",
            GoldOption::DragTo { .. } => "dragTo",
            GoldOption::Scroll { direction, .. } => match direction {
                Direction::Up | Direction::Down => "scroll",
                Direction::Left | Direction::Right => "hscroll",
            },
            GoldOption::Write { .. } => "write",
            GoldOption::Press { .. } => "press",
            GoldOption::Hotkey { .. } => "hotkey",
            GoldOption::Terminate { .. } => "terminate",
        }
    }

    pub fn category(&self) -> Category {
        match self {
            GoldOption::Write { .. } | GoldOption::Press { .. } | GoldOption::Hotkey { .. } => {
                Category::Content
            }
            GoldOption::Terminate { .. } => Category::Function,
            _ => Category::Coord,
        }
    }

    fn bbox(&self) -> Option<&BBox> {
        match self {
            GoldOption::Click { bbox }
            | GoldOption::RightClick { bbox }
            | GoldOption::MiddleClick { bbox }
            | GoldOption::DoubleClick { bbox }
            | GoldOption::TripleClick { bbox }
            | GoldOption::MoveTo { bbox }
            | GoldOption::DragTo { bbox }
            | GoldOption::Scroll { bbox, .. } => Some(bbox),
            _ => None,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if let Some(b) = self.bbox() {
            if !b.is_valid() {
                return Err(format!("bbox {b:?} is not ordered within [0,1]"));
            }
        }
        match self {
            GoldOption::Write {
                text,
                max_normalized_edit_distance: d,
                ..
            } => {
                if text.is_empty() {
                    return Err("write target is empty".into());
                }
                if !(0.0..=1.0).contains(d) {
                    return Err(format!("edit-distance bound {d} outside [0,1]"));
                }
            }
            GoldOption::Hotkey { keys } if keys.is_empty() => {
                return Err("hotkey without keys".into())
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStep {
    #[serde(default)]
    pub screenshot: String,
    pub options: Vec<GoldOption>,
}

impl BenchStep {
    /// Category of the step, taken from its first option.
    pub fn category(&self) -> Category {
        self.options
            .first()
            .map_or(Category::Coord, GoldOption::category)
    }

    pub fn type_name(&self) -> &'static str {
        self.options.first().map_or("none", GoldOption::type_name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTask {
    pub id: String,
    pub instruction: String,
    pub os: Os,
    pub resolution: (u32, u32),
    pub steps: Vec<BenchStep>,
}

impl BenchTask {
    pub fn check(&self) -> Result<(), BenchError> {
        let err = |m: String| BenchError::Input(format!("task {}: {m}", self.id));
        let last = self
            .steps
            .len()
            .checked_sub(1)
            .ok_or_else(|| err("no steps".into()))?;
        for (i, s) in self.steps.iter().enumerate() {
            if s.options.is_empty() {
                return Err(err(format!("step {i} has no gold options")));
            }
            for o in &s.options {
                o.check().map_err(|m| err(format!("step {i}: {m}")))?;
            }
        }
        if !self.steps[last]
            .options
            .iter()
            .any(|o| matches!(o, GoldOption::Terminate { .. }))
        {
            return Err(err("final step has no terminate option".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    pub check_terminate_status: bool,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            check_terminate_status: true,
        }
    }
}

/// Character-level edit distance, two-row dynamic program.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein over the longer length; 0 for two empty strings.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / n as f64
    }
}

fn key_sequence(a: &AgentAction) -> Option<Vec<Key>> {
    match a {
        AgentAction::Press { key } => Some(vec![key.clone()]),
        AgentAction::Hotkey { keys } => Some(canonical_hotkey(keys.iter().cloned())),
        _ => None,
    }
}

fn scroll_direction(a: &AgentAction) -> Option<(Direction, Option<Point>)> {
    match a {
        AgentAction::Scroll { clicks, at } => Some((
            if *clicks > 0 {
                Direction::Up
            } else {
                Direction::Down
            },
            *at,
        )),
        AgentAction::HScroll { clicks, at } => Some((
            if *clicks > 0 {
                Direction::Right
            } else {
                Direction::Left
            },
            *at,
        )),
        _ => None,
    }
}

/// Does `pred` satisfy `opt`? `is_final` marks the task's last step.
pub fn option_matches(
    pred: &AgentAction,
    opt: &GoldOption,
    is_final: bool,
    cfg: &MatcherConfig,
) -> bool {
    match opt {
        GoldOption::Write {
            text,
            max_normalized_edit_distance,
            case_sensitive,
        } => match pred {
            AgentAction::Write { text: got } => {
                let d = if *case_sensitive {
                    normalized_edit_distance(got, text)
                } else {
                    normalized_edit_distance(&got.to_lowercase(), &text.to_lowercase())
                };
                d <= *max_normalized_edit_distance
            }
            _ => false,
        },
        GoldOption::Press { key } => key_sequence(pred).is_some_and(|k| k == [key.clone()]),
        GoldOption::Hotkey { keys } => {
            key_sequence(pred).is_some_and(|k| k == canonical_hotkey(keys.iter().cloned()))
        }
        GoldOption::Scroll { direction, bbox } => scroll_direction(pred)
            .is_some_and(|(d, at)| d == *direction && at.is_some_and(|p| bbox.contains(p))),
        GoldOption::Terminate { status } => match pred {
            AgentAction::Terminate { status: got } => {
                is_final && (!cfg.check_terminate_status || got == status)
            }
            _ => false,
        },
        pointer => {
            let bbox = pointer.bbox().expect("pointer options carry a bbox");
            pred.type_name() == pointer.type_name()
                && pred.point().is_some_and(|p| bbox.contains(p))
        }
    }
}

/// Index of the first option `pred` satisfies.
pub fn match_step(
    pred: &AgentAction,
    options: &[GoldOption],
    is_final: bool,
    cfg: &MatcherConfig,
) -> Option<usize> {
    options
        .iter()
        .position(|o| option_matches(pred, o, is_final, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("Helo", "Hello"), 1);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("héllo", "hello"), 1);
        assert_eq!(normalized_edit_distance("", ""), 0.0);
    }

    #[test]
    fn gold_json_shape() {
        let o: GoldOption = serde_json::from_str(r#"{"kind":"write","text":"Hello"}"#).unwrap();
        assert_eq!(
            o,
            GoldOption::Write {
                text: "Hello".into(),
                max_normalized_edit_distance: 0.1,
                case_sensitive: true
            }
        );
        let o: GoldOption = serde_json::from_str(
            r#"{"kind":"rightClick","bbox":{"x_min":0.1,"x_max":0.2,"y_min":0.1,"y_max":0.2}}"#,
        )
        .unwrap();
        assert_eq!(o.type_name(), "rightClick");
    }
}
