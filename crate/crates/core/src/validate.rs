//! Structural checks on raw demonstrations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::interchange::read_demo;
use crate::model::{Button, EventKind, RawDemonstration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "in", content = "at")]
pub enum Location {
    Demo,
    Event(usize),
    Frame(usize),
    File(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Demo => f.write_str("demo"),
            Location::Event(i) => write!(f, "event {i}"),
            Location::Frame(i) => write!(f, "frame {i}"),
            Location::File(p) => f.write_str(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub location: Location,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warn => "warn",
            Severity::Error => "error",
        };
        write!(
            f,
            "{sev} {} at {}: {}",
            self.code, self.location, self.message
        )
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

fn finding(severity: Severity, code: &str, location: Location, message: String) -> Finding {
    Finding {
        severity,
        code: code.to_string(),
        message,
        location,
    }
}

/// Check every stream invariant; findings are ordered by location within
/// each pass (events, then pairing, then frames).
pub fn validate_demonstration(demo: &RawDemonstration) -> Vec<Finding> {
    use Severity::*;
    let mut out = Vec::new();
    if demo.resolution.0 == 0 || demo.resolution.1 == 0 {
        out.push(finding(
            Error,
            "resolution",
            Location::Demo,
            format!("resolution {:?} has a zero side", demo.resolution),
        ));
    }

    let mut prev_t = None;
    for (i, e) in demo.events.iter().enumerate() {
        let loc = || Location::Event(i);
        if let Some(p) = prev_t {
            if e.t < p {
                out.push(finding(
                    Error,
                    "event_order",
                    loc(),
                    format!("t={} after t={p}", e.t),
                ));
            }
        }
        prev_t = Some(e.t);
        if e.device != e.kind.device() {
            out.push(finding(
                Error,
                "kind_device",
                loc(),
                format!("{:?} event on {:?} device", e.kind, e.device),
            ));
            continue;
        }
        let has_pos = e.x.is_some() || e.y.is_some();
        let mouse = e.kind.device() == crate::model::Device::Mouse;
        let mut mismatch = Vec::new();
        if mouse && (e.x.is_none() || e.y.is_none()) {
            mismatch.push("mouse event without x/y");
        }
        if !mouse && has_pos {
            mismatch.push("keyboard event with a position");
        }
        if mouse && e.key.is_some() {
            mismatch.push("mouse event with a key");
        }
        if !mouse && e.key.is_none() {
            mismatch.push("keyboard event without a key");
        }
        let is_wheel = e.kind == EventKind::Wheel;
        if is_wheel && e.dx.is_none() && e.dy.is_none() {
            mismatch.push("wheel event without dx/dy");
        }
        if !is_wheel && (e.dx.is_some() || e.dy.is_some()) {
            mismatch.push("wheel delta on a non-wheel event");
        }
        let is_button = matches!(e.kind, EventKind::ButtonDown | EventKind::ButtonUp);
        if !is_button && e.button.is_some() {
            mismatch.push("button on a non-button event");
        }
        for m in mismatch {
            out.push(finding(Error, "field_mismatch", loc(), m.to_string()));
        }
        if is_button && e.button.is_none() {
            out.push(finding(
                Error,
                "missing_button",
                loc(),
                "button event without a button".into(),
            ));
        }
        if let (Some(x), Some(y)) = (e.x, e.y) {
            if !(x.is_finite()
                && y.is_finite()
                && (0.0..=1.0).contains(&x)
                && (0.0..=1.0).contains(&y))
            {
                out.push(finding(
                    Error,
                    "coord_range",
                    loc(),
                    format!("({x}, {y}) outside [0,1]"),
                ));
            }
        }
    }

    // Down/up pairing. Streams may be clipped, so these are warnings.
    let mut buttons: BTreeMap<Button, usize> = BTreeMap::new();
    let mut keys: BTreeMap<String, usize> = BTreeMap::new();
    let mut pairing = Vec::new();
    for (i, e) in demo.events.iter().enumerate() {
        match (e.kind, e.button, &e.key) {
            (EventKind::ButtonDown, Some(b), _) => {
                if let Some(prev) = buttons.insert(b, i) {
                    pairing.push(finding(
                        Warn,
                        "unmatched_button",
                        Location::Event(prev),
                        format!("{} button_down never released", b.as_str()),
                    ));
                }
            }
            (EventKind::ButtonUp, Some(b), _) => {
                if buttons.remove(&b).is_none() {
                    pairing.push(finding(
                        Warn,
                        "unmatched_button",
                        Location::Event(i),
                        format!("{} button_up without a press", b.as_str()),
                    ));
                }
            }
            (EventKind::KeyDown, _, Some(k)) => {
                // Auto-repeat produces repeated downs; only the first counts.
                keys.entry(k.as_str().to_string()).or_insert(i);
            }
            (EventKind::KeyUp, _, Some(k)) => {
                if keys.remove(k.as_str()).is_none() {
                    pairing.push(finding(
                        Warn,
                        "unmatched_key",
                        Location::Event(i),
                        format!("key_up {k} without a key_down"),
                    ));
                }
            }
            _ => {}
        }
    }
    for (b, i) in buttons {
        pairing.push(finding(
            Warn,
            "unmatched_button",
            Location::Event(i),
            format!("{} button_down never released", b.as_str()),
        ));
    }
    for (k, i) in keys {
        pairing.push(finding(
            Warn,
            "unmatched_key",
            Location::Event(i),
            format!("key_down {k} without a key_up"),
        ));
    }
    pairing.sort_by_key(|f| match f.location {
        Location::Event(i) => i,
        _ => 0,
    });
    out.extend(pairing);

    if demo.frames.is_empty() {
        out.push(finding(
            Error,
            "no_frames",
            Location::Demo,
            "demonstration has no frames".into(),
        ));
    }
    let mut prev_t = None;
    for (i, f) in demo.frames.iter().enumerate() {
        let loc = || Location::Frame(i);
        if f.index != i {
            out.push(finding(
                Error,
                "frame_index",
                loc(),
                format!("index {} at position {i}", f.index),
            ));
        }
        if let Some(p) = prev_t {
            if f.t <= p {
                out.push(finding(
                    Error,
                    "frame_order",
                    loc(),
                    format!("t={} not after t={p}", f.t),
                ));
            }
        }
        prev_t = Some(f.t);
        if f.w == 0 || f.h == 0 {
            out.push(finding(
                Error,
                "frame_size",
                loc(),
                format!("size {}x{}", f.w, f.h),
            ));
        }
    }
    out
}

/// Load and validate a demonstration directory. Load failures become a
/// single error finding.
pub fn validate_dir(dir: &Path) -> (Option<RawDemonstration>, Vec<Finding>) {
    match read_demo(dir) {
        Ok(demo) => {
            let findings = validate_demonstration(&demo);
            (Some(demo), findings)
        }
        Err(e) => (
            None,
            vec![finding(
                Severity::Error,
                "unreadable",
                Location::File(dir.display().to_string()),
                e.to_string(),
            )],
        ),
    }
}
