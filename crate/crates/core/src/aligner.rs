//! Keyframe selection: pairs each reduced action with the screen state that
//! preceded it, without leaking the action's target.

use std::path::{Path, PathBuf};

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AgentAction, AlignmentMeta, EventKind, Frame, Millis, RawDemonstration, RawEvent, Span,
    StateRef, Step, TaskStatus, Trajectory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignerConfig {
    /// A pause of at least this long separates movement phases.
    pub idle_gap: Millis,
    /// Minimum mean absolute luma difference for a frame to count as distinct.
    pub diff_threshold: f64,
    pub downsample: (u32, u32),
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            idle_gap: 300,
            diff_threshold: 0.02,
            downsample: (64, 36),
        }
    }
}

impl AlignerConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.idle_gap == 0 {
            return Err("idle_gap must be positive".into());
        }
        if !(self.diff_threshold > 0.0 && self.diff_threshold < 1.0) {
            return Err("diff_threshold must lie in (0, 1)".into());
        }
        if self.downsample.0 == 0 || self.downsample.1 == 0 {
            return Err("downsample must be non-empty".into());
        }
        Ok(())
    }

    pub fn meta(&self) -> AlignmentMeta {
        AlignmentMeta {
            idle_gap_ms: self.idle_gap,
            diff_threshold: self.diff_threshold,
            downsample: self.downsample,
        }
    }
}

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("io_error: {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("alignment_error at step {step}: {message}")]
    Alignment { step: usize, message: String },
    #[error("alignment_error: nothing to align")]
    Empty,
}

/// A frame comparison metric. Signatures are computed once per frame;
/// distances must be symmetric, in `[0, 1]`, and zero for equal signatures.
pub trait FrameMetric: Sync {
    fn signature(&self, image: &DynamicImage) -> Vec<f64>;
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Mean absolute difference of Rec.601 luma after exact area-average
/// downsampling.
#[derive(Debug, Clone, Copy)]
pub struct LumaMad {
    pub size: (u32, u32),
}

impl LumaMad {
    pub fn new(size: (u32, u32)) -> Self {
        LumaMad { size }
    }
}

/// Rec.601 luma of an sRGB pixel, in `[0, 1]`.
pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Area-average `values` (row-major, `w`x`h`) onto a `tw`x`th` grid. Each
/// target cell averages the source pixels it covers, weighted by overlap.
pub fn area_downsample(values: &[f64], w: u32, h: u32, tw: u32, th: u32) -> Vec<f64> {
    let (w, h, tw, th) = (w as usize, h as usize, tw as usize, th as usize);
    // Overlap weights along one axis: for each target cell, the covered
    // source indices with their overlap lengths, in units of 1/(src*dst).
    fn weights(src: usize, dst: usize) -> Vec<Vec<(usize, usize)>> {
        (0..dst)
            .map(|c| {
                let lo = c * src;
                let hi = (c + 1) * src;
                let mut out = Vec::new();
                for s in lo / dst..=(hi - 1) / dst {
                    let a = (s * dst).max(lo);
                    let b = ((s + 1) * dst).min(hi);
                    if b > a {
                        out.push((s, b - a));
                    }
                }
                out
            })
            .collect()
    }
    let wx = weights(w, tw);
    let wy = weights(h, th);
    let norm = (w * h) as f64;
    let mut out = Vec::with_capacity(tw * th);
    for ys in &wy {
        for xs in &wx {
            let mut acc = 0.0;
            for &(sy, ly) in ys {
                let row = &values[sy * w..(sy + 1) * w];
                let mut racc = 0.0;
                for &(sx, lx) in xs {
                    racc += row[sx] * lx as f64;
                }
                acc += racc * ly as f64;
            }
            out.push(acc / norm);
        }
    }
    out
}

impl FrameMetric for LumaMad {
    fn signature(&self, image: &DynamicImage) -> Vec<f64> {
        let rgb = image.to_rgb8();
        let (w, h) = rgb.dimensions();
        let lum: Vec<f64> = rgb.pixels().map(|p| luma(p[0], p[1], p[2])).collect();
        area_downsample(&lum, w, h, self.size.0, self.size.1)
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        if a.is_empty() {
            return 0.0;
        }
        let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        (sum / a.len() as f64).clamp(0.0, 1.0)
    }
}

fn load(path: &Path) -> Result<DynamicImage, AlignError> {
    image::open(path).map_err(|e| AlignError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Visual distance between two image files.
pub fn visual_distance(a: &Path, b: &Path, cfg: &AlignerConfig) -> Result<f64, AlignError> {
    let m = LumaMad::new(cfg.downsample);
    let sa = m.signature(&load(a)?);
    let sb = m.signature(&load(b)?);
    Ok(m.distance(&sa, &sb))
}

/// Distance of every frame to its predecessor (`0.0` for the first frame).
/// Images decode in parallel; the result order follows the frames.
pub fn predecessor_distances(
    dir: &Path,
    frames: &[Frame],
    metric: &dyn FrameMetric,
) -> Result<Vec<f64>, AlignError> {
    let sigs: Vec<Vec<f64>> = frames
        .par_iter()
        .map(|f| load(&dir.join(&f.file)).map(|img| metric.signature(&img)))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(frames.len());
    for (i, s) in sigs.iter().enumerate() {
        out.push(if i == 0 {
            0.0
        } else {
            metric.distance(&sigs[i - 1], s)
        });
    }
    Ok(out)
}

/// Start of the movement phase that ends at `press`: walk back over move
/// events while consecutive gaps stay under `idle_gap`.
pub fn movement_start(events: &[RawEvent], press: usize, idle_gap: Millis) -> Millis {
    let mut t0 = events[press].t;
    for e in events[..press].iter().rev() {
        if e.kind != EventKind::Move || t0.saturating_sub(e.t) >= idle_gap {
            break;
        }
        t0 = e.t;
    }
    t0
}

/// Index of the press that starts this action, if it is press-initiated.
fn press_index(action: &AgentAction, span: Span, events: &[RawEvent]) -> Option<usize> {
    let pointer_action = action.is_click_like()
        || matches!(
            action,
            AgentAction::MoveTo { .. } | AgentAction::DragTo { .. }
        );
    if !pointer_action {
        return None;
    }
    (span.first..=span.last).find(|&i| events[i].kind == EventKind::ButtonDown)
}

/// Choose the keyframe for one action. `dist_prev[i]` is the distance of
/// frame `i` to frame `i - 1`; `after` is the previous step's keyframe.
pub fn select_keyframe(
    frames: &[Frame],
    dist_prev: &[f64],
    action: &AgentAction,
    span: Span,
    events: &[RawEvent],
    cfg: &AlignerConfig,
    after: Option<usize>,
) -> Result<usize, String> {
    let fresh = |i: usize| after.map_or(true, |a| i > a);
    if let Some(press) = press_index(action, span, events) {
        let press_t = events[press].t;
        let t0 = movement_start(events, press, cfg.idle_gap);
        let candidates: Vec<usize> = (0..frames.len())
            .filter(|&i| fresh(i) && frames[i].t <= t0 && frames[i].t < press_t)
            .collect();
        let distinct = candidates
            .iter()
            .rev()
            .find(|&&i| i > 0 && dist_prev[i] > cfg.diff_threshold);
        return distinct
            .or(candidates.last())
            .copied()
            .ok_or_else(|| format!("no frame before the movement starting at t={t0}"));
    }
    let first_t = events[span.first].t;
    let last_t = events[span.last].t;
    (0..frames.len())
        .rev()
        .find(|&i| fresh(i) && frames[i].t <= first_t)
        .or_else(|| {
            (0..frames.len())
                .rev()
                .find(|&i| fresh(i) && frames[i].t < last_t)
        })
        .ok_or_else(|| format!("no frame before t={first_t}"))
}

/// Attach keyframes to reduced actions and append the terminal step.
pub fn build_trajectory(
    demo: &RawDemonstration,
    reduced: &[(AgentAction, Span)],
    cfg: &AlignerConfig,
    dist_prev: &[f64],
) -> Result<Trajectory, AlignError> {
    if reduced.is_empty() {
        return Err(AlignError::Empty);
    }
    let state = |f: &Frame| StateRef {
        frame: f.index,
        frame_t: f.t,
        image: f.file.clone(),
    };
    let mut steps = Vec::with_capacity(reduced.len() + 1);
    let mut prev = None;
    for (i, (action, span)) in reduced.iter().enumerate() {
        let k = select_keyframe(
            &demo.frames,
            dist_prev,
            action,
            *span,
            &demo.events,
            cfg,
            prev,
        )
        .map_err(|message| AlignError::Alignment { step: i, message })?;
        let mut step = Step::new(action.clone(), Some(*span));
        step.state = Some(state(&demo.frames[k]));
        steps.push(step);
        prev = Some(k);
    }
    let last = demo.frames.last().ok_or(AlignError::Alignment {
        step: reduced.len(),
        message: "no frames".into(),
    })?;
    let status = demo.status.unwrap_or(TaskStatus::Success);
    let mut terminal = Step::new(AgentAction::Terminate { status }, None);
    terminal.state = Some(state(last));
    steps.push(terminal);
    Ok(Trajectory {
        id: demo.id.clone(),
        instruction: demo.instruction.clone(),
        refined_instruction: None,
        os: demo.os,
        resolution: demo.resolution,
        demo: None,
        alignment: Some(cfg.meta()),
        steps,
        summary: None,
        privacy: None,
        annotation_errors: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Button, Point};
    use image::{Rgb, RgbImage};

    fn frames(n: usize) -> Vec<Frame> {
        (0..n)
            .map(|i| Frame {
                index: i,
                t: i as u64 * 100,
                file: format!("{i}.png"),
                w: 8,
                h: 8,
            })
            .collect()
    }

    #[test]
    fn metric_extremes() {
        let m = LumaMad::new((4, 4));
        let black = DynamicImage::ImageRgb8(RgbImage::from_pixel(10, 6, Rgb([0, 0, 0])));
        let white = DynamicImage::ImageRgb8(RgbImage::from_pixel(10, 6, Rgb([255, 255, 255])));
        let (b, w) = (m.signature(&black), m.signature(&white));
        assert_eq!(m.distance(&b, &b), 0.0);
        assert!((m.distance(&b, &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn area_average_preserves_mean() {
        let vals: Vec<f64> = (0..35).map(|v| v as f64 / 35.0).collect();
        let out = area_downsample(&vals, 7, 5, 3, 2);
        let mean_in = vals.iter().sum::<f64>() / 35.0;
        let mean_out = out.iter().sum::<f64>() / 6.0;
        assert!((mean_in - mean_out).abs() < 1e-12);
    }

    #[test]
    fn click_keyframe_precedes_movement() {
        // Idle until 450 ms, movement 450-700 ms, press at 700 ms, screen
        // change at 400 ms.
        let p = Point::new(0.5, 0.5);
        let mut events: Vec<RawEvent> = (0..6)
            .map(|k| RawEvent::mouse_move(450 + k * 50, p))
            .collect();
        events.push(RawEvent::button(700, p, Button::Left, true));
        events.push(RawEvent::button(760, p, Button::Left, false));
        let fr = frames(10);
        let mut d = vec![0.0; 10];
        d[4] = 0.5;
        let a = AgentAction::Click {
            at: p,
            button: Button::Left,
        };
        let k = select_keyframe(
            &fr,
            &d,
            &a,
            Span::new(0, 7),
            &events,
            &AlignerConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(fr[k].t, 400);
    }

    #[test]
    fn key_press_uses_latest_prior_frame() {
        let events = vec![
            RawEvent::key(350, crate::keys::Key::parse("enter").unwrap(), true),
            RawEvent::key(400, crate::keys::Key::parse("enter").unwrap(), false),
        ];
        let a = AgentAction::Press {
            key: crate::keys::Key::parse("enter").unwrap(),
        };
        let k = select_keyframe(
            &frames(10),
            &[0.0; 10],
            &a,
            Span::new(0, 1),
            &events,
            &AlignerConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(k, 3);
    }
}
