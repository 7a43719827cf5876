//! Visual cues: a red disc at the action coordinate plus a magnified crop
//! appended to the right of the frame.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use cuakit_core::model::AgentAction;
use cuakit_core::render_action;
use image::{ImageFormat, Rgb, RgbImage};

use crate::client::sha256_hex;
use crate::error::CotError;

pub const MARKER: Rgb<u8> = Rgb([255, 0, 0]);
pub const ZOOM: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CueLayout {
    pub marker: (u32, u32),
    pub radius: u32,
    /// Top-left corner and side of the square crop, in frame pixels.
    pub crop: (u32, u32, u32),
    pub out_size: (u32, u32),
}

pub fn cue_layout(w: u32, h: u32, x: f64, y: f64) -> CueLayout {
    let px = ((x * w as f64).floor() as u32).min(w - 1);
    let py = ((y * h as f64).floor() as u32).min(h - 1);
    let side = (w.min(h) / 4).max(1);
    let clamp = |c: u32, len: u32| c.saturating_sub(side / 2).min(len - side);
    CueLayout {
        marker: (px, py),
        radius: (w.min(h) / 50).max(2),
        crop: (clamp(px, w), clamp(py, h), side),
        out_size: (w + side * ZOOM, h.max(side * ZOOM)),
    }
}

/// Marked copy of `img`; the input is not modified.
pub fn render_visual_cues(img: &RgbImage, action: &AgentAction) -> Result<RgbImage, CotError> {
    // A drag is cued at its end point, which is the point it carries.
    let p = action.point().ok_or(CotError::CueNotApplicable)?;
    let (w, h) = img.dimensions();
    let l = cue_layout(w, h, p.x, p.y);
    let mut marked = img.clone();
    let (cx, cy, r) = (l.marker.0 as i64, l.marker.1 as i64, l.radius as i64);
    for y in (cy - r).max(0)..=(cy + r).min(h as i64 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(w as i64 - 1) {
            if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                marked.put_pixel(x as u32, y as u32, MARKER);
            }
        }
    }
    let mut out = RgbImage::new(l.out_size.0, l.out_size.1);
    image::imageops::replace(&mut out, &marked, 0, 0);
    let (x0, y0, side) = l.crop;
    for dy in 0..side * ZOOM {
        for dx in 0..side * ZOOM {
            let px = *marked.get_pixel(x0 + dx / ZOOM, y0 + dy / ZOOM);
            out.put_pixel(w + dx, dy, px);
        }
    }
    Ok(out)
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Render the cue image for `frame` and store it in `out_dir` under a name
/// derived from the frame bytes and the action.
pub fn write_cue_image(
    frame: &Path,
    action: &AgentAction,
    out_dir: &Path,
) -> Result<PathBuf, CotError> {
    if action.point().is_none() {
        return Err(CotError::CueNotApplicable);
    }
    let bytes = fs::read(frame).map_err(|e| CotError::io(frame, e))?;
    let mut seed = bytes.clone();
    seed.extend_from_slice(render_action(action).as_bytes());
    let path = out_dir.join(format!("{}.png", &sha256_hex(&seed)[..32]));
    if path.exists() {
        return Ok(path);
    }
    let img = image::load_from_memory(&bytes)
        .map_err(|e| CotError::io(frame, e))?
        .to_rgb8();
    let cued = render_visual_cues(&img, action)?;
    let mut png = Vec::new();
    cued.write_to(&mut Cursor::new(&mut png), ImageFormat::Png)
        .map_err(|e| CotError::io(&path, e))?;
    fs::create_dir_all(out_dir).map_err(|e| CotError::io(out_dir, e))?;
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = out_dir.join(format!(".cue.{}.{n}.tmp", std::process::id()));
    fs::write(&tmp, &png).map_err(|e| CotError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CotError::io(&path, e))?;
    Ok(path)
}
