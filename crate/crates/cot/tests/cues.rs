use cuakit_core::model::{AgentAction, Button, Point};
use cuakit_cot::{cue_layout, render_visual_cues, write_cue_image, CotError};
use image::{Rgb, RgbImage};
use tempfile::tempdir;

fn click(x: f64, y: f64) -> AgentAction {
    AgentAction::Click {
        at: Point::new(x, y),
        button: Button::Left,
    }
}

#[test]
fn written_marker_pixel_is_red_and_frame_untouched() {
    let dir = tempdir().unwrap();
    let frame = dir.path().join("f.png");
    RgbImage::from_fn(160, 90, |x, y| Rgb([(x % 200) as u8, (y % 200) as u8, 30]))
        .save(&frame)
        .unwrap();
    let before = std::fs::read(&frame).unwrap();
    for (x, y) in [(0.5, 0.5), (0.0, 0.0), (1.0, 1.0), (0.3, 0.8)] {
        let out = write_cue_image(&frame, &click(x, y), &dir.path().join("cues")).unwrap();
        let img = image::open(&out).unwrap().to_rgb8();
        // Independent pixel mapping of the normalized coordinate.
        let px = ((x * 160.0) as u32).min(159);
        let py = ((y * 90.0) as u32).min(89);
        assert_eq!(*img.get_pixel(px, py), Rgb([255, 0, 0]), "({x}, {y})");
        assert!(img.width() > 160);
    }
    assert_eq!(std::fs::read(&frame).unwrap(), before);
}

#[test]
fn crop_is_magnified_and_clamped() {
    let img = RgbImage::from_fn(120, 80, |x, y| Rgb([x as u8, y as u8, 0]));
    for (x, y) in [(0.0, 0.0), (0.5, 0.5), (0.99, 0.01)] {
        let out = render_visual_cues(&img, &click(x, y)).unwrap();
        let l = cue_layout(120, 80, x, y);
        let (cx, cy, side) = l.crop;
        assert!(cx + side <= 120 && cy + side <= 80);
        assert_eq!(out.dimensions(), (120 + 2 * side, 80));
        // Every 2x2 block of the patch replicates one source pixel away from the marker.
        for dy in (0..side).step_by(7) {
            for dx in (0..side).step_by(7) {
                let src = *out.get_pixel(cx + dx, cy + dy);
                for (ox, oy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    assert_eq!(*out.get_pixel(120 + 2 * dx + ox, 2 * dy + oy), src);
                }
            }
        }
    }
}

#[test]
fn drag_cues_the_end_point_and_keys_are_not_applicable() {
    let img = RgbImage::new(100, 100);
    let out = render_visual_cues(
        &img,
        &AgentAction::DragTo {
            at: Point::new(0.8, 0.2),
        },
    )
    .unwrap();
    assert_eq!(*out.get_pixel(80, 20), Rgb([255, 0, 0]));
    let err = render_visual_cues(&img, &AgentAction::Write { text: "x".into() }).unwrap_err();
    assert_eq!(err, CotError::CueNotApplicable);
    assert_eq!(err.code(), "cue_not_applicable");
}
