#![allow(dead_code)]

use std::path::Path;

use cuakit_core::model::{AgentAction, Button, Os, Point, StateRef, Step, TaskStatus, Trajectory};
use image::{Rgb, RgbImage};

/// `n` non-terminal steps (clicks and writes) plus a terminate, with one
/// distinct PNG frame per step written under `dir/frames`.
pub fn fixture(dir: &Path, n: usize) -> Trajectory {
    std::fs::create_dir_all(dir.join("frames")).unwrap();
    let mut steps = Vec::new();
    for i in 0..=n {
        let shade = (i * 20 % 256) as u8;
        let img = RgbImage::from_pixel(64, 36, Rgb([shade, 255 - shade, 40]));
        let name = format!("frames/{i:06}.png");
        img.save(dir.join(&name)).unwrap();
        let action = if i == n {
            AgentAction::Terminate {
                status: TaskStatus::Success,
            }
        } else if i % 3 == 2 {
            AgentAction::Write {
                text: format!("text {i}"),
            }
        } else {
            AgentAction::Click {
                at: Point::new((1000 + 700 * i) as f64 / 10_000.0, 0.5),
                button: Button::Left,
            }
        };
        let mut s = Step::new(action, None);
        s.state = Some(StateRef {
            frame: i,
            frame_t: i as u64 * 1000,
            image: name,
        });
        steps.push(s);
    }
    Trajectory {
        id: "fx".into(),
        instruction: "Fill in the form".into(),
        refined_instruction: None,
        os: Os::Ubuntu,
        resolution: (1920, 1080),
        demo: None,
        alignment: None,
        steps,
        summary: None,
        privacy: None,
        annotation_errors: Default::default(),
    }
}

pub const CORRECT: &str = "<verdict>correct</verdict><rationale>ok</rationale><state_change>the field gained focus</state_change>";
pub const INCORRECT: &str =
    "<verdict>incorrect</verdict><rationale>clicked the wrong control</rationale>";
pub const COT: &str = "<observation>A form is open.</observation><thought>I should fill the next field.</thought><action>Click the next field.</action>";
