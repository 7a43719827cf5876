use cuakit_core::aligner::{
    build_trajectory, select_keyframe, AlignerConfig, FrameMetric, LumaMad,
};
use cuakit_core::model::{AgentAction, Button, EventKind, Frame, Point, RawEvent, Span};
use cuakit_core::reducer::{reduce, ReducerConfig};
use cuakit_core::synth::{synth_demo, SynthConfig, SynthDemo};
use image::{DynamicImage, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full-resolution mean absolute luma difference, pixel by pixel.
fn full_res_mad(a: &RgbImage, b: &RgbImage) -> f64 {
    let mut sum = 0.0;
    for (p, q) in a.pixels().zip(b.pixels()) {
        let la = (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
        let lb = (0.299 * q[0] as f64 + 0.587 * q[1] as f64 + 0.114 * q[2] as f64) / 255.0;
        sum += (la - lb).abs();
    }
    sum / (a.width() * a.height()) as f64
}

/// Brute-force keyframe scan driven by the generator's ground truth.
fn reference_keyframes(s: &SynthDemo, threshold: f64) -> Vec<usize> {
    let imgs = s.render_frames();
    let frames = &s.demo.frames;
    let distinct: Vec<bool> = (0..frames.len())
        .map(|i| i > 0 && full_res_mad(&imgs[i - 1], &imgs[i]) > threshold)
        .collect();
    let mut prev: Option<usize> = None;
    let mut out = Vec::new();
    for (a, truth) in s.script.iter().zip(&s.truth) {
        let after = |i: usize| prev.map_or(true, |p| i > p);
        let pick = if let (Some(t0), Some(press)) = (truth.t0, truth.press_t) {
            let mut best_distinct = None;
            let mut best_any = None;
            for (i, f) in frames.iter().enumerate() {
                if after(i) && f.t <= t0 && f.t < press {
                    best_any = Some(i);
                    if distinct[i] {
                        best_distinct = Some(i);
                    }
                }
            }
            best_distinct.or(best_any).unwrap()
        } else {
            let range = truth.events.0..=truth.events.1;
            let first = if matches!(a, AgentAction::DragTo { .. }) {
                truth.events.0
            } else {
                range
                    .clone()
                    .find(|&i| s.demo.events[i].kind != EventKind::Move)
                    .unwrap()
            };
            let t_first = s.demo.events[first].t;
            let t_last = s.demo.events[truth.events.1].t;
            let mut best = None;
            for (i, f) in frames.iter().enumerate() {
                if after(i) && f.t <= t_first {
                    best = Some(i);
                }
            }
            if best.is_none() {
                for (i, f) in frames.iter().enumerate() {
                    if after(i) && f.t < t_last {
                        best = Some(i);
                    }
                }
            }
            best.unwrap()
        };
        out.push(pick);
        prev = Some(pick);
    }
    out
}

fn dist_prev(s: &SynthDemo, metric: &LumaMad) -> Vec<f64> {
    let sigs: Vec<Vec<f64>> = s
        .render_frames()
        .into_iter()
        .map(|img| metric.signature(&DynamicImage::ImageRgb8(img)))
        .collect();
    (0..sigs.len())
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                metric.distance(&sigs[i - 1], &sigs[i])
            }
        })
        .collect()
}

#[test]
fn synthetic_keyframes_match_reference_and_never_leak() {
    let cfg = AlignerConfig::default();
    let metric = LumaMad::new(cfg.downsample);
    let mut click_steps = 0;
    for i in 0..200 {
        let s = synth_demo(42, i, &SynthConfig::default());
        let reduced = reduce(&s.demo, &ReducerConfig::default());
        assert_eq!(reduced.actions(), s.script, "demo {i}: reduction");
        let traj =
            build_trajectory(&s.demo, &reduced.steps, &cfg, &dist_prev(&s, &metric)).unwrap();
        traj.check().unwrap();
        let want = reference_keyframes(&s, cfg.diff_threshold);
        let got: Vec<usize> = traj.steps[..s.script.len()]
            .iter()
            .map(|st| st.state.as_ref().unwrap().frame)
            .collect();
        assert_eq!(got, want, "demo {i}");
        for (k, truth) in s.truth.iter().enumerate() {
            if let Some(t0) = truth.t0 {
                click_steps += 1;
                assert!(s.demo.frames[got[k]].t <= t0, "demo {i} step {k} leaks");
            }
        }
    }
    assert!(click_steps > 200);
}

fn frames(n: usize) -> Vec<Frame> {
    (0..n)
        .map(|i| Frame {
            index: i,
            t: i as u64 * 100,
            file: String::new(),
            w: 1,
            h: 1,
        })
        .collect()
}

#[test]
fn click_without_movement_takes_latest_distinct_frame() {
    let p = Point::new(0.3, 0.3);
    let events = vec![
        RawEvent::button(650, p, Button::Left, true),
        RawEvent::button(700, p, Button::Left, false),
    ];
    let mut d = vec![0.0; 10];
    d[2] = 0.4;
    d[5] = 0.3;
    d[7] = 0.3; // after the press; must not be chosen
    let a = AgentAction::Click {
        at: p,
        button: Button::Left,
    };
    let k = select_keyframe(
        &frames(10),
        &d,
        &a,
        Span::new(0, 1),
        &events,
        &AlignerConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(k, 5);
    // Nothing distinct: latest frame before the press.
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
    assert_eq!(k, 6);
}

#[test]
fn no_prior_frame_is_an_alignment_error() {
    let p = Point::new(0.3, 0.3);
    let events = vec![
        RawEvent::button(50, p, Button::Left, true),
        RawEvent::button(90, p, Button::Left, false),
    ];
    let mut fr = frames(3);
    for f in &mut fr {
        f.t += 100;
    }
    let a = AgentAction::Click {
        at: p,
        button: Button::Left,
    };
    assert!(select_keyframe(
        &fr,
        &[0.0; 3],
        &a,
        Span::new(0, 1),
        &events,
        &AlignerConfig::default(),
        None
    )
    .is_err());
}

#[test]
fn quadrant_toggle_matches_full_resolution_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (w, h) in [(128, 72), (96, 54), (101, 37)] {
        let a = RgbImage::from_fn(w, h, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]));
        let mut b = a.clone();
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                b.put_pixel(x, y, Rgb([255, 255, 255]));
            }
        }
        let m = LumaMad::new((64, 36));
        let sa = m.signature(&DynamicImage::ImageRgb8(a.clone()));
        let sb = m.signature(&DynamicImage::ImageRgb8(b.clone()));
        let got = m.distance(&sa, &sb);
        assert!((got - full_res_mad(&a, &b)).abs() < 1e-6, "{w}x{h}");
        assert_eq!(got, m.distance(&sb, &sa));
        assert_eq!(m.distance(&sa, &sa), 0.0);
    }
}
