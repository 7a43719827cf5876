use cuakit_core::keys::Key;
use cuakit_core::model::{AgentAction, Button, EventKind, Point, RawEvent};
use cuakit_core::reducer::{reduce_events, ReducerConfig};
use cuakit_core::sim::{replay, replay_events, SimState};
use cuakit_core::synth::{lower_script, random_script};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn k(s: &str) -> Key {
    Key::parse(s).unwrap()
}

#[test]
fn thousand_scripts_reduce_back() {
    let cfg = ReducerConfig::default();
    let mut exact = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = rng.gen_range(1..=15);
        let script = random_script(&mut rng, len);
        let (events, _) = lower_script(&mut rng, &script);
        let reduced = reduce_events(&events, &cfg);
        let got = reduced.actions();
        if got == script {
            exact += 1;
        }
        let want_state = replay(&script, SimState::default()).state;
        let raw_state = replay_events(&events, SimState::default()).state;
        let got_state = replay(&got, SimState::default()).state;
        assert_eq!(
            raw_state, want_state,
            "seed {seed}: raw replay differs from script"
        );
        assert_eq!(
            got_state, want_state,
            "seed {seed}: reduced {got:?} vs {script:?}"
        );
    }
    assert!(exact >= 995, "exact recoveries {exact}/1000");
}

#[test]
fn spans_are_ordered_and_cover_or_drop_every_event() {
    let cfg = ReducerConfig::default();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let script = random_script(&mut rng, 10);
        let (events, _) = lower_script(&mut rng, &script);
        let r = reduce_events(&events, &cfg);
        assert!(r.steps.len() <= events.len());
        let mut seen = vec![0u8; events.len()];
        let mut prev_last = None;
        for (_, s) in &r.steps {
            assert!(s.first <= s.last);
            if let Some(p) = prev_last {
                assert!(s.first > p);
            }
            prev_last = Some(s.last);
            for i in s.first..=s.last {
                seen[i] += 1;
            }
        }
        for i in &r.dropped {
            seen[*i] += 1;
        }
        assert!(seen.iter().all(|c| *c == 1));
        // Dropped events are only hover moves.
        for i in &r.dropped {
            assert_eq!(events[*i].kind, EventKind::Move);
        }
    }
}

#[test]
fn reduction_is_structurally_idempotent() {
    let cfg = ReducerConfig::default();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + seed);
        let script = random_script(&mut rng, 8);
        let (events, _) = lower_script(&mut rng, &script);
        let once = reduce_events(&events, &cfg).actions();
        let (again_events, _) = lower_script(&mut rng, &once);
        let twice = reduce_events(&again_events, &cfg).actions();
        assert_eq!(once, twice, "seed {seed}");
    }
}

#[test]
fn scroll_runs_never_mix_signs() {
    let p = Point::new(0.4, 0.4);
    let ev: Vec<RawEvent> = [-1, -2, 3, 1, -1, 0, -4]
        .iter()
        .enumerate()
        .map(|(i, dy)| RawEvent::wheel(i as u64 * 50, p, 0, *dy))
        .collect();
    let got = reduce_events(&ev, &ReducerConfig::default()).actions();
    let clicks: Vec<i32> = got
        .iter()
        .map(|a| match a {
            AgentAction::Scroll { clicks, .. } => *clicks,
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(clicks, [-3, 4, -5]);
}

#[test]
fn write_excludes_chorded_characters() {
    let ev = [
        RawEvent::key(0, k("a"), true),
        RawEvent::key(20, k("a"), false),
        RawEvent::key(40, k("ctrl"), true),
        RawEvent::key(60, k("b"), true),
        RawEvent::key(80, k("b"), false),
        RawEvent::key(100, k("ctrl"), false),
        RawEvent::key(120, k("c"), true),
        RawEvent::key(140, k("c"), false),
    ];
    let got = reduce_events(&ev, &ReducerConfig::default()).actions();
    assert_eq!(
        got,
        vec![
            AgentAction::Write { text: "a".into() },
            AgentAction::Hotkey {
                keys: vec![k("ctrl"), k("b")]
            },
            AgentAction::Write { text: "c".into() },
        ]
    );
}

/// Two left clicks at one point, `gap` ms apart (down to down).
fn two_clicks(gap: u64) -> Vec<RawEvent> {
    let p = Point::new(0.5, 0.5);
    vec![
        RawEvent::button(1000, p, Button::Left, true),
        RawEvent::button(1000 + gap.min(40), p, Button::Left, false),
        RawEvent::button(1000 + gap, p, Button::Left, true),
        RawEvent::button(1000 + gap + 40, p, Button::Left, false),
    ]
}

#[test]
fn double_click_window_boundary() {
    let cfg = ReducerConfig::default();
    for gap in (40..=1000).step_by(10) {
        let got = reduce_events(&two_clicks(gap), &cfg).actions();
        let expect_double = gap <= cfg.double_click_window;
        let is_double = matches!(got.as_slice(), [AgentAction::DoubleClick { .. }]);
        let is_two_singles = matches!(
            got.as_slice(),
            [AgentAction::Click { .. }, AgentAction::Click { .. }]
        );
        assert!(
            if expect_double {
                is_double
            } else {
                is_two_singles
            },
            "gap {gap}: {got:?}"
        );
    }
}

#[test]
fn small_hold_motion_is_a_click_at_release() {
    let p = Point::new(0.5, 0.5);
    let q = Point::new(0.503, 0.5);
    let ev = [
        RawEvent::button(0, p, Button::Left, true),
        RawEvent::button(80, q, Button::Left, false),
    ];
    assert_eq!(
        reduce_events(&ev, &ReducerConfig::default()).actions(),
        vec![AgentAction::Click {
            at: q,
            button: Button::Left
        }]
    );
}

#[test]
fn trailing_hover_is_dropped() {
    let p = Point::new(0.2, 0.3);
    let ev = [
        RawEvent::button(0, p, Button::Left, true),
        RawEvent::button(50, p, Button::Left, false),
        RawEvent::mouse_move(900, Point::new(0.6, 0.6)),
        RawEvent::mouse_move(930, Point::new(0.7, 0.6)),
    ];
    let r = reduce_events(&ev, &ReducerConfig::default());
    assert_eq!(r.steps.len(), 1);
    assert_eq!(r.dropped, vec![2, 3]);
}
