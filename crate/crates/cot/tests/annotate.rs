mod common;

use std::sync::Arc;

use common::{fixture, CORRECT, COT, INCORRECT};
use cuakit_core::model::{PrivacyLevel, VerdictStatus};
use cuakit_cot::{
    Annotator, CachedClient, CotError, MockClient, ModelClient, RequestKind, RetryPolicy,
    ScriptedClient,
};
use tempfile::tempdir;

const NO_WAIT: RetryPolicy = RetryPolicy {
    attempts: 3,
    backoff_ms: 0,
};

fn annotator<'a>(client: &'a dyn ModelClient, root: &std::path::Path) -> Annotator<'a> {
    Annotator::new(client, root, root.join("cues")).with_retry(NO_WAIT)
}

#[test]
fn reflect_passes_through_mock_verdicts() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 4);
    let ok = MockClient::new().with_reply(RequestKind::Reflect, CORRECT);
    let v = annotator(&ok, dir.path()).reflect_step(&t, 1).unwrap();
    assert_eq!(v.status, VerdictStatus::Correct);
    assert_eq!(v.state_change.as_deref(), Some("the field gained focus"));

    let bad = MockClient::new().with_reply(RequestKind::Reflect, INCORRECT);
    let v = annotator(&bad, dir.path()).reflect_step(&t, 1).unwrap();
    assert_eq!(v.status, VerdictStatus::Incorrect);
    assert!(!v.is_correct());

    // Terminal step compares against its own frame.
    let v = annotator(&ok, dir.path()).reflect_step(&t, 4).unwrap();
    assert!(v.is_correct());
}

#[test]
fn cache_hit_does_not_contact_the_backend() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 3);
    let backend = Arc::new(ScriptedClient::new([]));
    let cache_dir = dir.path().join("cache");
    let cached = CachedClient::new(&cache_dir, Box::new(backend.clone())).unwrap();
    let a = annotator(&cached, dir.path());
    let first = a.reflect_step(&t, 0).unwrap();
    assert_eq!(backend.requests().len(), 1);
    let second = a.reflect_step(&t, 0).unwrap();
    assert_eq!(backend.requests().len(), 1);
    assert_eq!(first, second);
    assert_eq!((cached.hits(), cached.misses()), (1, 1));

    // The stored key is the request hash.
    let key = backend.requests()[0].cache_key();
    assert!(cached.path_for(&key).exists());

    let replay = CachedClient::replay(&cache_dir).unwrap();
    assert_eq!(
        annotator(&replay, dir.path()).reflect_step(&t, 0).unwrap(),
        first
    );
    let miss = annotator(&replay, dir.path())
        .reflect_step(&t, 1)
        .unwrap_err();
    assert_eq!(miss.code(), "backend_error");
}

#[test]
fn generate_reads_section_style_replies() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 5);
    let reply = "# Step 5:\n## Observation:I'm looking at a Google search page where \"gpt\" has been entered in the search box.\n\n\
## Thought:I need to clear the current search term and search for the copied word.\n\n\
## Action:Click on the Google search box where \"gpt\" is currently displayed to prepare to enter a new search query.\n\n\
## Code:```python\npyautogui.click(x=0.157, y=0.1229)\n```";
    let client = MockClient::new().with_reply(RequestKind::Generate, reply);
    let cot = annotator(&client, dir.path()).generate_cot(&t, 4).unwrap();
    assert_eq!(
        cot.observation.as_deref(),
        Some(
            "I'm looking at a Google search page where \"gpt\" has been entered in the search box."
        )
    );
    assert_eq!(
        cot.thought.as_deref(),
        Some("I need to clear the current search term and search for the copied word.")
    );
    assert_eq!(
        cot.action_description,
        "Click on the Google search box where \"gpt\" is currently displayed to prepare to enter a new search query."
    );
}

#[test]
fn terminal_step_describes_termination() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 3);
    let cot = annotator(&MockClient::new(), dir.path())
        .generate_cot(&t, 3)
        .unwrap();
    assert!(cot.action_description.to_lowercase().contains("terminate"));
}

#[test]
fn generator_context_is_system_history_current() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 6);
    let client = ScriptedClient::new([]);
    let a = annotator(&client, dir.path());
    for i in [0, 1, 4, 6] {
        a.generate_cot(&t, i).unwrap();
        let req = client.requests().pop().unwrap();
        assert_eq!(req.kind, RequestKind::Generate);
        assert_eq!(req.messages.len(), 1 + i + 1, "step {i}");
        // Only the current step carries a screenshot.
        assert_eq!(req.image_count(), 1);
    }
}

#[test]
fn coordinate_actions_send_the_cue_image() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 3);
    let client = ScriptedClient::new([]);
    let a = annotator(&client, dir.path());
    a.generate_cot(&t, 0).unwrap();
    a.generate_cot(&t, 2).unwrap();
    let reqs = client.requests();
    let img = |r: &cuakit_cot::ModelRequest| {
        r.messages
            .iter()
            .flat_map(|m| &m.parts)
            .find_map(|p| match p {
                cuakit_cot::Part::Image { path, .. } => Some(path.clone()),
                _ => None,
            })
            .unwrap()
    };
    // Step 0 is a click, step 2 a write.
    assert!(img(&reqs[0]).contains("cues"));
    assert!(img(&reqs[1]).ends_with("frames/000002.png"));
}

#[test]
fn summary_scores_and_range_check() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 2);
    let s = annotator(&MockClient::new(), dir.path())
        .summarize_trajectory(&t)
        .unwrap();
    assert_eq!((s.alignment, s.efficiency, s.difficulty), (7, 8, 5));
    assert!(!s.refined_instruction.is_empty());

    let cache_dir = dir.path().join("cache");
    let cached = CachedClient::new(&cache_dir, Box::new(MockClient::new())).unwrap();
    let a = annotator(&cached, dir.path());
    assert_eq!(
        a.summarize_trajectory(&t).unwrap(),
        a.summarize_trajectory(&t).unwrap()
    );

    let bad = MockClient::new().with_reply(
        RequestKind::Summarize,
        "<refined_instruction>x</refined_instruction><score_alignment>7</score_alignment>\
<score_efficiency>12</score_efficiency><score_difficulty>5</score_difficulty>",
    );
    let err = annotator(&bad, dir.path())
        .summarize_trajectory(&t)
        .unwrap_err();
    assert_eq!(err.code(), "verdict_parse_error");
}

#[test]
fn privacy_levels() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 2);
    let none = MockClient::new().with_reply(RequestKind::Privacy, "None");
    assert_eq!(
        annotator(&none, dir.path()).classify_privacy(&t).unwrap(),
        PrivacyLevel::None
    );
    let high = MockClient::new().with_reply(RequestKind::Privacy, "High");
    assert_eq!(
        annotator(&high, dir.path()).classify_privacy(&t).unwrap(),
        PrivacyLevel::High
    );
    let odd = MockClient::new().with_reply(RequestKind::Privacy, "Confidential");
    assert_eq!(
        annotator(&odd, dir.path())
            .classify_privacy(&t)
            .unwrap_err()
            .code(),
        "verdict_parse_error"
    );
}

#[test]
fn retries_then_surfaces_the_error() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 2);
    let flaky = ScriptedClient::new([
        Err(CotError::Backend("timeout".into())),
        Ok("garbage".into()),
        Ok(CORRECT.into()),
    ]);
    let v = annotator(&flaky, dir.path()).reflect_step(&t, 0).unwrap();
    assert!(v.is_correct());
    let attempts: Vec<u32> = flaky.requests().iter().map(|r| r.attempt).collect();
    assert_eq!(attempts, [0, 1, 2]);

    let down = ScriptedClient::new((0..3).map(|_| Err(CotError::Backend("down".into()))));
    let err = annotator(&down, dir.path())
        .reflect_step(&t, 0)
        .unwrap_err();
    assert_eq!(err.code(), "backend_error");
    assert_eq!(down.requests().len(), 3);
}

#[test]
fn failed_step_is_recorded_and_the_pass_continues() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 3);
    // Step 0 reflect fails three times; the rest fall back to the mock.
    let client = ScriptedClient::new((0..3).map(|_| Err(CotError::Backend("down".into()))))
        .with_fallback(
            MockClient::new()
                .with_reply(RequestKind::Reflect, CORRECT)
                .with_reply(RequestKind::Generate, COT),
        );
    let out = annotator(&client, dir.path()).annotate(&t).unwrap();
    assert_eq!(out.annotation_errors.len(), 1);
    assert!(out.annotation_errors[&0].starts_with("backend_error"));
    assert!(out.steps[0].cot.is_none());
    for s in &out.steps[1..] {
        assert!(s.verdict.as_ref().unwrap().is_correct());
        assert!(s.cot.is_some());
    }
    assert!(out.summary.is_some());
    assert_eq!(out.privacy, Some(PrivacyLevel::None));
    assert_eq!(out.refined_instruction.as_deref(), Some("Fill in the form"));
}

#[test]
fn annotation_with_cache_is_reproducible() {
    let dir = tempdir().unwrap();
    let t = fixture(dir.path(), 6);
    let cache_dir = dir.path().join("cache");
    let live = CachedClient::new(&cache_dir, Box::new(MockClient::new())).unwrap();
    let a = annotator(&live, dir.path()).annotate(&t).unwrap();
    let replay = CachedClient::replay(&cache_dir).unwrap();
    let b = annotator(&replay, dir.path()).annotate(&t).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(replay.misses(), 0);
}
