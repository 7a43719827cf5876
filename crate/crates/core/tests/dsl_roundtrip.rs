use cuakit_core::dsl::{parse_action, render_action};
use cuakit_core::keys::Key;
use cuakit_core::model::{AgentAction, Button, Point, TaskStatus};
use cuakit_core::response::extract_response;
use proptest::prelude::*;

const MODS: [&str; 5] = ["ctrl", "alt", "shift", "cmd", "win"];
const NAMED: [&str; 24] = [
    "enter",
    "esc",
    "tab",
    "space",
    "backspace",
    "delete",
    "insert",
    "home",
    "end",
    "pageup",
    "pagedown",
    "up",
    "down",
    "left",
    "right",
    "capslock",
    "numlock",
    "scrolllock",
    "printscreen",
    "pause",
    "menu",
    "volumeup",
    "volumedown",
    "volumemute",
];
const CHARS: &str = "abcdefghijklmnopqrstuvwxyz0123456789`-=[]\\;',./!@#$%^&*()_+{}|:\"<>?~";

fn vocabulary() -> Vec<String> {
    let mut v: Vec<String> = MODS
        .iter()
        .chain(NAMED.iter())
        .map(|s| s.to_string())
        .collect();
    v.extend((1..=24).map(|n| format!("f{n}")));
    v.extend(CHARS.chars().map(|c| c.to_string()));
    v
}

fn coord() -> impl Strategy<Value = f64> {
    (0u32..=10_000).prop_map(|v| v as f64 / 10_000.0)
}

fn point() -> impl Strategy<Value = Point> {
    (coord(), coord()).prop_map(|(x, y)| Point::new(x, y))
}

fn button() -> impl Strategy<Value = Button> {
    prop_oneof![
        Just(Button::Left),
        Just(Button::Right),
        Just(Button::Middle)
    ]
}

fn key() -> impl Strategy<Value = Key> {
    prop::sample::select(vocabulary()).prop_map(|s| Key::parse(&s).unwrap())
}

fn non_modifier_key() -> impl Strategy<Value = Key> {
    key().prop_filter("non-modifier", |k| !k.is_modifier())
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 '\"\\\\\n\t\r.,;:()\\[\\]{}=+#-]{1,24}|\\PC{1,8}"
        .prop_filter("non-empty", |s: &String| !s.is_empty())
}

fn clicks() -> impl Strategy<Value = i32> {
    prop_oneof![-1000i32..=-1, 1i32..=1000]
}

/// Canonical hotkey built independently: modifiers in fixed rank order,
/// then one non-modifier key.
fn hotkey() -> impl Strategy<Value = Vec<Key>> {
    (
        prop::sample::subsequence(MODS.to_vec(), 1..=3),
        non_modifier_key(),
    )
        .prop_map(|(mods, k)| {
            let mut keys: Vec<Key> = mods.iter().map(|m| Key::parse(m).unwrap()).collect();
            keys.push(k);
            keys
        })
}

fn action() -> impl Strategy<Value = AgentAction> {
    let no_middle = button().prop_filter("click middle is middleClick", |b| *b != Button::Middle);
    prop_oneof![
        (point(), no_middle).prop_map(|(at, button)| AgentAction::Click { at, button }),
        point().prop_map(|at| AgentAction::MiddleClick { at }),
        (point(), button()).prop_map(|(at, button)| AgentAction::DoubleClick { at, button }),
        (point(), button()).prop_map(|(at, button)| AgentAction::TripleClick { at, button }),
        point().prop_map(|at| AgentAction::MoveTo { at }),
        point().prop_map(|at| AgentAction::DragTo { at }),
        (clicks(), prop::option::of(point()))
            .prop_map(|(clicks, at)| AgentAction::Scroll { clicks, at }),
        (clicks(), prop::option::of(point()))
            .prop_map(|(clicks, at)| AgentAction::HScroll { clicks, at }),
        text().prop_map(|text| AgentAction::Write { text }),
        key().prop_map(|key| AgentAction::Press { key }),
        hotkey().prop_map(|keys| AgentAction::Hotkey { keys }),
        Just(AgentAction::Wait),
        prop_oneof![Just(TaskStatus::Success), Just(TaskStatus::Failure)]
            .prop_map(|status| AgentAction::Terminate { status }),
    ]
}

/// Python-literal quoting written independently of the library printer,
/// using double quotes so both quote styles get exercised.
fn py_quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                out.push_str(&format!("\\x{:02x}", c as u32))
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn btn(b: Button) -> &'static str {
    match b {
        Button::Left => "left",
        Button::Right => "right",
        Button::Middle => "middle",
    }
}

/// Alternative surface forms the parser must map onto the same action.
fn alternative_forms(a: &AgentAction) -> Vec<String> {
    match a {
        AgentAction::Click { at, button } => {
            let mut v = vec![format!(
                "pyautogui.click({}, {}, button='{}')",
                at.x,
                at.y,
                btn(*button)
            )];
            if *button == Button::Right {
                v.push(format!("pyautogui.rightClick(x={}, y={})", at.x, at.y));
            }
            v
        }
        AgentAction::MiddleClick { at } => vec![
            format!("pyautogui.click(x={}, y={}, button=\"middle\")", at.x, at.y),
            format!("pyautogui.middleClick({}, {})", at.x, at.y),
        ],
        AgentAction::DoubleClick { at, button } => vec![format!(
            "pyautogui.click(x={}, y={}, clicks=2, interval=0.1, button='{}')",
            at.x,
            at.y,
            btn(*button)
        )],
        AgentAction::TripleClick { at, button } => {
            let mut v = vec![format!(
                "pyautogui.click({}, {}, clicks=3, button='{}')",
                at.x,
                at.y,
                btn(*button)
            )];
            if *button == Button::Left {
                v.push(format!("computer.triple_click(x={}, y={})", at.x, at.y));
            }
            v
        }
        AgentAction::MoveTo { at } => vec![format!(
            "pyautogui.moveTo({}, {}, duration=0.5)",
            at.x, at.y
        )],
        AgentAction::DragTo { at } => vec![format!(
            "pyautogui.dragTo(x={}, y={}, duration=1.0, button='left')",
            at.x, at.y
        )],
        AgentAction::Scroll { clicks, at } => match at {
            Some(p) => vec![format!("pyautogui.scroll({clicks}, x={}, y={})", p.x, p.y)],
            None => vec![
                format!("pyautogui.scroll({clicks})"),
                format!("pyautogui.scroll(dy={clicks})"),
            ],
        },
        AgentAction::HScroll { clicks, at } => match at {
            Some(p) => vec![format!("pyautogui.hscroll({clicks}, {}, {})", p.x, p.y)],
            None => vec![format!("pyautogui.scroll(dx={clicks})")],
        },
        AgentAction::Write { text } => vec![
            format!("pyautogui.write({})", py_quote(text)),
            format!("pyautogui.typewrite({}, interval=0.05)", py_quote(text)),
        ],
        AgentAction::Press { key } => vec![
            format!("pyautogui.press({})", py_quote(key.as_str())),
            format!("pyautogui.press([{}])", py_quote(key.as_str())),
            format!("pyautogui.hotkey({})", py_quote(key.as_str())),
        ],
        AgentAction::Hotkey { keys } => {
            let fwd: Vec<String> = keys.iter().map(|k| py_quote(k.as_str())).collect();
            let rev: Vec<String> = fwd.iter().rev().cloned().collect();
            vec![
                format!("pyautogui.hotkey({})", fwd.join(", ")),
                format!("pyautogui.hotkey([{}])", fwd.join(",")),
                format!("pyautogui.hotkey({})", rev.join(", ")),
            ]
        }
        AgentAction::Wait => vec!["computer.wait()".into()],
        AgentAction::Terminate { status } => {
            let s = match status {
                TaskStatus::Success => "success",
                TaskStatus::Failure => "failure",
            };
            vec![format!("computer.terminate(status=\"{s}\")")]
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn render_then_parse_is_identity(a in action()) {
        let text = render_action(&a);
        prop_assert_eq!(parse_action(&text).unwrap(), a.clone());
        prop_assert_eq!(render_action(&a), text);
    }

    #[test]
    fn alternative_forms_agree(a in action()) {
        for form in alternative_forms(&a) {
            match parse_action(&form) {
                Ok(got) => prop_assert_eq!(&got, &a, "form {}", form),
                Err(e) => prop_assert!(false, "form {} failed: {}", form, e),
            }
        }
    }

    #[test]
    fn fenced_response_yields_the_action(a in action()) {
        let resp = format!("## Action:\nstep\n## Code:\n```python\n{}\n```\n", render_action(&a));
        prop_assert_eq!(extract_response(&resp).unwrap().action, a);
    }
}

#[test]
fn documented_literals() {
    assert_eq!(
        parse_action("pyautogui.click(x=0.157, y=0.1229)").unwrap(),
        AgentAction::Click {
            at: Point::new(0.157, 0.1229),
            button: Button::Left
        }
    );
    assert_eq!(
        parse_action("computer.terminate(status='success')").unwrap(),
        AgentAction::Terminate {
            status: TaskStatus::Success
        }
    );
}

#[test]
fn sample_response_sections() {
    let text = "## Thought:\nI need to open the Format menu to find the list options.\n\n\
## Action:\nClick on the \"Format\" menu in the top menu bar.\n\n\
## Code:\n```python\npyautogui.click(x=0.157, y=0.1229)\n```";
    let r = extract_response(text).unwrap();
    let labels: Vec<&str> = r.sections.iter().map(|(l, _)| l.as_str()).collect();
    assert_eq!(labels, ["Thought", "Action", "Code"]);
    assert_eq!(
        r.action,
        AgentAction::Click {
            at: Point::new(0.157, 0.1229),
            button: Button::Left
        }
    );
}
