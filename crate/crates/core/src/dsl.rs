//! Parser and canonical printer for the agent action language.
//!
//! The language is the subset of pyautogui calls in the action space plus the
//! `computer.*` function-call actions. See `docs/action-grammar.md` for the
//! grammar. Only whitelisted call forms are recognized; nothing is evaluated.

use thiserror::Error;

use crate::keys::{canonical_hotkey, Key};
use crate::model::{AgentAction, Button, Point, TaskStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("unsupported action `{name}` at byte {offset}")]
    UnsupportedAction { name: String, offset: usize },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("domain error at byte {offset}: {message}")]
    Domain { offset: usize, message: String },
    #[error("no parsable action in response")]
    NoAction,
}

impl DslError {
    pub fn code(&self) -> &'static str {
        match self {
            DslError::UnsupportedAction { .. } => "unsupported_action",
            DslError::Parse { .. } => "parse_error",
            DslError::Domain { .. } => "domain_error",
            DslError::NoAction => "no_action",
        }
    }

    fn shifted(self, base: usize) -> Self {
        match self {
            DslError::UnsupportedAction { name, offset } => DslError::UnsupportedAction {
                name,
                offset: offset + base,
            },
            DslError::Parse { offset, message } => DslError::Parse {
                offset: offset + base,
                message,
            },
            DslError::Domain { offset, message } => DslError::Domain {
                offset: offset + base,
                message,
            },
            DslError::NoAction => DslError::NoAction,
        }
    }
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T, DslError> {
    Err(DslError::Parse {
        offset,
        message: message.into(),
    })
}

fn domain_err<T>(offset: usize, message: impl Into<String>) -> Result<T, DslError> {
    Err(DslError::Domain {
        offset,
        message: message.into(),
    })
}

/// Parse-time context. With a resolution, integer pixel coordinates greater
/// than one are normalized; without one they are rejected.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub resolution: Option<(u32, u32)>,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Dot,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' | b')' | b'[' | b']' | b',' | b'=' => {
                let tok = match c {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b',' => Tok::Comma,
                    _ => Tok::Eq,
                };
                out.push(Token { tok, offset: start });
                i += 1;
            }
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                out.push(Token {
                    tok: Tok::Dot,
                    offset: start,
                });
                i += 1;
            }
            b'\'' | b'"' => {
                let (s, next) = lex_string(src, i)?;
                out.push(Token {
                    tok: Tok::Str(s),
                    offset: start,
                });
                i = next;
            }
            b'-' | b'+' | b'.' | b'0'..=b'9' => {
                i += 1;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || matches!(bytes[i], b'.' | b'e' | b'E')
                        || (matches!(bytes[i], b'-' | b'+') && matches!(bytes[i - 1], b'e' | b'E')))
                {
                    i += 1;
                }
                let text = &src[start..i];
                let is_float = text.contains(['.', 'e', 'E']);
                let tok = if is_float {
                    match text.parse::<f64>() {
                        Ok(v) if v.is_finite() => Tok::Float(v),
                        _ => return parse_err(start, format!("bad number `{text}`")),
                    }
                } else {
                    match text.parse::<i64>() {
                        Ok(v) => Tok::Int(v),
                        Err(_) => return parse_err(start, format!("bad number `{text}`")),
                    }
                };
                out.push(Token { tok, offset: start });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return parse_err(start, format!("unexpected character {ch:?}"));
            }
        }
    }
    Ok(out)
}

/// Lex a Python string literal starting at `start`; returns the decoded
/// string and the offset just past the closing quote.
fn lex_string(src: &str, start: usize) -> Result<(String, usize), DslError> {
    let quote = src.as_bytes()[start] as char;
    let mut out = String::new();
    let mut chars = src[start + 1..].char_indices();
    while let Some((rel, c)) = chars.next() {
        let at = start + 1 + rel;
        match c {
            c if c == quote => return Ok((out, at + 1)),
            '\\' => {
                let Some((_, e)) = chars.next() else {
                    return parse_err(at, "unterminated escape");
                };
                match e {
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    '0' => out.push('\0'),
                    '\\' | '\'' | '"' => out.push(e),
                    'x' | 'u' => {
                        let len = if e == 'x' { 2 } else { 4 };
                        let mut hex = String::new();
                        for _ in 0..len {
                            match chars.next() {
                                Some((_, h)) => hex.push(h),
                                None => return parse_err(at, "truncated escape"),
                            }
                        }
                        let code = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32);
                        match code {
                            Some(ch) => out.push(ch),
                            None => return parse_err(at, format!("bad escape \\{e}{hex}")),
                        }
                    }
                    other => {
                        out.push('\\');
                        out.push(other);
                    }
                }
            }
            c => out.push(c),
        }
    }
    parse_err(start, "unterminated string")
}

// ---------------------------------------------------------------------------
// Call syntax
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Ident(String),
    List(Vec<Value>),
}

#[derive(Debug, Clone)]
struct Arg {
    name: Option<String>,
    value: Value,
    offset: usize,
}

#[derive(Debug)]
struct Call {
    name: String,
    offset: usize,
    args: Vec<Arg>,
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|t| t.offset)
            .unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), DslError> {
        let off = self.offset();
        match self.next() {
            Some(t) if t.tok == want => Ok(()),
            _ => parse_err(off, format!("expected {what}")),
        }
    }
}

fn parse_call(src: &str) -> Result<Call, DslError> {
    let toks = lex(src)?;
    let mut cur = Cursor {
        toks,
        pos: 0,
        end: src.len(),
    };
    let offset = cur.offset();
    let mut name = match cur.next() {
        Some(Token {
            tok: Tok::Ident(s), ..
        }) => s,
        _ => return parse_err(offset, "expected function name"),
    };
    while cur.peek() == Some(&Tok::Dot) {
        cur.next();
        let off = cur.offset();
        match cur.next() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => {
                name.push('.');
                name.push_str(&s);
            }
            _ => return parse_err(off, "expected identifier after `.`"),
        }
    }
    cur.expect(Tok::LParen, "`(`")?;
    let mut args = Vec::new();
    loop {
        if cur.peek() == Some(&Tok::RParen) {
            cur.next();
            break;
        }
        let arg_off = cur.offset();
        let mut arg_name = None;
        if let (Some(Tok::Ident(n)), Some(Tok::Eq)) = (
            cur.toks.get(cur.pos).map(|t| &t.tok),
            cur.toks.get(cur.pos + 1).map(|t| &t.tok),
        ) {
            arg_name = Some(n.clone());
            cur.pos += 2;
        }
        let value = parse_value(&mut cur)?;
        if arg_name.is_none() && args.iter().any(|a: &Arg| a.name.is_some()) {
            return parse_err(arg_off, "positional argument after keyword argument");
        }
        args.push(Arg {
            name: arg_name,
            value,
            offset: arg_off,
        });
        let off = cur.offset();
        match cur.next().map(|t| t.tok) {
            Some(Tok::Comma) => continue,
            Some(Tok::RParen) => break,
            _ => return parse_err(off, "expected `,` or `)`"),
        }
    }
    if let Some(t) = cur.toks.get(cur.pos) {
        return parse_err(t.offset, "trailing input after call");
    }
    Ok(Call { name, offset, args })
}

fn parse_value(cur: &mut Cursor) -> Result<Value, DslError> {
    let off = cur.offset();
    match cur.next().map(|t| t.tok) {
        Some(Tok::Int(v)) => Ok(Value::Int(v)),
        Some(Tok::Float(v)) => Ok(Value::Float(v)),
        Some(Tok::Str(s)) => Ok(Value::Str(s)),
        Some(Tok::Ident(s)) => Ok(Value::Ident(s)),
        Some(open @ (Tok::LBracket | Tok::LParen)) => {
            let close = if open == Tok::LBracket {
                Tok::RBracket
            } else {
                Tok::RParen
            };
            let mut items = Vec::new();
            loop {
                if cur.peek() == Some(&close) {
                    cur.next();
                    return Ok(Value::List(items));
                }
                items.push(parse_value(cur)?);
                let off = cur.offset();
                match cur.next().map(|t| t.tok) {
                    Some(Tok::Comma) => {}
                    Some(t) if t == close => return Ok(Value::List(items)),
                    _ => return parse_err(off, "expected `,` or closing bracket"),
                }
            }
        }
        _ => parse_err(off, "expected a value"),
    }
}

// ---------------------------------------------------------------------------
// Binding call arguments to action fields
// ---------------------------------------------------------------------------

/// Parameters accepted for compatibility and ignored.
const IGNORED: &[&str] = &["interval", "duration", "tween", "_pause", "logScreenshot"];

struct Bound {
    slots: Vec<(&'static str, Option<Arg>)>,
    rest: Vec<Arg>,
}

impl Bound {
    fn take(&mut self, name: &str) -> Option<Arg> {
        self.slots
            .iter_mut()
            .find(|(n, _)| *n == name)
            .and_then(|(_, a)| a.take())
    }
}

fn bind(call: &Call, params: &[&'static str], varargs: bool) -> Result<Bound, DslError> {
    let mut slots: Vec<(&'static str, Option<Arg>)> = params.iter().map(|p| (*p, None)).collect();
    let mut rest = Vec::new();
    let mut positional = 0;
    for arg in &call.args {
        match &arg.name {
            None if varargs => rest.push(arg.clone()),
            None => {
                if positional >= slots.len() {
                    return parse_err(arg.offset, "too many positional arguments");
                }
                slots[positional].1 = Some(arg.clone());
                positional += 1;
            }
            Some(n) => {
                if let Some(slot) = slots.iter_mut().find(|(p, _)| p == n) {
                    if slot.1.is_some() {
                        return parse_err(arg.offset, format!("argument `{n}` given twice"));
                    }
                    slot.1 = Some(arg.clone());
                } else if !IGNORED.contains(&n.as_str()) {
                    return parse_err(arg.offset, format!("unexpected keyword argument `{n}`"));
                }
            }
        }
    }
    Ok(Bound { slots, rest })
}

fn coord(arg: &Arg, extent: Option<u32>, axis: &str) -> Result<f64, DslError> {
    match arg.value {
        Value::Float(v) => {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                domain_err(arg.offset, format!("{axis}={v} outside [0,1]"))
            }
        }
        Value::Int(v) if v == 0 || v == 1 => Ok(v as f64),
        Value::Int(v) if v > 1 => match extent {
            Some(ext) if v as u64 <= ext as u64 => Ok(v as f64 / ext as f64),
            Some(ext) => domain_err(arg.offset, format!("{axis}={v} beyond resolution {ext}")),
            None => domain_err(
                arg.offset,
                format!("pixel coordinate {axis}={v} without a resolution"),
            ),
        },
        Value::Int(v) => domain_err(arg.offset, format!("{axis}={v} is negative")),
        _ => parse_err(arg.offset, format!("{axis} must be a number")),
    }
}

fn point(b: &mut Bound, call: &Call, opts: &ParseOptions) -> Result<Point, DslError> {
    let x = b.take("x");
    let y = b.take("y");
    match (x, y) {
        (Some(x), Some(y)) => Ok(Point::new(
            coord(&x, opts.resolution.map(|r| r.0), "x")?,
            coord(&y, opts.resolution.map(|r| r.1), "y")?,
        )),
        _ => parse_err(call.offset, format!("`{}` needs x and y", call.name)),
    }
}

fn opt_point(b: &mut Bound, call: &Call, opts: &ParseOptions) -> Result<Option<Point>, DslError> {
    let x = b.take("x");
    let y = b.take("y");
    match (x, y) {
        (None, None) => Ok(None),
        (Some(x), Some(y)) => Ok(Some(Point::new(
            coord(&x, opts.resolution.map(|r| r.0), "x")?,
            coord(&y, opts.resolution.map(|r| r.1), "y")?,
        ))),
        _ => parse_err(call.offset, "x and y must be given together"),
    }
}

fn string(arg: &Arg, what: &str) -> Result<String, DslError> {
    match &arg.value {
        Value::Str(s) => Ok(s.clone()),
        _ => parse_err(arg.offset, format!("{what} must be a string")),
    }
}

fn int(arg: &Arg, what: &str) -> Result<i64, DslError> {
    match arg.value {
        Value::Int(v) => Ok(v),
        _ => parse_err(arg.offset, format!("{what} must be an integer")),
    }
}

fn button(b: &mut Bound) -> Result<Button, DslError> {
    let Some(arg) = b.take("button") else {
        return Ok(Button::Left);
    };
    match string(&arg, "button")?.to_ascii_lowercase().as_str() {
        "left" | "primary" => Ok(Button::Left),
        "right" | "secondary" => Ok(Button::Right),
        "middle" => Ok(Button::Middle),
        other => domain_err(arg.offset, format!("unknown button `{other}`")),
    }
}

fn key(arg: &Arg, value: &Value) -> Result<Key, DslError> {
    match value {
        Value::Str(s) | Value::Ident(s) => Key::parse(s).map_err(|e| DslError::Parse {
            offset: arg.offset,
            message: e.to_string(),
        }),
        _ => parse_err(arg.offset, "key must be a string"),
    }
}

fn clicks_action(
    at: Point,
    button: Button,
    count: i64,
    offset: usize,
) -> Result<AgentAction, DslError> {
    Ok(match (count, button) {
        (1, Button::Middle) => AgentAction::MiddleClick { at },
        (1, _) => AgentAction::Click { at, button },
        (2, _) => AgentAction::DoubleClick { at, button },
        (3, _) => AgentAction::TripleClick { at, button },
        _ => return domain_err(offset, format!("unsupported click count {count}")),
    })
}

fn scroll_action(
    call: &Call,
    b: &mut Bound,
    opts: &ParseOptions,
    horizontal: bool,
) -> Result<AgentAction, DslError> {
    let clicks = b.take("clicks");
    let dx = b.take("dx");
    let dy = b.take("dy");
    let at = opt_point(b, call, opts)?;
    let amount = match (clicks, dx, dy) {
        (Some(c), None, None) => int(&c, "clicks")?,
        (None, dx, dy) if dx.is_some() || dy.is_some() => {
            let dxv = dx.as_ref().map(|a| int(a, "dx")).transpose()?.unwrap_or(0);
            let dyv = dy.as_ref().map(|a| int(a, "dy")).transpose()?.unwrap_or(0);
            match (dxv != 0, dyv != 0) {
                (true, true) => {
                    return domain_err(call.offset, "scroll mixes horizontal and vertical deltas")
                }
                (true, false) if !horizontal => {
                    return Ok(AgentAction::HScroll {
                        clicks: clamp_i32(dxv, call.offset)?,
                        at,
                    })
                }
                (false, true) if horizontal => {
                    return Ok(AgentAction::Scroll {
                        clicks: clamp_i32(dyv, call.offset)?,
                        at,
                    })
                }
                _ => {
                    if horizontal {
                        dxv
                    } else {
                        dyv
                    }
                }
            }
        }
        (None, None, None) => return parse_err(call.offset, "scroll needs an amount"),
        _ => return parse_err(call.offset, "give either clicks or dx/dy"),
    };
    if amount == 0 {
        return domain_err(call.offset, "scroll amount is zero");
    }
    let clicks = clamp_i32(amount, call.offset)?;
    Ok(if horizontal {
        AgentAction::HScroll { clicks, at }
    } else {
        AgentAction::Scroll { clicks, at }
    })
}

fn clamp_i32(v: i64, offset: usize) -> Result<i32, DslError> {
    i32::try_from(v).or_else(|_| domain_err(offset, "scroll amount out of range"))
}

/// Interpret one call. Returns the action plus a repeat count (only `press`
/// with `presses=n` repeats).
fn interpret(call: &Call, opts: &ParseOptions) -> Result<(AgentAction, usize), DslError> {
    let (ns, func) = match call.name.rsplit_once('.') {
        Some((ns, f)) => (ns, f),
        None => ("", call.name.as_str()),
    };
    let unsupported = || DslError::UnsupportedAction {
        name: call.name.clone(),
        offset: call.offset,
    };
    let once = |a: AgentAction| Ok((a, 1));
    match (ns, func) {
        ("pyautogui", "click") => {
            let mut b = bind(
                call,
                &["x", "y", "clicks", "interval", "button", "duration"],
                false,
            )?;
            let at = point(&mut b, call, opts)?;
            let count = b.take("clicks").map(|a| int(&a, "clicks")).transpose()?;
            let btn = button(&mut b)?;
            once(clicks_action(at, btn, count.unwrap_or(1), call.offset)?)
        }
        ("pyautogui", "rightClick") => {
            let mut b = bind(call, &["x", "y"], false)?;
            let at = point(&mut b, call, opts)?;
            once(AgentAction::Click {
                at,
                button: Button::Right,
            })
        }
        ("pyautogui", "middleClick") => {
            let mut b = bind(call, &["x", "y"], false)?;
            once(AgentAction::MiddleClick {
                at: point(&mut b, call, opts)?,
            })
        }
        ("pyautogui", "doubleClick") | ("pyautogui", "tripleClick") => {
            let mut b = bind(call, &["x", "y", "interval", "button", "duration"], false)?;
            let at = point(&mut b, call, opts)?;
            let btn = button(&mut b)?;
            once(if func == "doubleClick" {
                AgentAction::DoubleClick { at, button: btn }
            } else {
                AgentAction::TripleClick { at, button: btn }
            })
        }
        ("computer", "triple_click") => {
            let mut b = bind(call, &["x", "y"], false)?;
            once(AgentAction::TripleClick {
                at: point(&mut b, call, opts)?,
                button: Button::Left,
            })
        }
        ("pyautogui", "moveTo") => {
            let mut b = bind(call, &["x", "y", "duration"], false)?;
            once(AgentAction::MoveTo {
                at: point(&mut b, call, opts)?,
            })
        }
        ("pyautogui", "dragTo") => {
            let mut b = bind(call, &["x", "y", "duration", "tween", "button"], false)?;
            let at = point(&mut b, call, opts)?;
            button(&mut b)?;
            once(AgentAction::DragTo { at })
        }
        ("pyautogui", "scroll") | ("pyautogui", "hscroll") | ("pyautogui", "vscroll") => {
            let mut b = bind(call, &["clicks", "x", "y", "dx", "dy"], false)?;
            once(scroll_action(call, &mut b, opts, func == "hscroll")?)
        }
        ("pyautogui", "write") | ("pyautogui", "typewrite") => {
            let mut b = bind(call, &["message", "interval"], false)?;
            let Some(arg) = b.take("message") else {
                return parse_err(call.offset, "write needs a message");
            };
            let text = match &arg.value {
                Value::Str(s) => s.clone(),
                Value::List(items) => {
                    return domain_err(
                        arg.offset,
                        format!("write with a key list ({} keys) is not text", items.len()),
                    )
                }
                _ => return parse_err(arg.offset, "message must be a string"),
            };
            if text.is_empty() {
                return domain_err(arg.offset, "write text is empty");
            }
            once(AgentAction::Write { text })
        }
        ("pyautogui", "press") => {
            let mut b = bind(call, &["keys", "presses", "interval"], false)?;
            let Some(arg) = b.take("keys") else {
                return parse_err(call.offset, "press needs a key");
            };
            let k = match &arg.value {
                Value::List(items) if items.len() == 1 => key(&arg, &items[0])?,
                Value::List(_) => return parse_err(arg.offset, "press takes one key per call"),
                v => key(&arg, v)?,
            };
            let presses = b
                .take("presses")
                .map(|a| int(&a, "presses"))
                .transpose()?
                .unwrap_or(1);
            if presses < 1 {
                return domain_err(call.offset, "presses must be at least 1");
            }
            Ok((AgentAction::Press { key: k }, presses as usize))
        }
        ("pyautogui", "hotkey") => {
            let b = bind(call, &[], true)?;
            let mut keys = Vec::new();
            for arg in &b.rest {
                match &arg.value {
                    Value::List(items) => {
                        for item in items {
                            keys.push(key(arg, item)?);
                        }
                    }
                    v => keys.push(key(arg, v)?),
                }
            }
            let keys = canonical_hotkey(keys);
            match keys.len() {
                0 => parse_err(call.offset, "hotkey needs keys"),
                1 => once(AgentAction::Press {
                    key: keys.into_iter().next().expect("one key"),
                }),
                _ => once(AgentAction::Hotkey { keys }),
            }
        }
        ("computer", "wait") | ("pyautogui", "sleep") => {
            // Durations are accepted and dropped; wait carries no parameter.
            let _ = bind(call, &["seconds"], false)?;
            once(AgentAction::Wait)
        }
        ("computer", "terminate") => {
            let mut b = bind(call, &["status", "answer"], false)?;
            let Some(arg) = b.take("status") else {
                return parse_err(call.offset, "terminate needs a status");
            };
            let status = match string(&arg, "status")?.to_ascii_lowercase().as_str() {
                "success" => TaskStatus::Success,
                "failure" | "fail" | "failed" => TaskStatus::Failure,
                other => return domain_err(arg.offset, format!("unknown status `{other}`")),
            };
            once(AgentAction::Terminate { status })
        }
        _ => Err(unsupported()),
    }
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Strip an optional code fence (```` ``` ```` or `'''`, with an optional
/// language tag). Returns the inner slice and its byte offset.
fn strip_fence(text: &str) -> (&str, usize) {
    let trimmed_start = text.len() - text.trim_start().len();
    let t = text.trim();
    for fence in ["```", "'''"] {
        if let Some(inner) = t.strip_prefix(fence).and_then(|s| s.strip_suffix(fence)) {
            let mut body = inner;
            let mut off = trimmed_start + fence.len();
            let tag_len = body
                .find(|c: char| !c.is_ascii_alphanumeric())
                .unwrap_or(body.len());
            let after_tag = &body[tag_len..];
            if tag_len > 0 && (after_tag.starts_with('\n') || after_tag.starts_with("\\n")) {
                let nl = if after_tag.starts_with('\n') { 1 } else { 2 };
                off += tag_len + nl;
                body = &body[tag_len + nl..];
            }
            return (body, off);
        }
    }
    (t, trimmed_start)
}

/// Parse a single action expression, optionally fenced.
pub fn parse_action(text: &str) -> Result<AgentAction, DslError> {
    parse_action_with(text, &ParseOptions::default())
}

pub fn parse_action_with(text: &str, opts: &ParseOptions) -> Result<AgentAction, DslError> {
    let (body, base) = strip_fence(text);
    let call = parse_call(body).map_err(|e| e.shifted(base))?;
    interpret(&call, opts)
        .map(|(a, _)| a)
        .map_err(|e| e.shifted(base))
}

/// Split a code block into top-level statements (newline or `;` separated,
/// ignoring separators inside strings and brackets). Comment lines and
/// imports are skipped. Returns `(offset, statement)` pairs.
pub fn split_statements(code: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let bytes = code.as_bytes();
    let mut depth = 0i32;
    let mut quote: Option<u8> = None;
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) => {
                if c == b'\\' {
                    i += 1;
                } else if c == q {
                    quote = None;
                }
            }
            None => match c {
                b'\'' | b'"' => quote = Some(c),
                b'(' | b'[' => depth += 1,
                b')' | b']' => depth -= 1,
                b'\n' | b';' if depth <= 0 => {
                    push_statement(code, start, i, &mut out);
                    start = i + 1;
                }
                _ => {}
            },
        }
        i += 1;
    }
    push_statement(code, start, bytes.len(), &mut out);
    out
}

fn push_statement<'a>(code: &'a str, s: usize, e: usize, out: &mut Vec<(usize, &'a str)>) {
    let piece = &code[s..e];
    let lead = piece.len() - piece.trim_start().len();
    let stmt = piece.trim();
    if !stmt.is_empty()
        && !stmt.starts_with('#')
        && !stmt.starts_with("import ")
        && !stmt.starts_with("from ")
    {
        out.push((s + lead, stmt));
    }
}

/// Parse a whole code block into an action sequence. `press(k, presses=n)`
/// expands into `n` press actions.
pub fn parse_program(code: &str, opts: &ParseOptions) -> Result<Vec<AgentAction>, DslError> {
    let (body, base) = strip_fence(code);
    let mut out = Vec::new();
    for (off, stmt) in split_statements(body) {
        let call = parse_call(stmt).map_err(|e| e.shifted(base + off))?;
        let (action, repeat) = interpret(&call, opts).map_err(|e| e.shifted(base + off))?;
        out.extend(std::iter::repeat(action).take(repeat));
    }
    Ok(out)
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.4}")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c if c.is_control() => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn xy(at: Point) -> String {
    format!("x={}, y={}", fmt_coord(at.x), fmt_coord(at.y))
}

fn with_button(at: Point, button: Button) -> String {
    match button {
        Button::Left => xy(at),
        b => format!("{}, button='{}'", xy(at), b.as_str()),
    }
}

/// Canonical text form: keyword arguments, four-decimal coordinates, single
/// quoted strings.
pub fn render_action(action: &AgentAction) -> String {
    match action {
        AgentAction::Click { at, button } => {
            format!("pyautogui.click({})", with_button(*at, *button))
        }
        AgentAction::MiddleClick { at } => format!("pyautogui.middleClick({})", xy(*at)),
        AgentAction::DoubleClick { at, button } => {
            format!("pyautogui.doubleClick({})", with_button(*at, *button))
        }
        AgentAction::TripleClick { at, button } => {
            format!("pyautogui.tripleClick({})", with_button(*at, *button))
        }
        AgentAction::MoveTo { at } => format!("pyautogui.moveTo({})", xy(*at)),
        AgentAction::DragTo { at } => format!("pyautogui.dragTo({})", xy(*at)),
        AgentAction::Scroll { clicks, at } | AgentAction::HScroll { clicks, at } => {
            let func = if matches!(action, AgentAction::Scroll { .. }) {
                "scroll"
            } else {
                "hscroll"
            };
            match at {
                Some(p) => format!("pyautogui.{func}(clicks={clicks}, {})", xy(*p)),
                None => format!("pyautogui.{func}(clicks={clicks})"),
            }
        }
        AgentAction::Write { text } => format!("pyautogui.write(message={})", quote(text)),
        AgentAction::Press { key } => format!("pyautogui.press({})", quote(key.as_str())),
        AgentAction::Hotkey { keys } => {
            let parts: Vec<String> = keys.iter().map(|k| quote(k.as_str())).collect();
            format!("pyautogui.hotkey({})", parts.join(", "))
        }
        AgentAction::Wait => "computer.wait()".to_string(),
        AgentAction::Terminate { status } => {
            format!("computer.terminate(status='{}')", status.as_str())
        }
    }
}

/// Serde adapter storing an action as its canonical text.
pub mod serde_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::model::AgentAction;

    pub fn serialize<S: Serializer>(action: &AgentAction, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::render_action(action))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<AgentAction, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_action(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(s: &str) -> Key {
        Key::parse(s).unwrap()
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
        assert_eq!(
            parse_action("pyautogui.moveTo(x=0.0, y=0.0)").unwrap(),
            AgentAction::MoveTo {
                at: Point::new(0.0, 0.0)
            }
        );
        assert_eq!(
            parse_action("pyautogui.hotkey('ctrl','shift','t')").unwrap(),
            AgentAction::Hotkey {
                keys: vec![k("ctrl"), k("shift"), k("t")]
            }
        );
    }

    #[test]
    fn canonical_rendering() {
        let click = AgentAction::Click {
            at: Point::new(0.5, 0.5),
            button: Button::Left,
        };
        assert_eq!(render_action(&click), "pyautogui.click(x=0.5000, y=0.5000)");
        assert_eq!(
            render_action(&AgentAction::Terminate {
                status: TaskStatus::Failure
            }),
            "computer.terminate(status='failure')"
        );
        assert_eq!(
            render_action(&AgentAction::Write {
                text: "it's\n".into()
            }),
            r"pyautogui.write(message='it\'s\n')"
        );
    }

    #[test]
    fn positional_and_keyword_forms_agree() {
        let a = parse_action("pyautogui.click(0.25, 0.75, button='right')").unwrap();
        let b = parse_action("pyautogui.rightClick(x=0.25, y=0.75)").unwrap();
        assert_eq!(a, b);
        let c = parse_action("pyautogui.click(x=0.1, y=0.2, clicks=2)").unwrap();
        assert!(matches!(c, AgentAction::DoubleClick { .. }));
        let m = parse_action("pyautogui.click(x=0.1, y=0.2, button='middle')").unwrap();
        assert!(matches!(m, AgentAction::MiddleClick { .. }));
    }

    #[test]
    fn fenced_input() {
        let a = parse_action("```python\npyautogui.press('Return')\n```").unwrap();
        assert_eq!(a, AgentAction::Press { key: k("enter") });
        let b = parse_action("'''python\\npyautogui.click(x=0.157, y=0.1229)'''").unwrap();
        assert!(matches!(b, AgentAction::Click { .. }));
    }

    #[test]
    fn scroll_forms() {
        assert_eq!(
            parse_action("pyautogui.scroll(-5)").unwrap(),
            AgentAction::Scroll {
                clicks: -5,
                at: None
            }
        );
        assert_eq!(
            parse_action("pyautogui.scroll(dx=0, dy=-5, x=0.5, y=0.5)").unwrap(),
            AgentAction::Scroll {
                clicks: -5,
                at: Some(Point::new(0.5, 0.5))
            }
        );
        assert_eq!(
            parse_action("pyautogui.scroll(dx=3)").unwrap(),
            AgentAction::HScroll {
                clicks: 3,
                at: None
            }
        );
        assert_eq!(
            parse_action("pyautogui.scroll(0)").unwrap_err().code(),
            "domain_error"
        );
    }

    #[test]
    fn error_kinds() {
        let e = parse_action("pyautogui.screenshot()").unwrap_err();
        assert_eq!(e.code(), "unsupported_action");
        let e = parse_action("os.system('rm -rf /')").unwrap_err();
        assert_eq!(e.code(), "unsupported_action");
        let e = parse_action("pyautogui.click(x=0.5, y=").unwrap_err();
        assert!(matches!(e, DslError::Parse { offset: 25, .. }), "{e:?}");
        let e = parse_action("pyautogui.click(x=1.5, y=0.2)").unwrap_err();
        assert_eq!(e.code(), "domain_error");
        let e = parse_action("pyautogui.click(x=640, y=360)").unwrap_err();
        assert_eq!(e.code(), "domain_error");
        let e = parse_action("pyautogui.write(message='')").unwrap_err();
        assert_eq!(e.code(), "domain_error");
        let e = parse_action("pyautogui.press('nosuchkey')").unwrap_err();
        assert_eq!(e.code(), "parse_error");
        let e = parse_action("pyautogui.click(x=0.1, y=0.1, speed=3)").unwrap_err();
        assert_eq!(e.code(), "parse_error");
    }

    #[test]
    fn pixel_coordinates_with_resolution() {
        let opts = ParseOptions {
            resolution: Some((1920, 1080)),
        };
        let a = parse_action_with("pyautogui.click(x=960, y=540)", &opts).unwrap();
        assert_eq!(a.point(), Some(Point::new(0.5, 0.5)));
        let e = parse_action_with("pyautogui.click(x=2000, y=540)", &opts).unwrap_err();
        assert_eq!(e.code(), "domain_error");
    }

    #[test]
    fn program_expands_repeated_presses() {
        let prog = parse_program(
            "import pyautogui\npyautogui.press('down', presses=3); pyautogui.write(message='a;b\\nc')",
            &ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(prog.len(), 4);
        assert_eq!(prog[0], AgentAction::Press { key: k("down") });
        assert_eq!(
            prog[3],
            AgentAction::Write {
                text: "a;b\nc".into()
            }
        );
        assert_eq!(
            parse_action("pyautogui.press('down', presses=3)").unwrap(),
            AgentAction::Press { key: k("down") }
        );
    }

    #[test]
    fn hotkey_single_key_collapses_to_press() {
        assert_eq!(
            parse_action("pyautogui.hotkey('enter')").unwrap(),
            AgentAction::Press { key: k("enter") }
        );
        assert_eq!(
            parse_action("pyautogui.hotkey(['shift', 'ctrl', 'T'])").unwrap(),
            AgentAction::Hotkey {
                keys: vec![k("ctrl"), k("shift"), k("t")]
            }
        );
    }

    #[test]
    fn triple_click_function_form() {
        assert_eq!(
            parse_action("computer.triple_click(x=0.3, y=0.4)").unwrap(),
            AgentAction::TripleClick {
                at: Point::new(0.3, 0.4),
                button: Button::Left
            }
        );
    }
}
