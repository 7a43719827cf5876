//! Canonical key vocabulary.
//!
//! Every key name that enters the toolkit, whether from a raw recording, a
//! model response or a benchmark file, is mapped onto one lowercase
//! vocabulary so that equality checks are plain string comparisons.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown key name {0:?}")]
pub struct KeyError(pub String);

/// A canonical key name (`ctrl`, `enter`, `a`, `f5`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Key(String);

const MODIFIERS: [&str; 5] = ["ctrl", "alt", "shift", "cmd", "win"];

const NAMED: &[&str] = &[
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

fn synonym(name: &str) -> Option<&'static str> {
    Some(match name {
        "control" | "ctl" | "ctrlleft" | "ctrlright" | "lctrl" | "rctrl" => "ctrl",
        "option" | "opt" | "altleft" | "altright" | "lalt" | "ralt" => "alt",
        "shiftleft" | "shiftright" | "lshift" | "rshift" => "shift",
        "command" | "meta" | "cmdleft" | "cmdright" => "cmd",
        "super" | "windows" | "winleft" | "winright" => "win",
        "return" | "\n" | "\r" => "enter",
        "escape" => "esc",
        "\t" => "tab",
        " " | "spacebar" => "space",
        "back" | "bksp" => "backspace",
        "del" => "delete",
        "ins" => "insert",
        "pgup" | "page_up" => "pageup",
        "pgdn" | "page_down" => "pagedown",
        "arrowup" | "arrow_up" | "uparrow" => "up",
        "arrowdown" | "arrow_down" | "downarrow" => "down",
        "arrowleft" | "arrow_left" | "leftarrow" => "left",
        "arrowright" | "arrow_right" | "rightarrow" => "right",
        "caps_lock" => "capslock",
        "prtsc" | "prtscr" | "print" | "prntscrn" => "printscreen",
        "apps" => "menu",
        _ => return None,
    })
}

impl Key {
    /// Canonicalize a key name. Accepts synonyms (`control`, `return`, ...)
    /// and single printable characters; letters are lowercased.
    pub fn parse(name: &str) -> Result<Key, KeyError> {
        let mut chars = name.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(canon) = synonym(name) {
                return Ok(Key(canon.to_string()));
            }
            if c.is_control() || c.is_whitespace() {
                return Err(KeyError(name.to_string()));
            }
            return Ok(Key(c.to_lowercase().collect()));
        }
        let lower = name.trim().to_ascii_lowercase();
        if let Some(canon) = synonym(&lower) {
            return Ok(Key(canon.to_string()));
        }
        if MODIFIERS.contains(&lower.as_str()) || NAMED.contains(&lower.as_str()) {
            return Ok(Key(lower));
        }
        if let Some(n) = lower.strip_prefix('f') {
            if let Ok(n) = n.parse::<u8>() {
                if (1..=24).contains(&n) && !n.to_string().starts_with('0') {
                    return Ok(Key(lower));
                }
            }
        }
        Err(KeyError(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_modifier(&self) -> bool {
        self.modifier_rank().is_some()
    }

    /// Position in the canonical modifier order `ctrl < alt < shift < cmd < win`.
    pub fn modifier_rank(&self) -> Option<usize> {
        MODIFIERS.iter().position(|m| *m == self.0)
    }

    /// The character this key types with no modifiers held, if any.
    pub fn printable_char(&self) -> Option<char> {
        if self.0 == "space" {
            return Some(' ');
        }
        let mut chars = self.0.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Some(c),
            _ => None,
        }
    }

    /// The character this key types while shift is held (US layout).
    pub fn shifted_char(&self) -> Option<char> {
        let c = self.printable_char()?;
        Some(shift_char(c))
    }

    pub fn ctrl() -> Key {
        Key("ctrl".into())
    }

    pub fn shift() -> Key {
        Key("shift".into())
    }
}

const SHIFT_PAIRS: &[(char, char)] = &[
    ('1', '!'),
    ('2', '@'),
    ('3', '#'),
    ('4', '$'),
    ('5', '%'),
    ('6', '^'),
    ('7', '&'),
    ('8', '*'),
    ('9', '('),
    ('0', ')'),
    ('-', '_'),
    ('=', '+'),
    ('[', '{'),
    (']', '}'),
    ('\\', '|'),
    (';', ':'),
    ('\'', '"'),
    (',', '<'),
    ('.', '>'),
    ('/', '?'),
    ('`', '~'),
];

fn shift_char(c: char) -> char {
    if c.is_ascii_lowercase() {
        return c.to_ascii_uppercase();
    }
    SHIFT_PAIRS
        .iter()
        .find(|(base, _)| *base == c)
        .map(|(_, shifted)| *shifted)
        .unwrap_or(c)
}

/// The key (and whether shift is needed) that types `c` on a US layout.
pub fn key_for_char(c: char) -> Option<(Key, bool)> {
    if c == ' ' {
        return Some((Key("space".into()), false));
    }
    if c.is_control() || c.is_whitespace() {
        return None;
    }
    if c.is_ascii_uppercase() {
        return Some((Key(c.to_ascii_lowercase().to_string()), true));
    }
    if let Some((base, _)) = SHIFT_PAIRS.iter().find(|(_, s)| *s == c) {
        return Some((Key(base.to_string()), true));
    }
    if c.is_lowercase() || !c.is_alphabetic() {
        return Some((Key(c.to_string()), false));
    }
    None
}

/// Canonical hotkey order: modifiers first in rank order, then the remaining
/// keys in their original order. Duplicates are removed.
pub fn canonical_hotkey(keys: impl IntoIterator<Item = Key>) -> Vec<Key> {
    let mut mods: Vec<Key> = Vec::new();
    let mut rest: Vec<Key> = Vec::new();
    for k in keys {
        let bucket = if k.is_modifier() {
            &mut mods
        } else {
            &mut rest
        };
        if !bucket.contains(&k) {
            bucket.push(k);
        }
    }
    mods.sort_by_key(|k| k.modifier_rank());
    mods.extend(rest);
    mods
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Key {
    type Error = KeyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Key::parse(&value)
    }
}

impl From<Key> for String {
    fn from(k: Key) -> String {
        k.0
    }
}

impl std::str::FromStr for Key {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Key::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(s: &str) -> Key {
        Key::parse(s).unwrap()
    }

    #[test]
    fn synonyms_map_to_canonical_names() {
        assert_eq!(k("Control").as_str(), "ctrl");
        assert_eq!(k("return").as_str(), "enter");
        assert_eq!(k("Escape").as_str(), "esc");
        assert_eq!(k("command").as_str(), "cmd");
        assert_eq!(k("winleft").as_str(), "win");
        assert_eq!(k(" ").as_str(), "space");
        assert_eq!(k("PgDn").as_str(), "pagedown");
        assert_eq!(k("F5").as_str(), "f5");
    }

    #[test]
    fn single_chars_are_lowercased() {
        assert_eq!(k("T").as_str(), "t");
        assert_eq!(k("!").as_str(), "!");
        assert_eq!(k("é").as_str(), "é");
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(Key::parse("hyperspace").is_err());
        assert!(Key::parse("f0").is_err());
        assert!(Key::parse("f25").is_err());
        assert!(Key::parse("").is_err());
    }

    #[test]
    fn hotkey_order_is_canonical() {
        let keys = canonical_hotkey([k("t"), k("shift"), k("ctrl"), k("ctrl")]);
        let names: Vec<_> = keys.iter().map(Key::as_str).collect();
        assert_eq!(names, ["ctrl", "shift", "t"]);
        let keys = canonical_hotkey([k("win"), k("cmd"), k("alt"), k("a")]);
        let names: Vec<_> = keys.iter().map(Key::as_str).collect();
        assert_eq!(names, ["alt", "cmd", "win", "a"]);
    }

    #[test]
    fn char_lowering_inverts_shift() {
        for c in "aZ1!?{ ~".chars() {
            let (key, shift) = key_for_char(c).unwrap();
            let typed = if shift {
                key.shifted_char()
            } else {
                key.printable_char()
            };
            assert_eq!(typed, Some(c), "char {c:?}");
        }
        assert!(key_for_char('\n').is_none());
    }
}
