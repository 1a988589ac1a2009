//! Parsers for the five model reply formats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::MemoryBank;
use crate::world::{InteractionType, RelativeDirection};

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolError {
    #[error("no bracketed landmark index in reply")]
    NoIndex,
    #[error("landmark {0} does not exist")]
    UnknownIndex(u32),
    #[error("landmark {0} was already visited")]
    AlreadyVisited(u32),
    #[error("malformed reply: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub landmark_index: u32,
    pub rationale: String,
}

/// Last `[n]` in the reply, with the text before it as rationale. Does not
/// look at the bank.
pub fn parse_choice_index(response: &str) -> Result<Choice, ProtocolError> {
    let bytes = response.as_bytes();
    let mut found = None;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' {
            let digits_start = i + 1;
            let mut j = digits_start;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits_start && j < bytes.len() && bytes[j] == b']' {
                if let Ok(index) = response[digits_start..j].parse::<u32>() {
                    found = Some((i, index));
                }
                i = j;
            }
        }
        i += 1;
    }
    let (start, landmark_index) = found.ok_or(ProtocolError::NoIndex)?;
    let rationale = response[..start]
        .trim_end()
        .trim_end_matches("Chosen landmark:")
        .trim()
        .trim_end_matches(';')
        .trim()
        .to_string();
    Ok(Choice {
        landmark_index,
        rationale,
    })
}

/// [`parse_choice_index`] followed by validation against the bank.
pub fn parse_choice(response: &str, bank: &MemoryBank) -> Result<Choice, ProtocolError> {
    let choice = parse_choice_index(response)?;
    match bank.get(choice.landmark_index) {
        None => Err(ProtocolError::UnknownIndex(choice.landmark_index)),
        Some(l) if l.visited => Err(ProtocolError::AlreadyVisited(choice.landmark_index)),
        Some(_) => Ok(choice),
    }
}

/// Canonical reply text for a choice.
pub fn format_choice(index: u32, rationale: &str) -> String {
    if rationale.is_empty() {
        format!("Chosen landmark: [{index}]")
    } else {
        format!("{rationale}; Chosen landmark: [{index}]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "text", rename_all = "snake_case")]
pub enum LabelValue {
    Number(String),
    /// No label visible, or only part of it.
    NotVisible,
    /// Visible but the digits cannot be read.
    Unreadable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadResult {
    pub value: LabelValue,
    pub confidence: f64,
}

impl ReadResult {
    pub fn to_reply(&self) -> String {
        let value = match &self.value {
            LabelValue::Number(text) => text.clone(),
            LabelValue::NotVisible => "-1".to_string(),
            LabelValue::Unreadable => "-2".to_string(),
        };
        format!("{value}; {:.2}", self.confidence)
    }
}

/// `number; confidence`, where number may be -1 or -2.
pub fn parse_label_reply(text: &str) -> Result<ReadResult, ProtocolError> {
    let (value, confidence) = text
        .trim()
        .split_once(';')
        .ok_or_else(|| ProtocolError::Malformed(format!("expected `number; confidence`, got {text:?}")))?;
    let confidence: f64 = confidence
        .trim()
        .parse()
        .map_err(|_| ProtocolError::Malformed(format!("bad confidence {confidence:?}")))?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(ProtocolError::Malformed(format!("confidence {confidence} outside [0, 1]")));
    }
    let value = match value.trim() {
        "-1" => LabelValue::NotVisible,
        "-2" => LabelValue::Unreadable,
        other if !other.is_empty() && other.chars().all(|c| c.is_ascii_alphanumeric()) => {
            LabelValue::Number(other.to_string())
        }
        other => return Err(ProtocolError::Malformed(format!("bad room number {other:?}"))),
    };
    Ok(ReadResult { value, confidence })
}

fn quote_single(text: &str) -> String {
    let mut out = String::from("'");
    for ch in text.chars() {
        if ch == '\'' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('\'');
    out
}

/// `{'left': [...], 'right': [...], 'forward': [...], 'backwards': [...]}`.
pub fn format_sign_reply(entries: &[(RelativeDirection, String)]) -> String {
    let parts: Vec<String> = RelativeDirection::ALL
        .iter()
        .map(|direction| {
            let items: Vec<String> = entries
                .iter()
                .filter(|(d, _)| d == direction)
                .map(|(_, t)| quote_single(t))
                .collect();
            format!("'{}': [{}]", direction.name(), items.join(", "))
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn expect(&mut self, wanted: char) -> Result<(), ProtocolError> {
        self.skip_ws();
        match self.chars.next() {
            Some(c) if c == wanted => Ok(()),
            other => Err(ProtocolError::Malformed(format!("expected {wanted:?}, found {other:?}"))),
        }
    }

    fn eat(&mut self, wanted: char) -> bool {
        self.skip_ws();
        if self.chars.peek() == Some(&wanted) {
            self.chars.next();
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Result<String, ProtocolError> {
        self.skip_ws();
        let quote = match self.chars.next() {
            Some(q @ ('\'' | '"')) => q,
            other => return Err(ProtocolError::Malformed(format!("expected a string, found {other:?}"))),
        };
        let mut out = String::new();
        loop {
            match self.chars.next() {
                Some('\\') => match self.chars.next() {
                    Some(c) => out.push(c),
                    None => break,
                },
                Some(c) if c == quote => return Ok(out),
                Some(c) => out.push(c),
                None => break,
            }
        }
        Err(ProtocolError::Malformed("unterminated string".into()))
    }
}

/// Parses a sign reply (Python-style dict of string lists). Keys other than
/// the four relative directions are rejected. `-1` (no sign) yields no
/// entries.
pub fn parse_sign_reply(text: &str) -> Result<Vec<(RelativeDirection, String)>, ProtocolError> {
    if text.trim() == "-1" {
        return Ok(Vec::new());
    }
    let mut cursor = Cursor {
        chars: text.trim().chars().peekable(),
    };
    cursor.expect('{')?;
    let mut entries = Vec::new();
    if cursor.eat('}') {
        return Ok(entries);
    }
    loop {
        let key = cursor.string()?;
        let direction = RelativeDirection::from_name(&key)
            .ok_or_else(|| ProtocolError::Malformed(format!("unknown direction {key:?}")))?;
        cursor.expect(':')?;
        cursor.expect('[')?;
        if !cursor.eat(']') {
            loop {
                entries.push((direction, cursor.string()?));
                if cursor.eat(']') {
                    break;
                }
                cursor.expect(',')?;
            }
        }
        if cursor.eat('}') {
            break;
        }
        cursor.expect(',')?;
    }
    cursor.skip_ws();
    if cursor.chars.next().is_some() {
        return Err(ProtocolError::Malformed("trailing text after dict".into()));
    }
    Ok(entries)
}

/// A lone 1, 2 or 3.
pub fn parse_interaction_reply(text: &str) -> Result<InteractionType, ProtocolError> {
    let trimmed = text.trim().trim_end_matches('.');
    trimmed
        .parse::<u8>()
        .ok()
        .and_then(InteractionType::from_number)
        .ok_or_else(|| ProtocolError::Malformed(format!("expected 1, 2 or 3, got {text:?}")))
}

/// `Note: ...`; returns the whole note line.
pub fn parse_note_reply(text: &str) -> Result<String, ProtocolError> {
    let trimmed = text.trim();
    if trimmed.starts_with("Note:") && trimmed.len() > "Note:".len() {
        Ok(trimmed.to_string())
    } else {
        Err(ProtocolError::Malformed(format!("expected `Note: ...`, got {text:?}")))
    }
}
