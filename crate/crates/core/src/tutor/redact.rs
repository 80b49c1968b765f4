//! Strips personal identifiers from anything bound for a model provider.
//!
//! Known identities (display names, emails, institutional ids) are replaced by
//! the student's pseudonymous token; remaining email addresses and phone
//! numbers are replaced by fixed markers. Redaction is idempotent.

use once_cell::sync::Lazy;
use regex::{NoExpand, Regex};
use serde_json::Value;

use crate::learner::StudentToken;

pub const EMAIL_MARK: &str = "[REDACTED_EMAIL]";
pub const PHONE_MARK: &str = "[REDACTED_PHONE]";
pub const FIELD_MARK: &str = "[REDACTED]";

static EMAIL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)[a-z0-9._%+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)*\.[a-z]{2,}").unwrap());

// Separators are required so plain engineering quantities are left alone.
static PHONE_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:\+\d{1,3}[\s.-]?)?(?:\(\d{3}\)\s?|\b\d{3}[\s.-])\d{3}[\s.-]\d{4}\b").unwrap()
});

static PROTECTED_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"stu_[0-9a-f]{32}|\[REDACTED(?:_EMAIL|_PHONE)?\]").unwrap());

/// Applies `f` to the text between tokens and markers already present.
fn map_unprotected(text: &str, mut f: impl FnMut(&str) -> String) -> String {
    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    for m in PROTECTED_RE.find_iter(text) {
        out.push_str(&f(&text[at..m.start()]));
        out.push_str(m.as_str());
        at = m.end();
    }
    out.push_str(&f(&text[at..]));
    out
}

/// Case-insensitive alternation, longest value first.
fn alternation(values: &[&String]) -> Option<Regex> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by_key(|v| std::cmp::Reverse(v.len()));
    let alts = sorted
        .iter()
        .map(|v| regex::escape(v))
        .collect::<Vec<_>>()
        .join("|");
    Some(Regex::new(&format!("(?i){alts}")).expect("escaped alternation"))
}

/// Replaces matches whose neighbouring characters are not letters.
fn replace_bounded(pattern: &Regex, text: &str, token: &str) -> String {
    let is_letter = |c: Option<char>| c.is_some_and(|c| c.is_alphabetic());
    let mut out = String::with_capacity(text.len());
    let mut copied = 0;
    let mut from = 0;
    while let Some(m) = pattern.find_at(text, from) {
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        if !is_letter(before) && !is_letter(after) {
            out.push_str(&text[copied..m.start()]);
            out.push_str(token);
            copied = m.end();
            from = m.end();
        } else {
            from = m.start() + text[m.start()..].chars().next().map_or(1, char::len_utf8);
        }
        if from > text.len() {
            break;
        }
    }
    out.push_str(&text[copied..]);
    out
}

/// JSON object keys whose values are personal identifiers.
pub const IDENTIFIER_FIELDS: &[&str] = &[
    "student_id",
    "student_name",
    "name",
    "display_name",
    "full_name",
    "email",
    "external_id",
];

#[derive(Debug, Clone)]
struct Identity {
    loose: Option<Regex>,
    bounded: Option<Regex>,
    raw: Vec<String>,
    token: StudentToken,
}

#[derive(Debug, Clone, Default)]
pub struct Redactor {
    identities: Vec<Identity>,
}

impl Redactor {
    /// Pattern rules only (emails and phone numbers).
    pub fn patterns_only() -> Self {
        Self::default()
    }

    /// Adds a student's identifying strings, to be replaced with their token.
    /// Values are matched case-insensitively anywhere in the text, except short
    /// single words (four letters or fewer), which must not touch other letters
    /// so that "Jane" leaves "Janet" alone.
    pub fn with_identity<S: AsRef<str>>(
        mut self,
        token: StudentToken,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        let raw: Vec<String> = values
            .into_iter()
            .map(|v| v.as_ref().trim().to_string())
            .filter(|v| v.chars().count() >= 2)
            .collect();
        if raw.is_empty() {
            return self;
        }
        let (short, long): (Vec<&String>, Vec<&String>) = raw
            .iter()
            .partition(|v| v.chars().count() <= 4 && v.chars().all(char::is_alphabetic));
        self.identities.push(Identity {
            loose: alternation(&long),
            bounded: alternation(&short),
            raw: raw.clone(),
            token,
        });
        self
    }

    pub fn redact_text(&self, text: &str) -> String {
        let mut current = text.to_string();
        for _ in 0..8 {
            let next = self.redact_once(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    fn redact_once(&self, text: &str) -> String {
        let mut out = text.to_string();
        for id in &self.identities {
            if let Some(re) = &id.loose {
                out = map_unprotected(&out, |seg| {
                    re.replace_all(seg, NoExpand(id.token.as_str()))
                        .into_owned()
                });
            }
        }
        for id in &self.identities {
            if let Some(re) = &id.bounded {
                out = map_unprotected(&out, |seg| replace_bounded(re, seg, id.token.as_str()));
            }
        }
        out = map_unprotected(&out, |seg| {
            EMAIL_RE.replace_all(seg, NoExpand(EMAIL_MARK)).into_owned()
        });
        map_unprotected(&out, |seg| {
            PHONE_RE.replace_all(seg, NoExpand(PHONE_MARK)).into_owned()
        })
    }

    /// Token for a known identifier value, if it belongs to a registered student.
    pub fn token_for(&self, value: &str) -> Option<&StudentToken> {
        let value = value.trim();
        self.identities
            .iter()
            .find(|id| id.raw.iter().any(|r| r.eq_ignore_ascii_case(value)))
            .map(|id| &id.token)
    }

    /// Redacts a JSON record in place: identifier fields are replaced by the
    /// owner's token (or [`FIELD_MARK`]), every other string is scanned as text.
    pub fn redact_value(&self, value: &mut Value) {
        match value {
            Value::String(s) => *s = self.redact_text(s),
            Value::Array(items) => items.iter_mut().for_each(|v| self.redact_value(v)),
            Value::Object(map) => {
                for (k, v) in map.iter_mut() {
                    if IDENTIFIER_FIELDS.contains(&k.as_str()) {
                        let replacement = match v {
                            Value::String(s) if StudentToken::is_well_formed(s) => s.clone(),
                            Value::String(s) => self
                                .token_for(s)
                                .map(|t| t.to_string())
                                .unwrap_or_else(|| FIELD_MARK.to_string()),
                            Value::Null => continue,
                            _ => FIELD_MARK.to_string(),
                        };
                        *v = Value::String(replacement);
                    } else {
                        self.redact_value(v);
                    }
                }
            }
            _ => {}
        }
    }
}
