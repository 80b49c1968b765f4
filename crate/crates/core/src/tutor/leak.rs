//! Answer-leak detection and mechanical redaction for generated hints.
//!
//! Matching is literal after case folding and whitespace collapsing, plus a
//! handful of "the answer is B" style patterns. A paraphrase of the answer is
//! not detected.

use std::ops::Range;

use once_cell::sync::Lazy;
use regex::Regex;

use crate::content::{OptionKey, Question};

pub const REDACTION_MARK: &str = "[…]";

/// Phrases that name an option letter as the answer. Group 1 is the key.
static KEY_REVEAL: Lazy<Vec<Regex>> = Lazy::new(|| {
    [
        r"(?i:\b(?:answer|option|choice)s?\s*(?:is|are|would be|should be|=|:))\s*[\(\[']?\s*([A-Z])\b",
        r"(?i:\b(?:option|choice)\s+)[\(\[']?([A-Z])\b[\)\]']?(?i:\s+(?:is|was)\s+(?:the\s+)?(?:correct|right))",
        r"\b([A-Z])\b[\)\]']?(?i:\s+(?:is|was)\s+(?:the\s+)?(?:correct|right)\b)",
        r"(?i:\b(?:select|choose|pick|go with|mark)\s+(?:option\s+|choice\s+)?)[\(\[']?([A-Z])\b",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("static pattern"))
    .collect()
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Leak {
    /// Normalized needle text found in the hint.
    Text(String),
    /// A phrase naming a correct option key.
    KeyReveal(OptionKey),
}

/// Leak checker for one question.
#[derive(Debug, Clone)]
pub struct LeakGuard {
    needles: Vec<Vec<char>>,
    keys: Vec<OptionKey>,
}

impl LeakGuard {
    pub fn for_question(q: &Question) -> Self {
        let mut raw: Vec<&str> = q.correct_option_texts().collect();
        if let Some(r) = &q.reference_answer {
            raw.push(r);
        }
        Self::new(raw, q.answer_key.iter().copied())
    }

    pub fn new<'a>(
        forbidden: impl IntoIterator<Item = &'a str>,
        keys: impl IntoIterator<Item = OptionKey>,
    ) -> Self {
        let mut needles: Vec<Vec<char>> = forbidden
            .into_iter()
            .map(|s| normalize(s).chars)
            .filter(|n| !n.is_empty())
            .collect();
        needles.sort();
        needles.dedup();
        Self {
            needles,
            keys: keys.into_iter().collect(),
        }
    }

    pub fn detect(&self, text: &str) -> Vec<Leak> {
        let mut leaks = Vec::new();
        let norm = normalize(text);
        for needle in &self.needles {
            if find(&norm.chars, needle, 0).is_some() {
                leaks.push(Leak::Text(needle.iter().collect()));
            }
        }
        for (_, key) in self.key_reveals(text) {
            if !leaks.contains(&Leak::KeyReveal(key)) {
                leaks.push(Leak::KeyReveal(key));
            }
        }
        leaks
    }

    pub fn is_clean(&self, text: &str) -> bool {
        self.detect(text).is_empty()
    }

    /// Replaces every leaking span with [`REDACTION_MARK`]. If the mark itself
    /// would complete a needle, offending spans are deleted instead. The result
    /// is always clean.
    pub fn redact(&self, text: &str) -> String {
        let marked = self.replace_until_clean(text, REDACTION_MARK);
        if self.is_clean(&marked) {
            return marked;
        }
        self.replace_until_clean(text, "")
    }

    fn replace_until_clean(&self, text: &str, mark: &str) -> String {
        let mut out = text.to_string();
        // Deleting strictly shortens the text, so the loop ends; with a nonempty
        // mark it is bounded and the caller falls back to deletion.
        for _ in 0..64 {
            let spans = self.leak_spans(&out);
            if spans.is_empty() {
                break;
            }
            out = splice(&out, &spans, mark);
        }
        out
    }

    fn key_reveals(&self, text: &str) -> Vec<(Range<usize>, OptionKey)> {
        let mut found = Vec::new();
        for re in KEY_REVEAL.iter() {
            for caps in re.captures_iter(text) {
                let key = caps
                    .get(1)
                    .and_then(|m| m.as_str().chars().next())
                    .and_then(OptionKey::new);
                if let Some(key) = key.filter(|k| self.keys.contains(k)) {
                    found.push((caps.get(0).expect("group 0").range(), key));
                }
            }
        }
        found
    }

    /// Byte ranges in `text` that leak, merged and sorted.
    fn leak_spans(&self, text: &str) -> Vec<Range<usize>> {
        let norm = normalize(text);
        let mut spans = Vec::new();
        for needle in &self.needles {
            let mut from = 0;
            while let Some(start) = find(&norm.chars, needle, from) {
                let end = start + needle.len();
                spans.push(norm.origin[start].start..norm.origin[end - 1].end);
                from = start + 1;
            }
        }
        spans.extend(self.key_reveals(text).into_iter().map(|(r, _)| r));
        merge(spans)
    }
}

struct Normalized {
    chars: Vec<char>,
    /// Byte range in the source for each normalized char.
    origin: Vec<Range<usize>>,
}

/// Case-folded text with whitespace runs collapsed to one space and trimmed.
fn normalize(text: &str) -> Normalized {
    let mut chars = Vec::with_capacity(text.len());
    let mut origin = Vec::with_capacity(text.len());
    let mut pending_space: Option<Range<usize>> = None;
    for (i, c) in text.char_indices() {
        let span = i..i + c.len_utf8();
        if c.is_whitespace() {
            if pending_space.is_none() {
                pending_space = Some(span);
            }
            continue;
        }
        if let Some(space) = pending_space.take() {
            if !chars.is_empty() {
                chars.push(' ');
                origin.push(space);
            }
        }
        for lc in c.to_lowercase() {
            chars.push(if lc == 'ς' { 'σ' } else { lc });
            origin.push(span.clone());
        }
    }
    Normalized { chars, origin }
}

fn find(haystack: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    (from..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == *needle)
}

fn merge(mut spans: Vec<Range<usize>>) -> Vec<Range<usize>> {
    spans.sort_by_key(|r| (r.start, r.end));
    let mut out: Vec<Range<usize>> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

fn splice(text: &str, spans: &[Range<usize>], mark: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    for s in spans {
        out.push_str(&text[at..s.start]);
        out.push_str(mark);
        at = s.end;
    }
    out.push_str(&text[at..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(c: char) -> OptionKey {
        OptionKey::new(c).unwrap()
    }

    #[test]
    fn catches_case_and_whitespace_variants() {
        let guard = LeakGuard::new(["Fatigue cracking"], [key('B')]);
        assert!(!guard.is_clean("Maybe it is FATIGUE\n   cracking?"));
        assert!(guard.is_clean("Think about repeated loading."));
        let redacted = guard.redact("Maybe it is FATIGUE\n   cracking?");
        assert_eq!(redacted, "Maybe it is […]?");
    }

    #[test]
    fn key_reveal_phrases() {
        let guard = LeakGuard::new(Vec::<&str>::new(), [key('B')]);
        for leak in [
            "Honestly, the answer is B.",
            "The correct answer is (B).",
            "Option B is correct.",
            "B is the right one, think again",
            "You should choose B next time.",
            "answer: B",
        ] {
            assert!(!guard.is_clean(leak), "missed: {leak}");
            assert!(
                guard.is_clean(&guard.redact(leak)),
                "redaction left a leak: {leak}"
            );
        }
        // Wrong keys and ordinary prose pass.
        assert!(guard.is_clean("The answer is not C; reconsider."));
        assert!(guard.is_clean("Is the answer a matter of load repetition?"));
    }

    #[test]
    fn mark_that_completes_a_needle_falls_back_to_deletion() {
        let guard = LeakGuard::new(["[…]x", "y"], []);
        let out = guard.redact("ay[…]x");
        assert!(guard.is_clean(&out), "{out}");
    }

    #[test]
    fn unicode_spans_stay_on_char_boundaries() {
        let guard = LeakGuard::new(["ÉTÉ"], []);
        assert_eq!(guard.redact("été / Été"), "[…] / […]");
    }
}
