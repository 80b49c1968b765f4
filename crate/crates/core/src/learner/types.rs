use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::content::{CourseId, OptionKey, QuestionId};

/// Pseudonymous student identifier: `stu_` followed by 32 random hex digits.
/// It is the only student identifier that ever leaves the service.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudentToken(String);

static TOKEN_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^stu_[0-9a-f]{32}$").unwrap());

impl StudentToken {
    pub fn generate() -> Self {
        Self(format!("stu_{}", Uuid::new_v4().simple()))
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::is_well_formed(s).then(|| Self(s.to_string()))
    }

    pub fn is_well_formed(s: &str) -> bool {
        TOKEN_RE.is_match(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StudentToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttemptId(pub Uuid);

impl AttemptId {
    pub fn new() -> Self {
        Self(Uuid::new_v4())
    }
}

impl Default for AttemptId {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for AttemptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `{"choice": ["A", "C"]}` or `{"text": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerPayload {
    Choice(BTreeSet<OptionKey>),
    Text(String),
}

impl fmt::Display for AnswerPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerPayload::Choice(keys) => f.write_str(&join_keys(keys)),
            AnswerPayload::Text(t) => f.write_str(t),
        }
    }
}

pub(crate) fn join_keys(keys: &BTreeSet<OptionKey>) -> String {
    if keys.is_empty() {
        return "(none)".into();
    }
    keys.iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub id: AttemptId,
    pub student: StudentToken,
    pub question_id: QuestionId,
    pub course_id: CourseId,
    /// Topic placement of the question when the attempt was made.
    pub topic: String,
    pub sub_topic: String,
    pub opened_at: DateTime<Utc>,
    pub submitted_at: DateTime<Utc>,
    pub answer: AnswerPayload,
    pub correct: bool,
    pub hint_text: Option<String>,
    pub points_awarded: u32,
    pub attempt_ordinal: u32,
    /// Grader-extracted label for short-answer misconceptions.
    #[serde(default)]
    pub misconception_label: Option<String>,
}

impl Attempt {
    pub fn misconception(&self) -> MisconceptionTag {
        MisconceptionTag {
            question_id: self.question_id,
            signature: signature_for(&self.answer, self.misconception_label.as_deref()),
        }
    }

    pub fn duration(&self) -> chrono::Duration {
        self.submitted_at - self.opened_at
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptInput {
    pub student: StudentToken,
    pub question_id: QuestionId,
    pub opened_at: DateTime<Utc>,
    pub submitted_at: DateTime<Utc>,
    pub answer: AnswerPayload,
    pub correct: bool,
    pub hint_text: Option<String>,
    pub misconception_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MisconceptionTag {
    pub question_id: QuestionId,
    pub signature: String,
}

const MAX_TEXT_SIGNATURE: usize = 80;

/// Canonical signature of a wrong answer. Choice answers use their sorted key
/// set (`"A+C"`); short answers use the grader's label when there is one and
/// the normalized answer text otherwise.
pub fn signature_for(answer: &AnswerPayload, label: Option<&str>) -> String {
    match answer {
        AnswerPayload::Choice(keys) => join_keys(keys),
        AnswerPayload::Text(text) => {
            let source = label.filter(|l| !l.trim().is_empty()).unwrap_or(text);
            let normalized = source
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .to_lowercase();
            normalized.chars().take(MAX_TEXT_SIGNATURE).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagStats {
    pub count: u32,
    /// Log position of the first occurrence; orders ties.
    pub first_seq: u64,
    pub first_seen: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerProfile {
    pub student_id: StudentToken,
    #[serde(with = "entries")]
    pub misconception_counts: BTreeMap<MisconceptionTag, TagStats>,
    #[serde(with = "entries")]
    pub topic_error_counts: BTreeMap<(String, String), u32>,
    pub last_updated: Option<DateTime<Utc>>,
}

impl LearnerProfile {
    pub fn empty(student_id: StudentToken) -> Self {
        Self {
            student_id,
            misconception_counts: BTreeMap::new(),
            topic_error_counts: BTreeMap::new(),
            last_updated: None,
        }
    }

    pub(crate) fn absorb(&mut self, seq: u64, attempt: &Attempt) {
        debug_assert!(!attempt.correct);
        self.misconception_counts
            .entry(attempt.misconception())
            .and_modify(|s| s.count += 1)
            .or_insert(TagStats {
                count: 1,
                first_seq: seq,
                first_seen: attempt.submitted_at,
            });
        *self
            .topic_error_counts
            .entry((attempt.topic.clone(), attempt.sub_topic.clone()))
            .or_insert(0) += 1;
        self.last_updated = Some(
            self.last_updated
                .map_or(attempt.submitted_at, |t| t.max(attempt.submitted_at)),
        );
    }
}

/// Serializes a map with non-string keys as a list of `[key, value]` pairs.
mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(
        map: &BTreeMap<K, V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecurringTag {
    pub tag: MisconceptionTag,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub question_id: QuestionId,
    pub attempt_ordinal: u32,
    pub answer: AnswerPayload,
    pub hint_text: Option<String>,
    pub submitted_at: DateTime<Utc>,
    pub signature: String,
}

impl From<&Attempt> for ErrorEntry {
    fn from(a: &Attempt) -> Self {
        Self {
            question_id: a.question_id,
            attempt_ordinal: a.attempt_ordinal,
            answer: a.answer.clone(),
            hint_text: a.hint_text.clone(),
            submitted_at: a.submitted_at,
            signature: a.misconception().signature,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistory {
    pub entries: Vec<ErrorEntry>,
}

impl ErrorHistory {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Incorrect attempts on one question.
    pub fn prior_on(&self, question_id: QuestionId) -> usize {
        self.entries
            .iter()
            .filter(|e| e.question_id == question_id)
            .count()
    }

    /// Hints already delivered, oldest first.
    pub fn prior_hints(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter_map(|e| e.hint_text.as_deref())
    }
}
