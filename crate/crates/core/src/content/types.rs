use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use uuid::Uuid;

macro_rules! uuid_id {
    ($name:ident) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub Uuid);

        impl $name {
            pub fn new() -> Self {
                Self(Uuid::new_v4())
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::new()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = uuid::Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Uuid::parse_str(s).map(Self)
            }
        }
    };
}

uuid_id!(CourseId);
uuid_id!(QuestionId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    MultipleChoice,
    SingleChoice,
    TrueFalse,
    ShortAnswer,
}

impl QuestionKind {
    pub fn is_choice(self) -> bool {
        !matches!(self, QuestionKind::ShortAnswer)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::MultipleChoice => "multiple_choice",
            QuestionKind::SingleChoice => "single_choice",
            QuestionKind::TrueFalse => "true_false",
            QuestionKind::ShortAnswer => "short_answer",
        }
    }
}

impl fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Single uppercase letter naming a choice. Positional keys run `A..=Z`;
/// true/false questions use the fixed keys `T` and `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OptionKey(char);

impl OptionKey {
    pub const TRUE: OptionKey = OptionKey('T');
    pub const FALSE: OptionKey = OptionKey('F');

    pub fn new(c: char) -> Option<Self> {
        c.is_ascii_uppercase().then_some(Self(c))
    }

    /// Key for the option at `index` (0-based): A, B, C, ...
    pub fn positional(index: usize) -> Option<Self> {
        u8::try_from(index)
            .ok()
            .filter(|i| *i < 26)
            .map(|i| Self(char::from(b'A' + i)))
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

impl fmt::Display for OptionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for OptionKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => {
                OptionKey::new(c).ok_or_else(|| format!("`{s}` is not an uppercase letter"))
            }
            _ => Err(format!("`{s}` is not a single-letter option key")),
        }
    }
}

impl Serialize for OptionKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OptionKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceOption {
    pub key: OptionKey,
    pub text: String,
}

/// Content-addressed attachment. The bytes live in the media store under `digest`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaRef {
    /// Lowercase hex SHA-256 of the blob.
    pub digest: String,
    pub media_type: String,
    pub size: u64,
}

/// Topic → sub-topic labels. Unique per level by construction.
pub type TopicIndex = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Course {
    pub id: CourseId,
    pub title: String,
    pub description: String,
    pub topic_index: TopicIndex,
    /// Cohort flag: `true` delivers AI hints, `false` is the baseline group.
    pub feedback_enabled: bool,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub course_id: CourseId,
    pub topic: String,
    pub sub_topic: String,
    pub kind: QuestionKind,
    pub body: String,
    pub media: Vec<MediaRef>,
    pub options: Vec<ChoiceOption>,
    pub answer_key: BTreeSet<OptionKey>,
    pub reference_answer: Option<String>,
    pub explanation: String,
    pub context: String,
    pub point_value: u32,
    /// `None` means unlimited attempts.
    pub attempt_limit: Option<u32>,
    pub related_question_ids: Vec<QuestionId>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default)]
    pub deleted: bool,
}

impl Question {
    pub fn option_text(&self, key: OptionKey) -> Option<&str> {
        self.options
            .iter()
            .find(|o| o.key == key)
            .map(|o| o.text.as_str())
    }

    /// Texts of the options in the answer key.
    pub fn correct_option_texts(&self) -> impl Iterator<Item = &str> {
        self.options
            .iter()
            .filter(|o| self.answer_key.contains(&o.key))
            .map(|o| o.text.as_str())
    }
}

/// Attachment as submitted by an author: either inline bytes or a blob already in the store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MediaInput {
    Inline {
        media_type: String,
        data_base64: String,
    },
    Stored {
        media_type: String,
        digest: String,
    },
}

/// Author-facing question document. Fields are kept loose so that every
/// violation comes back as a [`crate::FieldError`] instead of a parse failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionDraft {
    #[serde(default)]
    pub id: Option<QuestionId>,
    pub topic: String,
    pub sub_topic: String,
    pub kind: QuestionKind,
    pub body: String,
    #[serde(default)]
    pub media: Vec<MediaInput>,
    /// Option texts in display order; keys are assigned by position.
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default)]
    pub answer_key: Vec<String>,
    #[serde(default)]
    pub reference_answer: Option<String>,
    #[serde(default)]
    pub explanation: String,
    #[serde(default)]
    pub context: String,
    pub point_value: i64,
    #[serde(default)]
    pub attempt_limit: Option<i64>,
    #[serde(default)]
    pub related_question_ids: Vec<QuestionId>,
}

/// Student-facing listing entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSummary {
    pub id: QuestionId,
    pub course_id: CourseId,
    pub topic: String,
    pub sub_topic: String,
    pub kind: QuestionKind,
    pub body: String,
    pub point_value: u32,
    pub attempt_limit: Option<u32>,
}

impl From<&Question> for QuestionSummary {
    fn from(q: &Question) -> Self {
        Self {
            id: q.id,
            course_id: q.course_id,
            topic: q.topic.clone(),
            sub_topic: q.sub_topic.clone(),
            kind: q.kind,
            body: q.body.clone(),
            point_value: q.point_value,
            attempt_limit: q.attempt_limit,
        }
    }
}

/// What a student sees when answering: no key, reference answer, explanation or
/// instructor context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentQuestionView {
    pub id: QuestionId,
    pub course_id: CourseId,
    pub topic: String,
    pub sub_topic: String,
    pub kind: QuestionKind,
    pub body: String,
    pub media: Vec<MediaRef>,
    pub options: Vec<ChoiceOption>,
    pub point_value: u32,
    pub attempt_limit: Option<u32>,
    pub related_question_ids: Vec<QuestionId>,
}

impl From<&Question> for StudentQuestionView {
    fn from(q: &Question) -> Self {
        Self {
            id: q.id,
            course_id: q.course_id,
            topic: q.topic.clone(),
            sub_topic: q.sub_topic.clone(),
            kind: q.kind,
            body: q.body.clone(),
            media: q.media.clone(),
            options: q.options.clone(),
            point_value: q.point_value,
            attempt_limit: q.attempt_limit,
            related_question_ids: q.related_question_ids.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseSummary {
    pub id: CourseId,
    pub title: String,
    pub description: String,
    pub topic_index: TopicIndex,
    pub feedback_enabled: bool,
}

impl From<&Course> for CourseSummary {
    fn from(c: &Course) -> Self {
        Self {
            id: c.id,
            title: c.title.clone(),
            description: c.description.clone(),
            topic_index: c.topic_index.clone(),
            feedback_enabled: c.feedback_enabled,
        }
    }
}
