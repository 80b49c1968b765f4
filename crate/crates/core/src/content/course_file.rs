//! JSON course file used to seed fixtures and move content between deployments.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "courses": [{
//!     "title": "...", "description": "...", "feedback_enabled": true,
//!     "questions": [{
//!       "key": "q1", "topic": "...", "sub_topic": "...", "kind": "single_choice",
//!       "body": "...", "options": ["...", "..."], "answer_key": ["B"],
//!       "reference_answer": null, "explanation": "...", "context": "...",
//!       "point_value": 2, "attempt_limit": 3,
//!       "media": [{ "media_type": "image/png", "data_base64": "..." }],
//!       "related": ["q0"]
//!     }]
//!   }]
//! }
//! ```
//!
//! `key` is local to the file; `related` refers to other keys of the same course.

use std::collections::HashMap;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{resolve_media, Course, MediaInput, QuestionDraft, QuestionKind};
use crate::store::{Event, Store};
use crate::{Error, Result};

pub const COURSE_FILE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseFile {
    pub schema_version: u32,
    pub courses: Vec<CourseEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseEntry {
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub feedback_enabled: bool,
    #[serde(default)]
    pub questions: Vec<QuestionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineMedia {
    pub media_type: String,
    pub data_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionEntry {
    pub key: String,
    pub topic: String,
    pub sub_topic: String,
    pub kind: QuestionKind,
    pub body: String,
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
    pub media: Vec<InlineMedia>,
    #[serde(default)]
    pub related: Vec<String>,
}

impl Store {
    /// Imports every course in the file as one transaction. Returns the new courses.
    pub fn import_course_file(&self, file: &CourseFile) -> Result<Vec<Course>> {
        if file.schema_version != COURSE_FILE_SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!(
                    "unsupported schema version {} (expected {COURSE_FILE_SCHEMA_VERSION})",
                    file.schema_version
                ),
            ));
        }

        // Resolve media up front, outside the write lock.
        let mut media = Vec::new();
        for (ci, course) in file.courses.iter().enumerate() {
            let mut per_course = Vec::new();
            for (qi, q) in course.questions.iter().enumerate() {
                let inputs: Vec<MediaInput> = q
                    .media
                    .iter()
                    .map(|m| MediaInput::Inline {
                        media_type: m.media_type.clone(),
                        data_base64: m.data_base64.clone(),
                    })
                    .collect();
                per_course.push(
                    resolve_media(&inputs, self.media())
                        .map_err(|e| prefix(e, &format!("courses[{ci}].questions[{qi}]")))?,
                );
            }
            media.push(per_course);
        }

        let now = self.now();
        self.transact(|state| {
            let mut scratch = state.catalog.clone();
            let mut events = Vec::new();
            let mut created = Vec::new();
            for (ci, entry) in file.courses.iter().enumerate() {
                let course = scratch
                    .new_course(
                        &entry.title,
                        &entry.description,
                        entry.feedback_enabled,
                        now,
                    )
                    .map_err(|e| prefix(e, &format!("courses[{ci}]")))?;
                scratch.apply_course(course.clone());
                events.push(Event::CourseStored(course.clone()));

                // First pass without links, so links may point forward or form cycles.
                let mut ids = HashMap::new();
                let mut drafts = Vec::new();
                for (qi, q) in entry.questions.iter().enumerate() {
                    let path = format!("courses[{ci}].questions[{qi}]");
                    let mut draft = draft_from_entry(q);
                    let question = scratch
                        .plan_question(course.id, &draft, media[ci][qi].clone(), now)
                        .map_err(|e| prefix(e, &path))?;
                    if ids.insert(q.key.clone(), question.id).is_some() {
                        return Err(Error::validation(format!("{path}.key"), "duplicate key"));
                    }
                    draft.id = Some(question.id);
                    scratch.apply_question(question);
                    drafts.push(draft);
                }
                for (qi, (q, mut draft)) in entry.questions.iter().zip(drafts).enumerate() {
                    let path = format!("courses[{ci}].questions[{qi}]");
                    for (ri, key) in q.related.iter().enumerate() {
                        let id = ids.get(key).ok_or_else(|| {
                            Error::validation(
                                format!("{path}.related[{ri}]"),
                                format!("no question with key `{key}` in this course"),
                            )
                        })?;
                        draft.related_question_ids.push(*id);
                    }
                    let question = scratch
                        .plan_question(course.id, &draft, media[ci][qi].clone(), now)
                        .map_err(|e| prefix(e, &path))?;
                    scratch.apply_question(question.clone());
                    events.push(Event::QuestionStored(question));
                }
                created.push(course);
            }
            let created = created
                .into_iter()
                .map(|c| scratch.course(c.id).cloned())
                .collect::<Result<Vec<_>>>()?;
            Ok((events, created))
        })
    }

    /// Exports live content of the given courses. Question keys are their ids.
    pub fn export_course_file(&self, course_ids: &[super::CourseId]) -> Result<CourseFile> {
        let courses = self.read(|s| {
            course_ids
                .iter()
                .map(|id| {
                    let course = s.catalog.course(*id)?.clone();
                    let questions: Vec<_> = s.catalog.course_questions(*id).cloned().collect();
                    Ok((course, questions))
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let mut entries = Vec::new();
        for (course, questions) in courses {
            let mut qs = Vec::new();
            for q in questions {
                let mut media = Vec::new();
                for m in &q.media {
                    let bytes = self.media().get(&m.digest).ok_or_else(|| {
                        Error::Storage(format!("missing media blob {}", m.digest))
                    })?;
                    media.push(InlineMedia {
                        media_type: m.media_type.clone(),
                        data_base64: base64::engine::general_purpose::STANDARD.encode(bytes),
                    });
                }
                qs.push(QuestionEntry {
                    key: q.id.to_string(),
                    topic: q.topic.clone(),
                    sub_topic: q.sub_topic.clone(),
                    kind: q.kind,
                    body: q.body.clone(),
                    options: if q.kind == QuestionKind::ShortAnswer {
                        vec![]
                    } else {
                        q.options.iter().map(|o| o.text.clone()).collect()
                    },
                    answer_key: q.answer_key.iter().map(|k| k.to_string()).collect(),
                    reference_answer: q.reference_answer.clone(),
                    explanation: q.explanation.clone(),
                    context: q.context.clone(),
                    point_value: i64::from(q.point_value),
                    attempt_limit: q.attempt_limit.map(i64::from),
                    media,
                    related: q
                        .related_question_ids
                        .iter()
                        .map(|r| r.to_string())
                        .collect(),
                });
            }
            entries.push(CourseEntry {
                title: course.title,
                description: course.description,
                feedback_enabled: course.feedback_enabled,
                questions: qs,
            });
        }
        Ok(CourseFile {
            schema_version: COURSE_FILE_SCHEMA_VERSION,
            courses: entries,
        })
    }
}

fn draft_from_entry(q: &QuestionEntry) -> QuestionDraft {
    QuestionDraft {
        id: None,
        topic: q.topic.clone(),
        sub_topic: q.sub_topic.clone(),
        kind: q.kind,
        body: q.body.clone(),
        media: vec![],
        options: q.options.clone(),
        answer_key: q.answer_key.clone(),
        reference_answer: q.reference_answer.clone(),
        explanation: q.explanation.clone(),
        context: q.context.clone(),
        point_value: q.point_value,
        attempt_limit: q.attempt_limit,
        related_question_ids: vec![],
    }
}

fn prefix(err: Error, path: &str) -> Error {
    match err {
        Error::Validation(errors) => Error::Validation(
            errors
                .into_iter()
                .map(|mut e| {
                    e.path = format!("{path}.{}", e.path);
                    e
                })
                .collect(),
        ),
        other => other,
    }
}
