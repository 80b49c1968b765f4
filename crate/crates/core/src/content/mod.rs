//! Courses and questions: the authoritative content repository.
//!
//! [`Catalog`] is the in-memory model, indexed by id and by
//! `(course, topic, sub_topic)`. Mutations are expressed as store events so the
//! catalog can be rebuilt from the journal; the `Store` methods at the bottom of
//! this module are the public CRUD surface.

pub mod course_file;
mod types;
pub mod validate;

use std::collections::{BTreeMap, BTreeSet};

use base64::Engine;
use chrono::{DateTime, Utc};
use indexmap::IndexMap;

pub use types::*;

use crate::store::{Event, MediaStore, Store};
use crate::{Error, FieldError, Result};

type IndexKey = (CourseId, String, String);

#[derive(Debug, Default, Clone)]
pub struct Catalog {
    courses: IndexMap<CourseId, Course>,
    questions: IndexMap<QuestionId, Question>,
    index: BTreeMap<IndexKey, BTreeSet<QuestionId>>,
}

impl Catalog {
    pub fn course(&self, id: CourseId) -> Result<&Course> {
        self.courses
            .get(&id)
            .filter(|c| !c.deleted)
            .ok_or_else(|| Error::not_found("course", id))
    }

    pub fn courses(&self) -> impl Iterator<Item = &Course> {
        self.courses.values().filter(|c| !c.deleted)
    }

    /// Live (not deleted) question.
    pub fn question(&self, id: QuestionId) -> Result<&Question> {
        self.questions
            .get(&id)
            .filter(|q| !q.deleted)
            .ok_or_else(|| Error::not_found("question", id))
    }

    /// Question including soft-deleted ones; attempt rows keep pointing at these.
    pub fn question_any(&self, id: QuestionId) -> Option<&Question> {
        self.questions.get(&id)
    }

    /// Live questions of a course in stored order.
    pub fn course_questions(&self, course_id: CourseId) -> impl Iterator<Item = &Question> {
        self.questions
            .values()
            .filter(move |q| q.course_id == course_id && !q.deleted)
    }

    /// Every question ever stored for the course, deleted ones included.
    pub fn course_questions_any(&self, course_id: CourseId) -> impl Iterator<Item = &Question> {
        self.questions
            .values()
            .filter(move |q| q.course_id == course_id)
    }

    pub fn questions_at(
        &self,
        course_id: CourseId,
        topic: &str,
        sub_topic: &str,
    ) -> Vec<&Question> {
        self.index
            .get(&(course_id, topic.to_string(), sub_topic.to_string()))
            .into_iter()
            .flatten()
            .filter_map(|id| self.questions.get(id))
            .collect()
    }

    /// All `(course, topic, sub_topic)` index entries.
    pub fn index_entries(&self) -> impl Iterator<Item = (&IndexKey, &BTreeSet<QuestionId>)> {
        self.index.iter()
    }

    pub fn get_question_bundle(&self, id: QuestionId) -> Result<(Question, Vec<Question>)> {
        let question = self.question(id)?;
        let mut related = Vec::with_capacity(question.related_question_ids.len());
        let mut missing = Vec::new();
        for rid in &question.related_question_ids {
            match self.question(*rid) {
                Ok(r) => related.push(r.clone()),
                Err(_) => missing.push(rid.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::DanglingReference {
                question_id: id.to_string(),
                missing,
            });
        }
        Ok((question.clone(), related))
    }

    pub fn list_catalog(
        &self,
        course_id: CourseId,
        topic: Option<&str>,
        sub_topic: Option<&str>,
    ) -> Result<Vec<QuestionSummary>> {
        self.course(course_id)?;
        Ok(self
            .course_questions(course_id)
            .filter(|q| topic.is_none_or(|t| q.topic == t))
            .filter(|q| sub_topic.is_none_or(|s| q.sub_topic == s))
            .map(QuestionSummary::from)
            .collect())
    }

    pub fn new_course(
        &self,
        title: &str,
        description: &str,
        feedback_enabled: bool,
        now: DateTime<Utc>,
    ) -> Result<Course> {
        let title = title.trim();
        if title.is_empty() {
            return Err(Error::validation("title", "must not be empty"));
        }
        Ok(Course {
            id: CourseId::new(),
            title: title.to_string(),
            description: description.to_string(),
            topic_index: TopicIndex::new(),
            feedback_enabled,
            created_at: now,
            deleted: false,
        })
    }

    /// Validates a draft against the current catalog and returns the question
    /// that storing it would produce. Does not mutate.
    pub fn plan_question(
        &self,
        course_id: CourseId,
        draft: &QuestionDraft,
        media: Vec<MediaRef>,
        now: DateTime<Utc>,
    ) -> Result<Question> {
        self.course(course_id)?;
        let existing = match draft.id {
            Some(id) => {
                let q = self.question(id)?;
                if q.course_id != course_id {
                    return Err(Error::validation(
                        "course_id",
                        "a question cannot move between courses",
                    ));
                }
                Some(q)
            }
            None => None,
        };

        let shape = validate::validate_shape(draft).map_err(Error::Validation)?;

        let mut cross_course = Vec::new();
        let mut missing = Vec::new();
        for (i, rid) in draft.related_question_ids.iter().enumerate() {
            match self.question(*rid) {
                Ok(r) if r.course_id != course_id => cross_course.push(FieldError::new(
                    format!("related_question_ids[{i}]"),
                    "related questions must belong to the same course",
                )),
                Ok(_) => {}
                Err(_) => missing.push(rid.to_string()),
            }
        }
        if !cross_course.is_empty() {
            return Err(Error::Validation(cross_course));
        }
        let id = draft.id.unwrap_or_default();
        if !missing.is_empty() {
            return Err(Error::DanglingReference {
                question_id: id.to_string(),
                missing,
            });
        }

        Ok(Question {
            id,
            course_id,
            topic: shape.topic,
            sub_topic: shape.sub_topic,
            kind: draft.kind,
            body: draft.body.clone(),
            media,
            options: shape.options,
            answer_key: shape.answer_key,
            reference_answer: shape.reference_answer,
            explanation: draft.explanation.clone(),
            context: draft.context.clone(),
            point_value: shape.point_value,
            attempt_limit: shape.attempt_limit,
            related_question_ids: draft.related_question_ids.clone(),
            created_at: existing.map_or(now, |q| q.created_at),
            updated_at: now,
            deleted: false,
        })
    }

    pub(crate) fn apply_course(&mut self, course: Course) {
        self.courses.insert(course.id, course);
    }

    pub(crate) fn apply_course_deleted(&mut self, id: CourseId) {
        if let Some(course) = self.courses.get_mut(&id) {
            course.deleted = true;
        }
        let ids: Vec<QuestionId> = self.course_questions(id).map(|q| q.id).collect();
        for qid in ids {
            self.apply_question_deleted(qid);
        }
    }

    pub(crate) fn apply_question(&mut self, question: Question) {
        if let Some(old) = self.questions.get(&question.id) {
            let key = (old.course_id, old.topic.clone(), old.sub_topic.clone());
            self.unindex(&key, old.id);
        }
        let key = (
            question.course_id,
            question.topic.clone(),
            question.sub_topic.clone(),
        );
        let course_id = question.course_id;
        self.index.entry(key).or_default().insert(question.id);
        self.questions.insert(question.id, question);
        self.refresh_topic_index(course_id);
    }

    pub(crate) fn apply_question_deleted(&mut self, id: QuestionId) {
        let Some(q) = self.questions.get_mut(&id) else {
            return;
        };
        q.deleted = true;
        let key = (q.course_id, q.topic.clone(), q.sub_topic.clone());
        let course_id = q.course_id;
        self.unindex(&key, id);
        self.refresh_topic_index(course_id);
    }

    fn unindex(&mut self, key: &IndexKey, id: QuestionId) {
        if let Some(set) = self.index.get_mut(key) {
            set.remove(&id);
            if set.is_empty() {
                self.index.remove(key);
            }
        }
    }

    fn refresh_topic_index(&mut self, course_id: CourseId) {
        let mut topics = TopicIndex::new();
        for (c, topic, sub_topic) in self.index.keys() {
            if *c == course_id {
                topics
                    .entry(topic.clone())
                    .or_default()
                    .insert(sub_topic.clone());
            }
        }
        if let Some(course) = self.courses.get_mut(&course_id) {
            course.topic_index = topics;
        }
    }
}

/// Partial update for a course; `None` leaves the field unchanged.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct CoursePatch {
    pub title: Option<String>,
    pub description: Option<String>,
    pub feedback_enabled: Option<bool>,
}

/// Stores inline attachments and resolves stored ones, reporting bad entries by path.
pub fn resolve_media(inputs: &[MediaInput], media: &MediaStore) -> Result<Vec<MediaRef>> {
    let mut out = Vec::with_capacity(inputs.len());
    let mut errors = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        match input {
            MediaInput::Inline {
                media_type,
                data_base64,
            } => {
                if !media_type.starts_with("image/") {
                    errors.push(FieldError::new(
                        format!("media[{i}].media_type"),
                        "only image attachments are supported",
                    ));
                    continue;
                }
                match base64::engine::general_purpose::STANDARD.decode(data_base64) {
                    Ok(bytes) => out.push(media.put(&bytes, media_type)?),
                    Err(e) => errors.push(FieldError::new(
                        format!("media[{i}].data_base64"),
                        format!("invalid base64: {e}"),
                    )),
                }
            }
            MediaInput::Stored { media_type, digest } => match media.size_of(digest) {
                Some(size) => out.push(MediaRef {
                    digest: digest.clone(),
                    media_type: media_type.clone(),
                    size,
                }),
                None => errors.push(FieldError::new(
                    format!("media[{i}].digest"),
                    "no stored blob with this digest",
                )),
            },
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(Error::Validation(errors))
    }
}

impl Store {
    pub fn create_course(
        &self,
        title: &str,
        description: &str,
        feedback_enabled: bool,
    ) -> Result<Course> {
        let now = self.now();
        self.transact(|state| {
            let course = state
                .catalog
                .new_course(title, description, feedback_enabled, now)?;
            Ok((vec![Event::CourseStored(course.clone())], course))
        })
    }

    pub fn update_course(&self, id: CourseId, patch: &CoursePatch) -> Result<Course> {
        self.transact(|state| {
            let mut course = state.catalog.course(id)?.clone();
            if let Some(title) = &patch.title {
                let title = title.trim();
                if title.is_empty() {
                    return Err(Error::validation("title", "must not be empty"));
                }
                course.title = title.to_string();
            }
            if let Some(description) = &patch.description {
                course.description = description.clone();
            }
            if let Some(flag) = patch.feedback_enabled {
                course.feedback_enabled = flag;
            }
            Ok((vec![Event::CourseStored(course.clone())], course))
        })
    }

    /// Soft delete; the course's questions are soft-deleted with it and attempt
    /// history stays intact.
    pub fn delete_course(&self, id: CourseId) -> Result<()> {
        self.transact(|state| {
            state.catalog.course(id)?;
            Ok((vec![Event::CourseDeleted { id }], ()))
        })
    }

    /// Creates a question (`draft.id` absent) or replaces an existing one in place.
    pub fn upsert_question(&self, course_id: CourseId, draft: &QuestionDraft) -> Result<Question> {
        // Blobs are written before the transaction; an orphaned blob after a
        // rejected draft is harmless since storage is content-addressed.
        let media = resolve_media(&draft.media, self.media())?;
        let now = self.now();
        self.transact(|state| {
            let question = state.catalog.plan_question(course_id, draft, media, now)?;
            Ok((vec![Event::QuestionStored(question.clone())], question))
        })
    }

    pub fn delete_question(&self, id: QuestionId) -> Result<()> {
        self.transact(|state| {
            state.catalog.question(id)?;
            Ok((vec![Event::QuestionDeleted { id }], ()))
        })
    }

    pub fn get_question(&self, id: QuestionId) -> Result<Question> {
        self.read(|s| s.catalog.question(id).cloned())
    }

    pub fn get_question_bundle(&self, id: QuestionId) -> Result<(Question, Vec<Question>)> {
        self.read(|s| s.catalog.get_question_bundle(id))
    }

    pub fn list_catalog(
        &self,
        course_id: CourseId,
        topic: Option<&str>,
        sub_topic: Option<&str>,
    ) -> Result<Vec<QuestionSummary>> {
        self.read(|s| s.catalog.list_catalog(course_id, topic, sub_topic))
    }

    pub fn get_course(&self, id: CourseId) -> Result<Course> {
        self.read(|s| s.catalog.course(id).cloned())
    }

    pub fn list_courses(&self) -> Vec<Course> {
        self.read(|s| s.catalog.courses().cloned().collect())
    }
}
