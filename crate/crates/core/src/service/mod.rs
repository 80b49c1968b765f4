//! Application service: authentication, the student answer flow and
//! student-facing reads. The HTTP layer is a thin wrapper over [`Platform`].

pub mod roster;

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::content::{CourseId, Question, QuestionId, StudentQuestionView};
use crate::learner::{AnswerPayload, AttemptId, AttemptInput, StudentToken};
use crate::store::Store;
use crate::tutor::grade::check_payload;
use crate::tutor::HintEngine;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Principal {
    Instructor,
    Student(StudentToken),
}

#[derive(Debug, Clone, Deserialize)]
pub struct Submission {
    pub question_id: QuestionId,
    /// When the question was shown to the student.
    pub opened_at: DateTime<Utc>,
    pub answer: AnswerPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveredHint {
    pub text: String,
    pub specificity_level: u8,
    pub leak_filtered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionOutcome {
    pub attempt_id: AttemptId,
    pub question_id: QuestionId,
    pub correct: bool,
    pub attempt_ordinal: u32,
    pub points_awarded: u32,
    pub attempts_remaining: Option<u32>,
    pub hint: Option<DeliveredHint>,
    /// Set when feedback is on but no hint could be produced this time.
    pub hint_unavailable: bool,
    /// Instructor explanation, shown once the question is solved or out of attempts.
    pub explanation: Option<String>,
    /// Grader's reasoning for short answers, under the same reveal rule.
    pub grader_explanation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionProgress {
    pub question_id: QuestionId,
    pub attempts: u32,
    pub solved: bool,
    pub points: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub student_token: StudentToken,
    pub course_id: CourseId,
    pub total_points: u64,
    pub possible_points: u64,
    pub questions: Vec<QuestionProgress>,
}

pub struct Platform {
    store: Arc<Store>,
    engine: HintEngine,
    instructor_tokens: Vec<String>,
}

impl Platform {
    pub fn new(store: Arc<Store>, engine: HintEngine, instructor_tokens: Vec<String>) -> Self {
        Self {
            store,
            engine,
            instructor_tokens: instructor_tokens
                .into_iter()
                .filter(|t| !t.trim().is_empty())
                .collect(),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn engine(&self) -> &HintEngine {
        &self.engine
    }

    /// Resolves a bearer secret to an instructor or an enrolled student.
    pub fn authenticate(&self, bearer: &str) -> Result<Principal> {
        let bearer = bearer.trim();
        if bearer.is_empty() {
            return Err(Error::Auth("missing credentials".into()));
        }
        if self
            .instructor_tokens
            .iter()
            .any(|t| constant_time_eq(t.as_bytes(), bearer.as_bytes()))
        {
            return Ok(Principal::Instructor);
        }
        self.store
            .read(|s| s.roster.by_session(bearer).cloned())
            .map(Principal::Student)
            .ok_or_else(|| Error::Auth("unknown session".into()))
    }

    pub fn student_question(&self, id: QuestionId) -> Result<StudentQuestionView> {
        self.store.read(|s| {
            let q = s.catalog.question(id)?;
            s.catalog.course(q.course_id)?;
            Ok(StudentQuestionView::from(q))
        })
    }

    pub fn student_course_questions(
        &self,
        course_id: CourseId,
    ) -> Result<Vec<StudentQuestionView>> {
        self.store.read(|s| {
            s.catalog.course(course_id)?;
            Ok(s.catalog
                .course_questions(course_id)
                .map(StudentQuestionView::from)
                .collect())
        })
    }

    /// Grades an answer, logs the attempt and, for incorrect answers in a
    /// feedback-enabled course, generates and logs a hint. A hint failure never
    /// loses the attempt.
    pub async fn submit_answer(
        &self,
        student: &StudentToken,
        submission: Submission,
    ) -> Result<SubmissionOutcome> {
        let (question, related, feedback_enabled, history, recurring, redactor) =
            self.store.read(|s| -> Result<_> {
                let question = s.catalog.question(submission.question_id)?.clone();
                let course = s.catalog.course(question.course_id)?;
                if let Some(limit) = question.attempt_limit {
                    if s.learner.attempts_on(student, question.id) >= limit {
                        return Err(Error::AttemptLimitExceeded {
                            limit,
                            explanation: Some(question.explanation.clone()),
                        });
                    }
                }
                let related: Vec<Question> = question
                    .related_question_ids
                    .iter()
                    .filter_map(|id| s.catalog.question(*id).ok().cloned())
                    .collect();
                let related_ids: Vec<QuestionId> = related.iter().map(|q| q.id).collect();
                let history = s.learner.error_history(student, question.id, &related_ids);
                let mut scope = vec![question.id];
                scope.extend(&related_ids);
                let recurring = s.learner.recurring_misconceptions(
                    student,
                    &scope,
                    self.engine.config().recurrence_threshold,
                );
                Ok((
                    question,
                    related,
                    course.feedback_enabled,
                    history,
                    recurring,
                    s.roster.redactor(),
                ))
            })?;
        check_payload(&question, &submission.answer)?;

        let graded = self
            .engine
            .grade(&question, &submission.answer, &redactor)
            .await?;
        let attempt = self.store.record_attempt(AttemptInput {
            student: student.clone(),
            question_id: question.id,
            opened_at: submission.opened_at,
            submitted_at: self.store.now(),
            answer: submission.answer.clone(),
            correct: graded.correct,
            hint_text: None,
            misconception_label: graded
                .verdict
                .as_ref()
                .and_then(|v| v.misconception_label.clone()),
        })?;

        let mut hint = None;
        let mut hint_unavailable = false;
        if !attempt.correct && feedback_enabled {
            let bundle = self.engine.prompt_for(
                &question,
                &related,
                &submission.answer,
                &history,
                &recurring,
                &redactor,
            );
            match self.engine.generate_hint(&bundle, &question).await {
                Ok(h) => {
                    self.store.attach_hint(attempt.id, &h.hint_text)?;
                    hint = Some(DeliveredHint {
                        text: h.hint_text,
                        specificity_level: h.specificity_level,
                        leak_filtered: h.leak_filtered,
                    });
                }
                Err(e) => {
                    tracing::warn!(error = %e, attempt = %attempt.id, "hint unavailable");
                    hint_unavailable = true;
                }
            }
        }

        let attempts_remaining = question
            .attempt_limit
            .map(|l| l.saturating_sub(attempt.attempt_ordinal));
        let reveal = attempt.correct || attempts_remaining == Some(0);
        Ok(SubmissionOutcome {
            attempt_id: attempt.id,
            question_id: question.id,
            correct: attempt.correct,
            attempt_ordinal: attempt.attempt_ordinal,
            points_awarded: attempt.points_awarded,
            attempts_remaining,
            hint,
            hint_unavailable,
            explanation: (reveal && !question.explanation.trim().is_empty())
                .then(|| question.explanation.clone()),
            grader_explanation: graded
                .verdict
                .filter(|_| reveal)
                .map(|v| v.explanation)
                .filter(|e| !e.is_empty()),
        })
    }

    pub fn score(&self, student: &StudentToken, course_id: CourseId) -> Result<ScoreSummary> {
        self.store.read(|s| {
            s.catalog.course(course_id)?;
            let mut questions = Vec::new();
            let mut possible = 0u64;
            for q in s.catalog.course_questions(course_id) {
                possible += u64::from(q.point_value);
                let points = s
                    .learner
                    .attempts()
                    .iter()
                    .filter(|a| &a.student == student && a.question_id == q.id)
                    .map(|a| u64::from(a.points_awarded))
                    .sum();
                questions.push(QuestionProgress {
                    question_id: q.id,
                    attempts: s.learner.attempts_on(student, q.id),
                    solved: s.learner.has_solved(student, q.id),
                    points,
                });
            }
            Ok(ScoreSummary {
                student_token: student.clone(),
                course_id,
                total_points: s.learner.total_points(student, Some(course_id)),
                possible_points: possible,
                questions,
            })
        })
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}
