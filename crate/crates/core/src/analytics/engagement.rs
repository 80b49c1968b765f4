//! Per-student, per-question engagement aggregates for one course.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::content::{Course, CourseId, Question, QuestionId};
use crate::learner::{Attempt, StudentToken};

/// Whether a course ran with generated feedback or as a control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Feedback,
    Baseline,
}

impl Cohort {
    pub fn of(course: &Course) -> Self {
        if course.feedback_enabled {
            Cohort::Feedback
        } else {
            Cohort::Baseline
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRow {
    pub student_token: StudentToken,
    pub question_id: QuestionId,
    pub total_attempts: u32,
    /// Any attempt on the question was correct.
    pub correct: bool,
    /// The student's questions answered correctly over questions attempted in
    /// the course; the same value on each of the student's rows.
    pub correctness_ratio: f64,
    pub first_opened_at: DateTime<Utc>,
    pub last_submitted_at: DateTime<Utc>,
    /// Sum of `submitted_at - opened_at` over the attempts.
    #[serde(with = "seconds")]
    pub time_spent: Duration,
    pub points_awarded: u64,
    /// Hints delivered, in attempt order.
    pub hints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionAggregate {
    pub question_id: QuestionId,
    pub topic: String,
    pub sub_topic: String,
    pub students: usize,
    pub mean_attempts: f64,
    pub mean_time_spent_seconds: f64,
    /// Share of students solving the question within `n` attempts; index 0 is `n = 1`.
    pub success_within_attempts: Vec<f64>,
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentSummary {
    pub student_token: StudentToken,
    pub questions_attempted: usize,
    pub questions_correct: usize,
    pub correctness_ratio: f64,
    pub total_attempts: u32,
    pub total_points: u64,
    pub time_spent_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementReport {
    pub course_id: CourseId,
    pub course_title: String,
    pub cohort: Cohort,
    pub rows: Vec<EngagementRow>,
    pub per_question: Vec<QuestionAggregate>,
    pub per_student: Vec<StudentSummary>,
}

pub fn seconds_f64(d: Duration) -> f64 {
    d.num_seconds() as f64 + f64::from(d.subsec_nanos()) / 1e9
}

/// Builds the report from a course, its questions in display order (deleted
/// ones included so historical attempts still land somewhere) and the attempt log.
pub fn engagement_report<'a>(
    course: &Course,
    questions: &[&Question],
    attempts: impl IntoIterator<Item = &'a Attempt>,
) -> EngagementReport {
    let position: BTreeMap<QuestionId, usize> = questions
        .iter()
        .enumerate()
        .map(|(i, q)| (q.id, i))
        .collect();

    // (student, question position) -> attempts in log order
    let mut grouped: BTreeMap<(StudentToken, usize), Vec<&Attempt>> = BTreeMap::new();
    for a in attempts.into_iter().filter(|a| a.course_id == course.id) {
        if let Some(&pos) = position.get(&a.question_id) {
            grouped.entry((a.student.clone(), pos)).or_default().push(a);
        }
    }

    let mut rows: Vec<EngagementRow> = grouped
        .iter()
        .map(|((student, _), list)| row_for(student, list))
        .collect();

    let per_question = questions
        .iter()
        .enumerate()
        .map(|(pos, q)| {
            let groups: Vec<&Vec<&Attempt>> = grouped
                .iter()
                .filter(|((_, p), _)| *p == pos)
                .map(|(_, l)| l)
                .collect();
            question_aggregate(q, &groups)
        })
        .collect();

    let mut per_student: BTreeMap<StudentToken, StudentSummary> = BTreeMap::new();
    for row in &rows {
        let s = per_student
            .entry(row.student_token.clone())
            .or_insert_with(|| StudentSummary {
                student_token: row.student_token.clone(),
                questions_attempted: 0,
                questions_correct: 0,
                correctness_ratio: 0.0,
                total_attempts: 0,
                total_points: 0,
                time_spent_seconds: 0.0,
            });
        s.questions_attempted += 1;
        s.questions_correct += usize::from(row.correct);
        s.total_attempts += row.total_attempts;
        s.total_points += row.points_awarded;
        s.time_spent_seconds += seconds_f64(row.time_spent);
    }
    for s in per_student.values_mut() {
        s.correctness_ratio = s.questions_correct as f64 / s.questions_attempted as f64;
    }
    for row in &mut rows {
        row.correctness_ratio = per_student[&row.student_token].correctness_ratio;
    }

    EngagementReport {
        course_id: course.id,
        course_title: course.title.clone(),
        cohort: Cohort::of(course),
        rows,
        per_question,
        per_student: per_student.into_values().collect(),
    }
}

fn row_for(student: &StudentToken, list: &[&Attempt]) -> EngagementRow {
    EngagementRow {
        student_token: student.clone(),
        question_id: list[0].question_id,
        total_attempts: list.len() as u32,
        correct: list.iter().any(|a| a.correct),
        correctness_ratio: 0.0,
        first_opened_at: list.iter().map(|a| a.opened_at).min().expect("nonempty"),
        last_submitted_at: list.iter().map(|a| a.submitted_at).max().expect("nonempty"),
        time_spent: list
            .iter()
            .map(|a| a.duration())
            .fold(Duration::zero(), |x, y| x + y),
        points_awarded: list.iter().map(|a| u64::from(a.points_awarded)).sum(),
        hints: list.iter().filter_map(|a| a.hint_text.clone()).collect(),
    }
}

fn question_aggregate(q: &Question, groups: &[&Vec<&Attempt>]) -> QuestionAggregate {
    let students = groups.len();
    let (mean_attempts, mean_time) = if students == 0 {
        (0.0, 0.0)
    } else {
        let attempts: usize = groups.iter().map(|g| g.len()).sum();
        let time: f64 = groups
            .iter()
            .map(|g| {
                seconds_f64(
                    g.iter()
                        .map(|a| a.duration())
                        .fold(Duration::zero(), |x, y| x + y),
                )
            })
            .sum();
        (attempts as f64 / students as f64, time / students as f64)
    };
    let longest = groups.iter().map(|g| g.len()).max().unwrap_or(0);
    let first_success: Vec<Option<usize>> = groups
        .iter()
        .map(|g| g.iter().position(|a| a.correct).map(|i| i + 1))
        .collect();
    let success_within_attempts = (1..=longest)
        .map(|n| {
            let solved = first_success
                .iter()
                .filter(|s| s.is_some_and(|k| k <= n))
                .count();
            solved as f64 / students as f64
        })
        .collect();
    QuestionAggregate {
        question_id: q.id,
        topic: q.topic.clone(),
        sub_topic: q.sub_topic.clone(),
        students,
        mean_attempts,
        mean_time_spent_seconds: mean_time,
        success_within_attempts,
        deleted: q.deleted,
    }
}

mod seconds {
    use chrono::Duration;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::super::export::format_seconds(*d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let s = String::deserialize(d)?;
        super::super::export::parse_seconds(&s).map_err(serde::de::Error::custom)
    }
}
