pub mod engagement;
pub mod export;
pub mod questionnaire;

pub use engagement::{engagement_report, Cohort, EngagementReport, EngagementRow};
pub use questionnaire::{Dimension, QuestionnaireResult, QuestionnaireSpec, RespondentResponses};

use crate::content::CourseId;
use crate::learner::{AnswerPayload, Attempt};
use crate::store::Store;
use crate::Result;

impl Store {
    /// Engagement report with free text passed through the roster redactor, so
    /// that nothing a student typed about themselves leaves in a report.
    pub fn engagement_report(&self, course_id: CourseId) -> Result<EngagementReport> {
        self.read(|s| {
            let course = s.catalog.course(course_id)?;
            let questions: Vec<_> = s.catalog.course_questions_any(course_id).collect();
            let mut report = engagement_report(course, &questions, s.learner.attempts());
            let redactor = s.roster.redactor();
            for row in &mut report.rows {
                for hint in &mut row.hints {
                    *hint = redactor.redact_text(hint);
                }
            }
            Ok(report)
        })
    }

    /// Raw attempt log for a course as CSV, with answer and hint text redacted.
    pub fn attempt_log_export(&self, course_id: CourseId) -> Result<Vec<u8>> {
        self.read(|s| {
            s.catalog.course(course_id)?;
            let redactor = s.roster.redactor();
            let attempts: Vec<Attempt> = s
                .learner
                .attempts()
                .iter()
                .filter(|a| a.course_id == course_id)
                .map(|a| {
                    let mut a = a.clone();
                    if let AnswerPayload::Text(t) = &mut a.answer {
                        *t = redactor.redact_text(t);
                    }
                    a.hint_text = a.hint_text.map(|h| redactor.redact_text(&h));
                    a
                })
                .collect();
            export::attempt_log_csv(&attempts)
        })
    }
}
