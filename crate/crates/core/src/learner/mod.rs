//! Attempt log and learner profiles.
//!
//! The log is append-only. Each student's [`LearnerProfile`] is maintained
//! incrementally as attempts land, and can always be rebuilt from the log with
//! [`LearnerState::rebuild_profile`]; the two must agree field for field.

mod types;

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, Utc};

pub use types::*;

use crate::content::QuestionId;
use crate::store::{Event, Store};
use crate::{Error, Result};

pub const DEFAULT_RECURRENCE_THRESHOLD: u32 = 2;

#[derive(Debug, Default, Clone)]
pub struct LearnerState {
    log: Vec<Attempt>,
    by_id: HashMap<AttemptId, usize>,
    ordinals: HashMap<(StudentToken, QuestionId), u32>,
    solved: HashSet<(StudentToken, QuestionId)>,
    profiles: HashMap<StudentToken, LearnerProfile>,
    /// Log position from which each student's profile counts, after an administrative reset.
    reset_at: HashMap<StudentToken, (usize, DateTime<Utc>)>,
}

impl LearnerState {
    pub fn attempts(&self) -> &[Attempt] {
        &self.log
    }

    pub fn attempt(&self, id: AttemptId) -> Option<&Attempt> {
        self.by_id.get(&id).map(|i| &self.log[*i])
    }

    /// Number of attempts the student has made on the question so far.
    pub fn attempts_on(&self, student: &StudentToken, question_id: QuestionId) -> u32 {
        self.ordinals
            .get(&(student.clone(), question_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn has_solved(&self, student: &StudentToken, question_id: QuestionId) -> bool {
        self.solved.contains(&(student.clone(), question_id))
    }

    pub fn profile(&self, student: &StudentToken) -> LearnerProfile {
        self.profiles
            .get(student)
            .cloned()
            .unwrap_or_else(|| LearnerProfile::empty(student.clone()))
    }

    /// Builds the attempt that recording `input` now would append.
    pub fn plan_attempt(
        &self,
        input: AttemptInput,
        question: &crate::content::Question,
    ) -> Result<Attempt> {
        if input.submitted_at < input.opened_at {
            return Err(Error::Ordering {
                opened_at: input.opened_at,
                submitted_at: input.submitted_at,
            });
        }
        let so_far = self.attempts_on(&input.student, question.id);
        if let Some(limit) = question.attempt_limit {
            if so_far >= limit {
                return Err(Error::AttemptLimitExceeded {
                    limit,
                    explanation: Some(question.explanation.clone()),
                });
            }
        }
        let first_correct = input.correct && !self.has_solved(&input.student, question.id);
        Ok(Attempt {
            id: AttemptId::new(),
            student: input.student,
            question_id: question.id,
            course_id: question.course_id,
            topic: question.topic.clone(),
            sub_topic: question.sub_topic.clone(),
            opened_at: input.opened_at,
            submitted_at: input.submitted_at,
            answer: input.answer,
            correct: input.correct,
            hint_text: if input.correct { None } else { input.hint_text },
            points_awarded: if first_correct {
                question.point_value
            } else {
                0
            },
            attempt_ordinal: so_far + 1,
            misconception_label: input.misconception_label,
        })
    }

    pub(crate) fn apply_attempt(&mut self, attempt: Attempt) {
        let seq = self.log.len();
        let key = (attempt.student.clone(), attempt.question_id);
        *self.ordinals.entry(key.clone()).or_insert(0) = attempt.attempt_ordinal;
        if attempt.correct {
            self.solved.insert(key);
        } else {
            let profile = self
                .profiles
                .entry(attempt.student.clone())
                .or_insert_with(|| LearnerProfile::empty(attempt.student.clone()));
            profile.absorb(seq as u64, &attempt);
        }
        self.by_id.insert(attempt.id, seq);
        self.log.push(attempt);
    }

    pub(crate) fn apply_hint(&mut self, attempt_id: AttemptId, hint_text: String) {
        if let Some(i) = self.by_id.get(&attempt_id) {
            self.log[*i].hint_text = Some(hint_text);
        }
    }

    pub(crate) fn apply_reset(&mut self, student: &StudentToken, at: DateTime<Utc>) {
        self.reset_at.insert(student.clone(), (self.log.len(), at));
        let mut fresh = LearnerProfile::empty(student.clone());
        fresh.last_updated = Some(at);
        self.profiles.insert(student.clone(), fresh);
    }

    /// Recomputes a profile from the raw log, ignoring the incremental copy.
    pub fn rebuild_profile(&self, student: &StudentToken) -> LearnerProfile {
        let mut profile = LearnerProfile::empty(student.clone());
        let start = match self.reset_at.get(student) {
            Some((seq, at)) => {
                profile.last_updated = Some(*at);
                *seq
            }
            None => 0,
        };
        for (seq, attempt) in self.log.iter().enumerate().skip(start) {
            if &attempt.student == student && !attempt.correct {
                profile.absorb(seq as u64, attempt);
            }
        }
        profile
    }

    /// Incorrect attempts on `question_id` and `related`, oldest first.
    pub fn error_history(
        &self,
        student: &StudentToken,
        question_id: QuestionId,
        related: &[QuestionId],
    ) -> ErrorHistory {
        let mut entries: Vec<ErrorEntry> = self
            .log
            .iter()
            .filter(|a| &a.student == student && !a.correct)
            .filter(|a| a.question_id == question_id || related.contains(&a.question_id))
            .map(ErrorEntry::from)
            .collect();
        entries.sort_by_key(|e| e.submitted_at);
        ErrorHistory { entries }
    }

    /// Misconception tags on the given questions seen at least `threshold` times,
    /// most frequent first; ties go to the tag that appeared first.
    /// Thresholds below 2 are raised to 2.
    pub fn recurring_misconceptions(
        &self,
        student: &StudentToken,
        scope: &[QuestionId],
        threshold: u32,
    ) -> Vec<RecurringTag> {
        let threshold = threshold.max(2);
        let Some(profile) = self.profiles.get(student) else {
            return Vec::new();
        };
        let mut tags: Vec<(&MisconceptionTag, &TagStats)> = profile
            .misconception_counts
            .iter()
            .filter(|(tag, stats)| scope.contains(&tag.question_id) && stats.count >= threshold)
            .collect();
        tags.sort_by(|a, b| {
            b.1.count
                .cmp(&a.1.count)
                .then(a.1.first_seq.cmp(&b.1.first_seq))
        });
        tags.into_iter()
            .map(|(tag, stats)| RecurringTag {
                tag: tag.clone(),
                count: stats.count,
            })
            .collect()
    }

    /// Sum of points the student earned, per course if given.
    pub fn total_points(
        &self,
        student: &StudentToken,
        course: Option<crate::content::CourseId>,
    ) -> u64 {
        self.log
            .iter()
            .filter(|a| &a.student == student && course.is_none_or(|c| a.course_id == c))
            .map(|a| u64::from(a.points_awarded))
            .sum()
    }

    pub fn students(&self) -> impl Iterator<Item = &StudentToken> {
        let mut seen = BTreeMap::new();
        for a in &self.log {
            seen.entry(&a.student).or_insert(());
        }
        seen.into_keys()
    }
}

impl Store {
    /// Appends an attempt; profile and ordinal updates land in the same transaction.
    pub fn record_attempt(&self, input: AttemptInput) -> Result<Attempt> {
        self.transact(|state| {
            let question = state
                .catalog
                .question_any(input.question_id)
                .filter(|q| !q.deleted)
                .ok_or_else(|| Error::not_found("question", input.question_id))?;
            let attempt = state.learner.plan_attempt(input, question)?;
            Ok((vec![Event::AttemptRecorded(attempt.clone())], attempt))
        })
    }

    /// Logs the hint delivered in response to an incorrect attempt.
    pub fn attach_hint(&self, attempt_id: AttemptId, hint_text: &str) -> Result<()> {
        self.transact(|state| {
            let attempt = state
                .learner
                .attempt(attempt_id)
                .ok_or_else(|| Error::not_found("attempt", attempt_id))?;
            if attempt.correct {
                return Err(Error::validation(
                    "attempt_id",
                    "hints are only attached to incorrect attempts",
                ));
            }
            Ok((
                vec![Event::HintAttached {
                    attempt_id,
                    hint_text: hint_text.to_string(),
                }],
                (),
            ))
        })
    }

    pub fn get_error_history(
        &self,
        student: &StudentToken,
        question_id: QuestionId,
        related: &[QuestionId],
    ) -> ErrorHistory {
        self.read(|s| s.learner.error_history(student, question_id, related))
    }

    pub fn recurring_misconceptions(
        &self,
        student: &StudentToken,
        scope: &[QuestionId],
        threshold: u32,
    ) -> Vec<RecurringTag> {
        self.read(|s| {
            s.learner
                .recurring_misconceptions(student, scope, threshold)
        })
    }

    pub fn learner_profile(&self, student: &StudentToken) -> LearnerProfile {
        self.read(|s| s.learner.profile(student))
    }

    /// Administrative reset: the student's profile starts over from now. The
    /// attempt log itself is untouched.
    pub fn reset_profile(&self, student: &StudentToken) -> Result<()> {
        let at = self.now();
        self.transact(|_| {
            Ok((
                vec![Event::ProfileReset {
                    student: student.clone(),
                    at,
                }],
                (),
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use chrono::{Duration, TimeZone};

    use super::*;
    use crate::content::{OptionKey, QuestionDraft, QuestionKind};

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 3, 1, 9, 0, 0).unwrap() + Duration::seconds(secs)
    }

    fn keys(s: &str) -> AnswerPayload {
        AnswerPayload::Choice(s.chars().map(|c| OptionKey::new(c).unwrap()).collect())
    }

    fn setup(limit: Option<i64>) -> (Store, QuestionId, QuestionId) {
        let store = Store::in_memory();
        let course = store.create_course("c", "", true).unwrap();
        let draft = |topic: &str| QuestionDraft {
            id: None,
            topic: topic.into(),
            sub_topic: "s".into(),
            kind: QuestionKind::SingleChoice,
            body: "b".into(),
            media: vec![],
            options: vec!["w".into(), "x".into(), "y".into(), "z".into()],
            answer_key: vec!["B".into()],
            reference_answer: None,
            explanation: "because".into(),
            context: String::new(),
            point_value: 4,
            attempt_limit: limit,
            related_question_ids: vec![],
        };
        let q = store.upsert_question(course.id, &draft("q")).unwrap();
        let r = store.upsert_question(course.id, &draft("r")).unwrap();
        (store, q.id, r.id)
    }

    fn input(
        student: &StudentToken,
        q: QuestionId,
        answer: &str,
        correct: bool,
        at: i64,
    ) -> AttemptInput {
        AttemptInput {
            student: student.clone(),
            question_id: q,
            opened_at: t(at - 5),
            submitted_at: t(at),
            answer: keys(answer),
            correct,
            hint_text: None,
            misconception_label: None,
        }
    }

    #[test]
    fn wrong_attempt_creates_tag() {
        let (store, q, _) = setup(None);
        let s = StudentToken::generate();
        let a = store.record_attempt(input(&s, q, "C", false, 10)).unwrap();
        assert_eq!(a.attempt_ordinal, 1);
        assert!(!a.correct);
        let profile = store.learner_profile(&s);
        let tag = MisconceptionTag {
            question_id: q,
            signature: "C".into(),
        };
        assert_eq!(profile.misconception_counts[&tag].count, 1);

        store.record_attempt(input(&s, q, "C", false, 20)).unwrap();
        let profile = store.learner_profile(&s);
        assert_eq!(profile.misconception_counts[&tag].count, 2);
        assert_eq!(
            profile.topic_error_counts[&("q".to_string(), "s".to_string())],
            2
        );
    }

    #[test]
    fn correct_attempt_awards_points_once_and_leaves_profile() {
        let (store, q, _) = setup(None);
        let s = StudentToken::generate();
        store.record_attempt(input(&s, q, "A", false, 10)).unwrap();
        let before = store.learner_profile(&s);
        let first = store.record_attempt(input(&s, q, "B", true, 20)).unwrap();
        assert_eq!(first.points_awarded, 4);
        assert_eq!(store.learner_profile(&s), before);
        let again = store.record_attempt(input(&s, q, "B", true, 30)).unwrap();
        assert_eq!(again.points_awarded, 0);
        assert_eq!(again.attempt_ordinal, 3);
    }

    #[test]
    fn ordering_error() {
        let (store, q, _) = setup(None);
        let s = StudentToken::generate();
        let mut i = input(&s, q, "A", false, 10);
        i.opened_at = t(11);
        assert!(matches!(
            store.record_attempt(i),
            Err(Error::Ordering { .. })
        ));
        assert!(store.read(|st| st.learner.attempts().is_empty()));
    }

    #[test]
    fn limit_enforced_in_transaction() {
        let (store, q, _) = setup(Some(2));
        let s = StudentToken::generate();
        store.record_attempt(input(&s, q, "A", false, 10)).unwrap();
        store.record_attempt(input(&s, q, "C", false, 20)).unwrap();
        let err = store
            .record_attempt(input(&s, q, "B", true, 30))
            .unwrap_err();
        assert!(matches!(err, Error::AttemptLimitExceeded { limit: 2, .. }));
    }

    #[test]
    fn history_spans_related_questions_in_order() {
        let (store, q, r) = setup(None);
        let s = StudentToken::generate();
        let other = StudentToken::generate();
        assert!(store.get_error_history(&s, q, &[r]).entries.is_empty());
        store.record_attempt(input(&s, q, "A", false, 10)).unwrap();
        store.record_attempt(input(&s, r, "D", false, 20)).unwrap();
        store
            .record_attempt(input(&other, q, "A", false, 25))
            .unwrap();
        let a3 = store.record_attempt(input(&s, q, "C", false, 30)).unwrap();
        store
            .attach_hint(a3.id, "Think about load spectra.")
            .unwrap();
        store.record_attempt(input(&s, q, "B", true, 40)).unwrap();

        let h = store.get_error_history(&s, q, &[r]);
        let seq: Vec<_> = h
            .entries
            .iter()
            .map(|e| (e.question_id, e.attempt_ordinal))
            .collect();
        assert_eq!(seq, vec![(q, 1), (r, 1), (q, 2)]);
        assert_eq!(
            h.entries[2].hint_text.as_deref(),
            Some("Think about load spectra.")
        );
        assert_eq!(h.prior_on(q), 2);
        assert_eq!(store.get_error_history(&s, q, &[]).entries.len(), 2);
    }

    #[test]
    fn recurring_threshold_and_tie_break() {
        let (store, q, r) = setup(None);
        let s = StudentToken::generate();
        for (qid, ans, at) in [
            (r, "D", 1),
            (q, "C", 2),
            (q, "D", 3),
            (q, "C", 4),
            (r, "D", 5),
        ] {
            store
                .record_attempt(input(&s, qid, ans, false, at * 10))
                .unwrap();
        }
        let rec = store.recurring_misconceptions(&s, &[q], 2);
        assert_eq!(rec.len(), 1);
        assert_eq!(rec[0].tag.signature, "C");

        // (r, D) and (q, C) both at 2; (r, D) appeared first.
        let both = store.recurring_misconceptions(&s, &[q, r], 2);
        let order: Vec<_> = both
            .iter()
            .map(|t| (t.tag.question_id, t.tag.signature.as_str()))
            .collect();
        assert_eq!(order, vec![(r, "D"), (q, "C")]);

        assert!(store.recurring_misconceptions(&s, &[q], 3).is_empty());
    }

    #[test]
    fn all_single_counts_are_not_recurring() {
        let (store, q, _) = setup(None);
        let s = StudentToken::generate();
        for (ans, at) in [("A", 1), ("C", 2), ("D", 3)] {
            store
                .record_attempt(input(&s, q, ans, false, at * 10))
                .unwrap();
        }
        assert!(store.recurring_misconceptions(&s, &[q], 2).is_empty());
    }

    #[test]
    fn reset_then_rebuild_agree() {
        let (store, q, _) = setup(None);
        let s = StudentToken::generate();
        store.record_attempt(input(&s, q, "C", false, 10)).unwrap();
        store.reset_profile(&s).unwrap();
        assert!(store.learner_profile(&s).misconception_counts.is_empty());
        store.record_attempt(input(&s, q, "D", false, 20)).unwrap();
        store.read(|st| assert_eq!(st.learner.profile(&s), st.learner.rebuild_profile(&s)));
    }

    #[test]
    fn multi_key_signature_is_canonical() {
        let a: BTreeSet<OptionKey> = ['C', 'A']
            .into_iter()
            .map(|c| OptionKey::new(c).unwrap())
            .collect();
        assert_eq!(signature_for(&AnswerPayload::Choice(a), None), "A+C");
        assert_eq!(
            signature_for(
                &AnswerPayload::Text("  Rutting   due to\tBINDER ".into()),
                None
            ),
            "rutting due to binder"
        );
        assert_eq!(
            signature_for(
                &AnswerPayload::Text("x".into()),
                Some("confuses ESAL with AADT")
            ),
            "confuses esal with aadt"
        );
    }
}
