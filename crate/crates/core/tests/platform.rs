use std::sync::Arc;

use chrono::{TimeZone, Utc};
use pappl_core::content::course_file::CourseFile;
use pappl_core::content::{OptionKey, Question, QuestionKind};
use pappl_core::learner::{AnswerPayload, StudentToken};
use pappl_core::service::roster::Enrollment;
use pappl_core::service::{Platform, Principal, Submission};
use pappl_core::store::{ManualClock, Store};
use pappl_core::tutor::provider::{Purpose, MOCK_HINT};
use pappl_core::tutor::{HintEngine, MockProvider, ProviderError, TutorConfig};
use pappl_core::Error;

fn course_file() -> CourseFile {
    serde_json::from_str(include_str!("../fixtures/sample_course.json")).unwrap()
}

struct Fixture {
    platform: Platform,
    mock: Arc<MockProvider>,
    student: StudentToken,
    session: String,
    questions: Vec<Question>,
}

fn fixture(store: Store) -> Fixture {
    let store = Arc::new(store);
    if store.read(|s| s.catalog.courses().next().is_none()) {
        store.import_course_file(&course_file()).unwrap();
    }
    let enrolled = store
        .enroll_student(&Enrollment {
            display_name: "Alex Rivera".into(),
            email: Some("alex.rivera@example.org".into()),
            external_id: None,
        })
        .unwrap();
    let questions = store.read(|s| {
        let course = s.catalog.courses().next().unwrap().id;
        s.catalog.course_questions(course).cloned().collect()
    });
    let mock = Arc::new(MockProvider::new());
    let engine = HintEngine::new(mock.clone(), TutorConfig::default());
    Fixture {
        platform: Platform::new(store, engine, vec!["teach".into()]),
        mock,
        student: enrolled.student_token,
        session: enrolled.session_token,
        questions,
    }
}

impl Fixture {
    fn find(&self, pred: impl Fn(&Question) -> bool) -> Question {
        self.questions.iter().find(|q| pred(q)).cloned().unwrap()
    }

    async fn submit(
        &self,
        q: &Question,
        answer: AnswerPayload,
    ) -> pappl_core::Result<pappl_core::service::SubmissionOutcome> {
        let opened_at = self.platform.store().now() - chrono::Duration::seconds(30);
        self.platform
            .submit_answer(
                &self.student,
                Submission {
                    question_id: q.id,
                    opened_at,
                    answer,
                },
            )
            .await
    }

    fn attempt_count(&self) -> usize {
        self.platform.store().read(|s| s.learner.attempts().len())
    }
}

fn choice(s: &str) -> AnswerPayload {
    AnswerPayload::Choice(s.chars().filter_map(OptionKey::new).collect())
}

fn wrong_choice(q: &Question) -> AnswerPayload {
    let k = q
        .options
        .iter()
        .map(|o| o.key)
        .find(|k| !q.answer_key.contains(k))
        .unwrap();
    AnswerPayload::Choice([k].into())
}

#[tokio::test]
async fn attempt_limit_reveals_then_blocks_without_calling_provider() {
    let f = fixture(Store::in_memory());
    let q = f.find(|q| q.kind == QuestionKind::TrueFalse && q.attempt_limit == Some(2));

    let first = f.submit(&q, wrong_choice(&q)).await.unwrap();
    assert!(!first.correct);
    assert_eq!(first.attempts_remaining, Some(1));
    assert!(first.explanation.is_none());
    assert_eq!(first.hint.as_ref().unwrap().text, MOCK_HINT);

    let second = f.submit(&q, wrong_choice(&q)).await.unwrap();
    assert_eq!(second.attempts_remaining, Some(0));
    assert_eq!(second.explanation.as_deref(), Some(q.explanation.as_str()));

    let calls = f.mock.requests().len();
    let err = f
        .submit(&q, AnswerPayload::Choice(q.answer_key.clone()))
        .await
        .unwrap_err();
    assert!(
        matches!(err, Error::AttemptLimitExceeded { limit: 2, .. }),
        "{err:?}"
    );
    assert_eq!(f.mock.requests().len(), calls);
    assert_eq!(f.attempt_count(), 2);
}

#[tokio::test]
async fn correct_answer_awards_points_once_and_reveals() {
    let f = fixture(Store::in_memory());
    let q = f.find(|q| q.kind == QuestionKind::SingleChoice && q.attempt_limit == Some(3));

    let solved = f
        .submit(&q, AnswerPayload::Choice(q.answer_key.clone()))
        .await
        .unwrap();
    assert!(solved.correct);
    assert_eq!(solved.points_awarded, q.point_value);
    assert!(solved.hint.is_none());
    assert_eq!(solved.explanation.as_deref(), Some(q.explanation.as_str()));
    assert!(
        f.mock.requests().is_empty(),
        "choice grading must not call the provider"
    );

    let again = f
        .submit(&q, AnswerPayload::Choice(q.answer_key.clone()))
        .await
        .unwrap();
    assert_eq!(again.points_awarded, 0);
    let score = f.platform.score(&f.student, q.course_id).unwrap();
    assert_eq!(score.total_points, u64::from(q.point_value));
}

#[tokio::test]
async fn provider_failure_still_records_the_attempt() {
    let f = fixture(Store::in_memory());
    let q = f.find(|q| q.kind == QuestionKind::SingleChoice && q.attempt_limit == Some(3));
    f.mock
        .push_error(ProviderError::Timeout(std::time::Duration::from_secs(30)));

    let out = f.submit(&q, wrong_choice(&q)).await.unwrap();
    assert!(out.hint.is_none());
    assert!(out.hint_unavailable);
    assert_eq!(f.attempt_count(), 1);
    let logged = f
        .platform
        .store()
        .read(|s| s.learner.attempts()[0].hint_text.clone());
    assert_eq!(logged, None);

    // The next wrong answer gets a hint again once the provider recovers.
    let next = f.submit(&q, wrong_choice(&q)).await.unwrap();
    assert!(next.hint.is_some() && !next.hint_unavailable);
}

#[tokio::test]
async fn malformed_short_answer_verdict_is_retried_once() {
    let f = fixture(Store::in_memory());
    let q = f.find(|q| q.reference_answer.as_deref() == Some("truck factor"));

    f.mock.push_reply("Sure! The student is right.");
    let out = f
        .submit(&q, AnswerPayload::Text("the Truck Factor".into()))
        .await
        .unwrap();
    assert!(out.correct);
    let grades: Vec<_> = f
        .mock
        .requests()
        .into_iter()
        .filter(|r| r.purpose == Purpose::Grade)
        .collect();
    assert_eq!(grades.len(), 2);
    assert!(grades[1].system.len() > grades[0].system.len());

    f.mock.push_reply("not json");
    f.mock.push_reply("still not json");
    let err = f
        .submit(&q, AnswerPayload::Text("axle load".into()))
        .await
        .unwrap_err();
    assert!(
        matches!(err, Error::Provider(ProviderError::Malformed(_))),
        "{err:?}"
    );
    assert_eq!(
        f.attempt_count(),
        1,
        "an ungraded answer must not be recorded"
    );
}

#[tokio::test]
async fn malformed_payloads_are_rejected_before_grading() {
    let f = fixture(Store::in_memory());
    let single = f.find(|q| q.kind == QuestionKind::SingleChoice);
    let short = f.find(|q| q.kind == QuestionKind::ShortAnswer);
    for (q, answer) in [
        (&single, choice("AB")),
        (&single, choice("")),
        (&single, choice("Z")),
        (&single, AnswerPayload::Text("B".into())),
        (&short, choice("A")),
    ] {
        let err = f.submit(q, answer).await.unwrap_err();
        assert_eq!(err.code(), "payload_shape_error", "{err:?}");
    }
    assert_eq!(f.attempt_count(), 0);
    assert!(f.mock.requests().is_empty());
}

#[tokio::test]
async fn baseline_course_never_calls_the_hint_provider() {
    let mut file = course_file();
    file.courses[0].feedback_enabled = false;
    let store = Store::in_memory();
    store.import_course_file(&file).unwrap();
    let f = fixture(store);
    let q = f.find(|q| q.kind == QuestionKind::SingleChoice && q.attempt_limit == Some(3));
    let out = f.submit(&q, wrong_choice(&q)).await.unwrap();
    assert!(out.hint.is_none() && !out.hint_unavailable);
    assert!(f.mock.requests().is_empty());
}

#[tokio::test]
async fn state_survives_reopening_the_data_directory() {
    let dir = tempfile::tempdir().unwrap();
    let start = Utc.with_ymd_and_hms(2025, 4, 1, 10, 0, 0).unwrap();
    let clock = Arc::new(ManualClock::new(start));
    let (student, session, profile, attempts) = {
        let f = fixture(Store::open(dir.path()).unwrap().with_clock(clock.clone()));
        let q = f.find(|q| q.kind == QuestionKind::SingleChoice && q.attempt_limit == Some(3));
        f.submit(&q, wrong_choice(&q)).await.unwrap();
        clock.advance(chrono::Duration::seconds(40));
        f.submit(&q, wrong_choice(&q)).await.unwrap();
        let store = f.platform.store();
        let profile = store.read(|s| s.learner.profile(&f.student));
        let attempts = store.read(|s| s.learner.attempts().to_vec());
        (f.student, f.session, profile, attempts)
    };

    let reopened = Arc::new(Store::open(dir.path()).unwrap());
    assert_eq!(reopened.read(|s| s.learner.attempts().to_vec()), attempts);
    assert_eq!(reopened.read(|s| s.learner.profile(&student)), profile);
    assert!(attempts
        .iter()
        .all(|a| a.hint_text.as_deref() == Some(MOCK_HINT)));
    let platform = Platform::new(
        reopened,
        HintEngine::new(Arc::new(MockProvider::new()), TutorConfig::default()),
        vec!["teach".into()],
    );
    assert_eq!(
        platform.authenticate(&session).unwrap(),
        Principal::Student(student)
    );
    assert_eq!(
        platform.authenticate("teach").unwrap(),
        Principal::Instructor
    );
    assert!(platform.authenticate("wrong").is_err());
}
