use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::prompt::render_sections;
use super::provider::{CompletionProvider, CompletionRequest, ProviderError, Purpose};
use super::redact::Redactor;
use crate::content::{OptionKey, Question, QuestionKind};
use crate::learner::AnswerPayload;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeVerdict {
    pub correct: bool,
    pub explanation: String,
    #[serde(default)]
    pub misconception_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graded {
    pub correct: bool,
    /// Present for provider-graded (short-answer) questions.
    pub verdict: Option<GradeVerdict>,
}

/// Checks that the payload has the right shape for the question and returns
/// the selected keys for choice questions.
pub fn check_payload<'a>(
    question: &Question,
    payload: &'a AnswerPayload,
) -> Result<Option<&'a BTreeSet<OptionKey>>> {
    match (question.kind, payload) {
        (QuestionKind::ShortAnswer, AnswerPayload::Text(t)) => {
            if t.trim().is_empty() {
                Err(Error::PayloadShape("short answer must not be empty".into()))
            } else {
                Ok(None)
            }
        }
        (QuestionKind::ShortAnswer, AnswerPayload::Choice(_)) => Err(Error::PayloadShape(
            "short_answer questions take a text answer".into(),
        )),
        (_, AnswerPayload::Text(_)) => Err(Error::PayloadShape(format!(
            "{} questions take a set of option keys",
            question.kind
        ))),
        (kind, AnswerPayload::Choice(keys)) => {
            if let Some(k) = keys.iter().find(|k| question.option_text(**k).is_none()) {
                return Err(Error::PayloadShape(format!(
                    "`{k}` is not an option of this question"
                )));
            }
            if matches!(kind, QuestionKind::SingleChoice | QuestionKind::TrueFalse)
                && keys.len() != 1
            {
                return Err(Error::PayloadShape(format!(
                    "{kind} questions take exactly one key, got {}",
                    keys.len()
                )));
            }
            Ok(Some(keys))
        }
    }
}

/// Deterministic grading for choice kinds: exact set equality with the key.
/// No partial credit.
pub fn grade_choice(question: &Question, payload: &AnswerPayload) -> Result<bool> {
    match check_payload(question, payload)? {
        Some(keys) => Ok(*keys == question.answer_key),
        None => Err(Error::PayloadShape(
            "short_answer questions are graded by the provider".into(),
        )),
    }
}

const GRADER_SYSTEM: &str =
    "You are an automatic grader for short-answer questions. Judge whether \
the student's answer is semantically correct with respect to the reference answer and the \
instructor context; wording may differ. Reply with a single JSON object and nothing else: \
{\"correct\": boolean, \"explanation\": string, \"misconception_label\": string or null}. \
The explanation must be nonempty when the answer is incorrect. misconception_label is a short \
label (at most six words) naming the underlying misconception when the answer is incorrect, \
otherwise null.";

pub const JSON_RETRY_DIRECTIVE: &str = "Your previous reply was not valid JSON. Reply with valid \
JSON only, exactly matching the schema above.";

pub fn grading_request(question: &Question, answer: &str, temperature: f32) -> CompletionRequest {
    let reference = question.reference_answer.as_deref().unwrap_or_default();
    let context = if question.context.trim().is_empty() {
        "(none provided)"
    } else {
        question.context.trim()
    };
    CompletionRequest {
        purpose: Purpose::Grade,
        system: GRADER_SYSTEM.to_string(),
        user: render_sections([
            ("QUESTION", question.body.trim()),
            ("REFERENCE_ANSWER", reference),
            ("INSTRUCTOR_CONTEXT", context),
            ("STUDENT_ANSWER", answer.trim()),
        ]),
        temperature,
    }
}

/// Parses a verdict from a model reply, tolerating code fences and chatter
/// around a single JSON object.
pub fn parse_verdict(reply: &str) -> std::result::Result<GradeVerdict, String> {
    let start = reply.find('{').ok_or("no JSON object in reply")?;
    let end = reply.rfind('}').ok_or("no JSON object in reply")?;
    if end < start {
        return Err("no JSON object in reply".into());
    }
    let mut verdict: GradeVerdict =
        serde_json::from_str(&reply[start..=end]).map_err(|e| e.to_string())?;
    verdict.explanation = verdict.explanation.trim().to_string();
    verdict.misconception_label = verdict
        .misconception_label
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty());
    if !verdict.correct && verdict.explanation.is_empty() {
        return Err("incorrect verdict without an explanation".into());
    }
    Ok(verdict)
}

/// Grades any question kind. Short answers go to the provider (after redaction);
/// a malformed reply is retried once with a JSON-only directive and then
/// surfaced as [`ProviderError::Malformed`].
pub async fn grade(
    question: &Question,
    payload: &AnswerPayload,
    provider: &dyn CompletionProvider,
    temperature: f32,
    redactor: &Redactor,
) -> Result<Graded> {
    if question.kind.is_choice() {
        return Ok(Graded {
            correct: grade_choice(question, payload)?,
            verdict: None,
        });
    }
    check_payload(question, payload)?;
    let AnswerPayload::Text(text) = payload else {
        unreachable!("checked above");
    };
    let mut request = grading_request(question, &redactor.redact_text(text), temperature);
    request.user = redactor.redact_text(&request.user);

    let first = provider.complete(&request).await?;
    let verdict = match parse_verdict(&first) {
        Ok(v) => v,
        Err(first_err) => {
            tracing::warn!(error = %first_err, "grader reply was not a valid verdict; retrying");
            request.system.push('\n');
            request.system.push_str(JSON_RETRY_DIRECTIVE);
            let second = provider.complete(&request).await?;
            parse_verdict(&second).map_err(ProviderError::Malformed)?
        }
    };
    Ok(Graded {
        correct: verdict.correct,
        verdict: Some(verdict),
    })
}
