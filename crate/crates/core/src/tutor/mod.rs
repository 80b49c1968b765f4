//! Hint generation and grading.

pub mod grade;
pub mod leak;
pub mod prompt;
pub mod provider;
pub mod redact;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use grade::{GradeVerdict, Graded};
pub use leak::LeakGuard;
pub use prompt::{build_prompt, PromptBundle, PromptInputs, SectionLabel};
pub use provider::{CompletionProvider, MockProvider, ProviderError};
pub use redact::Redactor;

use crate::content::{Question, QuestionId};
use crate::learner::{AnswerPayload, ErrorHistory, RecurringTag};

pub const DEFAULT_TEMPERATURE: f32 = 0.2;
pub const DEFAULT_MAX_LEVEL: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TutorConfig {
    /// Sampling temperature, within `0.0..=2.0`.
    pub temperature: f32,
    /// Highest specificity level, within `1..=3`.
    pub max_level: u8,
    pub recurrence_threshold: u32,
}

impl Default for TutorConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_level: DEFAULT_MAX_LEVEL,
            recurrence_threshold: crate::learner::DEFAULT_RECURRENCE_THRESHOLD,
        }
    }
}

impl TutorConfig {
    pub fn validated(self) -> Result<Self, String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if !(1..=3).contains(&self.max_level) {
            return Err(format!("max level {} outside 1..=3", self.max_level));
        }
        if self.recurrence_threshold < 2 {
            return Err("recurrence threshold must be at least 2".into());
        }
        Ok(self)
    }
}

/// Hint level: one more than the prior incorrect attempts on this question,
/// capped at `max_level`; any recurring misconception (on this question or a
/// related one) lifts it to at least 2.
pub fn specificity_for(
    history: &ErrorHistory,
    question_id: QuestionId,
    recurring: &[RecurringTag],
    max_level: u8,
) -> u8 {
    let cap = max_level.clamp(1, 3);
    let prior = history.prior_on(question_id);
    let mut level = u8::try_from(prior.saturating_add(1))
        .unwrap_or(u8::MAX)
        .min(cap);
    if !recurring.is_empty() {
        level = level.max(2.min(cap));
    }
    level
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintResult {
    pub hint_text: String,
    pub specificity_level: u8,
    /// Whether regeneration or mechanical redaction was needed.
    pub leak_filtered: bool,
    pub provider: String,
    #[serde(with = "millis")]
    pub latency: Duration,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Clone)]
pub struct HintEngine {
    provider: Arc<dyn CompletionProvider>,
    config: TutorConfig,
}

impl HintEngine {
    pub fn new(provider: Arc<dyn CompletionProvider>, config: TutorConfig) -> Self {
        Self { provider, config }
    }

    pub fn config(&self) -> &TutorConfig {
        &self.config
    }

    pub fn provider(&self) -> &Arc<dyn CompletionProvider> {
        &self.provider
    }

    /// Assembles the hint prompt for an incorrect answer and scrubs identifiers from it.
    pub fn prompt_for(
        &self,
        question: &Question,
        related: &[Question],
        current_answer: &AnswerPayload,
        history: &ErrorHistory,
        recurring: &[RecurringTag],
        redactor: &Redactor,
    ) -> PromptBundle {
        let level = specificity_for(history, question.id, recurring, self.config.max_level);
        build_prompt(&PromptInputs {
            question,
            related,
            current_answer: Some(current_answer),
            error_history: history,
            recurring,
            specificity_level: level,
            temperature: self.config.temperature,
        })
        .map_content(|s| redactor.redact_text(s))
    }

    /// Calls the provider and screens the reply for answer leaks. A leaking
    /// reply gets one regeneration under a strengthened directive; if that
    /// still leaks, the offending spans are redacted.
    pub async fn generate_hint(
        &self,
        bundle: &PromptBundle,
        question: &Question,
    ) -> Result<HintResult, ProviderError> {
        let started = Instant::now();
        let guard = LeakGuard::for_question(question);
        let first = clean_reply(self.provider.complete(&bundle.to_request()).await?)?;

        let (text, leak_filtered) = if guard.is_clean(&first) {
            (first, false)
        } else {
            tracing::info!(question = %question.id, "hint leaked the answer; regenerating");
            let retry = self
                .provider
                .complete(&bundle.strengthened().to_request())
                .await
                .and_then(clean_reply);
            let text = match retry {
                Ok(second) if guard.is_clean(&second) => second,
                Ok(second) => guard.redact(&second),
                Err(e) => {
                    tracing::warn!(error = %e, "regeneration failed; redacting first draft");
                    guard.redact(&first)
                }
            };
            (text, true)
        };

        let text = text.trim().to_string();
        if text.is_empty() || text.chars().all(|c| !c.is_alphanumeric()) {
            return Err(ProviderError::Withheld);
        }
        Ok(HintResult {
            hint_text: text,
            specificity_level: bundle.specificity_level,
            leak_filtered,
            provider: self.provider.label().to_string(),
            latency: started.elapsed(),
        })
    }

    pub async fn grade(
        &self,
        question: &Question,
        payload: &AnswerPayload,
        redactor: &Redactor,
    ) -> crate::Result<Graded> {
        grade::grade(
            question,
            payload,
            self.provider.as_ref(),
            self.config.temperature,
            redactor,
        )
        .await
    }
}

/// Trims the reply and breaks up "|||", which separates hints in exports.
fn clean_reply(reply: String) -> Result<String, ProviderError> {
    let trimmed = reply.trim();
    if trimmed.is_empty() {
        Err(ProviderError::Malformed("empty hint".into()))
    } else {
        let mut text = trimmed.to_string();
        while text.contains("|||") {
            text = text.replace("|||", "| | |");
        }
        Ok(text)
    }
}
