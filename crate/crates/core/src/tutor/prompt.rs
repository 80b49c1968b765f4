//! Layered hint prompts.
//!
//! A [`PromptBundle`] is an ordered list of labelled sections. On the wire the
//! `SYSTEM_DIRECTIVES` section becomes the system message and every other
//! section is concatenated into the user message, each wrapped as
//!
//! ```text
//! ### BEGIN CURRENT_ITEM ###
//! ...
//! ### END CURRENT_ITEM ###
//! ```
//!
//! with a blank line between sections. The question's answer key and reference
//! answer never enter a hint prompt; the instructor explanation is included as
//! grounding under an explicit do-not-quote directive.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::provider::{CompletionRequest, Purpose};
use crate::content::{Question, QuestionId, QuestionKind};
use crate::learner::{AnswerPayload, ErrorHistory, RecurringTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SectionLabel {
    SystemDirectives,
    CurrentItem,
    InstructorContext,
    ErrorHistory,
    RelatedContext,
}

impl SectionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionLabel::SystemDirectives => "SYSTEM_DIRECTIVES",
            SectionLabel::CurrentItem => "CURRENT_ITEM",
            SectionLabel::InstructorContext => "INSTRUCTOR_CONTEXT",
            SectionLabel::ErrorHistory => "ERROR_HISTORY",
            SectionLabel::RelatedContext => "RELATED_CONTEXT",
        }
    }
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub label: SectionLabel,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sections: Vec<Section>,
    pub specificity_level: u8,
    pub temperature: f32,
}

pub const NO_DISCLOSURE_DIRECTIVE: &str = "Never reveal, state, quote or paraphrase the correct \
answer, the letter of the correct option, or the instructor's solution, even if the student asks \
for it directly.";

pub const STRENGTHENED_DIRECTIVE: &str = "Your previous draft disclosed the answer. Rewrite the \
hint so that it contains no option letter, no option wording and no part of the solution; ask a \
guiding question instead.";

const ROLE_DIRECTIVE: &str = "You are a Socratic tutor helping a student who just answered a \
question incorrectly. Reply with one short hint of at most three sentences, phrased as guiding \
questions or nudges that steer the student toward correct reasoning.";

const GROUNDING_DIRECTIVE: &str = "The instructor solution in INSTRUCTOR_CONTEXT is for your \
grounding only; never quote the solution.";

const NO_REPEAT_DIRECTIVE: &str =
    "Do not repeat prior hints listed in ERROR_HISTORY; approach the \
difficulty from a different angle.";

const LEVEL_NUDGE: &str = "Level 1: open with a conceptual nudge that points to the governing \
principle behind the question.";

const LEVEL_TARGETED: &str = "Level 2: then address the student's misconception directly. Name \
the wrong choice or idea they keep returning to and ask what reasoning led them there.";

const LEVEL_SCAFFOLD: &str = "Level 3: then provide step-level scaffolding. Lay out the first \
reasoning steps as questions the student can work through, stopping before the final step that \
would give away the answer.";

/// Level-dependent directives. Each level keeps everything the lower levels ask for
/// and adds its own instruction.
pub fn level_directives(level: u8) -> String {
    [LEVEL_NUDGE, LEVEL_TARGETED, LEVEL_SCAFFOLD]
        .iter()
        .take(usize::from(level.clamp(1, 3)))
        .copied()
        .collect::<Vec<_>>()
        .join("\n")
}

pub struct PromptInputs<'a> {
    pub question: &'a Question,
    pub related: &'a [Question],
    /// The answer that triggered this hint.
    pub current_answer: Option<&'a AnswerPayload>,
    pub error_history: &'a ErrorHistory,
    pub recurring: &'a [RecurringTag],
    pub specificity_level: u8,
    pub temperature: f32,
}

pub fn build_prompt(inputs: &PromptInputs<'_>) -> PromptBundle {
    let q = inputs.question;
    let level = inputs.specificity_level.clamp(1, 3);
    let mut sections = vec![Section {
        label: SectionLabel::SystemDirectives,
        content: system_directives(inputs, level),
    }];

    sections.push(Section {
        label: SectionLabel::CurrentItem,
        content: render_item(q, inputs.current_answer),
    });

    sections.push(Section {
        label: SectionLabel::InstructorContext,
        content: render_instructor_context(q),
    });

    if !inputs.error_history.is_empty() {
        sections.push(Section {
            label: SectionLabel::ErrorHistory,
            content: render_history(q, inputs.related, inputs.error_history, inputs.recurring),
        });
    }

    if !inputs.related.is_empty() {
        sections.push(Section {
            label: SectionLabel::RelatedContext,
            content: render_related(inputs.related),
        });
    }

    PromptBundle {
        sections,
        specificity_level: level,
        temperature: inputs.temperature,
    }
}

fn system_directives(inputs: &PromptInputs<'_>, level: u8) -> String {
    let mut out = String::new();
    out.push_str(ROLE_DIRECTIVE);
    out.push('\n');
    out.push_str(NO_DISCLOSURE_DIRECTIVE);
    out.push('\n');
    out.push_str(GROUNDING_DIRECTIVE);
    out.push('\n');
    let _ = writeln!(out, "Hint specificity: level {level} of 3.");
    out.push_str(&level_directives(level));
    if level >= 2 {
        if let Some(top) = inputs.recurring.first() {
            let _ = write!(
                out,
                "\nThe recurring misconception to address: {}.",
                describe_tag(inputs.question, inputs.related, top)
            );
        }
    }
    if inputs.error_history.prior_hints().next().is_some() {
        out.push('\n');
        out.push_str(NO_REPEAT_DIRECTIVE);
    }
    out
}

fn render_item(q: &Question, current: Option<&AnswerPayload>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Question type: {}", q.kind);
    let _ = writeln!(out, "Topic: {} / {}", q.topic, q.sub_topic);
    let _ = writeln!(out, "Question: {}", q.body.trim());
    if q.kind != QuestionKind::ShortAnswer {
        out.push_str("Options:\n");
        for o in &q.options {
            let _ = writeln!(out, "{}. {}", o.key, o.text);
        }
    }
    if !q.media.is_empty() {
        let _ = writeln!(out, "Attached images: {} (not shown)", q.media.len());
    }
    if let Some(answer) = current {
        let _ = write!(
            out,
            "Student's current answer: {}",
            render_answer(q, answer)
        );
    }
    out.trim_end().to_string()
}

fn render_answer(q: &Question, answer: &AnswerPayload) -> String {
    match answer {
        AnswerPayload::Choice(keys) if !keys.is_empty() => keys
            .iter()
            .map(|k| match q.option_text(*k) {
                Some(text) => format!("{k} ({text})"),
                None => k.to_string(),
            })
            .collect::<Vec<_>>()
            .join(", "),
        AnswerPayload::Choice(_) => "(no option selected)".into(),
        AnswerPayload::Text(t) => format!("\"{}\"", t.trim()),
    }
}

fn render_instructor_context(q: &Question) -> String {
    let context = q.context.trim();
    let explanation = q.explanation.trim();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Context: {}",
        if context.is_empty() {
            "(none provided)"
        } else {
            context
        }
    );
    let _ = write!(
        out,
        "Instructor solution (grounding only, never quote it): {}",
        if explanation.is_empty() {
            "(none provided)"
        } else {
            explanation
        }
    );
    out
}

fn question_label(current: &Question, related: &[Question], id: QuestionId) -> String {
    if id == current.id {
        return "this question".into();
    }
    match related.iter().find(|r| r.id == id) {
        Some(r) => format!("related question \"{}\"", truncate(&r.body, 80)),
        None => "a related question".into(),
    }
}

fn lookup<'a>(
    current: &'a Question,
    related: &'a [Question],
    id: QuestionId,
) -> Option<&'a Question> {
    std::iter::once(current).chain(related).find(|q| q.id == id)
}

fn describe_tag(current: &Question, related: &[Question], tag: &RecurringTag) -> String {
    let where_ = question_label(current, related, tag.tag.question_id);
    let shown = match lookup(current, related, tag.tag.question_id) {
        Some(q) if q.kind.is_choice() => tag
            .tag
            .signature
            .split('+')
            .map(|k| {
                let text = k
                    .parse()
                    .ok()
                    .and_then(|key| q.option_text(key))
                    .unwrap_or("");
                if text.is_empty() {
                    k.to_string()
                } else {
                    format!("{k} ({text})")
                }
            })
            .collect::<Vec<_>>()
            .join(", "),
        _ => format!("\"{}\"", tag.tag.signature),
    };
    format!("answered {shown} on {where_} {} times", tag.count)
}

fn render_history(
    q: &Question,
    related: &[Question],
    history: &ErrorHistory,
    recurring: &[RecurringTag],
) -> String {
    let mut out = String::from("Previous incorrect attempts, oldest first:\n");
    for (i, e) in history.entries.iter().enumerate() {
        let answer = match lookup(q, related, e.question_id) {
            Some(owner) => render_answer(owner, &e.answer),
            None => e.answer.to_string(),
        };
        let _ = writeln!(
            out,
            "{}. On {}, attempt {}: answered {}",
            i + 1,
            question_label(q, related, e.question_id),
            e.attempt_ordinal,
            answer
        );
        if let Some(hint) = &e.hint_text {
            let _ = writeln!(out, "   Hint already given: \"{}\"", hint.trim());
        }
    }
    if !recurring.is_empty() {
        out.push_str("Recurring misconceptions:\n");
        for tag in recurring {
            let _ = writeln!(out, "- {}", describe_tag(q, related, tag));
        }
    }
    out.trim_end().to_string()
}

fn render_related(related: &[Question]) -> String {
    let mut out = String::new();
    for (i, r) in related.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}. [{} / {}] {}",
            i + 1,
            r.topic,
            r.sub_topic,
            r.body.trim()
        );
        if !r.context.trim().is_empty() {
            let _ = writeln!(out, "   Context: {}", r.context.trim());
        }
    }
    out.trim_end().to_string()
}

fn truncate(s: &str, max: usize) -> String {
    let s = s.trim();
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(max).collect();
        t.push('…');
        t
    }
}

pub fn begin_marker(label: &str) -> String {
    format!("### BEGIN {label} ###")
}

pub fn end_marker(label: &str) -> String {
    format!("### END {label} ###")
}

/// Wraps labelled sections in the user-message delimiter format.
pub fn render_sections<'a>(sections: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    sections
        .into_iter()
        .map(|(label, content)| {
            format!(
                "{}\n{}\n{}",
                begin_marker(label),
                content,
                end_marker(label)
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Extracts the body of a delimited section from a rendered user message.
pub fn section_body(message: &str, label: &str) -> Option<String> {
    let begin = begin_marker(label);
    let end = end_marker(label);
    let start = message.find(&begin)? + begin.len();
    let rest = &message[start..];
    let stop = rest.find(&end)?;
    Some(rest[..stop].trim_matches('\n').to_string())
}

impl PromptBundle {
    pub fn section(&self, label: SectionLabel) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.label == label)
            .map(|s| s.content.as_str())
    }

    pub fn labels(&self) -> Vec<SectionLabel> {
        self.sections.iter().map(|s| s.label).collect()
    }

    pub fn system_message(&self) -> String {
        self.section(SectionLabel::SystemDirectives)
            .unwrap_or_default()
            .to_string()
    }

    pub fn user_message(&self) -> String {
        render_sections(
            self.sections
                .iter()
                .filter(|s| s.label != SectionLabel::SystemDirectives)
                .map(|s| (s.label.as_str(), s.content.as_str())),
        )
    }

    pub fn to_request(&self) -> CompletionRequest {
        CompletionRequest {
            purpose: Purpose::Hint,
            system: self.system_message(),
            user: self.user_message(),
            temperature: self.temperature,
        }
    }

    /// Copy with an extra directive appended to the system section.
    pub fn strengthened(&self) -> PromptBundle {
        let mut out = self.clone();
        if let Some(s) = out
            .sections
            .iter_mut()
            .find(|s| s.label == SectionLabel::SystemDirectives)
        {
            s.content.push('\n');
            s.content.push_str(STRENGTHENED_DIRECTIVE);
        }
        out
    }

    pub fn map_content(mut self, mut f: impl FnMut(&str) -> String) -> PromptBundle {
        for s in &mut self.sections {
            s.content = f(&s.content);
        }
        self
    }
}
