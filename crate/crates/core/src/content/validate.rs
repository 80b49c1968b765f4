use std::collections::{BTreeSet, HashSet};

use super::types::{ChoiceOption, OptionKey, QuestionDraft, QuestionKind};
use crate::FieldError;

/// The kind-dependent part of a question after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedShape {
    pub topic: String,
    pub sub_topic: String,
    pub options: Vec<ChoiceOption>,
    pub answer_key: BTreeSet<OptionKey>,
    pub reference_answer: Option<String>,
    pub point_value: u32,
    pub attempt_limit: Option<u32>,
}

const TRUE_FALSE_DEFAULT: [&str; 2] = ["True", "False"];

/// Checks every shape invariant of a draft, collecting one [`FieldError`] per violation.
pub fn validate_shape(draft: &QuestionDraft) -> Result<ValidatedShape, Vec<FieldError>> {
    let mut errors = Vec::new();

    let topic = draft.topic.trim().to_string();
    if topic.is_empty() {
        errors.push(FieldError::new("topic", "must not be empty"));
    }
    let sub_topic = draft.sub_topic.trim().to_string();
    if sub_topic.is_empty() {
        errors.push(FieldError::new("sub_topic", "must not be empty"));
    }
    if draft.body.trim().is_empty() {
        errors.push(FieldError::new("body", "must not be empty"));
    }

    let point_value = match u32::try_from(draft.point_value) {
        Ok(v) if v >= 1 => v,
        _ => {
            errors.push(FieldError::new("point_value", "must be a positive integer"));
            1
        }
    };

    let attempt_limit = match draft.attempt_limit {
        None => None,
        Some(n) => match u32::try_from(n) {
            Ok(v) if v >= 1 => Some(v),
            _ => {
                errors.push(FieldError::new(
                    "attempt_limit",
                    "must be a positive integer or null for unlimited",
                ));
                None
            }
        },
    };

    let options = build_options(draft, &mut errors);
    let answer_key = build_answer_key(draft, &options, &mut errors);

    let reference_answer = draft
        .reference_answer
        .as_ref()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    if draft.kind == QuestionKind::ShortAnswer && reference_answer.is_none() {
        errors.push(FieldError::new(
            "reference_answer",
            "short_answer questions require a nonempty reference answer",
        ));
    }

    let mut seen = HashSet::new();
    for (i, id) in draft.related_question_ids.iter().enumerate() {
        if Some(*id) == draft.id {
            errors.push(FieldError::new(
                format!("related_question_ids[{i}]"),
                "a question cannot be related to itself",
            ));
        }
        if !seen.insert(*id) {
            errors.push(FieldError::new(
                format!("related_question_ids[{i}]"),
                "duplicate related question",
            ));
        }
    }

    if errors.is_empty() {
        Ok(ValidatedShape {
            topic,
            sub_topic,
            options,
            answer_key,
            reference_answer,
            point_value,
            attempt_limit,
        })
    } else {
        Err(errors)
    }
}

fn build_options(draft: &QuestionDraft, errors: &mut Vec<FieldError>) -> Vec<ChoiceOption> {
    match draft.kind {
        QuestionKind::ShortAnswer => {
            if !draft.options.is_empty() {
                errors.push(FieldError::new(
                    "options",
                    "short_answer questions take no options",
                ));
            }
            Vec::new()
        }
        QuestionKind::TrueFalse => {
            let texts: Vec<&str> = if draft.options.is_empty() {
                TRUE_FALSE_DEFAULT.to_vec()
            } else {
                draft.options.iter().map(String::as_str).collect()
            };
            if texts.len() != 2 {
                errors.push(FieldError::new(
                    "options",
                    "true_false questions have exactly two options (T, F)",
                ));
                return Vec::new();
            }
            check_option_texts(&texts, errors);
            vec![
                ChoiceOption {
                    key: OptionKey::TRUE,
                    text: texts[0].trim().to_string(),
                },
                ChoiceOption {
                    key: OptionKey::FALSE,
                    text: texts[1].trim().to_string(),
                },
            ]
        }
        QuestionKind::SingleChoice | QuestionKind::MultipleChoice => {
            if draft.options.len() < 2 {
                errors.push(FieldError::new(
                    "options",
                    "at least two options are required",
                ));
            }
            if draft.options.len() > 26 {
                errors.push(FieldError::new(
                    "options",
                    "at most 26 options are supported",
                ));
                return Vec::new();
            }
            let texts: Vec<&str> = draft.options.iter().map(String::as_str).collect();
            check_option_texts(&texts, errors);
            texts
                .iter()
                .enumerate()
                .map(|(i, text)| ChoiceOption {
                    key: OptionKey::positional(i).expect("bounded by 26"),
                    text: text.trim().to_string(),
                })
                .collect()
        }
    }
}

fn check_option_texts(texts: &[&str], errors: &mut Vec<FieldError>) {
    let mut seen = HashSet::new();
    for (i, text) in texts.iter().enumerate() {
        let normalized = text
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        if normalized.is_empty() {
            errors.push(FieldError::new(
                format!("options[{i}]"),
                "must not be empty",
            ));
        } else if !seen.insert(normalized) {
            errors.push(FieldError::new(
                format!("options[{i}]"),
                "duplicate option text",
            ));
        }
    }
}

fn build_answer_key(
    draft: &QuestionDraft,
    options: &[ChoiceOption],
    errors: &mut Vec<FieldError>,
) -> BTreeSet<OptionKey> {
    let mut key = BTreeSet::new();
    for (i, raw) in draft.answer_key.iter().enumerate() {
        match raw.parse::<OptionKey>() {
            Ok(k) if options.iter().any(|o| o.key == k) => {
                if !key.insert(k) {
                    errors.push(FieldError::new(format!("answer_key[{i}]"), "duplicate key"));
                }
            }
            Ok(k) => errors.push(FieldError::new(
                format!("answer_key[{i}]"),
                format!("`{k}` is not one of the option keys"),
            )),
            Err(msg) => errors.push(FieldError::new(format!("answer_key[{i}]"), msg)),
        }
    }
    let count = draft.answer_key.len();
    match draft.kind {
        QuestionKind::ShortAnswer if count != 0 => errors.push(FieldError::new(
            "answer_key",
            "short_answer questions have an empty answer key",
        )),
        QuestionKind::SingleChoice | QuestionKind::TrueFalse if count != 1 => {
            errors.push(FieldError::new(
                "answer_key",
                format!("{} questions need exactly one key, got {count}", draft.kind),
            ))
        }
        QuestionKind::MultipleChoice if count == 0 => errors.push(FieldError::new(
            "answer_key",
            "multiple_choice questions need at least one key",
        )),
        _ => {}
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft(kind: QuestionKind, options: &[&str], key: &[&str]) -> QuestionDraft {
        QuestionDraft {
            id: None,
            topic: "traffic loading".into(),
            sub_topic: "ESAL".into(),
            kind,
            body: "Which factor dominates?".into(),
            media: vec![],
            options: options.iter().map(|s| s.to_string()).collect(),
            answer_key: key.iter().map(|s| s.to_string()).collect(),
            reference_answer: None,
            explanation: String::new(),
            context: String::new(),
            point_value: 2,
            attempt_limit: Some(3),
            related_question_ids: vec![],
        }
    }

    fn paths(errors: Vec<FieldError>) -> Vec<String> {
        errors.into_iter().map(|e| e.path).collect()
    }

    #[test]
    fn single_choice_with_four_options() {
        let shape = validate_shape(&draft(
            QuestionKind::SingleChoice,
            &["Axle load", "Tire color", "Paint", "Season"],
            &["B"],
        ))
        .unwrap();
        let keys: Vec<char> = shape.options.iter().map(|o| o.key.as_char()).collect();
        assert_eq!(keys, vec!['A', 'B', 'C', 'D']);
        assert_eq!(shape.answer_key.len(), 1);
    }

    #[test]
    fn true_false_rejects_two_keys() {
        let err = validate_shape(&draft(QuestionKind::TrueFalse, &[], &["T", "F"])).unwrap_err();
        assert_eq!(paths(err), vec!["answer_key"]);
    }

    #[test]
    fn true_false_gets_fixed_keys() {
        let shape = validate_shape(&draft(QuestionKind::TrueFalse, &[], &["F"])).unwrap();
        assert_eq!(shape.options[0].key, OptionKey::TRUE);
        assert_eq!(shape.options[1].key, OptionKey::FALSE);
        assert!(shape.answer_key.contains(&OptionKey::FALSE));
    }

    #[test]
    fn short_answer_requires_reference() {
        let mut d = draft(QuestionKind::ShortAnswer, &[], &[]);
        d.reference_answer = Some("   ".into());
        assert_eq!(
            paths(validate_shape(&d).unwrap_err()),
            vec!["reference_answer"]
        );
    }

    #[test]
    fn multiple_choice_key_outside_options() {
        let err = validate_shape(&draft(
            QuestionKind::MultipleChoice,
            &["a", "b"],
            &["A", "E"],
        ))
        .unwrap_err();
        assert_eq!(paths(err), vec!["answer_key[1]"]);
    }

    #[test]
    fn multiple_choice_empty_key() {
        let err =
            validate_shape(&draft(QuestionKind::MultipleChoice, &["a", "b"], &[])).unwrap_err();
        assert_eq!(paths(err), vec!["answer_key"]);
    }

    #[test]
    fn collects_all_violations() {
        let mut d = draft(QuestionKind::SingleChoice, &["same", "Same "], &["A"]);
        d.point_value = 0;
        d.attempt_limit = Some(0);
        d.topic = " ".into();
        let err = paths(validate_shape(&d).unwrap_err());
        assert_eq!(
            err,
            vec!["topic", "point_value", "attempt_limit", "options[1]"]
        );
    }

    #[test]
    fn self_link_rejected() {
        let mut d = draft(QuestionKind::SingleChoice, &["a", "b"], &["A"]);
        let id = super::super::types::QuestionId::new();
        d.id = Some(id);
        d.related_question_ids = vec![id];
        assert_eq!(
            paths(validate_shape(&d).unwrap_err()),
            vec!["related_question_ids[0]"]
        );
    }
}
