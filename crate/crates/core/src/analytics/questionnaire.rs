//! Likert questionnaire scoring.
//!
//! Negatively worded items are reverse-coded (`6 - v`), items are averaged per
//! dimension for each respondent, the 5-point mean is mapped onto a 10-point
//! scale with [`rescale_to_ten`] and the result is averaged over respondents.
//! Duplicate item pairs are screened on raw answers: a pair passes when the two
//! answers differ by at most one point.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, FieldError, Result};

pub const SCALE_MIN: u8 = 1;
pub const SCALE_MAX: u8 = 5;
/// Largest allowed gap between a duplicate pair's answers.
pub const CONSISTENCY_TOLERANCE: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Effectiveness,
    Engagement,
    Adaptivity,
    Satisfaction,
    Accuracy,
    OpenEnded,
}

impl Dimension {
    pub const SCORED: [Dimension; 5] = [
        Dimension::Effectiveness,
        Dimension::Engagement,
        Dimension::Adaptivity,
        Dimension::Satisfaction,
        Dimension::Accuracy,
    ];
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    pub item_id: String,
    pub dimension: Dimension,
    #[serde(default)]
    pub negatively_worded: bool,
    #[serde(default)]
    pub duplicate_of: Option<String>,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireSpec {
    pub items: Vec<QuestionnaireItem>,
    #[serde(default = "scale_min")]
    pub scale_min: u8,
    #[serde(default = "scale_max")]
    pub scale_max: u8,
}

fn scale_min() -> u8 {
    SCALE_MIN
}

fn scale_max() -> u8 {
    SCALE_MAX
}

const TABLE2_JSON: &str = include_str!("../../fixtures/questionnaire.json");

impl QuestionnaireSpec {
    /// The 22-item user-experience instrument shipped with the service.
    pub fn shipped() -> Self {
        serde_json::from_str::<QuestionnaireSpec>(TABLE2_JSON)
            .expect("bundled questionnaire parses")
            .validated()
            .expect("bundled questionnaire is valid")
    }

    pub fn validated(self) -> Result<Self> {
        let mut errors = Vec::new();
        if (self.scale_min, self.scale_max) != (SCALE_MIN, SCALE_MAX) {
            errors.push(FieldError::new(
                "scale",
                "only the 1..5 Likert scale is supported",
            ));
        }
        let mut seen: HashMap<&str, (usize, Dimension)> = HashMap::new();
        for (i, item) in self.items.iter().enumerate() {
            if item.item_id.trim().is_empty() {
                errors.push(FieldError::new(
                    format!("items[{i}].item_id"),
                    "must not be empty",
                ));
            }
            if let Some(dup) = &item.duplicate_of {
                match seen.get(dup.as_str()) {
                    Some((_, dim)) if *dim == item.dimension => {}
                    Some(_) => errors.push(FieldError::new(
                        format!("items[{i}].duplicate_of"),
                        "duplicate must be in the same dimension",
                    )),
                    None => errors.push(FieldError::new(
                        format!("items[{i}].duplicate_of"),
                        format!("`{dup}` is not an earlier item"),
                    )),
                }
                if item.dimension == Dimension::OpenEnded {
                    errors.push(FieldError::new(
                        format!("items[{i}].duplicate_of"),
                        "open-ended items cannot be duplicates",
                    ));
                }
            }
            if seen
                .insert(item.item_id.as_str(), (i, item.dimension))
                .is_some()
            {
                errors.push(FieldError::new(
                    format!("items[{i}].item_id"),
                    "duplicate item id",
                ));
            }
        }
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn item(&self, id: &str) -> Option<&QuestionnaireItem> {
        self.items.iter().find(|i| i.item_id == id)
    }

    /// `(duplicate, original)` pairs.
    pub fn duplicate_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.items
            .iter()
            .filter_map(|i| i.duplicate_of.as_deref().map(|d| (i.item_id.as_str(), d)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponseValue {
    Likert(i64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentResponses {
    pub respondent: String,
    pub responses: BTreeMap<String, ResponseValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedPair {
    pub respondent: String,
    pub item: String,
    pub duplicate_of: String,
    pub difference: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenEndedAnswer {
    pub respondent: String,
    pub item_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireResult {
    pub respondents: usize,
    /// Mean score per dimension on the 10-point scale.
    pub per_dimension_scores: BTreeMap<Dimension, f64>,
    pub consistency_pass: bool,
    pub flagged_pairs: Vec<FlaggedPair>,
    pub open_ended: Vec<OpenEndedAnswer>,
}

/// `6 - v` for negatively worded items, identity otherwise.
pub fn reverse_code(value: i64, negatively_worded: bool) -> Result<u8> {
    let v = u8::try_from(value)
        .ok()
        .filter(|v| (SCALE_MIN..=SCALE_MAX).contains(v))
        .ok_or(Error::Range(value))?;
    Ok(if negatively_worded {
        SCALE_MIN + SCALE_MAX - v
    } else {
        v
    })
}

/// Maps a 5-point mean onto the 10-point scale: `v -> 2v`, so `[1, 5]` lands on `[2, 10]`.
pub fn rescale_to_ten(mean: f64) -> f64 {
    2.0 * mean
}

fn likert(respondent: &RespondentResponses, item: &str) -> Result<Option<u8>> {
    match respondent.responses.get(item) {
        None => Ok(None),
        Some(ResponseValue::Likert(v)) => reverse_code(*v, false).map(Some),
        Some(ResponseValue::Text(_)) => Err(Error::validation(
            format!("{}.{item}", respondent.respondent),
            "expected a Likert value",
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyOutcome {
    pub pass: bool,
    pub flagged: Vec<FlaggedPair>,
}

/// Screens one respondent's duplicate pairs on raw values. Pairs with a missing
/// answer are skipped.
pub fn consistency_check(
    spec: &QuestionnaireSpec,
    respondent: &RespondentResponses,
) -> Result<ConsistencyOutcome> {
    let mut flagged = Vec::new();
    for (item, original) in spec.duplicate_pairs() {
        let (Some(a), Some(b)) = (likert(respondent, item)?, likert(respondent, original)?) else {
            continue;
        };
        let difference = a.abs_diff(b);
        if difference > CONSISTENCY_TOLERANCE {
            flagged.push(FlaggedPair {
                respondent: respondent.respondent.clone(),
                item: item.to_string(),
                duplicate_of: original.to_string(),
                difference,
            });
        }
    }
    Ok(ConsistencyOutcome {
        pass: flagged.is_empty(),
        flagged,
    })
}

pub fn score_dimensions(
    spec: &QuestionnaireSpec,
    respondents: &[RespondentResponses],
) -> Result<QuestionnaireResult> {
    if respondents.is_empty() {
        return Err(Error::validation(
            "responses",
            "at least one respondent is required",
        ));
    }
    let mut ids = HashSet::new();
    for r in respondents {
        if !ids.insert(r.respondent.as_str()) {
            return Err(Error::validation(
                "responses",
                format!("respondent `{}` appears twice", r.respondent),
            ));
        }
    }

    let mut sums: BTreeMap<Dimension, f64> = BTreeMap::new();
    let mut flagged_pairs = Vec::new();
    let mut open_ended = Vec::new();

    for r in respondents {
        let missing: Vec<String> = spec
            .items
            .iter()
            .filter(|i| {
                i.dimension != Dimension::OpenEnded && !r.responses.contains_key(&i.item_id)
            })
            .map(|i| i.item_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingResponse {
                respondent: r.respondent.clone(),
                items: missing,
            });
        }

        let mut per_dim: BTreeMap<Dimension, (u32, u32)> = BTreeMap::new();
        for item in &spec.items {
            match (item.dimension, r.responses.get(&item.item_id)) {
                (Dimension::OpenEnded, Some(ResponseValue::Text(text))) => {
                    open_ended.push(OpenEndedAnswer {
                        respondent: r.respondent.clone(),
                        item_id: item.item_id.clone(),
                        text: text.clone(),
                    })
                }
                (Dimension::OpenEnded, _) => {}
                (dim, Some(ResponseValue::Likert(v))) => {
                    let coded = reverse_code(*v, item.negatively_worded)?;
                    let e = per_dim.entry(dim).or_insert((0, 0));
                    e.0 += u32::from(coded);
                    e.1 += 1;
                }
                (_, _) => {
                    return Err(Error::validation(
                        format!("{}.{}", r.respondent, item.item_id),
                        "expected a Likert value",
                    ))
                }
            }
        }
        for (dim, (sum, n)) in per_dim {
            *sums.entry(dim).or_insert(0.0) += rescale_to_ten(f64::from(sum) / f64::from(n));
        }
        flagged_pairs.extend(consistency_check(spec, r)?.flagged);
    }

    let n = respondents.len() as f64;
    Ok(QuestionnaireResult {
        respondents: respondents.len(),
        per_dimension_scores: sums.into_iter().map(|(d, s)| (d, s / n)).collect(),
        consistency_pass: flagged_pairs.is_empty(),
        flagged_pairs,
        open_ended,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn respondent(id: &str, values: &[(&str, i64)]) -> RespondentResponses {
        RespondentResponses {
            respondent: id.into(),
            responses: values
                .iter()
                .map(|(k, v)| (k.to_string(), ResponseValue::Likert(*v)))
                .collect(),
        }
    }

    fn uniform(id: &str, v: i64) -> RespondentResponses {
        let spec = QuestionnaireSpec::shipped();
        RespondentResponses {
            respondent: id.into(),
            responses: spec
                .items
                .iter()
                .filter(|i| i.dimension != Dimension::OpenEnded)
                .map(|i| (i.item_id.clone(), ResponseValue::Likert(v)))
                .collect(),
        }
    }

    #[test]
    fn shipped_instrument_shape() {
        let spec = QuestionnaireSpec::shipped();
        assert_eq!(spec.items.len(), 22);
        let negative: Vec<_> = spec
            .items
            .iter()
            .filter(|i| i.negatively_worded)
            .map(|i| i.item_id.as_str())
            .collect();
        assert_eq!(negative, vec!["Q7", "Q10", "Q16", "Q19", "Q20"]);
        let pairs: Vec<_> = spec.duplicate_pairs().collect();
        assert_eq!(pairs, vec![("Q4", "Q3"), ("Q8", "Q6")]);
        let open = spec
            .items
            .iter()
            .filter(|i| i.dimension == Dimension::OpenEnded)
            .count();
        assert_eq!(open, 2);
    }

    #[test]
    fn reverse_coding() {
        assert_eq!(reverse_code(1, true).unwrap(), 5);
        assert_eq!(reverse_code(3, true).unwrap(), 3);
        assert_eq!(reverse_code(4, false).unwrap(), 4);
        assert!(matches!(reverse_code(0, true), Err(Error::Range(0))));
        assert!(matches!(reverse_code(6, false), Err(Error::Range(6))));
    }

    #[test]
    fn all_fives_on_positive_items_hit_ceiling() {
        let spec = QuestionnaireSpec::shipped();
        let mut r = uniform("r1", 5);
        for item in spec.items.iter().filter(|i| i.negatively_worded) {
            r.responses
                .insert(item.item_id.clone(), ResponseValue::Likert(1));
        }
        let result = score_dimensions(&spec, &[r]).unwrap();
        for dim in Dimension::SCORED {
            assert_eq!(result.per_dimension_scores[&dim], 10.0, "{dim}");
        }
    }

    #[test]
    fn consistency_examples() {
        let spec = QuestionnaireSpec::shipped();
        let pass = consistency_check(&spec, &respondent("a", &[("Q3", 4), ("Q4", 3)])).unwrap();
        assert!(pass.pass);
        let same = consistency_check(&spec, &respondent("a", &[("Q3", 4), ("Q4", 4)])).unwrap();
        assert!(same.pass);
        let fail = consistency_check(&spec, &respondent("a", &[("Q6", 5), ("Q8", 3)])).unwrap();
        assert!(!fail.pass);
        assert_eq!(
            fail.flagged,
            vec![FlaggedPair {
                respondent: "a".into(),
                item: "Q8".into(),
                duplicate_of: "Q6".into(),
                difference: 2
            }]
        );
    }

    #[test]
    fn missing_items_are_named() {
        let spec = QuestionnaireSpec::shipped();
        let mut r = uniform("r1", 3);
        r.responses.remove("Q12");
        r.responses.remove("Q2");
        match score_dimensions(&spec, &[r]).unwrap_err() {
            Error::MissingResponse { respondent, items } => {
                assert_eq!(respondent, "r1");
                assert_eq!(items, vec!["Q2", "Q12"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn open_ended_returned_verbatim() {
        let spec = QuestionnaireSpec::shipped();
        let mut r = uniform("r1", 3);
        r.responses.insert(
            "Q21".into(),
            ResponseValue::Text("The hints, e.g. on ESALs.".into()),
        );
        let result = score_dimensions(&spec, &[r]).unwrap();
        assert_eq!(result.open_ended.len(), 1);
        assert_eq!(result.open_ended[0].text, "The hints, e.g. on ESALs.");
        assert!(!result
            .per_dimension_scores
            .contains_key(&Dimension::OpenEnded));
    }

    #[test]
    fn spec_validation() {
        let bad = QuestionnaireSpec {
            items: vec![
                QuestionnaireItem {
                    item_id: "Q1".into(),
                    dimension: Dimension::Engagement,
                    negatively_worded: false,
                    duplicate_of: Some("Q2".into()),
                    text: String::new(),
                },
                QuestionnaireItem {
                    item_id: "Q2".into(),
                    dimension: Dimension::Accuracy,
                    negatively_worded: false,
                    duplicate_of: Some("Q1".into()),
                    text: String::new(),
                },
            ],
            scale_min: 1,
            scale_max: 5,
        };
        match bad.validated().unwrap_err() {
            Error::Validation(e) => assert_eq!(e.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
