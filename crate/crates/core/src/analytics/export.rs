//! CSV export of engagement rows and the raw attempt log.
//!
//! Timestamps are RFC 3339 in UTC with full sub-second precision, durations
//! are exact decimal seconds and ratios use the shortest round-trip float
//! representation, so an export parses back to the same values.

use chrono::{DateTime, Duration, SecondsFormat, Utc};

use super::engagement::EngagementRow;
use crate::content::QuestionId;
use crate::learner::{Attempt, StudentToken};
use crate::{Error, Result};

pub const ENGAGEMENT_HEADER: [&str; 10] = [
    "student_token",
    "question_id",
    "total_attempts",
    "correct",
    "correctness_ratio",
    "first_opened_at",
    "last_submitted_at",
    "time_spent_seconds",
    "points_awarded",
    "hints",
];

pub const ATTEMPT_LOG_HEADER: [&str; 11] = [
    "attempt_id",
    "student_token",
    "course_id",
    "question_id",
    "attempt_ordinal",
    "opened_at",
    "submitted_at",
    "answer",
    "correct",
    "points_awarded",
    "hint_text",
];

/// Separator between hints in the `hints` column.
pub const HINT_SEPARATOR: &str = " ||| ";

pub fn format_time(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_time(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::validation("timestamp", format!("`{s}`: {e}")))
}

/// Exact decimal seconds, e.g. `12`, `3.25`, `0.000000001`. Durations are non-negative.
pub fn format_seconds(d: Duration) -> String {
    let secs = d.num_seconds();
    let nanos = d.subsec_nanos();
    if nanos == 0 {
        return secs.to_string();
    }
    let frac = format!("{nanos:09}");
    format!("{secs}.{}", frac.trim_end_matches('0'))
}

pub fn parse_seconds(s: &str) -> std::result::Result<Duration, String> {
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    let secs: i64 = whole.parse().map_err(|_| format!("bad seconds `{s}`"))?;
    if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) || secs < 0 {
        return Err(format!("bad seconds `{s}`"));
    }
    let nanos: i64 = if frac.is_empty() {
        0
    } else {
        format!("{frac:0<9}")
            .parse()
            .map_err(|_| format!("bad seconds `{s}`"))?
    };
    Ok(Duration::seconds(secs) + Duration::nanoseconds(nanos))
}

/// Keeps the hint separator unambiguous.
fn sanitize_hint(hint: &str) -> String {
    let mut out = hint.to_string();
    while out.contains("|||") {
        out = out.replace("|||", "| | |");
    }
    out
}

pub fn engagement_csv(rows: &[EngagementRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ENGAGEMENT_HEADER).map_err(csv_err)?;
    for r in rows {
        let hints: Vec<String> = r.hints.iter().map(|h| sanitize_hint(h)).collect();
        w.write_record([
            r.student_token.to_string(),
            r.question_id.to_string(),
            r.total_attempts.to_string(),
            r.correct.to_string(),
            r.correctness_ratio.to_string(),
            format_time(r.first_opened_at),
            format_time(r.last_submitted_at),
            format_seconds(r.time_spent),
            r.points_awarded.to_string(),
            hints.join(HINT_SEPARATOR),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Storage(e.to_string()))
}

/// Reads an engagement export back into rows.
pub fn parse_engagement_csv(bytes: &[u8]) -> Result<Vec<EngagementRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(ENGAGEMENT_HEADER) {
        return Err(Error::validation(
            "header",
            "unexpected engagement CSV header",
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let rec = record.map_err(csv_err)?;
        let field = |n: usize| rec.get(n).unwrap_or_default();
        let bad =
            |name: &str| Error::validation(format!("row {}.{name}", i + 1), "unparseable value");
        rows.push(EngagementRow {
            student_token: StudentToken::parse(field(0)).ok_or_else(|| bad("student_token"))?,
            question_id: QuestionId(field(1).parse().map_err(|_| bad("question_id"))?),
            total_attempts: field(2).parse().map_err(|_| bad("total_attempts"))?,
            correct: field(3).parse().map_err(|_| bad("correct"))?,
            correctness_ratio: field(4).parse().map_err(|_| bad("correctness_ratio"))?,
            first_opened_at: parse_time(field(5))?,
            last_submitted_at: parse_time(field(6))?,
            time_spent: parse_seconds(field(7)).map_err(|_| bad("time_spent_seconds"))?,
            points_awarded: field(8).parse().map_err(|_| bad("points_awarded"))?,
            hints: if field(9).is_empty() {
                Vec::new()
            } else {
                field(9).split(HINT_SEPARATOR).map(str::to_string).collect()
            },
        });
    }
    Ok(rows)
}

pub fn attempt_log_csv<'a>(attempts: impl IntoIterator<Item = &'a Attempt>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ATTEMPT_LOG_HEADER).map_err(csv_err)?;
    for a in attempts {
        w.write_record([
            a.id.to_string(),
            a.student.to_string(),
            a.course_id.to_string(),
            a.question_id.to_string(),
            a.attempt_ordinal.to_string(),
            format_time(a.opened_at),
            format_time(a.submitted_at),
            a.answer.to_string(),
            a.correct.to_string(),
            a.points_awarded.to_string(),
            a.hint_text.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Storage(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Storage(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn seconds_format() {
        assert_eq!(format_seconds(Duration::seconds(12)), "12");
        assert_eq!(format_seconds(Duration::milliseconds(3250)), "3.25");
        assert_eq!(format_seconds(Duration::nanoseconds(1)), "0.000000001");
        assert_eq!(parse_seconds("3.25").unwrap(), Duration::milliseconds(3250));
        assert!(parse_seconds("-1").is_err());
        assert!(parse_seconds("1.0000000001").is_err());
    }

    #[test]
    fn hint_separator_is_escaped() {
        assert_eq!(sanitize_hint("a ||| b"), "a | | | b");
        assert!(!sanitize_hint("|||||||").contains("|||"));
    }

    proptest! {
        #[test]
        fn seconds_round_trip(secs in 0i64..10_000_000, nanos in 0i64..1_000_000_000) {
            let d = Duration::seconds(secs) + Duration::nanoseconds(nanos);
            prop_assert_eq!(parse_seconds(&format_seconds(d)).unwrap(), d);
        }
    }
}
