//! Enrolled students. Identifying fields live only here; everything else in
//! the system refers to students by their pseudonymous token.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::learner::StudentToken;
use crate::store::{Event, Store};
use crate::tutor::Redactor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub student_token: StudentToken,
    pub display_name: String,
    #[serde(default)]
    pub email: Option<String>,
    #[serde(default)]
    pub external_id: Option<String>,
    /// SHA-256 of the session secret handed out at enrollment.
    pub session_digest: String,
    pub enrolled_at: DateTime<Utc>,
}

impl StudentRecord {
    /// Strings that identify the student: the full name and each part of it,
    /// the email and its local part, and the institutional id.
    fn identifiers(&self) -> Vec<&str> {
        let mut v = vec![self.display_name.as_str()];
        v.extend(
            self.display_name
                .split(|c: char| c.is_whitespace() || c == '-' || c == ',')
                .filter(|p| p.chars().count() >= 2),
        );
        if let Some(email) = self.email.as_deref() {
            v.push(email);
            v.extend(email.split('@').next().filter(|l| l.chars().count() >= 3));
        }
        v.extend(self.external_id.as_deref());
        v
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Enrollment {
    pub display_name: String,
    #[serde(default)]
    pub email: Option<String>,
    #[serde(default)]
    pub external_id: Option<String>,
}

/// Returned once at enrollment; the session secret is not stored in clear.
#[derive(Debug, Clone, Serialize)]
pub struct EnrolledStudent {
    pub student_token: StudentToken,
    pub session_token: String,
}

pub fn session_digest(secret: &str) -> String {
    hex::encode(Sha256::digest(secret.as_bytes()))
}

#[derive(Debug, Default, Clone)]
pub struct Roster {
    students: BTreeMap<StudentToken, StudentRecord>,
    by_session: HashMap<String, StudentToken>,
}

impl Roster {
    pub(crate) fn apply_enrolled(&mut self, record: StudentRecord) {
        self.by_session
            .insert(record.session_digest.clone(), record.student_token.clone());
        self.students.insert(record.student_token.clone(), record);
    }

    pub fn student(&self, token: &StudentToken) -> Option<&StudentRecord> {
        self.students.get(token)
    }

    pub fn by_session(&self, secret: &str) -> Option<&StudentToken> {
        self.by_session.get(&session_digest(secret))
    }

    pub fn records(&self) -> impl Iterator<Item = &StudentRecord> {
        self.students.values()
    }

    /// Redactor that maps every enrolled student's identifiers to their token.
    pub fn redactor(&self) -> Redactor {
        self.students
            .values()
            .fold(Redactor::patterns_only(), |r, s| {
                r.with_identity(s.student_token.clone(), s.identifiers())
            })
    }
}

impl Store {
    pub fn enroll_student(&self, enrollment: &Enrollment) -> Result<EnrolledStudent> {
        let display_name = enrollment.display_name.trim();
        if display_name.is_empty() {
            return Err(Error::validation("display_name", "must not be empty"));
        }
        let clean = |v: &Option<String>| {
            v.as_deref()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        let secret = format!(
            "{}{}",
            uuid::Uuid::new_v4().simple(),
            uuid::Uuid::new_v4().simple()
        );
        let record = StudentRecord {
            student_token: StudentToken::generate(),
            display_name: display_name.to_string(),
            email: clean(&enrollment.email),
            external_id: clean(&enrollment.external_id),
            session_digest: session_digest(&secret),
            enrolled_at: self.now(),
        };
        let student_token = record.student_token.clone();
        self.transact(|_| Ok((vec![Event::StudentEnrolled(record)], ())))?;
        Ok(EnrolledStudent {
            student_token,
            session_token: secret,
        })
    }

    pub fn roster(&self) -> Vec<StudentRecord> {
        self.read(|s| s.roster.records().cloned().collect())
    }

    pub fn redactor(&self) -> Redactor {
        self.read(|s| s.roster.redactor())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enrollment_and_session_lookup() {
        let store = Store::in_memory();
        let e = store
            .enroll_student(&Enrollment {
                display_name: " Ada Byron ".into(),
                email: Some("ada@example.org".into()),
                external_id: Some("".into()),
            })
            .unwrap();
        assert!(StudentToken::is_well_formed(e.student_token.as_str()));
        store.read(|s| {
            assert_eq!(
                s.roster.by_session(&e.session_token),
                Some(&e.student_token)
            );
            assert_eq!(s.roster.by_session("nope"), None);
            let rec = s.roster.student(&e.student_token).unwrap();
            assert_eq!(rec.display_name, "Ada Byron");
            assert_eq!(rec.external_id, None);
            assert_ne!(rec.session_digest, e.session_token);
        });
        let out = store
            .redactor()
            .redact_text("Ada Byron wrote from ada@example.org");
        assert_eq!(out, format!("{0} wrote from {0}", e.student_token));
    }

    #[test]
    fn blank_name_rejected() {
        let store = Store::in_memory();
        let err = store
            .enroll_student(&Enrollment {
                display_name: "  ".into(),
                email: None,
                external_id: None,
            })
            .unwrap_err();
        assert_eq!(err.code(), "validation_error");
    }
}
