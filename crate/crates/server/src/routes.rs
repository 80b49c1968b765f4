use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Query, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use pappl_core::analytics::export::engagement_csv;
use pappl_core::analytics::questionnaire::{score_dimensions, RespondentResponses};
use pappl_core::analytics::{EngagementReport, QuestionnaireSpec};
use pappl_core::content::course_file::CourseFile;
use pappl_core::content::{
    CourseId, CoursePatch, CourseSummary, QuestionDraft, QuestionId, QuestionSummary,
};
use pappl_core::learner::{Attempt, AttemptId, StudentToken};
use pappl_core::service::roster::Enrollment;
use pappl_core::service::{Principal, Submission};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::AppState;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Json<T>(pub T);

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct Path<T>(pub T);

impl From<axum::extract::rejection::JsonRejection> for ApiError {
    fn from(r: axum::extract::rejection::JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<axum::extract::rejection::PathRejection> for ApiError {
    fn from(r: axum::extract::rejection::PathRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

/// Authenticated caller.
pub struct Caller(pub Principal);

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let bearer = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .unwrap_or_default();
        Ok(Caller(state.platform.authenticate(bearer)?))
    }
}

/// Extractor for instructor-only routes. Rejects before the body is read, so
/// a student never learns anything from body validation errors.
pub struct Instructor;

impl FromRequestParts<AppState> for Instructor {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        Caller::from_request_parts(parts, state)
            .await?
            .instructor()?;
        Ok(Instructor)
    }
}

impl Caller {
    fn instructor(&self) -> ApiResult<()> {
        match self.0 {
            Principal::Instructor => Ok(()),
            Principal::Student(_) => Err(ApiError::forbidden("instructor role required")),
        }
    }

    fn student(&self) -> ApiResult<&StudentToken> {
        match &self.0 {
            Principal::Student(t) => Ok(t),
            Principal::Instructor => Err(ApiError::forbidden("student role required")),
        }
    }
}

pub fn api_routes() -> Router<AppState> {
    Router::new()
        .route("/health", get(health))
        .route("/me", get(me))
        .route("/me/score", get(my_score))
        .route("/me/attempts", get(my_attempts))
        .route("/students", get(list_students).post(enroll))
        .route("/students/{token}/profile", get(profile))
        .route("/students/{token}/profile/reset", post(reset_profile))
        .route("/courses", get(list_courses).post(create_course))
        .route("/courses/import", post(import_courses))
        .route(
            "/courses/{id}",
            get(get_course).patch(update_course).delete(delete_course),
        )
        .route("/courses/{id}/export", get(export_course))
        .route(
            "/courses/{id}/questions",
            get(list_questions).post(create_question),
        )
        .route("/courses/{id}/report", get(report))
        .route("/courses/{id}/report.csv", get(report_csv))
        .route("/courses/{id}/attempts.csv", get(attempts_csv))
        .route(
            "/questions/{id}",
            get(get_question)
                .put(update_question)
                .delete(delete_question),
        )
        .route("/questions/{id}/bundle", get(question_bundle))
        .route("/attempts", post(submit))
        .route("/attempts/{id}", get(get_attempt))
        .route("/media", post(upload_media))
        .route("/media/{digest}", get(get_media))
        .route("/questionnaire", get(questionnaire))
        .route("/questionnaire/score", post(score_questionnaire))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn me(caller: Caller) -> Json<Value> {
    Json(match caller.0 {
        Principal::Instructor => json!({ "role": "instructor" }),
        Principal::Student(t) => json!({ "role": "student", "student_token": t }),
    })
}

#[derive(Deserialize)]
struct CourseQuery {
    course_id: CourseId,
}

async fn my_score(
    State(s): State<AppState>,
    caller: Caller,
    Query(q): Query<CourseQuery>,
) -> ApiResult<Response> {
    let student = caller.student()?;
    Ok(Json(s.platform.score(student, q.course_id)?).into_response())
}

async fn my_attempts(
    State(s): State<AppState>,
    caller: Caller,
    Query(q): Query<CourseQuery>,
) -> ApiResult<Json<Vec<Attempt>>> {
    let student = caller.student()?.clone();
    Ok(Json(s.platform.store().read(|st| {
        st.learner
            .attempts()
            .iter()
            .filter(|a| a.student == student && a.course_id == q.course_id)
            .cloned()
            .collect()
    })))
}

async fn list_students(State(s): State<AppState>, _: Instructor) -> ApiResult<Response> {
    let students: Vec<Value> = s
        .platform
        .store()
        .roster()
        .into_iter()
        .map(|r| {
            json!({
                "student_token": r.student_token,
                "display_name": r.display_name,
                "email": r.email,
                "external_id": r.external_id,
                "enrolled_at": r.enrolled_at,
            })
        })
        .collect();
    Ok(Json(students).into_response())
}

async fn enroll(
    State(s): State<AppState>,
    _: Instructor,
    Json(body): Json<Enrollment>,
) -> ApiResult<Response> {
    let enrolled = s.platform.store().enroll_student(&body)?;
    Ok((StatusCode::CREATED, Json(enrolled)).into_response())
}

fn parse_token(raw: &str) -> ApiResult<StudentToken> {
    StudentToken::parse(raw).ok_or_else(|| pappl_core::Error::not_found("student", raw).into())
}

async fn profile(
    State(s): State<AppState>,
    _: Instructor,
    Path(token): Path<String>,
) -> ApiResult<Response> {
    let token = parse_token(&token)?;
    Ok(Json(s.platform.store().learner_profile(&token)).into_response())
}

async fn reset_profile(
    State(s): State<AppState>,
    _: Instructor,
    Path(token): Path<String>,
) -> ApiResult<StatusCode> {
    let token = parse_token(&token)?;
    s.platform.store().reset_profile(&token)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_courses(State(s): State<AppState>, _caller: Caller) -> Json<Vec<CourseSummary>> {
    Json(
        s.platform
            .store()
            .list_courses()
            .iter()
            .map(CourseSummary::from)
            .collect(),
    )
}

#[derive(Deserialize)]
struct NewCourse {
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default = "default_true")]
    feedback_enabled: bool,
}

fn default_true() -> bool {
    true
}

async fn create_course(
    State(s): State<AppState>,
    _: Instructor,
    Json(body): Json<NewCourse>,
) -> ApiResult<Response> {
    let course =
        s.platform
            .store()
            .create_course(&body.title, &body.description, body.feedback_enabled)?;
    Ok((StatusCode::CREATED, Json(CourseSummary::from(&course))).into_response())
}

async fn get_course(
    State(s): State<AppState>,
    _caller: Caller,
    Path(id): Path<CourseId>,
) -> ApiResult<Json<CourseSummary>> {
    Ok(Json(CourseSummary::from(
        &s.platform.store().get_course(id)?,
    )))
}

async fn update_course(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<CourseId>,
    Json(patch): Json<CoursePatch>,
) -> ApiResult<Json<CourseSummary>> {
    Ok(Json(CourseSummary::from(
        &s.platform.store().update_course(id, &patch)?,
    )))
}

async fn delete_course(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<CourseId>,
) -> ApiResult<StatusCode> {
    s.platform.store().delete_course(id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn import_courses(
    State(s): State<AppState>,
    _: Instructor,
    Json(file): Json<CourseFile>,
) -> ApiResult<Response> {
    let courses = s.platform.store().import_course_file(&file)?;
    let out: Vec<CourseSummary> = courses.iter().map(CourseSummary::from).collect();
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn export_course(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<CourseId>,
) -> ApiResult<Json<CourseFile>> {
    Ok(Json(s.platform.store().export_course_file(&[id])?))
}

#[derive(Deserialize)]
struct CatalogQuery {
    topic: Option<String>,
    sub_topic: Option<String>,
}

async fn list_questions(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<CourseId>,
    Query(q): Query<CatalogQuery>,
) -> ApiResult<Response> {
    let store = s.platform.store();
    match caller.0 {
        Principal::Instructor => {
            let listing: Vec<QuestionSummary> =
                store.list_catalog(id, q.topic.as_deref(), q.sub_topic.as_deref())?;
            Ok(Json(listing).into_response())
        }
        Principal::Student(_) => {
            let views: Vec<_> = s
                .platform
                .student_course_questions(id)?
                .into_iter()
                .filter(|v| q.topic.as_deref().is_none_or(|t| v.topic == t))
                .filter(|v| q.sub_topic.as_deref().is_none_or(|t| v.sub_topic == t))
                .collect();
            Ok(Json(views).into_response())
        }
    }
}

async fn create_question(
    State(s): State<AppState>,
    _: Instructor,
    Path(course_id): Path<CourseId>,
    Json(mut draft): Json<QuestionDraft>,
) -> ApiResult<Response> {
    draft.id = None;
    let q = s.platform.store().upsert_question(course_id, &draft)?;
    Ok((StatusCode::CREATED, Json(q)).into_response())
}

async fn get_question(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<QuestionId>,
) -> ApiResult<Response> {
    Ok(match caller.0 {
        Principal::Instructor => Json(s.platform.store().get_question(id)?).into_response(),
        Principal::Student(_) => Json(s.platform.student_question(id)?).into_response(),
    })
}

async fn question_bundle(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<QuestionId>,
) -> ApiResult<Json<Value>> {
    let (question, related) = s.platform.store().get_question_bundle(id)?;
    Ok(Json(json!({ "question": question, "related": related })))
}

async fn update_question(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<QuestionId>,
    Json(mut draft): Json<QuestionDraft>,
) -> ApiResult<Response> {
    let store = s.platform.store();
    let course_id = store.get_question(id)?.course_id;
    draft.id = Some(id);
    Ok(Json(store.upsert_question(course_id, &draft)?).into_response())
}

async fn delete_question(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<QuestionId>,
) -> ApiResult<StatusCode> {
    s.platform.store().delete_question(id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn submit(
    State(s): State<AppState>,
    caller: Caller,
    Json(body): Json<Submission>,
) -> ApiResult<Response> {
    let student = caller.student()?.clone();
    let outcome = s.platform.submit_answer(&student, body).await?;
    Ok((StatusCode::CREATED, Json(outcome)).into_response())
}

async fn get_attempt(
    State(s): State<AppState>,
    caller: Caller,
    Path(id): Path<AttemptId>,
) -> ApiResult<Json<Attempt>> {
    let attempt = s
        .platform
        .store()
        .read(|st| st.learner.attempt(id).cloned())
        .filter(|a| match &caller.0 {
            Principal::Instructor => true,
            Principal::Student(t) => &a.student == t,
        })
        .ok_or_else(|| pappl_core::Error::not_found("attempt", id))?;
    Ok(Json(attempt))
}

fn report_for(s: &AppState, id: CourseId) -> ApiResult<EngagementReport> {
    Ok(s.platform.store().engagement_report(id)?)
}

async fn report(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<CourseId>,
) -> ApiResult<Json<EngagementReport>> {
    Ok(Json(report_for(&s, id)?))
}

fn csv_response(bytes: Vec<u8>, filename: &str) -> Response {
    (
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{filename}\""),
            ),
        ],
        bytes,
    )
        .into_response()
}

async fn report_csv(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<CourseId>,
) -> ApiResult<Response> {
    let report = report_for(&s, id)?;
    Ok(csv_response(
        engagement_csv(&report.rows)?,
        &format!("engagement-{id}.csv"),
    ))
}

async fn attempts_csv(
    State(s): State<AppState>,
    _: Instructor,
    Path(id): Path<CourseId>,
) -> ApiResult<Response> {
    let bytes = s.platform.store().attempt_log_export(id)?;
    Ok(csv_response(bytes, &format!("attempts-{id}.csv")))
}

async fn upload_media(
    State(s): State<AppState>,
    _: Instructor,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let media_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default();
    if !media_type.starts_with("image/") {
        return Err(
            pappl_core::Error::validation("content-type", "only images are accepted").into(),
        );
    }
    if body.is_empty() {
        return Err(pappl_core::Error::validation("body", "empty upload").into());
    }
    let media = s.platform.store().media().put(&body, media_type)?;
    Ok((StatusCode::CREATED, Json(media)).into_response())
}

async fn get_media(
    State(s): State<AppState>,
    _caller: Caller,
    Path(digest): Path<String>,
) -> ApiResult<Response> {
    let store = s.platform.store();
    let bytes = store
        .media()
        .get(&digest)
        .ok_or_else(|| pappl_core::Error::not_found("media", &digest))?;
    // Content type comes from whichever question references the blob.
    let media_type = store
        .read(|st| {
            st.catalog
                .courses()
                .flat_map(|c| st.catalog.course_questions_any(c.id))
                .flat_map(|q| q.media.iter())
                .find(|m| m.digest == digest)
                .map(|m| m.media_type.clone())
        })
        .unwrap_or_else(|| "application/octet-stream".into());
    Ok(([(header::CONTENT_TYPE, media_type)], bytes).into_response())
}

async fn questionnaire(_caller: Caller) -> Json<QuestionnaireSpec> {
    Json(QuestionnaireSpec::shipped())
}

#[derive(Deserialize)]
struct ScoreRequest {
    responses: Vec<RespondentResponses>,
}

async fn score_questionnaire(
    _: Instructor,
    Json(body): Json<ScoreRequest>,
) -> ApiResult<Json<Value>> {
    let result = score_dimensions(&QuestionnaireSpec::shipped(), &body.responses)?;
    let scores: BTreeMap<String, f64> = result
        .per_dimension_scores
        .iter()
        .map(|(d, v)| (d.to_string(), *v))
        .collect();
    Ok(Json(json!({
        "respondents": result.respondents,
        "per_dimension_scores": scores,
        "consistency_pass": result.consistency_pass,
        "flagged_pairs": result.flagged_pairs,
        "open_ended": result.open_ended,
    })))
}
