//! Transport-independent request handling. Every endpoint takes an
//! [`ApiRequest`] and produces an [`ApiResponse`] whose body is JSON with a
//! `v` schema field. The HTTP adapter in [`crate::http`] only translates.
//!
//! Callers identify themselves with the `X-Officer-Id` header; requests
//! without it are public. Role scoping is enforced here, whatever the
//! client shows.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::case_registry::{CaseError, CaseFilter, CaseId, CaseIntakeForm};
use crate::event::SCHEMA_VERSION;
use crate::reporting::{EpiWeek, ReportError};
use crate::service::{ServiceError, Surveillance};
use crate::time::parse_instant;
use crate::travel_risk::{TravelEntryInput, TravelError, DEFAULT_WINDOW_DAYS};
use crate::workflow::{AttentionStatus, Officer, OrderId, Outcome, Role, WorkflowError};

pub const OFFICER_HEADER: &str = "X-Officer-Id";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiRequest {
    pub method: Method,
    pub path: String,
    pub query: BTreeMap<String, String>,
    pub officer: Option<String>,
    pub body: Option<String>,
}

impl ApiRequest {
    pub fn get(path: &str) -> Self {
        let (path, query) = split_query(path);
        ApiRequest {
            method: Method::Get,
            path,
            query,
            officer: None,
            body: None,
        }
    }

    pub fn post(path: &str, body: impl Serialize) -> Self {
        let (path, query) = split_query(path);
        let body = serde_json::to_string(&body).expect("request body serializes");
        ApiRequest {
            method: Method::Post,
            path,
            query,
            officer: None,
            body: Some(body),
        }
    }

    pub fn as_officer(mut self, id: &str) -> Self {
        self.officer = Some(id.to_string());
        self
    }
}

/// Splits `a/b?x=1&y=2` without percent-decoding; enough for tests and
/// examples. The HTTP adapter passes decoded queries.
fn split_query(path: &str) -> (String, BTreeMap<String, String>) {
    match path.split_once('?') {
        None => (path.to_string(), BTreeMap::new()),
        Some((p, q)) => {
            let query = q
                .split('&')
                .filter(|kv| !kv.is_empty())
                .map(|kv| match kv.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.replace('+', " ")),
                    None => (kv.to_string(), String::new()),
                })
                .collect();
            (p.to_string(), query)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: String,
}

impl ApiResponse {
    fn new(status: u16, body: Value) -> Self {
        let mut body = body;
        if let Value::Object(m) = &mut body {
            m.insert("v".into(), json!(SCHEMA_VERSION));
        }
        ApiResponse {
            status,
            body: serde_json::to_string(&body).expect("json value serializes"),
        }
    }

    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).expect("response bodies are JSON")
    }
}

/// An error with its HTTP status and a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "bad_request", message)
    }

    fn forbidden(message: impl Into<String>) -> Self {
        Self::new(403, "forbidden", message)
    }

    fn into_response(self) -> ApiResponse {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(f) = self.field {
            error["field"] = json!(f);
        }
        ApiResponse::new(self.status, json!({ "error": error }))
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let message = e.to_string();
        match e {
            ServiceError::Case(CaseError::Validation { field, .. }) => ApiError {
                status: 400,
                code: "validation",
                message,
                field: Some(field),
            },
            ServiceError::Case(CaseError::NotFound(_))
            | ServiceError::Workflow(WorkflowError::NotFound(_))
            | ServiceError::Travel(TravelError::NotFound(_))
            | ServiceError::Report(ReportError::NotFound(_))
            | ServiceError::Report(ReportError::UnknownMohArea(_)) => {
                Self::new(404, "not_found", message)
            }
            ServiceError::Case(_) => Self::new(400, "bad_request", message),
            ServiceError::Workflow(WorkflowError::IllegalTransition { .. })
            | ServiceError::Travel(TravelError::NotAssigned(_)) => {
                Self::new(409, "illegal_transition", message)
            }
            ServiceError::Workflow(_) | ServiceError::Travel(TravelError::ScopeViolation(_)) => {
                Self::new(403, "forbidden", message)
            }
            ServiceError::Travel(TravelError::Validation { day, field }) => ApiError {
                status: 400,
                code: "validation",
                message,
                field: Some(format!("day{day}.{field}")),
            },
            ServiceError::Travel(_) => Self::new(400, "validation", message),
            ServiceError::Report(ReportError::IncompleteCase(_)) => {
                Self::new(409, "incomplete", message)
            }
            ServiceError::Report(_) => Self::new(400, "bad_request", message),
            ServiceError::UnknownOfficer(_) => Self::new(400, "unknown_officer", message),
            ServiceError::Log(_) | ServiceError::Config(_) | ServiceError::Io(_) => {
                Self::new(500, "internal", message)
            }
        }
    }
}

type Result<T> = std::result::Result<T, ApiError>;

#[derive(Deserialize)]
struct AssignBody {
    assignee: String,
}

#[derive(Deserialize)]
struct AttendBody {
    outcome: Outcome,
}

#[derive(Deserialize)]
struct TravelBody {
    entries: Vec<TravelEntryInput>,
}

#[derive(Deserialize)]
struct GenerateBody {
    week: EpiWeek,
    #[serde(default)]
    district: Option<String>,
    #[serde(default)]
    moh_area: Option<String>,
}

/// Routes one request. Never panics on client input.
pub fn handle(svc: &Surveillance, req: &ApiRequest) -> ApiResponse {
    match route(svc, req) {
        Ok((status, body)) => ApiResponse::new(status, body),
        Err(e) => e.into_response(),
    }
}

fn route(svc: &Surveillance, req: &ApiRequest) -> Result<(u16, Value)> {
    let caller = caller(svc, req)?;
    let segments: Vec<&str> = req.path.trim_matches('/').split('/').collect();
    use Method::{Get, Post};
    match (req.method, segments.as_slice()) {
        (Get, ["health"]) => Ok((
            200,
            json!({ "status": "ok", "events": svc.with_state(|s| s.last_event_id) }),
        )),
        (Get, ["v1", "live-update"]) => live_update(svc, req),
        (method, ["v1", ..]) => {
            let officer =
                caller.ok_or_else(|| ApiError::new(401, "unauthenticated", "sign in required"))?;
            match (method, &segments[1..]) {
                (Post, ["cases"]) => register(svc, &officer, req),
                (Get, ["cases"]) => list_cases(svc, &officer, req),
                (Get, ["cases", id]) => get_case(svc, &officer, id),
                (Post, ["cases", id, "assign"]) => assign(svc, &officer, id, req),
                (Post, ["work-orders", id, "attend"]) => attend(svc, &officer, id, req),
                (Post, ["cases", id, "travel-history"]) => travel(svc, &officer, id, req),
                (Get, ["suggest"]) => suggest(svc, &officer, req),
                (Get, ["risk-places"]) => risk_places(svc, &officer, req),
                (Get, ["worklist"]) => worklist(svc, &officer),
                (Get, ["weekly-return"]) => weekly_return(svc, &officer, req),
                (Post, ["weekly-returns", "generate"]) => generate(svc, &officer, req),
                (Get, ["metrics"]) => metrics(svc, &officer),
                _ => Err(ApiError::new(
                    404,
                    "not_found",
                    format!("no route for {}", req.path),
                )),
            }
        }
        _ => Err(ApiError::new(
            404,
            "not_found",
            format!("no route for {}", req.path),
        )),
    }
}

/// The signed-in officer, `None` for public callers.
fn caller(svc: &Surveillance, req: &ApiRequest) -> Result<Option<Officer>> {
    let Some(id) = req
        .officer
        .as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
    else {
        return Ok(None);
    };
    let ctx = svc.context();
    let officer =
        ctx.officers.get(id).cloned().ok_or_else(|| {
            ApiError::new(401, "unauthenticated", format!("unknown officer {id:?}"))
        })?;
    Ok((officer.role != Role::Public).then_some(officer))
}

fn require(officer: &Officer, roles: &[Role]) -> Result<()> {
    if roles.contains(&officer.role) {
        Ok(())
    } else {
        Err(ApiError::forbidden(format!(
            "role {} may not do this",
            officer.role
        )))
    }
}

const READERS: [Role; 5] = [Role::Icn, Role::Phi, Role::Moh, Role::Re, Role::Epid];

fn body<T: DeserializeOwned>(req: &ApiRequest) -> Result<T> {
    let text = req.body.as_deref().unwrap_or("");
    serde_json::from_str(text).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

fn param<'a>(req: &'a ApiRequest, name: &str) -> Option<&'a str> {
    req.query
        .get(name)
        .map(String::as_str)
        .filter(|s| !s.is_empty())
}

fn parsed<T: std::str::FromStr>(req: &ApiRequest, name: &str) -> Result<Option<T>> {
    param(req, name)
        .map(|s| {
            s.parse()
                .map_err(|_| ApiError::bad_request(format!("invalid {name}: {s:?}")))
        })
        .transpose()
}

fn instant(req: &ApiRequest, name: &str) -> Result<Option<crate::time::Timestamp>> {
    param(req, name)
        .map(|s| {
            parse_instant(s).ok_or_else(|| ApiError::bad_request(format!("invalid {name}: {s:?}")))
        })
        .transpose()
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("payload serializes")
}

fn live_update(svc: &Surveillance, req: &ApiRequest) -> Result<(u16, Value)> {
    let live = svc.live_update(instant(req, "at")?);
    Ok((200, to_value(live)))
}

fn register(svc: &Surveillance, officer: &Officer, req: &ApiRequest) -> Result<(u16, Value)> {
    require(officer, &[Role::Icn])?;
    let form: CaseIntakeForm = body(req)?;
    let case = svc.register_case(&form)?;
    let order = svc.with_state(|s| s.order_for_case(&case.case_id).cloned());
    Ok((201, json!({ "case": case, "work_order": order })))
}

fn visible(officer: &Officer, case: &crate::case_registry::CaseRecord) -> bool {
    officer.scope.covers(&case.path)
}

fn get_case(svc: &Surveillance, officer: &Officer, id: &str) -> Result<(u16, Value)> {
    require(officer, &READERS)?;
    let case = svc.get_case(&CaseId(id.to_string()))?;
    if !visible(officer, &case) {
        return Err(ApiError::forbidden(format!(
            "case {id} is outside {}'s scope",
            officer.officer_id
        )));
    }
    let order = svc.with_state(|s| s.order_for_case(&case.case_id).cloned());
    Ok((200, json!({ "case": case, "work_order": order })))
}

fn list_cases(svc: &Surveillance, officer: &Officer, req: &ApiRequest) -> Result<(u16, Value)> {
    require(officer, &READERS)?;
    let status = param(req, "status")
        .map(|s| {
            AttentionStatus::parse(s)
                .ok_or_else(|| ApiError::bad_request(format!("invalid status: {s:?}")))
        })
        .transpose()?;
    let filter = CaseFilter {
        district: param(req, "district").map(String::from),
        moh_area: param(req, "moh_area").map(String::from),
        phi_area: param(req, "phi_area").map(String::from),
        day: parsed::<NaiveDate>(req, "day")?,
        status,
    };
    let cases: Vec<_> = svc
        .list_cases(&filter)
        .into_iter()
        .filter(|c| visible(officer, c))
        .collect();
    Ok((200, json!({ "cases": cases })))
}

fn suggest(svc: &Surveillance, officer: &Officer, req: &ApiRequest) -> Result<(u16, Value)> {
    require(officer, &READERS)?;
    let target = param(req, "target").ok_or_else(|| ApiError::bad_request("target is required"))?;
    let prefix = req.query.get("prefix").map(String::as_str).unwrap_or("");
    let limit = parsed::<usize>(req, "limit")?.unwrap_or(10);
    let suggestions = svc.suggest(target, prefix, limit)?;
    Ok((200, json!({ "target": target, "suggestions": suggestions })))
}

fn assign(
    svc: &Surveillance,
    officer: &Officer,
    id: &str,
    req: &ApiRequest,
) -> Result<(u16, Value)> {
    require(officer, &[Role::Moh])?;
    let b: AssignBody = body(req)?;
    let order = svc.assign(
        &CaseId(id.to_string()),
        officer.officer_id.as_str(),
        &b.assignee,
    )?;
    Ok((201, json!({ "work_order": order })))
}

fn attend(
    svc: &Surveillance,
    officer: &Officer,
    id: &str,
    req: &ApiRequest,
) -> Result<(u16, Value)> {
    require(officer, &[Role::Phi])?;
    let b: AttendBody = body(req)?;
    let (order, entry) = svc.record_attendance(
        &OrderId(id.to_string()),
        officer.officer_id.as_str(),
        b.outcome,
    )?;
    let case = svc.get_case(&order.case_id)?;
    Ok((
        200,
        json!({ "work_order": order, "id_register": entry, "case": case }),
    ))
}

fn travel(
    svc: &Surveillance,
    officer: &Officer,
    id: &str,
    req: &ApiRequest,
) -> Result<(u16, Value)> {
    require(officer, &[Role::Phi])?;
    let b: TravelBody = body(req)?;
    let places = svc.submit_travel_history(
        &CaseId(id.to_string()),
        officer.officer_id.as_str(),
        &b.entries,
    )?;
    Ok((201, json!({ "risk_places": places })))
}

fn risk_places(svc: &Surveillance, officer: &Officer, req: &ApiRequest) -> Result<(u16, Value)> {
    require(officer, &READERS)?;
    let window = parsed::<i64>(req, "window")?.unwrap_or(DEFAULT_WINDOW_DAYS);
    if window <= 0 {
        return Err(ApiError::bad_request("window must be positive"));
    }
    let places = svc.risk_places(param(req, "district"), window, instant(req, "at")?);
    Ok((200, json!({ "window_days": window, "risk_places": places })))
}

fn worklist(svc: &Surveillance, officer: &Officer) -> Result<(u16, Value)> {
    require(officer, &[Role::Phi])?;
    Ok((
        200,
        to_value(svc.phi_worklist(officer.officer_id.as_str())?),
    ))
}

fn moh_params(
    svc: &Surveillance,
    officer: &Officer,
    req: &ApiRequest,
) -> Result<crate::gazetteer::MohRef> {
    let district =
        param(req, "district").ok_or_else(|| ApiError::bad_request("district is required"))?;
    let moh_area =
        param(req, "moh_area").ok_or_else(|| ApiError::bad_request("moh_area is required"))?;
    let moh = svc
        .context()
        .gazetteer
        .find_moh(district, moh_area)
        .ok_or_else(|| {
            ApiError::new(
                404,
                "not_found",
                format!("unknown MOH area {district}/{moh_area}"),
            )
        })?;
    if !officer.scope.covers_moh(&moh) {
        return Err(ApiError::forbidden(format!(
            "MOH area {moh} is outside {}'s scope",
            officer.officer_id
        )));
    }
    Ok(moh)
}

fn weekly_return(svc: &Surveillance, officer: &Officer, req: &ApiRequest) -> Result<(u16, Value)> {
    require(officer, &[Role::Moh, Role::Re, Role::Epid])?;
    let moh = moh_params(svc, officer, req)?;
    let week =
        parsed::<EpiWeek>(req, "week")?.ok_or_else(|| ApiError::bad_request("week is required"))?;
    let r = svc.weekly_return(&moh.district, &moh.moh_area, week)?;
    Ok((200, json!({ "weekly_return": r })))
}

fn generate(svc: &Surveillance, officer: &Officer, req: &ApiRequest) -> Result<(u16, Value)> {
    require(officer, &[Role::Moh])?;
    let b: GenerateBody = body(req)?;
    let mut q = req.clone();
    let own = match &officer.scope {
        crate::workflow::Scope::Moh(m) => Some(m.clone()),
        _ => None,
    };
    let district = b
        .district
        .or_else(|| own.as_ref().map(|m| m.district.clone()));
    let moh_area = b
        .moh_area
        .or_else(|| own.as_ref().map(|m| m.moh_area.clone()));
    q.query
        .extend(district.map(|d| ("district".to_string(), d)));
    q.query
        .extend(moh_area.map(|m| ("moh_area".to_string(), m)));
    let moh = moh_params(svc, officer, &q)?;
    let r = svc.generate_weekly_return(&moh.district, &moh.moh_area, b.week)?;
    Ok((201, json!({ "weekly_return": r })))
}

fn metrics(svc: &Surveillance, officer: &Officer) -> Result<(u16, Value)> {
    require(officer, &READERS)?;
    Ok((200, to_value(svc.metrics())))
}
