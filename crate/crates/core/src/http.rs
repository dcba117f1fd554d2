//! HTTP adapter over [`crate::api`].

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, Method as HttpMethod, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;

use crate::api::{self, ApiRequest, Method, OFFICER_HEADER};
use crate::service::Surveillance;

pub fn router(svc: Arc<Surveillance>) -> Router {
    Router::new().fallback(dispatch).with_state(svc)
}

async fn dispatch(
    State(svc): State<Arc<Surveillance>>,
    method: HttpMethod,
    uri: Uri,
    Query(query): Query<BTreeMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let method = match method {
        HttpMethod::GET => Method::Get,
        HttpMethod::POST => Method::Post,
        _ => return (StatusCode::METHOD_NOT_ALLOWED, "").into_response(),
    };
    let req = ApiRequest {
        method,
        path: uri.path().to_string(),
        query,
        officer: headers
            .get(OFFICER_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(String::from),
        body: (!body.is_empty()).then(|| String::from_utf8_lossy(&body).into_owned()),
    };
    // Commands take the writer lock and may fsync; keep them off the reactor.
    let res = tokio::task::spawn_blocking(move || api::handle(&svc, &req))
        .await
        .expect("handler does not panic");
    let status = StatusCode::from_u16(res.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        res.body,
    )
        .into_response()
}

/// Serves until ctrl-c, retrying pending notifications every `retry_every`.
pub async fn serve(
    svc: Arc<Surveillance>,
    listen: &str,
    retry_every: Duration,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    let retry_svc = svc.clone();
    let retry = tokio::spawn(async move {
        let mut tick = tokio::time::interval(retry_every);
        loop {
            tick.tick().await;
            let s = retry_svc.clone();
            if let Ok(Err(e)) = tokio::task::spawn_blocking(move || s.retry_pending()).await {
                eprintln!("retry failed: {e}");
            }
        }
    });
    let result = axum::serve(listener, router(svc.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    retry.abort();
    if let Err(e) = svc.snapshot() {
        eprintln!("snapshot on shutdown failed: {e}");
    }
    result
}
