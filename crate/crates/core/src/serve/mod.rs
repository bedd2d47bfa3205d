//! HTTP/JSON blanket queries over a loaded checkpoint.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::{json, Map, Value};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::blanket::{query_blanket, BlanketRule};
use crate::error::{Error, Result};
use crate::models::Checkpoint;

pub const MAX_BODY_BYTES: usize = 64 * 1024;

/// A float as a JSON number with 17 significant digits.
pub fn float17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn rule_json(rule: BlanketRule) -> String {
    match rule {
        BlanketRule::Threshold { value } => format!("{{\"threshold\":{}}}", float17(value)),
        BlanketRule::TopK { k } => format!("{{\"topk\":{k}}}"),
    }
}

/// `{"gates":[…],"selected":[…],"rule_applied":{…}}` for one mask.
pub fn blanket_json(ckpt: &Checkpoint, mask: &[f64], rule: BlanketRule) -> Result<String> {
    let r = query_blanket(ckpt, mask, rule)?;
    let gates: Vec<String> = r.gates.iter().map(|&g| float17(g)).collect();
    let selected: Vec<String> = r.selected.iter().map(usize::to_string).collect();
    Ok(format!(
        "{{\"gates\":[{}],\"selected\":[{}],\"rule_applied\":{}}}",
        gates.join(","),
        selected.join(","),
        rule_json(r.rule)
    ))
}

/// `{"d":…,"mask_kind":…,"feature_names":…|null,"trained_on":…,"train_config":{…}}`.
pub fn model_json(ckpt: &Checkpoint) -> String {
    json!({
        "d": ckpt.d,
        "mask_kind": ckpt.meta.mask_kind,
        "feature_names": ckpt.meta.feature_names,
        "trained_on": ckpt.meta.trained_on,
        "train_config": ckpt.train_config,
    })
    .to_string()
}

/// Reads `{"threshold": x}` or `{"topk": k}`; a missing rule means threshold 0.1.
pub fn parse_rule(v: Option<&Value>) -> Result<BlanketRule> {
    let Some(v) = v else {
        return Ok(BlanketRule::default());
    };
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parameter("rule must be an object".into()))?;
    match (obj.get("threshold"), obj.get("topk"), obj.len()) {
        (Some(t), None, 1) => {
            let value = t
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parameter("threshold must be a finite number".into()))?;
            Ok(BlanketRule::Threshold { value })
        }
        (None, Some(k), 1) => {
            let k = k
                .as_u64()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Parameter("topk must be a positive integer".into()))?;
            Ok(BlanketRule::TopK { k: k as usize })
        }
        _ => Err(Error::Parameter(
            "rule must be exactly one of {\"threshold\": x} or {\"topk\": k}".into(),
        )),
    }
}

fn parse_object(body: &[u8]) -> Result<Map<String, Value>> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Error::Format("request body must be a JSON object".into())),
        Err(e) => Err(Error::Format(format!("malformed JSON: {e}"))),
    }
}

fn parse_mask(v: Option<&Value>) -> Result<Vec<f64>> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidMask("mask must be an array of 0/1".into()))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| match x.as_f64() {
            Some(b) if b == 0.0 || b == 1.0 => Ok(b),
            _ => Err(Error::InvalidMask(format!("mask entry {i} is {x}, expected 0 or 1"))),
        })
        .collect()
}

fn field_usize(m: &Map<String, Value>, key: &str) -> Result<usize> {
    m.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::Parameter(format!("{key} must be a non-negative integer")))
}

/// Handles a `/api/blanket` body.
pub fn handle_blanket(ckpt: &Checkpoint, body: &[u8]) -> Result<String> {
    let m = parse_object(body)?;
    let mask = parse_mask(m.get("mask"))?;
    let rule = parse_rule(m.get("rule"))?;
    blanket_json(ckpt, &mask, rule)
}

/// The contiguous mask `[start, start + length)`.
pub fn window_mask(d: usize, start: usize, length: usize) -> Result<Vec<f64>> {
    if length == 0 || start.checked_add(length).is_none_or(|end| end > d) {
        return Err(Error::Parameter(format!(
            "window [{start}, {start}+{length}) must be non-empty and lie within d = {d}"
        )));
    }
    Ok((0..d).map(|j| if (start..start + length).contains(&j) { 1.0 } else { 0.0 }).collect())
}

/// Handles a `/api/window` body.
pub fn handle_window(ckpt: &Checkpoint, body: &[u8]) -> Result<String> {
    let m = parse_object(body)?;
    let start = field_usize(&m, "start")?;
    let length = field_usize(&m, "length")?;
    let k = field_usize(&m, "topk")?;
    if k == 0 {
        return Err(Error::Parameter("topk must be a positive integer".into()));
    }
    blanket_json(ckpt, &window_mask(ckpt.d, start, length)?, BlanketRule::TopK { k })
}

struct AppState {
    ckpt: Checkpoint,
    model: String,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn reply(result: Result<String>) -> Response {
    match result {
        Ok(body) => json_response(StatusCode::OK, body),
        Err(e) => {
            let status = match e {
                Error::InvalidMask(_) | Error::Shape(_) | Error::Parameter(_) | Error::Format(_) => {
                    StatusCode::BAD_REQUEST
                }
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            json_response(status, json!({ "error": e.to_string() }).to_string())
        }
    }
}

/// The service for `ckpt`, optionally serving static files from `ui_dir` at `/`.
pub fn router(ckpt: Checkpoint, ui_dir: Option<PathBuf>) -> Router {
    let state = Arc::new(AppState {
        model: model_json(&ckpt),
        ckpt,
    });
    let api = Router::new()
        .route("/api/model", get(|State(s): State<Arc<AppState>>| async move { json_response(StatusCode::OK, s.model.clone()) }))
        .route(
            "/api/blanket",
            post(|State(s): State<Arc<AppState>>, body: Bytes| async move { reply(handle_blanket(&s.ckpt, &body)) }),
        )
        .route(
            "/api/window",
            post(|State(s): State<Arc<AppState>>, body: Bytes| async move { reply(handle_window(&s.ckpt, &body)) }),
        )
        .with_state(state)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(CorsLayer::permissive());
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(ckpt: Checkpoint, addr: SocketAddr, ui_dir: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    let local = listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?;
    eprintln!("serving d = {} checkpoint on http://{local}", ckpt.d);
    axum::serve(listener, router(ckpt, ui_dir))
        .await
        .map_err(|e| Error::io(local.to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float17_round_trips() {
        for x in [0.1, 1.0 / 3.0, 0.5, 1e-300, 0.999_999_999_999_999_9] {
            assert_eq!(float17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(float17(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn rules_parse() {
        assert_eq!(parse_rule(None).unwrap(), BlanketRule::default());
        assert_eq!(parse_rule(Some(&json!({"topk": 3}))).unwrap(), BlanketRule::TopK { k: 3 });
        assert_eq!(
            parse_rule(Some(&json!({"threshold": 0.25}))).unwrap(),
            BlanketRule::Threshold { value: 0.25 }
        );
        for bad in [json!({"topk": 0}), json!({"topk": 1, "threshold": 0.1}), json!(3), json!({"k": 1})] {
            assert!(parse_rule(Some(&bad)).is_err(), "{bad}");
        }
    }

    #[test]
    fn window_masks() {
        assert_eq!(window_mask(5, 1, 2).unwrap(), vec![0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(window_mask(5, 4, 2).is_err());
        assert!(window_mask(5, 0, 0).is_err());
        assert!(window_mask(5, usize::MAX, 2).is_err());
    }
}
