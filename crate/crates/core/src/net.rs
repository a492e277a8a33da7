//! Minimal blocking JSON-over-HTTP helper shared by the remote embedding
//! provider and the chat backend.

use std::time::Duration;

use serde::Serialize;

pub(crate) struct JsonResponse {
    pub status: u16,
    pub retry_after: Option<Duration>,
    pub body: String,
}

#[derive(Debug)]
pub(crate) enum NetError {
    Timeout,
    Unreachable(String),
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::new_with_config(
        ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build(),
    )
}

pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    body: &impl Serialize,
) -> Result<JsonResponse, NetError> {
    let map_err = |e: ureq::Error| match e {
        ureq::Error::Timeout(_) => NetError::Timeout,
        other => NetError::Unreachable(other.to_string()),
    };
    let mut resp = agent.post(url).send_json(body).map_err(map_err)?;
    let status = resp.status().as_u16();
    let retry_after = resp
        .headers()
        .get("retry-after")
        .and_then(|v| v.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(Duration::from_secs);
    let body = resp.body_mut().read_to_string().map_err(map_err)?;
    Ok(JsonResponse {
        status,
        retry_after,
        body,
    })
}
