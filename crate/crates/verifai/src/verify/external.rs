//! Wire client for a chat-completion-style external verifier and the
//! verdict parser for its free-text answers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::lake::{DataInstance, DataObject};

use super::prompt::render_verification_prompt;
use super::{StageError, Verdict, VerdictRecord, VERIFIER_EXTERNAL_LLM};

#[derive(Debug, Error)]
#[error("verifier service error after {attempts} attempts: {msg}")]
pub struct VerifierServiceError {
    pub attempts: usize,
    pub msg: String,
}

#[derive(Debug, Error)]
#[error("no verdict found in response: {raw:?}")]
pub struct ParseError {
    pub raw: String,
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// POSTs the prompt with temperature pinned to 0 and returns the first
/// message text. Two retries with exponential backoff, then the error
/// surfaces.
pub fn call_external_verifier(
    endpoint: &str,
    model: &str,
    token: Option<&str>,
    timeout: std::time::Duration,
    prompt: &str,
) -> Result<String, VerifierServiceError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| VerifierServiceError {
            attempts: 0,
            msg: e.to_string(),
        })?;
    let mut last_err = String::new();
    let attempts = 3;
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(std::time::Duration::from_millis(50 << attempt));
        }
        let mut req = client.post(endpoint).json(&ChatRequest {
            model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        });
        if let Some(tok) = token {
            req = req.bearer_auth(tok);
        }
        match req.send() {
            Ok(resp) if resp.status().is_success() => match resp.json::<ChatResponse>() {
                Ok(body) => match body.choices.into_iter().next() {
                    Some(choice) => return Ok(choice.message.content),
                    None => last_err = "response has no choices".into(),
                },
                Err(e) => last_err = format!("malformed body: {e}"),
            },
            Ok(resp) => last_err = format!("status {}", resp.status()),
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(VerifierServiceError {
        attempts,
        msg: last_err,
    })
}

/// Case-insensitive scan of the first 200 characters for the earliest
/// verdict keyword; the remainder of the text is the explanation.
pub fn parse_verdict(raw: &str) -> Result<(Verdict, String), ParseError> {
    let window: String = raw.chars().take(200).collect::<String>().to_lowercase();
    let patterns: [(&str, Verdict); 4] = [
        ("verified", Verdict::Verified),
        ("refuted", Verdict::Refuted),
        ("not related", Verdict::NotRelated),
        ("unrelated", Verdict::NotRelated),
    ];
    let mut best: Option<(usize, usize, Verdict)> = None;
    for (pat, verdict) in patterns {
        if let Some(pos) = window.find(pat) {
            if best.map(|(b, _, _)| pos < b).unwrap_or(true) {
                best = Some((pos, pos + pat.len(), verdict));
            }
        }
    }
    let Some((_, end, verdict)) = best else {
        return Err(ParseError {
            raw: raw.to_string(),
        });
    };
    // byte offsets in `window` line up with `raw` only for ASCII; re-derive
    // the explanation from raw by char count
    let explanation: String = raw
        .chars()
        .skip(window[..end].chars().count())
        .collect::<String>()
        .trim_start_matches(|c: char| {
            c.is_whitespace() || matches!(c, '.' | ',' | ':' | ';' | '-' | '—' | '–')
        })
        .to_string();
    Ok((verdict, explanation))
}

/// Runs one piece of evidence through the external verifier, folding an
/// unparseable answer into a NotRelated record flagged unparsed so a bad
/// response never aborts a multi-evidence verification.
pub fn verify_external(
    g: &DataObject,
    x: &DataInstance,
    config: &EngineConfig,
) -> Result<VerdictRecord, StageError> {
    let Some(ext) = &config.external_llm else {
        return Err(StageError {
            stage: "external_llm".into(),
            message: "no external verifier endpoint configured".into(),
        });
    };
    let prompt = render_verification_prompt(g, x);
    let raw = call_external_verifier(
        &ext.endpoint,
        &ext.model,
        ext.token.as_deref(),
        std::time::Duration::from_secs(ext.timeout_secs),
        &prompt,
    )
    .map_err(|e| StageError {
        stage: "call_external_verifier".into(),
        message: e.to_string(),
    })?;
    Ok(match parse_verdict(&raw) {
        Ok((verdict, explanation)) => VerdictRecord {
            object_id: g.object_id.clone(),
            instance_id: x.instance_id.clone(),
            verdict,
            verifier_id: VERIFIER_EXTERNAL_LLM.into(),
            explanation,
            raw_response: Some(raw),
        },
        Err(ParseError { raw }) => VerdictRecord {
            object_id: g.object_id.clone(),
            instance_id: x.instance_id.clone(),
            verdict: Verdict::NotRelated,
            verifier_id: format!("{VERIFIER_EXTERNAL_LLM}:unparsed"),
            explanation: String::new(),
            raw_response: Some(raw),
        },
    })
}
