//! HTTP backend speaking a vendor-neutral chat-completion protocol:
//! `POST {base_url}/chat/completions` and `POST {base_url}/embeddings` with
//! JSON bodies, bearer-token auth read from the environment variable named
//! in the backend config. Request seeds are forwarded as an advisory field.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::error::{PipelineError, Result};

use super::{BackendConfig, BackendKind, ChatBackend, ChatRequest, RawResponse};

const EMBED_CHUNK: usize = 128;

pub struct LiveBackend {
    base_url: String,
    token: Option<String>,
    chat_model: Option<String>,
    embed_model: Option<String>,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(config: &BackendConfig) -> Result<Self> {
        config.validate()?;
        if config.kind != BackendKind::Live {
            return Err(PipelineError::Config(
                "LiveBackend requires a config with kind = live".into(),
            ));
        }
        let token = std::env::var(&config.auth_token_env).ok().filter(|t| !t.is_empty());
        if token.is_none() {
            log::warn!(
                "auth token variable `{}` is unset; requests will be unauthenticated",
                config.auth_token_env
            );
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| PipelineError::Backend(format!("http client: {e}")))?;
        Ok(LiveBackend {
            base_url: config.base_url.trim_end_matches('/').to_string(),
            token,
            chat_model: config.chat_model.clone(),
            embed_model: config.embed_model.clone(),
            client,
        })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value> {
        let url = format!("{}{path}", self.base_url);
        let mut request = self.client.post(&url).json(body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| PipelineError::Backend(format!("POST {url}: {e}")))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| PipelineError::Backend(format!("POST {url}: body read: {e}")))?;
        if !status.is_success() {
            return Err(PipelineError::Backend(format!(
                "POST {url}: status {status}: {}",
                text.chars().take(400).collect::<String>()
            )));
        }
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Backend(format!("POST {url}: invalid JSON response: {e}")))
    }
}

impl ChatBackend for LiveBackend {
    fn backend_kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn complete_raw(&self, request: &ChatRequest, _attempt: u32) -> Result<RawResponse> {
        let mut body = json!({
            "messages": [
                {
                    "role": "system",
                    "content": format!(
                        "You are a component of a research-literature pipeline. Respond with only \
                         a JSON object conforming to schema `{}`.",
                        request.schema_id
                    ),
                },
                { "role": "user", "content": request.prompt_text },
            ],
            "temperature": request.temperature,
            "seed": request.seed,
        });
        if let Some(model) = &self.chat_model {
            body["model"] = json!(model);
        }

        let started = Instant::now();
        let response = self.post("/chat/completions", &body)?;
        let latency_ms = started.elapsed().as_millis() as u64;

        let text = response["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| {
                PipelineError::Backend("chat response missing choices[0].message.content".into())
            })?
            .to_string();
        Ok(RawResponse {
            text,
            tokens_in: response["usage"]["prompt_tokens"].as_u64(),
            tokens_out: response["usage"]["completion_tokens"].as_u64(),
            latency_ms: Some(latency_ms),
        })
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut vectors = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(EMBED_CHUNK) {
            let mut body = json!({ "input": chunk });
            if let Some(model) = &self.embed_model {
                body["model"] = json!(model);
            }
            let response = self.post("/embeddings", &body)?;
            let data = response["data"].as_array().ok_or_else(|| {
                PipelineError::Backend("embedding response missing `data` array".into())
            })?;
            if data.len() != chunk.len() {
                return Err(PipelineError::Backend(format!(
                    "embedding response has {} entries for {} inputs",
                    data.len(),
                    chunk.len()
                )));
            }
            for entry in data {
                let values: Vec<f64> = entry["embedding"]
                    .as_array()
                    .ok_or_else(|| {
                        PipelineError::Backend("embedding entry missing `embedding` array".into())
                    })?
                    .iter()
                    .filter_map(Value::as_f64)
                    .collect();
                vectors.push(values);
            }
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn live_backend_requires_live_config() {
        let cfg = BackendConfig::mock();
        assert!(LiveBackend::new(&cfg).is_err());

        let mut live = BackendConfig::mock();
        live.kind = BackendKind::Live;
        live.base_url = "http://localhost:9/v1/".into();
        let backend = LiveBackend::new(&live).unwrap();
        assert_eq!(backend.base_url, "http://localhost:9/v1");
        assert_eq!(backend.backend_kind(), BackendKind::Live);
    }
}
