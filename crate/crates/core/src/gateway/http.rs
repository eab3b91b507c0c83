//! HTTP backends for live audits: an OpenAI-style completions endpoint for
//! the target model (token logprobs + continuations) and a chat-completions
//! endpoint for the auxiliary model. Requests are retried 3 times with
//! exponential backoff starting at 1 second; a non-2xx status after retries
//! is a transport error.

use std::collections::HashMap;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gateway::{Backend, BackendKind, Capabilities, Continuation, TokenScore};
use crate::prompt::RewritePrompt;

pub const TARGET_API_KEY_ENV: &str = "AUDIT_TARGET_API_KEY";
pub const AUX_API_KEY_ENV: &str = "AUDIT_AUX_API_KEY";

const RETRY_ATTEMPTS: u32 = 3;
const BACKOFF_START: Duration = Duration::from_secs(1);
const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

fn client() -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(REQUEST_TIMEOUT)
        .build()
        .map_err(|e| Error::Transport {
            attempts: 0,
            message: e.to_string(),
        })
}

fn api_key(env_var: &str) -> Result<String> {
    std::env::var(env_var).map_err(|_| {
        Error::Config(format!(
            "missing API key: set the {env_var} environment variable"
        ))
    })
}

fn post_with_retries(
    client: &reqwest::blocking::Client,
    url: &str,
    bearer: &str,
    body: &serde_json::Value,
    backoff_start: Duration,
) -> Result<serde_json::Value> {
    let mut delay = backoff_start;
    let mut last_error = String::new();
    for attempt in 1..=RETRY_ATTEMPTS {
        let response = client
            .post(url)
            .bearer_auth(bearer)
            .json(body)
            .send();
        match response {
            Ok(resp) if resp.status().is_success() => {
                return resp.json().map_err(|e| Error::Transport {
                    attempts: attempt,
                    message: format!("invalid JSON response: {e}"),
                });
            }
            Ok(resp) => {
                let status = resp.status();
                let text = resp.text().unwrap_or_default();
                last_error = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
            }
            Err(e) => last_error = e.to_string(),
        }
        if attempt < RETRY_ATTEMPTS {
            std::thread::sleep(delay);
            delay *= 2;
        }
    }
    Err(Error::Transport {
        attempts: RETRY_ATTEMPTS,
        message: last_error,
    })
}

// --- completions endpoint (target model) ---

#[derive(Debug, Deserialize)]
struct CompletionsResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Debug, Deserialize)]
struct CompletionChoice {
    #[serde(default)]
    text: String,
    logprobs: Option<LogprobsPayload>,
}

#[derive(Debug, Deserialize)]
struct LogprobsPayload {
    #[serde(default)]
    tokens: Vec<String>,
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    top_logprobs: Vec<Option<HashMap<String, f64>>>,
    #[serde(default)]
    text_offset: Vec<usize>,
}

/// Target model behind `POST {base_url}/v1/completions` with
/// `echo=true`-style token logprobs. Min-K++ is unavailable here: public
/// APIs expose only top-k alternatives, never full-vocabulary statistics.
pub struct HttpTargetBackend {
    base_url: String,
    model: String,
    model_id: String,
    api_key: String,
    logprobs_k: u32,
    client: reqwest::blocking::Client,
    backoff_start: Duration,
}

impl HttpTargetBackend {
    pub fn new(base_url: &str, model: &str, logprobs_k: u32) -> Result<Self> {
        Self::with_key(base_url, model, logprobs_k, api_key(TARGET_API_KEY_ENV)?)
    }

    pub fn with_key(base_url: &str, model: &str, logprobs_k: u32, api_key: String) -> Result<Self> {
        Ok(HttpTargetBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            model_id: format!("http:{model}"),
            api_key,
            logprobs_k: logprobs_k.clamp(1, 20),
            client: client()?,
            backoff_start: BACKOFF_START,
        })
    }

    #[cfg(test)]
    pub(crate) fn with_fast_backoff(mut self) -> Self {
        self.backoff_start = Duration::from_millis(1);
        self
    }

    fn completions(&self, body: serde_json::Value) -> Result<CompletionsResponse> {
        let url = format!("{}/v1/completions", self.base_url);
        let value = post_with_retries(&self.client, &url, &self.api_key, &body, self.backoff_start)?;
        serde_json::from_value(value).map_err(|e| Error::Transport {
            attempts: RETRY_ATTEMPTS,
            message: format!("unexpected completions payload: {e}"),
        })
    }
}

fn sorted_alternatives(top: &HashMap<String, f64>) -> Vec<(String, f64)> {
    let mut alts: Vec<(String, f64)> = top
        .iter()
        .map(|(t, lp)| (t.clone(), lp.exp()))
        .collect();
    alts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    alts
}

impl Backend for HttpTargetBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::HttpTarget
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            token_logprobs: true,
            full_vocab_stats: false,
            continuation: true,
            rewrite: false,
        }
    }

    fn score_tokens(&self, text: &str, prefix: Option<&str>) -> Result<Vec<TokenScore>> {
        let prefix = prefix.unwrap_or("");
        let prompt = format!("{prefix}{text}");
        let response = self.completions(json!({
            "model": self.model,
            "prompt": prompt,
            "max_tokens": 0,
            "temperature": 0,
            "logprobs": self.logprobs_k,
            "echo": true,
        }))?;
        let choice = response.choices.into_iter().next().ok_or(Error::Transport {
            attempts: RETRY_ATTEMPTS,
            message: "completions response had no choices".into(),
        })?;
        let lp = choice.logprobs.ok_or(Error::Transport {
            attempts: RETRY_ATTEMPTS,
            message: "completions response carried no logprobs".into(),
        })?;

        let boundary = prefix.len();
        let mut scores = Vec::new();
        for (i, token) in lp.tokens.iter().enumerate() {
            let offset = lp.text_offset.get(i).copied().unwrap_or(0);
            if offset < boundary {
                continue;
            }
            match lp.token_logprobs.get(i).copied().flatten() {
                Some(logprob) => scores.push(TokenScore {
                    token: token.clone(),
                    logprob: logprob.min(0.0),
                    top_alternatives: lp
                        .top_logprobs
                        .get(i)
                        .and_then(|t| t.as_ref())
                        .map(sorted_alternatives),
                }),
                // APIs report null for the very first prompt token.
                None if i == 0 => {
                    log::warn!("skipping leading token without a logprob");
                }
                None => {
                    return Err(Error::Transport {
                        attempts: RETRY_ATTEMPTS,
                        message: format!("null logprob at token index {i}"),
                    })
                }
            }
        }
        if scores.is_empty() {
            return Err(Error::Validation(
                "tokenization produced zero scored tokens".into(),
            ));
        }
        Ok(scores)
    }

    fn generate(&self, prefix: &str, max_tokens: usize) -> Result<Continuation> {
        let response = self.completions(json!({
            "model": self.model,
            "prompt": prefix,
            "max_tokens": max_tokens,
            "temperature": 0,
            "logprobs": self.logprobs_k,
            "echo": false,
        }))?;
        let choice = response.choices.into_iter().next().ok_or(Error::Transport {
            attempts: RETRY_ATTEMPTS,
            message: "completions response had no choices".into(),
        })?;
        let mut step_max_probs = Vec::new();
        if let Some(lp) = &choice.logprobs {
            for (i, maybe_top) in lp.top_logprobs.iter().enumerate() {
                let max_lp = maybe_top
                    .as_ref()
                    .and_then(|top| {
                        top.values()
                            .copied()
                            .max_by(|a, b| a.partial_cmp(b).unwrap())
                    })
                    .or_else(|| lp.token_logprobs.get(i).copied().flatten());
                match max_lp {
                    Some(v) => step_max_probs.push(v.exp().clamp(f64::MIN_POSITIVE, 1.0)),
                    None => {
                        return Err(Error::Transport {
                            attempts: RETRY_ATTEMPTS,
                            message: format!("missing step logprob at index {i}"),
                        })
                    }
                }
            }
        }
        Ok(Continuation {
            text: choice.text,
            step_max_probs,
        })
    }

    fn rewrite(&self, _: &RewritePrompt, _: &str) -> Result<String> {
        Err(Error::MissingCapability {
            model_id: self.model_id.clone(),
            capability: "rewrite",
            operation: "rewrite",
        })
    }

    fn instruct(&self, _: &str, _: &[String]) -> Result<String> {
        Err(Error::MissingCapability {
            model_id: self.model_id.clone(),
            capability: "rewrite",
            operation: "instruct",
        })
    }
}

// --- chat endpoint (auxiliary model) ---

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: String,
}

/// Auxiliary model behind `POST {base_url}/v1/chat/completions`, queried
/// with a single user message at temperature 0.
pub struct HttpAuxBackend {
    base_url: String,
    model: String,
    model_id: String,
    api_key: String,
    client: reqwest::blocking::Client,
    backoff_start: Duration,
}

impl HttpAuxBackend {
    pub fn new(base_url: &str, model: &str) -> Result<Self> {
        Self::with_key(base_url, model, api_key(AUX_API_KEY_ENV)?)
    }

    pub fn with_key(base_url: &str, model: &str, api_key: String) -> Result<Self> {
        Ok(HttpAuxBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            model_id: format!("http:{model}"),
            api_key,
            client: client()?,
            backoff_start: BACKOFF_START,
        })
    }

    #[cfg(test)]
    pub(crate) fn with_fast_backoff(mut self) -> Self {
        self.backoff_start = Duration::from_millis(1);
        self
    }

    fn chat(&self, content: String) -> Result<String> {
        let url = format!("{}/v1/chat/completions", self.base_url);
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        });
        let value = post_with_retries(&self.client, &url, &self.api_key, &body, self.backoff_start)?;
        let response: ChatResponse = serde_json::from_value(value).map_err(|e| Error::Transport {
            attempts: RETRY_ATTEMPTS,
            message: format!("unexpected chat payload: {e}"),
        })?;
        response
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or(Error::Transport {
                attempts: RETRY_ATTEMPTS,
                message: "chat response had no choices".into(),
            })
    }
}

impl Backend for HttpAuxBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::HttpAuxiliary
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            rewrite: true,
            ..Default::default()
        }
    }

    fn score_tokens(&self, _: &str, _: Option<&str>) -> Result<Vec<TokenScore>> {
        Err(Error::MissingCapability {
            model_id: self.model_id.clone(),
            capability: "token-logprobs",
            operation: "score_tokens",
        })
    }

    fn generate(&self, _: &str, _: usize) -> Result<Continuation> {
        Err(Error::MissingCapability {
            model_id: self.model_id.clone(),
            capability: "continuation",
            operation: "generate_continuation",
        })
    }

    fn rewrite(&self, prompt: &RewritePrompt, text: &str) -> Result<String> {
        self.chat(format!("{}\n\n{text}", prompt.text))
    }

    fn instruct(&self, instruction: &str, materials: &[String]) -> Result<String> {
        let mut content = instruction.to_string();
        for material in materials {
            content.push_str("\n\n---\n\n");
            content.push_str(material);
        }
        self.chat(content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    // Minimal canned-response HTTP server; each entry is (status line,
    // body). Returns the bound URL and a handle joining captured requests.
    fn serve(
        responses: Vec<(&'static str, String)>,
    ) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut captured = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = vec![0u8; 65536];
                let mut request = String::new();
                loop {
                    let n = stream.read(&mut buf).unwrap();
                    request.push_str(&String::from_utf8_lossy(&buf[..n]));
                    if let Some(header_end) = request.find("\r\n\r\n") {
                        let content_length = request
                            .lines()
                            .find_map(|l| l.to_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if request.len() >= header_end + 4 + content_length {
                            break;
                        }
                    }
                }
                captured.push(request);
                let reply = format!(
                    "{status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
            captured
        });
        (format!("http://{addr}"), handle)
    }

    fn completions_body() -> String {
        serde_json::json!({
            "choices": [{
                "text": "",
                "logprobs": {
                    "tokens": ["pre", "fix", "Hello", " world"],
                    "token_logprobs": [null, -0.5, -1.0, -2.0],
                    "top_logprobs": [
                        null,
                        {"fix": -0.5},
                        {"Hello": -1.0, "Howdy": -2.3},
                        {" world": -2.0, " earth": -2.5}
                    ],
                    "text_offset": [0, 3, 6, 11]
                }
            }]
        })
        .to_string()
    }

    #[test]
    fn score_tokens_selects_text_range_and_sorts_alternatives() {
        let (url, server) = serve(vec![("HTTP/1.1 200 OK", completions_body())]);
        let backend = HttpTargetBackend::with_key(&url, "test-model", 5, "key".into()).unwrap();
        // prefix "prefix" is 6 bytes: tokens at offsets 6 and 11 are text tokens.
        let scores = backend.score_tokens("Hello world", Some("prefix")).unwrap();
        assert_eq!(scores.len(), 2);
        assert_eq!(scores[0].token, "Hello");
        assert_eq!(scores[0].logprob, -1.0);
        let alts = scores[0].top_alternatives.as_ref().unwrap();
        assert!(alts.windows(2).all(|w| w[0].1 >= w[1].1));
        let requests = server.join().unwrap();
        assert!(requests[0].contains("authorization: Bearer key")
            || requests[0].contains("Authorization: Bearer key"));
        assert!(requests[0].contains("\"echo\":true"));
        assert!(requests[0].contains("\"temperature\":0"));
    }

    #[test]
    fn generation_reads_step_max_probs() {
        let body = serde_json::json!({
            "choices": [{
                "text": " continued text",
                "logprobs": {
                    "tokens": [" continued", " text"],
                    "token_logprobs": [-0.1, -0.7],
                    "top_logprobs": [
                        {" continued": -0.1, " other": -3.0},
                        {" best": -0.2, " text": -0.7}
                    ],
                    "text_offset": [10, 20]
                }
            }]
        })
        .to_string();
        let (url, server) = serve(vec![("HTTP/1.1 200 OK", body)]);
        let backend = HttpTargetBackend::with_key(&url, "test-model", 5, "key".into()).unwrap();
        let cont = backend.generate("some prefix", 2).unwrap();
        assert_eq!(cont.text, " continued text");
        assert_eq!(cont.step_max_probs.len(), 2);
        assert!((cont.step_max_probs[0] - (-0.1f64).exp()).abs() < 1e-12);
        // Step 2's max comes from the alternatives, not the chosen token.
        assert!((cont.step_max_probs[1] - (-0.2f64).exp()).abs() < 1e-12);
        server.join().unwrap();
    }

    #[test]
    fn retries_then_succeeds() {
        let (url, server) = serve(vec![
            ("HTTP/1.1 500 Internal Server Error", "{}".into()),
            ("HTTP/1.1 503 Service Unavailable", "{}".into()),
            ("HTTP/1.1 200 OK", completions_body()),
        ]);
        let backend = HttpTargetBackend::with_key(&url, "m", 5, "key".into())
            .unwrap()
            .with_fast_backoff();
        let scores = backend.score_tokens("Hello world", Some("prefix")).unwrap();
        assert_eq!(scores.len(), 2);
        assert_eq!(server.join().unwrap().len(), 3);
    }

    #[test]
    fn non_2xx_after_retries_is_transport_error() {
        let (url, server) = serve(vec![
            ("HTTP/1.1 500 Internal Server Error", "{}".into()),
            ("HTTP/1.1 500 Internal Server Error", "{}".into()),
            ("HTTP/1.1 500 Internal Server Error", "{}".into()),
        ]);
        let backend = HttpAuxBackend::with_key(&url, "m", "key".into())
            .unwrap()
            .with_fast_backoff();
        let prompt = RewritePrompt::standard("p", None);
        match backend.rewrite(&prompt, "text") {
            Err(Error::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected transport error, got {other:?}"),
        }
        server.join().unwrap();
    }

    #[test]
    fn chat_rewrite_concatenates_prompt_and_text() {
        let body = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": "rewritten"}}]
        })
        .to_string();
        let (url, server) = serve(vec![("HTTP/1.1 200 OK", body)]);
        let backend = HttpAuxBackend::with_key(&url, "m", "key".into()).unwrap();
        let prompt = RewritePrompt::standard("Rewrite it.", None);
        let out = backend.rewrite(&prompt, "the text").unwrap();
        assert_eq!(out, "rewritten");
        let requests = server.join().unwrap();
        assert!(requests[0].contains("Rewrite it.\\n\\nthe text"));
    }
}
