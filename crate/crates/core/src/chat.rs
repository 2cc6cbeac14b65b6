//! Blocking client for OpenAI-compatible chat-completions endpoints.
//!
//! Used by the remote core-agent driver and the remote annotators.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatConfig {
    /// Base URL, e.g. `https://api.openai.com/v1`. `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout_secs: u64,
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    /// Environment variable holding the bearer token. Unset means no auth header.
    pub api_key_env: Option<String>,
}

impl Default for ChatConfig {
    fn default() -> Self {
        ChatConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo-0613".into(),
            max_tokens: 256,
            temperature: 0.0,
            timeout_secs: 60,
            max_retries: 3,
            initial_backoff_ms: 500,
            api_key_env: Some("OPENAI_API_KEY".into()),
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct Response {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ChatClient {
    config: ChatConfig,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(config: ChatConfig) -> Self {
        let agent_cfg = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build();
        ChatClient {
            config,
            agent: ureq::Agent::new_with_config(agent_cfg),
        }
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, system: Option<&str>, user: &str) -> Result<String, ChatError> {
        let mut messages = Vec::with_capacity(2);
        if let Some(s) = system {
            messages.push(WireMessage {
                role: "system",
                content: s,
            });
        }
        messages.push(WireMessage {
            role: "user",
            content: user,
        });
        let body = Request {
            model: &self.config.model,
            messages,
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
        };
        let mut req = self.agent.post(&self.url());
        if let Some(var) = &self.config.api_key_env {
            if let Ok(token) = std::env::var(var) {
                req = req.header("Authorization", format!("Bearer {token}"));
            }
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ChatError::Status { status, body: text });
        }
        let parsed: Response =
            serde_json::from_str(&text).map_err(|e| ChatError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ChatError::Malformed("no choices".into()))
    }

    /// One chat completion with exponential backoff on transport errors,
    /// 429 and 5xx. Other statuses fail immediately.
    pub fn complete(&self, system: Option<&str>, user: &str) -> Result<String, ChatError> {
        let mut delay = self.config.initial_backoff_ms;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(system, user) {
                Ok(s) => return Ok(s),
                Err(e) => {
                    let retryable = match &e {
                        ChatError::Status { status, .. } => *status == 429 || *status >= 500,
                        ChatError::Transport(_) => true,
                        _ => false,
                    };
                    if !retryable {
                        return Err(e);
                    }
                    if attempts > self.config.max_retries {
                        return Err(ChatError::Exhausted {
                            attempts,
                            last: e.to_string(),
                        });
                    }
                    log::debug!("chat attempt {attempts} failed: {e}; retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = (delay * 2).min(8_000);
                }
            }
        }
    }
}

/// Minimal canned-response HTTP server for tests.
#[doc(hidden)]
pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};
    use std::thread::JoinHandle;

    /// Serves `responses` in order (status, body), one per connection, then exits.
    /// Request bodies are recorded.
    pub struct StubServer {
        pub base_url: String,
        pub requests: Arc<Mutex<Vec<String>>>,
        handle: Option<JoinHandle<()>>,
    }

    impl StubServer {
        pub fn start(responses: Vec<(u16, String)>) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
            let addr = listener.local_addr().unwrap();
            let requests = Arc::new(Mutex::new(Vec::new()));
            let seen = requests.clone();
            let handle = std::thread::spawn(move || {
                for (status, body) in responses {
                    let Ok((stream, _)) = listener.accept() else { return };
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut len = 0usize;
                    loop {
                        let mut line = String::new();
                        if reader.read_line(&mut line).unwrap_or(0) == 0 {
                            break;
                        }
                        let l = line.trim_end();
                        if l.is_empty() {
                            break;
                        }
                        if let Some(v) = l.to_ascii_lowercase().strip_prefix("content-length:") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                    let mut buf = vec![0u8; len];
                    let _ = reader.read_exact(&mut buf);
                    seen.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                    let mut out = stream;
                    let _ = write!(
                        out,
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                    let _ = out.flush();
                }
            });
            StubServer {
                base_url: format!("http://{addr}"),
                requests,
                handle: Some(handle),
            }
        }

        /// Chat-completions body whose single choice has `content`.
        pub fn chat_body(content: &str) -> String {
            serde_json::json!({
                "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]
            })
            .to_string()
        }

        pub fn join(mut self) {
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }
}
