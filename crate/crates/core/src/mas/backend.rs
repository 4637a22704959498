//! Agent backends: the trait, a fixture-driven scripted mock, and a blocking
//! HTTP chat-completion client.
//!
//! The HTTP wire format is provider-generic: request `{model, messages:
//! [{role: "user", content}]}`, response `choices[0].message.content` with an
//! optional `usage` object. Transport failures and 429/5xx responses retry
//! with exponential backoff; other HTTP errors fail immediately.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AgentRole;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub content: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("http status {status}: {message}")]
    Http { status: u16, message: String },
    #[error("malformed response: {message}")]
    MalformedResponse { message: String },
    #[error("scripted {role} backend ran out of replies")]
    ScriptExhausted { role: AgentRole },
}

/// A stateless agent. Implementations must be shareable across threads: the
/// orchestrator invokes the two judges concurrently and processes several
/// queries in parallel.
pub trait AgentBackend: Send + Sync {
    fn role(&self) -> AgentRole;
    fn invoke(&self, prompt: &str) -> Result<AgentReply, BackendError>;
}

/// Whitespace word count; stands in for tokenizer counts where none exist.
pub fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Fixture-driven backend for tests: replays a reply sequence, then falls
/// back to a constant reply if one was given. Latency is reported as zero so
/// repeated runs produce byte-identical artifacts.
pub struct ScriptedBackend {
    role: AgentRole,
    queue: Mutex<VecDeque<String>>,
    fallback: Option<String>,
}

impl ScriptedBackend {
    /// Always replies with the same content.
    pub fn constant(role: AgentRole, content: &str) -> Self {
        ScriptedBackend {
            role,
            queue: Mutex::new(VecDeque::new()),
            fallback: Some(content.to_string()),
        }
    }

    /// Replies with each element once, erroring when exhausted.
    pub fn sequence(role: AgentRole, contents: Vec<String>) -> Self {
        ScriptedBackend {
            role,
            queue: Mutex::new(contents.into()),
            fallback: None,
        }
    }
}

impl AgentBackend for ScriptedBackend {
    fn role(&self) -> AgentRole {
        self.role
    }

    fn invoke(&self, prompt: &str) -> Result<AgentReply, BackendError> {
        let next = self.queue.lock().expect("queue lock").pop_front();
        let content = match next.or_else(|| self.fallback.clone()) {
            Some(content) => content,
            None => return Err(BackendError::ScriptExhausted { role: self.role }),
        };
        Ok(AgentReply {
            usage: TokenUsage {
                prompt_tokens: approx_tokens(prompt),
                completion_tokens: approx_tokens(&content),
            },
            content,
            latency_ms: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpChatConfig {
    pub endpoint: String,
    pub model: String,
    /// Bearer credential, typically resolved from an environment variable by
    /// the caller. Never logged.
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    pub timeout_s: u64,
}

impl HttpChatConfig {
    pub fn new(endpoint: &str, model: &str) -> Self {
        HttpChatConfig {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: None,
            retry: RetryPolicy::default(),
            timeout_s: 60,
        }
    }
}

pub struct HttpChatBackend {
    role: AgentRole,
    config: HttpChatConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

enum AttemptError {
    Transport(String),
    HttpRetryable(u16, String),
}

impl HttpChatBackend {
    pub fn new(role: AgentRole, config: HttpChatConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .expect("http client builds");
        HttpChatBackend {
            role,
            config,
            client,
        }
    }

    fn send_once(&self, prompt: &str) -> Result<(String, TokenUsage), Result<BackendError, AttemptError>> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
        };
        let mut request = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| Err(AttemptError::Transport(e.to_string())))?;
        let status = response.status().as_u16();
        let text = response
            .text()
            .map_err(|e| Err(AttemptError::Transport(e.to_string())))?;
        if status == 429 || status >= 500 {
            return Err(Err(AttemptError::HttpRetryable(status, truncate(&text))));
        }
        if status >= 400 {
            return Err(Ok(BackendError::Http {
                status,
                message: truncate(&text),
            }));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| {
            Ok(BackendError::MalformedResponse {
                message: format!("{e} in body {}", truncate(&text)),
            })
        })?;
        let content = parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or(Ok(BackendError::MalformedResponse {
                message: "response has no choices".to_string(),
            }))?;
        let usage = TokenUsage {
            prompt_tokens: parsed
                .usage
                .as_ref()
                .and_then(|u| u.prompt_tokens)
                .unwrap_or_else(|| approx_tokens(prompt)),
            completion_tokens: parsed
                .usage
                .as_ref()
                .and_then(|u| u.completion_tokens)
                .unwrap_or_else(|| approx_tokens(&content)),
        };
        Ok((content, usage))
    }
}

fn truncate(text: &str) -> String {
    const LIMIT: usize = 200;
    if text.len() <= LIMIT {
        text.to_string()
    } else {
        let mut end = LIMIT;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &text[..end])
    }
}

impl AgentBackend for HttpChatBackend {
    fn role(&self) -> AgentRole {
        self.role
    }

    fn invoke(&self, prompt: &str) -> Result<AgentReply, BackendError> {
        let started = Instant::now();
        let mut last_retryable = None;
        for attempt in 0..=self.config.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.config.retry.base_delay_ms << (attempt - 1),
                ));
            }
            match self.send_once(prompt) {
                Ok((content, usage)) => {
                    return Ok(AgentReply {
                        content,
                        usage,
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Err(Ok(fatal)) => return Err(fatal),
                Err(Err(retryable)) => last_retryable = Some(retryable),
            }
        }
        Err(match last_retryable.expect("at least one attempt ran") {
            AttemptError::Transport(message) => BackendError::Transport {
                attempts: self.config.retry.max_retries + 1,
                message,
            },
            AttemptError::HttpRetryable(status, message) => {
                BackendError::Http { status, message }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{SocketAddr, TcpListener, TcpStream};

    fn read_request(stream: &mut TcpStream) {
        let mut reader = BufReader::new(stream);
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some(value) = line.to_lowercase().strip_prefix("content-length:") {
                content_length = value.trim().parse().unwrap();
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body).unwrap();
    }

    /// One-shot HTTP server answering each connection with the next canned
    /// (status, body) pair; returns how many connections it served.
    fn spawn_server(responses: Vec<(u16, String)>) -> (SocketAddr, std::thread::JoinHandle<usize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut served = 0;
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                read_request(&mut stream);
                let reason = if status == 200 { "OK" } else { "Error" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
                served += 1;
            }
            served
        });
        (addr, handle)
    }

    fn fast_config(addr: SocketAddr) -> HttpChatConfig {
        let mut config = HttpChatConfig::new(&format!("http://{addr}/v1/chat"), "test-model");
        config.retry.base_delay_ms = 1;
        config
    }

    fn good_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"content": content}}],
            "usage": {"prompt_tokens": 5, "completion_tokens": 2}
        })
        .to_string()
    }

    #[test]
    fn http_backend_parses_first_choice() {
        let (addr, server) = spawn_server(vec![(200, good_body("No errors."))]);
        let backend = HttpChatBackend::new(AgentRole::Judge, fast_config(addr));
        let reply = backend.invoke("judge this").unwrap();
        assert_eq!(reply.content, "No errors.");
        assert_eq!(reply.usage.prompt_tokens, 5);
        assert_eq!(reply.usage.completion_tokens, 2);
        assert_eq!(server.join().unwrap(), 1);
    }

    #[test]
    fn http_backend_retries_on_5xx() {
        let (addr, server) = spawn_server(vec![
            (500, "{}".to_string()),
            (200, good_body("recovered")),
        ]);
        let backend = HttpChatBackend::new(AgentRole::Reasoner, fast_config(addr));
        let reply = backend.invoke("plan this").unwrap();
        assert_eq!(reply.content, "recovered");
        assert_eq!(server.join().unwrap(), 2);
    }

    #[test]
    fn http_backend_fails_fast_on_4xx() {
        let (addr, server) = spawn_server(vec![(400, "{\"error\":\"bad request\"}".to_string())]);
        let backend = HttpChatBackend::new(AgentRole::Reasoner, fast_config(addr));
        match backend.invoke("plan this") {
            Err(BackendError::Http { status: 400, .. }) => {}
            other => panic!("expected fatal 400, got {other:?}"),
        }
        assert_eq!(server.join().unwrap(), 1);
    }

    #[test]
    fn http_backend_gives_up_after_retries() {
        let responses = vec![(503, "{}".to_string()); 4];
        let (addr, server) = spawn_server(responses);
        let backend = HttpChatBackend::new(AgentRole::Reasoner, fast_config(addr));
        match backend.invoke("plan this") {
            Err(BackendError::Http { status: 503, .. }) => {}
            other => panic!("expected exhausted retries, got {other:?}"),
        }
        assert_eq!(server.join().unwrap(), 4, "initial try plus three retries");
    }

    #[test]
    fn missing_usage_falls_back_to_word_counts() {
        let body = serde_json::json!({
            "choices": [{"message": {"content": "three word reply"}}]
        })
        .to_string();
        let (addr, _server) = spawn_server(vec![(200, body)]);
        let backend = HttpChatBackend::new(AgentRole::Reasoner, fast_config(addr));
        let reply = backend.invoke("four words of prompt").unwrap();
        assert_eq!(reply.usage.prompt_tokens, 4);
        assert_eq!(reply.usage.completion_tokens, 3);
    }

    #[test]
    fn scripted_backend_sequences_then_exhausts() {
        let backend = ScriptedBackend::sequence(
            AgentRole::Judge,
            vec!["first".to_string(), "second".to_string()],
        );
        assert_eq!(backend.invoke("p").unwrap().content, "first");
        assert_eq!(backend.invoke("p").unwrap().content, "second");
        assert!(matches!(
            backend.invoke("p"),
            Err(BackendError::ScriptExhausted { .. })
        ));
    }

    #[test]
    fn scripted_backend_reports_zero_latency() {
        let backend = ScriptedBackend::constant(AgentRole::Reasoner, "fixed");
        let reply = backend.invoke("a b c").unwrap();
        assert_eq!(reply.latency_ms, 0);
        assert_eq!(reply.usage.prompt_tokens, 3);
    }
}
