//! Agents backed by a chat-completion model.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::parse::{parse_decision, parse_decision_raw, Decision};
use super::prompt::{build_prompt, build_split_prompt, Turn};
use crate::engine::{Agent, Bargainer, ChatExchange, GameTrace, Message, SplitContext, TurnContext};
use crate::error::{Error, Result};
use crate::model::{ActionRule, PersuasionTask, SignalingScheme, Stochastic};

/// Environment variable holding the API key for the live backend.
pub const API_KEY_ENV: &str = "INFOBARGAIN_API_KEY";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: Option<f64>,
    pub messages: Vec<Message>,
}

pub trait ChatBackend: Send {
    fn complete(&mut self, request: &ChatRequest) -> Result<String>;
}

/// Replies from a fixed script; `Err` entries simulate transport failures.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: VecDeque<std::result::Result<String, String>>,
    pub requests: Vec<ChatRequest>,
}

impl MockBackend {
    pub fn new(script: impl IntoIterator<Item = std::result::Result<String, String>>) -> Self {
        MockBackend {
            script: script.into_iter().collect(),
            requests: Vec::new(),
        }
    }

    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(|r| Ok(r.into())))
    }
}

impl ChatBackend for MockBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<String> {
        self.requests.push(request.clone());
        match self.script.pop_front() {
            Some(Ok(reply)) => Ok(reply),
            Some(Err(e)) => Err(Error::Transport(e)),
            None => Err(Error::Transport("mock script exhausted".into())),
        }
    }
}

/// Replays the replies logged in an earlier trace. In strict mode each
/// request must match the logged prompt exactly.
#[derive(Debug)]
pub struct ReplayBackend {
    log: VecDeque<(Vec<Message>, String)>,
    strict: bool,
}

impl ReplayBackend {
    /// Exchanges of `agent` in the trace, in order.
    pub fn from_trace(trace: &GameTrace, agent: usize, strict: bool) -> Self {
        let log = trace
            .exchanges()
            .filter(|(actor, _)| *actor == Some(agent))
            .filter_map(|(_, ex)| {
                let reply = ex.reply()?.to_string();
                Some((ex.messages[..ex.messages.len() - 1].to_vec(), reply))
            })
            .collect();
        ReplayBackend { log, strict }
    }

    pub fn from_exchanges(exchanges: &[ChatExchange], strict: bool) -> Self {
        let log = exchanges
            .iter()
            .filter_map(|ex| Some((ex.messages[..ex.messages.len() - 1].to_vec(), ex.reply()?.to_string())))
            .collect();
        ReplayBackend { log, strict }
    }

    pub fn remaining(&self) -> usize {
        self.log.len()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<String> {
        let (prompt, reply) = self
            .log
            .pop_front()
            .ok_or_else(|| Error::Transport("replay log exhausted".into()))?;
        if self.strict && prompt != request.messages {
            return Err(Error::Protocol {
                agent: None,
                reason: "request differs from the logged prompt".into(),
            });
        }
        Ok(reply)
    }
}

/// Minimum spacing between requests, shared by every backend holding it.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_second(requests: f64) -> Arc<Self> {
        Arc::new(RateLimiter {
            interval: Duration::from_secs_f64(1.0 / requests.max(1e-9)),
            next: Mutex::new(Instant::now()),
        })
    }

    pub fn wait(&self) {
        let slot = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            timeout_secs: 120,
        }
    }
}

/// OpenAI-style chat completions over HTTP.
pub struct HttpBackend {
    config: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    limiter: Option<Arc<RateLimiter>>,
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        HttpBackend {
            config,
            agent,
            api_key: std::env::var(API_KEY_ENV).ok(),
            limiter: None,
        }
    }

    pub fn with_rate_limit(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&mut self, request: &ChatRequest) -> Result<String> {
        if let Some(l) = &self.limiter {
            l.wait();
        }
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut body = json!({ "model": request.model, "messages": request.messages });
        if let Some(t) = request.temperature {
            body["temperature"] = json!(t);
        }
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = req.send_json(body).map_err(|e| Error::Transport(e.to_string()))?;
        let v: serde_json::Value = resp.into_json().map_err(|e| Error::Transport(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Transport(format!("response without message content: {v}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Extra attempts after a transport failure.
    pub transport_retries: usize,
    /// Extra attempts after an unusable reply.
    pub reprompts: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            transport_retries: 2,
            reprompts: 2,
        }
    }
}

pub struct LlmAgent {
    backend: Box<dyn ChatBackend>,
    pub model: String,
    pub temperature: Option<f64>,
    pub retry: RetryPolicy,
    exchanges: Vec<ChatExchange>,
}

pub fn llm_agent(backend: Box<dyn ChatBackend>, model: impl Into<String>, temperature: Option<f64>, retry: RetryPolicy) -> LlmAgent {
    LlmAgent {
        backend,
        model: model.into(),
        temperature,
        retry,
        exchanges: Vec::new(),
    }
}

fn scheme_from_decision(task: &PersuasionTask, d: &[f64]) -> Result<SignalingScheme> {
    if task.is_binary() {
        SignalingScheme::binary(d[0], d[1])
    } else {
        Ok(SignalingScheme(Stochastic::from_flat(task.n_states(), task.n_actions(), d)?))
    }
}

fn rule_from_decision(task: &PersuasionTask, d: &[f64]) -> Result<ActionRule> {
    if task.is_binary() {
        ActionRule::binary(d[0], d[1])
    } else {
        Ok(ActionRule(Stochastic::from_flat(task.n_actions(), task.n_actions(), d)?))
    }
}

impl LlmAgent {
    fn send(&mut self, messages: &[Message]) -> Result<String> {
        let request = ChatRequest {
            model: self.model.clone(),
            temperature: self.temperature,
            messages: messages.to_vec(),
        };
        let mut last = None;
        for attempt in 0..=self.retry.transport_retries {
            match self.backend.complete(&request) {
                Ok(reply) => return Ok(reply),
                Err(e @ Error::Transport(_)) => {
                    log::warn!("chat request failed (attempt {}): {e}", attempt + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Prompts until `convert` accepts the parsed reply or re-prompts run out.
    /// Each round trip is logged as an exchange.
    fn decide<T>(
        &mut self,
        prompt: Vec<Message>,
        parse: impl Fn(&str) -> Result<Decision>,
        convert: impl Fn(&[f64]) -> Result<T>,
    ) -> Result<T> {
        let mut messages = prompt;
        let mut last_err = None;
        for _ in 0..=self.retry.reprompts {
            let reply = self.send(&messages)?;
            let mut logged = messages.clone();
            logged.push(Message::assistant(reply.clone()));
            let outcome = parse(&reply).and_then(|d| convert(&d.decision).map(|v| (v, d)));
            match outcome {
                Ok((value, d)) => {
                    self.exchanges.push(ChatExchange {
                        messages: logged,
                        analysis: Some(d.analysis),
                        decision: Some(d.decision),
                    });
                    return Ok(value);
                }
                Err(e) => {
                    self.exchanges.push(ChatExchange {
                        messages: logged.clone(),
                        analysis: None,
                        decision: None,
                    });
                    messages = logged;
                    messages.push(Message::user(format!(
                        "Your reply could not be used: {e}. Please STRICTLY adhere to the JSON templates when outputting."
                    )));
                    last_err = Some(e);
                }
            }
        }
        Err(Error::Protocol {
            agent: None,
            reason: format!("no usable decision: {}", last_err.expect("at least one attempt")),
        })
    }

    fn arity(task: &PersuasionTask, rows: usize) -> usize {
        if task.is_binary() {
            2
        } else {
            rows * task.n_actions()
        }
    }
}

impl Agent for LlmAgent {
    fn propose_scheme(&mut self, ctx: &TurnContext) -> Result<SignalingScheme> {
        let n = Self::arity(ctx.task, ctx.task.n_states());
        self.decide(build_prompt(ctx, Turn::Propose), |t| parse_decision(t, n), |d| scheme_from_decision(ctx.task, d))
    }

    fn propose_expectation(&mut self, ctx: &TurnContext) -> Result<SignalingScheme> {
        self.propose_scheme(ctx)
    }

    fn respond_rule(&mut self, ctx: &TurnContext, scheme: Option<&SignalingScheme>) -> Result<ActionRule> {
        let n = Self::arity(ctx.task, ctx.task.n_actions());
        self.decide(
            build_prompt(ctx, Turn::RespondToScheme(scheme)),
            |t| parse_decision(t, n),
            |d| rule_from_decision(ctx.task, d),
        )
    }

    fn respond_scheme(&mut self, ctx: &TurnContext, expectation: &SignalingScheme) -> Result<SignalingScheme> {
        let n = Self::arity(ctx.task, ctx.task.n_states());
        self.decide(
            build_prompt(ctx, Turn::RespondToExpectation(expectation)),
            |t| parse_decision(t, n),
            |d| scheme_from_decision(ctx.task, d),
        )
    }

    fn take_exchanges(&mut self) -> Vec<ChatExchange> {
        std::mem::take(&mut self.exchanges)
    }
}

fn single(d: &[f64]) -> Result<f64> {
    match d {
        [x] => Ok(*x),
        _ => Err(Error::Arity {
            expected: 1,
            found: d.len(),
        }),
    }
}

impl Bargainer for LlmAgent {
    fn propose_split(&mut self, ctx: &SplitContext) -> Result<f64> {
        let game = ctx.game;
        self.decide(build_split_prompt(ctx, None), parse_decision_raw, |d| {
            let x = single(d)?;
            if game.contains(x) {
                Ok(x)
            } else {
                Err(Error::OutOfRange { index: 0, value: x })
            }
        })
    }

    fn respond_split(&mut self, ctx: &SplitContext, theta: f64) -> Result<bool> {
        self.decide(build_split_prompt(ctx, Some(theta)), parse_decision_raw, |d| match single(d)? {
            x if x == 1.0 => Ok(true),
            x if x == 0.0 => Ok(false),
            x => Err(Error::OutOfRange { index: 0, value: x }),
        })
    }

    fn take_exchanges(&mut self) -> Vec<ChatExchange> {
        std::mem::take(&mut self.exchanges)
    }
}
