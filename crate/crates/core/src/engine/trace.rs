//! Event log of one run, serialized one JSON record per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionRule, Role, SignalingScheme};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// One prompt/response round trip with an external agent. The reply is the
/// last message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub messages: Vec<Message>,
    pub analysis: Option<String>,
    pub decision: Option<Vec<f64>>,
}

impl ChatExchange {
    pub fn reply(&self) -> Option<&str> {
        self.messages
            .last()
            .filter(|m| m.role == "assistant")
            .map(|m| m.content.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Start {
        procedure: String,
        task: String,
        seed: u64,
        stop_time: Option<usize>,
        first_proposer: Option<usize>,
    },
    /// The sender commits a scheme to the receiver.
    Commitment { scheme: SignalingScheme },
    /// A scheme the sender uses without disclosing it.
    PrivateScheme { scheme: SignalingScheme },
    /// The receiver announces the scheme it expects, `φ1`.
    Expectation { scheme: SignalingScheme },
    RuleResponse { rule: ActionRule },
    SchemeResponse { scheme: SignalingScheme },
    Offer { theta: f64, shares: [f64; 2] },
    Response { accepted: bool },
    Consensus { reached: bool },
    RoleSwap { proposer: usize },
    Exchange { exchange: ChatExchange },
    ProtocolViolation { reason: String },
    Sample {
        step: usize,
        state: usize,
        signal: usize,
        action: usize,
        rewards: [f64; 2],
    },
    Realization { steps: usize, mean: [f64; 2], std_err: [f64; 2] },
    Outcome(Outcome),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Start { .. } => "start",
            Event::Commitment { .. } => "commitment",
            Event::PrivateScheme { .. } => "private_scheme",
            Event::Expectation { .. } => "expectation",
            Event::RuleResponse { .. } => "rule_response",
            Event::SchemeResponse { .. } => "scheme_response",
            Event::Offer { .. } => "offer",
            Event::Response { .. } => "response",
            Event::Consensus { .. } => "consensus",
            Event::RoleSwap { .. } => "role_swap",
            Event::Exchange { .. } => "exchange",
            Event::ProtocolViolation { .. } => "protocol_violation",
            Event::Sample { .. } => "sample",
            Event::Realization { .. } => "realization",
            Event::Outcome(_) => "outcome",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Bargaining round, 0-based; realization events carry the last round.
    pub timestep: usize,
    pub actor: Option<usize>,
    #[serde(flatten)]
    pub event: Event,
}

/// How a run ended. Payoffs are expected values of the final profile,
/// indexed by agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub consensus_reached: bool,
    /// 1-based round of agreement.
    pub deal_timestep: Option<usize>,
    pub payoffs: [f64; 2],
    pub final_proposer: Option<usize>,
    pub final_proposer_payoff: Option<f64>,
    pub empirical: Option<[f64; 2]>,
    pub roles: Option<[Role; 2]>,
    pub scheme: Option<SignalingScheme>,
    pub rule: Option<ActionRule>,
    pub aborted: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameTrace {
    pub seed: u64,
    pub events: Vec<TraceEvent>,
    pub outcome: Outcome,
}

impl GameTrace {
    pub fn consensus_reached(&self) -> bool {
        self.outcome.consensus_reached
    }

    pub fn deal_timestep(&self) -> Option<usize> {
        self.outcome.deal_timestep
    }

    pub fn exchanges(&self) -> impl Iterator<Item = (Option<usize>, &ChatExchange)> {
        self.events.iter().filter_map(|e| match &e.event {
            Event::Exchange { exchange } => Some((e.actor, exchange)),
            _ => None,
        })
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.event.kind() == kind)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Reads a trace back; the first record must be the start event and the
    /// last the outcome.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut events = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str::<TraceEvent>(&line)?);
        }
        let seed = match events.first().map(|e| &e.event) {
            Some(Event::Start { seed, .. }) => *seed,
            _ => return Err(Error::Parse("trace does not begin with a start event".into())),
        };
        let outcome = match events.last().map(|e| &e.event) {
            Some(Event::Outcome(o)) => o.clone(),
            _ => return Err(Error::Parse("trace does not end with an outcome".into())),
        };
        Ok(GameTrace { seed, events, outcome })
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read_jsonl(text.as_bytes())
    }
}

/// Accumulates events while a procedure runs.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    pub events: Vec<TraceEvent>,
}

impl Recorder {
    pub fn push(&mut self, timestep: usize, actor: Option<usize>, event: Event) {
        self.events.push(TraceEvent { timestep, actor, event });
    }

    pub fn finish(mut self, seed: u64, timestep: usize, outcome: Outcome) -> GameTrace {
        self.push(timestep, None, Event::Outcome(outcome.clone()));
        GameTrace {
            seed,
            events: self.events,
            outcome,
        }
    }
}
