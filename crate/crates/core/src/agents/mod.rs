//! Scripted equilibrium agents and chat-model agents.

pub mod llm;
pub mod parse;
pub mod prompt;
mod scripted;
mod template;

pub use crate::engine::ChatExchange;
pub use llm::{
    llm_agent, ChatBackend, ChatRequest, EndpointConfig, HttpBackend, LlmAgent, MockBackend, RateLimiter, ReplayBackend,
    RetryPolicy, API_KEY_ENV,
};
pub use parse::{parse_decision, parse_decision_raw, Decision};
pub use prompt::{build_prompt, build_split_prompt, Turn};
pub use scripted::{scripted_agent, AgentRole, ScriptedAgent, ScriptedAgentSpec, Strategy};
