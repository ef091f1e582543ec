//! The tool-routing chat agent.
//!
//! Every turn is routed deterministically to the persona extractor, the
//! community recommender or no tool. A configured remote model only phrases
//! the reply text; tool choice and payload never depend on it.

mod prompt;
mod router;
mod turn;

pub use prompt::{build_prompt, ToolSpec, JSON_INSTRUCTION};
pub use router::{route_message, RouteDecision, Trigger, COMMUNITY_CUES};
pub use turn::{handle_turn, infer_topic, TurnContext};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::PersonaTriple;
use crate::recommender::Recommendation;
use crate::taxonomy::ScopeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    PersonaExtractor,
    Recommender,
    None,
}

impl Tool {
    pub fn as_str(self) -> &'static str {
        match self {
            Tool::PersonaExtractor => "persona_extractor",
            Tool::Recommender => "recommender",
            Tool::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Turn { role: Role::User, text: text.into() }
    }

    pub fn agent(text: impl Into<String>) -> Self {
        Turn { role: Role::Agent, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub user_id: String,
    pub task_id: String,
    pub message: String,
    #[serde(default)]
    pub history: Vec<Turn>,
}

impl AgentRequest {
    pub fn new(user_id: impl Into<String>, task_id: impl Into<String>, message: impl Into<String>) -> Self {
        AgentRequest {
            user_id: user_id.into(),
            task_id: task_id.into(),
            message: message.into(),
            history: Vec::new(),
        }
    }

    pub fn with_history(mut self, history: Vec<Turn>) -> Self {
        self.history = history;
        self
    }

    /// Checks the message is non-empty and the history alternates, starting
    /// with the user.
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.message.trim().is_empty() {
            return Err(AgentError::InvalidRequest("message is empty".into()));
        }
        for (i, turn) in self.history.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Agent };
            if turn.role != expected {
                return Err(AgentError::InvalidRequest(format!(
                    "history turn {i} should come from {expected:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Tool-specific data carried by a response. Serializes without a tag:
/// `{"triples": [...]}`, `{"topic_id": ..., "recommendations": [...]}` or `{}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Triples {
        triples: Vec<PersonaTriple>,
    },
    Recommendations {
        topic_id: Option<String>,
        recommendations: Vec<Recommendation>,
    },
    Empty {},
}

impl Payload {
    pub fn is_empty(&self) -> bool {
        matches!(self, Payload::Empty {})
    }
}

/// The four-key JSON envelope returned for every chat turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentResponse {
    pub message: String,
    pub tool: Tool,
    pub reasoning: String,
    pub payload: Payload,
}

impl AgentResponse {
    /// Checks the structural contract of a serialized response: exactly the
    /// four keys, a known tool, non-empty reasoning, and a payload shaped
    /// for that tool.
    pub fn validate_json(value: &serde_json::Value) -> Result<(), String> {
        let obj = value.as_object().ok_or("response is not an object")?;
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        if keys != ["message", "payload", "reasoning", "tool"] {
            return Err(format!("unexpected keys {keys:?}"));
        }
        if !obj["message"].is_string() {
            return Err("message is not a string".into());
        }
        let reasoning = obj["reasoning"].as_str().ok_or("reasoning is not a string")?;
        if reasoning.trim().is_empty() {
            return Err("reasoning is empty".into());
        }
        let payload = obj["payload"].as_object().ok_or("payload is not an object")?;
        match obj["tool"].as_str() {
            Some("persona_extractor") if payload.len() == 1 && payload.get("triples").is_some_and(|t| t.is_array()) => Ok(()),
            Some("recommender")
                if payload.len() == 2
                    && payload.get("recommendations").is_some_and(|r| r.is_array())
                    && payload.get("topic_id").is_some_and(|t| t.is_null() || t.is_string()) =>
            {
                Ok(())
            }
            Some("none") if payload.is_empty() => Ok(()),
            other => Err(format!("payload does not match tool {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Relation, TripleId};

    #[test]
    fn history_must_alternate() {
        let ok = AgentRequest::new("u1", "lifestyle", "hi")
            .with_history(vec![Turn::user("a"), Turn::agent("b")]);
        assert!(ok.validate().is_ok());
        let bad = AgentRequest::new("u1", "lifestyle", "hi").with_history(vec![Turn::agent("b")]);
        assert!(bad.validate().is_err());
        assert!(AgentRequest::new("u1", "lifestyle", "  ").validate().is_err());
    }

    #[test]
    fn envelope_round_trips() {
        let responses = [
            AgentResponse {
                message: "noted".into(),
                tool: Tool::PersonaExtractor,
                reasoning: "cue".into(),
                payload: Payload::Triples {
                    triples: vec![PersonaTriple {
                        triple_id: TripleId(3),
                        user_id: "u1".into(),
                        task_id: "lifestyle".into(),
                        topic_id: "fitness".into(),
                        relation: Relation::Likes,
                        object: "yoga".into(),
                        source_utterance: "I love yoga".into(),
                        created_at: 9,
                    }],
                },
            },
            AgentResponse {
                message: "try".into(),
                tool: Tool::Recommender,
                reasoning: "community".into(),
                payload: Payload::Recommendations {
                    topic_id: None,
                    recommendations: vec![Recommendation {
                        topic_id: "sleep".into(),
                        object: "nap".into(),
                        support: 2,
                    }],
                },
            },
            AgentResponse {
                message: "hello".into(),
                tool: Tool::None,
                reasoning: "no tool".into(),
                payload: Payload::Empty {},
            },
        ];
        for r in responses {
            let json = serde_json::to_value(&r).unwrap();
            AgentResponse::validate_json(&json).unwrap();
            let back: AgentResponse = serde_json::from_value(json).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn schema_check_rejects_mismatches() {
        let extra = serde_json::json!({"message": "", "tool": "none", "reasoning": "r", "payload": {}, "x": 1});
        assert!(AgentResponse::validate_json(&extra).is_err());
        let wrong_payload = serde_json::json!({"message": "", "tool": "none", "reasoning": "r", "payload": {"triples": []}});
        assert!(AgentResponse::validate_json(&wrong_payload).is_err());
        let blank = serde_json::json!({"message": "", "tool": "none", "reasoning": " ", "payload": {}});
        assert!(AgentResponse::validate_json(&blank).is_err());
    }
}
