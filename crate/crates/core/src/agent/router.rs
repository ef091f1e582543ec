use serde::{Deserialize, Serialize};

use super::{AgentRequest, Tool};
use crate::extractor::{is_relation_cue, match_topics, words};
use crate::taxonomy::{ScopeError, Taxonomy};

/// Words that ask for community insight. A trailing plural `s` is accepted.
pub const COMMUNITY_CUES: [&str; 7] = [
    "recommend",
    "suggestion",
    "suggest",
    "others",
    "community",
    "popular",
    "insights",
];

/// What fired the routing decision; echoed in the reasoning trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    Community { cue: String },
    Preference { cue: String, keyword: String, topic_id: String },
    NoCue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub tool: Tool,
    pub trigger: Trigger,
}

fn community_cue(word: &str) -> bool {
    COMMUNITY_CUES.contains(&word)
        || word
            .strip_suffix('s')
            .is_some_and(|stem| COMMUNITY_CUES.contains(&stem))
}

/// Community cues win over preference cues; a preference needs both a
/// relation cue word and a keyword of the current task.
pub fn route_message(request: &AgentRequest, taxonomy: &Taxonomy) -> Result<RouteDecision, ScopeError> {
    taxonomy.task(&request.task_id)?;
    let tokens = words(&request.message);

    if let Some(cue) = tokens.iter().find(|w| community_cue(w)) {
        return Ok(RouteDecision {
            tool: Tool::Recommender,
            trigger: Trigger::Community { cue: cue.clone() },
        });
    }

    let matches = match_topics(&request.message, &request.task_id, taxonomy)?;
    if let (Some(cue), Some(hit)) = (tokens.iter().find(|w| is_relation_cue(w)), matches.first()) {
        return Ok(RouteDecision {
            tool: Tool::PersonaExtractor,
            trigger: Trigger::Preference {
                cue: cue.clone(),
                keyword: hit.keyword.clone(),
                topic_id: hit.topic_id.clone(),
            },
        });
    }

    Ok(RouteDecision { tool: Tool::None, trigger: Trigger::NoCue })
}
