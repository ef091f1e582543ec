use super::{AgentRequest, Tool};
use crate::graph::PersonaSummary;
use crate::taxonomy::TaskDef;

pub const JSON_INSTRUCTION: &str = "Respond with a single JSON object and nothing else. It must have exactly \
the keys \"message\" (the reply shown to the user), \"tool\" (one of \"persona_extractor\", \"recommender\", \
\"none\"), \"reasoning\" (why this tool was or was not used) and \"payload\" (tool output, or {} when no tool \
was used).";

/// Header that opens each few-shot block.
pub(crate) const EXAMPLE_HEADER: &str = "### Example:";

/// Description of one callable tool plus its single worked example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolSpec {
    pub tool: Tool,
    pub purpose: String,
    pub use_when: String,
    pub example_user: String,
    pub example_reply: String,
}

impl ToolSpec {
    /// The extractor and recommender, as offered to the model.
    pub fn standard() -> Vec<ToolSpec> {
        vec![
            ToolSpec {
                tool: Tool::PersonaExtractor,
                purpose: "Extracts topic-relation-object facts about the user and stores them in their persona graph."
                    .into(),
                use_when: "the user states a preference, habit, possession, goal or trait related to the current task."
                    .into(),
                example_user: "I love morning jogging".into(),
                example_reply: r#"{"message": "Noted! I added that you like morning jogging.", "tool": "persona_extractor", "reasoning": "The user stated a preference (cue \"love\") about fitness (keyword \"jogging\").", "payload": {"triples": [{"topic_id": "fitness", "relation": "likes", "object": "morning jogging"}]}}"#.into(),
            },
            ToolSpec {
                tool: Tool::Recommender,
                purpose: "Returns what other users working on the same task enjoy, ranked by how many users share it."
                    .into(),
                use_when: "the user asks for suggestions, recommendations, or what others or the community like."
                    .into(),
                example_user: "Any suggestions from the community?".into(),
                example_reply: r#"{"message": "Others who enjoy fitness often like yoga and the gym.", "tool": "recommender", "reasoning": "The user asked for community insights (cue \"community\"); results filtered by the conversation topic fitness.", "payload": {"topic_id": "fitness", "recommendations": [{"topic_id": "fitness", "object": "yoga", "support": 3}]}}"#.into(),
            },
        ]
    }
}

/// Assembles the system prompt: task context, role, user profile and task,
/// tool descriptions, one example per tool, and the output-format rule.
pub fn build_prompt(
    request: &AgentRequest,
    task: &TaskDef,
    summary: &PersonaSummary,
    tools: &[ToolSpec],
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "You are assisting users of a personalization service. The current task is \"{}\": {}\n\n",
        task.name,
        task.description.trim()
    ));
    out.push_str(
        "Role: you are a personal assistant that learns the user's preferences for this task, shares what \
         similar users enjoy, and otherwise answers questions directly. Keep replies short and grounded in the \
         information below.\n\n",
    );
    out.push_str(&format!("User: {}\nCurrent task: {}\n", request.user_id, task.name));
    let topics: Vec<&str> = task.topics.iter().map(|t| t.name.as_str()).collect();
    out.push_str(&format!("Task topics: {}\n", topics.join(", ")));
    out.push_str("Known persona:\n");
    out.push_str(&summary.text);
    out.push_str("\n\n");

    out.push_str("Available tools:\n");
    for spec in tools {
        out.push_str(&format!(
            "- {}: {} Use it when {}\n",
            spec.tool.as_str(),
            spec.purpose,
            spec.use_when
        ));
    }
    out.push_str("- none: answer without a tool when neither condition applies.\n\n");

    for spec in tools {
        out.push_str(&format!(
            "{EXAMPLE_HEADER} {}\nUser: {}\nAssistant: {}\n\n",
            spec.tool.as_str(),
            spec.example_user,
            spec.example_reply
        ));
    }

    out.push_str(JSON_INSTRUCTION);
    out
}
