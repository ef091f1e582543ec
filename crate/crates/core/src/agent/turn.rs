use super::prompt::{build_prompt, ToolSpec};
use super::router::{route_message, RouteDecision, Trigger};
use super::{AgentError, AgentRequest, AgentResponse, Payload, Role, Tool};
use crate::extractor::{extract_triples, match_topics};
use crate::graph::{render_persona_summary, Demographics, PersonaGraph, PersonaTriple, TripleId};
use crate::llm::{canned_answer, extract_json_object, ChatMessage, LlmMode, LlmPort};
use crate::recommender::{recommend, CommunityIndex, Recommendation, DEFAULT_K};
use crate::sequence::Sequencer;
use crate::taxonomy::{TaskDef, Taxonomy};

/// Everything a turn may read, plus the one graph it may write.
pub struct TurnContext<'a> {
    pub taxonomy: &'a Taxonomy,
    pub llm: &'a dyn LlmPort,
    pub graph: &'a mut PersonaGraph,
    pub demographics: Option<&'a Demographics>,
    pub index: &'a CommunityIndex,
    pub sequencer: &'a mut Sequencer,
}

/// Topic of the most recent task keyword, looking at the current message
/// first and then earlier user turns, newest first.
pub fn infer_topic(request: &AgentRequest, taxonomy: &Taxonomy) -> Option<(String, String)> {
    let user_turns = request
        .history
        .iter()
        .rev()
        .filter(|t| t.role == Role::User)
        .map(|t| t.text.as_str());
    std::iter::once(request.message.as_str())
        .chain(user_turns)
        .find_map(|text| {
            match_topics(text, &request.task_id, taxonomy)
                .ok()?
                .pop()
                .map(|m| (m.topic_id, m.keyword))
        })
}

/// Runs one chat turn: route, invoke at most one tool, phrase the reply.
///
/// Only the extractor route writes to the graph. Model failures never fail
/// the turn; deterministic text is substituted.
pub fn handle_turn(ctx: &mut TurnContext<'_>, request: &AgentRequest) -> Result<AgentResponse, AgentError> {
    request.validate()?;
    if ctx.graph.user_id != request.user_id {
        return Err(AgentError::UnknownUser(request.user_id.clone()));
    }
    let task = ctx.taxonomy.task(&request.task_id)?;
    let decision = route_message(request, ctx.taxonomy)?;

    let (draft, reasoning, payload) = match decision.tool {
        Tool::PersonaExtractor => run_extractor(ctx, request, task, &decision),
        Tool::Recommender => run_recommender(ctx, request, task, &decision)?,
        Tool::None => (
            String::new(),
            "No tool required: the message contains no preference statement about this task and no \
             request for community insights, so it was answered directly."
                .to_string(),
            Payload::Empty {},
        ),
    };

    let message = if decision.tool == Tool::None {
        answer_directly(ctx, request, task)
    } else {
        phrase(ctx, request, task, decision.tool, draft, &payload)
    };

    Ok(AgentResponse { message, tool: decision.tool, reasoning, payload })
}

fn run_extractor(
    ctx: &mut TurnContext<'_>,
    request: &AgentRequest,
    task: &TaskDef,
    decision: &RouteDecision,
) -> (String, String, Payload) {
    let trigger = match &decision.trigger {
        Trigger::Preference { cue, keyword, topic_id } => {
            format!("preference cue \"{cue}\" with taxonomy keyword \"{keyword}\" (topic {topic_id})")
        }
        _ => "preference statement".to_string(),
    };
    let extraction = extract_triples(
        &request.message,
        &request.user_id,
        &request.task_id,
        ctx.taxonomy,
        Some(ctx.llm),
    );
    let (candidates, backend_note) = match extraction {
        Ok(result) => (result.triples, String::new()),
        Err(err) => {
            log::warn!("extraction failed for user {}: {err}", request.user_id);
            (Vec::new(), format!(" The extraction backend failed ({err}); nothing was recorded."))
        }
    };

    let mut stored: Vec<PersonaTriple> = Vec::new();
    for candidate in candidates {
        let probe = PersonaTriple::from_candidate(candidate, TripleId(0), 0);
        if let Some(existing) = ctx.graph.find_equivalent(&probe) {
            if !stored.contains(existing) {
                stored.push(existing.clone());
            }
            continue;
        }
        let triple = PersonaTriple {
            triple_id: ctx.sequencer.triple_id(),
            created_at: ctx.sequencer.tick(),
            ..probe
        };
        match ctx.graph.add_triple(triple.clone(), ctx.taxonomy) {
            Ok(_) => stored.push(triple),
            Err(err) => log::warn!("rejected extracted triple: {err}"),
        }
    }

    let facts: Vec<String> = stored
        .iter()
        .map(|t| format!("{} {} ({})", t.relation, t.object, t.topic_id))
        .collect();
    let draft = if facts.is_empty() {
        "Thanks! I couldn't identify a specific preference to record from that message.".to_string()
    } else {
        format!("Noted! I added to your {} profile: {}.", task.name, facts.join("; "))
    };
    let reasoning = format!(
        "Used persona_extractor: {trigger}. Recorded {} triple(s) in the persona graph for task {}.{backend_note}",
        stored.len(),
        task.task_id
    );
    (draft, reasoning, Payload::Triples { triples: stored })
}

fn run_recommender(
    ctx: &mut TurnContext<'_>,
    request: &AgentRequest,
    task: &TaskDef,
    decision: &RouteDecision,
) -> Result<(String, String, Payload), AgentError> {
    let cue = match &decision.trigger {
        Trigger::Community { cue } => cue.as_str(),
        _ => "community request",
    };
    let topic = infer_topic(request, ctx.taxonomy);
    let topic_id = topic.as_ref().map(|(t, _)| t.as_str());
    let recs = recommend(ctx.index, ctx.graph, &request.task_id, topic_id, DEFAULT_K, ctx.taxonomy)?;

    let scope = match &topic {
        Some((topic_id, keyword)) => format!(
            "filtered by conversation topic {topic_id} (latest keyword \"{keyword}\")"
        ),
        None => format!("no conversation topic found, so the whole task {} was searched", task.task_id),
    };
    let reasoning = format!(
        "Used recommender: community cue \"{cue}\"; {scope}. Strategy: objects liked, owned, done or wanted by \
         other users of this task, ranked by number of distinct users, excluding items already in your profile. \
         Returned {} item(s).",
        recs.len()
    );
    let topic_phrase = topic.as_ref().map(|(t, _)| format!(" for {t}")).unwrap_or_default();
    let draft = if recs.is_empty() {
        format!("I don't have community suggestions{topic_phrase} yet. Tell me more about what you enjoy!")
    } else {
        format!(
            "Here is what others working on {}{topic_phrase} enjoy: {}.",
            task.name,
            describe(&recs)
        )
    };
    Ok((
        draft,
        reasoning,
        Payload::Recommendations {
            topic_id: topic.map(|(t, _)| t),
            recommendations: recs,
        },
    ))
}

fn describe(recs: &[Recommendation]) -> String {
    recs.iter()
        .map(|r| {
            let users = if r.support == 1 { "user" } else { "users" };
            format!("{} ({} {users})", r.object, r.support)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn transcript(ctx: &TurnContext<'_>, request: &AgentRequest, task: &TaskDef) -> Vec<ChatMessage> {
    let summary = render_persona_summary(ctx.graph, &request.task_id, ctx.demographics, ctx.taxonomy)
        .expect("task already resolved");
    let mut messages = vec![ChatMessage::system(build_prompt(
        request,
        task,
        &summary,
        &ToolSpec::standard(),
    ))];
    for turn in &request.history {
        messages.push(match turn.role {
            Role::User => ChatMessage::user(&turn.text),
            Role::Agent => ChatMessage::assistant(&turn.text),
        });
    }
    messages.push(ChatMessage::user(&request.message));
    messages
}

/// Pulls `message` out of a model's JSON envelope; bare text is used as-is.
fn reply_text(raw: &str) -> Option<String> {
    let text = match extract_json_object(raw).and_then(|b| serde_json::from_str::<serde_json::Value>(b).ok()) {
        Some(value) => value.get("message")?.as_str()?.to_string(),
        None => raw.to_string(),
    };
    let text = text.trim();
    (!text.is_empty()).then(|| text.to_string())
}

fn answer_directly(ctx: &TurnContext<'_>, request: &AgentRequest, task: &TaskDef) -> String {
    match ctx.llm.complete(&transcript(ctx, request, task)) {
        Ok(raw) => reply_text(&raw).unwrap_or_else(|| canned_answer(request.message.trim())),
        Err(err) => {
            log::warn!("direct answer fell back to canned text: {err}");
            canned_answer(request.message.trim())
        }
    }
}

fn phrase(
    ctx: &TurnContext<'_>,
    request: &AgentRequest,
    task: &TaskDef,
    tool: Tool,
    draft: String,
    payload: &Payload,
) -> String {
    if ctx.llm.mode() != LlmMode::Remote {
        return draft;
    }
    let mut messages = transcript(ctx, request, task);
    messages.push(ChatMessage::system(format!(
        "Tool {} returned: {}\nDraft reply: {draft}\nRewrite the reply for the user and answer with the JSON object.",
        tool.as_str(),
        serde_json::to_string(payload).expect("payload serializes"),
    )));
    match ctx.llm.complete(&messages) {
        Ok(raw) => reply_text(&raw).unwrap_or(draft),
        Err(err) => {
            log::warn!("reply phrasing fell back to draft text: {err}");
            draft
        }
    }
}
