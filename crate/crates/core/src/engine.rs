//! Service facade: owns the store snapshot and the derived community index,
//! runs every workflow, and persists after each successful mutation.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{handle_turn, AgentError, AgentRequest, AgentResponse, Tool, Turn, TurnContext};
use crate::graph::{
    render_persona_summary, render_profile_summary, Demographics, PersonaGraph, PersonaSummary, PersonaTriple,
    TripleId,
};
use crate::labeling::{
    confirm_label, create_classification_task, propose_label, queue_order, ClassificationTask, LabelGroup,
    LabelProposal, LabelRecord, LabelingError, ProposalStatus, TaskSpec,
};
use crate::llm::LlmPort;
use crate::offers::{
    classify_new_user, compute_stats, dispatch_offers, record_response, ClassifyOutcome, DashboardStats,
    DispatchReport, Offer, OfferError,
};
use crate::recommender::{recommend, CommunityIndex, Recommendation, DEFAULT_K};
use crate::store::{self, proposal_key, StoreError, StoreSnapshot, User};
use crate::taxonomy::{ScopeError, TaskDef, Taxonomy};

/// Most recent session turns sent along with a chat message.
pub const MAX_HISTORY_TURNS: usize = 20;

pub const DEFAULT_RNG_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("user `{0}` already exists")]
    UserExists(String),
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error("unknown classification task `{0}`")]
    UnknownClassificationTask(String),
    #[error("unknown triple {0}")]
    UnknownTriple(u64),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Labeling(#[from] LabelingError),
    #[error(transparent)]
    Offer(#[from] OfferError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<AgentError> for EngineError {
    fn from(err: AgentError) -> Self {
        match err {
            AgentError::UnknownUser(u) => EngineError::UnknownUser(u),
            AgentError::Scope(s) => EngineError::Scope(s),
            AgentError::InvalidRequest(m) => EngineError::InvalidRequest(m),
        }
    }
}

impl EngineError {
    /// Stable snake_case identifier used in error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::UnknownUser(_) => "unknown_user",
            EngineError::UserExists(_) => "user_exists",
            EngineError::Scope(ScopeError::UnknownTask(_)) => "unknown_task",
            EngineError::Scope(ScopeError::UnknownTopic(_)) => "unknown_topic",
            EngineError::Scope(ScopeError::TopicTaskMismatch { .. }) => "topic_task_mismatch",
            EngineError::UnknownClassificationTask(_) => "unknown_classification_task",
            EngineError::UnknownTriple(_) => "unknown_triple",
            EngineError::InvalidRequest(_) => "invalid_request",
            EngineError::Labeling(LabelingError::Validation(_)) => "validation_error",
            EngineError::Labeling(LabelingError::AlreadyFinalized(_)) => "already_finalized",
            EngineError::Labeling(LabelingError::UnknownLabel(_)) => "unknown_label",
            EngineError::Labeling(LabelingError::LlmParse(_)) => "llm_parse_error",
            EngineError::Offer(OfferError::UnknownOffer(_)) => "unknown_offer",
            EngineError::Offer(OfferError::AlreadyResponded(_)) => "already_responded",
            EngineError::Offer(OfferError::LockedClassifier { .. }) => "locked_classifier",
            EngineError::Offer(OfferError::NoEligibleUsers) => "no_eligible_users",
            EngineError::Offer(OfferError::Classifier(_)) => "classifier_error",
            EngineError::Store(_) => "store_error",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewUser {
    pub user_id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub age: Option<u32>,
    #[serde(default)]
    pub occupation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    #[serde(flatten)]
    pub user: User,
    pub triple_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaView {
    pub user_id: String,
    pub task_id: Option<String>,
    pub triples: Vec<PersonaTriple>,
    pub summary: PersonaSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfirmation {
    pub proposal: LabelProposal,
    pub record: LabelRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferResponse {
    pub offer: Offer,
    pub record: LabelRecord,
}

pub struct Engine {
    taxonomy: Taxonomy,
    llm: Arc<dyn LlmPort>,
    state: StoreSnapshot,
    index: CommunityIndex,
    store_path: Option<PathBuf>,
    rng_seed: u64,
}

impl Engine {
    /// Engine without a backing file.
    pub fn in_memory(taxonomy: Taxonomy, llm: Arc<dyn LlmPort>, rng_seed: u64) -> Self {
        Self::from_snapshot(taxonomy, llm, StoreSnapshot::default(), None, rng_seed)
    }

    /// Loads the store at `path` (or starts empty when absent) and persists
    /// there after every mutation.
    pub fn open(
        taxonomy: Taxonomy,
        llm: Arc<dyn LlmPort>,
        path: impl Into<PathBuf>,
        rng_seed: u64,
    ) -> Result<Self, EngineError> {
        let path = path.into();
        let snapshot = store::load_or_default(&path)?;
        Ok(Self::from_snapshot(taxonomy, llm, snapshot, Some(path), rng_seed))
    }

    pub fn from_snapshot(
        taxonomy: Taxonomy,
        llm: Arc<dyn LlmPort>,
        state: StoreSnapshot,
        store_path: Option<PathBuf>,
        rng_seed: u64,
    ) -> Self {
        let index = CommunityIndex::rebuild(state.graphs.values(), &taxonomy);
        Engine { taxonomy, llm, state, index, store_path, rng_seed }
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn snapshot(&self) -> &StoreSnapshot {
        &self.state
    }

    pub fn index(&self) -> &CommunityIndex {
        &self.index
    }

    pub fn llm(&self) -> &dyn LlmPort {
        self.llm.as_ref()
    }

    /// Runs `f` against the state; rolls back on error, persists on success.
    fn transact<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, EngineError>) -> Result<T, EngineError> {
        let before = self.state.clone();
        let result = f(self).and_then(|value| {
            if let Some(path) = &self.store_path {
                store::persist(&self.state, path)?;
            }
            Ok(value)
        });
        if result.is_err() {
            self.state = before;
            self.rebuild_index();
        }
        result
    }

    fn rebuild_index(&mut self) {
        self.index = CommunityIndex::rebuild(self.state.graphs.values(), &self.taxonomy);
    }

    fn user_record(&self, user_id: &str) -> Result<&User, EngineError> {
        self.state
            .users
            .get(user_id)
            .ok_or_else(|| EngineError::UnknownUser(user_id.to_string()))
    }

    fn classification_task(&self, ct_id: &str) -> Result<&ClassificationTask, EngineError> {
        self.state
            .classification_tasks
            .get(ct_id)
            .ok_or_else(|| EngineError::UnknownClassificationTask(ct_id.to_string()))
    }

    pub fn create_user(&mut self, new: NewUser) -> Result<User, EngineError> {
        let user_id = new.user_id.trim().to_string();
        if user_id.is_empty()
            || !user_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(EngineError::InvalidRequest(
                "user_id must be non-empty and use only letters, digits, '-', '_' or '.'".into(),
            ));
        }
        if self.state.users.contains_key(&user_id) {
            return Err(EngineError::UserExists(user_id));
        }
        self.transact(|engine| {
            let user = User {
                user_id: user_id.clone(),
                name: new.name.map(|n| n.trim().to_string()).filter(|n| !n.is_empty()),
                demographics: Demographics {
                    age: new.age,
                    occupation: new.occupation.map(|o| o.trim().to_string()).filter(|o| !o.is_empty()),
                },
                created_at: engine.state.sequencer.tick(),
            };
            engine.state.users.insert(user_id.clone(), user.clone());
            engine.state.graphs.insert(user_id.clone(), PersonaGraph::new(user_id.clone()));
            Ok(user)
        })
    }

    pub fn user(&self, user_id: &str) -> Result<UserView, EngineError> {
        let user = self.user_record(user_id)?.clone();
        let triple_count = self.state.graphs.get(user_id).map_or(0, PersonaGraph::len);
        Ok(UserView { user, triple_count })
    }

    pub fn tasks(&self) -> &[TaskDef] {
        self.taxonomy.tasks()
    }

    pub fn session(&self, user_id: &str, task_id: &str) -> &[Turn] {
        self.state
            .sessions
            .get(user_id)
            .and_then(|s| s.get(task_id))
            .map_or(&[], Vec::as_slice)
    }

    /// One agent turn. The exchange is appended to the session history;
    /// only the extractor route changes the persona graph.
    pub fn chat(&mut self, user_id: &str, task_id: &str, message: &str) -> Result<AgentResponse, EngineError> {
        self.user_record(user_id)?;
        self.taxonomy.task(task_id)?;
        let history = self.session(user_id, task_id);
        let mut start = history.len().saturating_sub(MAX_HISTORY_TURNS);
        start += start % 2;
        let request = AgentRequest::new(user_id, task_id, message).with_history(history[start..].to_vec());

        self.transact(|engine| {
            let Engine { taxonomy, llm, state, index, .. } = engine;
            let graph = state
                .graphs
                .entry(user_id.to_string())
                .or_insert_with(|| PersonaGraph::new(user_id));
            let mut ctx = TurnContext {
                taxonomy,
                llm: llm.as_ref(),
                graph,
                demographics: state.users.get(user_id).map(|u| &u.demographics),
                index,
                sequencer: &mut state.sequencer,
            };
            let response = handle_turn(&mut ctx, &request)?;
            let turns = state
                .sessions
                .entry(user_id.to_string())
                .or_default()
                .entry(task_id.to_string())
                .or_default();
            turns.push(Turn::user(message));
            turns.push(Turn::agent(response.message.clone()));
            if response.tool == Tool::PersonaExtractor {
                engine.rebuild_index();
            }
            Ok(response)
        })
    }

    pub fn persona(&self, user_id: &str, task_id: Option<&str>) -> Result<PersonaView, EngineError> {
        let user = self.user_record(user_id)?;
        let empty = PersonaGraph::new(user_id);
        let graph = self.state.graphs.get(user_id).unwrap_or(&empty);
        let (triples, summary) = match task_id {
            Some(task) => (
                graph.filter_by_task(task, &self.taxonomy)?.into_iter().cloned().collect(),
                render_persona_summary(graph, task, Some(&user.demographics), &self.taxonomy)?,
            ),
            None => (
                graph.triples.clone(),
                render_profile_summary(graph, Some(&user.demographics), &self.taxonomy),
            ),
        };
        Ok(PersonaView { user_id: user_id.to_string(), task_id: task_id.map(str::to_string), triples, summary })
    }

    pub fn delete_triple(&mut self, triple_id: u64) -> Result<PersonaTriple, EngineError> {
        let owner = self
            .state
            .graphs
            .values()
            .find(|g| g.triples.iter().any(|t| t.triple_id == TripleId(triple_id)))
            .map(|g| g.user_id.clone())
            .ok_or(EngineError::UnknownTriple(triple_id))?;
        self.transact(|engine| {
            let removed = engine
                .state
                .graphs
                .get_mut(&owner)
                .and_then(|g| g.remove(TripleId(triple_id)))
                .ok_or(EngineError::UnknownTriple(triple_id))?;
            engine.rebuild_index();
            Ok(removed)
        })
    }

    pub fn recommendations(
        &self,
        user_id: &str,
        task_id: &str,
        topic_id: Option<&str>,
        k: Option<usize>,
    ) -> Result<Vec<Recommendation>, EngineError> {
        self.user_record(user_id)?;
        let empty = PersonaGraph::new(user_id);
        let graph = self.state.graphs.get(user_id).unwrap_or(&empty);
        Ok(recommend(&self.index, graph, task_id, topic_id, k.unwrap_or(DEFAULT_K), &self.taxonomy)?)
    }

    pub fn create_classification_task(&mut self, spec: TaskSpec) -> Result<ClassificationTask, EngineError> {
        self.transact(|engine| {
            let ct_id = engine.state.sequencer.task_id();
            let created_at = engine.state.sequencer.tick();
            let task = create_classification_task(spec, ct_id, created_at, &engine.taxonomy)?;
            engine.state.classification_tasks.insert(task.ct_id.clone(), task.clone());
            Ok(task)
        })
    }

    pub fn get_classification_task(&self, ct_id: &str) -> Result<ClassificationTask, EngineError> {
        self.classification_task(ct_id).cloned()
    }

    pub fn classification_tasks(&self) -> Vec<ClassificationTask> {
        self.state.classification_tasks.values().cloned().collect()
    }

    /// Summary used for labeling and classification under a task.
    pub fn summary_for(&self, task: &ClassificationTask, user_id: &str) -> Result<PersonaSummary, EngineError> {
        let user = self.user_record(user_id)?;
        let empty = PersonaGraph::new(user_id);
        let graph = self.state.graphs.get(user_id).unwrap_or(&empty);
        Ok(match &task.persona_task {
            Some(t) => render_persona_summary(graph, t, Some(&user.demographics), &self.taxonomy)?,
            None => render_profile_summary(graph, Some(&user.demographics), &self.taxonomy),
        })
    }

    fn summaries(&self, task: &ClassificationTask) -> Result<BTreeMap<String, String>, EngineError> {
        self.state
            .users
            .keys()
            .map(|u| Ok((u.clone(), self.summary_for(task, u)?.text)))
            .collect()
    }

    fn fresh_proposal(&self, task: &ClassificationTask, user_id: &str) -> Result<LabelProposal, EngineError> {
        let summary = self.summary_for(task, user_id)?;
        Ok(propose_label(task, &summary, self.llm.as_ref()))
    }

    /// Proposals for every user, most informative summary first. Open
    /// proposals are regenerated from the current summaries; finalized ones
    /// are kept as they are.
    pub fn labeling_queue(&mut self, ct_id: &str) -> Result<Vec<LabelProposal>, EngineError> {
        let task = self.classification_task(ct_id)?.clone();
        self.transact(|engine| {
            let users: Vec<String> = engine.state.users.keys().cloned().collect();
            let mut queue = Vec::with_capacity(users.len());
            for user in users {
                let key = proposal_key(ct_id, &user);
                let proposal = match engine.state.proposals.get(&key) {
                    Some(p) if p.status != ProposalStatus::Proposed => p.clone(),
                    _ => {
                        let p = engine.fresh_proposal(&task, &user)?;
                        engine.state.proposals.insert(key, p.clone());
                        p
                    }
                };
                queue.push(proposal);
            }
            queue_order(&mut queue);
            Ok(queue)
        })
    }

    /// Records the analyst's label for a user's current proposal, creating
    /// the proposal first when the queue was never opened for them.
    pub fn confirm_label(&mut self, ct_id: &str, user_id: &str, label: &str) -> Result<LabelConfirmation, EngineError> {
        let task = self.classification_task(ct_id)?.clone();
        self.user_record(user_id)?;
        self.transact(|engine| {
            let key = proposal_key(ct_id, user_id);
            let mut proposal = match engine.state.proposals.get(&key) {
                Some(p) => p.clone(),
                None => engine.fresh_proposal(&task, user_id)?,
            };
            let now = engine.state.sequencer.tick();
            let record = confirm_label(&mut proposal, label, &task, now)?;
            engine.state.proposals.insert(key, proposal.clone());
            engine.state.label_records.push(record.clone());
            Ok(LabelConfirmation { proposal, record })
        })
    }

    /// Sends the task's offer to every user whose active label is positive
    /// and who has not answered an offer for the task yet.
    pub fn dispatch(&mut self, ct_id: &str) -> Result<DispatchReport, EngineError> {
        let task = self.classification_task(ct_id)?.clone();
        self.transact(|engine| {
            let state = &mut engine.state;
            let answered = |user: &str| {
                state
                    .offers
                    .iter()
                    .any(|o| o.ct_id == task.ct_id && o.user_id == user && !o.is_open())
            };
            let candidates: Vec<String> = state
                .label_records
                .active_labels(ct_id)
                .into_iter()
                .filter(|(_, r)| task.group_of(&r.label) == Some(LabelGroup::Positive))
                .map(|(u, _)| u.to_string())
                .filter(|u| !answered(u))
                .collect();
            let report = dispatch_offers(&task, &candidates, &state.offers, &mut state.sequencer);
            state.offers.extend(report.created.iter().cloned());
            Ok(report)
        })
    }

    pub fn user_offers(&self, user_id: &str) -> Result<Vec<Offer>, EngineError> {
        self.user_record(user_id)?;
        Ok(self.state.offers.iter().filter(|o| o.user_id == user_id).cloned().collect())
    }

    pub fn respond_offer(&mut self, offer_id: &str, accepted: bool) -> Result<OfferResponse, EngineError> {
        let ct_id = self
            .state
            .offers
            .iter()
            .find(|o| o.offer_id == offer_id)
            .map(|o| o.ct_id.clone())
            .ok_or_else(|| OfferError::UnknownOffer(offer_id.to_string()))?;
        let task = self.classification_task(&ct_id)?.clone();
        self.transact(|engine| {
            let now = engine.state.sequencer.tick();
            let record = record_response(&mut engine.state.offers, offer_id, accepted, &task, now)?;
            engine.state.label_records.push(record.clone());
            let offer = engine
                .state
                .offers
                .iter()
                .find(|o| o.offer_id == offer_id)
                .cloned()
                .expect("offer just updated");
            Ok(OfferResponse { offer, record })
        })
    }

    pub fn stats(&self, ct_id: &str) -> Result<DashboardStats, EngineError> {
        let task = self.classification_task(ct_id)?;
        Ok(compute_stats(task, &self.state.offers, &self.state.label_records, &self.state.predictions))
    }

    /// Auto-classifies one random eligible user. The random stream is a
    /// function of the configured seed and the number of predictions so far.
    pub fn classify_random(&mut self, ct_id: &str) -> Result<ClassifyOutcome, EngineError> {
        let task = self.classification_task(ct_id)?.clone();
        let summaries = self.summaries(&task)?;
        self.transact(|engine| {
            let state = &mut engine.state;
            let mut rng = ChaCha8Rng::seed_from_u64(engine.rng_seed);
            rng.set_stream(state.predictions.len() as u64);
            Ok(classify_new_user(
                &task,
                &summaries,
                &state.label_records,
                &mut state.offers,
                &mut state.predictions,
                &mut rng,
                &mut state.sequencer,
            )?)
        })
    }
}
