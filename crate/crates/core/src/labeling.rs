//! Analyst labeling workflow: binary classification tasks, per-user label
//! proposals with confidence and justification, threshold assignment, and
//! the append-only ledger of confirmed labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::tokenize;
use crate::graph::PersonaSummary;
use crate::llm::{extract_json_object, ChatMessage, LlmMode, LlmPort};
use crate::taxonomy::Taxonomy;

pub const DEFAULT_THRESHOLD: f64 = 0.60;

pub const LABELING_PROMPT: &str = include_str!("../assets/labeling_prompt.txt");

/// Justification given when a summary records nothing about the user.
pub const INSUFFICIENT_INFORMATION: &str =
    "Insufficient information: the persona summary records no preferences for this user.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelingError {
    #[error("invalid classification task: {0}")]
    Validation(String),
    #[error("proposal for user `{0}` is already finalized")]
    AlreadyFinalized(String),
    #[error("`{0}` is not one of the task's labels")]
    UnknownLabel(String),
    #[error("unparseable labeling output: {0}")]
    LlmParse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelGroup {
    Positive,
    Negative,
}

/// Positive iff `confidence >= threshold`.
pub fn apply_threshold(confidence: f64, threshold: f64) -> LabelGroup {
    if confidence >= threshold {
        LabelGroup::Positive
    } else {
        LabelGroup::Negative
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedDocs {
    #[serde(default)]
    pub positive: Vec<String>,
    #[serde(default)]
    pub negative: Vec<String>,
}

/// Analyst input for a new classification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub positive_label: String,
    pub negative_label: String,
    pub offer_message: String,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub seed_docs: SeedDocs,
    /// Restricts summaries to one persona task; whole profile when absent.
    #[serde(default)]
    pub persona_task: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTask {
    pub ct_id: String,
    pub name: String,
    pub description: String,
    pub positive_label: String,
    pub negative_label: String,
    pub offer_message: String,
    pub threshold: f64,
    pub seed_docs: SeedDocs,
    pub persona_task: Option<String>,
    pub created_at: u64,
}

impl ClassificationTask {
    pub fn label(&self, group: LabelGroup) -> &str {
        match group {
            LabelGroup::Positive => &self.positive_label,
            LabelGroup::Negative => &self.negative_label,
        }
    }

    pub fn group_of(&self, label: &str) -> Option<LabelGroup> {
        if label == self.positive_label {
            Some(LabelGroup::Positive)
        } else if label == self.negative_label {
            Some(LabelGroup::Negative)
        } else {
            None
        }
    }
}

pub fn create_classification_task(
    spec: TaskSpec,
    ct_id: String,
    created_at: u64,
    taxonomy: &Taxonomy,
) -> Result<ClassificationTask, LabelingError> {
    let invalid = |msg: &str| Err(LabelingError::Validation(msg.to_string()));
    let positive = spec.positive_label.trim().to_string();
    let negative = spec.negative_label.trim().to_string();
    if spec.name.trim().is_empty() {
        return invalid("name is empty");
    }
    if positive.is_empty() || negative.is_empty() {
        return invalid("labels must be non-empty");
    }
    if positive.to_lowercase() == negative.to_lowercase() {
        return invalid("positive and negative labels must differ");
    }
    if spec.offer_message.trim().is_empty() {
        return invalid("offer message is empty");
    }
    let threshold = spec.threshold.unwrap_or(DEFAULT_THRESHOLD);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(LabelingError::Validation(format!(
            "threshold {threshold} must lie strictly between 0 and 1"
        )));
    }
    if let Some(task) = &spec.persona_task {
        if taxonomy.task(task).is_err() {
            return Err(LabelingError::Validation(format!("unknown persona task `{task}`")));
        }
    }
    Ok(ClassificationTask {
        ct_id,
        name: spec.name.trim().to_string(),
        description: spec.description.trim().to_string(),
        positive_label: positive,
        negative_label: negative,
        offer_message: spec.offer_message.trim().to_string(),
        threshold,
        seed_docs: spec.seed_docs,
        persona_task: spec.persona_task,
        created_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalSource {
    Llm,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalStatus {
    Proposed,
    Confirmed,
    Overridden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProposal {
    pub ct_id: String,
    pub user_id: String,
    pub proposed_label: String,
    pub confidence: f64,
    pub justification: String,
    pub source: ProposalSource,
    pub status: ProposalStatus,
    /// Summary shown to the analyst alongside the proposal.
    pub summary: String,
    /// Triples behind the summary; zero means the summary is the sentinel.
    #[serde(default)]
    pub summary_triples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelOrigin {
    Analyst,
    OfferFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub ct_id: String,
    pub user_id: String,
    pub label: String,
    pub origin: LabelOrigin,
    pub created_at: u64,
}

/// Distinct description terms, in first-seen order.
fn criteria_terms(task: &ClassificationTask) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tokenize(&task.description)
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

fn proposal(
    task: &ClassificationTask,
    summary: &PersonaSummary,
    confidence: f64,
    justification: String,
    source: ProposalSource,
) -> LabelProposal {
    LabelProposal {
        ct_id: task.ct_id.clone(),
        user_id: summary.user_id.clone(),
        proposed_label: task.label(apply_threshold(confidence, task.threshold)).to_string(),
        confidence,
        justification,
        source,
        status: ProposalStatus::Proposed,
        summary: summary.text.clone(),
        summary_triples: summary.triple_count,
    }
}

/// Offline proposal: confidence is the fraction of the description's terms
/// that occur in the summary.
pub fn heuristic_proposal(task: &ClassificationTask, summary: &PersonaSummary) -> LabelProposal {
    if summary.is_empty() {
        return proposal(task, summary, 0.0, INSUFFICIENT_INFORMATION.to_string(), ProposalSource::Heuristic);
    }
    let criteria = criteria_terms(task);
    let present: BTreeSet<String> = tokenize(&summary.text).into_iter().collect();
    let matched: Vec<&str> = criteria
        .iter()
        .filter(|t| present.contains(*t))
        .map(String::as_str)
        .collect();
    let confidence = if criteria.is_empty() {
        0.0
    } else {
        (matched.len() as f64 / criteria.len() as f64).clamp(0.0, 1.0)
    };
    let terms = if matched.is_empty() { "none".to_string() } else { matched.join(", ") };
    let verdict = match apply_threshold(confidence, task.threshold) {
        LabelGroup::Positive => "aligned with the classification criteria".to_string(),
        LabelGroup::Negative => format!(
            "below the {:.2} threshold for \"{}\"",
            task.threshold, task.positive_label
        ),
    };
    let justification = format!(
        "Matched {} of {} criteria terms ({terms}); {verdict}.",
        matched.len(),
        criteria.len()
    );
    proposal(task, summary, confidence, justification, ProposalSource::Heuristic)
}

pub fn labeling_prompt(task: &ClassificationTask, summary: &PersonaSummary) -> String {
    LABELING_PROMPT
        .replace("{task_name}", &task.name)
        .replace("{description}", &task.description)
        .replace("{positive_label}", &task.positive_label)
        .replace("{negative_label}", &task.negative_label)
        .replace("{summary}", &summary.text)
        .replace("{threshold}", &format!("{:.2}", task.threshold))
}

#[derive(Debug, Deserialize)]
struct ModelLabel {
    label: String,
    confidence: f64,
    justification: String,
}

/// Parses a model's `{label, confidence, justification}` reply. The
/// confidence is read as the probability of the positive label and the
/// threshold decides the proposed label.
pub fn parse_model_proposal(
    task: &ClassificationTask,
    summary: &PersonaSummary,
    raw: &str,
) -> Result<LabelProposal, LabelingError> {
    let body = extract_json_object(raw).ok_or_else(|| LabelingError::LlmParse("no JSON object".into()))?;
    let parsed: ModelLabel =
        serde_json::from_str(body).map_err(|e| LabelingError::LlmParse(e.to_string()))?;
    if task.group_of(parsed.label.trim()).is_none() {
        return Err(LabelingError::LlmParse(format!("label `{}` is not a task label", parsed.label)));
    }
    if !(0.0..=1.0).contains(&parsed.confidence) {
        return Err(LabelingError::LlmParse(format!("confidence {} outside [0, 1]", parsed.confidence)));
    }
    let justification = parsed.justification.trim().to_string();
    if justification.is_empty() {
        return Err(LabelingError::LlmParse("empty justification".into()));
    }
    Ok(proposal(task, summary, parsed.confidence, justification, ProposalSource::Llm))
}

/// Proposes a label for one user. Remote ports are asked first; any model
/// failure falls back to the heuristic proposal.
pub fn propose_label(task: &ClassificationTask, summary: &PersonaSummary, llm: &dyn LlmPort) -> LabelProposal {
    if summary.is_empty() || llm.mode() != LlmMode::Remote {
        return heuristic_proposal(task, summary);
    }
    let messages = [
        ChatMessage::system(labeling_prompt(task, summary)),
        ChatMessage::user(format!("Label user {}.", summary.user_id)),
    ];
    let result = llm
        .complete(&messages)
        .map_err(|e| LabelingError::LlmParse(e.to_string()))
        .and_then(|raw| parse_model_proposal(task, summary, &raw));
    match result {
        Ok(p) => p,
        Err(err) => {
            log::warn!("labeling model failed for user {}: {err}; using heuristic", summary.user_id);
            heuristic_proposal(task, summary)
        }
    }
}

/// Finalizes a proposal with the analyst's choice.
pub fn confirm_label(
    proposal: &mut LabelProposal,
    choice: &str,
    task: &ClassificationTask,
    created_at: u64,
) -> Result<LabelRecord, LabelingError> {
    if proposal.status != ProposalStatus::Proposed {
        return Err(LabelingError::AlreadyFinalized(proposal.user_id.clone()));
    }
    let choice = choice.trim();
    if task.group_of(choice).is_none() {
        return Err(LabelingError::UnknownLabel(choice.to_string()));
    }
    proposal.status = if choice == proposal.proposed_label {
        ProposalStatus::Confirmed
    } else {
        ProposalStatus::Overridden
    };
    Ok(LabelRecord {
        ct_id: task.ct_id.clone(),
        user_id: proposal.user_id.clone(),
        label: choice.to_string(),
        origin: LabelOrigin::Analyst,
        created_at,
    })
}

/// Append-only label history. The active label of a (task, user) pair is
/// its most recent record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelLedger {
    records: Vec<LabelRecord>,
}

impl LabelLedger {
    pub fn push(&mut self, record: LabelRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn history<'a>(&'a self, ct_id: &'a str) -> impl Iterator<Item = &'a LabelRecord> + 'a {
        self.records.iter().filter(move |r| r.ct_id == ct_id)
    }

    pub fn active(&self, ct_id: &str, user_id: &str) -> Option<&LabelRecord> {
        self.records
            .iter()
            .rev()
            .find(|r| r.ct_id == ct_id && r.user_id == user_id)
    }

    /// Latest record per user for one task.
    pub fn active_labels(&self, ct_id: &str) -> BTreeMap<&str, &LabelRecord> {
        let mut active = BTreeMap::new();
        for record in self.records.iter().filter(|r| r.ct_id == ct_id) {
            active.insert(record.user_id.as_str(), record);
        }
        active
    }

    /// Active labels per class: (positive, negative).
    pub fn class_counts(&self, task: &ClassificationTask) -> (usize, usize) {
        self.active_labels(&task.ct_id)
            .values()
            .fold((0, 0), |(p, n), r| match task.group_of(&r.label) {
                Some(LabelGroup::Positive) => (p + 1, n),
                Some(LabelGroup::Negative) => (p, n + 1),
                None => (p, n),
            })
    }
}

/// Labeling queue order: longest summary first, then user id. Summaries
/// without any triple go last whatever their length.
pub fn queue_order(proposals: &mut [LabelProposal]) {
    proposals.sort_by(|a, b| {
        (a.summary_triples == 0)
            .cmp(&(b.summary_triples == 0))
            .then_with(|| b.summary.len().cmp(&a.summary.len()))
            .then_with(|| a.user_id.cmp(&b.user_id))
    });
}
