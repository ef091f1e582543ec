//! Per-user persona graphs: triples scoped to one task and topic, with
//! task filtering and deterministic summary rendering.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{ScopeError, Taxonomy};

/// Text of a summary with no triples in scope.
pub const EMPTY_SUMMARY: &str = "No recorded preferences for this task.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Likes,
    Dislikes,
    Has,
    Wants,
    Does,
    Is,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Likes,
        Relation::Dislikes,
        Relation::Has,
        Relation::Wants,
        Relation::Does,
        Relation::Is,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Likes => "likes",
            Relation::Dislikes => "dislikes",
            Relation::Has => "has",
            Relation::Wants => "wants",
            Relation::Does => "does",
            Relation::Is => "is",
        }
    }

    /// Relations that signal something worth recommending to others.
    pub fn is_positive_signal(self) -> bool {
        matches!(
            self,
            Relation::Likes | Relation::Has | Relation::Does | Relation::Wants
        )
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TripleId(pub u64);

impl fmt::Display for TripleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A triple before it has been assigned an id and timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleCandidate {
    pub user_id: String,
    pub task_id: String,
    pub topic_id: String,
    pub relation: Relation,
    pub object: String,
    pub source_utterance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaTriple {
    pub triple_id: TripleId,
    pub user_id: String,
    pub task_id: String,
    pub topic_id: String,
    pub relation: Relation,
    pub object: String,
    pub source_utterance: String,
    pub created_at: u64,
}

impl PersonaTriple {
    pub fn from_candidate(candidate: TripleCandidate, triple_id: TripleId, created_at: u64) -> Self {
        PersonaTriple {
            triple_id,
            user_id: candidate.user_id,
            task_id: candidate.task_id,
            topic_id: candidate.topic_id,
            relation: candidate.relation,
            object: candidate.object.trim().to_string(),
            source_utterance: candidate.source_utterance,
            created_at,
        }
    }

    /// Identity used for duplicate detection.
    pub fn dedup_key(&self) -> (&str, &str, Relation, String) {
        (
            &self.task_id,
            &self.topic_id,
            self.relation,
            normalize_object(&self.object),
        )
    }
}

/// Trimmed, lowercased object used for case-insensitive comparisons.
pub fn normalize_object(object: &str) -> String {
    object.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error("triple object is empty")]
    EmptyObject,
    #[error("triple belongs to user `{triple_user}`, not `{graph_user}`")]
    UserMismatch {
        graph_user: String,
        triple_user: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaGraph {
    pub user_id: String,
    pub triples: Vec<PersonaTriple>,
}

impl PersonaGraph {
    pub fn new(user_id: impl Into<String>) -> Self {
        PersonaGraph {
            user_id: user_id.into(),
            triples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Inserts a triple unless an equivalent one is already present.
    ///
    /// Returns `Ok(true)` when the graph changed and `Ok(false)` when the
    /// triple duplicated an existing (task, topic, relation, object) entry.
    pub fn add_triple(
        &mut self,
        mut triple: PersonaTriple,
        taxonomy: &Taxonomy,
    ) -> Result<bool, GraphError> {
        if triple.user_id != self.user_id {
            return Err(GraphError::UserMismatch {
                graph_user: self.user_id.clone(),
                triple_user: triple.user_id,
            });
        }
        taxonomy.topic(&triple.task_id, &triple.topic_id)?;
        triple.object = triple.object.trim().to_string();
        if triple.object.is_empty() {
            return Err(GraphError::EmptyObject);
        }
        if self.find_equivalent(&triple).is_some() {
            return Ok(false);
        }
        self.triples.push(triple);
        Ok(true)
    }

    pub fn find_equivalent(&self, triple: &PersonaTriple) -> Option<&PersonaTriple> {
        let key = triple.dedup_key();
        self.triples.iter().find(|t| t.dedup_key() == key)
    }

    /// Triples of one task, in insertion order.
    pub fn filter_by_task(
        &self,
        task_id: &str,
        taxonomy: &Taxonomy,
    ) -> Result<Vec<&PersonaTriple>, ScopeError> {
        taxonomy.task(task_id)?;
        Ok(self.triples_in_task(task_id).collect())
    }

    fn triples_in_task<'a, 'b>(
        &'a self,
        task_id: &'b str,
    ) -> impl Iterator<Item = &'a PersonaTriple> + use<'a, 'b> {
        self.triples.iter().filter(move |t| t.task_id == task_id)
    }

    /// Whether the user holds `object` (any relation) within the task.
    pub fn holds_object(&self, task_id: &str, object: &str) -> bool {
        let needle = normalize_object(object);
        self.triples_in_task(task_id)
            .any(|t| normalize_object(&t.object) == needle)
    }

    pub fn remove(&mut self, triple_id: TripleId) -> Option<PersonaTriple> {
        let idx = self.triples.iter().position(|t| t.triple_id == triple_id)?;
        Some(self.triples.remove(idx))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<String>,
}

impl Demographics {
    /// `"<age>-year-old <occupation>."`, dropping whichever part is missing.
    pub fn line(&self) -> Option<String> {
        let mut parts = Vec::new();
        if let Some(age) = self.age {
            parts.push(format!("{age}-year-old"));
        }
        if let Some(occupation) = self.occupation.as_deref().map(str::trim) {
            if !occupation.is_empty() {
                parts.push(occupation.to_string());
            }
        }
        if parts.is_empty() {
            None
        } else {
            Some(format!("{}.", parts.join(" ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSummary {
    pub user_id: String,
    /// `None` for a whole-profile summary spanning every task.
    pub task_id: Option<String>,
    pub text: String,
    pub demographic_line: Option<String>,
    pub triple_count: usize,
}

impl PersonaSummary {
    /// True when no triple contributed to the summary.
    pub fn is_empty(&self) -> bool {
        self.triple_count == 0
    }
}

/// One line per topic that has triples, in taxonomy order.
fn topic_lines(graph: &PersonaGraph, task_id: &str, taxonomy: &Taxonomy) -> Result<Vec<String>, ScopeError> {
    let task = taxonomy.task(task_id)?;
    let mut lines = Vec::new();
    for topic in &task.topics {
        let facts: Vec<String> = graph
            .triples_in_task(task_id)
            .filter(|t| t.topic_id == topic.topic_id)
            .map(|t| format!("{} {}", t.relation, t.object))
            .collect();
        if !facts.is_empty() {
            lines.push(format!("{}: {}.", topic.name, facts.join("; ")));
        }
    }
    Ok(lines)
}

fn assemble(demographic_line: &Option<String>, lines: Vec<String>) -> String {
    let mut out: Vec<String> = demographic_line.iter().cloned().collect();
    if lines.is_empty() {
        out.push(EMPTY_SUMMARY.to_string());
    } else {
        out.extend(lines);
    }
    out.join("\n")
}

/// Renders the task-filtered persona of one user.
pub fn render_persona_summary(
    graph: &PersonaGraph,
    task_id: &str,
    demographics: Option<&Demographics>,
    taxonomy: &Taxonomy,
) -> Result<PersonaSummary, ScopeError> {
    let lines = topic_lines(graph, task_id, taxonomy)?;
    let demographic_line = demographics.and_then(Demographics::line);
    Ok(PersonaSummary {
        user_id: graph.user_id.clone(),
        task_id: Some(task_id.to_string()),
        text: assemble(&demographic_line, lines),
        demographic_line,
        triple_count: graph.triples_in_task(task_id).count(),
    })
}

/// Renders every task's topic lines, tasks in taxonomy order.
pub fn render_profile_summary(
    graph: &PersonaGraph,
    demographics: Option<&Demographics>,
    taxonomy: &Taxonomy,
) -> PersonaSummary {
    let mut lines = Vec::new();
    for task in taxonomy.tasks() {
        lines.extend(topic_lines(graph, &task.task_id, taxonomy).expect("task from taxonomy"));
    }
    let demographic_line = demographics.and_then(Demographics::line);
    PersonaSummary {
        user_id: graph.user_id.clone(),
        task_id: None,
        text: assemble(&demographic_line, lines),
        demographic_line,
        triple_count: graph
            .triples
            .iter()
            .filter(|t| taxonomy.topic(&t.task_id, &t.topic_id).is_ok())
            .count(),
    }
}
