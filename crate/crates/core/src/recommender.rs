//! Popularity ranking of persona objects across users of the same task.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{normalize_object, PersonaGraph};
use crate::taxonomy::{ScopeError, Taxonomy};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct ObjectEntry {
    /// Display form taken from the first contributing triple.
    object: String,
    users: BTreeSet<String>,
}

/// Immutable snapshot of positive-signal objects per (task, topic), keyed by
/// the normalized object.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommunityIndex {
    entries: BTreeMap<(String, String), BTreeMap<String, ObjectEntry>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub topic_id: String,
    pub object: String,
    pub support: usize,
}

impl CommunityIndex {
    /// Rebuilds the index from every user's graph. Triples outside the
    /// taxonomy and non-positive relations are ignored.
    pub fn rebuild<'a>(graphs: impl IntoIterator<Item = &'a PersonaGraph>, taxonomy: &Taxonomy) -> Self {
        let mut index = CommunityIndex::default();
        for graph in graphs {
            for triple in &graph.triples {
                if !triple.relation.is_positive_signal()
                    || taxonomy.topic(&triple.task_id, &triple.topic_id).is_err()
                {
                    continue;
                }
                let entry = index
                    .entries
                    .entry((triple.task_id.clone(), triple.topic_id.clone()))
                    .or_default()
                    .entry(normalize_object(&triple.object))
                    .or_insert_with(|| ObjectEntry {
                        object: triple.object.trim().to_string(),
                        users: BTreeSet::new(),
                    });
                entry.users.insert(triple.user_id.clone());
            }
        }
        index
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct-user support for an object under (task, topic).
    pub fn support(&self, task_id: &str, topic_id: &str, object: &str) -> usize {
        self.entries
            .get(&(task_id.to_string(), topic_id.to_string()))
            .and_then(|objects| objects.get(&normalize_object(object)))
            .map_or(0, |e| e.users.len())
    }

    /// All (topic, object, support) entries for a task, unordered.
    pub fn entries_for_task<'a>(&'a self, task_id: &'a str) -> impl Iterator<Item = Recommendation> + 'a {
        self.entries
            .iter()
            .filter(move |((task, _), _)| task == task_id)
            .flat_map(|((_, topic), objects)| {
                objects.values().map(move |e| Recommendation {
                    topic_id: topic.clone(),
                    object: e.object.clone(),
                    support: e.users.len(),
                })
            })
    }
}

/// Top-`k` objects for the task (and topic, when given) that the requester
/// does not already hold, by descending support then object.
pub fn recommend(
    index: &CommunityIndex,
    user_graph: &PersonaGraph,
    task_id: &str,
    topic_id: Option<&str>,
    k: usize,
    taxonomy: &Taxonomy,
) -> Result<Vec<Recommendation>, ScopeError> {
    taxonomy.task(task_id)?;
    if let Some(topic) = topic_id {
        taxonomy.topic(task_id, topic)?;
    }
    let mut candidates: Vec<Recommendation> = index
        .entries_for_task(task_id)
        .filter(|r| topic_id.is_none_or(|t| r.topic_id == t))
        .filter(|r| !user_graph.holds_object(task_id, &r.object))
        .collect();
    candidates.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then_with(|| a.object.cmp(&b.object))
            .then_with(|| a.topic_id.cmp(&b.topic_id))
    });
    candidates.truncate(k);
    Ok(candidates)
}
