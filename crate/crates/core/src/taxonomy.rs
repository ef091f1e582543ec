//! Task/topic taxonomy and its keyword lexicons.
//!
//! The taxonomy is loaded once at startup and shared read-only. Every
//! persona triple, extraction and recommendation is validated against it.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reference taxonomy shipped with the crate.
pub const REFERENCE_TAXONOMY: &str = include_str!("../assets/taxonomy.json");

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed taxonomy document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid taxonomy entry `{entry}`: {reason}")]
    Validation { entry: String, reason: String },
}

impl TaxonomyError {
    fn invalid(entry: impl Into<String>, reason: impl Into<String>) -> Self {
        TaxonomyError::Validation {
            entry: entry.into(),
            reason: reason.into(),
        }
    }
}

/// Lookup failures shared by every module that resolves ids against the
/// taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("topic `{topic_id}` does not belong to task `{task_id}`")]
    TopicTaskMismatch { task_id: String, topic_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicDef {
    pub topic_id: String,
    pub name: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDef {
    pub task_id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub topics: Vec<TopicDef>,
}

impl TaskDef {
    pub fn topic(&self, topic_id: &str) -> Option<&TopicDef> {
        self.topics.iter().find(|t| t.topic_id == topic_id)
    }

    /// Position of a topic in taxonomy order.
    pub fn topic_rank(&self, topic_id: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.topic_id == topic_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    tasks: Vec<TaskDef>,
}

impl Taxonomy {
    /// Parses and validates a taxonomy document.
    pub fn from_json(source: &str) -> Result<Self, TaxonomyError> {
        let taxonomy: Taxonomy = serde_json::from_str(source)?;
        taxonomy.validate()?;
        Ok(taxonomy)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let source = fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&source)
    }

    /// The bundled three-task fixture.
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_TAXONOMY).expect("bundled taxonomy is valid")
    }

    /// Builds a taxonomy from already-constructed tasks, applying the same
    /// validation as the file loader.
    pub fn new(tasks: Vec<TaskDef>) -> Result<Self, TaxonomyError> {
        let taxonomy = Taxonomy { tasks };
        taxonomy.validate()?;
        Ok(taxonomy)
    }

    fn validate(&self) -> Result<(), TaxonomyError> {
        if self.tasks.is_empty() {
            return Err(TaxonomyError::invalid("tasks", "taxonomy defines no tasks"));
        }
        let mut task_ids = HashSet::new();
        for task in &self.tasks {
            if task.task_id.trim().is_empty() {
                return Err(TaxonomyError::invalid(&task.name, "empty task_id"));
            }
            if !task_ids.insert(task.task_id.as_str()) {
                return Err(TaxonomyError::invalid(&task.task_id, "duplicate task_id"));
            }
            let mut topic_ids = HashSet::new();
            for topic in &task.topics {
                let entry = format!("{}/{}", task.task_id, topic.topic_id);
                if topic.topic_id.trim().is_empty() {
                    return Err(TaxonomyError::invalid(entry, "empty topic_id"));
                }
                if !topic_ids.insert(topic.topic_id.as_str()) {
                    return Err(TaxonomyError::invalid(entry, "duplicate topic_id"));
                }
                if topic.keywords.is_empty() {
                    return Err(TaxonomyError::invalid(entry, "empty keyword list"));
                }
                for keyword in &topic.keywords {
                    if keyword.is_empty() || keyword.chars().any(char::is_whitespace) {
                        return Err(TaxonomyError::invalid(
                            entry,
                            format!("keyword `{keyword}` must be a single non-empty word"),
                        ));
                    }
                    if keyword.to_lowercase() != *keyword {
                        return Err(TaxonomyError::invalid(
                            entry,
                            format!("keyword `{keyword}` is not lowercase"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tasks(&self) -> &[TaskDef] {
        &self.tasks
    }

    pub fn task(&self, task_id: &str) -> Result<&TaskDef, ScopeError> {
        self.tasks
            .iter()
            .find(|t| t.task_id == task_id)
            .ok_or_else(|| ScopeError::UnknownTask(task_id.to_string()))
    }

    /// Resolves a (task, topic) pair. Any topic that is not listed under the
    /// task is a mismatch, whether or not another task defines it.
    pub fn topic(&self, task_id: &str, topic_id: &str) -> Result<&TopicDef, ScopeError> {
        self.task(task_id)?
            .topic(topic_id)
            .ok_or_else(|| ScopeError::TopicTaskMismatch {
                task_id: task_id.to_string(),
                topic_id: topic_id.to_string(),
            })
    }

    /// Finds the task owning a topic id when no task scope is known.
    pub fn owner_of_topic(&self, topic_id: &str) -> Result<&TaskDef, ScopeError> {
        self.tasks
            .iter()
            .find(|t| t.topic(topic_id).is_some())
            .ok_or_else(|| ScopeError::UnknownTopic(topic_id.to_string()))
    }

    /// Returns a copy with one keyword appended to a topic's lexicon.
    pub fn with_keyword(
        &self,
        task_id: &str,
        topic_id: &str,
        keyword: &str,
    ) -> Result<Taxonomy, TaxonomyError> {
        let mut tasks = self.tasks.clone();
        let topic = tasks
            .iter_mut()
            .find(|t| t.task_id == task_id)
            .and_then(|t| t.topics.iter_mut().find(|p| p.topic_id == topic_id))
            .ok_or_else(|| TaxonomyError::invalid(format!("{task_id}/{topic_id}"), "not found"))?;
        if !topic.keywords.iter().any(|k| k == keyword) {
            topic.keywords.push(keyword.to_string());
        }
        Taxonomy::new(tasks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_fixture_has_three_tasks() {
        let taxonomy = Taxonomy::reference();
        let names: Vec<_> = taxonomy.tasks().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names.len(), 3);
        for expected in ["Content Consumption", "Lifestyle Optimization", "Career Development"] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        let lifestyle = taxonomy.task("lifestyle").unwrap();
        let topics: Vec<_> = lifestyle.topics.iter().map(|t| t.topic_id.as_str()).collect();
        assert_eq!(topics, ["fitness", "nutrition", "sleep"]);
    }

    #[test]
    fn zero_tasks_rejected() {
        let err = Taxonomy::from_json(r#"{"tasks": []}"#).unwrap_err();
        assert!(matches!(err, TaxonomyError::Validation { .. }));
    }

    #[test]
    fn duplicate_task_id_named_in_error() {
        let doc = r#"{"tasks": [
            {"task_id": "lifestyle", "name": "A", "description": "", "topics": [
                {"topic_id": "fitness", "name": "fitness", "keywords": ["gym"]}]},
            {"task_id": "lifestyle", "name": "B", "description": "", "topics": [
                {"topic_id": "sleep", "name": "sleep", "keywords": ["nap"]}]}
        ]}"#;
        match Taxonomy::from_json(doc).unwrap_err() {
            TaxonomyError::Validation { entry, .. } => assert_eq!(entry, "lifestyle"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_keywords_and_uppercase_rejected() {
        let empty = r#"{"tasks": [{"task_id": "t", "name": "T", "topics": [
            {"topic_id": "p", "name": "p", "keywords": []}]}]}"#;
        let err = Taxonomy::from_json(empty).unwrap_err();
        assert!(err.to_string().contains("t/p"));

        let upper = r#"{"tasks": [{"task_id": "t", "name": "T", "topics": [
            {"topic_id": "p", "name": "p", "keywords": ["Gym"]}]}]}"#;
        assert!(Taxonomy::from_json(upper).is_err());
    }

    #[test]
    fn duplicate_topic_within_task_rejected() {
        let doc = r#"{"tasks": [{"task_id": "t", "name": "T", "topics": [
            {"topic_id": "p", "name": "p", "keywords": ["a1"]},
            {"topic_id": "p", "name": "q", "keywords": ["b1"]}]}]}"#;
        assert!(Taxonomy::from_json(doc).is_err());
    }

    #[test]
    fn malformed_document_is_parse_error() {
        assert!(matches!(
            Taxonomy::from_json("{\"tasks\": [").unwrap_err(),
            TaxonomyError::Parse(_)
        ));
    }

    #[test]
    fn scope_lookups() {
        let taxonomy = Taxonomy::reference();
        assert!(taxonomy.topic("lifestyle", "fitness").is_ok());
        assert_eq!(
            taxonomy.topic("lifestyle", "compilers").unwrap_err(),
            ScopeError::TopicTaskMismatch {
                task_id: "lifestyle".into(),
                topic_id: "compilers".into()
            }
        );
        assert_eq!(
            taxonomy.task("gardening").unwrap_err(),
            ScopeError::UnknownTask("gardening".into())
        );
        assert_eq!(taxonomy.owner_of_topic("music").unwrap().task_id, "content");
        assert!(matches!(
            taxonomy.owner_of_topic("compilers"),
            Err(ScopeError::UnknownTopic(_))
        ));
    }
}
