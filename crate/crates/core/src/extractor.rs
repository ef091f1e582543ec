//! Taxonomy-guided extraction of persona triples from a single utterance.
//!
//! The lexical backend finds taxonomy keywords as whole words, picks a
//! relation from cue words to the keyword's left within the same clause,
//! and takes a short noun phrase ending at the keyword as the object. When
//! nothing matches and a remote model is configured, extraction is delegated
//! to the model and its output is validated against the taxonomy.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_object, Relation, TripleCandidate};
use crate::llm::{extract_json_object, ChatMessage, LlmError, LlmMode, LlmPort};
use crate::taxonomy::{ScopeError, TaskDef, Taxonomy};

/// Cue words and the relation they induce, checked in this order.
const RELATION_CUES: &[(&[&str], Relation)] = &[
    (&["love", "like", "enjoy", "prefer"], Relation::Likes),
    (&["hate", "dislike", "avoid"], Relation::Dislikes),
    (&["want", "wish", "hope"], Relation::Wants),
    (&["have", "own"], Relation::Has),
    (&["am", "is", "i'm"], Relation::Is),
];

const BOUNDARY_WORDS: &[&str] = &["but", "and"];
const BOUNDARY_PUNCT: &[char] = &['.', ',', ';', '!', '?'];

/// Words that never start or extend an object phrase.
const PHRASE_EXCLUDED: &[&str] = &[
    "a", "an", "the", "i", "me", "my", "mine", "you", "your", "we", "our", "he", "she", "his",
    "her", "they", "them", "their", "it", "its", "this", "that", "these", "those", "is", "am",
    "are", "was", "were", "be", "been", "to", "of", "in", "on", "at", "for", "with", "from",
    "by", "about", "after", "before", "during", "or", "so", "if", "not", "no", "don't", "do",
    "does", "did", "really", "very", "also", "too", "just", "some", "any", "much", "more",
    "most", "lot", "lots", "go", "going", "get", "make", "play", "playing", "drink", "eat",
    "watch", "watching", "read", "listen", "listening", "try", "trying", "take", "need", "can",
    "will", "would", "should", "could", "what", "which", "who", "how", "when", "where", "why",
    "there", "here", "all", "every", "each", "start", "started", "keep", "usually", "often",
    "always", "never", "sometimes", "daily",
];

const OBJECT_PREFIX_LIMIT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Lexical,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicMatch {
    pub topic_id: String,
    pub keyword: String,
    /// Index of the matching word among the utterance's words.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedKeyword {
    pub topic_id: String,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub triples: Vec<TripleCandidate>,
    pub matched_keywords: Vec<MatchedKeyword>,
    pub backend: Backend,
    /// Cue word that decided each triple's relation (`None` = default).
    #[serde(default)]
    pub cues: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error("extraction backend failed: {0}")]
    Backend(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Boundary,
}

/// Splits into lowercase words and clause-boundary markers. Apostrophes
/// inside words are kept so that contractions such as `i'm` survive.
fn lex(utterance: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<Token>| {
        let word = current.trim_matches('\'').to_string();
        current.clear();
        if word.is_empty() {
            return;
        }
        if BOUNDARY_WORDS.contains(&word.as_str()) {
            tokens.push(Token::Boundary);
        } else {
            tokens.push(Token::Word(word));
        }
    };
    for ch in utterance.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || ch == '\'' {
            current.extend(ch.to_lowercase());
        } else {
            flush(&mut current, &mut tokens);
            if BOUNDARY_PUNCT.contains(&ch) {
                tokens.push(Token::Boundary);
            }
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Words of an utterance, each tagged with the clause it falls into.
struct Words {
    words: Vec<String>,
    clause: Vec<usize>,
}

impl Words {
    fn new(utterance: &str) -> Self {
        let mut words = Vec::new();
        let mut clause = Vec::new();
        let mut clause_id = 0;
        for token in lex(utterance) {
            match token {
                Token::Word(w) => {
                    words.push(w);
                    clause.push(clause_id);
                }
                Token::Boundary => clause_id += 1,
            }
        }
        Words { words, clause }
    }

    /// Positions left of `pos` in the same clause, nearest first.
    fn left_in_clause(&self, pos: usize) -> impl Iterator<Item = usize> + '_ {
        let clause = self.clause[pos];
        (0..pos).rev().take_while(move |&i| self.clause[i] == clause)
    }
}

pub fn relation_for_cue(word: &str) -> Option<Relation> {
    RELATION_CUES
        .iter()
        .find(|(cues, _)| cues.contains(&word))
        .map(|(_, rel)| *rel)
}

/// True when `word` is one of the relation cue words.
pub fn is_relation_cue(word: &str) -> bool {
    relation_for_cue(word).is_some()
}

/// Lowercase words of a message, using the extractor's tokenization.
pub fn words(utterance: &str) -> Vec<String> {
    Words::new(utterance).words
}

fn excluded_from_phrase(word: &str) -> bool {
    PHRASE_EXCLUDED.contains(&word) || is_relation_cue(word)
}

/// All whole-word keyword hits for the task's topics, by position.
pub fn match_topics(
    utterance: &str,
    task_id: &str,
    taxonomy: &Taxonomy,
) -> Result<Vec<TopicMatch>, ScopeError> {
    let task = taxonomy.task(task_id)?;
    Ok(scan(&Words::new(utterance), task))
}

fn scan(words: &Words, task: &TaskDef) -> Vec<TopicMatch> {
    let mut matches = Vec::new();
    for (position, word) in words.words.iter().enumerate() {
        for topic in &task.topics {
            if topic.keywords.iter().any(|k| k == word) {
                matches.push(TopicMatch {
                    topic_id: topic.topic_id.clone(),
                    keyword: word.clone(),
                    position,
                });
            }
        }
    }
    matches
}

/// Extracts triples with the lexical rules, delegating to `llm` only when
/// no keyword matched and the port is in remote mode.
pub fn extract_triples(
    utterance: &str,
    user_id: &str,
    task_id: &str,
    taxonomy: &Taxonomy,
    llm: Option<&dyn LlmPort>,
) -> Result<ExtractionResult, ExtractError> {
    let trimmed = utterance.trim();
    if trimmed.is_empty() {
        return Err(ExtractError::EmptyUtterance);
    }
    let task = taxonomy.task(task_id)?;
    let words = Words::new(trimmed);
    let matches = scan(&words, task);

    if matches.is_empty() {
        if let Some(port) = llm.filter(|p| p.mode() == LlmMode::Remote) {
            return extract_with_llm(trimmed, user_id, task_id, taxonomy, port);
        }
    }

    let mut result = ExtractionResult {
        triples: Vec::new(),
        matched_keywords: Vec::new(),
        backend: Backend::Lexical,
        cues: Vec::new(),
    };
    let mut seen = HashSet::new();
    for m in matches {
        result.matched_keywords.push(MatchedKeyword {
            topic_id: m.topic_id.clone(),
            keyword: m.keyword.clone(),
        });
        let (relation, cue) = words
            .left_in_clause(m.position)
            .find_map(|i| relation_for_cue(&words.words[i]).map(|r| (r, words.words[i].clone())))
            .map_or((Relation::Does, None), |(r, c)| (r, Some(c)));

        let prefix: Vec<usize> = words
            .left_in_clause(m.position)
            .take_while(|&i| !excluded_from_phrase(&words.words[i]))
            .take(OBJECT_PREFIX_LIMIT)
            .collect();
        let object = prefix
            .iter()
            .rev()
            .map(|&i| words.words[i].as_str())
            .chain(std::iter::once(m.keyword.as_str()))
            .collect::<Vec<_>>()
            .join(" ");

        if seen.insert((m.topic_id.clone(), relation, normalize_object(&object))) {
            result.triples.push(TripleCandidate {
                user_id: user_id.to_string(),
                task_id: task_id.to_string(),
                topic_id: m.topic_id,
                relation,
                object,
                source_utterance: trimmed.to_string(),
            });
            result.cues.push(cue);
        }
    }
    Ok(result)
}

#[derive(Debug, Deserialize)]
struct LlmTriple {
    topic_id: String,
    relation: String,
    object: String,
}

#[derive(Debug, Deserialize)]
struct LlmTriples {
    triples: Vec<LlmTriple>,
}

fn extraction_prompt(task_id: &str, taxonomy: &Taxonomy) -> String {
    let task = taxonomy.task(task_id).expect("checked by caller");
    let topics: Vec<String> = task
        .topics
        .iter()
        .map(|t| format!("- {} ({}): {}", t.topic_id, t.name, t.keywords.join(", ")))
        .collect();
    let relations: Vec<&str> = Relation::ALL.iter().map(|r| r.as_str()).collect();
    format!(
        "Extract persona facts for the task \"{}\" from the user's message.\n\
         Allowed topics:\n{}\n\
         Allowed relations: {}.\n\
         Reply with a JSON object only: {{\"triples\": [{{\"topic_id\": \"...\", \"relation\": \"...\", \"object\": \"...\"}}]}}. \
         Use an empty list when the message states no preference.",
        task.name,
        topics.join("\n"),
        relations.join(", ")
    )
}

fn parse_relation(raw: &str) -> Option<Relation> {
    let raw = raw.trim().to_ascii_lowercase();
    Relation::ALL.into_iter().find(|r| r.as_str() == raw)
}

fn extract_with_llm(
    utterance: &str,
    user_id: &str,
    task_id: &str,
    taxonomy: &Taxonomy,
    port: &dyn LlmPort,
) -> Result<ExtractionResult, ExtractError> {
    let messages = [
        ChatMessage::system(extraction_prompt(task_id, taxonomy)),
        ChatMessage::user(utterance),
    ];
    let raw = port.complete(&messages)?;
    let body = extract_json_object(&raw)
        .ok_or_else(|| LlmError::BadResponse("no JSON object in extraction output".into()))?;
    let parsed: LlmTriples =
        serde_json::from_str(body).map_err(|e| LlmError::BadResponse(e.to_string()))?;

    let mut result = ExtractionResult {
        triples: Vec::new(),
        matched_keywords: Vec::new(),
        backend: Backend::Llm,
        cues: Vec::new(),
    };
    let mut seen = HashSet::new();
    for t in parsed.triples {
        if taxonomy.topic(task_id, &t.topic_id).is_err() {
            log::warn!("dropping model triple with topic `{}` outside task `{task_id}`", t.topic_id);
            continue;
        }
        let Some(relation) = parse_relation(&t.relation) else {
            log::warn!("dropping model triple with unknown relation `{}`", t.relation);
            continue;
        };
        let object = normalize_object(&t.object);
        if object.is_empty() || !seen.insert((t.topic_id.clone(), relation, object.clone())) {
            continue;
        }
        result.triples.push(TripleCandidate {
            user_id: user_id.to_string(),
            task_id: task_id.to_string(),
            topic_id: t.topic_id,
            relation,
            object,
            source_utterance: utterance.to_string(),
        });
        result.cues.push(None);
    }
    Ok(result)
}
