#![allow(dead_code)]
//! Shared oracles, generators and drivers for the integration suites.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use persopilot_core::classifier::STOPWORDS;
use persopilot_core::engine::{Engine, NewUser};
use persopilot_core::graph::{PersonaGraph, PersonaTriple, Relation, TripleId};
use persopilot_core::labeling::{SeedDocs, TaskSpec};
use persopilot_core::llm::FallbackLlm;
use persopilot_core::recommender::Recommendation;
use persopilot_core::store::StoreSnapshot;
use persopilot_core::Taxonomy;
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fixed-seed proptest configuration.
pub fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5EED_CAFE),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

// ---------------------------------------------------------------------------
// Classifier oracle: tf-idf, centroids and cosines recomputed from scratch
// with string-keyed maps.

pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            current.push(c);
        } else if !current.is_empty() {
            let token = current.to_lowercase();
            if token.chars().count() > 1 && !STOPWORDS.iter().any(|s| *s == token) {
                out.push(token);
            }
            current.clear();
        }
    }
    out
}

type Vector = BTreeMap<String, f64>;

fn unit(v: Vector) -> Vector {
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Vector::new();
    }
    v.into_iter().map(|(k, x)| (k, x / norm)).collect()
}

fn cos(a: &Vector, b: &Vector) -> f64 {
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().map(|(k, x)| x * b.get(k).copied().unwrap_or(0.0)).sum();
    (dot / (na * nb)).min(1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct OracleVerdict {
    pub positive: bool,
    pub pos: f64,
    pub neg: f64,
}

/// `docs` pairs a text with `true` for the positive class.
pub fn oracle_classify(docs: &[(String, bool)], query: &str) -> OracleVerdict {
    let n = docs.len() as f64;
    let tokenized: Vec<Vec<String>> = docs.iter().map(|(t, _)| oracle_tokens(t)).collect();
    let vocab: BTreeSet<&String> = tokenized.iter().flatten().collect();
    let idf: BTreeMap<&str, f64> = vocab
        .iter()
        .map(|term| {
            let df = tokenized.iter().filter(|d| d.contains(term)).count() as f64;
            (term.as_str(), ((1.0 + n) / (1.0 + df)).ln() + 1.0)
        })
        .collect();
    let weigh = |tokens: &[String]| -> Vector {
        let mut v = Vector::new();
        for t in tokens {
            if let Some(w) = idf.get(t.as_str()) {
                *v.entry(t.clone()).or_insert(0.0) += w;
            }
        }
        unit(v)
    };
    let centroid = |label: bool| -> Vector {
        let members: Vec<Vector> = docs
            .iter()
            .zip(&tokenized)
            .filter(|((_, l), _)| *l == label)
            .map(|(_, toks)| weigh(toks))
            .collect();
        let mut sum = Vector::new();
        for v in &members {
            for (k, x) in v {
                *sum.entry(k.clone()).or_insert(0.0) += x;
            }
        }
        let count = members.len() as f64;
        unit(sum.into_iter().map(|(k, x)| (k, x / count)).collect())
    };
    let q = weigh(&oracle_tokens(query));
    let pos = cos(&q, &centroid(true));
    let neg = cos(&q, &centroid(false));
    OracleVerdict { positive: pos > neg, pos, neg }
}

pub struct Corpus {
    pub docs: Vec<(String, bool)>,
    pub queries: Vec<String>,
}

/// Corpus of at most 10 documents over at most 30 terms, both classes
/// present, with stopwords, punctuation and case noise mixed in.
pub fn random_corpus(seed: u64, queries: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab_size = rng.random_range(4..=30);
    let vocab: Vec<String> = (0..vocab_size).map(|i| format!("term{i:02}")).collect();
    let noise = ["the", "a", "and", "I", ",", "!", "x", "--"];
    let sentence = |rng: &mut ChaCha8Rng, extra_oov: bool| -> String {
        let len = rng.random_range(1..=8);
        let mut words: Vec<String> = Vec::new();
        for _ in 0..len {
            let mut w = vocab.choose(rng).unwrap().clone();
            if rng.random_bool(0.2) {
                w = w.to_uppercase();
            }
            words.push(w);
            if rng.random_bool(0.3) {
                words.push(noise.choose(rng).unwrap().to_string());
            }
        }
        if extra_oov && rng.random_bool(0.3) {
            words.push("unseenword".into());
        }
        words.join(" ")
    };
    let n_docs = rng.random_range(2..=10);
    let mut docs: Vec<(String, bool)> = (0..n_docs)
        .map(|i| {
            let label = match i {
                0 => true,
                1 => false,
                _ => rng.random_bool(0.5),
            };
            (sentence(&mut rng, false), label)
        })
        .collect();
    docs.shuffle(&mut rng);
    let queries = (0..queries).map(|_| sentence(&mut rng, true)).collect();
    Corpus { docs, queries }
}

// ---------------------------------------------------------------------------
// Graph and recommender generators.

pub const USERS: [&str; 10] = ["u0", "u1", "u2", "u3", "u4", "u5", "u6", "u7", "u8", "u9"];

pub const OBJECTS: [&str; 8] = ["yoga", "Yoga ", "gym", "JAZZ", "jazz", "tea", "python", "morning run"];

/// (task, topic) pairs of the reference taxonomy.
pub fn scopes() -> &'static [(String, String)] {
    static SCOPES: OnceLock<Vec<(String, String)>> = OnceLock::new();
    SCOPES.get_or_init(|| {
        Taxonomy::reference()
            .tasks()
            .iter()
            .flat_map(|t| t.topics.iter().map(move |p| (t.task_id.clone(), p.topic_id.clone())))
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct Fact {
    pub user: usize,
    pub scope: usize,
    pub relation: Relation,
    pub object: String,
}

pub fn relation_strategy() -> impl Strategy<Value = Relation> {
    prop::sample::select(Relation::ALL.to_vec())
}

pub fn fact_strategy(users: usize) -> impl Strategy<Value = Fact> {
    let scope_count = scopes().len();
    (0..users, 0..scope_count, relation_strategy(), prop::sample::select(OBJECTS.to_vec())).prop_map(
        |(user, scope, relation, object)| Fact { user, scope, relation, object: object.to_string() },
    )
}

/// A population plus one recommendation request against it.
#[derive(Debug, Clone)]
pub struct RecCase {
    pub users: usize,
    pub facts: Vec<Fact>,
    pub requester: usize,
    pub task: String,
    pub topic: Option<String>,
    pub k: usize,
}

pub fn rec_case_strategy() -> impl Strategy<Value = RecCase> {
    (1usize..=10)
        .prop_flat_map(|users| {
            (
                Just(users),
                prop::collection::vec(fact_strategy(users), 0..=20),
                0..users,
                0..scopes().len(),
                any::<bool>(),
                1usize..8,
            )
        })
        .prop_map(|(users, facts, requester, scope, with_topic, k)| {
            let (task, topic) = scopes()[scope].clone();
            RecCase { users, facts, requester, task, topic: with_topic.then_some(topic), k }
        })
}

const CHAT_WORDS: [&str; 34] = [
    "I", "love", "hate", "want", "have", "am", "enjoy", "avoid", "others", "recommend", "suggestions",
    "community", "popular", "insights", "what", "is", "and", "but", "yoga", "jogging", "coffee", "sleep",
    "jazz", "novels", "movies", "python", "mentor", "conference", "morning", "training", "?", ",", "!", "ça",
];

/// Free-form chat messages mixing preference, community and question cues.
pub fn message_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(CHAT_WORDS.to_vec()), 1..10).prop_map(|w| w.join(" "))
}

pub fn chat_task_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["lifestyle", "content", "career"])
}

pub fn triple_for(fact: &Fact, id: u64) -> PersonaTriple {
    let (task_id, topic_id) = scopes()[fact.scope].clone();
    PersonaTriple {
        triple_id: TripleId(id),
        user_id: USERS[fact.user].to_string(),
        task_id,
        topic_id,
        relation: fact.relation,
        object: fact.object.clone(),
        source_utterance: String::new(),
        created_at: id,
    }
}

/// One graph per user (all `users` of them), facts added in order.
pub fn build_graphs(facts: &[Fact], users: usize, taxonomy: &Taxonomy) -> Vec<PersonaGraph> {
    let mut graphs: Vec<PersonaGraph> = USERS[..users].iter().map(|u| PersonaGraph::new(*u)).collect();
    for (i, fact) in facts.iter().enumerate() {
        graphs[fact.user].add_triple(triple_for(fact, i as u64 + 1), taxonomy).unwrap();
    }
    graphs
}

fn norm(object: &str) -> String {
    object.trim().to_lowercase()
}

/// Enumerate, count, filter, sort: recommendations without the index.
pub fn oracle_recommend(
    graphs: &[PersonaGraph],
    requester: &PersonaGraph,
    task_id: &str,
    topic_id: Option<&str>,
    k: usize,
) -> Vec<Recommendation> {
    // (topic, normalized object) -> (display, users)
    let mut table: Vec<((String, String), String, BTreeSet<String>)> = Vec::new();
    for graph in graphs {
        for t in &graph.triples {
            let counts = matches!(t.relation, Relation::Likes | Relation::Has | Relation::Does | Relation::Wants);
            if !counts || t.task_id != task_id || topic_id.is_some_and(|p| p != t.topic_id) {
                continue;
            }
            let key = (t.topic_id.clone(), norm(&t.object));
            match table.iter_mut().find(|(k, _, _)| *k == key) {
                Some((_, _, users)) => {
                    users.insert(t.user_id.clone());
                }
                None => table.push((key, t.object.trim().to_string(), BTreeSet::from([t.user_id.clone()]))),
            }
        }
    }
    let held: BTreeSet<String> = requester
        .triples
        .iter()
        .filter(|t| t.task_id == task_id)
        .map(|t| norm(&t.object))
        .collect();
    let mut out: Vec<Recommendation> = table
        .into_iter()
        .filter(|((_, o), _, _)| !held.contains(o))
        .map(|((topic, _), display, users)| Recommendation { topic_id: topic, object: display, support: users.len() })
        .collect();
    out.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(a.object.cmp(&b.object))
            .then(a.topic_id.cmp(&b.topic_id))
    });
    out.truncate(k);
    out
}

// ---------------------------------------------------------------------------
// Engine-driven drivers.

pub fn fallback_engine(seed: u64) -> Engine {
    Engine::in_memory(Taxonomy::reference(), Arc::new(FallbackLlm), seed)
}

pub fn add_user(engine: &mut Engine, id: &str) {
    engine.create_user(NewUser { user_id: id.into(), ..NewUser::default() }).unwrap();
}

/// Three users, two with some history, so recommendations have material.
pub fn populated_engine() -> Engine {
    let mut e = fallback_engine(3);
    for u in ["ana", "ben", "cy"] {
        add_user(&mut e, u);
    }
    for (u, t, m) in [
        ("ana", "lifestyle", "I love yoga and coffee"),
        ("ben", "lifestyle", "I enjoy jogging and yoga"),
        ("ben", "content", "I love jazz"),
        ("ana", "career", "I want a python certification"),
    ] {
        e.chat(u, t, m).unwrap();
    }
    e
}

/// Preference statements whose keywords separate the two classes.
pub const INTROVERT_LINES: [(&str, &str); 8] = [
    ("content", "I love reading novels"),
    ("content", "I enjoy poetry"),
    ("content", "I like audiobook fiction"),
    ("content", "I love documentaries"),
    ("content", "I enjoy a quiet podcast"),
    ("lifestyle", "I like yoga"),
    ("lifestyle", "I love tea"),
    ("lifestyle", "I enjoy a long nap"),
];

pub const EXTROVERT_LINES: [(&str, &str); 8] = [
    ("content", "I love rock concerts"),
    ("content", "I enjoy jazz band nights"),
    ("lifestyle", "I love the gym"),
    ("lifestyle", "I enjoy running"),
    ("career", "I love networking"),
    ("career", "I enjoy conferences"),
    ("career", "I like meetup events"),
    ("career", "I love mentorship"),
];

pub fn introvert_spec() -> TaskSpec {
    TaskSpec {
        name: "Introvert Detection".into(),
        description: "Users who prefer reading, poetry, podcasts and quiet solitary activities".into(),
        positive_label: "introvert".into(),
        negative_label: "extrovert".into(),
        offer_message: "Enjoy a free month of audiobooks!".into(),
        threshold: None,
        seed_docs: SeedDocs::default(),
        persona_task: None,
    }
}

/// Creates a user and states three lines from the class pool.
pub fn synthetic_user(engine: &mut Engine, id: &str, introvert: bool, rng: &mut ChaCha8Rng) {
    add_user(engine, id);
    let pool: &[(&str, &str)] = if introvert { &INTROVERT_LINES } else { &EXTROVERT_LINES };
    for (task, line) in pool.choose_multiple(rng, 3) {
        engine.chat(id, task, line).unwrap();
    }
}

#[derive(Debug, Clone)]
pub struct LoopReport {
    pub predictions: usize,
    pub matches: usize,
    pub conservation_violations: usize,
    pub ledger_shrank: bool,
    pub doc_counts: Vec<usize>,
    pub elapsed: Duration,
}

impl LoopReport {
    pub fn match_rate(&self) -> f64 {
        self.matches as f64 / self.predictions.max(1) as f64
    }
}

/// Seeds the task with 3 + 3 analyst labels, then auto-classifies
/// `unlabeled` synthetic users. Offers are answered according to the
/// generating label.
pub fn run_closed_loop(seed: u64, unlabeled: usize) -> LoopReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = fallback_engine(seed);
    let mut truth = BTreeMap::new();
    for i in 0..3 {
        for (prefix, intro) in [("seedin", true), ("seedex", false)] {
            let id = format!("{prefix}{i}");
            synthetic_user(&mut engine, &id, intro, &mut rng);
            truth.insert(id, intro);
        }
    }
    for i in 0..unlabeled {
        let id = format!("user{i:02}");
        let intro = rng.random_bool(0.5);
        synthetic_user(&mut engine, &id, intro, &mut rng);
        truth.insert(id, intro);
    }
    let ct = engine.create_classification_task(introvert_spec()).unwrap().ct_id;
    for i in 0..3 {
        engine.confirm_label(&ct, &format!("seedin{i}"), "introvert").unwrap();
        engine.confirm_label(&ct, &format!("seedex{i}"), "extrovert").unwrap();
    }

    let mut report = LoopReport {
        predictions: 0,
        matches: 0,
        conservation_violations: 0,
        ledger_shrank: false,
        doc_counts: Vec::new(),
        elapsed: Duration::ZERO,
    };
    let mut ledger_len = engine.snapshot().label_records.len();
    let mut check = |engine: &Engine, report: &mut LoopReport| {
        if !engine.stats(&ct).unwrap().is_conserved() {
            report.conservation_violations += 1;
        }
        let len = engine.snapshot().label_records.len();
        report.ledger_shrank |= len < ledger_len;
        ledger_len = len;
    };
    check(&engine, &mut report);
    for _ in 0..unlabeled {
        let outcome = engine.classify_random(&ct).unwrap();
        check(&engine, &mut report);
        let user = &outcome.prediction.user_id;
        let is_intro = truth[user];
        report.predictions += 1;
        report.doc_counts.push(outcome.prediction.training_docs);
        if (outcome.prediction.predicted_label == "introvert") == is_intro {
            report.matches += 1;
        }
        if let Some(offer) = outcome.offer {
            engine.respond_offer(&offer.offer_id, is_intro).unwrap();
            check(&engine, &mut report);
        }
    }
    report.elapsed = start.elapsed();
    report
}

/// A populated store built by random workflow calls.
pub fn random_snapshot(seed: u64) -> StoreSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = fallback_engine(seed);
    let users = rng.random_range(0..8);
    for i in 0..users {
        let id = format!("user{i}");
        engine
            .create_user(NewUser {
                user_id: id.clone(),
                name: rng.random_bool(0.5).then(|| format!("Name {i} \"quoted\" ü")),
                age: rng.random_bool(0.5).then(|| rng.random_range(18..80)),
                occupation: rng.random_bool(0.5).then(|| "nurse".to_string()),
            })
            .unwrap();
        for _ in 0..rng.random_range(0..4) {
            let pool: &[(&str, &str)] = if rng.random_bool(0.5) { &INTROVERT_LINES } else { &EXTROVERT_LINES };
            let (task, line) = pool.choose(&mut rng).unwrap();
            engine.chat(&id, task, line).unwrap();
        }
        if rng.random_bool(0.3) {
            engine.chat(&id, "lifestyle", "What is interval training?").unwrap();
        }
    }
    if users > 0 && rng.random_bool(0.7) {
        let mut spec = introvert_spec();
        spec.threshold = Some(rng.random_range(0.05..0.95));
        spec.seed_docs.positive.push("reading poetry".into());
        let ct = engine.create_classification_task(spec).unwrap().ct_id;
        engine.labeling_queue(&ct).unwrap();
        for i in 0..users {
            if rng.random_bool(0.6) {
                let label = if rng.random_bool(0.5) { "introvert" } else { "extrovert" };
                engine.confirm_label(&ct, &format!("user{i}"), label).unwrap();
            }
        }
        let report = engine.dispatch(&ct).unwrap();
        for offer in report.created {
            if rng.random_bool(0.5) {
                engine.respond_offer(&offer.offer_id, rng.random_bool(0.5)).unwrap();
            }
        }
        let _ = engine.classify_random(&ct);
    }
    engine.snapshot().clone()
}
