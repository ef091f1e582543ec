//! Personalization service core.
//!
//! End users chat with a tool-routing agent that grows a task-filtered
//! persona graph and serves community recommendations. Analysts label users
//! for binary classification tasks; confirmed labels and offer responses
//! train a TF-IDF nearest-centroid classifier.
//!
//! The classifier is generic over its scalar type. The aliases below fix
//! the scalar to `f64` (or `f32`) and labels to `String`.

pub mod agent;
pub mod classifier;
pub mod engine;
pub mod extractor;
pub mod graph;
pub mod labeling;
pub mod llm;
pub mod offers;
pub mod recommender;
pub mod sequence;
pub mod store;
pub mod taxonomy;

pub use engine::{Engine, EngineError};
pub use graph::{PersonaGraph, PersonaSummary, PersonaTriple, Relation};
pub use taxonomy::Taxonomy;

pub type TfIdfModel = classifier::TfIdfModel<f64, String>;
pub type TfIdfModelF32 = classifier::TfIdfModel<f32, String>;
pub type DocVector = classifier::DocVector<f64>;
pub type DocVectorF32 = classifier::DocVector<f32>;
pub type ClassScore = classifier::ClassScore<String, f64>;
pub type Classification = classifier::Classification<String, f64>;
pub type LabeledDoc = classifier::LabeledDoc<String>;
