//! TF-IDF vectorization and nearest-centroid binary classification.
//!
//! All arithmetic is generic over [`Scalar`]; the crate root exposes `f64`
//! aliases for everyday use.

mod sparse;
mod tfidf;
mod tokenize;

pub use sparse::{cosine, DocVector};
pub use tfidf::{ClassScore, Classification, ClassifierError, LabeledDoc, TfIdfModel};
pub use tokenize::{tokenize, STOPWORDS};

use std::fmt::{Debug, Display};

/// Floating-point scalar the classifier can compute in.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + num_traits::NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Absolute tolerance used when checking unit norms.
    fn norm_tolerance() -> Self;
}

impl Scalar for f32 {
    fn norm_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn norm_tolerance() -> Self {
        1e-9
    }
}
