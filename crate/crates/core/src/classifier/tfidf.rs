use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sparse::{cosine, DocVector};
use super::tokenize::tokenize;
use super::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifierError {
    #[error("cannot fit a model on an empty corpus")]
    EmptyCorpus,
    #[error("binary classifier received {found} distinct labels")]
    MoreThanTwoLabels { found: usize },
    #[error("no labeled documents for class `{0}`")]
    MissingCentroid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc<L> {
    pub text: String,
    pub label: L,
}

impl<L> LabeledDoc<L> {
    pub fn new(text: impl Into<String>, label: L) -> Self {
        LabeledDoc { text: text.into(), label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore<L, S> {
    pub label: L,
    pub similarity: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification<L, S> {
    pub predicted: L,
    /// Positive class first, then negative.
    pub scores: [ClassScore<L, S>; 2],
}

/// Fitted vocabulary, smoothed idf weights and per-class centroids.
///
/// A fitted model never changes; refitting builds a new one.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel<S, L> {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    idf: Vec<S>,
    doc_count: usize,
    centroids: BTreeMap<L, DocVector<S>>,
}

impl<S: Scalar, L: Ord + Clone + Display> TfIdfModel<S, L> {
    /// Fits vocabulary, idf and centroids on a labeled corpus with at most
    /// two classes.
    ///
    /// Terms are indexed in order of first appearance, a document's new
    /// terms being added lexicographically. `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
    /// Each centroid is the normalized mean of its class's normalized
    /// document vectors.
    pub fn fit(docs: &[LabeledDoc<L>]) -> Result<Self, ClassifierError> {
        if docs.is_empty() {
            return Err(ClassifierError::EmptyCorpus);
        }
        let labels: BTreeSet<&L> = docs.iter().map(|d| &d.label).collect();
        if labels.len() > 2 {
            return Err(ClassifierError::MoreThanTwoLabels { found: labels.len() });
        }

        let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokenize(&d.text)).collect();
        let mut terms = Vec::new();
        let mut index = HashMap::new();
        let mut doc_freq: Vec<usize> = Vec::new();
        for tokens in &tokenized {
            let distinct: BTreeSet<&String> = tokens.iter().collect();
            for term in distinct {
                let idx = *index.entry(term.clone()).or_insert_with(|| {
                    terms.push(term.clone());
                    doc_freq.push(0);
                    terms.len() - 1
                });
                doc_freq[idx] += 1;
            }
        }

        let n = S::from_usize(docs.len()).expect("doc count fits scalar");
        let idf = doc_freq
            .iter()
            .map(|&df| {
                let df = S::from_usize(df).expect("df fits scalar");
                ((S::one() + n) / (S::one() + df)).ln() + S::one()
            })
            .collect();

        let mut model = TfIdfModel {
            terms,
            index,
            doc_freq,
            idf,
            doc_count: docs.len(),
            centroids: BTreeMap::new(),
        };

        let mut sums: BTreeMap<L, (DocVector<S>, usize)> = BTreeMap::new();
        for (doc, tokens) in docs.iter().zip(&tokenized) {
            let v = model.weigh(tokens);
            let slot = sums
                .entry(doc.label.clone())
                .or_insert_with(|| (DocVector::zero(), 0));
            slot.0 = slot.0.add(&v);
            slot.1 += 1;
        }
        model.centroids = sums
            .into_iter()
            .map(|(label, (sum, count))| {
                let mean = sum.scale(S::one() / S::from_usize(count).expect("count fits scalar"));
                (label, mean.normalized())
            })
            .collect();
        Ok(model)
    }

    fn weigh(&self, tokens: &[String]) -> DocVector<S> {
        DocVector::from_pairs(
            tokens
                .iter()
                .filter_map(|t| self.index.get(t))
                .map(|&i| (i, self.idf[i])),
        )
        .normalized()
    }

    /// Normalized tf-idf vector; out-of-vocabulary terms are ignored.
    pub fn vectorize(&self, text: &str) -> DocVector<S> {
        self.weigh(&tokenize(text))
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.terms
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<S> {
        self.term_index(term).map(|i| self.idf[i])
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.term_index(term).map(|i| self.doc_freq[i])
    }

    pub fn centroid(&self, label: &L) -> Option<&DocVector<S>> {
        self.centroids.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &L> {
        self.centroids.keys()
    }

    /// Nearest-centroid prediction by cosine similarity. An exact tie goes
    /// to `negative`.
    pub fn classify(&self, text: &str, positive: &L, negative: &L) -> Result<Classification<L, S>, ClassifierError> {
        let pos_centroid = self
            .centroid(positive)
            .ok_or_else(|| ClassifierError::MissingCentroid(positive.to_string()))?;
        let neg_centroid = self
            .centroid(negative)
            .ok_or_else(|| ClassifierError::MissingCentroid(negative.to_string()))?;
        let query = self.vectorize(text);
        let pos = cosine(&query, pos_centroid);
        let neg = cosine(&query, neg_centroid);
        let predicted = if pos > neg { positive } else { negative };
        Ok(Classification {
            predicted: predicted.clone(),
            scores: [
                ClassScore { label: positive.clone(), similarity: pos },
                ClassScore { label: negative.clone(), similarity: neg },
            ],
        })
    }
}
