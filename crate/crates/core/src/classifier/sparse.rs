use std::collections::BTreeMap;

use super::Scalar;

/// Sparse non-negative vector over vocabulary indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector<S> {
    /// Sorted by index; zero weights are never stored.
    entries: Vec<(usize, S)>,
}

impl<S: Scalar> DocVector<S> {
    pub fn zero() -> Self {
        DocVector { entries: Vec::new() }
    }

    /// Builds a vector from (index, weight) pairs, summing repeated indices.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, S)>) -> Self {
        let mut acc: BTreeMap<usize, S> = BTreeMap::new();
        for (idx, w) in pairs {
            *acc.entry(idx).or_insert_with(S::zero) += w;
        }
        DocVector {
            entries: acc.into_iter().filter(|(_, w)| !w.is_zero()).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, S)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> S {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map_or(S::zero(), |pos| self.entries[pos].1)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> S {
        self.entries
            .iter()
            .fold(S::zero(), |acc, (_, w)| acc + *w * *w)
            .sqrt()
    }

    pub fn dot(&self, other: &Self) -> S {
        let (mut i, mut j) = (0, 0);
        let mut sum = S::zero();
        while i < self.entries.len() && j < other.entries.len() {
            let (a_idx, a_w) = self.entries[i];
            let (b_idx, b_w) = other.entries[j];
            match a_idx.cmp(&b_idx) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a_w * b_w;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm.is_zero() {
            return DocVector::zero();
        }
        DocVector {
            entries: self.entries.iter().map(|&(i, w)| (i, w / norm)).collect(),
        }
    }

    pub(crate) fn scale(&self, factor: S) -> Self {
        DocVector::from_pairs(self.entries.iter().map(|&(i, w)| (i, w * factor)))
    }

    pub(crate) fn add(&self, other: &Self) -> Self {
        DocVector::from_pairs(self.entries.iter().chain(other.entries.iter()).copied())
    }
}

/// `dot(a, b) / (|a| |b|)`, or zero when either vector is zero.
pub fn cosine<S: Scalar>(a: &DocVector<S>, b: &DocVector<S>) -> S {
    let denom = a.norm() * b.norm();
    if denom.is_zero() {
        return S::zero();
    }
    // clamp rounding overshoot past 1
    (a.dot(b) / denom).min(S::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_similarity_is_one() {
        let v = DocVector::from_pairs([(0, 0.3f64), (4, 1.7), (9, 0.2)]);
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_support_is_orthogonal() {
        let a = DocVector::from_pairs([(0, 1.0f64), (2, 3.0)]);
        let b = DocVector::from_pairs([(1, 2.0f64), (3, 5.0)]);
        assert_eq!(cosine(&a, &b), 0.0);
    }

    #[test]
    fn zero_vector_convention() {
        let v = DocVector::from_pairs([(0, 1.0f64)]);
        assert_eq!(cosine(&DocVector::zero(), &v), 0.0);
        assert_eq!(cosine(&v, &DocVector::zero()), 0.0);
        assert!(DocVector::<f64>::zero().normalized().is_zero());
    }

    #[test]
    fn from_pairs_merges_and_drops_zeros() {
        let v = DocVector::from_pairs([(3, 1.0f32), (1, 2.0), (3, 0.5), (7, 0.0)]);
        assert_eq!(v.entries(), &[(1, 2.0), (3, 1.5)]);
        assert_eq!(v.get(3), 1.5);
        assert_eq!(v.get(7), 0.0);
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let a = DocVector::from_pairs([(0, 1.0f64), (1, 2.0)]);
        let b = DocVector::from_pairs([(0, 2.0f64), (1, 1.0)]);
        let expected = 4.0 / 5.0;
        assert!((cosine(&a, &b) - expected).abs() < 1e-12);
        assert!((cosine(&a.scale(7.0), &b) - expected).abs() < 1e-12);
    }
}
