//! Retrieval over analytical SQL function documentation.
//!
//! [`FunctionIndex`] ranks docs by term-frequency cosine similarity with exact
//! integer comparisons, so rankings are identical on every platform.
//! [`EmbeddingIndex`] is the seam for a learned embedding backend.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_K: usize = 15;

const SHIPPED_DOCS: &str = include_str!("../knowledge/functions.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionCategory {
    Aggregate,
    Window,
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub name: String,
    pub signature: String,
    pub description: String,
    pub category: FunctionCategory,
}

impl FunctionDoc {
    fn text(&self) -> String {
        format!("{} {} {}", self.name, self.signature, self.description)
    }
}

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("duplicate function name `{0}`")]
    DuplicateFunctionName(String),
    #[error("function `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("no function docs")]
    Empty,
    #[error("cannot read function docs: {0}")]
    Io(String),
    #[error("malformed function docs: {0}")]
    Json(String),
}

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn load_docs(path: &Path) -> Result<Vec<FunctionDoc>, KnowledgeError> {
    let text = std::fs::read_to_string(path).map_err(|e| KnowledgeError::Io(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| KnowledgeError::Json(e.to_string()))
}

pub fn shipped_docs() -> Vec<FunctionDoc> {
    serde_json::from_str(SHIPPED_DOCS).expect("shipped function docs are valid")
}

/// Anything that can rank function docs for a query.
pub trait FunctionRetriever: Send + Sync {
    fn top_k(&self, query: &str, k: usize) -> Vec<&FunctionDoc>;
    fn docs(&self) -> &[FunctionDoc];
}

/// Sparse term-frequency vector: (term id, count), sorted by term id.
type TfVector = Vec<(usize, u64)>;

#[derive(Debug, Clone)]
pub struct FunctionIndex {
    docs: Vec<FunctionDoc>,
    vocabulary: BTreeMap<String, usize>,
    vectors: Vec<TfVector>,
    norms_sq: Vec<u64>,
}

impl FunctionIndex {
    pub fn build(docs: Vec<FunctionDoc>) -> Result<Self, KnowledgeError> {
        if docs.is_empty() {
            return Err(KnowledgeError::Empty);
        }
        let mut seen = BTreeSet::new();
        for d in &docs {
            if !seen.insert(d.name.as_str()) {
                return Err(KnowledgeError::DuplicateFunctionName(d.name.clone()));
            }
            if d.description.trim().is_empty() {
                return Err(KnowledgeError::EmptyDescription(d.name.clone()));
            }
        }
        let terms: BTreeSet<String> = docs.iter().flat_map(|d| tokenize(&d.text()).collect::<Vec<_>>()).collect();
        let vocabulary: BTreeMap<String, usize> =
            terms.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        let vectors: Vec<TfVector> = docs.iter().map(|d| vectorize(&vocabulary, &d.text())).collect();
        let norms_sq = vectors.iter().map(|v| v.iter().map(|(_, c)| c * c).sum()).collect();
        Ok(Self { docs, vocabulary, vectors, norms_sq })
    }

    pub fn shipped() -> Self {
        Self::build(shipped_docs()).expect("shipped function docs index")
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Cosine similarity of `query` against every doc, in doc order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let q = vectorize(&self.vocabulary, query);
        let q_norm = (q.iter().map(|(_, c)| c * c).sum::<u64>() as f64).sqrt();
        self.vectors
            .iter()
            .zip(&self.norms_sq)
            .map(|(v, &n)| {
                if q_norm == 0.0 || n == 0 {
                    0.0
                } else {
                    dot(&q, v) as f64 / (q_norm * (n as f64).sqrt())
                }
            })
            .collect()
    }
}

impl FunctionRetriever for FunctionIndex {
    /// Descending cosine, ties by name. Cosines are compared exactly as
    /// `dot_a^2 * |b|^2` against `dot_b^2 * |a|^2` (the query norm cancels).
    fn top_k(&self, query: &str, k: usize) -> Vec<&FunctionDoc> {
        let q = vectorize(&self.vocabulary, query);
        let dots: Vec<u128> = self.vectors.iter().map(|v| dot(&q, v) as u128).collect();
        let mut order: Vec<usize> = (0..self.docs.len()).collect();
        order.sort_by(|&a, &b| {
            let lhs = dots[a] * dots[a] * self.norms_sq[b] as u128;
            let rhs = dots[b] * dots[b] * self.norms_sq[a] as u128;
            rhs.cmp(&lhs).then_with(|| self.docs[a].name.cmp(&self.docs[b].name))
        });
        order.into_iter().take(k).map(|i| &self.docs[i]).collect()
    }

    fn docs(&self) -> &[FunctionDoc] {
        &self.docs
    }
}

fn vectorize(vocabulary: &BTreeMap<String, usize>, text: &str) -> TfVector {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for t in tokenize(text) {
        if let Some(&id) = vocabulary.get(&t) {
            *counts.entry(id).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

fn dot(a: &TfVector, b: &TfVector) -> u64 {
    let (mut i, mut j, mut acc) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Text embedding backend for [`EmbeddingIndex`].
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
}

pub struct EmbeddingIndex<E> {
    embedder: E,
    docs: Vec<FunctionDoc>,
    vectors: Vec<Vec<f64>>,
}

impl<E: Embedder> EmbeddingIndex<E> {
    pub fn build(embedder: E, docs: Vec<FunctionDoc>) -> Result<Self, KnowledgeError> {
        // Reuse the TF index for validation.
        FunctionIndex::build(docs.clone())?;
        let vectors = docs.iter().map(|d| embedder.embed(&d.text())).collect();
        Ok(Self { embedder, docs, vectors })
    }
}

impl<E: Embedder> FunctionRetriever for EmbeddingIndex<E> {
    fn top_k(&self, query: &str, k: usize) -> Vec<&FunctionDoc> {
        let q = self.embedder.embed(query);
        let scores: Vec<f64> = self.vectors.iter().map(|v| cosine(&q, v)).collect();
        let mut order: Vec<usize> = (0..self.docs.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| self.docs[a].name.cmp(&self.docs[b].name))
        });
        order.into_iter().take(k).map(|i| &self.docs[i]).collect()
    }

    fn docs(&self) -> &[FunctionDoc] {
        &self.docs
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        d / (na * nb)
    }
}

/// Prompt rendering, one doc per line.
pub fn render_docs(docs: &[&FunctionDoc]) -> String {
    if docs.is_empty() {
        return "(none)".to_string();
    }
    docs.iter()
        .map(|d| format!("- {}: {}", d.signature, d.description))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(name: &str, description: &str) -> FunctionDoc {
        FunctionDoc {
            name: name.into(),
            signature: format!("{name}(x)"),
            description: description.into(),
            category: FunctionCategory::Aggregate,
        }
    }

    #[test]
    fn single_doc_and_duplicates() {
        let idx = FunctionIndex::build(vec![doc("sum", "adds")]).unwrap();
        assert_eq!(idx.len(), 1);
        let err = FunctionIndex::build(vec![doc("corr", "a"), doc("corr", "b")]).unwrap_err();
        assert!(matches!(err, KnowledgeError::DuplicateFunctionName(n) if n == "corr"));
        assert!(matches!(FunctionIndex::build(vec![]), Err(KnowledgeError::Empty)));
    }

    #[test]
    fn self_query_ranks_first() {
        let idx = FunctionIndex::shipped();
        for d in idx.docs() {
            assert_eq!(idx.top_k(&d.text(), 1)[0].name, d.name);
        }
    }

    #[test]
    fn k_larger_than_corpus() {
        let idx = FunctionIndex::shipped();
        assert_eq!(idx.top_k("anything", 1000).len(), idx.len());
    }

    #[test]
    fn unknown_terms_tie_by_name() {
        let idx = FunctionIndex::build(vec![doc("b", "beta"), doc("a", "alpha")]).unwrap();
        let names: Vec<_> = idx.top_k("zzz", 2).iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
    }

    #[test]
    fn tokenizer() {
        let t: Vec<_> = tokenize("Regr_Slope(y, x) -> REAL").collect();
        assert_eq!(t, ["regr", "slope", "y", "x", "real"]);
    }

    struct Letters;
    impl Embedder for Letters {
        fn embed(&self, text: &str) -> Vec<f64> {
            let mut v = vec![0.0; 26];
            for c in text.to_ascii_lowercase().bytes().filter(u8::is_ascii_lowercase) {
                v[(c - b'a') as usize] += 1.0;
            }
            v
        }
    }

    #[test]
    fn embedding_seam() {
        let idx = EmbeddingIndex::build(Letters, vec![doc("aaa", "aaaa"), doc("zzz", "zzzz")]).unwrap();
        assert_eq!(idx.top_k("zz", 1)[0].name, "zzz");
    }
}
