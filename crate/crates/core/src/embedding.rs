//! Sentence embedding providers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding provider failed on {text:?}: {message}")]
    Provider { text: String, message: String },
    #[error("embedding of {text:?} has non-finite entries")]
    NonFinite { text: String },
}

pub trait EmbeddingProvider: Send + Sync {
    /// Identifies the model, so an index is only queried with the provider that built it.
    fn signature(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbeddingError>;
    /// Whether `embed` may be called from several threads at once.
    fn supports_concurrency(&self) -> bool {
        true
    }
}

/// Serializes calls to providers that do not support concurrent use.
pub struct GuardedProvider {
    inner: Arc<dyn EmbeddingProvider>,
    lock: Option<Mutex<()>>,
}

impl GuardedProvider {
    pub fn new(inner: Arc<dyn EmbeddingProvider>) -> Self {
        let lock = (!inner.supports_concurrency()).then(|| Mutex::new(()));
        Self { inner, lock }
    }
}

impl EmbeddingProvider for GuardedProvider {
    fn signature(&self) -> String {
        self.inner.signature()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbeddingError> {
        let _guard = self.lock.as_ref().map(|m| m.lock().unwrap_or_else(|e| e.into_inner()));
        self.inner.embed(text)
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Deterministic feature-hashing embedder over lowercased words and character trigrams.
///
/// No model download; paraphrases that share vocabulary land close together.
#[derive(Debug, Clone)]
pub struct HashEmbedding {
    dimension: usize,
}

impl Default for HashEmbedding {
    fn default() -> Self {
        Self { dimension: 256 }
    }
}

impl HashEmbedding {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    fn add(&self, v: &mut [f32], feature: &str, weight: f32) {
        let h = fnv1a(feature.as_bytes());
        let slot = (h % self.dimension as u64) as usize;
        let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
        v[slot] += sign * weight;
    }
}

impl EmbeddingProvider for HashEmbedding {
    fn signature(&self) -> String {
        format!("hash-ngram-v1-d{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbeddingError> {
        let lower = text.to_lowercase();
        let mut v = vec![0.0f32; self.dimension];
        let words: Vec<&str> =
            lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
        for w in &words {
            self.add(&mut v, &format!("w:{w}"), 1.0);
        }
        let joined: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
        for tri in joined.windows(3) {
            self.add(&mut v, &format!("c:{}", tri.iter().collect::<String>()), 0.25);
        }
        Ok(v)
    }
}

/// Test provider with fixed vectors per text.
#[derive(Debug, Clone, Default)]
pub struct FixedEmbedding {
    dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl FixedEmbedding {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, vectors: HashMap::new() }
    }

    pub fn with(mut self, text: impl Into<String>, vector: Vec<f32>) -> Self {
        assert_eq!(vector.len(), self.dimension);
        self.vectors.insert(text.into(), vector);
        self
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: Vec<f32>) {
        assert_eq!(vector.len(), self.dimension);
        self.vectors.insert(text.into(), vector);
    }
}

impl EmbeddingProvider for FixedEmbedding {
    fn signature(&self) -> String {
        format!("fixed-d{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbeddingError> {
        self.vectors.get(text).cloned().ok_or_else(|| EmbeddingError::Provider {
            text: text.to_string(),
            message: "no fixed vector".into(),
        })
    }
}

/// Cosine distance `1 - cos(a, b)` in `[0, 2]`, or `None` if either vector is zero.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_embedding_is_deterministic_and_similarity_tracks_overlap() {
        let p = HashEmbedding::default();
        let a = p.embed("How can I donate to Save the Children?").unwrap();
        assert_eq!(a, p.embed("How can I donate to Save the Children?").unwrap());
        let b = p.embed("how can i donate to save the children").unwrap();
        let c = p.embed("The weather is lovely in spring").unwrap();
        assert!(cosine_distance(&a, &b).unwrap() < cosine_distance(&a, &c).unwrap());
        assert!(cosine_distance(&a, &a).unwrap() <= 1e-6);
    }

    #[test]
    fn zero_vectors_have_no_distance() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), None);
        assert!((cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
    }
}
