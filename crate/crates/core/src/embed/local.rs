//! Deterministic offline embedder: signed feature hashing over word
//! unigrams and bigrams, bucketed by FNV-1a 64.
//!
//! The construction is pinned so that vectors are byte-identical across
//! runs and platforms: lowercase, split on non-alphanumeric characters,
//! hash each feature with FNV-1a, bucket by `hash mod dim`, add +1 or -1
//! depending on hash bit 63, then L2-normalize in f32 bucket order.

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

const FNV_OFFSET: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;

/// Feature-hashing embedder with a fixed dimension.
///
/// The model id is `local-fnv{dim}`, so indexes built with one dimension
/// refuse queries embedded at another.
#[derive(Debug, Clone)]
pub struct LocalEmbedder {
    dim: usize,
    model_id: String,
}

impl LocalEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    /// # Panics
    /// Panics if `dim` is zero.
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            model_id: format!("local-fnv{dim}"),
        }
    }
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl EmbeddingProvider for LocalEmbedder {
    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let values = hash_embed(text, self.dim)?;
        EmbeddingVector::new(values, "local", &self.model_id)
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn provider_id(&self) -> &str {
        "local"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &byte in bytes {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Word unigrams plus adjacent bigrams (space-joined), after lowercasing
/// and splitting on any non-alphanumeric character. The feature multiset
/// depends only on the text, never on the target dimension.
fn features(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let tokens: Vec<&str> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect();
    let mut feats: Vec<String> = tokens.iter().map(|t| (*t).to_owned()).collect();
    feats.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    feats
}

fn hash_embed(text: &str, dim: usize) -> Result<Vec<f32>, EmbedError> {
    let feats = features(text);
    if feats.is_empty() {
        return Err(EmbedError::EmptyText);
    }

    let mut values = vec![0f32; dim];
    for feat in &feats {
        let hash = fnv1a64(feat.as_bytes());
        let bucket = (hash % dim as u64) as usize;
        let sign = if hash >> 63 == 0 { 1f32 } else { -1f32 };
        values[bucket] += sign;
    }

    // f32 accumulation in bucket order keeps the norm (and therefore the
    // normalized vector) bit-identical across platforms.
    let mut norm_sq = 0f32;
    for value in &values {
        norm_sq += value * value;
    }
    let norm = norm_sq.sqrt();
    if norm == 0.0 {
        // opposite-sign features can cancel every bucket; a zero vector
        // cannot be normalized
        return Err(EmbedError::EmptyText);
    }
    for value in &mut values {
        *value /= norm;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Golden vectors at dim=16, frozen from a standalone oracle that
    /// recomputes FNV-1a bucketing and f32 normalization by hand-rolled
    /// arithmetic. Stored as bit patterns so equality is byte-exact.
    const GOLDEN_DIM: usize = 16;
    const GOLDEN: &[(&str, [u32; 16])] = &[
        ("fish", [0x00000000, 0x00000000, 0x00000000, 0xbf800000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000]),
        ("fish and chips", [0x00000000, 0x3ee4f92e, 0xbee4f92e, 0xbee4f92e, 0x3ee4f92e, 0x00000000, 0xbee4f92e, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000]),
        ("grilled chicken skewers", [0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x3f13cd3a, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0xbf13cd3a, 0x3f13cd3a, 0x00000000, 0x00000000]),
        ("a japanese dish of vinegared rice", [0xbe9a5fb2, 0x3e9a5fb2, 0x00000000, 0x00000000, 0x3e9a5fb2, 0x00000000, 0x00000000, 0x00000000, 0x3e9a5fb2, 0x00000000, 0x00000000, 0x3f1a5fb2, 0xbe9a5fb2, 0xbe9a5fb2, 0xbe9a5fb2, 0x00000000]),
        ("exposure to wildlife", [0x3ee4f92e, 0x00000000, 0x00000000, 0x00000000, 0x3ee4f92e, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x3ee4f92e, 0xbee4f92e, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x3ee4f92e]),
        ("marine mammal park and oceanarium", [0xbec18490, 0x00000000, 0x00000000, 0x00000000, 0xbec18490, 0x00000000, 0xbec18490, 0xbec18490, 0x00000000, 0x3ec18490, 0x00000000, 0x00000000, 0xbec18490, 0x00000000, 0x00000000, 0xbec18490]),
        ("Beautiful mountains!", [0x00000000, 0x00000000, 0x00000000, 0xbf13cd3a, 0x3f13cd3a, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0xbf13cd3a, 0x00000000, 0x00000000, 0x00000000]),
        ("no fish or shrimp", [0x3eaaaaab, 0x00000000, 0x00000000, 0xbeaaaaab, 0x3eaaaaab, 0x00000000, 0x00000000, 0x00000000, 0xbeaaaaab, 0x00000000, 0x3f2aaaab, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x3eaaaaab]),
        ("crème brûlée", [0x00000000, 0x00000000, 0xbf13cd3a, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0xbf13cd3a, 0xbf13cd3a, 0x00000000, 0x00000000]),
        ("route 66 diner classics", [0x3f418490, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0xbec18490, 0x3ec18490, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x00000000, 0x3ec18490, 0x00000000]),
    ];

    fn bits(vector: &EmbeddingVector) -> Vec<u32> {
        vector.values().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn fnv1a64_matches_published_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn golden_vectors_match_byte_for_byte() {
        let embedder = LocalEmbedder::new(GOLDEN_DIM);
        for (text, expected) in GOLDEN {
            let first = embedder.embed_one(text).unwrap();
            let second = embedder.embed_one(text).unwrap();
            assert_eq!(bits(&first), expected.to_vec(), "golden mismatch for {text:?}");
            assert_eq!(bits(&first), bits(&second), "non-deterministic for {text:?}");
        }
    }

    #[test]
    fn case_and_punctuation_collapse() {
        let embedder = LocalEmbedder::new(8);
        assert_eq!(
            bits(&embedder.embed_one("Fish!").unwrap()),
            bits(&embedder.embed_one("fish").unwrap())
        );
    }

    #[test]
    fn empty_and_symbol_only_text_is_rejected() {
        let embedder = LocalEmbedder::new(8);
        assert!(matches!(embedder.embed_one(""), Err(EmbedError::EmptyText)));
        assert!(matches!(embedder.embed_one("  \t"), Err(EmbedError::EmptyText)));
        assert!(matches!(embedder.embed_one("!?—…"), Err(EmbedError::EmptyText)));
    }

    #[test]
    fn features_are_unigrams_plus_adjacent_bigrams() {
        assert_eq!(
            features("Fish and chips"),
            ["fish", "and", "chips", "fish and", "and chips"]
        );
        assert_eq!(features("solo"), ["solo"]);
    }

    #[test]
    fn self_cosine_is_one() {
        let embedder = LocalEmbedder::new(64);
        for text in ["fish", "exposure to wildlife", "route 66 diner classics"] {
            let vector = embedder.embed_one(text).unwrap();
            let cosine =
                crate::index::similarity(vector.values(), vector.values(), crate::index::Metric::Cosine)
                    .unwrap();
            assert!((cosine - 1.0).abs() <= 1e-6, "{text:?}: cosine {cosine}");
        }
    }

    #[test]
    fn batch_equals_one_elementwise() {
        let embedder = LocalEmbedder::new(32);
        let texts = ["fish", "fish and chips", "crème brûlée"];
        let batch = embedder.embed_batch(&texts).unwrap();
        for (text, vector) in texts.iter().zip(&batch) {
            assert_eq!(bits(vector), bits(&embedder.embed_one(text).unwrap()));
        }
    }

    proptest! {
        #[test]
        fn vectors_are_unit_norm(text in "[a-zA-Z0-9 .,!?'-]{1,60}") {
            let embedder = LocalEmbedder::new(64);
            if let Ok(vector) = embedder.embed_one(&text) {
                prop_assert!((vector.l2_norm() - 1.0).abs() <= 1e-5);
            }
        }

        #[test]
        fn deterministic_for_arbitrary_text(text in ".{0,40}", dim in 1usize..128) {
            let embedder = LocalEmbedder::new(dim);
            let first = embedder.embed_one(&text);
            let second = embedder.embed_one(&text);
            match (first, second) {
                (Ok(a), Ok(b)) => prop_assert_eq!(bits(&a), bits(&b)),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "embed_one not deterministic"),
            }
        }
    }
}
