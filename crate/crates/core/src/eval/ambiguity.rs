//! Attribute-name ambiguity scoring and median bucketing.
//!
//! An attribute name is ambiguous when its embedding is far from the mean
//! embedding of its values. At desk scale the embedder is a deterministic
//! hashed character-n-gram vectorizer, so bucket boundaries are dataset- and
//! embedder-specific and always recomputed rather than hard-coded.

use crate::corpus::CleanTuple;
use crate::knowledge::KnowledgeBase;
use crate::rng::fnv1a64;
use crate::scalar::Scalar;
use crate::tokenize::tokenize;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Maps a token sequence to a fixed-dimension vector.
pub trait Embedder<F: Scalar> {
    fn dim(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> Vec<F>;
}

/// Signed feature hashing over character n-grams (2..=4) of each token,
/// with `^`/`$` boundary markers. Identical texts embed identically; texts
/// sharing no n-grams are near-orthogonal.
#[derive(Debug, Clone, Copy)]
pub struct HashedNgramEmbedder {
    dim: usize,
}

impl HashedNgramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        Self { dim }
    }
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self { dim: 128 }
    }
}

impl<F: Scalar> Embedder<F> for HashedNgramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &[String]) -> Vec<F> {
        let mut v = vec![F::zero(); self.dim];
        for token in tokens {
            let marked: Vec<char> = std::iter::once('^')
                .chain(token.chars())
                .chain(std::iter::once('$'))
                .collect();
            for n in 2..=4usize {
                if marked.len() < n {
                    continue;
                }
                for window in marked.windows(n) {
                    let gram: String = window.iter().collect();
                    let h = fnv1a64(gram.as_bytes());
                    let ix = ((h >> 1) % self.dim as u64) as usize;
                    let sign = if h & 1 == 0 { F::one() } else { -F::one() };
                    v[ix] += sign;
                }
            }
        }
        v
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine<F: Scalar>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len(), "cosine requires equal dimensions");
    let mut dot = F::zero();
    let mut na = F::zero();
    let mut nb = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == F::zero() || nb == F::zero() {
        return F::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Cosine between the attribute-name embedding and the mean embedding of
/// the attribute's knowledge-base values. `None` when the attribute has no
/// values (ambiguity undefined; excluded from bucketing).
pub fn ambiguity_score<F: Scalar>(
    attribute: &str,
    kb: &KnowledgeBase,
    embedder: &impl Embedder<F>,
) -> Option<f64> {
    let values = kb.values(attribute);
    if values.is_empty() {
        return None;
    }
    let attr_vec = embedder.embed(&tokenize(attribute));
    let mut mean = vec![F::zero(); embedder.dim()];
    for v in values {
        let vec = embedder.embed(&v.tokens);
        for (m, x) in mean.iter_mut().zip(vec) {
            *m += x;
        }
    }
    let inv = F::cast(1.0 / values.len() as f64);
    for m in &mut mean {
        *m *= inv;
    }
    Some(cosine(&attr_vec, &mean).as_f64())
}

/// Median-split bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Lo,
    Hi,
}

/// Medians used for the bucket assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketThresholds {
    pub frequency_median: f64,
    pub similarity_median: f64,
}

/// One attribute's analysis profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeProfile {
    pub attribute: String,
    /// Number of training tuples carrying this attribute (NULL included).
    pub train_count: u64,
    /// Attribute-name-to-values cosine similarity.
    pub ambiguity: f64,
    pub freq_bucket: Option<Bucket>,
    pub sim_bucket: Option<Bucket>,
}

/// Builds profiles for every attribute that has knowledge-base values.
pub fn build_profiles<F: Scalar>(
    train: &[CleanTuple],
    kb: &KnowledgeBase,
    embedder: &impl Embedder<F>,
) -> Vec<AttributeProfile> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in train {
        *counts.entry(t.attribute.as_str()).or_insert(0) += 1;
    }
    let mut profiles: Vec<AttributeProfile> = kb
        .attributes()
        .filter_map(|attr| {
            let ambiguity = ambiguity_score(attr, kb, embedder)?;
            Some(AttributeProfile {
                attribute: attr.to_string(),
                train_count: counts.get(attr).copied().unwrap_or(0),
                ambiguity,
                freq_bucket: None,
                sim_bucket: None,
            })
        })
        .collect();
    profiles.sort_by(|a, b| a.attribute.cmp(&b.attribute));
    profiles
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Assigns lo/hi buckets by the median of train counts and the median of
/// ambiguity over the analyzed profiles; values below the median are `Lo`,
/// values at or above it are `Hi`.
pub fn bucketize(profiles: &mut [AttributeProfile]) -> BucketThresholds {
    assert!(!profiles.is_empty(), "bucketize needs at least one profile");
    let mut freqs: Vec<f64> = profiles.iter().map(|p| p.train_count as f64).collect();
    freqs.sort_by(f64::total_cmp);
    let mut sims: Vec<f64> = profiles.iter().map(|p| p.ambiguity).collect();
    sims.sort_by(f64::total_cmp);
    let thresholds = BucketThresholds {
        frequency_median: median(&freqs),
        similarity_median: median(&sims),
    };
    for p in profiles.iter_mut() {
        p.freq_bucket = Some(if (p.train_count as f64) < thresholds.frequency_median {
            Bucket::Lo
        } else {
            Bucket::Hi
        });
        p.sim_bucket = Some(if p.ambiguity < thresholds.similarity_median {
            Bucket::Lo
        } else {
            Bucket::Hi
        });
    }
    thresholds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CleanValue;

    fn tup(title: &str, attr: &str, value: &str) -> CleanTuple {
        CleanTuple {
            title: title.to_string(),
            attribute: attr.to_string(),
            value: CleanValue::from(value.to_string()),
        }
    }

    struct OneHot;

    impl Embedder<f64> for OneHot {
        fn dim(&self) -> usize {
            2
        }
        fn embed(&self, tokens: &[String]) -> Vec<f64> {
            // "a"-ish tokens on one axis, everything else on the other.
            if tokens.iter().any(|t| t.starts_with('a')) {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            }
        }
    }

    #[test]
    fn identical_attribute_and_value_score_one() {
        let kb = KnowledgeBase::build(&[tup("t", "red", "red")]);
        let e = HashedNgramEmbedder::default();
        let score = ambiguity_score::<f64>("red", &kb, &e).unwrap();
        assert!((score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_embeddings_score_zero() {
        let kb = KnowledgeBase::build(&[tup("t", "attr", "value")]);
        let score = ambiguity_score("attr", &kb, &OneHot).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn attribute_without_values_is_undefined() {
        let kb = KnowledgeBase::build(&[tup("t", "color", "NULL")]);
        let e = HashedNgramEmbedder::default();
        assert!(ambiguity_score::<f64>("color", &kb, &e).is_none());
        assert!(ambiguity_score::<f64>("absent", &kb, &e).is_none());
    }

    #[test]
    fn disjoint_alphabets_score_near_zero() {
        let kb = KnowledgeBase::build(&[
            tup("t", "bcdfg", "holm"),
            tup("t", "bcdfg", "senta"),
        ]);
        let e = HashedNgramEmbedder::default();
        let score = ambiguity_score::<f64>("bcdfg", &kb, &e).unwrap();
        assert!(score.abs() < 0.35, "expected near-orthogonal, got {score}");

        let kb2 = KnowledgeBase::build(&[
            tup("t", "holmark", "holmine"),
            tup("t", "holmark", "holmus"),
        ]);
        let shared = ambiguity_score::<f64>("holmark", &kb2, &e).unwrap();
        assert!(shared > score + 0.2, "prefix sharing should raise similarity");
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine::<f64>(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((cosine::<f64>(&[1.0, 1.0], &[1.0, 1.0]) - 1.0).abs() < 1e-12);
        assert_eq!(cosine::<f64>(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn single_attribute_lands_in_hi_hi() {
        let kb = KnowledgeBase::build(&[tup("t", "color", "red")]);
        let e = HashedNgramEmbedder::default();
        let mut profiles = build_profiles::<f64>(&[tup("t", "color", "red")], &kb, &e);
        assert_eq!(profiles.len(), 1);
        bucketize(&mut profiles);
        assert_eq!(profiles[0].freq_bucket, Some(Bucket::Hi));
        assert_eq!(profiles[0].sim_bucket, Some(Bucket::Hi));
    }

    #[test]
    fn uniform_counts_put_everything_in_hi_frequency() {
        let train: Vec<CleanTuple> = (0..6)
            .map(|i| tup("t", &format!("attr{i}"), &format!("val{i}")))
            .collect();
        let kb = KnowledgeBase::build(&train);
        let e = HashedNgramEmbedder::default();
        let mut profiles = build_profiles::<f64>(&train, &kb, &e);
        bucketize(&mut profiles);
        assert!(profiles.iter().all(|p| p.freq_bucket == Some(Bucket::Hi)));
    }

    #[test]
    fn median_split_separates_counts() {
        let mut train = Vec::new();
        for i in 0..4 {
            for k in 0..(i + 1) * 2 {
                train.push(tup(&format!("t{k}"), &format!("attr{i}"), &format!("val{i}")));
            }
        }
        let kb = KnowledgeBase::build(&train);
        let e = HashedNgramEmbedder::default();
        let mut profiles = build_profiles::<f64>(&train, &kb, &e);
        let th = bucketize(&mut profiles);
        // Counts 2, 4, 6, 8; median 5.
        assert_eq!(th.frequency_median, 5.0);
        let lo: Vec<&str> = profiles
            .iter()
            .filter(|p| p.freq_bucket == Some(Bucket::Lo))
            .map(|p| p.attribute.as_str())
            .collect();
        assert_eq!(lo, vec!["attr0", "attr1"]);
    }

    #[test]
    fn profiles_count_null_tuples_toward_frequency() {
        let train = vec![
            tup("t1", "color", "red"),
            tup("t2", "color", "NULL"),
            tup("t3", "color", "NULL"),
        ];
        let kb = KnowledgeBase::build(&train);
        let e = HashedNgramEmbedder::default();
        let profiles = build_profiles::<f64>(&train, &kb, &e);
        assert_eq!(profiles[0].train_count, 3);
    }
}
