//! Embedding providers. Every vector leaving this module is L2-normalized,
//! so cosine similarity downstream is a plain dot product.
//!
//! Two providers exist: a remote JSON-over-HTTP service and a deterministic
//! offline fallback (seeded hashed unigrams + bigrams) that makes the whole
//! pipeline testable without model access.

use std::time::Duration;

use futures::{stream, StreamExt};
use serde::{Deserialize, Serialize};

use crate::backends::{check_status, BackendError, RetryPolicy};
use crate::error::EngineError;

pub const MIN_DIM: usize = 8;

/// Unit-normalized vector tied to the provider that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub provider_id: String,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Cosine similarity; on unit vectors this is the dot product.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        dot_f64(&self.vector, &other.vector)
    }
}

/// Dot product accumulated in f64 for stable, order-deterministic scoring.
pub fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    pub model_name: String,
    pub dim: usize,
    pub batch_size: usize,
    pub max_concurrent_requests: usize,
    pub timeout_ms: u64,
    pub retry: RetryConfig,
    /// Optional instruction prefixes for instruction-tuned providers.
    pub query_prefix: String,
    pub doc_prefix: String,
    /// Seed for the fallback hasher.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryConfig {
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_retries: 2,
            backoff_ms: 100,
        }
    }
}

impl From<&RetryConfig> for RetryPolicy {
    fn from(cfg: &RetryConfig) -> Self {
        RetryPolicy {
            max_retries: cfg.max_retries,
            backoff_ms: cfg.backoff_ms,
        }
    }
}

impl ProviderConfig {
    pub fn fallback(dim: usize, seed: u64) -> Self {
        Self {
            kind: ProviderKind::Fallback,
            base_url: None,
            api_key: None,
            model_name: String::new(),
            dim,
            batch_size: 32,
            max_concurrent_requests: 4,
            timeout_ms: 30_000,
            retry: RetryConfig::default(),
            query_prefix: String::new(),
            doc_prefix: String::new(),
            seed,
        }
    }

    pub fn remote(base_url: impl Into<String>, model_name: impl Into<String>, dim: usize) -> Self {
        Self {
            kind: ProviderKind::Remote,
            base_url: Some(base_url.into()),
            api_key: None,
            model_name: model_name.into(),
            dim,
            batch_size: 32,
            max_concurrent_requests: 4,
            timeout_ms: 30_000,
            retry: RetryConfig::default(),
            query_prefix: String::new(),
            doc_prefix: String::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.dim < MIN_DIM {
            return Err(EngineError::InvalidConfig(format!(
                "embedding dim must be at least {MIN_DIM}, got {}",
                self.dim
            )));
        }
        if self.batch_size == 0 {
            return Err(EngineError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.max_concurrent_requests == 0 {
            return Err(EngineError::InvalidConfig(
                "max_concurrent_requests must be at least 1".into(),
            ));
        }
        if self.kind == ProviderKind::Remote && self.base_url.as_deref().unwrap_or("").is_empty() {
            return Err(EngineError::InvalidConfig(
                "remote embedding provider needs a base URL: set EMBED_API_BASE".into(),
            ));
        }
        Ok(())
    }

    /// Stable identity recorded in every embedding and in the index header.
    pub fn provider_id(&self) -> String {
        match self.kind {
            ProviderKind::Remote => self.model_name.clone(),
            ProviderKind::Fallback => format!("fallback:{}:{}", self.dim, self.seed),
        }
    }
}

// ─── Fallback provider ──────────────────────────────────────────────────────

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded FNV-1a over the seed bytes then the feature bytes. Stable across
/// platforms and builds, which the persisted index relies on.
fn feature_hash(seed: u64, feature: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    for &b in feature.as_bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic hashed bag-of-features embedding.
///
/// Lowercases the text, extracts word unigrams and bigrams, hashes each
/// feature to a bucket (`hash % dim`) with a sign taken from the top hash
/// bit, accumulates signed counts, and L2-normalizes. Empty input maps to
/// the unit basis vector e0.
pub fn fallback_embed(text: &str, dim: usize, seed: u64) -> Embedding {
    assert!(dim >= MIN_DIM, "fallback embedding dim must be >= {MIN_DIM}");
    let lowered = text.to_lowercase();
    let words: Vec<&str> = lowered.split_whitespace().collect();

    let mut acc = vec![0f64; dim];
    let mut add = |feature: &str| {
        let h = feature_hash(seed, feature);
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        acc[bucket] += sign;
    };
    for w in &words {
        add(w);
    }
    for pair in words.windows(2) {
        add(&format!("{} {}", pair[0], pair[1]));
    }

    let provider_id = format!("fallback:{dim}:{seed}");
    Embedding {
        vector: normalize(acc),
        provider_id,
    }
}

/// L2-normalize in f64, quantize to f32. Zero accumulations map to e0.
fn normalize(acc: Vec<f64>) -> Vec<f32> {
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        let mut v = vec![0.0f32; acc.len()];
        v[0] = 1.0;
        return v;
    }
    acc.into_iter().map(|x| (x / norm) as f32).collect()
}

// ─── Remote provider ────────────────────────────────────────────────────────

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

async fn embed_remote_batch(
    client: &reqwest::Client,
    cfg: &ProviderConfig,
    texts: &[String],
) -> Result<Vec<Embedding>, EngineError> {
    let base = cfg.base_url.as_deref().unwrap_or("").trim_end_matches('/');
    let url = format!("{base}/v1/embed");
    let retry: RetryPolicy = (&cfg.retry).into();
    let response: EmbedResponse = retry
        .run(|| async {
            let mut builder = client.post(&url).json(&EmbedRequest {
                model: &cfg.model_name,
                texts,
            });
            if let Some(key) = &cfg.api_key {
                builder = builder.bearer_auth(key);
            }
            let resp = builder.send().await.map_err(BackendError::from_reqwest)?;
            let resp = check_status(resp).await?;
            resp.json()
                .await
                .map_err(|e| BackendError::Protocol(format!("bad embed response: {e}")))
        })
        .await?;

    if response.dim != cfg.dim {
        return Err(EngineError::DimMismatch {
            expected: cfg.dim,
            got: response.dim,
        });
    }
    if response.vectors.len() != texts.len() {
        return Err(EngineError::Backend(BackendError::Protocol(format!(
            "embed service returned {} vectors for {} texts",
            response.vectors.len(),
            texts.len()
        ))));
    }
    let provider_id = cfg.provider_id();
    let mut out = Vec::with_capacity(texts.len());
    for v in response.vectors {
        if v.len() != cfg.dim {
            return Err(EngineError::DimMismatch {
                expected: cfg.dim,
                got: v.len(),
            });
        }
        out.push(Embedding {
            vector: normalize(v.into_iter().map(f64::from).collect()),
            provider_id: provider_id.clone(),
        });
    }
    Ok(out)
}

/// Embed a batch of texts, order-aligned with the input.
///
/// Remote providers are called in `batch_size` slices with at most
/// `max_concurrent_requests` in flight; results are reassembled in input
/// order. All vectors are normalized at this boundary regardless of what
/// the provider returned.
pub async fn embed_batch(
    texts: &[String],
    cfg: &ProviderConfig,
) -> Result<Vec<Embedding>, EngineError> {
    cfg.validate()?;
    if texts.is_empty() {
        return Err(EngineError::InvalidInput("embed_batch requires at least one text".into()));
    }
    if let Some(pos) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(EngineError::InvalidInput(format!(
            "text at position {pos} is empty after trimming"
        )));
    }

    match cfg.kind {
        ProviderKind::Fallback => Ok(texts
            .iter()
            .map(|t| fallback_embed(t, cfg.dim, cfg.seed))
            .collect()),
        ProviderKind::Remote => {
            let client = reqwest::Client::builder()
                .timeout(Duration::from_millis(cfg.timeout_ms))
                .build()
                .map_err(|e| EngineError::InvalidConfig(format!("http client: {e}")))?;
            let batches: Vec<&[String]> = texts.chunks(cfg.batch_size).collect();
            let results: Vec<Result<Vec<Embedding>, EngineError>> = stream::iter(batches)
                .map(|batch| {
                    let client = &client;
                    async move { embed_remote_batch(client, cfg, batch).await }
                })
                .buffered(cfg.max_concurrent_requests)
                .collect()
                .await;
            let mut out = Vec::with_capacity(texts.len());
            for r in results {
                out.extend(r?);
            }
            Ok(out)
        }
    }
}

/// Embed query-side texts with the provider's query prefix applied.
pub async fn embed_queries(
    texts: &[String],
    cfg: &ProviderConfig,
) -> Result<Vec<Embedding>, EngineError> {
    embed_with_prefix(texts, cfg, &cfg.query_prefix).await
}

/// Embed document-side texts with the provider's document prefix applied.
pub async fn embed_docs(texts: &[String], cfg: &ProviderConfig) -> Result<Vec<Embedding>, EngineError> {
    embed_with_prefix(texts, cfg, &cfg.doc_prefix).await
}

async fn embed_with_prefix(
    texts: &[String],
    cfg: &ProviderConfig,
    prefix: &str,
) -> Result<Vec<Embedding>, EngineError> {
    if prefix.is_empty() {
        return embed_batch(texts, cfg).await;
    }
    let prefixed: Vec<String> = texts.iter().map(|t| format!("{prefix}{t}")).collect();
    embed_batch(&prefixed, cfg).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm_f64(v: &[f32]) -> f64 {
        v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
    }

    #[test]
    fn fallback_empty_text_is_basis_vector() {
        let e = fallback_embed("", 16, 0);
        assert_eq!(e.vector[0], 1.0);
        assert!(e.vector[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fallback_is_unit_norm() {
        let e = fallback_embed("la grande guerre mondiale", 64, 0);
        assert!((norm_f64(&e.vector) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn fallback_is_deterministic() {
        let a = fallback_embed("guerre mondiale", 64, 0);
        let b = fallback_embed("guerre mondiale", 64, 0);
        assert_eq!(a, b);
    }

    #[test]
    fn fallback_differs_across_seeds() {
        let a = fallback_embed("guerre mondiale", 64, 0);
        let b = fallback_embed("guerre mondiale", 64, 1);
        assert_ne!(a.vector, b.vector);
    }

    #[test]
    fn fallback_word_order_matters_through_bigrams() {
        // "a b" and "b a" share unigrams; only the bigram features differ.
        let ab = fallback_embed("a b", 64, 0);
        let ba = fallback_embed("b a", 64, 0);
        assert_ne!(ab.vector, ba.vector);

        // Oracle: rebuild both feature multisets by hand and confirm they
        // differ exactly in the bigram feature.
        let h_ab = feature_hash(0, "a b");
        let h_ba = feature_hash(0, "b a");
        assert_ne!((h_ab % 64, h_ab >> 63), (h_ba % 64, h_ba >> 63));
    }

    #[test]
    fn cosine_of_self_is_one() {
        let e = fallback_embed("une question historique", 32, 0);
        assert!((e.cosine(&e) - 1.0).abs() < 1e-6);
    }

    #[tokio::test]
    async fn embed_batch_rejects_empty_inputs() {
        let cfg = ProviderConfig::fallback(16, 0);
        assert!(embed_batch(&[], &cfg).await.is_err());
        assert!(embed_batch(&["  ".to_string()], &cfg).await.is_err());
    }

    #[tokio::test]
    async fn embed_batch_fallback_partition_transparency() {
        let cfg = ProviderConfig::fallback(32, 7);
        let texts: Vec<String> = (0..9).map(|i| format!("texte numéro {i}")).collect();
        let whole = embed_batch(&texts, &cfg).await.unwrap();
        let mut pieced = Vec::new();
        for part in texts.chunks(4) {
            pieced.extend(embed_batch(part, &cfg).await.unwrap());
        }
        assert_eq!(whole, pieced);
    }

    #[tokio::test]
    async fn prefixes_change_the_embedded_text() {
        let mut cfg = ProviderConfig::fallback(32, 0);
        cfg.query_prefix = "query: ".into();
        let plain = embed_batch(&["paris".to_string()], &cfg).await.unwrap();
        let prefixed = embed_queries(&["paris".to_string()], &cfg).await.unwrap();
        assert_ne!(plain[0].vector, prefixed[0].vector);
    }

    proptest! {
        #[test]
        fn fallback_norm_is_always_unit(text in "\\PC{0,80}", seed in 0u64..4) {
            let e = fallback_embed(&text, 24, seed);
            prop_assert!((norm_f64(&e.vector) - 1.0).abs() < 1e-5);
        }

        #[test]
        fn cosine_is_symmetric(a in "\\PC{1,40}", b in "\\PC{1,40}") {
            let ea = fallback_embed(&a, 32, 0);
            let eb = fallback_embed(&b, 32, 0);
            prop_assert!((ea.cosine(&eb) - eb.cosine(&ea)).abs() < 1e-12);
        }
    }
}
