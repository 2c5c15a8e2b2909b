//! Hybrid retrieval: LLM query expansion, BM25 lexical search, and
//! Reciprocal Rank Fusion over the per-query ranked lists.
//!
//! Fusion scores each document `Σ 1/(k + rank)` over every list it appears
//! in, with 1-based ranks. Rank-based aggregation needs no score
//! calibration, so dense cosines and raw BM25 values fuse cleanly.

use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, ChatRequest, LlmBackend};
use crate::embedding::{self, ProviderConfig};
use crate::error::EngineError;
use crate::index::{ListSource, RankedList, ScoredItem, VectorIndex};

/// Prompt used to generate query reformulations; pinned byte-exactly by
/// golden tests.
pub const QUERY_VARIATION_TEMPLATE: &str = include_str!("../templates/query_variation.txt");

pub const DEFAULT_NUM_VARIATIONS: usize = 5;
pub const DEFAULT_RRF_K: u32 = 60;
pub const DEFAULT_TOP_K_PER_QUERY: usize = 20;
pub const DEFAULT_FINAL_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub num_variations: usize,
    pub rrf_k: u32,
    pub top_k_per_query: usize,
    pub final_k: usize,
    pub enable_lexical: bool,
    pub bm25: Bm25Params,
    /// Expansion prompt; replaced only when a custom template file is
    /// configured.
    pub expansion_template: String,
    pub llm_model: String,
    pub llm_temperature: f32,
    pub llm_max_tokens: u32,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            num_variations: DEFAULT_NUM_VARIATIONS,
            rrf_k: DEFAULT_RRF_K,
            top_k_per_query: DEFAULT_TOP_K_PER_QUERY,
            final_k: DEFAULT_FINAL_K,
            enable_lexical: false,
            bm25: Bm25Params::default(),
            expansion_template: QUERY_VARIATION_TEMPLATE.to_string(),
            llm_model: "mistralai/Mistral-7B-Instruct-v0.3".to_string(),
            llm_temperature: 0.3,
            llm_max_tokens: 256,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.rrf_k < 1 {
            return Err(EngineError::InvalidConfig("rrf_k must be at least 1".into()));
        }
        if self.final_k < 1 {
            return Err(EngineError::InvalidConfig("final_k must be at least 1".into()));
        }
        if self.top_k_per_query < 1 {
            return Err(EngineError::InvalidConfig(
                "top_k_per_query must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Original query plus deduplicated LLM reformulations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub original: String,
    pub variations: Vec<String>,
    pub lang: String,
    /// Set when expansion failed and retrieval proceeded single-query.
    #[serde(default)]
    pub degraded: bool,
}

impl QuerySet {
    pub fn single(query: impl Into<String>, lang: impl Into<String>) -> Self {
        Self {
            original: query.into(),
            variations: Vec::new(),
            lang: lang.into(),
            degraded: false,
        }
    }

    /// The effective query set: original first, then variations.
    pub fn all_queries(&self) -> Vec<&str> {
        std::iter::once(self.original.as_str())
            .chain(self.variations.iter().map(String::as_str))
            .collect()
    }
}

/// Which list contributed which 1-based rank to a fused document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub list_id: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedItem {
    pub chunk_id: String,
    pub score: f64,
    pub contributing: Vec<Contribution>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FusedResult {
    pub items: Vec<FusedItem>,
}

impl FusedResult {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 1-based fused rank of a chunk, if present.
    pub fn rank_of(&self, chunk_id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.chunk_id == chunk_id).map(|p| p + 1)
    }

    pub fn chunk_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.chunk_id.clone()).collect()
    }
}

// ─── Query expansion ────────────────────────────────────────────────────────

/// Substitute `{num_variations}` and `{original_query}` into the expansion
/// template.
pub fn build_expansion_prompt(template: &str, num_variations: usize, query: &str) -> String {
    template
        .replace("{num_variations}", &num_variations.to_string())
        .replace("{original_query}", query)
}

fn normalize_for_dedup(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Strip a leading enumeration marker ("1.", "2)", "-", "•", "*") that some
/// models emit despite the prompt's instruction.
fn strip_enumeration(line: &str) -> &str {
    let trimmed = line.trim();
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &trimmed[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim_start();
        }
    }
    for marker in ['-', '•', '*'] {
        if let Some(rest) = trimmed.strip_prefix(marker) {
            return rest.trim_start();
        }
    }
    trimmed
}

/// Parse an expansion response: one reformulation per line, markers
/// stripped, empties dropped, case/whitespace-insensitive dedup, original
/// excluded, truncated to `n`.
pub fn parse_variations(response: &str, original: &str, n: usize) -> Vec<String> {
    let original_key = normalize_for_dedup(original);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for line in response.lines() {
        let candidate = strip_enumeration(line);
        if candidate.is_empty() {
            continue;
        }
        let key = normalize_for_dedup(candidate);
        if key == original_key || !seen.insert(key) {
            continue;
        }
        out.push(candidate.to_string());
        if out.len() == n {
            break;
        }
    }
    out
}

/// Generate up to `cfg.num_variations` reformulations of `query`.
///
/// Transport failures and unparseable responses (after one extra attempt)
/// degrade to a single-query set rather than failing the request;
/// configuration errors are hard errors.
pub async fn expand_query(
    query: &str,
    lang: &str,
    cfg: &RetrievalConfig,
    llm: &dyn LlmBackend,
) -> Result<QuerySet, EngineError> {
    cfg.validate()?;
    if query.trim().is_empty() {
        return Err(EngineError::InvalidInput("query is empty".into()));
    }
    if cfg.num_variations == 0 {
        return Ok(QuerySet::single(query, lang));
    }

    let prompt = build_expansion_prompt(&cfg.expansion_template, cfg.num_variations, query);
    let request = ChatRequest {
        model: cfg.llm_model.clone(),
        prompt,
        temperature: cfg.llm_temperature,
        max_tokens: cfg.llm_max_tokens,
    };

    // One extra attempt on an empty parse before degrading.
    let mut degraded_reason: Option<String> = None;
    let mut variations = Vec::new();
    for attempt in 0..2 {
        match llm.complete(&request).await {
            Ok(response) => {
                variations = parse_variations(&response, query, cfg.num_variations);
                if !variations.is_empty() {
                    degraded_reason = None;
                    break;
                }
                degraded_reason = Some("expansion response had no usable lines".into());
            }
            Err(err @ BackendError::Config(_)) => return Err(EngineError::Backend(err)),
            Err(err) => {
                degraded_reason = Some(err.to_string());
            }
        }
        if attempt == 0 {
            tracing::warn!(query, "query expansion attempt failed, retrying once");
        }
    }

    if let Some(reason) = degraded_reason {
        tracing::warn!(query, reason, "query expansion degraded to single-query retrieval");
        return Ok(QuerySet {
            original: query.to_string(),
            variations: Vec::new(),
            lang: lang.to_string(),
            degraded: true,
        });
    }
    Ok(QuerySet {
        original: query.to_string(),
        variations,
        lang: lang.to_string(),
        degraded: false,
    })
}

// ─── Lexical retrieval (BM25) ───────────────────────────────────────────────

/// BM25 over the index's lexical statistics.
///
/// `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, score summed over unique
/// query terms; chunks sharing no term with the query are excluded.
pub fn lexical_search(
    index: &VectorIndex,
    query: &str,
    k: usize,
    params: &Bm25Params,
) -> RankedList {
    let stats = index.lexical_stats();
    let mut terms: Vec<String> = query.split_whitespace().map(str::to_lowercase).collect();
    terms.sort_unstable();
    terms.dedup();

    let mut scores: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    for term in &terms {
        let Some(postings) = stats.postings.get(term) else {
            continue;
        };
        let df = postings.len() as f64;
        let n = stats.doc_count as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        for &(pos, tf) in postings {
            let tf = f64::from(tf);
            let dl = f64::from(stats.doc_len[pos]);
            let norm = params.k1 * (1.0 - params.b + params.b * dl / stats.avg_doc_len);
            let contribution = idf * tf * (params.k1 + 1.0) / (tf + norm);
            *scores.entry(pos).or_insert(0.0) += contribution;
        }
    }

    let mut ranked: Vec<(usize, f64)> = scores.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("bm25 scores are finite")
            .then_with(|| index.chunk_id(a.0).cmp(index.chunk_id(b.0)))
    });
    ranked.truncate(k);
    RankedList {
        query_id: String::new(),
        source: ListSource::Lexical,
        items: ranked
            .into_iter()
            .map(|(pos, score)| ScoredItem {
                chunk_id: index.chunk_id(pos).to_string(),
                score,
            })
            .collect(),
    }
}

// ─── Reciprocal rank fusion ─────────────────────────────────────────────────

/// Fuse ranked lists: `score(d) = Σ_lists 1/(k + rank(d))` with 1-based
/// ranks; documents absent from a list contribute nothing for it. Output is
/// sorted by score descending, ties by ascending chunk_id.
pub fn rrf_fuse(lists: &[RankedList], k: u32) -> Result<FusedResult, EngineError> {
    if k < 1 {
        return Err(EngineError::InvalidConfig("rrf k must be at least 1".into()));
    }
    let mut acc: std::collections::HashMap<&str, (f64, Vec<Contribution>)> =
        std::collections::HashMap::new();
    for list in lists {
        let list_id = format!("{}/{}", list.query_id, list.source);
        for (pos, item) in list.items.iter().enumerate() {
            let rank = pos + 1;
            let entry = acc.entry(item.chunk_id.as_str()).or_insert_with(|| (0.0, Vec::new()));
            entry.0 += 1.0 / (f64::from(k) + rank as f64);
            entry.1.push(Contribution {
                list_id: list_id.clone(),
                rank,
            });
        }
    }
    let mut items: Vec<FusedItem> = acc
        .into_iter()
        .map(|(chunk_id, (score, contributing))| FusedItem {
            chunk_id: chunk_id.to_string(),
            score,
            contributing,
        })
        .collect();
    items.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("rrf scores are finite")
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    Ok(FusedResult { items })
}

// ─── Hybrid retrieval ───────────────────────────────────────────────────────

/// Run dense (and optionally lexical) search for every query in the set and
/// fuse the lists, truncated to `final_k`.
pub async fn retrieve_hybrid(
    index: &VectorIndex,
    query_set: &QuerySet,
    cfg: &RetrievalConfig,
    provider: &ProviderConfig,
) -> Result<FusedResult, EngineError> {
    cfg.validate()?;
    if index.provider_id() != provider.provider_id() {
        return Err(EngineError::ProviderMismatch {
            index: index.provider_id().to_string(),
            configured: provider.provider_id(),
        });
    }

    let queries = query_set.all_queries();
    let texts: Vec<String> = queries.iter().map(|q| q.to_string()).collect();
    let query_embeddings = embedding::embed_queries(&texts, provider).await?;

    let mut lists = Vec::with_capacity(queries.len() * 2);
    for (i, emb) in query_embeddings.iter().enumerate() {
        let mut dense = index.search(emb, cfg.top_k_per_query)?;
        dense.query_id = format!("q{i}");
        if !dense.items.is_empty() {
            lists.push(dense);
        }
        if cfg.enable_lexical {
            let mut lex = lexical_search(index, queries[i], cfg.top_k_per_query, &cfg.bm25);
            lex.query_id = format!("q{i}");
            if !lex.items.is_empty() {
                lists.push(lex);
            }
        }
    }
    if lists.is_empty() {
        return Ok(FusedResult::default());
    }
    let mut fused = rrf_fuse(&lists, cfg.rrf_k)?;
    fused.items.truncate(cfg.final_k);
    Ok(fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ScriptedLlm;
    use crate::embedding::fallback_embed;
    use crate::index::ChunkMeta;
    use proptest::prelude::*;

    fn list(query_id: &str, source: ListSource, ids: &[&str]) -> RankedList {
        RankedList {
            query_id: query_id.into(),
            source,
            items: ids
                .iter()
                .enumerate()
                .map(|(i, id)| ScoredItem {
                    chunk_id: (*id).into(),
                    score: 1.0 - i as f64 * 0.01,
                })
                .collect(),
        }
    }

    /// Direct Eq-style summation oracle, independent of rrf_fuse internals.
    fn rrf_oracle(lists: &[RankedList], k: u32) -> Vec<(String, f64)> {
        let mut ids: Vec<String> = lists
            .iter()
            .flat_map(|l| l.items.iter().map(|i| i.chunk_id.clone()))
            .collect();
        ids.sort();
        ids.dedup();
        let mut scored: Vec<(String, f64)> = ids
            .into_iter()
            .map(|id| {
                let mut s = 0.0;
                for l in lists {
                    if let Some(pos) = l.items.iter().position(|i| i.chunk_id == id) {
                        s += 1.0 / (f64::from(k) + (pos + 1) as f64);
                    }
                }
                (id, s)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored
    }

    #[test]
    fn rrf_single_list_rank_one_scores_one_over_k_plus_one() {
        let fused = rrf_fuse(&[list("q0", ListSource::Dense, &["a"])], 60).unwrap();
        assert!((fused.items[0].score - 1.0 / 61.0).abs() < 1e-12);
    }

    #[test]
    fn rrf_two_lists_sum_contributions() {
        let lists = vec![
            list("q0", ListSource::Dense, &["a", "b", "c"]),
            list("q1", ListSource::Dense, &["x", "y", "a"]),
        ];
        let fused = rrf_fuse(&lists, 60).unwrap();
        let a = fused.items.iter().find(|i| i.chunk_id == "a").unwrap();
        assert!((a.score - (1.0 / 61.0 + 1.0 / 63.0)).abs() < 1e-12);
        assert_eq!(a.contributing.len(), 2);
        assert_eq!(a.contributing[0].rank, 1);
        assert_eq!(a.contributing[1].rank, 3);
    }

    #[test]
    fn rrf_consensus_beats_single_top_rank() {
        // X at rank 5 in three lists vs Y at rank 1 in one list.
        let lists = vec![
            list("q0", ListSource::Dense, &["a", "b", "c", "d", "x"]),
            list("q1", ListSource::Dense, &["e", "f", "g", "h", "x"]),
            list("q2", ListSource::Dense, &["y", "i", "j", "k", "x"]),
        ];
        let fused = rrf_fuse(&lists, 60).unwrap();
        let x = fused.items.iter().find(|i| i.chunk_id == "x").unwrap();
        let y = fused.items.iter().find(|i| i.chunk_id == "y").unwrap();
        assert!((x.score - 3.0 / 65.0).abs() < 1e-12);
        assert!((y.score - 1.0 / 61.0).abs() < 1e-12);
        assert!(x.score > y.score);
    }

    #[test]
    fn rrf_rejects_k_below_one() {
        assert!(rrf_fuse(&[], 0).is_err());
    }

    #[test]
    fn rrf_single_list_preserves_order() {
        let l = list("q0", ListSource::Dense, &["c", "a", "b"]);
        let fused = rrf_fuse(&[l.clone()], 60).unwrap();
        let order: Vec<&str> = fused.items.iter().map(|i| i.chunk_id.as_str()).collect();
        assert_eq!(order, vec!["c", "a", "b"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn rrf_matches_direct_summation(
            seed_lists in proptest::collection::vec(
                proptest::collection::vec(0usize..10, 1..10),
                1..6,
            ),
            k in prop_oneof![Just(1u32), Just(10), Just(60)],
        ) {
            let lists: Vec<RankedList> = seed_lists
                .iter()
                .enumerate()
                .map(|(qi, docs)| {
                    let mut unique = docs.clone();
                    unique.dedup();
                    let mut seen = std::collections::HashSet::new();
                    let ids: Vec<String> = unique
                        .into_iter()
                        .filter(|d| seen.insert(*d))
                        .map(|d| format!("doc{d}"))
                        .collect();
                    RankedList {
                        query_id: format!("q{qi}"),
                        source: ListSource::Dense,
                        items: ids
                            .into_iter()
                            .enumerate()
                            .map(|(i, chunk_id)| ScoredItem { chunk_id, score: 1.0 - i as f64 * 0.01 })
                            .collect(),
                    }
                })
                .collect();
            let fused = rrf_fuse(&lists, k).unwrap();
            let oracle = rrf_oracle(&lists, k);
            prop_assert_eq!(fused.items.len(), oracle.len());
            for (item, (oid, oscore)) in fused.items.iter().zip(oracle.iter()) {
                prop_assert_eq!(&item.chunk_id, oid);
                prop_assert!((item.score - oscore).abs() < 1e-12);
            }
        }

        #[test]
        fn rrf_is_invariant_under_list_permutation(
            n_lists in 2usize..5,
            seed in 0u64..100,
        ) {
            let mut lists = Vec::new();
            for qi in 0..n_lists {
                let ids: Vec<String> = (0..5).map(|d| format!("doc{}", (d * (qi + 1) + seed as usize) % 8)).collect();
                let mut seen = std::collections::HashSet::new();
                let ids: Vec<String> = ids.into_iter().filter(|i| seen.insert(i.clone())).collect();
                lists.push(RankedList {
                    query_id: format!("q{qi}"),
                    source: ListSource::Dense,
                    items: ids.into_iter().enumerate().map(|(i, chunk_id)| ScoredItem { chunk_id, score: 1.0 - i as f64 * 0.01 }).collect(),
                });
            }
            let fused = rrf_fuse(&lists, 60).unwrap();
            let mut reversed = lists.clone();
            reversed.reverse();
            let fused_rev = rrf_fuse(&reversed, 60).unwrap();
            let order: Vec<&String> = fused.items.iter().map(|i| &i.chunk_id).collect();
            let order_rev: Vec<&String> = fused_rev.items.iter().map(|i| &i.chunk_id).collect();
            prop_assert_eq!(order, order_rev);
            for (a, b) in fused.items.iter().zip(fused_rev.items.iter()) {
                prop_assert!((a.score - b.score).abs() < 1e-12);
            }
        }

        #[test]
        fn rrf_scores_are_bounded(
            n_lists in 1usize..6,
            k in 1u32..100,
        ) {
            let lists: Vec<RankedList> = (0..n_lists)
                .map(|qi| list(&format!("q{qi}"), ListSource::Dense, &["a", "b"]))
                .collect();
            let fused = rrf_fuse(&lists, k).unwrap();
            for item in &fused.items {
                prop_assert!(item.score > 0.0);
                prop_assert!(item.score <= n_lists as f64 / (f64::from(k) + 1.0) + 1e-12);
            }
        }

        #[test]
        fn rrf_improving_a_rank_never_lowers_the_score(
            rank in 1usize..9,
        ) {
            // Document "t" moves up one position in list B; its score must not drop.
            let others: Vec<String> = (0..10).map(|i| format!("z{i}")).collect();
            let make = |target_pos: usize| {
                let mut ids: Vec<String> = others[..9].to_vec();
                ids.insert(target_pos, "t".to_string());
                RankedList {
                    query_id: "qb".into(),
                    source: ListSource::Dense,
                    items: ids.into_iter().enumerate().map(|(i, chunk_id)| ScoredItem { chunk_id, score: 1.0 - i as f64 * 0.01 }).collect(),
                }
            };
            let fixed = list("qa", ListSource::Dense, &["t", "u", "v"]);
            let before = rrf_fuse(&[fixed.clone(), make(rank)], 60).unwrap();
            let after = rrf_fuse(&[fixed, make(rank - 1)], 60).unwrap();
            let s_before = before.items.iter().find(|i| i.chunk_id == "t").unwrap().score;
            let s_after = after.items.iter().find(|i| i.chunk_id == "t").unwrap().score;
            prop_assert!(s_after >= s_before);
        }
    }

    // ── expansion ──

    #[tokio::test]
    async fn expand_zero_variations_makes_no_llm_call() {
        let cfg = RetrievalConfig {
            num_variations: 0,
            ..RetrievalConfig::default()
        };
        // A backend that would fail if called.
        let llm = crate::backends::DisabledLlm;
        let qs = expand_query("who was antoine meillet", "en", &cfg, &llm).await.unwrap();
        assert!(qs.variations.is_empty());
        assert!(!qs.degraded);
    }

    #[tokio::test]
    async fn expand_parses_lines_in_order() {
        let llm = ScriptedLlm::constant(
            "Who was the linguist Antoine Meillet?\nAntoine Meillet biography\nMeillet the philologist\nlife of Antoine Meillet\ncareer of Antoine Meillet",
        );
        let cfg = RetrievalConfig::default();
        let qs = expand_query("Qui est Antoine Meillet?", "fr", &cfg, &llm).await.unwrap();
        assert_eq!(qs.variations.len(), 5);
        assert_eq!(qs.variations[0], "Who was the linguist Antoine Meillet?");
        assert!(!qs.degraded);
    }

    #[tokio::test]
    async fn expand_dedupes_and_truncates() {
        // 7 lines: two duplicate the original (one with different case), so
        // at most 5 non-original variations remain.
        let llm = ScriptedLlm::constant(
            "1. the query\n2. variation one\n- variation two\n• variation three\nTHE QUERY\nvariation   one\nvariation four",
        );
        let cfg = RetrievalConfig::default();
        let qs = expand_query("the query", "en", &cfg, &llm).await.unwrap();
        assert_eq!(
            qs.variations,
            vec!["variation one", "variation two", "variation three", "variation four"]
        );
    }

    #[tokio::test]
    async fn expand_degrades_on_transport_failure() {
        struct FailingLlm;
        #[async_trait::async_trait]
        impl LlmBackend for FailingLlm {
            async fn complete(&self, _req: &ChatRequest) -> Result<String, BackendError> {
                Err(BackendError::Transport("connection refused".into()))
            }
        }
        let cfg = RetrievalConfig::default();
        let qs = expand_query("any question", "en", &cfg, &FailingLlm).await.unwrap();
        assert!(qs.degraded);
        assert!(qs.variations.is_empty());
    }

    #[tokio::test]
    async fn expand_config_error_is_hard() {
        let cfg = RetrievalConfig::default();
        let err = expand_query("any question", "en", &cfg, &crate::backends::DisabledLlm).await;
        assert!(matches!(err, Err(EngineError::Backend(BackendError::Config(_)))));
    }

    #[test]
    fn expansion_prompt_substitutes_placeholders() {
        let p = build_expansion_prompt(QUERY_VARIATION_TEMPLATE, 5, "Who won the battle?");
        assert!(p.contains("in 5 different ways"));
        assert!(p.contains("Input: Who won the battle?"));
        assert!(!p.contains("{num_variations}"));
        assert!(!p.contains("{original_query}"));
    }

    // ── lexical ──

    fn toy_index() -> VectorIndex {
        let texts = [
            ("a#0", "la bataille de verdun fut longue"),
            ("b#0", "le traité de versailles signé en 1919"),
            ("c#0", "la bataille navale du jutland"),
            ("d#0", "armistice signé dans la forêt de compiègne"),
            ("e#0", "exposition universelle de paris"),
        ];
        let entries = texts
            .iter()
            .map(|(id, text)| {
                (
                    (*id).to_string(),
                    fallback_embed(text, 32, 0).vector,
                    ChunkMeta {
                        doc_id: id.split('#').next().unwrap().into(),
                        title: format!("T {id}"),
                        lang: "fr".into(),
                        text: (*text).into(),
                    },
                )
            })
            .collect();
        VectorIndex::from_parts("fallback:32:0".into(), 32, entries).unwrap()
    }

    #[test]
    fn lexical_unique_term_ranks_its_chunk_first() {
        let idx = toy_index();
        let hits = lexical_search(&idx, "jutland", 5, &Bm25Params::default());
        assert_eq!(hits.items[0].chunk_id, "c#0");
        assert_eq!(hits.items.len(), 1);
    }

    #[test]
    fn lexical_no_overlap_is_empty() {
        let idx = toy_index();
        let hits = lexical_search(&idx, "zeppelin dirigeable", 5, &Bm25Params::default());
        assert!(hits.items.is_empty());
        let empty = lexical_search(&idx, "   ", 5, &Bm25Params::default());
        assert!(empty.items.is_empty());
    }

    #[test]
    fn lexical_matches_direct_bm25_formula() {
        let idx = toy_index();
        let params = Bm25Params::default();
        let hits = lexical_search(&idx, "bataille signé", 5, &params);

        // Oracle: evaluate the BM25 formula directly per document.
        let stats = idx.lexical_stats();
        let n = stats.doc_count as f64;
        let score_for = |pos: usize| -> f64 {
            let mut total = 0.0;
            for term in ["bataille", "signé"] {
                let posting = stats.postings.get(term).unwrap();
                let df = posting.len() as f64;
                let Some(&(_, tf)) = posting.iter().find(|&&(p, _)| p == pos) else {
                    continue;
                };
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let tf = f64::from(tf);
                let dl = f64::from(stats.doc_len[pos]);
                let denom = tf + params.k1 * (1.0 - params.b + params.b * dl / stats.avg_doc_len);
                total += idf * tf * (params.k1 + 1.0) / denom;
            }
            total
        };
        for item in &hits.items {
            let pos = (0..idx.len()).find(|&p| idx.chunk_id(p) == item.chunk_id).unwrap();
            assert!((item.score - score_for(pos)).abs() < 1e-9);
        }
        // Four chunks contain at least one query term.
        assert_eq!(hits.items.len(), 4);
    }

    // ── hybrid ──

    #[tokio::test]
    async fn hybrid_single_query_preserves_dense_order() {
        let idx = toy_index();
        let provider = ProviderConfig::fallback(32, 0);
        let cfg = RetrievalConfig {
            num_variations: 0,
            final_k: 5,
            ..RetrievalConfig::default()
        };
        let qs = QuerySet::single("la bataille de verdun", "fr");
        let fused = retrieve_hybrid(&idx, &qs, &cfg, &provider).await.unwrap();
        let q = fallback_embed("la bataille de verdun", 32, 0);
        let dense = idx.search(&q, 20).unwrap();
        let fused_order: Vec<&str> = fused.items.iter().map(|i| i.chunk_id.as_str()).collect();
        let dense_order: Vec<&str> = dense.items.iter().take(5).map(|i| i.chunk_id.as_str()).collect();
        assert_eq!(fused_order, dense_order);
    }

    #[tokio::test]
    async fn hybrid_variations_lift_consensus_chunks() {
        let idx = toy_index();
        let provider = ProviderConfig::fallback(32, 0);
        let cfg = RetrievalConfig {
            num_variations: 0,
            final_k: 3,
            ..RetrievalConfig::default()
        };
        let qs = QuerySet {
            original: "fin de la grande guerre".into(),
            variations: vec![
                "armistice signé forêt compiègne".into(),
                "armistice compiègne".into(),
            ],
            lang: "fr".into(),
            degraded: false,
        };
        let fused = retrieve_hybrid(&idx, &qs, &cfg, &provider).await.unwrap();
        assert_eq!(fused.items[0].chunk_id, "d#0");
    }

    #[tokio::test]
    async fn hybrid_provider_mismatch_is_an_error() {
        let idx = toy_index();
        let provider = ProviderConfig::fallback(32, 1); // different seed → different id
        let cfg = RetrievalConfig::default();
        let qs = QuerySet::single("bataille", "fr");
        assert!(matches!(
            retrieve_hybrid(&idx, &qs, &cfg, &provider).await,
            Err(EngineError::ProviderMismatch { .. })
        ));
    }
}
