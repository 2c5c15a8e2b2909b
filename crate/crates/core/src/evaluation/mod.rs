//! Evaluation: retrieval metrics, latent-space structure, entity coherence,
//! and QA quality (faithfulness, answer relevancy) with pluggable judges.

pub mod benchmark;
pub mod clustering;
pub mod judge;
pub mod qa;
pub mod report;
pub mod trec;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::index::{RankedList, ScoredItem};

pub use benchmark::{
    read_benchmark_queries, run_retrieval_benchmark, BenchmarkOutput, BenchmarkQuery, QueryCategory,
};
pub use clustering::{assign_clusters, cluster_metrics, ClusterMetrics};
pub use judge::{split_sentences, JudgeBackend, LlmJudge, OfflineJudge};
pub use qa::{answer_relevancy, faithfulness, mean_cosine};
pub use report::{EvalReport, LatentSlice, NerSlice, QaRow, RetrievalSlice};

/// Binary relevance judgments: query_id → set of relevant chunk_ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    pub judgments: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.judgments.get(query_id)
    }
}

/// Ranked retrieval output per query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub rankings: BTreeMap<String, Vec<ScoredItem>>,
}

// ─── Retrieval metrics ──────────────────────────────────────────────────────

/// Mean over queries of |relevant ∩ top-K| / |relevant|.
///
/// Queries with an empty relevant set are excluded with a warning; a query
/// missing from the qrels entirely is an input error.
pub fn recall_at_k(run: &RunResult, qrels: &Qrels, k: usize) -> Result<f64, EngineError> {
    if k == 0 {
        return Err(EngineError::InvalidInput("recall K must be at least 1".into()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for (query_id, ranking) in &run.rankings {
        let relevant = qrels.relevant(query_id).ok_or_else(|| {
            EngineError::InvalidInput(format!("query '{query_id}' missing from qrels"))
        })?;
        if relevant.is_empty() {
            tracing::warn!(query_id, "query has no relevant documents, excluded from recall");
            continue;
        }
        let hits = ranking
            .iter()
            .take(k)
            .filter(|item| relevant.contains(&item.chunk_id))
            .count();
        total += hits as f64 / relevant.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(EngineError::UndefinedMetric(
            "recall@K over zero judged queries".into(),
        ));
    }
    Ok(total / counted as f64)
}

/// Mean over queries of |relevant ∩ top-5| / 5. The denominator stays 5
/// even when fewer results were returned.
pub fn top5_rate(run: &RunResult, qrels: &Qrels) -> Result<f64, EngineError> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for (query_id, ranking) in &run.rankings {
        let relevant = qrels.relevant(query_id).ok_or_else(|| {
            EngineError::InvalidInput(format!("query '{query_id}' missing from qrels"))
        })?;
        if relevant.is_empty() {
            tracing::warn!(query_id, "query has no relevant documents, excluded from top-5 rate");
            continue;
        }
        let hits = ranking
            .iter()
            .take(5)
            .filter(|item| relevant.contains(&item.chunk_id))
            .count();
        total += hits as f64 / 5.0;
        counted += 1;
    }
    if counted == 0 {
        return Err(EngineError::UndefinedMetric(
            "top-5 rate over zero judged queries".into(),
        ));
    }
    Ok(total / counted as f64)
}

/// Similarity gap between the top-1 and top-2 items of one ranked list.
pub fn confidence_drop(list: &RankedList) -> Result<f64, EngineError> {
    confidence_drop_scores(&list.items.iter().map(|i| i.score).collect::<Vec<_>>())
}

/// Same gap computed over any non-increasing score sequence (fused lists).
pub fn confidence_drop_scores(scores: &[f64]) -> Result<f64, EngineError> {
    if scores.len() < 2 {
        return Err(EngineError::UndefinedMetric(
            "confidence drop needs at least two ranked items".into(),
        ));
    }
    Ok(scores[0] - scores[1])
}

// ─── Entity coherence (SynRel) ──────────────────────────────────────────────

/// Entity as reported by an NER backend, label kept raw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEntity {
    pub surface: String,
    pub label: String,
}

impl LabeledEntity {
    pub fn new(surface: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            label: label.into(),
        }
    }
}

const CANONICAL_LABELS: [&str; 4] = ["PER", "ORG", "LOC", "MISC"];

fn is_boundary_punct(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(c, '«' | '»' | '‘' | '’' | '“' | '”' | '…' | '–' | '—')
}

/// A coherent entity forms a complete linguistic unit: no subword
/// continuation marker, clean boundaries, a canonical label, and no leading
/// lowercase function word.
pub fn is_coherent_entity(entity: &LabeledEntity) -> bool {
    let surface = &entity.surface;
    if surface.contains("##") {
        return false;
    }
    let mut chars = surface.chars();
    let (Some(first), Some(last)) = (chars.next(), surface.chars().last()) else {
        return false;
    };
    if is_boundary_punct(first) || is_boundary_punct(last) {
        return false;
    }
    if !CANONICAL_LABELS.contains(&entity.label.as_str()) {
        return false;
    }
    if let Some(head) = surface.split_whitespace().next() {
        let lower = head.chars().all(|c| !c.is_uppercase());
        if lower && is_function_word(head) {
            return false;
        }
    }
    true
}

/// Proportion of coherent entities over all texts' entity sets.
pub fn syntactic_relevance(entity_sets: &[Vec<LabeledEntity>]) -> Result<f64, EngineError> {
    let total: usize = entity_sets.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(EngineError::UndefinedMetric(
            "syntactic relevance over zero entities".into(),
        ));
    }
    let coherent: usize = entity_sets
        .iter()
        .flat_map(|set| set.iter())
        .filter(|e| is_coherent_entity(e))
        .count();
    Ok(coherent as f64 / total as f64)
}

// ─── Function words / stopwords ─────────────────────────────────────────────

// Shipped lists for the corpus languages. Entity coherence and the offline
// support judge look tokens up in the union of both.
const STOPWORDS_EN: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "from", "by", "with",
    "for", "as", "is", "are", "was", "were", "be", "been", "being", "it", "its", "this", "that",
    "these", "those", "he", "she", "they", "we", "you", "i", "his", "her", "their", "our", "your",
    "my", "not", "no", "do", "does", "did", "will", "would", "can", "could", "shall", "should",
    "may", "might", "have", "has", "had", "what", "which", "who", "whom", "when", "where", "why",
    "how", "than", "then", "there", "here", "all", "any", "some", "such", "only", "also", "into",
    "over", "under", "about", "after", "before", "between", "during", "through", "so", "if",
    "because", "while", "until", "both", "each", "more", "most", "other", "own", "same", "too",
];

const STOPWORDS_FR: &[&str] = &[
    "le", "la", "les", "l", "un", "une", "des", "du", "de", "d", "et", "ou", "mais", "donc",
    "or", "ni", "car", "à", "au", "aux", "en", "dans", "sur", "sous", "par", "pour", "avec",
    "sans", "chez", "vers", "entre", "contre", "pendant", "avant", "après", "depuis", "selon",
    "est", "sont", "était", "étaient", "être", "été", "a", "ont", "avait", "avaient", "avoir",
    "eu", "fut", "furent", "sera", "seront", "il", "elle", "ils", "elles", "on", "nous", "vous",
    "je", "tu", "ce", "cette", "ces", "cet", "son", "sa", "ses", "leur", "leurs", "notre", "nos",
    "votre", "vos", "mon", "ma", "mes", "qui", "que", "quoi", "dont", "où", "quand", "comment",
    "pourquoi", "ne", "pas", "plus", "moins", "très", "aussi", "comme", "si", "tout", "tous",
    "toute", "toutes", "autre", "autres", "même", "mêmes", "y", "se", "s", "n", "qu", "c", "j",
    "m", "t",
];

pub fn stopwords(lang: &str) -> &'static [&'static str] {
    match lang {
        "en" => STOPWORDS_EN,
        "fr" => STOPWORDS_FR,
        _ => &[],
    }
}

/// Membership in either shipped list (entities carry no language tag).
pub fn is_function_word(token: &str) -> bool {
    let lower = token.to_lowercase();
    STOPWORDS_EN.contains(&lower.as_str()) || STOPWORDS_FR.contains(&lower.as_str())
}

/// Lowercased alphanumeric tokens with the union stoplist removed.
pub fn content_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !STOPWORDS_EN.contains(t) && !STOPWORDS_FR.contains(t))
        .map(String::from)
        .collect()
}
