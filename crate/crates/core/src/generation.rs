//! Grounded answer generation: evidence structuring, constrained prompting,
//! and abstention handling.
//!
//! Evidence is grouped by source document, each group prefixed with title
//! and document id, groups separated by a fixed marker so the generator can
//! tell potentially contradictory sources apart.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, ChatRequest, LlmBackend};
use crate::error::EngineError;
use crate::index::VectorIndex;
use crate::retrieval::FusedResult;

/// Default QA prompt; pinned byte-exactly by golden tests.
pub const HISTORICAL_QA_TEMPLATE: &str = include_str!("../templates/historical_qa.txt");
/// Alternate, more compact QA prompt.
pub const ANSWER_GENERATION_TEMPLATE: &str = include_str!("../templates/answer_generation.txt");

/// Marker between evidence groups.
pub const GROUP_SEPARATOR: &str = "\n\n---\n\n";

pub const ABSTENTION_PHRASE_EN: &str =
    "I cannot answer this question based solely on the provided information.";
pub const ABSTENTION_PHRASE_FR: &str =
    "Je ne peux pas répondre à cette question sur la seule base des informations fournies";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub chunk_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceGroup {
    pub doc_id: String,
    pub title: String,
    pub passages: Vec<Passage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceContext {
    pub groups: Vec<EvidenceGroup>,
    pub rendered: String,
}

impl EvidenceContext {
    pub fn empty() -> Self {
        Self {
            groups: Vec::new(),
            rendered: String::new(),
        }
    }

    pub fn chunk_ids(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| g.passages.iter().map(|p| p.chunk_id.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub model_name: String,
    pub temperature: f32,
    pub max_output_tokens: u32,
    /// Per-language abstention phrases; the English list is always consulted.
    pub abstention_phrases: HashMap<String, Vec<String>>,
    /// Report-only faithfulness gate; answers below it are flagged, never
    /// regenerated.
    pub faithfulness_threshold: Option<f64>,
    pub prompt_template: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let mut phrases = HashMap::new();
        phrases.insert("en".to_string(), vec![ABSTENTION_PHRASE_EN.to_string()]);
        phrases.insert("fr".to_string(), vec![ABSTENTION_PHRASE_FR.to_string()]);
        Self {
            model_name: "mistralai/Mistral-7B-Instruct-v0.3".to_string(),
            temperature: 0.3,
            max_output_tokens: 512,
            abstention_phrases: phrases,
            faithfulness_threshold: None,
            prompt_template: HISTORICAL_QA_TEMPLATE.to_string(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.temperature < 0.0 {
            return Err(EngineError::InvalidConfig("temperature must be >= 0".into()));
        }
        if let Some(tau) = self.faithfulness_threshold {
            if !(0.0..=1.0).contains(&tau) {
                return Err(EngineError::InvalidConfig(
                    "faithfulness threshold must be within [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Generated answer with its evidence trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub abstained: bool,
    /// Set when the completion came back empty and was treated as abstention.
    #[serde(default)]
    pub empty_completion: bool,
    pub citations: Vec<String>,
    pub query: String,
    pub lang: String,
    pub model: String,
    pub temperature: f32,
}

// ─── Context structuring ────────────────────────────────────────────────────

/// Group fused chunks by document, order groups by their best fused rank,
/// and render with metadata headers and group separators.
pub fn structure_context(fused: &FusedResult, index: &VectorIndex) -> Result<EvidenceContext, EngineError> {
    if fused.is_empty() {
        return Ok(EvidenceContext::empty());
    }
    // Fused items arrive rank-ordered, so the first appearance of a doc_id
    // fixes its group position and passages stay in fused-rank order.
    let mut groups: Vec<EvidenceGroup> = Vec::new();
    let mut by_doc: HashMap<String, usize> = HashMap::new();
    for item in &fused.items {
        let meta = index.meta(&item.chunk_id).ok_or_else(|| {
            EngineError::InvalidInput(format!("fused chunk '{}' is not in the index", item.chunk_id))
        })?;
        let slot = *by_doc.entry(meta.doc_id.clone()).or_insert_with(|| {
            groups.push(EvidenceGroup {
                doc_id: meta.doc_id.clone(),
                title: meta.title.clone(),
                passages: Vec::new(),
            });
            groups.len() - 1
        });
        groups[slot].passages.push(Passage {
            chunk_id: item.chunk_id.clone(),
            text: meta.text.clone(),
        });
    }

    let rendered = groups
        .iter()
        .map(|g| {
            let header = format!("[Article: {} | Document: {}]", g.title, g.doc_id);
            let body = g
                .passages
                .iter()
                .map(|p| p.text.as_str())
                .collect::<Vec<_>>()
                .join("\n\n");
            format!("{header}\n{body}")
        })
        .collect::<Vec<_>>()
        .join(GROUP_SEPARATOR);

    Ok(EvidenceContext { groups, rendered })
}

/// Fill the QA template with the rendered context and the question. Pure
/// templating: identical inputs produce identical bytes.
pub fn build_answer_prompt(ctx: &EvidenceContext, query: &str, template: &str) -> String {
    template
        .replace("{context_text}", &ctx.rendered)
        .replace("{query}", query)
}

// ─── Abstention detection ───────────────────────────────────────────────────

/// Case/whitespace/punctuation-insensitive form used for phrase matching.
fn normalize_for_matching(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last_space = true;
    for c in text.chars() {
        if c.is_alphanumeric() {
            for lc in c.to_lowercase() {
                out.push(lc);
            }
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    out.trim_end().to_string()
}

/// True when the normalized text contains a normalized abstention phrase for
/// `lang` or for the default English list.
pub fn detect_abstention(text: &str, lang: &str, cfg: &GenerationConfig) -> bool {
    let haystack = normalize_for_matching(text);
    if haystack.is_empty() {
        return false;
    }
    let mut candidates: Vec<&String> = Vec::new();
    if let Some(list) = cfg.abstention_phrases.get(lang) {
        candidates.extend(list);
    }
    if lang != "en" {
        if let Some(list) = cfg.abstention_phrases.get("en") {
            candidates.extend(list);
        }
    }
    candidates
        .into_iter()
        .any(|phrase| haystack.contains(&normalize_for_matching(phrase)))
}

// ─── Generation ─────────────────────────────────────────────────────────────

/// Request one completion and wrap it with abstention detection and the
/// evidence citations.
pub async fn generate_answer(
    prompt: &str,
    query: &str,
    lang: &str,
    citations: Vec<String>,
    cfg: &GenerationConfig,
    llm: &dyn LlmBackend,
) -> Result<Answer, EngineError> {
    cfg.validate()?;
    let request = ChatRequest {
        model: cfg.model_name.clone(),
        prompt: prompt.to_string(),
        temperature: cfg.temperature,
        max_tokens: cfg.max_output_tokens,
    };
    let completion = match llm.complete(&request).await {
        Ok(text) => text,
        Err(err @ BackendError::Config(_)) => return Err(EngineError::Backend(err)),
        Err(err) => return Err(EngineError::Generation(err)),
    };
    let text = completion.trim().to_string();
    if text.is_empty() {
        // Fail-safe direction: an empty completion counts as abstention.
        return Ok(Answer {
            text,
            abstained: true,
            empty_completion: true,
            citations,
            query: query.to_string(),
            lang: lang.to_string(),
            model: cfg.model_name.clone(),
            temperature: cfg.temperature,
        });
    }
    let abstained = detect_abstention(&text, lang, cfg);
    Ok(Answer {
        text,
        abstained,
        empty_completion: false,
        citations,
        query: query.to_string(),
        lang: lang.to_string(),
        model: cfg.model_name.clone(),
        temperature: cfg.temperature,
    })
}
