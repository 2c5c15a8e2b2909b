//! Judge backends for QA quality metrics.
//!
//! The LLM judge delegates claim extraction, support verdicts, and question
//! generation to a model; the offline judge substitutes deterministic rules
//! so evaluation runs without model access.

use async_trait::async_trait;

use crate::backends::{ChatRequest, LlmBackend};
use crate::error::EngineError;

use super::content_words;

#[async_trait]
pub trait JudgeBackend: Send + Sync {
    /// Atomic claims extracted from an answer.
    async fn extract_claims(&self, answer: &str, lang: &str) -> Result<Vec<String>, EngineError>;

    /// Whether the context supports the claim.
    async fn judge_support(&self, claim: &str, context: &str, lang: &str) -> Result<bool, EngineError>;

    /// Questions the answer would answer, used for relevancy.
    async fn generate_questions(
        &self,
        answer: &str,
        n: usize,
        lang: &str,
    ) -> Result<Vec<String>, EngineError>;
}

// ─── Offline judge ──────────────────────────────────────────────────────────

/// Split on `.`, `!`, `?` outside of quotes; the terminator stays with its
/// sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut in_double = false;
    let mut guillemets = 0i32;
    for c in text.chars() {
        current.push(c);
        match c {
            '"' => in_double = !in_double,
            '“' => in_double = true,
            '”' => in_double = false,
            '«' => guillemets += 1,
            '»' => guillemets = (guillemets - 1).max(0),
            '.' | '!' | '?' if !in_double && guillemets == 0 => {
                let t = current.trim();
                if !t.is_empty() {
                    sentences.push(t.to_string());
                }
                current.clear();
            }
            _ => {}
        }
    }
    let tail = current.trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// Deterministic substitutes: sentences as claims, content-word overlap as
/// the support verdict (≥ 60% of a claim's content words must occur in the
/// context), and the answer itself as every generated question.
pub struct OfflineJudge;

pub const SUPPORT_OVERLAP_THRESHOLD: f64 = 0.6;

impl OfflineJudge {
    pub fn support_overlap(claim: &str, context: &str) -> f64 {
        let claim_words = content_words(claim);
        if claim_words.is_empty() {
            return 1.0;
        }
        let context_set: std::collections::HashSet<String> = context
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        let matched = claim_words.iter().filter(|w| context_set.contains(*w)).count();
        matched as f64 / claim_words.len() as f64
    }
}

#[async_trait]
impl JudgeBackend for OfflineJudge {
    async fn extract_claims(&self, answer: &str, _lang: &str) -> Result<Vec<String>, EngineError> {
        Ok(split_sentences(answer))
    }

    async fn judge_support(&self, claim: &str, context: &str, _lang: &str) -> Result<bool, EngineError> {
        Ok(Self::support_overlap(claim, context) >= SUPPORT_OVERLAP_THRESHOLD)
    }

    async fn generate_questions(
        &self,
        answer: &str,
        n: usize,
        _lang: &str,
    ) -> Result<Vec<String>, EngineError> {
        Ok(vec![answer.to_string(); n])
    }
}

// ─── LLM judge ──────────────────────────────────────────────────────────────

const CLAIM_PROMPT: &str = "Break the following answer into its atomic factual claims. \
Write exactly one claim per line, with no numbering and no commentary.\n\n\
Answer: {answer}\n\nClaims:";

const SUPPORT_PROMPT: &str = "Context:\n{context}\n\nClaim: {claim}\n\n\
Does the context above fully support the claim? Reply with exactly YES or NO.";

const QUESTION_PROMPT: &str = "Write {n} different questions that the following answer would \
answer. One question per line, no numbering.\n\nAnswer: {answer}\n\nQuestions:";

pub struct LlmJudge<'a> {
    llm: &'a dyn LlmBackend,
    model: String,
}

impl<'a> LlmJudge<'a> {
    pub fn new(llm: &'a dyn LlmBackend, model: impl Into<String>) -> Self {
        Self {
            llm,
            model: model.into(),
        }
    }

    async fn ask(&self, prompt: String) -> Result<String, EngineError> {
        let req = ChatRequest {
            model: self.model.clone(),
            prompt,
            temperature: 0.0,
            max_tokens: 512,
        };
        Ok(self.llm.complete(&req).await?)
    }
}

#[async_trait]
impl JudgeBackend for LlmJudge<'_> {
    async fn extract_claims(&self, answer: &str, _lang: &str) -> Result<Vec<String>, EngineError> {
        let response = self.ask(CLAIM_PROMPT.replace("{answer}", answer)).await?;
        Ok(response
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect())
    }

    async fn judge_support(&self, claim: &str, context: &str, _lang: &str) -> Result<bool, EngineError> {
        let prompt = SUPPORT_PROMPT
            .replace("{context}", context)
            .replace("{claim}", claim);
        let response = self.ask(prompt).await?;
        Ok(response.trim().to_lowercase().starts_with("yes"))
    }

    async fn generate_questions(
        &self,
        answer: &str,
        n: usize,
        _lang: &str,
    ) -> Result<Vec<String>, EngineError> {
        let prompt = QUESTION_PROMPT
            .replace("{n}", &n.to_string())
            .replace("{answer}", answer);
        let response = self.ask(prompt).await?;
        let questions: Vec<String> = response
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .take(n)
            .map(String::from)
            .collect();
        if questions.is_empty() {
            return Err(EngineError::UndefinedMetric(
                "judge generated no questions".into(),
            ));
        }
        Ok(questions)
    }
}
