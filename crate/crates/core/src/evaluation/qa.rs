//! RAGAS-style QA quality metrics: faithfulness and answer relevancy.
//!
//! Abstained answers score exactly 0.0 on both metrics by convention and
//! are never sent to the claim extractor.

use crate::embedding::{self, Embedding, ProviderConfig};
use crate::error::EngineError;
use crate::generation::{Answer, EvidenceContext};

use super::judge::JudgeBackend;

/// Fraction of the answer's atomic claims supported by the rendered context.
pub async fn faithfulness(
    answer: &Answer,
    ctx: &EvidenceContext,
    judge: &dyn JudgeBackend,
) -> Result<f64, EngineError> {
    if answer.abstained {
        return Ok(0.0);
    }
    let claims = judge.extract_claims(&answer.text, &answer.lang).await?;
    if claims.is_empty() {
        return Err(EngineError::UndefinedMetric(
            "no claims extracted from a non-abstained answer".into(),
        ));
    }
    let mut supported = 0usize;
    for claim in &claims {
        if judge.judge_support(claim, &ctx.rendered, &answer.lang).await? {
            supported += 1;
        }
    }
    Ok(supported as f64 / claims.len() as f64)
}

/// Mean cosine between each generated-question embedding and the original
/// query embedding.
pub fn mean_cosine(questions: &[Embedding], original: &Embedding) -> f64 {
    if questions.is_empty() {
        return 0.0;
    }
    questions.iter().map(|q| q.cosine(original)).sum::<f64>() / questions.len() as f64
}

/// Generate `n` questions from the answer, embed them and the original
/// query, and average the cosines.
pub async fn answer_relevancy(
    answer: &Answer,
    query: &str,
    judge: &dyn JudgeBackend,
    provider: &ProviderConfig,
    n: usize,
) -> Result<f64, EngineError> {
    if answer.abstained {
        return Ok(0.0);
    }
    if n == 0 {
        return Err(EngineError::InvalidInput("relevancy needs n >= 1 questions".into()));
    }
    let questions = judge.generate_questions(&answer.text, n, &answer.lang).await?;
    let mut texts = questions;
    texts.push(query.to_string());
    let mut embedded = embedding::embed_queries(&texts, provider).await?;
    let original = embedded.pop().expect("query embedding present");
    Ok(mean_cosine(&embedded, &original))
}
