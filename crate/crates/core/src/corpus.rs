//! Corpus ingestion: cleaning, chunking, and entity annotation.
//!
//! Raw documents arrive as JSONL (`{"doc_id", "title", "text", "lang"}`,
//! UTF-8, one object per line). Cleaning is deliberately minimal: tags and
//! entities go, OCR-level noise stays.

use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::backends::{EntitySpan, NerBackend};
use crate::error::EngineError;

pub const DEFAULT_MAX_CHUNK_TOKENS: usize = 512;
pub const DEFAULT_CHUNK_OVERLAP: usize = 64;

/// One input document, as read from the corpus JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
    pub lang: String,
}

/// A named entity anchored to a chunk by character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub surface: String,
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// One indexable passage. `chunk_id` is `doc_id + "#" + ordinal`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub title: String,
    pub text: String,
    pub lang: String,
    pub token_count: usize,
    #[serde(default)]
    pub entities: Vec<Entity>,
}

/// Options recorded in the manifest so a corpus can be rebuilt bit-for-bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingOptions {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl Default for ChunkingOptions {
    fn default() -> Self {
        Self {
            max_tokens: DEFAULT_MAX_CHUNK_TOKENS,
            overlap: DEFAULT_CHUNK_OVERLAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    /// Wall-clock ingestion time (unix seconds). Not covered by the
    /// determinism contract, which applies to chunk data only.
    pub ingested_at_unix: u64,
    pub cleaning: String,
    pub chunking: ChunkingOptions,
    pub ner: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub chunks: Vec<Chunk>,
    pub manifest: Manifest,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

// ─── Text cleaning ──────────────────────────────────────────────────────────

const PUNCT_NO_SPACE_BEFORE: [char; 6] = ['.', ',', ';', ':', '!', '?'];

fn is_clause_punct(c: char) -> bool {
    PUNCT_NO_SPACE_BEFORE.contains(&c)
}

/// Decode the common named HTML entities plus numeric references. Unknown
/// references are left untouched.
fn decode_entities(input: &str) -> String {
    let mut out = String::with_capacity(input.len());
    let chars: Vec<char> = input.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '&' {
            // An entity reference is at most a short run ending in ';'.
            let mut j = i + 1;
            let mut found = None;
            while j < chars.len() && j - i <= 10 {
                if chars[j] == ';' {
                    found = Some(j);
                    break;
                }
                j += 1;
            }
            if let Some(end) = found {
                let name: String = chars[i + 1..end].iter().collect();
                if let Some(decoded) = decode_entity_name(&name) {
                    out.push(decoded);
                    i = end + 1;
                    continue;
                }
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn decode_entity_name(name: &str) -> Option<char> {
    match name {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some('\u{a0}'),
        _ => {
            let code = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X"));
            if let Some(hex) = code {
                return u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
            }
            if let Some(dec) = name.strip_prefix('#') {
                return dec.parse::<u32>().ok().and_then(char::from_u32);
            }
            None
        }
    }
}

/// Strip `<...>` spans whose opener looks like a tag start (letter, `/`, `!`
/// or `?` after the `<`). Content between tags is preserved; an unterminated
/// `<` is kept as text.
fn strip_tags(input: &str) -> String {
    let chars: Vec<char> = input.chars().collect();
    let mut out = String::with_capacity(input.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' && i + 1 < chars.len() {
            let next = chars[i + 1];
            if next.is_alphabetic() || next == '/' || next == '!' || next == '?' {
                if let Some(close) = chars[i..].iter().position(|&c| c == '>') {
                    i += close + 1;
                    continue;
                }
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn collapse_whitespace(input: &str) -> String {
    let mut out = String::with_capacity(input.len());
    let mut in_run = false;
    for c in input.chars() {
        if c.is_whitespace() {
            if !in_run {
                out.push(' ');
                in_run = true;
            }
        } else {
            out.push(c);
            in_run = false;
        }
    }
    out
}

/// Remove spaces before `.,;:!?` and ensure one after them when the next
/// character is a letter.
fn fix_punctuation_spacing(input: &str) -> String {
    let chars: Vec<char> = input.chars().collect();
    let mut out = String::with_capacity(input.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' {
            // Drop the space when only spaces separate it from clause punctuation.
            let mut j = i;
            while j < chars.len() && chars[j] == ' ' {
                j += 1;
            }
            if j < chars.len() && is_clause_punct(chars[j]) {
                i = j;
                continue;
            }
        }
        out.push(c);
        if is_clause_punct(c) {
            if let Some(&next) = chars.get(i + 1) {
                if next.is_alphabetic() {
                    out.push(' ');
                }
            }
        }
        i += 1;
    }
    out
}

fn clean_pass(input: &str) -> String {
    let decoded = decode_entities(input);
    let stripped = strip_tags(&decoded);
    let collapsed = collapse_whitespace(&stripped);
    fix_punctuation_spacing(&collapsed).trim().to_string()
}

/// Clean one piece of text: decode common HTML entities, strip tags, collapse
/// whitespace, fix spacing around `.,;:!?`, trim, and NFC-normalize.
///
/// The cleaning passes run to a fixed point, which makes the whole function
/// idempotent even on adversarial input (stripping a tag can expose another
/// tag or entity reference). OCR-level noise is preserved.
pub fn preprocess_text(raw: &str) -> String {
    let mut current = raw.to_string();
    for _ in 0..32 {
        let next = clean_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current.nfc().collect()
}

// ─── Chunking ───────────────────────────────────────────────────────────────

/// Split a preprocessed document body into whitespace-token windows of at
/// most `max_tokens` tokens, consecutive windows sharing `overlap` tokens.
///
/// An empty body yields no chunks. Ordinals are consecutive from 0.
pub fn chunk_document(
    doc: &RawDocument,
    max_tokens: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, EngineError> {
    if max_tokens == 0 {
        return Err(EngineError::InvalidConfig(
            "max_tokens must be at least 1".into(),
        ));
    }
    if overlap >= max_tokens {
        return Err(EngineError::InvalidConfig(format!(
            "overlap ({overlap}) must be smaller than max_tokens ({max_tokens})"
        )));
    }
    let tokens: Vec<&str> = doc.body.split_whitespace().collect();
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let stride = max_tokens - overlap;
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + max_tokens).min(tokens.len());
        let ordinal = chunks.len();
        chunks.push(Chunk {
            chunk_id: format!("{}#{}", doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            title: doc.title.clone(),
            text: tokens[start..end].join(" "),
            lang: doc.lang.clone(),
            token_count: end - start,
            entities: Vec::new(),
        });
        if end == tokens.len() {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}

// ─── Entity annotation ──────────────────────────────────────────────────────

/// Annotated chunk plus the count of spans rejected by validation.
#[derive(Debug, Clone)]
pub struct Annotated {
    pub chunk: Chunk,
    pub dropped: usize,
}

/// Keep only spans whose character offsets are in range and whose surface
/// matches the text slice exactly; invalid spans are dropped, not patched.
fn validate_spans(text: &str, spans: Vec<EntitySpan>) -> (Vec<Entity>, usize) {
    let chars: Vec<char> = text.chars().collect();
    let mut kept = Vec::new();
    let mut dropped = 0;
    for span in spans {
        let valid = span.start < span.end && span.end <= chars.len() && {
            let slice: String = chars[span.start..span.end].iter().collect();
            slice == span.surface
        };
        if valid {
            kept.push(Entity {
                surface: span.surface,
                label: span.label,
                start: span.start,
                end: span.end,
            });
        } else {
            tracing::warn!(surface = %span.surface, "dropping entity span that does not match chunk text");
            dropped += 1;
        }
    }
    (kept, dropped)
}

/// Populate a chunk's entities from a backend response.
pub async fn annotate_entities(
    chunk: Chunk,
    ner: &dyn NerBackend,
) -> Result<Annotated, EngineError> {
    let texts = vec![chunk.text.clone()];
    let mut results = ner
        .extract(&texts, &chunk.lang)
        .await
        .map_err(|source| EngineError::Annotation {
            chunk_id: chunk.chunk_id.clone(),
            source,
        })?;
    let spans = results.pop().unwrap_or_default();
    let (entities, dropped) = validate_spans(&chunk.text, spans);
    let mut chunk = chunk;
    chunk.entities = entities;
    Ok(Annotated { chunk, dropped })
}

/// How ingestion reacts to a chunk whose annotation fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationFailureMode {
    SkipWithWarning,
    Abort,
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationStats {
    pub annotated: usize,
    pub dropped_spans: usize,
    pub failed_chunks: usize,
}

/// Annotate every chunk in place, preserving corpus order.
pub async fn annotate_corpus(
    corpus: &mut Corpus,
    ner: &dyn NerBackend,
    on_failure: AnnotationFailureMode,
) -> Result<AnnotationStats, EngineError> {
    let mut stats = AnnotationStats::default();
    for chunk in &mut corpus.chunks {
        match annotate_entities(chunk.clone(), ner).await {
            Ok(annotated) => {
                stats.annotated += 1;
                stats.dropped_spans += annotated.dropped;
                *chunk = annotated.chunk;
            }
            Err(err) => match on_failure {
                AnnotationFailureMode::SkipWithWarning => {
                    tracing::warn!(chunk_id = %chunk.chunk_id, error = %err, "annotation failed, skipping chunk");
                    stats.failed_chunks += 1;
                }
                AnnotationFailureMode::Abort => return Err(err),
            },
        }
    }
    Ok(stats)
}

// ─── Loading ────────────────────────────────────────────────────────────────

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Read a raw JSONL corpus, clean and chunk every document.
///
/// Chunk output is a pure function of the file bytes and the chunking
/// options; only the manifest timestamp varies between runs.
pub fn load_corpus(path: impl AsRef<Path>, options: &ChunkingOptions) -> Result<Corpus, EngineError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| EngineError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);

    let mut seen_ids = HashSet::new();
    let mut chunks = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EngineError::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| EngineError::CorpusFormat {
            line: line_no,
            msg: e.to_string(),
        })?;
        if raw.doc_id.is_empty() {
            return Err(EngineError::CorpusFormat {
                line: line_no,
                msg: "doc_id is empty".into(),
            });
        }
        if !seen_ids.insert(raw.doc_id.clone()) {
            return Err(EngineError::DuplicateDocId(raw.doc_id));
        }
        let cleaned = RawDocument {
            doc_id: raw.doc_id,
            title: preprocess_text(&raw.title),
            body: preprocess_text(&raw.body),
            lang: raw.lang,
        };
        chunks.extend(chunk_document(&cleaned, options.max_tokens, options.overlap)?);
    }

    Ok(Corpus {
        chunks,
        manifest: Manifest {
            source: path.display().to_string(),
            ingested_at_unix: now_unix(),
            cleaning: "entities,tags,whitespace,punctuation,nfc".into(),
            chunking: options.clone(),
            ner: "none".into(),
        },
    })
}

/// Write chunks as JSONL (the serialized corpus format shared with `ingest`).
pub fn save_chunks(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), EngineError> {
    let path = path.as_ref();
    let mut out = String::new();
    for chunk in &corpus.chunks {
        out.push_str(&serde_json::to_string(chunk).expect("chunk serialization cannot fail"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| EngineError::io(path.display().to_string(), e))
}

/// Read a serialized chunk file back into memory.
pub fn load_chunks(path: impl AsRef<Path>) -> Result<Vec<Chunk>, EngineError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| EngineError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut chunks = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EngineError::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk: Chunk = serde_json::from_str(&line).map_err(|e| EngineError::CorpusFormat {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if !seen.insert(chunk.chunk_id.clone()) {
            return Err(EngineError::DuplicateDocId(chunk.chunk_id));
        }
        chunks.push(chunk);
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, body: &str) -> RawDocument {
        RawDocument {
            doc_id: id.into(),
            title: format!("title of {id}"),
            body: body.into(),
            lang: "en".into(),
        }
    }

    #[test]
    fn preprocess_empty_is_empty() {
        assert_eq!(preprocess_text(""), "");
    }

    #[test]
    fn preprocess_strips_tags_and_fixes_spacing() {
        // Hand-trace: decode &nbsp;, strip <p></p>, collapse runs, pull the
        // space back before the period, trim.
        assert_eq!(
            preprocess_text("<p>Bonjour&nbsp;  le   monde .</p>"),
            "Bonjour le monde."
        );
    }

    #[test]
    fn preprocess_nfc_normalizes_but_keeps_noise() {
        use unicode_normalization::UnicodeNormalization;
        let noisy = "Selon le lingu\u{300}iste";
        let expected: String = noisy.nfc().collect();
        assert_eq!(preprocess_text(noisy), expected);
        // The OCR-style misspelling is intact.
        assert!(preprocess_text(noisy).contains("lingu"));
    }

    #[test]
    fn preprocess_inserts_space_after_punct_before_letter() {
        assert_eq!(preprocess_text("fin.Début"), "fin. Début");
        // Digits do not trigger the insertion.
        assert_eq!(preprocess_text("pi is 3.14"), "pi is 3.14");
    }

    #[test]
    fn preprocess_survives_nested_tag_fragments() {
        // Stripping "<p>" exposes a second tag; the fixpoint loop removes it.
        let out = preprocess_text("<<p>b>");
        assert_eq!(preprocess_text(&out), out);
    }

    #[test]
    fn unterminated_tag_is_kept_as_text() {
        assert_eq!(preprocess_text("a < b and c"), "a < b and c");
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(raw in "\\PC{0,200}") {
            let once = preprocess_text(&raw);
            prop_assert_eq!(preprocess_text(&once), once.clone());
        }

        #[test]
        fn preprocess_idempotent_on_markupish_input(
            raw in proptest::collection::vec(
                prop_oneof![
                    Just("<p>".to_string()),
                    Just("&nbsp;".to_string()),
                    Just("&amp;lt;".to_string()),
                    Just("a".to_string()),
                    Just(" .".to_string()),
                    Just("<".to_string()),
                    Just(">".to_string()),
                    Just("e\u{301}".to_string()),
                    Just("  ".to_string()),
                ],
                0..30,
            )
        ) {
            let joined = raw.concat();
            let once = preprocess_text(&joined);
            prop_assert_eq!(preprocess_text(&once), once.clone());
        }
    }

    #[test]
    fn chunk_small_doc_is_single_chunk() {
        let d = doc("a", &vec!["tok"; 10].join(" "));
        let chunks = chunk_document(&d, 512, 64).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].token_count, 10);
        assert_eq!(chunks[0].chunk_id, "a#0");
    }

    #[test]
    fn chunk_exact_split_no_overlap() {
        let d = doc("a", &vec!["x"; 1024].join(" "));
        let chunks = chunk_document(&d, 512, 0).unwrap();
        assert_eq!(chunks.len(), 2);
        assert!(chunks.iter().all(|c| c.token_count == 512));
    }

    #[test]
    fn chunk_overlap_windows_match_stride_arithmetic() {
        // 1000 tokens, max 512, overlap 64 → windows [0,512), [448,960), [896,1000).
        let tokens: Vec<String> = (0..1000).map(|i| format!("t{i}")).collect();
        let d = doc("a", &tokens.join(" "));
        let chunks = chunk_document(&d, 512, 64).unwrap();
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[0].text, tokens[0..512].join(" "));
        assert_eq!(chunks[1].text, tokens[448..960].join(" "));
        assert_eq!(chunks[2].text, tokens[896..1000].join(" "));
        assert_eq!(chunks[2].token_count, 104);
    }

    #[test]
    fn chunk_empty_body_yields_no_chunks() {
        assert!(chunk_document(&doc("a", ""), 512, 64).unwrap().is_empty());
    }

    #[test]
    fn chunk_rejects_bad_overlap() {
        assert!(chunk_document(&doc("a", "x"), 10, 10).is_err());
        assert!(chunk_document(&doc("a", "x"), 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn chunks_cover_body_exactly_once(
            n in 0usize..600,
            max_tokens in 1usize..80,
            overlap_frac in 0.0f64..0.99,
        ) {
            let overlap = ((max_tokens as f64) * overlap_frac) as usize;
            prop_assume!(overlap < max_tokens);
            let tokens: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let d = doc("p", &tokens.join(" "));
            let chunks = chunk_document(&d, max_tokens, overlap).unwrap();

            for c in &chunks {
                prop_assert!(c.token_count <= max_tokens);
                prop_assert!(c.token_count >= 1);
            }
            // Reassemble: drop the first `overlap` tokens of every chunk
            // after the first (the last pair may share more when the tail is
            // short, which the stride arithmetic forbids except at the end).
            let mut rebuilt: Vec<String> = Vec::new();
            let stride = max_tokens - overlap;
            for (i, c) in chunks.iter().enumerate() {
                let toks: Vec<String> = c.text.split_whitespace().map(String::from).collect();
                if i == 0 {
                    rebuilt.extend(toks);
                } else {
                    let start = i * stride;
                    let already = rebuilt.len() - start;
                    rebuilt.extend(toks.into_iter().skip(already));
                }
            }
            prop_assert_eq!(rebuilt, tokens);
        }
    }

    #[test]
    fn span_validation_drops_mismatched_surfaces() {
        let text = "Walter Porzig était linguiste";
        let spans = vec![
            EntitySpan {
                surface: "Walter Porzig".into(),
                label: "PER".into(),
                start: 0,
                end: 13,
            },
            EntitySpan {
                surface: "Porzig était".into(),
                label: "PER".into(),
                start: 0,
                end: 12,
            },
            EntitySpan {
                surface: "out of range".into(),
                label: "LOC".into(),
                start: 25,
                end: 99,
            },
        ];
        let (kept, dropped) = validate_spans(text, spans);
        assert_eq!(kept.len(), 1);
        assert_eq!(dropped, 2);
        assert_eq!(kept[0].surface, "Walter Porzig");
    }

    #[test]
    fn span_validation_uses_char_offsets() {
        let text = "élu à Paris";
        // "Paris" starts at char 6 (byte 8).
        let spans = vec![EntitySpan {
            surface: "Paris".into(),
            label: "LOC".into(),
            start: 6,
            end: 11,
        }];
        let (kept, dropped) = validate_spans(text, spans);
        assert_eq!(kept.len(), 1);
        assert_eq!(dropped, 0);
    }

    #[tokio::test]
    async fn disabled_ner_leaves_chunk_unchanged() {
        use crate::backends::DisabledNer;
        let d = doc("a", "Walter Porzig était linguiste");
        let chunk = chunk_document(&d, 512, 0).unwrap().remove(0);
        let before = chunk.clone();
        let annotated = annotate_entities(chunk, &DisabledNer).await.unwrap();
        assert!(annotated.chunk.entities.is_empty());
        assert_eq!(annotated.chunk, before);
    }

    #[test]
    fn load_corpus_reports_line_numbers_and_duplicates() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.jsonl");
        let mut f = std::fs::File::create(&bad).unwrap();
        writeln!(f, r#"{{"doc_id":"a","title":"t","text":"x","lang":"en"}}"#).unwrap();
        writeln!(f, r#"{{"doc_id":"b","title":"t","text":"x","lang":"en"}}"#).unwrap();
        writeln!(f, "{{not json").unwrap();
        drop(f);
        match load_corpus(&bad, &ChunkingOptions::default()) {
            Err(EngineError::CorpusFormat { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }

        let dup = dir.path().join("dup.jsonl");
        let mut f = std::fs::File::create(&dup).unwrap();
        writeln!(f, r#"{{"doc_id":"a","title":"t","text":"x","lang":"en"}}"#).unwrap();
        writeln!(f, r#"{{"doc_id":"a","title":"t","text":"y","lang":"en"}}"#).unwrap();
        drop(f);
        match load_corpus(&dup, &ChunkingOptions::default()) {
            Err(EngineError::DuplicateDocId(id)) => assert_eq!(id, "a"),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn load_corpus_is_deterministic_modulo_timestamp() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        let body = vec!["tok"; 1024].join(" ");
        writeln!(f, r#"{{"doc_id":"a","title":"t","text":"{body}","lang":"en"}}"#).unwrap();
        writeln!(f, r#"{{"doc_id":"b","title":"t","text":"short","lang":"fr"}}"#).unwrap();
        drop(f);
        let opts = ChunkingOptions {
            max_tokens: 512,
            overlap: 0,
        };
        let c1 = load_corpus(&path, &opts).unwrap();
        let c2 = load_corpus(&path, &opts).unwrap();
        assert_eq!(c1.chunks, c2.chunks);
        assert_eq!(c1.chunks.len(), 3);
        assert_eq!(c1.chunks[0].chunk_id, "a#0");
        assert_eq!(c1.chunks[2].chunk_id, "b#0");

        let out1 = dir.path().join("o1.jsonl");
        let out2 = dir.path().join("o2.jsonl");
        save_chunks(&c1, &out1).unwrap();
        save_chunks(&c2, &out2).unwrap();
        assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
        assert_eq!(load_chunks(&out1).unwrap(), c1.chunks);
    }

    #[test]
    fn load_corpus_empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let corpus = load_corpus(&path, &ChunkingOptions::default()).unwrap();
        assert!(corpus.is_empty());
    }
}
