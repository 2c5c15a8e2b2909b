//! Dense vector index: exhaustive cosine search over unit vectors plus
//! bit-exact persistence.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic "ARXI" | u16 version=1 | u16 dim | u64 count
//! u32 len + provider_id (UTF-8)
//! count × ( u32 len + chunk_id, dim × f32 )
//! count × ( u32 len + metadata JSON record )
//! ```
//!
//! Search is flat and exact: every entry is scored, ranking is total
//! (score desc, then chunk_id asc), so results are independent of entry
//! insertion order and reproducible across save/load.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{self, dot_f64, Embedding, ProviderConfig};
use crate::error::EngineError;

const MAGIC: &[u8; 4] = b"ARXI";
const VERSION: u16 = 1;

/// Chunk metadata carried inside the index so generation can cite sources
/// without re-reading the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkMeta {
    pub doc_id: String,
    pub title: String,
    pub lang: String,
    pub text: String,
}

/// Origin of a ranked list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListSource {
    Dense,
    Lexical,
}

impl std::fmt::Display for ListSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ListSource::Dense => write!(f, "dense"),
            ListSource::Lexical => write!(f, "lexical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub chunk_id: String,
    pub score: f64,
}

/// Scored ranking for one query from one retrieval source.
///
/// Dense scores are cosines in [-1, 1]; lexical scores are raw BM25 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub source: ListSource,
    pub items: Vec<ScoredItem>,
}

/// Per-term statistics derived from chunk texts at build/load time; used by
/// the lexical retriever. Tokens are lowercased whitespace-delimited words.
#[derive(Debug, Clone)]
pub struct LexicalStats {
    /// term → (entry position, term frequency)
    pub postings: HashMap<String, Vec<(usize, u32)>>,
    pub doc_len: Vec<u32>,
    pub avg_doc_len: f64,
    pub doc_count: usize,
}

impl LexicalStats {
    pub fn from_texts<'a>(texts: impl ExactSizeIterator<Item = &'a str>) -> Self {
        let doc_count = texts.len();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(doc_count);
        for (pos, text) in texts.enumerate() {
            let mut counts: HashMap<String, u32> = HashMap::new();
            let mut len = 0u32;
            for token in text.split_whitespace() {
                *counts.entry(token.to_lowercase()).or_insert(0) += 1;
                len += 1;
            }
            doc_len.push(len);
            for (term, tf) in counts {
                postings.entry(term).or_default().push((pos, tf));
            }
        }
        for list in postings.values_mut() {
            list.sort_unstable_by_key(|&(pos, _)| pos);
        }
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_len = if doc_count == 0 {
            0.0
        } else {
            total as f64 / doc_count as f64
        };
        Self {
            postings,
            doc_len,
            avg_doc_len,
            doc_count,
        }
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }
}

/// Immutable flat index over corpus chunks.
#[derive(Debug)]
pub struct VectorIndex {
    provider_id: String,
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<f32>, // row-major, len = ids.len() * dim
    meta: Vec<ChunkMeta>,
    by_id: HashMap<String, usize>,
    lexical: OnceLock<LexicalStats>,
}

impl VectorIndex {
    pub fn from_parts(
        provider_id: String,
        dim: usize,
        entries: Vec<(String, Vec<f32>, ChunkMeta)>,
    ) -> Result<Self, EngineError> {
        let mut ids = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        let mut meta = Vec::with_capacity(entries.len());
        let mut by_id = HashMap::with_capacity(entries.len());
        for (pos, (id, vector, m)) in entries.into_iter().enumerate() {
            if vector.len() != dim {
                return Err(EngineError::DimMismatch {
                    expected: dim,
                    got: vector.len(),
                });
            }
            if by_id.insert(id.clone(), pos).is_some() {
                return Err(EngineError::DuplicateDocId(id));
            }
            ids.push(id);
            vectors.extend_from_slice(&vector);
            meta.push(m);
        }
        Ok(Self {
            provider_id,
            dim,
            ids,
            vectors,
            meta,
            by_id,
            lexical: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.by_id.contains_key(chunk_id)
    }

    pub fn chunk_id(&self, pos: usize) -> &str {
        &self.ids[pos]
    }

    pub fn meta(&self, chunk_id: &str) -> Option<&ChunkMeta> {
        self.by_id.get(chunk_id).map(|&pos| &self.meta[pos])
    }

    pub fn meta_at(&self, pos: usize) -> &ChunkMeta {
        &self.meta[pos]
    }

    pub fn vector(&self, pos: usize) -> &[f32] {
        &self.vectors[pos * self.dim..(pos + 1) * self.dim]
    }

    /// One embedding per entry, in entry order (used by latent-space metrics).
    pub fn embeddings(&self) -> Vec<Embedding> {
        (0..self.len())
            .map(|pos| Embedding {
                vector: self.vector(pos).to_vec(),
                provider_id: self.provider_id.clone(),
            })
            .collect()
    }

    /// Lexical statistics over the stored chunk texts, built on first use.
    pub fn lexical_stats(&self) -> &LexicalStats {
        self.lexical
            .get_or_init(|| LexicalStats::from_texts(self.meta.iter().map(|m| m.text.as_str())))
    }

    /// Exhaustive top-K by dot product, descending; ties broken by ascending
    /// chunk_id. K larger than the index returns every entry ranked.
    pub fn search(&self, query: &Embedding, k: usize) -> Result<RankedList, EngineError> {
        if query.dim() != self.dim {
            return Err(EngineError::DimMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        if k == 0 {
            return Err(EngineError::InvalidInput("search K must be at least 1".into()));
        }
        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .map(|pos| (pos, dot_f64(self.vector(pos), &query.vector)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("unit-vector dot products are finite")
                .then_with(|| self.ids[a.0].cmp(&self.ids[b.0]))
        });
        scored.truncate(k);
        Ok(RankedList {
            query_id: String::new(),
            source: ListSource::Dense,
            items: scored
                .into_iter()
                .map(|(pos, score)| ScoredItem {
                    chunk_id: self.ids[pos].clone(),
                    score,
                })
                .collect(),
        })
    }

    // ── Persistence ──────────────────────────────────────────────────────

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EngineError> {
        let path = path.as_ref();
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u16).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        write_block(&mut buf, self.provider_id.as_bytes());
        for pos in 0..self.len() {
            write_block(&mut buf, self.ids[pos].as_bytes());
            for &v in self.vector(pos) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        for m in &self.meta {
            let record = serde_json::to_vec(m).expect("metadata serialization cannot fail");
            write_block(&mut buf, &record);
        }
        std::fs::write(path, buf).map_err(|e| EngineError::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| EngineError::io(path.display().to_string(), e))?;
        let mut r = Reader::new(&bytes);

        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(EngineError::IndexFormat(format!(
                "bad magic {magic:02x?}, expected \"ARXI\" — not an index file?"
            )));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(EngineError::IndexFormat(format!(
                "unsupported index version {version}, this build reads version {VERSION}"
            )));
        }
        let dim = r.u16()? as usize;
        let count = r.u64()? as usize;
        let provider_id = r.string()?;

        let mut entries: Vec<(String, Vec<f32>)> = Vec::with_capacity(count);
        for _ in 0..count {
            let id = r.string()?;
            let raw = r.take(dim * 4)?;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            entries.push((id, vector));
        }
        let mut meta = Vec::with_capacity(count);
        for _ in 0..count {
            let record = r.block()?;
            let m: ChunkMeta = serde_json::from_slice(record)
                .map_err(|e| EngineError::IndexFormat(format!("bad metadata record: {e}")))?;
            meta.push(m);
        }

        let full: Vec<(String, Vec<f32>, ChunkMeta)> = entries
            .into_iter()
            .zip(meta)
            .map(|((id, v), m)| (id, v, m))
            .collect();
        Self::from_parts(provider_id, dim, full)
    }
}

fn write_block(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

/// Byte reader that reports the offset of any truncation.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], EngineError> {
        if self.pos + n > self.bytes.len() {
            return Err(EngineError::TruncatedIndex { offset: self.pos });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, EngineError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, EngineError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, EngineError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]))
    }

    fn block(&mut self) -> Result<&'a [u8], EngineError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    fn string(&mut self) -> Result<String, EngineError> {
        let at = self.pos;
        let block = self.block()?;
        String::from_utf8(block.to_vec())
            .map_err(|_| EngineError::IndexFormat(format!("invalid UTF-8 in block at byte {at}")))
    }
}

/// Embed every chunk (document prefix applied) and commit entries in corpus
/// order. Deterministic for the fallback provider.
pub async fn build_index(corpus: &Corpus, provider: &ProviderConfig) -> Result<VectorIndex, EngineError> {
    provider.validate()?;
    if corpus.is_empty() {
        return Err(EngineError::InvalidInput("cannot index an empty corpus".into()));
    }
    let mut entries: Vec<(String, Vec<f32>, ChunkMeta)> = Vec::with_capacity(corpus.len());
    // Batched embedding; on failure report how far we got.
    for batch in corpus.chunks.chunks(provider.batch_size.max(1)) {
        let texts: Vec<String> = batch.iter().map(|c| c.text.clone()).collect();
        let embedded = embedding::embed_docs(&texts, provider)
            .await
            .map_err(|e| EngineError::IndexBuild {
                embedded: entries.len(),
                source: Box::new(e),
            })?;
        for (chunk, emb) in batch.iter().zip(embedded) {
            entries.push((
                chunk.chunk_id.clone(),
                emb.vector,
                ChunkMeta {
                    doc_id: chunk.doc_id.clone(),
                    title: chunk.title.clone(),
                    lang: chunk.lang.clone(),
                    text: chunk.text.clone(),
                },
            ));
        }
    }
    VectorIndex::from_parts(provider.provider_id(), provider.dim, entries)
}
