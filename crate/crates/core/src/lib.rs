//! Core engine: corpus ingestion, embeddings, dense/lexical indexing,
//! rank fusion, grounded generation, and evaluation metrics.

pub mod backends;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod index;
pub mod retrieval;

pub use error::EngineError;
