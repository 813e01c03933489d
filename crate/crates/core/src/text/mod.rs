//! Tokenization and word-embedding tables.

pub mod embeddings;
pub mod preprocess;

pub use embeddings::{content_hash, load_embeddings, lookup, EmbeddingTable, OOV_TOKEN};
pub use preprocess::{normalize_token, preprocess};
