//! Engine for verifying generated data objects (imputed tuple values,
//! textual claims) against a multi-modal data lake of tables, tuples, and
//! text.
//!
//! Pipeline: coarse retrieval from a BM25 inverted index and an exact cosine
//! vector index, reciprocal-rank-fusion combine, task-specific rerank down
//! to a small top-k', per-evidence ternary verification
//! (verified / refuted / not related), trust-weighted aggregation, and an
//! append-only provenance log of the whole trail.

pub mod config;
pub mod embed;
pub mod evalbench;
pub mod index;
pub mod lake;
pub mod provenance;
pub mod rerank;
pub mod serve;
pub mod verify;
