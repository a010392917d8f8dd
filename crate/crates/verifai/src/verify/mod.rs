//! The ternary verification contract: verdict types, agent dispatch,
//! trust-weighted aggregation, and the end-to-end pipeline.

pub mod external;
pub mod local;
pub mod prompt;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::embed::{Embedder, HashedTextEmbedder};
use crate::index::{combine, ContentIndex, RetrievalHit, VectorIndex};
use crate::lake::{DataLake, DataObject, Modality, ObjectKind, Payload};
use crate::rerank::{rerank_text_table, rerank_text_text, rerank_tuple_tuple, RerankResult};

pub use external::{
    call_external_verifier, parse_verdict, verify_external, ParseError, VerifierServiceError,
};
pub use local::{verify_claim_table, verify_claim_text, verify_tuple_tuple};
pub use prompt::{render_completion_prompt, render_verification_prompt};

/// Ternary verdict with fixed numeric codes: 0 verified, 1 refuted,
/// 2 not related.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Verified = 0,
    Refuted = 1,
    NotRelated = 2,
}

impl Verdict {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Verified => write!(f, "verified"),
            Verdict::Refuted => write!(f, "refuted"),
            Verdict::NotRelated => write!(f, "not_related"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub object_id: String,
    pub instance_id: String,
    pub verdict: Verdict,
    pub verifier_id: String,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustConfig {
    pub default_weight: f64,
    #[serde(default)]
    pub per_source: BTreeMap<String, f64>,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            default_weight: 1.0,
            per_source: BTreeMap::new(),
        }
    }
}

impl TrustConfig {
    pub fn weight(&self, source_id: &str) -> f64 {
        *self
            .per_source
            .get(source_id)
            .unwrap_or(&self.default_weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierMode {
    Local,
    External,
    Auto,
}

pub const VERIFIER_EXACT_TUPLE: &str = "exact_tuple";
pub const VERIFIER_LEXICAL_TEXT: &str = "lexical_text";
pub const VERIFIER_TABLE_CLAIM: &str = "table_claim";
pub const VERIFIER_EXTERNAL_LLM: &str = "external_llm";

/// Registered verifier ids the agent may dispatch to.
#[derive(Debug, Clone)]
pub struct VerifierRegistry {
    pub ids: BTreeSet<String>,
}

impl Default for VerifierRegistry {
    fn default() -> Self {
        VerifierRegistry {
            ids: [
                VERIFIER_EXACT_TUPLE,
                VERIFIER_LEXICAL_TEXT,
                VERIFIER_TABLE_CLAIM,
                VERIFIER_EXTERNAL_LLM,
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("no verifier mapped for pair ({kind:?}, {modality})")]
pub struct DispatchError {
    pub kind: ObjectKind,
    pub modality: Modality,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("contract violation: {0}")]
pub struct ContractError(pub String);

/// The agent: deterministic dispatch on (object kind, evidence modality).
/// `External` overrides every mapped pair to the external model; `Auto`
/// resolves to local verifiers.
pub fn select_verifier(
    g: &DataObject,
    modality: Modality,
    registry: &VerifierRegistry,
    mode: VerifierMode,
) -> Result<String, DispatchError> {
    let local = match (g.kind, modality) {
        (ObjectKind::ImputedTuple, Modality::Tuple) => VERIFIER_EXACT_TUPLE,
        (ObjectKind::ImputedTuple, Modality::Text) => VERIFIER_LEXICAL_TEXT,
        (ObjectKind::TextualClaim, Modality::Text) => VERIFIER_LEXICAL_TEXT,
        (ObjectKind::TextualClaim, Modality::Table) => VERIFIER_TABLE_CLAIM,
        (kind, modality) => return Err(DispatchError { kind, modality }),
    };
    let id = match mode {
        VerifierMode::External => VERIFIER_EXTERNAL_LLM,
        VerifierMode::Local | VerifierMode::Auto => local,
    };
    debug_assert!(registry.ids.contains(id));
    Ok(id.to_string())
}

/// Trust-weighted aggregation over per-evidence verdicts. NotRelated records
/// contribute nothing; ties with positive weight break toward Refuted with
/// the conflict flag raised.
pub fn aggregate(
    records: &[VerdictRecord],
    source_of: impl Fn(&str) -> Option<String>,
    trust: &TrustConfig,
) -> (Verdict, bool) {
    let mut w_verified = 0.0;
    let mut w_refuted = 0.0;
    for rec in records {
        let weight = source_of(&rec.instance_id)
            .map(|s| trust.weight(&s))
            .unwrap_or(trust.default_weight);
        match rec.verdict {
            Verdict::Verified => w_verified += weight,
            Verdict::Refuted => w_refuted += weight,
            Verdict::NotRelated => {}
        }
    }
    if w_verified == 0.0 && w_refuted == 0.0 {
        (Verdict::NotRelated, false)
    } else if w_verified > w_refuted {
        (Verdict::Verified, w_refuted > 0.0)
    } else if w_refuted > w_verified {
        (Verdict::Refuted, w_verified > 0.0)
    } else {
        (Verdict::Refuted, true)
    }
}

/// A non-fatal pipeline failure captured in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitTrail {
    pub content: Vec<RetrievalHit>,
    pub semantic: Vec<RetrievalHit>,
    pub combined: Vec<RetrievalHit>,
    pub reranked: Vec<RerankResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub object: DataObject,
    pub hits: HitTrail,
    pub records: Vec<VerdictRecord>,
    pub aggregate: Verdict,
    pub conflict: bool,
    pub errors: Vec<StageError>,
    pub config_snapshot: EngineConfig,
    pub timestamp: u64,
}

/// Built indexes handed to the pipeline.
pub struct Indexes {
    pub content: ContentIndex,
    pub vector: VectorIndex,
    pub doc_embedder: HashedTextEmbedder,
}

impl Indexes {
    pub fn build(lake: &DataLake) -> Self {
        let doc_embedder = HashedTextEmbedder::default();
        let refs: Vec<&crate::lake::DataInstance> = lake.instances.values().collect();
        let content = ContentIndex::build(&refs);
        let vector = VectorIndex::build(&refs, &doc_embedder).expect("hashed embedder never fails");
        Indexes {
            content,
            vector,
            doc_embedder,
        }
    }
}

/// End-to-end pipeline for one object: coarse retrieval from both indexes,
/// RRF combine, per-modality rerank, agent dispatch, per-evidence
/// verification, trust-weighted aggregation. Stage failures are captured in
/// the report and verification continues with the remaining evidence.
pub fn verify_object(
    g: &DataObject,
    lake: &DataLake,
    indexes: &Indexes,
    config: &EngineConfig,
) -> VerificationReport {
    let mut errors: Vec<StageError> = Vec::new();
    let query = g.query_text();

    let content_hits = indexes.content.search(&query, config.k);
    let semantic_hits = match indexes.doc_embedder.embed(&query) {
        Ok(qvec) if !qvec.is_zero() => match indexes.vector.search(&qvec.values, config.k) {
            Ok(hits) => hits,
            Err(e) => {
                errors.push(StageError {
                    stage: "search_vector".into(),
                    message: e.to_string(),
                });
                Vec::new()
            }
        },
        Ok(_) => Vec::new(),
        Err(e) => {
            errors.push(StageError {
                stage: "embed_query".into(),
                message: e.to_string(),
            });
            Vec::new()
        }
    };
    let combined = combine(&[content_hits.clone(), semantic_hits.clone()], config.k);

    // Partition survivors by modality for task-specific reranking.
    let mut tuple_cands: Vec<(String, crate::lake::Tuple)> = Vec::new();
    let mut text_cands: Vec<(String, String)> = Vec::new();
    let mut table_cands: Vec<(String, crate::lake::Table)> = Vec::new();
    for hit in &combined {
        let Some(inst) = lake.get(&hit.instance_id) else {
            continue;
        };
        match &inst.payload {
            Payload::Tuple(t) => tuple_cands.push((hit.instance_id.clone(), t.clone())),
            Payload::Text(c) => text_cands.push((hit.instance_id.clone(), c.text.clone())),
            Payload::Table(t) => table_cands.push((hit.instance_id.clone(), t.clone())),
        }
    }

    let mut reranked: Vec<RerankResult> = Vec::new();
    match (g.kind, &g.tuple_payload) {
        (ObjectKind::ImputedTuple, Some(query_tuple)) => {
            reranked.extend(rerank_tuple_tuple(
                query_tuple,
                &tuple_cands,
                config.k_prime_tuple,
            ));
        }
        _ => {
            let serialized: Vec<(String, String)> = tuple_cands
                .iter()
                .map(|(id, t)| (id.clone(), crate::lake::serialize_tuple(t)))
                .collect();
            reranked.extend(rerank_text_text(&query, &serialized, config.k_prime_tuple));
        }
    }
    reranked.extend(rerank_text_text(&query, &text_cands, config.k_prime_text));
    reranked.extend(rerank_text_table(&query, &table_cands, config.k_prime_table));

    let registry = VerifierRegistry::default();
    let mut records: Vec<VerdictRecord> = Vec::new();
    for rr in &reranked {
        let Some(inst) = lake.get(&rr.instance_id) else {
            continue;
        };
        let verifier_id = match select_verifier(g, inst.modality, &registry, config.verifier_mode) {
            Ok(id) => id,
            Err(e) => {
                errors.push(StageError {
                    stage: "select_verifier".into(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let result: Result<VerdictRecord, StageError> = match verifier_id.as_str() {
            VERIFIER_EXACT_TUPLE => {
                let Payload::Tuple(x) = &inst.payload else {
                    unreachable!("dispatch guarantees tuple payload")
                };
                verify_tuple_tuple(g, x, &inst.instance_id).map_err(|e| StageError {
                    stage: "verify_tuple_tuple".into(),
                    message: e.to_string(),
                })
            }
            VERIFIER_LEXICAL_TEXT => {
                let Payload::Text(x) = &inst.payload else {
                    unreachable!("dispatch guarantees text payload")
                };
                Ok(verify_claim_text(g, x, &inst.instance_id))
            }
            VERIFIER_TABLE_CLAIM => {
                let Payload::Table(x) = &inst.payload else {
                    unreachable!("dispatch guarantees table payload")
                };
                Ok(verify_claim_table(g, x, &inst.instance_id))
            }
            VERIFIER_EXTERNAL_LLM => external::verify_external(g, inst, config),
            other => Err(StageError {
                stage: "verify".into(),
                message: format!("unknown verifier {other}"),
            }),
        };
        match result {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(e),
        }
    }

    let (agg, conflict) = aggregate(
        &records,
        |id| lake.source_of(id).map(|s| s.to_string()),
        &config.trust,
    );

    VerificationReport {
        object: g.clone(),
        hits: HitTrail {
            content: content_hits,
            semantic: semantic_hits,
            combined,
            reranked,
        },
        records,
        aggregate: agg,
        conflict,
        errors,
        config_snapshot: config.clone(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}
