//! Task-specific reranking of combiner output down to a small top-k'.
//!
//! Text evidence is scored by late interaction (MaxSim) over token-level
//! hashed embeddings; tables are serialized first; tuple evidence uses a
//! key-weighted Jaccard over normalized cell values.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::embed::{TokenEmbeddingMatrix, TokenHashEmbedder};
use crate::lake::{serialize_table, Table, Tuple};

/// Default rerank depth.
pub const DEFAULT_K_PRIME: usize = 5;
/// Weight of key-attribute agreement in the tuple reranker.
pub const TUPLE_KEY_WEIGHT: f64 = 0.7;

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("token dimension mismatch: query {query_dim}, document {doc_dim}")]
    DimMismatch { query_dim: usize, doc_dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    MaxsimText,
    MaxsimTable,
    TupleOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankResult {
    pub instance_id: String,
    pub rerank_score: f64,
    pub rank: usize,
    pub scorer: Scorer,
}

/// MaxSim: sum over query tokens of the max cosine against any document
/// token. Empty query or document scores 0.
pub fn maxsim_score(
    q: &TokenEmbeddingMatrix,
    d: &TokenEmbeddingMatrix,
) -> Result<f64, RerankError> {
    if q.vectors.is_empty() || d.vectors.is_empty() {
        return Ok(0.0);
    }
    if q.dim != d.dim {
        return Err(RerankError::DimMismatch {
            query_dim: q.dim,
            doc_dim: d.dim,
        });
    }
    let mut total = 0.0;
    for qv in &q.vectors {
        let best = d
            .vectors
            .iter()
            .map(|dv| qv.iter().zip(dv).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total)
}

fn rank_results(mut scored: Vec<(String, f64)>, k_prime: usize, scorer: Scorer) -> Vec<RerankResult> {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k_prime);
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (instance_id, rerank_score))| RerankResult {
            instance_id,
            rerank_score,
            rank: i + 1,
            scorer,
        })
        .collect()
}

/// (text, text) reranking by MaxSim.
pub fn rerank_text_text(
    query: &str,
    candidates: &[(String, String)],
    k_prime: usize,
) -> Vec<RerankResult> {
    let embedder = TokenHashEmbedder::default();
    let q = embedder.embed_tokens(query);
    let scored = candidates
        .iter()
        .map(|(id, text)| {
            let d = embedder.embed_tokens(text);
            let s = maxsim_score(&q, &d).expect("same embedder, same dim");
            (id.clone(), s)
        })
        .collect();
    rank_results(scored, k_prime, Scorer::MaxsimText)
}

/// (text, table) reranking: tables are serialized (row limit 50) and scored
/// by MaxSim against the claim.
pub fn rerank_text_table(
    claim: &str,
    candidates: &[(String, Table)],
    k_prime: usize,
) -> Vec<RerankResult> {
    let embedder = TokenHashEmbedder::default();
    let q = embedder.embed_tokens(claim);
    let scored = candidates
        .iter()
        .map(|(id, table)| {
            let d = embedder.embed_tokens(&serialize_table(table, 50));
            let s = maxsim_score(&q, &d).expect("same embedder, same dim");
            (id.clone(), s)
        })
        .collect();
    rank_results(scored, k_prime, Scorer::MaxsimTable)
}

/// Cell normalization shared with the verifiers: lowercase, trim, NFC.
pub fn normalize_value(v: &str) -> String {
    v.trim().to_lowercase().nfc().collect()
}

fn jaccard(a: &std::collections::BTreeSet<String>, b: &std::collections::BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// (tuple, tuple) reranking: 0.7 * Jaccard over key-attribute values plus
/// 0.3 * Jaccard over all cell values, both on normalized strings.
pub fn rerank_tuple_tuple(
    query: &Tuple,
    candidates: &[(String, Tuple)],
    k_prime: usize,
) -> Vec<RerankResult> {
    let value_set = |t: &Tuple, keys_only: bool| -> std::collections::BTreeSet<String> {
        t.schema
            .iter()
            .zip(&t.cells)
            .filter(|(a, _)| !keys_only || t.key_attrs.contains(a))
            .map(|(_, v)| normalize_value(v))
            .collect()
    };
    let q_key = value_set(query, true);
    let q_all = value_set(query, false);
    let scored = candidates
        .iter()
        .map(|(id, cand)| {
            let j_key = jaccard(&q_key, &value_set(cand, true));
            let j_all = jaccard(&q_all, &value_set(cand, false));
            (
                id.clone(),
                TUPLE_KEY_WEIGHT * j_key + (1.0 - TUPLE_KEY_WEIGHT) * j_all,
            )
        })
        .collect();
    rank_results(scored, k_prime, Scorer::TupleOverlap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb() -> TokenHashEmbedder {
        TokenHashEmbedder::default()
    }

    /// Brute-force double-loop oracle for MaxSim.
    fn maxsim_oracle(q: &TokenEmbeddingMatrix, d: &TokenEmbeddingMatrix) -> f64 {
        let mut total = 0.0;
        for qv in &q.vectors {
            let mut best = f64::NEG_INFINITY;
            for dv in &d.vectors {
                let mut dot = 0.0;
                for i in 0..qv.len() {
                    dot += qv[i] * dv[i];
                }
                best = best.max(dot);
            }
            total += best;
        }
        total
    }

    #[test]
    fn maxsim_self_match() {
        let q = emb().embed_tokens("red fox jumps");
        let s = maxsim_score(&q, &q).unwrap();
        assert!((s - q.tokens.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn maxsim_empty_doc() {
        let q = emb().embed_tokens("red fox");
        let d = emb().embed_tokens("");
        assert_eq!(maxsim_score(&q, &d).unwrap(), 0.0);
    }

    #[test]
    fn maxsim_dim_mismatch() {
        let q = emb().embed_tokens("a");
        let small = TokenHashEmbedder { dim: 16, spread: 4 };
        let d = small.embed_tokens("b");
        assert!(matches!(
            maxsim_score(&q, &d),
            Err(RerankError::DimMismatch { .. })
        ));
    }

    #[test]
    fn maxsim_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vocab = ["ax", "by", "cz", "dw", "ev", "fu", "gt", "hs"];
        for _ in 0..20 {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> String {
                (0..n)
                    .map(|_| vocab[rng.gen_range(0..vocab.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let q = emb().embed_tokens(&pick(&mut rng, 3));
            let d = emb().embed_tokens(&pick(&mut rng, 5));
            let got = maxsim_score(&q, &d).unwrap();
            assert!((got - maxsim_oracle(&q, &d)).abs() < 1e-9);
        }
    }

    #[test]
    fn rerank_text_text_self_candidate_first() {
        let cands = vec![
            ("a".to_string(), "completely different words".to_string()),
            ("b".to_string(), "the exact query text".to_string()),
        ];
        let out = rerank_text_text("the exact query text", &cands, 5);
        assert_eq!(out[0].instance_id, "b");
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn rerank_table_token_coverage_wins() {
        let mk = |id: &str, cells: &[&str]| {
            (
                id.to_string(),
                Table {
                    table_id: id.into(),
                    name: id.into(),
                    schema: vec!["c".into()],
                    rows: cells.iter().map(|c| vec![c.to_string()]).collect(),
                },
            )
        };
        let cands = vec![
            mk("t1", &["totally", "unrelated", "words"]),
            mk("t2", &["jordan", "scored", "thirty"]),
        ];
        let out = rerank_text_table("jordan scored thirty", &cands, 5);
        assert_eq!(out[0].instance_id, "t2");
        assert!(out[0].rerank_score > out[1].rerank_score);
    }

    #[test]
    fn rerank_table_empty_claim() {
        let t = Table {
            table_id: "t".into(),
            name: "t".into(),
            schema: vec!["c".into()],
            rows: vec![vec!["v".into()]],
        };
        let cands = vec![("b".to_string(), t.clone()), ("a".to_string(), t)];
        let out = rerank_text_table("", &cands, 5);
        assert!(out.iter().all(|r| r.rerank_score == 0.0));
        assert_eq!(out[0].instance_id, "a");
    }

    fn tup(cells: &[&str], keys: &[&str]) -> Tuple {
        Tuple {
            table_id: "t".into(),
            row_index: 0,
            schema: (0..cells.len()).map(|i| format!("c{i}")).collect(),
            cells: cells.iter().map(|s| s.to_string()).collect(),
            key_attrs: keys.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn tuple_rerank_identical_is_one() {
        let q = tup(&["k", "a", "b"], &["c0"]);
        let out = rerank_tuple_tuple(&q, &[("x".into(), q.clone())], 3);
        assert!((out[0].rerank_score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tuple_rerank_disjoint_is_zero() {
        let q = tup(&["k", "a"], &["c0"]);
        let c = tup(&["z", "w"], &["c0"]);
        let out = rerank_tuple_tuple(&q, &[("x".into(), c)], 3);
        assert_eq!(out[0].rerank_score, 0.0);
    }

    #[test]
    fn tuple_rerank_key_match_half_cells() {
        // key matches; cell sets {k,a,b} vs {k,a,z}: J_all = 2/4 = 0.5
        let q = tup(&["k", "a", "b"], &["c0"]);
        let c = tup(&["k", "a", "z"], &["c0"]);
        let out = rerank_tuple_tuple(&q, &[("x".into(), c)], 3);
        let expected = 0.7 * 1.0 + 0.3 * 0.5;
        assert!((out[0].rerank_score - expected).abs() < 1e-12);
    }

    proptest! {
        // Appending tokens to the document never decreases MaxSim.
        #[test]
        fn maxsim_monotone_under_extension(
            q in "[a-f]{1,4}( [a-f]{1,4}){0,3}",
            d in "[a-f]{1,4}( [a-f]{1,4}){0,3}",
            extra in "[a-f]{1,4}",
        ) {
            let e = emb();
            let qm = e.embed_tokens(&q);
            let dm = e.embed_tokens(&d);
            let dm_ext = e.embed_tokens(&format!("{d} {extra}"));
            let base = maxsim_score(&qm, &dm).unwrap();
            let ext = maxsim_score(&qm, &dm_ext).unwrap();
            prop_assert!(ext >= base - 1e-12);
        }

        // Reranked output ids are a subset of the candidate ids.
        #[test]
        fn rerank_subset_of_candidates(
            texts in proptest::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,2}", 1..6),
            k in 1usize..4,
        ) {
            let cands: Vec<(String, String)> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| (format!("id{i}"), t.clone()))
                .collect();
            let out = rerank_text_text("aa bb", &cands, k);
            prop_assert!(out.len() <= k);
            for r in &out {
                prop_assert!(cands.iter().any(|(id, _)| id == &r.instance_id));
            }
            for w in out.windows(2) {
                prop_assert!(w[0].rerank_score >= w[1].rerank_score);
            }
        }
    }
}
