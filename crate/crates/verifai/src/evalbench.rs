//! Synthetic benchmark generation and the evaluation metrics: retrieval
//! recall and 3-case verifier accuracy with the binary-verifier adapter.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lake::{
    chunk_text, DataInstance, DataLake, DataObject, Payload, SourceDescriptor, Table, Tuple,
};
use crate::verify::Verdict;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("infeasible spec: {0}")]
    Infeasible(String),
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("unknown object id {0}")]
    UnknownObject(String),
    #[error("missing decision for object {0}")]
    MissingDecision(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Qrels {
    pub relevant: BTreeMap<String, BTreeSet<String>>,
    pub gold: BTreeMap<String, Verdict>,
    /// Objects whose evidence turned out unrelated; a NotRelated decision
    /// (or "false" under the binary adapter) counts correct for these.
    #[serde(default)]
    pub unrelated_ok: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub n_tables: usize,
    pub rows_per_table: usize,
    pub n_objects: usize,
    pub corruption_rate: f64,
    pub text_evidence: bool,
}

const ADJECTIVES: [&str; 16] = [
    "amber", "brisk", "coral", "dusty", "ebony", "frosty", "gilded", "hazel", "ivory", "jade",
    "keen", "lunar", "mossy", "noble", "ochre", "pale",
];
const NOUNS: [&str; 16] = [
    "falcon", "grove", "harbor", "island", "jetty", "kestrel", "lagoon", "meadow", "nebula",
    "orchard", "prairie", "quarry", "ridge", "summit", "tundra", "valley",
];

fn random_word(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}{}",
        ADJECTIVES[rng.gen_range(0..ADJECTIVES.len())],
        NOUNS[rng.gen_range(0..NOUNS.len())]
    )
}

/// Globally unique, lexically distinctive key string.
fn entity_key(rng: &mut ChaCha8Rng, counter: usize) -> String {
    format!("{}{counter:05}", random_word(rng))
}

const VALUE_ATTRS: [&str; 3] = ["color", "region", "score"];

fn random_value(rng: &mut ChaCha8Rng, attr: &str) -> String {
    match attr {
        "score" => rng.gen_range(1..1000).to_string(),
        _ => random_word(rng),
    }
}

/// Seeded generation of an imputed-tuple benchmark: tables with unique key
/// strings, one object per sampled tuple whose target value is kept with
/// probability (1 - corruption_rate) or replaced by a distinct corrupted
/// value, gold verdicts accordingly. Relevant evidence is the original tuple
/// instance plus, with `text_evidence`, a sentence chunk stating the true
/// fact.
pub fn gen_benchmark(spec: &BenchmarkSpec) -> Result<(DataLake, Vec<DataObject>, Qrels), BenchError> {
    if spec.n_objects > spec.n_tables * spec.rows_per_table {
        return Err(BenchError::Infeasible(format!(
            "{} objects from {} tuples",
            spec.n_objects,
            spec.n_tables * spec.rows_per_table
        )));
    }
    if !(0.0..=1.0).contains(&spec.corruption_rate) {
        return Err(BenchError::Infeasible("corruption_rate outside [0,1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut lake = DataLake::default();
    let mut all_tuples: Vec<(String, Tuple)> = Vec::new(); // (instance_id, tuple)
    let mut counter = 0;

    let schema: Vec<String> = std::iter::once("entity".to_string())
        .chain(VALUE_ATTRS.iter().map(|a| a.to_string()))
        .collect();

    for ti in 0..spec.n_tables {
        let table_id = format!("bench{ti:04}");
        let source_id = format!("tables/{table_id}.csv");
        let mut rows = Vec::with_capacity(spec.rows_per_table);
        for _ in 0..spec.rows_per_table {
            let key = entity_key(&mut rng, counter);
            counter += 1;
            let mut row = vec![key];
            for attr in VALUE_ATTRS {
                row.push(random_value(&mut rng, attr));
            }
            rows.push(row);
        }
        let table = Table {
            table_id: table_id.clone(),
            name: table_id.clone(),
            schema: schema.clone(),
            rows: rows.clone(),
        };
        let mut count = 1;
        lake.insert(DataInstance::new(Payload::Table(table), source_id.clone()));
        for (row_index, cells) in rows.into_iter().enumerate() {
            let tuple = Tuple {
                table_id: table_id.clone(),
                row_index,
                schema: schema.clone(),
                cells,
                key_attrs: vec!["entity".to_string()],
            };
            let inst = DataInstance::new(Payload::Tuple(tuple.clone()), source_id.clone());
            all_tuples.push((inst.instance_id.clone(), tuple));
            lake.insert(inst);
            count += 1;
        }
        lake.manifest.push(SourceDescriptor {
            source_id: source_id.clone(),
            path: source_id,
            modality: crate::lake::Modality::Table,
            count,
        });
    }

    let mut sampled: Vec<usize> = (0..all_tuples.len()).collect();
    sampled.shuffle(&mut rng);
    sampled.truncate(spec.n_objects);
    sampled.sort();

    let mut objects = Vec::with_capacity(spec.n_objects);
    let mut qrels = Qrels::default();
    for (oi, &idx) in sampled.iter().enumerate() {
        let (orig_id, orig) = &all_tuples[idx];
        let target_pos = rng.gen_range(1..orig.schema.len()); // non-key attribute
        let target_attr = orig.schema[target_pos].clone();
        let true_value = orig.cells[target_pos].clone();

        let mut relevant: BTreeSet<String> = BTreeSet::new();
        relevant.insert(orig_id.clone());

        if spec.text_evidence {
            let key = &orig.cells[0];
            let text = format!("The {target_attr} of {key} is {true_value}.");
            let source_id = format!("texts/{key}.txt");
            for chunk in chunk_text(&source_id, &text, crate::lake::DEFAULT_MAX_CHUNK_CHARS) {
                let inst = DataInstance::new(Payload::Text(chunk), source_id.clone());
                relevant.insert(inst.instance_id.clone());
                lake.insert(inst);
            }
            lake.manifest.push(SourceDescriptor {
                source_id: source_id.clone(),
                path: source_id,
                modality: crate::lake::Modality::Text,
                count: 1,
            });
        }

        let corrupted = rng.gen_bool(spec.corruption_rate);
        let mut obj_tuple = orig.clone();
        if corrupted {
            let mut replacement = random_value(&mut rng, &target_attr);
            while crate::verify::local::values_equal(&replacement, &true_value) {
                replacement = random_value(&mut rng, &target_attr);
            }
            obj_tuple.cells[target_pos] = replacement;
        }
        let object_id = format!("obj{oi:05}");
        objects.push(DataObject::imputed_tuple(
            object_id.clone(),
            obj_tuple,
            target_attr,
        ));
        qrels.relevant.insert(object_id.clone(), relevant);
        qrels.gold.insert(
            object_id,
            if corrupted {
                Verdict::Refuted
            } else {
                Verdict::Verified
            },
        );
    }

    Ok((lake, objects, qrels))
}

/// Claim-style companion benchmark: one textual claim per sampled table row,
/// relevant evidence being the table instance, corrupted claims carrying a
/// wrong score value.
pub fn gen_claim_benchmark(
    spec: &BenchmarkSpec,
) -> Result<(DataLake, Vec<DataObject>, Qrels), BenchError> {
    let (lake, _, _) = gen_benchmark(&BenchmarkSpec {
        text_evidence: false,
        ..*spec
    })?;
    if spec.n_objects > spec.n_tables {
        return Err(BenchError::Infeasible(
            "claim benchmark needs n_objects <= n_tables".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));

    // index tables by id for sampling
    let tables: Vec<&DataInstance> = lake
        .instances
        .values()
        .filter(|i| matches!(i.payload, Payload::Table(_)))
        .collect();
    let mut order: Vec<usize> = (0..tables.len()).collect();
    order.shuffle(&mut rng);
    order.truncate(spec.n_objects);
    order.sort();

    let mut objects = Vec::new();
    let mut qrels = Qrels::default();
    for (oi, &ti) in order.iter().enumerate() {
        let inst = tables[ti];
        let Payload::Table(table) = &inst.payload else {
            unreachable!()
        };
        let row = &table.rows[rng.gen_range(0..table.rows.len())];
        let key = &row[0];
        let score_pos = table.schema.iter().position(|a| a == "score").expect("score column");
        let true_score = &row[score_pos];
        let corrupted = rng.gen_bool(spec.corruption_rate);
        let score = if corrupted {
            let mut s = random_value(&mut rng, "score");
            while s == *true_score {
                s = random_value(&mut rng, "score");
            }
            s
        } else {
            true_score.clone()
        };
        // capitalize the entity so the table verifier's entity gating sees it
        let mut entity = key.clone();
        if let Some(first) = entity.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        let claim = format!("{entity} has a score of {score}");
        let object_id = format!("claim{oi:05}");
        objects.push(DataObject::textual_claim(object_id.clone(), claim));
        qrels
            .relevant
            .insert(object_id.clone(), [inst.instance_id.clone()].into());
        qrels.gold.insert(
            object_id,
            if corrupted {
                Verdict::Refuted
            } else {
                Verdict::Verified
            },
        );
    }
    Ok((lake, objects, qrels))
}

/// Macro-averaged recall: for each object, the fraction of its relevant
/// instances appearing in its top-k run, averaged over objects.
pub fn recall_at_k(
    runs: &BTreeMap<String, Vec<String>>,
    qrels: &Qrels,
    k: usize,
) -> Result<f64, MetricError> {
    if runs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (object_id, ranked) in runs {
        let relevant = qrels
            .relevant
            .get(object_id)
            .ok_or_else(|| MetricError::UnknownObject(object_id.clone()))?;
        if relevant.is_empty() {
            continue;
        }
        let hits = ranked
            .iter()
            .take(k)
            .filter(|id| relevant.contains(*id))
            .count();
        total += hits as f64 / relevant.len() as f64;
    }
    Ok(total / runs.len() as f64)
}

/// 3-case accuracy: a decision is correct when it matches the gold verdict,
/// or when the evidence was truly unrelated and the decision is NotRelated.
/// With the binary adapter, a two-class verifier answering Refuted ("false")
/// on an unrelated-evidence case also counts correct.
pub fn verifier_accuracy(
    decisions: &BTreeMap<String, Verdict>,
    qrels: &Qrels,
    binary_adapter: bool,
) -> Result<f64, MetricError> {
    if qrels.gold.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (object_id, gold) in &qrels.gold {
        let decision = decisions
            .get(object_id)
            .ok_or_else(|| MetricError::MissingDecision(object_id.clone()))?;
        let unrelated = qrels.unrelated_ok.contains(object_id);
        let ok = if unrelated {
            *decision == Verdict::NotRelated
                || (binary_adapter && *decision == Verdict::Refuted)
        } else {
            decision == gold
        };
        if ok {
            correct += 1;
        }
    }
    Ok(correct as f64 / qrels.gold.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BenchmarkSpec {
        BenchmarkSpec {
            seed: 11,
            n_tables: 5,
            rows_per_table: 4,
            n_objects: 8,
            corruption_rate: 0.5,
            text_evidence: false,
        }
    }

    #[test]
    fn corruption_zero_all_verified() {
        let (_, _, qrels) = gen_benchmark(&BenchmarkSpec {
            corruption_rate: 0.0,
            ..spec()
        })
        .unwrap();
        assert!(qrels.gold.values().all(|v| *v == Verdict::Verified));
    }

    #[test]
    fn corruption_one_all_refuted() {
        let (_, _, qrels) = gen_benchmark(&BenchmarkSpec {
            corruption_rate: 1.0,
            ..spec()
        })
        .unwrap();
        assert!(qrels.gold.values().all(|v| *v == Verdict::Refuted));
    }

    #[test]
    fn same_seed_identical_benchmarks() {
        let a = gen_benchmark(&spec()).unwrap();
        let b = gen_benchmark(&spec()).unwrap();
        assert_eq!(
            serde_json::to_string(&a.1).unwrap(),
            serde_json::to_string(&b.1).unwrap()
        );
        assert_eq!(
            a.0.instances.keys().collect::<Vec<_>>(),
            b.0.instances.keys().collect::<Vec<_>>()
        );
    }

    #[test]
    fn infeasible_spec_rejected() {
        assert!(gen_benchmark(&BenchmarkSpec {
            n_objects: 1000,
            ..spec()
        })
        .is_err());
    }

    #[test]
    fn text_evidence_adds_chunks() {
        let (lake, _, qrels) = gen_benchmark(&BenchmarkSpec {
            text_evidence: true,
            ..spec()
        })
        .unwrap();
        assert!(lake
            .instances
            .values()
            .any(|i| matches!(i.payload, Payload::Text(_))));
        assert!(qrels.relevant.values().all(|r| r.len() == 2));
    }

    #[test]
    fn recall_perfect_and_half() {
        let mut qrels = Qrels::default();
        let mut runs = BTreeMap::new();
        for i in 0..4 {
            let oid = format!("o{i}");
            qrels
                .relevant
                .insert(oid.clone(), [format!("rel{i}")].into());
            // objects 0 and 1 hit, 2 and 3 miss
            let ranked = if i < 2 {
                vec![format!("rel{i}"), "noise".into()]
            } else {
                vec!["noise".into()]
            };
            runs.insert(oid, ranked);
        }
        assert_eq!(recall_at_k(&runs, &qrels, 5).unwrap(), 0.5);
        // all relevant in top-k
        let full: BTreeMap<String, Vec<String>> = (0..4)
            .map(|i| (format!("o{i}"), vec![format!("rel{i}")]))
            .collect();
        assert_eq!(recall_at_k(&full, &qrels, 5).unwrap(), 1.0);
    }

    #[test]
    fn recall_monotone_in_k() {
        let mut qrels = Qrels::default();
        qrels
            .relevant
            .insert("o".into(), ["a".to_string(), "b".to_string()].into());
        let runs: BTreeMap<String, Vec<String>> =
            [("o".to_string(), vec!["x".into(), "a".into(), "b".into()])].into();
        let mut prev = 0.0;
        for k in 1..=4 {
            let r = recall_at_k(&runs, &qrels, k).unwrap();
            assert!(r >= prev);
            assert!((0.0..=1.0).contains(&r));
            prev = r;
        }
    }

    #[test]
    fn recall_unknown_object_errors() {
        let runs: BTreeMap<String, Vec<String>> = [("ghost".to_string(), vec![])].into();
        assert!(recall_at_k(&runs, &Qrels::default(), 3).is_err());
    }

    #[test]
    fn accuracy_all_correct() {
        let mut qrels = Qrels::default();
        qrels.gold.insert("a".into(), Verdict::Verified);
        qrels.gold.insert("b".into(), Verdict::Refuted);
        let decisions: BTreeMap<String, Verdict> = [
            ("a".to_string(), Verdict::Verified),
            ("b".to_string(), Verdict::Refuted),
        ]
        .into();
        assert_eq!(verifier_accuracy(&decisions, &qrels, false).unwrap(), 1.0);
    }

    #[test]
    fn binary_adapter_counts_false_on_unrelated() {
        let mut qrels = Qrels::default();
        qrels.gold.insert("a".into(), Verdict::Verified);
        qrels.unrelated_ok.insert("a".into());
        let decisions: BTreeMap<String, Verdict> =
            [("a".to_string(), Verdict::Refuted)].into();
        assert_eq!(verifier_accuracy(&decisions, &qrels, false).unwrap(), 0.0);
        assert_eq!(verifier_accuracy(&decisions, &qrels, true).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_missing_decision_errors() {
        let mut qrels = Qrels::default();
        qrels.gold.insert("a".into(), Verdict::Verified);
        assert!(verifier_accuracy(&BTreeMap::new(), &qrels, false).is_err());
    }
}
