//! Deterministic local verifiers. Each is a pure function of the
//! (object, evidence) pair and always lands on one of the three verdicts.

use crate::index::tokenize;
use crate::lake::{DataObject, Table, TextChunk, Tuple};
use crate::rerank::normalize_value;

use super::{
    ContractError, Verdict, VerdictRecord, VERIFIER_EXACT_TUPLE, VERIFIER_LEXICAL_TEXT,
    VERIFIER_TABLE_CLAIM,
};

/// Relative tolerance for numeric cell comparison, so "5.0" verifies "5".
pub const NUMERIC_REL_TOL: f64 = 1e-9;

/// Claim-containment threshold below which text evidence is unrelated.
pub const CONTAINMENT_THRESHOLD: f64 = 0.5;

/// Token-distance window for the negation check.
pub const NEGATION_WINDOW: usize = 5;

/// Fixed 50-word stoplist for content-word containment (see README).
pub const STOPLIST: [&str; 50] = [
    "a", "about", "after", "all", "an", "and", "any", "are", "as", "at", "be", "been", "but",
    "by", "can", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "his",
    "i", "if", "in", "into", "is", "it", "its", "of", "on", "or", "she", "that", "the", "their",
    "there", "they", "this", "to", "was", "were", "will", "with", "you", "your",
];

fn normalize_attr(a: &str) -> String {
    a.trim().to_lowercase()
}

/// Equality on normalized cell values; numeric strings compare as numbers
/// with relative tolerance.
pub fn values_equal(a: &str, b: &str) -> bool {
    let na = normalize_value(a);
    let nb = normalize_value(b);
    if na == nb {
        return true;
    }
    match (na.parse::<f64>(), nb.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= NUMERIC_REL_TOL * x.abs().max(y.abs()),
        _ => false,
    }
}

/// (imputed tuple, tuple) verification on the target attribute: matching key
/// values make the target decisive, any key mismatch or missing shared
/// attribute means the evidence is unrelated.
pub fn verify_tuple_tuple(
    g: &DataObject,
    x: &Tuple,
    instance_id: &str,
) -> Result<VerdictRecord, ContractError> {
    let target_attr = g
        .target_attr
        .as_ref()
        .ok_or_else(|| ContractError("imputed tuple has no target_attr".into()))?;
    let gt = g
        .tuple_payload
        .as_ref()
        .ok_or_else(|| ContractError("imputed tuple has no tuple payload".into()))?;

    let x_attrs: Vec<String> = x.schema.iter().map(|a| normalize_attr(a)).collect();
    let lookup = |attr: &str| -> Option<&str> {
        let na = normalize_attr(attr);
        x_attrs
            .iter()
            .position(|a| *a == na)
            .map(|i| x.cells[i].as_str())
    };

    let mut verdict = Verdict::NotRelated;
    let explanation;

    let shared_ok = gt.key_attrs.iter().all(|a| lookup(a).is_some())
        && lookup(target_attr).is_some();
    if !shared_ok {
        explanation = "evidence tuple does not share the key or target attributes".into();
    } else {
        let keys_match = gt.key_attrs.iter().all(|a| {
            let gv = gt.cell(a).unwrap_or("");
            values_equal(gv, lookup(a).unwrap())
        });
        if !keys_match {
            explanation = "key attribute values differ".into();
        } else {
            let gv = gt.cell(target_attr).unwrap_or("");
            let xv = lookup(target_attr).unwrap();
            if values_equal(gv, xv) {
                verdict = Verdict::Verified;
                explanation = format!("target {target_attr:?} matches: {xv:?}");
            } else {
                verdict = Verdict::Refuted;
                explanation = format!("target {target_attr:?} is {xv:?}, not {gv:?}");
            }
        }
    }

    Ok(VerdictRecord {
        object_id: g.object_id.clone(),
        instance_id: instance_id.to_string(),
        verdict,
        verifier_id: VERIFIER_EXACT_TUPLE.into(),
        explanation,
        raw_response: None,
    })
}

/// Content tokens of a claim: tokenizer output minus the stoplist.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPLIST.contains(&t.as_str()))
        .collect()
}

/// Positions of negation tokens in a chunk token list. The tokenizer splits
/// "doesn't" into ["doesn", "t"], so a lone "t" after a token ending in 'n'
/// also counts as a negation.
fn negation_positions(tokens: &[String]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(i, t)| {
            matches!(t.as_str(), "not" | "no" | "never")
                || (t.as_str() == "t" && *i > 0 && tokens[i - 1].ends_with('n'))
        })
        .map(|(i, _)| i)
        .collect()
}

/// (claim, text chunk) verification by content-word containment with a
/// negation window.
pub fn verify_claim_text(g: &DataObject, x: &TextChunk, instance_id: &str) -> VerdictRecord {
    let claim = g.query_text();
    let claim_tokens = content_tokens(&claim);
    let chunk_tokens = tokenize(&x.text);

    let (verdict, explanation) = if claim_tokens.is_empty() {
        (Verdict::NotRelated, "claim has no content tokens".into())
    } else {
        let matched: Vec<usize> = chunk_tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| claim_tokens.contains(t))
            .map(|(i, _)| i)
            .collect();
        let distinct_matched: std::collections::BTreeSet<&String> = claim_tokens
            .iter()
            .filter(|t| chunk_tokens.contains(t))
            .collect();
        let distinct_claim: std::collections::BTreeSet<&String> = claim_tokens.iter().collect();
        let containment = distinct_matched.len() as f64 / distinct_claim.len() as f64;
        if containment < CONTAINMENT_THRESHOLD {
            (
                Verdict::NotRelated,
                format!("containment {containment:.2} below threshold"),
            )
        } else {
            let negations = negation_positions(&chunk_tokens);
            let negated = matched.iter().any(|&m| {
                negations
                    .iter()
                    .any(|&n| m.abs_diff(n) <= NEGATION_WINDOW)
            });
            if negated {
                (
                    Verdict::Refuted,
                    "negation near matched claim tokens".into(),
                )
            } else {
                (
                    Verdict::Verified,
                    format!("containment {containment:.2}, no negation"),
                )
            }
        }
    };

    VerdictRecord {
        object_id: g.object_id.clone(),
        instance_id: instance_id.to_string(),
        verdict,
        verifier_id: VERIFIER_LEXICAL_TEXT.into(),
        explanation,
        raw_response: None,
    }
}

/// Numeric literals in a raw string: digit runs with an optional decimal
/// part.
pub fn extract_numbers(text: &str) -> Vec<f64> {
    let mut out = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == '.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let s: String = bytes[start..i].iter().collect();
            if let Ok(n) = s.parse::<f64>() {
                out.push(n);
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Entity tokens of a claim: lowercase tokens of capitalized words and
/// double-quoted segments, numbers excluded.
pub fn entity_tokens(claim: &str) -> std::collections::BTreeSet<String> {
    let mut picked = String::new();
    for word in claim.split_whitespace() {
        if word.chars().next().map(|c| c.is_uppercase()).unwrap_or(false) {
            picked.push_str(word);
            picked.push(' ');
        }
    }
    let mut in_quote = false;
    for part in claim.split('"') {
        if in_quote {
            picked.push_str(part);
            picked.push(' ');
        }
        in_quote = !in_quote;
    }
    tokenize(&picked)
        .into_iter()
        .filter(|t| t.parse::<f64>().is_err())
        .collect()
}

/// Minimum entity-token coverage for the table (and per row) to count as
/// related; single-row threshold for number-free claims.
pub const TABLE_COVERAGE_THRESHOLD: f64 = 0.5;
pub const TABLE_ROW_MATCH_THRESHOLD: f64 = 0.8;

/// (claim, table) verification. Entity-token gating decides relatedness;
/// claim numbers are then checked against the cells of entity-matching rows:
/// all found verifies, a disagreeing numeric context refutes. Aggregate
/// reasoning over rows is out of scope for this verifier.
pub fn verify_claim_table(g: &DataObject, x: &Table, instance_id: &str) -> VerdictRecord {
    let claim = g.query_text();
    let entities = entity_tokens(&claim);
    let numbers = extract_numbers(&claim);

    let row_tokens: Vec<std::collections::BTreeSet<String>> = x
        .rows
        .iter()
        .map(|row| row.iter().flat_map(|c| tokenize(c)).collect())
        .collect();
    let all_tokens: std::collections::BTreeSet<&String> =
        row_tokens.iter().flatten().collect();

    let (verdict, explanation) = if entities.is_empty() {
        (Verdict::NotRelated, "claim names no entities".into())
    } else {
        let covered = entities.iter().filter(|e| all_tokens.contains(e)).count();
        let coverage = covered as f64 / entities.len() as f64;
        if coverage < TABLE_COVERAGE_THRESHOLD {
            (
                Verdict::NotRelated,
                format!("entity coverage {coverage:.2} below threshold"),
            )
        } else {
            let row_fraction = |toks: &std::collections::BTreeSet<String>| {
                entities.iter().filter(|e| toks.contains(*e)).count() as f64
                    / entities.len() as f64
            };
            let matching_rows: Vec<usize> = row_tokens
                .iter()
                .enumerate()
                .filter(|(_, toks)| row_fraction(toks) >= TABLE_COVERAGE_THRESHOLD)
                .map(|(i, _)| i)
                .collect();
            if numbers.is_empty() {
                let single_row_hit = row_tokens
                    .iter()
                    .any(|toks| row_fraction(toks) >= TABLE_ROW_MATCH_THRESHOLD);
                if single_row_hit {
                    (Verdict::Verified, "a row matches the claim entities".into())
                } else {
                    (
                        Verdict::NotRelated,
                        "no single row matches the claim entities".into(),
                    )
                }
            } else if matching_rows.is_empty() {
                (
                    Verdict::NotRelated,
                    "no row matches the claim entities".into(),
                )
            } else {
                let row_numbers: Vec<f64> = matching_rows
                    .iter()
                    .flat_map(|&i| x.rows[i].iter().flat_map(|c| extract_numbers(c)))
                    .collect();
                let found = |n: f64| {
                    row_numbers
                        .iter()
                        .any(|&m| (n - m).abs() <= NUMERIC_REL_TOL * n.abs().max(m.abs()))
                };
                if numbers.iter().all(|&n| found(n)) {
                    (
                        Verdict::Verified,
                        "all claim numbers found in matching rows".into(),
                    )
                } else if !row_numbers.is_empty() {
                    (
                        Verdict::Refuted,
                        "matching rows carry different numbers".into(),
                    )
                } else {
                    (
                        Verdict::NotRelated,
                        "matching rows have no numeric context".into(),
                    )
                }
            }
        }
    };

    VerdictRecord {
        object_id: g.object_id.clone(),
        instance_id: instance_id.to_string(),
        verdict,
        verifier_id: VERIFIER_TABLE_CLAIM.into(),
        explanation,
        raw_response: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lake::ObjectKind;

    fn tup(schema: &[&str], cells: &[&str], keys: &[&str]) -> Tuple {
        Tuple {
            table_id: "t".into(),
            row_index: 0,
            schema: schema.iter().map(|s| s.to_string()).collect(),
            cells: cells.iter().map(|s| s.to_string()).collect(),
            key_attrs: keys.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn imputed(schema: &[&str], cells: &[&str], keys: &[&str], target: &str) -> DataObject {
        DataObject::imputed_tuple("g", tup(schema, cells, keys), target)
    }

    #[test]
    fn stoplist_has_fifty_words() {
        assert_eq!(STOPLIST.len(), 50);
        let set: std::collections::BTreeSet<_> = STOPLIST.iter().collect();
        assert_eq!(set.len(), 50);
        for neg in ["not", "no", "never"] {
            assert!(!STOPLIST.contains(&neg));
        }
    }

    #[test]
    fn tuple_identical_verifies() {
        let g = imputed(&["k", "v"], &["a", "b"], &["k"], "v");
        let x = tup(&["k", "v"], &["a", "b"], &["k"]);
        let rec = verify_tuple_tuple(&g, &x, "x1").unwrap();
        assert_eq!(rec.verdict, Verdict::Verified);
    }

    #[test]
    fn tuple_key_match_target_differs_refutes() {
        // the imputed incumbent scenario: same key, different target value
        let g = imputed(
            &["election", "incumbent"],
            &["1956", "Wrong Person"],
            &["election"],
            "incumbent",
        );
        let x = tup(&["election", "incumbent"], &["1956", "Dawson"], &["election"]);
        let rec = verify_tuple_tuple(&g, &x, "x1").unwrap();
        assert_eq!(rec.verdict, Verdict::Refuted);
    }

    #[test]
    fn tuple_missing_target_attr_is_contract_error() {
        let mut g = imputed(&["k", "v"], &["a", "b"], &["k"], "v");
        g.target_attr = None;
        let x = tup(&["k", "v"], &["a", "b"], &["k"]);
        assert!(verify_tuple_tuple(&g, &x, "x1").is_err());
    }

    #[test]
    fn tuple_numeric_tolerance() {
        let g = imputed(&["k", "v"], &["a", "5.0"], &["k"], "v");
        let x = tup(&["k", "v"], &["a", "5"], &["k"]);
        let rec = verify_tuple_tuple(&g, &x, "x1").unwrap();
        assert_eq!(rec.verdict, Verdict::Verified);
    }

    #[test]
    fn tuple_decision_table_exhaustive() {
        // every combination of key match/mismatch x target equal/unequal/absent
        for key_match in [true, false] {
            for target in ["equal", "unequal", "absent"] {
                let g = imputed(&["k", "v"], &["a", "b"], &["k"], "v");
                let x_schema: Vec<&str> = if target == "absent" {
                    vec!["k", "w"]
                } else {
                    vec!["k", "v"]
                };
                let x_cells = vec![
                    if key_match { "a" } else { "z" },
                    if target == "unequal" { "c" } else { "b" },
                ];
                let x = tup(&x_schema, &x_cells, &["k"]);
                let rec = verify_tuple_tuple(&g, &x, "x1").unwrap();
                let expected = match (key_match, target) {
                    (_, "absent") => Verdict::NotRelated,
                    (false, _) => Verdict::NotRelated,
                    (true, "equal") => Verdict::Verified,
                    (true, "unequal") => Verdict::Refuted,
                    _ => unreachable!(),
                };
                assert_eq!(rec.verdict, expected, "key_match={key_match} target={target}");
            }
        }
    }

    fn chunk(text: &str) -> TextChunk {
        TextChunk {
            chunk_id: "c".into(),
            source_file: "f".into(),
            seq: 0,
            text: text.to_string(),
            char_span: (0, text.chars().count()),
        }
    }

    #[test]
    fn claim_verbatim_in_chunk_verifies() {
        let g = DataObject::textual_claim("g", "Meagan Good plays a role in Stomp the Yard");
        let rec = verify_claim_text(
            &g,
            &chunk("Critics wrote that Meagan Good plays a role in Stomp the Yard."),
            "x",
        );
        assert_eq!(rec.verdict, Verdict::Verified);
    }

    #[test]
    fn negated_chunk_refutes() {
        let g = DataObject::textual_claim("g", "Meagan Good plays a role in Stomp the Yard");
        let rec = verify_claim_text(
            &g,
            &chunk("Meagan Good does not appear in Stomp the Yard"),
            "x",
        );
        assert_eq!(rec.verdict, Verdict::Refuted);
    }

    #[test]
    fn contraction_negation_refutes() {
        let g = DataObject::textual_claim("g", "Meagan Good plays a role in Stomp the Yard");
        let rec = verify_claim_text(
            &g,
            &chunk("Meagan Good doesn't appear in Stomp the Yard"),
            "x",
        );
        assert_eq!(rec.verdict, Verdict::Refuted);
    }

    #[test]
    fn unrelated_chunk_below_containment() {
        let g = DataObject::textual_claim("g", "Meagan Good plays a role in Stomp the Yard");
        let text = "An unrelated film about deep sea exploration premiered last autumn.";
        let rec = verify_claim_text(&g, &chunk(text), "x");
        // oracle count: content tokens of the claim found in the chunk
        let claim_content = content_tokens("Meagan Good plays a role in Stomp the Yard");
        let chunk_toks = tokenize(text);
        let hit = claim_content
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .iter()
            .filter(|t| chunk_toks.contains(**t))
            .count();
        let distinct = claim_content
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        assert!((hit as f64 / distinct as f64) < CONTAINMENT_THRESHOLD);
        assert_eq!(rec.verdict, Verdict::NotRelated);
    }

    fn table(name: &str, schema: &[&str], rows: &[&[&str]]) -> Table {
        Table {
            table_id: name.into(),
            name: name.into(),
            schema: schema.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect())
                .collect(),
        }
    }

    #[test]
    fn claim_restating_row_verifies() {
        let t = table(
            "games",
            &["team", "city", "wins"],
            &[
                &["Hawks", "Atlanta", "40"],
                &["Bulls", "Chicago", "52"],
            ],
        );
        let g = DataObject::textual_claim("g", "The Bulls of Chicago had 52 wins");
        let rec = verify_claim_table(&g, &t, "x");
        assert_eq!(rec.verdict, Verdict::Verified);
    }

    #[test]
    fn claim_number_mismatch_refutes() {
        let t = table(
            "games",
            &["team", "city", "wins"],
            &[&["Bulls", "Chicago", "52"]],
        );
        let g = DataObject::textual_claim("g", "The Bulls of Chicago had 99 wins");
        let rec = verify_claim_table(&g, &t, "x");
        assert_eq!(rec.verdict, Verdict::Refuted);
    }

    #[test]
    fn unrelated_table_gated_out() {
        let t = table(
            "seasons",
            &["year", "champion"],
            &[&["1959", "Someone Else"]],
        );
        let g = DataObject::textual_claim("g", "The Bulls of Chicago had 52 wins");
        let rec = verify_claim_table(&g, &t, "x");
        assert_eq!(rec.verdict, Verdict::NotRelated);
    }

    #[test]
    fn claim_table_decision_enumeration() {
        // 3x3 fixture: gold row, near-miss row (wrong number), unrelated row
        let t = table(
            "stats",
            &["player", "team", "points"],
            &[
                &["Jordan", "Bulls", "30"],
                &["Pippen", "Bulls", "21"],
                &["Malone", "Jazz", "27"],
            ],
        );
        let cases = [
            ("Jordan of the Bulls scored 30 points", Verdict::Verified),
            ("Jordan of the Bulls scored 99 points", Verdict::Refuted),
            ("Quarterly revenue follows seasonal retail cycles", Verdict::NotRelated),
        ];
        for (claim, expected) in cases {
            let g = DataObject::textual_claim("g", claim);
            let rec = verify_claim_table(&g, &t, "x");
            assert_eq!(rec.verdict, expected, "claim: {claim}");
        }
    }

    #[test]
    fn verifiers_are_pure() {
        let g = DataObject::textual_claim("g", "The Bulls of Chicago had 52 wins");
        let t = table("g", &["team", "wins"], &[&["Bulls", "52"]]);
        let a = verify_claim_table(&g, &t, "x");
        let b = verify_claim_table(&g, &t, "x");
        assert_eq!(a, b);
        assert_eq!(g.kind, ObjectKind::TextualClaim);
    }

    #[test]
    fn extract_numbers_basic() {
        assert_eq!(extract_numbers("22 teams, 3.5 avg"), vec![22.0, 3.5]);
        assert!(extract_numbers("no digits here").is_empty());
    }

    #[test]
    fn entity_tokens_capitalized_and_quoted() {
        let e = entity_tokens("The film \"stomp the yard\" stars Meagan Good in 2007");
        assert!(e.contains("meagan"));
        assert!(e.contains("stomp"));
        assert!(e.contains("yard"));
        assert!(!e.contains("2007"));
    }
}
