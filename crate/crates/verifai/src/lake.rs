//! Data model and ingestion for the multi-modal data lake.
//!
//! A lake holds three kinds of instances: tuples, whole tables, and text
//! chunks. Instances get content-derived ids so re-ingesting the same bytes
//! always yields the same lake.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: row {row} has {got} cells, expected {expected}")]
    RaggedRow {
        path: String,
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("{path}: file is empty or header-only")]
    EmptyTable { path: String },
    #[error("{path}: duplicate attribute name {attr:?}")]
    DuplicateAttribute { path: String, attr: String },
    #[error("{path}: not valid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { path: String, offset: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Csv { path: String, msg: String },
}

#[derive(Debug, Error)]
pub enum LakeError {
    #[error("lake layout missing directory {0}")]
    MissingLayout(PathBuf),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub table_id: String,
    pub row_index: usize,
    pub schema: Vec<String>,
    pub cells: Vec<String>,
    pub key_attrs: Vec<String>,
}

impl Tuple {
    /// Cell value for a named attribute, if the schema has it.
    pub fn cell(&self, attr: &str) -> Option<&str> {
        self.schema
            .iter()
            .position(|a| a == attr)
            .map(|i| self.cells[i].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub table_id: String,
    pub name: String,
    pub schema: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextChunk {
    pub chunk_id: String,
    pub source_file: String,
    pub seq: usize,
    pub text: String,
    /// Char offsets (start, end) into the source file; chunks tile the file.
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Tuple,
    Table,
    Text,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Tuple => write!(f, "tuple"),
            Modality::Table => write!(f, "table"),
            Modality::Text => write!(f, "text"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Tuple(Tuple),
    Table(Table),
    Text(TextChunk),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInstance {
    pub instance_id: String,
    pub modality: Modality,
    pub payload: Payload,
    pub source_id: String,
}

impl DataInstance {
    pub fn new(payload: Payload, source_id: impl Into<String>) -> Self {
        let modality = match &payload {
            Payload::Tuple(_) => Modality::Tuple,
            Payload::Table(_) => Modality::Table,
            Payload::Text(_) => Modality::Text,
        };
        let instance_id = instance_id(&payload);
        DataInstance {
            instance_id,
            modality,
            payload,
            source_id: source_id.into(),
        }
    }

    /// Canonical text rendering used by both indexes and prompts.
    pub fn serialized(&self) -> String {
        match &self.payload {
            Payload::Tuple(t) => serialize_tuple(t),
            Payload::Table(t) => serialize_table(t, 50),
            Payload::Text(c) => c.text.clone(),
        }
    }
}

/// Instance id: lowercase hex of a 128-bit content digest over the modality
/// tag and the canonical payload bytes.
pub fn instance_id(payload: &Payload) -> String {
    let tag = match payload {
        Payload::Tuple(_) => "tuple",
        Payload::Table(_) => "table",
        Payload::Text(_) => "text",
    };
    let bytes = serde_json::to_vec(payload).expect("payload serializes");
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update([0u8]);
    hasher.update(&bytes);
    let digest = hasher.finalize();
    hex::encode(&digest[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub source_id: String,
    pub path: String,
    pub modality: Modality,
    pub count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct DataLake {
    pub manifest: Vec<SourceDescriptor>,
    pub instances: BTreeMap<String, DataInstance>,
}

impl DataLake {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, instance_id: &str) -> Option<&DataInstance> {
        self.instances.get(instance_id)
    }

    pub fn insert(&mut self, instance: DataInstance) {
        self.instances.insert(instance.instance_id.clone(), instance);
    }

    /// source_id of an instance, for trust lookups.
    pub fn source_of(&self, instance_id: &str) -> Option<&str> {
        self.get(instance_id).map(|i| i.source_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    ImputedTuple,
    TextualClaim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataObject {
    pub object_id: String,
    pub kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple_payload: Option<Tuple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_attr: Option<String>,
}

impl DataObject {
    pub fn imputed_tuple(
        object_id: impl Into<String>,
        tuple: Tuple,
        target_attr: impl Into<String>,
    ) -> Self {
        DataObject {
            object_id: object_id.into(),
            kind: ObjectKind::ImputedTuple,
            tuple_payload: Some(tuple),
            claim_text: None,
            target_attr: Some(target_attr.into()),
        }
    }

    pub fn textual_claim(object_id: impl Into<String>, claim: impl Into<String>) -> Self {
        DataObject {
            object_id: object_id.into(),
            kind: ObjectKind::TextualClaim,
            tuple_payload: None,
            claim_text: Some(claim.into()),
            target_attr: None,
        }
    }

    /// Query text used for retrieval and text-side reranking.
    pub fn query_text(&self) -> String {
        match self.kind {
            ObjectKind::ImputedTuple => {
                serialize_tuple(self.tuple_payload.as_ref().expect("imputed tuple payload"))
            }
            ObjectKind::TextualClaim => self.claim_text.clone().expect("claim payload"),
        }
    }
}

/// Canonical tuple rendering: `attr1: val1 ; attr2: val2` in schema order.
/// Cell values are emitted verbatim; serialization feeds indexes and prompts,
/// never a parser.
pub fn serialize_tuple(t: &Tuple) -> String {
    t.schema
        .iter()
        .zip(t.cells.iter())
        .map(|(a, v)| format!("{a}: {v}"))
        .collect::<Vec<_>>()
        .join(" ; ")
}

/// Table rendering: name, then header, then up to `row_limit` rows, cells
/// joined by " | ".
pub fn serialize_table(tbl: &Table, row_limit: usize) -> String {
    let mut lines = Vec::with_capacity(2 + row_limit.min(tbl.rows.len()));
    lines.push(tbl.name.clone());
    lines.push(tbl.schema.join(" | "));
    for row in tbl.rows.iter().take(row_limit) {
        lines.push(row.join(" | "));
    }
    lines.join("\n")
}

/// Key selection used when the caller passes AUTO: the leftmost column whose
/// values are unique across rows, falling back to the full schema.
pub fn auto_key_attrs(schema: &[String], rows: &[Vec<String>]) -> Vec<String> {
    for (i, attr) in schema.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        if rows.iter().all(|r| seen.insert(r[i].as_str())) {
            return vec![attr.clone()];
        }
    }
    schema.to_vec()
}

/// Reads a delimiter-separated file with a header row into one Table plus one
/// Tuple per row. `key_attrs = None` means AUTO key selection.
pub fn ingest_table_file(
    path: &Path,
    key_attrs: Option<Vec<String>>,
) -> Result<(Table, Vec<Tuple>), IngestError> {
    let pstr = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| IngestError::Io {
            path: pstr.clone(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv {
            path: pstr.clone(),
            msg: e.to_string(),
        })?
        .clone();
    let schema: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if schema.is_empty() || (schema.len() == 1 && schema[0].is_empty()) {
        return Err(IngestError::EmptyTable { path: pstr });
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for attr in &schema {
            if !seen.insert(attr.as_str()) {
                return Err(IngestError::DuplicateAttribute {
                    path: pstr,
                    attr: attr.clone(),
                });
            }
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Csv {
            path: pstr.clone(),
            msg: e.to_string(),
        })?;
        let cells: Vec<String> = record.iter().map(|c| c.to_string()).collect();
        if cells.len() != schema.len() {
            return Err(IngestError::RaggedRow {
                path: pstr,
                row: i + 2, // 1-based, counting the header line
                got: cells.len(),
                expected: schema.len(),
            });
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyTable { path: pstr });
    }

    let table_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| pstr.clone());
    let keys = match key_attrs {
        Some(k) => k,
        None => auto_key_attrs(&schema, &rows),
    };
    let table = Table {
        table_id: table_id.clone(),
        name: table_id.clone(),
        schema: schema.clone(),
        rows: rows.clone(),
    };
    let tuples = rows
        .into_iter()
        .enumerate()
        .map(|(row_index, cells)| Tuple {
            table_id: table_id.clone(),
            row_index,
            schema: schema.clone(),
            cells,
            key_attrs: keys.clone(),
        })
        .collect();
    Ok((table, tuples))
}

/// Greedy paragraph-boundary chunking. Paragraphs split on blank lines,
/// adjacent paragraphs merge while the combined span stays within
/// `max_chunk_chars`, and an oversized single paragraph hard-splits at the
/// last whitespace before the limit. Spans tile the whole file.
pub fn chunk_text(
    source_file: &str,
    content: &str,
    max_chunk_chars: usize,
) -> Vec<TextChunk> {
    assert!(max_chunk_chars > 0);
    if content.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = content.chars().collect();
    let n = chars.len();

    // Paragraph start offsets in char units. A paragraph boundary is the start
    // of a non-blank line following one or more blank lines.
    let mut para_starts: Vec<usize> = vec![0];
    {
        let mut i = 0;
        let mut line_start = 0;
        let mut prev_blank = false;
        while i <= n {
            if i == n || chars[i] == '\n' {
                let blank = chars[line_start..i].iter().all(|c| c.is_whitespace());
                if !blank && prev_blank && line_start > 0 {
                    para_starts.push(line_start);
                }
                prev_blank = blank;
                line_start = i + 1;
            }
            i += 1;
        }
    }
    para_starts.push(n);

    // Greedy merge of paragraph spans, hard-splitting oversized pieces.
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut cur_start: Option<usize> = None;
    for w in para_starts.windows(2) {
        let (ps, pe) = (w[0], w[1]);
        match cur_start {
            None => cur_start = Some(ps),
            Some(cs) => {
                if pe - cs <= max_chunk_chars {
                    // merge: extend the open chunk
                } else {
                    spans.push((cs, ps));
                    cur_start = Some(ps);
                }
            }
        }
    }
    if let Some(cs) = cur_start {
        spans.push((cs, n));
    }

    // Hard-split any span still over the limit at the last whitespace before
    // the boundary.
    let mut final_spans: Vec<(usize, usize)> = Vec::new();
    for (mut s, e) in spans {
        while e - s > max_chunk_chars {
            let limit = s + max_chunk_chars;
            let cut = (s + 1..=limit)
                .rev()
                .find(|&i| chars[i - 1].is_whitespace())
                .unwrap_or(limit);
            final_spans.push((s, cut));
            s = cut;
        }
        if e > s {
            final_spans.push((s, e));
        }
    }

    final_spans
        .into_iter()
        .enumerate()
        .map(|(seq, (start, end))| TextChunk {
            chunk_id: format!("{source_file}#{seq}"),
            source_file: source_file.to_string(),
            seq,
            text: chars[start..end].iter().collect(),
            char_span: (start, end),
        })
        .collect()
}

/// Reads and chunks a UTF-8 text file.
pub fn ingest_text_file(path: &Path, max_chunk_chars: usize) -> Result<Vec<TextChunk>, IngestError> {
    let pstr = path.display().to_string();
    let bytes = fs::read(path).map_err(|e| IngestError::Io {
        path: pstr.clone(),
        source: e,
    })?;
    let content = match std::str::from_utf8(&bytes) {
        Ok(s) => s,
        Err(e) => {
            return Err(IngestError::InvalidUtf8 {
                path: pstr,
                offset: e.valid_up_to(),
            })
        }
    };
    Ok(chunk_text(&pstr, content, max_chunk_chars))
}

pub const DEFAULT_MAX_CHUNK_CHARS: usize = 1000;

/// Loads a lake directory: `<dir>/tables/*.csv` and `<dir>/texts/*.txt`.
/// Writes `<dir>/manifest` with per-source counts.
pub fn load_lake(dir: &Path) -> Result<DataLake, LakeError> {
    let tables_dir = dir.join("tables");
    let texts_dir = dir.join("texts");
    if !tables_dir.is_dir() {
        return Err(LakeError::MissingLayout(tables_dir));
    }
    if !texts_dir.is_dir() {
        return Err(LakeError::MissingLayout(texts_dir));
    }

    let mut lake = DataLake::default();

    for path in sorted_files(&tables_dir, "csv")? {
        let source_id = format!("tables/{}", file_name(&path));
        let (table, tuples) = ingest_table_file(&path, None)?;
        let mut count = 0;
        lake.insert(DataInstance::new(Payload::Table(table), source_id.clone()));
        count += 1;
        for t in tuples {
            lake.insert(DataInstance::new(Payload::Tuple(t), source_id.clone()));
            count += 1;
        }
        lake.manifest.push(SourceDescriptor {
            source_id,
            path: path.display().to_string(),
            modality: Modality::Table,
            count,
        });
    }

    for path in sorted_files(&texts_dir, "txt")? {
        let source_id = format!("texts/{}", file_name(&path));
        let chunks = ingest_text_file(&path, DEFAULT_MAX_CHUNK_CHARS)?;
        let count = chunks.len();
        for c in chunks {
            lake.insert(DataInstance::new(Payload::Text(c), source_id.clone()));
        }
        lake.manifest.push(SourceDescriptor {
            source_id,
            path: path.display().to_string(),
            modality: Modality::Text,
            count,
        });
    }

    let manifest_path = dir.join("manifest");
    let mut out = String::new();
    for desc in &lake.manifest {
        out.push_str(&serde_json::to_string(desc).expect("descriptor serializes"));
        out.push('\n');
    }
    fs::write(&manifest_path, out).map_err(|e| LakeError::Io {
        path: manifest_path.display().to_string(),
        source: e,
    })?;

    Ok(lake)
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, LakeError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LakeError::Io {
            path: dir.display().to_string(),
            source: e,
        })?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == ext).unwrap_or(false))
        .collect();
    files.sort();
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn tuple(schema: &[&str], cells: &[&str]) -> Tuple {
        Tuple {
            table_id: "t".into(),
            row_index: 0,
            schema: schema.iter().map(|s| s.to_string()).collect(),
            cells: cells.iter().map(|s| s.to_string()).collect(),
            key_attrs: vec![schema[0].to_string()],
        }
    }

    #[test]
    fn serialize_tuple_basic() {
        assert_eq!(serialize_tuple(&tuple(&["a", "b"], &["x", "y"])), "a: x ; b: y");
    }

    #[test]
    fn serialize_tuple_semicolon_verbatim() {
        assert_eq!(
            serialize_tuple(&tuple(&["a", "b"], &["1;2", "y"])),
            "a: 1;2 ; b: y"
        );
    }

    #[test]
    fn serialize_tuple_empty_cell() {
        assert_eq!(serialize_tuple(&tuple(&["a", "b"], &["", "y"])), "a:  ; b: y");
    }

    #[test]
    fn serialize_table_one_by_one() {
        let t = Table {
            table_id: "T".into(),
            name: "T".into(),
            schema: vec!["col".into()],
            rows: vec![vec!["val".into()]],
        };
        assert_eq!(serialize_table(&t, 50), "T\ncol\nval");
    }

    #[test]
    fn serialize_table_row_limit() {
        let t = Table {
            table_id: "T".into(),
            name: "T".into(),
            schema: vec!["c".into()],
            rows: (0..10).map(|i| vec![i.to_string()]).collect(),
        };
        assert_eq!(serialize_table(&t, 3).lines().count(), 5);
    }

    #[test]
    fn ingest_table_basic() {
        let mut f = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(f, "a,b\n1,2\n3,4\n5,6").unwrap();
        let (table, tuples) = ingest_table_file(f.path(), None).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(tuples.len(), 3);
        assert!(tuples.iter().all(|t| t.cells.len() == 2));
        // AUTO key: column a is unique
        assert_eq!(tuples[0].key_attrs, vec!["a".to_string()]);
    }

    #[test]
    fn ingest_table_header_only() {
        let mut f = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(f, "a,b").unwrap();
        assert!(matches!(
            ingest_table_file(f.path(), None),
            Err(IngestError::EmptyTable { .. })
        ));
    }

    #[test]
    fn ingest_table_ragged() {
        let mut f = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(f, "a,b\n1,2\n3").unwrap();
        let err = ingest_table_file(f.path(), None).unwrap_err();
        match err {
            IngestError::RaggedRow { row, .. } => assert_eq!(row, 3),
            other => panic!("expected ragged row, got {other}"),
        }
    }

    #[test]
    fn ingest_table_duplicate_attr() {
        let mut f = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(f, "a,a\n1,2").unwrap();
        assert!(matches!(
            ingest_table_file(f.path(), None),
            Err(IngestError::DuplicateAttribute { .. })
        ));
    }

    #[test]
    fn ingest_target_attr_addressable() {
        let mut f = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(f, "election,incumbent,party\n1956,Dawson,Democratic").unwrap();
        let (_, tuples) = ingest_table_file(f.path(), None).unwrap();
        let obj = DataObject::imputed_tuple("g1", tuples[0].clone(), "incumbent");
        assert_eq!(
            obj.tuple_payload.as_ref().unwrap().cell("incumbent"),
            Some("Dawson")
        );
    }

    #[test]
    fn auto_key_falls_back_to_full_schema() {
        let schema = vec!["a".to_string(), "b".to_string()];
        let rows = vec![
            vec!["1".to_string(), "x".to_string()],
            vec!["1".to_string(), "x".to_string()],
        ];
        assert_eq!(auto_key_attrs(&schema, &rows), schema);
    }

    #[test]
    fn chunk_merges_under_limit() {
        let text = format!("{}\n\n{}", "a".repeat(100), "b".repeat(100));
        let chunks = chunk_text("f", &text, 300);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].char_span, (0, text.chars().count()));
    }

    #[test]
    fn chunk_hard_splits_long_paragraph() {
        // 500 chars of words; must split at whitespace and tile [0, 500)
        let word = "abcd ";
        let text: String = word.repeat(100); // 500 chars
        let chunks = chunk_text("f", &text, 300);
        assert_eq!(chunks.len(), 2);
        let rebuilt: String = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(rebuilt, text);
        assert!(chunks.iter().all(|c| c.char_span.1 - c.char_span.0 <= 300));
        // split lands on a whitespace boundary
        assert!(chunks[0].text.ends_with(' '));
    }

    #[test]
    fn chunk_empty_file() {
        assert!(chunk_text("f", "", 100).is_empty());
    }

    #[test]
    fn instance_id_deterministic() {
        let t = tuple(&["a"], &["x"]);
        let a = DataInstance::new(Payload::Tuple(t.clone()), "s");
        let b = DataInstance::new(Payload::Tuple(t), "s");
        assert_eq!(a.instance_id, b.instance_id);
        assert_eq!(a.instance_id.len(), 32);
    }

    #[test]
    fn load_lake_counts() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("tables")).unwrap();
        fs::create_dir(dir.path().join("texts")).unwrap();
        fs::write(dir.path().join("tables/t1.csv"), "a,b\n1,2\n3,4\n5,6\n").unwrap();
        fs::write(dir.path().join("tables/t2.csv"), "a,b\n7,8\n9,10\n11,12\n").unwrap();
        fs::write(
            dir.path().join("texts/x.txt"),
            format!("{}\n\n{}", "y".repeat(900), "z".repeat(900)),
        )
        .unwrap();
        let lake = load_lake(dir.path()).unwrap();
        // 2 tables + 6 tuples + 2 chunks
        assert_eq!(lake.len(), 10);
        let total: usize = lake.manifest.iter().map(|d| d.count).sum();
        assert_eq!(total, lake.len());
        assert!(dir.path().join("manifest").is_file());
    }

    #[test]
    fn load_lake_empty_dirs() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("tables")).unwrap();
        fs::create_dir(dir.path().join("texts")).unwrap();
        let lake = load_lake(dir.path()).unwrap();
        assert_eq!(lake.len(), 0);
    }

    #[test]
    fn load_lake_missing_layout() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_lake(dir.path()),
            Err(LakeError::MissingLayout(_))
        ));
    }

    proptest! {
        // Chunk spans tile the file: concatenating chunk texts in seq order
        // reproduces the input exactly.
        #[test]
        fn chunk_spans_tile(paras in proptest::collection::vec("[ -~]{0,120}", 1..8),
                            max in 40usize..200) {
            let text = paras.join("\n\n");
            let chunks = chunk_text("f", &text, max);
            let rebuilt: String = chunks.iter().map(|c| c.text.as_str()).collect();
            prop_assert_eq!(rebuilt, text);
            for w in chunks.windows(2) {
                prop_assert_eq!(w[0].char_span.1, w[1].char_span.0);
                prop_assert_eq!(w[0].seq + 1, w[1].seq);
            }
        }

        // Same bytes, same ids.
        #[test]
        fn ingest_deterministic(cells in proptest::collection::vec("[a-z]{1,8}", 2..5)) {
            let schema: Vec<String> = (0..cells.len()).map(|i| format!("c{i}")).collect();
            let t = Tuple {
                table_id: "t".into(),
                row_index: 1,
                schema,
                cells,
                key_attrs: vec!["c0".into()],
            };
            let a = instance_id(&Payload::Tuple(t.clone()));
            let b = instance_id(&Payload::Tuple(t));
            prop_assert_eq!(a, b);
        }
    }
}
