//! Task-agnostic top-k retrieval: a BM25 inverted index over serialized
//! instances, an exact-scan cosine vector index, and the reciprocal-rank
//! fusion combiner that merges their result lists.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Embedder;
use crate::lake::DataInstance;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const RRF_CONSTANT: f64 = 60.0;
/// Coarse retrieval depth before reranking.
pub const DEFAULT_K: usize = 100;

pub const INDEX_MAGIC: &str = "VFAI-IDX";
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("query dimension {got} does not match index dimension {expected}")]
    DimMismatch { got: usize, expected: usize },
    #[error("embedding failed for instance {instance_id}: {msg}")]
    Embed { instance_id: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed index file: {msg}")]
    Malformed { path: String, msg: String },
}

#[derive(Debug, Error)]
#[error("{path}: index format version {got}, this build reads version {expected}")]
pub struct VersionError {
    pub path: String,
    pub got: u32,
    pub expected: u32,
}

#[derive(Debug, Error)]
pub enum IndexLoadError {
    #[error(transparent)]
    Version(#[from] VersionError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retriever {
    Content,
    Semantic,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub instance_id: String,
    pub score: f64,
    pub rank: usize,
    pub retriever: Retriever,
}

/// Unicode-aware tokenizer shared by the content index, the embedders, and
/// the local verifiers: lowercase, split on non-alphanumeric, drop empties.
/// No stemming, no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ContentIndex {
    pub postings: BTreeMap<String, Vec<(String, u32)>>,
    pub doc_len: BTreeMap<String, u32>,
    pub avg_doc_len: f64,
    pub doc_count: usize,
}

impl ContentIndex {
    pub fn build(instances: &[&DataInstance]) -> Self {
        let mut postings: BTreeMap<String, Vec<(String, u32)>> = BTreeMap::new();
        let mut doc_len: BTreeMap<String, u32> = BTreeMap::new();
        for inst in instances {
            let tokens = tokenize(&inst.serialized());
            doc_len.insert(inst.instance_id.clone(), tokens.len() as u32);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (t, f) in tf {
                postings
                    .entry(t.to_string())
                    .or_default()
                    .push((inst.instance_id.clone(), f));
            }
        }
        for list in postings.values_mut() {
            list.sort();
        }
        let doc_count = doc_len.len();
        let avg_doc_len = if doc_count == 0 {
            0.0
        } else {
            doc_len.values().map(|&l| l as f64).sum::<f64>() / doc_count as f64
        };
        ContentIndex {
            postings,
            doc_len,
            avg_doc_len,
            doc_count,
        }
    }

    /// Okapi BM25 with idf = ln(1 + (N - n + 0.5) / (n + 0.5)), summed over
    /// query tokens with multiplicity. Returns up to k positive-score hits
    /// ordered by (score desc, instance_id asc).
    pub fn search(&self, query: &str, k: usize) -> Vec<RetrievalHit> {
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        let n = self.doc_count as f64;
        for token in tokenize(query) {
            let Some(list) = self.postings.get(&token) else {
                continue;
            };
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for (doc, tf) in list {
                let dl = self.doc_len[doc] as f64;
                let tf = *tf as f64;
                let norm = tf * (BM25_K1 + 1.0)
                    / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / self.avg_doc_len));
                *scores.entry(doc.as_str()).or_insert(0.0) += idf * norm;
            }
        }
        let mut scored: Vec<(&str, f64)> =
            scores.into_iter().filter(|&(_, s)| s > 0.0).collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
        scored.truncate(k);
        to_hits(scored, Retriever::Content)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorIndex {
    pub dim: usize,
    pub entries: Vec<(String, Vec<f64>)>,
    pub embedder_tag: String,
}

impl VectorIndex {
    pub fn build(instances: &[&DataInstance], embedder: &dyn Embedder) -> Result<Self, IndexError> {
        let mut entries = Vec::with_capacity(instances.len());
        for inst in instances {
            let emb = embedder
                .embed(&inst.serialized())
                .map_err(|e| IndexError::Embed {
                    instance_id: inst.instance_id.clone(),
                    msg: e.to_string(),
                })?;
            entries.push((inst.instance_id.clone(), emb.values));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(VectorIndex {
            dim: embedder.dim(),
            entries,
            embedder_tag: embedder.tag().to_string(),
        })
    }

    /// Exact cosine top-k over all entries; zero (empty-content) vectors are
    /// excluded, ties break by instance_id asc.
    pub fn search(&self, query_vec: &[f64], k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        if query_vec.len() != self.dim {
            return Err(IndexError::DimMismatch {
                got: query_vec.len(),
                expected: self.dim,
            });
        }
        let mut scored: Vec<(&str, f64)> = self
            .entries
            .iter()
            .filter(|(_, v)| v.iter().any(|&x| x != 0.0))
            .map(|(id, v)| {
                let dot: f64 = v.iter().zip(query_vec).map(|(a, b)| a * b).sum();
                (id.as_str(), dot)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
        scored.truncate(k);
        Ok(to_hits(scored, Retriever::Semantic))
    }
}

fn to_hits(scored: Vec<(&str, f64)>, retriever: Retriever) -> Vec<RetrievalHit> {
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| RetrievalHit {
            instance_id: id.to_string(),
            score,
            rank: i + 1,
            retriever,
        })
        .collect()
}

/// Reciprocal-rank fusion of several hit lists: union of ids, dedupe, order
/// by RRF(id) = sum over lists of 1 / (60 + rank), ties by id asc, truncated
/// to k.
pub fn combine(result_lists: &[Vec<RetrievalHit>], k: usize) -> Vec<RetrievalHit> {
    let mut rrf: BTreeMap<&str, f64> = BTreeMap::new();
    for list in result_lists {
        for hit in list {
            *rrf.entry(hit.instance_id.as_str()).or_insert(0.0) +=
                1.0 / (RRF_CONSTANT + hit.rank as f64);
        }
    }
    let mut scored: Vec<(&str, f64)> = rrf.into_iter().collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
    scored.truncate(k);
    to_hits(scored, Retriever::Combined)
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    magic: String,
    version: u32,
    embedder_tag: String,
}

/// Writes the versioned envelope line followed by one JSON body line.
fn save_with_envelope<T: Serialize>(
    path: &Path,
    embedder_tag: &str,
    body: &T,
) -> Result<(), IndexError> {
    let pstr = path.display().to_string();
    let env = Envelope {
        magic: INDEX_MAGIC.to_string(),
        version: INDEX_FORMAT_VERSION,
        embedder_tag: embedder_tag.to_string(),
    };
    let mut file = std::fs::File::create(path).map_err(|e| IndexError::Io {
        path: pstr.clone(),
        source: e,
    })?;
    let mut out = serde_json::to_string(&env).expect("envelope serializes");
    out.push('\n');
    out.push_str(&serde_json::to_string(body).expect("index serializes"));
    out.push('\n');
    file.write_all(out.as_bytes()).map_err(|e| IndexError::Io {
        path: pstr,
        source: e,
    })
}

fn load_with_envelope<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IndexLoadError> {
    let pstr = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| IndexError::Io {
        path: pstr.clone(),
        source: e,
    })?;
    let mut lines = BufReader::new(file).lines();
    let env_line = lines
        .next()
        .transpose()
        .map_err(|e| IndexError::Io {
            path: pstr.clone(),
            source: e,
        })?
        .ok_or_else(|| IndexError::Malformed {
            path: pstr.clone(),
            msg: "empty file".into(),
        })?;
    let env: Envelope = serde_json::from_str(&env_line).map_err(|e| IndexError::Malformed {
        path: pstr.clone(),
        msg: e.to_string(),
    })?;
    if env.magic != INDEX_MAGIC {
        return Err(IndexError::Malformed {
            path: pstr,
            msg: format!("bad magic {:?}", env.magic),
        }
        .into());
    }
    if env.version != INDEX_FORMAT_VERSION {
        return Err(VersionError {
            path: pstr,
            got: env.version,
            expected: INDEX_FORMAT_VERSION,
        }
        .into());
    }
    let body_line = lines
        .next()
        .transpose()
        .map_err(|e| IndexError::Io {
            path: pstr.clone(),
            source: e,
        })?
        .ok_or_else(|| IndexError::Malformed {
            path: pstr.clone(),
            msg: "missing body".into(),
        })?;
    serde_json::from_str(&body_line)
        .map_err(|e| {
            IndexError::Malformed {
                path: pstr,
                msg: e.to_string(),
            }
            .into()
        })
}

impl ContentIndex {
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        save_with_envelope(path, "lexical", self)
    }

    pub fn load(path: &Path) -> Result<Self, IndexLoadError> {
        load_with_envelope(path)
    }
}

impl VectorIndex {
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        save_with_envelope(path, &self.embedder_tag.clone(), self)
    }

    pub fn load(path: &Path) -> Result<Self, IndexLoadError> {
        load_with_envelope(path)
    }
}
