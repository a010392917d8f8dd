//! Command-line surface: index, verify, eval, prov, serve.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 internal error. Verdicts
//! never map to nonzero exits; stdout carries line-delimited JSON records,
//! human-readable rendering goes to stderr or the `prov show` subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use verifai::config::{EngineConfig, ExternalLlmConfig};
use verifai::evalbench::{
    gen_benchmark, gen_claim_benchmark, recall_at_k, verifier_accuracy, BenchmarkSpec, Qrels,
};
use verifai::index::{ContentIndex, VectorIndex};
use verifai::lake::{load_lake, DataLake, DataObject, Modality};
use verifai::provenance::{LineageFilter, ProvenanceLog};
use verifai::verify::{verify_object, Indexes, TrustConfig, Verdict, VerifierMode};

#[derive(Parser)]
#[command(name = "verifai", version, about = "Verify generated data against a data lake")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Lake directory (tables/ and texts/ subdirectories)
    #[arg(long)]
    lake: PathBuf,
    /// Directory holding the persisted indexes
    #[arg(long)]
    index: PathBuf,
    /// Retrieval depth per index before reranking
    #[arg(long, default_value_t = verifai::config::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = verifai::config::DEFAULT_K_PRIME_TUPLE)]
    k_prime_tuple: usize,
    #[arg(long, default_value_t = verifai::config::DEFAULT_K_PRIME_TEXT)]
    k_prime_text: usize,
    #[arg(long, default_value_t = verifai::config::DEFAULT_K_PRIME_TABLE)]
    k_prime_table: usize,
    /// Verifier mode
    #[arg(long, value_parser = parse_mode, default_value = "local")]
    verifier: VerifierMode,
    /// Trust configuration file (JSON: default_weight, per_source)
    #[arg(long)]
    trust: Option<PathBuf>,
    /// Provenance log path
    #[arg(long)]
    log: Option<PathBuf>,
    /// External chat-completion endpoint for --verifier external
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Model name sent to the external verifier
    #[arg(long, default_value = "gpt-3.5-turbo")]
    llm_model: String,
}

fn parse_mode(s: &str) -> Result<VerifierMode, String> {
    match s {
        "local" => Ok(VerifierMode::Local),
        "external" => Ok(VerifierMode::External),
        "auto" => Ok(VerifierMode::Auto),
        other => Err(format!("unknown verifier mode {other:?}")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build and persist the content and vector indexes for a lake
    Index {
        #[arg(long)]
        lake: PathBuf,
        #[arg(long)]
        index: PathBuf,
    },
    /// Verify data objects from a line-delimited JSON file
    Verify {
        object_file: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Generate a benchmark from a spec and report retrieval/verifier metrics
    Eval {
        /// Benchmark spec file (JSON: seed, n_tables, rows_per_table,
        /// n_objects, corruption_rate, text_evidence)
        #[arg(long)]
        spec: PathBuf,
        /// Override the spec's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Inspect the provenance log
    Prov {
        #[arg(long)]
        log: PathBuf,
        #[command(subcommand)]
        action: ProvAction,
    },
    /// Serve the pipeline over HTTP
    Serve {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum ProvAction {
    /// Summary line per entry
    List {
        #[arg(long)]
        verdict: Option<String>,
        #[arg(long)]
        object: Option<String>,
    },
    /// Full report for one lineage id, rendered human-readably
    Show { id: u64 },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

enum CliError {
    Usage(String),
    Internal(String),
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Index { lake, index } => cmd_index(&lake, &index),
        Command::Verify {
            object_file,
            engine,
        } => cmd_verify(&object_file, &engine),
        Command::Eval { spec, seed } => cmd_eval(&spec, seed),
        Command::Prov { log, action } => cmd_prov(&log, action),
        Command::Serve { engine, port } => cmd_serve(&engine, port),
    }
}

const CONTENT_INDEX_FILE: &str = "content.idx";
const VECTOR_INDEX_FILE: &str = "vector.idx";

fn cmd_index(lake_dir: &Path, index_dir: &Path) -> Result<(), CliError> {
    let lake = load_lake(lake_dir).map_err(usage)?;
    std::fs::create_dir_all(index_dir).map_err(usage)?;
    let indexes = Indexes::build(&lake);
    indexes
        .content
        .save(&index_dir.join(CONTENT_INDEX_FILE))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    indexes
        .vector
        .save(&index_dir.join(VECTOR_INDEX_FILE))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let count_by = |m: Modality| lake.instances.values().filter(|i| i.modality == m).count();
    println!(
        "{}",
        json!({
            "instances": lake.len(),
            "tuples": count_by(Modality::Tuple),
            "tables": count_by(Modality::Table),
            "texts": count_by(Modality::Text),
        })
    );
    Ok(())
}

fn engine_setup(args: &EngineArgs) -> Result<(DataLake, Indexes, EngineConfig), CliError> {
    let lake = load_lake(&args.lake).map_err(usage)?;
    let content = ContentIndex::load(&args.index.join(CONTENT_INDEX_FILE)).map_err(usage)?;
    let vector = VectorIndex::load(&args.index.join(VECTOR_INDEX_FILE)).map_err(usage)?;
    let indexes = Indexes {
        content,
        vector,
        doc_embedder: Default::default(),
    };
    let trust = match &args.trust {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(usage)?;
            serde_json::from_str::<TrustConfig>(&raw).map_err(usage)?
        }
        None => TrustConfig::default(),
    };
    let external_llm = args.llm_endpoint.as_ref().map(|endpoint| ExternalLlmConfig {
        endpoint: endpoint.clone(),
        model: args.llm_model.clone(),
        token: std::env::var("VERIFAI_LLM_TOKEN").ok(),
        timeout_secs: 30,
    });
    let config = EngineConfig {
        k: args.k,
        k_prime_tuple: args.k_prime_tuple,
        k_prime_text: args.k_prime_text,
        k_prime_table: args.k_prime_table,
        verifier_mode: args.verifier,
        trust,
        external_llm,
    };
    config.validate().map_err(CliError::Usage)?;
    Ok((lake, indexes, config))
}

fn cmd_verify(object_file: &Path, args: &EngineArgs) -> Result<(), CliError> {
    let (lake, indexes, config) = engine_setup(args)?;
    let log = args.log.as_ref().map(ProvenanceLog::open);
    let raw = std::fs::read_to_string(object_file).map_err(usage)?;
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let object: DataObject = serde_json::from_str(line).map_err(usage)?;
        let report = verify_object(&object, &lake, &indexes, &config);
        if let Some(log) = &log {
            if let Err(e) = log.record(&report) {
                eprintln!("provenance write failed: {e}");
            }
        }
        println!(
            "{}",
            serde_json::to_string(&report).map_err(|e| CliError::Internal(e.to_string()))?
        );
    }
    Ok(())
}

fn cmd_eval(spec_file: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(spec_file).map_err(usage)?;
    let mut spec: BenchmarkSpec = serde_json::from_str(&raw).map_err(usage)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let config = EngineConfig::default();

    // tuple-completion tasks: (tuple, tuple) and optionally (tuple, text)
    let (lake, objects, qrels) = gen_benchmark(&spec).map_err(usage)?;
    let indexes = Indexes::build(&lake);
    let mut tuple_runs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut text_runs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut decisions: BTreeMap<String, Verdict> = BTreeMap::new();
    for object in &objects {
        let report = verify_object(object, &lake, &indexes, &config);
        let by_modality = |m: Modality| -> Vec<String> {
            report
                .hits
                .reranked
                .iter()
                .filter(|r| lake.get(&r.instance_id).map(|i| i.modality) == Some(m))
                .map(|r| r.instance_id.clone())
                .collect()
        };
        tuple_runs.insert(object.object_id.clone(), by_modality(Modality::Tuple));
        text_runs.insert(object.object_id.clone(), by_modality(Modality::Text));
        decisions.insert(object.object_id.clone(), report.aggregate);
    }
    let tuple_qrels = filter_qrels_by_modality(&qrels, &lake, Modality::Tuple);
    let mut rows = vec![json!({
        "generated": "tuple",
        "retrieved": "tuple",
        "metric": "recall",
        "k": config.k_prime_tuple,
        "value": recall_at_k(&tuple_runs, &tuple_qrels, config.k_prime_tuple).map_err(usage)?,
    })];
    if spec.text_evidence {
        let text_qrels = filter_qrels_by_modality(&qrels, &lake, Modality::Text);
        rows.push(json!({
            "generated": "tuple",
            "retrieved": "text",
            "metric": "recall",
            "k": config.k_prime_text,
            "value": recall_at_k(&text_runs, &text_qrels, config.k_prime_text).map_err(usage)?,
        }));
    }
    rows.push(json!({
        "generated": "tuple",
        "retrieved": "tuple+text",
        "metric": "accuracy",
        "value": verifier_accuracy(&decisions, &qrels, false).map_err(usage)?,
    }));

    // text-generation task: (claim, table)
    let claim_spec = BenchmarkSpec {
        n_objects: spec.n_objects.min(spec.n_tables),
        ..spec
    };
    let (claim_lake, claims, claim_qrels) = gen_claim_benchmark(&claim_spec).map_err(usage)?;
    let claim_indexes = Indexes::build(&claim_lake);
    let mut table_runs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut claim_decisions: BTreeMap<String, Verdict> = BTreeMap::new();
    for object in &claims {
        let report = verify_object(object, &claim_lake, &claim_indexes, &config);
        let tables: Vec<String> = report
            .hits
            .reranked
            .iter()
            .filter(|r| {
                claim_lake.get(&r.instance_id).map(|i| i.modality) == Some(Modality::Table)
            })
            .map(|r| r.instance_id.clone())
            .collect();
        table_runs.insert(object.object_id.clone(), tables);
        claim_decisions.insert(object.object_id.clone(), report.aggregate);
    }
    rows.push(json!({
        "generated": "textual claim",
        "retrieved": "table",
        "metric": "recall",
        "k": config.k_prime_table,
        "value": recall_at_k(&table_runs, &claim_qrels, config.k_prime_table).map_err(usage)?,
    }));
    rows.push(json!({
        "generated": "textual claim",
        "retrieved": "table",
        "metric": "accuracy",
        "value": verifier_accuracy(&claim_decisions, &claim_qrels, false).map_err(usage)?,
    }));

    for row in &rows {
        println!("{row}");
        eprintln!(
            "{:<16} {:<12} {:<10} {:.4}",
            row["generated"].as_str().unwrap_or(""),
            row["retrieved"].as_str().unwrap_or(""),
            row["metric"].as_str().unwrap_or(""),
            row["value"].as_f64().unwrap_or(f64::NAN),
        );
    }
    Ok(())
}

fn filter_qrels_by_modality(qrels: &Qrels, lake: &DataLake, modality: Modality) -> Qrels {
    let mut out = qrels.clone();
    for rel in out.relevant.values_mut() {
        rel.retain(|id| lake.get(id).map(|i| i.modality) == Some(modality));
    }
    out
}

fn cmd_prov(log_path: &Path, action: ProvAction) -> Result<(), CliError> {
    if !log_path.exists() {
        return Err(CliError::Usage(format!(
            "log {} does not exist",
            log_path.display()
        )));
    }
    let log = ProvenanceLog::open(log_path);
    match action {
        ProvAction::List { verdict, object } => {
            let verdict = match verdict.as_deref() {
                None => None,
                Some("verified") => Some(Verdict::Verified),
                Some("refuted") => Some(Verdict::Refuted),
                Some("not_related") | Some("not-related") => Some(Verdict::NotRelated),
                Some(other) => {
                    return Err(CliError::Usage(format!("unknown verdict {other:?}")))
                }
            };
            let filter = LineageFilter {
                object_id: object,
                verdict,
                time_range: None,
            };
            for summary in log.list(&filter).map_err(usage)? {
                println!(
                    "{}",
                    serde_json::to_string(&summary)
                        .map_err(|e| CliError::Internal(e.to_string()))?
                );
            }
            Ok(())
        }
        ProvAction::Show { id } => {
            let report = log.load(id).map_err(usage)?;
            println!("object:    {}", report.object.object_id);
            println!("aggregate: {}", report.aggregate);
            println!("conflict:  {}", report.conflict);
            println!("evidence:");
            for rec in &report.records {
                println!(
                    "  [{}] {} by {} — {}",
                    rec.verdict, rec.instance_id, rec.verifier_id, rec.explanation
                );
            }
            for err in &report.errors {
                println!("  error in {}: {}", err.stage, err.message);
            }
            Ok(())
        }
    }
}

fn cmd_serve(args: &EngineArgs, port: u16) -> Result<(), CliError> {
    let (lake, indexes, config) = engine_setup(args)?;
    let state = Arc::new(verifai::serve::AppState {
        lake,
        indexes,
        config,
        log: args.log.as_ref().map(ProvenanceLog::open),
    });
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime
        .block_on(verifai::serve::run(state, port))
        .map_err(|e| CliError::Internal(e.to_string()))
}
