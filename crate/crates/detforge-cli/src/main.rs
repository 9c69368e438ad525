//! Command-line front end: ingest a corpus, serve its tools, run the
//! authoring workflows, score the results, and report on them.

mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use detforge::corpus::{
    embedding_text, infer_missing_metadata, parse_detection_record, parse_schema_documents,
};
use detforge::eval::judge::JudgeVerdict;
use detforge::eval::pipeline::{score_outcomes, ScoringContext};
use detforge::eval::reports::{
    criterion_pass_rates, leaderboard, token_report, weight_sensitivity, write_calibration_csv,
    write_criteria_csv, write_leaderboard_csv, write_tokens_csv,
};
use detforge::eval::score::{MetricComponents, ScoredRow, WeightConfig};
use detforge::gateway::{
    ChatProvider, EmbedConfig, EmbedProvider, GenerationConfig, HttpChat, HttpEmbedder,
    ScriptedChat, ScriptedEmbedder,
};
use detforge::mcp::{self, tools_manifest};
use detforge::store::KnowledgeStore;
use detforge::workflows::{
    read_results_jsonl, run_batch, write_results_jsonl, write_summary_csv, Approach, BatchContext,
    WorkflowError,
};

use manifest::RunManifest;

const DEFAULT_EMBED_MODEL: &str = "scripted-embed";

#[derive(Parser)]
#[command(
    name = "detforge",
    version,
    about = "Detection authoring workflows with retrieval, tools, and scoring"
)]
struct Cli {
    /// Replace every model call with deterministic scripted providers.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a detection corpus, embed every record, and persist a store.
    Ingest {
        /// Detection records, one JSON object per line.
        #[arg(long)]
        corpus: PathBuf,
        /// Telemetry table schema document.
        #[arg(long)]
        schemas: Option<PathBuf>,
        /// Directory the store is written to.
        #[arg(long)]
        store: PathBuf,
        /// Embedding dimension when creating a new store.
        #[arg(long, default_value_t = 256)]
        dimension: usize,
        #[arg(long, default_value = DEFAULT_EMBED_MODEL)]
        embed_model: String,
    },
    /// Answer tool calls over JSON-RPC on stdin and stdout.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = DEFAULT_EMBED_MODEL)]
        embed_model: String,
    },
    /// Run the generation batch described by a manifest.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        /// Keep only these approaches from the manifest grid.
        #[arg(long, value_parser = ["baseline", "sequential", "agentic"])]
        approach: Vec<String>,
        /// Worker threads for the batch.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Score generation results against their gold references.
    Evaluate {
        /// Results file produced by generate.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Scored rows are written here, one JSON object per line.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "judge-v1")]
        judge_model: String,
        #[arg(long, default_value = DEFAULT_EMBED_MODEL)]
        embed_model: String,
        /// Semantic share of the overall blend; syntactic becomes its complement.
        #[arg(long)]
        w_semantic: Option<f64>,
        /// Weight on the subsequence metric within the syntactic pair.
        #[arg(long)]
        w_rouge: Option<f64>,
        /// Weight on the judge score within the semantic pair.
        #[arg(long)]
        w_llm: Option<f64>,
    },
    /// Summarize scored rows as a CSV table.
    Report {
        #[arg(long)]
        scored: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long)]
        out: PathBuf,
        /// Expert ratings CSV (row_id, rating on a 0-10 scale).
        #[arg(long, required_if_eq("kind", "calibrate"))]
        expert: Option<PathBuf>,
        /// Row limit for the leaderboard.
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        #[arg(long)]
        w_semantic: Option<f64>,
        #[arg(long)]
        w_rouge: Option<f64>,
        #[arg(long)]
        w_llm: Option<f64>,
    },
    /// Write the tool manifest as JSON.
    Tools {
        #[arg(long, default_value = "tools.json")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Leaderboard,
    Criteria,
    Tokens,
    Calibrate,
}

enum CliError {
    /// Bad input data: exit code 1.
    Data(String),
    /// Missing or unusable environment: exit code 2.
    Env(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Env(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(message) | CliError::Env(message) => write!(f, "{message}"),
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let offline = cli.offline;
    match cli.command {
        Command::Ingest {
            corpus,
            schemas,
            store,
            dimension,
            embed_model,
        } => cmd_ingest(
            &corpus,
            schemas.as_deref(),
            &store,
            dimension,
            &embed_model,
            offline,
        ),
        Command::Serve { store, embed_model } => cmd_serve(&store, &embed_model, offline),
        Command::Generate {
            manifest,
            approach,
            parallel,
        } => cmd_generate(&manifest, &approach, parallel, offline),
        Command::Evaluate {
            results,
            store,
            out,
            judge_model,
            embed_model,
            w_semantic,
            w_rouge,
            w_llm,
        } => cmd_evaluate(
            &results,
            &store,
            &out,
            &judge_model,
            &embed_model,
            build_weights(w_semantic, w_rouge, w_llm)?,
            offline,
        ),
        Command::Report {
            scored,
            kind,
            out,
            expert,
            top_n,
            w_semantic,
            w_rouge,
            w_llm,
        } => cmd_report(
            &scored,
            kind,
            &out,
            expert.as_deref(),
            top_n,
            build_weights(w_semantic, w_rouge, w_llm)?,
        ),
        Command::Tools { out } => cmd_tools(&out),
    }
}

fn build_weights(
    w_semantic: Option<f64>,
    w_rouge: Option<f64>,
    w_llm: Option<f64>,
) -> Result<WeightConfig, CliError> {
    let mut weights = WeightConfig::default();
    if let Some(w) = w_semantic {
        weights.w_semantic = w;
        weights.w_syntactic = 1.0 - w;
    }
    if let Some(w) = w_rouge {
        weights.w_rouge = w;
        weights.w_lev = 1.0 - w;
    }
    if let Some(w) = w_llm {
        weights.w_llm = w;
        weights.w_embed = 1.0 - w;
    }
    weights
        .validate()
        .map_err(|e| CliError::Data(format!("invalid weights: {e}")))?;
    Ok(weights)
}

fn load_store(dir: &Path) -> Result<KnowledgeStore, CliError> {
    KnowledgeStore::load(dir)
        .map_err(|e| CliError::Env(format!("cannot load store at {}: {e}", dir.display())))
}

fn chat_provider(
    offline: bool,
    scenario_path: Option<&Path>,
) -> Result<Box<dyn ChatProvider>, CliError> {
    if offline {
        let mut scripted = match scenario_path {
            Some(path) => {
                let raw = fs::read_to_string(path).map_err(|e| {
                    CliError::Env(format!("cannot read scenario {}: {e}", path.display()))
                })?;
                ScriptedChat::from_json(&raw)
                    .map_err(|e| CliError::Data(format!("malformed scenario: {e}")))?
            }
            None => ScriptedChat::new(Vec::new()),
        };
        scripted.set_playbook_fallback(true);
        Ok(Box::new(scripted))
    } else {
        Ok(Box::new(
            HttpChat::from_env().map_err(|e| CliError::Env(e.to_string()))?,
        ))
    }
}

fn embed_provider(offline: bool) -> Result<Box<dyn EmbedProvider>, CliError> {
    if offline {
        Ok(Box::new(ScriptedEmbedder))
    } else {
        Ok(Box::new(
            HttpEmbedder::from_env().map_err(|e| CliError::Env(e.to_string()))?,
        ))
    }
}

fn cmd_ingest(
    corpus: &Path,
    schemas: Option<&Path>,
    store_dir: &Path,
    dimension: usize,
    embed_model: &str,
    offline: bool,
) -> Result<(), CliError> {
    let file = File::open(corpus)
        .map_err(|e| CliError::Env(format!("cannot open corpus {}: {e}", corpus.display())))?;

    let mut records = Vec::new();
    let mut line_errors = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Env(format!("reading corpus: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .map_err(|e| e.to_string())
            .and_then(|value| parse_detection_record(&value).map_err(|e| e.to_string()));
        match parsed {
            Ok(record) => records.push(record),
            Err(message) => line_errors.push(format!("line {}: {message}", index + 1)),
        }
    }
    if !line_errors.is_empty() {
        for error in &line_errors {
            eprintln!("{error}");
        }
        return Err(CliError::Data(format!(
            "{} malformed corpus record(s)",
            line_errors.len()
        )));
    }

    let mut parsed_schemas = Vec::new();
    if let Some(path) = schemas {
        let raw = fs::read_to_string(path)
            .map_err(|e| CliError::Env(format!("cannot read schemas {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| CliError::Data(format!("malformed schema file: {e}")))?;
        parsed_schemas = parse_schema_documents(&value)
            .map_err(|e| CliError::Data(format!("malformed schema file: {e}")))?;
    }

    let existing = store_dir.join("records.jsonl").exists();
    let mut store = if existing {
        load_store(store_dir)?
    } else {
        KnowledgeStore::new(dimension)
    };
    let embedder = embed_provider(offline)?;
    let embed_config = EmbedConfig {
        model_id: embed_model.to_string(),
        dimension: store.dimension(),
    };

    for schema in &parsed_schemas {
        store.add_schema(schema.clone());
    }
    let schema_count = store.iter_schemas().count();

    for mut record in records.drain(..) {
        infer_missing_metadata(&mut record, &parsed_schemas);
        let embedding = embedder
            .embed(&embedding_text(&record), &embed_config)
            .map_err(|e| CliError::Env(format!("embedding {}: {e}", record.detection_id)))?;
        store
            .upsert(record, embedding)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }

    fs::create_dir_all(store_dir)
        .map_err(|e| CliError::Env(format!("cannot create {}: {e}", store_dir.display())))?;
    store
        .save(store_dir)
        .map_err(|e| CliError::Env(format!("cannot persist store: {e}")))?;

    println!(
        "ingested {} detections, {} schemas -> {}",
        store.len(),
        schema_count,
        store_dir.display()
    );
    Ok(())
}

fn cmd_serve(store_dir: &Path, embed_model: &str, offline: bool) -> Result<(), CliError> {
    let store = load_store(store_dir)?;
    let embedder = embed_provider(offline)?;
    let embed_config = EmbedConfig {
        model_id: embed_model.to_string(),
        dimension: store.dimension(),
    };
    info!(
        "serving {} detections from {}",
        store.len(),
        store_dir.display()
    );

    let stdin = io::stdin();
    let stdout = io::stdout();
    mcp::serve(
        &store,
        embedder.as_ref(),
        embed_config,
        stdin.lock(),
        stdout.lock(),
    )
    .map_err(|e| CliError::Env(format!("transport failed: {e}")))
}

fn cmd_generate(
    manifest_path: &Path,
    approach_filter: &[String],
    parallel: Option<usize>,
    offline: bool,
) -> Result<(), CliError> {
    let manifest = RunManifest::load(manifest_path).map_err(|e| {
        if e.is_environment() {
            CliError::Env(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    })?;

    let mut store = load_store(&manifest.store_dir)?;
    let holdout: BTreeSet<String> = manifest.holdout_ids.iter().cloned().collect();
    if !holdout.is_empty() {
        store
            .mark_holdout(&holdout)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }

    let approaches: Vec<Approach> = if approach_filter.is_empty() {
        manifest.approaches.clone()
    } else {
        let requested: BTreeSet<&str> = approach_filter.iter().map(String::as_str).collect();
        manifest
            .approaches
            .iter()
            .copied()
            .filter(|a| requested.contains(a.as_str()))
            .collect()
    };
    if approaches.is_empty() {
        return Err(CliError::Data(
            "approach filter leaves nothing to run".to_string(),
        ));
    }

    let chat = chat_provider(offline, manifest.scenario_path.as_deref())?;
    let embedder = embed_provider(offline)?;
    let embed_config = EmbedConfig {
        model_id: manifest
            .embed
            .as_ref()
            .map(|e| e.model_id.clone())
            .unwrap_or_else(|| DEFAULT_EMBED_MODEL.to_string()),
        dimension: store.dimension(),
    };

    let ctx = BatchContext {
        chat: chat.as_ref(),
        store: &store,
        embedder: embedder.as_ref(),
        embed_config,
        schema_enabled_platforms: manifest.schema_enabled_platforms.clone(),
        max_iterations: manifest.max_iterations,
        zero_wall_time: offline,
        parallelism: parallel.unwrap_or(manifest.parallelism),
    };
    let configs = manifest.configs();
    let outcomes =
        run_batch(&manifest.tasks, &approaches, &configs, &ctx).map_err(|e| match e {
            WorkflowError::Io(e) => CliError::Env(e.to_string()),
            other => CliError::Data(other.to_string()),
        })?;

    fs::create_dir_all(&manifest.output_dir).map_err(|e| {
        CliError::Env(format!(
            "cannot create {}: {e}",
            manifest.output_dir.display()
        ))
    })?;
    let results_path = manifest.output_dir.join("results.jsonl");
    let results_file = File::create(&results_path)
        .map_err(|e| CliError::Env(format!("cannot write {}: {e}", results_path.display())))?;
    write_results_jsonl(&outcomes, BufWriter::new(results_file))
        .map_err(|e| CliError::Env(e.to_string()))?;

    let summary_path = manifest.output_dir.join("summary.csv");
    let summary_file = File::create(&summary_path)
        .map_err(|e| CliError::Env(format!("cannot write {}: {e}", summary_path.display())))?;
    write_summary_csv(&outcomes, BufWriter::new(summary_file))
        .map_err(|e| CliError::Env(e.to_string()))?;

    let failures = outcomes.iter().filter(|o| !o.is_success()).count();
    println!(
        "generated {} results ({} failed) -> {}",
        outcomes.len(),
        failures,
        manifest.output_dir.display()
    );
    Ok(())
}

fn cmd_evaluate(
    results: &Path,
    store_dir: &Path,
    out: &Path,
    judge_model: &str,
    embed_model: &str,
    weights: WeightConfig,
    offline: bool,
) -> Result<(), CliError> {
    let file = File::open(results)
        .map_err(|e| CliError::Env(format!("cannot open results {}: {e}", results.display())))?;
    let outcomes = read_results_jsonl(BufReader::new(file)).map_err(|e| match e {
        WorkflowError::Io(e) => CliError::Env(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;

    let store = load_store(store_dir)?;
    let judge_chat = chat_provider(offline, None)?;
    let embedder = embed_provider(offline)?;
    let embed_config = EmbedConfig {
        model_id: embed_model.to_string(),
        dimension: store.dimension(),
    };
    let judge_config = GenerationConfig::new(judge_model);
    let ctx = ScoringContext {
        judge_chat: judge_chat.as_ref(),
        judge_config: &judge_config,
        embedder: embedder.as_ref(),
        embed_config: &embed_config,
        weights,
    };

    let rows = score_outcomes(&outcomes, &store, &ctx);
    let out_file = File::create(out)
        .map_err(|e| CliError::Env(format!("cannot write {}: {e}", out.display())))?;
    let mut writer = BufWriter::new(out_file);
    for row in &rows {
        let line = serde_json::to_string(row).map_err(|e| CliError::Env(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| CliError::Env(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Env(e.to_string()))?;

    let scored = rows.iter().filter(|r| r.breakdown.is_some()).count();
    println!(
        "scored {} rows ({} with metrics) -> {}",
        rows.len(),
        scored,
        out.display()
    );
    Ok(())
}

fn read_scored_rows(path: &Path) -> Result<Vec<ScoredRow>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Env(format!("cannot open scored rows {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Env(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}: line {}: {e}", path.display(), index + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_expert_ratings(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    #[derive(serde::Deserialize)]
    struct ExpertRow {
        row_id: String,
        rating: f64,
    }

    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Env(format!("cannot open expert CSV {}: {e}", path.display())))?;
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for record in reader.deserialize::<ExpertRow>() {
        let record = record.map_err(|e| CliError::Data(format!("expert CSV: {e}")))?;
        if !(0.0..=10.0).contains(&record.rating) {
            return Err(CliError::Data(format!(
                "expert rating {} for {} is outside 0-10",
                record.rating, record.row_id
            )));
        }
        grouped
            .entry(record.row_id)
            .or_default()
            .push(record.rating);
    }
    Ok(grouped
        .into_iter()
        .map(|(row_id, ratings)| {
            let mean = ratings.iter().sum::<f64>() / ratings.len() as f64;
            (row_id, mean / 10.0)
        })
        .collect())
}

fn cmd_report(
    scored: &Path,
    kind: ReportKind,
    out: &Path,
    expert: Option<&Path>,
    top_n: usize,
    weights: WeightConfig,
) -> Result<(), CliError> {
    let rows = read_scored_rows(scored)?;
    let out_file = || {
        File::create(out).map_err(|e| CliError::Env(format!("cannot write {}: {e}", out.display())))
    };

    match kind {
        ReportKind::Leaderboard => {
            let board = leaderboard(&rows, top_n);
            write_leaderboard_csv(&board, BufWriter::new(out_file()?))
                .map_err(|e| CliError::Env(e.to_string()))?;
            println!(
                "wrote leaderboard ({} rows) -> {}",
                board.len(),
                out.display()
            );
        }
        ReportKind::Criteria => {
            let pairs: Vec<(String, JudgeVerdict)> = rows
                .iter()
                .filter_map(|r| {
                    r.breakdown
                        .as_ref()
                        .map(|b| (r.approach.clone(), b.verdict))
                })
                .collect();
            let report = criterion_pass_rates(&pairs)
                .map_err(|e| CliError::Data(format!("criteria report: {e}")))?;
            write_criteria_csv(&report, BufWriter::new(out_file()?))
                .map_err(|e| CliError::Env(e.to_string()))?;
            println!(
                "wrote criterion pass rates ({} rows) -> {}",
                report.rows.len(),
                out.display()
            );
        }
        ReportKind::Tokens => {
            let report =
                token_report(&rows).map_err(|e| CliError::Data(format!("token report: {e}")))?;
            write_tokens_csv(&report, BufWriter::new(out_file()?))
                .map_err(|e| CliError::Env(e.to_string()))?;
            println!(
                "wrote token report ({} rows) -> {}",
                report.len(),
                out.display()
            );
        }
        ReportKind::Calibrate => {
            let expert = expert.expect("clap enforces --expert for calibrate");
            let ratings = read_expert_ratings(expert)?;

            let mut by_row_id: BTreeMap<&str, MetricComponents> = BTreeMap::new();
            for row in &rows {
                if let Some(breakdown) = &row.breakdown {
                    by_row_id.insert(
                        row.row_id.as_str(),
                        MetricComponents {
                            s_llm: breakdown.s_llm,
                            s_embed: breakdown.s_embed,
                            s_rouge_l: breakdown.s_rouge_l,
                            s_lev: breakdown.s_lev,
                            verdict: breakdown.verdict,
                        },
                    );
                }
            }

            let mut components = Vec::new();
            let mut paired_ratings = Vec::new();
            let mut unknown = Vec::new();
            for (row_id, rating) in &ratings {
                match by_row_id.get(row_id.as_str()) {
                    Some(component) => {
                        components.push(*component);
                        paired_ratings.push(*rating);
                    }
                    None => unknown.push(row_id.clone()),
                }
            }
            if !unknown.is_empty() {
                return Err(CliError::Data(format!(
                    "expert CSV references unknown or unscored rows: {}",
                    unknown.join(", ")
                )));
            }

            let report = weight_sensitivity(&components, &paired_ratings, &weights)
                .map_err(|e| CliError::Data(format!("calibration: {e}")))?;
            write_calibration_csv(&report, BufWriter::new(out_file()?))
                .map_err(|e| CliError::Env(e.to_string()))?;
            println!(
                "spearman_rho {:.4} (p {:.6}), pearson_r {:.4}, mae {:.4} over {} pairs -> {}",
                report.spearman_rho,
                report.spearman_p,
                report.pearson_r,
                report.mae,
                paired_ratings.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn cmd_tools(out: &Path) -> Result<(), CliError> {
    let manifest = tools_manifest();
    let pretty = serde_json::to_string_pretty(&manifest).expect("tool manifest serializes");
    fs::write(out, format!("{pretty}\n"))
        .map_err(|e| CliError::Env(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote tool manifest -> {}", out.display());
    Ok(())
}
