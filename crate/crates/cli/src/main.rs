//! Command-line surface: ingest/embed/build an index, query it in raw
//! or assisted mode, run evaluations, and inspect index files.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (CSV, index,
//! qrels), 3 provider/transport error. Assisted-mode LLM failures are
//! not errors; they degrade to vector order and still exit 0.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use rerank_search_core::rerank::{ChatClient, RemoteChatClient, ScriptedChatClient};
use rerank_search_core::{
    build_index, load_csv, load_index, load_queries, run_eval, save_index, CorpusSchema,
    EmbedError, EmbeddingProvider, EvalError, FlatIndex, LocalEmbedder, Metric, Pipeline,
    PipelineConfig, PipelineError, Record, RemoteEmbedder, SearchMode, SearchResult,
};

const EMBED_URL_VAR: &str = "RERANK_SEARCH_EMBED_URL";
const CHAT_URL_VAR: &str = "RERANK_SEARCH_CHAT_URL";
const API_KEY_VAR: &str = "RERANK_SEARCH_API_KEY";
const CHAT_MODEL_VAR: &str = "RERANK_SEARCH_CHAT_MODEL";
const DEFAULT_CHAT_MODEL: &str = "gpt-4o";

#[derive(Parser)]
#[command(
    name = "rerank-search",
    version,
    about = "Two-stage semantic search: exact vector shortlisting plus LLM-assisted reranking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a CSV corpus, embed every document, and write an index file
    Build(BuildArgs),
    /// Query an index in raw or assisted mode
    Search(SearchArgs),
    /// Compare raw vs assisted search over a judged query set
    Eval(EvalArgs),
    /// Print an index file's header and checksum status
    Inspect(InspectArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus CSV file (UTF-8, RFC 4180, header row)
    #[arg(long)]
    csv: PathBuf,
    /// Column holding record ids; row ordinals r0001... when omitted
    #[arg(long = "id-col")]
    id_col: Option<String>,
    /// Columns composed into the searchable document text
    #[arg(long = "text-cols", value_delimiter = ',', required = true)]
    text_cols: Vec<String>,
}

impl CorpusArgs {
    fn schema(&self) -> CorpusSchema {
        CorpusSchema {
            id_column: self.id_col.clone(),
            text_columns: self.text_cols.clone(),
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Embedding provider: local | remote
    #[arg(long, default_value = "local")]
    provider: String,
    /// Vector dimension for the local provider
    #[arg(long, default_value_t = LocalEmbedder::DEFAULT_DIM)]
    dim: usize,
    /// Model name for the remote provider
    #[arg(long)]
    model: Option<String>,
    /// Similarity metric: cosine | dot | l2
    #[arg(long, default_value = "cosine")]
    metric: String,
    /// Output index path (written atomically)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    /// Index file from `build`
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Query text
    #[arg(long)]
    query: String,
    /// raw | assisted
    #[arg(long, default_value = "raw")]
    mode: String,
    /// Stage-1 shortlist size
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Results to return
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Pad short assisted selections back to n from shortlist order
    #[arg(long = "pad-to-n")]
    pad_to_n: bool,
    /// Chat client for assisted mode: remote | scripted:<script.json>
    #[arg(long, default_value = "remote")]
    chat: String,
    /// Emit the result as JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Judged queries JSON file
    #[arg(long)]
    queries: PathBuf,
    /// both | raw | assisted
    #[arg(long, default_value = "both")]
    mode: String,
    /// Stage-1 shortlist size
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Precision cutoff (results per query)
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Comma-separated shortlist sizes to sweep, e.g. 5,10,15
    #[arg(long = "k-sweep", value_delimiter = ',')]
    k_sweep: Option<Vec<usize>>,
    /// Chat client for assisted mode: remote | scripted:<script.json>
    #[arg(long, default_value = "remote")]
    chat: String,
    /// Report JSON output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    index: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
    Provider(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Provider(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Provider(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version land here too; they are not usage errors
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Search(args) => cmd_search(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Inspect(args) => cmd_inspect(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn cmd_build(args: BuildArgs) -> Result<(), CliError> {
    let metric: Metric = args.metric.parse().map_err(CliError::Usage)?;
    if args.dim == 0 {
        return Err(CliError::Usage("--dim must be at least 1".into()));
    }

    let started = Instant::now();
    let records = load_corpus(&args.corpus)?;
    let documents: Vec<&str> = records.iter().map(|r| r.document.as_str()).collect();

    let provider = build_provider(&args)?;
    let vectors = provider
        .embed_batch(&documents)
        .map_err(embed_error_in_build)?;

    let pairs = records
        .iter()
        .map(|record| record.id.clone())
        .zip(vectors)
        .collect();
    let index = build_index(pairs, metric).map_err(|e| CliError::Data(e.to_string()))?;
    save_index(&index, &args.out).map_err(|e| CliError::Data(e.to_string()))?;

    println!(
        "{} records indexed, dim={}, metric={}, model={}, {} ms -> {}",
        index.len(),
        index.dim(),
        index.metric(),
        index.model_id(),
        started.elapsed().as_millis(),
        args.out.display()
    );
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<(), CliError> {
    let mode: SearchMode = args.mode.parse().map_err(CliError::Usage)?;
    if args.n == 0 || args.k == 0 {
        return Err(CliError::Usage("--n and --k must be at least 1".into()));
    }
    if args.n > args.k {
        return Err(CliError::Usage(format!(
            "--n ({}) cannot exceed --k ({})",
            args.n, args.k
        )));
    }

    let index = load_index(&args.index).map_err(|e| CliError::Data(e.to_string()))?;
    let records = load_corpus(&args.corpus)?;
    let provider = provider_for_index(&index)?;
    let chat = match mode {
        SearchMode::Assisted => Some(chat_client(&args.chat)?),
        SearchMode::Raw => None,
    };

    let pipeline = Pipeline::new(index, &records, provider, chat)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let config = PipelineConfig {
        shortlist_k: args.k,
        top_n: args.n,
        mode,
        pad_to_n: args.pad_to_n,
    };
    let result = pipeline
        .search(&args.query, &config)
        .map_err(pipeline_error_in_search)?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
    } else {
        print_search_result(&result);
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    if args.n == 0 || args.k == 0 {
        return Err(CliError::Usage("--n and --k must be at least 1".into()));
    }
    if args.n > args.k {
        return Err(CliError::Usage(format!(
            "--n ({}) cannot exceed --k ({})",
            args.n, args.k
        )));
    }
    let modes: Vec<SearchMode> = match args.mode.as_str() {
        "both" => vec![SearchMode::Raw, SearchMode::Assisted],
        other => vec![other
            .parse()
            .map_err(|_| CliError::Usage(format!("unknown mode {other:?} (expected both|raw|assisted)")))?],
    };
    if let Some(ks) = &args.k_sweep {
        if ks.contains(&0) {
            return Err(CliError::Usage("--k-sweep values must be at least 1".into()));
        }
        if ks.iter().any(|&k| k < args.n) {
            return Err(CliError::Usage(format!(
                "--k-sweep values must be at least --n ({})",
                args.n
            )));
        }
    }

    let index = load_index(&args.index).map_err(|e| CliError::Data(e.to_string()))?;
    let records = load_corpus(&args.corpus)?;
    let queries = load_queries(&args.queries).map_err(|e| CliError::Data(e.to_string()))?;
    let provider = provider_for_index(&index)?;
    let chat = if modes.contains(&SearchMode::Assisted) {
        Some(chat_client(&args.chat)?)
    } else {
        None
    };

    let pipeline = Pipeline::new(index, &records, provider, chat)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let config = PipelineConfig {
        shortlist_k: args.k,
        top_n: args.n,
        mode: SearchMode::Raw,
        pad_to_n: false,
    };
    let report = run_eval(&pipeline, &queries, &config, &modes, args.k_sweep.as_deref())
        .map_err(eval_error)?;

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomically(&args.out, json.as_bytes()).map_err(|e| CliError::Data(e.to_string()))?;
    print!("{}", rerank_search_core::eval::render_table(&report));
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), CliError> {
    let index = load_index(&args.index).map_err(|e| CliError::Data(e.to_string()))?;
    println!(
        "VSIX v1, {}, dim={}, n={}, model={}, crc ok",
        index.metric(),
        index.dim(),
        index.len(),
        index.model_id()
    );
    Ok(())
}

fn load_corpus(args: &CorpusArgs) -> Result<Vec<Record>, CliError> {
    load_csv(&args.csv, &args.schema()).map_err(|e| CliError::Data(e.to_string()))
}

fn build_provider(args: &BuildArgs) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    match args.provider.as_str() {
        "local" => Ok(Box::new(LocalEmbedder::new(args.dim))),
        "remote" => {
            let endpoint = require_env(EMBED_URL_VAR)?;
            let api_key = require_env(API_KEY_VAR)?;
            let model = args.model.clone().ok_or_else(|| {
                CliError::Usage("--model is required with --provider remote".into())
            })?;
            Ok(Box::new(RemoteEmbedder::new(endpoint, model, api_key)))
        }
        other => Err(CliError::Usage(format!(
            "unknown provider {other:?} (expected local|remote)"
        ))),
    }
}

/// Rebuild the query-side embedding provider from the model id stored
/// in the index, so searches always embed in the index's vector space.
fn provider_for_index(index: &FlatIndex) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    if let Some(dim_text) = index.model_id().strip_prefix("local-fnv") {
        let dim: usize = dim_text.parse().map_err(|_| {
            CliError::Data(format!("index model id {:?} is malformed", index.model_id()))
        })?;
        return Ok(Box::new(LocalEmbedder::new(dim)));
    }
    let endpoint = require_env(EMBED_URL_VAR)?;
    let api_key = require_env(API_KEY_VAR)?;
    Ok(Box::new(RemoteEmbedder::new(
        endpoint,
        index.model_id().to_owned(),
        api_key,
    )))
}

fn chat_client(selector: &str) -> Result<Box<dyn ChatClient>, CliError> {
    if let Some(path) = selector.strip_prefix("scripted:") {
        let client = ScriptedChatClient::from_path(path)
            .map_err(|e| CliError::Data(format!("cannot load chat script {path:?}: {e}")))?;
        return Ok(Box::new(client));
    }
    match selector {
        "remote" => {
            let endpoint = require_env(CHAT_URL_VAR)?;
            let api_key = require_env(API_KEY_VAR)?;
            let model =
                std::env::var(CHAT_MODEL_VAR).unwrap_or_else(|_| DEFAULT_CHAT_MODEL.to_owned());
            Ok(Box::new(RemoteChatClient::new(endpoint, model, api_key)))
        }
        other => Err(CliError::Usage(format!(
            "unknown chat client {other:?} (expected remote|scripted:<script.json>)"
        ))),
    }
}

fn require_env(name: &str) -> Result<String, CliError> {
    std::env::var(name)
        .map_err(|_| CliError::Provider(format!("environment variable {name} is not set")))
}

fn embed_error_in_build(err: EmbedError) -> CliError {
    match err {
        EmbedError::EmptyText | EmbedError::InvalidVector(_) => CliError::Data(err.to_string()),
        _ => CliError::Provider(err.to_string()),
    }
}

fn pipeline_error_in_search(err: PipelineError) -> CliError {
    match err {
        PipelineError::Embed(EmbedError::EmptyText) => {
            CliError::Usage("query has no alphanumeric tokens to embed".into())
        }
        PipelineError::Embed(embed) => CliError::Provider(embed.to_string()),
        PipelineError::MissingChatClient => CliError::Provider(err.to_string()),
        PipelineError::InvalidConfig(message) => CliError::Usage(message),
        other => CliError::Data(other.to_string()),
    }
}

fn eval_error(err: EvalError) -> CliError {
    match err {
        EvalError::Pipeline(pipeline) => pipeline_error_in_search(pipeline),
        other => CliError::Data(other.to_string()),
    }
}

fn print_search_result(result: &SearchResult) {
    for row in &result.results {
        let score = row
            .stage1_score
            .map(|s| format!("{s:+.4}"))
            .unwrap_or_else(|| "      -".to_owned());
        println!("{:>2}. {:<12} {score}  {}", row.rank, row.record_id, row.document);
    }
    if result.results.is_empty() {
        println!("(no results)");
    }
    if result.mode == SearchMode::Assisted {
        println!("degraded: {}", result.degraded);
    }
    let rerank = result
        .timings
        .rerank_ms
        .map(|ms| format!(", rerank {ms} ms"))
        .unwrap_or_default();
    println!(
        "timings: embed {} ms, search {} ms{rerank}",
        result.timings.embed_ms, result.timings.search_ms
    );
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
