//! Command-line front end and HTTP service for the expiry pipeline.

pub mod service;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use expiry_core::config::{BackendKind, ConfigError};
use expiry_core::corpus::{load_documents, Document};
use expiry_core::eval::{generate_corpus, run_offline_eval, EvalCorpus, PipelineThresholds};
use expiry_core::inference::InferenceError;
use expiry_core::pipeline::{Pipeline, PipelineError};
use expiry_core::signal::{
    Clock, DocumentSource, FallbackReason, KeywordIndex, Provenance, SignalEngine, SystemClock, ThresholdCache,
};
use expiry_core::{Config, TimePoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendFlag {
    Oracle,
    Http,
}

#[derive(Debug, Parser)]
#[command(name = "expiry", version, about = "Query expiration thresholds and freshness signals")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus directory (queries.jsonl + documents.jsonl) or a documents file.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendFlag>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the focused chunks selected for a query.
    Extract {
        #[arg(long)]
        query: String,
        #[arg(long)]
        search_time: Option<TimePoint>,
        #[arg(long)]
        json: bool,
    },
    /// Resolve the expiration threshold for a query.
    Infer {
        #[arg(long)]
        query: String,
        #[arg(long)]
        search_time: Option<TimePoint>,
        #[arg(long)]
        json: bool,
    },
    /// Run the offline ranking comparison and write report files.
    Eval {
        #[arg(long, default_value = "eval_out")]
        out: PathBuf,
        /// Also write the evaluated corpus here.
        #[arg(long)]
        write_corpus: Option<PathBuf>,
    },
    /// Precompute thresholds for every corpus query into the cache file.
    CacheBuild {
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Print the effective configuration.
    Config,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }

    fn backend(message: impl Into<String>) -> Self {
        Self { code: EXIT_BACKEND, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid { .. } | ConfigError::Extraction(_) => Failure::usage(e.to_string()),
            ConfigError::Backend(_) => Failure::backend(e.to_string()),
            other => Failure::data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

fn pipeline_failure(e: &PipelineError) -> i32 {
    match e {
        PipelineError::Inference(InferenceError::Backend(_)) => EXIT_BACKEND,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Loads the config file, then applies the environment and flag overrides.
pub fn effective_config(global: &GlobalArgs) -> Result<Config, Failure> {
    let mut config = match &global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    if let Some(s) = global.seed {
        config.seed = s;
    }
    if let Some(a) = global.alpha {
        config.extraction.alpha = a;
    }
    if let Some(t) = global.tau {
        config.extraction.tau = t;
    }
    if let Some(w) = global.window {
        config.extraction.window = w;
    }
    if let Some(b) = global.backend {
        config.inference.backend = match b {
            BackendFlag::Oracle => BackendKind::Oracle,
            BackendFlag::Http => BackendKind::Http,
        };
    }
    config.validate()?;
    Ok(config)
}

fn config_base(global: &GlobalArgs) -> Option<&Path> {
    global.config.as_deref().and_then(Path::parent)
}

/// The evaluation corpus: loaded from `--corpus`, else generated from the seed.
fn load_eval_corpus(config: &Config, global: &GlobalArgs, base: Option<&Path>) -> Result<EvalCorpus, Failure> {
    match &global.corpus {
        Some(dir) if dir.is_dir() => EvalCorpus::load(dir).map_err(|e| Failure::data(e.to_string())),
        Some(path) => Err(Failure::data(format!(
            "{} is not a corpus directory with queries.jsonl and documents.jsonl",
            path.display()
        ))),
        None => {
            let rules = config.rules(base)?;
            Ok(generate_corpus(config.seed, &config.eval.corpus_params(), &rules))
        }
    }
}

/// Documents for ad-hoc queries: a documents file, a corpus directory, or the
/// generated corpus.
fn load_documents_any(config: &Config, global: &GlobalArgs, base: Option<&Path>) -> Result<Vec<Document>, Failure> {
    match &global.corpus {
        Some(path) if path.is_file() => load_documents(path).map_err(|e| Failure::data(e.to_string())),
        Some(dir) if dir.join("queries.jsonl").is_file() => Ok(load_eval_corpus(config, global, base)?.documents),
        Some(dir) => load_documents(&dir.join("documents.jsonl")).map_err(|e| Failure::data(e.to_string())),
        None => Ok(load_eval_corpus(config, global, base)?.documents),
    }
}

fn default_search_time(docs: &[Document]) -> TimePoint {
    docs.iter()
        .map(|d| d.pub_time)
        .max_by(|a, b| a.chrono_cmp(b))
        .unwrap_or_else(|| TimePoint::from_date(SystemClock.now().date_naive()).expect("valid date"))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let global = &cli.global;
    let config = effective_config(global)?;
    let base = config_base(global);
    match &cli.command {
        Command::Config => {
            write!(out, "{}", config.to_toml_string())?;
            Ok(EXIT_OK)
        }
        Command::Extract { query, search_time, json } => {
            let docs = load_documents_any(&config, global, base)?;
            let pipeline = config.pipeline_with_backend(base, oracle_backend(&config, base)?)?;
            cmd_extract(&pipeline, &config, base, docs, query, *search_time, *json, out)
        }
        Command::Infer { query, search_time, json } => {
            let docs = load_documents_any(&config, global, base)?;
            let pipeline = config.pipeline(base)?;
            cmd_infer(&pipeline, &config, base, docs, query, *search_time, *json, out)
        }
        Command::Eval { out: dir, write_corpus } => {
            let corpus = load_eval_corpus(&config, global, base)?;
            if let Some(w) = write_corpus {
                corpus.save(w)?;
            }
            let pipeline = config.pipeline(base)?;
            cmd_eval(&pipeline, &config, &corpus, dir, out)
        }
        Command::CacheBuild { cache } => {
            let corpus = load_eval_corpus(&config, global, base)?;
            let path = cache.clone().unwrap_or_else(|| PathBuf::from(&config.cache.path));
            let engine = build_engine(&config, base, corpus.documents.clone(), Some(&path))?;
            cmd_cache_build(&engine, &corpus, out)
        }
        Command::Serve { bind } => {
            let docs = load_documents_any(&config, global, base)?;
            let engine = build_engine(&config, base, docs, Some(Path::new(&config.cache.path)))?;
            let bind = bind.clone().unwrap_or_else(|| config.service.bind.clone());
            let state = service::AppState::new(engine, config.service.test_hooks);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(state, &bind))
                .map_err(|e| Failure::data(e.to_string()))?;
            Ok(EXIT_OK)
        }
    }
}

fn oracle_backend(
    config: &Config,
    base: Option<&Path>,
) -> Result<Arc<dyn expiry_core::inference::ReasoningBackend>, Failure> {
    let rules = Arc::new(config.rules(base)?);
    let parser = Arc::new(config.parser(base)?);
    Ok(Arc::new(expiry_core::inference::OracleBackend::new(rules, parser)))
}

/// Signal engine over an in-memory keyword index and an optional cache file.
pub fn build_engine(
    config: &Config,
    base: Option<&Path>,
    docs: Vec<Document>,
    cache_path: Option<&Path>,
) -> Result<SignalEngine, Failure> {
    let pipeline = Arc::new(config.pipeline(base)?);
    let index: Arc<dyn DocumentSource> = Arc::new(KeywordIndex::new(docs, config.stopwords(base)?));
    let cache = match cache_path {
        Some(p) => ThresholdCache::open(p).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?,
        None => ThresholdCache::in_memory(),
    };
    Ok(SignalEngine::new(
        config.signal.clone(),
        pipeline,
        index,
        Arc::new(cache),
        Arc::new(SystemClock),
    ))
}

fn select_docs(config: &Config, base: Option<&Path>, docs: Vec<Document>, query: &str) -> Result<Vec<Document>, Failure> {
    Ok(KeywordIndex::new(docs, config.stopwords(base)?).documents_for(query))
}

pub fn cmd_extract(
    pipeline: &Pipeline<f64>,
    config: &Config,
    base: Option<&Path>,
    docs: Vec<Document>,
    query: &str,
    search_time: Option<TimePoint>,
    as_json: bool,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let search_time = search_time.unwrap_or_else(|| default_search_time(&docs));
    let docs = select_docs(config, base, docs, query)?;
    let refs: Vec<&Document> = docs.iter().collect();
    let extraction = pipeline
        .extractor()
        .extract(query, &refs, &search_time)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let focus = &extraction.focus;
    if as_json {
        let body = json!({
            "search_time": search_time,
            "keywords": extraction.anchor.keywords,
            "temporal_entities": extraction.anchor.temporal_entities,
            "fallback_used": focus.fallback_used,
            "chunks": focus.chunks,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("serializable"))?;
        return Ok(EXIT_OK);
    }
    writeln!(out, "query: {query}")?;
    writeln!(out, "search_time: {search_time}")?;
    writeln!(out, "keywords: {}", extraction.anchor.keywords.join(" "))?;
    writeln!(out, "fallback_used: {}", focus.fallback_used)?;
    writeln!(out, "chunks: {}", focus.len())?;
    for c in &focus.chunks {
        writeln!(
            out,
            "{}\t{:?}\t{}-{}\trel_k={:.6}\trel_t={:.6}\ts_rel={:.6}\t{}",
            c.chunk.source_id,
            c.chunk.origin,
            c.chunk.span.0,
            c.chunk.span.1,
            c.rel_k,
            c.rel_t,
            c.s_rel,
            c.chunk.text(),
        )?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_infer(
    pipeline: &Pipeline<f64>,
    config: &Config,
    base: Option<&Path>,
    docs: Vec<Document>,
    query: &str,
    search_time: Option<TimePoint>,
    as_json: bool,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let search_time = search_time.unwrap_or_else(|| default_search_time(&docs));
    let docs = select_docs(config, base, docs, query)?;
    let refs: Vec<&Document> = docs.iter().collect();
    let run = match pipeline.run(query, &refs, &search_time) {
        Ok(r) => r,
        Err(e) => {
            let code = pipeline_failure(&e);
            let body = json!({
                "query": query,
                "search_time": search_time,
                "t_exp": null,
                "provenance": Provenance::Fallback,
                "f_exp_default": 0,
                "error": e.to_string(),
            });
            if as_json {
                writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("serializable"))?;
            } else {
                writeln!(out, "query: {query}")?;
                writeln!(out, "search_time: {search_time}")?;
                writeln!(out, "t_exp: none")?;
                writeln!(out, "provenance: fallback")?;
                writeln!(out, "error: {e}")?;
            }
            return Err(Failure { code, message: e.to_string() });
        }
    };
    let v = &run.verdict;
    if as_json {
        let body = json!({
            "query": query,
            "search_time": search_time,
            "domain": run.domain,
            "t_exp": v.t_exp,
            "support": v.support,
            "s_self": v.s_self,
            "l_cons": run.l_cons,
            "t_init": run.outcome.t_init,
            "candidates": run.outcome.candidates,
            "chunk_count": v.chunk_count,
            "tie_broken": v.tie_broken,
            "outcome": run.outcome,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("serializable"))?;
        return Ok(EXIT_OK);
    }
    writeln!(out, "query: {query}")?;
    writeln!(out, "search_time: {search_time}")?;
    writeln!(out, "domain: {}", run.domain)?;
    writeln!(out, "t_exp: {}", v.t_exp)?;
    writeln!(out, "t_init: {}", run.outcome.t_init)?;
    writeln!(
        out,
        "candidates: {}",
        run.outcome.candidates.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    )?;
    writeln!(out, "support:")?;
    for (t, w) in &v.support {
        writeln!(out, "  {t}\t{w:.6}")?;
    }
    writeln!(out, "s_self: {:.6}", v.s_self)?;
    writeln!(out, "l_cons: {:.6}", run.l_cons)?;
    writeln!(out, "chunks: {}", v.chunk_count)?;
    Ok(EXIT_OK)
}

pub fn cmd_eval(
    pipeline: &Pipeline<f64>,
    config: &Config,
    corpus: &EvalCorpus,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let source = PipelineThresholds {
        pipeline,
        sanity: config.signal.sanity,
    };
    let report = run_offline_eval(corpus, pipeline.extractor(), &source, &config.eval.options());
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    let table = report.render_table();
    std::fs::write(dir.join("report.txt"), &table)?;
    write!(out, "{table}")?;
    let backend_failures = report
        .queries
        .iter()
        .filter(|q| matches!(q.fallback_reason, Some(FallbackReason::Backend(_) | FallbackReason::Timeout)))
        .count();
    if report.query_count > 0 && backend_failures == report.query_count {
        return Err(Failure::backend("every threshold request failed at the backend"));
    }
    Ok(EXIT_OK)
}

pub fn cmd_cache_build(engine: &SignalEngine, corpus: &EvalCorpus, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut resolved = 0usize;
    let mut fallback = 0usize;
    for q in &corpus.queries {
        let r = engine.get_threshold(&q.text, &q.search_time);
        if r.provenance == Provenance::Fallback {
            fallback += 1;
        } else {
            resolved += 1;
        }
    }
    let kept = engine.cache().compact(engine.now())?;
    writeln!(out, "queries: {}", corpus.queries.len())?;
    writeln!(out, "resolved: {resolved}")?;
    writeln!(out, "fallback: {fallback}")?;
    writeln!(out, "cache_entries: {kept}")?;
    if resolved == 0 && fallback > 0 && engine.pipeline().backend().name() != "oracle" {
        return Err(Failure::backend("no threshold could be resolved"));
    }
    Ok(EXIT_OK)
}
