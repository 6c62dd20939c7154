use std::sync::Arc;

use expiry_core::eval::{generate_corpus, run_offline_eval, CorpusParams, EvalCorpus, EvalOptions, PipelineThresholds};
use expiry_core::extraction::Extractor;
use expiry_core::inference::{OracleBackend, PromptBuilder, RuleTable};
use expiry_core::pipeline::Pipeline;
use expiry_core::signal::SanityBounds;

fn small_corpus(seed: u64) -> EvalCorpus {
    let params = CorpusParams { queries: 60, ..CorpusParams::default() };
    generate_corpus(seed, &params, &RuleTable::default())
}

fn pipeline() -> Pipeline<f64> {
    Pipeline::new(
        Extractor::default(),
        PromptBuilder::default(),
        Arc::new(RuleTable::default()),
        Arc::new(OracleBackend::default()),
    )
}

#[test]
fn thread_count_does_not_change_the_report() {
    let corpus = small_corpus(5);
    let p = pipeline();
    let source = PipelineThresholds { pipeline: &p, sanity: SanityBounds::default() };
    let one = run_offline_eval(&corpus, p.extractor(), &source, &EvalOptions { threads: 1, ..EvalOptions::default() });
    let many = run_offline_eval(&corpus, p.extractor(), &source, &EvalOptions { threads: 7, ..EvalOptions::default() });
    assert_eq!(one.to_json(), many.to_json());
}

#[test]
fn oracle_recovers_most_planted_thresholds() {
    let corpus = small_corpus(11);
    let p = pipeline();
    let source = PipelineThresholds { pipeline: &p, sanity: SanityBounds::default() };
    let report = run_offline_eval(&corpus, p.extractor(), &source, &EvalOptions::default());
    assert_eq!(report.query_count, 60);
    assert!(report.thresholds_exact * 10 >= report.query_count * 8, "{} exact", report.thresholds_exact);
}

#[test]
fn saved_corpus_reloads_identically() {
    let corpus = small_corpus(3);
    let dir = tempfile::tempdir().unwrap();
    corpus.save(dir.path()).unwrap();
    let back = EvalCorpus::load(dir.path()).unwrap();
    assert_eq!(back.queries, corpus.queries);
    assert_eq!(back.documents, corpus.documents);
}

#[test]
fn unknown_documents_are_reported_by_line() {
    let corpus = small_corpus(3);
    let dir = tempfile::tempdir().unwrap();
    corpus.save(dir.path()).unwrap();
    let docs = std::fs::read_to_string(dir.path().join("documents.jsonl")).unwrap();
    let kept: Vec<&str> = docs.lines().skip(1).collect();
    std::fs::write(dir.path().join("documents.jsonl"), kept.join("\n")).unwrap();
    let err = EvalCorpus::load(dir.path()).unwrap_err().to_string();
    assert!(err.contains("line 1") && err.contains("unknown document"), "{err}");
}
