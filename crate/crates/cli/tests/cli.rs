use std::path::{Path, PathBuf};

use expiry_cli::{run, EXIT_BACKEND, EXIT_DATA, EXIT_OK, EXIT_USAGE};

const FIXTURE: &str = r#"{"docid":"a","title":"Harbor flood update","sentences":["Officials confirmed the event.","Harbor flood: the harbor flood was reported on 2025-03-10.","Crews remain on site."],"pub_time":"2025-03-10","authority":0.9,"source":"wire"}
{"docid":"b","title":"City council news","sentences":["The council met on 2025-03-01 to discuss budgets."],"pub_time":"2025-03-02","authority":0.5,"source":"local"}
{"docid":"c","title":"Harbor flood aftermath","sentences":["Residents returned home on 2025-03-14.","The harbor flood was reported on 2025-03-10."],"pub_time":"2025-03-15","authority":0.7,"source":"press"}
"#;

fn fixture(dir: &Path) -> PathBuf {
    let p = dir.join("documents.jsonl");
    std::fs::write(&p, FIXTURE).unwrap();
    p
}

fn exec(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["expiry"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
}

#[test]
fn infer_breaking_news_is_event_plus_three_days() {
    let dir = tempfile::tempdir().unwrap();
    let docs = fixture(dir.path());
    let (code, out, err) = exec(&["--corpus", docs.to_str().unwrap(), "infer", "--query", "harbor flood", "--search-time", "2025-03-16"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(field(&out, "t_exp"), "2025-03-13");
    assert_eq!(field(&out, "domain"), "breaking_news");
    assert_eq!(field(&out, "l_cons"), "0.000000");
}

#[test]
fn infer_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let docs = fixture(dir.path());
    let args = ["--corpus", docs.to_str().unwrap(), "--seed", "7", "infer", "--query", "harbor flood", "--search-time", "2025-03-16", "--json"];
    let (a, b) = (exec(&args), exec(&args));
    assert_eq!(a.0, EXIT_OK);
    assert_eq!(a.1, b.1);
}

#[test]
fn unreachable_http_backend_reports_fallback_and_exits_backend() {
    let dir = tempfile::tempdir().unwrap();
    let docs = fixture(dir.path());
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[inference]\nendpoint = \"http://127.0.0.1:9/v1/complete\"\n").unwrap();
    let (code, out, _) = exec(&[
        "--config", cfg.to_str().unwrap(),
        "--corpus", docs.to_str().unwrap(),
        "--backend", "http",
        "infer", "--query", "harbor flood", "--search-time", "2025-03-16",
    ]);
    assert_eq!(code, EXIT_BACKEND);
    assert_eq!(field(&out, "provenance"), "fallback");
    assert_eq!(field(&out, "t_exp"), "none");
}

#[test]
fn extract_with_alpha_one_lists_keyword_relevance() {
    let dir = tempfile::tempdir().unwrap();
    let docs = fixture(dir.path());
    let (code, out, err) = exec(&["--corpus", docs.to_str().unwrap(), "--alpha", "1.0", "extract", "--query", "harbor flood", "--search-time", "2025-03-16", "--json"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let chunks = v["chunks"].as_array().unwrap();
    assert!(!chunks.is_empty());
    for c in chunks {
        assert_eq!(c["s_rel"], c["rel_k"]);
    }
}

#[test]
fn extract_without_keyword_match_is_empty_with_fallback_flag() {
    let dir = tempfile::tempdir().unwrap();
    let docs = fixture(dir.path());
    let (code, out, _) = exec(&["--corpus", docs.to_str().unwrap(), "extract", "--query", "zebra migration", "--search-time", "2025-03-16"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(field(&out, "chunks"), "0");
    assert_eq!(field(&out, "fallback_used"), "true");
}

#[test]
fn usage_and_data_errors_map_to_exit_codes() {
    assert_eq!(exec(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(exec(&["--alpha", "2", "config"]).0, EXIT_USAGE);
    assert_eq!(exec(&["--window", "4", "config"]).0, EXIT_USAGE);
    assert_eq!(exec(&["--help"]).0, EXIT_OK);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("documents.jsonl");
    std::fs::write(&bad, "{\"docid\":\"x\"}\n").unwrap();
    let (code, _, err) = exec(&["--corpus", bad.to_str().unwrap(), "extract", "--query", "x"]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("line 1"), "{err}");
    let missing = dir.path().join("nope.toml");
    assert_eq!(exec(&["--config", missing.to_str().unwrap(), "config"]).0, EXIT_DATA);
}

#[test]
fn config_command_round_trips() {
    let (code, out, _) = exec(&["--seed", "9", "config"]);
    assert_eq!(code, EXIT_OK);
    let back = expiry_core::Config::from_toml_str(&out).unwrap();
    assert_eq!(back.seed, 9);
    assert_eq!(back.to_toml_string(), out);
}

#[test]
fn eval_writes_identical_reports_for_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[eval]\nqueries = 40\n").unwrap();
    let (a, b, corpus) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("corpus"));
    let c = cfg.to_str().unwrap();
    let r1 = exec(&["--config", c, "--seed", "3", "eval", "--out", a.to_str().unwrap(), "--write-corpus", corpus.to_str().unwrap()]);
    assert_eq!(r1.0, EXIT_OK, "{}", r1.2);
    let r2 = exec(&["--config", c, "--corpus", corpus.to_str().unwrap(), "eval", "--out", b.to_str().unwrap()]);
    assert_eq!(r2.0, EXIT_OK, "{}", r2.2);
    for f in ["report.json", "report.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(r1.1.contains("expiry_aware"));
}

#[test]
fn cache_build_persists_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[eval]\nqueries = 10\n[signal]\noracle_deadline_ms = 10000\n").unwrap();
    let cache = dir.path().join("cache.jsonl");
    let (code, out, err) = exec(&["--config", cfg.to_str().unwrap(), "cache-build", "--cache", cache.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let entries: usize = field(&out, "cache_entries").parse().unwrap();
    assert!(entries > 0);
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), entries);
}
