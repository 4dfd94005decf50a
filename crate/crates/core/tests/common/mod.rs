#![allow(dead_code)]

use std::sync::Arc;

use dynjudge::engine::{Engine, StageConfig};
use dynjudge::gateway::{Gateway, RetryPolicy, ScriptFile, ScriptedProvider};
use dynjudge::selector::{NllScorer, Selector, SelectorConfig};
use dynjudge::synthetic::Fixture;

pub fn gateway(script: &ScriptFile, limit: usize) -> Gateway {
    let provider = ScriptedProvider::new(script.clone()).expect("valid script");
    Gateway::new(Arc::new(provider), limit).with_retry(RetryPolicy::no_delay())
}

pub fn engine(f: &Fixture, limit: usize) -> Engine {
    Engine::new(gateway(&f.script, limit), f.rules.clone(), StageConfig::default()).expect("engine")
}

pub fn selector(f: &Fixture, gw: &Gateway, lambda: f64) -> Selector {
    Selector::new(
        SelectorConfig::with_lambda(lambda),
        f.records.clone(),
        Arc::new(NllScorer::new(gw.clone())),
    )
}

/// Engine and NLL selector sharing one gateway.
pub fn setup(f: &Fixture, limit: usize, lambda: f64) -> (Engine, Selector) {
    let e = engine(f, limit);
    let s = selector(f, e.gateway(), lambda);
    (e, s)
}

pub const BLESS_ENV: &str = "DYNJUDGE_BLESS";

pub fn manifest_dir() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Compares `actual` with the checked-in file, or rewrites the file when
/// `DYNJUDGE_BLESS` is set.
pub fn golden(path: &std::path::Path, actual: &str) {
    if std::env::var_os(BLESS_ENV).is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e} (set {BLESS_ENV}=1 to create it)", path.display()));
    if expected != actual {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
        panic!(
            "{} differs from the golden file at line {}:\n  golden: {:?}\n  actual: {:?}",
            path.display(),
            line + 1,
            expected.lines().nth(line),
            actual.lines().nth(line)
        );
    }
}

/// Every file under `dir`, relative paths sorted.
pub fn files_under(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    fn walk(base: &std::path::Path, dir: &std::path::Path, out: &mut Vec<std::path::PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push(p.strip_prefix(base).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Runs the 20-query benchmark at the given concurrency and writes its
/// outputs into `dir`.
pub fn benchmark_into(dir: &std::path::Path, limit: usize) -> dynjudge::eval::BenchmarkRun {
    let f = dynjudge::synthetic::benchmark();
    let (engine, selector) = setup(&f, limit, 0.7);
    let run = dynjudge::eval::run_benchmark(&engine, &selector, &f.queries, &f.library).unwrap();
    dynjudge::eval::write_benchmark(dir, &run).unwrap();
    run
}

/// Builds the library of the construction fixture and writes it into `dir`.
pub fn pipeline_into(dir: &std::path::Path, limit: usize) -> dynjudge::library::BuildOutput {
    let p = dynjudge::synthetic::pipeline();
    let engine = Engine::new(gateway(&p.script, limit), p.rules.clone(), StageConfig::default()).unwrap();
    let out = dynjudge::library::build_library(&engine, &p.task_context, &p.dataset, &p.config).unwrap();
    dynjudge::library::write_build(dir, &out).unwrap();
    out
}

/// Asserts that two output directories hold the same files, byte for byte.
pub fn assert_same_tree(a: &std::path::Path, b: &std::path::Path) {
    let files = files_under(a);
    assert_eq!(files, files_under(b));
    for rel in files {
        assert!(
            std::fs::read(a.join(&rel)).unwrap() == std::fs::read(b.join(&rel)).unwrap(),
            "{} differs between runs",
            rel.display()
        );
    }
}
