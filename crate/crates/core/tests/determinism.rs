//! Benchmark and library-build outputs are identical across repeated runs
//! and concurrency limits, and equal to the checked-in golden files.

mod common;

use std::path::Path;

fn check_against_golden(out: &Path, golden: &str) {
    let golden = common::manifest_dir().join("tests/golden").join(golden);
    for rel in common::files_under(out) {
        common::golden(&golden.join(&rel), &std::fs::read_to_string(out.join(&rel)).unwrap());
    }
}

#[test]
fn benchmark_outputs_are_reproducible() {
    let dirs: Vec<_> = [1, 8, 1, 8, 4, 8].iter().map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, limit) in dirs.iter().zip([1, 8, 1, 8, 4, 8]) {
        common::benchmark_into(d.path(), limit);
    }
    for d in &dirs[1..] {
        common::assert_same_tree(dirs[0].path(), d.path());
    }
    check_against_golden(dirs[0].path(), "benchmark");
}

#[test]
fn library_build_is_reproducible() {
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, limit) in dirs.iter().zip([1, 8, 1, 8]) {
        common::pipeline_into(d.path(), limit);
    }
    for d in &dirs[1..] {
        common::assert_same_tree(dirs[0].path(), d.path());
    }
    check_against_golden(dirs[0].path(), "pipeline");
}
