//! Acceptance suite: every criterion at full size, one PASS/FAIL line each.
//!
//! `FBLAB_ACCEPTANCE_LEVEL=quick` runs the reduced sizes instead. Artifacts go under
//! `FBLAB_OUTPUT_ROOT` when set, otherwise into a temporary directory.

use fblab::harness::{output_root, verify_suite, Level, OUTPUT_ROOT_ENV};

fn main() {
    let level: Level = std::env::var("FBLAB_ACCEPTANCE_LEVEL")
        .ok()
        .map(|s| s.parse().expect("level must be quick or full"))
        .unwrap_or(Level::Full);
    let tmp = tempfile::tempdir().expect("temporary directory");
    let root = if std::env::var_os(OUTPUT_ROOT_ENV).is_some() {
        output_root()
    } else {
        tmp.path().to_path_buf()
    };
    println!("acceptance suite, level {level}");
    let report = verify_suite(level, &root).expect("suite artifacts could be written");
    let failed = report.results.iter().filter(|r| !r.pass).count();
    println!("{} of {} criteria pass", report.results.len() - failed, report.results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
