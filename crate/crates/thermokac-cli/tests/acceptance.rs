//! The acceptance suite: runs every built-in criterion at its stated
//! tolerance and prints one pass/fail line per criterion.
//!
//! Run with `cargo test -p thermokac-cli --test acceptance -- --nocapture`
//! to see the lines; the same report is available from
//! `thermokac acceptance`.

use std::path::Path;

#[test]
fn acceptance_criteria() {
    let exe = Path::new(env!("CARGO_BIN_EXE_thermokac"));
    let outcomes = thermokac::acceptance::run_all(exe);
    let mut failures = Vec::new();
    for outcome in &outcomes {
        let line = outcome.report_line();
        println!("{line}");
        if !outcome.passed {
            failures.push(line);
        }
    }
    assert!(
        failures.is_empty(),
        "failed criteria:\n{}",
        failures.join("\n")
    );
}
