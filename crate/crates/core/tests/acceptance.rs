//! Acceptance criteria 1 to 10 at the pinned default seed.
//!
//! Runs without the libtest harness so every criterion prints its
//! `PASS`/`FAIL` line, with measured value and threshold, even when it passes.
//! Exits nonzero if any criterion fails. Pass suite names as arguments to run
//! a subset.

use std::process::ExitCode;

use invitesim::experiment::acceptance::{run_criterion, AcceptanceSettings};
use invitesim::experiment::SUITES;

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let settings = AcceptanceSettings::default();
    println!("acceptance: seed {}", settings.seed);
    let mut failed = Vec::new();
    for suite in SUITES {
        if !filters.is_empty() && !filters.iter().any(|f| suite.contains(f.as_str())) {
            continue;
        }
        match run_criterion(suite, &settings) {
            Ok(result) => {
                println!("{}", result.summary_line());
                if !result.pass {
                    failed.push(suite);
                }
            }
            Err(e) => {
                println!("criterion {suite}: ERROR {e}");
                failed.push(suite);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        ExitCode::FAILURE
    }
}
