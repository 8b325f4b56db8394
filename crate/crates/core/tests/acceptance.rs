//! Acceptance gate: prints one line per criterion and exits nonzero if any
//! fails. Set `SKETCHREG_ACCEPT_SEEDS` to shrink the seed count locally.

use std::process::ExitCode;

use sketchreg_core::harness::{Acceptance, AcceptanceOptions};

fn main() -> ExitCode {
    // cargo passes libtest flags such as --list; there is nothing to list
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut opts = AcceptanceOptions::default();
    if let Some(s) = std::env::var("SKETCHREG_ACCEPT_SEEDS").ok().and_then(|v| v.parse().ok()) {
        opts.seeds = s;
    }
    let report = Acceptance::new(opts).run_all();
    println!("{report}");
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
