//! Acceptance battery: one line per criterion, nonzero exit on any failure.

use std::process::ExitCode;

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        // `cargo test -- --list` enumerates tests; this target has one.
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let report = zeromass::verify::run_all();
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    println!("acceptance: {} passed, {} failed", report.criteria.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
