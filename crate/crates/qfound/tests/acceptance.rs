//! Runs all thirteen criteria, prints one line each and exits nonzero if any
//! fails. Built without the test harness so the lines always reach stdout.

use qfound::acceptance::{run_criterion, AcceptOptions, CRITERIA};

fn main() {
    let opts = AcceptOptions::default();
    let mut failed = Vec::new();
    for c in CRITERIA {
        let r = run_criterion(c, &opts);
        println!("{}", r.line());
        for f in r.checks.failures() {
            println!("    failed: {} = {} (expected {})", f.name, f.value, f.expected);
        }
        if !r.passed() {
            failed.push(c.number);
        }
    }
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria pass", CRITERIA.len());
}
