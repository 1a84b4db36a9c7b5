//! The numerical self-checks behind `asysca check`.

use asysca::experiment::{run_checks, CheckOptions};

fn main() {
    let outcomes = run_checks(&CheckOptions::default());
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if outcomes.iter().any(|o| !o.passed) {
        std::process::exit(1);
    }
}
