//! Runs without the libtest harness so the per-criterion lines always reach stdout.

use std::process::ExitCode;
use std::time::Instant;

use geoqm::selftest::{run_criterion, SelftestConfig};

fn main() -> ExitCode {
    let cfg = SelftestConfig::default();
    let mut failed = Vec::new();
    for id in 1..=11 {
        let start = Instant::now();
        let res = run_criterion(id, &cfg);
        let line = format!("{} ({:.1}s)", if res.passed() { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
        println!("criterion {id:>2} {line}: {}", res.title);
        println!("{res}");
        if !res.passed() {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: 11 of 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
