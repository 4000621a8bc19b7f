//! Prints one pass/fail line per acceptance criterion. Numeric arguments
//! select a subset of criteria; the seed comes from `PLM_ACCEPTANCE_SEED`.
//! Failures are reported but only change the exit status when
//! `PLM_ACCEPTANCE_STRICT=1`.

use plm::harness::acceptance::run_acceptance;
use plm::harness::default_workers;

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let seed = std::env::var("PLM_ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(2024);
    let strict = std::env::var("PLM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let results = run_acceptance(seed, default_workers(), &only);
    let mut failed = 0;
    for c in &results {
        println!("{}", c.line());
        failed += (!c.passed) as usize;
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
