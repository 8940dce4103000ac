use std::process::ExitCode;
use std::time::Instant;

use opforge::selftest::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for id in 1..=CRITERIA.len() {
        let start = Instant::now();
        let r = run_criterion(id, None);
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {verdict}: {} [{:.1}s] {}",
            r.id,
            r.name,
            start.elapsed().as_secs_f64(),
            r.detail
        );
        if !r.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
