//! Acceptance suite: every criterion at its default tolerances and runtime
//! budget, one PASS/FAIL line each. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use necklab::cli::{run_criterion, SuiteConfig, CRITERIA};

fn budget(k: u8) -> Duration {
    let secs = match k {
        1 => 1,
        2 | 6 | 7 => 30,
        3 | 5 => 120,
        _ => 60,
    };
    Duration::from_secs(secs)
}

fn main() -> ExitCode {
    let cfg = SuiteConfig::default();
    let mut failed = 0;
    for k in CRITERIA {
        let start = Instant::now();
        let run = run_criterion(k, &cfg);
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget(k);
        let ok = run.passed() && in_time;
        let bad: Vec<String> = run
            .cases
            .iter()
            .filter(|c| !c.passed())
            .map(|c| match &c.error {
                Some(e) => format!("{} ({e})", c.name),
                None => format!("{} (measured {:e}, expected {:e} ± {:e})", c.name, c.measured, c.expected, c.tolerance),
            })
            .collect();
        println!(
            "{} criterion {k:>2}: {} cases in {:.2} s (budget {} s){}{}",
            if ok { "PASS" } else { "FAIL" },
            run.cases.len(),
            elapsed.as_secs_f64(),
            budget(k).as_secs(),
            if in_time { "" } else { ", over budget" },
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) },
        );
        if !ok {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all {} criteria pass", CRITERIA.count());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}
