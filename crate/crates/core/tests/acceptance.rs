//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use qrn_core::suite;

fn main() -> ExitCode {
    let seed = std::env::var("QRN_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(suite::DEFAULT_SEED);
    let start = Instant::now();
    let first = suite::run_all(seed);
    let mut failures = 0;
    for o in &first {
        let ok = o.passed();
        failures += usize::from(!ok);
        println!(
            "{} criterion {:>2} {:<34} worst margin {:>+.6e}  {:>7.3}s / {:>2}s",
            if ok { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.worst_margin(),
            o.elapsed.as_secs_f64(),
            o.budget.as_secs()
        );
        for r in o.records.iter().filter(|r| !r.passed) {
            println!("       {} margin {:e} {}", r.id, r.margin, r.detail);
        }
        if !o.within_budget() {
            println!("       runtime budget exceeded");
        }
    }
    let second = suite::run_all(seed);
    let det = match (suite::body(&first), suite::body(&second)) {
        (Ok(a), Ok(b)) => suite::determinism_record(&a, &b),
        (Err(e), _) | (_, Err(e)) => {
            qrn_core::CheckRecord::new("c13/determinism", f64::NAN, false).with_detail(e.to_string())
        }
    };
    failures += usize::from(!det.passed);
    println!(
        "{} criterion 13 {:<34} {}",
        if det.passed { "PASS" } else { "FAIL" },
        "determinism of report bodies",
        det.detail
    );
    println!("acceptance: {} of 13 criteria passed in {:.1}s", 13 - failures, start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
