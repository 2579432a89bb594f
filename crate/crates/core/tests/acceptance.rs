//! Acceptance criteria at their pinned tolerances.
//!
//! Prints one line per check and one summary line per criterion. Lines under
//! `literal` are readings at bounds recorded as unattainable; they are
//! reported but do not gate the exit status.

use std::process::ExitCode;
use std::time::Instant;

use zlab_core::lab::bench::kernel_bench;
use zlab_core::lab::checks::CheckResult;
use zlab_core::lab::criteria::{conservation_and_a02, run_criterion, Criterion, Scale, CRITERIA};
use zlab_core::farfield::DEVIATION_TOLERANCE;

fn bench_criterion() -> Criterion {
    let mut c = Criterion { name: "kernel_bench", checks: Vec::new(), literal: Vec::new() };
    match kernel_bench(&[1, 10_000]) {
        Ok(rows) => {
            for r in rows {
                c.checks.push(CheckResult::at_most(
                    format!("kernel_bench/deviation_m{}", r.sources),
                    r.max_deviation,
                    DEVIATION_TOLERANCE,
                ));
                if r.sources == 10_000 {
                    c.literal.push(CheckResult::at_least("kernel_bench/speedup_m10000", r.speedup, 10.0));
                }
            }
        }
        Err(e) => c.checks.push(CheckResult::failed("kernel_bench/run", DEVIATION_TOLERANCE, e.to_string())),
    }
    c
}

fn report(c: &Criterion, seconds: f64) {
    for k in &c.checks {
        println!("{k}");
    }
    for k in &c.literal {
        println!("{k}  [literal]");
    }
    println!("== {:<20} {} ({seconds:.1}s)", c.name, if c.passed() { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str()));
    let mut failed = Vec::new();
    let mut record = |c: Criterion, seconds: f64| {
        report(&c, seconds);
        if !c.passed() {
            failed.push(c.name);
        }
    };
    if wanted("conservation") || wanted("a02_law") {
        let start = Instant::now();
        let (cons, law) = conservation_and_a02(Scale::Full);
        let t = start.elapsed().as_secs_f64();
        record(cons, t);
        record(law, 0.0);
    }
    for name in CRITERIA.iter().filter(|n| !matches!(**n, "conservation" | "a02_law")) {
        if !wanted(name) {
            continue;
        }
        let start = Instant::now();
        let c = run_criterion(name, Scale::Full).expect("listed criterion");
        record(c, start.elapsed().as_secs_f64());
    }
    if wanted("kernel_bench") {
        let start = Instant::now();
        let c = bench_criterion();
        record(c, start.elapsed().as_secs_f64());
    }
    if failed.is_empty() {
        println!("acceptance: all gated checks pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
