//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p streetsim-core --test acceptance`. Pass criterion
//! numbers to run a subset, e.g. `-- 3 6`.

mod criteria;
mod oracles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Check = fn() -> Result<String, String>;

const CRITERIA: [(u32, &str, Check); 10] = [
    (1, "determinism", criteria::determinism),
    (2, "waypoint geometry", criteria::waypoint_geometry),
    (3, "a* matches dijkstra", criteria::astar_equivalence),
    (4, "signal compliance", criteria::signal_compliance),
    (5, "geometric soundness", criteria::geometric_soundness),
    (6, "metric formulas", criteria::metric_formulas),
    (7, "closed-loop consistency", criteria::closed_loop),
    (8, "desk-scale calibration", criteria::calibration),
    (9, "dataset scale", criteria::dataset_scale),
    (10, "throughput", criteria::throughput),
];

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
