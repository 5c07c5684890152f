//! Full acceptance battery, one line of output per criterion.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use grushin_core::suite::run_suite;

#[test]
fn acceptance_battery() {
    let report = run_suite();
    for c in &report.criteria {
        println!(
            "criterion {:>2} [{}] {} ({:.1} s): {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.runtime_seconds,
            c.details
        );
    }
    assert!(report.all_pass, "acceptance criteria failed, see lines above");
}
