//! Full verification suite, one line of output per criterion.

use fbexp_core::acceptance;

#[test]
fn all_criteria_pass() {
    let reports = acceptance::run(false);
    assert_eq!(reports.len(), 12);
    let mut failures = 0;
    for r in &reports {
        println!(
            "criterion {:>2} [{}] {} — {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failures += 1;
        }
    }
    assert_eq!(failures, 0, "{failures} criteria failed");
}
