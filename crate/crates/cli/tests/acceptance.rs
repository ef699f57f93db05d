//! The full acceptance suite: one line per criterion, then every check.

use std::io::Write;

use csflab::verify::{criterion_ids, Suite};
use csflab_core::par::Exec;

#[test]
fn acceptance() {
    let outcome = Suite::new(7, Exec::default()).run(&criterion_ids());
    // written straight to stderr so that the lines show up without --nocapture
    let mut err = std::io::stderr().lock();
    for c in &outcome.criteria {
        writeln!(err, "{}", c.summary_line()).unwrap();
    }
    for c in &outcome.criteria {
        for k in &c.checks {
            let mark = if k.pass { "ok  " } else { "FAIL" };
            writeln!(
                err,
                "  [{:>2}] {mark} {} = {:.6e} (expected {})",
                c.id, k.label, k.measured, k.expected
            )
            .unwrap();
        }
    }
    let failed: Vec<u32> = outcome
        .criteria
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.id)
        .collect();
    assert_eq!(outcome.criteria.len(), 14);
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
    assert_eq!(outcome.exit_code, 0);
}
