//! All ten acceptance criteria at their stated sizes and tolerances.
//! Run with `cargo test -p sqnm-cli --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use sqnm_cli::criteria::{run_criterion, Suite};

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for id in 1..=10 {
        let out = run_criterion(id, Suite::Full, 0);
        println!("{}", out.line());
        for n in &out.notes {
            println!("    {n}");
        }
        if !out.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
