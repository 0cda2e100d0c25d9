//! Criteria 1 to 10 at their stated tolerances, one line each.

use nlh_core::harness::criteria::{run_all, Context};

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context { out: Some(dir.path().to_path_buf()), seed: 0 };
    let outcomes = run_all(&ctx, |o| println!("{}", o.line()));
    for o in &outcomes {
        for f in &o.files {
            assert!(f.exists(), "criterion {} lists missing file {}", o.id, f.display());
        }
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert_eq!(outcomes.len(), 10);
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
