mod support;

use support::oracle::check_oracle_equivalence;

#[test]
fn structural_tasks_match_brute_force_on_random_graphs() {
    let compared = check_oracle_equivalence(1000).unwrap_or_else(|e| panic!("{e}"));
    assert!(compared > 10_000, "only {compared} comparisons");
}
