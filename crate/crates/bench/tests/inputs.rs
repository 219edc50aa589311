use ief_bench::{edge_pair_weights, instance, SEED};

#[test]
fn inputs_are_seeded_and_well_formed() {
    for n in 3..=5 {
        let a = instance(n, SEED);
        assert_eq!(a, instance(n, SEED));
        assert_eq!(a.n_agents(), n);
        assert_eq!(a.n_items(), n);
        assert_eq!(edge_pair_weights(n, SEED), edge_pair_weights(n, SEED));
    }
    assert_ne!(edge_pair_weights(4, SEED), edge_pair_weights(4, SEED + 1));
}
