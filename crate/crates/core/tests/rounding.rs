use eptas_core::rng::stream;
use eptas_core::rounding::{dependent_round, verify_degree_preservation, BipartiteFractional};
use proptest::prelude::*;

fn fixed_graph() -> BipartiteFractional {
    let mut edges = Vec::new();
    let mut rng = stream(99, &[]);
    for l in 0..5 {
        for r in 0..5 {
            edges.push((l, r, rand::Rng::gen_range(&mut rng, 0.05..0.95)));
        }
    }
    BipartiteFractional::new(5, 5, edges).unwrap()
}

#[test]
fn lower_tail_within_chernoff() {
    let g = fixed_graph();
    let mu: f64 = g.edges.iter().map(|e| e.2).sum();
    let eps = 0.5;
    let runs = 10_000;
    let low = (0..runs)
        .filter(|&s| (dependent_round(&g, &mut stream(s, &[])).chosen.len() as f64) <= (1.0 - eps) * mu)
        .count();
    let bound = 1.5 * (-mu * eps * eps / 2.0).exp();
    assert!((low as f64 / runs as f64) <= bound);
}

#[test]
fn empty_graph_rounds_to_nothing() {
    let g = BipartiteFractional::new(3, 3, vec![]).unwrap();
    let r = dependent_round(&g, &mut stream(0, &[]));
    assert!(r.chosen.is_empty());
    assert_eq!(r.rounds, 0);
}

proptest! {
    #[test]
    fn degrees_preserved_and_rounds_bounded(
        left in 1usize..8,
        right in 1usize..8,
        density in 0.2f64..1.0,
        seed in any::<u64>(),
    ) {
        let mut rng = stream(seed, &[]);
        let mut edges = Vec::new();
        for l in 0..left {
            for r in 0..right {
                if rand::Rng::gen::<f64>(&mut rng) < density {
                    edges.push((l, r, rand::Rng::gen::<f64>(&mut rng)));
                }
            }
        }
        let g = BipartiteFractional::new(left, right, edges).unwrap();
        let out = dependent_round(&g, &mut rng);
        prop_assert!(verify_degree_preservation(&g, &out));
        prop_assert!(out.rounds <= g.edges.len());
    }
}
