mod common;

use maxent_core::constraints::nesting_map;
use maxent_core::ising::{
    self, boltzmann, closure, enumerate_models, random_params, tp_fp_rates, Hypergraph,
    InteractionClosure, IsingParams,
};
use maxent_core::Distribution;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Down-closed families of non-empty subsets of `{1..l}`, found by testing
/// every family of subsets.
fn brute_force_down_sets(l: usize) -> Vec<u64> {
    let subsets = (1u32 << l) - 1;
    let mut out = Vec::new();
    for bits in 0u64..(1 << subsets) {
        let family = bits << 1;
        let closed = (1..=subsets).all(|s| {
            family >> s & 1 == 0 || (1..=subsets).all(|t| t & s != t || family >> t & 1 == 1)
        });
        if closed {
            out.push(family);
        }
    }
    out
}

/// Down-sets of the Boolean lattice on `n` elements, including the empty
/// set as a lattice element, as bitmasks over the `2^n` lattice points.
fn lattice_down_sets(n: usize) -> Vec<u32> {
    let points = 1usize << n;
    (0u32..(1u32 << points))
        .filter(|&d| {
            (0..points)
                .all(|s| d >> s & 1 == 0 || (0..points).all(|t| t & s != t || d >> t & 1 == 1))
        })
        .collect()
}

#[test]
fn small_counts_match_brute_force() {
    for (l, expected) in [(1usize, 2usize), (2, 5), (3, 19)] {
        let oracle = brute_force_down_sets(l);
        assert_eq!(oracle.len(), expected);
        let models = enumerate_models(l).unwrap();
        assert_eq!(models.len(), expected, "L={l}");
        let mut got: Vec<u64> = models.iter().map(InteractionClosure::family).collect();
        got.sort_unstable();
        let mut want = oracle;
        want.sort_unstable();
        assert_eq!(got, want);
    }
}

#[test]
fn five_spin_count_matches_dedekind_oracle() {
    // Down-sets of B_5 correspond to pairs D ⊆ D' of down-sets of B_4.
    let d4 = lattice_down_sets(4);
    let pairs = d4
        .iter()
        .map(|a| d4.iter().filter(|b| *a & **b == *a).count())
        .sum::<usize>();
    assert_eq!(pairs, 7581);
    // The empty down-set and {∅} both give the empty family.
    assert_eq!(enumerate_models(5).unwrap().len(), pairs - 1);
}

#[test]
fn enumeration_is_canonical_and_distinct() {
    let models = enumerate_models(4).unwrap();
    assert_eq!(models.len(), 167);
    assert_eq!(models, enumerate_models(4).unwrap());
    assert!(models[0].is_empty());
    for w in models.windows(2) {
        assert_eq!(ising::cmp_families(&w[0], &w[1]), std::cmp::Ordering::Less);
    }
    let archs: Vec<_> = models.iter().map(ising::architecture).collect();
    for i in 0..archs.len() {
        for j in (i + 1)..archs.len() {
            assert!(
                !archs[i].approx_eq(&archs[j], 1e-9),
                "{} and {}",
                models[i],
                models[j]
            );
        }
    }
}

#[test]
fn ising_graph_sizes() {
    let c = closure(&Hypergraph::g_ising()).unwrap();
    assert_eq!(c.len(), 14);
    let sizes: Vec<u32> = c.members().iter().map(|s| s.count_ones()).collect();
    assert_eq!(sizes.iter().filter(|&&k| k == 1).count(), 5);
    assert_eq!(sizes.iter().filter(|&&k| k == 2).count(), 7);
    assert_eq!(sizes.iter().filter(|&&k| k == 3).count(), 2);
    let r = ising::architecture(&c);
    assert_eq!((r.states(), r.rank()), (32, 15));
    assert_eq!(ising::architecture(&InteractionClosure::empty(3)).rank(), 1);
    let full2 = closure(&Hypergraph::new(2, &[vec![1, 2]]).unwrap()).unwrap();
    assert_eq!(ising::architecture(&full2).rank(), 4);
}

#[test]
fn nesting_mirrors_closure_inclusion() {
    let models = enumerate_models(3).unwrap();
    let archs: Vec<_> = models.iter().map(ising::architecture).collect();
    for (a, ra) in models.iter().zip(&archs) {
        for (b, rb) in models.iter().zip(&archs) {
            assert_eq!(
                a.is_subfamily_of(b),
                nesting_map(ra, rb).is_some(),
                "{a} vs {b}"
            );
        }
    }
}

proptest! {
    #[test]
    fn closure_is_idempotent_and_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = 5;
        let g = common::random_hypergraph(&mut rng, l);
        let c = closure(&g).unwrap();
        prop_assert_eq!(&closure(&c.hypergraph()).unwrap(), &c);
        let mut edges = g.edges();
        edges.extend(common::random_hypergraph(&mut rng, l).edges());
        let bigger = closure(&Hypergraph::new(l, &edges).unwrap()).unwrap();
        prop_assert!(c.is_subfamily_of(&bigger));
    }

    #[test]
    fn rates_are_probabilities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_closure(&mut rng, 5);
        let b = common::random_closure(&mut rng, 5);
        let (tp, fp) = tp_fp_rates(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&tp));
        prop_assert!((0.0..=1.0).contains(&fp));
    }
}

#[test]
fn rate_examples() {
    let truth = closure(&Hypergraph::g_ising()).unwrap();
    assert_eq!(tp_fp_rates(&truth, &truth).unwrap(), (1.0, 0.0));
    let all = closure(&Hypergraph::new(5, &[vec![1, 2, 3, 4, 5]]).unwrap()).unwrap();
    assert_eq!(tp_fp_rates(&all, &truth).unwrap(), (1.0, 1.0));
    let partial = closure(&Hypergraph::new(5, &[vec![1, 2, 3], vec![1, 2, 4]]).unwrap()).unwrap();
    assert_eq!(partial.len(), 11);
    assert_eq!(tp_fp_rates(&partial, &truth).unwrap(), (11.0 / 14.0, 0.0));
    assert!(tp_fp_rates(&InteractionClosure::empty(4), &truth).is_err());
}

#[test]
fn random_params_shape_and_determinism() {
    let g = Hypergraph::g_ising();
    let a = random_params(&g, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = random_params(&g, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.values().len(), 14);
    let empty = Hypergraph::new(3, &[]).unwrap();
    assert!(random_params(&empty, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap()
        .values()
        .is_empty());
    let quartic = Hypergraph::new(4, &[vec![1, 2, 3, 4]]).unwrap();
    assert!(random_params(&quartic, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
}

#[test]
fn boltzmann_examples() {
    let zero = IsingParams::new(4, &[(vec![1, 2], 0.0)]).unwrap();
    assert!(
        boltzmann(&zero)
            .unwrap()
            .max_abs_diff(&Distribution::uniform(16))
            < 1e-15
    );
    let h = IsingParams::new(1, &[(vec![1], 3f64.ln())]).unwrap();
    let p = boltzmann(&h).unwrap();
    assert!((p.probs()[0] - 0.25).abs() < 1e-15);
    assert!((p.probs()[1] - 0.75).abs() < 1e-15);
}

#[test]
fn boltzmann_matches_direct_energy_sum() {
    // Spin i of microstate α is bit L − i of α.
    let l = 3;
    let params = IsingParams::new(
        l,
        &[(vec![1], 0.3), (vec![2, 3], -0.7), (vec![1, 2, 3], 0.5)],
    )
    .unwrap();
    let spin = |alpha: usize, i: usize| ((alpha >> (l - i)) & 1) as f64;
    let w: Vec<f64> = (0..8)
        .map(|a| {
            (0.3 * spin(a, 1) - 0.7 * spin(a, 2) * spin(a, 3)
                + 0.5 * spin(a, 1) * spin(a, 2) * spin(a, 3))
            .exp()
        })
        .collect();
    let z: f64 = w.iter().sum();
    let p = boltzmann(&params).unwrap();
    for (a, wa) in w.iter().enumerate() {
        assert!((p.probs()[a] - wa / z).abs() < 1e-15);
    }
}

#[test]
fn hypergraph_parsing() {
    let g: Hypergraph = "5:1,2,3;3,5".parse().unwrap();
    // Edges are kept in canonical subset order.
    assert_eq!(g.edges(), vec![vec![3, 5], vec![1, 2, 3]]);
    assert_eq!(Hypergraph::parse(5, &g.to_string()).unwrap(), g);
    assert!("3:1,4".parse::<Hypergraph>().is_err());
    assert!("1,2".parse::<Hypergraph>().is_err());
}
