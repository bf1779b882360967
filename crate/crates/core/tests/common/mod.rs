#![allow(dead_code)]

use maxent_core::constraints::{to_architecture, ArchitectureMatrix, CoefficientMatrix};
use maxent_core::ising::{self, Hypergraph, InteractionClosure};
use maxent_core::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

/// Strictly positive distribution with log-normal weights.
pub fn random_positive<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Distribution {
    let w: Vec<f64> = (0..n)
        .map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).exp())
        .collect();
    Distribution::normalize(w).unwrap()
}

/// Random hypergraph with up to four hyperedges of at most three spins.
pub fn random_hypergraph<R: Rng>(rng: &mut R, l: usize) -> Hypergraph {
    let k = rng.random_range(1..=4);
    let edges: Vec<Vec<usize>> = (0..k)
        .map(|_| {
            let size = rng.random_range(1..=l.min(3));
            let mut e: Vec<usize> = Vec::new();
            while e.len() < size {
                let i = rng.random_range(1..=l);
                if !e.contains(&i) {
                    e.push(i);
                }
            }
            e
        })
        .collect();
    Hypergraph::new(l, &edges).unwrap()
}

pub fn random_closure<R: Rng>(rng: &mut R, l: usize) -> InteractionClosure {
    ising::closure(&random_hypergraph(rng, l)).unwrap()
}

/// Binary marginal system on `2..=max_spins` spins, with moments of a random
/// strictly positive distribution.
pub fn random_marginal_system<R: Rng>(
    rng: &mut R,
    max_spins: usize,
) -> (CoefficientMatrix, ArchitectureMatrix, Distribution) {
    let l = rng.random_range(2..=max_spins);
    let c = random_closure(rng, l);
    let f = random_positive(rng, 1 << l, 1.0);
    let coeffs = ising::to_coefficients(&c).with_moments_of(&f).unwrap();
    let arch = to_architecture(&coeffs).unwrap();
    (coeffs, arch, f)
}
