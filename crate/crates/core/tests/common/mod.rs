#![allow(dead_code)]

use hyperim::cascade::SeedSet;
use hyperim::graph::{Arc, Graph};
use hyperim::hypermodel::ProbVector;
use hyperim::seed;
use rand::seq::index::sample;
use rand::Rng;

/// Random directed graph on `n` nodes with up to `m` distinct arcs and
/// uniform features in [-1, 1]^d.
pub fn random_graph(rng: &mut seed::Rng, n: usize, m: usize, d: usize) -> Graph {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    let m = m.min(pairs.len());
    let mut picked = sample(rng, pairs.len(), m).into_vec();
    picked.sort_unstable();
    let arcs = picked
        .into_iter()
        .map(|i| Arc {
            src: pairs[i].0,
            dst: pairs[i].1,
            features: (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        })
        .collect();
    Graph::from_arcs(n, d, arcs).unwrap()
}

pub fn random_probs(rng: &mut seed::Rng, m: usize) -> ProbVector {
    ProbVector::new((0..m).map(|_| rng.random::<f64>()).collect()).unwrap()
}

pub fn random_set(rng: &mut seed::Rng, n: usize, k: usize) -> SeedSet {
    SeedSet::new(sample(rng, n, k).into_vec(), n).unwrap()
}
