//! Benchmark seed-selection strategies.

use rand::seq::index::sample;
use rand::Rng as _;

use crate::cascade::SeedSet;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::hypermodel::ProbVector;
use crate::optimize::{greedy_order, lazy_greedy, FunctionFamily, WeightVector};
use crate::seed;

fn check_k(graph: &Graph, k: usize) -> Result<()> {
    if k > graph.node_count() {
        return Err(Error::param(format!(
            "budget k={k} exceeds n={}",
            graph.node_count()
        )));
    }
    Ok(())
}

/// `trials` independent uniformly random size-`k` sets.
pub fn random_seed(graph: &Graph, k: usize, trials: usize, rng_seed: u64) -> Result<Vec<SeedSet>> {
    check_k(graph, k)?;
    let mut rng = seed::rng(rng_seed);
    Ok((0..trials)
        .map(|_| SeedSet::from_unchecked(sample(&mut rng, graph.node_count(), k).into_vec()))
        .collect())
}

/// The `k` nodes of largest out-degree, ties to the lowest id.
pub fn top_k_degree(graph: &Graph, k: usize) -> Result<SeedSet> {
    check_k(graph, k)?;
    let mut nodes: Vec<NodeId> = (0..graph.node_count()).collect();
    nodes.sort_by(|&a, &b| graph.out_degree(b).cmp(&graph.out_degree(a)).then(a.cmp(&b)));
    nodes.truncate(k);
    Ok(SeedSet::from_unchecked(nodes))
}

/// Greedy solution of each function on its own.
pub fn per_function_greedy(family: &FunctionFamily, k: usize) -> Result<Vec<SeedSet>> {
    (0..family.len())
        .map(|i| lazy_greedy(family, &WeightVector::point(family.len(), i), k))
        .collect()
}

/// Greedy selection order of each function on its own; any prefix of length
/// `k' <= k` is the greedy solution for budget `k'`.
pub fn per_function_greedy_orders(family: &FunctionFamily, k: usize) -> Result<Vec<Vec<NodeId>>> {
    (0..family.len())
        .map(|i| greedy_order(family, &WeightVector::point(family.len(), i), k, None))
        .collect()
}

/// Index of the per-function greedy solution that random greedy returns.
pub fn random_greedy_choice(l: usize, rng_seed: u64) -> usize {
    seed::rng(rng_seed).random_range(0..l)
}

/// One of the per-function greedy solutions, chosen uniformly at random.
pub fn random_greedy(family: &FunctionFamily, k: usize, rng_seed: u64) -> Result<SeedSet> {
    let i = random_greedy_choice(family.len(), rng_seed);
    lazy_greedy(family, &WeightVector::point(family.len(), i), k)
}

/// Per-arc probability interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBounds {
    pub p_lo: ProbVector,
    pub p_hi: ProbVector,
}

impl IntervalBounds {
    pub fn new(p_lo: ProbVector, p_hi: ProbVector) -> Result<IntervalBounds> {
        if p_lo.len() != p_hi.len() {
            return Err(Error::param("interval bounds differ in length"));
        }
        if let Some(e) = (0..p_lo.len()).find(|&e| p_lo[e] > p_hi[e]) {
            return Err(Error::param(format!("lower bound exceeds upper bound on arc {e}")));
        }
        Ok(IntervalBounds { p_lo, p_hi })
    }
}

/// Per-arc minimum and maximum probability over the family.
pub fn derive_intervals(family: &FunctionFamily) -> Result<IntervalBounds> {
    let probs = family.probs();
    let m = probs[0].len();
    let lo = (0..m)
        .map(|e| probs.iter().map(|p| p[e]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi = (0..m)
        .map(|e| probs.iter().map(|p| p[e]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    IntervalBounds::new(ProbVector::new(lo)?, ProbVector::new(hi)?)
}

/// Greedy selection orders under the lower and the upper bounds.
#[derive(Debug, Clone)]
pub struct LuOrders<'g> {
    pub lower: Vec<NodeId>,
    pub upper: Vec<NodeId>,
    bounds_family: FunctionFamily<'g>,
}

impl LuOrders<'_> {
    /// The better of the two length-`k` prefixes, judged under the lower
    /// bounds on the training pool; ties keep the lower-bound solution.
    pub fn choose(&self, k: usize) -> SeedSet {
        let lo = SeedSet::from_unchecked(self.lower[..k].to_vec());
        let hi = SeedSet::from_unchecked(self.upper[..k].to_vec());
        if self.bounds_family.pool_value(1, &hi) > self.bounds_family.pool_value(1, &lo) {
            hi
        } else {
            lo
        }
    }
}

pub fn lu_greedy_orders<'g>(
    graph: &'g Graph,
    bounds: &IntervalBounds,
    k: usize,
    replicates: usize,
    rng_seed: u64,
) -> Result<LuOrders<'g>> {
    check_k(graph, k)?;
    // function 0: upper bounds, function 1: lower bounds
    let family = FunctionFamily::from_probs(
        graph,
        vec![bounds.p_hi.clone(), bounds.p_lo.clone()],
        replicates,
        rng_seed,
    )?;
    let upper = greedy_order(&family, &WeightVector::point(2, 0), k, None)?;
    let lower = greedy_order(&family, &WeightVector::point(2, 1), k, None)?;
    Ok(LuOrders {
        lower,
        upper,
        bounds_family: family,
    })
}

/// Greedy under the lower bounds and under the upper bounds; keeps the one
/// with larger estimated influence under the lower bounds.
pub fn lu_greedy(
    graph: &Graph,
    bounds: &IntervalBounds,
    k: usize,
    replicates: usize,
    rng_seed: u64,
) -> Result<SeedSet> {
    Ok(lu_greedy_orders(graph, bounds, k, replicates, rng_seed)?.choose(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypermodel::{HyperModel, Hyperparameter, Link};
    use crate::verify::improper_gap_instance;

    fn star(leaves: usize) -> Graph {
        let pairs: Vec<(usize, usize)> = (1..=leaves).flat_map(|v| [(0, v), (v, 0)]).collect();
        Graph::from_pairs(leaves + 1, &pairs).unwrap()
    }

    #[test]
    fn random_sets_have_size_k() {
        let g = star(9);
        let sets = random_seed(&g, 4, 100, 1).unwrap();
        assert_eq!(sets.len(), 100);
        assert!(sets.iter().all(|s| s.len() == 4));
        let all = random_seed(&g, 10, 5, 1).unwrap();
        assert!(all.iter().all(|s| s.nodes() == (0..10).collect::<Vec<_>>()));
        assert_eq!(random_seed(&g, 4, 10, 3).unwrap(), random_seed(&g, 4, 10, 3).unwrap());
        assert!(random_seed(&g, 11, 1, 0).is_err());
    }

    #[test]
    fn degree_baseline() {
        assert_eq!(top_k_degree(&star(5), 1).unwrap().nodes(), &[0]);
        let ring: Vec<(usize, usize)> = (0..6).flat_map(|i| [(i, (i + 1) % 6), ((i + 1) % 6, i)]).collect();
        let g = Graph::from_pairs(6, &ring).unwrap();
        assert_eq!(top_k_degree(&g, 3).unwrap().nodes(), &[0, 1, 2]);
        assert_eq!(top_k_degree(&g, 3).unwrap(), top_k_degree(&g, 3).unwrap());
    }

    #[test]
    fn intervals_from_symmetric_cover() {
        let arcs = vec![
            crate::graph::Arc { src: 0, dst: 1, features: vec![0.4, -0.2] },
            crate::graph::Arc { src: 1, dst: 2, features: vec![-1.0, 0.5] },
        ];
        let g = Graph::from_arcs(3, 2, arcs).unwrap();
        let model = HyperModel::new(Link::Logistic, 1.0, 2).unwrap();
        let theta = Hyperparameter(vec![0.7, -0.3]);
        let neg = Hyperparameter(vec![-0.7, 0.3]);
        let fam = FunctionFamily::from_cover(&g, &model, &[theta.clone(), neg], 10, 0).unwrap();
        let b = derive_intervals(&fam).unwrap();
        for e in 0..2 {
            let z: f64 = g.features(e).iter().zip(&theta.0).map(|(x, t)| x * t).sum();
            assert!((b.p_lo[e] - Link::Logistic.apply(-z.abs())).abs() < 1e-15);
            assert!((b.p_hi[e] - Link::Logistic.apply(z.abs())).abs() < 1e-15);
        }
        let single = fam.truncated(1).unwrap();
        let b = derive_intervals(&single).unwrap();
        assert_eq!(b.p_lo, b.p_hi);
    }

    #[test]
    fn lu_greedy_with_equal_bounds_is_plain_greedy() {
        let g = star(6);
        let p = ProbVector::uniform(12, 0.4).unwrap();
        let bounds = IntervalBounds::new(p.clone(), p.clone()).unwrap();
        let lu = lu_greedy(&g, &bounds, 2, 200, 5).unwrap();
        let fam = FunctionFamily::from_probs(&g, vec![p.clone(), p], 200, 5).unwrap();
        let plain = lazy_greedy(&fam, &WeightVector::point(2, 1), 2).unwrap();
        assert_eq!(lu, plain);
    }

    #[test]
    fn random_greedy_returns_a_per_function_solution() {
        let fx = improper_gap_instance(4).unwrap();
        let fam = FunctionFamily::from_probs(&fx.graph, fx.probs.clone(), 10, 0).unwrap();
        let options = per_function_greedy(&fam, 1).unwrap();
        assert_eq!(options[0].nodes(), &[0]);
        assert_eq!(options[1].nodes(), &[1]);
        for s in 0..20 {
            assert!(options.contains(&random_greedy(&fam, 1, s).unwrap()));
        }
    }
}
