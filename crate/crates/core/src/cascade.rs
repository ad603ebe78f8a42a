//! Independent Cascade simulation and influence estimation.
//!
//! The influence of a seed set is the expected number of nodes reachable from
//! it in a random live-edge subgraph, where each arc is kept independently
//! with its probability. Seeds count toward their own influence.

use rayon::prelude::*;

use crate::bits;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::hypermodel::ProbVector;
use crate::reach::{ReachTable, Scratch};
use crate::seed;
use rand::Rng as _;

/// A sorted, duplicate-free set of nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SeedSet(Vec<NodeId>);

impl SeedSet {
    pub fn new(mut nodes: Vec<NodeId>, n: usize) -> Result<SeedSet> {
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("seed set contains duplicate nodes"));
        }
        if let Some(&v) = nodes.last() {
            if v >= n {
                return Err(Error::param(format!("seed node {v} >= n={n}")));
            }
        }
        Ok(SeedSet(nodes))
    }

    /// Builds from nodes already known to be in range; sorts and deduplicates.
    pub(crate) fn from_unchecked(mut nodes: Vec<NodeId>) -> SeedSet {
        nodes.sort_unstable();
        nodes.dedup();
        SeedSet(nodes)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn union(&self, other: &SeedSet) -> SeedSet {
        let mut all = self.0.clone();
        all.extend_from_slice(&other.0);
        SeedSet::from_unchecked(all)
    }
}

impl std::fmt::Display for SeedSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Alive/dead flag per arc of one live-edge realization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiveEdgeSample {
    alive: Vec<u64>,
    m: usize,
}

impl LiveEdgeSample {
    pub fn draw(p: &ProbVector, rng: &mut seed::Rng) -> LiveEdgeSample {
        let m = p.len();
        let mut alive = vec![0u64; bits::words_for(m)];
        for e in 0..m {
            if rng.random::<f64>() < p[e] {
                bits::set(&mut alive, e);
            }
        }
        LiveEdgeSample { alive, m }
    }

    #[inline]
    pub fn is_alive(&self, e: usize) -> bool {
        bits::get(&self.alive, e)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn alive_count(&self) -> usize {
        bits::count(&self.alive) as usize
    }
}

/// A fixed collection of live-edge samples drawn from one probability vector.
#[derive(Debug, Clone)]
pub struct SamplePool {
    samples: Vec<LiveEdgeSample>,
    prob: ProbVector,
    rng_seed: u64,
}

impl SamplePool {
    pub fn samples(&self) -> &[LiveEdgeSample] {
        &self.samples
    }

    pub fn prob(&self) -> &ProbVector {
        &self.prob
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicates: usize,
}

impl InfluenceEstimate {
    /// Mean and standard error (sample standard deviation over √R).
    pub fn from_counts<I: IntoIterator<Item = f64>>(counts: I) -> InfluenceEstimate {
        let (mut r, mut sum, mut sumsq) = (0usize, 0.0, 0.0);
        for x in counts {
            r += 1;
            sum += x;
            sumsq += x * x;
        }
        if r == 0 {
            return InfluenceEstimate {
                mean: 0.0,
                stderr: 0.0,
                replicates: 0,
            };
        }
        let mean = sum / r as f64;
        let stderr = if r > 1 {
            let var = ((sumsq - sum * mean) / (r - 1) as f64).max(0.0);
            (var / r as f64).sqrt()
        } else {
            0.0
        };
        InfluenceEstimate {
            mean,
            stderr,
            replicates: r,
        }
    }
}

fn check_inputs(graph: &Graph, p: &ProbVector, s: &SeedSet) -> Result<()> {
    p.check_graph(graph)?;
    if let Some(&v) = s.nodes().last() {
        if v >= graph.node_count() {
            return Err(Error::param(format!(
                "seed node {v} >= n={}",
                graph.node_count()
            )));
        }
    }
    Ok(())
}

/// One stochastic IC run; returns the activated nodes in increasing order.
pub fn simulate_cascade(
    graph: &Graph,
    p: &ProbVector,
    s: &SeedSet,
    rng: &mut seed::Rng,
) -> Result<Vec<NodeId>> {
    check_inputs(graph, p, s)?;
    let mut active = vec![false; graph.node_count()];
    let mut frontier: Vec<NodeId> = s.nodes().to_vec();
    for &v in &frontier {
        active[v] = true;
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for &e in graph.out_arcs(u) {
                let e = e as usize;
                let v = graph.dst(e);
                if !active[v] && rng.random::<f64>() < p[e] {
                    active[v] = true;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    Ok((0..graph.node_count()).filter(|&v| active[v]).collect())
}

/// Largest number of uncertain arcs that exact enumeration will expand.
pub const EXACT_ARC_LIMIT: usize = 20;

/// Arcs that matter for the exact influence of `sets`: those leaving nodes
/// reachable from some set through arcs with positive probability. Returns
/// (certain arcs with p = 1, uncertain arcs with 0 < p < 1).
fn relevant_arcs(graph: &Graph, p: &ProbVector, sets: &[&SeedSet]) -> (Vec<usize>, Vec<usize>) {
    let mut seen = vec![false; graph.node_count()];
    let mut stack = Vec::new();
    for s in sets {
        for &v in s.nodes() {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    let mut certain = Vec::new();
    let mut uncertain = Vec::new();
    while let Some(u) = stack.pop() {
        for &e in graph.out_arcs(u) {
            let e = e as usize;
            if p[e] <= 0.0 {
                continue;
            }
            if p[e] >= 1.0 {
                certain.push(e);
            } else {
                uncertain.push(e);
            }
            let v = graph.dst(e);
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    certain.sort_unstable();
    uncertain.sort_unstable();
    (certain, uncertain)
}

/// Exact influence of each set by enumerating every live-edge world over the
/// relevant uncertain arcs.
///
/// Arcs with probability 0 or 1 and arcs unreachable from the sets are
/// marginalized out first; the capacity limit applies to what remains.
pub fn exact_influence_many(graph: &Graph, p: &ProbVector, sets: &[SeedSet]) -> Result<Vec<f64>> {
    for s in sets {
        check_inputs(graph, p, s)?;
    }
    let refs: Vec<&SeedSet> = sets.iter().collect();
    let (certain, uncertain) = relevant_arcs(graph, p, &refs);
    if uncertain.len() > EXACT_ARC_LIMIT {
        return Err(Error::capacity(format!(
            "exact influence needs 2^{} live-edge worlds (limit 2^{EXACT_ARC_LIMIT}); \
             use a sampled estimate instead",
            uncertain.len()
        )));
    }

    let m = graph.arc_count();
    let mut alive = vec![0u64; bits::words_for(m)];
    for &e in &certain {
        bits::set(&mut alive, e);
    }
    let mut table = ReachTable::default();
    let mut scratch = Scratch::default();
    let mut buf = vec![0u64; bits::words_for(graph.node_count())];
    let mut totals = vec![0.0; sets.len()];
    for mask in 0u64..(1u64 << uncertain.len()) {
        let mut weight = 1.0;
        for (i, &e) in uncertain.iter().enumerate() {
            if mask >> i & 1 == 1 {
                bits::set(&mut alive, e);
                weight *= p[e];
            } else {
                alive[e >> 6] &= !(1 << (e & 63));
                weight *= 1.0 - p[e];
            }
        }
        table.build_into(graph, |e| bits::get(&alive, e), &mut scratch);
        for (t, s) in totals.iter_mut().zip(sets) {
            *t += weight * table.count(s.nodes(), &mut buf) as f64;
        }
    }
    Ok(totals)
}

/// Exact expected influence of `s`.
pub fn exact_influence(graph: &Graph, p: &ProbVector, s: &SeedSet) -> Result<f64> {
    Ok(exact_influence_many(graph, p, std::slice::from_ref(s))?[0])
}

/// Draws `r` live-edge samples; sample `i` uses its own stream of `rng_seed`.
pub fn build_pool(graph: &Graph, p: &ProbVector, r: usize, rng_seed: u64) -> Result<SamplePool> {
    p.check_graph(graph)?;
    if r == 0 {
        return Err(Error::param("pool size must be at least 1"));
    }
    let samples = (0..r)
        .into_par_iter()
        .map(|i| LiveEdgeSample::draw(p, &mut seed::stream_rng(rng_seed, i as u64)))
        .collect();
    Ok(SamplePool {
        samples,
        prob: p.clone(),
        rng_seed,
    })
}

fn reached(graph: &Graph, sample: &LiveEdgeSample, s: &SeedSet, seen: &mut [bool], stack: &mut Vec<NodeId>) -> usize {
    seen.fill(false);
    stack.clear();
    let mut count = 0;
    for &v in s.nodes() {
        seen[v] = true;
        stack.push(v);
        count += 1;
    }
    while let Some(u) = stack.pop() {
        for &e in graph.out_arcs(u) {
            let e = e as usize;
            let v = graph.dst(e);
            if !seen[v] && sample.is_alive(e) {
                seen[v] = true;
                stack.push(v);
                count += 1;
            }
        }
    }
    count
}

/// Sample-average influence of `s` on a fixed pool, by graph search per sample.
pub fn pool_influence(graph: &Graph, pool: &SamplePool, s: &SeedSet) -> Result<InfluenceEstimate> {
    check_inputs(graph, &pool.prob, s)?;
    let counts: Vec<usize> = pool
        .samples
        .par_iter()
        .map_init(
            || (vec![false; graph.node_count()], Vec::new()),
            |(seen, stack), sample| reached(graph, sample, s, seen, stack),
        )
        .collect();
    Ok(InfluenceEstimate::from_counts(counts.into_iter().map(|c| c as f64)))
}

pub fn estimate_influence(
    graph: &Graph,
    p: &ProbVector,
    s: &SeedSet,
    r: usize,
    rng_seed: u64,
) -> Result<InfluenceEstimate> {
    let pool = build_pool(graph, p, r, rng_seed)?;
    pool_influence(graph, &pool, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Graph {
        Graph::from_pairs(3, &[(0, 1), (1, 2)]).unwrap()
    }

    fn set(nodes: &[NodeId]) -> SeedSet {
        SeedSet::from_unchecked(nodes.to_vec())
    }

    #[test]
    fn seed_set_validation() {
        assert!(SeedSet::new(vec![2, 1, 2], 5).is_err());
        assert!(SeedSet::new(vec![5], 5).is_err());
        assert_eq!(SeedSet::new(vec![3, 1], 5).unwrap().nodes(), &[1, 3]);
    }

    #[test]
    fn exact_spot_values() {
        let g = Graph::from_pairs(4, &[]).unwrap();
        let p = ProbVector::new(vec![]).unwrap();
        assert_eq!(exact_influence(&g, &p, &set(&[0, 2])).unwrap(), 2.0);

        let g = Graph::from_pairs(2, &[(0, 1)]).unwrap();
        for q in [0.0, 0.3, 1.0] {
            let p = ProbVector::new(vec![q]).unwrap();
            assert!((exact_influence(&g, &p, &set(&[0])).unwrap() - (1.0 + q)).abs() < 1e-12);
        }

        // worlds: {} -> 1, {a} -> 2, {b} -> 1, {a,b} -> 3, each 1/4
        let p = ProbVector::uniform(2, 0.5).unwrap();
        assert!((exact_influence(&chain(), &p, &set(&[0])).unwrap() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn exact_capacity_counts_only_relevant_uncertain_arcs() {
        // 21-arc star out of node 0: too many worlds
        let pairs: Vec<(usize, usize)> = (1..=21).map(|v| (0, v)).collect();
        let g = Graph::from_pairs(22, &pairs).unwrap();
        let p = ProbVector::uniform(21, 0.5).unwrap();
        let err = exact_influence(&g, &p, &set(&[0])).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        assert!(err.to_string().contains("sampled"));
        // a leaf reaches none of them
        assert_eq!(exact_influence(&g, &p, &set(&[3])).unwrap(), 1.0);
        // deterministic arcs are free
        let p1 = ProbVector::uniform(21, 1.0).unwrap();
        assert_eq!(exact_influence(&g, &p1, &set(&[0])).unwrap(), 22.0);
    }

    #[test]
    fn trivial_cascades() {
        let g = Graph::from_pairs(4, &[(0, 1), (1, 2), (3, 0)]).unwrap();
        let mut rng = seed::rng(3);
        let zero = ProbVector::uniform(3, 0.0).unwrap();
        let one = ProbVector::uniform(3, 1.0).unwrap();
        for _ in 0..20 {
            assert_eq!(simulate_cascade(&g, &zero, &set(&[1]), &mut rng).unwrap(), vec![1]);
            assert_eq!(simulate_cascade(&g, &one, &set(&[1]), &mut rng).unwrap(), vec![1, 2]);
            assert_eq!(
                simulate_cascade(&g, &one, &set(&[3]), &mut rng).unwrap(),
                vec![0, 1, 2, 3]
            );
        }
    }

    #[test]
    fn single_arc_cascade_is_a_fair_coin() {
        let g = Graph::from_pairs(2, &[(0, 1)]).unwrap();
        let p = ProbVector::uniform(1, 0.5).unwrap();
        let mut rng = seed::rng(8);
        let runs = 4000;
        let both = (0..runs)
            .filter(|_| simulate_cascade(&g, &p, &set(&[0]), &mut rng).unwrap().len() == 2)
            .count() as f64;
        let expected = runs as f64 / 2.0;
        let chi2 = 2.0 * (both - expected).powi(2) / expected;
        // χ²(1) 99.9% quantile
        assert!(chi2 < 10.83, "chi2={chi2}");
    }

    #[test]
    fn pools_at_extreme_probabilities() {
        let g = chain();
        let all = build_pool(&g, &ProbVector::uniform(2, 1.0).unwrap(), 50, 1).unwrap();
        assert!(all.samples().iter().all(|s| s.alive_count() == 2));
        let none = build_pool(&g, &ProbVector::uniform(2, 0.0).unwrap(), 50, 1).unwrap();
        assert!(none.samples().iter().all(|s| s.alive_count() == 0));
        assert!(build_pool(&g, &ProbVector::uniform(2, 0.5).unwrap(), 0, 1).is_err());
    }

    #[test]
    fn pool_edge_frequencies_concentrate() {
        let pairs: Vec<(usize, usize)> = (0..6).map(|i| (i, i + 1)).collect();
        let g = Graph::from_pairs(7, &pairs).unwrap();
        let probs = vec![0.05, 0.2, 0.5, 0.7, 0.9, 0.99];
        let p = ProbVector::new(probs.clone()).unwrap();
        let r = 10_000;
        let pool = build_pool(&g, &p, r, 77).unwrap();
        for (e, &q) in probs.iter().enumerate() {
            let hits = pool.samples().iter().filter(|s| s.is_alive(e)).count() as f64;
            let sd = (r as f64 * q * (1.0 - q)).sqrt();
            assert!((hits - r as f64 * q).abs() <= 4.0 * sd, "arc {e}");
        }
    }

    #[test]
    fn pool_is_deterministic() {
        let g = chain();
        let p = ProbVector::uniform(2, 0.4).unwrap();
        let a = build_pool(&g, &p, 100, 5).unwrap();
        let b = build_pool(&g, &p, 100, 5).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn pool_influence_examples() {
        let g = chain();
        let p = ProbVector::uniform(2, 0.5).unwrap();
        let pool = build_pool(&g, &p, 100_000, 11).unwrap();
        let all = pool_influence(&g, &pool, &set(&[0, 1, 2])).unwrap();
        assert_eq!((all.mean, all.stderr), (3.0, 0.0));
        let est = pool_influence(&g, &pool, &set(&[0])).unwrap();
        assert!((est.mean - 1.75).abs() <= 3.0 * est.stderr, "{est:?}");
        let more = pool_influence(&g, &pool, &set(&[0, 2])).unwrap();
        assert!(more.mean >= est.mean);

        let direct = estimate_influence(&g, &p, &set(&[0]), 100_000, 11).unwrap();
        assert_eq!(direct, est);
    }

    #[test]
    fn estimate_from_counts() {
        let est = InfluenceEstimate::from_counts([1.0, 3.0]);
        assert_eq!(est.mean, 2.0);
        assert!((est.stderr - 1.0).abs() < 1e-12);
        assert_eq!(InfluenceEstimate::from_counts([4.0]).stderr, 0.0);
    }
}
