//! Robust optimization over a finite family of influence functions.
//!
//! [`hiro`] runs multiplicative weight updates over the family: each round
//! reweights the functions exponentially against their accumulated payoffs
//! and computes a greedy best response to the weighted sum. The uniform
//! mixture over all rounds' seed sets is the output; its worst-case expected
//! influence is within `(1 - 1/e)` of the max-min optimum up to the regret
//! term.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::bits;
use crate::cascade::{build_pool, exact_influence_many, InfluenceEstimate, SamplePool, SeedSet};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::hypermodel::{HyperModel, Hyperparameter, ProbVector};
use crate::reach::{Coverage, ReachIndex, ReachTable, Scratch};
use crate::seed;
use crate::verify;

/// A finite family of influence functions over one graph, each backed by a
/// fixed training pool.
#[derive(Debug, Clone)]
pub struct FunctionFamily<'g> {
    graph: &'g Graph,
    probs: Vec<ProbVector>,
    thetas: Vec<Hyperparameter>,
    pools: Vec<SamplePool>,
    index: Vec<ReachIndex>,
}

impl<'g> FunctionFamily<'g> {
    /// Builds one pool of `replicates` samples per probability vector; pool
    /// `i` is seeded from `(rng_seed, i)`.
    pub fn from_probs(
        graph: &'g Graph,
        probs: Vec<ProbVector>,
        replicates: usize,
        rng_seed: u64,
    ) -> Result<FunctionFamily<'g>> {
        if probs.is_empty() {
            return Err(Error::param("function family needs at least one function"));
        }
        let mut pools = Vec::with_capacity(probs.len());
        let mut index = Vec::with_capacity(probs.len());
        for (i, p) in probs.iter().enumerate() {
            let pool = build_pool(graph, p, replicates, seed::derive(rng_seed, &[i as u64]))?;
            index.push(ReachIndex::build(graph, &pool));
            pools.push(pool);
        }
        Ok(FunctionFamily {
            graph,
            probs,
            thetas: Vec::new(),
            pools,
            index,
        })
    }

    /// Family of the influence functions `f_θ` for the given hyperparameters.
    pub fn from_cover(
        graph: &'g Graph,
        model: &HyperModel,
        thetas: &[Hyperparameter],
        replicates: usize,
        rng_seed: u64,
    ) -> Result<FunctionFamily<'g>> {
        let probs = thetas
            .iter()
            .map(|t| model.edge_probabilities(t, graph))
            .collect::<Result<Vec<_>>>()?;
        let mut family = FunctionFamily::from_probs(graph, probs, replicates, rng_seed)?;
        family.thetas = thetas.to_vec();
        Ok(family)
    }

    /// The first `l` functions, sharing pools with `self`.
    pub fn truncated(&self, l: usize) -> Result<FunctionFamily<'g>> {
        if l == 0 || l > self.len() {
            return Err(Error::param(format!(
                "cannot take {l} functions from a family of {}",
                self.len()
            )));
        }
        Ok(FunctionFamily {
            graph: self.graph,
            probs: self.probs[..l].to_vec(),
            thetas: self.thetas.iter().take(l).cloned().collect(),
            pools: self.pools[..l].to_vec(),
            index: self.index[..l].to_vec(),
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[ProbVector] {
        &self.probs
    }

    /// Hyperparameters behind each function; empty for explicit families.
    pub fn thetas(&self) -> &[Hyperparameter] {
        &self.thetas
    }

    pub fn pools(&self) -> &[SamplePool] {
        &self.pools
    }

    /// Training-pool estimate of `f_i(set)`.
    pub fn pool_value(&self, i: usize, set: &SeedSet) -> f64 {
        self.index[i].total(set.nodes()) as f64 / self.index[i].samples() as f64
    }

    /// Training-pool estimates of every function at `set`.
    pub fn pool_values(&self, set: &SeedSet) -> Vec<f64> {
        (0..self.len()).map(|i| self.pool_value(i, set)).collect()
    }
}

/// Nonnegative weights over the functions of a family, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<WeightVector> {
        if w.is_empty() {
            return Err(Error::param("weight vector is empty"));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::param("weights must be finite and nonnegative"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(w))
    }

    pub fn uniform(l: usize) -> WeightVector {
        WeightVector(vec![1.0 / l as f64; l])
    }

    /// Unit weight on function `i`.
    pub fn point(l: usize, i: usize) -> WeightVector {
        let mut w = vec![0.0; l];
        w[i] = 1.0;
        WeightVector(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `w_i ∝ exp(-η·c_i)` for cumulative payoffs `c`.
pub fn mwu_from_cumulative(cumulative: &[f64], eta: f64) -> WeightVector {
    let lo = cumulative.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = cumulative.iter().map(|c| (-eta * (c - lo)).exp()).collect();
    let total: f64 = raw.iter().sum();
    WeightVector(raw.into_iter().map(|x| x / total).collect())
}

/// Multiplicative weights after the given rounds of payoffs (each in [0, 1],
/// one entry per function).
pub fn mwu_weights(l: usize, history: &[Vec<f64>], eta: f64) -> Result<WeightVector> {
    if l == 0 {
        return Err(Error::param("need at least one function"));
    }
    let mut cumulative = vec![0.0; l];
    for (t, round) in history.iter().enumerate() {
        if round.len() != l {
            return Err(Error::param(format!(
                "round {t} has {} payoffs, expected {l}",
                round.len()
            )));
        }
        for (c, x) in cumulative.iter_mut().zip(round) {
            *c += x;
        }
    }
    Ok(mwu_from_cumulative(&cumulative, eta))
}

/// A uniform distribution over equally sized seed sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    seed_sets: Vec<SeedSet>,
}

impl MixedStrategy {
    pub fn new(seed_sets: Vec<SeedSet>) -> Result<MixedStrategy> {
        let Some(first) = seed_sets.first() else {
            return Err(Error::param("mixed strategy needs at least one seed set"));
        };
        if seed_sets.iter().any(|s| s.len() != first.len()) {
            return Err(Error::param("seed sets of a mixed strategy must share one size"));
        }
        Ok(MixedStrategy { seed_sets })
    }

    pub fn seed_sets(&self) -> &[SeedSet] {
        &self.seed_sets
    }

    pub fn len(&self) -> usize {
        self.seed_sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seed_sets.is_empty()
    }

    pub fn k(&self) -> usize {
        self.seed_sets[0].len()
    }

    /// Samples one member uniformly.
    pub fn draw(&self, rng: &mut seed::Rng) -> &SeedSet {
        use rand::Rng as _;
        &self.seed_sets[rng.random_range(0..self.seed_sets.len())]
    }
}

#[derive(Clone, Copy)]
struct HeapEntry {
    gain: f64,
    node: NodeId,
    stamp: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // larger gain first, then lower node id
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn weighted_gain(family: &FunctionFamily, weights: &[f64], v: NodeId, covered: &[Coverage]) -> f64 {
    let mut g = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let idx = &family.index[i];
        g += w * idx.marginal_total(v, &covered[i]) as f64 / idx.samples() as f64;
    }
    g
}

fn weighted_singleton(family: &FunctionFamily, weights: &[f64], v: NodeId) -> f64 {
    let mut g = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let idx = &family.index[i];
        g += w * idx.singleton_total(v) as f64 / idx.samples() as f64;
    }
    g
}

/// Lazy greedy over `candidates`, returning nodes in selection order.
///
/// Stale gains are upper bounds by submodularity of each pool's coverage
/// function, so a popped entry that is fresh for the current step is the
/// true argmax. Ties go to the lowest node id, matching plain greedy.
pub fn greedy_order(
    family: &FunctionFamily,
    weights: &WeightVector,
    k: usize,
    candidates: Option<&[NodeId]>,
) -> Result<Vec<NodeId>> {
    if weights.len() != family.len() {
        return Err(Error::param(format!(
            "{} weights for {} functions",
            weights.len(),
            family.len()
        )));
    }
    let n = family.graph.node_count();
    let pool: Vec<NodeId> = match candidates {
        Some(c) => {
            if let Some(&v) = c.iter().find(|&&v| v >= n) {
                return Err(Error::param(format!("candidate node {v} >= n={n}")));
            }
            let mut c = c.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        }
        None => (0..n).collect(),
    };
    if k > pool.len() {
        return Err(Error::param(format!(
            "budget k={k} exceeds the {} available nodes",
            pool.len()
        )));
    }
    let w = weights.as_slice();
    let mut heap: BinaryHeap<HeapEntry> = pool
        .iter()
        .map(|&v| HeapEntry {
            gain: weighted_singleton(family, w, v),
            node: v,
            stamp: 0,
        })
        .collect();
    let mut covered: Vec<Coverage> = family.index.iter().map(ReachIndex::empty_coverage).collect();
    let mut picks = Vec::with_capacity(k);
    while picks.len() < k {
        let mut top = heap.pop().expect("heap holds every unpicked candidate");
        if top.stamp == picks.len() {
            for (i, idx) in family.index.iter().enumerate() {
                if w[i] != 0.0 {
                    idx.cover(top.node, &mut covered[i]);
                }
            }
            picks.push(top.node);
        } else {
            top.gain = weighted_gain(family, w, top.node, &covered);
            top.stamp = picks.len();
            heap.push(top);
        }
    }
    Ok(picks)
}

/// Greedy maximizer of `Σ_i w_i·f_i` over sets of size `k`, evaluated on the
/// family's training pools.
pub fn lazy_greedy(family: &FunctionFamily, weights: &WeightVector, k: usize) -> Result<SeedSet> {
    Ok(SeedSet::from_unchecked(greedy_order(family, weights, k, None)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiroConfig {
    pub k: usize,
    pub rounds: usize,
    /// Learning rate; `ln(l) / (2T)` when absent.
    pub eta: Option<f64>,
}

impl HiroConfig {
    pub fn new(k: usize, rounds: usize) -> HiroConfig {
        HiroConfig { k, rounds, eta: None }
    }
}

/// Output of [`hiro`] together with its per-round diagnostics.
#[derive(Debug, Clone)]
pub struct HiroRun {
    pub strategy: MixedStrategy,
    pub eta: f64,
    /// Weights used in each round.
    pub weights: Vec<WeightVector>,
    /// Training-pool influence `f_i(S_t)` for each round `t` and function `i`.
    pub payoffs: Vec<Vec<f64>>,
    /// `min_i` of the mean payoff over rounds `0..=t`.
    pub running_min: Vec<f64>,
}

pub fn hiro(family: &FunctionFamily, config: &HiroConfig) -> Result<HiroRun> {
    let n = family.graph.node_count();
    let l = family.len();
    if config.k == 0 || config.k > n {
        return Err(Error::param(format!("budget k={} must lie in [1, n={n}]", config.k)));
    }
    if config.rounds == 0 {
        return Err(Error::param("HIRO needs at least one round"));
    }
    let eta = config
        .eta
        .unwrap_or_else(|| (l as f64).ln() / (2.0 * config.rounds as f64));
    if !(eta.is_finite() && eta >= 0.0) || (config.eta.is_some() && eta == 0.0) {
        return Err(Error::param(format!("learning rate {eta} must be positive")));
    }

    let scale = n as f64;
    let mut cumulative = vec![0.0; l];
    let mut value_sums = vec![0.0; l];
    let mut sets = Vec::with_capacity(config.rounds);
    let mut weights = Vec::with_capacity(config.rounds);
    let mut payoffs = Vec::with_capacity(config.rounds);
    let mut running_min = Vec::with_capacity(config.rounds);
    for t in 0..config.rounds {
        let w = mwu_from_cumulative(&cumulative, eta);
        let set = lazy_greedy(family, &w, config.k)?;
        let values = family.pool_values(&set);
        for i in 0..l {
            cumulative[i] += values[i] / scale;
            value_sums[i] += values[i];
        }
        let rounds = (t + 1) as f64;
        running_min.push(
            value_sums
                .iter()
                .map(|s| s / rounds)
                .fold(f64::INFINITY, f64::min),
        );
        sets.push(set);
        weights.push(w);
        payoffs.push(values);
    }
    Ok(HiroRun {
        strategy: MixedStrategy::new(sets)?,
        eta,
        weights,
        payoffs,
        running_min,
    })
}

/// Union of a mixed strategy's seed sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BicriteriaUnion {
    pub set: SeedSet,
    pub k: usize,
    /// `|union| / k`
    pub blow_up: f64,
}

pub fn bicriteria_union(strategy: &MixedStrategy) -> BicriteriaUnion {
    let set = strategy
        .seed_sets()
        .iter()
        .fold(SeedSet::default(), |acc, s| acc.union(s));
    let k = strategy.k();
    let blow_up = if k == 0 { 1.0 } else { set.len() as f64 / k as f64 };
    BicriteriaUnion { set, k, blow_up }
}

/// Something whose robust value can be reported.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Set(SeedSet),
    Mixed(MixedStrategy),
}

impl Candidate {
    fn sets(&self) -> &[SeedSet] {
        match self {
            Candidate::Set(s) => std::slice::from_ref(s),
            Candidate::Mixed(m) => m.seed_sets(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    /// Exhaustive live-edge enumeration.
    Exact,
    /// Fresh pools of `replicates` samples; function `i` is seeded from
    /// `(rng_seed, i)`.
    Sampled { replicates: usize, rng_seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustReport {
    pub per_function_values: Vec<f64>,
    pub per_function_stderr: Vec<f64>,
    pub min_value: f64,
    pub argmin_index: usize,
    pub robust_ratio: Option<f64>,
}

impl RobustReport {
    fn from_estimates(est: Vec<InfluenceEstimate>) -> RobustReport {
        let (argmin_index, min_value) = est
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.mean))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        RobustReport {
            per_function_values: est.iter().map(|e| e.mean).collect(),
            per_function_stderr: est.iter().map(|e| e.stderr).collect(),
            min_value,
            argmin_index,
            robust_ratio: None,
        }
    }

    /// Standard error of the minimizing function's estimate.
    pub fn min_stderr(&self) -> f64 {
        self.per_function_stderr[self.argmin_index]
    }
}

/// Robust reports for several candidates against the same functions.
///
/// A mixed strategy's value for a function is the average over its sets; in
/// sampled mode its standard error is taken over per-sample averages.
pub fn evaluate_many(
    graph: &Graph,
    probs: &[ProbVector],
    candidates: &[Candidate],
    mode: EvalMode,
) -> Result<Vec<RobustReport>> {
    if probs.is_empty() {
        return Err(Error::param("evaluation needs at least one function"));
    }
    let n = graph.node_count();
    let mut unique: Vec<SeedSet> = Vec::new();
    let mut slot: HashMap<SeedSet, usize> = HashMap::new();
    let mut layout: Vec<Vec<usize>> = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut ids = Vec::new();
        for s in c.sets() {
            if s.nodes().last().is_some_and(|&v| v >= n) {
                return Err(Error::param(format!("seed set {{{s}}} references a node >= n={n}")));
            }
            let id = *slot.entry(s.clone()).or_insert_with(|| {
                unique.push(s.clone());
                unique.len() - 1
            });
            ids.push(id);
        }
        layout.push(ids);
    }

    let mut estimates: Vec<Vec<InfluenceEstimate>> = vec![Vec::with_capacity(probs.len()); candidates.len()];
    for (i, p) in probs.iter().enumerate() {
        p.check_graph(graph)?;
        match mode {
            EvalMode::Exact => {
                let values = exact_influence_many(graph, p, &unique)?;
                for (c, ids) in layout.iter().enumerate() {
                    let mean = ids.iter().map(|&u| values[u]).sum::<f64>() / ids.len() as f64;
                    estimates[c].push(InfluenceEstimate {
                        mean,
                        stderr: 0.0,
                        replicates: 0,
                    });
                }
            }
            EvalMode::Sampled { replicates, rng_seed } => {
                if replicates == 0 {
                    return Err(Error::param("evaluation pool size must be at least 1"));
                }
                let pool_seed = seed::derive(rng_seed, &[i as u64]);
                let per_sample: Vec<Vec<f64>> = (0..replicates)
                    .into_par_iter()
                    .map_init(
                        || (ReachTable::default(), Scratch::default(), vec![0u64; bits::words_for(n)]),
                        |(table, scratch, buf), j| {
                            let sample = crate::cascade::LiveEdgeSample::draw(
                                p,
                                &mut seed::stream_rng(pool_seed, j as u64),
                            );
                            table.build_into(graph, |e| sample.is_alive(e), scratch);
                            let counts: Vec<u32> =
                                unique.iter().map(|s| table.count(s.nodes(), buf)).collect();
                            layout
                                .iter()
                                .map(|ids| {
                                    ids.iter().map(|&u| counts[u] as f64).sum::<f64>() / ids.len() as f64
                                })
                                .collect()
                        },
                    )
                    .collect();
                for (c, est) in estimates.iter_mut().enumerate() {
                    est.push(InfluenceEstimate::from_counts(per_sample.iter().map(|row| row[c])));
                }
            }
        }
    }
    Ok(estimates.into_iter().map(RobustReport::from_estimates).collect())
}

/// Robust report for one candidate against the family's functions, using
/// evaluation pools independent of the training pools.
pub fn evaluate(family: &FunctionFamily, candidate: &Candidate, mode: EvalMode) -> Result<RobustReport> {
    Ok(evaluate_many(family.graph, &family.probs, std::slice::from_ref(candidate), mode)?
        .pop()
        .expect("one report per candidate"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    /// Per-function optimum approximated by greedy.
    Greedy,
    /// Per-function optimum by exhaustive search (exact mode only).
    BruteForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub ratio: f64,
    pub per_function_ratio: Vec<f64>,
    /// Factor by which `ratio` may overstate the true robust ratio:
    /// `e/(e-1)` with greedy denominators, 1 with exact ones.
    pub overestimate_bound: f64,
}

/// `ρ(S) = min_i f_i(S) / f_i(S*_i)`.
///
/// Values are exact when every needed influence fits the exact oracle and
/// training-pool estimates otherwise.
pub fn robust_ratio(family: &FunctionFamily, set: &SeedSet, k: usize, mode: RatioMode) -> Result<RatioReport> {
    let l = family.len();
    let optima: Vec<SeedSet> = match mode {
        RatioMode::BruteForce => (0..l)
            .map(|i| {
                verify::brute_force_robust(family.graph, std::slice::from_ref(&family.probs[i]), k)
                    .map(|(s, _)| s)
            })
            .collect::<Result<_>>()?,
        RatioMode::Greedy => (0..l)
            .map(|i| lazy_greedy(family, &WeightVector::point(l, i), k))
            .collect::<Result<_>>()?,
    };

    let mut per_function_ratio = Vec::with_capacity(l);
    for i in 0..l {
        let pair = [set.clone(), optima[i].clone()];
        let (num, den) = match exact_influence_many(family.graph, &family.probs[i], &pair) {
            Ok(v) => (v[0], v[1]),
            Err(Error::Capacity(_)) if mode == RatioMode::Greedy => {
                (family.pool_value(i, set), family.pool_value(i, &optima[i]))
            }
            Err(e) => return Err(e),
        };
        per_function_ratio.push(if den > 0.0 { num / den } else { 1.0 });
    }
    let ratio = per_function_ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let e = std::f64::consts::E;
    Ok(RatioReport {
        ratio,
        per_function_ratio,
        overestimate_bound: match mode {
            RatioMode::Greedy => e / (e - 1.0),
            RatioMode::BruteForce => 1.0,
        },
    })
}
