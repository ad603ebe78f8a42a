//! Exhaustive robust oracles and small constructive instances.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::cascade::{exact_influence_many, SeedSet};
use crate::error::{Error, Result};
use crate::graph::{save_graph, Graph, NodeId};
use crate::hypermodel::ProbVector;

/// Largest number of candidate sets the brute-force oracles will enumerate.
pub const MAX_CANDIDATES: u64 = 100_000;

/// Values closer than this are treated as ties.
const TIE: f64 = 1e-9;

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Every size-`k` subset of `0..n` in lexicographic order.
fn all_subsets(n: usize, k: usize) -> Result<Vec<SeedSet>> {
    if k > n {
        return Err(Error::param(format!("k={k} exceeds n={n}")));
    }
    let count = binomial(n as u64, k as u64).unwrap_or(u64::MAX);
    if count > MAX_CANDIDATES {
        return Err(Error::capacity(format!(
            "C({n}, {k}) = {count} candidate sets exceeds the limit of {MAX_CANDIDATES}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(SeedSet::from_unchecked(idx.clone()));
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(out)
}

/// `values[i][s]` = exact `f_i` of subset `s`.
fn exact_table(graph: &Graph, probs: &[ProbVector], sets: &[SeedSet]) -> Result<Vec<Vec<f64>>> {
    probs
        .par_iter()
        .map(|p| exact_influence_many(graph, p, sets))
        .collect()
}

/// First index maximizing `score`, treating near-equal scores as ties.
fn first_argmax(scores: impl Iterator<Item = f64>) -> (usize, f64) {
    scores
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 + TIE {
                cur
            } else {
                best
            }
        })
}

/// Exact `max_{|S|=k} min_i f_i(S)` by enumeration; ties go to the
/// lexicographically smallest set.
pub fn brute_force_robust(graph: &Graph, probs: &[ProbVector], k: usize) -> Result<(SeedSet, f64)> {
    if probs.is_empty() {
        return Err(Error::param("need at least one probability vector"));
    }
    let sets = all_subsets(graph.node_count(), k)?;
    let table = exact_table(graph, probs, &sets)?;
    let mins = (0..sets.len()).map(|s| table.iter().map(|row| row[s]).fold(f64::INFINITY, f64::min));
    let (best, value) = first_argmax(mins);
    Ok((sets[best].clone(), value))
}

/// Exact maximizer of the robust ratio `min_i f_i(S)/max_{|T|=k} f_i(T)`.
pub fn brute_force_ratio(graph: &Graph, probs: &[ProbVector], k: usize) -> Result<(SeedSet, f64)> {
    if probs.is_empty() {
        return Err(Error::param("need at least one probability vector"));
    }
    let sets = all_subsets(graph.node_count(), k)?;
    let table = exact_table(graph, probs, &sets)?;
    let optima: Vec<f64> = table
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let ratios = (0..sets.len()).map(|s| {
        table
            .iter()
            .zip(&optima)
            .map(|(row, opt)| if *opt > 0.0 { row[s] / opt } else { 1.0 })
            .fold(f64::INFINITY, f64::min)
    });
    let (best, ratio) = first_argmax(ratios);
    Ok((sets[best].clone(), ratio))
}

/// A graph with explicit probability vectors and named special nodes.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub graph: Graph,
    pub probs: Vec<ProbVector>,
    pub labels: Vec<(&'static str, NodeId)>,
}

impl Fixture {
    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().find(|(l, _)| *l == label).map(|&(_, v)| v)
    }

    /// Writes the graph in edge-list format and the probability vectors one
    /// per line.
    pub fn save(&self, graph_path: &Path, probs_path: &Path) -> Result<()> {
        save_graph(&self.graph, graph_path)?;
        save_probs(&self.probs, probs_path)
    }
}

pub fn probs_to_string(probs: &[ProbVector]) -> String {
    let mut out = String::new();
    for p in probs {
        let line: Vec<String> = p.as_slice().iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

pub fn save_probs(probs: &[ProbVector], path: &Path) -> Result<()> {
    fs::write(path, probs_to_string(probs)).map_err(|e| Error::io(path, e))
}

pub fn load_probs(path: &Path) -> Result<Vec<ProbVector>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| err(i + 1, format!("bad probability '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(ProbVector::new(values).map_err(|e| err(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Spread probability of `v`'s arcs under the second function of the ratio
/// instance.
pub const RATIO_V_SPREAD: f64 = 0.9;

/// Two functions on `u`, `v` and `n_leaves` blue nodes, `q = √n_leaves`.
///
/// `u` has an arc to every blue node, `v` to the first `q - 1`. Under the
/// first function `u`'s arcs are dead and `v`'s certain; under the second
/// `u`'s are certain and `v`'s live with probability 0.9. Then
/// `f(u) = (1, n+1)` and `f(v) = (q, 1 + 0.9(q-1))`: the ratio objective
/// prefers `u` (ratio `1/q`), the value objective `v` (value about `q`).
pub fn ratio_gap_instance(n_leaves: usize) -> Result<Fixture> {
    let q = (n_leaves as f64).sqrt().round() as usize;
    if n_leaves < 4 || q * q != n_leaves {
        return Err(Error::param(format!(
            "n_leaves must be a perfect square >= 4, got {n_leaves}"
        )));
    }
    let (u, v) = (0, 1);
    let blue = |j: usize| 2 + j;
    let mut pairs: Vec<(NodeId, NodeId)> = (0..n_leaves).map(|j| (u, blue(j))).collect();
    pairs.extend((0..q - 1).map(|j| (v, blue(j))));
    let graph = Graph::from_pairs(n_leaves + 2, &pairs)?;
    let first: Vec<f64> = (0..pairs.len()).map(|e| if e < n_leaves { 0.0 } else { 1.0 }).collect();
    let second: Vec<f64> = (0..pairs.len())
        .map(|e| if e < n_leaves { 1.0 } else { RATIO_V_SPREAD })
        .collect();
    Ok(Fixture {
        graph,
        probs: vec![ProbVector::new(first)?, ProbVector::new(second)?],
        labels: vec![("u", u), ("v", v)],
    })
}

/// Two stars centred at `u` and `v`; each function makes one star certain
/// and the other dead. Every single seed has worst-case influence 1, while
/// the uniform mix of `{u}` and `{v}` gets `(n_leaves + 2)/2` under both.
pub fn improper_gap_instance(n_leaves_per_side: usize) -> Result<Fixture> {
    if n_leaves_per_side == 0 {
        return Err(Error::param("each star needs at least one leaf"));
    }
    let l = n_leaves_per_side;
    let (u, v) = (0, 1);
    let mut pairs: Vec<(NodeId, NodeId)> = (0..l).map(|j| (u, 2 + j)).collect();
    pairs.extend((0..l).map(|j| (v, 2 + l + j)));
    let graph = Graph::from_pairs(2 + 2 * l, &pairs)?;
    let first: Vec<f64> = (0..2 * l).map(|e| if e < l { 1.0 } else { 0.0 }).collect();
    let second: Vec<f64> = first.iter().map(|x| 1.0 - x).collect();
    Ok(Fixture {
        graph,
        probs: vec![ProbVector::new(first)?, ProbVector::new(second)?],
        labels: vec![("u", u), ("v", v)],
    })
}

/// Directed `n`-cycle with arcs live at `1 - λ`, plus a centre `v_star`
/// with a spoke to every cycle node. Spokes are live at `λ` in the first
/// vector and at `1/n` in the second. The centre's influence differs by
/// order `n²·(1/n)` between them, matching the `n·m` Lipschitz bound up to
/// a constant.
pub fn lipschitz_tight_instance(n: usize, lambda: f64) -> Result<Fixture> {
    if n < 10 {
        return Err(Error::param(format!("cycle needs at least 10 nodes, got {n}")));
    }
    let eps = 1.0 / n as f64;
    if !(lambda > 0.0 && lambda < eps) {
        return Err(Error::param(format!("lambda={lambda} must lie in (0, 1/n)")));
    }
    let centre = n;
    let mut pairs: Vec<(NodeId, NodeId)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    pairs.extend((0..n).map(|i| (centre, i)));
    let graph = Graph::from_pairs(n + 1, &pairs)?;
    let with_spokes = |spoke: f64| -> Result<ProbVector> {
        ProbVector::new((0..2 * n).map(|e| if e < n { 1.0 - lambda } else { spoke }).collect())
    };
    Ok(Fixture {
        graph,
        probs: vec![with_spokes(lambda)?, with_spokes(eps)?],
        labels: vec![("v_star", centre)],
    })
}
