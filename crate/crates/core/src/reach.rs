//! Reachability tables for live-edge subgraphs.
//!
//! Each table condenses a live-edge subgraph into strongly connected
//! components and stores, per component, the bitset of nodes reachable from
//! it. The number of nodes reached by a seed set is then the popcount of the
//! union of its members' bitsets, which makes greedy marginal gains and bulk
//! evaluation cheap once a pool has been indexed.

use rayon::prelude::*;

use crate::bits;
use crate::cascade::SamplePool;
use crate::graph::{Graph, NodeId};

const UNVISITED: u32 = u32::MAX;

/// Reusable buffers for [`ReachTable::build_into`].
#[derive(Default)]
pub(crate) struct Scratch {
    index: Vec<u32>,
    low: Vec<u32>,
    on_stack: Vec<bool>,
    stack: Vec<u32>,
    call: Vec<(u32, u32)>,
}

/// Component ids and per-component reach bitsets of one live-edge subgraph.
#[derive(Debug, Clone, Default)]
pub(crate) struct ReachTable {
    pub words: usize,
    pub comp: Vec<u32>,
    pub reach: Vec<u64>,
}

impl ReachTable {
    #[cfg(test)]
    pub fn build(graph: &Graph, alive: impl Fn(usize) -> bool) -> ReachTable {
        let mut table = ReachTable::default();
        table.build_into(graph, alive, &mut Scratch::default());
        table
    }

    /// Iterative Tarjan. Components complete in reverse topological order, so
    /// every successor component's bitset exists when a component closes.
    pub fn build_into(&mut self, graph: &Graph, alive: impl Fn(usize) -> bool, s: &mut Scratch) {
        let n = graph.node_count();
        let words = bits::words_for(n);
        self.words = words;
        self.comp.clear();
        self.comp.resize(n, UNVISITED);
        self.reach.clear();
        s.index.clear();
        s.index.resize(n, UNVISITED);
        s.low.clear();
        s.low.resize(n, 0);
        s.on_stack.clear();
        s.on_stack.resize(n, false);
        s.stack.clear();
        s.call.clear();

        let mut counter = 0u32;
        let mut ncomp = 0u32;
        for root in 0..n {
            if s.index[root] != UNVISITED {
                continue;
            }
            s.index[root] = counter;
            s.low[root] = counter;
            counter += 1;
            s.stack.push(root as u32);
            s.on_stack[root] = true;
            s.call.push((root as u32, 0));

            while let Some(&(v, pos)) = s.call.last() {
                let v = v as usize;
                let out = graph.out_arcs(v);
                if (pos as usize) < out.len() {
                    let e = out[pos as usize] as usize;
                    let top = s.call.len() - 1;
                    s.call[top].1 += 1;
                    if !alive(e) {
                        continue;
                    }
                    let w = graph.dst(e);
                    if s.index[w] == UNVISITED {
                        s.index[w] = counter;
                        s.low[w] = counter;
                        counter += 1;
                        s.stack.push(w as u32);
                        s.on_stack[w] = true;
                        s.call.push((w as u32, 0));
                    } else if s.on_stack[w] {
                        s.low[v] = s.low[v].min(s.index[w]);
                    }
                    continue;
                }

                s.call.pop();
                if let Some(&(parent, _)) = s.call.last() {
                    let parent = parent as usize;
                    s.low[parent] = s.low[parent].min(s.low[v]);
                }
                if s.low[v] != s.index[v] {
                    continue;
                }

                let c = ncomp;
                ncomp += 1;
                let start = self.reach.len();
                self.reach.resize(start + words, 0);
                let members_from = s.stack.iter().rposition(|&x| x as usize == v).unwrap();
                for &x in &s.stack[members_from..] {
                    let x = x as usize;
                    self.comp[x] = c;
                    s.on_stack[x] = false;
                    bits::set(&mut self.reach[start..start + words], x);
                }
                for i in members_from..s.stack.len() {
                    let x = s.stack[i] as usize;
                    for &e in graph.out_arcs(x) {
                        let e = e as usize;
                        if !alive(e) {
                            continue;
                        }
                        let cw = self.comp[graph.dst(e)];
                        if cw != c {
                            let from = cw as usize * words;
                            let (done, current) = self.reach.split_at_mut(start);
                            bits::or_assign(current, &done[from..from + words]);
                        }
                    }
                }
                s.stack.truncate(members_from);
            }
        }
    }

    #[inline]
    pub fn reach_of(&self, v: NodeId) -> &[u64] {
        let c = self.comp[v] as usize * self.words;
        &self.reach[c..c + self.words]
    }

    /// Number of nodes reachable from `set`; `buf` must hold `words` words.
    pub fn count(&self, set: &[NodeId], buf: &mut [u64]) -> u32 {
        buf.fill(0);
        for &v in set {
            bits::or_assign(buf, self.reach_of(v));
        }
        bits::count(buf)
    }
}

/// Pools whose per-node bitsets fit in this many bytes are stored densely.
const DENSE_BYTES: usize = 64 << 20;

/// Reach tables for every sample of a pool, stored contiguously.
#[derive(Debug, Clone)]
pub struct ReachIndex {
    n: usize,
    samples: usize,
    words: usize,
    // Node-major, so a marginal-gain scan over samples reads sequentially.
    // Dense: reach[(v * samples + j) * words ..] is v's bitset in sample j.
    // Shared (large instances): bitsets are stored once per component and
    // offset[v * samples + j] points at the right one.
    offset: Option<Vec<u32>>,
    reach: Vec<u64>,
    singleton: Vec<u64>,
}

impl ReachIndex {
    pub fn build(graph: &Graph, pool: &SamplePool) -> ReachIndex {
        let tables: Vec<ReachTable> = pool
            .samples()
            .par_iter()
            .map_init(Scratch::default, |scratch, sample| {
                let mut t = ReachTable::default();
                t.build_into(graph, |e| sample.is_alive(e), scratch);
                t
            })
            .collect();

        let n = graph.node_count();
        let samples = tables.len();
        let words = bits::words_for(n);
        let mut singleton = vec![0u64; n];
        for t in &tables {
            for (v, s) in singleton.iter_mut().enumerate() {
                *s += bits::count(t.reach_of(v)) as u64;
            }
        }
        let (offset, reach) = if n * samples * words * 8 <= DENSE_BYTES {
            let mut reach = vec![0u64; n * samples * words];
            for (j, t) in tables.iter().enumerate() {
                for v in 0..n {
                    let at = (v * samples + j) * words;
                    reach[at..at + words].copy_from_slice(t.reach_of(v));
                }
            }
            (None, reach)
        } else {
            let mut offset = vec![0u32; samples * n];
            let mut reach = Vec::new();
            for (j, t) in tables.into_iter().enumerate() {
                let start = reach.len();
                for v in 0..n {
                    let at = start + t.comp[v] as usize * words;
                    offset[v * samples + j] = u32::try_from(at).expect("reach index exceeds 2^32 words");
                }
                reach.extend_from_slice(&t.reach);
            }
            (Some(offset), reach)
        };
        ReachIndex {
            n,
            samples,
            words,
            offset,
            reach,
            singleton,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    fn reach_of(&self, j: usize, v: NodeId) -> &[u64] {
        let at = match &self.offset {
            None => (v * self.samples + j) * self.words,
            Some(offset) => offset[v * self.samples + j] as usize,
        };
        &self.reach[at..at + self.words]
    }

    /// Sum over samples of the nodes reachable from `v` alone.
    pub fn singleton_total(&self, v: NodeId) -> u64 {
        self.singleton[v]
    }

    /// Per-sample reached counts for `set`.
    pub fn counts(&self, set: &[NodeId]) -> Vec<u32> {
        let mut buf = vec![0u64; self.words];
        (0..self.samples())
            .map(|j| {
                buf.fill(0);
                for &v in set {
                    bits::or_assign(&mut buf, self.reach_of(j, v));
                }
                bits::count(&buf)
            })
            .collect()
    }

    /// Sum over samples of the reached counts for `set`.
    pub fn total(&self, set: &[NodeId]) -> u64 {
        self.counts(set).iter().map(|&c| c as u64).sum()
    }

    pub fn empty_coverage(&self) -> Coverage {
        Coverage(vec![0; self.samples() * self.words])
    }

    /// Sum over samples of nodes reachable from `v` that `covered` lacks.
    pub fn marginal_total(&self, v: NodeId, covered: &Coverage) -> u64 {
        let w = self.words;
        let block = v * self.samples..(v + 1) * self.samples;
        let mut total = 0u64;
        match &self.offset {
            None => {
                let reach = &self.reach[block.start * w..block.end * w];
                for (cov, r) in covered.0.chunks_exact(w).zip(reach.chunks_exact(w)) {
                    total += bits::count_and_not(r, cov) as u64;
                }
            }
            Some(offset) => {
                for (cov, &at) in covered.0.chunks_exact(w).zip(&offset[block]) {
                    // a covered node's whole reach set is already covered
                    if bits::get(cov, v) {
                        continue;
                    }
                    let at = at as usize;
                    total += bits::count_and_not(&self.reach[at..at + w], cov) as u64;
                }
            }
        }
        total
    }

    pub fn cover(&self, v: NodeId, covered: &mut Coverage) {
        let w = self.words;
        for j in 0..self.samples() {
            bits::or_assign(&mut covered.0[j * w..(j + 1) * w], self.reach_of(j, v));
        }
    }
}

/// Per-sample union of the nodes reached so far.
#[derive(Debug, Clone)]
pub struct Coverage(Vec<u64>);

#[cfg(test)]
mod tests {
    use super::*;

    fn bfs_count(graph: &Graph, alive: &dyn Fn(usize) -> bool, set: &[NodeId]) -> u32 {
        let mut seen = vec![false; graph.node_count()];
        let mut queue: Vec<NodeId> = Vec::new();
        for &s in set {
            if !seen[s] {
                seen[s] = true;
                queue.push(s);
            }
        }
        while let Some(u) = queue.pop() {
            for &e in graph.out_arcs(u) {
                let e = e as usize;
                if alive(e) && !seen[graph.dst(e)] {
                    seen[graph.dst(e)] = true;
                    queue.push(graph.dst(e));
                }
            }
        }
        seen.iter().filter(|&&b| b).count() as u32
    }

    #[test]
    fn matches_bfs_on_random_subgraphs() {
        use rand::Rng as _;
        let mut rng = crate::seed::rng(17);
        for _ in 0..200 {
            let n = rng.random_range(1..80);
            let mut pairs = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random_bool((3.0 / n as f64).min(1.0)) {
                        pairs.push((u, v));
                    }
                }
            }
            let g = Graph::from_pairs(n, &pairs).unwrap();
            let mask: Vec<bool> = (0..g.arc_count()).map(|_| rng.random_bool(0.7)).collect();
            let alive = |e: usize| mask[e];
            let table = ReachTable::build(&g, alive);
            let mut buf = vec![0u64; table.words];
            for v in 0..n {
                assert_eq!(table.count(&[v], &mut buf), bfs_count(&g, &alive, &[v]));
            }
            let set: Vec<NodeId> = (0..n).filter(|_| rng.random_bool(0.2)).collect();
            assert_eq!(table.count(&set, &mut buf), bfs_count(&g, &alive, &set));
        }
    }

    #[test]
    fn cycle_is_one_component() {
        let g = Graph::from_pairs(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let t = ReachTable::build(&g, |_| true);
        assert_eq!(t.comp[0], t.comp[1]);
        assert_eq!(t.comp[1], t.comp[2]);
        assert_ne!(t.comp[2], t.comp[3]);
        assert_eq!(bits::count(t.reach_of(1)), 4);
        assert_eq!(bits::count(t.reach_of(3)), 1);
    }
}
