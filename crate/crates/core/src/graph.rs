//! Directed graphs with per-arc feature vectors, synthetic generators and the
//! edge-list file format.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{weighted::WeightedIndex, Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

pub type NodeId = usize;

/// A directed arc with its feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub src: NodeId,
    pub dst: NodeId,
    pub features: Vec<f64>,
}

/// Immutable directed graph.
///
/// Arcs keep their insertion order; `out_arcs(v)` lists the indices of arcs
/// leaving `v` in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    d: usize,
    src: Vec<u32>,
    dst: Vec<u32>,
    features: Vec<f64>,
    out_offsets: Vec<usize>,
    out_list: Vec<u32>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate arcs, out-of-range
    /// endpoints, inconsistent feature dimension and features outside [-1, 1].
    pub fn from_arcs(n: usize, d: usize, arcs: Vec<Arc>) -> Result<Graph> {
        if n > u32::MAX as usize {
            return Err(Error::param(format!("node count {n} exceeds u32 range")));
        }
        let mut seen = HashSet::with_capacity(arcs.len());
        let mut src = Vec::with_capacity(arcs.len());
        let mut dst = Vec::with_capacity(arcs.len());
        let mut features = Vec::with_capacity(arcs.len() * d);
        for (i, arc) in arcs.into_iter().enumerate() {
            if arc.src >= n || arc.dst >= n {
                return Err(Error::param(format!(
                    "arc {i} ({} -> {}) references a node outside [0, {n})",
                    arc.src, arc.dst
                )));
            }
            if arc.src == arc.dst {
                return Err(Error::param(format!("arc {i} is a self-loop on {}", arc.src)));
            }
            if arc.features.len() != d {
                return Err(Error::param(format!(
                    "arc {i} has {} features, expected {d}",
                    arc.features.len()
                )));
            }
            if let Some(x) = arc.features.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
                return Err(Error::param(format!("arc {i} has feature {x} outside [-1, 1]")));
            }
            if !seen.insert((arc.src, arc.dst)) {
                return Err(Error::param(format!(
                    "duplicate arc {} -> {}",
                    arc.src, arc.dst
                )));
            }
            src.push(arc.src as u32);
            dst.push(arc.dst as u32);
            features.extend_from_slice(&arc.features);
        }

        let mut out_offsets = vec![0usize; n + 1];
        for &s in &src {
            out_offsets[s as usize + 1] += 1;
        }
        for v in 0..n {
            out_offsets[v + 1] += out_offsets[v];
        }
        let mut fill = out_offsets.clone();
        let mut out_list = vec![0u32; src.len()];
        for (e, &s) in src.iter().enumerate() {
            out_list[fill[s as usize]] = e as u32;
            fill[s as usize] += 1;
        }

        Ok(Graph {
            n,
            d,
            src,
            dst,
            features,
            out_offsets,
            out_list,
        })
    }

    /// Builds a featureless (d = 0) graph from (src, dst) pairs.
    pub fn from_pairs(n: usize, pairs: &[(NodeId, NodeId)]) -> Result<Graph> {
        let arcs = pairs
            .iter()
            .map(|&(src, dst)| Arc {
                src,
                dst,
                features: Vec::new(),
            })
            .collect();
        Graph::from_arcs(n, 0, arcs)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn arc_count(&self) -> usize {
        self.src.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn src(&self, e: usize) -> NodeId {
        self.src[e] as usize
    }

    #[inline]
    pub fn dst(&self, e: usize) -> NodeId {
        self.dst[e] as usize
    }

    #[inline]
    pub fn features(&self, e: usize) -> &[f64] {
        &self.features[e * self.d..(e + 1) * self.d]
    }

    /// Indices of arcs leaving `v`.
    #[inline]
    pub fn out_arcs(&self, v: NodeId) -> &[u32] {
        &self.out_list[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    pub fn arc(&self, e: usize) -> Arc {
        Arc {
            src: self.src(e),
            dst: self.dst(e),
            features: self.features(e).to_vec(),
        }
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        (0..self.arc_count()).map(|e| self.arc(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    BarabasiAlbert,
    WattsStrogatz,
    ErdosRenyi,
    Configuration,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::BarabasiAlbert,
        ModelKind::WattsStrogatz,
        ModelKind::ErdosRenyi,
        ModelKind::Configuration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BarabasiAlbert => "barabasi_albert",
            ModelKind::WattsStrogatz => "watts_strogatz",
            ModelKind::ErdosRenyi => "erdos_renyi",
            ModelKind::Configuration => "configuration",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "barabasi_albert" | "ba" => Ok(ModelKind::BarabasiAlbert),
            "watts_strogatz" | "ws" => Ok(ModelKind::WattsStrogatz),
            "erdos_renyi" | "er" => Ok(ModelKind::ErdosRenyi),
            "configuration" | "cm" => Ok(ModelKind::Configuration),
            other => Err(Error::param(format!("unknown graph model '{other}'"))),
        }
    }
}

/// Generator family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphModel {
    /// Each node after an initial `(attach + 1)`-clique links to `attach`
    /// distinct existing nodes chosen proportionally to degree.
    BarabasiAlbert { attach: usize },
    /// Ring lattice where every node has `ring_degree` neighbours, each
    /// lattice edge rewired with probability `rewire_prob`.
    WattsStrogatz { ring_degree: usize, rewire_prob: f64 },
    ErdosRenyi { edge_prob: f64 },
    /// Erased configuration model with power-law degrees `P(k) ∝ k^-exponent`.
    Configuration { exponent: f64 },
}

impl GraphModel {
    /// Experimental defaults for `n` nodes: attach 4, ring degree 5 with
    /// rewiring 3/n, edge probability 3/n, exponent 2.
    pub fn default_for(kind: ModelKind, n: usize) -> GraphModel {
        let n = n.max(1) as f64;
        match kind {
            ModelKind::BarabasiAlbert => GraphModel::BarabasiAlbert { attach: 4 },
            ModelKind::WattsStrogatz => GraphModel::WattsStrogatz {
                ring_degree: 5,
                rewire_prob: (3.0 / n).min(1.0),
            },
            ModelKind::ErdosRenyi => GraphModel::ErdosRenyi {
                edge_prob: (3.0 / n).min(1.0),
            },
            ModelKind::Configuration => GraphModel::Configuration { exponent: 2.0 },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            GraphModel::BarabasiAlbert { .. } => ModelKind::BarabasiAlbert,
            GraphModel::WattsStrogatz { .. } => ModelKind::WattsStrogatz,
            GraphModel::ErdosRenyi { .. } => ModelKind::ErdosRenyi,
            GraphModel::Configuration { .. } => ModelKind::Configuration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureDist {
    /// Uniform on [-1, 1] per coordinate.
    UniformCube,
    /// N(0, 1/2) per coordinate, clipped to [-1, 1].
    NormalClipped,
    /// Uniform on {-1, 1} per coordinate.
    Rademacher,
}

impl FeatureDist {
    pub fn name(self) -> &'static str {
        match self {
            FeatureDist::UniformCube => "uniform_cube",
            FeatureDist::NormalClipped => "normal_clipped",
            FeatureDist::Rademacher => "rademacher",
        }
    }

    pub fn parse(s: &str) -> Result<FeatureDist> {
        match s {
            "uniform_cube" | "uniform" => Ok(FeatureDist::UniformCube),
            "normal_clipped" | "normal" => Ok(FeatureDist::NormalClipped),
            "rademacher" => Ok(FeatureDist::Rademacher),
            other => Err(Error::param(format!("unknown feature distribution '{other}'"))),
        }
    }

    fn sample(self, d: usize, rng: &mut seed::Rng) -> Vec<f64> {
        match self {
            FeatureDist::UniformCube => (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            FeatureDist::NormalClipped => {
                let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
                (0..d)
                    .map(|_| normal.sample(rng).clamp(-1.0, 1.0))
                    .collect()
            }
            FeatureDist::Rademacher => (0..d)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub model: GraphModel,
    pub n: usize,
    pub d: usize,
    pub features: FeatureDist,
}

impl GeneratorSpec {
    pub fn new(model: GraphModel, n: usize, d: usize) -> GeneratorSpec {
        GeneratorSpec {
            model,
            n,
            d,
            features: FeatureDist::UniformCube,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::param(format!("graph needs at least 2 nodes, got {n}")));
        }
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        match self.model {
            GraphModel::BarabasiAlbert { attach } => {
                if attach == 0 || attach + 1 > n {
                    return Err(Error::param(format!(
                        "barabasi_albert needs 1 <= attach < n (attach={attach}, n={n})"
                    )));
                }
            }
            GraphModel::WattsStrogatz {
                ring_degree,
                rewire_prob,
            } => {
                if ring_degree == 0 || ring_degree >= n {
                    return Err(Error::param(format!(
                        "watts_strogatz ring degree must be in [1, n), got {ring_degree} with n={n}"
                    )));
                }
                if ring_degree % 2 == 1 && n % 2 == 1 {
                    return Err(Error::param(format!(
                        "watts_strogatz odd ring degree {ring_degree} needs an even node count, got {n}"
                    )));
                }
                if !prob_ok(rewire_prob) {
                    return Err(Error::param(format!("rewire probability {rewire_prob} not in [0, 1]")));
                }
            }
            GraphModel::ErdosRenyi { edge_prob } => {
                if !prob_ok(edge_prob) {
                    return Err(Error::param(format!("edge probability {edge_prob} not in [0, 1]")));
                }
            }
            GraphModel::Configuration { exponent } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(Error::param(format!("power-law exponent {exponent} must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// Generates a graph. Every undirected edge becomes two opposite arcs that
/// share one feature vector.
pub fn generate_graph(spec: &GeneratorSpec, rng_seed: u64) -> Result<Graph> {
    spec.validate()?;
    let mut rng = seed::rng(rng_seed);
    let edges = match spec.model {
        GraphModel::BarabasiAlbert { attach } => barabasi_albert(spec.n, attach, &mut rng),
        GraphModel::WattsStrogatz {
            ring_degree,
            rewire_prob,
        } => watts_strogatz(spec.n, ring_degree, rewire_prob, &mut rng),
        GraphModel::ErdosRenyi { edge_prob } => erdos_renyi(spec.n, edge_prob, &mut rng),
        GraphModel::Configuration { exponent } => configuration(spec.n, exponent, &mut rng),
    };
    let mut arcs = Vec::with_capacity(edges.len() * 2);
    for (u, v) in edges {
        let features = spec.features.sample(spec.d, &mut rng);
        arcs.push(Arc {
            src: u,
            dst: v,
            features: features.clone(),
        });
        arcs.push(Arc {
            src: v,
            dst: u,
            features,
        });
    }
    Graph::from_arcs(spec.n, spec.d, arcs)
}

fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    (u.min(v), u.max(v))
}

fn barabasi_albert(n: usize, attach: usize, rng: &mut seed::Rng) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    // every edge endpoint, so a uniform pick is degree-proportional
    let mut endpoints = Vec::new();
    let clique = attach + 1;
    for u in 0..clique {
        for v in u + 1..clique {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut chosen = Vec::with_capacity(attach);
    for v in clique..n {
        chosen.clear();
        while chosen.len() < attach {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.push((t, v));
            endpoints.push(t);
            endpoints.push(v);
        }
    }
    edges
}

/// Ring lattice with `ring_degree` neighbours per node: the `ring_degree / 2`
/// nearest on each side, plus the antipodal node when the degree is odd.
pub(crate) fn ring_lattice(n: usize, ring_degree: usize) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for j in 1..=ring_degree / 2 {
            edges.push(key(u, (u + j) % n));
        }
        if ring_degree % 2 == 1 && u < n / 2 {
            edges.push((u, u + n / 2));
        }
    }
    // small rings wrap onto themselves; keep the first occurrence
    let mut seen = HashSet::new();
    edges.retain(|e| seen.insert(*e));
    edges
}

fn watts_strogatz(
    n: usize,
    ring_degree: usize,
    rewire_prob: f64,
    rng: &mut seed::Rng,
) -> Vec<(NodeId, NodeId)> {
    let mut edges = ring_lattice(n, ring_degree);
    let mut present: HashSet<(NodeId, NodeId)> = edges.iter().copied().collect();
    let mut degree = vec![0usize; n];
    for &(u, v) in &edges {
        degree[u] += 1;
        degree[v] += 1;
    }
    for edge in edges.iter_mut() {
        if rewire_prob == 0.0 || !rng.random_bool(rewire_prob) {
            continue;
        }
        let (u, old) = *edge;
        if degree[u] >= n - 1 {
            continue;
        }
        let w = loop {
            let w = rng.random_range(0..n);
            if w != u && !present.contains(&key(u, w)) {
                break w;
            }
        };
        present.remove(&key(u, old));
        present.insert(key(u, w));
        degree[old] -= 1;
        degree[w] += 1;
        *edge = key(u, w);
    }
    edges
}

fn erdos_renyi(n: usize, p: f64, rng: &mut seed::Rng) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    if p == 0.0 {
        return edges;
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Samples a degree sequence from the discrete power law on [1, n-1].
pub(crate) fn power_law_degrees(n: usize, exponent: f64, rng: &mut seed::Rng) -> Vec<usize> {
    let weights: Vec<f64> = (1..n).map(|k| (k as f64).powf(-exponent)).collect();
    let dist = WeightedIndex::new(&weights).expect("power-law weights are positive");
    let mut degrees: Vec<usize> = (0..n).map(|_| dist.sample(rng) + 1).collect();
    if degrees.iter().sum::<usize>() % 2 == 1 {
        let last = n - 1;
        if degrees[last] < n - 1 {
            degrees[last] += 1;
        } else {
            degrees[last] -= 1;
        }
    }
    degrees
}

const STUB_ROUNDS: usize = 32;

fn configuration(n: usize, exponent: f64, rng: &mut seed::Rng) -> Vec<(NodeId, NodeId)> {
    let degrees = power_law_degrees(n, exponent, rng);
    let mut stubs: Vec<NodeId> = degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &k)| std::iter::repeat_n(v, k))
        .collect();
    let mut edges = Vec::new();
    let mut present = HashSet::new();
    // pair stubs; colliding pairs (loops, multi-edges) go back for another round
    for _ in 0..STUB_ROUNDS {
        if stubs.len() < 2 {
            break;
        }
        stubs.shuffle(rng);
        let mut rejected = Vec::new();
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u != v && present.insert(key(u, v)) {
                edges.push(key(u, v));
            } else {
                rejected.extend_from_slice(pair);
            }
        }
        stubs = rejected;
    }
    edges
}

/// Writes the edge-list format: a `# n=<n> d=<d>` header, then one
/// `src dst f_1 .. f_d` line per arc.
pub fn save_graph(graph: &Graph, path: &Path) -> Result<()> {
    fs::write(path, graph_to_string(graph)).map_err(|e| Error::io(path, e))
}

pub fn graph_to_string(graph: &Graph) -> String {
    let mut out = String::new();
    writeln!(out, "# n={} d={}", graph.node_count(), graph.feature_dim()).unwrap();
    for e in 0..graph.arc_count() {
        write!(out, "{} {}", graph.src(e), graph.dst(e)).unwrap();
        for x in graph.features(e) {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text, path)
}

pub fn parse_graph(text: &str, path: &Path) -> Result<Graph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, d) = loop {
        let Some((no, line)) = lines.next() else {
            return Err(err(1, "missing '# n=<n> d=<d>' header".into()));
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        break parse_header(line).ok_or_else(|| err(no, format!("bad header '{line}'")))?;
    };

    let mut arcs = Vec::new();
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != d + 2 {
            return Err(err(
                no,
                format!("expected {} columns (src dst + {d} features), found {}", d + 2, cols.len()),
            ));
        }
        let node = |s: &str| -> Result<NodeId> {
            let v: NodeId = s
                .parse()
                .map_err(|_| err(no, format!("bad node index '{s}'")))?;
            if v >= n {
                return Err(err(no, format!("node index {v} >= n={n}")));
            }
            Ok(v)
        };
        let src = node(cols[0])?;
        let dst = node(cols[1])?;
        let features = cols[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| err(no, format!("bad feature '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        arcs.push((no, Arc { src, dst, features }));
    }

    let lines_of: Vec<usize> = arcs.iter().map(|(no, _)| *no).collect();
    Graph::from_arcs(n, d, arcs.into_iter().map(|(_, a)| a).collect()).map_err(|e| match e {
        Error::Param(msg) => {
            let line = msg
                .strip_prefix("arc ")
                .and_then(|rest| rest.split_whitespace().next())
                .and_then(|i| i.parse::<usize>().ok())
                .and_then(|i| lines_of.get(i).copied())
                .unwrap_or(0);
            err(line, msg)
        }
        other => other,
    })
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix('#')?;
    let mut n = None;
    let mut d = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse().ok();
        }
    }
    Some((n?, d?))
}
