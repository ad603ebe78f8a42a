//! Generalized linear hyperparametric edge-probability models and sampling of
//! hyperparameter covers.
//!
//! A model maps a global hyperparameter `θ ∈ [-B, B]^d` to edge probabilities
//! `p_e = h(θᵀx_e)` where `x_e` are the arc features and `h` is a 1-Lipschitz
//! link into [0, 1]. Since every feature lies in [-1, 1], the probability map
//! is 1-Lipschitz in `θ` under the ℓ1 norm, and the influence function is
//! `n·m`-Lipschitz. A uniform sample of the box then covers the parameter
//! space, and hence the function space, with high probability.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// `clamp(z, 0, 1)`
    Linear,
    /// `1 / (1 + e^-z)`
    Logistic,
    /// Standard normal CDF.
    Probit,
}

impl Link {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Link::Linear => z.clamp(0.0, 1.0),
            Link::Logistic => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let t = z.exp();
                    t / (1.0 + t)
                }
            }
            Link::Probit => normal_cdf(z),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Linear => "linear",
            Link::Logistic => "logistic",
            Link::Probit => "probit",
        }
    }

    pub fn parse(s: &str) -> Result<Link> {
        match s {
            "linear" => Ok(Link::Linear),
            "logistic" | "sigmoid" => Ok(Link::Logistic),
            "probit" => Ok(Link::Probit),
            other => Err(Error::param(format!("unknown link '{other}'"))),
        }
    }
}

/// Φ(z) via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// A hyperparameter vector θ.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameter(pub Vec<f64>);

impl Hyperparameter {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l1_distance(&self, other: &Hyperparameter) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Edge probabilities in arc order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<ProbVector> {
        if let Some((e, x)) = p.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::param(format!("probability {x} of arc {e} outside [0, 1]")));
        }
        Ok(ProbVector(p))
    }

    pub fn uniform(m: usize, p: f64) -> Result<ProbVector> {
        ProbVector::new(vec![p; m])
    }

    pub fn check_graph(&self, graph: &Graph) -> Result<()> {
        if self.0.len() != graph.arc_count() {
            return Err(Error::param(format!(
                "probability vector has length {}, graph has {} arcs",
                self.0.len(),
                graph.arc_count()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, e: usize) -> &f64 {
        &self.0[e]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperModel {
    link: Link,
    bound: f64,
    dim: usize,
}

const LIPSCHITZ_GRID: usize = 4096;

impl HyperModel {
    /// Validates the box and checks numerically that the link is 1-Lipschitz
    /// with range in [0, 1] over `[-B·d, B·d]`, the reachable range of `θᵀx`.
    pub fn new(link: Link, bound: f64, dim: usize) -> Result<HyperModel> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::param(format!("box half-width B={bound} must be positive")));
        }
        if dim == 0 {
            return Err(Error::param("hyperparameter dimension must be at least 1"));
        }
        let reach = bound * dim as f64;
        let step = 2.0 * reach / LIPSCHITZ_GRID as f64;
        let mut prev = link.apply(-reach);
        for i in 1..=LIPSCHITZ_GRID {
            let z = -reach + step * i as f64;
            let cur = link.apply(z);
            if !(0.0..=1.0).contains(&cur) || (cur - prev).abs() > step * (1.0 + 1e-9) {
                return Err(Error::param(format!(
                    "link {} is not 1-Lipschitz into [0, 1] near z={z}",
                    link.name()
                )));
            }
            prev = cur;
        }
        Ok(HyperModel { link, bound, dim })
    }

    /// Logistic link on `[-1, 1]^5`.
    pub fn experimental() -> HyperModel {
        HyperModel::new(Link::Logistic, 1.0, 5).expect("default model is valid")
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn check_theta(&self, theta: &Hyperparameter) -> Result<()> {
        if theta.dim() != self.dim {
            return Err(Error::param(format!(
                "hyperparameter has dimension {}, model expects {}",
                theta.dim(),
                self.dim
            )));
        }
        if let Some(x) = theta.0.iter().find(|x| x.abs() > self.bound) {
            return Err(Error::param(format!("hyperparameter coordinate {x} outside [-B, B]")));
        }
        Ok(())
    }

    pub fn edge_probabilities(&self, theta: &Hyperparameter, graph: &Graph) -> Result<ProbVector> {
        self.check_theta(theta)?;
        if graph.feature_dim() != self.dim {
            return Err(Error::param(format!(
                "graph features have dimension {}, model expects {}",
                graph.feature_dim(),
                self.dim
            )));
        }
        let p = (0..graph.arc_count())
            .map(|e| {
                let z: f64 = graph.features(e).iter().zip(&theta.0).map(|(x, t)| x * t).sum();
                self.link.apply(z)
            })
            .collect();
        Ok(ProbVector(p))
    }

    pub fn sample_uniform(&self, rng: &mut seed::Rng) -> Hyperparameter {
        Hyperparameter(
            (0..self.dim)
                .map(|_| rng.random_range(-self.bound..=self.bound))
                .collect(),
        )
    }
}

/// Free-function form of [`HyperModel::edge_probabilities`].
pub fn edge_probabilities(
    model: &HyperModel,
    theta: &Hyperparameter,
    graph: &Graph,
) -> Result<ProbVector> {
    model.edge_probabilities(theta, graph)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    pub thetas: Vec<Hyperparameter>,
    pub epsilon_theta: f64,
    pub delta: f64,
    pub bound: f64,
}

impl Cover {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.thetas.first().map_or(0, Hyperparameter::dim)
    }

    /// Index and ℓ1 distance of the cover point closest to `theta`.
    pub fn nearest(&self, theta: &Hyperparameter) -> (usize, f64) {
        self.thetas
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t.l1_distance(theta)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }
}

/// Sizes of a cover sample: the ℓ1 covering number `r` of the box and the
/// sample count `s = ⌈r·ln(r/δ)⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverSize {
    pub covering_number: u64,
    pub samples: u64,
}

pub fn cover_size(model: &HyperModel, epsilon_theta: f64, delta: f64) -> Result<CoverSize> {
    if !(epsilon_theta.is_finite() && epsilon_theta > 0.0) {
        return Err(Error::param(format!("epsilon_theta={epsilon_theta} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta={delta} must lie in (0, 1)")));
    }
    let too_big = || {
        Error::capacity(format!(
            "cover size for epsilon_theta={epsilon_theta}, d={} overflows a 64-bit count; \
             supply an explicit sample count (s_override)",
            model.dim
        ))
    };
    let base = 2.0 * model.bound * model.dim as f64 / epsilon_theta;
    let raw = base.powi(model.dim as i32);
    // (2Bd/ε)^d is often an exact integer; keep float noise from bumping it
    let r = (raw * (1.0 - 1e-12)).ceil().max(1.0);
    if !r.is_finite() || r >= u64::MAX as f64 {
        return Err(too_big());
    }
    let s = (r * (r / delta).ln()).ceil().max(1.0);
    if !s.is_finite() || s >= u64::MAX as f64 {
        return Err(too_big());
    }
    Ok(CoverSize {
        covering_number: r as u64,
        samples: s as u64,
    })
}

/// Largest cover this library will materialize.
pub const MAX_COVER_POINTS: u64 = 50_000_000;

/// Draws a cover of `[-B, B]^d` by i.i.d. uniform sampling. The sample count
/// follows [`cover_size`] unless `s_override` is given.
pub fn sample_cover(
    model: &HyperModel,
    epsilon_theta: f64,
    delta: f64,
    s_override: Option<usize>,
    rng_seed: u64,
) -> Result<Cover> {
    let s = match s_override {
        Some(0) => return Err(Error::param("cover sample count must be at least 1")),
        Some(s) => {
            // still validates epsilon/delta when an override is supplied
            if !(epsilon_theta > 0.0) || !(delta > 0.0 && delta < 1.0) {
                cover_size(model, epsilon_theta, delta)?;
            }
            s as u64
        }
        None => cover_size(model, epsilon_theta, delta)?.samples,
    };
    if s > MAX_COVER_POINTS {
        return Err(Error::capacity(format!(
            "cover of {s} points exceeds the limit of {MAX_COVER_POINTS}; supply s_override"
        )));
    }
    let mut rng = seed::rng(rng_seed);
    let thetas = (0..s).map(|_| model.sample_uniform(&mut rng)).collect();
    Ok(Cover {
        thetas,
        epsilon_theta,
        delta,
        bound: model.bound,
    })
}

/// Lipschitz constant `n·m` of the influence function in θ.
pub fn lipschitz_bound(graph: &Graph) -> f64 {
    graph.node_count() as f64 * graph.arc_count() as f64
}

/// Parameter-space radius that yields an `epsilon_value` cover in function value.
pub fn function_cover_radius(epsilon_value: f64, graph: &Graph) -> Result<f64> {
    if !(epsilon_value > 0.0) {
        return Err(Error::param(format!("epsilon_value={epsilon_value} must be positive")));
    }
    let l = lipschitz_bound(graph);
    if l == 0.0 {
        return Err(Error::param("Lipschitz bound is zero (graph has no arcs)"));
    }
    Ok(epsilon_value / l)
}

pub fn cover_to_string(cover: &Cover) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# d={} B={} eps={} s={}",
        cover.dim(),
        cover.bound,
        cover.epsilon_theta,
        cover.len()
    )
    .unwrap();
    for t in &cover.thetas {
        let line: Vec<String> = t.0.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

pub fn save_cover(cover: &Cover, path: &Path) -> Result<()> {
    fs::write(path, cover_to_string(cover)).map_err(|e| Error::io(path, e))
}

/// Reads a cover file. `delta` is not stored in the file and comes back as NaN.
pub fn load_cover(path: &Path) -> Result<Cover> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut d = None;
    let mut bound = None;
    let mut eps = f64::NAN;
    let mut thetas = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                let (k, v) = tok.split_once('=').unwrap_or((tok, ""));
                match k {
                    "d" => d = v.parse::<usize>().ok(),
                    "B" => bound = v.parse::<f64>().ok(),
                    "eps" => eps = v.parse().unwrap_or(f64::NAN),
                    _ => {}
                }
            }
            continue;
        }
        let dim = d.ok_or_else(|| err(no, "data before '# d=.. B=..' header".into()))?;
        let theta = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| err(no, format!("bad value '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        if theta.len() != dim {
            return Err(err(no, format!("expected {dim} values, found {}", theta.len())));
        }
        thetas.push(Hyperparameter(theta));
    }
    let bound = bound.ok_or_else(|| err(1, "missing B in header".into()))?;
    Ok(Cover {
        thetas,
        epsilon_theta: eps,
        delta: f64::NAN,
        bound,
    })
}
