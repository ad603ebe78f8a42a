//! Experiment configuration in a line-oriented `key=value` format.
//!
//! The same format serves as the run manifest: [`ExperimentConfig::to_manifest`]
//! writes every parameter, and feeding that file back through
//! [`ExperimentConfig::parse`] reproduces the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{FeatureDist, GeneratorSpec, GraphModel, ModelKind};
use crate::hypermodel::{HyperModel, Link};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// n = 100, 10 trials
    Desk,
    /// n = 500, 50 trials
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Scale> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::param(format!("unknown scale '{other}' (desk|paper)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub models: Vec<ModelKind>,
    pub graph_path: Option<PathBuf>,
    pub n: usize,
    pub d: usize,
    pub features: FeatureDist,
    pub ba_attach: usize,
    pub ws_ring_degree: usize,
    /// Defaults to 3/n.
    pub ws_rewire_prob: Option<f64>,
    /// Defaults to 3/n.
    pub er_edge_prob: Option<f64>,
    pub cm_exponent: f64,
    pub link: Link,
    pub bound: f64,
    pub l: usize,
    pub rounds: usize,
    pub eta: Option<f64>,
    pub k: usize,
    pub k_list: Vec<usize>,
    pub r_train: usize,
    pub r_eval: usize,
    pub trials: usize,
    pub random_trials: usize,
    pub validation_l: usize,
    pub exp1_r_grid: Vec<usize>,
    pub exp2_t_grid: Vec<usize>,
    pub exp4_k: usize,
    pub exp4_betas: Vec<f64>,
    pub seed: u64,
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn preset(scale: Scale) -> ExperimentConfig {
        let (n, trials, r_eval) = match scale {
            Scale::Desk => (100, 10, 2000),
            Scale::Paper => (500, 50, 10_000),
        };
        ExperimentConfig {
            scale,
            models: ModelKind::ALL.to_vec(),
            graph_path: None,
            n,
            d: 5,
            features: FeatureDist::UniformCube,
            ba_attach: 4,
            ws_ring_degree: 5,
            ws_rewire_prob: None,
            er_edge_prob: None,
            cm_exponent: 2.0,
            link: Link::Logistic,
            bound: 1.0,
            l: 20,
            rounds: 10,
            eta: None,
            k: 10,
            k_list: vec![10, 25, 50],
            r_train: 1000,
            r_eval,
            trials,
            random_trials: 100,
            validation_l: 50,
            exp1_r_grid: vec![1, 10, 20, 30, 40, 50],
            exp2_t_grid: vec![1, 5, 10, 15],
            exp4_k: 10,
            exp4_betas: vec![0.25, 0.5, 0.75, 1.0],
            seed: 0,
            record_timing: false,
        }
    }

    pub fn model(&self) -> Result<HyperModel> {
        HyperModel::new(self.link, self.bound, self.d)
    }

    pub fn generator(&self, kind: ModelKind) -> GeneratorSpec {
        let default = GraphModel::default_for(kind, self.n);
        let model = match default {
            GraphModel::BarabasiAlbert { .. } => GraphModel::BarabasiAlbert {
                attach: self.ba_attach,
            },
            GraphModel::WattsStrogatz { rewire_prob, .. } => GraphModel::WattsStrogatz {
                ring_degree: self.ws_ring_degree,
                rewire_prob: self.ws_rewire_prob.unwrap_or(rewire_prob),
            },
            GraphModel::ErdosRenyi { edge_prob } => GraphModel::ErdosRenyi {
                edge_prob: self.er_edge_prob.unwrap_or(edge_prob),
            },
            GraphModel::Configuration { .. } => GraphModel::Configuration {
                exponent: self.cm_exponent,
            },
        };
        GeneratorSpec {
            model,
            n: self.n,
            d: self.d,
            features: self.features,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        let positive = [
            ("n", self.n),
            ("l", self.l),
            ("T", self.rounds),
            ("k", self.k),
            ("r_train", self.r_train),
            ("r_eval", self.r_eval),
            ("trials", self.trials),
            ("random_trials", self.random_trials),
            ("validation_l", self.validation_l),
            ("exp4_k", self.exp4_k),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::param(format!("{name} must be at least 1")));
        }
        if self.models.is_empty() {
            return Err(Error::param("at least one graph model is required"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::param(format!("eta={eta} must be positive")));
            }
        }
        let ks = self.k_list.iter().chain([&self.k, &self.exp4_k]);
        if let Some(k) = ks.clone().find(|&&k| k == 0 || (self.graph_path.is_none() && k > self.n)) {
            return Err(Error::param(format!("budget {k} must lie in [1, n={}]", self.n)));
        }
        if self.k_list.is_empty() || self.exp1_r_grid.is_empty() || self.exp2_t_grid.is_empty() {
            return Err(Error::param("sweep grids must be nonempty"));
        }
        if self.exp1_r_grid.contains(&0) || self.exp2_t_grid.contains(&0) {
            return Err(Error::param("sweep grid entries must be at least 1"));
        }
        if self.exp4_betas.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(Error::param("beta grid entries must lie in (0, 1]"));
        }
        if self.graph_path.is_none() {
            for &kind in &self.models {
                self.generator(kind).validate()?;
            }
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored. A `scale` key resets to that preset first.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected key=value, found '{line}'"),
                });
            };
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::preset(Scale::Desk);
        if let Some(scale) = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix("scale="))
            .next_back()
        {
            cfg = ExperimentConfig::preset(Scale::parse(scale.trim())?);
        }
        cfg.apply_text(text, path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::param(format!("bad value '{v}' for {key}")))
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        fn opt(key: &str, v: &str) -> Result<Option<f64>> {
            if v == "default" || v.is_empty() {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "scale" => self.scale = Scale::parse(value)?,
            "models" => {
                self.models = value
                    .split(',')
                    .map(|s| ModelKind::parse(s.trim()))
                    .collect::<Result<_>>()?
            }
            "graph_path" => {
                self.graph_path = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "n" => self.n = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "features" => self.features = FeatureDist::parse(value)?,
            "ba_attach" => self.ba_attach = num(key, value)?,
            "ws_ring_degree" => self.ws_ring_degree = num(key, value)?,
            "ws_rewire_prob" => self.ws_rewire_prob = opt(key, value)?,
            "er_edge_prob" => self.er_edge_prob = opt(key, value)?,
            "cm_exponent" => self.cm_exponent = num(key, value)?,
            "link" => self.link = Link::parse(value)?,
            "B" | "bound" => self.bound = num(key, value)?,
            "l" => self.l = num(key, value)?,
            "T" | "rounds" => self.rounds = num(key, value)?,
            "eta" => self.eta = opt(key, value)?,
            "k" => self.k = num(key, value)?,
            "k_list" => self.k_list = list(key, value)?,
            "r_train" => self.r_train = num(key, value)?,
            "r_eval" => self.r_eval = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "random_trials" => self.random_trials = num(key, value)?,
            "validation_l" => self.validation_l = num(key, value)?,
            "exp1_r_grid" => self.exp1_r_grid = list(key, value)?,
            "exp2_t_grid" => self.exp2_t_grid = list(key, value)?,
            "exp4_k" => self.exp4_k = num(key, value)?,
            "exp4_betas" => self.exp4_betas = list(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "record_timing" => self.record_timing = num(key, value)?,
            other => return Err(Error::param(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Every parameter as `key=value` lines, in a fixed order.
    pub fn to_manifest(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let opt = |v: Option<f64>| v.map_or_else(|| "default".to_string(), |x| x.to_string());
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
        kv("scale", self.scale.name().into());
        kv("models", self.models.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
        kv(
            "graph_path",
            self.graph_path
                .as_ref()
                .map_or_else(|| "none".into(), |p| p.display().to_string()),
        );
        kv("n", self.n.to_string());
        kv("d", self.d.to_string());
        kv("features", self.features.name().into());
        kv("ba_attach", self.ba_attach.to_string());
        kv("ws_ring_degree", self.ws_ring_degree.to_string());
        kv("ws_rewire_prob", opt(self.ws_rewire_prob));
        kv("er_edge_prob", opt(self.er_edge_prob));
        kv("cm_exponent", self.cm_exponent.to_string());
        kv("link", self.link.name().into());
        kv("B", self.bound.to_string());
        kv("l", self.l.to_string());
        kv("T", self.rounds.to_string());
        kv("eta", opt(self.eta));
        kv("k", self.k.to_string());
        kv("k_list", join(&self.k_list));
        kv("r_train", self.r_train.to_string());
        kv("r_eval", self.r_eval.to_string());
        kv("trials", self.trials.to_string());
        kv("random_trials", self.random_trials.to_string());
        kv("validation_l", self.validation_l.to_string());
        kv("exp1_r_grid", join(&self.exp1_r_grid));
        kv("exp2_t_grid", join(&self.exp2_t_grid));
        kv("exp4_k", self.exp4_k.to_string());
        kv("exp4_betas", join(&self.exp4_betas));
        kv("seed", self.seed.to_string());
        kv("record_timing", self.record_timing.to_string());
        out
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset(Scale::Desk)
    }
}
