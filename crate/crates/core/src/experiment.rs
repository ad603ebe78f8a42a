//! Deterministic experiment runners and the end-to-end pipeline.
//!
//! Every run is split into units, one per `(trial, graph model)`. A unit's
//! randomness is keyed to `derive(seed, [experiment, trial, model])`, so units
//! can run in any order, on any number of threads, and produce the same rows.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{
    derive_intervals, lu_greedy_orders, per_function_greedy_orders, random_greedy_choice, random_seed,
    top_k_degree,
};
use crate::cascade::SeedSet;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::graph::{generate_graph, load_graph, save_graph, Graph, ModelKind};
use crate::hypermodel::{sample_cover, save_cover, Cover, HyperModel};
use crate::optimize::{
    bicriteria_union, evaluate_many, greedy_order, hiro, Candidate, EvalMode, FunctionFamily, HiroConfig,
    HiroRun, RobustReport, WeightVector,
};
use crate::report::{diagnostics_csv, results_csv, summarize, summary_csv, write_file, ResultRow};
use crate::seed;

const TAG_GRAPH: u64 = 1;
const TAG_COVER: u64 = 2;
const TAG_TRAIN: u64 = 3;
const TAG_EVAL: u64 = 4;
const TAG_VALIDATION: u64 = 5;
const TAG_RANDOM: u64 = 6;
const TAG_RANDOM_GREEDY: u64 = 7;
const TAG_LU: u64 = 8;
const TAG_DRAW: u64 = 9;

/// Experiment id used for the single-shot pipeline.
pub const PIPELINE: u32 = 0;

// Nominal accuracy recorded with covers whose size is set directly.
const NOMINAL_EPSILON: f64 = 1.0;
const NOMINAL_DELTA: f64 = 0.1;

pub const ALGORITHMS: [&str; 5] = ["hiro", "random", "degree", "random-greedy", "lu-greedy"];

/// Graph model label used when the graph comes from a file.
pub const FILE_MODEL: &str = "file";

#[derive(Debug, Clone, Copy)]
struct Unit {
    trial: usize,
    model_index: usize,
    kind: Option<ModelKind>,
}

impl Unit {
    fn label(&self) -> &'static str {
        self.kind.map_or(FILE_MODEL, ModelKind::name)
    }
}

fn units(cfg: &ExperimentConfig, trials: usize) -> Vec<Unit> {
    let kinds: Vec<Option<ModelKind>> = if cfg.graph_path.is_some() {
        vec![None]
    } else {
        cfg.models.iter().copied().map(Some).collect()
    };
    (0..trials)
        .flat_map(|trial| {
            kinds.iter().enumerate().map(move |(model_index, &kind)| Unit {
                trial,
                model_index,
                kind,
            })
        })
        .collect()
}

/// Base seed of one `(experiment, trial, model)` unit.
pub fn unit_seed(base: u64, experiment: u32, trial: usize, model_index: usize) -> u64 {
    seed::derive(base, &[experiment as u64, trial as u64, model_index as u64])
}

fn unit_graph(cfg: &ExperimentConfig, file_graph: Option<&Graph>, unit: &Unit, useed: u64) -> Result<Graph> {
    match (unit.kind, file_graph) {
        (Some(kind), _) => generate_graph(&cfg.generator(kind), seed::derive(useed, &[TAG_GRAPH])),
        (None, Some(g)) => Ok(g.clone()),
        (None, None) => unreachable!("file-backed unit without a graph"),
    }
}

fn cover(model: &HyperModel, l: usize, seed: u64) -> Result<Cover> {
    sample_cover(model, NOMINAL_EPSILON, NOMINAL_DELTA, Some(l), seed)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, u64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_millis() as u64))
}

struct RowBuilder<'a> {
    cfg: &'a ExperimentConfig,
    experiment: u32,
    unit: Unit,
}

impl RowBuilder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(&self, k: usize, l: usize, rounds: usize, algorithm: &str, value: f64, stderr: f64, ms: u64) -> ResultRow {
        ResultRow {
            experiment: self.experiment,
            trial: self.unit.trial,
            graph_model: self.unit.label().to_string(),
            k,
            l,
            rounds,
            algorithm: algorithm.to_string(),
            min_value: value,
            stderr,
            wall_time_ms: self.cfg.record_timing.then_some(ms),
        }
    }

    fn report_row(&self, k: usize, l: usize, rounds: usize, algorithm: &str, r: &RobustReport, ms: u64) -> ResultRow {
        self.row(k, l, rounds, algorithm, r.min_value, r.min_stderr(), ms)
    }
}

fn hiro_config(cfg: &ExperimentConfig, k: usize, rounds: usize) -> HiroConfig {
    HiroConfig {
        k,
        rounds,
        eta: cfg.eta,
    }
}

fn run_units(
    cfg: &ExperimentConfig,
    experiment: u32,
    trials: usize,
    body: impl Fn(&Graph, RowBuilder, u64) -> Result<Vec<ResultRow>> + Sync,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let file_graph = cfg.graph_path.as_deref().map(load_graph).transpose()?;
    let per_unit: Vec<Vec<ResultRow>> = units(cfg, trials)
        .into_par_iter()
        .map(|unit| {
            let useed = unit_seed(cfg.seed, experiment, unit.trial, unit.model_index);
            let graph = unit_graph(cfg, file_graph.as_ref(), &unit, useed)?;
            body(
                &graph,
                RowBuilder {
                    cfg,
                    experiment,
                    unit,
                },
                useed,
            )
        })
        .collect::<Result<_>>()?;
    // collect() keeps unit order: (trial, model), then grid order within a unit
    Ok(per_unit.into_iter().flatten().collect())
}

/// Experiment 1: robust value on a held-out validation cover as a function of
/// the number `r` of training functions.
pub fn run_experiment_1(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = cfg.model()?;
    let r_max = *cfg.exp1_r_grid.iter().max().expect("validated nonempty");
    run_units(cfg, 1, cfg.trials, |graph, rows, useed| {
        let validation = cover(&model, cfg.validation_l, seed::derive(useed, &[TAG_VALIDATION]))?;
        let training = cover(&model, r_max, seed::derive(useed, &[TAG_COVER]))?;
        let family = FunctionFamily::from_cover(
            graph,
            &model,
            &training.thetas,
            cfg.r_train,
            seed::derive(useed, &[TAG_TRAIN]),
        )?;
        let validation_probs = validation
            .thetas
            .iter()
            .map(|t| model.edge_probabilities(t, graph))
            .collect::<Result<Vec<_>>>()?;

        let mut grid = Vec::new();
        let mut candidates = Vec::new();
        for &k in &cfg.k_list {
            for &r in &cfg.exp1_r_grid {
                let sub = family.truncated(r)?;
                let (run, ms) = timed(|| hiro(&sub, &hiro_config(cfg, k, cfg.rounds)))?;
                grid.push((k, r, ms));
                candidates.push(Candidate::Mixed(run.strategy));
            }
        }
        let reports = evaluate_many(
            graph,
            &validation_probs,
            &candidates,
            EvalMode::Sampled {
                replicates: cfg.r_eval,
                rng_seed: seed::derive(useed, &[TAG_EVAL]),
            },
        )?;
        Ok(grid
            .iter()
            .zip(&reports)
            .map(|(&(k, r, ms), rep)| rows.report_row(k, r, cfg.rounds, "hiro", rep, ms))
            .collect())
    })
}

/// Experiment 2: robust value as a function of the number of HIRO rounds.
/// All runs of a unit share its cover and evaluation pools.
pub fn run_experiment_2(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = cfg.model()?;
    run_units(cfg, 2, cfg.trials, |graph, rows, useed| {
        let family = training_family(cfg, &model, graph, useed)?;
        let mut grid = Vec::new();
        let mut candidates = Vec::new();
        for &k in &cfg.k_list {
            for &t in &cfg.exp2_t_grid {
                let (run, ms) = timed(|| hiro(&family, &hiro_config(cfg, k, t)))?;
                grid.push((k, t, ms));
                candidates.push(Candidate::Mixed(run.strategy));
            }
        }
        let reports = evaluate_many(graph, family.probs(), &candidates, eval_mode(cfg, useed))?;
        Ok(grid
            .iter()
            .zip(&reports)
            .map(|(&(k, t, ms), rep)| rows.report_row(k, cfg.l, t, "hiro", rep, ms))
            .collect())
    })
}

fn training_family<'g>(
    cfg: &ExperimentConfig,
    model: &HyperModel,
    graph: &'g Graph,
    useed: u64,
) -> Result<FunctionFamily<'g>> {
    let training = cover(model, cfg.l, seed::derive(useed, &[TAG_COVER]))?;
    FunctionFamily::from_cover(graph, model, &training.thetas, cfg.r_train, seed::derive(useed, &[TAG_TRAIN]))
}

fn eval_mode(cfg: &ExperimentConfig, useed: u64) -> EvalMode {
    EvalMode::Sampled {
        replicates: cfg.r_eval,
        rng_seed: seed::derive(useed, &[TAG_EVAL]),
    }
}

/// HIRO and the four baselines at every budget, evaluated against one unit's
/// cover. Returns the rows and, per budget, the HIRO run.
fn compare_algorithms(
    cfg: &ExperimentConfig,
    family: &FunctionFamily,
    ks: &[usize],
    rows: &RowBuilder,
    useed: u64,
) -> Result<(Vec<ResultRow>, Vec<HiroRun>)> {
    let graph = family.graph();
    let k_max = *ks.iter().max().expect("nonempty budget list");

    // selection orders shared across budgets: any prefix is the greedy answer
    let (rg_orders, rg_ms) = timed(|| per_function_greedy_orders(family, k_max))?;
    let (lu, lu_ms) = timed(|| {
        let bounds = derive_intervals(family)?;
        lu_greedy_orders(graph, &bounds, k_max, cfg.r_train, seed::derive(useed, &[TAG_LU]))
    })?;

    struct Entry {
        k: usize,
        algorithm: &'static str,
        first: usize,
        count: usize,
        ms: u64,
    }
    let mut entries = Vec::new();
    let mut candidates = Vec::new();
    let mut runs = Vec::new();
    for &k in ks {
        let (run, ms) = timed(|| hiro(family, &hiro_config(cfg, k, cfg.rounds)))?;
        entries.push(Entry { k, algorithm: "hiro", first: candidates.len(), count: 1, ms });
        candidates.push(Candidate::Mixed(run.strategy.clone()));
        runs.push(run);

        let (sets, ms) = timed(|| random_seed(graph, k, cfg.random_trials, seed::derive(useed, &[TAG_RANDOM, k as u64])))?;
        entries.push(Entry { k, algorithm: "random", first: candidates.len(), count: sets.len(), ms });
        candidates.extend(sets.into_iter().map(Candidate::Set));

        let (set, ms) = timed(|| top_k_degree(graph, k))?;
        entries.push(Entry { k, algorithm: "degree", first: candidates.len(), count: 1, ms });
        candidates.push(Candidate::Set(set));

        let choice = random_greedy_choice(family.len(), seed::derive(useed, &[TAG_RANDOM_GREEDY, k as u64]));
        entries.push(Entry { k, algorithm: "random-greedy", first: candidates.len(), count: 1, ms: rg_ms });
        candidates.push(Candidate::Set(SeedSet::new(rg_orders[choice][..k].to_vec(), graph.node_count())?));

        entries.push(Entry { k, algorithm: "lu-greedy", first: candidates.len(), count: 1, ms: lu_ms });
        candidates.push(Candidate::Set(lu.choose(k)));
    }

    let reports = evaluate_many(graph, family.probs(), &candidates, eval_mode(cfg, useed))?;
    let out = entries
        .iter()
        .map(|e| {
            let reps = &reports[e.first..e.first + e.count];
            if e.count == 1 {
                rows.report_row(e.k, family.len(), cfg.rounds, e.algorithm, &reps[0], e.ms)
            } else {
                // averaged over independent draws; stderr across draws
                let vals: Vec<f64> = reps.iter().map(|r| r.min_value).collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                rows.row(e.k, family.len(), cfg.rounds, e.algorithm, mean, (var / n).sqrt(), e.ms)
            }
        })
        .collect();
    Ok((out, runs))
}

/// Experiment 3: HIRO against the four baselines, for every budget and graph
/// model.
pub fn run_experiment_3(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = cfg.model()?;
    run_units(cfg, 3, cfg.trials, |graph, rows, useed| {
        let family = training_family(cfg, &model, graph, useed)?;
        Ok(compare_algorithms(cfg, &family, &cfg.k_list, &rows, useed)?.0)
    })
}

/// Algorithm label of the greedy subset of the union at fraction `beta`.
pub fn union_label(beta: f64) -> String {
    format!("union-beta-{beta}")
}

/// Experiment 4: the size-k mixed strategy against greedy subsets of size
/// `⌈β·|union|⌉` drawn from the union of its sets.
pub fn run_experiment_4(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = cfg.model()?;
    let k = cfg.exp4_k;
    run_units(cfg, 4, cfg.trials, |graph, rows, useed| {
        let family = training_family(cfg, &model, graph, useed)?;
        let (run, hiro_ms) = timed(|| hiro(&family, &hiro_config(cfg, k, cfg.rounds)))?;
        let union = bicriteria_union(&run.strategy);
        let uniform = WeightVector::uniform(family.len());

        let mut grid = vec![("hiro".to_string(), k, hiro_ms)];
        let mut candidates = vec![Candidate::Mixed(run.strategy)];
        for &beta in &cfg.exp4_betas {
            let size = ((beta * union.set.len() as f64).ceil() as usize).clamp(1, union.set.len());
            let (order, ms) = timed(|| greedy_order(&family, &uniform, size, Some(union.set.nodes())))?;
            grid.push((union_label(beta), size, hiro_ms + ms));
            candidates.push(Candidate::Set(SeedSet::new(order, graph.node_count())?));
        }
        let reports = evaluate_many(graph, family.probs(), &candidates, eval_mode(cfg, useed))?;
        Ok(grid
            .iter()
            .zip(&reports)
            .map(|((alg, size, ms), rep)| rows.report_row(*size, cfg.l, cfg.rounds, alg, rep, *ms))
            .collect())
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, experiment: u32) -> Result<Vec<ResultRow>> {
    match experiment {
        1 => run_experiment_1(cfg),
        2 => run_experiment_2(cfg),
        3 => run_experiment_3(cfg),
        4 => run_experiment_4(cfg),
        other => Err(crate::Error::param(format!("unknown experiment {other} (1-4)"))),
    }
}

/// The configuration followed by the derived seed of every unit, as comments.
pub fn manifest(cfg: &ExperimentConfig, experiment: u32, trials: usize) -> String {
    let mut out = cfg.to_manifest();
    out.push_str(&format!("# experiment={experiment}\n"));
    for u in units(cfg, trials) {
        out.push_str(&format!(
            "# unit trial={} model={} seed={}\n",
            u.trial,
            u.label(),
            unit_seed(cfg.seed, experiment, u.trial, u.model_index)
        ));
    }
    out
}

/// Files written by [`write_experiment`] or [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub rows: Vec<ResultRow>,
    pub files: Vec<PathBuf>,
}

/// Runs one experiment and writes `exp<N>_results.csv`, `exp<N>_summary.csv`
/// and `exp<N>_manifest.txt` into `out_dir`.
pub fn write_experiment(cfg: &ExperimentConfig, experiment: u32, out_dir: &Path) -> Result<Artifacts> {
    let rows = run_experiment(cfg, experiment)?;
    let results = out_dir.join(format!("exp{experiment}_results.csv"));
    let summary = out_dir.join(format!("exp{experiment}_summary.csv"));
    let manifest_path = out_dir.join(format!("exp{experiment}_manifest.txt"));
    write_file(&results, &results_csv(&rows, cfg.record_timing))?;
    write_file(&summary, &summary_csv(&summarize(&rows)))?;
    write_file(&manifest_path, &manifest(cfg, experiment, cfg.trials))?;
    Ok(Artifacts {
        rows,
        files: vec![results, summary, manifest_path],
    })
}

/// Inputs shared by the single-shot commands: the graph and the training
/// family of trial 0 of the first model (or the configured graph file).
pub struct PipelineInputs {
    pub graph: Graph,
    pub model_label: &'static str,
    pub cover: Cover,
    pub unit_seed: u64,
}

pub fn pipeline_inputs(cfg: &ExperimentConfig) -> Result<PipelineInputs> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let unit = units(cfg, 1)[0];
    let useed = unit_seed(cfg.seed, PIPELINE, 0, 0);
    let file_graph = cfg
        .graph_path
        .as_deref()
        .map(load_graph)
        .transpose()
        .map_err(|e| e.in_stage("load graph"))?;
    let graph = unit_graph(cfg, file_graph.as_ref(), &unit, useed).map_err(|e| e.in_stage("generate graph"))?;
    let model = cfg.model()?;
    let cover = cover(&model, cfg.l, seed::derive(useed, &[TAG_COVER])).map_err(|e| e.in_stage("sample cover"))?;
    Ok(PipelineInputs {
        graph,
        model_label: unit.label(),
        cover,
        unit_seed: useed,
    })
}

impl PipelineInputs {
    pub fn family<'g>(&'g self, cfg: &ExperimentConfig) -> Result<FunctionFamily<'g>> {
        FunctionFamily::from_cover(
            &self.graph,
            &cfg.model()?,
            &self.cover.thetas,
            cfg.r_train,
            seed::derive(self.unit_seed, &[TAG_TRAIN]),
        )
        .map_err(|e| e.in_stage("build pools"))
    }

    pub fn eval_mode(&self, cfg: &ExperimentConfig) -> EvalMode {
        eval_mode(cfg, self.unit_seed)
    }

    /// Seed for drawing one set from the pipeline's mixed strategy.
    pub fn draw_seed(&self) -> u64 {
        seed::derive(self.unit_seed, &[TAG_DRAW])
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub artifacts: Artifacts,
    pub run: HiroRun,
}

/// Graph → cover → pools → HIRO → evaluation against the baselines at budget
/// `k`. Writes `graph.txt`, `cover.txt`, `strategy.txt`, `results.csv`,
/// `diagnostics.csv` and `manifest.txt` into `out_dir`.
pub fn run_pipeline(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PipelineOutput> {
    let inputs = pipeline_inputs(cfg)?;
    let family = inputs.family(cfg)?;
    let rows = RowBuilder {
        cfg,
        experiment: PIPELINE,
        unit: units(cfg, 1)[0],
    };
    let (rows, mut runs) =
        compare_algorithms(cfg, &family, &[cfg.k], &rows, inputs.unit_seed).map_err(|e| e.in_stage("hiro/evaluate"))?;
    let run = runs.pop().expect("one budget");

    let files = vec![
        out_dir.join("graph.txt"),
        out_dir.join("cover.txt"),
        out_dir.join("strategy.txt"),
        out_dir.join("results.csv"),
        out_dir.join("diagnostics.csv"),
        out_dir.join("manifest.txt"),
    ];
    let write = || -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| crate::Error::io(out_dir, e))?;
        save_graph(&inputs.graph, &files[0])?;
        save_cover(&inputs.cover, &files[1])?;
        write_file(&files[2], &strategy_to_string(run.strategy.seed_sets()))?;
        write_file(&files[3], &results_csv(&rows, cfg.record_timing))?;
        write_file(&files[4], &diagnostics_csv(&run))?;
        write_file(&files[5], &manifest(cfg, PIPELINE, 1))
    };
    write().map_err(|e| e.in_stage("write artifacts"))?;
    Ok(PipelineOutput {
        artifacts: Artifacts { rows, files },
        run,
    })
}

/// One seed set per line, node ids separated by spaces.
pub fn strategy_to_string(sets: &[SeedSet]) -> String {
    sets.iter().map(|s| format!("{s}\n")).collect()
}

/// Parses [`strategy_to_string`] output.
pub fn parse_sets(text: &str, n: usize, path: &Path) -> Result<Vec<SeedSet>> {
    let mut sets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| crate::Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let nodes = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(format!("bad node id '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        sets.push(SeedSet::new(nodes, n).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(sets)
}
