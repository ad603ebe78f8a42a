use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hyperim::baselines::{derive_intervals, lu_greedy, random_greedy, random_seed, top_k_degree};
use hyperim::cascade::SeedSet;
use hyperim::config::{ExperimentConfig, Scale};
use hyperim::experiment::{parse_sets, pipeline_inputs, run_pipeline, strategy_to_string, write_experiment};
use hyperim::graph::{generate_graph, load_graph, save_graph, FeatureDist, GeneratorSpec, GraphModel, ModelKind};
use hyperim::hypermodel::ProbVector;
use hyperim::optimize::{evaluate_many, Candidate, EvalMode, MixedStrategy, RobustReport};
use hyperim::report::{fmt_g, write_file};
use hyperim::verify::{improper_gap_instance, lipschitz_tight_instance, load_probs, ratio_gap_instance, Fixture};
use hyperim::{seed, Error, Result};

/// Robust influence maximization over hyperparametric cascade models.
#[derive(Parser)]
#[command(name = "hyperim", version)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// key=value configuration file; its keys override the preset
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum)]
    scale: Option<ScaleArg>,
    /// Extra key=value setting, applied after the config file (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph with edge features
    Generate(GenerateArgs),
    /// Run HIRO end to end: graph, cover, pools, HIRO, evaluation vs baselines
    Hiro {
        /// Also print one seed set drawn uniformly from the mixed strategy
        #[arg(long)]
        draw: bool,
    },
    /// Run one benchmark algorithm on the configured instance
    Baseline {
        #[arg(long, value_enum)]
        name: BaselineName,
    },
    /// Robust value of seed sets read from a file (one set per line)
    Evaluate(EvaluateArgs),
    /// Run one of the four experiments
    Experiment {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=4))]
        id: u32,
    },
    /// Write one of the constructive instances
    Fixture {
        #[arg(value_enum)]
        kind: FixtureKind,
        /// Leaves (ratio, improper) or cycle length (lipschitz)
        #[arg(long)]
        size: Option<usize>,
        /// Spoke probability of the first vector (lipschitz); default 1/size²
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "uniform_cube")]
    features: String,
    /// Barabási–Albert edges per new node
    #[arg(long)]
    attach: Option<usize>,
    /// Watts–Strogatz lattice degree
    #[arg(long)]
    ring_degree: Option<usize>,
    #[arg(long)]
    rewire_prob: Option<f64>,
    /// Erdős–Rényi edge probability
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Configuration-model power-law exponent
    #[arg(long)]
    exponent: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    sets: PathBuf,
    /// Treat the sets as one uniform mixed strategy
    #[arg(long)]
    mixed: bool,
    /// Graph file; with --probs, evaluates against explicit vectors instead
    /// of the configured cover
    #[arg(long, requires = "probs")]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    probs: Option<PathBuf>,
    /// Exhaustive live-edge enumeration instead of sampling
    #[arg(long)]
    exact: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    BarabasiAlbert,
    WattsStrogatz,
    ErdosRenyi,
    Configuration,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineName {
    Random,
    Degree,
    RandomGreedy,
    LuGreedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Ratio,
    Improper,
    Lipschitz,
}

fn load_config(shared: &Shared) -> Result<ExperimentConfig> {
    let mut cfg = match (&shared.config, shared.scale) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (Some(path), Some(scale)) => {
            let mut cfg = ExperimentConfig::preset(scale.into());
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            cfg.apply_text(&text, path)?;
            cfg
        }
        (None, scale) => ExperimentConfig::preset(scale.map_or(Scale::Desk, Into::into)),
    };
    for kv in &shared.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Param(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = shared.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Scale {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

fn generate(args: &GenerateArgs, shared: &Shared) -> Result<()> {
    let kind = match args.model {
        ModelArg::BarabasiAlbert => ModelKind::BarabasiAlbert,
        ModelArg::WattsStrogatz => ModelKind::WattsStrogatz,
        ModelArg::ErdosRenyi => ModelKind::ErdosRenyi,
        ModelArg::Configuration => ModelKind::Configuration,
    };
    let cfg = load_config(shared)?;
    let n = args.n.unwrap_or(cfg.n);
    let model = match GraphModel::default_for(kind, n) {
        GraphModel::BarabasiAlbert { attach } => GraphModel::BarabasiAlbert {
            attach: args.attach.unwrap_or(attach),
        },
        GraphModel::WattsStrogatz { ring_degree, rewire_prob } => GraphModel::WattsStrogatz {
            ring_degree: args.ring_degree.unwrap_or(ring_degree),
            rewire_prob: args.rewire_prob.unwrap_or(rewire_prob),
        },
        GraphModel::ErdosRenyi { edge_prob } => GraphModel::ErdosRenyi {
            edge_prob: args.edge_prob.unwrap_or(edge_prob),
        },
        GraphModel::Configuration { exponent } => GraphModel::Configuration {
            exponent: args.exponent.unwrap_or(exponent),
        },
    };
    let mut spec = GeneratorSpec::new(model, n, args.d.unwrap_or(cfg.d));
    spec.features = FeatureDist::parse(&args.features)?;
    let graph = generate_graph(&spec, cfg.seed)?;
    save_graph(&graph, &args.out)?;
    println!(
        "wrote {} (n={}, arcs={}, d={})",
        args.out.display(),
        graph.node_count(),
        graph.arc_count(),
        graph.feature_dim()
    );
    Ok(())
}

fn hiro_cmd(draw: bool, shared: &Shared) -> Result<()> {
    let cfg = load_config(shared)?;
    let out = run_pipeline(&cfg, &shared.out_dir)?;
    for f in &out.artifacts.files {
        println!("wrote {}", f.display());
    }
    for r in &out.artifacts.rows {
        println!("{:<14} min_value={} stderr={}", r.algorithm, fmt_g(r.min_value), fmt_g(r.stderr));
    }
    if draw {
        let inputs = pipeline_inputs(&cfg)?;
        let set = out.run.strategy.draw(&mut seed::rng(inputs.draw_seed()));
        println!("drawn set: {set}");
    }
    Ok(())
}

fn report_csv(labels: &[String], reports: &[RobustReport]) -> String {
    let l = reports.first().map_or(0, |r| r.per_function_values.len());
    let mut out = String::from("candidate,min_value,stderr,argmin");
    for i in 0..l {
        write!(out, ",f{i}").unwrap();
    }
    out.push('\n');
    for (label, r) in labels.iter().zip(reports) {
        write!(out, "{label},{},{},{}", fmt_g(r.min_value), fmt_g(r.min_stderr()), r.argmin_index).unwrap();
        for v in &r.per_function_values {
            write!(out, ",{}", fmt_g(*v)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn baseline_cmd(name: BaselineName, shared: &Shared) -> Result<()> {
    let cfg = load_config(shared)?;
    let inputs = pipeline_inputs(&cfg)?;
    let family = inputs.family(&cfg)?;
    let graph = &inputs.graph;
    let base_seed = seed::derive(inputs.unit_seed, &[100]);
    let (label, sets) = match name {
        BaselineName::Random => ("random", random_seed(graph, cfg.k, cfg.random_trials, base_seed)?),
        BaselineName::Degree => ("degree", vec![top_k_degree(graph, cfg.k)?]),
        BaselineName::RandomGreedy => ("random-greedy", vec![random_greedy(&family, cfg.k, base_seed)?]),
        BaselineName::LuGreedy => {
            let bounds = derive_intervals(&family)?;
            ("lu-greedy", vec![lu_greedy(graph, &bounds, cfg.k, cfg.r_train, base_seed)?])
        }
    };
    let candidates: Vec<Candidate> = sets.iter().cloned().map(Candidate::Set).collect();
    let reports = evaluate_many(graph, family.probs(), &candidates, inputs.eval_mode(&cfg))?;
    let labels: Vec<String> = (0..sets.len()).map(|i| format!("{label}-{i}")).collect();
    let sets_path = shared.out_dir.join(format!("baseline-{label}.txt"));
    let csv_path = shared.out_dir.join(format!("baseline-{label}.csv"));
    write_file(&sets_path, &strategy_to_string(&sets))?;
    write_file(&csv_path, &report_csv(&labels, &reports))?;
    let mean = reports.iter().map(|r| r.min_value).sum::<f64>() / reports.len() as f64;
    println!("wrote {} and {}", sets_path.display(), csv_path.display());
    println!("{label} mean min_value={}", fmt_g(mean));
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs, shared: &Shared) -> Result<()> {
    let cfg = load_config(shared)?;
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e });
    let run = |graph: &hyperim::graph::Graph, probs: &[ProbVector], mode: EvalMode| -> Result<()> {
        let sets = parse_sets(&read(&args.sets)?, graph.node_count(), &args.sets)?;
        if sets.is_empty() {
            return Err(Error::Param(format!("{} holds no seed sets", args.sets.display())));
        }
        let (labels, candidates): (Vec<String>, Vec<Candidate>) = if args.mixed {
            (vec!["mixed".into()], vec![Candidate::Mixed(MixedStrategy::new(sets)?)])
        } else {
            sets.into_iter()
                .enumerate()
                .map(|(i, s)| (format!("set-{i}"), Candidate::Set(s)))
                .unzip()
        };
        let reports = evaluate_many(graph, probs, &candidates, mode)?;
        let path = shared.out_dir.join("evaluation.csv");
        write_file(&path, &report_csv(&labels, &reports))?;
        for (label, r) in labels.iter().zip(&reports) {
            println!("{label}: min_value={} (function {})", fmt_g(r.min_value), r.argmin_index);
        }
        println!("wrote {}", path.display());
        Ok(())
    };
    match (&args.graph, &args.probs) {
        (Some(g), Some(p)) => {
            let graph = load_graph(g)?;
            let probs = load_probs(p)?;
            let mode = if args.exact {
                EvalMode::Exact
            } else {
                EvalMode::Sampled {
                    replicates: cfg.r_eval,
                    rng_seed: cfg.seed,
                }
            };
            run(&graph, &probs, mode)
        }
        _ => {
            let inputs = pipeline_inputs(&cfg)?;
            let model = cfg.model()?;
            let probs = inputs
                .cover
                .thetas
                .iter()
                .map(|t| model.edge_probabilities(t, &inputs.graph))
                .collect::<Result<Vec<_>>>()?;
            let mode = if args.exact { EvalMode::Exact } else { inputs.eval_mode(&cfg) };
            run(&inputs.graph, &probs, mode)
        }
    }
}

fn fixture_cmd(kind: FixtureKind, size: Option<usize>, lambda: Option<f64>, shared: &Shared) -> Result<()> {
    let cfg = load_config(shared)?;
    let (name, fx): (&str, Fixture) = match kind {
        FixtureKind::Ratio => ("ratio", ratio_gap_instance(size.unwrap_or(100))?),
        FixtureKind::Improper => ("improper", improper_gap_instance(size.unwrap_or(5))?),
        FixtureKind::Lipschitz => {
            let n = size.unwrap_or(50);
            let lambda = lambda.unwrap_or(1.0 / (n * n) as f64);
            ("lipschitz", lipschitz_tight_instance(n, lambda)?)
        }
    };
    let graph_path = shared.out_dir.join(format!("fixture-{name}-graph.txt"));
    let probs_path = shared.out_dir.join(format!("fixture-{name}-probs.txt"));
    fs::create_dir_all(&shared.out_dir).map_err(|e| Error::Io {
        path: shared.out_dir.clone(),
        source: e,
    })?;
    fx.save(&graph_path, &probs_path)?;

    // influence of each labeled node alone; exact when the instance allows it
    let candidates: Vec<Candidate> = fx
        .labels
        .iter()
        .map(|&(_, v)| SeedSet::new(vec![v], fx.graph.node_count()).map(Candidate::Set))
        .collect::<Result<_>>()?;
    let reports = match evaluate_many(&fx.graph, &fx.probs, &candidates, EvalMode::Exact) {
        Err(Error::Capacity(_)) => evaluate_many(
            &fx.graph,
            &fx.probs,
            &candidates,
            EvalMode::Sampled {
                replicates: cfg.r_eval,
                rng_seed: cfg.seed,
            },
        )?,
        other => other?,
    };
    let labels: Vec<String> = fx.labels.iter().map(|(l, v)| format!("{l}={v}")).collect();
    let csv_path = shared.out_dir.join(format!("fixture-{name}.csv"));
    write_file(&csv_path, &report_csv(&labels, &reports))?;
    for p in [&graph_path, &probs_path, &csv_path] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let shared = &cli.shared;
    match &cli.command {
        Command::Generate(args) => generate(args, shared),
        Command::Hiro { draw } => hiro_cmd(*draw, shared),
        Command::Baseline { name } => baseline_cmd(*name, shared),
        Command::Evaluate(args) => evaluate_cmd(args, shared),
        Command::Experiment { id } => {
            let cfg = load_config(shared)?;
            let out = write_experiment(&cfg, *id, &shared.out_dir)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Fixture { kind, size, lambda } => fixture_cmd(*kind, *size, *lambda, shared),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
