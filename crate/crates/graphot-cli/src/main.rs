//! `graphot`: transportation distances between distributions on graph
//! vertices, with classical baselines and the desk-scale experiments.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 solver
//! non-convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use graphot::advection::{advect, VelocityField};
use graphot::baselines::{w1, w_full_with_guard};
use graphot::error::{GraphotError, Result};
use graphot::formats;
use graphot::prune::prune_by_w1;
use graphot::solver::{solve, solve_symmetrized, SolverConfig};
use graphot::{Graph, VertexDistribution};
use graphot_harness::corpus;
use graphot_harness::experiments::{
    self, DistanceKind, FanLineParams, FanLinePerturbation,
};
use graphot_harness::generators;

#[derive(Parser)]
#[command(name = "graphot", version, about = "Continuous-flow transportation distances on graphs")]
struct Cli {
    /// Worker threads for solver and experiment parallelism
    /// (default: GRAPHOT_JOBS or all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Decimal places for printed values.
    #[arg(long, global = true, default_value_t = 6)]
    precision: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the flow-based transportation distance W̄_k.
    Distance(DistanceArgs),
    /// Export the trivial and displacement-interpolation paths.
    Interpolate(InterpolateArgs),
    /// 1-Wasserstein distance via minimum-cost flow (Beckmann form).
    W1(PairArgs),
    /// Quadratic transportation LP distance (desk-scale oracle).
    Full(FullArgs),
    /// Restrict a graph to the support of an optimal W1 flow.
    Prune(PruneArgs),
    /// Integrate the graph advection ODE and emit the trajectory CSV.
    Advect(AdvectArgs),
    /// Run a named experiment and write its report.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Build an EMST + k-nearest-neighbor graph from points.
    GraphBuild(GraphBuildArgs),
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    p0: PathBuf,
    #[arg(long)]
    p1: PathBuf,
    /// Optional flow/plan export path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    k: usize,
    /// Feasibility tolerance on the continuity residual.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Average the forward and backward solves.
    #[arg(long)]
    symmetrize: bool,
    /// Prune to the W1 flow support with this hop radius first.
    #[arg(long)]
    prune: Option<usize>,
}

#[derive(Args)]
struct InterpolateArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct FullArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Vertex-count guard for the n² LP.
    #[arg(long, default_value_t = 2000)]
    max_vertices: usize,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    p0: PathBuf,
    #[arg(long)]
    p1: PathBuf,
    #[arg(long, default_value_t = 1)]
    radius: usize,
    /// Output prefix; writes <prefix>.graph and <prefix>.map.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdvectArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    p0: PathBuf,
    /// Velocity field file (2m lines, canonical oriented-edge order).
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    duration: f64,
    #[arg(long)]
    steps: usize,
    /// Trajectory CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// W̄_k(δ_v, δ_w) against hop distance on a line graph.
    Indicator(IndicatorArgs),
    /// W̄_k/W̄_30 convergence under endpoint noise on the 30-line.
    Entropy(EntropyArgs),
    /// Fan-line comparison of L1, W1 and W̄ (report per vertex).
    FanLine(FanLineArgs),
    /// Leave-one-out histogram retrieval over a corpus.
    Retrieval(RetrievalArgs),
}

#[derive(Args)]
struct IndicatorArgs {
    /// Line graph vertex count.
    #[arg(long, default_value_t = 12)]
    line: usize,
    /// Time-step counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 5, 10])]
    k_list: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 6, 10, 16, 20])]
    k_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.02, 0.3, 5.0])]
    noise: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FanLineArgs {
    #[arg(long, default_value_t = 45)]
    spokes: usize,
    #[arg(long, default_value_t = 30)]
    line: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, value_enum, default_value_t = FanMode::Clean)]
    mode: FanMode,
    /// Noise amplitude for --mode noise.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FanMode {
    Clean,
    Noise,
    Single,
}

#[derive(Args)]
struct RetrievalArgs {
    /// Corpus file; a seeded synthetic 3-class corpus when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Metric::Wbar)]
    metric: Metric,
    #[arg(long, default_value_t = 12)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 5, 10])]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    L1,
    W1,
    Wbar,
}

#[derive(Args)]
struct GraphBuildArgs {
    /// Points file: header "m d", then m lines of d coordinates.
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value_t = 2)]
    knn: usize,
    /// Graph file destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems are validation errors per the CLI contract.
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(1);
            }
            // --help / --version print to stdout and succeed.
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };

    let jobs = cli
        .jobs
        .or_else(|| std::env::var("GRAPHOT_JOBS").ok().and_then(|v| v.parse().ok()));
    if let Some(jobs) = jobs {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()
        {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                GraphotError::NonConvergence { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph> {
    formats::parse_graph(&std::fs::read_to_string(path)?)
}

fn load_distribution(path: &Path, n: usize) -> Result<VertexDistribution> {
    formats::parse_distribution(&std::fs::read_to_string(path)?, n)
}

fn load_pair(args: &PairArgs) -> Result<(Graph, VertexDistribution, VertexDistribution)> {
    let g = load_graph(&args.graph)?;
    let p0 = load_distribution(&args.p0, g.num_vertices())?;
    let p1 = load_distribution(&args.p1, g.num_vertices())?;
    Ok((g, p0, p1))
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let p = cli.precision;
    match &cli.command {
        Command::Distance(args) => {
            let (g, p0, p1) = load_pair(&args.pair)?;
            let cfg = SolverConfig {
                tol_feasibility: args.tol,
                max_iterations: args.max_iter,
                ..SolverConfig::default()
            };
            let (g, p0, p1) = match args.prune {
                Some(radius) => {
                    let pruned = prune_by_w1(&g, &p0, &p1, radius)?;
                    let q0 = pruned.restrict(&p0)?;
                    let q1 = pruned.restrict(&p1)?;
                    (pruned.graph, q0, q1)
                }
                None => (g, p0, p1),
            };
            if args.symmetrize {
                let sym = solve_symmetrized(&g, &p0, &p1, args.k, &cfg)?;
                println!("distance {:.p$}", sym.averaged_distance);
                println!("forward {:.p$}", sym.forward.distance);
                println!("backward {:.p$}", sym.backward.distance);
                println!(
                    "iterations {}",
                    sym.forward.report.iterations + sym.backward.report.iterations
                );
                if let Some(dir) = &args.pair.out {
                    formats::export_transport_path(&sym.forward, &g, dir)?;
                }
            } else {
                let path = solve(&g, &p0, &p1, args.k, &cfg)?;
                println!("distance {:.p$}", path.distance);
                println!("objective {:.p$}", path.objective);
                println!("iterations {}", path.report.iterations);
                if let Some(dir) = &args.pair.out {
                    formats::export_transport_path(&path, &g, dir)?;
                }
            }
        }
        Command::Interpolate(args) => {
            let (g, p0, p1) = load_pair(&args.pair)?;
            let cfg = SolverConfig::default();
            let result = experiments::interpolation_experiment(&g, &p0, &p1, args.k, &cfg)?;
            let dir = args.pair.out.clone().unwrap_or_else(|| PathBuf::from("interpolation"));
            std::fs::create_dir_all(&dir)?;
            formats::export_transport_path(&result.optimal, &g, &dir.join("optimal"))?;
            let mut trivial = String::new();
            for row in &result.trivial {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                trivial.push_str(&cells.join(","));
                trivial.push('\n');
            }
            std::fs::write(dir.join("trivial.csv"), trivial)?;
            println!("distance {:.p$}", result.optimal.distance);
            println!("exported {}", dir.display());
        }
        Command::W1(args) => {
            let (g, p0, p1) = load_pair(args)?;
            let sol = w1(&g, &p0, &p1)?;
            println!("{:.p$}", sol.cost);
            if let Some(path) = &args.out {
                std::fs::write(path, formats::write_flow(&sol.flow))?;
            }
        }
        Command::Full(args) => {
            let (g, p0, p1) = load_pair(&args.pair)?;
            let sol = w_full_with_guard(&g, &p0, &p1, args.max_vertices)?;
            println!("{:.p$}", sol.distance);
            if let Some(path) = &args.pair.out {
                std::fs::write(path, formats::write_plan_triplets(&sol.plan, 1e-12))?;
            }
        }
        Command::Prune(args) => {
            let g = load_graph(&args.graph)?;
            let p0 = load_distribution(&args.p0, g.num_vertices())?;
            let p1 = load_distribution(&args.p1, g.num_vertices())?;
            let pruned = prune_by_w1(&g, &p0, &p1, args.radius)?;
            let graph_path = args.out.with_extension("graph");
            let map_path = args.out.with_extension("map");
            std::fs::write(&graph_path, formats::write_graph(&pruned.graph))?;
            std::fs::write(&map_path, formats::write_vertex_map(&pruned))?;
            println!(
                "kept {} of {} vertices, {} of {} edges",
                pruned.graph.num_vertices(),
                g.num_vertices(),
                pruned.graph.num_edges(),
                g.num_edges()
            );
            println!("wrote {} and {}", graph_path.display(), map_path.display());
        }
        Command::Advect(args) => {
            let g = load_graph(&args.graph)?;
            let p0 = load_distribution(&args.p0, g.num_vertices())?;
            let field = formats::parse_flow(&std::fs::read_to_string(&args.flow)?, &g)?;
            let traj =
                advect(&g, &p0, &VelocityField::Constant(field), args.duration, args.steps)?;
            write_or_print(&args.out, &formats::write_trajectory_csv(&traj))?;
        }
        Command::Experiment(cmd) => run_experiment(cmd, p)?,
        Command::GraphBuild(args) => {
            let text = std::fs::read_to_string(&args.points)?;
            let points = parse_points(&text)?;
            let g = corpus::build_emst_knn_graph(&points, args.knn)?;
            write_or_print(&args.out, &formats::write_graph(&g))?;
        }
    }
    Ok(())
}

fn run_experiment(cmd: &ExperimentCommand, p: usize) -> Result<()> {
    let cfg = SolverConfig::default();
    match cmd {
        ExperimentCommand::Indicator(args) => {
            let g = generators::line_graph(args.line);
            let pairs: Vec<(usize, usize)> =
                (1..args.line).map(|d| (0, d)).collect();
            let report =
                experiments::convergence_indicator_experiment(&g, &args.k_list, &pairs, &cfg)?;
            write_or_print(&args.out, &report.to_csv())?;
        }
        ExperimentCommand::Entropy(args) => {
            let out = experiments::convergence_entropy_experiment(
                &args.k_list,
                &args.noise,
                args.seed,
                &cfg,
            )?;
            write_or_print(&args.out, &out.report.to_csv())?;
        }
        ExperimentCommand::FanLine(args) => {
            let mode = match args.mode {
                FanMode::Clean => FanLinePerturbation::Clean,
                FanMode::Noise => FanLinePerturbation::LeafNoise(args.noise),
                FanMode::Single => FanLinePerturbation::SingleLeaf,
            };
            let params = FanLineParams {
                spokes: args.spokes,
                line_len: args.line,
                k: args.k,
                mode,
                seed: args.seed,
            };
            let out = experiments::fan_line_experiment(&params, &cfg)?;
            let best = graphot_harness::experiments::FanLineOutcome::argmin_set(
                &out.wbar,
                1e-6,
            );
            println!("wbar_argmin {best:?}");
            write_or_print(&args.out, &out.report.to_csv())?;
        }
        ExperimentCommand::Retrieval(args) => {
            let (corpus_data, graph) = match &args.corpus {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    let corpus_data = corpus::parse_corpus(&text)?;
                    let graph = corpus::build_emst_knn_graph(&corpus_data.centers, 2)?;
                    (corpus_data, graph)
                }
                None => corpus::synthetic_three_class_corpus(args.seed, 8),
            };
            let metric = match args.metric {
                Metric::L1 => DistanceKind::L1,
                Metric::W1 => DistanceKind::W1,
                Metric::Wbar => DistanceKind::WBar(args.k),
            };
            let out = experiments::retrieval_experiment(
                &corpus_data,
                &graph,
                metric,
                &args.n_list,
                &cfg,
            )?;
            for (n, recall) in &out.precision {
                println!("recall@{n} {recall:.p$}");
            }
            write_or_print(&args.out, &out.report.to_csv())?;
        }
    }
    Ok(())
}

fn parse_points(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty());
    let (lineno, header) = lines
        .next()
        .ok_or(GraphotError::Parse { line: 1, msg: "empty points file".into() })?;
    let mut parts = header.split_whitespace();
    let m: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or(GraphotError::Parse { line: lineno, msg: "header must be 'm d'".into() })?;
    let d: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or(GraphotError::Parse { line: lineno, msg: "header must be 'm d'".into() })?;
    let mut points = Vec::with_capacity(m);
    for (lineno, line) in lines {
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| GraphotError::Parse { line: lineno, msg: "bad coordinate".into() })?;
        if coords.len() != d {
            return Err(GraphotError::Parse { line: lineno, msg: "wrong dimension".into() });
        }
        points.push(coords);
    }
    if points.len() != m {
        return Err(GraphotError::ShapeMismatch { expected: m, actual: points.len() });
    }
    Ok(points)
}
