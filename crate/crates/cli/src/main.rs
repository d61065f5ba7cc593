use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use lmpgnn::harness::{self, parse_override, ExperimentConfig, MethodSummary};
use lmpgnn::spectral::{greedy_bandlimit, spectral_energy};
use lmpgnn::{build_knn_graph, ExecutionMode, GftBasis};

mod plot;

const CONFIG_KEYS: &str = "\
CONFIG KEYS (TOML)
  name                  experiment name, used as the results subdirectory
  observed_count        number of observed nodes (uniform random, fixed per experiment)
  train_prefix          timesteps used for filter design and GNN pretraining
  band_size             number of kept graph frequencies
  repetitions           Monte-Carlo repetitions (default 100)
  base_seed             seed of the mask and of every repetition (default 0)
  trace_node            node recorded in trace.csv (default 0)

  [dataset]
  name                  optional dataset name
  signals               T x N CSV of ground-truth signals
  header                skip the first CSV line (default false)
  edges                 edge list `i,j,weight`           (either this ...)
  coords                station list `node_id,lat,lon`   (... or this)
  k                     neighbours of the k-NN graph (default 7)
  bandwidth             Gaussian kernel bandwidth in km (default: mean k-NN distance)
  [dataset.synthetic]   instead of files: nodes, band, timesteps, amplitude, drift, radius, seed

  [noise]
  family                gaussian | sas | cauchy | student_t | laplace
  location, scale       location and scale (gamma for sas/cauchy)
  alpha                 characteristic exponent in (0, 2] (sas only)
  nu                    degrees of freedom (student_t only)

  [[methods]]
  method                glms | gnlms | glmp | gnlmp | gsign | lmp-gnn | sign-gnn | lms-gnn
  label                 result label (default: method name)
  mu                    step size
  p                     error exponent in [1, 2] (glmp, gnlmp, lmp-gnn)
  norm_floor, forgetting    gnlms/gnlmp normalization floor and energy forgetting factor
  layers, eta, activation, pretrain_epochs, delta_grad, stop_gradient    GNN options
  loss                  GNN training target: current (default) | next

OVERRIDES
  --override key=value  dotted path, array entries by index: noise.alpha=1.4, methods.0.mu=0.2";

/// Robust online estimation of time-varying graph signals.
#[derive(Parser)]
#[command(name = "lmpgnn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a k-nearest-neighbour graph from station coordinates and write it as an edge list.
    BuildGraph(BuildGraphArgs),
    /// Rank graph frequencies by training energy and write the bandlimited filter.
    #[command(after_long_help = CONFIG_KEYS)]
    DesignFilter(DesignFilterArgs),
    /// Run an experiment and write its result files.
    #[command(after_long_help = CONFIG_KEYS)]
    Run(RunArgs),
    /// Print the summary table of a results directory.
    Report(ReportArgs),
    /// Render MSE[t] per method (and optionally a node trace) as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Coordinates CSV `node_id,lat,lon` (optional header).
    #[arg(long)]
    coords: PathBuf,
    /// Number of nearest neighbours.
    #[arg(long, default_value_t = 7)]
    k: usize,
    /// Kernel bandwidth in km; defaults to the mean k-NN distance.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Output edge list.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Override a config key, e.g. `noise.alpha=1.4`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Skip the first line of the signals CSV; same as `--override dataset.header=true`.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct DesignFilterArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output CSV `frequency,eigenvalue,energy,kept`.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Root directory for results; files go to `<dir>/<name>/`.
    #[arg(long, env = "LMPGNN_OUTPUT_DIR", default_value = "results")]
    output_dir: PathBuf,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `run`, i.e. `<output_dir>/<name>`.
    results_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory written by `run`.
    results_dir: PathBuf,
    /// Output SVG for MSE[t].
    #[arg(long, short)]
    out: PathBuf,
    /// Logarithmic vertical axis.
    #[arg(long)]
    log_scale: bool,
    /// Also write the prediction-vs-truth chart of the trace node to this SVG.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Config(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<lmpgnn::Error> for CliError {
    fn from(e: lmpgnn::Error) -> Self {
        use lmpgnn::Error as E;
        match &e {
            E::Config { .. } => CliError::Config(e.to_string()),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            E::NotSymmetric { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    if !args.config.is_file() {
        return Err(CliError::Input(format!(
            "{}: config file not found",
            args.config.display()
        )));
    }
    let mut overrides = args
        .overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<lmpgnn::Result<Vec<_>>>()?;
    if args.header {
        overrides.push(("dataset.header".into(), "true".into()));
    }
    Ok(ExperimentConfig::load(&args.config, &overrides)?)
}

fn config_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn build_graph(args: &BuildGraphArgs) -> Result<(), CliError> {
    let coords = harness::read_coordinates(&args.coords)?;
    let graph = build_knn_graph(&coords, args.k, args.bandwidth)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = File::create(&args.out).map_err(io_err(&args.out))?;
    let mut w = BufWriter::new(file);
    harness::write_edge_list(&mut w, &graph).map_err(io_err(&args.out))?;
    w.flush().map_err(io_err(&args.out))?;
    println!("nodes {} edges {}", graph.n_nodes(), graph.edges().len());
    Ok(())
}

fn design_filter(args: &DesignFilterArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let data = cfg.load_dataset(config_dir(&args.config.config))?;
    let basis = GftBasis::from_graph(&data.graph)?;
    let rows = cfg.train_prefix.clamp(1, data.n_timesteps());
    let training = data.signals.rows(0, rows).into_owned();
    let energy = spectral_energy(&training, &basis)?;
    let filter = greedy_bandlimit(&training, &basis, cfg.band_size)?;
    let mut out = String::from("frequency,eigenvalue,energy,kept\n");
    for (k, (lambda, e)) in basis.eigenvalues().iter().zip(&energy).enumerate() {
        out.push_str(&format!("{k},{lambda:?},{e:?},{}\n", filter.response()[k] as u8));
    }
    write_file(&args.out, out.as_bytes())?;
    let kept = filter.kept();
    let captured: f64 = kept.iter().map(|&k| energy[k]).sum::<f64>() / energy.iter().sum::<f64>();
    println!(
        "nodes {} kept {} frequencies, {:.4} of training energy",
        basis.n(),
        kept.len(),
        captured
    );
    Ok(())
}

fn print_summary(summaries: &[MethodSummary], observation_mse: &[f64]) {
    let width = summaries.iter().map(|s| s.label.len()).max().unwrap_or(6).max(6);
    println!(
        "{:<width$}  {:>12}  {:>12}  {:>12}  {:>8}",
        "method", "mean_mse", "std_mse", "median_mse", "diverged"
    );
    for s in summaries {
        println!(
            "{:<width$}  {:>12.6}  {:>12.6}  {:>12.6}  {:>8}",
            s.label, s.mean_mse, s.std_mse, s.median_mse, s.diverged
        );
    }
    if !observation_mse.is_empty() {
        let m = observation_mse.iter().sum::<f64>() / observation_mse.len() as f64;
        println!("observation mse on observed nodes: {m:.6}");
    }
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let data = Arc::new(cfg.load_dataset(config_dir(&args.config.config))?);
    let spec = cfg.to_spec(data)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let table = if jobs == 1 {
        harness::run_experiment_with(&spec, ExecutionMode::Serial)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Input(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| harness::run_experiment_with(&spec, ExecutionMode::Parallel))?
    };
    let dir = harness::write_results(&table, &args.output_dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(io_err(&dir))?;
    print_summary(&table.summaries(), &table.observation_mse);
    println!("results written to {}", dir.display());
    Ok(())
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let table = harness::read_results(&args.results_dir)?;
    print_summary(&table.summaries(), &table.observation_mse);
    Ok(())
}

fn plot_cmd(args: &PlotArgs) -> Result<(), CliError> {
    if !args.results_dir.is_dir() {
        return Err(CliError::Input(format!(
            "{}: results directory not found",
            args.results_dir.display()
        )));
    }
    let table = harness::read_results(&args.results_dir)?;
    if table.methods.iter().all(|m| m.runs.is_empty()) {
        return Err(CliError::Input(format!(
            "{}: no results to plot",
            args.results_dir.display()
        )));
    }
    let svg = plot::mse_chart(&table, args.log_scale);
    write_file(&args.out, svg.as_bytes())?;
    if let Some(path) = &args.trace {
        let svg = plot::trace_chart(&table)
            .ok_or_else(|| CliError::Input(format!("{}: no trace.csv in results", args.results_dir.display())))?;
        write_file(path, svg.as_bytes())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildGraph(a) => build_graph(a),
        Command::DesignFilter(a) => design_filter(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Plot(a) => plot_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmpgnn: {e}");
            ExitCode::from(e.code())
        }
    }
}
