use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use umato::app::{
    cmd_benchmark, cmd_embed, cmd_evaluate, cmd_plot, cmd_spheres, with_threads, Algorithm,
    BenchmarkOptions, DatasetSpec, EmbedOptions, EvaluateOptions, PlotOptions, DEFAULT_SIGMAS,
};
use umato::optimize::OptimizationConfig;

#[derive(Parser)]
#[command(name = "umato", version, about = "Hub-based two-phase dimensionality reduction")]
struct Cli {
    /// Worker threads (default: all cores; also via UMATO_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DatasetArgs {
    /// Built-in dataset name (currently: spheres).
    #[arg(long, conflicts_with_all = ["input", "idx_images"])]
    dataset: Option<String>,
    /// CSV input with one point per row.
    #[arg(long, conflicts_with = "idx_images")]
    input: Option<PathBuf>,
    /// Treat the last CSV column as an integer label.
    #[arg(long, default_value_t = false)]
    labels: bool,
    /// IDX image file (pairs with --idx-labels).
    #[arg(long, requires = "idx_labels")]
    idx_images: Option<PathBuf>,
    /// IDX label file.
    #[arg(long, requires = "idx_images")]
    idx_labels: Option<PathBuf>,
    /// Stratified subsample size applied after loading.
    #[arg(long)]
    subsample: Option<usize>,
}

impl DatasetArgs {
    fn spec(&self, seed: u64) -> Result<DatasetSpec, String> {
        if let Some(name) = &self.dataset {
            if name != "spheres" {
                return Err(format!("unknown built-in dataset '{name}'"));
            }
            return Ok(DatasetSpec::Spheres { seed });
        }
        if let Some(path) = &self.input {
            return Ok(DatasetSpec::Csv { path: path.clone(), has_labels: self.labels });
        }
        if let (Some(images), Some(labels)) = (&self.idx_images, &self.idx_labels) {
            return Ok(DatasetSpec::Idx { images: images.clone(), labels: labels.clone() });
        }
        Err("no dataset given; use --dataset, --input, or --idx-images/--idx-labels".into())
    }
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    global_epochs: usize,
    #[arg(long, default_value_t = 200)]
    local_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    hub_penalty: f64,
    #[arg(long, default_value_t = 0.1)]
    repulsion_penalty: f64,
    #[arg(long, default_value_t = 5)]
    negative_samples: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ConfigArgs {
    fn config(&self) -> OptimizationConfig {
        OptimizationConfig {
            k: self.k,
            global_epochs: self.global_epochs,
            local_epochs: self.local_epochs,
            hub_penalty: self.hub_penalty,
            repulsion_penalty: self.repulsion_penalty,
            negative_samples: self.negative_samples,
            gamma: self.gamma,
            seed: self.seed,
            ..OptimizationConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Embed a dataset into 2-D and write the result as CSV.
    Embed {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "algo", value_enum, default_value_t = Algorithm::Umato)]
        algorithm: Algorithm,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an embedding CSV against its source dataset.
    Evaluate {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Embedding CSV produced by `embed`.
        #[arg(long)]
        embedding: PathBuf,
        /// Neighborhood size for the rank-based metrics.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Density bandwidths, comma separated.
        #[arg(long, value_delimiter = ',')]
        sigmas: Vec<f64>,
        /// Scale squared distances by their maximum before density estimation.
        #[arg(long, default_value_t = false)]
        normalize_distances: bool,
        /// Seed used if the dataset is built-in or subsampled.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare PCA and the two-phase embedding on one dataset.
    Benchmark {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 5)]
        metric_k: usize,
        #[arg(long, default_value_t = true)]
        normalize_distances: bool,
        /// Search a small grid over k and hub penalty, keeping the lowest
        /// KL at sigma 0.1.
        #[arg(long, default_value_t = false)]
        grid: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an embedding CSV as an SVG scatter plot.
    Plot {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the synthetic Spheres benchmark as labeled CSV.
    Spheres {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> umato::Result<()> {
    match cli.command {
        Command::Embed { dataset, config, algorithm, out } => {
            let cfg = config.config();
            let spec = dataset.spec(cfg.seed).map_err(umato::Error::InvalidParameter)?;
            let diag = cmd_embed(&EmbedOptions {
                dataset: spec,
                algo: algorithm,
                cfg,
                subsample: dataset.subsample,
                out,
            })?;
            if algorithm == Algorithm::Umato {
                eprintln!(
                    "hubs {}, expanded {}, outliers {}",
                    diag.n_hubs, diag.n_enn, diag.n_outliers
                );
            }
            Ok(())
        }
        Command::Evaluate {
            dataset,
            embedding,
            k,
            sigmas,
            normalize_distances,
            seed,
            out,
        } => {
            let spec = dataset.spec(seed).map_err(umato::Error::InvalidParameter)?;
            let sigmas = if sigmas.is_empty() { DEFAULT_SIGMAS.to_vec() } else { sigmas };
            cmd_evaluate(&EvaluateOptions {
                dataset: spec,
                embedding,
                subsample: dataset.subsample,
                subsample_seed: seed,
                k,
                sigmas,
                normalize_distances,
                out,
            })?;
            Ok(())
        }
        Command::Benchmark { dataset, config, metric_k, normalize_distances, grid, out } => {
            let cfg = config.config();
            let spec = dataset.spec(cfg.seed).map_err(umato::Error::InvalidParameter)?;
            let bench = cmd_benchmark(&BenchmarkOptions {
                dataset: spec,
                subsample: dataset.subsample,
                cfg,
                k_metrics: metric_k,
                sigmas: DEFAULT_SIGMAS.to_vec(),
                normalize_distances,
                grid,
                out_markdown: out.with_extension("md"),
                out_json: out.with_extension("json"),
            })?;
            print!("{}", umato::app::benchmark_markdown(&bench));
            Ok(())
        }
        Command::Plot { embedding, out } => cmd_plot(&PlotOptions { embedding, out }),
        Command::Spheres { seed, subsample, out } => cmd_spheres(seed, subsample, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("UMATO_THREADS").ok().and_then(|v| v.parse().ok())
    });
    match with_threads(threads, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
