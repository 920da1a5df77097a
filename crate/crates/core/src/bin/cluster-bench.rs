use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use cluster_bench::sweep::{
    emit_report, parse_list, parse_range, run_sweep, select_best, ConfigFile, LabelSelection, Metric,
    OutputFormat, RowKind, SweepConfig, SweepReport,
};
use cluster_bench::{Algorithm, Error, NoisePolicy};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "cluster-bench", version, about = "Clustering benchmark sweeps over embedding files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one algorithm over a hyperparameter grid and write a report.
    Sweep(Box<SweepArgs>),
    /// Print the best grid value per embedding from a report.
    Best(BestArgs),
}

#[derive(Debug, clap::Args)]
struct SweepArgs {
    /// TOML (or .json) config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// kmeans, single_linkage, dbscan or hdbscan.
    #[arg(long)]
    algorithm: Option<String>,
    /// Comma-separated embedding CSV files.
    #[arg(long, value_delimiter = ',')]
    embeddings: Vec<PathBuf>,
    /// Label scheme(s) for external scores: 5, 3 or both.
    #[arg(long)]
    labels: Option<String>,
    /// n_clusters range A:B (kmeans, single_linkage).
    #[arg(long)]
    k_range: Option<String>,
    /// Comma-separated eps values (dbscan).
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated min_cluster_size values (hdbscan).
    #[arg(long)]
    min_cluster_size: Option<String>,
    /// Seed range A:B (kmeans).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; defaults from the output extension.
    #[arg(long)]
    format: Option<String>,
    /// exclude or as-cluster.
    #[arg(long)]
    noise_policy: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, clap::Args)]
struct BestArgs {
    #[arg(long)]
    report: PathBuf,
    /// silhouette, ari or purity (or ari_5, ari_3, purity_5, purity_3, ...).
    #[arg(long)]
    metric: String,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => Failure::Usage(msg),
            other => Failure::Lib(other),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(Failure::from)
}

fn build_config(args: &SweepArgs) -> Result<(SweepConfig, PathBuf, OutputFormat, usize), Failure> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path).map_err(|e| match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            other => Failure::Lib(other),
        })?,
        None => ConfigFile::default(),
    };
    let algorithm = match &args.algorithm {
        Some(a) => parse::<Algorithm>(a)?,
        None => file.algorithm.ok_or_else(|| usage("--algorithm is required"))?,
    };
    let embeddings = if args.embeddings.is_empty() {
        file.embeddings.clone().unwrap_or_default()
    } else {
        args.embeddings.clone()
    };
    let mut config = SweepConfig::new(algorithm, embeddings);

    if let Some(labels) = args.labels.as_deref() {
        config.labels = parse::<LabelSelection>(labels)?;
    } else if let Some(labels) = file.labels {
        config.labels = labels;
    }
    if let Some(grid) = &file.grid {
        config.grid = grid.clone();
    }
    let grid_flags = [
        (&args.k_range, "--k-range", [Algorithm::Kmeans, Algorithm::SingleLinkage].as_slice()),
        (&args.eps, "--eps", [Algorithm::Dbscan].as_slice()),
        (&args.min_cluster_size, "--min-cluster-size", [Algorithm::Hdbscan].as_slice()),
    ];
    for (value, flag, algorithms) in grid_flags {
        let Some(value) = value else { continue };
        if !algorithms.contains(&algorithm) {
            return Err(usage(format!("{flag} does not apply to {algorithm}")));
        }
        config.grid = if flag == "--k-range" {
            parse_range(value)?.into_iter().map(|v| v as f64).collect()
        } else {
            parse_list(value)?
        };
    }
    if let Some(seeds) = args.seeds.as_deref().or(file.seeds.as_deref()) {
        if algorithm != Algorithm::Kmeans {
            return Err(usage("--seeds only applies to kmeans"));
        }
        config.seeds = parse_range(seeds)?;
    }
    if let Some(policy) = args.noise_policy.as_deref() {
        config.noise_policy = parse::<NoisePolicy>(policy)?;
    } else if let Some(policy) = file.noise_policy {
        config.noise_policy = policy;
    }
    config.kmeans_max_iter = file.kmeans_max_iter.unwrap_or(config.kmeans_max_iter);
    config.kmeans_tol = file.kmeans_tol.unwrap_or(config.kmeans_tol);
    config.dbscan_min_samples = file.dbscan_min_samples.unwrap_or(config.dbscan_min_samples);
    config.hdbscan_min_samples = file.hdbscan_min_samples.or(config.hdbscan_min_samples);
    config.validate()?;

    let out = args
        .out
        .clone()
        .or(file.out)
        .ok_or_else(|| usage("--out is required"))?;
    let format = match args.format.as_deref() {
        Some(f) => parse::<OutputFormat>(f)?,
        None => file.format.unwrap_or_else(|| OutputFormat::from_path(&out)),
    };
    let jobs = args.jobs.or(file.jobs).unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    Ok((config, out, format, jobs))
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let (config, out, format, jobs) = build_config(args)?;
    let report = run_sweep(&config, jobs)?;
    emit_report(&report, &out, format)?;
    info!("wrote {} rows to {}", report.rows.len(), out.display());
    Ok(())
}

fn resolve_metric(name: &str, report: &SweepReport) -> Result<Metric, Failure> {
    let defined = |m: Metric| report.rows.iter().any(|r| r.scores.get(m).is_some());
    match name {
        "ari" => Ok(if defined(Metric::Ari5) || !defined(Metric::Ari3) { Metric::Ari5 } else { Metric::Ari3 }),
        "purity" => Ok(if defined(Metric::Purity5) || !defined(Metric::Purity3) {
            Metric::Purity5
        } else {
            Metric::Purity3
        }),
        other => parse::<Metric>(other),
    }
}

fn best(args: &BestArgs) -> Result<(), Failure> {
    let report = SweepReport::load(&args.report)?;
    let metric = resolve_metric(&args.metric, &report)?;
    let embeddings = report.embeddings();
    if embeddings.is_empty() {
        return Err(Failure::Lib(Error::Report("report has no rows".into())));
    }
    for embedding in embeddings {
        let value = select_best(&report, metric, Some(&embedding))?;
        let row = report
            .rows
            .iter()
            .filter(|r| r.embedding == embedding && r.value == value)
            .find(|r| r.kind == RowKind::Aggregate)
            .or_else(|| report.rows.iter().find(|r| r.embedding == embedding && r.value == value))
            .expect("selected value comes from a row");
        let score = row.scores.get(metric).expect("selected rows are defined");
        println!("{embedding}\t{}={value}\t{metric}={score}", row.param);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Best(args) => best(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_data() { EXIT_INPUT } else { EXIT_RUNTIME })
        }
    }
}
