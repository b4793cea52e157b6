use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gtda::graph::GraphConfig;
use gtda::pipeline::{run_task, AdaptationTask, Method, PipelineConfig, PriorKind};
use gtda::preprocess::NormalizationMode;
use gtda::synthetic::generate_synthetic_shift;
use gtda::table::{reproduce_table, TableConfig};
use gtda::{io, DynamicsConfig, Error};

/// Unsupervised domain adaptation with graph transduction games.
#[derive(Debug, Parser)]
#[command(name = "gtda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Adapt labels from a source feature set to a target feature set.
    Run(RunArgs),
    /// Write a seeded Gaussian-blob domain-shift task to a directory.
    Synth(SynthArgs),
    /// Tabulate accuracies over several tasks listed in a JSON file.
    Table(TableArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    source_labels: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Used only to score the predictions.
    #[arg(long)]
    target_labels: Option<PathBuf>,
    #[arg(long, default_value = "zscore")]
    normalize: NormalizationMode,
    #[arg(long, default_value = "none")]
    prior: PriorKind,
    #[arg(long, default_value = "gtg")]
    method: Method,
    /// Label Spreading clamping factor.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Neighbor rank used for the local kernel scale.
    #[arg(long, default_value_t = 7)]
    knn_rank: usize,
    #[arg(long)]
    out_soft: Option<PathBuf>,
    #[arg(long)]
    out_hard: Option<PathBuf>,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dump the sparsified affinity matrix as `i j w` lines.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    /// Dump the fitted prior model as JSON (with `--prior lr`).
    #[arg(long)]
    dump_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    n_per_class: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    shift: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also write the table as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn run(args: RunArgs) -> gtda::Result<()> {
    let task = AdaptationTask {
        source: args.source,
        source_labels: args.source_labels,
        target: args.target,
        target_labels: args.target_labels,
        config: PipelineConfig {
            normalize: args.normalize,
            prior: args.prior,
            method: args.method,
            dynamics: DynamicsConfig {
                tolerance: args.eps,
                max_iterations: args.max_iter,
            },
            alpha: args.alpha,
            graph: GraphConfig {
                scale_rank: args.knn_rank,
            },
            ..PipelineConfig::default()
        },
        out_soft: args.out_soft,
        out_hard: args.out_hard,
        dump_graph: args.dump_graph,
        dump_model: args.dump_model,
        seed: args.seed,
    };
    let (report, _) = run_task(&task)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match args.report {
        Some(path) => std::fs::write(&path, json + "\n").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?,
        None => println!("{json}"),
    }
    Ok(())
}

fn synth(args: SynthArgs) -> gtda::Result<()> {
    let task = generate_synthetic_shift(args.n_per_class, args.classes, args.dim, args.shift, args.noise, args.seed)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.display().to_string(),
        source: e,
    })?;
    let dir = &args.out_dir;
    io::write_matrix(&dir.join("source.csv"), task.source.as_array())?;
    io::write_labels(&dir.join("source_labels.csv"), &task.source_labels)?;
    io::write_matrix(&dir.join("target.csv"), task.target.as_array())?;
    io::write_labels(&dir.join("target_labels.csv"), &task.target_labels)?;
    Ok(())
}

fn table(args: TableArgs) -> gtda::Result<()> {
    let cfg = TableConfig::load(&args.config)?;
    let table = reproduce_table(&cfg)?;
    print!("{}", table.render());
    if let Some(path) = args.json {
        std::fs::write(&path, table.to_json() + "\n").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
        Command::Table(args) => table(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
