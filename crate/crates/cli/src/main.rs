//! `tinycompress` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{echo_grid_config, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tinycompress::bench::{self, emit_report, GridConfig};
use tinycompress::compress::{apply_pipeline, Pipeline};
use tinycompress::data::{load_csv, make_binary_task, synth_te, write_csv, BinaryTask};
use tinycompress::modelfmt::{self, layer_breakdowns, Model};
use tinycompress::nn::{self, DenseModel};

const SEED_ENV: &str = "TINYCOMPRESS_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "tinycompress",
    about = "Train, compress, and benchmark small fault-detection networks",
    version
)]
struct Cli {
    /// TOML run configuration; flags override config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then $TINYCOMPRESS_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a surrogate TE-style dataset as CSV.
    Synth(SynthArgs),
    /// Train a baseline detector for one fault.
    Train(TrainArgs),
    /// Apply a compression pipeline to a trained model.
    Compress(CompressArgs),
    /// Evaluate a model (dense or compressed) on a dataset.
    Eval(EvalArgs),
    /// Run the full detectors x pipelines study and write reports.
    Grid(GridArgs),
    /// Print the structure and size breakdown of a model file.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Samples per fault type (18 types).
    #[arg(long, default_value_t = 120)]
    per_fault: usize,
    /// Output CSV path.
    #[arg(long, default_value = "synth_te.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Target fault number.
    #[arg(long)]
    fault: u8,
    /// Output model path.
    #[arg(long, default_value = "baseline.tcmp")]
    out: PathBuf,
    /// Override the configured epoch count.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct CompressArgs {
    /// Input dense model (.tcmp).
    #[arg(long)]
    model: PathBuf,
    /// Stage subset, e.g. p, cq, pcq (order-insensitive).
    #[arg(long)]
    pipeline: String,
    /// Training CSV (required when clustering fine-tunes).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target fault (required with --data).
    #[arg(long)]
    fault: Option<u8>,
    /// Output model path.
    #[arg(long, default_value = "compressed.tcmp")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    fault: u8,
}

#[derive(Args)]
struct GridArgs {
    /// Report output directory.
    #[arg(long, default_value = "grid_out")]
    out_dir: PathBuf,
    /// Parallel workers.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    /// Model file to inspect.
    model: PathBuf,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

trait Runtime<T> {
    fn runtime(self) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> Runtime<T> for Result<T, E> {
    fn runtime(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(e.to_string()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    let seed = resolve_seed(cli.seed, &config)?;

    match cli.command {
        Command::Synth(args) => cmd_synth(seed, args),
        Command::Train(args) => cmd_train(&config, seed, args),
        Command::Compress(args) => cmd_compress(&config, seed, args),
        Command::Eval(args) => cmd_eval(&config, seed, args),
        Command::Grid(args) => cmd_grid(&config, seed, args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = config.seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .parse()
            .map_err(|_| CliError::Usage(format!("${SEED_ENV}='{text}' is not a valid u64 seed"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn write_echo(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).runtime()
}

fn cmd_synth(seed: u64, args: SynthArgs) -> Result<(), CliError> {
    if args.per_fault == 0 {
        return usage("--per-fault must be >= 1");
    }
    let ds = synth_te(seed, args.per_fault);
    write_csv(&ds, &args.out).runtime()?;
    let echo = format!(
        "# Resolved configuration (replayable)\ncommand = \"synth\"\nseed = {seed}\nper_fault = {}\n",
        args.per_fault
    );
    write_echo(&sidecar(&args.out), &echo)?;
    println!(
        "wrote {} samples ({} per fault, {} fault types) to {}",
        ds.len(),
        args.per_fault,
        ds.len() / args.per_fault,
        args.out.display()
    );
    Ok(())
}

fn load_task(
    config: &RunConfig,
    seed: u64,
    data: &Path,
    fault: u8,
) -> Result<BinaryTask, CliError> {
    let load = load_csv(data).runtime()?;
    if load.dropped_excluded > 0 {
        println!(
            "dropped {} rows with excluded faults (3/9/15)",
            load.dropped_excluded
        );
    }
    let tf = config.test_fraction().map_err(CliError::Usage)?;
    let mode = config.negative_mode().map_err(CliError::Usage)?;
    make_binary_task(&load.dataset, fault, seed ^ 0x5911_7000, tf, mode).runtime()
}

fn cmd_train(config: &RunConfig, seed: u64, args: TrainArgs) -> Result<(), CliError> {
    let arch = config.architecture().map_err(CliError::Usage)?;
    let mut train_cfg = config.train_config(seed).map_err(CliError::Usage)?;
    if let Some(epochs) = args.epochs {
        train_cfg.epochs = epochs;
    }
    let task = load_task(config, seed, &args.data, args.fault)?;

    let init = DenseModel::init_seeded(arch, seed);
    let outcome = nn::train(&init, &task.train, &train_cfg).runtime()?;
    let train_acc = nn::accuracy(&outcome.model, &task.train).runtime()?;
    let test_acc = nn::accuracy(&outcome.model, &task.test).runtime()?;

    let model = Model::Dense(outcome.model);
    modelfmt::write_file(&args.out, &model).runtime()?;
    let size = modelfmt::size_bytes(&model).runtime()?;

    let echo = format!(
        "# Resolved configuration (replayable)\ncommand = \"train\"\nseed = {seed}\nfault = {}\n\
         data = {:?}\nlearning_rate = {}\nbatch_size = {}\nepochs = {}\nl2_penalty = {}\n",
        args.fault,
        args.data.display().to_string(),
        train_cfg.learning_rate,
        train_cfg.batch_size,
        train_cfg.epochs,
        train_cfg.l2_penalty,
    );
    write_echo(&sidecar(&args.out), &echo)?;

    println!(
        "fault {}: trained {} epochs; final loss {:.4}",
        args.fault,
        train_cfg.epochs,
        outcome.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    println!("train accuracy {train_acc:.1}%  test accuracy {test_acc:.1}%");
    println!("wrote {} ({size} bytes)", args.out.display());
    Ok(())
}

fn cmd_compress(config: &RunConfig, seed: u64, args: CompressArgs) -> Result<(), CliError> {
    let pipeline = match Pipeline::parse(&args.pipeline) {
        Ok(p) => p,
        Err(e) => return usage(format!("--pipeline: {e}")),
    };
    let pcfg = config.pipeline_config(seed).map_err(CliError::Usage)?;

    let model = match modelfmt::read_file(&args.model).runtime()? {
        Model::Dense(m) => m,
        Model::Compressed(_) => {
            return usage(format!(
                "{} already holds a compressed model; compression starts from a dense baseline",
                args.model.display()
            ))
        }
    };
    let baseline_size = modelfmt::size_bytes(&Model::Dense(model.clone())).runtime()?;

    let needs_data = pipeline.cluster && pcfg.cluster.finetune_epochs > 0;
    let task = match (&args.data, args.fault) {
        (Some(data), Some(fault)) => Some(load_task(config, seed, data, fault)?),
        (None, _) if needs_data => {
            return usage(
                "--data and --fault are required: the pipeline clusters and fine-tuning is enabled \
                 (set cluster.finetune_epochs = 0 to skip)",
            )
        }
        (Some(_), None) => return usage("--fault is required when --data is given"),
        _ => None,
    };

    let compressed =
        apply_pipeline(&model, pipeline, &pcfg, task.as_ref().map(|t| &t.train)).runtime()?;
    let out_model = Model::Compressed(compressed);
    modelfmt::write_file(&args.out, &out_model).runtime()?;
    let size = modelfmt::size_bytes(&out_model).runtime()?;
    let rate = 100.0 * (1.0 - size as f64 / baseline_size as f64);

    let echo = format!(
        "# Resolved configuration (replayable)\ncommand = \"compress\"\nseed = {seed}\n\
         pipeline = \"{}\"\nmodel = {:?}\n",
        pipeline.tag(),
        args.model.display().to_string(),
    );
    write_echo(&sidecar(&args.out), &echo)?;

    println!(
        "pipeline {}: {} bytes -> {} bytes (compressed rate {:.1}%)",
        pipeline.tag(),
        baseline_size,
        size,
        rate
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_eval(config: &RunConfig, seed: u64, args: EvalArgs) -> Result<(), CliError> {
    let task = load_task(config, seed, &args.data, args.fault)?;
    let (train_acc, test_acc) = match modelfmt::read_file(&args.model).runtime()? {
        Model::Dense(m) => (
            nn::accuracy(&m, &task.train).runtime()?,
            nn::accuracy(&m, &task.test).runtime()?,
        ),
        Model::Compressed(m) => (
            m.accuracy(&task.train).runtime()?,
            m.accuracy(&task.test).runtime()?,
        ),
    };
    println!(
        "fault {}: train accuracy {train_acc:.1}%  test accuracy {test_acc:.1}%",
        args.fault
    );
    Ok(())
}

fn cmd_grid(config: &RunConfig, seed: u64, args: GridArgs) -> Result<(), CliError> {
    let out_dir = config
        .output_dir
        .clone()
        .filter(|_| args.out_dir == Path::new("grid_out"))
        .unwrap_or(args.out_dir);
    let cache_dir = out_dir.join("cache");
    let grid_cfg: GridConfig = config
        .grid_config(seed, args.workers, Some(cache_dir))
        .map_err(CliError::Usage)?;

    std::fs::create_dir_all(&out_dir).runtime()?;
    write_echo(&out_dir.join("config.resolved.toml"), &echo_grid_config(&grid_cfg))?;

    let report = bench::run_grid(&grid_cfg).runtime()?;
    let files = emit_report(&report, &out_dir).runtime()?;

    println!("pipeline  mean rate  mean acc change  rows");
    for agg in &report.aggregates {
        println!(
            "{:<8}  {:>8.1}%  {:>14.1}  {:>4}",
            agg.pipeline.tag(),
            agg.mean_rate,
            agg.mean_change,
            agg.rows
        );
    }
    if !report.complete {
        println!("{} cells failed; see failures.csv", report.failures.len());
    }
    println!("wrote {} report files to {}", files.len(), out_dir.display());
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), CliError> {
    let model = modelfmt::read_file(&args.model).runtime()?;
    let size = modelfmt::size_bytes(&model).runtime()?;
    println!(
        "{}: {} model, format v{}, {} bytes",
        args.model.display(),
        model.kind_name(),
        modelfmt::VERSION,
        size
    );
    println!("architecture: {:?}", model.arch().layer_sizes());
    if let Model::Compressed(m) = &model {
        if !m.provenance().is_empty() {
            println!("provenance: {:?}", m.provenance());
        }
    }
    println!("layer  kind                      dims        nnz     codebook  payload(B)  bias(B)");
    for b in layer_breakdowns(&model) {
        println!(
            "{:>5}  {:<24}  {:>4}x{:<4}  {:>7}  {:>8}  {:>10}  {:>7}",
            b.index,
            b.kind.name(),
            b.rows,
            b.cols,
            b.nnz,
            b.codebook_len.map_or("-".to_string(), |k| k.to_string()),
            b.payload_bytes,
            b.bias_bytes
        );
    }
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config.toml");
    out.with_file_name(name)
}
