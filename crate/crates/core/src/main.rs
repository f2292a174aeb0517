//! Batch CLI for the simulation laboratory.
//!
//! Exit codes: 0 success, 1 input error (bad flags, config, preset names),
//! 2 runtime failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use forestlab::dgp::RegressionFn;
use forestlab::error::{Error, Result};
use forestlab::harness::output::{
    curve_to_csv, render_rows, slice_to_csv, write_text, OutputFormat,
};
use forestlab::harness::presets::{preset_configs, ScaleOverrides};
use forestlab::harness::{
    figure_data, parse_config_file, run_experiment, run_sweep, ExperimentConfig, MtryRule,
    PartialConfig, ReportRow, SweepKind,
};

#[derive(Parser)]
#[command(
    name = "forestlab",
    version,
    about = "Paired bagging vs. random-forest simulation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single paired experiment from a config file and/or flags
    Run(RunArgs),
    /// Run a canned table preset (one experiment per table column)
    Table(TableArgs),
    /// Sweep one experiment over a grid of irrelevant-covariate counts or
    /// pairwise correlations
    Sweep(SweepArgs),
    /// Run one experiment and emit binned conditional differences along a
    /// covariate
    Figure(FigureArgs),
}

/// Experiment options; flags override config-file values.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Row label in reports
    #[arg(long)]
    label: Option<String>,
    /// Regression function: linear, mars, or hidden
    #[arg(long)]
    model: Option<String>,
    /// Covariate law: uniform, normal, or equicorrelated
    #[arg(long)]
    law: Option<String>,
    /// Pairwise correlation for the equicorrelated law
    #[arg(long)]
    rho: Option<f64>,
    /// Total covariates (relevant ones first, the rest irrelevant)
    #[arg(long)]
    p_total: Option<usize>,
    /// Signal-to-noise ratio
    #[arg(long)]
    snr: Option<f64>,
    /// Scale the signal to unit variance
    #[arg(long)]
    normalized: Option<bool>,
    /// Training set size
    #[arg(long)]
    n: Option<usize>,
    /// Training replicates (W)
    #[arg(long)]
    runs: Option<usize>,
    /// Trees per ensemble (B)
    #[arg(long)]
    trees: Option<usize>,
    /// Forest mtry rule: p/3, p/2, or an integer
    #[arg(long)]
    mtry: Option<String>,
    /// Do not split nodes at or below this in-bag size
    #[arg(long)]
    min_node_size: Option<usize>,
    /// Shared test set size
    #[arg(long)]
    test_size: Option<usize>,
    /// Master seed; every stream derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per CPU); FORESTLAB_WORKERS overrides
    #[arg(long)]
    workers: Option<usize>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format: csv, json, or md (default: by extension, else md on
    /// stdout)
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct TableArgs {
    /// One of: table1, table2, table3, table4_dist, table5_irrelevant,
    /// table6_rho, table7_joint, appendixC_low, appendixC_high
    preset: String,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// irrelevant or rho
    #[arg(long)]
    kind: String,
    /// Comma-separated grid values
    #[arg(long)]
    grid: String,
    /// Also write the per-grid-point curve CSV here
    #[arg(long)]
    curves: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct FigureArgs {
    /// Covariate to bin along, 1-based
    #[arg(long)]
    covariate: usize,
    /// Number of equal-count bins
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

fn build_partial(args: &ConfigArgs) -> Result<(PartialConfig, Option<PathBuf>, Option<String>)> {
    let mut partial = match &args.config {
        Some(path) => parse_config_file(&std::fs::read_to_string(path)?)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        label: args.label.clone(),
        model: args
            .model
            .as_deref()
            .map(str::parse::<RegressionFn>)
            .transpose()?,
        law: args.law.as_deref().map(str::parse).transpose()?,
        rho: args.rho,
        p_total: args.p_total,
        snr: args.snr,
        normalized: args.normalized,
        n: args.n,
        runs: args.runs,
        trees: args.trees,
        mtry_forest: args.mtry.as_deref().map(str::parse::<MtryRule>).transpose()?,
        min_node_size: args.min_node_size,
        test_size: args.test_size,
        master_seed: args.seed,
        workers: args.workers,
        output: None,
        format: None,
    };
    partial = partial.overridden_by(flags);
    let output = args
        .output
        .clone()
        .or_else(|| partial.output.as_ref().map(PathBuf::from));
    let format = args.format.clone().or_else(|| partial.format.clone());
    Ok((partial, output, format))
}

fn pick_format(format: Option<&str>, path: Option<&Path>) -> Result<OutputFormat> {
    match (format, path) {
        (Some(f), _) => f.parse(),
        (None, Some(p)) => Ok(OutputFormat::from_path(p)),
        (None, None) => Ok(OutputFormat::Markdown),
    }
}

fn emit_rows(rows: &[ReportRow], output: Option<&Path>, format: Option<&str>) -> Result<()> {
    let format = pick_format(format, output)?;
    write_text(output, &render_rows(rows, format)?)
}

fn run_single(args: &RunArgs) -> Result<()> {
    let (partial, output, format) = build_partial(&args.config)?;
    let config = partial.build()?;
    let result = run_experiment(&config)?;
    emit_rows(&[result.row], output.as_deref(), format.as_deref())
}

fn run_table(args: &TableArgs) -> Result<()> {
    let overrides = ScaleOverrides {
        runs: args.runs,
        trees: args.trees,
        test_size: args.test_size,
        master_seed: args.seed,
        workers: args.workers,
    };
    let configs = preset_configs(&args.preset, &overrides)?;
    let total = configs.len();
    let mut rows = Vec::with_capacity(total);
    for (k, config) in configs.iter().enumerate() {
        let start = Instant::now();
        rows.push(run_experiment(config)?.row);
        eprintln!(
            "[{}/{}] {} ({:.1}s)",
            k + 1,
            total,
            config.label,
            start.elapsed().as_secs_f64()
        );
    }
    emit_rows(&rows, args.output.as_deref(), args.format.as_deref())
}

fn run_sweep_cmd(args: &SweepArgs) -> Result<()> {
    let kind: SweepKind = args.kind.parse()?;
    let grid: Vec<f64> = args
        .grid
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad grid value `{s}`")))
        })
        .collect::<Result<_>>()?;
    let (partial, output, format) = build_partial(&args.config)?;
    let base = partial.build()?;
    let result = run_sweep(kind, &base, &grid)?;
    if let Some(path) = &args.curves {
        write_text(Some(path), &curve_to_csv(&result.curve))?;
    }
    emit_rows(&result.rows, output.as_deref(), format.as_deref())
}

fn run_figure(args: &FigureArgs) -> Result<()> {
    if args.covariate == 0 {
        return Err(Error::invalid("--covariate is 1-based"));
    }
    let (partial, output, _) = build_partial(&args.config)?;
    let config: ExperimentConfig = partial.build()?;
    let result = run_experiment(&config)?;
    let bins = figure_data(&result, args.covariate - 1, args.bins)?;
    write_text(output.as_deref(), &slice_to_csv(&bins))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run_single(&args),
        Command::Table(args) => run_table(&args),
        Command::Sweep(args) => run_sweep_cmd(&args),
        Command::Figure(args) => run_figure(&args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
