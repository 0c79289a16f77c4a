//! `graphbatch` command-line harness.
//!
//! Exit codes: 0 on success, 1 on usage, configuration or I/O errors, 2 when
//! a graph does not fit the dynamic padding budget.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use graphbatch::datagen::{dataset_summary, gen_dataset_with, read_dataset, write_dataset, GeneratorParams};
use graphbatch::experiment::{
    compare_reports, report_histogram, run_experiment, Comparison, ExperimentConfig, ExperimentReport,
    Quantity,
};
use graphbatch::stats::{Metric, TimingField};
use graphbatch::{Algorithm, ConstantFactor, CostModel, Error, Execution};

#[derive(Parser)]
#[command(name = "graphbatch", version, about = "Graph mini-batching benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and print its size summary.
    Generate(GenerateArgs),
    /// Run a batching benchmark and write its report.
    Bench(BenchArgs),
    /// Compare two or more benchmark reports.
    Compare(CompareArgs),
    /// Print or write one of a report's histograms as CSV.
    Hist(HistArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Qm9like,
    Aflowlike,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    mean_nodes: Option<f64>,
    /// Standard deviation, or log-space sigma for the long-tailed family.
    #[arg(long)]
    std_nodes: Option<f64>,
    #[arg(long)]
    min_nodes: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    knn_k: Option<usize>,
    /// Generate sequentially even when built with parallel support.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Static64,
    Static2n,
    StaticConstant,
    Dynamic,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Static64 => Algorithm::Static64,
            AlgorithmArg::Static2n => Algorithm::Static2N,
            AlgorithmArg::StaticConstant => Algorithm::StaticConstant,
            AlgorithmArg::Dynamic => Algorithm::Dynamic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorArg {
    Full,
    MinusOne,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    #[arg(long)]
    batch_size: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    budget_sample_size: usize,
    #[arg(long, value_enum, default_value = "minus-one")]
    constant_factor: FactorArg,
    #[arg(long, default_value_t = 1000.0)]
    base_cost_ns: f64,
    #[arg(long, default_value_t = 10.0)]
    node_cost_ns: f64,
    #[arg(long, default_value_t = 1.0)]
    edge_cost_ns: f64,
    #[arg(long, default_value_t = 1_000_000.0)]
    compile_penalty_ns: f64,
    #[arg(long, env = "GRAPHBATCH_OUTPUT_DIR", default_value = "results")]
    output_dir: PathBuf,
    /// Run iterations in parallel.
    #[arg(long)]
    parallel: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Mean,
    Median,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Batch,
    Update,
    Combined,
}

#[derive(Args)]
struct CompareArgs {
    /// Report files or directories holding `report.json`.
    #[arg(required = true, num_args = 2..)]
    reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "mean")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "combined")]
    field: FieldArg,
    /// Also write the table and t-test matrices as CSV files here.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum QuantityArg {
    PrePadNodes,
    PrePadEdges,
    RealGraphs,
}

#[derive(Args)]
struct HistArgs {
    report: PathBuf,
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Bench(args) => bench(args),
        Command::Compare(args) => compare(args),
        Command::Hist(args) => hist(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::GraphExceedsBudget { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut params = match args.family {
        FamilyArg::Qm9like => GeneratorParams::qm9_like(args.size, args.seed),
        FamilyArg::Aflowlike => GeneratorParams::aflow_like(args.size, args.seed),
    };
    if let Some(v) = args.mean_nodes {
        params.mean_nodes = v;
    }
    if let Some(v) = args.std_nodes {
        params.std_nodes = v;
    }
    if let Some(v) = args.min_nodes {
        params.min_nodes = v;
    }
    if let Some(v) = args.max_nodes {
        params.max_nodes = v;
    }
    if let Some(v) = args.knn_k {
        params.knn_k = v;
    }
    let exec = if args.sequential { Execution::Sequential } else { Execution::default() };
    let dataset = gen_dataset_with(&params, exec)?;
    write_dataset(&dataset, &args.output)?;
    println!("wrote {}", args.output.display());
    println!("{}", dataset_summary(&dataset)?);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = ExperimentConfig::new(args.algorithm.into(), args.batch_size, &args.dataset);
    config.steps = args.steps;
    config.iterations = args.iterations;
    config.seed = args.seed;
    config.budget_sample_size = args.budget_sample_size;
    config.constant_factor = match args.constant_factor {
        FactorArg::Full => ConstantFactor::Full,
        FactorArg::MinusOne => ConstantFactor::MinusOne,
    };
    config.cost_model = CostModel::new(
        args.base_cost_ns,
        args.node_cost_ns,
        args.edge_cost_ns,
        args.compile_penalty_ns,
    )?;
    config.output_dir = args.output_dir.clone();
    config.parallel = args.parallel;
    config.validate()?;

    let dataset = Arc::new(read_dataset(&args.dataset)?);
    let run = run_experiment(&config, dataset)?;
    let path = run.write(&args.output_dir)?;

    let report = &run.report;
    println!("algorithm {} batch size {}", config.algorithm, config.batch_size);
    if let Some(budget) = report.iterations.first().and_then(|i| i.budget) {
        println!("budget {budget}");
    }
    println!("recompilations {}", report.recompilation_count);
    println!("iteration  mean batch ns  mean update ns  mean combined ns  median combined ns");
    for it in &report.iterations {
        println!(
            "{:>9}  {:>13.1}  {:>14.1}  {:>16.1}  {:>18.1}",
            it.iteration,
            it.timing.batch.mean,
            it.timing.update.mean,
            it.timing.combined.mean,
            it.timing.combined.median
        );
    }
    println!("report {}", path.display());
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let reports = args
        .reports
        .iter()
        .map(|p| ExperimentReport::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let metric = match args.metric {
        MetricArg::Mean => Metric::Mean,
        MetricArg::Median => Metric::Median,
    };
    let field = match args.field {
        FieldArg::Batch => TimingField::Batch,
        FieldArg::Update => TimingField::Update,
        FieldArg::Combined => TimingField::Combined,
    };
    let comparison = compare_reports(&reports, metric, field)?;
    print_comparison(&comparison)?;
    if let Some(dir) = &args.output_dir {
        comparison.write_csvs(dir)?;
    }
    Ok(())
}

fn print_comparison(c: &Comparison) -> io::Result<()> {
    let mut out = io::stdout().lock();
    let width = c.entries.iter().map(|e| e.label.len()).max().unwrap_or(0).max(5);
    writeln!(out, "{:<width$}  {:>16}  {:>8}", "label", "value ns", "speedup")?;
    for e in &c.entries {
        writeln!(out, "{:<width$}  {:>16.1}  {:>8.3}", e.label, e.value, e.speedup_vs_slowest)?;
    }
    writeln!(out)?;
    writeln!(out, "pairwise t-tests (t, p, significance)")?;
    for (i, (a, row)) in c.entries.iter().zip(&c.tests).enumerate() {
        for (b, test) in c.entries.iter().zip(row).skip(i + 1) {
            match test {
                Some(t) => writeln!(
                    out,
                    "{} vs {}: t {:.4} p {:.4} {}",
                    a.label,
                    b.label,
                    t.t_statistic,
                    t.p_value,
                    t.significance.name()
                )?,
                None => writeln!(out, "{} vs {}: too few iterations", a.label, b.label)?,
            }
        }
    }
    Ok(())
}

fn hist(args: HistArgs) -> Result<()> {
    let report = ExperimentReport::load(&args.report)?;
    let quantity = match args.quantity {
        QuantityArg::PrePadNodes => Quantity::PrePadNodes,
        QuantityArg::PrePadEdges => Quantity::PrePadEdges,
        QuantityArg::RealGraphs => Quantity::RealGraphs,
    };
    let h = report_histogram(&report, quantity, args.bin_width)?;
    match &args.output {
        Some(path) => {
            let mut buf = Vec::new();
            h.write_csv(&mut buf)?;
            fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
        }
        None => h.write_csv(io::stdout().lock())?,
    }
    Ok(())
}
