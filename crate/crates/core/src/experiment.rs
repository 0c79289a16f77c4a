//! Benchmark runs: batching is wall-clocked, the update step is simulated.
//!
//! Each iteration owns a fresh stream (seeded with `seed + iteration`) and a
//! fresh shape registry, so iterations can run in parallel without sharing
//! state. A run writes `report.json`, one `steps_<i>.csv` and one
//! `compile_events_<i>.csv` per iteration.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::batchers::{Algorithm, Batcher, ConstantFactor, GraphStream, DEFAULT_BUDGET_SAMPLE_SIZE};
use crate::compile_sim::{CompileEvent, CostModel, ShapeKey, ShapeRegistry};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::Graph;
use crate::padding::PaddingBudget;
use crate::stats::{
    aggregate, mean, speedup, students_t_test, Histogram, Metric, Significance, TTestResult,
    TimingAggregate, TimingField, TimingRecord,
};

pub const REPORT_FILE: &str = "report.json";
pub const STEPS_CSV_HEADER: &str = "step,batch_time_ns,update_time_ns,combined_time_ns,padded_nodes,padded_edges,num_graphs,real_graphs,new_shape";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub batch_size: usize,
    pub steps: usize,
    pub iterations: usize,
    pub dataset_path: PathBuf,
    pub seed: u64,
    pub budget_sample_size: usize,
    pub cost_model: CostModel,
    pub constant_factor: ConstantFactor,
    /// Where the report is written; not echoed into it.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, batch_size: usize, dataset_path: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            algorithm,
            batch_size,
            steps: 1000,
            iterations: 1,
            dataset_path: dataset_path.into(),
            seed: 0,
            budget_sample_size: DEFAULT_BUDGET_SAMPLE_SIZE,
            cost_model: CostModel {
                base_cost: 0.0,
                node_cost: 0.0,
                edge_cost: 0.0,
                compile_penalty: 0.0,
            },
            constant_factor: ConstantFactor::MinusOne,
            output_dir: PathBuf::from("."),
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch size {} must be at least 2",
                self.batch_size
            )));
        }
        if self.budget_sample_size < 1 {
            return Err(Error::InvalidConfig("budget sample size must be at least 1".into()));
        }
        self.cost_model.validate()
    }

    pub fn iteration_seed(&self, iteration: usize) -> u64 {
        self.seed.wrapping_add(iteration as u64)
    }

    fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Identifies a dataset by content totals rather than by path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub num_graphs: usize,
    pub total_nodes: usize,
    pub total_edges: usize,
}

impl DatasetInfo {
    pub fn of(path: impl Into<PathBuf>, dataset: &[Graph]) -> Self {
        DatasetInfo {
            path: path.into(),
            num_graphs: dataset.len(),
            total_nodes: dataset.iter().map(Graph::num_nodes).sum(),
            total_edges: dataset.iter().map(Graph::num_edges).sum(),
        }
    }

    fn same_content(&self, other: &DatasetInfo) -> bool {
        (self.num_graphs, self.total_nodes, self.total_edges)
            == (other.num_graphs, other.total_nodes, other.total_edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockInfo {
    pub source: String,
    /// Smallest non-zero difference observed between consecutive readings.
    pub resolution_ns: u64,
}

impl ClockInfo {
    pub fn probe() -> Self {
        let mut best = u64::MAX;
        for _ in 0..1000 {
            let a = Instant::now();
            let mut b = Instant::now();
            while b == a {
                b = Instant::now();
            }
            best = best.min((b - a).as_nanos() as u64);
        }
        ClockInfo {
            source: "std::time::Instant (monotonic)".into(),
            resolution_ns: best,
        }
    }
}

/// Per-step row of `steps_<i>.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRow {
    pub timing: TimingRecord,
    pub shape: ShapeKey,
    pub real_graphs: usize,
    pub new_shape: bool,
}

impl StepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.timing.step_index,
            self.timing.batch_time,
            self.timing.update_time,
            self.timing.combined_time,
            self.shape.padded_nodes,
            self.shape.padded_edges,
            self.shape.num_graphs,
            self.real_graphs,
            self.new_shape
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub seed: u64,
    /// Fixed budget for the dynamic and static-constant algorithms.
    pub budget: Option<PaddingBudget>,
    pub recompilation_count: usize,
    pub distinct_shapes: usize,
    pub compile_events: Vec<CompileEvent>,
    /// Wall-clock dependent.
    pub timing: TimingAggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    PrePadNodes,
    PrePadEdges,
    RealGraphs,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::PrePadNodes, Quantity::PrePadEdges, Quantity::RealGraphs];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::PrePadNodes => "pre_pad_nodes",
            Quantity::PrePadEdges => "pre_pad_edges",
            Quantity::RealGraphs => "real_graphs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    /// Wall-clock dependent.
    pub clock: ClockInfo,
    /// Largest per-iteration recompilation count.
    pub recompilation_count: usize,
    pub iterations: Vec<IterationReport>,
    /// Unit-width histograms pooled over all iterations, keyed by quantity
    /// name.
    pub histograms: BTreeMap<String, Histogram>,
}

impl ExperimentReport {
    pub fn histogram(&self, quantity: Quantity) -> Result<&Histogram> {
        self.histograms
            .get(quantity.name())
            .ok_or_else(|| Error::MissingQuantity(quantity.name().into()))
    }

    /// One value per iteration: the chosen statistic of the chosen field.
    pub fn per_iteration(&self, metric: Metric, field: TimingField) -> Vec<f64> {
        self.iterations
            .iter()
            .map(|it| it.timing.field(field).get(metric))
            .collect()
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(REPORT_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads `report.json`, given either the file or its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut path = path.as_ref().to_path_buf();
        if path.is_dir() {
            path.push(REPORT_FILE);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything one iteration produced.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub report: IterationReport,
    pub rows: Vec<StepRow>,
    pub registry: ShapeRegistry,
    pub histograms: [Histogram; 3],
}

pub fn run_iteration(
    config: &ExperimentConfig,
    dataset: &Arc<Vec<Graph>>,
    iteration: usize,
) -> Result<IterationOutcome> {
    let seed = config.iteration_seed(iteration);
    let stream = GraphStream::new(Arc::clone(dataset), seed)?;
    let mut batcher = Batcher::for_algorithm(
        config.algorithm,
        stream,
        config.batch_size,
        config.budget_sample_size,
        config.constant_factor,
    )?;
    let budget = batcher.budget();
    let mut registry = ShapeRegistry::new();
    let mut histograms = [unit_histogram(), unit_histogram(), unit_histogram()];
    let mut rows = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let start = Instant::now();
        let next = batcher.next();
        let batch_time = start.elapsed().as_nanos() as u64;
        let padded = next.expect("batchers are infinite")?;

        let new_shape = registry.record_step(step, padded.shape)?;
        let update_time = config.cost_model.update_cost(&padded.shape, new_shape).round() as u64;
        let pre = padded.batch.pre_pad_size();
        histograms[0].add(pre.nodes as f64);
        histograms[1].add(pre.edges as f64);
        histograms[2].add(pre.graphs as f64);
        rows.push(StepRow {
            timing: TimingRecord::new(step, batch_time, update_time),
            shape: padded.shape,
            real_graphs: padded.batch.num_real_graphs(),
            new_shape,
        });
    }

    let timings: Vec<TimingRecord> = rows.iter().map(|r| r.timing).collect();
    let report = IterationReport {
        iteration,
        seed,
        budget,
        recompilation_count: registry.recompilation_count(),
        distinct_shapes: registry.distinct_shapes(),
        compile_events: registry.events().to_vec(),
        timing: aggregate(&timings)?,
    };
    Ok(IterationOutcome {
        report,
        rows,
        registry,
        histograms,
    })
}

fn unit_histogram() -> Histogram {
    Histogram::new(1.0, 0.0).expect("unit width is valid")
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub outcomes: Vec<IterationOutcome>,
}

/// Runs every iteration, in parallel when the config asks for it.
pub fn run_experiment(config: &ExperimentConfig, dataset: Arc<Vec<Graph>>) -> Result<ExperimentRun> {
    run_experiment_with(config, dataset, config.execution())
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    dataset: Arc<Vec<Graph>>,
    exec: Execution,
) -> Result<ExperimentRun> {
    config.validate()?;
    let outcomes = exec
        .map((0..config.iterations).collect(), |i| run_iteration(config, &dataset, i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut pooled = [unit_histogram(), unit_histogram(), unit_histogram()];
    for o in &outcomes {
        for (acc, h) in pooled.iter_mut().zip(&o.histograms) {
            acc.merge(h)?;
        }
    }
    let histograms = Quantity::ALL
        .iter()
        .zip(pooled)
        .map(|(q, h)| (q.name().to_string(), h))
        .collect();
    let report = ExperimentReport {
        config: config.clone(),
        dataset: DatasetInfo::of(&config.dataset_path, &dataset),
        clock: ClockInfo::probe(),
        recompilation_count: outcomes
            .iter()
            .map(|o| o.report.recompilation_count)
            .max()
            .unwrap_or(0),
        iterations: outcomes.iter().map(|o| o.report.clone()).collect(),
        histograms,
    };
    Ok(ExperimentRun { report, outcomes })
}

impl ExperimentRun {
    /// Writes the report and per-iteration CSVs into `dir`, creating it.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for o in &self.outcomes {
            let i = o.report.iteration;
            let path = dir.join(format!("steps_{i}.csv"));
            write_file(&path, |out| {
                writeln!(out, "{STEPS_CSV_HEADER}")?;
                for row in &o.rows {
                    writeln!(out, "{}", row.csv_line())?;
                }
                Ok(())
            })?;
            let path = dir.join(format!("compile_events_{i}.csv"));
            write_file(&path, |out| o.registry.write_events_csv(out))?;
        }
        self.report.write(dir)
    }
}

pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// One compared report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonEntry {
    /// Algorithm name, suffixed with `#k` when it repeats.
    pub label: String,
    pub algorithm: Algorithm,
    /// Mean over iterations of the per-iteration statistic.
    pub value: f64,
    /// Slowest entry's value divided by this one.
    pub speedup_vs_slowest: f64,
    pub per_iteration: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: Metric,
    pub field: TimingField,
    pub entries: Vec<ComparisonEntry>,
    /// `tests[i][j]` compares entry i against entry j; `None` when either
    /// side has fewer than two iterations.
    pub tests: Vec<Vec<Option<TTestResult>>>,
}

pub fn compare_reports(
    reports: &[ExperimentReport],
    metric: Metric,
    field: TimingField,
) -> Result<Comparison> {
    let first = reports
        .first()
        .filter(|_| reports.len() >= 2)
        .ok_or_else(|| Error::MismatchedConfigs("at least two reports are needed".into()))?;
    for r in &reports[1..] {
        if r.config.batch_size != first.config.batch_size {
            return Err(Error::MismatchedConfigs(format!(
                "batch sizes {} and {} differ",
                first.config.batch_size, r.config.batch_size
            )));
        }
        if !r.dataset.same_content(&first.dataset) {
            return Err(Error::MismatchedConfigs(format!(
                "datasets {} and {} differ",
                first.dataset.path.display(),
                r.dataset.path.display()
            )));
        }
    }

    let mut seen: BTreeMap<Algorithm, usize> = BTreeMap::new();
    let mut entries: Vec<ComparisonEntry> = reports
        .iter()
        .map(|r| {
            let k = seen.entry(r.config.algorithm).or_default();
            *k += 1;
            let label = if *k == 1 {
                r.config.algorithm.name().to_string()
            } else {
                format!("{}#{k}", r.config.algorithm.name())
            };
            let per_iteration = r.per_iteration(metric, field);
            ComparisonEntry {
                label,
                algorithm: r.config.algorithm,
                value: mean(&per_iteration),
                speedup_vs_slowest: f64::NAN,
                per_iteration,
            }
        })
        .collect();
    let slowest = entries.iter().map(|e| e.value).fold(f64::MIN, f64::max);
    for e in &mut entries {
        e.speedup_vs_slowest = speedup(slowest, e.value).unwrap_or(f64::NAN);
    }

    let tests = entries
        .iter()
        .map(|a| {
            entries
                .iter()
                .map(|b| pairwise_test(&a.per_iteration, &b.per_iteration))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Comparison {
        metric,
        field,
        entries,
        tests,
    })
}

fn pairwise_test(a: &[f64], b: &[f64]) -> Result<Option<TTestResult>> {
    if a.len() < 2 || b.len() < 2 {
        return Ok(None);
    }
    match students_t_test(a, b) {
        Ok(r) => Ok(Some(r)),
        Err(Error::DegenerateSamples) => Ok(Some(TTestResult {
            t_statistic: 0.0,
            degrees_of_freedom: a.len() + b.len() - 2,
            p_value: 1.0,
            significance: Significance::None,
            degenerate: true,
        })),
        Err(e) => Err(e),
    }
}

impl Comparison {
    pub fn write_table_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "label,algorithm,value,speedup_vs_slowest,iterations")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.label,
                e.algorithm,
                e.value,
                e.speedup_vs_slowest,
                e.per_iteration.len()
            )?;
        }
        Ok(())
    }

    /// Square matrix with entry labels as header and first column.
    pub fn write_matrix_csv<W: Write>(
        &self,
        mut out: W,
        cell: impl Fn(&TTestResult) -> String,
    ) -> std::io::Result<()> {
        let labels: Vec<&str> = self.entries.iter().map(|e| e.label.as_str()).collect();
        writeln!(out, ",{}", labels.join(","))?;
        for (label, row) in labels.iter().zip(&self.tests) {
            let cells: Vec<String> = row
                .iter()
                .map(|r| r.as_ref().map(&cell).unwrap_or_default())
                .collect();
            writeln!(out, "{label},{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Writes `comparison.csv`, `ttest_t.csv`, `ttest_p.csv` and
    /// `ttest_significance.csv` into `dir`.
    pub fn write_csvs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("comparison.csv"), |out| self.write_table_csv(out))?;
        write_file(&dir.join("ttest_t.csv"), |out| {
            self.write_matrix_csv(out, |r| r.t_statistic.to_string())
        })?;
        write_file(&dir.join("ttest_p.csv"), |out| {
            self.write_matrix_csv(out, |r| r.p_value.to_string())
        })?;
        write_file(&dir.join("ttest_significance.csv"), |out| {
            self.write_matrix_csv(out, |r| r.significance.name().to_string())
        })
    }
}

/// Histogram of `quantity` from a report, re-binned to `bin_width`.
pub fn report_histogram(report: &ExperimentReport, quantity: Quantity, bin_width: f64) -> Result<Histogram> {
    let h = report.histogram(quantity)?;
    if bin_width == h.bin_width {
        Ok(h.clone())
    } else {
        h.rebin(bin_width, h.origin)
    }
}
