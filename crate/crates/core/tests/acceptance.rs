//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graphbatch::datagen::{gen_dataset, GeneratorParams};
use graphbatch::experiment::{run_experiment_with, ExperimentConfig, ExperimentRun, Quantity};
use graphbatch::stats::{interquartile_range, students_t_test};
use graphbatch::{
    batch_graphs, estimate_padding_budget, unbatch, Algorithm, Batcher, ConstantFactor, CostModel,
    Execution, Graph, GraphStream, PaddedBatch, ShapeRegistry,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const BATCH: usize = 32;
const SURROGATE_SIZE: usize = 10_000;

fn qm9() -> Arc<Vec<Graph>> {
    static DATA: OnceLock<Arc<Vec<Graph>>> = OnceLock::new();
    DATA.get_or_init(|| Arc::new(gen_dataset(&GeneratorParams::qm9_like(SURROGATE_SIZE, 1)).unwrap()))
        .clone()
}

fn aflow() -> Arc<Vec<Graph>> {
    static DATA: OnceLock<Arc<Vec<Graph>>> = OnceLock::new();
    DATA.get_or_init(|| Arc::new(gen_dataset(&GeneratorParams::aflow_like(SURROGATE_SIZE, 2)).unwrap()))
        .clone()
}

fn batcher(alg: Algorithm, dataset: &Arc<Vec<Graph>>, batch_size: usize, seed: u64) -> Batcher {
    let stream = GraphStream::new(Arc::clone(dataset), seed).unwrap();
    Batcher::for_algorithm(alg, stream, batch_size, 1000, ConstantFactor::MinusOne).unwrap()
}

/// Feeds the next `n` batches to `visit` one at a time.
fn each(b: &mut Batcher, n: usize, mut visit: impl FnMut(PaddedBatch) -> Result<(), String>) -> Result<(), String> {
    for p in b.take(n) {
        visit(p.map_err(|e| e.to_string())?)?;
    }
    Ok(())
}

fn config(alg: Algorithm, steps: usize, iterations: usize, cost: CostModel) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(alg, BATCH, "surrogate");
    c.steps = steps;
    c.iterations = iterations;
    c.seed = 11;
    c.cost_model = cost;
    c
}

fn run(c: &ExperimentConfig, dataset: &Arc<Vec<Graph>>) -> Result<ExperimentRun, String> {
    run_experiment_with(c, Arc::clone(dataset), Execution::default()).map_err(|e| e.to_string())
}

fn budget_reproduction() -> Check {
    let start = Instant::now();
    // sample mean exactly 17.0
    let exact: Vec<Graph> = (0..1000)
        .map(|i| Graph::new(if i % 2 == 0 { 16 } else { 18 }, vec![], vec![]).unwrap())
        .collect();
    let stream = GraphStream::new(Arc::new(exact), 0).unwrap();
    let b = estimate_padding_budget(&stream, BATCH, 1000).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(b.node_target() == 576, "node target {} for mean 17.0", b.node_target());
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");

    let stream = GraphStream::new(qm9(), 0).unwrap();
    let s = estimate_padding_budget(&stream, BATCH, 1000).map_err(|e| e.to_string())?;
    ensure!(s.node_target() == 576, "surrogate node target {}", s.node_target());
    Ok(format!("node_target 576 (exact mean and surrogate), {elapsed:?}"))
}

fn dynamic_budget_law() -> Check {
    let start = Instant::now();
    let steps = 10_000;
    let mut notes = Vec::new();
    for (name, data) in [("qm9-like", qm9()), ("aflow-like", aflow())] {
        let mut b = batcher(Algorithm::Dynamic, &data, BATCH, 3);
        let budget = b.budget().unwrap();
        let target = budget.as_size();
        let mut registry = ShapeRegistry::new();
        each(&mut b, steps, |p| {
            let step = p.step_index;
            let pre = p.batch.pre_pad_size();
            ensure!(
                pre.nodes <= target.nodes && pre.edges <= target.edges && pre.graphs <= target.graphs,
                "{name} step {step}: pre-pad {pre} over budget {budget}"
            );
            ensure!(p.batch.padded_size() == target, "{name} step {step}: shape {}", p.batch.padded_size());
            ensure!(p.batch.num_real_graphs() <= BATCH - 1, "{name} step {step}: too many real graphs");
            registry.record_step(step, p.shape).map_err(|e| e.to_string())?;
            Ok(())
        })?;
        ensure!(registry.recompilation_count() == 0, "{name}: {} recompilations", registry.recompilation_count());
        notes.push(format!("{name} budget {budget}"));
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{steps} batches each, {}, 0 recompilations, {elapsed:?}", notes.join(", ")))
}

fn stream_conservation() -> Check {
    let steps = 1000;
    let mut total = 0;
    for (name, data) in [("qm9-like", qm9()), ("aflow-like", aflow())] {
        for alg in Algorithm::ALL {
            let mut b = batcher(alg, &data, BATCH, 5);
            let mut real: Vec<Graph> = Vec::new();
            each(&mut b, steps, |p| {
                real.extend_from_slice(p.batch.real_graphs());
                Ok(())
            })?;
            let prefix: Vec<Graph> = GraphStream::new(Arc::clone(&data), 5).unwrap().take(real.len()).collect();
            ensure!(
                real == prefix,
                "{name} {alg}: real graphs diverge from the stream prefix"
            );
            total += real.len();
        }
    }
    Ok(format!("{steps} batches x 4 algorithms x 2 datasets, {total} graphs matched"))
}

fn random_graph(rng: &mut ChaCha8Rng, node_dim: Option<usize>, edge_dim: Option<usize>) -> Graph {
    let n = rng.random_range(0..12usize);
    let e = if n == 0 { 0 } else { rng.random_range(0..30usize) };
    let senders = (0..e).map(|_| rng.random_range(0..n as u32)).collect();
    let receivers = (0..e).map(|_| rng.random_range(0..n as u32)).collect();
    let mut feats = |count: usize, dim: Option<usize>| {
        dim.map(|d| (0..count).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect())
    };
    let nf = feats(n, node_dim);
    let ef = feats(e, edge_dim);
    Graph::with_features(n, senders, receivers, nf, ef).unwrap()
}

fn round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lists = 1000;
    for case in 0..lists {
        let len = rng.random_range(1..10usize);
        // mostly uniform feature layouts, sometimes mixed
        let node_dim = rng.random_bool(0.7).then(|| rng.random_range(1..4usize));
        let edge_dim = rng.random_bool(0.5).then(|| rng.random_range(1..3usize));
        let mixed = rng.random_bool(0.2);
        let list: Vec<Graph> = (0..len)
            .map(|_| {
                let nd = if mixed && rng.random_bool(0.5) { None } else { node_dim };
                random_graph(&mut rng, nd, edge_dim)
            })
            .collect();
        let batch = batch_graphs(list.clone()).map_err(|e| format!("case {case}: {e}"))?;
        let back = unbatch(&batch).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(back == list, "case {case}: round trip differs");
    }
    Ok(format!("{lists} random lists restored exactly"))
}

fn shape_laws() -> Check {
    let steps = 10_000;
    let data = qm9();
    let mut b = batcher(Algorithm::Static2N, &data, BATCH, 6);
    each(&mut b, steps, |p| {
        let s = p.batch.padded_size();
        ensure!(
            s.nodes.is_power_of_two() && s.edges.is_power_of_two(),
            "static2n step {}: {s}",
            p.step_index
        );
        Ok(())
    })?;
    let mut b = batcher(Algorithm::Static64, &data, BATCH, 6);
    each(&mut b, steps, |p| {
        let s = p.batch.padded_size();
        ensure!(s.nodes % 64 == 0 && s.edges % 64 == 0, "static64 step {}: {s}", p.step_index);
        Ok(())
    })?;
    let mut shapes = BTreeSet::new();
    for data in [qm9(), aflow()] {
        let mut b = batcher(Algorithm::StaticConstant, &data, BATCH, 6);
        let mut keys = BTreeSet::new();
        each(&mut b, steps, |p| {
            keys.insert(p.shape);
            Ok(())
        })?;
        ensure!(keys.len() == 1, "static-constant produced {} shapes", keys.len());
        shapes.extend(keys);
    }
    Ok(format!("{steps} batches per law; constant shapes {shapes:?}"))
}

fn bucket_ordering() -> Check {
    let steps = 2000;
    let data = qm9();
    let mut rows = Vec::new();
    for batch_size in [16, 32, 64, 128] {
        let mut counts = Vec::new();
        for alg in [Algorithm::Static2N, Algorithm::Static64, Algorithm::Dynamic] {
            let mut b = batcher(alg, &data, batch_size, 8);
            let mut min_pre = usize::MAX;
            let mut distinct = BTreeSet::new();
            each(&mut b, steps, |p| {
                min_pre = min_pre.min(p.batch.pre_pad_size().nodes);
                distinct.insert(p.shape);
                Ok(())
            })?;
            ensure!(min_pre >= 64, "batch size {batch_size} {alg}: pre-pad total {min_pre} below 64");
            counts.push(distinct.len());
        }
        let [pow2, mult64, dynamic] = counts[..] else { unreachable!() };
        ensure!(pow2 <= mult64, "batch size {batch_size}: static2n {pow2} > static64 {mult64}");
        ensure!(dynamic == 1, "batch size {batch_size}: dynamic {dynamic} shapes");
        rows.push(format!("B={batch_size} {pow2}/{mult64}/{dynamic}"));
    }
    Ok(format!("distinct shapes static2n/static64/dynamic: {}", rows.join(", ")))
}

fn static_constant_penalty() -> Check {
    let data = aflow();
    let nodes: Vec<usize> = data.iter().map(Graph::num_nodes).collect();
    let mean = nodes.iter().sum::<usize>() as f64 / nodes.len() as f64;
    let ratio = *nodes.iter().max().unwrap() as f64 / mean;
    ensure!(ratio >= 10.0, "max/mean node ratio {ratio:.2} below 10");

    let steps = 1000;
    let target = batcher(Algorithm::Dynamic, &data, BATCH, 9).budget().unwrap().node_target();
    let mut padded = usize::MAX;
    each(&mut batcher(Algorithm::StaticConstant, &data, BATCH, 9), steps, |p| {
        padded = padded.min(p.shape.padded_nodes);
        Ok(())
    })?;
    ensure!(padded >= 5 * target, "constant padded nodes {padded} below 5 x {target}");

    // simulated update cost alone, over several cost models
    let mut worst = f64::INFINITY;
    for (node_cost, edge_cost) in [(1.0, 0.0), (1.0, 1.0), (10.0, 0.1), (0.001, 0.0)] {
        let cost = CostModel::new(0.0, node_cost, edge_cost, 0.0).unwrap();
        let c = run(&config(Algorithm::StaticConstant, steps, 1, cost), &data)?;
        let d = run(&config(Algorithm::Dynamic, steps, 1, cost), &data)?;
        let upd = |r: &ExperimentRun| r.report.iterations[0].timing.update.mean;
        let r = upd(&c) / upd(&d);
        ensure!(r >= 3.0, "update ratio {r:.2} for node {node_cost} edge {edge_cost}");
        worst = worst.min(r);
    }

    // combined: measured batching plus simulated update
    let cost = CostModel::new(0.0, 100.0, 1.0, 0.0).unwrap();
    let c = run(&config(Algorithm::StaticConstant, steps, 1, cost), &data)?;
    let d = run(&config(Algorithm::Dynamic, steps, 1, cost), &data)?;
    let comb = |r: &ExperimentRun| r.report.iterations[0].timing.combined.mean;
    let combined = comb(&c) / comb(&d);
    ensure!(combined >= 3.0, "combined ratio {combined:.2}");
    Ok(format!(
        "max/mean {ratio:.1}; padded nodes {padded} vs budget {target} ({:.1}x); update ratio >= {worst:.1}; combined ratio {combined:.1}",
        padded as f64 / target as f64
    ))
}

/// Two-sided Student t tail by quadrature. With `x = sqrt(df) tan(theta)` the
/// density `(1 + x^2/df)^(-(df+1)/2) dx` becomes `cos(theta)^(df-1) dtheta`
/// up to a constant, so the tail is a ratio of two finite integrals.
fn oracle_p(t: f64, df: f64) -> f64 {
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n)
            .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
            .sum();
        (f(a) + inner + f(b)) * h / 3.0
    }
    let f = |theta: f64| theta.cos().powf(df - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta0 = (t.abs() / df.sqrt()).atan();
    simpson(f, theta0, half_pi, 200_000) / simpson(f, 0.0, half_pi, 200_000)
}

fn oracle_t(a: &[f64], b: &[f64]) -> f64 {
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64]| {
        let mu = m(v);
        v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>()
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (ss(a) + ss(b)) / (na + nb - 2.0);
    (m(a) - m(b)) / (pooled * (1.0 / na + 1.0 / nb)).sqrt()
}

fn t_test_oracle() -> Check {
    // reference values from an independent statistics package
    let cases: [(&[f64], &[f64], f64, f64); 3] = [
        (&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], -1.224744871391589, 0.2878641347266908),
        (
            &[5.1, 4.9, 5.3, 5.0, 5.2],
            &[4.2, 4.8, 4.5, 4.4, 4.9, 4.1],
            3.9171049364852464,
            0.003526451831082483,
        ),
        (
            &[0.31, 0.28, 0.35, 0.30, 0.29, 0.33, 0.32, 0.27, 0.34, 0.30],
            &[0.36, 0.33, 0.38, 0.35, 0.31, 0.37, 0.36, 0.34, 0.39, 0.35],
            -4.046561882978718,
            0.0007571167374902256,
        ),
    ];
    let mut worst = (0.0f64, 0.0f64);
    for (i, (a, b, t_ref, p_ref)) in cases.iter().enumerate() {
        let r = students_t_test(a, b).map_err(|e| e.to_string())?;
        let df = (a.len() + b.len() - 2) as f64;
        let t_or = oracle_t(a, b);
        let p_or = oracle_p(t_or, df);
        ensure!((t_or - t_ref).abs() <= 1e-9 && (p_or - p_ref).abs() <= 1e-9, "case {i}: oracle disagrees with reference");
        let dt = (r.t_statistic - t_or).abs();
        let dp = (r.p_value - p_or).abs();
        ensure!(dt <= 1e-6 && dp <= 1e-6, "case {i}: |dt| {dt:e} |dp| {dp:e}");
        worst = (worst.0.max(dt), worst.1.max(dp));

        let swapped = students_t_test(b, a).map_err(|e| e.to_string())?;
        ensure!(
            swapped.t_statistic == -r.t_statistic && swapped.p_value == r.p_value,
            "case {i}: not antisymmetric"
        );
        let same = students_t_test(a, a).map_err(|e| e.to_string())?;
        ensure!(same.t_statistic == 0.0 && same.p_value == 1.0, "case {i}: identical samples give {same:?}");
    }
    Ok(format!("max |dt| {:.1e}, max |dp| {:.1e}; antisymmetric; identical samples t 0 p 1", worst.0, worst.1))
}

fn histogram_truncation() -> Check {
    let steps = 10_000;
    let data = qm9();
    let cost = CostModel::new(0.0, 0.0, 0.0, 0.0).unwrap();
    let d = run(&config(Algorithm::Dynamic, steps, 1, cost), &data)?;
    let s = run(&config(Algorithm::Static64, steps, 1, cost), &data)?;
    let target = d.report.iterations[0].budget.unwrap().node_target();
    let dh = d.report.histogram(Quantity::PrePadNodes).map_err(|e| e.to_string())?;
    let sh = s.report.histogram(Quantity::PrePadNodes).map_err(|e| e.to_string())?;
    let dyn_mass = dh.mass_at_or_above(target as f64);
    let static_mass = sh.mass_at_or_above(target as f64 + 1.0);
    ensure!(dyn_mass == 0, "dynamic mass {dyn_mass} at or above {target}");
    ensure!(static_mass > 0, "static mass above {target} is zero");
    Ok(format!("budget {target}: dynamic mass at/above 0, static mass above {static_mass} of {steps}"))
}

fn real_graph_spread() -> Check {
    let steps = 10_000;
    let cost = CostModel::new(0.0, 0.0, 0.0, 0.0).unwrap();
    let real = |data: &Arc<Vec<Graph>>| -> Result<(Vec<f64>, u64), String> {
        let r = run(&config(Algorithm::Dynamic, steps, 1, cost), data)?;
        let h = r.report.histogram(Quantity::RealGraphs).map_err(|e| e.to_string())?;
        let below = h.total - h.mass_at_or_above((BATCH - 1) as f64);
        Ok((r.outcomes[0].rows.iter().map(|row| row.real_graphs as f64).collect(), below))
    };
    let (aflow_real, below) = real(&aflow())?;
    let (qm9_real, _) = real(&qm9())?;
    ensure!(below > 0, "long-tail run never had fewer than {} real graphs", BATCH - 1);
    let fewest = aflow_real.iter().cloned().fold(f64::INFINITY, f64::min);
    let iqr_a = interquartile_range(&aflow_real).map_err(|e| e.to_string())?;
    let iqr_q = interquartile_range(&qm9_real).map_err(|e| e.to_string())?;
    ensure!(iqr_q < iqr_a, "qm9-like IQR {iqr_q} not below long-tail IQR {iqr_a}");
    Ok(format!(
        "long-tail: {below} of {steps} batches below {}, fewest {fewest}; IQR qm9-like {iqr_q} < long-tail {iqr_a}",
        BATCH - 1
    ))
}

fn strip_wall_clock(mut v: serde_json::Value) -> serde_json::Value {
    let obj = v.as_object_mut().unwrap();
    obj.remove("clock");
    for it in obj["iterations"].as_array_mut().unwrap() {
        it.as_object_mut().unwrap().remove("timing");
    }
    v
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cost = CostModel::new(100.0, 2.0, 0.5, 1e6).unwrap();
    let data = aflow();
    for alg in Algorithm::ALL {
        let c = config(alg, 500, 3, cost);
        let mut reports = Vec::new();
        let mut shapes = Vec::new();
        for (k, exec) in [Execution::Sequential, Execution::Parallel].into_iter().enumerate() {
            let out = dir.path().join(format!("{alg}_{k}"));
            let r = run_experiment_with(&c, Arc::clone(&data), exec).map_err(|e| e.to_string())?;
            let path = r.write(&out).map_err(|e| e.to_string())?;
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            reports.push(strip_wall_clock(serde_json::from_str(&text).map_err(|e| e.to_string())?));
            let mut cols = Vec::new();
            for i in 0..c.iterations {
                let csv = std::fs::read_to_string(out.join(format!("steps_{i}.csv"))).map_err(|e| e.to_string())?;
                cols.extend(csv.lines().map(|l| {
                    let f: Vec<&str> = l.split(',').collect();
                    [f[0], f[4], f[5], f[6], f[7], f[8]].join(",")
                }));
            }
            shapes.push(cols);
        }
        ensure!(reports[0] == reports[1], "{alg}: report.json differs beyond wall-clock fields");
        ensure!(shapes[0] == shapes[1], "{alg}: step CSV shape columns differ");
    }
    Ok("report.json and step CSV shape columns identical across repeated runs, all algorithms".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("budget reproduction", budget_reproduction),
        ("dynamic budget law", dynamic_budget_law),
        ("stream conservation", stream_conservation),
        ("round-trip", round_trip),
        ("shape laws", shape_laws),
        ("bucket ordering", bucket_ordering),
        ("static-constant penalty", static_constant_penalty),
        ("t-test oracle", t_test_oracle),
        ("histogram truncation", histogram_truncation),
        ("graphs-before-padding spread", real_graph_spread),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
