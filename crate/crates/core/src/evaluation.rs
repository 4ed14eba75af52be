//! Accuracy, benchmark tables over transfer tasks, and 2-D embedding export.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::data::{gen_two_moons, Dataset};
use crate::error::{Error, Result};
use crate::losses::entropy_loss;
use crate::network::Network;
use crate::numerics::{argmax, pca2d};
use crate::trainer::{train, LossReport, TrainConfig};

/// Number of rows whose argmax logit (ties to the lowest class) matches the label.
pub fn count_correct(net: &Network, labeled: &Dataset) -> Result<(usize, usize)> {
    let labels = labeled.labels().ok_or(Error::UnlabeledDataset)?;
    if labeled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labeled.num_classes() != net.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "network has {} classes, dataset has {}",
            net.num_classes(),
            labeled.num_classes()
        )));
    }
    let logits = net.predict(labeled.features())?;
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(r, &y)| argmax(logits.row(r)) == y)
        .count();
    Ok((correct, labels.len()))
}

/// `100 · t / n`.
pub fn accuracy_percent(correct: usize, total: usize) -> f64 {
    100.0 * correct as f64 / total as f64
}

/// Classification accuracy in percent.
pub fn accuracy(net: &Network, labeled: &Dataset) -> Result<f64> {
    let (t, n) = count_correct(net, labeled)?;
    Ok(accuracy_percent(t, n))
}

/// The text `cmd_eval` prints.
pub fn format_accuracy(percent: f64) -> String {
    format!("accuracy={percent:.2}")
}

/// Mean entropy (nats) of the network's predictive distribution over `features`.
pub fn mean_prediction_entropy(net: &Network, features: &crate::numerics::Matrix) -> Result<f64> {
    Ok(entropy_loss(&net.predict(features)?)?.value)
}

#[derive(Clone, Debug)]
pub struct TransferTask {
    pub name: String,
    pub source: Dataset,
    /// Labels are used for scoring only.
    pub target: Dataset,
}

impl TransferTask {
    pub fn new(name: impl Into<String>, source: Dataset, target: Dataset) -> Result<Self> {
        if source.num_classes() != target.num_classes() {
            return Err(Error::ShapeMismatch(format!(
                "source has {} classes, target {}",
                source.num_classes(),
                target.num_classes()
            )));
        }
        Ok(Self {
            name: name.into(),
            source,
            target,
        })
    }
}

/// Two-moons source at 0° against a rotated target drawn with a different seed.
pub fn two_moons_task(
    rotation_deg: f64,
    n: usize,
    noise_sd: f64,
    data_seed: u64,
) -> Result<TransferTask> {
    let source = gen_two_moons(n, noise_sd, 0.0, data_seed)?;
    let target = gen_two_moons(n, noise_sd, rotation_deg, data_seed.wrapping_add(1))?;
    TransferTask::new(format!("moons-0->moons-{rotation_deg}"), source, target)
}

/// Rotations used by the built-in `two-moons-sweep` suite.
pub const SWEEP_ROTATIONS: [f64; 4] = [15.0, 30.0, 45.0, 60.0];

pub fn two_moons_sweep() -> Result<Vec<TransferTask>> {
    SWEEP_ROTATIONS
        .iter()
        .map(|&r| two_moons_task(r, 500, 0.15, 0))
        .collect()
}

/// A named training configuration compared in a benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodConfig {
    pub name: String,
    pub config: TrainConfig,
}

pub const METHOD_NAMES: [&str; 4] = ["baseline", "coral", "mmd", "joint"];

/// The four standard methods derived from `base`: no adaptation, CORAL-only,
/// MMD-only and the full joint objective. The ablations keep the entropy
/// term so that they differ from the joint method only in the discrepancy
/// metric.
pub fn standard_methods(base: &TrainConfig) -> Vec<MethodConfig> {
    METHOD_NAMES
        .iter()
        .map(|&name| MethodConfig {
            name: name.to_string(),
            config: method_config(name, base).expect("known method"),
        })
        .collect()
}

pub fn method_config(name: &str, base: &TrainConfig) -> Option<TrainConfig> {
    let mut c = base.clone();
    match name {
        "baseline" => c = c.without_adaptation(),
        "coral" => {
            c.lambda_mmd_rep = 0.0;
            c.lambda_mmd_logit = 0.0;
        }
        "mmd" => {
            c.lambda_coral_rep = 0.0;
            c.lambda_coral_logit = 0.0;
        }
        "joint" => {}
        _ => return None,
    }
    Some(c)
}

/// Outcome of one (task, method, seed) training run.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub network: Network,
    pub history: Vec<LossReport>,
    pub accuracy: f64,
}

pub fn run_cell(task: &TransferTask, method: &MethodConfig, seed: u64) -> Result<CellOutcome> {
    let config = TrainConfig {
        seed,
        ..method.config.clone()
    };
    let (network, history) = train(&config, &task.source, task.target.unlabeled())?;
    let accuracy = accuracy(&network, &task.target)?;
    Ok(CellOutcome {
        network,
        history,
        accuracy,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub task: String,
    pub method: String,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkTable {
    /// Sorted by (task, method, seed).
    pub rows: Vec<BenchmarkRow>,
    /// Per-method mean over all tasks and seeds, sorted by method.
    pub means: Vec<(String, f64)>,
}

impl BenchmarkTable {
    pub const CSV_HEADER: &'static str = "task,method,seed,accuracy";
    pub const MEAN_TASK: &'static str = "avg";

    pub fn from_rows(mut rows: Vec<BenchmarkRow>) -> Self {
        rows.sort_by(|a, b| {
            a.task
                .cmp(&b.task)
                .then_with(|| a.method.cmp(&b.method))
                .then(a.seed.cmp(&b.seed))
        });
        let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        methods.sort_unstable();
        methods.dedup();
        let means = methods
            .into_iter()
            .map(|m| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == m)
                    .map(|r| r.accuracy)
                    .collect();
                (m.to_string(), vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        Self { rows, means }
    }

    pub fn mean_of(&self, method: &str) -> Option<f64> {
        self.means
            .iter()
            .find(|(m, _)| m == method)
            .map(|&(_, v)| v)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.task, r.method, r.seed, r.accuracy);
        }
        for (m, v) in &self.means {
            let _ = writeln!(out, "{},{m},mean,{v}", Self::MEAN_TASK);
        }
        out
    }
}

/// Trains every (task, method, seed) cell independently and scores it on the
/// task's target labels. `jobs` caps the worker threads; the table does not
/// depend on it.
pub fn run_benchmark(
    tasks: &[TransferTask],
    methods: &[MethodConfig],
    seeds: &[u64],
    jobs: usize,
) -> Result<BenchmarkTable> {
    if tasks.is_empty() || methods.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParam(
            "benchmark needs at least one task, method and seed".into(),
        ));
    }
    let cells: Vec<(&TransferTask, &MethodConfig, u64)> = tasks
        .iter()
        .flat_map(|t| {
            methods
                .iter()
                .flat_map(move |m| seeds.iter().map(move |&s| (t, m, s)))
        })
        .collect();
    let score =
        |&(task, method, seed): &(&TransferTask, &MethodConfig, u64)| -> Result<BenchmarkRow> {
            let outcome = run_cell(task, method, seed)?;
            Ok(BenchmarkRow {
                task: task.name.clone(),
                method: method.name.clone(),
                seed,
                accuracy: outcome.accuracy,
            })
        };
    let rows: Vec<Result<BenchmarkRow>> = if jobs <= 1 {
        cells.iter().map(score).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        pool.install(|| cells.par_iter().map(score).collect())
    };
    Ok(BenchmarkTable::from_rows(
        rows.into_iter().collect::<Result<_>>()?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingPoint {
    pub x: f64,
    pub y: f64,
    pub domain: String,
    /// −1 for unlabeled points.
    pub label: i64,
}

/// 2-D PCA of the representation-tap activations of both domains pooled.
/// Source points come first.
pub fn embed(net: &Network, source: &Dataset, target: &Dataset) -> Result<Vec<EmbeddingPoint>> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rep_s = net.forward(source.features())?.rep().clone();
    let rep_t = net.forward(target.features())?.rep().clone();
    let coords = pca2d(&rep_s.vstack(&rep_t))?;
    let mut points = Vec::with_capacity(coords.rows());
    for (offset, ds) in [(0, source), (source.len(), target)] {
        for i in 0..ds.len() {
            points.push(EmbeddingPoint {
                x: coords[(offset + i, 0)],
                y: coords[(offset + i, 1)],
                domain: ds.domain_name().to_string(),
                label: ds.labels().map_or(-1, |l| l[i] as i64),
            });
        }
    }
    Ok(points)
}

pub fn write_embedding(points: &[EmbeddingPoint], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "x,y,domain,label")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.x, p.y, p.domain, p.label)?;
    }
    Ok(())
}

pub fn export_embedding(
    net: &Network,
    source: &Dataset,
    target: &Dataset,
    path: impl AsRef<Path>,
) -> Result<()> {
    let points = embed(net, source, target)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_embedding(&points, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Euclidean distance between the centroid of the first `n_source` points and
/// the centroid of the rest.
pub fn centroid_distance(points: &[EmbeddingPoint], n_source: usize) -> f64 {
    let centroid = |ps: &[EmbeddingPoint]| {
        let n = ps.len() as f64;
        let (sx, sy) = ps.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        (sx / n, sy / n)
    };
    let (ax, ay) = centroid(&points[..n_source]);
    let (bx, by) = centroid(&points[n_source..]);
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}
