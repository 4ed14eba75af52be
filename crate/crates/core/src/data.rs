//! Datasets, synthetic domain-shift generators, CSV I/O and paired batching.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

const MOONS_STREAM: u64 = 0x6d6f;
const GAUSS_CENTRE_STREAM: u64 = 0x6763;
const GAUSS_SOURCE_STREAM: u64 = 0x6773;
const GAUSS_TARGET_STREAM: u64 = 0x6774;
const SHUFFLE_SOURCE_STREAM: u64 = 1 << 32;
const SHUFFLE_TARGET_STREAM: u64 = 2 << 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Option<Vec<usize>>,
    domain_name: String,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Option<Vec<usize>>,
        domain_name: impl Into<String>,
        num_classes: usize,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParam("num_classes must be >= 1".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != features.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    features.rows()
                )));
            }
            if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes)
            {
                return Err(Error::LabelOutOfRange {
                    row,
                    label: label as i64,
                    num_classes,
                });
            }
        }
        Ok(Self {
            features,
            labels,
            domain_name: domain_name.into(),
            num_classes,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn domain_name(&self) -> &str {
        &self.domain_name
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Features only. Training code that receives this cannot reach labels.
    pub fn unlabeled(&self) -> Unlabeled<'_> {
        Unlabeled {
            features: &self.features,
            domain_name: &self.domain_name,
        }
    }

    /// Copy of this dataset with labels removed.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            labels: None,
            ..self.clone()
        }
    }

    pub fn with_domain_name(mut self, name: impl Into<String>) -> Self {
        self.domain_name = name.into();
        self
    }
}

/// Label-free view of a dataset.
#[derive(Clone, Copy, Debug)]
pub struct Unlabeled<'a> {
    features: &'a Matrix,
    domain_name: &'a str,
}

impl<'a> Unlabeled<'a> {
    pub fn features(&self) -> &'a Matrix {
        self.features
    }

    pub fn domain_name(&self) -> &'a str {
        self.domain_name
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }
}

fn linspace_pi(count: usize) -> impl Iterator<Item = f64> {
    let step = if count > 1 {
        std::f64::consts::PI / (count - 1) as f64
    } else {
        0.0
    };
    (0..count).map(move |i| i as f64 * step)
}

/// Two interleaved half circles (class 0 on top, class 1 below and shifted),
/// with Gaussian noise, rotated about the origin.
pub fn gen_two_moons(n: usize, noise_sd: f64, rotation_deg: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("n must be >= 2, got {n}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "noise must be >= 0, got {noise_sd}"
        )));
    }
    if !rotation_deg.is_finite() {
        return Err(Error::InvalidParam("rotation must be finite".into()));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for t in linspace_pi(n_outer) {
        points.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for t in linspace_pi(n_inner) {
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }

    let mut rng = Rng::with_stream(seed, MOONS_STREAM);
    let (sin, cos) = rotation_deg.to_radians().sin_cos();
    let mut data = Vec::with_capacity(2 * n);
    for [x, y] in points {
        let x = x + noise_sd * rng.standard_normal();
        let y = y + noise_sd * rng.standard_normal();
        data.push(cos * x - sin * y);
        data.push(sin * x + cos * y);
    }
    let features = Matrix::new(n, 2, data)?;
    Dataset::new(features, Some(labels), format!("moons-r{rotation_deg}"), 2)
}

/// Class-conditional Gaussians: a unit-covariance source and a target whose
/// clusters are translated by `mean_shift` and have covariance
/// `cov_scale · I`. Both carry labels; keep the target's for scoring only.
pub fn gen_gaussian_shift(
    n: usize,
    dim: usize,
    mean_shift: &[f64],
    cov_scale: f64,
    num_classes: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if num_classes == 0 || dim == 0 {
        return Err(Error::InvalidParam(
            "dim and num_classes must be >= 1".into(),
        ));
    }
    if n < num_classes {
        return Err(Error::InvalidParam(format!(
            "n ({n}) must be at least num_classes ({num_classes})"
        )));
    }
    if !(cov_scale > 0.0 && cov_scale.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "cov_scale must be > 0, got {cov_scale}"
        )));
    }
    if mean_shift.len() != dim {
        return Err(Error::InvalidParam(format!(
            "mean_shift has {} entries, dim is {dim}",
            mean_shift.len()
        )));
    }

    let mut centre_rng = Rng::with_stream(seed, GAUSS_CENTRE_STREAM);
    let centres: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..dim).map(|_| centre_rng.uniform(-4.0, 4.0)).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();

    let sample = |stream: u64, shift: Option<&[f64]>, sd: f64| -> Vec<f64> {
        let mut rng = Rng::with_stream(seed, stream);
        let mut data = Vec::with_capacity(n * dim);
        for &y in &labels {
            for j in 0..dim {
                let offset = shift.map_or(0.0, |s| s[j]);
                data.push(centres[y][j] + offset + sd * rng.standard_normal());
            }
        }
        data
    };
    let source = Dataset::new(
        Matrix::new(n, dim, sample(GAUSS_SOURCE_STREAM, None, 1.0))?,
        Some(labels.clone()),
        "gauss-source",
        num_classes,
    )?;
    let target = Dataset::new(
        Matrix::new(
            n,
            dim,
            sample(GAUSS_TARGET_STREAM, Some(mean_shift), cov_scale.sqrt()),
        )?,
        Some(labels),
        "gauss-target",
        num_classes,
    )?;
    Ok((source, target))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvOptions {
    pub num_classes: usize,
    /// Last column holds an integer class id.
    pub labeled: bool,
    /// Skip the first line.
    pub header: bool,
}

/// Reads a comma-separated feature file. Row and column numbers in errors are
/// 1-based line and field positions.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(Error::FileNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, opts, name)
}

pub fn parse_csv(text: &str, opts: &CsvOptions, domain_name: String) -> Result<Dataset> {
    if opts.num_classes == 0 {
        return Err(Error::InvalidParam("num_classes must be >= 1".into()));
    }
    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if opts.header && idx == 0 {
            continue;
        }
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => {
                let min = if opts.labeled { 2 } else { 1 };
                if fields.len() < min {
                    return Err(Error::MalformedRow {
                        row,
                        col: fields.len(),
                        reason: format!("expected at least {min} columns"),
                    });
                }
                width = Some(fields.len());
            }
            Some(w) if w != fields.len() => {
                return Err(Error::MalformedRow {
                    row,
                    col: fields.len().min(w) + 1,
                    reason: format!("expected {w} columns, found {}", fields.len()),
                })
            }
            Some(_) => {}
        }
        let feature_count = if opts.labeled {
            fields.len() - 1
        } else {
            fields.len()
        };
        for (c, field) in fields[..feature_count].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
                row,
                col: c + 1,
                reason: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row, col: c + 1 });
            }
            data.push(v);
        }
        if opts.labeled {
            let field = fields[feature_count];
            let label: i64 = field.parse().map_err(|_| Error::MalformedRow {
                row,
                col: feature_count + 1,
                reason: format!("label {field:?} is not an integer"),
            })?;
            if label < 0 || label as u64 >= opts.num_classes as u64 {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    num_classes: opts.num_classes,
                });
            }
            labels.push(label as usize);
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err(Error::EmptyDataset);
    };
    let cols = if opts.labeled { width - 1 } else { width };
    let features = Matrix::new(rows, cols, data)?;
    Dataset::new(
        features,
        opts.labeled.then_some(labels),
        domain_name,
        opts.num_classes,
    )
}

/// Writes features (and labels, when present, as a final column). Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_csv(dataset: &Dataset, out: &mut impl Write) -> io::Result<()> {
    let features = dataset.features();
    for r in 0..features.rows() {
        let mut first = true;
        for v in features.row(r) {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            write!(out, "{v}")?;
        }
        if let Some(labels) = dataset.labels() {
            write!(out, ",{}", labels[r])?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_csv(dataset, &mut w)?;
    w.flush()
}

/// One aligned mini-batch. There is deliberately no target-label field.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPair {
    pub source_features: Matrix,
    pub source_labels: Vec<usize>,
    pub target_features: Matrix,
}

/// Deterministic batch schedule: epoch `e` shuffles source and target
/// indices with generators derived from `(seed, e)`, so any global step can
/// be reconstructed without replaying earlier ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    source_rows: usize,
    target_rows: usize,
    batch_size: usize,
    seed: u64,
}

impl BatchPlan {
    pub fn new(
        source_rows: usize,
        target_rows: usize,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::InvalidParam(format!(
                "batch_size must be >= 2, got {batch_size}"
            )));
        }
        if source_rows == 0 || target_rows == 0 {
            return Err(Error::InvalidParam(
                "source and target must be non-empty".into(),
            ));
        }
        if source_rows.min(target_rows) < batch_size {
            return Err(Error::InvalidParam(format!(
                "batch_size {batch_size} exceeds the smaller domain ({} rows)",
                source_rows.min(target_rows)
            )));
        }
        Ok(Self {
            source_rows,
            target_rows,
            batch_size,
            seed,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.source_rows.min(self.target_rows) / self.batch_size
    }

    /// Shuffled source and target index orders for one epoch.
    pub fn epoch_order(&self, epoch: u64) -> (Vec<usize>, Vec<usize>) {
        let mut s: Vec<usize> = (0..self.source_rows).collect();
        let mut t: Vec<usize> = (0..self.target_rows).collect();
        Rng::with_stream(self.seed, SHUFFLE_SOURCE_STREAM | epoch).shuffle(&mut s);
        Rng::with_stream(self.seed, SHUFFLE_TARGET_STREAM | epoch).shuffle(&mut t);
        (s, t)
    }

    /// Source and target row indices of the batch at global step `step`.
    pub fn step_indices(&self, step: u64) -> (Vec<usize>, Vec<usize>) {
        let per_epoch = self.batches_per_epoch() as u64;
        let (s, t) = self.epoch_order(step / per_epoch);
        let k = (step % per_epoch) as usize * self.batch_size;
        (
            s[k..k + self.batch_size].to_vec(),
            t[k..k + self.batch_size].to_vec(),
        )
    }

    pub fn assemble(
        &self,
        source: &Dataset,
        target: Unlabeled<'_>,
        step: u64,
    ) -> Result<BatchPair> {
        let labels = source.labels().ok_or(Error::UnlabeledDataset)?;
        let (si, ti) = self.step_indices(step);
        Ok(BatchPair {
            source_features: source.features().select_rows(&si),
            source_labels: si.iter().map(|&i| labels[i]).collect(),
            target_features: target.features().select_rows(&ti),
        })
    }
}

/// Endless iterator of batch pairs; take `epochs × batches_per_epoch` items.
pub struct BatchIter<'a> {
    plan: BatchPlan,
    source: &'a Dataset,
    target: Unlabeled<'a>,
    step: u64,
}

pub fn batch_iter<'a>(
    source: &'a Dataset,
    target: Unlabeled<'a>,
    batch_size: usize,
    seed: u64,
) -> Result<BatchIter<'a>> {
    if source.labels().is_none() {
        return Err(Error::UnlabeledDataset);
    }
    if source.dim() != target.features().cols() {
        return Err(Error::ShapeMismatch(format!(
            "source has {} features, target has {}",
            source.dim(),
            target.features().cols()
        )));
    }
    let plan = BatchPlan::new(source.len(), target.len(), batch_size, seed)?;
    Ok(BatchIter {
        plan,
        source,
        target,
        step: 0,
    })
}

impl BatchIter<'_> {
    pub fn plan(&self) -> &BatchPlan {
        &self.plan
    }
}

impl Iterator for BatchIter<'_> {
    type Item = BatchPair;

    fn next(&mut self) -> Option<BatchPair> {
        let pair = self
            .plan
            .assemble(self.source, self.target, self.step)
            .expect("validated in batch_iter");
        self.step += 1;
        Some(pair)
    }
}
