//! Discrepancy and adaptation losses with analytic input gradients.
//!
//! Paired losses (`coral_loss`, `mmd2_loss`) return a [`LossValueGrad`] with a
//! gradient for each side; single-input losses (`entropy_loss`,
//! `cross_entropy_loss`) return a [`ValueGrad`].

use crate::error::{Error, Result};
use crate::numerics::{covariance, frobenius_sq, softmax_in_place, squared_distance, Matrix};

/// Probabilities are clamped to this floor before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Convex combination of Gaussian RBF kernels,
/// `k(a, b) = Σ_l β_l exp(−‖a − b‖² / (2σ_l²))`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBank {
    bandwidths: Vec<f64>,
    weights: Vec<f64>,
    fallback: bool,
}

impl KernelBank {
    pub fn new(bandwidths: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() || bandwidths.len() != weights.len() {
            return Err(Error::InvalidParam(format!(
                "kernel bank needs matching non-empty bandwidths/weights, got {} and {}",
                bandwidths.len(),
                weights.len()
            )));
        }
        if let Some(s) = bandwidths.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParam(format!(
                "bandwidth {s} is not positive"
            )));
        }
        if weights.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidParam("kernel weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "kernel weights must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            bandwidths,
            weights,
            fallback: false,
        })
    }

    /// Equal weights `1/L` over the given bandwidths.
    pub fn uniform(bandwidths: Vec<f64>) -> Result<Self> {
        let l = bandwidths.len().max(1);
        Self::new(bandwidths, vec![1.0 / l as f64; l])
    }

    pub fn single(sigma: f64) -> Result<Self> {
        Self::new(vec![sigma], vec![1.0])
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bandwidths.is_empty()
    }

    /// Set when the median heuristic saw a degenerate pool and fell back to σ = 1.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    /// Kernel value and `Σ_l β_l k_l / σ_l²` for a squared distance. The
    /// second term is the scalar that multiplies `−(a − b)` in `∂k/∂a`.
    #[inline]
    fn eval(&self, d2: f64) -> (f64, f64) {
        let mut k = 0.0;
        let mut w = 0.0;
        for (&sigma, &beta) in self.bandwidths.iter().zip(&self.weights) {
            let s2 = sigma * sigma;
            let kl = beta * (-d2 / (2.0 * s2)).exp();
            k += kl;
            w += kl / s2;
        }
        (k, w)
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval(squared_distance(a, b)).0
    }
}

/// Value of a two-input loss with the gradient for each input.
#[derive(Clone, Debug)]
pub struct LossValueGrad {
    pub value: f64,
    pub grad_source: Matrix,
    pub grad_target: Matrix,
}

/// Value of a single-input loss with its gradient.
#[derive(Clone, Debug)]
pub struct ValueGrad {
    pub value: f64,
    pub grad: Matrix,
}

fn check_same_cols(ds: &Matrix, dt: &Matrix) -> Result<()> {
    if ds.cols() != dt.cols() {
        return Err(Error::ShapeMismatch(format!(
            "source has {} features, target has {}",
            ds.cols(),
            dt.cols()
        )));
    }
    Ok(())
}

/// CORAL distance `‖C_s − C_t‖²_F / (4d²)`.
///
/// With `G = ∂L/∂C_s = (C_s − C_t)/(2d²)` and `C = X̃ᵀX̃/(n−1)`, the input
/// gradient is `2 X̃ G / (n − 1)`; centering drops out because the rows of
/// `X̃ G` already sum to zero.
pub fn coral_loss(ds: &Matrix, dt: &Matrix) -> Result<LossValueGrad> {
    check_same_cols(ds, dt)?;
    let cs = covariance(ds)?;
    let ct = covariance(dt)?;
    let d = ds.cols() as f64;
    let diff = cs.sub(&ct);
    let value = frobenius_sq(&diff) / (4.0 * d * d);

    let ns = ds.rows() as f64;
    let nt = dt.rows() as f64;
    let xs = ds.sub_row_vector(&ds.column_means());
    let xt = dt.sub_row_vector(&dt.column_means());
    let grad_source = xs.matmul(&diff).scale(1.0 / (d * d * (ns - 1.0)));
    let grad_target = xt.matmul(&diff).scale(-1.0 / (d * d * (nt - 1.0)));
    Ok(LossValueGrad {
        value,
        grad_source,
        grad_target,
    })
}

/// Biased (V-statistic) multi-kernel MMD², self-pairs included.
pub fn mmd2_loss(ds: &Matrix, dt: &Matrix, bank: &KernelBank) -> Result<LossValueGrad> {
    check_same_cols(ds, dt)?;
    if ds.rows() == 0 {
        return Err(Error::EmptyBatch("mmd2 source batch"));
    }
    if dt.rows() == 0 {
        return Err(Error::EmptyBatch("mmd2 target batch"));
    }
    let (ns, nt) = (ds.rows(), dt.rows());
    let cols = ds.cols();
    let mut grad_source = Matrix::zeros(ns, cols);
    let mut grad_target = Matrix::zeros(nt, cols);

    let within = |x: &Matrix, grad: &mut Matrix| -> f64 {
        let n = x.rows();
        let coef = -2.0 / (n as f64 * n as f64);
        let mut sum = 0.0;
        for i in 0..n {
            let xi = x.row(i);
            for j in 0..n {
                let xj = x.row(j);
                let (k, w) = bank.eval(squared_distance(xi, xj));
                sum += k;
                let g = grad.row_mut(i);
                for c in 0..cols {
                    g[c] += coef * w * (xi[c] - xj[c]);
                }
            }
        }
        sum
    };
    let sum_ss = within(ds, &mut grad_source);
    let sum_tt = within(dt, &mut grad_target);

    let coef = 2.0 / (ns as f64 * nt as f64);
    let mut sum_st = 0.0;
    for i in 0..ns {
        let si = ds.row(i);
        for j in 0..nt {
            let tj = dt.row(j);
            let (k, w) = bank.eval(squared_distance(si, tj));
            sum_st += k;
            for c in 0..cols {
                let delta = coef * w * (si[c] - tj[c]);
                grad_source[(i, c)] += delta;
                grad_target[(j, c)] -= delta;
            }
        }
    }

    let value = sum_ss / (ns as f64 * ns as f64) + sum_tt / (nt as f64 * nt as f64)
        - 2.0 * sum_st / (ns as f64 * nt as f64);
    Ok(LossValueGrad {
        value,
        grad_source,
        grad_target,
    })
}

/// Median-heuristic kernel bank over the pooled batch.
///
/// `σ_mid = sqrt(median pairwise squared distance / 2)`, and the `count`
/// bandwidths form a factor-2 geometric ladder centred on `σ_mid`, with
/// uniform weights. A pool of identical points falls back to `σ_mid = 1` and
/// sets [`KernelBank::is_fallback`].
pub fn median_bandwidths(ds: &Matrix, dt: &Matrix, count: usize) -> Result<KernelBank> {
    check_same_cols(ds, dt)?;
    if count == 0 {
        return Err(Error::InvalidParam("kernel count must be >= 1".into()));
    }
    let pooled = ds.vstack(dt);
    let n = pooled.rows();
    if n < 2 {
        return Err(Error::DegenerateBatch(format!(
            "median heuristic needs at least 2 pooled rows, got {n}"
        )));
    }
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d2.push(squared_distance(pooled.row(i), pooled.row(j)));
        }
    }
    let median = median(&mut d2);
    let (sigma_mid, fallback) = if median > 0.0 && median.is_finite() {
        ((median / 2.0).sqrt(), false)
    } else {
        (1.0, true)
    };
    let centre = (count as f64 - 1.0) / 2.0;
    let bandwidths = (0..count)
        .map(|l| sigma_mid * 2f64.powf(l as f64 - centre))
        .collect();
    let mut bank = KernelBank::uniform(bandwidths)?;
    bank.fallback = fallback;
    Ok(bank)
}

/// Median with the even-length convention of averaging the two middle values.
fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Mean Shannon entropy (nats) of the row-wise softmax of `logits`.
///
/// Per row, `∂H/∂z_k = −p_k (ln p_k + H)`.
pub fn entropy_loss(logits: &Matrix) -> Result<ValueGrad> {
    let (n, c) = logits.shape();
    if n == 0 {
        return Err(Error::EmptyBatch("entropy logits"));
    }
    let mut grad = Matrix::zeros(n, c);
    let mut total = 0.0;
    let mut p = vec![0.0; c];
    let mut lnp = vec![0.0; c];
    for r in 0..n {
        p.copy_from_slice(logits.row(r));
        softmax_in_place(&mut p);
        for (l, &pk) in lnp.iter_mut().zip(&p) {
            *l = pk.max(PROB_FLOOR).ln();
        }
        let h: f64 = -p.iter().zip(&lnp).map(|(pk, l)| pk * l).sum::<f64>();
        total += h;
        for ((g, &pk), &l) in grad.row_mut(r).iter_mut().zip(&p).zip(&lnp) {
            *g = -pk * (l + h) / n as f64;
        }
    }
    Ok(ValueGrad {
        value: total / n as f64,
        grad,
    })
}

/// Mean negative log-likelihood of `labels` under the row-wise softmax.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<ValueGrad> {
    let (n, c) = logits.shape();
    if n == 0 {
        return Err(Error::EmptyBatch("cross-entropy logits"));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= c) {
        return Err(Error::LabelOutOfRange {
            row,
            label: label as i64,
            num_classes: c,
        });
    }
    let mut grad = Matrix::zeros(n, c);
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let g = grad.row_mut(r);
        g.copy_from_slice(logits.row(r));
        softmax_in_place(g);
        total -= g[y].max(PROB_FLOOR).ln();
        g[y] -= 1.0;
        for v in g.iter_mut() {
            *v /= n as f64;
        }
    }
    Ok(ValueGrad {
        value: total / n as f64,
        grad,
    })
}
