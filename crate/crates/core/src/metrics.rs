//! Evaluation metrics: MAE, capacity-normalized MAE, the back-shifted loss,
//! the naive ratio, and the Student-t margin of error over replicates.
//!
//! The naive ratio compares the plain loss against the loss of the prediction
//! shifted one step into the past. A pure persistence model scores infinity,
//! a perfect model scores zero, and anything above 1 indicates the model is
//! mostly echoing its input.

use crate::error::{Error, Result};

/// Two-sided 95% Student-t quantiles, indexed by degrees of freedom 1..=30.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

/// Large-sample fallback (normal approximation) for n > 31 replicates.
const Z_975: f64 = 1.96;

/// Mean absolute error over two equal-length series.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            op: "mae",
            expected: format!("two non-empty series of equal length (truth has {})", truth.len()),
            got: format!("prediction of length {}", pred.len()),
        });
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// MAE as a percentage of farm capacity.
pub fn nmae(pred: &[f64], truth: &[f64], capacity: f64) -> Result<f64> {
    if capacity <= 0.0 {
        return Err(Error::BadCapacity(capacity));
    }
    Ok(100.0 * mae(pred, truth)? / capacity)
}

/// Loss of the prediction shifted one step into the past, normalized like
/// [`nmae`]: `100/capacity * (1/(N-1)) * sum |pred(i+1) - truth(i)|`.
///
/// The mean is taken over the N-1 summed terms so a pure persistence
/// prediction scores exactly zero and the naive ratio has clean limits.
pub fn back_shifted_loss(pred: &[f64], truth: &[f64], capacity: f64) -> Result<f64> {
    if capacity <= 0.0 {
        return Err(Error::BadCapacity(capacity));
    }
    Ok(100.0 * back_shifted_mae(pred, truth)? / capacity)
}

fn back_shifted_mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            op: "back_shifted_loss",
            expected: format!("equal lengths (truth has {})", truth.len()),
            got: format!("prediction of length {}", pred.len()),
        });
    }
    if pred.len() < 2 {
        return Err(Error::TooSmall {
            what: "back_shifted_loss series length",
            min: 2,
            got: pred.len(),
        });
    }
    let n = pred.len();
    let sum: f64 = (0..n - 1).map(|i| (pred[i + 1] - truth[i]).abs()).sum();
    Ok(sum / (n - 1) as f64)
}

/// Result of the naive-ratio computation.
///
/// `value` is the ratio of the plain loss to the back-shifted loss; capacity
/// cancels, so raw MAEs are used. `degenerate` flags the 0/0 corner (constant
/// truth predicted perfectly), where the perfect-model limit of 0 is reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveRatio {
    pub value: f64,
    pub degenerate: bool,
}

/// Ratio of the standard loss to the back-shifted loss.
///
/// Returns `+inf` for a pure persistence prediction (back-shifted loss zero,
/// plain loss positive) and `0` for a perfect prediction of a non-constant
/// series.
pub fn naive_ratio(pred: &[f64], truth: &[f64]) -> Result<NaiveRatio> {
    let e_t = mae(pred, truth)?;
    let e_shift = back_shifted_mae(pred, truth)?;
    let (value, degenerate) = if e_shift == 0.0 {
        if e_t == 0.0 {
            (0.0, true)
        } else {
            (f64::INFINITY, false)
        }
    } else {
        (e_t / e_shift, false)
    };
    Ok(NaiveRatio { value, degenerate })
}

/// Per-replicate aggregate: values, mean, and the half-width of the 95%
/// confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateStats {
    pub values: Vec<f64>,
    pub mean: f64,
    pub moe95: f64,
}

/// 95% margin of error: `t(0.975, n-1) * sd / sqrt(n)` with the sample
/// standard deviation (n-1 denominator). Quantiles come from an embedded
/// table for n <= 31; larger n falls back to the normal approximation.
pub fn margin_of_error_95(values: &[f64]) -> Result<ReplicateStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooSmall {
            what: "margin_of_error_95 sample count",
            min: 2,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    let df = n - 1;
    let t = if df <= T_975.len() {
        T_975[df - 1]
    } else {
        Z_975
    };
    Ok(ReplicateStats {
        values: values.to_vec(),
        mean,
        moe95: t * sd / (n as f64).sqrt(),
    })
}

/// Full evaluation of one prediction series against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean absolute error in megawatts.
    pub mae: f64,
    /// MAE as percent of capacity.
    pub nmae: f64,
    /// Back-shifted loss as percent of capacity.
    pub back_shifted_nmae: f64,
    /// Plain-to-back-shifted loss ratio (`+inf` for pure persistence).
    pub naive_ratio: f64,
    /// True when the 0/0 corner case was hit (see [`naive_ratio`]).
    pub naive_ratio_degenerate: bool,
    /// `naive_ratio > 1`.
    pub has_naive_character: bool,
    /// Farm capacity in megawatts.
    pub capacity: f64,
    pub n_points: usize,
}

impl EvalReport {
    /// Evaluates `pred` against `truth` (both in megawatts).
    pub fn build(pred: &[f64], truth: &[f64], capacity: f64) -> Result<EvalReport> {
        if capacity <= 0.0 {
            return Err(Error::BadCapacity(capacity));
        }
        let mae = mae(pred, truth)?;
        let nr = naive_ratio(pred, truth)?;
        Ok(EvalReport {
            mae,
            nmae: 100.0 * mae / capacity,
            back_shifted_nmae: back_shifted_loss(pred, truth, capacity)?,
            naive_ratio: nr.value,
            naive_ratio_degenerate: nr.degenerate,
            has_naive_character: nr.value > 1.0,
            capacity,
            n_points: pred.len(),
        })
    }
}

pub const EVAL_CSV_HEADER: &str = "model,nmae_pct,moe95_pct,naive_ratio,mae_mw,n_points";

/// One CSV row in the evaluation export. `moe95` prints empty when undefined
/// (single replicate or deterministic baseline); infinity prints as `inf`.
pub fn eval_csv_row(model: &str, nmae: f64, moe95: Option<f64>, naive_ratio: f64, mae: f64, n_points: usize) -> String {
    let moe = moe95.map(|m| m.to_string()).unwrap_or_default();
    format!("{model},{nmae},{moe},{naive_ratio},{mae},{n_points}")
}
