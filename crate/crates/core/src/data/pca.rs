//! Leading principal component via power iteration on the sample covariance.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

/// First principal direction of a centered sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PCAModel {
    pub mean: Vec<f64>,
    /// Unit-norm leading eigenvector; its largest-magnitude entry is made
    /// positive so the sign is reproducible.
    pub component: Vec<f64>,
    /// Share of total variance along the component, lambda_1 / trace.
    pub variance_fraction: f64,
}

/// Fits mean and leading eigenvector on the given rows (call with the
/// normalized training partition).
pub fn pca_fit(rows: &[&[f64]]) -> Result<PCAModel> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooSmall { what: "pca_fit sample count", min: 2, got: n });
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::TooSmall { what: "pca_fit feature count", min: 1, got: 0 });
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            op: "pca_fit",
            expected: format!("rows of width {d}"),
            got: "ragged rows".into(),
        });
    }

    let mut mean = vec![0.0; d];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(*row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // Sample covariance (n-1 denominator).
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in rows {
        for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = v - m;
        }
        cov.add_outer(&centered, &centered)?;
    }
    cov.data_mut().iter_mut().for_each(|v| *v /= (n - 1) as f64);

    let trace: f64 = (0..d).map(|k| cov.get(k, k)).sum();
    if trace <= 0.0 {
        return Err(Error::Invalid("pca_fit: sample has zero total variance".into()));
    }

    // Power iteration from the normalized all-ones vector, with basis
    // vectors as fallback starts if that happens to sit in the null space.
    let mut component = None;
    'starts: for start in 0..=d {
        let mut v = if start == 0 {
            vec![1.0 / (d as f64).sqrt(); d]
        } else {
            let mut e = vec![0.0; d];
            e[start - 1] = 1.0;
            e
        };
        for _ in 0..MAX_ITERATIONS {
            let mut w = cov.matvec(&v)?;
            let norm = dot(&w, &w).sqrt();
            if norm == 0.0 {
                continue 'starts;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            let delta = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            v = w;
            if delta < TOLERANCE {
                component = Some(v);
                break 'starts;
            }
        }
        // A viable start that fails to settle within the budget is a
        // genuine non-convergence, not a reason to try another start.
        return Err(Error::NoConvergence { iterations: MAX_ITERATIONS });
    }
    let mut component = component.ok_or(Error::NoConvergence { iterations: MAX_ITERATIONS })?;

    // Deterministic sign: largest-magnitude entry positive.
    let lead = component
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .expect("d >= 1");
    if component[lead] < 0.0 {
        component.iter_mut().for_each(|x| *x = -*x);
    }

    let lambda = dot(&component, &cov.matvec(&component)?);
    Ok(PCAModel {
        mean,
        component,
        variance_fraction: (lambda / trace).clamp(0.0, 1.0),
    })
}

/// Scalar projection of `x` onto the leading component, after centering.
pub fn pca_project(model: &PCAModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.component.len() {
        return Err(Error::DimensionMismatch {
            op: "pca_project",
            expected: format!("vector of length {}", model.component.len()),
            got: format!("{}", x.len()),
        });
    }
    Ok(x.iter()
        .zip(&model.mean)
        .zip(&model.component)
        .map(|((v, m), c)| (v - m) * c)
        .sum())
}
