//! Accuracy and correlation summaries for predicted coefficient fields.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnvcError};
use crate::stats::pearson;

/// `sqrt((1/P) sum_p ||beta - beta_hat_p||^2)` for a fixed true field.
pub fn rmse(true_beta: &[f64], predicted: &[Vec<f64>]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(SnvcError::InvalidArgument(
            "at least one prediction is required".into(),
        ));
    }
    let mut total = 0.0;
    for p in predicted {
        total += squared_error(true_beta, p)?;
    }
    Ok((total / predicted.len() as f64).sqrt())
}

/// As [`rmse`], additionally divided by `N` inside the root.
pub fn rmse_per_site(true_beta: &[f64], predicted: &[Vec<f64>]) -> Result<f64> {
    let r = rmse(true_beta, predicted)?;
    Ok(r / (true_beta.len() as f64).sqrt())
}

/// `||a - b||^2`.
pub fn squared_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SnvcError::DimensionMismatch(format!(
            "fields of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Pearson correlations between coefficient fields; `None` where a field is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix(pub Vec<Vec<Option<f64>>>);

impl CorrelationMatrix {
    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        self.0[a][b]
    }
}

pub fn coef_correlations(fields: &[Vec<f64>]) -> CorrelationMatrix {
    let k = fields.len();
    let mut m = vec![vec![None; k]; k];
    for a in 0..k {
        for b in a..k {
            let c = if a == b {
                pearson(&fields[a], &fields[a]).map(|_| 1.0)
            } else {
                pearson(&fields[a], &fields[b])
            };
            m[a][b] = c;
            m[b][a] = c;
        }
    }
    CorrelationMatrix(m)
}

/// Entry-wise mean over iterations, skipping undefined entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCorrelation {
    pub mean: Vec<Vec<Option<f64>>>,
    /// Per entry, how many iterations had an undefined correlation.
    pub undefined: Vec<Vec<usize>>,
}

pub fn mean_correlations(k: usize, mats: &[CorrelationMatrix]) -> MeanCorrelation {
    let mut mean = vec![vec![None; k]; k];
    let mut undefined = vec![vec![0; k]; k];
    for a in 0..k {
        for b in 0..k {
            let (mut s, mut c) = (0.0, 0usize);
            for m in mats {
                match m.get(a, b) {
                    Some(v) => {
                        s += v;
                        c += 1;
                    }
                    None => undefined[a][b] += 1,
                }
            }
            mean[a][b] = (c > 0).then(|| s / c as f64);
        }
    }
    MeanCorrelation { mean, undefined }
}
