//! Sample statistics for the run reports: mean and 95% Student-t
//! confidence half-width.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and, when at least two samples are available, the half-width of a
/// 95% confidence interval around it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub half_width: Option<f64>,
}

/// Aggregate a sample: mean plus a Student-t 95% half-width
/// (t₀.₉₇₅,ₙ₋₁ · s/√n). Returns `None` for an empty sample; a single
/// observation yields a mean with the interval flagged unavailable.
pub fn aggregate(samples: &[f64]) -> Option<Aggregate> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return Some(Aggregate {
            mean,
            half_width: None,
        });
    }
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half_width = t_quantile_975(samples.len() - 1) * (variance / n).sqrt();
    Some(Aggregate {
        mean,
        half_width: Some(half_width),
    })
}

/// 97.5% quantile of Student's t with `df` degrees of freedom.
fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975)
}
