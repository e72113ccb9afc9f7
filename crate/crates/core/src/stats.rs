//! Small statistical helpers shared by the Monte Carlo estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{ChaCha8Rng, SeedTree};

const CHUNK: usize = 1024;

/// Averages `f` over `samples` draws. Chunk `c` of [`CHUNK`] draws uses
/// `tree.stream(c)`, so the result does not depend on the thread count.
pub fn monte_carlo<F>(tree: SeedTree, samples: usize, f: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let values: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = tree.stream(c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    Estimate::from_samples(&values.concat())
}

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            samples: 0,
        }
    }

    /// Sample mean and standard error, with compensated summation in index
    /// order (constant samples give their value exactly).
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                samples: 0,
            };
        }
        let mean = compensated_sum(values.iter().copied()) / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr,
            samples: n,
        }
    }

    /// `a·self + b·other` for independent estimates.
    pub fn combine(self, a: f64, other: Estimate, b: f64) -> Estimate {
        Estimate {
            mean: a * self.mean + b * other.mean,
            stderr: ((a * self.stderr).powi(2) + (b * other.stderr).powi(2)).sqrt(),
            samples: self.samples.max(other.samples),
        }
    }

    pub fn shift(self, c: f64) -> Estimate {
        Estimate {
            mean: self.mean + c,
            ..self
        }
    }
}

/// Neumaier summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// Ordinary least squares fit `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Two-sided 95% confidence interval for the slope.
    pub slope_ci: (f64, f64),
}

/// Weighted least squares with optional per-point standard errors. With
/// `sigma = None` the residual variance is used and the CI is Student-t.
pub fn linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> LinearFit {
    use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "need at least two points");
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|s| 1.0 / (s * s).max(1e-300)).collect(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_stderr, q) = match sigma {
        Some(_) => {
            let z = Normal::standard().inverse_cdf(0.975);
            ((1.0 / sxx).sqrt(), z)
        }
        None => {
            let rss: f64 = x
                .iter()
                .zip(y)
                .map(|(x, y)| (y - intercept - slope * x).powi(2))
                .sum();
            let dof = (n - 2).max(1) as f64;
            let t = StudentsT::new(0.0, 1.0, dof).unwrap().inverse_cdf(0.975);
            ((rss / dof / sxx).sqrt(), t)
        }
    };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
        slope_ci: (slope - q * slope_stderr, slope + q * slope_stderr),
    }
}

/// Kolmogorov distance between the empirical laws of two samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
