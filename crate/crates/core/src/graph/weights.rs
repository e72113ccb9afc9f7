use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A `k`-ary weight function `Ω^k → (0,2)` stored as a dense table in
/// symbol-index order (row major, first coordinate most significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    arity: usize,
    q: usize,
    table: Vec<f64>,
}

impl WeightFunction {
    pub fn new(q: usize, arity: usize, table: Vec<f64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::param("q", "alphabet size must be at least 2"));
        }
        if arity == 0 {
            return Err(Error::param("arity", "must be positive"));
        }
        let expected = q
            .checked_pow(arity as u32)
            .ok_or_else(|| Error::param("arity", "table too large"))?;
        if table.len() != expected {
            return Err(Error::param(
                "table",
                format!("expected {expected} entries for q={q}, k={arity}, got {}", table.len()),
            ));
        }
        if let Some((index, &value)) = table
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v < 2.0))
        {
            return Err(Error::WeightOutOfRange { index, value });
        }
        Ok(WeightFunction { arity, q, table })
    }

    /// Builds a table by evaluating `f` on every tuple.
    pub fn from_fn(q: usize, arity: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let size = q.pow(arity as u32);
        let mut tuple = vec![0usize; arity];
        let mut table = Vec::with_capacity(size);
        for idx in 0..size {
            decode_index(idx, q, &mut tuple);
            table.push(f(&tuple));
        }
        Self::new(q, arity, table)
    }

    /// Constant function `c` of the given arity.
    pub fn constant(q: usize, arity: usize, c: f64) -> Result<Self> {
        Self::new(q, arity, vec![c; q.pow(arity as u32)])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn max_value(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn eval(&self, tuple: &[usize]) -> f64 {
        self.table[encode_index(tuple, self.q)]
    }

    #[inline]
    pub fn eval_index(&self, index: usize) -> f64 {
        self.table[index]
    }
}

#[inline]
pub(crate) fn encode_index(tuple: &[usize], q: usize) -> usize {
    tuple.iter().fold(0, |acc, &t| acc * q + t)
}

#[inline]
pub(crate) fn decode_index(mut index: usize, q: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % q;
        index /= q;
    }
}

/// A measured family `(Ψ, p)` of weight functions with the normalizer
/// `ξ = q^{-k} Σ_τ E_p[ψ(τ)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFamily {
    functions: Vec<WeightFunction>,
    prior: Vec<f64>,
    xi: f64,
}

impl WeightFamily {
    pub fn new(functions: Vec<WeightFunction>, prior: Vec<f64>) -> Result<Self> {
        let first = functions
            .first()
            .ok_or_else(|| Error::param("family", "needs at least one weight function"))?;
        let (q, k) = (first.q, first.arity);
        if functions.iter().any(|f| f.q != q || f.arity != k) {
            return Err(Error::param("family", "all functions must share q and arity"));
        }
        if prior.len() != functions.len() {
            return Err(Error::param("prior", "length differs from the number of functions"));
        }
        if prior.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution("prior has a negative entry".into()));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("prior sums to {total}, not 1")));
        }
        let mut family = WeightFamily {
            functions,
            prior,
            xi: 0.0,
        };
        family.xi = family.compute_xi();
        Ok(family)
    }

    /// Uniform prior over `functions`.
    pub fn uniform(functions: Vec<WeightFunction>) -> Result<Self> {
        let p = 1.0 / functions.len().max(1) as f64;
        let prior = vec![p; functions.len()];
        Self::new(functions, prior)
    }

    pub fn functions(&self) -> &[WeightFunction] {
        &self.functions
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn q(&self) -> usize {
        self.functions[0].q
    }

    pub fn arity(&self) -> usize {
        self.functions[0].arity
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn max_value(&self) -> f64 {
        self.functions.iter().map(WeightFunction::max_value).fold(0.0, f64::max)
    }

    /// `E_p[ψ(τ)]` for every `τ ∈ Ω^k`, in table order.
    pub fn mean_table(&self) -> Vec<f64> {
        let size = self.functions[0].table.len();
        (0..size)
            .map(|i| {
                self.functions
                    .iter()
                    .zip(&self.prior)
                    .map(|(f, p)| p * f.table[i])
                    .sum()
            })
            .collect()
    }

    fn compute_xi(&self) -> f64 {
        let mean = self.mean_table();
        mean.iter().sum::<f64>() / mean.len() as f64
    }

    /// Per-tuple deviations `E_p[ψ(σ)] − ξ`.
    pub fn sym_deviations(&self) -> Vec<f64> {
        self.mean_table().into_iter().map(|m| m - self.xi).collect()
    }

    /// `max_σ |E_p[ψ(σ)] − ξ|`; zero exactly when SYM holds.
    pub fn sym_deviation(&self) -> f64 {
        self.sym_deviations().into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    /// Draws a function index from the prior.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_discrete(&self.prior, rng)
    }

    /// Tilted law `P[ψ] ∝ p(ψ)·ψ(τ)` for the tuple with table index `index`.
    pub fn tilted_probabilities(&self, index: usize) -> Vec<f64> {
        let w: Vec<f64> = self
            .functions
            .iter()
            .zip(&self.prior)
            .map(|(f, p)| p * f.table[index])
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// Inverse-CDF draw from a finite probability vector.
pub(crate) fn sample_discrete<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
