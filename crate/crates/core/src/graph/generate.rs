use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::degree::DegreeSequence;
use super::factor_graph::FactorGraph;
use super::sockets::{SocketSampler, SocketState};
use crate::rng::SeedTree;
use crate::{Error, Result};

/// Configuration model: sockets are drawn one at a time from `ν_s ∝ δ_s`,
/// `δ` is decremented immediately, and every `k` consecutive draws form a
/// check. The output degrees equal `d` exactly.
pub fn configuration_model(d: &DegreeSequence, k: usize, seed: u64) -> Result<FactorGraph> {
    if k == 0 {
        return Err(Error::param("k", "must be positive"));
    }
    let total = d.total();
    if !total.is_multiple_of(k as u64) {
        return Err(Error::NotDivisible { total, k });
    }
    let mut rng = SeedTree::new(seed).child("configuration").rng();
    let mut sockets = SocketSampler::from_degrees(d.degrees());
    let mut g = FactorGraph::new(d.n(), 2);
    let mut hood = Vec::with_capacity(k);
    while sockets.total() > 0 {
        let x = sockets.sample(&mut rng);
        sockets.decrement(x);
        hood.push(x);
        if hood.len() == k {
            g.add_check(std::mem::take(&mut hood), None)?;
        }
    }
    Ok(g)
}

/// Layer plan `m = (m_1, …, m_{s_max})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub counts: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub s_max: usize,
}

impl LayerPlan {
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let s_max = counts.len();
        LayerPlan {
            counts,
            alpha: f64::NAN,
            beta: f64::NAN,
            s_max,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// `s_max = ⌊(1−α)·Σd / (β·k)⌋`.
pub(crate) fn s_max(total_degree: u64, k: usize, alpha: f64, beta: f64) -> usize {
    let x = (1.0 - alpha) * total_degree as f64 / (beta * k as f64);
    (x + 1e-9).floor().max(0.0) as usize
}

/// `(α,β)` planner: `s_max` layers with i.i.d. `Po(β)` check counts.
pub fn alpha_beta_plan(
    d: &DegreeSequence,
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<LayerPlan> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} not in [0,1)")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("{beta} must be positive")));
    }
    if k == 0 {
        return Err(Error::param("k", "must be positive"));
    }
    let s_max = s_max(d.total(), k, alpha, beta);
    let po = Poisson::new(beta).map_err(|e| Error::param("beta", e.to_string()))?;
    let mut rng = SeedTree::new(seed).child("plan").rng();
    let counts = (0..s_max).map(|_| po.sample(&mut rng) as usize).collect();
    Ok(LayerPlan {
        counts,
        alpha,
        beta,
        s_max,
    })
}

/// Output of [`layered_model`].
#[derive(Clone, Debug)]
pub struct LayeredGraph {
    pub graph: FactorGraph,
    /// 1-based layer of every check, in creation order.
    pub layer_of_check: Vec<usize>,
    /// Sockets removed by the positive part `(δ_s − ∇_s)_+`, summed over
    /// layers.
    pub clipped_sockets: u64,
    /// Remaining sockets `δ_{s_max+1}`.
    pub remaining: Vec<u64>,
}

/// Batch-layered model: in layer `s`, `m_s` neighborhoods are drawn i.i.d.
/// from `ν_s^{⊗k}`, then `δ_{s+1} = (δ_s − ∇_s)_+`. Layer `s` draws from
/// keystream `s` of the `"layer"` subtree of `seed`.
///
/// Fails with [`Error::SocketExhaustion`] (carrying the partial graph) when
/// a layer requests neighborhoods while `Σ δ_s = 0`.
pub fn layered_model(
    d: &DegreeSequence,
    plan: &[usize],
    k: usize,
    seed: u64,
) -> Result<LayeredGraph> {
    if k == 0 {
        return Err(Error::param("k", "must be positive"));
    }
    let layers = SeedTree::new(seed).child("layer");
    let mut state = SocketState::new(d.degrees());
    let mut g = FactorGraph::new(d.n(), 2);
    let mut layer_of_check = Vec::new();
    let mut clipped = 0;
    let mut counts: Vec<u64> = vec![0; d.n()];
    let mut touched: Vec<usize> = Vec::new();
    for (s, &m) in plan.iter().enumerate() {
        if m == 0 {
            state.layer += 1;
            continue;
        }
        if state.remaining.total() == 0 {
            return Err(Error::SocketExhaustion {
                layer: s + 1,
                requested: m,
                partial: Box::new(g),
            });
        }
        let mut rng = layers.stream(s as u64 + 1);
        for _ in 0..m {
            let hood: Vec<usize> = (0..k).map(|_| state.remaining.sample(&mut rng)).collect();
            for &x in &hood {
                if counts[x] == 0 {
                    touched.push(x);
                }
                counts[x] += 1;
            }
            g.add_check(hood, None)?;
            layer_of_check.push(s + 1);
        }
        let increment: Vec<(usize, u64)> = touched.iter().map(|&x| (x, counts[x])).collect();
        clipped += state.apply_round(&increment);
        for x in touched.drain(..) {
            counts[x] = 0;
        }
    }
    Ok(LayeredGraph {
        graph: g,
        layer_of_check,
        clipped_sockets: clipped,
        remaining: state.remaining.values().to_vec(),
    })
}

/// Total variation distance between `ν ∝ δ` and `ν' ∝ (δ − c)_+`,
/// computed as `Σ_v (ν(v) − ν'(v))_+`.
pub fn tv_shift_distance(delta: &[u64], c: &[i64]) -> Result<f64> {
    if delta.len() != c.len() {
        return Err(Error::param("c", "length differs from delta"));
    }
    let shifted: Vec<f64> = delta
        .iter()
        .zip(c)
        .map(|(&d, &c)| (d as f64 - c as f64).max(0.0))
        .collect();
    let s0: f64 = delta.iter().map(|&d| d as f64).sum();
    let s1: f64 = shifted.iter().sum();
    if s0 <= 0.0 || s1 <= 0.0 {
        return Err(Error::Degenerate("tv_shift_distance needs positive totals".into()));
    }
    Ok(delta
        .iter()
        .zip(&shifted)
        .map(|(&d, &e)| (d as f64 / s0 - e / s1).max(0.0))
        .sum())
}

/// Draw `count` i.i.d. samples from `Po(λ)`; `λ = 0` gives zeros.
pub(crate) fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as usize).unwrap_or(0)
}
