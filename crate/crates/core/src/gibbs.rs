//! Exact Gibbs-measure computations by enumeration.
//!
//! `Z(G) = Σ_σ Π_a ψ_a(σ(∂a))` with pins acting as indicator factors.
//! [`partition_function`] and [`gibbs_marginals`] factorize over connected
//! components, so the enumeration cap bounds the number of *free* (unpinned)
//! variables of the largest component. Functions that need the full joint
//! law ([`gibbs_distribution`], [`gibbs_expectation`], [`symmetry_metric`])
//! cap the free variables of the whole graph.
//!
//! Enumeration stores one log-weight per assignment and normalizes with the
//! maximum, so products of many small or large weights neither underflow
//! nor overflow.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::FactorGraph;
use crate::rng::SeedTree;
use crate::{Error, Result};

pub const DEFAULT_CAP: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionFunction {
    pub z: f64,
    pub log_z: f64,
}

/// Exact summary of `μ_G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSummary {
    #[serde(rename = "logZ")]
    pub log_z: f64,
    /// Entropy of `μ_G` in nats.
    pub entropy: f64,
    /// `μ_{G,x}` for every variable.
    pub marginals: Vec<Vec<f64>>,
}

/// Enumeration over the free variables of a graph. Assignment `i` is the
/// mixed-radix decoding of `i` over the free variables, most significant
/// first; pinned variables are held at their pin.
struct Enumeration {
    n: usize,
    q: usize,
    free: Vec<usize>,
    base: Vec<usize>,
    /// `ln ψ_G(σ)` for every assignment; `-inf` for zero weight.
    log_w: Vec<f64>,
    max_log_w: f64,
}

impl Enumeration {
    fn new(g: &FactorGraph, cap: usize) -> Result<Self> {
        if !g.is_weighted() {
            return Err(Error::param("graph", "every check must carry a weight"));
        }
        let (n, q) = (g.n(), g.q());
        let mut base = vec![usize::MAX; n];
        let mut conflict = false;
        for p in g.pins() {
            if base[p.variable] != usize::MAX && base[p.variable] != p.symbol {
                conflict = true;
            }
            base[p.variable] = p.symbol;
        }
        let free: Vec<usize> = (0..n).filter(|&x| base[x] == usize::MAX).collect();
        if free.len() > cap {
            return Err(Error::EnumerationCap {
                size: free.len(),
                cap,
            });
        }
        for b in base.iter_mut() {
            if *b == usize::MAX {
                *b = 0;
            }
        }
        let log_tables: Vec<Vec<f64>> = g
            .weights()
            .iter()
            .map(|w| w.table().iter().map(|v| v.ln()).collect())
            .collect();
        let size = q.pow(free.len() as u32);
        let mut log_w = Vec::with_capacity(size);
        let mut sigma = base.clone();
        for i in 0..size {
            decode(i, q, &free, &mut sigma);
            let lw = if conflict {
                f64::NEG_INFINITY
            } else {
                g.checks()
                    .iter()
                    .map(|c| {
                        let idx = c.neighbors.iter().fold(0, |acc, &x| acc * q + sigma[x]);
                        log_tables[c.weight.unwrap()][idx]
                    })
                    .sum()
            };
            log_w.push(lw);
        }
        let max_log_w = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Enumeration {
            n,
            q,
            free,
            base,
            log_w,
            max_log_w,
        })
    }

    fn len(&self) -> usize {
        self.log_w.len()
    }

    fn assignment(&self, i: usize, sigma: &mut Vec<usize>) {
        sigma.clear();
        sigma.extend_from_slice(&self.base);
        decode(i, self.q, &self.free, sigma);
    }

    fn log_z(&self) -> f64 {
        if self.max_log_w == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = self.log_w.iter().map(|lw| (lw - self.max_log_w).exp()).sum();
        self.max_log_w + s.ln()
    }

    /// Normalized probabilities of every assignment.
    fn probabilities(&self) -> Vec<f64> {
        let lz = self.log_z();
        self.log_w.iter().map(|lw| (lw - lz).exp()).collect()
    }
}

fn decode(mut i: usize, q: usize, free: &[usize], sigma: &mut [usize]) {
    for &x in free.iter().rev() {
        sigma[x] = i % q;
        i /= q;
    }
}

pub fn partition_function(g: &FactorGraph, cap: usize) -> Result<PartitionFunction> {
    let mut log_z = 0.0;
    for (_, sub) in g.split_components() {
        log_z += Enumeration::new(&sub, cap)?.log_z();
    }
    Ok(PartitionFunction {
        z: log_z.exp(),
        log_z,
    })
}

pub fn gibbs_marginals(g: &FactorGraph, cap: usize) -> Result<GibbsSummary> {
    let q = g.q();
    let mut marginals = vec![vec![0.0; q]; g.n()];
    let mut log_z = 0.0;
    let mut entropy = 0.0;
    let mut sigma = Vec::new();
    for (comp, sub) in g.split_components() {
        let e = Enumeration::new(&sub, cap)?;
        let lz = e.log_z();
        if lz == f64::NEG_INFINITY {
            return Err(Error::Degenerate("partition function is zero".into()));
        }
        log_z += lz;
        let mut local = vec![vec![0.0; q]; comp.len()];
        let mut h = 0.0;
        for i in 0..e.len() {
            let lw = e.log_w[i];
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let p = (lw - lz).exp();
            h -= p * (lw - lz);
            e.assignment(i, &mut sigma);
            for (x, &s) in sigma.iter().enumerate() {
                local[x][s] += p;
            }
        }
        entropy += h.max(0.0);
        for (x, m) in comp.iter().zip(local) {
            marginals[*x] = m;
        }
    }
    Ok(GibbsSummary {
        log_z,
        entropy,
        marginals,
    })
}

/// Full joint law `μ_G` over `Ω^n`, indexed with variable 0 most
/// significant.
pub fn gibbs_distribution(g: &FactorGraph, cap: usize) -> Result<Vec<f64>> {
    let e = Enumeration::new(g, cap)?;
    if e.log_z() == f64::NEG_INFINITY {
        return Err(Error::Degenerate("partition function is zero".into()));
    }
    let probs = e.probabilities();
    if e.free.len() == e.n {
        return Ok(probs);
    }
    let q = g.q();
    let mut full = vec![0.0; q.pow(e.n as u32)];
    let mut sigma = Vec::new();
    for (i, p) in probs.into_iter().enumerate() {
        e.assignment(i, &mut sigma);
        full[sigma.iter().fold(0, |acc, &s| acc * q + s)] = p;
    }
    Ok(full)
}

/// `⟨f(σ)⟩_G = Σ_σ μ_G(σ) f(σ)`.
pub fn gibbs_expectation(g: &FactorGraph, cap: usize, f: impl Fn(&[usize]) -> f64) -> Result<f64> {
    let e = Enumeration::new(g, cap)?;
    let lz = e.log_z();
    if lz == f64::NEG_INFINITY {
        return Err(Error::Degenerate("partition function is zero".into()));
    }
    let mut sigma = Vec::new();
    let mut total = 0.0;
    for i in 0..e.len() {
        let p = (e.log_w[i] - lz).exp();
        if p > 0.0 {
            e.assignment(i, &mut sigma);
            total += p * f(&sigma);
        }
    }
    Ok(total)
}

/// How the `ℓ`-tuples of [`symmetry_metric`] are visited.
#[derive(Clone, Copy, Debug)]
pub enum TupleMode {
    /// All `n^ℓ` tuples, repetitions included.
    Exact,
    /// `count` tuples drawn uniformly (with repetition) from `[n]^ℓ`.
    Sampled { count: usize, seed: u64 },
}

/// `n^{-ℓ} Σ_{x_1..x_ℓ} ‖μ_{G,x_1..x_ℓ} − μ_{G,x_1} ⊗ … ⊗ μ_{G,x_ℓ}‖_TV`.
pub fn symmetry_metric(g: &FactorGraph, ell: usize, mode: TupleMode, cap: usize) -> Result<f64> {
    if ell < 2 {
        return Err(Error::param("ell", "must be at least 2"));
    }
    let n = g.n();
    if n == 0 {
        return Ok(0.0);
    }
    let q = g.q();
    let e = Enumeration::new(g, cap)?;
    if e.log_z() == f64::NEG_INFINITY {
        return Err(Error::Degenerate("partition function is zero".into()));
    }
    let probs = e.probabilities();
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(e.len());
    let mut sigma = Vec::new();
    for i in 0..e.len() {
        e.assignment(i, &mut sigma);
        assignments.push(sigma.clone());
    }
    let mut single = vec![vec![0.0; q]; n];
    for (s, &p) in assignments.iter().zip(&probs) {
        for (x, &v) in s.iter().enumerate() {
            single[x][v] += p;
        }
    }
    let tuple_tv = |tuple: &[usize]| -> f64 {
        let mut joint = vec![0.0; q.pow(ell as u32)];
        for (s, &p) in assignments.iter().zip(&probs) {
            joint[tuple.iter().fold(0, |acc, &x| acc * q + s[x])] += p;
        }
        let mut idx = vec![0usize; ell];
        let mut tv = 0.0;
        for (j, &pj) in joint.iter().enumerate() {
            let mut r = j;
            for slot in idx.iter_mut().rev() {
                *slot = r % q;
                r /= q;
            }
            let prod: f64 = tuple.iter().zip(&idx).map(|(&x, &v)| single[x][v]).product();
            tv += (pj - prod).abs();
        }
        0.5 * tv
    };
    match mode {
        TupleMode::Exact => {
            let total = n.pow(ell as u32);
            let mut tuple = vec![0usize; ell];
            let mut acc = 0.0;
            for t in 0..total {
                let mut r = t;
                for slot in tuple.iter_mut().rev() {
                    *slot = r % n;
                    r /= n;
                }
                acc += tuple_tv(&tuple);
            }
            Ok(acc / total as f64)
        }
        TupleMode::Sampled { count, seed } => {
            let mut rng = SeedTree::new(seed).child("symmetry-tuples").rng();
            let mut acc = 0.0;
            let mut tuple = vec![0usize; ell];
            for _ in 0..count {
                for slot in tuple.iter_mut() {
                    *slot = rng.random_range(0..n);
                }
                acc += tuple_tv(&tuple);
            }
            Ok(acc / count.max(1) as f64)
        }
    }
}

/// Marginal estimates from a heat-bath Gibbs sampler. Carries no exactness
/// guarantee.
#[derive(Clone, Debug, Serialize)]
pub struct ApproximateMarginals {
    pub marginals: Vec<Vec<f64>>,
    pub sweeps: usize,
    pub approximate: bool,
}

/// Single-site heat-bath sampler for graphs beyond the enumeration cap.
pub fn sample_marginals(g: &FactorGraph, burn_in: usize, sweeps: usize, seed: u64) -> Result<ApproximateMarginals> {
    if !g.is_weighted() {
        return Err(Error::param("graph", "every check must carry a weight"));
    }
    let (n, q) = (g.n(), g.q());
    let mut pinned = vec![None; n];
    for p in g.pins() {
        pinned[p.variable] = Some(p.symbol);
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, c) in g.checks().iter().enumerate() {
        for &x in &c.neighbors {
            if incident[x].last() != Some(&a) {
                incident[x].push(a);
            }
        }
    }
    let mut rng = SeedTree::new(seed).child("heat-bath").rng();
    let mut sigma: Vec<usize> = (0..n)
        .map(|x| pinned[x].unwrap_or_else(|| rng.random_range(0..q)))
        .collect();
    let mut counts = vec![vec![0u64; q]; n];
    let mut cond = vec![0.0; q];
    for sweep in 0..burn_in + sweeps {
        for x in 0..n {
            if pinned[x].is_none() {
                for (v, c) in cond.iter_mut().enumerate() {
                    sigma[x] = v;
                    *c = incident[x]
                        .iter()
                        .map(|&a| {
                            let check = &g.checks()[a];
                            let idx = check.neighbors.iter().fold(0, |acc, &y| acc * q + sigma[y]);
                            g.weights()[check.weight.unwrap()].eval_index(idx)
                        })
                        .product();
                }
                let total: f64 = cond.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = q - 1;
                for (v, &c) in cond.iter().enumerate() {
                    if u < c {
                        pick = v;
                        break;
                    }
                    u -= c;
                }
                sigma[x] = pick;
            }
            if sweep >= burn_in {
                counts[x][sigma[x]] += 1;
            }
        }
    }
    let marginals = counts
        .into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / sweeps.max(1) as f64).collect())
        .collect();
    Ok(ApproximateMarginals {
        marginals,
        sweeps,
        approximate: true,
    })
}
