use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{alpha_beta_plan, FactorGraph, SocketSampler, SocketState};
use crate::planted::DegreeSource;
use crate::rng::SeedTree;
use crate::stats::{linear_fit, Estimate, LinearFit};
use crate::{Error, Result};

/// Bookkeeping of one coupled pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingReport {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// `C_F`: matched creation indices whose ordered neighborhoods differ.
    pub differing_checks: usize,
    /// Sockets removed by `(δ−∇)_+` clipping, plus one per exhaustion.
    pub truncation_events: usize,
    /// Draws of a variable already drawn in the same layer.
    pub collisions: usize,
    /// Coordinates where the maximal coupling fell back to the residual law.
    pub coupling_failures: usize,
    /// Exact checks created after the approximation ran out of layers.
    pub completion_checks: usize,
    /// Approximation checks beyond the exact check count.
    pub overflow_checks: usize,
    pub approx_checks: usize,
    pub exact_checks: usize,
    pub exhausted: bool,
}

#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub approx: FactorGraph,
    pub exact: FactorGraph,
    pub report: CouplingReport,
}

/// Draws `y` from `(ν′ − ν)_+` normalised.
fn residual(exact: &SocketSampler, layer: &SocketSampler, u: f64) -> usize {
    let (te, tl) = (exact.total() as f64, layer.total() as f64);
    let excess = |y: usize| (exact.get(y) as f64 / te - layer.get(y) as f64 / tl).max(0.0);
    let n = exact.values().len();
    let total: f64 = (0..n).map(excess).sum();
    let mut target = u * total;
    for y in 0..n {
        let w = excess(y);
        if target < w {
            return y;
        }
        target -= w;
    }
    (0..n).rev().find(|&y| excess(y) > 0.0).unwrap_or(n - 1)
}

/// Generates the `(α,β)`-approximation and the configuration model from one
/// random stream. Every approximation coordinate `x ~ ν_s` (frozen within
/// layer `s`) is reused by the exact process with probability
/// `min(1, ν′(x)/ν(x))`, `ν′` being the current socket law of the exact
/// process; otherwise the exact coordinate comes from `(ν′−ν)_+`. The
/// coupling can only fail at a within-layer collision.
pub fn coupled_generate(
    n: usize,
    degrees: &DegreeSource,
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<CoupledPair> {
    let tree = SeedTree::new(seed);
    let d = match degrees {
        DegreeSource::Sequence(d) => d.clone(),
        DegreeSource::Distribution(dist) => crate::graph::sample_d_partition(n, dist, tree.child("degrees").key()).sequence,
    };
    if d.n() != n {
        return Err(Error::param("degrees", "sequence length differs from n"));
    }
    if k == 0 || d.total() % k as u64 != 0 {
        return Err(Error::NotDivisible { total: d.total(), k });
    }
    let m_exact = (d.total() / k as u64) as usize;
    let plan = alpha_beta_plan(&d, k, alpha, beta, tree.child("plan").key())?;
    let mut rng = tree.child("coupling").rng();
    let mut exact = SocketSampler::from_degrees(d.degrees());
    let mut state = SocketState::new(d.degrees());
    let mut approx_checks: Vec<Vec<usize>> = Vec::new();
    let mut exact_checks: Vec<Vec<usize>> = Vec::with_capacity(m_exact);
    let mut drawn = vec![0u64; n];
    let mut touched = Vec::new();
    let (mut collisions, mut failures, mut truncations) = (0, 0, 0);
    let mut exhausted = false;
    'layers: for &m in &plan.counts {
        if m == 0 {
            state.apply_round(&[]);
            continue;
        }
        let layer = state.remaining.clone();
        if layer.total() == 0 {
            exhausted = true;
            truncations += 1;
            break 'layers;
        }
        for _ in 0..m {
            let active = exact_checks.len() < m_exact;
            let mut a = Vec::with_capacity(k);
            let mut e = Vec::with_capacity(k);
            for _ in 0..k {
                let x = layer.sample(&mut rng);
                if drawn[x] > 0 {
                    collisions += 1;
                } else {
                    touched.push(x);
                }
                drawn[x] += 1;
                a.push(x);
                if active {
                    let nu = layer.prob(x);
                    let nu_exact = exact.prob(x);
                    let y = if rng.random::<f64>() * nu < nu_exact {
                        x
                    } else {
                        failures += 1;
                        residual(&exact, &layer, rng.random())
                    };
                    exact.decrement(y);
                    e.push(y);
                }
            }
            approx_checks.push(a);
            if active {
                exact_checks.push(e);
            }
        }
        let increment: Vec<(usize, u64)> = touched.iter().map(|&x| (x, drawn[x])).collect();
        truncations += state.apply_round(&increment) as usize;
        for x in touched.drain(..) {
            drawn[x] = 0;
        }
    }
    let matched = approx_checks.len().min(exact_checks.len());
    let differing = (0..matched).filter(|&i| approx_checks[i] != exact_checks[i]).count();
    while exact_checks.len() < m_exact {
        let mut e = Vec::with_capacity(k);
        for _ in 0..k {
            let y = exact.sample(&mut rng);
            exact.decrement(y);
            e.push(y);
        }
        exact_checks.push(e);
    }
    let build = |checks: &[Vec<usize>]| -> Result<FactorGraph> {
        let mut g = FactorGraph::new(n, 2);
        for c in checks {
            g.add_check(c.clone(), None)?;
        }
        Ok(g)
    };
    let report = CouplingReport {
        n,
        alpha,
        beta,
        seed,
        differing_checks: differing,
        truncation_events: truncations,
        collisions,
        coupling_failures: failures,
        completion_checks: exact_checks.len() - matched,
        overflow_checks: approx_checks.len() - matched,
        approx_checks: approx_checks.len(),
        exact_checks: exact_checks.len(),
        exhausted,
    };
    Ok(CoupledPair {
        approx: build(&approx_checks)?,
        exact: build(&exact_checks)?,
        report,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub mean_cf: Estimate,
    pub mean_truncations: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingStat {
    pub points: Vec<ScalingPoint>,
    /// Least-squares fit of mean `C_F` against `n`.
    pub fit: LinearFit,
}

/// Mean `C_F` per grid point and its regression slope in `n`.
pub fn coupling_scaling_stat(
    n_grid: &[usize],
    reps: usize,
    alpha: f64,
    beta: f64,
    degrees: &DegreeSource,
    k: usize,
    seed: u64,
) -> Result<ScalingStat> {
    if n_grid.len() < 2 || reps < 2 {
        return Err(Error::param("n_grid", "need at least two grid points and two repetitions"));
    }
    let tree = SeedTree::new(seed).child("coupling-scaling");
    let points = n_grid
        .iter()
        .map(|&n| {
            let node = tree.index(n as u64);
            let reports: Vec<CouplingReport> = (0..reps as u64)
                .into_par_iter()
                .map(|r| Ok(coupled_generate(n, degrees, k, alpha, beta, node.index(r).key())?.report))
                .collect::<Result<_>>()?;
            let cf: Vec<f64> = reports.iter().map(|r| r.differing_checks as f64).collect();
            Ok(ScalingPoint {
                n,
                alpha,
                beta,
                mean_cf: Estimate::from_samples(&cf),
                mean_truncations: reports.iter().map(|r| r.truncation_events as f64).sum::<f64>() / reps as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_cf.mean).collect();
    let fit = linear_fit(&x, &y, None);
    Ok(ScalingStat { points, fit })
}
