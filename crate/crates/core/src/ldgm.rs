//! LDGM codes over the binary symmetric channel: the parity weight family,
//! encoding and transmission, the exact mutual-information oracle for small
//! codes, SYM/POS checks and the code-form functional `𝓛`.
//!
//! Bits are stored as `0/1` with `0 ↔ +1` so that parities are sums mod 2.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::Serialize;

use crate::cavity::{contract, lambda, solve_sup, CavityModel, Population, SolverSettings, SupResult, MEAN_TOLERANCE};
use crate::graph::{spin, DegreeDistribution, FactorGraph, WeightFamily, WeightFunction};
use crate::rng::SeedTree;
use crate::stats::{monte_carlo, Estimate};
use crate::{Error, Result};

/// Largest `n + M` accepted by [`exact_code_mi`].
pub const CODE_MI_CAP: usize = 26;

/// `h(η) = −η ln η − (1−η) ln(1−η)` in nats.
pub fn binary_entropy(eta: f64) -> f64 {
    -lambda(eta) - lambda(1.0 - eta)
}

/// Binary symmetric channel with flip probability `η ∈ (0,1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelSpec {
    eta: f64,
}

impl ChannelSpec {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::param("eta", format!("{eta} outside (0,1)")));
        }
        Ok(ChannelSpec { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `J = 1 − 2·Be(η)`.
    pub fn sample_j<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.eta {
            -1.0
        } else {
            1.0
        }
    }
}

/// `ψ_s(σ) = 1 + s(1−2η)∏_{i≤k} σ_i` for `s = ±1` with the uniform prior.
/// Function 0 is `ψ_{+1}`.
pub fn code_weight_family(k: usize, eta: f64) -> Result<WeightFamily> {
    if k < 2 {
        return Err(Error::param("k", "checks need arity at least 2"));
    }
    ChannelSpec::new(eta)?;
    let functions = [1.0, -1.0]
        .into_iter()
        .map(|s| {
            WeightFunction::from_fn(2, k, |tau| {
                1.0 + s * (1.0 - 2.0 * eta) * tau.iter().map(|&t| spin(t)).product::<f64>()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WeightFamily::uniform(functions)
}

/// `max_σ |E_p[ψ(σ)] − ξ|`.
pub fn check_sym(family: &WeightFamily) -> f64 {
    family.sym_deviation()
}

/// A code graph with a message and its codeword.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodeInstance {
    pub graph: FactorGraph,
    pub message: Vec<u8>,
    pub codeword: Vec<u8>,
}

impl CodeInstance {
    pub fn new(graph: FactorGraph, message: Vec<u8>) -> Result<Self> {
        let codeword = encode(&graph, &message)?;
        Ok(CodeInstance {
            graph,
            message,
            codeword,
        })
    }
}

/// `x_a = Σ_{i∈∂a} ξ_i mod 2`.
pub fn encode(g: &FactorGraph, message: &[u8]) -> Result<Vec<u8>> {
    if message.len() != g.n() {
        return Err(Error::param("message", "length differs from n"));
    }
    Ok(g.checks()
        .iter()
        .map(|c| c.neighbors.iter().fold(0u8, |acc, &x| acc ^ (message[x] & 1)))
        .collect())
}

/// Encodes and flips every codeword bit independently with probability `η`.
pub fn encode_transmit(g: &FactorGraph, message: &[u8], eta: f64, seed: u64) -> Result<(Vec<u8>, Vec<u8>)> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("{eta} outside [0,1]")));
    }
    let codeword = encode(g, message)?;
    let mut rng = SeedTree::new(seed).child("channel").rng();
    let received = codeword
        .iter()
        .map(|&b| b ^ (rng.random::<f64>() < eta) as u8)
        .collect();
    Ok((codeword, received))
}

/// `I(X;Y)/n` in nats for a uniform message through the code and a BSC(η).
///
/// The output law is the codeword law convolved with i.i.d. flips; the
/// convolution is diagonal in the Walsh–Hadamard basis.
pub fn exact_code_mi(g: &FactorGraph, eta: f64) -> Result<f64> {
    let (n, m) = (g.n(), g.num_checks());
    if n + m > CODE_MI_CAP {
        return Err(Error::EnumerationCap {
            size: n + m,
            cap: CODE_MI_CAP,
        });
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("{eta} outside [0,1]")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(code_mi_total(g, eta) / n as f64)
}

/// `I(X;Y)` in nats without the size cap; cost `O(2^n·M + M·2^M)`.
pub(crate) fn code_mi_total(g: &FactorGraph, eta: f64) -> f64 {
    let (n, m) = (g.n(), g.num_checks());
    let masks: Vec<u32> = g
        .checks()
        .iter()
        .map(|c| c.neighbors.iter().fold(0u32, |acc, &x| acc ^ (1 << x)))
        .collect();
    let mut law = vec![0.0f64; 1 << m];
    let w = (0.5f64).powi(n as i32);
    for msg in 0u32..(1 << n) {
        let x = masks
            .iter()
            .enumerate()
            .fold(0usize, |acc, (a, &mask)| acc | (((msg & mask).count_ones() & 1) as usize) << a);
        law[x] += w;
    }
    walsh_hadamard(&mut law);
    let r = 1.0 - 2.0 * eta;
    for (s, v) in law.iter_mut().enumerate() {
        *v *= r.powi(s.count_ones() as i32);
    }
    walsh_hadamard(&mut law);
    let scale = 1.0 / law.len() as f64;
    let h_y: f64 = law.iter().map(|&p| -lambda((p * scale).max(0.0))).sum();
    (h_y - m as f64 * binary_entropy(eta)).max(0.0)
}

fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Per-`l` POS terms `E[((1−2η)s)^l]·(X_l^k + (k−1)Y_l^k − k X_l Y_l^{k−1})`
/// for `l = 1..=l_max`, with `X_l`, `Y_l` the `l`-th moments of `θ` under
/// the two populations.
pub fn check_pos_moments(k: usize, eta: f64, pop: &Population, pop2: &Population, l_max: usize) -> Vec<f64> {
    let moment = |p: &Population, l: i32| {
        let t = p.theta_values();
        t.iter().map(|x| x.powi(l)).sum::<f64>() / t.len() as f64
    };
    (1..=l_max as i32)
        .map(|l| {
            if l % 2 == 1 {
                return 0.0;
            }
            let (x, y) = (moment(pop, l), moment(pop2, l));
            let k = k as i32;
            (1.0 - 2.0 * eta).powi(l) * (x.powi(k) + (k - 1) as f64 * y.powi(k) - k as f64 * x * y.powi(k - 1))
        })
        .collect()
}

/// Monte Carlo estimate of the POS expectation for `π`, `π′`.
pub fn check_pos_general(
    family: &WeightFamily,
    pi: &Population,
    pi2: &Population,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let (q, k) = (family.q(), family.arity());
    if pi.q() != q || pi2.q() != q {
        return Err(Error::param("population", "alphabet size differs from the family's"));
    }
    Ok(monte_carlo(SeedTree::new(seed).child("pos"), mc_samples, |rng| {
        let f = &family.functions()[family.sample_index(rng)];
        let mut a = vec![0.0; k * q];
        let mut b = vec![0.0; k * q];
        for j in 0..k {
            pi.sample_into(rng, &mut a[j * q..(j + 1) * q]);
            pi2.sample_into(rng, &mut b[j * q..(j + 1) * q]);
        }
        let mut mixed = b.clone();
        mixed[..q].copy_from_slice(&a[..q]);
        let mut out = [0.0];
        let mut eval = |mus: &[f64]| {
            contract(f, mus, None, &mut out);
            lambda(out[0])
        };
        eval(&a) + (k - 1) as f64 * eval(&b) - k as f64 * eval(&mixed)
    }))
}

/// `𝓛(k,D,η;π)` and its two terms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LFunctional {
    pub value: Estimate,
    /// `½E[Λ(Σ_σ∏_a(1+J_aσ∏_jθ_{a,j}))]`.
    pub first: Estimate,
    /// `E[Λ(1+J∏_{j≤k}θ_j)]`.
    pub edge: Estimate,
}

/// Monte Carlo evaluation of `𝓛`; streams are labelled like those of
/// [`crate::cavity::b_functional`] so the two can be compared on paired
/// seeds.
pub fn l_functional(
    k: usize,
    d: &DegreeDistribution,
    eta: f64,
    pop: &Population,
    mc_samples: usize,
    seed: u64,
) -> Result<LFunctional> {
    let channel = ChannelSpec::new(eta)?;
    if pop.q() != 2 {
        return Err(Error::param("population", "the code functional needs q = 2"));
    }
    pop.check_mean(MEAN_TOLERANCE)?;
    let tree = SeedTree::new(seed);
    let first = monte_carlo(tree.child("first-term"), mc_samples, |rng| {
        let gamma = d.sample(rng);
        let (mut plus, mut minus) = (1.0, 1.0);
        for _ in 0..gamma {
            let mut x = channel.sample_j(rng);
            for _ in 1..k {
                x *= pop.sample_theta(rng);
            }
            plus *= 1.0 + x;
            minus *= 1.0 - x;
        }
        0.5 * lambda(plus + minus)
    });
    let edge = monte_carlo(tree.child("edge-term"), mc_samples, |rng| {
        let mut x = channel.sample_j(rng);
        for _ in 0..k {
            x *= pop.sample_theta(rng);
        }
        lambda(1.0 + x)
    });
    let c = (k - 1) as f64 / k as f64 * d.mean();
    Ok(LFunctional {
        value: first.combine(1.0, edge, -c),
        first,
        edge,
    })
}

/// Both readings of the code theorem's channel term.
#[derive(Clone, Debug, Serialize)]
pub struct CodePrediction {
    /// With `(E[γ]/(2k))(ln 2 − h(η))`, as the code theorem states.
    pub half: Estimate,
    /// With `(E[γ]/k)(ln 2 − h(η))`, the general theorem specialised.
    pub full: Estimate,
    pub sup: SupResult,
}

/// `−sup_π 𝓛 + c·(ln 2 − h(η)) + ln 2` for both constants `c`.
pub fn mi_predict_codes(
    k: usize,
    d: &DegreeDistribution,
    eta: f64,
    settings: &SolverSettings,
    seed: u64,
) -> Result<CodePrediction> {
    let sup = solve_sup(&CavityModel::Code { k, eta }, d, settings, seed)?;
    let gap = 2f64.ln() - binary_entropy(eta);
    let base = sup.value.combine(-1.0, Estimate::exact(0.0), 0.0).shift(2f64.ln());
    let c = d.mean() / k as f64;
    Ok(CodePrediction {
        half: base.shift(0.5 * c * gap),
        full: base.shift(c * gap),
        sup,
    })
}

/// Writes a code as `n M k` followed by one neighbor tuple per codeword bit.
pub fn write_code<W: Write>(g: &FactorGraph, mut out: W) -> Result<()> {
    let k = g.checks().first().map_or(0, |c| c.neighbors.len());
    writeln!(out, "{} {} {}", g.n(), g.num_checks(), k)?;
    for c in g.checks() {
        let cells: Vec<String> = c.neighbors.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

pub fn read_code<R: BufRead>(input: R) -> Result<FactorGraph> {
    let perr = |line: usize, reason: &str| Error::Parse {
        line,
        reason: reason.to_string(),
    };
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim().to_string();
        if !line.is_empty() {
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| perr(i + 1, "expected integers")))
                .collect::<Result<Vec<_>>>()?;
            rows.push((i + 1, nums));
        }
    }
    let Some((hl, header)) = rows.first() else {
        return Err(perr(1, "missing `n M k` header"));
    };
    let [n, m, k] = header[..] else {
        return Err(perr(*hl, "header must be `n M k`"));
    };
    if rows.len() != m + 1 {
        return Err(perr(*hl, "number of tuples differs from M"));
    }
    let mut g = FactorGraph::new(n, 2);
    for (line, tuple) in &rows[1..] {
        if tuple.len() != k {
            return Err(perr(*line, "tuple length differs from k"));
        }
        g.add_check(tuple.clone(), None).map_err(|e| perr(*line, &e.to_string()))?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_code() -> FactorGraph {
        let mut g = FactorGraph::new(2, 2);
        g.add_check(vec![0, 1], None).unwrap();
        g
    }

    #[test]
    fn parity_tables() {
        let fam = code_weight_family(2, 0.3).unwrap();
        assert!((fam.functions()[0].eval(&[0, 0]) - 1.4).abs() < 1e-15);
        assert!((fam.functions()[1].eval(&[0, 0]) - 0.6).abs() < 1e-15);
        for k in 2..5 {
            let fam = code_weight_family(k, 0.17).unwrap();
            for i in 0..1 << k {
                let s = fam.functions()[0].eval_index(i) + fam.functions()[1].eval_index(i);
                assert!((s - 2.0).abs() < 1e-15);
            }
            assert!((fam.xi() - 1.0).abs() < 1e-15);
            assert!(check_sym(&fam) < 1e-15);
        }
        assert!(code_weight_family(2, 0.0).is_err());
        assert!(code_weight_family(2, 1.0).is_err());
        assert!(code_weight_family(1, 0.2).is_err());
    }

    #[test]
    fn bumped_family_violates_sym() {
        let fam = code_weight_family(2, 0.3).unwrap();
        let mut t = fam.functions()[0].table().to_vec();
        t[0] += 0.5;
        let bumped = WeightFamily::uniform(vec![WeightFunction::new(2, 2, t).unwrap(), fam.functions()[1].clone()]).unwrap();
        // E[ψ(σ)] rises by 0.25 at one σ, ξ by 0.25/4
        assert!((check_sym(&bumped) - 0.1875).abs() < 1e-12);
    }

    #[test]
    fn encoding() {
        let mut g = FactorGraph::new(3, 2);
        g.add_check(vec![0, 1], None).unwrap();
        g.add_check(vec![1, 2], None).unwrap();
        assert_eq!(encode(&g, &[1, 1, 0]).unwrap(), vec![0, 1]);
        assert_eq!(encode(&g, &[0, 0, 0]).unwrap(), vec![0, 0]);
        let (c, r) = encode_transmit(&g, &[1, 0, 0], 0.0, 3).unwrap();
        assert_eq!(c, r);
    }

    #[test]
    fn flip_count_is_binomial() {
        let mut g = FactorGraph::new(4, 2);
        for a in 0..4 {
            g.add_check(vec![a, (a + 1) % 4], None).unwrap();
        }
        let eta = 0.2;
        let flips: usize = (0..10_000u64)
            .map(|s| {
                let (c, r) = encode_transmit(&g, &[1, 0, 1, 1], eta, s).unwrap();
                c.iter().zip(&r).filter(|(a, b)| a != b).count()
            })
            .sum();
        let (mean, sd) = (40_000.0 * eta, (40_000.0 * eta * (1.0 - eta)).sqrt());
        assert!((flips as f64 - mean).abs() < 4.0 * sd);
    }

    #[test]
    fn single_check_mi() {
        let g = pair_code();
        assert!((exact_code_mi(&g, 0.0).unwrap() * 2.0 - 2f64.ln()).abs() < 1e-14);
        let want = 2f64.ln() - binary_entropy(0.2);
        assert!((exact_code_mi(&g, 0.2).unwrap() * 2.0 - want).abs() < 1e-14);
        assert!(exact_code_mi(&g, 0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mi_matches_direct_output_enumeration() {
        let mut g = FactorGraph::new(3, 2);
        for c in [[0, 1], [1, 2], [0, 2], [0, 0]] {
            g.add_check(c.to_vec(), None).unwrap();
        }
        let eta: f64 = 0.15;
        let m = 4;
        let mut h_y = 0.0;
        for y in 0..16u32 {
            let mut p: f64 = 0.0;
            for msg in 0..8u8 {
                let bits = [msg & 1, (msg >> 1) & 1, (msg >> 2) & 1];
                let x = encode(&g, &bits).unwrap();
                let d = (0..m).filter(|&a| x[a] as u32 != (y >> a) & 1).count() as i32;
                p += eta.powi(d) * (1.0 - eta).powi(m as i32 - d) / 8.0;
            }
            h_y -= p * p.ln();
        }
        let want = (h_y - 4.0 * binary_entropy(eta)) / 3.0;
        assert!((exact_code_mi(&g, eta).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn mi_is_monotone_in_noise() {
        let mut g = FactorGraph::new(4, 2);
        for c in [[0, 1, 2], [1, 2, 3], [0, 2, 3], [0, 1, 3], [1, 1, 2]] {
            g.add_check(c.to_vec(), None).unwrap();
        }
        let grid: Vec<f64> = (0..=10).map(|i| exact_code_mi(&g, 0.05 * i as f64).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn mi_cap() {
        let mut g = FactorGraph::new(14, 2);
        for a in 0..13 {
            g.add_check(vec![a, a + 1], None).unwrap();
        }
        assert!(matches!(exact_code_mi(&g, 0.1), Err(Error::EnumerationCap { size: 27, .. })));
    }

    #[test]
    fn pos_moments() {
        let a = Population::from_thetas(vec![0.5, -0.5, 0.9, -0.9]).unwrap();
        let b = Population::from_thetas(vec![0.1, -0.1, 0.3, -0.3]).unwrap();
        let v = check_pos_moments(3, 0.1, &a, &b, 6);
        for l in [0, 2, 4] {
            assert_eq!(v[l], 0.0);
        }
        let x: f64 = (0.25 + 0.81) / 2.0;
        let y: f64 = (0.01 + 0.09) / 2.0;
        let want = 0.64 * (x.powi(3) + 2.0 * y.powi(3) - 3.0 * x * y * y);
        assert!((v[1] - want).abs() < 1e-15);
        assert!(v.iter().all(|&t| t >= 0.0));
        assert!(check_pos_moments(2, 0.3, &a, &a, 4).iter().all(|t| t.abs() < 1e-15));
    }

    #[test]
    fn pos_general_vanishes_at_the_trivial_population() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let t = Population::trivial(2, 4, true);
        let est = check_pos_general(&fam, &t, &t, 1000, 1).unwrap();
        assert!(est.mean.abs() < 1e-15);
    }

    #[test]
    fn pos_general_matches_exhaustive_average() {
        // π′ = δ_uniform: the last two terms are Λ(ξ) = 0, leaving E[Λ(Σψ∏μ)]
        let fam = code_weight_family(2, 0.25).unwrap();
        let pi = Population::from_thetas(vec![0.6, -0.6, 0.2, -0.2]).unwrap();
        let uni = Population::trivial(2, 1, true);
        let mut exact = 0.0;
        for s in [1.0, -1.0] {
            for a in pi.thetas().unwrap() {
                for b in pi.thetas().unwrap() {
                    exact += lambda(1.0 + s * 0.5 * a * b) / 32.0;
                }
            }
        }
        let est = check_pos_general(&fam, &pi, &uni, 200_000, 2).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.stderr, "{} vs {exact}", est.mean);
    }

    #[test]
    fn l_anchors() {
        let zero = Population::trivial(2, 10, true);
        for (k, d) in [(2, DegreeDistribution::point(2)), (3, DegreeDistribution::new([(1, 0.5), (4, 0.5)]).unwrap())] {
            let l = l_functional(k, &d, 0.1, &zero, 1000, 1).unwrap();
            assert!((l.value.mean - 2f64.ln()).abs() < 1e-12);
        }
        let spread = Population::from_thetas(vec![0.9, -0.9, 0.1, -0.1]).unwrap();
        let l = l_functional(3, &DegreeDistribution::point(0), 0.3, &spread, 100, 1).unwrap();
        assert!((l.value.mean - 2f64.ln()).abs() < 1e-12);
        let skewed = Population::from_thetas(vec![0.9, 0.1]).unwrap();
        assert!(matches!(
            l_functional(2, &DegreeDistribution::point(2), 0.3, &skewed, 100, 1),
            Err(Error::MeanConstraint { .. })
        ));
    }

    #[test]
    fn l_matches_an_independent_formula_oracle() {
        // straight-from-the-display Monte Carlo with its own generator
        use rand::SeedableRng;
        let pop = Population::from_thetas(vec![0.8, -0.8, 0.35, -0.35, 0.05, -0.05]).unwrap();
        let t = pop.thetas().unwrap();
        let (k, eta) = (2, 0.1);
        let d = DegreeDistribution::point(2);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(99);
        let samples = 200_000;
        let mut vals = Vec::with_capacity(samples);
        for _ in 0..samples {
            let j = |r: &mut rand_chacha::ChaCha20Rng| if r.random_bool(eta) { -1.0 } else { 1.0 };
            let mut sum = 0.0;
            let js: Vec<f64> = (0..2).map(|_| j(&mut rng)).collect();
            let ths: Vec<f64> = (0..2).map(|_| t[rng.random_range(0..t.len())]).collect();
            for sigma in [1.0, -1.0] {
                sum += (1.0 + js[0] * sigma * ths[0]) * (1.0 + js[1] * sigma * ths[1]);
            }
            let first = 0.5 * sum * sum.ln();
            let jj = j(&mut rng);
            let e = 1.0 + jj * t[rng.random_range(0..t.len())] * t[rng.random_range(0..t.len())];
            vals.push(first - 0.5 * 2.0 * e * e.ln());
        }
        let oracle = Estimate::from_samples(&vals);
        let l = l_functional(k, &d, eta, &pop, samples, 7).unwrap().value;
        assert!((l.mean - oracle.mean).abs() < 3.0 * l.stderr.hypot(oracle.stderr));
    }

    #[test]
    fn code_file_round_trip() {
        let mut g = FactorGraph::new(4, 2);
        g.add_check(vec![0, 1, 3], None).unwrap();
        g.add_check(vec![2, 2, 1], None).unwrap();
        let mut buf = Vec::new();
        write_code(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "4 2 3\n0 1 3\n2 2 1\n");
        assert_eq!(read_code(&buf[..]).unwrap(), g);
        assert!(read_code(&b"4 2 3\n0 1 3\n"[..]).is_err());
    }
}
