use rand::Rng;
use serde::Serialize;

use super::population::{Population, MEAN_TOLERANCE};
use crate::graph::{DegreeDistribution, WeightFamily, WeightFunction};
use crate::rng::SeedTree;
use crate::stats::{monte_carlo, Estimate};
use crate::{Error, Result};

/// `Λ(x) = x ln x` with `Λ(0) = 0`.
pub fn big_lambda(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::param("x", format!("Λ is defined on [0,∞), got {x}")));
    }
    Ok(lambda(x))
}

#[inline]
pub(crate) fn lambda(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `Σ_τ ψ(τ) ∏_j μ_j(τ_j)` for `μ` given row-major as `k × q`; row `skip`
/// is ignored and the sum is split by the value of `τ_skip` into `out`.
pub(crate) fn contract(f: &WeightFunction, mus: &[f64], skip: Option<usize>, out: &mut [f64]) {
    let (q, k) = (f.q(), f.arity());
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut tau = vec![0usize; k];
    for &w in f.table() {
        let mut prod = w;
        for (j, &t) in tau.iter().enumerate() {
            if Some(j) != skip {
                prod *= mus[j * q + t];
            }
        }
        match skip {
            Some(h) => out[tau[h]] += prod,
            None => out[0] += prod,
        }
        // advance τ in row-major order, last coordinate fastest
        for j in (0..k).rev() {
            tau[j] += 1;
            if tau[j] < q {
                break;
            }
            tau[j] = 0;
        }
    }
}

pub(crate) fn validate(family: &WeightFamily, pop: &Population) -> Result<()> {
    if family.q() != pop.q() {
        return Err(Error::param("population", "alphabet size differs from the family's"));
    }
    pop.check_mean(MEAN_TOLERANCE)
}

/// `𝓑(D,π)` together with its two terms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BFunctional {
    pub value: Estimate,
    /// `(1/|Ω|)E[ξ^{−γ}Λ(…)]`.
    pub first: Estimate,
    /// `E[Λ(Σ_τ ψ(τ)∏μ_j(τ_j))]`.
    pub edge: Estimate,
}

/// One draw of the variable-node term `ξ^{−γ}Λ(Σ_σ∏_b m_b(σ))/|Ω|`.
pub(crate) fn first_term_sample<R: Rng + ?Sized>(
    d: &DegreeDistribution,
    family: &WeightFamily,
    pop: &Population,
    rng: &mut R,
) -> f64 {
    let (q, k) = (family.q(), family.arity());
    let gamma = d.sample(rng);
    let mut prod = vec![1.0; q];
    let mut mus = vec![0.0; k * q];
    let mut m = vec![0.0; q];
    for _ in 0..gamma {
        let f = &family.functions()[family.sample_index(rng)];
        let h = rng.random_range(0..k);
        for j in (0..k).filter(|&j| j != h) {
            pop.sample_into(rng, &mut mus[j * q..(j + 1) * q]);
        }
        contract(f, &mus, Some(h), &mut m);
        prod.iter_mut().zip(&m).for_each(|(p, x)| *p *= x);
    }
    lambda(prod.iter().sum()) * family.xi().powi(-(gamma as i32)) / q as f64
}

pub(crate) fn edge_term_sample<R: Rng + ?Sized>(family: &WeightFamily, pop: &Population, rng: &mut R) -> f64 {
    let (q, k) = (family.q(), family.arity());
    let f = &family.functions()[family.sample_index(rng)];
    let mut mus = vec![0.0; k * q];
    for j in 0..k {
        pop.sample_into(rng, &mut mus[j * q..(j + 1) * q]);
    }
    let mut out = [0.0];
    contract(f, &mus, None, &mut out);
    lambda(out[0])
}

fn edge_term(family: &WeightFamily, pop: &Population, mc_samples: usize, seed: u64) -> Estimate {
    monte_carlo(SeedTree::new(seed).child("edge-term"), mc_samples, |rng| {
        edge_term_sample(family, pop, rng)
    })
}

/// Monte Carlo evaluation of `𝓑(D,π)`. The first term draws from the
/// `"first-term"` stream and the edge term from `"edge-term"`, shared with
/// [`closed_form_forest`] and [`gamma_correction`] for paired comparisons.
pub fn b_functional(
    d: &DegreeDistribution,
    family: &WeightFamily,
    pop: &Population,
    mc_samples: usize,
    seed: u64,
) -> Result<BFunctional> {
    validate(family, pop)?;
    let first = closed_form_forest(d, family, pop, mc_samples, seed)?;
    let edge = edge_term(family, pop, mc_samples, seed);
    let c = (family.arity() - 1) as f64 / (family.arity() as f64 * family.xi()) * d.mean();
    Ok(BFunctional {
        value: first.combine(1.0, edge, -c),
        first,
        edge,
    })
}

/// The forest free energy, i.e. the first term of `𝓑`.
pub fn closed_form_forest(
    d: &DegreeDistribution,
    family: &WeightFamily,
    pop: &Population,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    validate(family, pop)?;
    if d.max_degree() == 0 {
        return Ok(Estimate::exact((family.q() as f64).ln()));
    }
    Ok(monte_carlo(SeedTree::new(seed).child("first-term"), mc_samples, |rng| {
        first_term_sample(d, family, pop, rng)
    }))
}

/// `Γ_{s,t} = ((s+t−1)β(k−1)/ξ)·E[Λ(Σ_τψ(τ)∏μ_j(τ_j))]`.
pub fn gamma_correction(
    s: usize,
    t: f64,
    beta: f64,
    family: &WeightFamily,
    pop: &Population,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if s < 1 {
        return Err(Error::param("s", "layers are numbered from 1"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("{t} outside [0,1]")));
    }
    validate(family, pop)?;
    let pre = (s as f64 + t - 1.0) * beta * (family.arity() - 1) as f64 / family.xi();
    Ok(edge_term(family, pop, mc_samples, seed).combine(pre, Estimate::exact(0.0), 0.0))
}

/// `(E[γ]/(kξ|Ω|^k))·Σ_τ E[Λ(ψ(τ))]`, summed exactly.
pub fn channel_term(d: &DegreeDistribution, family: &WeightFamily) -> f64 {
    let k = family.arity();
    let size = family.q().pow(k as u32) as f64;
    let total: f64 = family
        .functions()
        .iter()
        .zip(family.prior())
        .map(|(f, p)| p * f.table().iter().map(|&x| lambda(x)).sum::<f64>())
        .sum();
    d.mean() / (k as f64 * family.xi() * size) * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldgm::code_weight_family;

    fn spread(n: usize, seed: u64) -> Population {
        let mut rng = SeedTree::new(seed).rng();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Population::from_thetas(t).unwrap().symmetrized()
    }

    #[test]
    fn lambda_values() {
        assert_eq!(big_lambda(1.0).unwrap(), 0.0);
        assert_eq!(big_lambda(0.0).unwrap(), 0.0);
        assert!((big_lambda(2.0).unwrap() - 1.386294361).abs() < 1e-9);
        assert!(big_lambda(-0.1).is_err());
    }

    #[test]
    fn contraction_matches_brute_force() {
        let f = WeightFunction::from_fn(3, 2, |t| 0.1 + 0.3 * t[0] as f64 + 0.2 * t[1] as f64).unwrap();
        let mus = [0.2, 0.3, 0.5, 0.6, 0.1, 0.3];
        let mut full = [0.0];
        contract(&f, &mus, None, &mut full);
        let mut brute = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                brute += f.eval(&[a, b]) * mus[a] * mus[3 + b];
            }
        }
        assert!((full[0] - brute).abs() < 1e-15);
        let mut split = [0.0; 3];
        contract(&f, &mus, Some(1), &mut split);
        for (b, v) in split.iter().enumerate() {
            let want: f64 = (0..3).map(|a| f.eval(&[a, b]) * mus[a]).sum();
            assert!((v - want).abs() < 1e-15);
        }
    }

    #[test]
    fn trivial_population_gives_ln2() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let d = DegreeDistribution::point(3);
        let b = b_functional(&d, &fam, &Population::trivial(2, 10, true), 1000, 1).unwrap();
        assert!((b.value.mean - 2f64.ln()).abs() < 1e-12);
        assert!(b.value.stderr < 1e-12);
    }

    #[test]
    fn empty_degree_gives_ln_q() {
        let fam = code_weight_family(2, 0.3).unwrap();
        let d = DegreeDistribution::point(0);
        let b = b_functional(&d, &fam, &spread(50, 2), 1000, 1).unwrap();
        assert!((b.value.mean - 2f64.ln()).abs() < 1e-12);
        let f = closed_form_forest(&d, &fam, &spread(50, 2), 10, 1).unwrap();
        assert_eq!(f.mean, 2f64.ln());
    }

    #[test]
    fn forest_is_b_plus_edge_term() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let d = DegreeDistribution::new([(2, 0.5), (3, 0.5)]).unwrap();
        let pop = spread(200, 3);
        let b = b_functional(&d, &fam, &pop, 5000, 9).unwrap();
        let f = closed_form_forest(&d, &fam, &pop, 5000, 9).unwrap();
        let c = 2.0 / 3.0 * d.mean();
        assert!((f.mean - (b.value.mean + c * b.edge.mean)).abs() < 1e-12);
    }

    #[test]
    fn gamma_correction_is_affine_in_t() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let pop = spread(100, 4);
        let g = |t| gamma_correction(2, t, 0.1, &fam, &pop, 2000, 5).unwrap().mean;
        assert!((g(0.5) - 0.5 * (g(0.0) + g(1.0))).abs() < 1e-12);
        assert_eq!(gamma_correction(1, 0.0, 0.1, &fam, &pop, 10, 5).unwrap().mean, 0.0);
        let zero = gamma_correction(3, 0.4, 0.1, &fam, &Population::trivial(2, 5, true), 100, 5).unwrap();
        assert!(zero.mean.abs() < 1e-15);
    }

    #[test]
    fn channel_term_for_codes() {
        // Σ_τ E[Λ(ψ(τ))] = 2^k (ln 2 − h(η)) for the parity family
        for (k, eta) in [(2, 0.1), (3, 0.3)] {
            let fam = code_weight_family(k, eta).unwrap();
            let d = DegreeDistribution::point(3);
            let h = -eta * f64::ln(eta) - (1.0 - eta) * f64::ln(1.0 - eta);
            let want = 3.0 / k as f64 * (2f64.ln() - h);
            assert!((channel_term(&d, &fam) - want).abs() < 1e-14);
        }
        assert!(channel_term(&DegreeDistribution::point(3), &code_weight_family(2, 0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn b_is_exchangeable_in_distribution() {
        let fam = code_weight_family(2, 0.1).unwrap();
        let d = DegreeDistribution::point(2);
        let a = spread(300, 6);
        let mut t = a.thetas().unwrap().to_vec();
        t.reverse();
        let b = Population::from_thetas(t).unwrap();
        let ba = b_functional(&d, &fam, &a, 20000, 1).unwrap().value;
        let bb = b_functional(&d, &fam, &b, 20000, 2).unwrap().value;
        assert!((ba.mean - bb.mean).abs() < 4.0 * ba.stderr.hypot(bb.stderr));
    }
}
