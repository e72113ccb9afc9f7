use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cavity::{contract, Population, MEAN_TOLERANCE};
use crate::graph::weights_internal::{encode_index, sample_discrete};
use crate::graph::{poisson, s_max, FactorGraph, SocketSampler, SocketState, WeightFamily, WeightFunction};
use crate::planted::{pin_graph, sample_pin_set, DegreeSource, PinSet};
use crate::rng::SeedTree;
use crate::{Error, Result};

/// Ensemble parameters shared by every interpolation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationParams {
    pub n: usize,
    pub k: usize,
    pub degrees: DegreeSource,
    pub alpha: f64,
    pub beta: f64,
}

/// Position `(s,t)` on the interpolation path, pin strength and the
/// population feeding the unary weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPoint {
    pub s: usize,
    pub t: f64,
    pub pin_strength: f64,
    pub population: Population,
}

/// One draw of `G*_{T,s,t}`.
#[derive(Clone, Debug)]
pub struct InterpolationSample {
    /// k-ary checks use the family's functions (ids `0..|Ψ|`); every unary
    /// factor has its own function after them; pins come from IP4.
    pub graph: FactorGraph,
    pub reference: Vec<usize>,
    pub pins: PinSet,
    pub s_max: usize,
    pub kary_checks: usize,
    pub unary_checks: usize,
    pub clipped_sockets: u64,
}

/// I1–I4 with the teacher–student reweighting, then IP1–IP4.
///
/// Under SYM and a population with uniform mean, `E[ψ(σ̌)]` is the same
/// constant `ξ` for every factor and neighborhood, so the reweighting
/// leaves the structure alone and tilts each factor's weight choice:
/// k-ary weights by `p(ψ)ψ(σ̌(∂a))`, unary weights by `ψ_b(σ̌(x))`
/// (realised by rejection against `max ψ`).
pub fn interpolation_sample(
    params: &InterpolationParams,
    family: &WeightFamily,
    point: &InterpolationPoint,
    seed: u64,
) -> Result<InterpolationSample> {
    let (n, k, q) = (params.n, params.k, family.q());
    if family.arity() != k {
        return Err(Error::param("k", "differs from the family's arity"));
    }
    if !(0.0..=1.0).contains(&point.t) {
        return Err(Error::param("t", format!("{} outside [0,1]", point.t)));
    }
    if point.population.q() != q {
        return Err(Error::param("population", "alphabet size differs from the family's"));
    }
    point.population.check_mean(MEAN_TOLERANCE)?;
    let tree = SeedTree::new(seed);
    let mut rng = tree.child("reference").rng();
    let reference: Vec<usize> = (0..n).map(|_| rng.random_range(0..q)).collect();

    // I1
    let d = match &params.degrees {
        DegreeSource::Sequence(d) => d.clone(),
        DegreeSource::Distribution(dist) => crate::graph::sample_d_partition(n, dist, tree.child("degrees").key()).sequence,
    };
    if d.n() != n {
        return Err(Error::param("degrees", "sequence length differs from n"));
    }
    let layers = s_max(d.total(), k, params.alpha, params.beta);
    if point.s < 1 || point.s > layers {
        return Err(Error::param("s", format!("{} outside [1, s_max = {layers}]", point.s)));
    }
    let mut rng = tree.child("counts").rng();
    let (mut m, mut gamma) = (vec![0usize; layers], vec![0usize; layers]);
    for l in 1..=layers {
        if l < point.s {
            m[l - 1] = poisson(params.beta, &mut rng);
        } else if l == point.s {
            m[l - 1] = poisson(params.beta * point.t, &mut rng);
            gamma[l - 1] = poisson(params.beta * (1.0 - point.t), &mut rng);
        } else {
            gamma[l - 1] = poisson(params.beta, &mut rng);
        }
    }

    // I2
    let mut g = FactorGraph::new(n, q);
    for f in family.functions() {
        g.add_weight(f.clone())?;
    }
    let mut state = SocketState::new(d.degrees());
    let mut kary: Vec<Vec<usize>> = Vec::new();
    let mut unary: Vec<usize> = Vec::new();
    let mut clipped = 0;
    let mut drawn = vec![0u64; n];
    let mut touched = Vec::new();
    for l in 0..layers {
        let requested = m[l] + k * gamma[l];
        if requested == 0 {
            state.apply_round(&[]);
            continue;
        }
        let layer: &SocketSampler = &state.remaining;
        if layer.total() == 0 {
            return Err(Error::SocketExhaustion {
                layer: l + 1,
                requested,
                partial: Box::new(g),
            });
        }
        let mut rng = tree.child("layer").stream(l as u64);
        let mut draw = |rng: &mut _| {
            let x = layer.sample(rng);
            if drawn[x] == 0 {
                touched.push(x);
            }
            drawn[x] += 1;
            x
        };
        for _ in 0..m[l] {
            kary.push((0..k).map(|_| draw(&mut rng)).collect());
        }
        for _ in 0..k * gamma[l] {
            unary.push(draw(&mut rng));
        }
        let increment: Vec<(usize, u64)> = touched.iter().map(|&x| (x, drawn[x])).collect();
        clipped += state.apply_round(&increment);
        for x in touched.drain(..) {
            drawn[x] = 0;
        }
    }

    // I3 and I4, tilted by σ̌
    let mut rng = tree.child("weights").rng();
    let mut local = vec![0usize; k];
    for nb in &kary {
        for (slot, &x) in local.iter_mut().zip(nb) {
            *slot = reference[x];
        }
        let w = sample_discrete(&family.tilted_probabilities(encode_index(&local, q)), &mut rng);
        g.add_check(nb.clone(), Some(w))?;
    }
    let bound = family.max_value();
    let mut mus = vec![0.0; k * q];
    let mut table = vec![0.0; q];
    for &x in &unary {
        loop {
            let f = &family.functions()[family.sample_index(&mut rng)];
            let i = rng.random_range(0..k);
            for j in (0..k).filter(|&j| j != i) {
                point.population.sample_into(&mut rng, &mut mus[j * q..(j + 1) * q]);
            }
            contract(f, &mus, Some(i), &mut table);
            if rng.random::<f64>() * bound < table[reference[x]] {
                break;
            }
        }
        let id = g.add_weight(WeightFunction::new(q, 1, table.clone())?)?;
        g.add_check(vec![x], Some(id))?;
    }

    // IP3, IP4
    let pins = sample_pin_set(n, point.pin_strength, tree.child("pins").key())?;
    let graph = pin_graph(&g, &pins.set, &reference)?;
    Ok(InterpolationSample {
        graph,
        reference,
        pins,
        s_max: layers,
        kary_checks: kary.len(),
        unary_checks: unary.len(),
        clipped_sockets: clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DegreeDistribution;
    use crate::ldgm::code_weight_family;

    fn params(n: usize) -> InterpolationParams {
        InterpolationParams {
            n,
            k: 3,
            degrees: DegreeSource::Distribution(DegreeDistribution::point(3)),
            alpha: 0.1,
            beta: 0.5,
        }
    }

    fn spread() -> Population {
        Population::from_thetas(vec![0.9, 0.5, 0.2, -0.9, -0.5, -0.2]).unwrap()
    }

    #[test]
    fn forest_endpoint_has_only_unary_factors() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let point = InterpolationPoint {
            s: 1,
            t: 0.0,
            pin_strength: 2.0,
            population: spread(),
        };
        let mut ok = 0;
        for seed in 0..20 {
            let Ok(sample) = interpolation_sample(&params(60), &fam, &point, seed) else {
                continue;
            };
            ok += 1;
            assert_eq!(sample.kary_checks, 0);
            assert!(sample.graph.checks().iter().all(|c| c.neighbors.len() == 1));
            assert_eq!(sample.graph.pins().len(), sample.pins.set.len());
        }
        assert!(ok > 10);
    }

    #[test]
    fn full_endpoint_has_no_unary_factors() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let p = params(60);
        let layers = s_max(180, 3, p.alpha, p.beta);
        let point = InterpolationPoint {
            s: layers,
            t: 1.0,
            pin_strength: 0.0,
            population: spread(),
        };
        let sample = interpolation_sample(&p, &fam, &point, 3).unwrap();
        assert_eq!(sample.unary_checks, 0);
        assert!(sample.graph.pins().is_empty());
        assert!(sample.graph.checks().iter().all(|c| c.neighbors.len() == 3));
    }

    #[test]
    fn unary_tables_stay_in_range() {
        let fam = code_weight_family(3, 0.05).unwrap();
        let point = InterpolationPoint {
            s: 2,
            t: 0.5,
            pin_strength: 0.0,
            population: spread(),
        };
        let sample = interpolation_sample(&params(300), &fam, &point, 1).unwrap();
        for w in &sample.graph.weights()[2..] {
            assert!(w.table().iter().all(|&v| v > 0.0 && v < 2.0));
            assert_eq!(w.arity(), 1);
        }
        assert_eq!(sample.graph.weights().len(), 2 + sample.unary_checks);
    }

    #[test]
    fn factor_counts_follow_the_layer_bookkeeping() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let p = params(400);
        let layers = s_max(1200, 3, p.alpha, p.beta);
        let (s, t) = (layers / 3, 0.4);
        let point = InterpolationPoint {
            s,
            t,
            pin_strength: 0.0,
            population: Population::trivial(2, 1, true),
        };
        let (mut ka, mut un) = (0.0, 0.0);
        let reps = 200;
        for seed in 0..reps {
            let sample = interpolation_sample(&p, &fam, &point, seed).unwrap();
            ka += sample.kary_checks as f64;
            un += sample.unary_checks as f64;
        }
        let want_k = p.beta * (s as f64 - 1.0 + t);
        let want_u = 3.0 * p.beta * (layers as f64 - s as f64 + 1.0 - t);
        let se_k = (want_k / reps as f64).sqrt();
        let se_u = (3.0 * want_u / reps as f64).sqrt();
        assert!((ka / reps as f64 - want_k).abs() < 4.0 * se_k);
        assert!((un / reps as f64 - want_u).abs() < 4.0 * se_u);
    }

    #[test]
    fn invalid_points_are_rejected() {
        let fam = code_weight_family(3, 0.2).unwrap();
        let mut point = InterpolationPoint {
            s: 0,
            t: 0.0,
            pin_strength: 0.0,
            population: spread(),
        };
        assert!(interpolation_sample(&params(30), &fam, &point, 1).is_err());
        point.s = 1;
        point.population = Population::from_thetas(vec![0.5, 0.4]).unwrap();
        assert!(matches!(
            interpolation_sample(&params(30), &fam, &point, 1),
            Err(Error::MeanConstraint { .. })
        ));
    }
}
