use ldgm_mi::gibbs::{gibbs_distribution, partition_function, symmetry_metric, TupleMode, DEFAULT_CAP};
use ldgm_mi::graph::{DegreeDistribution, FactorGraph, WeightFamily};
use ldgm_mi::ldgm::code_weight_family;
use ldgm_mi::planted::{pin_graph, plant_weights, EnsembleParams, PlantedExperiment};
use ldgm_mi::rng::SeedTree;
use ldgm_mi::stats::{linear_fit, Estimate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const N: usize = 3;
const U: [usize; 1] = [0];

fn structure() -> FactorGraph {
    let mut g = FactorGraph::new(N, 2);
    g.add_check(vec![0, 1], None).unwrap();
    g.add_check(vec![1, 2], None).unwrap();
    g
}

fn decode(i: usize) -> Vec<usize> {
    (0..N).map(|x| (i >> (N - 1 - x)) & 1).collect()
}

fn gibbs_draw(g: &FactorGraph, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let p = gibbs_distribution(g, DEFAULT_CAP).unwrap();
    decode(WeightedIndex::new(&p).unwrap().sample(rng))
}

fn uniform(rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..N).map(|_| rng.random_range(0..2)).collect()
}

fn planted(truth: &[usize], family: &WeightFamily, rng: &mut ChaCha8Rng) -> (FactorGraph, Vec<usize>) {
    let (g, chosen, _) = plant_weights(&structure(), truth, family, rng).unwrap();
    (g, chosen)
}

/// Cell of `(σ, ψ_1, ψ_2, pinned symbol)`.
fn cell(sigma: &[usize], chosen: &[usize], g: &FactorGraph) -> usize {
    let s = sigma.iter().fold(0, |acc, &b| 2 * acc + b);
    let pin = g.pins()[0].symbol;
    ((s * 2 + chosen[0]) * 2 + chosen[1]) * 2 + pin
}

fn recipe(which: u8, family: &WeightFamily, rng: &mut ChaCha8Rng) -> usize {
    match which {
        1 => {
            let truth = uniform(rng);
            let (g, chosen) = planted(&truth, family, rng);
            let g = pin_graph(&g, &U, &truth).unwrap();
            cell(&truth, &chosen, &g)
        }
        2 => {
            let truth = uniform(rng);
            let (g, chosen) = planted(&truth, family, rng);
            let sigma = gibbs_draw(&g, rng);
            let g = pin_graph(&g, &U, &sigma).unwrap();
            cell(&sigma, &chosen, &g)
        }
        3 => {
            let truth = uniform(rng);
            let (g, chosen) = planted(&truth, family, rng);
            let g = pin_graph(&g, &U, &truth).unwrap();
            let sigma = gibbs_draw(&g, rng);
            cell(&sigma, &chosen, &g)
        }
        _ => {
            let truth = uniform(rng);
            let (g, chosen) = planted(&truth, family, rng);
            let first = gibbs_draw(&g, rng);
            let g = pin_graph(&g, &U, &first).unwrap();
            let sigma = gibbs_draw(&g, rng);
            cell(&sigma, &chosen, &g)
        }
    }
}

/// `P(σ,ψ_1,ψ_2)` of the teacher: `2^{−n}∏_a p(ψ_a)ψ_a(σ(∂a))/ξ`, with the
/// pin equal to `σ_0`.
fn oracle(eta: f64) -> Vec<f64> {
    let r = 1.0 - 2.0 * eta;
    let psi = |f: usize, a: usize, b: usize| {
        let sign = if f == 0 { 1.0 } else { -1.0 };
        let spins = (1.0 - 2.0 * a as f64) * (1.0 - 2.0 * b as f64);
        1.0 + sign * r * spins
    };
    let mut p = vec![0.0; 64];
    for s in 0..8 {
        let sigma = decode(s);
        for f1 in 0..2 {
            for f2 in 0..2 {
                let w = 0.125 * 0.5 * psi(f1, sigma[0], sigma[1]) * 0.5 * psi(f2, sigma[1], sigma[2]);
                p[((s * 2 + f1) * 2 + f2) * 2 + sigma[0]] = w;
            }
        }
    }
    p
}

#[test]
fn pinned_sampling_recipes_share_one_law() {
    let eta = 0.15;
    let family = code_weight_family(2, eta).unwrap();
    let expected = oracle(eta);
    assert!((expected.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let samples = 100_000;
    for which in 1..=4u8 {
        let mut rng = SeedTree::new(2024).child("recipe").stream(which as u64);
        let mut counts = vec![0u64; 64];
        for _ in 0..samples {
            counts[recipe(which, &family, &mut rng)] += 1;
        }
        let mut stat = 0.0;
        let mut cells = 0;
        for (c, p) in counts.iter().zip(&expected) {
            if *p == 0.0 {
                assert_eq!(*c, 0, "recipe {which} hit an impossible cell");
                continue;
            }
            let e = p * samples as f64;
            stat += (*c as f64 - e).powi(2) / e;
            cells += 1;
        }
        let pval = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
        println!("recipe {which}: chi2 {stat:.2} over {cells} cells, p = {pval:.3}");
        assert!(pval > 0.01, "recipe {which}: p = {pval}");
    }
}

fn mean_log_z(exp: &PlantedExperiment, family: &WeightFamily, seed: u64) -> Vec<f64> {
    let tree = SeedTree::new(seed);
    (0..exp.samples as u64)
        .map(|i| {
            let inst = exp.instance(family, tree, i).unwrap();
            partition_function(&inst.graph, DEFAULT_CAP).unwrap().log_z
        })
        .collect()
}

#[test]
fn pinning_cost_grows_at_most_linearly() {
    // under the Nishimori property each pin costs E[H(marginal)] ≤ ln 2 on
    // average, and E|U| = T/2
    let family = code_weight_family(3, 0.1).unwrap();
    let params = EnsembleParams::exact(12, 3, DegreeDistribution::point(3));
    let base = PlantedExperiment::new(params, 400);
    let free = mean_log_z(&base, &family, 9);
    let (mut ts, mut gaps, mut errs) = (Vec::new(), Vec::new(), Vec::new());
    for t in [0.0, 2.0, 4.0, 8.0] {
        let mut exp = base.clone();
        exp.pin_strength = t;
        let pinned = mean_log_z(&exp, &family, 9);
        let diff: Vec<f64> = pinned.iter().zip(&free).map(|(p, f)| p - f).collect();
        assert!(diff.iter().all(|&d| d <= 1e-12), "pinning cannot increase Z");
        let e = Estimate::from_samples(&diff);
        println!("T={t}: E[logZ(G_T) - logZ(G)] = {:.4} ± {:.4}", e.mean, e.stderr);
        assert!(e.mean.abs() <= 0.5 * t * 2f64.ln() + 3.0 * e.stderr);
        ts.push(t);
        gaps.push(e.mean);
        errs.push(e.stderr.max(1e-12));
    }
    assert_eq!(gaps[0], 0.0);
    let fit = linear_fit(&ts, &gaps, Some(&errs));
    println!("cost per unit T: {:.4} ± {:.4}", fit.slope, fit.slope_stderr);
    assert!(fit.slope <= 0.0 && fit.slope >= -0.5 * 2f64.ln() - 3.0 * fit.slope_stderr);
}

#[test]
fn pinning_makes_the_measure_more_symmetric() {
    let family = code_weight_family(2, 0.05).unwrap();
    let params = EnsembleParams::exact(8, 2, DegreeDistribution::point(2));
    let mut means = Vec::new();
    for t in [0.0, 4.0, 8.0] {
        let mut exp = PlantedExperiment::new(params.clone(), 200);
        exp.pin_strength = t;
        let tree = SeedTree::new(31);
        let values: Vec<f64> = (0..exp.samples as u64)
            .map(|i| {
                let g = exp.instance(&family, tree, i).unwrap().graph;
                symmetry_metric(&g, 2, TupleMode::Exact, DEFAULT_CAP).unwrap()
            })
            .collect();
        let e = Estimate::from_samples(&values);
        println!("T={t}: symmetry metric {:.4} ± {:.4}", e.mean, e.stderr);
        means.push(e);
    }
    for w in means.windows(2) {
        let pooled = w[0].stderr.hypot(w[1].stderr);
        assert!(w[1].mean < w[0].mean + pooled, "{:?}", means);
    }
    assert!(means[2].mean < means[0].mean - 3.0 * means[0].stderr.hypot(means[2].stderr));
}
