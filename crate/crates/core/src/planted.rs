//! Teacher–student sampling, pinning, the posterior oracle behind the
//! Nishimori identity, and Monte Carlo estimates of `H(σ*|G*)/n`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gibbs::{self, DEFAULT_CAP};
use crate::graph::weights_internal::{encode_index, sample_discrete};
use crate::graph::{
    alpha_beta_plan, configuration_model, layered_model, sample_d_partition, DegreeDistribution,
    DegreeSequence, FactorGraph, WeightFamily,
};
use crate::rng::SeedTree;
use crate::stats::Estimate;
use crate::{Error, Result};

/// Where the variable degrees come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DegreeSource {
    /// A random D-partition of `[n]`.
    Distribution(DegreeDistribution),
    /// A fixed degree sequence.
    Sequence(DegreeSequence),
}

/// Unweighted graph generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    /// Configuration model (exact degrees).
    Exact,
    /// `(α,β)`-approximation via the layered model.
    Approximate { alpha: f64, beta: f64 },
}

/// Parameters of the unweighted part of the teacher–student model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub k: usize,
    pub degrees: DegreeSource,
    pub generator: Generator,
}

impl EnsembleParams {
    pub fn exact(n: usize, k: usize, d: DegreeDistribution) -> Self {
        EnsembleParams {
            n,
            k,
            degrees: DegreeSource::Distribution(d),
            generator: Generator::Exact,
        }
    }

    pub fn degree_sequence(&self, seed: SeedTree) -> DegreeSequence {
        match &self.degrees {
            DegreeSource::Sequence(d) => d.clone(),
            DegreeSource::Distribution(d) => sample_d_partition(self.n, d, seed.key()).sequence,
        }
    }

    /// Draws the unweighted graph (TCH2).
    pub fn sample_structure(&self, seed: SeedTree) -> Result<FactorGraph> {
        let d = self.degree_sequence(seed.child("degrees"));
        if d.n() != self.n {
            return Err(Error::param("degrees", "sequence length differs from n"));
        }
        match self.generator {
            Generator::Exact => configuration_model(&d, self.k, seed.child("graph").key()),
            Generator::Approximate { alpha, beta } => {
                let plan = alpha_beta_plan(&d, self.k, alpha, beta, seed.child("plan").key())?;
                Ok(layered_model(&d, &plan.counts, self.k, seed.child("graph").key())?.graph)
            }
        }
    }
}

/// Ground truth together with its teacher-generated graph.
#[derive(Clone, Debug, Serialize)]
pub struct PlantedInstance {
    pub truth: Vec<usize>,
    /// Weighted graph; weight id `i` is the family's function `i`.
    pub graph: FactorGraph,
    /// Index of the family function chosen for every check.
    pub check_functions: Vec<usize>,
    /// Tilted law each check's function was drawn from.
    pub trace: Vec<Vec<f64>>,
    pub params: EnsembleParams,
}

/// Registers the family's functions on `g` (ids `0..|Ψ|`) unless present.
fn attach_family(g: &mut FactorGraph, family: &WeightFamily) -> Result<()> {
    if g.weights().is_empty() {
        for f in family.functions() {
            g.add_weight(f.clone())?;
        }
    }
    Ok(())
}

/// TCH3 on a given unweighted graph: every check draws `ψ` with probability
/// `p(ψ)ψ(σ(∂a)) / Σ_ψ' p(ψ')ψ'(σ(∂a))`.
pub fn plant_weights<R: Rng + ?Sized>(
    structure: &FactorGraph,
    truth: &[usize],
    family: &WeightFamily,
    rng: &mut R,
) -> Result<(FactorGraph, Vec<usize>, Vec<Vec<f64>>)> {
    let q = family.q();
    let mut g = FactorGraph::new(structure.n(), q);
    attach_family(&mut g, family)?;
    let mut chosen = Vec::with_capacity(structure.num_checks());
    let mut trace = Vec::with_capacity(structure.num_checks());
    let mut local = Vec::with_capacity(family.arity());
    for c in structure.checks() {
        if c.neighbors.len() != family.arity() {
            return Err(Error::param("family", "arity differs from the graph's checks"));
        }
        local.clear();
        local.extend(c.neighbors.iter().map(|&x| truth[x]));
        let probs = family.tilted_probabilities(encode_index(&local, q));
        let i = sample_discrete(&probs, rng);
        g.add_check(c.neighbors.clone(), Some(i))?;
        chosen.push(i);
        trace.push(probs);
    }
    for p in structure.pins() {
        g.add_pin(p.variable, p.symbol)?;
    }
    Ok((g, chosen, trace))
}

/// TCH1–TCH3.
pub fn sample_planted(params: &EnsembleParams, family: &WeightFamily, seed: u64) -> Result<PlantedInstance> {
    let tree = SeedTree::new(seed);
    let q = family.q();
    if params.k != family.arity() {
        return Err(Error::param("k", "differs from the family's arity"));
    }
    let mut rng = tree.child("truth").rng();
    let truth: Vec<usize> = (0..params.n).map(|_| rng.random_range(0..q)).collect();
    let structure = params.sample_structure(tree.child("structure"))?;
    let mut rng = tree.child("weights").rng();
    let (graph, check_functions, trace) = plant_weights(&structure, &truth, family, &mut rng)?;
    Ok(PlantedInstance {
        truth,
        graph,
        check_functions,
        trace,
        params: params.clone(),
    })
}

/// Random pin set of the pinning lemma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinSet {
    pub t: f64,
    /// `θ ~ U[0,T]`, shared by all variables.
    pub theta: f64,
    /// `U`: each variable independently with probability `θ/n`.
    pub set: Vec<usize>,
}

/// Draws `θ ~ U[0,T]` then includes each `x ∈ [n]` with probability `θ/n`.
pub fn sample_pin_set(n: usize, t: f64, seed: u64) -> Result<PinSet> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("T", format!("{t} must be non-negative")));
    }
    let mut rng = SeedTree::new(seed).child("pins").rng();
    let theta = if t > 0.0 { rng.random::<f64>() * t } else { 0.0 };
    let p = if n > 0 { (theta / n as f64).min(1.0) } else { 0.0 };
    let set = (0..n).filter(|_| rng.random::<f64>() < p).collect();
    Ok(PinSet { t, theta, set })
}

/// `G_{U,σ̌}`: `G` plus an indicator pin `1{σ(x) = σ̌(x)}` for every `x ∈ U`.
pub fn pin_graph(g: &FactorGraph, set: &[usize], reference: &[usize]) -> Result<FactorGraph> {
    if reference.len() != g.n() {
        return Err(Error::param("reference", "length differs from n"));
    }
    let mut out = g.clone();
    for &x in set {
        out.add_pin(x, reference[x])?;
    }
    Ok(out)
}

/// Exact Bayes posterior `P[σ* = σ | G* = G]` over `Ω^n` for a planted
/// instance, computed from the TCH3 likelihood of the recorded function
/// choices (not from `ψ_G`). Pins present on the graph are treated as
/// copies of the truth. Index order matches [`gibbs::gibbs_distribution`].
pub fn posterior_distribution(inst: &PlantedInstance, family: &WeightFamily, cap: usize) -> Result<Vec<f64>> {
    let g = &inst.graph;
    let (n, q) = (g.n(), g.q());
    if n > cap {
        return Err(Error::EnumerationCap { size: n, cap });
    }
    let size = q.pow(n as u32);
    let k = family.arity();
    let mut log_post = vec![0.0; size];
    let mut sigma = vec![0usize; n];
    let mut local = vec![0usize; k];
    for (i, lp) in log_post.iter_mut().enumerate() {
        let mut r = i;
        for s in sigma.iter_mut().rev() {
            *s = r % q;
            r /= q;
        }
        if g.pins().iter().any(|p| sigma[p.variable] != p.symbol) {
            *lp = f64::NEG_INFINITY;
            continue;
        }
        // uniform prior on σ*; the structure law does not depend on σ*
        let mut acc = 0.0;
        for (c, &f) in g.checks().iter().zip(&inst.check_functions) {
            for (slot, &x) in local.iter_mut().zip(&c.neighbors) {
                *slot = sigma[x];
            }
            acc += family.tilted_probabilities(encode_index(&local, q))[f].ln();
        }
        *lp = acc;
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_post.iter().map(|l| (l - max).exp()).sum();
    Ok(log_post.into_iter().map(|l| (l - max).exp() / total).collect())
}

pub(crate) fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// How [`conditional_entropy_mc`] evaluates the inner entropy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum InnerMode {
    /// Exact entropy of `μ_G` for the sampled weighted graph.
    #[default]
    Gibbs,
    /// Code family only: exact average of that entropy over the channel
    /// given the sampled structure, `n ln 2 − I(X;Y | structure)`.
    ChannelAverage { eta: f64 },
}

/// Settings of [`nishimori_gap`] and [`conditional_entropy_mc`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedExperiment {
    pub params: EnsembleParams,
    /// Pin strength `T`; `0` disables pinning.
    pub pin_strength: f64,
    pub samples: usize,
    pub cap: usize,
    pub inner: InnerMode,
}

impl PlantedExperiment {
    pub fn new(params: EnsembleParams, samples: usize) -> Self {
        PlantedExperiment {
            params,
            pin_strength: 0.0,
            samples,
            cap: DEFAULT_CAP,
            inner: InnerMode::Gibbs,
        }
    }

    /// Planted instance `i`, pinned to its own truth when `T > 0`.
    pub fn instance(&self, family: &WeightFamily, tree: SeedTree, i: u64) -> Result<PlantedInstance> {
        let node = tree.index(i);
        let mut inst = sample_planted(&self.params, family, node.child("planted").key())?;
        if self.pin_strength > 0.0 {
            let pins = sample_pin_set(self.params.n, self.pin_strength, node.child("pin-set").key())?;
            inst.graph = pin_graph(&inst.graph, &pins.set, &inst.truth)?;
        }
        Ok(inst)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NishimoriReport {
    /// `max_G ‖P[σ*=·|G] − μ_G‖_TV` over the sampled graphs.
    pub max_gap: f64,
    pub mean_gap: f64,
    pub graphs: usize,
}

/// Largest TV distance between the exact Bayes posterior and the Gibbs
/// measure over sampled planted graphs.
pub fn nishimori_gap(exp: &PlantedExperiment, family: &WeightFamily, seed: u64) -> Result<NishimoriReport> {
    if exp.params.n > exp.cap {
        return Err(Error::EnumerationCap {
            size: exp.params.n,
            cap: exp.cap,
        });
    }
    let tree = SeedTree::new(seed).child("nishimori");
    let gaps: Vec<f64> = (0..exp.samples as u64)
        .into_par_iter()
        .map(|i| {
            let inst = exp.instance(family, tree, i)?;
            let post = posterior_distribution(&inst, family, exp.cap)?;
            let gibbs = gibbs::gibbs_distribution(&inst.graph, exp.cap)?;
            Ok(tv(&post, &gibbs))
        })
        .collect::<Result<_>>()?;
    Ok(NishimoriReport {
        max_gap: gaps.iter().copied().fold(0.0, f64::max),
        mean_gap: gaps.iter().sum::<f64>() / gaps.len().max(1) as f64,
        graphs: gaps.len(),
    })
}

/// Monte Carlo estimate of `H(σ*|G*)/n`: outer average over planted
/// graphs, exact entropy of `μ_G` inside (the Nishimori identity makes the
/// Gibbs entropy the conditional entropy).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropyEstimate {
    pub h_per_n: Estimate,
    /// `ln q − H/n`.
    pub mi_per_n: f64,
}

pub fn conditional_entropy_mc(exp: &PlantedExperiment, family: &WeightFamily, seed: u64) -> Result<EntropyEstimate> {
    let tree = SeedTree::new(seed).child("conditional-entropy");
    let n = exp.params.n as f64;
    if let InnerMode::ChannelAverage { eta } = exp.inner {
        let code = crate::ldgm::code_weight_family(family.arity(), eta)?;
        if code.functions() != family.functions() || exp.pin_strength > 0.0 {
            return Err(Error::param("inner", "channel averaging needs the unpinned code family"));
        }
        if exp.params.n > exp.cap {
            return Err(Error::EnumerationCap {
                size: exp.params.n,
                cap: exp.cap,
            });
        }
    }
    let values: Vec<f64> = (0..exp.samples as u64)
        .into_par_iter()
        .map(|i| {
            let inst = exp.instance(family, tree, i)?;
            match exp.inner {
                InnerMode::Gibbs => Ok(gibbs::gibbs_marginals(&inst.graph, exp.cap)?.entropy / n),
                InnerMode::ChannelAverage { eta } => {
                    let structure = inst.graph.unweighted();
                    if structure.num_checks() > exp.cap {
                        return Err(Error::EnumerationCap {
                            size: structure.num_checks(),
                            cap: exp.cap,
                        });
                    }
                    Ok(2f64.ln() - crate::ldgm::code_mi_total(&structure, eta) / n)
                }
            }
        })
        .collect::<Result<_>>()?;
    let h = Estimate::from_samples(&values);
    Ok(EntropyEstimate {
        h_per_n: h,
        mi_per_n: (family.q() as f64).ln() - h.mean,
    })
}
