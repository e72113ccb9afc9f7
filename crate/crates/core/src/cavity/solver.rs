use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functional::{b_functional, channel_term, contract};
use super::population::{Population, SeedKind};
use crate::graph::weights_internal::sample_discrete;
use crate::graph::{DegreeDistribution, WeightFamily};
use crate::ldgm::{check_pos_general, code_weight_family, l_functional, ChannelSpec};
use crate::rng::SeedTree;
use crate::stats::{ks_distance, Estimate};
use crate::{Error, Result};

/// Clipping applied to `θ` before `artanh`.
pub const THETA_CLIP: f64 = 1.0 - 1e-12;

/// What population dynamics iterates and which functional it maximises.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CavityModel {
    /// Code form: `θ` populations, the `J`-form update and `𝓛`.
    Code { k: usize, eta: f64 },
    /// General form: measure populations, the tilted update and `𝓑`.
    Family(WeightFamily),
}

impl CavityModel {
    pub fn k(&self) -> usize {
        match self {
            CavityModel::Code { k, .. } => *k,
            CavityModel::Family(f) => f.arity(),
        }
    }

    pub fn q(&self) -> usize {
        match self {
            CavityModel::Code { .. } => 2,
            CavityModel::Family(f) => f.q(),
        }
    }

    fn theta_form(&self) -> bool {
        matches!(self, CavityModel::Code { .. })
    }

    /// `𝓛(k,D,η;π)` or `𝓑(D,π)`.
    pub fn objective(&self, d: &DegreeDistribution, pop: &Population, mc_samples: usize, seed: u64) -> Result<Estimate> {
        match self {
            CavityModel::Code { k, eta } => Ok(l_functional(*k, d, *eta, pop, mc_samples, seed)?.value),
            CavityModel::Family(f) => Ok(b_functional(d, f, pop, mc_samples, seed)?.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Population size `N`.
    pub population: usize,
    /// Iteration cap per restart.
    pub iterations: usize,
    /// Fraction of members carried over unchanged per iteration.
    pub damping: f64,
    /// Restarts per mesh seed.
    pub restarts: usize,
    pub mesh: Vec<SeedKind>,
    /// KS distance between successive populations counted as converged.
    pub tolerance: f64,
    /// Consecutive converged iterations required.
    pub patience: usize,
    /// Samples per functional evaluation.
    pub mc_samples: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            population: 10_000,
            iterations: 100,
            damping: 0.0,
            restarts: 1,
            mesh: vec![SeedKind::Trivial, SeedKind::NearFrozen, SeedKind::UniformSpread],
            tolerance: 5e-3,
            patience: 10,
            mc_samples: 100_000,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::param("population", "needs at least 2 members"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::param("damping", "must lie in [0,1)"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if self.restarts == 0 || self.mesh.is_empty() || self.mc_samples == 0 {
            return Err(Error::param("restarts", "need at least one restart, mesh seed and sample"));
        }
        Ok(())
    }
}

/// Result of one population-dynamics update.
#[derive(Clone, Debug)]
pub struct PdStep {
    pub population: Population,
    /// `E[γ] = 0`: nothing to recurse on, population returned unchanged.
    pub stalled: bool,
}

/// One population-dynamics update.
///
/// Code form: `θ′ = tanh(Σ_{a≤γ̂} artanh(J_a ∏_{j<k} θ_{a,j}))` with `γ̂`
/// from the size-biased residual law. General form: messages
/// `m_a(σ) = Σ_{τ_h=σ} ψ_a(τ)∏_{j≠h}μ_{a,j}(τ_j)` with `ψ_a ~ p`, combined
/// into `μ′ ∝ ∏_a m_a` and resampled with weight `Σ_σ∏_a m_a(σ)/ξ^γ̂` (the
/// planted tilt). Both outputs are symmetrized. Member `i` draws from its
/// own stream, so the result does not depend on the thread count.
pub fn pd_step(
    pop: &Population,
    model: &CavityModel,
    d: &DegreeDistribution,
    damping: f64,
    seed: u64,
) -> Result<PdStep> {
    let Some(dhat) = d.size_biased() else {
        return Ok(PdStep {
            population: pop.clone(),
            stalled: true,
        });
    };
    let (q, k) = (model.q(), model.k());
    if pop.q() != q || pop.is_theta_form() != model.theta_form() {
        return Err(Error::param("population", "representation does not match the model"));
    }
    let tree = SeedTree::new(seed);
    let slots = pop.len().div_ceil(q);
    let members = tree.child("members");
    let population = match model {
        CavityModel::Code { eta, .. } => {
            let channel = ChannelSpec::new(*eta)?;
            let fresh: Vec<f64> = (0..slots as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = members.stream(i);
                    let gamma = dhat.sample(&mut rng);
                    let mut field = 0.0;
                    for _ in 0..gamma {
                        let mut x = channel.sample_j(&mut rng);
                        for _ in 1..k {
                            x *= pop.sample_theta(&mut rng).clamp(-THETA_CLIP, THETA_CLIP);
                        }
                        field += x.atanh();
                    }
                    field.tanh()
                })
                .collect();
            let old = pop.thetas().unwrap();
            let half = keep_slots(fresh, old, slots, 1, damping, tree);
            Population::from_thetas(half)?.symmetrized()
        }
        CavityModel::Family(family) => {
            let xi = family.xi();
            let draws: Vec<(Vec<f64>, f64)> = (0..slots as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = members.stream(i);
                    let gamma = dhat.sample(&mut rng);
                    let mut prod = vec![1.0; q];
                    let mut mus = vec![0.0; k * q];
                    let mut m = vec![0.0; q];
                    for _ in 0..gamma {
                        let f = &family.functions()[family.sample_index(&mut rng)];
                        let h = rng.random_range(0..k);
                        for j in (0..k).filter(|&j| j != h) {
                            pop.sample_into(&mut rng, &mut mus[j * q..(j + 1) * q]);
                        }
                        contract(f, &mus, Some(h), &mut m);
                        prod.iter_mut().zip(&m).for_each(|(p, x)| *p *= x);
                    }
                    let z: f64 = prod.iter().sum();
                    (prod.iter().map(|p| p / z).collect(), z / xi.powi(gamma as i32))
                })
                .collect();
            let weights: Vec<f64> = draws.iter().map(|(_, w)| *w).collect();
            let total: f64 = weights.iter().sum();
            let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let mut rng = tree.child("resample").rng();
            let fresh: Vec<f64> = (0..slots)
                .flat_map(|_| draws[sample_discrete(&probs, &mut rng)].0.clone())
                .collect();
            let old = pop.to_measures();
            let old_rows = if pop.is_theta_form() { Vec::new() } else { old_data(&old) };
            let rows = keep_slots(fresh, &old_rows, slots, q, damping, tree);
            Population::from_measures(q, rows)?.symmetrized()
        }
    };
    Ok(PdStep {
        population,
        stalled: false,
    })
}

fn old_data(p: &Population) -> Vec<f64> {
    let q = p.q();
    let mut out = vec![0.0; p.len() * q];
    for i in 0..p.len() {
        p.measure_into(i, &mut out[i * q..(i + 1) * q]);
    }
    out
}

/// Damping: slot `i` keeps the previous generator member `i` with
/// probability `damping`. Previous populations are laid out as blocks of
/// `slots` members, so their first block holds the generators.
fn keep_slots(mut fresh: Vec<f64>, old: &[f64], slots: usize, width: usize, damping: f64, tree: SeedTree) -> Vec<f64> {
    if damping > 0.0 && old.len() >= slots * width {
        let mut rng = tree.child("damping").rng();
        for i in 0..slots {
            if rng.random::<f64>() < damping {
                fresh[i * width..(i + 1) * width].copy_from_slice(&old[i * width..(i + 1) * width]);
            }
        }
    }
    fresh
}

/// Per-restart record of the sup search.
#[derive(Clone, Debug, Serialize)]
pub struct RestartDiagnostics {
    pub seed: SeedKind,
    pub restart: usize,
    pub converged: bool,
    pub iterations: usize,
    /// KS distance between successive populations.
    pub ks_trace: Vec<f64>,
    /// Objective at the mesh seed and at the final population.
    pub objective_trace: Vec<Estimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupResult {
    pub value: Estimate,
    #[serde(skip)]
    pub population: Population,
    pub argmax_seed: SeedKind,
    pub diagnostics: Vec<RestartDiagnostics>,
}

impl SupResult {
    pub fn all_converged(&self) -> bool {
        self.diagnostics.iter().all(|d| d.converged)
    }
}

/// Best value of the model's functional over mesh seeds and the fixed
/// points population dynamics reaches from them.
pub fn solve_sup(model: &CavityModel, d: &DegreeDistribution, settings: &SolverSettings, seed: u64) -> Result<SupResult> {
    settings.validate()?;
    let tree = SeedTree::new(seed).child("solve-sup");
    let mut best: Option<(Estimate, Population, SeedKind)> = None;
    let mut diagnostics = Vec::new();
    for &kind in &settings.mesh {
        for r in 0..settings.restarts {
            let node = tree.child(&format!("{kind:?}")).index(r as u64);
            let mut pop = Population::seed(kind, model.q(), settings.population, model.theta_form(), &mut node.rng());
            let start = model.objective(d, &pop, settings.mc_samples, node.child("eval-start").key())?;
            let mut ks_trace = Vec::new();
            let mut streak = 0;
            let mut converged = false;
            let mut iterations = 0;
            for it in 0..settings.iterations {
                let step = pd_step(&pop, model, d, settings.damping, node.child("pd").index(it as u64).key())?;
                iterations = it + 1;
                if step.stalled {
                    converged = true;
                    break;
                }
                let ks = ks_distance(&pop.key_coordinates(), &step.population.key_coordinates());
                ks_trace.push(ks);
                pop = step.population;
                streak = if ks < settings.tolerance { streak + 1 } else { 0 };
                if streak >= settings.patience {
                    converged = true;
                    break;
                }
            }
            let end = model.objective(d, &pop, settings.mc_samples, node.child("eval-end").key())?;
            for (value, candidate) in [(start, None), (end, Some(&pop))] {
                if best.as_ref().is_none_or(|(b, _, _)| value.mean > b.mean) {
                    let p = match candidate {
                        Some(p) => p.clone(),
                        None => Population::seed(kind, model.q(), settings.population, model.theta_form(), &mut node.rng()),
                    };
                    best = Some((value, p, kind));
                }
            }
            diagnostics.push(RestartDiagnostics {
                seed: kind,
                restart: r,
                converged,
                iterations,
                ks_trace,
                objective_trace: vec![start, end],
            });
        }
    }
    let (value, population, argmax_seed) = best.expect("mesh is non-empty");
    Ok(SupResult {
        value,
        population,
        argmax_seed,
        diagnostics,
    })
}

/// `−sup 𝓑 + ln|Ω| + channel term`.
#[derive(Clone, Debug, Serialize)]
pub struct GeneralPrediction {
    pub mi_per_n: Estimate,
    pub sup: SupResult,
    pub channel: f64,
    /// Set when the POS spot check at the argmax fails.
    pub pos_warning: Option<String>,
}

pub fn mi_predict_general(
    d: &DegreeDistribution,
    family: &WeightFamily,
    settings: &SolverSettings,
    seed: u64,
) -> Result<GeneralPrediction> {
    let deviation = family.sym_deviation();
    if deviation > 1e-9 {
        return Err(Error::SymViolation { deviation });
    }
    let model = CavityModel::Family(family.clone());
    let sup = solve_sup(&model, d, settings, seed)?;
    let channel = channel_term(d, family);
    let spread = Population::seed(
        SeedKind::UniformSpread,
        family.q(),
        settings.population,
        false,
        &mut SeedTree::new(seed).child("pos-partner").rng(),
    );
    let pos = check_pos_general(family, &sup.population, &spread, settings.mc_samples, seed)?;
    let pos_warning = (pos.mean < -3.0 * pos.stderr)
        .then(|| format!("POS spot check {:.3e} ± {:.1e} is negative", pos.mean, pos.stderr));
    Ok(GeneralPrediction {
        mi_per_n: sup.value.combine(-1.0, Estimate::exact(0.0), 0.0).shift((family.q() as f64).ln() + channel),
        sup,
        channel,
        pos_warning,
    })
}

/// Code family as a [`CavityModel::Family`].
pub fn code_family_model(k: usize, eta: f64) -> Result<CavityModel> {
    Ok(CavityModel::Family(code_weight_family(k, eta)?))
}
