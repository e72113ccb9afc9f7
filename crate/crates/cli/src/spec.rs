use std::collections::BTreeMap;

use anyhow::{bail, ensure, Context, Result};
use ldgm_mi::cavity::SolverSettings;
use ldgm_mi::graph::{DegreeDistribution, WeightFamily, WeightFunction};
use ldgm_mi::ldgm::code_weight_family;
use ldgm_mi::planted::{DegreeSource, EnsembleParams, Generator};
use serde::{Deserialize, Serialize};

/// Inline weight tables, row-major with the first coordinate most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineFamily {
    pub q: usize,
    pub tables: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    Named(String),
    Inline(InlineFamily),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Exact,
    Approximate,
}

fn default_alpha() -> f64 {
    0.01
}

fn default_beta() -> f64 {
    0.1
}

fn default_samples() -> usize {
    100
}

fn default_generator() -> GeneratorKind {
    GeneratorKind::Exact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "D")]
    pub degrees: BTreeMap<String, f64>,
    pub family: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(rename = "T", default)]
    pub pin_strength: f64,
    #[serde(default)]
    pub seed: u64,
    /// Outer Monte Carlo samples for the planted-ensemble verbs.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_generator")]
    pub generator: GeneratorKind,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl EnsembleSpec {
    pub fn degree_distribution(&self) -> Result<DegreeDistribution> {
        let mass = self
            .degrees
            .iter()
            .map(|(d, p)| {
                let d: usize = d.trim().parse().with_context(|| format!("D: degree key `{d}` is not an integer"))?;
                Ok((d, *p))
            })
            .collect::<Result<Vec<_>>>()?;
        DegreeDistribution::new(mass).context("D")
    }

    pub fn is_code(&self) -> bool {
        matches!(&self.family, FamilySpec::Named(name) if name == "ldgm")
    }

    /// The channel parameter of the `ldgm` family.
    pub fn code_eta(&self) -> Result<f64> {
        ensure!(self.is_code(), "family: this verb needs the `ldgm` family");
        self.eta.context("eta: required by the `ldgm` family")
    }

    pub fn weight_family(&self) -> Result<WeightFamily> {
        match &self.family {
            FamilySpec::Named(_) => Ok(code_weight_family(self.k, self.code_eta()?)?),
            FamilySpec::Inline(f) => {
                let functions = f
                    .tables
                    .iter()
                    .map(|t| WeightFunction::new(f.q, self.k, t.clone()))
                    .collect::<ldgm_mi::Result<Vec<_>>>()
                    .context("family.tables")?;
                let family = match &f.prior {
                    Some(p) => WeightFamily::new(functions, p.clone()),
                    None => WeightFamily::uniform(functions),
                };
                family.context("family")
            }
        }
    }

    pub fn ensemble(&self) -> Result<EnsembleParams> {
        let generator = match self.generator {
            GeneratorKind::Exact => Generator::Exact,
            GeneratorKind::Approximate => Generator::Approximate {
                alpha: self.alpha,
                beta: self.beta,
            },
        };
        Ok(EnsembleParams {
            n: self.n,
            k: self.k,
            degrees: DegreeSource::Distribution(self.degree_distribution()?),
            generator,
        })
    }
}

/// Parses and validates a JSON spec, filling defaults.
pub fn parse_spec(text: &str) -> Result<EnsembleSpec> {
    let spec: EnsembleSpec = serde_json::from_str(text).context("spec")?;
    ensure!(spec.n >= 1, "n: must be at least 1");
    ensure!(spec.k >= 1, "k: must be at least 1");
    match &spec.family {
        FamilySpec::Named(name) if name == "ldgm" => {
            let eta = spec.eta.context("eta: required by the `ldgm` family")?;
            ensure!(eta > 0.0 && eta < 1.0, "eta: {eta} is outside (0,1)");
        }
        FamilySpec::Named(name) => bail!("family: unknown family `{name}`"),
        FamilySpec::Inline(_) => ensure!(spec.eta.is_none(), "eta: only meaningful for the `ldgm` family"),
    }
    let total: f64 = spec.degrees.values().sum();
    ensure!((total - 1.0).abs() <= 1e-9, "D: probabilities sum to {total}, not 1");
    spec.degree_distribution()?;
    ensure!(spec.alpha > 0.0 && spec.alpha < 1.0, "alpha: {} is outside (0,1)", spec.alpha);
    ensure!(spec.beta > 0.0, "beta: must be positive");
    ensure!(spec.pin_strength >= 0.0, "T: must be non-negative");
    ensure!(spec.samples >= 1, "samples: must be at least 1");
    spec.solver.validate().context("solver")?;
    spec.weight_family()?;
    Ok(spec)
}
