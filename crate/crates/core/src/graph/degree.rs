use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SeedTree;
use crate::{Error, Result};

/// A finitely supported degree distribution `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    /// `(degree, probability)` pairs, sorted by degree, zero masses dropped.
    mass: Vec<(usize, f64)>,
    mean: f64,
}

impl DegreeDistribution {
    pub fn new(mass: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (d, p) in mass {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("mass {p} at degree {d}")));
            }
            match entries.iter_mut().find(|(e, _)| *e == d) {
                Some(e) => e.1 += p,
                None => entries.push((d, p)),
            }
        }
        entries.retain(|&(_, p)| p > 0.0);
        entries.sort_by_key(|&(d, _)| d);
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "degree probabilities sum to {total}, not 1"
            )));
        }
        let mean = entries.iter().map(|&(d, p)| d as f64 * p).sum();
        Ok(DegreeDistribution {
            mass: entries,
            mean,
        })
    }

    /// Point mass `δ_d`.
    pub fn point(d: usize) -> Self {
        DegreeDistribution {
            mass: vec![(d, 1.0)],
            mean: d as f64,
        }
    }

    pub fn mass(&self) -> &[(usize, f64)] {
        &self.mass
    }

    pub fn prob(&self, d: usize) -> f64 {
        self.mass.iter().find(|&&(e, _)| e == d).map_or(0.0, |&(_, p)| p)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_degree(&self) -> usize {
        self.mass.last().map_or(0, |&(d, _)| d)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(d, p) in &self.mass {
            acc += p;
            if u < acc {
                return d;
            }
        }
        self.max_degree()
    }

    /// Size-biased residual law `D̂(ℓ−1) = ℓ·D(ℓ)/E[γ]`; `None` when `E[γ] = 0`.
    pub fn size_biased(&self) -> Option<DegreeDistribution> {
        if self.mean <= 0.0 {
            return None;
        }
        let mass = self
            .mass
            .iter()
            .filter(|&&(d, _)| d > 0)
            .map(|&(d, p)| (d - 1, d as f64 * p / self.mean));
        DegreeDistribution::new(mass.collect::<Vec<_>>()).ok()
    }
}

/// Variable degrees `d: [n] → ℕ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequence {
    degrees: Vec<usize>,
}

impl DegreeSequence {
    pub fn new(degrees: Vec<usize>) -> Self {
        DegreeSequence { degrees }
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn total(&self) -> u64 {
        self.degrees.iter().map(|&d| d as u64).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }
}

/// Outcome of [`sample_d_partition`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DPartition {
    pub sequence: DegreeSequence,
    /// Class sizes `(ℓ, |V_ℓ|)` actually used.
    pub class_sizes: Vec<(usize, usize)>,
    /// True when some `n·D(ℓ)` was not integral and largest-remainder
    /// rounding was applied.
    pub rounded: bool,
}

/// Uniformly random assignment of degrees to `[n]` with `|V_ℓ| = n·D(ℓ)`.
///
/// Non-integral class sizes are rounded by largest remainder so that they
/// sum to `n`; ties go to the smaller degree. The rounding is reported in
/// [`DPartition::rounded`].
pub fn sample_d_partition(n: usize, dist: &DegreeDistribution, seed: u64) -> DPartition {
    let targets: Vec<f64> = dist.mass.iter().map(|&(_, p)| p * n as f64).collect();
    let mut sizes: Vec<usize> = targets.iter().map(|t| (t + 1e-9).floor() as usize).collect();
    let rounded = targets
        .iter()
        .zip(&sizes)
        .any(|(t, &s)| (t - s as f64).abs() > 1e-9);
    let assigned: usize = sizes.iter().sum();
    if assigned < n {
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = targets[a] - sizes[a] as f64;
            let rb = targets[b] - sizes[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle().take(n - assigned) {
            sizes[i] += 1;
        }
    }
    let class_sizes: Vec<(usize, usize)> = dist
        .mass
        .iter()
        .zip(&sizes)
        .map(|(&(d, _), &s)| (d, s))
        .collect();
    let mut degrees: Vec<usize> = class_sizes
        .iter()
        .flat_map(|&(d, s)| std::iter::repeat_n(d, s))
        .collect();
    degrees.truncate(n);
    let mut rng = SeedTree::new(seed).child("d-partition").rng();
    degrees.shuffle(&mut rng);
    DPartition {
        sequence: DegreeSequence::new(degrees),
        class_sizes,
        rounded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn point_mass_partition() {
        let p = sample_d_partition(4, &DegreeDistribution::point(3), 1);
        assert_eq!(p.sequence.degrees(), &[3, 3, 3, 3]);
        assert!(!p.rounded);
    }

    #[test]
    fn two_class_partition_in_both_orders() {
        let d = DegreeDistribution::new([(1, 0.5), (2, 0.5)]).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let p = sample_d_partition(2, &d, seed);
            let mut s = p.sequence.degrees().to_vec();
            seen.insert(s.clone());
            s.sort();
            assert_eq!(s, vec![1, 2]);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn largest_remainder_rounding_is_reported() {
        let d = DegreeDistribution::new([(1, 1.0 / 3.0), (2, 1.0 / 3.0), (3, 1.0 / 3.0)]).unwrap();
        let p = sample_d_partition(4, &d, 9);
        assert!(p.rounded);
        assert_eq!(p.sequence.n(), 4);
        assert_eq!(p.class_sizes, vec![(1, 2), (2, 1), (3, 1)]);
    }

    #[test]
    fn random_vertex_degree_follows_d() {
        let d = DegreeDistribution::new([(1, 0.2), (2, 0.5), (4, 0.3)]).unwrap();
        let mut rng = SeedTree::new(3).rng();
        let mut counts = [0usize; 3];
        let samples = 10_000;
        for seed in 0..samples {
            let p = sample_d_partition(10, &d, seed as u64);
            let x = rng.random_range(0..10);
            let deg = p.sequence.degrees()[x];
            counts[[1, 2, 4].iter().position(|&e| e == deg).unwrap()] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip([0.2, 0.5, 0.3])
            .map(|(&c, p)| {
                let e = p * samples as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let pval = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
        assert!(pval > 0.01, "chi2={chi2} p={pval}");
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(DegreeDistribution::new([(2, 0.9)]).is_err());
        assert!(DegreeDistribution::new([(2, -0.1), (3, 1.1)]).is_err());
    }

    #[test]
    fn size_biased_law() {
        let d = DegreeDistribution::new([(1, 0.5), (3, 0.5)]).unwrap();
        let s = d.size_biased().unwrap();
        assert!((s.prob(0) - 0.25).abs() < 1e-15);
        assert!((s.prob(2) - 0.75).abs() < 1e-15);
        assert!(DegreeDistribution::point(0).size_biased().is_none());
    }
}
