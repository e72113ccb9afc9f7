use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance of the mean constraint on populations.
pub const MEAN_TOLERANCE: f64 = 1e-3;

/// A finite sample standing in for `π ∈ 𝒫²_*(Ω)`.
///
/// Two representations share one type: the code form stores `θ ∈ [−1,1]`
/// with `μ(+1) = (1+θ)/2`, the general form stores `N` probability vectors
/// row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    q: usize,
    theta: bool,
    data: Vec<f64>,
}

/// Starting points of the sup search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedKind {
    /// Every member uniform (`θ = 0`).
    Trivial,
    /// Members within `1e−6` of point masses, symmetric.
    NearFrozen,
    /// `θ ~ U[−1,1]`, or Dirichlet(1) members in the general form.
    UniformSpread,
}

impl Population {
    pub fn from_thetas(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::param("population", "empty"));
        }
        if let Some(t) = thetas.iter().find(|t| !(t.abs() <= 1.0)) {
            return Err(Error::param("population", format!("θ = {t} outside [−1,1]")));
        }
        Ok(Population {
            q: 2,
            theta: true,
            data: thetas,
        })
    }

    /// `members` is row-major with `q` columns.
    pub fn from_measures(q: usize, members: Vec<f64>) -> Result<Self> {
        if q < 2 || members.is_empty() || !members.len().is_multiple_of(q) {
            return Err(Error::param("population", "needs N ≥ 1 rows of length q ≥ 2"));
        }
        for row in members.chunks(q) {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::param("population", format!("{row:?} is not a probability vector")));
            }
        }
        Ok(Population {
            q,
            theta: false,
            data: members,
        })
    }

    /// `N` copies of `δ_uniform`.
    pub fn trivial(q: usize, n: usize, theta_form: bool) -> Self {
        if theta_form {
            Population::from_thetas(vec![0.0; n.max(1)]).unwrap()
        } else {
            Population::from_measures(q, vec![1.0 / q as f64; q * n.max(1)]).unwrap()
        }
    }

    /// Symmetric start population of (roughly) `n` members.
    pub fn seed<R: Rng + ?Sized>(kind: SeedKind, q: usize, n: usize, theta_form: bool, rng: &mut R) -> Self {
        if matches!(kind, SeedKind::Trivial) {
            return Population::trivial(q, n, theta_form);
        }
        let half = n.div_ceil(if theta_form { 2 } else { q }).max(1);
        let raw = if theta_form {
            let thetas = (0..half)
                .map(|_| match kind {
                    SeedKind::NearFrozen => 1.0 - 1e-6,
                    _ => rng.random_range(-1.0..=1.0),
                })
                .collect();
            Population::from_thetas(thetas).unwrap()
        } else {
            let mut data = Vec::with_capacity(half * q);
            for _ in 0..half {
                match kind {
                    SeedKind::NearFrozen => {
                        let top = rng.random_range(0..q);
                        let eps = 1e-6;
                        data.extend((0..q).map(|s| if s == top { 1.0 - eps } else { eps / (q - 1) as f64 }));
                    }
                    _ => {
                        let e: Vec<f64> = (0..q).map(|_| Exp1.sample(rng)).collect();
                        let t: f64 = e.iter().sum();
                        data.extend(e.iter().map(|x| x / t));
                    }
                }
            }
            Population::from_measures(q, data).unwrap()
        };
        raw.symmetrized()
    }

    pub fn len(&self) -> usize {
        self.data.len() / if self.theta { 1 } else { self.q }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn is_theta_form(&self) -> bool {
        self.theta
    }

    /// The `θ` values of a code-form population.
    pub fn thetas(&self) -> Option<&[f64]> {
        self.theta.then_some(&self.data[..])
    }

    /// `μ(first) − μ(second)` per member; the `θ` values in the code form.
    pub fn theta_values(&self) -> Vec<f64> {
        if self.theta {
            self.data.clone()
        } else {
            self.data.chunks(self.q).map(|r| r[0] - r[1]).collect()
        }
    }

    /// Member `i` as a probability vector.
    pub fn measure_into(&self, i: usize, out: &mut [f64]) {
        if self.theta {
            let t = self.data[i];
            out[0] = 0.5 * (1.0 + t);
            out[1] = 0.5 * (1.0 - t);
        } else {
            out.copy_from_slice(&self.data[i * self.q..(i + 1) * self.q]);
        }
    }

    /// A uniformly chosen member, written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.measure_into(rng.random_range(0..self.len()), out);
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.theta {
            self.data[rng.random_range(0..self.data.len())]
        } else {
            let i = rng.random_range(0..self.len());
            self.data[i * self.q] - self.data[i * self.q + 1]
        }
    }

    /// Empirical mean measure.
    pub fn mean_measure(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.q];
        let mut buf = vec![0.0; self.q];
        for i in 0..self.len() {
            self.measure_into(i, &mut buf);
            for (m, b) in mean.iter_mut().zip(&buf) {
                *m += b;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.len() as f64);
        mean
    }

    /// `|mean θ|` in the code form, TV distance of the mean to uniform
    /// otherwise.
    pub fn mean_deviation(&self) -> f64 {
        if self.theta {
            return (self.data.iter().sum::<f64>() / self.data.len() as f64).abs();
        }
        let u = 1.0 / self.q as f64;
        0.5 * self.mean_measure().iter().map(|m| (m - u).abs()).sum::<f64>()
    }

    pub fn check_mean(&self, tolerance: f64) -> Result<()> {
        let deviation = self.mean_deviation();
        if deviation > tolerance {
            return Err(Error::MeanConstraint { deviation, tolerance });
        }
        Ok(())
    }

    /// Appends every cyclic relabelling `σ ↦ σ+r mod q` of every member, in
    /// blocks: for `q = 2` this is `[θ…, −θ…]`.
    pub fn symmetrized(&self) -> Population {
        if self.theta {
            let mut data = self.data.clone();
            data.extend(self.data.iter().map(|t| -t));
            return Population { data, ..self.clone() };
        }
        let q = self.q;
        let mut data = Vec::with_capacity(self.data.len() * q);
        for r in 0..q {
            for row in self.data.chunks(q) {
                data.extend((0..q).map(|s| row[(s + q - r) % q]));
            }
        }
        Population {
            q,
            theta: false,
            data,
        }
    }

    /// Converts the code form to explicit measures.
    pub fn to_measures(&self) -> Population {
        if !self.theta {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|t| [0.5 * (1.0 + t), 0.5 * (1.0 - t)]).collect();
        Population {
            q: 2,
            theta: false,
            data,
        }
    }

    /// One scalar per member (`θ`, or `μ(first symbol)`), for convergence
    /// tests on sorted samples.
    pub fn key_coordinates(&self) -> Vec<f64> {
        if self.theta {
            self.data.clone()
        } else {
            self.data.chunks(self.q).map(|r| r[0]).collect()
        }
    }

    /// CSV with a `theta` column, or `mu0,…,mu{q−1}` columns. Lines starting
    /// with `#` are skipped on reading.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.theta {
            writeln!(out, "theta")?;
            for t in &self.data {
                writeln!(out, "{t:e}")?;
            }
        } else {
            let header: Vec<String> = (0..self.q).map(|s| format!("mu{s}")).collect();
            writeln!(out, "{}", header.join(","))?;
            for row in self.data.chunks(self.q) {
                let cells: Vec<String> = row.iter().map(|p| format!("{p:e}")).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Population> {
        let mut lines = input
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim_start().starts_with('#')));
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "missing header".into(),
        })??;
        let columns = header.split(',').count();
        let theta = header.trim() == "theta";
        let mut data = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns {
                return Err(Error::Parse {
                    line: i + 2,
                    reason: format!("expected {columns} cells"),
                });
            }
            for c in cells {
                data.push(c.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 2,
                    reason: e.to_string(),
                })?);
            }
        }
        if theta {
            Population::from_thetas(data)
        } else {
            Population::from_measures(columns, data)
        }
    }
}
