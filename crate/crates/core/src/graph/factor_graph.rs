use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::weights::WeightFunction;
use crate::{Error, Result};

/// A check node: ordered neighborhood (repetitions allowed) and an optional
/// index into the graph's weight table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub neighbors: Vec<usize>,
    pub weight: Option<usize>,
}

/// Unary indicator check forcing `variable` to `symbol`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    pub variable: usize,
    pub symbol: usize,
}

/// Factor graph on variables `[n]` over an alphabet of size `q`.
///
/// Weight functions are stored once in `weights` and referenced by index
/// from the checks, so a family of two functions shared by thousands of
/// checks costs two tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorGraph {
    n: usize,
    q: usize,
    checks: Vec<Check>,
    weights: Vec<WeightFunction>,
    pins: Vec<Pin>,
}

impl FactorGraph {
    pub fn new(n: usize, q: usize) -> Self {
        FactorGraph {
            n,
            q,
            checks: Vec::new(),
            weights: Vec::new(),
            pins: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn weights(&self) -> &[WeightFunction] {
        &self.weights
    }

    pub fn pins(&self) -> &[Pin] {
        &self.pins
    }

    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }

    /// Registers a weight function and returns its id.
    pub fn add_weight(&mut self, w: WeightFunction) -> Result<usize> {
        if w.q() != self.q {
            return Err(Error::param("weight", format!("q={} but graph has q={}", w.q(), self.q)));
        }
        self.weights.push(w);
        Ok(self.weights.len() - 1)
    }

    pub fn add_check(&mut self, neighbors: Vec<usize>, weight: Option<usize>) -> Result<()> {
        if neighbors.is_empty() {
            return Err(Error::param("check", "empty neighborhood"));
        }
        if let Some(&x) = neighbors.iter().find(|&&x| x >= self.n) {
            return Err(Error::param("check", format!("variable {x} out of range for n={}", self.n)));
        }
        if let Some(id) = weight {
            let w = self
                .weights
                .get(id)
                .ok_or_else(|| Error::param("check", format!("unknown weight id {id}")))?;
            if w.arity() != neighbors.len() {
                return Err(Error::param(
                    "check",
                    format!("weight arity {} vs neighborhood size {}", w.arity(), neighbors.len()),
                ));
            }
        }
        self.checks.push(Check { neighbors, weight });
        Ok(())
    }

    /// Replaces the weight of check `a`.
    pub fn set_weight(&mut self, a: usize, weight: usize) -> Result<()> {
        let arity = self
            .weights
            .get(weight)
            .ok_or_else(|| Error::param("check", format!("unknown weight id {weight}")))?
            .arity();
        let check = &mut self.checks[a];
        if arity != check.neighbors.len() {
            return Err(Error::param("check", "weight arity mismatch"));
        }
        check.weight = Some(weight);
        Ok(())
    }

    pub fn add_pin(&mut self, variable: usize, symbol: usize) -> Result<()> {
        if variable >= self.n {
            return Err(Error::param("pin", format!("variable {variable} out of range")));
        }
        if symbol >= self.q {
            return Err(Error::param("pin", format!("symbol {symbol} out of range")));
        }
        self.pins.push(Pin { variable, symbol });
        Ok(())
    }

    /// True when every check carries a weight.
    pub fn is_weighted(&self) -> bool {
        self.checks.iter().all(|c| c.weight.is_some())
    }

    pub fn check_weight(&self, a: usize) -> Option<&WeightFunction> {
        self.checks[a].weight.map(|id| &self.weights[id])
    }

    /// Number of check-neighborhood slots occupied by each variable
    /// (pins excluded).
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for c in &self.checks {
            for &x in &c.neighbors {
                d[x] += 1;
            }
        }
        d
    }

    /// `ψ_G(σ)`: product of check weights times pin indicators.
    pub fn weight_of(&self, sigma: &[usize]) -> f64 {
        if self.pins.iter().any(|p| sigma[p.variable] != p.symbol) {
            return 0.0;
        }
        self.checks
            .iter()
            .map(|c| match c.weight {
                Some(id) => {
                    let idx = c.neighbors.iter().fold(0, |acc, &x| acc * self.q + sigma[x]);
                    self.weights[id].eval_index(idx)
                }
                None => 1.0,
            })
            .product()
    }

    /// Disjoint union; `other`'s variables are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &FactorGraph) -> Result<FactorGraph> {
        if self.q != other.q {
            return Err(Error::param("graph", "alphabet sizes differ"));
        }
        let mut g = self.clone();
        g.n += other.n;
        let offset = self.weights.len();
        g.weights.extend(other.weights.iter().cloned());
        for c in &other.checks {
            g.checks.push(Check {
                neighbors: c.neighbors.iter().map(|&x| x + self.n).collect(),
                weight: c.weight.map(|w| w + offset),
            });
        }
        for p in &other.pins {
            g.pins.push(Pin {
                variable: p.variable + self.n,
                symbol: p.symbol,
            });
        }
        Ok(g)
    }

    /// Copy without weights.
    pub fn unweighted(&self) -> FactorGraph {
        FactorGraph {
            n: self.n,
            q: self.q,
            checks: self
                .checks
                .iter()
                .map(|c| Check {
                    neighbors: c.neighbors.clone(),
                    weight: None,
                })
                .collect(),
            weights: Vec::new(),
            pins: self.pins.clone(),
        }
    }

    /// Connected components over variables, linked by checks (pins do not
    /// connect anything). Each component is sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for c in &self.checks {
            let r0 = root(&mut parent, c.neighbors[0]);
            for &x in &c.neighbors[1..] {
                let r = root(&mut parent, x);
                if r != r0 {
                    parent[r] = r0;
                }
            }
        }
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for x in 0..self.n {
            let r = root(&mut parent, x);
            by_root[r].push(x);
        }
        let mut comps: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }

    #[cfg(test)]
    fn compact_weights(mut self) -> FactorGraph {
        let mut used: Vec<usize> = Vec::new();
        for c in &mut self.checks {
            if let Some(w) = c.weight {
                let l = used.iter().position(|&u| u == w).unwrap_or_else(|| {
                    used.push(w);
                    used.len() - 1
                });
                c.weight = Some(l);
            }
        }
        self.weights = used.iter().map(|&w| self.weights[w].clone()).collect();
        self
    }

    /// Every connected component as a standalone graph, in one pass. Local
    /// variables follow the order of [`FactorGraph::components`]; each
    /// subgraph keeps only the weight functions its checks use.
    pub fn split_components(&self) -> Vec<(Vec<usize>, FactorGraph)> {
        let comps = self.components();
        let mut comp_of = vec![0usize; self.n];
        let mut local = vec![0usize; self.n];
        let mut parts: Vec<FactorGraph> = comps
            .iter()
            .enumerate()
            .map(|(c, vars)| {
                for (i, &x) in vars.iter().enumerate() {
                    comp_of[x] = c;
                    local[x] = i;
                }
                FactorGraph::new(vars.len(), self.q)
            })
            .collect();
        let mut weight_map: Vec<HashMap<usize, usize>> = vec![HashMap::new(); comps.len()];
        for c in &self.checks {
            let id = comp_of[c.neighbors[0]];
            let part = &mut parts[id];
            let weight = c.weight.map(|w| {
                *weight_map[id].entry(w).or_insert_with(|| {
                    part.weights.push(self.weights[w].clone());
                    part.weights.len() - 1
                })
            });
            part.checks.push(Check {
                neighbors: c.neighbors.iter().map(|&x| local[x]).collect(),
                weight,
            });
        }
        for p in &self.pins {
            parts[comp_of[p.variable]].pins.push(Pin {
                variable: local[p.variable],
                symbol: p.symbol,
            });
        }
        comps.into_iter().zip(parts).collect()
    }

    /// Subgraph induced by `vars` (must be a union of components), with
    /// variables relabelled `0..vars.len()` in the given order.
    pub fn restrict(&self, vars: &[usize]) -> FactorGraph {
        let mut map = vec![usize::MAX; self.n];
        for (i, &x) in vars.iter().enumerate() {
            map[x] = i;
        }
        let mut g = FactorGraph::new(vars.len(), self.q);
        g.weights = self.weights.clone();
        for c in &self.checks {
            if map[c.neighbors[0]] != usize::MAX {
                g.checks.push(Check {
                    neighbors: c.neighbors.iter().map(|&x| map[x]).collect(),
                    weight: c.weight,
                });
            }
        }
        for p in &self.pins {
            if map[p.variable] != usize::MAX {
                g.pins.push(Pin {
                    variable: map[p.variable],
                    symbol: p.symbol,
                });
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_indices_and_arity() {
        let mut g = FactorGraph::new(3, 2);
        assert!(g.add_check(vec![0, 3], None).is_err());
        let w = g.add_weight(WeightFunction::constant(2, 2, 1.5).unwrap()).unwrap();
        assert!(g.add_check(vec![0, 1, 2], Some(w)).is_err());
        g.add_check(vec![0, 1], Some(w)).unwrap();
        assert!(g.add_pin(0, 2).is_err());
        assert!(g.add_pin(5, 0).is_err());
        assert!(g.is_weighted());
        assert_eq!(g.degrees(), vec![1, 1, 0]);
    }

    #[test]
    fn components_and_restriction() {
        let mut g = FactorGraph::new(5, 2);
        g.add_check(vec![0, 3], None).unwrap();
        g.add_check(vec![3, 4], None).unwrap();
        g.add_pin(1, 1).unwrap();
        assert_eq!(g.components(), vec![vec![0, 3, 4], vec![1], vec![2]]);
        let split = g.split_components();
        assert_eq!(split.len(), 3);
        assert_eq!(split[0].1, g.restrict(&[0, 3, 4]).compact_weights());
        let r = g.restrict(&[1]);
        assert_eq!(r.pins(), &[Pin { variable: 0, symbol: 1 }]);
        assert_eq!(r.num_checks(), 0);
    }
}
