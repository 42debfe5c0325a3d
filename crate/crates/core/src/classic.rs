//! Deterministic input-output inoperability model and its series-parallel
//! correction for redundant components.

use std::collections::BTreeMap;

pub use nalgebra::{DMatrix, DVector};

use crate::error::{check_probability, Error, Result};
use crate::graph::{NodeKind, SystemModel};

/// Spectral radius at or above this bound is treated as unsolvable.
const SOLVABILITY_BOUND: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DamageVector {
    /// Solution of `(I - A) q = c`; may exceed 1.
    pub raw: Vec<f64>,
    pub clamped: Vec<f64>,
}

impl DamageVector {
    fn from_raw(raw: Vec<f64>) -> Self {
        let clamped = raw.iter().map(|q| q.clamp(0.0, 1.0)).collect();
        DamageVector { raw, clamped }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesParallelDamage {
    pub q: DamageVector,
    /// Joint inoperability of each redundancy group, in the order given.
    pub groups: Vec<f64>,
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn check_inputs(a: &DMatrix<f64>, c: &[f64]) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "interdependency matrix".into(),
            expected: "square matrix".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    if c.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "scenario vector".into(),
            expected: a.nrows().to_string(),
            found: c.len().to_string(),
        });
    }
    for &v in a.iter() {
        check_probability("interdependency coefficient", v)?;
    }
    for &v in c {
        check_probability("scenario inoperability", v)?;
    }
    Ok(())
}

fn solve(a: &DMatrix<f64>, c: &[f64]) -> Result<Vec<f64>> {
    let rho = spectral_radius(a);
    if rho >= SOLVABILITY_BOUND {
        return Err(Error::Solvability { spectral_radius: rho });
    }
    let n = a.nrows();
    let system = DMatrix::identity(n, n) - a;
    let rhs = DVector::from_column_slice(c);
    let q = system.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(q.iter().copied().collect())
}

/// `q = (I - A)^-1 c`.
pub fn damage_vector(a: &DMatrix<f64>, c: &[f64]) -> Result<DamageVector> {
    check_inputs(a, c)?;
    Ok(DamageVector::from_raw(solve(a, c)?))
}

/// Partial sums of `sum_k A^k c`, stopping when a term's max norm drops
/// below `tolerance`. Returns the estimate and the number of terms used.
pub fn neumann_series(a: &DMatrix<f64>, c: &[f64], max_terms: usize, tolerance: f64) -> Result<(Vec<f64>, usize)> {
    check_inputs(a, c)?;
    let mut term = DVector::from_column_slice(c);
    let mut sum = term.clone();
    for k in 1..max_terms {
        term = a * term;
        sum += &term;
        if term.amax() < tolerance {
            return Ok((sum.iter().copied().collect(), k + 1));
        }
    }
    Ok((sum.iter().copied().collect(), max_terms))
}

/// Entry `i` is `1 / n_i` for a member of an `n_i`-fold redundancy group,
/// 1 otherwise.
pub fn series_parallel_vector(size: usize, groups: &[Vec<usize>]) -> Vec<f64> {
    let mut sp = vec![1.0; size];
    for group in groups {
        for &i in group {
            sp[i] = 1.0 / group.len() as f64;
        }
    }
    sp
}

/// Damage vector with the influence received by each node scaled by its
/// series-parallel entry, followed by product aggregation of each group.
pub fn damage_vector_sp(a: &DMatrix<f64>, sp: &[f64], c: &[f64], groups: &[Vec<usize>]) -> Result<SeriesParallelDamage> {
    check_inputs(a, c)?;
    if sp.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "series-parallel vector".into(),
            expected: a.nrows().to_string(),
            found: sp.len().to_string(),
        });
    }
    if let Some(&bad) = sp.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
        return Err(Error::InvalidProbability {
            context: "series-parallel entry".into(),
            value: bad,
        });
    }
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * sp[i]);
    let q = DamageVector::from_raw(solve(&scaled, c)?);
    let groups = groups
        .iter()
        .map(|g| {
            let members: Vec<f64> = g.iter().map(|&i| q.clamped[i]).collect();
            crate::hazard::joint_redundant_failure(&members)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeriesParallelDamage { q, groups })
}

pub fn decay_score(q: &[f64]) -> f64 {
    q.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindTotal {
    pub sum: f64,
    pub count: usize,
}

/// Sum over kinds of the mean decay score of the kind.
pub fn system_score(kinds: &[KindTotal]) -> Result<f64> {
    let mut total = 0.0;
    for k in kinds {
        if k.count == 0 {
            return Err(Error::EmptyInput("node kind in system score"));
        }
        total += k.sum / k.count as f64;
    }
    Ok(total)
}

/// `c_i + I^T q_j`, clamped to [0, 1]. `matrix[x][y]` links upstream node
/// `x` to downstream node `y`.
pub fn couple_layers_classic(matrix: &[Vec<bool>], q_upstream: &[f64], c_local: &[f64]) -> Result<Vec<f64>> {
    if matrix.len() != q_upstream.len() || matrix.iter().any(|row| row.len() != c_local.len()) {
        return Err(Error::DimensionMismatch {
            context: "classic layer coupling".into(),
            expected: format!("{}x{}", q_upstream.len(), c_local.len()),
            found: format!("{}x{}", matrix.len(), matrix.first().map_or(0, Vec::len)),
        });
    }
    Ok(c_local
        .iter()
        .enumerate()
        .map(|(y, &c)| {
            let inflow: f64 = matrix.iter().zip(q_upstream).filter(|(row, _)| row[y]).map(|(_, q)| q).sum();
            (c + inflow).clamp(0.0, 1.0)
        })
        .collect())
}

/// Classic view of a system: one interdependency matrix over every node,
/// built from the ordinary supply layer of each network and all
/// inter-network links.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicSystem {
    pub ids: Vec<String>,
    pub a: DMatrix<f64>,
    pub groups: Vec<Vec<usize>>,
    pub sp: Vec<f64>,
    group_of: Vec<Option<usize>>,
    categories: Vec<String>,
    is_target: Vec<bool>,
}

impl ClassicSystem {
    pub fn from_model(model: &SystemModel) -> Result<Self> {
        let n = model.nodes.len();
        let mut a = DMatrix::zeros(n, n);
        for (k, net) in model.networks.iter().enumerate() {
            let global = model.network_node_indices(k);
            let config = net.configuration(0)?;
            for (x, y) in config.adjacency.edges() {
                if let (Some(gx), Some(gy)) = (global[x], global[y]) {
                    a[(gy, gx)] = 1.0;
                }
            }
        }
        for dep in &model.dependencies {
            let from = model.network_node_indices(model.require_network(&dep.from_network)?);
            let to = model.network_node_indices(model.require_network(&dep.to_network)?);
            for (x, y) in dep.links() {
                let gx = from.get(x).copied().flatten();
                let gy = to.get(y).copied().flatten();
                if let (Some(gx), Some(gy)) = (gx, gy) {
                    a[(gy, gx)] = 1.0;
                }
            }
        }
        let mut by_name: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, node) in model.nodes.iter().enumerate() {
            if let Some(g) = &node.redundancy_group {
                by_name.entry(g).or_default().push(i);
            }
        }
        let groups: Vec<Vec<usize>> = by_name.into_values().filter(|g| g.len() >= 2).collect();
        let mut group_of = vec![None; n];
        for (gi, g) in groups.iter().enumerate() {
            for &i in g {
                group_of[i] = Some(gi);
            }
        }
        Ok(ClassicSystem {
            ids: model.nodes.iter().map(|n| n.id.clone()).collect(),
            sp: series_parallel_vector(n, &groups),
            a,
            groups,
            group_of,
            categories: model.nodes.iter().map(|n| n.category().to_string()).collect(),
            is_target: model.nodes.iter().map(|n| n.kind == NodeKind::Target).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Damage vector for the full scenario vector `c`.
    pub fn damage(&self, c: &[f64], corrected: bool) -> Result<SeriesParallelDamage> {
        if corrected {
            damage_vector_sp(&self.a, &self.sp, c, &self.groups)
        } else {
            let q = damage_vector(&self.a, c)?;
            Ok(SeriesParallelDamage { q, groups: Vec::new() })
        }
    }

    /// Decay score of every node when it alone is perturbed with its entry
    /// of `c`. With the correction, a group member is perturbed with the
    /// joint inoperability of its group.
    pub fn decay_scores(&self, c: &[f64], corrected: bool) -> Result<Vec<f64>> {
        if c.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "scenario vector".into(),
                expected: self.len().to_string(),
                found: c.len().to_string(),
            });
        }
        (0..self.len())
            .map(|i| {
                let mut single = vec![0.0; self.len()];
                single[i] = match (corrected, self.group_of[i]) {
                    (true, Some(g)) => crate::hazard::joint_redundant_failure(&self.groups[g].iter().map(|&j| c[j]).collect::<Vec<_>>())?,
                    _ => c[i],
                };
                let damage = self.damage(&single, corrected)?;
                Ok(decay_score(&damage.q.raw))
            })
            .collect()
    }

    /// System score of per-node decay scores; targets are left out.
    pub fn system_score(&self, decay: &[f64]) -> Result<f64> {
        let mut kinds: BTreeMap<&str, KindTotal> = BTreeMap::new();
        for (i, &d) in decay.iter().enumerate() {
            if self.is_target[i] {
                continue;
            }
            let entry = kinds.entry(&self.categories[i]).or_insert(KindTotal { sum: 0.0, count: 0 });
            entry.sum += d;
            entry.count += 1;
        }
        system_score(&kinds.into_values().collect::<Vec<_>>())
    }
}
