//! Probabilistic cascade: propagation of self-failure probabilities along
//! configuration chains and across networks.
//!
//! Inside a layer every node draws from its single logical parent, so a
//! node fails when it fails by itself, when its parent chain fails, or when
//! one of the nodes it depends on in another network fails. Suppliers that
//! are already required further up the chain are not counted twice.
//! Redundancy groups fail jointly: the product of their members' local
//! failure probabilities.

use std::collections::BTreeSet;

use crate::error::{check_probability, Error, Result};
use crate::graph::{LayerStructure, NodeKind, SystemModel};
use crate::hazard::combine_independent;

pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITERATIONS: usize = 1000;

#[inline]
pub fn union(a: f64, b: f64) -> f64 {
    1.0 - (1.0 - a) * (1.0 - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeProbabilities {
    pub p_sf: f64,
    pub p_cf: f64,
    pub p_f: f64,
}

impl NodeProbabilities {
    pub fn new(p_sf: f64, p_cf: f64) -> Self {
        NodeProbabilities {
            p_sf,
            p_cf,
            p_f: union(p_sf, p_cf),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfigurationState {
    pub p_occ: f64,
    pub chain_survival: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub id: String,
    /// One entry per node of the network, in network order.
    pub nodes: Vec<NodeProbabilities>,
    pub configurations: Vec<ConfigurationState>,
    pub loc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub networks: Vec<NetworkState>,
    /// Total failure probability per global node index.
    pub p_f: Vec<f64>,
    pub iterations: usize,
}

impl SystemState {
    pub fn network(&self, id: &str) -> Option<&NetworkState> {
        self.networks.iter().find(|n| n.id == id)
    }
}

/// Result of propagating one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutcome {
    /// Per local node position; `None` for nodes outside the layer.
    pub nodes: Vec<Option<NodeProbabilities>>,
    pub chain_survival: f64,
}

/// Occurrence probability of each hierarchically ordered layer given its
/// chain survival: layer `k` is active when it survives and every layer
/// above it has failed.
pub fn configuration_occurrence(survival: &[f64]) -> (Vec<ConfigurationState>, f64) {
    let mut all_above_failed = 1.0;
    let mut states = Vec::with_capacity(survival.len());
    let mut total = 0.0;
    for &s in survival {
        let p_occ = s * all_above_failed;
        total += p_occ;
        all_above_failed *= 1.0 - s;
        states.push(ConfigurationState { p_occ, chain_survival: s });
    }
    let loc = (1.0 - total).clamp(0.0, 1.0);
    (states, loc)
}

/// Union of upstream failure probabilities routed through `matrix` with the
/// local values. `matrix[x][y]` links upstream node `x` to local node `y`.
pub fn couple_layers_prob(matrix: &[Vec<bool>], upstream: &[f64], local: &[f64]) -> Result<Vec<f64>> {
    if matrix.len() != upstream.len() || matrix.iter().any(|row| row.len() != local.len()) {
        return Err(Error::DimensionMismatch {
            context: "probabilistic layer coupling".into(),
            expected: format!("{}x{}", upstream.len(), local.len()),
            found: format!("{}x{}", matrix.len(), matrix.first().map_or(0, Vec::len)),
        });
    }
    Ok(local
        .iter()
        .enumerate()
        .map(|(y, &p)| {
            matrix
                .iter()
                .zip(upstream)
                .filter(|(row, _)| row[y])
                .fold(p, |acc, (_, &q)| union(acc, q))
        })
        .collect())
}

/// Precomputed layer structures and dependency lists of a model.
#[derive(Debug, Clone)]
pub struct CascadeSolver<'a> {
    model: &'a SystemModel,
    layers: Vec<Vec<LayerStructure>>,
    /// Global indices of the nodes each node depends on in other networks.
    suppliers: Vec<Vec<usize>>,
    /// Global index of each local node position.
    globals: Vec<Vec<usize>>,
    order: Vec<Vec<usize>>,
}

impl<'a> CascadeSolver<'a> {
    pub fn new(model: &'a SystemModel) -> Result<Self> {
        let mut globals = Vec::with_capacity(model.networks.len());
        let mut layers = Vec::with_capacity(model.networks.len());
        for (k, net) in model.networks.iter().enumerate() {
            let g = model
                .network_node_indices(k)
                .into_iter()
                .zip(&net.nodes)
                .map(|(i, id)| i.ok_or_else(|| Error::UnknownId { kind: "node", id: id.clone() }))
                .collect::<Result<Vec<_>>>()?;
            globals.push(g);
            let structures = net
                .configurations
                .iter()
                .map(|c| LayerStructure::build(model, net, c))
                .collect::<Result<Vec<_>>>()?;
            layers.push(structures);
        }
        let mut suppliers: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); model.nodes.len()];
        for dep in &model.dependencies {
            let from = model.require_network(&dep.from_network)?;
            let to = model.require_network(&dep.to_network)?;
            if dep.rows() != globals[from].len() || dep.cols() != globals[to].len() {
                return Err(Error::DimensionMismatch {
                    context: format!("dependency {} -> {}", dep.from_network, dep.to_network),
                    expected: format!("{}x{}", globals[from].len(), globals[to].len()),
                    found: format!("{}x{}", dep.rows(), dep.cols()),
                });
            }
            for (x, y) in dep.links() {
                suppliers[globals[to][y]].insert(globals[from][x]);
            }
        }
        Ok(CascadeSolver {
            model,
            layers,
            suppliers: suppliers.into_iter().map(|s| s.into_iter().collect()).collect(),
            globals,
            order: model.solve_order(),
        })
    }

    pub fn solve(&self, p_sf: &[f64]) -> Result<SystemState> {
        let model = self.model;
        if p_sf.len() != model.nodes.len() {
            return Err(Error::DimensionMismatch {
                context: "self-failure vector".into(),
                expected: model.nodes.len().to_string(),
                found: p_sf.len().to_string(),
            });
        }
        for (node, &p) in model.nodes.iter().zip(p_sf) {
            check_probability(&node.id, p)?;
        }

        let mut p_f = p_sf.to_vec();
        let mut states: Vec<Option<NetworkState>> = vec![None; model.networks.len()];
        let mut iterations = 0;
        for component in &self.order {
            let cyclic = component.len() > 1;
            if !cyclic {
                let k = component[0];
                let state = self.solve_network(k, p_sf, &p_f);
                self.store(k, &state, &mut p_f);
                states[k] = Some(state);
                iterations = iterations.max(1);
                continue;
            }
            let mut history = Vec::new();
            let mut previous_change = f64::INFINITY;
            let mut converged = false;
            for iteration in 1..=FIXED_POINT_MAX_ITERATIONS {
                let before: Vec<f64> = p_f.clone();
                let mut next = p_f.clone();
                let mut solved = Vec::with_capacity(component.len());
                for &k in component {
                    let state = self.solve_network(k, p_sf, &before);
                    self.store(k, &state, &mut next);
                    solved.push((k, state));
                }
                let mut change = max_change(&before, &next);
                if change > previous_change {
                    for (b, n) in before.iter().zip(next.iter_mut()) {
                        *n = 0.5 * b + 0.5 * *n;
                    }
                    change = max_change(&before, &next);
                }
                p_f = next;
                history.push(change);
                previous_change = change;
                iterations = iterations.max(iteration);
                if change <= FIXED_POINT_TOLERANCE {
                    // Re-solve once so reported states match the final iterate.
                    for &k in component {
                        let state = self.solve_network(k, p_sf, &p_f);
                        states[k] = Some(state);
                    }
                    converged = true;
                    break;
                }
                for (k, state) in solved {
                    states[k] = Some(state);
                }
            }
            if !converged {
                return Err(Error::NonConvergent {
                    iterations: FIXED_POINT_MAX_ITERATIONS,
                    last_change: history.last().copied().unwrap_or(f64::NAN),
                    history,
                });
            }
        }
        Ok(SystemState {
            networks: states.into_iter().map(|s| s.expect("every network solved")).collect(),
            p_f,
            iterations,
        })
    }

    fn store(&self, k: usize, state: &NetworkState, p_f: &mut [f64]) {
        for (pos, probs) in state.nodes.iter().enumerate() {
            p_f[self.globals[k][pos]] = probs.p_f;
        }
    }

    fn solve_network(&self, k: usize, p_sf: &[f64], supplier_pf: &[f64]) -> NetworkState {
        let net = &self.model.networks[k];
        let size = net.nodes.len();
        // Probability that the node is cut off in every layer it belongs to.
        let mut p_cf_all: Vec<Option<f64>> = vec![None; size];
        let mut survival = Vec::with_capacity(net.configurations.len());
        for c in 0..net.configurations.len() {
            let outcome = self.layer(k, c, p_sf, supplier_pf);
            for (pos, node) in outcome.nodes.iter().enumerate() {
                if let Some(node) = node {
                    let acc = p_cf_all[pos].get_or_insert(1.0);
                    *acc *= node.p_cf;
                }
            }
            survival.push(outcome.chain_survival);
        }
        let nodes = (0..size)
            .map(|pos| {
                let g = self.globals[k][pos];
                let p_cf = p_cf_all[pos].unwrap_or_else(|| {
                    let exposures: Vec<f64> = self.suppliers[g].iter().map(|&s| supplier_pf[s]).collect();
                    combine_independent(&exposures)
                });
                NodeProbabilities::new(p_sf[g], p_cf)
            })
            .collect();
        let (configurations, loc) = configuration_occurrence(&survival);
        NetworkState {
            id: net.id.clone(),
            nodes,
            configurations,
            loc,
        }
    }

    /// Propagates one layer of network `k` given the current failure
    /// probabilities of every node (used for cross-network suppliers).
    pub fn layer(&self, k: usize, c: usize, p_sf: &[f64], supplier_pf: &[f64]) -> LayerOutcome {
        let net = &self.model.networks[k];
        let structure = &self.layers[k][c];
        let globals = &self.globals[k];
        let supply = |pos: usize| -> &[usize] { &self.suppliers[globals[pos]] };
        let exposure = |set: &mut dyn Iterator<Item = &usize>| -> f64 {
            set.fold(0.0, |acc, &s| union(acc, supplier_pf[s]))
        };

        let mut nodes: Vec<Option<NodeProbabilities>> = vec![None; net.nodes.len()];
        let mut unit_pf = vec![0.0; structure.units.len()];
        let mut unit_accounted: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); structure.units.len()];
        // Suppliers every unit of the layer needs for sure.
        let mut certain: BTreeSet<usize> = BTreeSet::new();
        let mut rooted_at_source = true;

        for (u, unit) in structure.units.iter().enumerate() {
            let (parent_pf, accounted) = match unit.parent {
                Some(p) => (unit_pf[p], unit_accounted[p].clone()),
                None => {
                    let all_sources = unit
                        .members
                        .iter()
                        .all(|&m| self.model.nodes[globals[m]].kind == NodeKind::Source);
                    if !all_sources {
                        rooted_at_source = false;
                    }
                    (if all_sources { 0.0 } else { 1.0 }, BTreeSet::new())
                }
            };
            if unit.members.len() == 1 {
                let m = unit.members[0];
                let g = globals[m];
                let fresh = exposure(&mut supply(m).iter().filter(|s| !accounted.contains(s)));
                let probs = NodeProbabilities::new(p_sf[g], union(parent_pf, fresh));
                nodes[m] = Some(probs);
                unit_pf[u] = probs.p_f;
                let mut acc = accounted;
                acc.extend(supply(m).iter().copied());
                certain.extend(supply(m).iter().copied());
                unit_accounted[u] = acc;
            } else {
                let shared: BTreeSet<usize> = unit
                    .members
                    .iter()
                    .map(|&m| supply(m).iter().copied().collect::<BTreeSet<_>>())
                    .reduce(|a, b| a.intersection(&b).copied().collect())
                    .unwrap_or_default();
                let shared_fresh = exposure(&mut shared.iter().filter(|s| !accounted.contains(s)));
                let mut joint_local = 1.0;
                for &m in &unit.members {
                    let g = globals[m];
                    let own = exposure(&mut supply(m).iter().filter(|s| !accounted.contains(s) && !shared.contains(s)));
                    joint_local *= union(p_sf[g], own);
                    let p_cf = union(union(parent_pf, shared_fresh), own);
                    nodes[m] = Some(NodeProbabilities::new(p_sf[g], p_cf));
                }
                unit_pf[u] = union(union(parent_pf, shared_fresh), joint_local);
                let mut acc = accounted;
                acc.extend(shared.iter().copied());
                certain.extend(shared.iter().copied());
                unit_accounted[u] = acc;
            }
        }

        let chain_survival = if rooted_at_source {
            let mut s: f64 = certain.iter().map(|&x| 1.0 - supplier_pf[x]).product();
            for unit in &structure.units {
                if unit.members.len() == 1 {
                    s *= 1.0 - p_sf[globals[unit.members[0]]];
                } else {
                    let joint: f64 = unit
                        .members
                        .iter()
                        .map(|&m| {
                            let own = exposure(&mut supply(m).iter().filter(|x| !certain.contains(x)));
                            union(p_sf[globals[m]], own)
                        })
                        .product();
                    s *= 1.0 - joint;
                }
            }
            s
        } else {
            0.0
        };
        LayerOutcome { nodes, chain_survival }
    }
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Propagates one layer of a network in isolation (no cross-network
/// suppliers). `p_sf_local` follows the network's node order.
pub fn propagate_layer(model: &SystemModel, network_id: &str, config_index: usize, p_sf_local: &[f64]) -> Result<LayerOutcome> {
    let k = model.require_network(network_id)?;
    let net = &model.networks[k];
    net.configuration(config_index)?;
    if p_sf_local.len() != net.nodes.len() {
        return Err(Error::DimensionMismatch {
            context: format!("self-failure vector of network '{network_id}'"),
            expected: net.nodes.len().to_string(),
            found: p_sf_local.len().to_string(),
        });
    }
    let isolated = SystemModel::new(model.nodes.clone(), vec![net.clone()], Vec::new());
    let solver = CascadeSolver::new(&isolated)?;
    let mut global = vec![0.0; isolated.nodes.len()];
    for (pos, &p) in p_sf_local.iter().enumerate() {
        global[solver.globals[0][pos]] = check_probability(&net.nodes[pos], p)?;
    }
    let zeros = vec![0.0; global.len()];
    Ok(solver.layer(0, config_index, &global, &zeros))
}

/// Solves every network in dependency order for one set of self-failure
/// probabilities (indexed like `model.nodes`).
pub fn solve_system(model: &SystemModel, p_sf: &[f64]) -> Result<SystemState> {
    CascadeSolver::new(model)?.solve(p_sf)
}

/// For each time step, the failure probability of `target` minus its value
/// when `node` is made immune to self-failure.
pub fn node_importance(model: &SystemModel, p_sf_series: &[Vec<f64>], node_id: &str, target_id: &str) -> Result<Vec<f64>> {
    let node = model.require_node(node_id)?;
    let target = model.require_node(target_id)?;
    let solver = CascadeSolver::new(model)?;
    p_sf_series
        .iter()
        .map(|p_sf| {
            let exposed = solver.solve(p_sf)?.p_f[target];
            let mut forced = p_sf.clone();
            forced[node] = 0.0;
            let immune = solver.solve(&forced)?.p_f[target];
            Ok(exposed - immune)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Adjacency, Configuration, InterNetworkDependency, Network, Node};

    fn chain(ids: &[&str], net: &str) -> (Vec<Node>, Network) {
        let n = ids.len();
        let nodes = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let kind = if i == 0 {
                    NodeKind::Source
                } else if i + 1 == n {
                    NodeKind::Target
                } else {
                    NodeKind::Intermediate
                };
                Node::new(*id, net, kind)
            })
            .collect();
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        let network = Network {
            id: net.into(),
            nodes: ids.iter().map(|s| s.to_string()).collect(),
            configurations: vec![Configuration::new("main", 0, Adjacency::from_edges(n, &edges).unwrap())],
            targets: vec![ids[n - 1].to_string()],
        };
        (nodes, network)
    }

    #[test]
    fn three_node_chain() {
        let (nodes, net) = chain(&["s", "m", "t"], "n");
        let model = SystemModel::new(nodes, vec![net], vec![]);
        let out = propagate_layer(&model, "n", 0, &[0.2, 0.1, 0.0]).unwrap();
        assert!((out.nodes[2].unwrap().p_f - 0.28).abs() < 1e-15);
        assert!((out.chain_survival - 0.72).abs() < 1e-15);
        let zero = propagate_layer(&model, "n", 0, &[0.0; 3]).unwrap();
        assert!(zero.nodes.iter().all(|n| n.unwrap().p_f == 0.0));
        let dead = propagate_layer(&model, "n", 0, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(dead.nodes[2].unwrap().p_f, 1.0);
    }

    #[test]
    fn occurrence_decomposition() {
        let (states, loc) = configuration_occurrence(&[0.72]);
        assert_eq!(states[0].p_occ, 0.72);
        assert!((loc - 0.28).abs() < 1e-15);
        let (states, loc) = configuration_occurrence(&[0.5, 0.5]);
        assert_eq!([states[0].p_occ, states[1].p_occ], [0.5, 0.25]);
        assert_eq!(loc, 0.25);
        assert_eq!(configuration_occurrence(&[0.0, 0.0, 0.0]).1, 1.0);
    }

    #[test]
    fn probabilistic_coupling() {
        let m = vec![vec![true]];
        assert_eq!(couple_layers_prob(&m, &[0.0], &[0.4]).unwrap(), vec![0.4]);
        assert!((couple_layers_prob(&m, &[0.3], &[0.4]).unwrap()[0] - 0.58).abs() < 1e-15);
        assert_eq!(couple_layers_prob(&[vec![false]], &[0.9], &[0.4]).unwrap(), vec![0.4]);
        assert!(couple_layers_prob(&m, &[0.1, 0.2], &[0.4]).is_err());
    }

    fn coupled() -> SystemModel {
        let (mut nodes, a) = chain(&["a1", "a2"], "a");
        let (more, b) = chain(&["b1", "b2", "b3"], "b");
        nodes.extend(more);
        let dep = InterNetworkDependency {
            from_network: "a".into(),
            to_network: "b".into(),
            matrix: vec![vec![false, true, false], vec![false, false, false]],
        };
        SystemModel::new(nodes, vec![a, b], vec![dep])
    }

    #[test]
    fn dependency_adds_upstream_failure() {
        let model = coupled();
        let state = solve_system(&model, &[0.3, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let b = state.network("b").unwrap();
        assert!((b.nodes[1].p_cf - 0.3).abs() < 1e-15);
        assert!((b.nodes[2].p_f - 0.3).abs() < 1e-15);
        assert!((b.configurations[0].chain_survival - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_dependencies_decouple() {
        let mut model = coupled();
        model.dependencies.clear();
        let p = [0.1, 0.2, 0.3, 0.4, 0.5];
        let joint = solve_system(&model, &p).unwrap();
        let (nodes, b) = chain(&["b1", "b2", "b3"], "b");
        let alone = solve_system(&SystemModel::new(nodes, vec![b], vec![]), &p[2..]).unwrap();
        assert_eq!(joint.networks[1], alone.networks[0]);
    }

    #[test]
    fn mutual_dependency_converges() {
        let (mut nodes, a) = chain(&["a1", "a2"], "a");
        let (more, b) = chain(&["b1", "b2"], "b");
        nodes.extend(more);
        let deps = vec![
            InterNetworkDependency {
                from_network: "a".into(),
                to_network: "b".into(),
                matrix: vec![vec![false, false], vec![true, false]],
            },
            InterNetworkDependency {
                from_network: "b".into(),
                to_network: "a".into(),
                matrix: vec![vec![false, false], vec![true, false]],
            },
        ];
        let model = SystemModel::new(nodes, vec![a, b], deps);
        assert_eq!(model.solve_order().len(), 1);
        let state = solve_system(&model, &[0.1, 0.0, 0.2, 0.0]).unwrap();
        // a1 depends on b2 which depends on b1 and a2 which depends on a1.
        let a1 = state.p_f[0];
        let b1 = state.p_f[2];
        assert!((a1 - union(0.1, union(0.2, a1))).abs() < 1e-9);
        assert!((b1 - union(0.2, union(0.1, b1))).abs() < 1e-9);
    }

    #[test]
    fn importance_on_chain() {
        let (nodes, net) = chain(&["s", "m", "t"], "n");
        let model = SystemModel::new(nodes, vec![net], vec![]);
        let series = vec![vec![0.2, 0.1, 0.0], vec![0.2, 0.0, 0.0]];
        let imp = node_importance(&model, &series, "m", "t").unwrap();
        assert!((imp[0] - 0.08).abs() < 1e-15);
        assert_eq!(imp[1], 0.0);
        assert!(node_importance(&model, &series, "zz", "t").is_err());
    }
}
