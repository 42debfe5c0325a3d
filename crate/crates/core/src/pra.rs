//! Fault trees and event trees, and their comparison with the cascade model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cascade::{configuration_occurrence, propagate_layer, solve_system, ConfigurationState};
use crate::error::{check_probability, Error, Result};
use crate::graph::{Adjacency, Configuration, Network, Node, NodeKind, SystemModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FaultNode {
    Basic {
        id: String,
        probability: f64,
    },
    And {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        children: Vec<FaultNode>,
    },
    Or {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        children: Vec<FaultNode>,
    },
}

impl FaultNode {
    pub fn basic(id: impl Into<String>, probability: f64) -> Self {
        FaultNode::Basic {
            id: id.into(),
            probability,
        }
    }

    pub fn and(children: Vec<FaultNode>) -> Self {
        FaultNode::And { label: None, children }
    }

    pub fn or(children: Vec<FaultNode>) -> Self {
        FaultNode::Or { label: None, children }
    }

    fn collect_ids<'a>(&'a self, seen: &mut BTreeSet<&'a str>) -> Result<()> {
        match self {
            FaultNode::Basic { id, probability } => {
                check_probability(id, *probability)?;
                if !seen.insert(id) {
                    return Err(Error::MalformedTree(format!("basic event '{id}' appears more than once")));
                }
                Ok(())
            }
            FaultNode::And { children, label } | FaultNode::Or { children, label } => {
                if children.is_empty() {
                    return Err(Error::MalformedTree(format!(
                        "gate '{}' has no inputs",
                        label.as_deref().unwrap_or("(unnamed)")
                    )));
                }
                children.iter().try_for_each(|c| c.collect_ids(seen))
            }
        }
    }

    fn probability(&self) -> f64 {
        match self {
            FaultNode::Basic { probability, .. } => *probability,
            FaultNode::And { children, .. } => children.iter().map(FaultNode::probability).product(),
            FaultNode::Or { children, .. } => 1.0 - children.iter().map(|c| 1.0 - c.probability()).product::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultTree {
    pub name: String,
    pub root: FaultNode,
}

/// Probability of the top event, assuming independent basic events.
pub fn eval_fault_tree(tree: &FaultNode) -> Result<f64> {
    tree.collect_ids(&mut BTreeSet::new())?;
    Ok(tree.probability())
}

/// One mitigation stage of an event tree. Its success probability is given
/// directly or as the complement of a fault tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_tree: Option<FaultNode>,
}

impl Branch {
    pub fn new(label: impl Into<String>, success_probability: f64) -> Self {
        Branch {
            label: label.into(),
            success_probability: Some(success_probability),
            failure_tree: None,
        }
    }

    pub fn success(&self) -> Result<f64> {
        match (&self.success_probability, &self.failure_tree) {
            (Some(p), None) => check_probability(&self.label, *p),
            (None, Some(tree)) => Ok(1.0 - eval_fault_tree(tree)?),
            _ => Err(Error::MalformedTree(format!(
                "branch '{}' needs exactly one of a success probability or a failure tree",
                self.label
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTree {
    pub name: String,
    pub initiating_frequency: f64,
    /// Stages in the order they are challenged; the first success ends the
    /// sequence.
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// `(branch label, succeeded)` along the path.
    pub path: Vec<(String, bool)>,
    pub probability: f64,
    pub frequency: f64,
}

impl Sequence {
    pub fn label(&self) -> String {
        self.path
            .iter()
            .map(|(l, ok)| format!("{}{l}", if *ok { "+" } else { "-" }))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn eval_event_tree(tree: &EventTree) -> Result<Vec<Sequence>> {
    if !(tree.initiating_frequency.is_finite() && tree.initiating_frequency >= 0.0) {
        return Err(Error::MalformedTree(format!(
            "initiating frequency {} of '{}' must be finite and nonnegative",
            tree.initiating_frequency, tree.name
        )));
    }
    if tree.branches.is_empty() {
        return Err(Error::MalformedTree(format!("event tree '{}' has no branches", tree.name)));
    }
    let mut sequences = Vec::with_capacity(tree.branches.len() + 1);
    let mut path = Vec::new();
    let mut reach = 1.0;
    for branch in &tree.branches {
        let s = branch.success()?;
        let mut ok_path = path.clone();
        ok_path.push((branch.label.clone(), true));
        sequences.push(Sequence {
            path: ok_path,
            probability: reach * s,
            frequency: tree.initiating_frequency * reach * s,
        });
        path.push((branch.label.clone(), false));
        reach *= 1.0 - s;
    }
    sequences.push(Sequence {
        path,
        probability: reach,
        frequency: tree.initiating_frequency * reach,
    });
    Ok(sequences)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub fta: f64,
    pub iim: f64,
    pub diff: f64,
}

fn series_network(probabilities: &[f64], grouped: bool) -> (SystemModel, Vec<f64>) {
    let n = probabilities.len();
    let mut nodes: Vec<Node> = (0..n)
        .map(|i| {
            let kind = if grouped || i == 0 {
                NodeKind::Source
            } else {
                NodeKind::Intermediate
            };
            let node = Node::new(format!("e{i}"), "events", kind);
            if grouped {
                node.with_group("parallel")
            } else {
                node
            }
        })
        .collect();
    nodes.push(Node::new("top", "events", NodeKind::Target));
    let edges: Vec<(usize, usize)> = if grouped {
        (0..n).map(|i| (i, n)).collect()
    } else {
        (0..n).map(|i| (i, i + 1)).collect()
    };
    let net = Network {
        id: "events".into(),
        nodes: nodes.iter().map(|x| x.id.clone()).collect(),
        configurations: vec![Configuration::new("events", 0, Adjacency::from_edges(n + 1, &edges).expect("in range"))],
        targets: vec!["top".into()],
    };
    let mut p = probabilities.to_vec();
    p.push(0.0);
    (SystemModel::new(nodes, vec![net], vec![]), p)
}

fn compare(probabilities: &[f64], grouped: bool) -> Result<Comparison> {
    if probabilities.is_empty() {
        return Err(Error::EmptyInput("basic events"));
    }
    let leaves = probabilities
        .iter()
        .enumerate()
        .map(|(i, &p)| FaultNode::basic(format!("e{i}"), p))
        .collect();
    let fta = eval_fault_tree(&if grouped { FaultNode::and(leaves) } else { FaultNode::or(leaves) })?;
    let (model, p) = series_network(probabilities, grouped);
    let outcome = propagate_layer(&model, "events", 0, &p)?;
    let iim = outcome.nodes[probabilities.len()].expect("target is a member").p_f;
    Ok(Comparison {
        fta,
        iim,
        diff: (fta - iim).abs(),
    })
}

/// OR gate against a series chain of the same events feeding one target.
pub fn iim_or_equivalence(events: &[f64]) -> Result<Comparison> {
    compare(events, false)
}

/// AND gate against a redundancy group of the same events feeding one target.
pub fn iim_and_equivalence(events: &[f64]) -> Result<Comparison> {
    compare(events, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaComparison {
    pub sequences: Vec<Sequence>,
    pub iim: Vec<ConfigurationState>,
    pub iim_loc: f64,
    pub max_diff: f64,
}

/// Event tree whose stages are the layer survivals, computed from fault
/// trees of the layer members, against the cascade's occurrence
/// probabilities. `p_sf` follows the network's node order; dependencies on
/// other networks are ignored.
pub fn iim_eta_equivalence(model: &SystemModel, network_id: &str, p_sf: &[f64]) -> Result<EtaComparison> {
    let k = model.require_network(network_id)?;
    let net = &model.networks[k];
    if p_sf.len() != net.nodes.len() {
        return Err(Error::DimensionMismatch {
            context: format!("self-failure vector of network '{network_id}'"),
            expected: net.nodes.len().to_string(),
            found: p_sf.len().to_string(),
        });
    }
    let nodes: Vec<&Node> = net
        .nodes
        .iter()
        .map(|id| model.node(id).ok_or_else(|| Error::UnknownId { kind: "node", id: id.clone() }))
        .collect::<Result<_>>()?;

    let mut branches = Vec::with_capacity(net.configurations.len());
    for config in &net.configurations {
        check_full_flow(net, config, &nodes)?;
        branches.push(Branch {
            label: config.label.clone(),
            success_probability: None,
            failure_tree: Some(layer_fault_tree(config, &nodes, p_sf)),
        });
    }
    let tree = EventTree {
        name: network_id.to_string(),
        initiating_frequency: 1.0,
        branches,
    };
    let sequences = eval_event_tree(&tree)?;

    let isolated = SystemModel::new(nodes.iter().map(|n| (*n).clone()).collect(), vec![net.clone()], vec![]);
    let global: Vec<f64> = isolated
        .nodes
        .iter()
        .map(|n| p_sf[net.position(&n.id).expect("network member")])
        .collect();
    let state = solve_system(&isolated, &global)?;
    let iim = state.networks[0].configurations.clone();
    let iim_loc = state.networks[0].loc;
    let mut max_diff = (sequences.last().expect("residual sequence").probability - iim_loc).abs();
    for (seq, cfg) in sequences.iter().zip(&iim) {
        max_diff = max_diff.max((seq.probability - cfg.p_occ).abs());
    }
    Ok(EtaComparison {
        sequences,
        iim,
        iim_loc,
        max_diff,
    })
}

fn check_full_flow(net: &Network, config: &Configuration, nodes: &[&Node]) -> Result<()> {
    let mismatch = |reason: String| {
        Err(Error::StructuralMismatch {
            network: net.id.clone(),
            reason,
        })
    };
    if config.degraded {
        return mismatch(format!("configuration '{}' is degraded", config.label));
    }
    for pos in config.member_positions() {
        if config.adjacency.in_degree(pos) == 0 && nodes[pos].kind != NodeKind::Source {
            return mismatch(format!("configuration '{}' has an unsupplied node '{}'", config.label, net.nodes[pos]));
        }
    }
    for t in &net.targets {
        let served = net.position(t).is_some_and(|p| config.is_member(p));
        if !served {
            return mismatch(format!(
                "configuration '{}' does not carry the full flow to target '{t}'",
                config.label
            ));
        }
    }
    Ok(())
}

/// The layer fails if any of its elements fails; a redundancy group fails
/// only if all of its members in the layer fail.
fn layer_fault_tree(config: &Configuration, nodes: &[&Node], p_sf: &[f64]) -> FaultNode {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut singles = Vec::new();
    for pos in config.member_positions() {
        match nodes[pos].redundancy_group.as_deref() {
            Some(g) => groups.entry(g).or_default().push(pos),
            None => singles.push(pos),
        }
    }
    let mut children: Vec<FaultNode> = Vec::new();
    for (_, members) in groups {
        if members.len() == 1 {
            singles.push(members[0]);
        } else {
            children.push(FaultNode::and(
                members
                    .iter()
                    .map(|&m| FaultNode::basic(format!("{}@{}", nodes[m].id, config.label), p_sf[m]))
                    .collect(),
            ));
        }
    }
    children.extend(
        singles
            .into_iter()
            .map(|m| FaultNode::basic(format!("{}@{}", nodes[m].id, config.label), p_sf[m])),
    );
    if children.is_empty() {
        children.push(FaultNode::basic(format!("empty@{}", config.label), 1.0));
    }
    FaultNode::Or {
        label: Some(config.label.clone()),
        children,
    }
}

/// Occurrence probabilities straight from a list of layer survivals, as an
/// event tree would produce them.
pub fn eta_from_survivals(labels: &[String], survivals: &[f64]) -> Result<Vec<Sequence>> {
    let tree = EventTree {
        name: "layers".into(),
        initiating_frequency: 1.0,
        branches: labels.iter().zip(survivals).map(|(l, &s)| Branch::new(l.clone(), s)).collect(),
    };
    let sequences = eval_event_tree(&tree)?;
    debug_assert_eq!(sequences.len(), configuration_occurrence(survivals).0.len() + 1);
    Ok(sequences)
}
