//! System-of-networks data model.
//!
//! A [`SystemModel`] holds several [`Network`]s. Each network owns an ordered
//! stack of [`Configuration`] layers: mutually exclusive supply topologies
//! over the same node set, ranked by hierarchy (index 0 is the ordinary
//! supply line, later layers are backups). Networks are coupled through
//! [`InterNetworkDependency`] incidence matrices.
//!
//! Structural rules are checked by [`validate_topology`], which reports
//! violations as data instead of failing.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::HazardKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Source,
    Intermediate,
    Target,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Source => "source",
            NodeKind::Intermediate => "intermediate",
            NodeKind::Target => "target",
        }
    }
}

/// How a node is exposed to one hazard kind.
///
/// `intensity` is the node's site value (PGA, inundation depth, ...) used by
/// events that read intensities from the site table. `None` marks the node
/// as exempt from site-wide events of that kind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Exposure {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutonomySpec {
    pub curve: String,
    /// Overrides the capacity of a step-shaped curve for this node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_hours: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub network_id: String,
    pub kind: NodeKind,
    pub partial_source: bool,
    /// Component type used to normalise the system score; defaults to the kind.
    pub category: Option<String>,
    pub site: BTreeMap<HazardKind, Exposure>,
    pub autonomy: Option<AutonomySpec>,
    pub redundancy_group: Option<String>,
}

impl Node {
    pub fn new(id: impl Into<String>, network_id: impl Into<String>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            network_id: network_id.into(),
            kind,
            partial_source: false,
            category: None,
            site: BTreeMap::new(),
            autonomy: None,
            redundancy_group: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.redundancy_group = Some(group.into());
        self
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn partial(mut self) -> Self {
        self.partial_source = true;
        self
    }

    pub fn category(&self) -> &str {
        self.category.as_deref().unwrap_or(self.kind.as_str())
    }
}

/// Square boolean matrix over a network's nodes. `has_edge(x, y)` means `y`
/// draws supply from `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    size: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn new(size: usize) -> Self {
        Adjacency {
            size,
            cells: vec![false; size * size],
        }
    }

    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = Adjacency::new(size);
        for &(from, to) in edges {
            if from >= size || to >= size {
                return Err(Error::DimensionMismatch {
                    context: "adjacency edge".into(),
                    expected: format!("indices < {size}"),
                    found: format!("({from}, {to})"),
                });
            }
            adjacency.set(from, to, true);
        }
        Ok(adjacency)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.cells[from * self.size + to]
    }

    pub fn set(&mut self, from: usize, to: usize, value: bool) {
        self.cells[from * self.size + to] = value;
    }

    /// Column sum: number of inflow edges of `to`.
    pub fn in_degree(&self, to: usize) -> usize {
        (0..self.size).filter(|&x| self.has_edge(x, to)).count()
    }

    pub fn out_degree(&self, from: usize) -> usize {
        (0..self.size).filter(|&y| self.has_edge(from, y)).count()
    }

    pub fn parents(&self, to: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.size).filter(move |&x| self.has_edge(x, to))
    }

    pub fn children(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.size).filter(move |&y| self.has_edge(from, y))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.size).flat_map(move |x| (0..self.size).filter(move |&y| self.has_edge(x, y)).map(move |y| (x, y)))
    }

    /// Copy with rows and columns reordered so that new index `i` is old
    /// index `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Adjacency {
        let mut out = Adjacency::new(self.size);
        for (i, &oi) in order.iter().enumerate() {
            for (j, &oj) in order.iter().enumerate() {
                out.set(i, j, self.has_edge(oi, oj));
            }
        }
        out
    }
}

/// One supply layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub label: String,
    /// Hierarchy rank; 0 is the ordinary supply line.
    pub layer_index: usize,
    /// Degraded layers may leave targets unserved (post-damage stubs).
    pub degraded: bool,
    pub adjacency: Adjacency,
    members: Vec<bool>,
}

impl Configuration {
    pub fn new(label: impl Into<String>, layer_index: usize, adjacency: Adjacency) -> Self {
        let mut members = vec![false; adjacency.size()];
        for (x, y) in adjacency.edges() {
            members[x] = true;
            members[y] = true;
        }
        Configuration {
            label: label.into(),
            layer_index,
            degraded: false,
            adjacency,
            members,
        }
    }

    /// Adds nodes that take part in the layer without any edge (a target
    /// that is its own supply, for instance).
    pub fn with_members(mut self, extra: &[usize]) -> Self {
        for &i in extra {
            if i < self.members.len() {
                self.members[i] = true;
            }
        }
        self
    }

    pub fn degraded(mut self, degraded: bool) -> Self {
        self.degraded = degraded;
        self
    }

    pub fn is_member(&self, local: usize) -> bool {
        self.members.get(local).copied().unwrap_or(false)
    }

    pub fn member_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i)
    }

    pub(crate) fn permuted(&self, order: &[usize]) -> Configuration {
        Configuration {
            label: self.label.clone(),
            layer_index: self.layer_index,
            degraded: self.degraded,
            adjacency: self.adjacency.permuted(order),
            members: order.iter().map(|&o| self.members[o]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub id: String,
    /// Node ids; positions in this list index every adjacency matrix.
    pub nodes: Vec<String>,
    pub configurations: Vec<Configuration>,
    pub targets: Vec<String>,
}

impl Network {
    pub fn position(&self, node_id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node_id)
    }

    pub fn configuration(&self, index: usize) -> Result<&Configuration> {
        self.configurations.get(index).ok_or_else(|| Error::IndexOutOfRange {
            network: self.id.clone(),
            index,
            count: self.configurations.len(),
        })
    }

    /// Appends a layer at the lowest hierarchy rank.
    pub fn push_configuration(&mut self, mut config: Configuration) {
        config.layer_index = self.configurations.len();
        self.configurations.push(config);
    }
}

/// Boolean incidence from the nodes of `from_network` (rows) to the nodes of
/// `to_network` (columns): entry `(x, y)` means node `y` needs node `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterNetworkDependency {
    pub from_network: String,
    pub to_network: String,
    pub matrix: Vec<Vec<bool>>,
}

impl InterNetworkDependency {
    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    /// `(from_position, to_position)` pairs of every link.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.matrix
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.iter().enumerate().filter(|(_, v)| **v).map(move |(y, _)| (x, y)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub networks: Vec<Network>,
    pub nodes: Vec<Node>,
    pub dependencies: Vec<InterNetworkDependency>,
    node_index: HashMap<String, usize>,
    network_index: HashMap<String, usize>,
}

impl SystemModel {
    /// Builds the lookup tables. Duplicate or dangling ids are kept (first
    /// occurrence wins) so that [`validate_topology`] can report them.
    pub fn new(nodes: Vec<Node>, networks: Vec<Network>, dependencies: Vec<InterNetworkDependency>) -> Self {
        let mut node_index = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            node_index.entry(node.id.clone()).or_insert(i);
        }
        let mut network_index = HashMap::new();
        for (i, net) in networks.iter().enumerate() {
            network_index.entry(net.id.clone()).or_insert(i);
        }
        SystemModel {
            networks,
            nodes,
            dependencies,
            node_index,
            network_index,
        }
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    pub fn require_node(&self, id: &str) -> Result<usize> {
        self.node_index(id).ok_or_else(|| Error::UnknownId {
            kind: "node",
            id: id.to_string(),
        })
    }

    pub fn network_index(&self, id: &str) -> Option<usize> {
        self.network_index.get(id).copied()
    }

    pub fn network(&self, id: &str) -> Option<&Network> {
        self.network_index(id).map(|i| &self.networks[i])
    }

    pub fn require_network(&self, id: &str) -> Result<usize> {
        self.network_index(id).ok_or_else(|| Error::UnknownId {
            kind: "network",
            id: id.to_string(),
        })
    }

    /// Global node index for each position of a network's node list.
    pub fn network_node_indices(&self, network: usize) -> Vec<Option<usize>> {
        self.networks[network].nodes.iter().map(|id| self.node_index(id)).collect()
    }

    pub fn append_configuration(&mut self, network_id: &str, config: Configuration) -> Result<()> {
        let n = self.require_network(network_id)?;
        let size = self.networks[n].nodes.len();
        if config.adjacency.size() != size {
            return Err(Error::DimensionMismatch {
                context: format!("configuration '{}' for network '{network_id}'", config.label),
                expected: size.to_string(),
                found: config.adjacency.size().to_string(),
            });
        }
        self.networks[n].push_configuration(config);
        Ok(())
    }

    /// Networks grouped into strongly connected components of the dependency
    /// graph, listed upstream first. Components with more than one network
    /// (or a self loop) are dependency cycles.
    pub fn solve_order(&self) -> Vec<Vec<usize>> {
        let mut graph = DiGraph::<usize, ()>::new();
        let handles: Vec<_> = (0..self.networks.len()).map(|i| graph.add_node(i)).collect();
        for dep in &self.dependencies {
            if let (Some(a), Some(b)) = (self.network_index(&dep.from_network), self.network_index(&dep.to_network)) {
                if dep.links().next().is_some() {
                    graph.update_edge(handles[a], handles[b], ());
                }
            }
        }
        // tarjan_scc yields components in reverse topological order.
        let mut sccs: Vec<Vec<usize>> = tarjan_scc(&graph)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|h| graph[h]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        sccs.reverse();
        sccs
    }

    pub fn enumerate_chains(&self, network_id: &str, config_index: usize) -> Result<Vec<Chain>> {
        enumerate_chains(self, network_id, config_index)
    }

    /// Same model with every network's node list reordered by `orders`
    /// (one permutation per network). Used to check order independence.
    pub fn with_permuted_nodes(&self, orders: &[Vec<usize>]) -> SystemModel {
        let networks = self
            .networks
            .iter()
            .zip(orders)
            .map(|(net, order)| Network {
                id: net.id.clone(),
                nodes: order.iter().map(|&o| net.nodes[o].clone()).collect(),
                configurations: net.configurations.iter().map(|c| c.permuted(order)).collect(),
                targets: net.targets.clone(),
            })
            .collect::<Vec<_>>();
        let dependencies = self
            .dependencies
            .iter()
            .map(|dep| {
                let from = self.network_index(&dep.from_network).map(|i| &orders[i]);
                let to = self.network_index(&dep.to_network).map(|i| &orders[i]);
                match (from, to) {
                    (Some(fo), Some(to)) if fo.len() == dep.rows() && to.len() == dep.cols() => InterNetworkDependency {
                        from_network: dep.from_network.clone(),
                        to_network: dep.to_network.clone(),
                        matrix: fo.iter().map(|&x| to.iter().map(|&y| dep.matrix[x][y]).collect()).collect(),
                    },
                    _ => dep.clone(),
                }
            })
            .collect();
        SystemModel::new(self.nodes.clone(), networks, dependencies)
    }
}

/// A source-to-target path of one configuration, in supply order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chain {
    pub nodes: Vec<String>,
}

/// One logical element of a layer: a single node or the members of a
/// redundancy group that are present in the layer together.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    /// Local positions in the network's node list.
    pub members: Vec<usize>,
    /// Index of the supplying unit inside [`LayerStructure::units`].
    pub parent: Option<usize>,
    pub group: Option<String>,
}

/// Tree of logical units of one configuration in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStructure {
    pub units: Vec<Unit>,
    /// Unit index for each local node position (None if not a member).
    pub unit_of: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum StructureIssue {
    MultipleInflow { node: String, parents: Vec<String> },
    GroupParents { group: String },
    GroupSelfEdge { group: String },
    Cycle,
}

impl LayerStructure {
    pub fn build(model: &SystemModel, network: &Network, config: &Configuration) -> Result<LayerStructure> {
        Self::analyse(model, network, config).map_err(|issues| {
            if issues.contains(&StructureIssue::Cycle) {
                Error::CyclicLayer {
                    network: network.id.clone(),
                    label: config.label.clone(),
                }
            } else {
                Error::StructuralMismatch {
                    network: network.id.clone(),
                    reason: format!("configuration '{}' breaks the single-inflow rule", config.label),
                }
            }
        })
    }

    pub(crate) fn analyse(
        model: &SystemModel,
        network: &Network,
        config: &Configuration,
    ) -> std::result::Result<LayerStructure, Vec<StructureIssue>> {
        let size = network.nodes.len();
        let adjacency = &config.adjacency;
        let group_of = |pos: usize| -> Option<&str> {
            model
                .node(&network.nodes[pos])
                .and_then(|n| n.redundancy_group.as_deref())
        };

        // Groups with at least two members present act as one unit.
        let mut group_members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for pos in config.member_positions() {
            if let Some(g) = group_of(pos) {
                group_members.entry(g).or_default().push(pos);
            }
        }
        group_members.retain(|_, m| m.len() >= 2);

        let mut unit_key: Vec<Option<String>> = vec![None; size];
        for pos in config.member_positions() {
            let key = match group_of(pos) {
                Some(g) if group_members.contains_key(g) => format!("group:{g}"),
                _ => format!("node:{}", network.nodes[pos]),
            };
            unit_key[pos] = Some(key);
        }

        let mut issues = Vec::new();
        let mut parent_key: BTreeMap<String, Option<String>> = BTreeMap::new();
        let mut keys_in_order: Vec<String> = Vec::new();
        let mut members_of: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for pos in config.member_positions() {
            let key = unit_key[pos].clone().expect("member has a key");
            let parents: BTreeSet<String> = adjacency
                .parents(pos)
                .filter_map(|x| unit_key[x].clone())
                .filter(|k| *k != key || !key.starts_with("group:"))
                .collect();
            if key.starts_with("group:") && adjacency.parents(pos).any(|x| unit_key[x].as_ref() == Some(&key)) {
                issues.push(StructureIssue::GroupSelfEdge {
                    group: key.trim_start_matches("group:").to_string(),
                });
            }
            if parents.len() > 1 {
                issues.push(StructureIssue::MultipleInflow {
                    node: network.nodes[pos].clone(),
                    parents: parents.iter().map(|k| k.split_once(':').map_or(k.clone(), |(_, v)| v.to_string())).collect(),
                });
            }
            let parent = parents.into_iter().next();
            match parent_key.get(&key) {
                None => {
                    parent_key.insert(key.clone(), parent);
                    keys_in_order.push(key.clone());
                }
                Some(existing) => {
                    if *existing != parent {
                        issues.push(StructureIssue::GroupParents {
                            group: key.trim_start_matches("group:").to_string(),
                        });
                    }
                }
            }
            members_of.entry(key).or_default().push(pos);
        }

        // Kahn's algorithm over unit keys.
        let index_of: HashMap<&String, usize> = keys_in_order.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let count = keys_in_order.len();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
        let mut indegree = vec![0usize; count];
        for (i, key) in keys_in_order.iter().enumerate() {
            if let Some(Some(p)) = parent_key.get(key) {
                if let Some(&pi) = index_of.get(p) {
                    children[pi].push(i);
                    indegree[i] += 1;
                }
            }
        }
        let mut queue: VecDeque<usize> = (0..count).filter(|&i| indegree[i] == 0).collect();
        let mut topo = Vec::with_capacity(count);
        while let Some(i) = queue.pop_front() {
            topo.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if topo.len() != count || has_node_cycle(adjacency, config) {
            issues.push(StructureIssue::Cycle);
        }
        if !issues.is_empty() {
            return Err(issues);
        }

        let mut new_index = vec![0usize; count];
        for (new, &old) in topo.iter().enumerate() {
            new_index[old] = new;
        }
        let mut unit_of = vec![None; size];
        let units = topo
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let key = &keys_in_order[old];
                let members = members_of[key].clone();
                for &m in &members {
                    unit_of[m] = Some(new);
                }
                let parent = parent_key[key].as_ref().map(|p| new_index[index_of[p]]);
                let group = key.strip_prefix("group:").map(str::to_string);
                Unit { members, parent, group }
            })
            .collect();
        Ok(LayerStructure { units, unit_of })
    }
}

fn has_node_cycle(adjacency: &Adjacency, config: &Configuration) -> bool {
    let size = adjacency.size();
    let mut indegree: Vec<usize> = (0..size).map(|y| adjacency.in_degree(y)).collect();
    let mut queue: VecDeque<usize> = (0..size).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(x) = queue.pop_front() {
        seen += 1;
        for y in adjacency.children(x) {
            indegree[y] -= 1;
            if indegree[y] == 0 {
                queue.push_back(y);
            }
        }
    }
    let _ = config;
    seen != size
}

/// Every source-to-target path of the given layer.
pub fn enumerate_chains(model: &SystemModel, network_id: &str, config_index: usize) -> Result<Vec<Chain>> {
    let net = &model.networks[model.require_network(network_id)?];
    let config = net.configuration(config_index)?;
    if has_node_cycle(&config.adjacency, config) {
        return Err(Error::CyclicLayer {
            network: net.id.clone(),
            label: config.label.clone(),
        });
    }
    let kind_of = |pos: usize| model.node(&net.nodes[pos]).map(|n| n.kind);
    let mut chains = Vec::new();
    for root in config.member_positions() {
        if config.adjacency.in_degree(root) != 0 || kind_of(root) != Some(NodeKind::Source) {
            continue;
        }
        let mut path = vec![root];
        walk(config, &kind_of, &mut path, &mut |p| {
            chains.push(Chain {
                nodes: p.iter().map(|&i| net.nodes[i].clone()).collect(),
            })
        });
    }
    Ok(chains)
}

fn walk(
    config: &Configuration,
    kind_of: &dyn Fn(usize) -> Option<NodeKind>,
    path: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    let last = *path.last().expect("non-empty path");
    if kind_of(last) == Some(NodeKind::Target) {
        emit(path);
    }
    let children: Vec<usize> = config.adjacency.children(last).collect();
    for child in children {
        path.push(child);
        walk(config, kind_of, path, emit);
        path.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    DuplicateId,
    UnknownReference,
    NetworkMembership,
    NoConfiguration,
    SingleInflow,
    Acyclic,
    SourceInflow,
    TargetOutflow,
    RootNotSource,
    LayerWithoutTarget,
    TargetUnreachable,
    PartialSource,
    RedundancyGroup,
    DependencyDimension,
    SelfDependency,
}

impl Rule {
    pub fn description(self) -> &'static str {
        match self {
            Rule::DuplicateId => "node ids must be unique",
            Rule::UnknownReference => "unresolved reference",
            Rule::NetworkMembership => "node listed in a network it does not declare",
            Rule::NoConfiguration => "network needs at least one configuration",
            Rule::SingleInflow => "single-inflow rule",
            Rule::Acyclic => "configuration must be acyclic",
            Rule::SourceInflow => "source nodes have no inflow",
            Rule::TargetOutflow => "target nodes have no outflow",
            Rule::RootNotSource => "node without supply in a non-degraded configuration",
            Rule::LayerWithoutTarget => "configuration serves no target",
            Rule::TargetUnreachable => "target unreachable from any source",
            Rule::PartialSource => "source feeds only part of the targets",
            Rule::RedundancyGroup => "redundancy group consistency",
            Rule::DependencyDimension => "dependency matrix dimensions",
            Rule::SelfDependency => "self dependency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub rule: Rule,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule.description(), self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

struct Collector(BTreeSet<Violation>);

impl Collector {
    fn push(&mut self, rule: Rule, subject: impl Into<String>, message: impl Into<String>) {
        self.0.insert(Violation {
            rule,
            subject: subject.into(),
            message: message.into(),
        });
    }
}

/// Checks structural invariants. Violations are returned sorted, so the
/// result does not depend on declaration order.
pub fn validate_topology(model: &SystemModel) -> ValidationReport {
    let mut out = Collector(BTreeSet::new());

    let mut seen = HashMap::new();
    for node in &model.nodes {
        *seen.entry(node.id.as_str()).or_insert(0usize) += 1;
    }
    for (id, count) in seen {
        if count > 1 {
            out.push(Rule::DuplicateId, id, format!("node id '{id}' declared {count} times"));
        }
    }

    for net in &model.networks {
        validate_network(model, net, &mut out);
    }
    validate_groups(model, &mut out);
    validate_dependencies(model, &mut out);

    ValidationReport {
        violations: out.0.into_iter().collect(),
    }
}

fn validate_network(model: &SystemModel, net: &Network, out: &mut Collector) {
    let nodes: Vec<Option<&Node>> = net.nodes.iter().map(|id| model.node(id)).collect();
    for (id, node) in net.nodes.iter().zip(&nodes) {
        match node {
            None => out.push(Rule::UnknownReference, id, format!("network '{}' lists unknown node '{id}'", net.id)),
            Some(n) if n.network_id != net.id => out.push(
                Rule::NetworkMembership,
                id,
                format!("node '{id}' belongs to '{}' but is listed in '{}'", n.network_id, net.id),
            ),
            _ => {}
        }
    }
    for t in &net.targets {
        match net.position(t).and_then(|p| nodes[p]) {
            None => out.push(Rule::UnknownReference, t, format!("target '{t}' is not a node of network '{}'", net.id)),
            Some(n) if n.kind != NodeKind::Target => out.push(
                Rule::UnknownReference,
                t,
                format!("target '{t}' of network '{}' has kind {}", net.id, n.kind.as_str()),
            ),
            _ => {}
        }
    }
    if net.configurations.is_empty() {
        out.push(Rule::NoConfiguration, &net.id, format!("network '{}' has no configuration", net.id));
    }

    let kind = |pos: usize| nodes[pos].map(|n| n.kind);
    let mut served: BTreeSet<usize> = BTreeSet::new();
    let mut reached_by_source: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();

    for config in &net.configurations {
        let adj = &config.adjacency;
        if adj.size() != net.nodes.len() {
            out.push(
                Rule::DependencyDimension,
                format!("{}/{}", net.id, config.label),
                format!(
                    "configuration '{}' has a {}x{} adjacency for {} nodes",
                    config.label,
                    adj.size(),
                    adj.size(),
                    net.nodes.len()
                ),
            );
            continue;
        }
        let layer = format!("{}/{}", net.id, config.label);
        match LayerStructure::analyse(model, net, config) {
            Ok(_) => {}
            Err(issues) => {
                for issue in issues {
                    match issue {
                        StructureIssue::MultipleInflow { node, parents } => out.push(
                            Rule::SingleInflow,
                            format!("{layer}/{node}"),
                            format!(
                                "node '{node}' has {} inflow edges ({}) in configuration '{}'; at most one is allowed",
                                parents.len(),
                                parents.join(", "),
                                config.label
                            ),
                        ),
                        StructureIssue::GroupParents { group } => out.push(
                            Rule::RedundancyGroup,
                            format!("{layer}/{group}"),
                            format!("members of redundancy group '{group}' draw from different suppliers in '{}'", config.label),
                        ),
                        StructureIssue::GroupSelfEdge { group } => out.push(
                            Rule::RedundancyGroup,
                            format!("{layer}/{group}"),
                            format!("redundancy group '{group}' feeds itself in '{}'", config.label),
                        ),
                        StructureIssue::Cycle => {
                            out.push(Rule::Acyclic, &layer, format!("configuration '{}' of '{}' contains a cycle", config.label, net.id))
                        }
                    }
                }
            }
        }

        let mut has_target = false;
        for pos in config.member_positions() {
            let id = &net.nodes[pos];
            match kind(pos) {
                Some(NodeKind::Source) if adj.in_degree(pos) > 0 => out.push(
                    Rule::SourceInflow,
                    format!("{layer}/{id}"),
                    format!("source '{id}' has an inflow edge in '{}'", config.label),
                ),
                Some(NodeKind::Target) => {
                    has_target = true;
                    if adj.out_degree(pos) > 0 {
                        out.push(
                            Rule::TargetOutflow,
                            format!("{layer}/{id}"),
                            format!("target '{id}' has an outflow edge in '{}'", config.label),
                        );
                    }
                }
                _ => {}
            }
            if !config.degraded && adj.in_degree(pos) == 0 && kind(pos).is_some() && kind(pos) != Some(NodeKind::Source) {
                out.push(
                    Rule::RootNotSource,
                    format!("{layer}/{id}"),
                    format!("node '{id}' has no supply in configuration '{}'", config.label),
                );
            }
        }
        if !config.degraded && !has_target {
            out.push(Rule::LayerWithoutTarget, &layer, format!("configuration '{}' of '{}' contains no target", config.label, net.id));
        }

        if !config.degraded && !has_node_cycle(adj, config) {
            for root in config.member_positions() {
                if adj.in_degree(root) != 0 || kind(root) != Some(NodeKind::Source) {
                    continue;
                }
                let reach = reachable(adj, root);
                for &r in &reach {
                    if kind(r) == Some(NodeKind::Target) {
                        served.insert(r);
                        reached_by_source.entry(root).or_default().insert(r);
                    }
                }
                reached_by_source.entry(root).or_default();
            }
        }
    }

    let targets: BTreeSet<usize> = net.targets.iter().filter_map(|t| net.position(t)).collect();
    for &t in &targets {
        if !served.contains(&t) {
            let id = &net.nodes[t];
            out.push(Rule::TargetUnreachable, id, format!("target '{id}' of network '{}' is not reachable from any source", net.id));
        }
    }
    for (source, reach) in reached_by_source {
        let node = nodes[source];
        if node.is_some_and(|n| !n.partial_source) && !targets.is_subset(&reach) {
            let id = &net.nodes[source];
            out.push(
                Rule::PartialSource,
                id,
                format!("source '{id}' reaches {} of {} targets but is not marked partial", reach.len(), targets.len()),
            );
        }
    }
}

fn reachable(adj: &Adjacency, root: usize) -> Vec<usize> {
    let mut seen = vec![false; adj.size()];
    let mut stack = vec![root];
    let mut out = Vec::new();
    while let Some(x) = stack.pop() {
        if std::mem::replace(&mut seen[x], true) {
            continue;
        }
        out.push(x);
        stack.extend(adj.children(x));
    }
    out
}

fn validate_groups(model: &SystemModel, out: &mut Collector) {
    let mut groups: BTreeMap<&str, Vec<&Node>> = BTreeMap::new();
    for node in &model.nodes {
        if let Some(g) = node.redundancy_group.as_deref() {
            groups.entry(g).or_default().push(node);
        }
    }
    for (group, members) in groups {
        let networks: BTreeSet<&str> = members.iter().map(|n| n.network_id.as_str()).collect();
        let kinds: BTreeSet<NodeKind> = members.iter().map(|n| n.kind).collect();
        if networks.len() > 1 {
            out.push(Rule::RedundancyGroup, group, format!("redundancy group '{group}' spans networks"));
        }
        if kinds.len() > 1 {
            out.push(Rule::RedundancyGroup, group, format!("redundancy group '{group}' mixes node kinds"));
        }
    }
}

fn validate_dependencies(model: &SystemModel, out: &mut Collector) {
    for dep in &model.dependencies {
        let subject = format!("{}->{}", dep.from_network, dep.to_network);
        let from = model.network(&dep.from_network);
        let to = model.network(&dep.to_network);
        if from.is_none() {
            out.push(Rule::UnknownReference, &subject, format!("dependency references unknown network '{}'", dep.from_network));
        }
        if to.is_none() {
            out.push(Rule::UnknownReference, &subject, format!("dependency references unknown network '{}'", dep.to_network));
        }
        if dep.from_network == dep.to_network {
            out.push(Rule::SelfDependency, &subject, format!("network '{}' depends on itself", dep.from_network));
        }
        if let (Some(f), Some(t)) = (from, to) {
            let ragged = dep.matrix.iter().any(|row| row.len() != dep.cols());
            if dep.rows() != f.nodes.len() || dep.cols() != t.nodes.len() || ragged {
                out.push(
                    Rule::DependencyDimension,
                    &subject,
                    format!(
                        "dependency matrix is {}x{} but networks have {} and {} nodes",
                        dep.rows(),
                        dep.cols(),
                        f.nodes.len(),
                        t.nodes.len()
                    ),
                );
            } else {
                for (x, y) in dep.links() {
                    if f.nodes[x] == t.nodes[y] {
                        out.push(Rule::SelfDependency, &f.nodes[x], format!("node '{}' depends on itself", f.nodes[x]));
                    }
                }
            }
        }
    }
}
