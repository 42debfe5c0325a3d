use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{ReferenceError, ScenarioError};
use crate::engine::{run_ensemble, run_timeline_with, AutonomyMode, Intervention, RunOptions, Timeline};
use crate::error::Result;
use crate::graph::{
    Adjacency, AutonomySpec, Configuration, Exposure, InterNetworkDependency, Network, Node, NodeKind, SystemModel,
};
use crate::hazard::{CurveLibrary, EventVector, HazardIntensity, HazardKind};
use crate::pra::{EventTree, FaultTree};
use crate::report::ProbabilityReport;

pub const SCHEMA_VERSION: u32 = 1;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub model: ModelBlock,
    #[serde(default)]
    pub curves: CurveLibrary,
    /// Curve library merged under `curves` at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves_file: Option<String>,
    pub timeline: TimelineBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pra: Option<PraBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub networks: Vec<NetworkDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependencies: Vec<DependencyDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub id: String,
    pub nodes: Vec<NodeDoc>,
    pub targets: Vec<String>,
    pub configurations: Vec<ConfigurationDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "is_false")]
    pub partial_source: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub site: BTreeMap<HazardKind, Exposure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autonomy: Option<AutonomySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundancy_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationDoc {
    pub label: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub degraded: bool,
    /// `[supplier, consumer]` pairs.
    pub edges: Vec<[String; 2]>,
    /// Extra members without edges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyDoc {
    pub from_network: String,
    pub to_network: String,
    /// `[supplier in from_network, consumer in to_network]` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<[String; 2]>,
    /// Full 0/1 incidence matrix, as an alternative to `links`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<u8>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineBlock {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub autonomy_mode: AutonomyMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interventions: Vec<InterventionDoc>,
}

/// One hazard event. Intensities come from exactly one of: the nodes' site
/// table (`site`), a single value (`uniform`, optionally restricted to
/// `nodes`), or an explicit per-node map (`intensities`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDoc {
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub cumulative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard: Option<HazardKind>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub site: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub intensities: BTreeMap<String, HazardIntensity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionDoc {
    pub time: f64,
    pub network: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub degraded: bool,
    pub edges: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Cascade,
    ClassicIim,
    Importance,
    ComparePra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportancePair {
    pub node: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub label: String,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicOptions {
    /// Apply the series-parallel correction for redundancy groups.
    #[serde(default = "default_true")]
    pub corrected: bool,
}

fn default_true() -> bool {
    true
}

/// One ensemble member: the base timeline with hazard intensities scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleMember {
    pub label: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scale: BTreeMap<HazardKind, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub importance_pairs: Vec<ImportancePair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<Checkpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classic: Option<ClassicOptions>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ensemble: Vec<EnsembleMember>,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Cascade]
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock {
            outputs: default_outputs(),
            importance_pairs: Vec::new(),
            checkpoints: Vec::new(),
            classic: None,
            ensemble: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PraBlock {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fault_trees: Vec<FaultTree>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub event_trees: Vec<EventTree>,
}

/// Parses a scenario. A `curves_file` reference is looked up among the
/// bundled curve libraries.
pub fn parse_scenario(text: &str) -> std::result::Result<ScenarioDocument, ScenarioError> {
    parse_scenario_with(text, &|name| super::bundled::bundled_curves(name))
}

/// Parses a scenario, loading `curves_file` through `load_curves`.
pub fn parse_scenario_with(
    text: &str,
    load_curves: &dyn Fn(&str) -> Option<String>,
) -> std::result::Result<ScenarioDocument, ScenarioError> {
    let mut doc = from_json::<ScenarioDocument>(text)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::SchemaVersion {
            found: doc.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if let Some(file) = doc.curves_file.take() {
        let library_text = load_curves(&file).ok_or_else(|| {
            ScenarioError::References(vec![ReferenceError {
                line: locate(text, &file),
                message: format!("curves file '{file}' not found"),
            }])
        })?;
        let library = from_json::<CurveLibrary>(&library_text)?;
        for (name, curve) in library.fragility {
            doc.curves.fragility.entry(name).or_insert(curve);
        }
        for (name, curve) in library.autonomy {
            doc.curves.autonomy.entry(name).or_insert(curve);
        }
    }
    let errors = doc.reference_errors();
    if !errors.is_empty() {
        return Err(ScenarioError::References(
            errors
                .into_iter()
                .map(|(id, message)| ReferenceError {
                    line: locate(text, &id),
                    message,
                })
                .collect(),
        ));
    }
    Ok(doc)
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> std::result::Result<T, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn locate(text: &str, id: &str) -> Option<usize> {
    let quoted = format!("\"{id}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

/// Fully resolved scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub document: ScenarioDocument,
    pub model: SystemModel,
    pub curves: CurveLibrary,
    pub timeline: Timeline,
}

impl ScenarioDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents always serialize")
    }

    /// `(offending id, message)` for every reference that does not resolve.
    fn reference_errors(&self) -> Vec<(String, String)> {
        let mut errors = Vec::new();
        let mut node_network: HashMap<&str, &str> = HashMap::new();
        for net in &self.model.networks {
            for node in &net.nodes {
                node_network.entry(&node.id).or_insert(&net.id);
            }
        }
        let networks: BTreeMap<&str, &NetworkDoc> = self.model.networks.iter().map(|n| (n.id.as_str(), n)).collect();
        let in_network = |net: &str, id: &str| node_network.get(id).is_some_and(|n| *n == net);
        let unknown = |id: &str, context: String| (id.to_string(), format!("unknown node '{id}' in {context}"));

        for net in &self.model.networks {
            for t in &net.targets {
                if !in_network(&net.id, t) {
                    errors.push(unknown(t, format!("targets of network '{}'", net.id)));
                }
            }
            for c in &net.configurations {
                for id in c.edges.iter().flatten().chain(&c.members) {
                    if !in_network(&net.id, id) {
                        errors.push(unknown(id, format!("configuration '{}' of network '{}'", c.label, net.id)));
                    }
                }
            }
        }
        for dep in &self.model.dependencies {
            for (net, pick) in [(&dep.from_network, 0), (&dep.to_network, 1)] {
                if !networks.contains_key(net.as_str()) {
                    errors.push((net.clone(), format!("dependency references unknown network '{net}'")));
                    continue;
                }
                for link in &dep.links {
                    if !in_network(net, &link[pick]) {
                        errors.push(unknown(&link[pick], format!("dependency {} -> {}", dep.from_network, dep.to_network)));
                    }
                }
            }
        }
        for event in &self.timeline.events {
            let ids = event.nodes.iter().flatten().chain(event.intensities.keys());
            for id in ids {
                if !node_network.contains_key(id.as_str()) {
                    errors.push(unknown(id, format!("event at t = {}", event.time)));
                }
            }
        }
        for i in &self.timeline.interventions {
            if !networks.contains_key(i.network.as_str()) {
                errors.push((i.network.clone(), format!("intervention references unknown network '{}'", i.network)));
                continue;
            }
            for id in i.edges.iter().flatten().chain(&i.members) {
                if !in_network(&i.network, id) {
                    errors.push(unknown(id, format!("intervention '{}'", i.label)));
                }
            }
        }
        for pair in &self.analysis.importance_pairs {
            for id in [&pair.node, &pair.target] {
                if !node_network.contains_key(id.as_str()) {
                    errors.push(unknown(id, "importance pairs".into()));
                }
            }
        }
        for net in &self.model.networks {
            for node in &net.nodes {
                for (hazard, exposure) in &node.site {
                    if let Some(curve) = &exposure.curve {
                        if !self.curves.fragility.contains_key(curve) {
                            errors.push((curve.clone(), format!("node '{}' uses unknown {hazard} curve '{curve}'", node.id)));
                        }
                    }
                }
                if let Some(a) = &node.autonomy {
                    if !self.curves.autonomy.contains_key(&a.curve) {
                        errors.push((a.curve.clone(), format!("node '{}' uses unknown autonomy curve '{}'", node.id, a.curve)));
                    }
                }
            }
        }
        errors
    }

    pub fn build_model(&self) -> SystemModel {
        let mut nodes = Vec::new();
        let mut networks = Vec::new();
        for net in &self.model.networks {
            let ids: Vec<String> = net.nodes.iter().map(|n| n.id.clone()).collect();
            for n in &net.nodes {
                nodes.push(Node {
                    id: n.id.clone(),
                    network_id: net.id.clone(),
                    kind: n.kind,
                    partial_source: n.partial_source,
                    category: n.category.clone(),
                    site: n.site.clone(),
                    autonomy: n.autonomy.clone(),
                    redundancy_group: n.redundancy_group.clone(),
                });
            }
            let configurations = net
                .configurations
                .iter()
                .enumerate()
                .map(|(k, c)| configuration(&ids, &c.label, k, &c.edges, &c.members, c.degraded))
                .collect();
            networks.push(Network {
                id: net.id.clone(),
                nodes: ids,
                configurations,
                targets: net.targets.clone(),
            });
        }
        let position = |net: &str, id: &str| -> Option<usize> {
            self.model
                .networks
                .iter()
                .find(|n| n.id == net)
                .and_then(|n| n.nodes.iter().position(|x| x.id == id))
        };
        let size = |net: &str| self.model.networks.iter().find(|n| n.id == net).map_or(0, |n| n.nodes.len());
        let dependencies = self
            .model
            .dependencies
            .iter()
            .map(|d| {
                let matrix = match &d.matrix {
                    Some(m) => m.iter().map(|row| row.iter().map(|v| *v != 0).collect()).collect(),
                    None => {
                        let mut m = vec![vec![false; size(&d.to_network)]; size(&d.from_network)];
                        for [a, b] in &d.links {
                            if let (Some(x), Some(y)) = (position(&d.from_network, a), position(&d.to_network, b)) {
                                m[x][y] = true;
                            }
                        }
                        m
                    }
                };
                InterNetworkDependency {
                    from_network: d.from_network.clone(),
                    to_network: d.to_network.clone(),
                    matrix,
                }
            })
            .collect();
        SystemModel::new(nodes, networks, dependencies)
    }

    /// Resolves the timeline with hazard intensities multiplied by `scale`.
    pub fn build_timeline(&self, model: &SystemModel, scale: &BTreeMap<HazardKind, f64>) -> std::result::Result<Timeline, ScenarioError> {
        let factor = |h: HazardKind| scale.get(&h).copied().unwrap_or(1.0);
        let mut events = Vec::with_capacity(self.timeline.events.len());
        for e in &self.timeline.events {
            let mut vector = EventVector {
                time: e.time,
                cumulative: e.cumulative,
                intensities: BTreeMap::new(),
            };
            let forms = usize::from(e.site) + usize::from(e.uniform.is_some()) + usize::from(!e.intensities.is_empty());
            if forms != 1 {
                return Err(ScenarioError::Invalid(format!(
                    "event at t = {} must use exactly one of 'site', 'uniform' or 'intensities'",
                    e.time
                )));
            }
            let needs_hazard = || {
                e.hazard
                    .ok_or_else(|| ScenarioError::Invalid(format!("event at t = {} needs a 'hazard'", e.time)))
            };
            if e.site {
                let hazard = needs_hazard()?;
                for node in &model.nodes {
                    let chosen = e.nodes.as_ref().is_none_or(|ids| ids.contains(&node.id));
                    if let Some(value) = node.site.get(&hazard).and_then(|x| x.intensity) {
                        if chosen {
                            vector.intensities.insert(node.id.clone(), HazardIntensity { hazard, value: value * factor(hazard) });
                        }
                    }
                }
            } else if let Some(value) = e.uniform {
                let hazard = needs_hazard()?;
                for node in &model.nodes {
                    let chosen = match &e.nodes {
                        Some(ids) => ids.contains(&node.id),
                        None => node.site.get(&hazard).is_some_and(|x| x.curve.is_some()),
                    };
                    if chosen {
                        vector.intensities.insert(node.id.clone(), HazardIntensity { hazard, value: value * factor(hazard) });
                    }
                }
            } else {
                for (id, hit) in &e.intensities {
                    vector.intensities.insert(
                        id.clone(),
                        HazardIntensity {
                            hazard: hit.hazard,
                            value: hit.value * factor(hit.hazard),
                        },
                    );
                }
            }
            events.push(vector);
        }
        let interventions = self
            .timeline
            .interventions
            .iter()
            .map(|i| {
                let net = model
                    .network(&i.network)
                    .ok_or_else(|| ScenarioError::Invalid(format!("unknown network '{}'", i.network)))?;
                Ok(Intervention {
                    time: i.time,
                    network: i.network.clone(),
                    configuration: configuration(&net.nodes, &i.label, net.configurations.len(), &i.edges, &i.members, i.degraded),
                })
            })
            .collect::<std::result::Result<Vec<_>, ScenarioError>>()?;
        Ok(Timeline {
            t0: self.timeline.t0,
            t_end: self.timeline.t_end,
            dt: self.timeline.dt,
            events,
            interventions,
        })
    }

    pub fn resolve(&self) -> std::result::Result<Scenario, ScenarioError> {
        let model = self.build_model();
        let timeline = self.build_timeline(&model, &BTreeMap::new())?;
        Ok(Scenario {
            document: self.clone(),
            model,
            curves: self.curves.clone(),
            timeline,
        })
    }
}

fn configuration(ids: &[String], label: &str, index: usize, edges: &[[String; 2]], members: &[String], degraded: bool) -> Configuration {
    let pos = |id: &String| ids.iter().position(|x| x == id);
    let pairs: Vec<(usize, usize)> = edges.iter().filter_map(|[a, b]| Some((pos(a)?, pos(b)?))).collect();
    let adjacency = Adjacency::from_edges(ids.len(), &pairs).expect("positions are in range");
    let extra: Vec<usize> = members.iter().filter_map(pos).collect();
    Configuration::new(label, index, adjacency).with_members(&extra).degraded(degraded)
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.document.name
    }

    pub fn mode(&self) -> AutonomyMode {
        self.document.timeline.autonomy_mode
    }

    pub fn run_options(&self, mode: Option<AutonomyMode>) -> RunOptions {
        let analysis = &self.document.analysis;
        let classic = if analysis.outputs.contains(&OutputKind::ClassicIim) || analysis.classic.is_some() {
            Some(analysis.classic.as_ref().is_none_or(|c| c.corrected))
        } else {
            None
        };
        RunOptions {
            mode: mode.unwrap_or(self.mode()),
            classic,
            immune_node: None,
            scenario: self.document.name.clone(),
        }
    }

    /// Runs the scenario timeline, or the weighted ensemble when the
    /// analysis block defines one.
    pub fn run(&self, options: &RunOptions) -> Result<ProbabilityReport> {
        self.run_on(&self.timeline, options)
    }

    pub fn run_on(&self, timeline: &Timeline, options: &RunOptions) -> Result<ProbabilityReport> {
        let ensemble = &self.document.analysis.ensemble;
        if ensemble.is_empty() {
            return run_timeline_with(&self.model, &self.curves, timeline, options);
        }
        let members = ensemble
            .iter()
            .map(|m| {
                let mut t = self.document.build_timeline(&self.model, &m.scale)?;
                t.t0 = timeline.t0;
                t.t_end = timeline.t_end;
                t.dt = timeline.dt;
                Ok((t, m.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        run_ensemble(&self.model, &self.curves, &members, options)
    }

    /// Same scenario with different curves (for calibration studies).
    pub fn with_curves(&self, curves: CurveLibrary) -> Scenario {
        Scenario {
            curves,
            ..self.clone()
        }
    }
}
