//! Time series produced by the temporal engine.

use serde::{Deserialize, Serialize};

use crate::engine::AutonomyMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityReport {
    pub scenario: String,
    pub autonomy_mode: AutonomyMode,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time_h: f64,
    pub networks: Vec<NetworkRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classic: Option<ClassicRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub id: String,
    pub loc: f64,
    pub configurations: Vec<ConfigurationRecord>,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationRecord {
    pub label: String,
    pub p_occ: f64,
    pub chain_survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub p_sf: f64,
    pub p_cf: f64,
    pub p_f: f64,
}

/// Deterministic inoperability model evaluated with the step's self-failure
/// probabilities as scenario vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicRecord {
    pub corrected: bool,
    pub nodes: Vec<ClassicNodeRecord>,
    pub system_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicNodeRecord {
    pub id: String,
    pub q_raw: f64,
    pub q: f64,
    pub decay_score: f64,
}

impl NetworkRecord {
    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn configuration(&self, label: &str) -> Option<&ConfigurationRecord> {
        self.configurations.iter().find(|c| c.label == label)
    }

    pub fn p_occ_total(&self) -> f64 {
        self.configurations.iter().map(|c| c.p_occ).sum()
    }
}

impl StepRecord {
    pub fn network(&self, id: &str) -> Option<&NetworkRecord> {
        self.networks.iter().find(|n| n.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.networks.iter().find_map(|n| n.node(id))
    }
}

impl ProbabilityReport {
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.time_h).collect()
    }

    /// Step recorded at `time_h` (within 1e-9 h).
    pub fn at(&self, time_h: f64) -> Option<&StepRecord> {
        self.steps.iter().find(|s| (s.time_h - time_h).abs() <= 1e-9)
    }

    pub fn loc_series(&self, network: &str) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.network(network).map_or(f64::NAN, |n| n.loc))
            .collect()
    }

    /// Occurrence probability of a configuration over time; 0 before the
    /// configuration exists.
    pub fn p_occ_series(&self, network: &str, label: &str) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| {
                s.network(network)
                    .and_then(|n| n.configuration(label))
                    .map_or(0.0, |c| c.p_occ)
            })
            .collect()
    }

    pub fn node_series(&self, node: &str) -> Vec<NodeRecord> {
        self.steps
            .iter()
            .filter_map(|s| s.node(node).cloned())
            .collect()
    }

    /// Every probability in the report, for bound checks.
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().flat_map(|s| {
            s.networks.iter().flat_map(|n| {
                std::iter::once(n.loc)
                    .chain(n.configurations.iter().flat_map(|c| [c.p_occ, c.chain_survival]))
                    .chain(n.nodes.iter().flat_map(|x| [x.p_sf, x.p_cf, x.p_f]))
            })
        })
    }
}
