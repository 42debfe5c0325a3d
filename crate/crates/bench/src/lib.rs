//! Synthetic models for the benchmarks.

use lifeline_core::{Adjacency, Configuration, Network, Node, NodeKind, SystemModel};

/// One network with `layers` supply layers, each a chain of `length`
/// nodes of its own ending in a shared target.
pub fn layered_network(layers: usize, length: usize) -> SystemModel {
    let mut nodes = Vec::new();
    let mut chains = Vec::new();
    for k in 0..layers {
        let chain: Vec<usize> = (0..length)
            .map(|j| {
                let kind = if j == 0 { NodeKind::Source } else { NodeKind::Intermediate };
                nodes.push(Node::new(format!("n{k}_{j}"), "net", kind));
                nodes.len() - 1
            })
            .collect();
        chains.push(chain);
    }
    let target = nodes.len();
    nodes.push(Node::new("T", "net", NodeKind::Target));
    let configurations = chains
        .iter()
        .enumerate()
        .map(|(k, chain)| {
            let mut edges: Vec<(usize, usize)> = chain.windows(2).map(|w| (w[0], w[1])).collect();
            edges.push((*chain.last().expect("length > 0"), target));
            Configuration::new(format!("L{k}"), k, Adjacency::from_edges(nodes.len(), &edges).expect("in range"))
        })
        .collect();
    let net = Network {
        id: "net".into(),
        nodes: nodes.iter().map(|n| n.id.clone()).collect(),
        configurations,
        targets: vec!["T".into()],
    };
    SystemModel::new(nodes, vec![net], vec![])
}

/// Deterministic self-failure probabilities in (0, 0.5).
pub fn spread(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 * ((i * 7919) % 1000) as f64 / 1000.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_network_is_valid() {
        let model = layered_network(4, 5);
        assert!(lifeline_core::validate_topology(&model).is_valid());
        assert_eq!(model.nodes.len(), 21);
    }
}
