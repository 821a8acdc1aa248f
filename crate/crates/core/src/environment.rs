//! Interaction topology and the node-load view of agent actions.
//!
//! Edges are carried for completeness but loads depend only on the
//! agent-to-node assignment.

use std::io::Read;

use rand::Rng;
use serde::Deserialize;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub capacity: f64,
    pub sector: Option<String>,
}

/// Link between two node indices.
pub type Edge = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Node index for every agent.
    pub assignment: Vec<usize>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, assignment: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::schema("topology.nodes", "at least one node is required"));
        }
        for (j, n) in nodes.iter().enumerate() {
            if !(n.capacity > 0.0 && n.capacity.is_finite()) {
                return Err(Error::schema(format!("topology.nodes[{j}]"), "capacity must be > 0"));
            }
            if nodes[..j].iter().any(|m| m.id == n.id) {
                return Err(Error::schema(
                    format!("topology.nodes[{j}]"),
                    format!("duplicate node id '{}'", n.id),
                ));
            }
        }
        let m = nodes.len();
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= m || *b >= m) {
            return Err(Error::schema(
                "topology.edges",
                format!("edge ({a}, {b}) names a missing node"),
            ));
        }
        if let Some(i) = assignment.iter().position(|&j| j >= m) {
            return Err(Error::schema(
                "topology.assignment",
                format!("agent {i} assigned to a missing node"),
            ));
        }
        Ok(Self {
            nodes,
            edges,
            assignment,
        })
    }

    /// One node of capacity `capacity` holding every agent.
    pub fn single(capacity: f64, n_agents: usize) -> Result<Self> {
        Self::new(
            vec![Node {
                id: "0".into(),
                capacity,
                sector: None,
            }],
            Vec::new(),
            vec![0; n_agents],
        )
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.capacity).collect()
    }
}

/// Assignment of `n_agents` agents to `n_nodes` nodes, independently uniform.
pub fn random_assignment<R: Rng + ?Sized>(n_agents: usize, n_nodes: usize, rng: &mut R) -> Vec<usize> {
    (0..n_agents).map(|_| rng.random_range(0..n_nodes)).collect()
}

/// Agent `i` goes to node `i mod n_nodes`.
pub fn round_robin_assignment(n_agents: usize, n_nodes: usize) -> Vec<usize> {
    (0..n_agents).map(|i| i % n_nodes).collect()
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    node_id: String,
    capacity: f64,
    #[serde(default)]
    sector: Option<String>,
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    from: String,
    to: String,
}

/// Nodes from `node_id, capacity, sector` rows and an optional `from, to` edge list.
pub fn read_nodes<R: Read>(nodes: R, edges: Option<R>) -> Result<(Vec<Node>, Vec<Edge>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(nodes);
    let nodes: Vec<Node> = rdr
        .deserialize::<NodeRow>()
        .map(|r| {
            r.map(|r| Node {
                id: r.node_id,
                capacity: r.capacity,
                sector: r.sector.filter(|s| !s.is_empty()),
            })
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut edge_list = Vec::new();
    if let Some(edges) = edges {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(edges);
        for row in rdr.deserialize::<EdgeRow>() {
            let row = row?;
            let find = |id: &str| {
                nodes
                    .iter()
                    .position(|n| n.id == id)
                    .ok_or_else(|| Error::schema("topology.edges", format!("unknown node '{id}'")))
            };
            edge_list.push((find(&row.from)?, find(&row.to)?));
        }
    }
    Ok((nodes, edge_list))
}

/// Node loads at one step, with the capacities in force at that step.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadState {
    pub loads: Vec<f64>,
    pub capacities: Vec<f64>,
    pub aggregate: f64,
    pub congestion: Vec<f64>,
}

/// `L_j = Σ_{i→j} x_i` with the topology's nominal capacities.
pub fn compute_loads(topology: &Topology, actions: &[f64]) -> LoadState {
    compute_loads_scaled(topology, actions, 1.0)
}

/// As [`compute_loads`], with every capacity multiplied by `capacity_scale`.
pub fn compute_loads_scaled(topology: &Topology, actions: &[f64], capacity_scale: f64) -> LoadState {
    debug_assert_eq!(actions.len(), topology.assignment.len());
    let mut loads = vec![0.0; topology.nodes.len()];
    for (x, &j) in actions.iter().zip(&topology.assignment) {
        loads[j] += x;
    }
    let aggregate = loads.iter().sum();
    LoadState {
        capacities: topology.nodes.iter().map(|n| n.capacity * capacity_scale).collect(),
        congestion: vec![0.0; loads.len()],
        loads,
        aggregate,
    }
}

/// Rectified surcharge `c_j = κ · max(0, L_j / C_j − τ)`.
pub fn congestion_signal(state: &LoadState, threshold: f64, gain: f64) -> Vec<f64> {
    state
        .loads
        .iter()
        .zip(&state.capacities)
        .map(|(l, c)| gain * (l / c - threshold).max(0.0))
        .collect()
}

/// Fraction of overloaded nodes, or the relative cap exceedance when there is
/// only one node.
pub fn overload_metric(state: &LoadState) -> f64 {
    match state.loads.len() {
        1 => (state.loads[0] - state.capacities[0]).max(0.0) / state.capacities[0],
        m => {
            let over = state.loads.iter().zip(&state.capacities).filter(|(l, c)| l > c).count();
            over as f64 / m as f64
        }
    }
}
