//! Physical network, service chains, the layered expansion used for
//! processing decisions, and hop-distance tables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::commodity::MAX_DESTINATIONS;
use crate::error::{Error, Result};
use crate::scalar::Rational;

pub type NodeId = usize;
pub type EdgeId = usize;

/// Hop distance reported for destinations that cannot be reached.
pub const UNREACHABLE_HOPS: u32 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Ue,
    Es,
    #[default]
    Plain,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Processing capacity `C_i` in resource units per slot.
    pub proc_capacity: Rational,
    /// Unit processing cost `e_i`.
    pub proc_cost: Rational,
    /// Coordinates in meters.
    pub position: Option<(f64, f64)>,
    /// Radio power budget `P_i` in watts.
    pub power_budget: f64,
    /// Unit energy cost per joule.
    pub energy_cost: f64,
}

impl Node {
    pub fn new(name: impl Into<String>) -> Self {
        Node {
            name: name.into(),
            kind: NodeKind::Plain,
            proc_capacity: Rational::from_integer(0),
            proc_cost: Rational::from_integer(0),
            position: None,
            power_budget: 0.0,
            energy_cost: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// Packets per slot. Wireless links get their capacity per slot from the radio model.
    pub capacity: u64,
    /// Cost per transmitted packet.
    pub cost: Rational,
    pub wireless: bool,
}

impl Edge {
    pub fn wired(from: NodeId, to: NodeId, capacity: u64, cost: Rational) -> Self {
        Edge { from, to, capacity, cost, wireless: false }
    }
}

/// Validated directed network with one multicast commodity's endpoints.
#[derive(Clone, Debug)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    sources: Vec<NodeId>,
    destinations: Vec<NodeId>,
}

impl Network {
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        sources: Vec<NodeId>,
        destinations: Vec<NodeId>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut seen = BTreeSet::new();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::UnknownNode(format!("edge endpoint {} -> {}", e.from, e.to)));
            }
            if e.from == e.to {
                return Err(Error::Scenario(format!("self loop at {}", nodes[e.from].name)));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::DuplicateEdge(
                    nodes[e.from].name.clone(),
                    nodes[e.to].name.clone(),
                ));
            }
            if e.cost < Rational::from_integer(0) {
                return Err(Error::Scenario(format!(
                    "negative cost on edge {} -> {}",
                    nodes[e.from].name, nodes[e.to].name
                )));
            }
            out_edges[e.from].push(id);
            in_edges[e.to].push(id);
        }
        for node in &nodes {
            if node.proc_capacity < Rational::from_integer(0)
                || node.proc_cost < Rational::from_integer(0)
            {
                return Err(Error::Scenario(format!(
                    "negative processing capacity or cost at {}",
                    node.name
                )));
            }
        }
        if destinations.is_empty() || destinations.len() > MAX_DESTINATIONS {
            return Err(Error::DestinationCount(destinations.len()));
        }
        let mut dest_set = BTreeSet::new();
        for &d in &destinations {
            if d >= n {
                return Err(Error::UnknownNode(format!("destination {d}")));
            }
            if !dest_set.insert(d) {
                return Err(Error::Scenario(format!("duplicate destination {}", nodes[d].name)));
            }
        }
        for &s in &sources {
            if s >= n {
                return Err(Error::UnknownNode(format!("source {s}")));
            }
            if dest_set.contains(&s) {
                return Err(Error::SourceDestinationOverlap(nodes[s].name.clone()));
            }
        }
        Ok(Network { nodes, edges, out_edges, in_edges, sources, destinations })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.in_edges[node]
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn destinations(&self) -> &[NodeId] {
        &self.destinations
    }

    pub fn destination_count(&self) -> usize {
        self.destinations.len()
    }

    /// Bit position of `node` in duplication statuses, if it is a destination.
    pub fn destination_index(&self, node: NodeId) -> Option<usize> {
        self.destinations.iter().position(|&d| d == node)
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn find_edge(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.out_edges[from].iter().copied().find(|&e| self.edges[e].to == to)
    }

    /// Same graph with a different destination list (first `d` of the current
    /// list, for destination-count sweeps).
    pub fn with_destinations(&self, destinations: Vec<NodeId>) -> Result<Self> {
        Network::new(self.nodes.clone(), self.edges.clone(), self.sources.clone(), destinations)
    }

    pub fn has_wireless(&self) -> bool {
        self.edges.iter().any(|e| e.wireless)
    }

    /// Directed successor lists in node order.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        (0..self.nodes.len())
            .map(|i| self.out_edges[i].iter().map(|&e| self.edges[e].to).collect())
            .collect()
    }

    /// All-pairs shortest path lengths with per-edge weights; `f64::INFINITY`
    /// marks unreachable pairs. Edges whose weight is `None` are skipped.
    pub fn shortest_paths(&self, weight: impl Fn(&Edge) -> Option<f64>) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for e in &self.edges {
            if let Some(w) = weight(e) {
                if w < dist[e.from][e.to] {
                    dist[e.from][e.to] = w;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                let dik = dist[i][k];
                if dik.is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let via = dik + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                    }
                }
            }
        }
        dist
    }
}

/// Hop distances `H[i][k]` from every node to every target along directed
/// edges. Unreachable pairs get [`UNREACHABLE_HOPS`].
pub fn hop_distances_on(adjacency: &[Vec<NodeId>], targets: &[NodeId]) -> Vec<Vec<u32>> {
    let n = adjacency.len();
    let mut reverse = vec![Vec::new(); n];
    for (i, succ) in adjacency.iter().enumerate() {
        for &j in succ {
            reverse[j].push(i);
        }
    }
    let mut table = vec![vec![UNREACHABLE_HOPS; targets.len()]; n];
    for (k, &t) in targets.iter().enumerate() {
        let mut queue = std::collections::VecDeque::from([t]);
        table[t][k] = 0;
        while let Some(v) = queue.pop_front() {
            let next = table[v][k] + 1;
            for &u in &reverse[v] {
                if table[u][k] == UNREACHABLE_HOPS {
                    table[u][k] = next;
                    queue.push_back(u);
                }
            }
        }
    }
    table
}

/// Minimum hop distance from each node to each destination of the network.
pub fn hop_distances(network: &Network, destinations: &[NodeId]) -> Vec<Vec<u32>> {
    hop_distances_on(&network.adjacency(), destinations)
}

/// One function of a service chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceFunction {
    /// Output packets per input packet (`ξ`).
    pub scaling: Rational,
    /// Resource units consumed per input packet (`r`).
    pub workload: Rational,
}

/// A chain of `M - 1` functions splitting the stream into `M` stages.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Service {
    pub functions: Vec<ServiceFunction>,
}

impl Service {
    /// Plain routing: a single stage, no processing.
    pub fn routing_only() -> Self {
        Service { functions: Vec::new() }
    }

    pub fn new(functions: Vec<ServiceFunction>) -> Result<Self> {
        for (m, f) in functions.iter().enumerate() {
            if f.scaling <= Rational::from_integer(0) || f.workload <= Rational::from_integer(0) {
                return Err(Error::Scenario(format!(
                    "function {} needs positive scaling and workload",
                    m + 1
                )));
            }
        }
        Ok(Service { functions })
    }

    pub fn stages(&self) -> usize {
        self.functions.len() + 1
    }

    /// Cumulative scaling factor per stage: `Ξ[0] = 1`, `Ξ[m] = ∏_{s<m} ξ[s]`.
    pub fn cumulative_scaling(&self) -> Vec<Rational> {
        let mut out = Vec::with_capacity(self.stages());
        let mut acc = Rational::from_integer(1);
        out.push(acc);
        for f in &self.functions {
            acc *= f.scaling;
            out.push(acc);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayeredEdgeKind {
    /// Copy of physical edge at one stage.
    Transmission { edge: EdgeId },
    /// Processing of `stage` packets at `node` by function `stage`.
    Processing { node: NodeId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CapacityGroup {
    Link(EdgeId),
    Processor(NodeId),
}

#[derive(Clone, Debug)]
pub struct LayeredEdge {
    pub tail: usize,
    pub head: usize,
    /// Zero-based stage of the tail node.
    pub stage: usize,
    pub kind: LayeredEdgeKind,
    /// Generalized scaling factor `ζ`.
    pub zeta: Rational,
    /// Generalized workload `ρ`.
    pub rho: Rational,
    pub unit_cost: Rational,
    pub group: CapacityGroup,
}

/// `M` stacked copies of the network joined by processing edges.
#[derive(Clone, Debug)]
pub struct LayeredNetwork {
    base_nodes: usize,
    stages: usize,
    edges: Vec<LayeredEdge>,
    destinations: Vec<usize>,
    cumulative_scaling: Vec<Rational>,
}

impl LayeredNetwork {
    pub fn node_count(&self) -> usize {
        self.base_nodes * self.stages
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn base_node_count(&self) -> usize {
        self.base_nodes
    }

    /// Index of node `i` on zero-based layer `stage`.
    pub fn layered_id(&self, node: NodeId, stage: usize) -> usize {
        stage * self.base_nodes + node
    }

    /// Inverse of [`layered_id`](Self::layered_id).
    pub fn split_id(&self, id: usize) -> (NodeId, usize) {
        (id % self.base_nodes, id / self.base_nodes)
    }

    pub fn edges(&self) -> &[LayeredEdge] {
        &self.edges
    }

    pub fn processing_edges(&self) -> impl Iterator<Item = &LayeredEdge> {
        self.edges.iter().filter(|e| matches!(e.kind, LayeredEdgeKind::Processing { .. }))
    }

    pub fn transmission_edges(&self) -> impl Iterator<Item = &LayeredEdge> {
        self.edges.iter().filter(|e| matches!(e.kind, LayeredEdgeKind::Transmission { .. }))
    }

    /// Destinations, placed on the last layer.
    pub fn destinations(&self) -> &[usize] {
        &self.destinations
    }

    pub fn cumulative_scaling(&self) -> &[Rational] {
        &self.cumulative_scaling
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            adj[e.tail].push(e.head);
        }
        adj
    }

    /// Hop distances from every layered node to each final-layer destination.
    pub fn hop_distances(&self) -> Vec<Vec<u32>> {
        hop_distances_on(&self.adjacency(), &self.destinations)
    }
}

/// Builds the layered graph of `network` for `service`.
pub fn layered_graph(network: &Network, service: &Service) -> LayeredNetwork {
    let n = network.node_count();
    let stages = service.stages();
    let one = Rational::from_integer(1);
    let mut edges = Vec::with_capacity(stages * network.edge_count() + (stages - 1) * n);
    for stage in 0..stages {
        for (id, e) in network.edges().iter().enumerate() {
            edges.push(LayeredEdge {
                tail: stage * n + e.from,
                head: stage * n + e.to,
                stage,
                kind: LayeredEdgeKind::Transmission { edge: id },
                zeta: one,
                rho: one,
                unit_cost: e.cost,
                group: CapacityGroup::Link(id),
            });
        }
    }
    for (stage, f) in service.functions.iter().enumerate() {
        for (i, node) in network.nodes().iter().enumerate() {
            edges.push(LayeredEdge {
                tail: stage * n + i,
                head: (stage + 1) * n + i,
                stage,
                kind: LayeredEdgeKind::Processing { node: i },
                zeta: f.scaling,
                rho: f.workload,
                unit_cost: node.proc_cost,
                group: CapacityGroup::Processor(i),
            });
        }
    }
    let last = (stages - 1) * n;
    LayeredNetwork {
        base_nodes: n,
        stages,
        edges,
        destinations: network.destinations().iter().map(|&d| last + d).collect(),
        cumulative_scaling: service.cumulative_scaling(),
    }
}

/// Capacity of a layered-graph capacity group, in resource units per slot.
pub fn group_capacity(network: &Network, group: CapacityGroup) -> Rational {
    match group {
        CapacityGroup::Link(e) => Rational::from_integer(network.edge(e).capacity as i64),
        CapacityGroup::Processor(i) => network.node(i).proc_capacity,
    }
}

pub fn euclidean(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Processing capacity in whole input packets per slot for function `stage`.
pub fn processing_packets(node: &Node, function: &ServiceFunction) -> u64 {
    let ratio = node.proc_capacity / function.workload;
    if ratio <= Rational::from_integer(0) {
        0
    } else {
        ratio.floor().to_integer().max(0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    pub(crate) fn star() -> Network {
        let nodes = ["src", "relay", "d1", "d2"].into_iter().map(Node::new).collect();
        let edges = vec![
            Edge::wired(0, 1, 1, r(1)),
            Edge::wired(1, 2, 1, r(1)),
            Edge::wired(1, 3, 1, r(1)),
        ];
        Network::new(nodes, edges, vec![0], vec![2, 3]).unwrap()
    }

    #[test]
    fn star_counts() {
        let net = star();
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.edge_count(), 3);
    }

    #[test]
    fn rejects_overlap_and_duplicates() {
        let nodes: Vec<Node> = ["a", "b"].into_iter().map(Node::new).collect();
        let err = Network::new(nodes.clone(), vec![Edge::wired(0, 1, 1, r(1))], vec![1], vec![1])
            .unwrap_err();
        assert!(err.to_string().contains("source-destination overlap"));
        let err = Network::new(
            nodes.clone(),
            vec![Edge::wired(0, 1, 1, r(1)), Edge::wired(0, 1, 2, r(1))],
            vec![0],
            vec![1],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge(..)));
        let err = Network::new(nodes, vec![Edge::wired(0, 1, 1, r(-1))], vec![0], vec![1])
            .unwrap_err();
        assert!(err.to_string().contains("negative cost"));
    }

    #[test]
    fn layered_counts_small_case() {
        // |V|=3, |E|=4, M=2
        let nodes = ["a", "b", "c"].into_iter().map(Node::new).collect();
        let edges = vec![
            Edge::wired(0, 1, 1, r(1)),
            Edge::wired(1, 0, 1, r(1)),
            Edge::wired(1, 2, 1, r(1)),
            Edge::wired(0, 2, 1, r(1)),
        ];
        let net = Network::new(nodes, edges, vec![0], vec![2]).unwrap();
        let svc = Service::new(vec![ServiceFunction {
            scaling: r(2),
            workload: Rational::new(1, 2),
        }])
        .unwrap();
        let lg = layered_graph(&net, &svc);
        assert_eq!(lg.node_count(), 6);
        assert_eq!(lg.processing_edges().count(), 3);
        assert_eq!(lg.transmission_edges().count(), 8);
        assert_eq!(lg.destinations(), &[5]);
        for e in lg.processing_edges() {
            assert_eq!((e.zeta, e.rho), (r(2), Rational::new(1, 2)));
        }
        for e in lg.transmission_edges() {
            assert_eq!((e.zeta, e.rho), (r(1), r(1)));
        }
    }

    #[test]
    fn single_stage_is_identity() {
        let net = star();
        let lg = layered_graph(&net, &Service::routing_only());
        assert_eq!(lg.node_count(), net.node_count());
        assert_eq!(lg.processing_edges().count(), 0);
        assert_eq!(lg.transmission_edges().count(), net.edge_count());
        assert_eq!(lg.hop_distances(), hop_distances(&net, net.destinations()));
    }

    #[test]
    fn cumulative_scaling_factors() {
        let svc = Service::new(vec![
            ServiceFunction { scaling: r(1), workload: Rational::new(1, 300) },
            ServiceFunction { scaling: r(2), workload: Rational::new(1, 400) },
        ])
        .unwrap();
        assert_eq!(svc.cumulative_scaling(), vec![r(1), r(1), r(2)]);
    }

    #[test]
    fn star_hops() {
        let net = star();
        let h = hop_distances(&net, net.destinations());
        assert_eq!(h[0][0], 2);
        assert_eq!(h[2][0], 0);
        assert_eq!(h[3][0], UNREACHABLE_HOPS);
        assert_eq!(h[1][1], 1);
    }

    #[test]
    fn processing_packets_floor() {
        let mut node = Node::new("es");
        node.proc_capacity = r(5);
        let f = ServiceFunction { scaling: r(1), workload: Rational::new(1, 300) };
        assert_eq!(processing_packets(&node, &f), 1500);
    }
}
