//! Static shortest-path multicast baseline.
//!
//! Packets follow the union of hop-shortest paths from the source to every
//! destination on the layered graph and are duplicated where those paths
//! diverge. The plan is computed once; each slot a link serves whichever of
//! its planned statuses has the largest backlog.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand_chacha::ChaCha8Rng;

use super::{Policy, SlotContext};
use crate::commodity::{DupChoice, DupStatus};
use crate::error::{Error, Result};
use crate::graph::{layered_graph, processing_packets, LayeredEdgeKind, Network, NodeKind, Service, UNREACHABLE_HOPS};
use crate::queue::{LinkAssignment, ProcessingAssignment, QueueState, RadioAssignment, SlotDecision};
use crate::wireless::capacity_packets;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdspaPlan {
    /// Per physical edge: `(stage, choice)` pairs it serves.
    pub links: Vec<Vec<(usize, DupChoice)>>,
    /// Per node: `(stage, choice)` pairs it processes.
    pub processors: Vec<Vec<(usize, DupChoice)>>,
}

/// Builds the static forwarding and duplication plan. Equal-length paths are
/// broken toward the smallest next-hop id.
pub fn edspa_routes(network: &Network, service: &Service) -> Result<EdspaPlan> {
    let layered = layered_graph(network, service);
    let hops = layered.hop_distances();
    let d = network.destination_count();
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); layered.node_count()];
    for (id, e) in layered.edges().iter().enumerate() {
        out_edges[e.tail].push(id);
    }
    let next_edge = |u: usize, k: usize| -> Option<usize> {
        let here = hops[u][k];
        out_edges[u]
            .iter()
            .copied()
            .filter(|&e| hops[layered.edges()[e].head][k] + 1 == here)
            .min_by_key(|&e| layered.edges()[e].head)
    };
    let last = layered.stages() - 1;
    let dest_at: BTreeMap<usize, usize> =
        network.destinations().iter().enumerate().map(|(k, &n)| (layered.layered_id(n, last), k)).collect();
    let landing = |u: usize, s: DupStatus| match dest_at.get(&u) {
        Some(&k) if s.contains(k) => s.without(DupStatus::single(k)),
        _ => s,
    };

    let mut plan = EdspaPlan {
        links: vec![Vec::new(); network.edge_count()],
        processors: vec![Vec::new(); network.node_count()],
    };
    let mut seen = BTreeSet::new();
    let mut work = VecDeque::new();
    for &src in network.sources() {
        let u = layered.layered_id(src, 0);
        for k in 0..d {
            if hops[u][k] >= UNREACHABLE_HOPS {
                return Err(Error::Scenario(format!(
                    "destination {} unreachable from {}",
                    network.node(network.destinations()[k]).name,
                    network.node(src).name
                )));
            }
        }
        work.push_back((u, DupStatus::all(d)));
    }
    while let Some((u, q)) = work.pop_front() {
        if q.is_zero() || !seen.insert((u, q)) {
            continue;
        }
        let mut groups: BTreeMap<(usize, usize), DupStatus> = BTreeMap::new();
        for k in q.destinations() {
            let e = next_edge(u, k).ok_or_else(|| Error::Scenario("no shortest-path successor".into()))?;
            let head = layered.edges()[e].head;
            let g = groups.entry((head, e)).or_default();
            *g = g.union(DupStatus::single(k));
        }
        let (&(head, e), &s) = groups.iter().next().expect("q is non-empty");
        let edge = &layered.edges()[e];
        let entry = (edge.stage, DupChoice { q, s });
        match edge.kind {
            LayeredEdgeKind::Transmission { edge } => plan.links[edge].push(entry),
            LayeredEdgeKind::Processing { node } => plan.processors[node].push(entry),
        }
        work.push_back((head, landing(head, s)));
        work.push_back((u, q.without(s)));
    }
    for list in plan.links.iter_mut().chain(plan.processors.iter_mut()) {
        list.sort_by_key(|&(m, c)| (c, m));
    }
    Ok(plan)
}

#[derive(Clone, Debug)]
pub struct Edspa {
    plan: EdspaPlan,
    destinations: usize,
}

impl Edspa {
    pub fn new(network: &Network, service: &Service) -> Result<Self> {
        Ok(Edspa { plan: edspa_routes(network, service)?, destinations: network.destination_count() })
    }

    pub fn plan(&self) -> &EdspaPlan {
        &self.plan
    }

    fn fullest(list: &[(usize, DupChoice)], state: &QueueState, node: usize) -> Option<(usize, DupChoice, u64)> {
        let mut best: Option<(usize, DupChoice, u64)> = None;
        for &(m, c) in list {
            let b = state.backlog(node, m, c.q);
            if b > 0 && best.is_none_or(|x| b > x.2) {
                best = Some((m, c, b));
            }
        }
        best
    }
}

impl Policy for Edspa {
    fn decide(&mut self, state: &QueueState, ctx: &SlotContext, _rng: &mut ChaCha8Rng) -> Result<SlotDecision> {
        let mut out = SlotDecision::default();
        let mut radio_links: Vec<Vec<(usize, usize, DupChoice, u64)>> = vec![Vec::new(); ctx.network.node_count()];
        for (e, edge) in ctx.network.edges().iter().enumerate() {
            let Some((stage, choice, backlog)) = Edspa::fullest(&self.plan.links[e], state, edge.from) else {
                continue;
            };
            if edge.wireless {
                radio_links[edge.from].push((e, stage, choice, backlog));
            } else if edge.capacity > 0 {
                out.links.push(LinkAssignment { edge: e, stage, choice, flow: edge.capacity.min(backlog) });
            }
        }
        for (i, links) in radio_links.iter_mut().enumerate() {
            if links.is_empty() {
                continue;
            }
            let radio = ctx.radio.ok_or_else(|| Error::Scenario("wireless edges need a radio section".into()))?;
            let node = ctx.network.node(i);
            // Full budget: single-association nodes on their fullest link,
            // edge servers split evenly.
            if node.kind != NodeKind::Es {
                links.sort_by_key(|l| std::cmp::Reverse(l.3));
                links.truncate(1);
            }
            let power = node.power_budget / links.len() as f64;
            for &(e, stage, choice, backlog) in links.iter() {
                out.radio.push(RadioAssignment { edge: e, power, active: true });
                let cap = capacity_packets(radio, power, ctx.gains[e]);
                if cap > 0 {
                    out.links.push(LinkAssignment { edge: e, stage, choice, flow: cap.min(backlog) });
                }
            }
        }
        for (i, node) in ctx.network.nodes().iter().enumerate() {
            if let Some((stage, choice, backlog)) = Edspa::fullest(&self.plan.processors[i], state, i) {
                let cap = processing_packets(node, &ctx.service.functions[stage]);
                if cap > 0 {
                    out.processing.push(ProcessingAssignment { node: i, stage, choice, flow: cap.min(backlog) });
                }
            }
        }
        Ok(out)
    }

    fn arrival_statuses(&self) -> Vec<DupStatus> {
        vec![DupStatus::all(self.destinations)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};
    use crate::scalar::Rational;

    fn v(t: &str) -> DupStatus {
        DupStatus::from_vector(t)
    }

    fn one() -> Rational {
        Rational::from_integer(1)
    }

    #[test]
    fn star_duplicates_at_relay() {
        let nodes = ["src", "relay", "d1", "d2"].into_iter().map(Node::new).collect();
        let edges = vec![Edge::wired(0, 1, 1, one()), Edge::wired(1, 2, 1, one()), Edge::wired(1, 3, 1, one())];
        let net = Network::new(nodes, edges, vec![0], vec![2, 3]).unwrap();
        let plan = edspa_routes(&net, &Service::routing_only()).unwrap();
        assert_eq!(plan.links[0], vec![(0, DupChoice::forward(v("11")))]);
        assert_eq!(plan.links[1], vec![(0, DupChoice { q: v("11"), s: v("10") })]);
        assert_eq!(plan.links[2], vec![(0, DupChoice::forward(v("01")))]);
    }

    #[test]
    fn destination_on_the_path_splits_on_arrival() {
        // src -> a -> d1 with d2 = a.
        let nodes = ["src", "a", "d1"].into_iter().map(Node::new).collect();
        let edges = vec![Edge::wired(0, 1, 1, one()), Edge::wired(1, 2, 1, one())];
        let net = Network::new(nodes, edges, vec![0], vec![2, 1]).unwrap();
        let plan = edspa_routes(&net, &Service::routing_only()).unwrap();
        assert_eq!(plan.links[0], vec![(0, DupChoice::forward(v("11")))]);
        // At a, the b_2 copy has departed; the remaining 10 continues.
        assert_eq!(plan.links[1], vec![(0, DupChoice::forward(v("10")))]);
    }

    #[test]
    fn ties_prefer_smallest_next_hop() {
        // src -> {a, b} -> d, both two hops.
        let nodes = ["src", "a", "b", "d"].into_iter().map(Node::new).collect();
        let edges = vec![
            Edge::wired(0, 2, 1, one()),
            Edge::wired(0, 1, 1, one()),
            Edge::wired(1, 3, 1, one()),
            Edge::wired(2, 3, 1, one()),
        ];
        let net = Network::new(nodes, edges, vec![0], vec![3]).unwrap();
        let plan = edspa_routes(&net, &Service::routing_only()).unwrap();
        assert!(plan.links[0].is_empty());
        assert_eq!(plan.links[1].len(), 1);
    }

    #[test]
    fn unreachable_destination_is_an_error() {
        let nodes = ["src", "a", "d"].into_iter().map(Node::new).collect();
        let edges = vec![Edge::wired(0, 1, 1, one())];
        let net = Network::new(nodes, edges, vec![0], vec![2]).unwrap();
        assert!(edspa_routes(&net, &Service::routing_only()).is_err());
    }
}
