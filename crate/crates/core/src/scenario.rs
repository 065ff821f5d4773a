//! Scenario files: a JSON description of nodes, edges, services,
//! commodities, the radio model and arrival rates.
//!
//! A scenario may hold several commodities; a run simulates one of them,
//! selected by index, via [`Scenario::instance`].

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{euclidean, Edge, Network, Node, NodeId, NodeKind, Service, ServiceFunction};
use crate::scalar::{deserialize_rational, to_f64, Rational};
use crate::wireless::{capacity_packets, mean_gain, path_loss_db, RadioParams};

fn zero() -> Rational {
    Rational::from_integer(0)
}

fn default_slot() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default)]
    pub kind: NodeKind,
    #[serde(default = "zero", deserialize_with = "deserialize_rational")]
    pub proc_capacity: Rational,
    #[serde(default = "zero", deserialize_with = "deserialize_rational")]
    pub proc_cost: Rational,
    #[serde(default)]
    pub position: Option<(f64, f64)>,
    #[serde(default)]
    pub power_budget: f64,
    #[serde(default)]
    pub energy_cost: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    /// Packets per slot. For wireless edges this is the nominal capacity used
    /// by the flow LP; it defaults to the full-budget rate at the mean gain.
    #[serde(default)]
    pub capacity: Option<u64>,
    #[serde(default = "zero", deserialize_with = "deserialize_rational")]
    pub cost: Rational,
    #[serde(default)]
    pub wireless: bool,
    /// Also add the reverse edge with the same parameters.
    #[serde(default)]
    pub bidirectional: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    #[serde(deserialize_with = "deserialize_rational")]
    pub scaling: Rational,
    #[serde(deserialize_with = "deserialize_rational")]
    pub workload: Rational,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub name: String,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommoditySpec {
    #[serde(default)]
    pub name: Option<String>,
    /// Service name; omitted means plain routing.
    #[serde(default)]
    pub service: Option<String>,
    pub sources: Vec<String>,
    /// Ordered: position `k` is bit `k` of the duplication status.
    pub destinations: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirelessSpec {
    #[serde(flatten)]
    pub params: RadioParams,
    /// Generate a wireless edge in both directions between every UE and ES.
    #[serde(default)]
    pub auto_links: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    /// Commodity index.
    #[serde(default)]
    pub commodity: usize,
    pub node: String,
    /// Mean packets per slot.
    #[serde(deserialize_with = "deserialize_rational")]
    pub rate: Rational,
    /// Truncation of the Poisson draw; defaults to `ceil(10 λ)`.
    #[serde(default)]
    pub max_per_slot: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_slot")]
    pub slot_seconds: f64,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub services: Vec<ServiceSpec>,
    pub commodities: Vec<CommoditySpec>,
    #[serde(default)]
    pub wireless: Option<WirelessSpec>,
    #[serde(default)]
    pub arrivals: Vec<ArrivalSpec>,
}

/// Per-source arrival process of one commodity.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceRate {
    pub node: NodeId,
    pub rate: Rational,
    pub max_per_slot: u64,
}

/// Everything a single-commodity run needs.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub network: Network,
    pub service: Service,
    pub arrivals: Vec<SourceRate>,
    pub radio: Option<RadioParams>,
    pub slot_seconds: f64,
}

impl Instance {
    /// `(node, λ)` pairs in the form the flow LP takes.
    pub fn rates(&self) -> Vec<(NodeId, Rational)> {
        self.arrivals.iter().map(|a| (a.node, a.rate)).collect()
    }

    pub fn total_rate(&self) -> f64 {
        self.arrivals.iter().map(|a| to_f64(&a.rate)).sum()
    }

    /// Same instance with every rate multiplied by `factor`. Explicit
    /// truncation bounds are kept; defaults follow the new rate.
    pub fn scaled(&self, factor: &Rational) -> Instance {
        let mut out = self.clone();
        for a in &mut out.arrivals {
            let default_cap = default_max_arrivals(&a.rate);
            a.rate *= *factor;
            if a.max_per_slot == default_cap {
                a.max_per_slot = default_max_arrivals(&a.rate);
            }
        }
        out
    }
}

pub fn default_max_arrivals(rate: &Rational) -> u64 {
    (*rate * Rational::from_integer(10)).ceil().to_integer().max(0) as u64
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        if !(self.slot_seconds > 0.0 && self.slot_seconds.is_finite()) {
            return Err(Error::Scenario("slot_seconds must be positive".into()));
        }
        if self.commodities.is_empty() {
            return Err(Error::Scenario("no commodities".into()));
        }
        for a in &self.arrivals {
            if a.rate < zero() {
                return Err(Error::Scenario(format!("negative arrival rate at {}", a.node)));
            }
            if a.commodity >= self.commodities.len() {
                return Err(Error::Scenario(format!("arrival refers to commodity {}", a.commodity)));
            }
        }
        if let Some(w) = &self.wireless {
            let p = &w.params;
            let positive = [p.bandwidth_hz, p.slot_seconds, p.packet_bits, p.carrier_ghz, p.range_m];
            if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::Scenario("wireless parameters must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn commodity_count(&self) -> usize {
        self.commodities.len()
    }

    /// Builds the network and arrival processes of commodity `index`.
    pub fn instance(&self, index: usize) -> Result<Instance> {
        let commodity = self
            .commodities
            .get(index)
            .ok_or_else(|| Error::Scenario(format!("commodity {index} out of range")))?;
        let ids: HashMap<&str, NodeId> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
        if ids.len() != self.nodes.len() {
            return Err(Error::Scenario("duplicate node name".into()));
        }
        let lookup = |name: &str| ids.get(name).copied().ok_or_else(|| Error::UnknownNode(name.to_string()));

        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .map(|n| Node {
                name: n.name.clone(),
                kind: n.kind,
                proc_capacity: n.proc_capacity,
                proc_cost: n.proc_cost,
                position: n.position,
                power_budget: n.power_budget,
                energy_cost: n.energy_cost,
            })
            .collect();

        let radio = self.wireless.as_ref().map(|w| w.params.clone());
        let nominal = |from: NodeId, to: NodeId| -> Result<u64> {
            let params = radio
                .as_ref()
                .ok_or_else(|| Error::Scenario("wireless edge without a wireless section".into()))?;
            let (a, b) = match (nodes[from].position, nodes[to].position) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Scenario(format!("wireless edge at {} needs positions", nodes[from].name))),
            };
            let dist = euclidean(a, b);
            if dist > params.range_m {
                return Ok(0);
            }
            let g = mean_gain(path_loss_db(params.carrier_ghz, dist.max(1.0)), params.shadow_sigma_db);
            Ok(capacity_packets(params, nodes[from].power_budget, g))
        };

        let mut edges = Vec::new();
        for e in &self.edges {
            let (from, to) = (lookup(&e.from)?, lookup(&e.to)?);
            let ends = if e.bidirectional { vec![(from, to), (to, from)] } else { vec![(from, to)] };
            for (a, b) in ends {
                let capacity = match e.capacity {
                    Some(c) => c,
                    None if e.wireless => nominal(a, b)?,
                    None => return Err(Error::Scenario(format!("edge {} -> {} needs a capacity", e.from, e.to))),
                };
                edges.push(Edge { from: a, to: b, capacity, cost: e.cost, wireless: e.wireless });
            }
        }
        if self.wireless.as_ref().is_some_and(|w| w.auto_links) {
            let of_kind = |k: NodeKind| -> Vec<NodeId> { (0..nodes.len()).filter(|&i| nodes[i].kind == k).collect() };
            let servers = of_kind(NodeKind::Es);
            for u in of_kind(NodeKind::Ue) {
                for &s in &servers {
                    for (a, b) in [(u, s), (s, u)] {
                        edges.push(Edge { from: a, to: b, capacity: nominal(a, b)?, cost: zero(), wireless: true });
                    }
                }
            }
        }

        let sources = commodity.sources.iter().map(|s| lookup(s)).collect::<Result<Vec<_>>>()?;
        let destinations = commodity.destinations.iter().map(|s| lookup(s)).collect::<Result<Vec<_>>>()?;
        let network = Network::new(nodes, edges, sources.clone(), destinations)?;

        let service = match &commodity.service {
            None => Service::routing_only(),
            Some(name) => {
                let spec = self
                    .services
                    .iter()
                    .find(|s| &s.name == name)
                    .ok_or_else(|| Error::Scenario(format!("unknown service {name:?}")))?;
                Service::new(
                    spec.functions
                        .iter()
                        .map(|f| ServiceFunction { scaling: f.scaling, workload: f.workload })
                        .collect(),
                )?
            }
        };

        let mut arrivals: Vec<SourceRate> = Vec::new();
        for a in self.arrivals.iter().filter(|a| a.commodity == index) {
            let node = lookup(&a.node)?;
            if !sources.contains(&node) {
                return Err(Error::Scenario(format!("arrivals at {} which is not a source", a.node)));
            }
            if arrivals.iter().any(|x| x.node == node) {
                return Err(Error::Scenario(format!("two arrival entries for {}", a.node)));
            }
            let max_per_slot = a.max_per_slot.unwrap_or_else(|| default_max_arrivals(&a.rate));
            arrivals.push(SourceRate { node, rate: a.rate, max_per_slot });
        }

        let slot_seconds = radio.as_ref().map_or(self.slot_seconds, |r| r.slot_seconds);
        let name = commodity.name.clone().unwrap_or_else(|| format!("{}#{index}", self.name));
        Ok(Instance { name, network, service, arrivals, radio, slot_seconds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STAR: &str = r#"{
        "name": "star",
        "nodes": [{"name": "src"}, {"name": "relay"}, {"name": "d1"}, {"name": "d2"}],
        "edges": [
            {"from": "src", "to": "relay", "capacity": 1, "cost": 1},
            {"from": "relay", "to": "d1", "capacity": 1, "cost": 1},
            {"from": "relay", "to": "d2", "capacity": 1, "cost": 1}
        ],
        "commodities": [{"sources": ["src"], "destinations": ["d1", "d2"]}],
        "arrivals": [{"node": "src", "rate": "1/2"}]
    }"#;

    #[test]
    fn star_loads() {
        let inst = Scenario::from_json(STAR).unwrap().instance(0).unwrap();
        assert_eq!(inst.network.node_count(), 4);
        assert_eq!(inst.network.edge_count(), 3);
        assert_eq!(inst.arrivals, vec![SourceRate { node: 0, rate: Rational::new(1, 2), max_per_slot: 5 }]);
        assert_eq!(inst.service.stages(), 1);
    }

    #[test]
    fn overlap_is_rejected() {
        let text = STAR.replace(r#""destinations": ["d1", "d2"]"#, r#""destinations": ["src", "d2"]"#);
        let err = Scenario::from_json(&text).unwrap().instance(0).unwrap_err();
        assert!(matches!(err, Error::SourceDestinationOverlap(_)));
    }

    #[test]
    fn unknown_fields_and_nodes_are_rejected() {
        assert!(Scenario::from_json(&STAR.replace("\"name\": \"star\"", "\"nam\": 1")).is_err());
        let text = STAR.replace(r#""to": "d2""#, r#""to": "d9""#);
        assert!(matches!(Scenario::from_json(&text).unwrap().instance(0), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn scaling_follows_default_truncation() {
        let inst = Scenario::from_json(STAR).unwrap().instance(0).unwrap();
        let s = inst.scaled(&Rational::new(9, 5));
        assert_eq!(s.arrivals[0].rate, Rational::new(9, 10));
        assert_eq!(s.arrivals[0].max_per_slot, 9);
    }
}
