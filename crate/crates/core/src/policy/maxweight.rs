//! Max-weight forwarding, duplication and processing.
//!
//! One implementation covers the full-choice policy, its tree-restricted
//! variant, the hop-biased variants and the unicast baseline; they differ in
//! the choice set, the arrival statuses and whether backlogs are biased.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;

use super::{Policy, PolicyConfig, PolicyKind, SlotContext};
use crate::commodity::{
    build_duplication_trees, enumerate_omega, tree_choices, unicast_choices, DupChoice, DupStatus, DupTree,
};
use crate::error::{Error, Result};
use crate::graph::{layered_graph, processing_packets, EdgeId, Network, NodeId, NodeKind, Service};
use crate::queue::{LinkAssignment, ProcessingAssignment, QueueState, RadioAssignment, SlotDecision};
use crate::scalar::to_f64;
use crate::wireless::{activation_utility, capacity_packets, link_activation, power_allocation, RadioLink};

/// One unicast copy per destination for every exogenous packet.
pub fn unicast_arrival_statuses(d: usize) -> Vec<DupStatus> {
    (0..d).map(DupStatus::single).collect()
}

#[derive(Clone, Debug)]
pub struct MaxWeight {
    v: f64,
    choices: Vec<DupChoice>,
    arrivals: Vec<DupStatus>,
    nodes: usize,
    stages: usize,
    statuses: usize,
    dest_index: Vec<Option<usize>>,
    /// Whether queue terms are multiplied by `‖q‖₁` and biased.
    weighted: bool,
    /// `η Σ_k q_k H[(i,m)][k]` per table cell.
    bias: Vec<f64>,
    inv_scale: Vec<f64>,
    /// Effective backlog per `(node, stage, status)`, refreshed every slot.
    table: Vec<f64>,
}

impl MaxWeight {
    /// Builds the policy named by `config.kind`; restricted variants cluster
    /// destinations with `clustering_seed`.
    pub fn from_config(
        network: &Network,
        service: &Service,
        config: &PolicyConfig,
        clustering_seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let d = network.destination_count();
        match config.kind {
            PolicyKind::Gdcnc | PolicyKind::Egdcnc => {
                MaxWeight::new(network, service, config, enumerate_omega(d)?, vec![DupStatus::all(d)])
            }
            PolicyKind::GdcncR | PolicyKind::EgdcncR => {
                let trees =
                    build_duplication_trees(network, config.trees, config.metric, clustering_seed)?;
                MaxWeight::restricted(network, service, config, &trees)
            }
            PolicyKind::Dcnc => {
                MaxWeight::new(network, service, config, unicast_choices(d), unicast_arrival_statuses(d))
            }
            other => Err(Error::Policy(format!("{other} is not a max-weight policy"))),
        }
    }

    /// Argmax restricted to the union of the trees' choice sets.
    pub fn restricted(network: &Network, service: &Service, config: &PolicyConfig, trees: &[DupTree]) -> Result<Self> {
        let union: BTreeSet<DupChoice> = trees.iter().flat_map(tree_choices).collect();
        if union.is_empty() {
            return Err(Error::Policy("empty restricted choice set".into()));
        }
        let d = network.destination_count();
        MaxWeight::new(network, service, config, union.into_iter().collect(), vec![DupStatus::all(d)])
    }

    pub fn new(
        network: &Network,
        service: &Service,
        config: &PolicyConfig,
        mut choices: Vec<DupChoice>,
        arrivals: Vec<DupStatus>,
    ) -> Result<Self> {
        config.validate()?;
        if choices.is_empty() {
            return Err(Error::Policy("empty choice set".into()));
        }
        choices.sort();
        choices.dedup();
        let nodes = network.node_count();
        let stages = service.stages();
        let statuses = 1usize << network.destination_count();
        let mut dest_index = vec![None; nodes];
        for (k, &d) in network.destinations().iter().enumerate() {
            dest_index[d] = Some(k);
        }
        let weighted = config.kind.uses_bias();
        let mut bias = vec![0.0; nodes * stages * statuses];
        if weighted && config.eta > 0.0 {
            let layered = layered_graph(network, service);
            let hops = layered.hop_distances();
            for i in 0..nodes {
                for m in 0..stages {
                    let h = &hops[layered.layered_id(i, m)];
                    for bits in 1..statuses {
                        let q = DupStatus::from_bits(bits as u32);
                        bias[(i * stages + m) * statuses + bits] =
                            config.eta * q.destinations().map(|k| h[k] as f64).sum::<f64>();
                    }
                }
            }
        }
        let inv_scale = service
            .cumulative_scaling()
            .iter()
            .map(|x| if config.normalize { 1.0 / to_f64(x) } else { 1.0 })
            .collect();
        Ok(MaxWeight {
            v: config.v,
            choices,
            arrivals,
            nodes,
            stages,
            statuses,
            dest_index,
            weighted,
            bias,
            inv_scale,
            table: vec![0.0; nodes * stages * statuses],
        })
    }

    pub fn choices(&self) -> &[DupChoice] {
        &self.choices
    }

    fn cell(&self, node: NodeId, stage: usize, q: DupStatus) -> usize {
        (node * self.stages + stage) * self.statuses + q.index()
    }

    #[cfg(test)]
    fn set(&mut self, node: NodeId, stage: usize, q: DupStatus, value: f64) {
        let idx = self.cell(node, stage, q);
        self.table[idx] = value;
    }

    /// Refreshes the effective backlog table from the slot-start snapshot.
    pub fn load_snapshot(&mut self, state: &QueueState) {
        for i in 0..self.nodes {
            for m in 0..self.stages {
                let scale = self.inv_scale[m];
                for bits in 1..self.statuses {
                    let q = DupStatus::from_bits(bits as u32);
                    let idx = (i * self.stages + m) * self.statuses + bits;
                    let backlog = state.backlog(i, m, q) as f64;
                    let value = if self.weighted {
                        q.weight() as f64 * backlog + self.bias[idx]
                    } else {
                        backlog
                    };
                    self.table[idx] = scale * value;
                }
            }
        }
    }

    /// Effective backlog the weights use; `0` for the empty status.
    pub fn effective_backlog(&self, node: NodeId, stage: usize, q: DupStatus) -> f64 {
        if q.is_zero() {
            0.0
        } else {
            self.table[self.cell(node, stage, q)]
        }
    }

    /// Status a transmitted copy joins at `node`: on the final stage a
    /// destination keeps only the part still owed to others.
    fn landing(&self, node: NodeId, stage: usize, s: DupStatus) -> DupStatus {
        match self.dest_index[node] {
            Some(k) if stage + 1 == self.stages && s.contains(k) => s.without(DupStatus::single(k)),
            _ => s,
        }
    }

    /// Duplication weight without the cost term.
    pub fn backlog_weight(&self, from: NodeId, to: NodeId, stage: usize, c: DupChoice) -> f64 {
        self.effective_backlog(from, stage, c.q)
            - self.effective_backlog(from, stage, c.reload())
            - self.effective_backlog(to, stage, self.landing(to, stage, c.s))
    }

    /// Best `(stage, choice, weight)` on a link, ties to the smallest `(q, s, stage)`.
    pub fn best_link_choice(&self, from: NodeId, to: NodeId, unit_cost: f64) -> (usize, DupChoice, f64) {
        let mut best = (0, self.choices[0], f64::NEG_INFINITY);
        for &c in &self.choices {
            for m in 0..self.stages {
                let w = self.backlog_weight(from, to, m, c) - self.v * unit_cost;
                if w > best.2 {
                    best = (m, c, w);
                }
            }
        }
        best
    }

    /// Best processing `(stage, choice, weight)` at a node.
    pub fn best_processing_choice(&self, node: NodeId, service: &Service, unit_cost: f64) -> Option<(usize, DupChoice, f64)> {
        let mut best: Option<(usize, DupChoice, f64)> = None;
        for &c in &self.choices {
            for (m, f) in service.functions.iter().enumerate() {
                let xi = to_f64(&f.scaling);
                let r = to_f64(&f.workload);
                let w = (self.effective_backlog(node, m, c.q)
                    - xi * self.effective_backlog(node, m + 1, self.landing(node, m + 1, c.s))
                    - self.effective_backlog(node, m, c.reload()))
                    / r
                    - self.v * unit_cost;
                if best.is_none_or(|b| w > b.2) {
                    best = Some((m, c, w));
                }
            }
        }
        best
    }

    fn radio_decisions(&self, ctx: &SlotContext, wireless: &[EdgeId], out: &mut SlotDecision) -> Result<()> {
        let radio = ctx
            .radio
            .ok_or_else(|| Error::Scenario("wireless edges need a radio section".into()))?;
        let noise = radio.noise_watts();
        let mut by_node: Vec<Vec<EdgeId>> = vec![Vec::new(); self.nodes];
        for &e in wireless {
            by_node[ctx.network.edge(e).from].push(e);
        }
        for (i, edges) in by_node.iter().enumerate() {
            if edges.is_empty() {
                continue;
            }
            let node = ctx.network.node(i);
            let best: Vec<(usize, DupChoice, f64)> = edges
                .iter()
                .map(|&e| self.best_link_choice(i, ctx.network.edge(e).to, 0.0))
                .collect();
            let links: Vec<RadioLink> = edges
                .iter()
                .zip(&best)
                .map(|(&e, b)| {
                    let g = ctx.gains[e];
                    RadioLink {
                        weight: b.2,
                        noise_over_gain: if g > 0.0 { noise / g } else { f64::INFINITY },
                    }
                })
                .collect();
            let joint = node.kind == NodeKind::Es;
            let price = node.energy_cost * self.v;
            let sol = power_allocation(&links, radio.packet_bandwidth(), price, node.power_budget, joint);
            let active = if joint {
                sol.powers.iter().map(|&p| p > 0.0).collect()
            } else {
                let psi: Vec<f64> = edges
                    .iter()
                    .zip(&best)
                    .zip(&sol.powers)
                    .map(|((&e, b), &p)| {
                        if p > 0.0 && b.2 > 0.0 {
                            activation_utility(radio, b.2, p, ctx.gains[e], self.v, node.energy_cost)
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                link_activation(&psi, node.kind)
            };
            for (j, &e) in edges.iter().enumerate() {
                if !active[j] || sol.powers[j] <= 0.0 {
                    continue;
                }
                let power = sol.powers[j];
                out.radio.push(RadioAssignment { edge: e, power, active: true });
                let cap = capacity_packets(radio, power, ctx.gains[e]);
                let (stage, choice, w) = best[j];
                if w > 0.0 && cap > 0 {
                    out.links.push(LinkAssignment { edge: e, stage, choice, flow: cap });
                }
            }
        }
        Ok(())
    }

    /// Decision for the snapshot already loaded with [`load_snapshot`](Self::load_snapshot).
    pub fn decide_loaded(&self, ctx: &SlotContext) -> Result<SlotDecision> {
        let mut out = SlotDecision::default();
        let mut wireless = Vec::new();
        for (e, edge) in ctx.network.edges().iter().enumerate() {
            if edge.wireless {
                wireless.push(e);
                continue;
            }
            if edge.capacity == 0 {
                continue;
            }
            let (stage, choice, w) = self.best_link_choice(edge.from, edge.to, to_f64(&edge.cost));
            if w > 0.0 {
                out.links.push(LinkAssignment { edge: e, stage, choice, flow: edge.capacity });
            }
        }
        if !wireless.is_empty() {
            self.radio_decisions(ctx, &wireless, &mut out)?;
        }
        if !ctx.service.functions.is_empty() {
            for (i, node) in ctx.network.nodes().iter().enumerate() {
                if node.proc_capacity <= crate::scalar::Rational::from_integer(0) {
                    continue;
                }
                if let Some((stage, choice, w)) = self.best_processing_choice(i, ctx.service, to_f64(&node.proc_cost)) {
                    let flow = processing_packets(node, &ctx.service.functions[stage]);
                    if w > 0.0 && flow > 0 {
                        out.processing.push(ProcessingAssignment { node: i, stage, choice, flow });
                    }
                }
            }
        }
        Ok(out)
    }
}

impl Policy for MaxWeight {
    fn decide(&mut self, state: &QueueState, ctx: &SlotContext, _rng: &mut ChaCha8Rng) -> Result<SlotDecision> {
        self.load_snapshot(state);
        self.decide_loaded(ctx)
    }

    fn arrival_statuses(&self) -> Vec<DupStatus> {
        self.arrivals.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node, ServiceFunction};
        use crate::scalar::Rational;
    use rand::SeedableRng;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn v(t: &str) -> DupStatus {
        DupStatus::from_vector(t)
    }

    /// s -> a, a -> d1, a -> d2 with unit cost on s -> a.
    fn net() -> Network {
        let nodes = ["s", "a", "d1", "d2"].into_iter().map(Node::new).collect();
        let edges = vec![Edge::wired(0, 1, 2, r(1)), Edge::wired(1, 2, 1, r(1)), Edge::wired(1, 3, 1, r(1))];
        Network::new(nodes, edges, vec![0], vec![2, 3]).unwrap()
    }

    fn empty(network: &Network, service: &Service) -> QueueState {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        QueueState::new(network, service, vec![DupStatus::all(network.destination_count())], &mut rng)
    }

    #[test]
    fn weight_arithmetic() {
        let n = net();
        let s = Service::routing_only();
        let mut p = MaxWeight::from_config(&n, &s, &PolicyConfig::new(PolicyKind::Gdcnc), 0).unwrap();
        let st = empty(&n, &s);
        p.load_snapshot(&st);
        let c = |q: &str, s: &str| DupChoice { q: v(q), s: v(s) };
        p.set(0, 0, v("11"), 10.0);
        p.set(0, 0, v("10"), 2.0);
        p.set(1, 0, v("01"), 3.0);
        assert_eq!(p.backlog_weight(0, 1, 0, c("11", "01")), 5.0);
        assert_eq!(p.backlog_weight(0, 1, 0, c("11", "01")) - 2.0 * 1.0, 3.0);
        // Forwarding: the empty reload term drops out.
        p.set(1, 0, v("11"), 4.0);
        assert_eq!(p.backlog_weight(0, 1, 0, c("11", "11")), 6.0);
    }

    #[test]
    fn idle_when_no_positive_weight() {
        let n = net();
        let s = Service::routing_only();
        let mut p = MaxWeight::from_config(&n, &s, &PolicyConfig::new(PolicyKind::Gdcnc), 0).unwrap();
        let st = empty(&n, &s);
        let ctx = SlotContext { network: &n, service: &s, radio: None, gains: &[0.0; 3] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(p.decide(&st, &ctx, &mut rng).unwrap().links.is_empty());
    }

    #[test]
    fn ties_go_to_smallest_choice() {
        let n = net();
        let s = Service::routing_only();
        let mut p = MaxWeight::from_config(&n, &s, &PolicyConfig::new(PolicyKind::Gdcnc), 0).unwrap();
        p.load_snapshot(&empty(&n, &s));
        p.set(0, 0, v("10"), 4.0);
        p.set(0, 0, v("01"), 4.0);
        let (_, choice, w) = p.best_link_choice(0, 1, 0.0);
        assert_eq!(w, 4.0);
        assert_eq!(choice, DupChoice::forward(v("10")));
    }

    #[test]
    fn destination_landing_uses_remaining_status() {
        // Sending 11 into d1 only leaves a 01 copy there.
        let n = net();
        let s = Service::routing_only();
        let mut p = MaxWeight::from_config(&n, &s, &PolicyConfig::new(PolicyKind::Gdcnc), 0).unwrap();
        p.load_snapshot(&empty(&n, &s));
        p.set(2, 0, v("01"), 7.0);
        p.set(2, 0, v("11"), 100.0);
        assert_eq!(p.backlog_weight(1, 2, 0, DupChoice::forward(v("11"))), -7.0);
        assert_eq!(p.backlog_weight(1, 2, 0, DupChoice::forward(v("10"))), 0.0);
    }

    #[test]
    fn processing_weight_example() {
        let mut nodes: Vec<Node> = ["a", "b"].into_iter().map(Node::new).collect();
        nodes[0].proc_capacity = r(5);
        let n = Network::new(nodes, vec![Edge::wired(0, 1, 1, r(0))], vec![0], vec![1]).unwrap();
        let s = Service::new(vec![ServiceFunction { scaling: r(2), workload: Rational::new(1, 2) }]).unwrap();
        let mut p = MaxWeight::from_config(&n, &s, &PolicyConfig::new(PolicyKind::Gdcnc), 0).unwrap();
        p.load_snapshot(&empty(&n, &s));
        let one = DupStatus::all(1);
        p.set(0, 0, one, 12.0);
        p.set(0, 1, one, 3.0);
        let (m, c, w) = p.best_processing_choice(0, &s, 0.0).unwrap();
        assert_eq!((m, c, w), (0, DupChoice::forward(one), 12.0));
        let ctx = SlotContext { network: &n, service: &s, radio: None, gains: &[0.0] };
        let dec = p.decide_loaded(&ctx).unwrap();
        assert_eq!(dec.processing[0].flow, 10);
    }

    #[test]
    fn hop_bias_example() {
        // Empty queues, hops {1, 2} to d1, d2 from the source, η = 1.
        let nodes = ["s", "d1", "d2"].into_iter().map(Node::new).collect();
        let edges = vec![Edge::wired(0, 1, 1, r(0)), Edge::wired(1, 2, 1, r(0))];
        let n = Network::new(nodes, edges, vec![0], vec![1, 2]).unwrap();
        let s = Service::routing_only();
        let mut p =
            MaxWeight::from_config(&n, &s, &PolicyConfig::new(PolicyKind::Egdcnc).with_eta(1.0), 0).unwrap();
        p.load_snapshot(&empty(&n, &s));
        assert_eq!(p.effective_backlog(0, 0, v("11")), 3.0);
        let mut p0 =
            MaxWeight::from_config(&n, &s, &PolicyConfig::new(PolicyKind::Egdcnc).with_eta(0.0), 0).unwrap();
        p0.load_snapshot(&empty(&n, &s));
        assert_eq!(p0.effective_backlog(0, 0, v("11")), 0.0);
    }

    #[test]
    fn restricted_choice_counts() {
        let n = net();
        let s = Service::routing_only();
        let cfg = PolicyConfig { kind: PolicyKind::GdcncR, metric: crate::commodity::DistanceMetric::HopDistance, ..Default::default() };
        let p = MaxWeight::from_config(&n, &s, &cfg, 0).unwrap();
        assert_eq!(p.choices().len(), 5);
    }
}
