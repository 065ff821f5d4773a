//! Per-node, per-stage, per-status packet queues and the two-phase slot
//! dynamics: a transmit phase that pops packets for the scheduled flows, then
//! a receive phase that lands transmitted copies, reloads duplicates and
//! admits exogenous arrivals.

use std::collections::{HashMap, VecDeque};

use num_traits::Zero;
use rand::Rng;

use crate::commodity::{destination_arrival_split, DupChoice, DupStatus};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Network, NodeId, Service};
use crate::scalar::{to_f64, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketRecord {
    /// Exogenous packet this copy descends from.
    pub lineage: u64,
    /// Slot in which the exogenous packet arrived.
    pub born: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkAssignment {
    pub edge: EdgeId,
    pub stage: usize,
    pub choice: DupChoice,
    pub flow: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProcessingAssignment {
    pub node: NodeId,
    pub stage: usize,
    pub choice: DupChoice,
    /// Input packets processed.
    pub flow: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadioAssignment {
    pub edge: EdgeId,
    /// Transmit power in watts.
    pub power: f64,
    pub active: bool,
}

/// Everything the policy decided for one slot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SlotDecision {
    pub links: Vec<LinkAssignment>,
    pub processing: Vec<ProcessingAssignment>,
    pub radio: Vec<RadioAssignment>,
}

/// New exogenous packets per source node this slot.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArrivalBatch {
    pub counts: Vec<(NodeId, u64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    Link { edge: EdgeId, stage: usize },
    Processor { node: NodeId, stage: usize },
}

/// Running real-packet counts for empirical flow-conservation checks.
#[derive(Clone, Debug, Default)]
pub struct FlowTally {
    /// Real packets selected per resource and choice.
    pub selected: HashMap<(Resource, DupChoice), u64>,
    /// Exogenous packets admitted per `(node, status)`.
    pub arrivals: HashMap<(NodeId, DupStatus), u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub lineage: u64,
    pub destination: usize,
    pub born: u64,
}

type Landing = (NodeId, usize, DupStatus, PacketRecord);

/// Output of [`QueueState::transmit_phase`].
#[derive(Clone, Debug, Default)]
pub struct InFlight {
    transmitted: Vec<Landing>,
    reloads: Vec<Landing>,
    pub real: u64,
    pub dummies: u64,
}

impl InFlight {
    pub fn transmitted_count(&self) -> usize {
        self.transmitted.len()
    }

    pub fn reload_count(&self) -> usize {
        self.reloads.len()
    }
}

#[derive(Clone, Debug)]
pub struct QueueState {
    nodes: usize,
    stages: usize,
    statuses: usize,
    queues: Vec<VecDeque<PacketRecord>>,
    /// Destination index of each node, if any.
    dest_index: Vec<Option<usize>>,
    edge_ends: Vec<(NodeId, NodeId)>,
    scaling: Vec<Rational>,
    /// Residue of fractional output per `(node, function)`.
    residue: Vec<Rational>,
    arrival_statuses: Vec<DupStatus>,
    next_lineage: u64,
    tally: Option<FlowTally>,
}

impl QueueState {
    /// Empty queues. `arrival_statuses` lists the copies created per
    /// exogenous packet (all-ones for multicast, `b_1..b_D` for unicast).
    /// Processing residues start at a random offset drawn from `rng`.
    pub fn new(
        network: &Network,
        service: &Service,
        arrival_statuses: Vec<DupStatus>,
        rng: &mut impl Rng,
    ) -> Self {
        let nodes = network.node_count();
        let stages = service.stages();
        let statuses = 1usize << network.destination_count();
        let mut dest_index = vec![None; nodes];
        for (k, &d) in network.destinations().iter().enumerate() {
            dest_index[d] = Some(k);
        }
        let scaling: Vec<Rational> = service.functions.iter().map(|f| f.scaling).collect();
        let mut residue = Vec::with_capacity(nodes * scaling.len());
        for _ in 0..nodes {
            for xi in &scaling {
                let den = *xi.denom();
                residue.push(Rational::new(rng.random_range(0..den), den));
            }
        }
        QueueState {
            nodes,
            stages,
            statuses,
            queues: vec![VecDeque::new(); nodes * stages * statuses],
            dest_index,
            edge_ends: network.edges().iter().map(|e| (e.from, e.to)).collect(),
            scaling,
            residue,
            arrival_statuses,
            next_lineage: 0,
            tally: None,
        }
    }

    pub fn enable_tally(&mut self) {
        self.tally = Some(FlowTally::default());
    }

    pub fn tally(&self) -> Option<&FlowTally> {
        self.tally.as_ref()
    }

    pub fn take_tally(&mut self) -> Option<FlowTally> {
        self.tally.as_mut().map(std::mem::take)
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    fn index(&self, node: NodeId, stage: usize, q: DupStatus) -> usize {
        (node * self.stages + stage) * self.statuses + q.index()
    }

    /// `Q_i^(m,q)`; zero for the empty status.
    pub fn backlog(&self, node: NodeId, stage: usize, q: DupStatus) -> u64 {
        if q.is_zero() {
            return 0;
        }
        self.queues[self.index(node, stage, q)].len() as u64
    }

    pub fn queue(&self, node: NodeId, stage: usize, q: DupStatus) -> &VecDeque<PacketRecord> {
        &self.queues[self.index(node, stage, q)]
    }

    pub fn total_backlog(&self) -> u64 {
        self.queues.iter().map(|q| q.len() as u64).sum()
    }

    /// `Σ ‖q‖₁ Q^(q)` over all nodes and stages.
    pub fn weighted_sum(&self) -> u64 {
        self.queues
            .iter()
            .enumerate()
            .map(|(idx, q)| (idx % self.statuses).count_ones() as u64 * q.len() as u64)
            .sum()
    }

    /// Rejects over-capacity or malformed decisions.
    /// `link_capacity[e]` is the slot capacity of edge `e` in packets;
    /// `proc_capacity[i]` and `workload[m]` bound processing.
    pub fn validate(
        &self,
        decision: &SlotDecision,
        link_capacity: &[u64],
        proc_capacity: &[Rational],
        workload: &[Rational],
    ) -> Result<()> {
        let mut used = vec![0u64; link_capacity.len()];
        for a in &decision.links {
            if a.edge >= link_capacity.len() || a.stage >= self.stages {
                return Err(Error::Decision(format!("unknown link or stage in {a:?}")));
            }
            check_choice(a.choice, self.statuses)?;
            used[a.edge] += a.flow;
            if used[a.edge] > link_capacity[a.edge] {
                return Err(Error::Decision(format!(
                    "edge {} carries {} > capacity {}",
                    a.edge, used[a.edge], link_capacity[a.edge]
                )));
            }
        }
        let mut load = vec![Rational::zero(); self.nodes];
        for a in &decision.processing {
            if a.node >= self.nodes || a.stage + 1 >= self.stages {
                return Err(Error::Decision(format!("unknown processor or stage in {a:?}")));
            }
            check_choice(a.choice, self.statuses)?;
            load[a.node] += workload[a.stage] * Rational::from_integer(a.flow as i64);
            if load[a.node] > proc_capacity[a.node] {
                return Err(Error::Decision(format!("processor {} over capacity", a.node)));
            }
        }
        Ok(())
    }

    fn pop(&mut self, node: NodeId, stage: usize, q: DupStatus, n: u64) -> Vec<PacketRecord> {
        let idx = self.index(node, stage, q);
        let take = (n as usize).min(self.queues[idx].len());
        self.queues[idx].drain(..take).collect()
    }

    /// Pops packets for every scheduled flow. Shortfalls become dummies.
    pub fn transmit_phase(&mut self, decision: &SlotDecision) -> InFlight {
        let mut out = InFlight::default();
        for a in &decision.links {
            let (from, to) = self.edge_ends[a.edge];
            let popped = self.pop(from, a.stage, a.choice.q, a.flow);
            let real = popped.len() as u64;
            out.real += real;
            out.dummies += a.flow - real;
            let reload = a.choice.reload();
            for rec in popped {
                out.transmitted.push((to, a.stage, a.choice.s, rec));
                if !reload.is_zero() {
                    out.reloads.push((from, a.stage, reload, rec));
                }
            }
            if let Some(t) = &mut self.tally {
                *t.selected.entry((Resource::Link { edge: a.edge, stage: a.stage }, a.choice)).or_default() += real;
            }
        }
        for a in &decision.processing {
            let popped = self.pop(a.node, a.stage, a.choice.q, a.flow);
            let real = popped.len() as u64;
            out.real += real;
            out.dummies += a.flow - real;
            let reload = a.choice.reload();
            let slot = a.node * self.scaling.len() + a.stage;
            let xi = self.scaling[a.stage];
            for rec in popped {
                self.residue[slot] += xi;
                let emitted = self.residue[slot].floor();
                self.residue[slot] -= emitted;
                for _ in 0..emitted.to_integer() {
                    out.transmitted.push((a.node, a.stage + 1, a.choice.s, rec));
                }
                if !reload.is_zero() {
                    out.reloads.push((a.node, a.stage, reload, rec));
                }
            }
            if let Some(t) = &mut self.tally {
                *t.selected.entry((Resource::Processor { node: a.node, stage: a.stage }, a.choice)).or_default() +=
                    real;
            }
        }
        out
    }

    fn enqueue(&mut self, node: NodeId, stage: usize, q: DupStatus, rec: PacketRecord) {
        let idx = self.index(node, stage, q);
        self.queues[idx].push_back(rec);
    }

    /// Lands in-flight copies, applying the destination split on the final
    /// stage, then reloads and exogenous arrivals. Returns departed copies.
    pub fn receive_phase(&mut self, in_flight: InFlight, arrivals: &ArrivalBatch, now: u64) -> Vec<Delivery> {
        let last = self.stages - 1;
        let mut delivered = Vec::new();
        for (node, stage, s, rec) in in_flight.transmitted {
            let split = match self.dest_index[node] {
                Some(k) if stage == last => destination_arrival_split(s, k).map(|(_, rest)| (k, rest)),
                _ => None,
            };
            match split {
                Some((k, rest)) => {
                    delivered.push(Delivery { lineage: rec.lineage, destination: k, born: rec.born });
                    if !rest.is_zero() {
                        self.enqueue(node, stage, rest, rec);
                    }
                }
                None => self.enqueue(node, stage, s, rec),
            }
        }
        for (node, stage, q, rec) in in_flight.reloads {
            self.enqueue(node, stage, q, rec);
        }
        for &(node, count) in &arrivals.counts {
            for _ in 0..count {
                let rec = PacketRecord { lineage: self.next_lineage, born: now };
                self.next_lineage += 1;
                for i in 0..self.arrival_statuses.len() {
                    let q = self.arrival_statuses[i];
                    self.enqueue(node, 0, q, rec);
                }
            }
            if let Some(t) = &mut self.tally {
                for &q in &self.arrival_statuses {
                    *t.arrivals.entry((node, q)).or_default() += count;
                }
            }
        }
        delivered
    }

    /// Exogenous packets admitted so far.
    pub fn admitted(&self) -> u64 {
        self.next_lineage
    }

    /// Checks that no destination holds a copy still addressed to itself on
    /// the final stage and that the empty status is never queued.
    pub fn check_invariants(&self) -> Result<()> {
        let last = self.stages - 1;
        for node in 0..self.nodes {
            for stage in 0..self.stages {
                if !self.queues[self.index(node, stage, DupStatus::ZERO)].is_empty() {
                    return Err(Error::Decision("status-0 queue is non-empty".into()));
                }
                if let (Some(k), true) = (self.dest_index[node], stage == last) {
                    for bits in 0..self.statuses as u32 {
                        let q = DupStatus::from_bits(bits);
                        if q.contains(k) && self.backlog(node, stage, q) > 0 {
                            return Err(Error::Decision(format!(
                                "destination {k} holds status {q:?} copies"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_choice(c: DupChoice, statuses: usize) -> Result<()> {
    if c.s.is_zero() || !c.s.is_subset_of(c.q) || c.q.index() >= statuses {
        return Err(Error::Decision(format!("invalid choice {c:?}")));
    }
    Ok(())
}

/// Operational cost of a slot: link transmissions, processing resources and
/// radio energy (`ẽ τ p` on active links).
pub fn slot_cost(network: &Network, service: &Service, decision: &SlotDecision, slot_seconds: f64) -> f64 {
    let links: f64 = decision
        .links
        .iter()
        .map(|a| to_f64(&network.edge(a.edge).cost) * a.flow as f64)
        .sum();
    let processing: f64 = decision
        .processing
        .iter()
        .map(|a| {
            to_f64(&network.node(a.node).proc_cost)
                * to_f64(&service.functions[a.stage].workload)
                * a.flow as f64
        })
        .sum();
    let radio: f64 = decision
        .radio
        .iter()
        .filter(|r| r.active)
        .map(|r| network.node(network.edge(r.edge).from).energy_cost * slot_seconds * r.power)
        .sum();
    // Empty f64 sums are -0.0; adding +0.0 keeps idle slots printing as 0.
    0.0 + links + processing + radio
}

/// Delay estimator `(1 / (D ‖λ‖₁)) Σ_q ‖q‖₁ Q^(q)`.
pub fn weighted_backlog(state: &QueueState, d: usize, lambda_sum: f64) -> Result<f64> {
    if lambda_sum <= 0.0 || d == 0 {
        return Err(Error::ZeroArrivalRate);
    }
    Ok(state.weighted_sum() as f64 / (d as f64 * lambda_sum))
}
