//! Stationary randomized policy built from an LP flow solution.
//!
//! Every slot each link independently draws one `(stage, choice)` with
//! probability `β` and sends a full-capacity batch of it, padding with dummy
//! packets; the leftover mass `1 - Σβ` leaves the link silent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Policy, SlotContext};
use crate::commodity::{DupChoice, DupStatus};
use crate::error::{Error, Result};
use crate::graph::{processing_packets, Network, NodeId, Service};
use crate::lp::{Beta, FlowModel, LpBackend, MinCost};
use crate::queue::{LinkAssignment, ProcessingAssignment, QueueState, SlotDecision};
use crate::scalar::{rational_from_f64, Rational};

#[derive(Clone, Debug)]
pub struct RandomizedPolicy {
    beta: Beta,
    destinations: usize,
}

fn check_simplex(list: &[(usize, DupChoice, f64)]) -> Result<()> {
    let total: f64 = list.iter().map(|x| x.2).sum();
    if list.iter().any(|x| !(x.2 >= 0.0)) || total > 1.0 + 1e-9 {
        return Err(Error::Policy(format!("selection probabilities {total} outside the simplex")));
    }
    Ok(())
}

fn draw(list: &[(usize, DupChoice, f64)], rng: &mut ChaCha8Rng) -> Option<(usize, DupChoice)> {
    if list.is_empty() {
        return None;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(m, c, p) in list {
        acc += p;
        if u < acc {
            return Some((m, c));
        }
    }
    None
}

impl RandomizedPolicy {
    pub fn new(beta: Beta, destinations: usize) -> Result<Self> {
        for list in beta.links.iter().chain(&beta.processors) {
            check_simplex(list)?;
        }
        Ok(RandomizedPolicy { beta, destinations })
    }

    /// Policy from the minimum-cost flow at `load · (1 + headroom)`.
    ///
    /// Provisioning exactly the arrival rate leaves every loaded link
    /// critically loaded; the small headroom keeps queues positive recurrent.
    pub fn from_min_cost(
        network: &Network,
        service: &Service,
        rates: &[(NodeId, Rational)],
        load: f64,
        headroom: f64,
        backend: LpBackend,
    ) -> Result<(Self, MinCost<f64>)> {
        if network.has_wireless() {
            return Err(Error::Unsupported("randomized policy needs fixed link capacities".into()));
        }
        let model = FlowModel::multicast(network, service, rates)?;
        let provisioned = rational_from_f64(load * (1.0 + headroom))
            .ok_or_else(|| Error::Policy(format!("load {load} not representable")))?;
        let sol = model.min_cost_f64(&provisioned, backend)?;
        let beta = model.beta(&sol.flows)?;
        Ok((RandomizedPolicy::new(beta, network.destination_count())?, sol))
    }

    pub fn beta(&self) -> &Beta {
        &self.beta
    }
}

impl Policy for RandomizedPolicy {
    fn decide(&mut self, _state: &QueueState, ctx: &SlotContext, rng: &mut ChaCha8Rng) -> Result<SlotDecision> {
        let mut out = SlotDecision::default();
        for (e, list) in self.beta.links.iter().enumerate() {
            if let Some((stage, choice)) = draw(list, rng) {
                let flow = ctx.network.edge(e).capacity;
                out.links.push(LinkAssignment { edge: e, stage, choice, flow });
            }
        }
        for (i, list) in self.beta.processors.iter().enumerate() {
            if let Some((stage, choice)) = draw(list, rng) {
                let flow = processing_packets(ctx.network.node(i), &ctx.service.functions[stage]);
                out.processing.push(ProcessingAssignment { node: i, stage, choice, flow });
            }
        }
        Ok(out)
    }

    fn arrival_statuses(&self) -> Vec<DupStatus> {
        vec![DupStatus::all(self.destinations)]
    }
}
