//! Time-slotted simulation: arrivals, channel draws, policy decisions, the
//! two queue phases and metric collection.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::commodity::DupStatus;
use crate::error::{Error, Result};
use crate::graph::{euclidean, NodeKind};
use crate::lp::LpBackend;
use crate::policy::{Edspa, MaxWeight, Policy, PolicyConfig, PolicyKind, RandomizedPolicy, SlotContext};
use crate::queue::{slot_cost, ArrivalBatch, QueueState, SlotDecision};
use crate::scalar::{to_f64, Rational};
use crate::scenario::Instance;
use crate::wireless::{capacity_packets, channel_gain, mobility_step};

mod flows;
mod output;
mod rng;
mod stats;
mod sweep;

pub use flows::{conservation_residuals, Cell};
pub use output::{write_series_csv, write_sweep_csv, CSV_VERSION};
pub use rng::{stream, Stream};
pub use stats::{batch_mean, growth_rate, slope, stability_verdict, Verdict, EPSILON_S, MIN_VERDICT_LEN};
pub use sweep::{sweep, worker_count, Axis, SweepRow, SweepSpec, WORKERS_ENV};

/// Batches behind the cost standard error.
pub const COST_BATCHES: usize = 20;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub policy: PolicyConfig,
    pub slots: u64,
    pub seed: u64,
    /// Fraction of slots excluded from averages.
    pub warmup_fraction: f64,
    /// Keep every `thinning`-th slot in the time series.
    pub thinning: u64,
    /// Split the post-warmup window into this many flow-tally batches.
    pub flow_batches: usize,
    /// Keep every slot decision.
    pub record_decisions: bool,
    pub backend: LpBackend,
}

impl RunConfig {
    pub fn new(policy: PolicyConfig, slots: u64, seed: u64) -> Self {
        RunConfig {
            policy,
            slots,
            seed,
            warmup_fraction: 0.2,
            thinning: 100,
            flow_batches: 0,
            record_decisions: false,
            backend: LpBackend::Auto,
        }
    }

    pub fn warmup(&self) -> u64 {
        (self.slots as f64 * self.warmup_fraction).floor() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub slot: u64,
    pub total_backlog: u64,
    /// Little's-law delay estimate from the current weighted backlog.
    pub weighted_backlog: f64,
    pub cost: f64,
}

#[derive(Clone, Debug)]
pub struct RunMetrics {
    pub policy: PolicyKind,
    pub slots: u64,
    pub seed: u64,
    pub warmup: u64,
    pub series: Vec<SeriesPoint>,
    pub avg_cost: f64,
    /// Standard error of `avg_cost` from batch means.
    pub cost_stderr: f64,
    pub avg_backlog: f64,
    /// Post-warmup mean of `Σ ‖q‖₁ Q^(q) / (D ‖λ‖₁)`, in slots.
    pub delay_estimate: f64,
    /// Mean per-copy delay of copies delivered after warmup, in slots.
    pub avg_delay: f64,
    pub avg_delay_seconds: f64,
    /// Mean time until all copies of a packet are delivered; `None` when the
    /// service rescales packets or nothing completed.
    pub completion_delay: Option<f64>,
    pub delivered: u64,
    pub admitted: u64,
    pub dummies: u64,
    pub verdict: Verdict,
    /// Second-half backlog slope per unit arrival rate.
    pub growth: f64,
    /// `Σ ‖q‖₁` over copies still queued at the end that arrived before
    /// warmup ended. Such copies sat through the whole window undelivered.
    pub stranded_weight: u64,
    /// Per-batch conservation residuals after warmup.
    pub flow_batches: Vec<BTreeMap<Cell, f64>>,
    pub decisions: Vec<SlotDecision>,
}

/// Instantiates the policy a configuration names.
pub fn build_policy(inst: &Instance, config: &PolicyConfig, seed: u64, backend: LpBackend) -> Result<Box<dyn Policy>> {
    config.validate()?;
    Ok(match config.kind {
        PolicyKind::Edspa => Box::new(Edspa::new(&inst.network, &inst.service)?),
        PolicyKind::Randomized => {
            let (p, _) = RandomizedPolicy::from_min_cost(
                &inst.network,
                &inst.service,
                &inst.rates(),
                1.0,
                config.headroom,
                backend,
            )?;
            Box::new(p)
        }
        _ => {
            let clustering: u64 = stream(seed, Stream::Clustering).random();
            Box::new(MaxWeight::from_config(&inst.network, &inst.service, config, clustering)?)
        }
    })
}

struct Arrivals {
    sources: Vec<(usize, Option<Poisson<f64>>, u64)>,
}

impl Arrivals {
    fn new(inst: &Instance) -> Result<Self> {
        let sources = inst
            .arrivals
            .iter()
            .map(|a| {
                let rate = to_f64(&a.rate);
                let dist = if rate > 0.0 {
                    Some(Poisson::new(rate).map_err(|e| Error::Scenario(format!("arrival rate {rate}: {e}")))?)
                } else {
                    None
                };
                Ok((a.node, dist, a.max_per_slot))
            })
            .collect::<Result<_>>()?;
        Ok(Arrivals { sources })
    }

    fn draw(&self, rng: &mut impl Rng) -> ArrivalBatch {
        let counts = self
            .sources
            .iter()
            .map(|(node, dist, cap)| {
                let n = dist.as_ref().map_or(0, |d| d.sample(rng) as u64);
                (*node, n.min(*cap))
            })
            .collect();
        ArrivalBatch { counts }
    }
}

/// Simulates one instance under one policy. Deterministic in
/// `(inst, config)`.
pub fn run(inst: &Instance, config: &RunConfig) -> Result<RunMetrics> {
    let policy = build_policy(inst, &config.policy, config.seed, config.backend)?;
    run_with(inst, config, policy)
}

/// Like [`run`] with a caller-supplied policy.
pub fn run_with(inst: &Instance, config: &RunConfig, mut policy: Box<dyn Policy>) -> Result<RunMetrics> {
    let network = &inst.network;
    let service = &inst.service;
    let d = network.destination_count();
    let lambda = inst.total_rate();
    let warmup = config.warmup();
    let thinning = config.thinning.max(1);
    if config.slots == 0 || warmup >= config.slots {
        return Err(Error::Scenario("slots must exceed the warmup".into()));
    }
    if network.has_wireless() && inst.radio.is_none() {
        return Err(Error::Scenario("wireless edges need a wireless section".into()));
    }

    let mut arrivals_rng = stream(config.seed, Stream::Arrivals);
    let mut fading_rng = stream(config.seed, Stream::Fading);
    let mut policy_rng = stream(config.seed, Stream::Randomized);
    let mut mobility_rng = stream(config.seed, Stream::Mobility);
    let mut state = QueueState::new(
        network,
        service,
        policy.arrival_statuses(),
        &mut stream(config.seed, Stream::Scaling),
    );
    let arrivals = Arrivals::new(inst)?;

    let wireless: Vec<usize> = (0..network.edge_count()).filter(|&e| network.edge(e).wireless).collect();
    let mut positions: Vec<Option<(f64, f64)>> = network.nodes().iter().map(|n| n.position).collect();
    let mut gains = vec![0.0; network.edge_count()];
    let mut link_capacity: Vec<u64> = network.edges().iter().map(|e| e.capacity).collect();
    let proc_capacity: Vec<Rational> = network.nodes().iter().map(|n| n.proc_capacity).collect();
    let workload: Vec<Rational> = service.functions.iter().map(|f| f.workload).collect();

    let unscaled = service.functions.iter().all(|f| f.scaling == Rational::from_integer(1));
    let full = DupStatus::all(d);
    let mut pending: HashMap<u64, (u64, DupStatus)> = HashMap::new();

    let batch_len = if config.flow_batches > 0 { (config.slots - warmup) / config.flow_batches as u64 } else { 0 };
    let mut flow_batches = Vec::new();

    let mut series = Vec::with_capacity((config.slots / thinning) as usize + 1);
    let mut backlog_series = Vec::with_capacity(config.slots as usize);
    let mut decisions = Vec::new();
    let (mut cost_sum, mut backlog_sum, mut estimate_sum) = (0.0, 0.0, 0.0);
    let window_len = config.slots - warmup;
    let mut cost_batches = vec![0.0; COST_BATCHES.min(window_len as usize)];
    let batches = cost_batches.len() as u64;
    let (mut delay_sum, mut delay_count) = (0u64, 0u64);
    let (mut completion_sum, mut completion_count) = (0u64, 0u64);
    let (mut delivered, mut dummies) = (0u64, 0u64);

    for t in 0..config.slots {
        if t == warmup && batch_len > 0 {
            state.enable_tally();
        }
        if let Some(radio) = &inst.radio {
            for &e in &wireless {
                let edge = network.edge(e);
                let (a, b) = (positions[edge.from], positions[edge.to]);
                gains[e] = match (a, b) {
                    (Some(a), Some(b)) => channel_gain(radio, euclidean(a, b), &mut fading_rng),
                    _ => 0.0,
                };
            }
        }
        let ctx = SlotContext { network, service, radio: inst.radio.as_ref(), gains: &gains };
        let decision = policy.decide(&state, &ctx, &mut policy_rng)?;

        if let Some(radio) = &inst.radio {
            for &e in &wireless {
                link_capacity[e] = 0;
            }
            for r in decision.radio.iter().filter(|r| r.active) {
                if r.power > network.node(network.edge(r.edge).from).power_budget * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::Decision(format!("slot {t}: edge {} power {} over budget", r.edge, r.power)));
                }
                link_capacity[r.edge] = capacity_packets(radio, r.power, gains[r.edge]);
            }
            for (i, node) in network.nodes().iter().enumerate() {
                if node.kind == NodeKind::Ue {
                    let total: f64 = decision
                        .radio
                        .iter()
                        .filter(|r| r.active && network.edge(r.edge).from == i)
                        .map(|r| r.power)
                        .sum();
                    if total > node.power_budget * (1.0 + 1e-9) + 1e-12 {
                        return Err(Error::Decision(format!("slot {t}: node {} over its power budget", node.name)));
                    }
                }
            }
        }
        state
            .validate(&decision, &link_capacity, &proc_capacity, &workload)
            .map_err(|e| Error::Decision(format!("slot {t}: {e}")))?;

        let cost = slot_cost(network, service, &decision, inst.slot_seconds);
        let in_flight = state.transmit_phase(&decision);
        dummies += in_flight.dummies;
        let batch = arrivals.draw(&mut arrivals_rng);
        let first_lineage = state.admitted();
        let landed = state.receive_phase(in_flight, &batch, t);
        if unscaled {
            for lineage in first_lineage..state.admitted() {
                pending.insert(lineage, (t, DupStatus::ZERO));
            }
        }
        for copy in &landed {
            if unscaled {
                let entry = pending
                    .get_mut(&copy.lineage)
                    .ok_or_else(|| Error::Decision(format!("slot {t}: copy of unknown packet {}", copy.lineage)))?;
                let bit = DupStatus::single(copy.destination);
                if entry.1.intersects(bit) {
                    return Err(Error::Decision(format!(
                        "slot {t}: packet {} delivered twice to destination {}",
                        copy.lineage, copy.destination
                    )));
                }
                entry.1 = entry.1.union(bit);
                if entry.1 == full {
                    if t >= warmup {
                        completion_sum += t - entry.0;
                        completion_count += 1;
                    }
                    pending.remove(&copy.lineage);
                }
            }
            if t >= warmup {
                delay_sum += t - copy.born;
                delay_count += 1;
            }
        }
        delivered += landed.len() as u64;
        if config.record_decisions {
            decisions.push(decision);
        }

        let backlog = state.total_backlog();
        let estimate = if lambda > 0.0 { state.weighted_sum() as f64 / (d as f64 * lambda) } else { 0.0 };
        backlog_series.push(backlog as f64);
        if t >= warmup {
            cost_sum += cost;
            cost_batches[((t - warmup) * batches / window_len) as usize] += cost;
            backlog_sum += backlog as f64;
            estimate_sum += estimate;
            if batch_len > 0 && (t + 1 - warmup) % batch_len == 0 && flow_batches.len() < config.flow_batches {
                let tally = state.take_tally().expect("tally enabled after warmup");
                flow_batches.push(conservation_residuals(network, service, &tally, batch_len));
            }
        }
        if t % thinning == 0 {
            series.push(SeriesPoint { slot: t, total_backlog: backlog, weighted_backlog: estimate, cost });
        }

        if let Some(radio) = &inst.radio {
            if radio.mobility_sigma_m > 0.0 {
                for (i, node) in network.nodes().iter().enumerate() {
                    if let (NodeKind::Ue, Some(p)) = (node.kind, positions[i]) {
                        positions[i] = Some(mobility_step(p, radio.mobility_sigma_m, radio.area_half_m, &mut mobility_rng));
                    }
                }
            }
        }
    }
    state.check_invariants()?;
    let mut stranded_weight = 0;
    for i in 0..network.node_count() {
        for m in 0..service.stages() {
            for bits in 1..(1u32 << d) {
                let q = DupStatus::from_bits(bits);
                let old = state.queue(i, m, q).iter().filter(|r| r.born < warmup).count() as u64;
                stranded_weight += q.weight() as u64 * old;
            }
        }
    }
    let admitted = state.admitted();
    let copies_per_packet = policy.arrival_statuses().iter().map(|q| q.weight() as u64).sum::<u64>();
    if unscaled && delivered > copies_per_packet * admitted {
        return Err(Error::Decision(format!("{delivered} copies delivered for {admitted} packets")));
    }

    let window = window_len as f64;
    let per_batch: Vec<f64> = cost_batches
        .iter()
        .enumerate()
        .map(|(b, sum)| {
            let b = b as u64;
            let len = ((b + 1) * window_len).div_ceil(batches) - (b * window_len).div_ceil(batches);
            sum / len as f64
        })
        .collect();
    let avg_delay = if delay_count > 0 { delay_sum as f64 / delay_count as f64 } else { 0.0 };
    Ok(RunMetrics {
        policy: config.policy.kind,
        slots: config.slots,
        seed: config.seed,
        warmup,
        series,
        avg_cost: cost_sum / window,
        cost_stderr: batch_mean(&per_batch).1,
        avg_backlog: backlog_sum / window,
        delay_estimate: estimate_sum / window,
        avg_delay,
        avg_delay_seconds: avg_delay * inst.slot_seconds,
        completion_delay: (unscaled && completion_count > 0).then(|| completion_sum as f64 / completion_count as f64),
        delivered,
        admitted,
        dummies,
        verdict: stability_verdict(&backlog_series, lambda),
        growth: growth_rate(&backlog_series, lambda),
        stranded_weight,
        flow_batches,
        decisions,
    })
}
