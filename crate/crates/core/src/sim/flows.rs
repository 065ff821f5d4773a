//! Empirical flow conservation from real-packet tallies.

use std::collections::BTreeMap;

use crate::commodity::DupStatus;
use crate::graph::{Network, NodeId, Service};
use crate::queue::{FlowTally, Resource};
use crate::scalar::to_f64;

/// `(node, stage, status)`.
pub type Cell = (NodeId, usize, DupStatus);

/// Net rate `in - out` per queue over `slots` slots: landed copies after the
/// destination split, reloads and arrivals minus selected packets.
///
/// Processing output is credited at the nominal rate `ξ` per input packet.
pub fn conservation_residuals(
    network: &Network,
    service: &Service,
    tally: &FlowTally,
    slots: u64,
) -> BTreeMap<Cell, f64> {
    let last = service.stages() - 1;
    let landing = |node: NodeId, stage: usize, s: DupStatus| match network.destination_index(node) {
        Some(k) if stage == last && s.contains(k) => s.without(DupStatus::single(k)),
        _ => s,
    };
    let mut selected: Vec<_> = tally.selected.iter().map(|(k, v)| (*k, *v)).collect();
    selected.sort_unstable();
    let mut arrivals: Vec<_> = tally.arrivals.iter().map(|(k, v)| (*k, *v)).collect();
    arrivals.sort_unstable();

    let mut net: BTreeMap<Cell, f64> = BTreeMap::new();
    let mut add = |cell: Cell, x: f64| {
        if !cell.2.is_zero() {
            *net.entry(cell).or_default() += x;
        }
    };
    for ((resource, c), count) in selected {
        let n = count as f64;
        let (tail, stage, head, head_stage, zeta) = match resource {
            Resource::Link { edge, stage } => {
                let e = network.edge(edge);
                (e.from, stage, e.to, stage, 1.0)
            }
            Resource::Processor { node, stage } => {
                (node, stage, node, stage + 1, to_f64(&service.functions[stage].scaling))
            }
        };
        add((tail, stage, c.q), -n);
        add((tail, stage, c.reload()), n);
        add((head, head_stage, landing(head, head_stage, c.s)), zeta * n);
    }
    for ((node, q), count) in arrivals {
        add((node, 0, q), count as f64);
    }
    let t = slots.max(1) as f64;
    net.values_mut().for_each(|v| *v /= t);
    net
}
