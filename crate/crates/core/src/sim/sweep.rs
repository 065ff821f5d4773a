//! Parameter sweeps run concurrently, one simulation per worker.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{run, RunConfig, RunMetrics};
use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::scalar::rational_from_f64;
use crate::scenario::Instance;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "MCFLOW_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    V,
    Eta,
    /// Multiplier on the scenario arrival rates.
    Load,
    /// Number of destinations, taking a prefix of the destination list.
    D,
    /// Number of duplication trees.
    K,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "v" => Axis::V,
            "eta" => Axis::Eta,
            "load" | "lambda" => Axis::Load,
            "d" => Axis::D,
            "k" => Axis::K,
            _ => return Err(Error::Scenario(format!("unknown sweep axis {s:?}"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub reps: u64,
    pub policies: Vec<PolicyKind>,
    /// Template; the swept field and the seed are overwritten per run.
    pub base: RunConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    pub rep: u64,
    pub policy: String,
    pub seed: u64,
    pub avg_cost: f64,
    pub cost_stderr: f64,
    pub avg_backlog: f64,
    pub avg_delay_slots: f64,
    pub avg_delay_seconds: f64,
    pub delay_estimate_slots: f64,
    pub completion_delay_slots: Option<f64>,
    pub delivered: u64,
    pub admitted: u64,
    pub dummies: u64,
    pub verdict: &'static str,
}

/// Workers from the environment, else all cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0).unwrap_or_else(num_cpus)
}

fn num_cpus() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn seed_for(base: u64, value_index: usize, rep: u64) -> u64 {
    base.wrapping_add(((value_index as u64) << 32) | rep)
}

fn configure(inst: &Instance, spec: &SweepSpec, value: f64, kind: PolicyKind) -> Result<(Instance, RunConfig)> {
    let mut cfg = spec.base.clone();
    cfg.policy.kind = kind;
    let mut inst = inst.clone();
    let whole = |x: f64| -> Result<usize> {
        if x >= 1.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(Error::Scenario(format!("axis value {x} must be a positive integer")))
        }
    };
    match spec.axis {
        Axis::V => cfg.policy.v = value,
        Axis::Eta => cfg.policy.eta = value,
        Axis::K => cfg.policy.trees = whole(value)?,
        Axis::Load => {
            let factor =
                rational_from_f64(value).filter(|f| *f.numer() >= 0).ok_or_else(|| Error::Scenario(format!("load {value}")))?;
            inst = inst.scaled(&factor);
        }
        Axis::D => {
            let d = whole(value)?;
            let dests = inst.network.destinations();
            if d > dests.len() {
                return Err(Error::DestinationCount(d));
            }
            inst.network = inst.network.with_destinations(dests[..d].to_vec())?;
        }
    }
    cfg.policy.validate()?;
    Ok((inst, cfg))
}

fn row(axis: Axis, value: f64, rep: u64, m: &RunMetrics) -> SweepRow {
    SweepRow {
        axis,
        value,
        rep,
        policy: m.policy.to_string(),
        seed: m.seed,
        avg_cost: m.avg_cost,
        cost_stderr: m.cost_stderr,
        avg_backlog: m.avg_backlog,
        avg_delay_slots: m.avg_delay,
        avg_delay_seconds: m.avg_delay_seconds,
        delay_estimate_slots: m.delay_estimate,
        completion_delay_slots: m.completion_delay,
        delivered: m.delivered,
        admitted: m.admitted,
        dummies: m.dummies,
        verdict: m.verdict.name(),
    }
}

/// Runs every `(value, replication, policy)` combination. Replication `r`
/// of value `i` uses seed `base + (i << 32) + r` for every policy, so
/// policies see common random numbers. Rows come back in input order.
pub fn sweep(inst: &Instance, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mut jobs = Vec::new();
    for (i, &value) in spec.values.iter().enumerate() {
        for rep in 0..spec.reps {
            for &kind in &spec.policies {
                let (inst, mut cfg) = configure(inst, spec, value, kind)?;
                cfg.seed = seed_for(spec.base.seed, i, rep);
                jobs.push((value, rep, inst, cfg));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(value, rep, inst, cfg)| run(inst, cfg).map(|m| row(spec.axis, *value, *rep, &m)))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyConfig;
    use crate::scenario::Scenario;

    fn line() -> Instance {
        let text = r#"{
            "nodes": [{"name": "s"}, {"name": "a"}, {"name": "d1"}, {"name": "d2"}],
            "edges": [
                {"from": "s", "to": "a", "capacity": 2, "cost": "1/10"},
                {"from": "a", "to": "d1", "capacity": 2, "cost": "1/10"},
                {"from": "a", "to": "d2", "capacity": 2, "cost": "1/10"}
            ],
            "commodities": [{"sources": ["s"], "destinations": ["d1", "d2"]}],
            "arrivals": [{"node": "s", "rate": "1/2"}]
        }"#;
        Scenario::from_json(text).unwrap().instance(0).unwrap()
    }

    #[test]
    fn replications_get_distinct_seeds() {
        let spec = SweepSpec {
            axis: Axis::V,
            values: vec![1.0],
            reps: 3,
            policies: vec![PolicyKind::Gdcnc],
            base: RunConfig::new(PolicyConfig::default(), 1_000, 5),
        };
        let rows = sweep(&line(), &spec).unwrap();
        assert_eq!(rows.len(), 3);
        let seeds: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 3);
    }

    #[test]
    fn destination_axis_truncates_the_list() {
        let spec = SweepSpec {
            axis: Axis::D,
            values: vec![1.0, 2.0],
            reps: 1,
            policies: vec![PolicyKind::Gdcnc],
            base: RunConfig::new(PolicyConfig::default(), 1_000, 5),
        };
        let rows = sweep(&line(), &spec).unwrap();
        assert!(rows[0].delivered < rows[1].delivered);
        assert!(sweep(&line(), &SweepSpec { values: vec![3.0], ..spec }).is_err());
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("V".parse::<Axis>().unwrap(), Axis::V);
        assert_eq!("lambda".parse::<Axis>().unwrap(), Axis::Load);
        assert!("x".parse::<Axis>().is_err());
    }
}
