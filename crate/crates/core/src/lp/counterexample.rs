//! Node-level check that per-destination balance does not imply a realizable
//! duplication pattern.
//!
//! Given status-indexed incoming and outgoing rates at one node, the aggregate
//! test compares, for every destination `k`, the total rate of statuses that
//! still cover `k`. The per-status test asks whether some assignment of
//! duplication choices `(q, s)` turns the incoming statuses into exactly the
//! outgoing ones, with reloaded copies fed back into the node.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::simplex::{solve, LinearProgram, LpOutcome, Relation};
use crate::commodity::{enumerate_omega, DupStatus};
use crate::error::Result;
use crate::scalar::{BigRational, LpScalar, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BalanceVerdict {
    pub aggregate_holds: bool,
    pub per_status_feasible: bool,
}

pub type StatusRates = BTreeMap<DupStatus, Rational>;

/// Per-destination balance: `Σ_{q_k=1} in = Σ_{q_k=1} out` for every `k`.
pub fn aggregate_balance(d: usize, inflow: &StatusRates, outflow: &StatusRates) -> bool {
    (0..d).all(|k| {
        let sum = |m: &StatusRates| {
            m.iter().filter(|(q, _)| q.contains(k)).fold(Rational::zero(), |a, (_, r)| a + r)
        };
        sum(inflow) == sum(outflow)
    })
}

/// Whether nonnegative choice flows realize `inflow -> outflow` at one node.
pub fn per_status_feasible(d: usize, inflow: &StatusRates, outflow: &StatusRates) -> Result<bool> {
    let omega = enumerate_omega(d)?;
    let mut lp = LinearProgram::<BigRational>::new(omega.len());
    let rate = |m: &StatusRates, q| BigRational::from_rational(m.get(&q).unwrap_or(&Rational::zero()));
    for bits in 1..(1u32 << d) {
        let q = DupStatus::from_bits(bits);
        // Selected status-q packets = incoming status-q + reloaded status-q copies.
        let mut coeffs = Vec::new();
        for (v, c) in omega.iter().enumerate() {
            let mut a = 0i64;
            if c.q == q {
                a += 1;
            }
            if c.reload() == q {
                a -= 1;
            }
            if a != 0 {
                coeffs.push((v, BigRational::from_integer(a.into())));
            }
        }
        lp.add(coeffs, Relation::Eq, rate(inflow, q));
        // Transmitted status-q copies must match the outgoing rate.
        let coeffs = omega
            .iter()
            .enumerate()
            .filter(|(_, c)| c.s == q)
            .map(|(v, _)| (v, BigRational::from_integer(1.into())))
            .collect();
        lp.add(coeffs, Relation::Eq, rate(outflow, q));
    }
    Ok(!matches!(solve(&lp)?, LpOutcome::Infeasible(_)))
}

pub fn check_balance(d: usize, inflow: &StatusRates, outflow: &StatusRates) -> Result<BalanceVerdict> {
    Ok(BalanceVerdict {
        aggregate_holds: aggregate_balance(d, inflow, outflow),
        per_status_feasible: per_status_feasible(d, inflow, outflow)?,
    })
}

fn rates(entries: &[&str]) -> StatusRates {
    entries.iter().map(|v| (DupStatus::from_vector(v), Rational::from_integer(1))).collect()
}

/// Three destinations; statuses 111 and 100 enter at unit rate, 110 and 101
/// leave at unit rate. Balanced per destination, yet no duplication pattern
/// produces it: the two incoming packets would have to be merged.
pub fn counterexample_check() -> Result<BalanceVerdict> {
    check_balance(3, &rates(&["111", "100"]), &rates(&["110", "101"]))
}

/// Same outgoing flow fed by matching statuses, which is realizable.
pub fn repaired_instance_check() -> Result<BalanceVerdict> {
    check_balance(3, &rates(&["110", "101"]), &rates(&["110", "101"]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_is_balanced_but_unrealizable() {
        let v = counterexample_check().unwrap();
        assert!(v.aggregate_holds);
        assert!(!v.per_status_feasible);
    }

    #[test]
    fn repaired_instance_is_realizable() {
        let v = repaired_instance_check().unwrap();
        assert!(v.aggregate_holds && v.per_status_feasible);
    }

    #[test]
    fn zero_flow_holds_both_ways() {
        let v = check_balance(3, &StatusRates::new(), &StatusRates::new()).unwrap();
        assert!(v.aggregate_holds && v.per_status_feasible);
    }

    #[test]
    fn duplication_at_node_is_realizable() {
        // 111 in, split into 100 and 011 out.
        let v = check_balance(3, &rates(&["111"]), &rates(&["100", "011"])).unwrap();
        assert!(v.aggregate_holds && v.per_status_feasible);
    }
}
