//! Duplication-status algebra.
//!
//! A packet's status is a bit mask over the ordered destination list: bit `k`
//! is set while destination `d_{k+1}` still needs a copy. A duplication choice
//! `(q, s)` takes a status-`q` packet, transmits a status-`s` copy and reloads
//! a status-`q - s` copy at the current node.

use std::fmt;

use crate::error::{Error, Result};

mod cluster;
mod tree;

pub use cluster::{build_duplication_trees, DistanceMetric};
pub use tree::{all_duplication_trees, tree_choices, DupTree, TreeNode};

/// Largest supported destination set. Statuses fit in a machine word and
/// `|Ω| = 3^16 - 2^16` is the enumeration ceiling.
pub const MAX_DESTINATIONS: usize = 16;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DupStatus(u32);

impl DupStatus {
    pub const ZERO: DupStatus = DupStatus(0);

    pub const fn from_bits(bits: u32) -> Self {
        DupStatus(bits)
    }

    /// Status with every one of `d` destinations pending.
    pub fn all(d: usize) -> Self {
        debug_assert!(d <= MAX_DESTINATIONS);
        DupStatus(((1u64 << d) - 1) as u32)
    }

    /// `b_k` for a zero-based destination index.
    pub fn single(k: usize) -> Self {
        DupStatus(1 << k)
    }

    /// Parses vector notation `q_1 q_2 ... q_D`, e.g. `"110"` is `{d_1, d_2}`.
    pub fn from_vector(text: &str) -> Self {
        let bits = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .enumerate()
            .fold(0u32, |acc, (k, c)| if c == '1' { acc | (1 << k) } else { acc });
        DupStatus(bits)
    }

    pub fn to_vector(self, d: usize) -> String {
        (0..d).map(|k| if self.contains(k) { '1' } else { '0' }).collect()
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// `‖q‖₁`, the number of pending destinations.
    pub const fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub const fn contains(self, k: usize) -> bool {
        self.0 & (1 << k) != 0
    }

    pub const fn is_subset_of(self, other: DupStatus) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn without(self, other: DupStatus) -> DupStatus {
        DupStatus(self.0 & !other.0)
    }

    pub const fn union(self, other: DupStatus) -> DupStatus {
        DupStatus(self.0 | other.0)
    }

    pub const fn intersects(self, other: DupStatus) -> bool {
        self.0 & other.0 != 0
    }

    /// Zero-based indices of pending destinations, ascending.
    pub fn destinations(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |k| bits & (1 << k) != 0)
    }
}

impl fmt::Debug for DupStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{:#b}", self.0)
    }
}

/// Iterator over the non-empty submasks of a status, largest first.
#[derive(Clone, Debug)]
pub struct Submasks {
    of: u32,
    next: Option<u32>,
}

impl Iterator for Submasks {
    type Item = DupStatus;

    fn next(&mut self) -> Option<DupStatus> {
        let cur = self.next?;
        self.next = match cur.wrapping_sub(1) & self.of {
            0 => None,
            s => Some(s),
        };
        Some(DupStatus(cur))
    }
}

/// Every `s ∈ 2^q \ {0}`. Empty for `q = 0`.
pub fn subsets_of(q: DupStatus) -> Submasks {
    Submasks { of: q.0, next: (q.0 != 0).then_some(q.0) }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DupChoice {
    pub q: DupStatus,
    pub s: DupStatus,
}

impl DupChoice {
    pub fn new(q: DupStatus, s: DupStatus) -> Result<Self> {
        if s.is_zero() || !s.is_subset_of(q) {
            return Err(Error::InvalidChoice(format!("{s:?} is not a non-empty subset of {q:?}")));
        }
        Ok(DupChoice { q, s })
    }

    /// Forwarding without duplication.
    pub fn forward(q: DupStatus) -> Self {
        DupChoice { q, s: q }
    }

    /// Status of the copy that stays behind.
    pub fn reload(self) -> DupStatus {
        self.q.without(self.s)
    }
}

impl fmt::Debug for DupChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:#b},{:#b})", self.q.0, self.s.0)
    }
}

fn check_count(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DESTINATIONS {
        return Err(Error::DestinationCount(d));
    }
    Ok(())
}

/// The full choice set `Ω`, ordered lexicographically by `(q, s)`.
pub fn enumerate_omega(d: usize) -> Result<Vec<DupChoice>> {
    check_count(d)?;
    let mut out = Vec::with_capacity(omega_size(d) as usize);
    for q in 1..(1u32 << d) {
        let q = DupStatus(q);
        let mut subs: Vec<_> = subsets_of(q).collect();
        subs.reverse();
        out.extend(subs.into_iter().map(|s| DupChoice { q, s }));
    }
    Ok(out)
}

/// `3^D - 2^D`.
pub fn omega_size(d: usize) -> u64 {
    3u64.pow(d as u32) - 2u64.pow(d as u32)
}

/// Choices of the unicast approach: `(b_k, b_k)` only.
pub fn unicast_choices(d: usize) -> Vec<DupChoice> {
    (0..d).map(|k| DupChoice::forward(DupStatus::single(k))).collect()
}

/// Splits a selected status-`q` packet into `(transmitted, reloaded)`.
pub fn split(q: DupStatus, s: DupStatus) -> Result<(DupStatus, DupStatus)> {
    let choice = DupChoice::new(q, s)?;
    Ok((choice.s, choice.reload()))
}

/// Automatic duplication on reaching destination `k`: returns the departing
/// `b_k` copy and the remainder, or `None` when bit `k` is not pending.
pub fn destination_arrival_split(q: DupStatus, k: usize) -> Option<(DupStatus, DupStatus)> {
    if !q.contains(k) {
        return None;
    }
    let bk = DupStatus::single(k);
    Some((bk, q.without(bk)))
}
