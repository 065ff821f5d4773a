//! Slot-by-slot control policies.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::commodity::{DistanceMetric, DupStatus};
use crate::error::{Error, Result};
use crate::graph::{Network, Service};
use crate::queue::{QueueState, SlotDecision};
use crate::wireless::RadioParams;

mod edspa;
mod maxweight;
mod randomized;

pub use edspa::{edspa_routes, Edspa, EdspaPlan};
pub use maxweight::{unicast_arrival_statuses, MaxWeight};
pub use randomized::RandomizedPolicy;

/// Read-only inputs shared by every policy in one slot.
#[derive(Clone, Copy)]
pub struct SlotContext<'a> {
    pub network: &'a Network,
    pub service: &'a Service,
    pub radio: Option<&'a RadioParams>,
    /// Channel gain per edge this slot; ignored for wired edges.
    pub gains: &'a [f64],
}

pub trait Policy: Send {
    fn decide(&mut self, state: &QueueState, ctx: &SlotContext, rng: &mut ChaCha8Rng) -> Result<SlotDecision>;

    /// Statuses created at the source for each exogenous packet.
    fn arrival_statuses(&self) -> Vec<DupStatus>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Gdcnc,
    GdcncR,
    Egdcnc,
    EgdcncR,
    Dcnc,
    Edspa,
    Randomized,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Gdcnc,
        PolicyKind::GdcncR,
        PolicyKind::Egdcnc,
        PolicyKind::EgdcncR,
        PolicyKind::Dcnc,
        PolicyKind::Edspa,
        PolicyKind::Randomized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Gdcnc => "gdcnc",
            PolicyKind::GdcncR => "gdcnc-r",
            PolicyKind::Egdcnc => "egdcnc",
            PolicyKind::EgdcncR => "egdcnc-r",
            PolicyKind::Dcnc => "dcnc",
            PolicyKind::Edspa => "edspa",
            PolicyKind::Randomized => "randomized",
        }
    }

    pub fn uses_trees(self) -> bool {
        matches!(self, PolicyKind::GdcncR | PolicyKind::EgdcncR)
    }

    pub fn uses_bias(self) -> bool {
        matches!(self, PolicyKind::Egdcnc | PolicyKind::EgdcncR)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Policy(format!("unknown policy {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Cost weight `V`.
    pub v: f64,
    /// Hop-bias weight `η`.
    pub eta: f64,
    /// Number of duplication trees for the restricted variants.
    pub trees: usize,
    pub metric: DistanceMetric,
    /// Divide stage-`m` backlogs by the cumulative scaling `Ξ^(m)`.
    pub normalize: bool,
    /// Extra load the randomized policy provisions for, as a fraction.
    pub headroom: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::Gdcnc,
            v: 0.0,
            eta: 0.0,
            trees: 1,
            metric: DistanceMetric::Geographic,
            normalize: false,
            headroom: 0.02,
        }
    }
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig { kind, ..Default::default() }
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v.is_finite() && self.v >= 0.0) || !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Policy("V and eta must be finite and non-negative".into()));
        }
        if self.kind.uses_trees() && self.trees == 0 {
            return Err(Error::Policy("restricted policies need at least one tree".into()));
        }
        if !(self.headroom.is_finite() && self.headroom >= 0.0) {
            return Err(Error::Policy("headroom must be non-negative".into()));
        }
        Ok(())
    }
}
