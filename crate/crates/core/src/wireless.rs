//! Radio model for edge-computing scenarios: log-normal shadowed path loss,
//! Shannon-rate capacities, water-filling power allocation and link
//! activation.

use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::graph::NodeKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub slot_seconds: f64,
    pub packet_bits: f64,
    pub carrier_ghz: f64,
    #[serde(default = "default_shadow")]
    pub shadow_sigma_db: f64,
    #[serde(default = "default_range")]
    pub range_m: f64,
    #[serde(default = "default_noise")]
    pub noise_dbm_per_hz: f64,
    /// Per-slot standard deviation of the UE random walk, meters.
    #[serde(default)]
    pub mobility_sigma_m: f64,
    /// Square area `[-half, half]²` that confines mobile nodes.
    #[serde(default = "default_area")]
    pub area_half_m: f64,
}

fn default_shadow() -> f64 {
    8.2
}

fn default_range() -> f64 {
    150.0
}

fn default_noise() -> f64 {
    -174.0
}

fn default_area() -> f64 {
    150.0
}

impl RadioParams {
    /// `σ² = N₀ B₀` in watts.
    pub fn noise_watts(&self) -> f64 {
        10f64.powf((self.noise_dbm_per_hz - 30.0) / 10.0) * self.bandwidth_hz
    }

    /// Bandwidth expressed in packets per second per bit/s/Hz.
    pub fn packet_bandwidth(&self) -> f64 {
        self.bandwidth_hz / self.packet_bits
    }
}

/// Path loss in dB for a carrier in GHz and a distance in meters.
pub fn path_loss_db(carrier_ghz: f64, distance_m: f64) -> f64 {
    32.4 + 20.0 * carrier_ghz.log10() + 31.9 * distance_m.log10()
}

/// Linear channel gain with one shadow-fading draw; zero beyond range.
pub fn channel_gain(params: &RadioParams, distance_m: f64, rng: &mut impl Rng) -> f64 {
    if distance_m > params.range_m {
        return 0.0;
    }
    let shadow = if params.shadow_sigma_db > 0.0 {
        Normal::new(0.0, params.shadow_sigma_db).expect("finite sigma").sample(rng)
    } else {
        0.0
    };
    gain_from_db(path_loss_db(params.carrier_ghz, distance_m.max(1.0)) + shadow)
}

pub fn gain_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Mean of `10^(-(L + X)/10)` with `X ~ N(0, σ²)`.
pub fn mean_gain(loss_db: f64, sigma_db: f64) -> f64 {
    let s = sigma_db * std::f64::consts::LN_10 / 10.0;
    gain_from_db(loss_db) * (0.5 * s * s).exp()
}

/// Water-level power `max[B w / ((price + ν) ln 2) - σ²/g, 0]`.
///
/// `price` is `ẽ V`. Infinite when the denominator vanishes with `w > 0`.
pub fn water_level_power(bandwidth: f64, weight: f64, price: f64, nu: f64, noise_over_gain: f64) -> f64 {
    if weight <= 0.0 || !noise_over_gain.is_finite() {
        return 0.0;
    }
    let denom = (price + nu) * LN_2;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (bandwidth * weight / denom - noise_over_gain).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadioLink {
    /// Best duplication weight `w*` on the link.
    pub weight: f64,
    /// `σ² / g`; infinite when the link is out of range.
    pub noise_over_gain: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    /// Budget multiplier `ν*`.
    pub nu: f64,
}

pub const BISECTION_ITERATIONS: usize = 200;

/// Power per outgoing link of one node.
///
/// Single-association nodes take `min[p(0), P]` per link independently; nodes
/// with `joint_budget` share `P` across links through the water level `ν*`.
pub fn power_allocation(
    links: &[RadioLink],
    bandwidth: f64,
    price: f64,
    budget: f64,
    joint_budget: bool,
) -> PowerSolution {
    let p = |l: &RadioLink, nu: f64| water_level_power(bandwidth, l.weight, price, nu, l.noise_over_gain);
    let eligible = |l: &RadioLink| l.weight > 0.0 && l.noise_over_gain.is_finite();
    if !joint_budget {
        let powers = links.iter().map(|l| if eligible(l) { p(l, 0.0).min(budget) } else { 0.0 }).collect();
        return PowerSolution { powers, nu: 0.0 };
    }
    if price <= 0.0 {
        // Unpriced energy: the water level sits at the cap; split by B w.
        let total: f64 = links.iter().filter(|l| eligible(l)).map(|l| bandwidth * l.weight).sum();
        let powers = links
            .iter()
            .map(|l| if eligible(l) && total > 0.0 { budget * bandwidth * l.weight / total } else { 0.0 })
            .collect();
        return PowerSolution { powers, nu: 0.0 };
    }
    let total = |nu: f64| links.iter().map(|l| p(l, nu)).sum::<f64>();
    if total(0.0) <= budget {
        return PowerSolution { powers: links.iter().map(|l| p(l, 0.0)).collect(), nu: 0.0 };
    }
    let max_w = links.iter().map(|l| l.weight).fold(0.0, f64::max);
    let mut hi = bandwidth * max_w / LN_2;
    while total(hi) > budget {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let tol = 1e-9 * budget;
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let t = total(mid);
        if t > budget {
            lo = mid;
        } else {
            hi = mid;
            if budget - t <= tol {
                break;
            }
        }
    }
    PowerSolution { powers: links.iter().map(|l| p(l, hi)).collect(), nu: hi }
}

/// Activation per link given `Ψ*`: single-association nodes pick the single
/// best positive link, edge servers keep every link eligible.
pub fn link_activation(psi: &[f64], kind: NodeKind) -> Vec<bool> {
    match kind {
        NodeKind::Es => vec![true; psi.len()],
        _ => {
            let best = psi
                .iter()
                .enumerate()
                .fold(None, |acc: Option<(usize, f64)>, (j, &v)| match acc {
                    Some((_, b)) if b >= v => acc,
                    _ => Some((j, v)),
                });
            let mut out = vec![false; psi.len()];
            if let Some((j, v)) = best {
                if v > 0.0 {
                    out[j] = true;
                }
            }
            out
        }
    }
}

/// Shannon rate in bit/s.
pub fn shannon_rate(bandwidth_hz: f64, power: f64, gain: f64, noise: f64) -> f64 {
    if power <= 0.0 || gain <= 0.0 {
        return 0.0;
    }
    bandwidth_hz * (1.0 + gain * power / noise).log2()
}

/// Whole packets transmittable in one slot.
pub fn capacity_packets(params: &RadioParams, power: f64, gain: f64) -> u64 {
    let bits = params.slot_seconds * shannon_rate(params.bandwidth_hz, power, gain, params.noise_watts());
    // Guard exact integers against round-off just below them.
    (bits / params.packet_bits + 1e-9).floor().max(0.0) as u64
}

/// `Ψ = w* τR/L - V ẽ τ p` in packet units.
pub fn activation_utility(params: &RadioParams, weight: f64, power: f64, gain: f64, v: f64, energy_cost: f64) -> f64 {
    let rate = shannon_rate(params.bandwidth_hz, power, gain, params.noise_watts());
    weight * params.slot_seconds * rate / params.packet_bits - v * energy_cost * params.slot_seconds * power
}

/// One Gaussian random-walk step, reflected into the square area.
pub fn mobility_step(pos: (f64, f64), sigma: f64, half: f64, rng: &mut impl Rng) -> (f64, f64) {
    if sigma <= 0.0 {
        return pos;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let reflect = |x: f64| {
        let period = 4.0 * half;
        let y = (x + half).rem_euclid(period);
        if y <= 2.0 * half {
            y - half
        } else {
            3.0 * half - y
        }
    };
    (reflect(pos.0 + normal.sample(rng)), reflect(pos.1 + normal.sample(rng)))
}
