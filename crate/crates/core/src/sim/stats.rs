//! Backlog trend test and small estimators.

use serde::Serialize;

/// Shortest series the trend test will judge.
pub const MIN_VERDICT_LEN: usize = 10_000;
/// Accumulating fraction of the arrival rate at or below which a run is
/// stable; ten times this marks it unstable.
pub const EPSILON_S: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Least-squares slope of `y` against its index.
pub fn slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Backlog slope over the second half of the series per unit of arrival
/// rate: the fraction of arriving packets that piles up.
pub fn growth_rate(series: &[f64], arrival_rate: f64) -> f64 {
    let half = &series[series.len() / 2..];
    let rate = if arrival_rate > 0.0 { arrival_rate } else { 1.0 };
    slope(half) / rate
}

/// Classifies a per-slot backlog series by its trend over the second half.
pub fn stability_verdict(series: &[f64], arrival_rate: f64) -> Verdict {
    if series.len() < MIN_VERDICT_LEN {
        return Verdict::Inconclusive;
    }
    let g = growth_rate(series, arrival_rate);
    if g <= EPSILON_S {
        Verdict::Stable
    } else if g >= 10.0 * EPSILON_S {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    }
}

/// Mean and standard error from non-overlapping batch means.
pub fn batch_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
