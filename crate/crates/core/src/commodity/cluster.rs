//! Destination clustering for the reduced-complexity policy.
//!
//! Each internal tree node is split into two clusters of destinations.
//! Geographic distance uses seeded 2-means; graph metrics have no vector
//! space, so they use a 2-medoid bisection (exhaustive up to eight members).

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{all_duplication_trees, tree_count};
use super::{subsets_of, DupStatus, DupTree};
use crate::error::{Error, Result};
use crate::graph::{euclidean, Network};
use crate::scalar::to_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    Geographic,
    HopDistance,
    ReciprocalCapacity,
    UnitCost,
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geographic" => Ok(DistanceMetric::Geographic),
            "hop-distance" | "hop" => Ok(DistanceMetric::HopDistance),
            "reciprocal-capacity" => Ok(DistanceMetric::ReciprocalCapacity),
            "unit-cost" => Ok(DistanceMetric::UnitCost),
            other => Err(Error::Clustering(format!("unknown distance metric {other:?}"))),
        }
    }
}

const EXHAUSTIVE_LIMIT: u32 = 8;
const DISCONNECTED: f64 = 1e12;

enum Space {
    Points(Vec<(f64, f64)>),
    Matrix(Vec<Vec<f64>>),
}

impl Space {
    fn build(network: &Network, metric: DistanceMetric) -> Result<Space> {
        let dests = network.destinations();
        if metric == DistanceMetric::Geographic {
            let points = dests
                .iter()
                .map(|&d| {
                    network.node(d).position.ok_or_else(|| {
                        Error::Clustering(format!(
                            "geographic clustering needs coordinates for {}",
                            network.node(d).name
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(Space::Points(points));
        }
        let sp = network.shortest_paths(|e| match metric {
            DistanceMetric::HopDistance => Some(1.0),
            DistanceMetric::ReciprocalCapacity => (e.capacity > 0).then(|| 1.0 / e.capacity as f64),
            DistanceMetric::UnitCost => Some(to_f64(&e.cost)),
            DistanceMetric::Geographic => unreachable!(),
        });
        let finite = |x: f64| if x.is_finite() { x } else { DISCONNECTED };
        let matrix = dests
            .iter()
            .map(|&a| dests.iter().map(|&b| 0.5 * (finite(sp[a][b]) + finite(sp[b][a]))).collect())
            .collect();
        Ok(Space::Matrix(matrix))
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        match self {
            Space::Points(p) => euclidean(p[a], p[b]),
            Space::Matrix(m) => m[a][b],
        }
    }

    /// Within-cluster cost: squared error to the centroid for points,
    /// distance sum to the best medoid for graph metrics.
    fn cluster_cost(&self, members: DupStatus) -> f64 {
        let idx: Vec<usize> = members.destinations().collect();
        match self {
            Space::Points(p) => {
                let n = idx.len() as f64;
                let cx = idx.iter().map(|&i| p[i].0).sum::<f64>() / n;
                let cy = idx.iter().map(|&i| p[i].1).sum::<f64>() / n;
                idx.iter().map(|&i| (p[i].0 - cx).powi(2) + (p[i].1 - cy).powi(2)).sum()
            }
            Space::Matrix(_) => idx
                .iter()
                .map(|&m| idx.iter().map(|&x| self.dist(x, m)).sum::<f64>())
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn partition_cost(&self, s: DupStatus, r: DupStatus) -> f64 {
        self.cluster_cost(s) + self.cluster_cost(r)
    }
}

/// Orders a partition so the part holding the smallest destination index comes first.
fn ordered(q: DupStatus, part: DupStatus) -> (DupStatus, DupStatus) {
    let other = q.without(part);
    if part.bits().trailing_zeros() < other.bits().trailing_zeros() {
        (part, other)
    } else {
        (other, part)
    }
}

/// Every bipartition of `q`, cheapest first (ties by mask).
fn ranked_partitions(space: &Space, q: DupStatus) -> Vec<(DupStatus, DupStatus)> {
    let low = DupStatus::from_bits(q.bits() & q.bits().wrapping_neg());
    let mut parts: Vec<(f64, DupStatus, DupStatus)> = subsets_of(q)
        .filter(|&s| s != q && s.intersects(low))
        .map(|s| {
            let r = q.without(s);
            (space.partition_cost(s, r), s, r)
        })
        .collect();
    parts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    parts.into_iter().map(|(_, s, r)| (s, r)).collect()
}

fn two_means(points: &[(f64, f64)], q: DupStatus, rng: &mut ChaCha8Rng) -> (DupStatus, DupStatus) {
    let members: Vec<usize> = q.destinations().collect();
    let first = members[rng.random_range(0..members.len())];
    let second = members
        .iter()
        .copied()
        .filter(|&m| m != first)
        .fold((first, -1.0), |best, m| {
            let d = euclidean(points[m], points[first]);
            if d > best.1 {
                (m, d)
            } else {
                best
            }
        })
        .0;
    let mut centers = [points[first], points[second]];
    let mut assign = DupStatus::ZERO;
    for _ in 0..100 {
        let mut next = DupStatus::ZERO;
        for &m in &members {
            if euclidean(points[m], centers[0]) <= euclidean(points[m], centers[1]) {
                next = next.union(DupStatus::single(m));
            }
        }
        if next.is_zero() || next == q {
            break;
        }
        let stable = next == assign;
        assign = next;
        if stable {
            break;
        }
        for (c, part) in centers.iter_mut().zip([assign, q.without(assign)]) {
            let idx: Vec<usize> = part.destinations().collect();
            let n = idx.len() as f64;
            *c = (
                idx.iter().map(|&i| points[i].0).sum::<f64>() / n,
                idx.iter().map(|&i| points[i].1).sum::<f64>() / n,
            );
        }
    }
    if assign.is_zero() || assign == q {
        // Coincident points: peel off the highest index.
        let last = DupStatus::single(members[members.len() - 1]);
        assign = q.without(last);
    }
    ordered(q, assign)
}

fn farthest_pair_split(space: &Space, q: DupStatus) -> (DupStatus, DupStatus) {
    let members: Vec<usize> = q.destinations().collect();
    let mut best = (members[0], members[1], -1.0);
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            let d = space.dist(a, b);
            if d > best.2 {
                best = (a, b, d);
            }
        }
    }
    let mut part = DupStatus::ZERO;
    for &m in &members {
        if space.dist(m, best.0) <= space.dist(m, best.1) {
            part = part.union(DupStatus::single(m));
        }
    }
    ordered(q, part)
}

fn bisect(space: &Space, q: DupStatus, rng: &mut ChaCha8Rng) -> (DupStatus, DupStatus) {
    match space {
        Space::Points(p) => two_means(p, q, rng),
        Space::Matrix(_) if q.weight() <= EXHAUSTIVE_LIMIT => ranked_partitions(space, q)[0],
        Space::Matrix(_) => farthest_pair_split(space, q),
    }
}

fn tree_cost(space: &Space, tree: &DupTree) -> f64 {
    tree.splits().iter().map(|&(_, s, r)| space.partition_cost(s, r)).sum()
}

/// Builds `k` distinct duplication trees over the network's destinations.
///
/// The first tree comes from recursive bisection under `metric`. Further trees
/// replace the top-level split with the next-cheapest distinct partitions;
/// when those run out (small `D`), the remaining trees are the cheapest of an
/// exhaustive enumeration.
pub fn build_duplication_trees(
    network: &Network,
    k: usize,
    metric: DistanceMetric,
    seed: u64,
) -> Result<Vec<DupTree>> {
    let d = network.destination_count();
    if k == 0 {
        return Err(Error::Clustering("at least one duplication tree is required".into()));
    }
    if (k as u128) > tree_count(d) {
        return Err(Error::Clustering(format!(
            "requested {k} trees but only {} distinct trees exist over {d} destinations",
            tree_count(d)
        )));
    }
    let space = Space::build(network, metric)?;
    let root = DupStatus::all(d);
    let grow = |top: Option<(DupStatus, DupStatus)>| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DupTree::from_partition(d, |q| match top {
            Some(split) if q == root => Ok(split),
            _ => Ok(bisect(&space, q, &mut rng)),
        })
    };

    let mut trees = vec![grow(None)?];
    if d == 1 {
        return Ok(trees);
    }
    let mut seen: BTreeSet<_> = trees.iter().map(|t| t.signature()).collect();
    for split in ranked_partitions(&space, root) {
        if trees.len() >= k {
            break;
        }
        let tree = grow(Some(split))?;
        if seen.insert(tree.signature()) {
            trees.push(tree);
        }
    }
    if trees.len() < k {
        let mut rest: Vec<(f64, DupTree)> = all_duplication_trees(d)
            .map_err(|_| {
                Error::Clustering(format!("cannot build {k} distinct trees for D = {d}"))
            })?
            .into_iter()
            .filter(|t| !seen.contains(&t.signature()))
            .map(|t| (tree_cost(&space, &t), t))
            .collect();
        rest.sort_by(|a, b| a.0.total_cmp(&b.0));
        trees.extend(rest.into_iter().take(k - trees.len()).map(|(_, t)| t));
    }
    Ok(trees)
}
