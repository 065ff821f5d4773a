use std::collections::{BTreeMap, BTreeSet};

use super::{subsets_of, DupChoice, DupStatus};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub status: DupStatus,
    /// Indices of the `(s, r)` children; `None` for leaves.
    pub children: Option<(usize, usize)>,
}

/// Binary tree of nested destination partitions, rooted at the all-ones
/// status with one leaf `b_k` per destination. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DupTree {
    destinations: usize,
    nodes: Vec<TreeNode>,
}

impl DupTree {
    /// Builds a tree by repeatedly asking `partition` how to split a status.
    pub fn from_partition(
        destinations: usize,
        mut partition: impl FnMut(DupStatus) -> Result<(DupStatus, DupStatus)>,
    ) -> Result<Self> {
        let mut tree = DupTree { destinations, nodes: Vec::with_capacity(2 * destinations) };
        tree.grow(DupStatus::all(destinations), &mut partition)?;
        tree.validate()?;
        Ok(tree)
    }

    fn grow(
        &mut self,
        q: DupStatus,
        partition: &mut impl FnMut(DupStatus) -> Result<(DupStatus, DupStatus)>,
    ) -> Result<usize> {
        let id = self.nodes.len();
        self.nodes.push(TreeNode { status: q, children: None });
        if q.weight() > 1 {
            let (s, r) = partition(q)?;
            if s.is_zero() || r.is_zero() || s.intersects(r) || s.union(r) != q {
                return Err(Error::Clustering(format!("{s:?} + {r:?} does not partition {q:?}")));
            }
            let left = self.grow(s, partition)?;
            let right = self.grow(r, partition)?;
            self.nodes[id].children = Some((left, right));
        }
        Ok(id)
    }

    /// Builds a tree from an explicit map `q -> (s, r)`.
    pub fn from_splits(
        destinations: usize,
        splits: &BTreeMap<DupStatus, (DupStatus, DupStatus)>,
    ) -> Result<Self> {
        DupTree::from_partition(destinations, |q| {
            splits
                .get(&q)
                .copied()
                .ok_or_else(|| Error::Clustering(format!("no split for {q:?}")))
        })
    }

    pub fn destination_count(&self) -> usize {
        self.destinations
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_some()).count()
    }

    /// `(q, s, r)` for each internal node, in preorder.
    pub fn splits(&self) -> Vec<(DupStatus, DupStatus, DupStatus)> {
        self.nodes
            .iter()
            .filter_map(|n| {
                n.children.map(|(a, b)| (n.status, self.nodes[a].status, self.nodes[b].status))
            })
            .collect()
    }

    /// Order-insensitive identity: two trees are the same if they split every
    /// status the same way.
    pub fn signature(&self) -> BTreeSet<(DupStatus, DupStatus)> {
        self.splits().into_iter().map(|(q, s, r)| (q, s.min(r))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.destinations;
        let fail = |msg: &str| Err(Error::Clustering(format!("invalid duplication tree: {msg}")));
        if self.nodes.is_empty() || self.root().status != DupStatus::all(d) {
            return fail("root must be the all-ones status");
        }
        if self.nodes.len() != 2 * d - 1 || self.internal_count() != d - 1 {
            return fail("wrong node count");
        }
        let mut leaves = BTreeSet::new();
        for node in &self.nodes {
            match node.children {
                Some((a, b)) => {
                    let (s, r) = (self.nodes[a].status, self.nodes[b].status);
                    if s.intersects(r) || s.union(r) != node.status {
                        return fail("children do not partition their parent");
                    }
                }
                None => {
                    if node.status.weight() != 1 {
                        return fail("leaf is not a singleton");
                    }
                    leaves.insert(node.status);
                }
            }
        }
        if leaves.len() != d {
            return fail("leaf set is not {b_1..b_D}");
        }
        Ok(())
    }
}

/// Duplication choices a tree admits: `(q,q)`, `(q,s)`, `(q,r)` per internal
/// node and `(b_k,b_k)` per leaf. `4D - 3` in total.
pub fn tree_choices(tree: &DupTree) -> BTreeSet<DupChoice> {
    let mut out = BTreeSet::new();
    for node in tree.nodes() {
        out.insert(DupChoice::forward(node.status));
        if let Some((a, b)) = node.children {
            out.insert(DupChoice { q: node.status, s: tree.nodes[a].status });
            out.insert(DupChoice { q: node.status, s: tree.nodes[b].status });
        }
    }
    out
}

/// Number of distinct duplication trees over `d` leaves: `(2d - 3)!!`.
pub fn tree_count(d: usize) -> u128 {
    (1..d).map(|i| (2 * i - 1) as u128).product::<u128>().max(1)
}

type SplitList = Vec<(DupStatus, (DupStatus, DupStatus))>;

fn enumerate_splits(q: DupStatus) -> Vec<SplitList> {
    if q.weight() <= 1 {
        return vec![Vec::new()];
    }
    let low = DupStatus::from_bits(q.bits() & q.bits().wrapping_neg());
    let mut out = Vec::new();
    for s in subsets_of(q) {
        if s == q || !s.intersects(low) {
            continue;
        }
        let r = q.without(s);
        let lefts = enumerate_splits(s);
        let rights = enumerate_splits(r);
        for left in &lefts {
            for right in &rights {
                let mut list = Vec::with_capacity(left.len() + right.len() + 1);
                list.push((q, (s, r)));
                list.extend_from_slice(left);
                list.extend_from_slice(right);
                out.push(list);
            }
        }
    }
    out
}

/// Every structurally distinct duplication tree over `d` leaves. Intended for
/// small `d` (the count grows as `(2d - 3)!!`).
pub fn all_duplication_trees(d: usize) -> Result<Vec<DupTree>> {
    if d == 0 || d > 8 {
        return Err(Error::Unsupported(format!("exhaustive tree enumeration needs 1 <= D <= 8, got {d}")));
    }
    enumerate_splits(DupStatus::all(d))
        .into_iter()
        .map(|list| DupTree::from_splits(d, &list.into_iter().collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commodity::enumerate_omega;

    fn balanced(d: usize) -> DupTree {
        DupTree::from_partition(d, |q| {
            let members: Vec<_> = q.destinations().collect();
            let half = members.len() / 2;
            let s = members[..half].iter().fold(DupStatus::ZERO, |a, &k| a.union(DupStatus::single(k)));
            Ok((s, q.without(s)))
        })
        .unwrap()
    }

    #[test]
    fn node_and_choice_counts() {
        for d in 2..=8 {
            let t = balanced(d);
            assert_eq!(t.nodes().len(), 2 * d - 1);
            assert_eq!(t.internal_count(), d - 1);
            assert_eq!(tree_choices(&t).len(), 4 * d - 3);
        }
    }

    #[test]
    fn unique_tree_for_two_destinations() {
        let trees = all_duplication_trees(2).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(tree_choices(&trees[0]).len(), 5);
        let omega: BTreeSet<_> = enumerate_omega(2).unwrap().into_iter().collect();
        assert_eq!(tree_choices(&trees[0]), omega);
    }

    #[test]
    fn tree_counts_match_double_factorial() {
        for d in 1..=6 {
            let trees = all_duplication_trees(d).unwrap();
            assert_eq!(trees.len() as u128, tree_count(d));
            let sigs: BTreeSet<_> = trees.iter().map(|t| t.signature()).collect();
            assert_eq!(sigs.len(), trees.len());
        }
    }

    #[test]
    fn union_of_all_trees_covers_omega() {
        for d in 2..=3 {
            let union: BTreeSet<_> =
                all_duplication_trees(d).unwrap().iter().flat_map(tree_choices).collect();
            // Every non-empty status is reachable from all-ones by nested
            // partitions, so the restricted set is all of Ω.
            let omega: BTreeSet<_> = enumerate_omega(d).unwrap().into_iter().collect();
            assert_eq!(union, omega);
        }
    }

    #[test]
    fn tree_choices_are_valid_choices() {
        for d in 1..=5 {
            let omega: BTreeSet<_> = enumerate_omega(d).unwrap().into_iter().collect();
            for t in all_duplication_trees(d).unwrap() {
                let c = tree_choices(&t);
                assert!(c.is_subset(&omega));
                assert_eq!(c.len(), 4 * d - 3);
            }
        }
    }

    #[test]
    fn rejects_bad_partition() {
        let err = DupTree::from_partition(3, |q| Ok((q, DupStatus::ZERO))).unwrap_err();
        assert!(err.to_string().contains("partition"));
    }
}
