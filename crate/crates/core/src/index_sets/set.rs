//! Finite multi-index sets with cached structural flags.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::index_sets::MultiIndex;

/// Default cap on the number of members a constructed set may hold.
pub const DEFAULT_MEMBER_CAP: u64 = 10_000_000;

/// A finite set of multi-indices in canonical (lexicographic) member order.
///
/// Immutable after construction; the downward-closed and anchored flags are
/// computed lazily and cached (idempotent one-time initialization, safe to
/// race).
#[derive(Clone)]
pub struct IndexSet {
    members: Vec<MultiIndex>,
    /// Ambient dimension: at least the largest support coordinate; used by
    /// dense serialization and the bitstream encoding.
    dim_hint: usize,
    downward_closed: OnceLock<bool>,
    anchored: OnceLock<bool>,
}

impl IndexSet {
    /// Build from arbitrary members: sorts canonically and removes duplicates.
    /// `dim_hint` is raised to the support maximum if too small.
    pub fn new(mut members: Vec<MultiIndex>, dim_hint: usize) -> Self {
        members.sort();
        members.dedup();
        let support_max = members.iter().map(|v| v.max_coordinate()).max().unwrap_or(0);
        IndexSet {
            members,
            dim_hint: dim_hint.max(support_max).max(1),
            downward_closed: OnceLock::new(),
            anchored: OnceLock::new(),
        }
    }

    /// The singleton {0}.
    pub fn null_set(dim_hint: usize) -> Self {
        IndexSet::new(vec![MultiIndex::zero()], dim_hint)
    }

    /// Build from dense exponent rows.
    pub fn from_dense_rows(rows: &[Vec<u32>], dim_hint: usize) -> Self {
        let members = rows.iter().map(|r| MultiIndex::from_dense(r)).collect();
        IndexSet::new(members, dim_hint)
    }

    /// Members in canonical lexicographic order.
    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim_hint(&self) -> usize {
        self.dim_hint
    }

    /// Largest support coordinate over all members.
    pub fn support_max(&self) -> usize {
        self.members.iter().map(|v| v.max_coordinate()).max().unwrap_or(0)
    }

    pub fn contains(&self, v: &MultiIndex) -> bool {
        self.members.binary_search(v).is_ok()
    }

    /// Position of `v` in canonical member order.
    pub fn position(&self, v: &MultiIndex) -> Option<usize> {
        self.members.binary_search(v).ok()
    }

    /// True iff for every ν in the set and every j in supp(ν), ν − e_j is
    /// also in the set. Checking one-step predecessors suffices for the
    /// component-wise definition.
    pub fn is_downward_closed(&self) -> bool {
        *self.downward_closed.get_or_init(|| {
            self.members.iter().all(|v| {
                v.support()
                    .all(|(j, _)| self.contains(&v.minus_unit(j).expect("support coordinate")))
            })
        })
    }

    /// True iff the set is downward closed and its active coordinates form a
    /// contiguous block {1, ..., k}.
    pub fn is_anchored(&self) -> bool {
        *self.anchored.get_or_init(|| {
            if !self.is_downward_closed() {
                return false;
            }
            // For a downward closed set, j is active iff e_j is a member.
            let k = self.support_max();
            (1..=k).all(|j| self.contains(&MultiIndex::unit(j)))
        })
    }

    /// Union as plain member merge. The ambient dimension is the max of both.
    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut members = self.members.clone();
        members.extend(other.members.iter().cloned());
        IndexSet::new(members, self.dim_hint.max(other.dim_hint))
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.members.iter().all(|v| other.contains(v))
    }

    /// Dense exponent rows (length `dim_hint`) in canonical order; the
    /// JSON wire format for index sets.
    pub fn to_dense_rows(&self) -> Vec<Vec<u32>> {
        self.members.iter().map(|v| v.to_dense(self.dim_hint)).collect()
    }
}

impl PartialEq for IndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

impl Eq for IndexSet {}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members.iter()).finish()
    }
}

/// The rectangle {μ : μ ≤ ν}; downward closed with ∏(ν_j + 1) members.
pub fn rectangle(v: &MultiIndex) -> IndexSet {
    let coords: Vec<(usize, u32)> = v.support().collect();
    let mut members = Vec::with_capacity(v.rectangle_cardinality() as usize);
    let mut current = MultiIndex::zero();
    fill_rectangle(&coords, 0, &mut current, &mut members);
    IndexSet::new(members, v.max_coordinate().max(1))
}

fn fill_rectangle(
    coords: &[(usize, u32)],
    depth: usize,
    current: &mut MultiIndex,
    out: &mut Vec<MultiIndex>,
) {
    if depth == coords.len() {
        out.push(current.clone());
        return;
    }
    let (j, cap) = coords[depth];
    let base = current.clone();
    for e in 0..=cap {
        let mut next = base.clone();
        for _ in 0..e {
            next = next.plus_unit(j);
        }
        *current = next;
        fill_rectangle(coords, depth + 1, current, out);
    }
    *current = base;
}

/// The hyperbolic cross H_n^d = {μ : ∏ (μ_j + 1) ≤ n} with the default
/// member cap.
pub fn hyperbolic_cross(n: u64, d: usize) -> Result<IndexSet> {
    hyperbolic_cross_with_cap(n, d, DEFAULT_MEMBER_CAP)
}

/// Hyperbolic cross with an explicit member cap.
pub fn hyperbolic_cross_with_cap(n: u64, d: usize, cap: u64) -> Result<IndexSet> {
    if n < 1 || d < 1 {
        return Err(Error::Domain(format!("hyperbolic cross needs n ≥ 1, d ≥ 1, got n={n}, d={d}")));
    }
    let mut members = Vec::new();
    let mut current = MultiIndex::zero();
    fill_cross(n, d, 1, &mut current, cap, &mut members)?;
    Ok(IndexSet::new(members, d))
}

fn fill_cross(
    budget: u64,
    d: usize,
    coord: usize,
    current: &mut MultiIndex,
    cap: u64,
    out: &mut Vec<MultiIndex>,
) -> Result<()> {
    if coord > d {
        if out.len() as u64 >= cap {
            return Err(Error::Budget {
                what: "hyperbolic cross members".into(),
                limit: cap,
                reached: out.len() as u64 + 1,
            });
        }
        out.push(current.clone());
        return Ok(());
    }
    // Exponent e at this coordinate consumes a factor e + 1 of the budget.
    let mut e = 0u64;
    while e + 1 <= budget {
        let base = current.clone();
        let mut next = base.clone();
        for _ in 0..e {
            next = next.plus_unit(coord);
        }
        *current = next;
        fill_cross(budget / (e + 1), d, coord + 1, current, cap, out)?;
        *current = base;
        e += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[u32]]) -> IndexSet {
        IndexSet::from_dense_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 0)
    }

    #[test]
    fn downward_closed_examples() {
        assert!(set(&[&[0, 0]]).is_downward_closed());
        // (0,1) missing.
        assert!(!set(&[&[0, 0], &[1, 0], &[1, 1]]).is_downward_closed());
        assert!(hyperbolic_cross(4, 2).unwrap().is_downward_closed());
    }

    #[test]
    fn anchored_examples() {
        // e_2 present, e_1 absent.
        assert!(!set(&[&[0, 0], &[0, 1]]).is_anchored());
        assert!(set(&[&[0, 0], &[1, 0], &[0, 1]]).is_anchored());
        // Univariate downward closed sets are anchored.
        assert!(set(&[&[0], &[1], &[2]]).is_anchored());
        // Downward closed but support skips coordinate 1.
        let s = IndexSet::new(vec![MultiIndex::zero(), MultiIndex::unit(2)], 2);
        assert!(s.is_downward_closed());
        assert!(!s.is_anchored());
    }

    #[test]
    fn rectangle_examples() {
        assert_eq!(rectangle(&MultiIndex::zero()).len(), 1);
        let r = rectangle(&MultiIndex::from_dense(&[1, 1]));
        assert_eq!(r.len(), 4);
        assert!(r.is_downward_closed());
        assert_eq!(rectangle(&MultiIndex::from_dense(&[2, 1, 1])).len(), 12);
    }

    #[test]
    fn hyperbolic_cross_examples() {
        for d in 1..=4 {
            let h = hyperbolic_cross(1, d).unwrap();
            assert_eq!(h.len(), 1);
            assert!(h.members()[0].is_zero());
        }
        let h22 = hyperbolic_cross(2, 2).unwrap();
        assert_eq!(h22.len(), 3);
        let h42 = hyperbolic_cross(4, 2).unwrap();
        assert_eq!(h42.len(), 8);
        let expected = set(&[
            &[0, 0],
            &[1, 0],
            &[2, 0],
            &[3, 0],
            &[0, 1],
            &[0, 2],
            &[0, 3],
            &[1, 1],
        ]);
        assert_eq!(h42, expected);
    }

    #[test]
    fn hyperbolic_cross_cap() {
        let err = hyperbolic_cross_with_cap(50, 3, 10).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn rectangle_inside_cross_when_budget_allows() {
        // ∏(ν_j+1) ≤ n implies R_ν ⊆ H_n^d.
        let v = MultiIndex::from_dense(&[1, 2]);
        assert_eq!(v.rectangle_cardinality(), 6);
        let h = hyperbolic_cross(6, 2).unwrap();
        assert!(rectangle(&v).is_subset_of(&h));
    }

    #[test]
    fn canonical_member_order_and_dedup() {
        let s = set(&[&[1, 0], &[0, 0], &[0, 1], &[1, 0]]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.to_dense_rows(), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
    }
}
