//! Exhaustive enumeration of the downward closed and anchored families.

use crate::error::{Error, Result};
use crate::index_sets::{IndexSet, MultiIndex};

/// Default cap on the number of sets an enumeration may yield.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// The family being enumerated or selected over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DownwardClosed,
    Anchored,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::DownwardClosed => write!(f, "downward_closed"),
            Family::Anchored => write!(f, "anchored"),
        }
    }
}

/// Every downward closed set of cardinality `n` in `d` coordinates, in a
/// deterministic depth-first order, each exactly once.
pub fn enumerate_downward_closed(n: usize, d: usize) -> Result<Vec<IndexSet>> {
    enumerate_downward_closed_with_budget(n, d, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_downward_closed_with_budget(
    n: usize,
    d: usize,
    budget: u64,
) -> Result<Vec<IndexSet>> {
    let mut out = Vec::new();
    visit_downward_closed(n, d, budget, &mut |members| {
        out.push(IndexSet::new(members.to_vec(), d));
    })?;
    Ok(out)
}

/// Every anchored set of cardinality `n`, each exactly once. Supports are
/// contained in {1, ..., n−1}, so no ambient dimension is needed.
pub fn enumerate_anchored(n: usize) -> Result<Vec<IndexSet>> {
    enumerate_anchored_with_budget(n, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_anchored_with_budget(n: usize, budget: u64) -> Result<Vec<IndexSet>> {
    if n == 1 {
        return Ok(vec![IndexSet::null_set(1)]);
    }
    let d = n - 1;
    let mut out = Vec::new();
    visit_downward_closed(n, d, budget, &mut |members| {
        let set = IndexSet::new(members.to_vec(), d);
        if set.is_anchored() {
            out.push(set);
        }
    })?;
    Ok(out)
}

/// Enumerate the family at cardinality `n` in `d` coordinates.
pub fn enumerate_family(family: Family, n: usize, d: usize, budget: u64) -> Result<Vec<IndexSet>> {
    match family {
        Family::DownwardClosed => enumerate_downward_closed_with_budget(n, d, budget),
        Family::Anchored => enumerate_anchored_with_budget(n, budget),
    }
}

/// Depth-first visit of every downward closed set of cardinality exactly
/// `n` in `d` coordinates.
///
/// A downward closed set, sorted lexicographically, has every prefix
/// downward closed; so each set has a unique canonical parent (itself minus
/// its lexicographic maximum) and is generated exactly once by only
/// extending with elements lexicographically greater than the current
/// maximum. This realizes the canonical pointer ordering without post-hoc
/// deduplication.
pub fn visit_downward_closed(
    n: usize,
    d: usize,
    budget: u64,
    visit: &mut dyn FnMut(&[MultiIndex]),
) -> Result<()> {
    if n < 1 || d < 1 {
        return Err(Error::Domain(format!("enumeration needs n ≥ 1, d ≥ 1, got n={n}, d={d}")));
    }
    let mut members = vec![MultiIndex::zero()];
    let mut yielded = 0u64;
    extend(&mut members, n, d, budget, &mut yielded, visit)
}

fn extend(
    members: &mut Vec<MultiIndex>,
    n: usize,
    d: usize,
    budget: u64,
    yielded: &mut u64,
    visit: &mut dyn FnMut(&[MultiIndex]),
) -> Result<()> {
    if members.len() == n {
        if *yielded >= budget {
            return Err(Error::Budget {
                what: "enumerated index sets".into(),
                limit: budget,
                reached: *yielded + 1,
            });
        }
        *yielded += 1;
        visit(members);
        return Ok(());
    }
    // Admissible one-step extensions: μ + e_j not yet present, with every
    // one-step predecessor present, and greater than the current maximum
    // (members are kept sorted, so the maximum is the last element).
    let current_max = members.last().expect("non-empty").clone();
    let mut candidates: Vec<MultiIndex> = Vec::new();
    for mu in members.iter() {
        for j in 1..=d {
            let cand = mu.plus_unit(j);
            if cand <= current_max || members.binary_search(&cand).is_ok() {
                continue;
            }
            let closed = cand
                .support()
                .all(|(jj, _)| members.binary_search(&cand.minus_unit(jj).unwrap()).is_ok());
            if closed {
                candidates.push(cand);
            }
        }
    }
    candidates.sort();
    candidates.dedup();
    for cand in candidates {
        members.push(cand);
        extend(members, n, d, budget, yielded, visit)?;
        members.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_sets::hyperbolic_cross;

    #[test]
    fn singleton_family() {
        let sets = enumerate_downward_closed(1, 3).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0], IndexSet::null_set(3));
    }

    #[test]
    fn two_element_family() {
        let sets = enumerate_downward_closed(2, 3).unwrap();
        assert_eq!(sets.len(), 3);
        for s in &sets {
            assert_eq!(s.len(), 2);
            assert!(s.is_downward_closed());
        }
    }

    #[test]
    fn three_element_family_d2() {
        let sets = enumerate_downward_closed(3, 2).unwrap();
        assert_eq!(sets.len(), 3);
        let expected: Vec<IndexSet> = vec![
            IndexSet::from_dense_rows(&[vec![0, 0], vec![1, 0], vec![2, 0]], 2),
            IndexSet::from_dense_rows(&[vec![0, 0], vec![1, 0], vec![0, 1]], 2),
            IndexSet::from_dense_rows(&[vec![0, 0], vec![0, 1], vec![0, 2]], 2),
        ];
        for e in &expected {
            assert!(sets.contains(e), "missing {e:?}");
        }
    }

    #[test]
    fn anchored_small() {
        assert_eq!(enumerate_anchored(1).unwrap().len(), 1);
        let a2 = enumerate_anchored(2).unwrap();
        assert_eq!(a2.len(), 1);
        assert_eq!(a2[0], IndexSet::from_dense_rows(&[vec![0], vec![1]], 1));
        let a3 = enumerate_anchored(3).unwrap();
        assert_eq!(a3.len(), 2);
        for s in &a3 {
            assert!(s.is_anchored());
        }
    }

    #[test]
    fn anchored_subset_of_downward_closed() {
        let n = 4;
        let dc = enumerate_downward_closed(n, n - 1).unwrap();
        for a in enumerate_anchored(n).unwrap() {
            assert!(dc.contains(&a));
        }
    }

    #[test]
    fn union_identity_small() {
        // ⋃_{k ≤ n} members of M_k^d = H_n^d.
        for (n, d) in [(4usize, 2usize), (3, 3)] {
            let mut union = IndexSet::null_set(d);
            for k in 1..=n {
                for s in enumerate_downward_closed(k, d).unwrap() {
                    union = union.union(&s);
                }
            }
            assert_eq!(union, hyperbolic_cross(n as u64, d).unwrap());
        }
    }

    #[test]
    fn budget_error_carries_count() {
        let err = enumerate_downward_closed_with_budget(4, 3, 5).unwrap_err();
        match err {
            Error::Budget { limit, reached, .. } => {
                assert_eq!(limit, 5);
                assert_eq!(reached, 6);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn deterministic_order() {
        let a = enumerate_downward_closed(5, 2).unwrap();
        let b = enumerate_downward_closed(5, 2).unwrap();
        assert_eq!(a, b);
    }
}
