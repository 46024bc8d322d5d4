//! Finitely supported exponent vectors.

use std::cmp::Ordering;
use std::fmt;

/// A multi-index: a finitely supported sequence of nonnegative integer
/// exponents, indexed by 1-based coordinates.
///
/// Stored in sparse canonical form: only nonzero exponents are kept,
/// sorted by coordinate. The total order is lexicographic on the dense
/// prefix up to the larger of the two maximal stored coordinates, so
/// comparisons are deterministic and independent of representation.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    /// (coordinate, exponent) pairs, coordinate ≥ 1, exponent ≥ 1,
    /// strictly increasing in coordinate.
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    /// The null multi-index (0, 0, ...).
    pub fn zero() -> Self {
        MultiIndex { entries: Vec::new() }
    }

    /// The Kronecker sequence e_j with a 1 at coordinate `j` (1-based).
    pub fn unit(j: usize) -> Self {
        assert!(j >= 1, "coordinates are 1-based");
        MultiIndex { entries: vec![(j, 1)] }
    }

    /// Build from a dense exponent row; trailing and interior zeros are dropped.
    pub fn from_dense(exponents: &[u32]) -> Self {
        let entries = exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(i, &e)| (i + 1, e))
            .collect();
        MultiIndex { entries }
    }

    /// Dense exponent row of length `d`. Panics if the support exceeds `d`.
    pub fn to_dense(&self, d: usize) -> Vec<u32> {
        let mut row = vec![0u32; d];
        for &(j, e) in &self.entries {
            assert!(j <= d, "support coordinate {j} exceeds ambient dimension {d}");
            row[j - 1] = e;
        }
        row
    }

    /// Exponent at coordinate `j` (1-based); 0 when absent.
    pub fn exponent(&self, j: usize) -> u32 {
        self.entries
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Iterator over (coordinate, exponent) pairs of the support, ascending.
    pub fn support(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.entries.iter().copied()
    }

    /// Number of active coordinates, #supp(ν).
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    /// Largest active coordinate; 0 for the null index.
    pub fn max_coordinate(&self) -> usize {
        self.entries.last().map(|&(j, _)| j).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of exponents |ν|.
    pub fn total_degree(&self) -> u64 {
        self.entries.iter().map(|&(_, e)| e as u64).sum()
    }

    /// ∏_j (ν_j + 1), the cardinality of the rectangle below ν.
    /// Saturates at u64::MAX.
    pub fn rectangle_cardinality(&self) -> u64 {
        self.entries
            .iter()
            .fold(1u64, |acc, &(_, e)| acc.saturating_mul(e as u64 + 1))
    }

    /// ν + e_j.
    pub fn plus_unit(&self, j: usize) -> Self {
        assert!(j >= 1, "coordinates are 1-based");
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(i) => entries[i].1 += 1,
            Err(i) => entries.insert(i, (j, 1)),
        }
        MultiIndex { entries }
    }

    /// ν − e_j, or `None` if ν_j = 0.
    pub fn minus_unit(&self, j: usize) -> Option<Self> {
        let i = self.entries.binary_search_by_key(&j, |&(c, _)| c).ok()?;
        let mut entries = self.entries.clone();
        if entries[i].1 == 1 {
            entries.remove(i);
        } else {
            entries[i].1 -= 1;
        }
        Some(MultiIndex { entries })
    }

    /// Component-wise partial order μ ≤ ν.
    pub fn leq(&self, other: &Self) -> bool {
        self.support().all(|(j, e)| e <= other.exponent(j))
    }
}

impl Ord for MultiIndex {
    /// Lexicographic comparison of dense prefixes: the first coordinate
    /// with differing exponents decides.
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.entries.iter().peekable();
        let mut b = other.entries.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                // Remaining entries are nonzero at coordinates where the
                // other side is zero.
                (Some(&&(ja, _)), Some(&&(jb, _))) => {
                    if ja < jb {
                        return Ordering::Greater;
                    } else if jb < ja {
                        return Ordering::Less;
                    }
                    let ea = a.next().unwrap().1;
                    let eb = b.next().unwrap().1;
                    match ea.cmp(&eb) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
            }
        }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.max_coordinate().max(1);
        write!(f, "(")?;
        for (i, e) in self.to_dense(d).iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(exps: &[u32]) -> MultiIndex {
        MultiIndex::from_dense(exps)
    }

    #[test]
    fn sparse_canonical_form() {
        let v = mi(&[0, 2, 0, 1]);
        assert_eq!(v.exponent(1), 0);
        assert_eq!(v.exponent(2), 2);
        assert_eq!(v.exponent(4), 1);
        assert_eq!(v.support_size(), 2);
        assert_eq!(v.max_coordinate(), 4);
        assert_eq!(v.to_dense(4), vec![0, 2, 0, 1]);
    }

    #[test]
    fn lexicographic_order_on_dense_prefix() {
        // (0,1) < (1,0): the first coordinate decides.
        assert!(mi(&[0, 1]) < mi(&[1, 0]));
        // Dense length does not matter, only exponents.
        assert_eq!(mi(&[1, 0, 0]), mi(&[1]));
        assert!(MultiIndex::zero() < mi(&[0, 0, 1]));
        assert!(mi(&[0, 0, 1]) < mi(&[0, 1]));
        assert!(mi(&[1, 1]) < mi(&[2, 0]));
        assert!(mi(&[1, 1]) > mi(&[1, 0]));
    }

    #[test]
    fn plus_minus_unit_roundtrip() {
        let v = mi(&[1, 0, 2]);
        let w = v.plus_unit(2);
        assert_eq!(w.to_dense(3), vec![1, 1, 2]);
        assert_eq!(w.minus_unit(2).unwrap(), v);
        assert_eq!(v.minus_unit(2), None);
        assert_eq!(mi(&[1]).minus_unit(1).unwrap(), MultiIndex::zero());
    }

    #[test]
    fn partial_order() {
        assert!(mi(&[1, 0]).leq(&mi(&[2, 1])));
        assert!(!mi(&[0, 2]).leq(&mi(&[2, 1])));
        assert!(MultiIndex::zero().leq(&mi(&[0, 0])));
    }

    #[test]
    fn rectangle_cardinality_product() {
        assert_eq!(MultiIndex::zero().rectangle_cardinality(), 1);
        assert_eq!(mi(&[2, 1, 1]).rectangle_cardinality(), 12);
    }
}
