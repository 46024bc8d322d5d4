//! Injective encodings of downward closed sets and the cardinality bounds
//! they imply.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::index_sets::{IndexSet, MultiIndex};

/// Which encoding strategy a payload uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingVariant {
    Bitstream,
    Pointer,
}

/// An encoded downward closed set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Encoding {
    /// n·d bits: for each member ν in canonical order, d bits telling
    /// whether ν + e_j is also a member.
    Bitstream { bits: Vec<bool>, d: usize },
    /// The tuple (j_2, l_3, j_3, ..., l_n, j_n): each member after the null
    /// index is ν^{l_k} + e_{j_k}. All entries are 1-based.
    Pointer { tuple: Vec<usize> },
}

impl Encoding {
    pub fn variant(&self) -> EncodingVariant {
        match self {
            Encoding::Bitstream { .. } => EncodingVariant::Bitstream,
            Encoding::Pointer { .. } => EncodingVariant::Pointer,
        }
    }

    /// Hex rendering of a bitstream (bits packed most-significant first,
    /// zero-padded to a whole number of nibbles).
    pub fn to_hex(&self) -> Option<String> {
        let Encoding::Bitstream { bits, .. } = self else {
            return None;
        };
        let mut s = String::with_capacity(bits.len().div_ceil(4));
        for chunk in bits.chunks(4) {
            let mut nibble = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                if b {
                    nibble |= 1 << (3 - i);
                }
            }
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        Some(s)
    }

    /// Parse a hex bitstream; `n_bits` recovers the unpadded length.
    pub fn from_hex(hex: &str, n_bits: usize, d: usize) -> Result<Encoding> {
        if n_bits > hex.len() * 4 {
            return Err(Error::MalformedEncoding(format!(
                "hex string holds {} bits, {} declared",
                hex.len() * 4,
                n_bits
            )));
        }
        let mut bits = Vec::with_capacity(n_bits);
        for c in hex.chars() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| Error::MalformedEncoding(format!("invalid hex digit '{c}'")))?;
            for i in 0..4 {
                bits.push(nibble & (1 << (3 - i)) != 0);
            }
        }
        bits.truncate(n_bits);
        Ok(Encoding::Bitstream { bits, d })
    }
}

/// Encode a downward closed set with the bitstream strategy in ambient
/// dimension `d`.
pub fn encode_bitstream(set: &IndexSet, d: usize) -> Result<Encoding> {
    if !set.is_downward_closed() {
        return Err(Error::Domain("bitstream encoding requires a downward closed set".into()));
    }
    if set.support_max() > d {
        return Err(Error::Dimension(format!(
            "set supports coordinate {} beyond ambient dimension {d}",
            set.support_max()
        )));
    }
    let mut bits = Vec::with_capacity(set.len() * d);
    for v in set.members() {
        for j in 1..=d {
            bits.push(set.contains(&v.plus_unit(j)));
        }
    }
    Ok(Encoding::Bitstream { bits, d })
}

/// Decode an n·d bitstream back into the downward closed set it encodes.
pub fn decode_bitstream(encoding: &Encoding, n: usize) -> Result<IndexSet> {
    let Encoding::Bitstream { bits, d } = encoding else {
        return Err(Error::MalformedEncoding("expected a bitstream payload".into()));
    };
    let d = *d;
    if bits.len() != n * d {
        return Err(Error::MalformedEncoding(format!(
            "bitstream length {} does not equal n·d = {}",
            bits.len(),
            n * d
        )));
    }
    // Replay the construction from the injectivity argument: after the
    // first k members are known, the read bits pin down every member with a
    // known predecessor; the (k+1)-th member is the lexicographically
    // smallest of those not yet placed.
    let mut placed = vec![MultiIndex::zero()];
    let mut pending: Vec<MultiIndex> = Vec::new();
    for k in 0..n {
        let current = placed[k].clone();
        for j in 1..=d {
            if bits[k * d + (j - 1)] {
                let v = current.plus_unit(j);
                if !placed.contains(&v) && !pending.contains(&v) {
                    pending.push(v);
                }
            }
        }
        if k + 1 < n {
            pending.sort();
            let next = pending
                .first()
                .cloned()
                .ok_or_else(|| Error::MalformedEncoding(format!("no candidate for member {}", k + 2)))?;
            pending.remove(0);
            placed.push(next);
        }
    }
    if !pending.is_empty() {
        return Err(Error::MalformedEncoding(format!(
            "bitstream implies more than the declared {n} members"
        )));
    }
    let set = IndexSet::new(placed, d);
    if set.len() != n || !set.is_downward_closed() {
        return Err(Error::MalformedEncoding(
            "decoded set is not downward closed of the declared size".into(),
        ));
    }
    // Consistency of the zero bits.
    let re = encode_bitstream(&set, d)?;
    if &re != encoding {
        return Err(Error::MalformedEncoding("bitstream is not self-consistent".into()));
    }
    Ok(set)
}

/// Encode a downward closed set with the pointer strategy: members sorted
/// lexicographically, each ν^k written as ν^{l_k} + e_{j_k} with j_k the
/// smallest coordinate making that possible.
pub fn encode_pointer(set: &IndexSet) -> Result<Encoding> {
    if !set.is_downward_closed() {
        return Err(Error::Domain("pointer encoding requires a downward closed set".into()));
    }
    let members = set.members();
    let mut tuple = Vec::new();
    for (k, v) in members.iter().enumerate().skip(1) {
        let j = v.support().map(|(j, _)| j).next().expect("non-null member has support");
        let parent = v.minus_unit(j).expect("support coordinate");
        let l = set.position(&parent).expect("downward closed") + 1;
        if k >= 2 {
            tuple.push(l);
        }
        tuple.push(j);
    }
    Ok(Encoding::Pointer { tuple })
}

/// Decode a pointer tuple into the set it denotes, in ambient dimension `d`.
pub fn decode_pointer(encoding: &Encoding, n: usize, d: usize) -> Result<IndexSet> {
    let Encoding::Pointer { tuple } = encoding else {
        return Err(Error::MalformedEncoding("expected a pointer payload".into()));
    };
    let expected = if n <= 1 { 0 } else { 2 * n - 3 };
    if tuple.len() != expected {
        return Err(Error::MalformedEncoding(format!(
            "pointer tuple has {} entries, {} expected for n={n}",
            tuple.len(),
            expected
        )));
    }
    let mut members = vec![MultiIndex::zero()];
    let mut pos = 0usize;
    for k in 2..=n {
        let (l, j) = if k == 2 {
            (1usize, tuple[0])
        } else {
            let l = tuple[pos];
            let j = tuple[pos + 1];
            (l, j)
        };
        pos = if k == 2 { 1 } else { pos + 2 };
        if l < 1 || l >= k {
            return Err(Error::MalformedEncoding(format!("l_{k} = {l} out of range")));
        }
        if j < 1 || j > d {
            return Err(Error::MalformedEncoding(format!("j_{k} = {j} out of range")));
        }
        let v = members[l - 1].plus_unit(j);
        if members.contains(&v) {
            return Err(Error::MalformedEncoding(format!("duplicate member at step {k}")));
        }
        members.push(v);
    }
    let set = IndexSet::new(members, d);
    if set.len() != n || !set.is_downward_closed() {
        return Err(Error::MalformedEncoding(
            "decoded set is not downward closed of the declared size".into(),
        ));
    }
    Ok(set)
}

/// The closed-form cardinality bounds on the families, as exact big integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardinalityBounds {
    /// 2^{n d} — first encoding, downward closed in d coordinates.
    pub first_dc: BigUint,
    /// 2^{n (n−1)} — first encoding, anchored.
    pub first_anchored: BigUint,
    /// d^{n−1} (n−1)! — second encoding, downward closed.
    pub second_dc: BigUint,
    /// ((n−1)!)² — second encoding, anchored.
    pub second_anchored: BigUint,
    /// binom(d, n−1) when n−1 ≤ d, else 1 — unit-vector lower bound.
    pub lower_dc: BigUint,
}

fn factorial(k: u64) -> BigUint {
    (1..=k).fold(BigUint::from(1u32), |acc, i| acc * i)
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut num = BigUint::from(1u32);
    let mut den = BigUint::from(1u32);
    for i in 0..k {
        num *= n - i;
        den *= i + 1;
    }
    num / den
}

pub fn cardinality_bounds(n: u64, d: u64) -> CardinalityBounds {
    let two = BigUint::from(2u32);
    let fact = factorial(n.saturating_sub(1));
    CardinalityBounds {
        first_dc: two.pow((n * d) as u32),
        first_anchored: two.pow((n * (n - 1)) as u32),
        second_dc: BigUint::from(d).pow((n - 1) as u32) * &fact,
        second_anchored: &fact * &fact,
        lower_dc: if n >= 1 && n - 1 <= d { binomial(d, n - 1) } else { BigUint::from(1u32) },
    }
}
