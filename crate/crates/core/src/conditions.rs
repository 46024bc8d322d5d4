//! Closed-form sample-size conditions relating m and n, a solver for the
//! minimal m satisfying each, and the associated probability bounds.
//!
//! Except for the restricted-isometry regime, every condition asks that
//! m / ln m exceed a right-hand side that may itself contain ln m terms;
//! on m ≥ 3 the left side is increasing and the right side non-increasing,
//! so the minimal m is well defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::{hyperbolic_cross, Family};

/// ζ(δ) = δ + (1−δ)·ln(1−δ), the Chernoff exponent constant.
pub fn zeta(delta: f64) -> Result<f64> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Domain(format!("ζ needs δ in (0,1), got {delta}")));
    }
    Ok(delta + (1.0 - delta) * (1.0 - delta).ln())
}

/// Upper bound on K_n (and K̃_n): n^{ln 3 / ln 2} for Chebyshev parameters,
/// n^{2·max(θ₁,θ₂)+2} for nonnegative-integer parameters.
pub fn k_bound(n: u64, theta1: f64, theta2: f64) -> Result<f64> {
    let exponent = k_bound_exponent(theta1, theta2)?;
    Ok((n as f64).powf(exponent))
}

fn k_bound_exponent(theta1: f64, theta2: f64) -> Result<f64> {
    if theta1 == -0.5 && theta2 == -0.5 {
        return Ok(3f64.ln() / 2f64.ln());
    }
    let integer_case = theta1 >= 0.0
        && theta2 >= 0.0
        && theta1.fract() == 0.0
        && theta2.fract() == 0.0;
    if integer_case {
        Ok(2.0 * theta1.max(theta2) + 2.0)
    } else {
        Err(Error::Unsupported(format!(
            "no closed-form K bound for θ = ({theta1}, {theta2}); supply an explicit K"
        )))
    }
}

/// The condition being evaluated. Names follow the source of each bound:
/// the fixed-set theorem, the hyperbolic-cross union bound, the first
/// (bitstream) and second (pointer) encodings, and the two
/// restricted-isometry regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Thm21,
    HcDc,
    HcAnchored,
    Enc1Dc,
    Enc1Anchored,
    Enc1Explicit,
    Enc2Dc,
    Enc2Anchored,
    Enc2Explicit,
    RipRegime,
    RipOurs,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 11] = [
        ConditionKind::Thm21,
        ConditionKind::HcDc,
        ConditionKind::HcAnchored,
        ConditionKind::Enc1Dc,
        ConditionKind::Enc1Anchored,
        ConditionKind::Enc1Explicit,
        ConditionKind::Enc2Dc,
        ConditionKind::Enc2Anchored,
        ConditionKind::Enc2Explicit,
        ConditionKind::RipRegime,
        ConditionKind::RipOurs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConditionKind::Thm21 => "thm21",
            ConditionKind::HcDc => "hc_dc",
            ConditionKind::HcAnchored => "hc_anchored",
            ConditionKind::Enc1Dc => "enc1_dc",
            ConditionKind::Enc1Anchored => "enc1_anchored",
            ConditionKind::Enc1Explicit => "enc1_explicit",
            ConditionKind::Enc2Dc => "enc2_dc",
            ConditionKind::Enc2Anchored => "enc2_anchored",
            ConditionKind::Enc2Explicit => "enc2_explicit",
            ConditionKind::RipRegime => "rip_regime",
            ConditionKind::RipOurs => "rip_ours",
        }
    }

    /// Whether the condition's right-hand side depends on the dimension d.
    pub fn depends_on_d(&self) -> bool {
        !matches!(
            self,
            ConditionKind::HcAnchored | ConditionKind::Enc1Anchored | ConditionKind::Enc2Anchored
        )
    }
}

impl std::str::FromStr for ConditionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ConditionKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown condition kind '{s}'")))
    }
}

/// A fully parameterized condition instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    pub n: u64,
    pub d: u64,
    pub r: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub delta: f64,
    /// Failure probability of the restricted-isometry conditions.
    pub gamma: f64,
    /// Family used by the explicit-bound and restricted-isometry kinds; the
    /// *_dc / *_anchored kinds imply it.
    pub family: Family,
}

impl ConditionSpec {
    pub fn new(kind: ConditionKind, n: u64, d: u64, r: f64, theta1: f64, theta2: f64) -> Self {
        let family = match kind {
            ConditionKind::HcAnchored
            | ConditionKind::Enc1Anchored
            | ConditionKind::Enc2Anchored => Family::Anchored,
            _ => Family::DownwardClosed,
        };
        ConditionSpec { kind, n, d, r, theta1, theta2, delta: 0.5, gamma: 0.01, family }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 || self.d < 1 {
            return Err(Error::Domain(format!(
                "condition needs n ≥ 1, d ≥ 1, got n={}, d={}",
                self.n, self.d
            )));
        }
        if self.r <= 0.0 {
            return Err(Error::Domain(format!("condition needs r > 0, got {}", self.r)));
        }
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::Domain(format!("γ must lie in (0,1), got {}", self.gamma)));
        }
        Ok(())
    }

    /// The K value the condition multiplies: explicit input wins, else the
    /// closed-form bound; the explicit-bound kinds always use the bound.
    fn effective_k(&self, k_input: Option<f64>) -> Result<f64> {
        match self.kind {
            ConditionKind::Enc1Explicit | ConditionKind::Enc2Explicit => {
                k_bound(self.n, self.theta1, self.theta2)
            }
            _ => match k_input {
                Some(k) => Ok(k),
                None => k_bound(self.n, self.theta1, self.theta2),
            },
        }
    }

    fn cross_cardinality(&self, anchored: bool) -> Result<f64> {
        let d = if anchored { self.n.saturating_sub(1).max(1) } else { self.d };
        Ok(hyperbolic_cross(self.n, d as usize)?.len() as f64)
    }
}

/// Right-hand side of the condition at ln m = `ln_m`. For all kinds except
/// `rip_regime` the condition is m / ln m ≥ rhs; for `rip_regime` it is
/// m ≥ rhs.
pub fn condition_rhs_at(spec: &ConditionSpec, ln_m: f64, k_input: Option<f64>) -> Result<f64> {
    spec.validate()?;
    let z = zeta(spec.delta)?;
    let n = spec.n as f64;
    let d = spec.d as f64;
    let r = spec.r;
    match spec.kind {
        ConditionKind::Thm21 => {
            let k = spec
                .effective_k(k_input)
                .map_err(|_| Error::Unsupported("thm21 needs an explicit K or a supported basis".into()))?;
            Ok((1.0 + r) / z * k)
        }
        ConditionKind::HcDc | ConditionKind::HcAnchored => {
            let exponent = k_bound_exponent(spec.theta1, spec.theta2)?;
            let card = spec.cross_cardinality(spec.kind == ConditionKind::HcAnchored)?;
            Ok((1.0 + r) / z * card.powf(exponent))
        }
        ConditionKind::Enc1Dc => {
            let k = spec.effective_k(k_input)?;
            Ok((1.0 + r + n * d * 2f64.ln() / ln_m) * k / z)
        }
        ConditionKind::Enc1Anchored => {
            let k = spec.effective_k(k_input)?;
            Ok((1.0 + r + n * n * 2f64.ln() / ln_m) * k / z)
        }
        ConditionKind::Enc1Explicit => {
            let k = spec.effective_k(None)?;
            let structure = match spec.family {
                Family::DownwardClosed => n * d * 2f64.ln(),
                Family::Anchored => n * n * 2f64.ln(),
            };
            Ok((1.0 + r + structure / ln_m) * k / z)
        }
        ConditionKind::Enc2Dc => {
            let k = spec.effective_k(k_input)?;
            Ok((1.0 + r + n * (d * n).ln() / ln_m) * k / z)
        }
        ConditionKind::Enc2Anchored => {
            let k = spec.effective_k(k_input)?;
            Ok((1.0 + r + 2.0 * n * n.ln() / ln_m) * k / z)
        }
        ConditionKind::Enc2Explicit => {
            let k = spec.effective_k(None)?;
            let structure = match spec.family {
                Family::DownwardClosed => n * (d * n).ln(),
                Family::Anchored => 2.0 * n * n.ln(),
            };
            Ok((1.0 + r + structure / ln_m) * k / z)
        }
        ConditionKind::RipRegime => {
            let k = spec.effective_k(k_input)?;
            let delta_tilde = spec.delta / 13.0;
            let dt2 = delta_tilde * delta_tilde;
            let base = k / dt2;
            let log_base = base.ln();
            let big_n = spec.cross_cardinality(spec.family == Family::Anchored)?;
            let first = 32.0 / (dt2 * dt2) * (40.0 * base * log_base).ln() * (4.0 * big_n).ln();
            let second = (1.0 / delta_tilde) * ((1.0 / (spec.gamma * delta_tilde)) * log_base).ln();
            Ok(64.0 * std::f64::consts::E * base * log_base * first.max(second))
        }
        ConditionKind::RipOurs => {
            let k = spec.effective_k(k_input)?;
            Ok((1.0 + (2.0 / spec.gamma).ln() / ln_m + n * (d * n).ln() / ln_m) * k / z)
        }
    }
}

/// Right-hand side at an integer trial value m.
pub fn condition_rhs(spec: &ConditionSpec, m: u64, k_input: Option<f64>) -> Result<f64> {
    condition_rhs_at(spec, (m as f64).ln(), k_input)
}

/// The condition's predicate at m, with the right-hand side rounded upward
/// one ulp so that round-off never under-reports the minimal m.
pub fn condition_holds(spec: &ConditionSpec, m: u64, k_input: Option<f64>) -> Result<bool> {
    let mf = m as f64;
    let rhs = condition_rhs(spec, m, k_input)?.next_up();
    Ok(match spec.kind {
        ConditionKind::RipRegime => mf >= rhs,
        _ => mf / mf.ln() >= rhs,
    })
}

const M_MAX: f64 = 9.0e18;

/// Smallest integer m ≥ 3 satisfying the condition: fixed-point iteration
/// m ← ceil(rhs(m)·ln m) from m₀ = max(3, ceil(rhs(e))), then a downward
/// scan to minimality. Monotonicity of m/ln m on m ≥ 3 makes the minimum
/// well defined.
pub fn min_sample_size(spec: &ConditionSpec, k_input: Option<f64>) -> Result<u64> {
    spec.validate()?;
    if spec.kind == ConditionKind::RipRegime {
        let rhs = condition_rhs_at(spec, 1.0, k_input)?.next_up();
        if rhs > M_MAX {
            return Err(Error::Overflow { rhs });
        }
        return Ok((rhs.ceil() as u64).max(3));
    }

    let rhs_at_e = condition_rhs_at(spec, 1.0, k_input)?;
    if rhs_at_e > M_MAX {
        return Err(Error::Overflow { rhs: rhs_at_e });
    }
    let mut m = (rhs_at_e.ceil() as u64).max(3);
    for _ in 0..200 {
        let rhs = condition_rhs(spec, m, k_input)?.next_up();
        let next = rhs * (m as f64).ln();
        if next > M_MAX {
            return Err(Error::Overflow { rhs: next });
        }
        let next = (next.ceil() as u64).max(3);
        if next == m {
            break;
        }
        m = next;
    }
    // The fixed point lands at or just above the boundary; expand if the
    // iteration stabilized slightly below, then scan down to minimality.
    let mut guard = 0;
    while !condition_holds(spec, m, k_input)? {
        let grown = m + (m / 8).max(1);
        if grown as f64 > M_MAX {
            return Err(Error::Overflow { rhs: grown as f64 });
        }
        m = grown;
        guard += 1;
        if guard > 400 {
            return Err(Error::Convergence("minimal sample size search stalled".into()));
        }
    }
    while m > 3 && condition_holds(spec, m - 1, k_input)? {
        m -= 1;
    }
    Ok(m)
}

/// The pair (2·n·m^{−(r+1)}, 2·m^{−r}): the fine union bound and its coarse
/// simplification.
pub fn probability_bound(n: u64, m: u64, r: f64) -> (f64, f64) {
    let mf = m as f64;
    (2.0 * n as f64 * mf.powf(-(r + 1.0)), 2.0 * mf.powf(-r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        let z = zeta(0.5).unwrap();
        assert!((z - (1.0 - 2f64.ln()) / 2.0).abs() < 1e-15);
        assert!((z - 0.1534).abs() < 1e-4);
        assert!(zeta(1e-8).unwrap().abs() < 1e-8);
        let z9 = zeta(0.9).unwrap();
        assert!((z9 - (0.9 + 0.1 * 0.1f64.ln())).abs() < 1e-15);
        assert!(zeta(0.0).is_err());
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn zeta_strictly_increasing() {
        let mut last = 0.0;
        for i in 1..100 {
            let z = zeta(i as f64 / 100.0).unwrap();
            assert!(z > last);
            last = z;
        }
    }

    #[test]
    fn k_bound_values() {
        assert!((k_bound(2, -0.5, -0.5).unwrap() - 3.0).abs() < 1e-12);
        assert!((k_bound(10, 0.0, 0.0).unwrap() - 100.0).abs() < 1e-10);
        assert!((k_bound(4, 1.0, 0.0).unwrap() - 256.0).abs() < 1e-9);
        assert!(k_bound(4, 0.3, 0.0).is_err());
    }

    #[test]
    fn thm21_example() {
        // δ = 1/2, r = 1, K = 4: threshold (2/ζ)·4 ≈ 52.15.
        let spec = ConditionSpec::new(ConditionKind::Thm21, 2, 1, 1.0, 0.0, 0.0);
        let rhs = condition_rhs(&spec, 100, Some(4.0)).unwrap();
        assert!((rhs - 52.15).abs() < 0.01);
    }

    #[test]
    fn hc_dc_example() {
        // #H_2^2 = 3, Chebyshev exponent ln3/ln2.
        let spec = ConditionSpec::new(ConditionKind::HcDc, 2, 2, 1.0, -0.5, -0.5);
        let rhs = condition_rhs(&spec, 50, None).unwrap();
        let expected = 2.0 / zeta(0.5).unwrap() * 3f64.powf(3f64.ln() / 2f64.ln());
        assert!((rhs - expected).abs() < 1e-10);
    }

    #[test]
    fn enc2_dc_reduces_at_n_one() {
        let spec = ConditionSpec::new(ConditionKind::Enc2Dc, 1, 5, 1.0, -0.5, -0.5);
        let m = 100u64;
        let rhs = condition_rhs(&spec, m, None).unwrap();
        let expected = (2.0 + 5f64.ln() / (m as f64).ln()) / zeta(0.5).unwrap();
        assert!((rhs - expected).abs() < 1e-12);
    }

    #[test]
    fn minimal_m_brute_scan_oracle() {
        // Ground truth by brute scan of the predicate.
        for (kind, n, d) in [
            (ConditionKind::Thm21, 1u64, 1u64),
            (ConditionKind::Enc2Dc, 3, 2),
            (ConditionKind::Enc1Anchored, 3, 2),
            (ConditionKind::HcDc, 2, 2),
        ] {
            let spec = ConditionSpec::new(kind, n, d, 1.0, -0.5, -0.5);
            let solver = min_sample_size(&spec, None).unwrap();
            let mut brute = 3u64;
            while !condition_holds(&spec, brute, None).unwrap() {
                brute += 1;
            }
            assert_eq!(solver, brute, "{kind:?}");
        }
    }

    #[test]
    fn minimal_m_thm21_k_one() {
        // K = 1, r = 1, δ = 1/2: threshold 2/ζ ≈ 13.04 on m/ln m.
        let spec = ConditionSpec::new(ConditionKind::Thm21, 1, 1, 1.0, 0.0, 0.0);
        let m = min_sample_size(&spec, Some(1.0)).unwrap();
        let mut brute = 3u64;
        while !condition_holds(&spec, brute, Some(1.0)).unwrap() {
            brute += 1;
        }
        assert_eq!(m, brute);
        assert!(condition_holds(&spec, m, Some(1.0)).unwrap());
        assert!(!condition_holds(&spec, m - 1, Some(1.0)).unwrap());
    }

    #[test]
    fn anchored_kinds_ignore_dimension() {
        for kind in
            [ConditionKind::HcAnchored, ConditionKind::Enc1Anchored, ConditionKind::Enc2Anchored]
        {
            let m_d2 =
                min_sample_size(&ConditionSpec::new(kind, 4, 2, 1.0, 0.0, 0.0), None).unwrap();
            let m_d9 =
                min_sample_size(&ConditionSpec::new(kind, 4, 9, 1.0, 0.0, 0.0), None).unwrap();
            assert_eq!(m_d2, m_d9, "{kind:?}");
            assert!(!kind.depends_on_d());
        }
    }

    #[test]
    fn improved_encoding_dominates_in_regime() {
        // When n·ln(dn) ≤ n·d·ln 2 the second encoding needs fewer samples.
        for (n, d) in [(3u64, 4u64), (4, 6), (5, 8)] {
            let n_f = n as f64;
            let d_f = d as f64;
            if n_f * (d_f * n_f).ln() <= n_f * d_f * 2f64.ln() {
                let enc1 = ConditionSpec::new(ConditionKind::Enc1Dc, n, d, 1.0, -0.5, -0.5);
                let enc2 = ConditionSpec::new(ConditionKind::Enc2Dc, n, d, 1.0, -0.5, -0.5);
                let m1 = min_sample_size(&enc1, None).unwrap();
                let m2 = min_sample_size(&enc2, None).unwrap();
                assert!(m2 <= m1, "n={n}, d={d}: {m2} > {m1}");
            }
        }
    }

    #[test]
    fn rip_regime_prohibitively_large() {
        // δ = 1/2, n = 5, d = 10, Chebyshev: the isometry-regime constant
        // exceeds 10^12, so its m* dwarfs the encoding-based one.
        let rip = ConditionSpec::new(ConditionKind::RipRegime, 5, 10, 1.0, -0.5, -0.5);
        let enc2 = ConditionSpec::new(ConditionKind::Enc2Dc, 5, 10, 1.0, -0.5, -0.5);
        let m_rip = min_sample_size(&rip, None).unwrap();
        let m_enc2 = min_sample_size(&enc2, None).unwrap();
        assert!(m_rip as f64 > 1e9 * m_enc2 as f64, "{m_rip} vs {m_enc2}");
        let delta_tilde: f64 = 0.5 / 13.0;
        let constant = 64.0 * std::f64::consts::E / delta_tilde.powi(2) * 32.0
            / delta_tilde.powi(4);
        assert!(constant > 1e12);
    }

    #[test]
    fn probability_bound_examples() {
        let (fine, coarse) = probability_bound(1, 10, 1.0);
        assert!((coarse - 0.2).abs() < 1e-15);
        assert!(fine <= coarse);
        let (fine, coarse) = probability_bound(3, 10, 1.0);
        assert!((fine - 0.06).abs() < 1e-15);
        assert!((coarse - 0.2).abs() < 1e-15);
        let (_, coarse) = probability_bound(5, 100, 2.0);
        assert!((coarse - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn kind_names_roundtrip() {
        for kind in ConditionKind::ALL {
            let parsed: ConditionKind = kind.name().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("nope".parse::<ConditionKind>().is_err());
    }
}
