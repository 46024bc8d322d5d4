//! Univariate orthonormal Jacobi polynomials for the normalized beta
//! measure, tensorized evaluation, the stability quantity K(P_Λ), and
//! Gauss–Jacobi quadrature.
//!
//! The measure is dβ = c (1−t)^{θ₁} (1+t)^{θ₂} dt on [−1, 1], normalized to
//! total mass one. J_0 ≡ 1 and the family (J_k) is orthonormal for dβ.

use std::sync::RwLock;

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::index_sets::{IndexSet, MultiIndex};

/// Normalization constant c = (∫ (1−t)^{θ₁}(1+t)^{θ₂} dt)^{−1}, via the
/// closed form c = Γ(θ₁+θ₂+2) / (2^{θ₁+θ₂+1} Γ(θ₁+1) Γ(θ₂+1)) in log space.
pub fn normalization_constant(theta1: f64, theta2: f64) -> Result<f64> {
    if theta1 <= -1.0 || theta2 <= -1.0 || !theta1.is_finite() || !theta2.is_finite() {
        return Err(Error::Domain(format!(
            "beta exponents must be finite and larger than -1, got ({theta1}, {theta2})"
        )));
    }
    let s = theta1 + theta2;
    let ln_c = ln_gamma(s + 2.0) - (s + 1.0) * std::f64::consts::LN_2
        - ln_gamma(theta1 + 1.0)
        - ln_gamma(theta2 + 1.0);
    Ok(ln_c.exp())
}

/// Coefficients of the orthonormal three-term recurrence at one degree:
/// J_{k+1}(t) = ((t − a_k) J_k(t) − √b_k J_{k−1}(t)) / √b_{k+1}.
#[derive(Debug, Clone, Copy)]
struct Recurrence {
    a: f64,
    sqrt_b_next: f64,
}

/// Parameters (θ₁, θ₂) of the beta density together with the derived
/// normalization constant and a lazily extended recurrence table.
///
/// Shareable across threads; table extension is serialized behind a lock
/// and idempotent.
#[derive(Debug)]
pub struct JacobiParams {
    theta1: f64,
    theta2: f64,
    norm_constant: f64,
    table: RwLock<Vec<Recurrence>>,
}

impl JacobiParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        let norm_constant = normalization_constant(theta1, theta2)?;
        Ok(JacobiParams { theta1, theta2, norm_constant, table: RwLock::new(Vec::new()) })
    }

    /// Uniform density: θ₁ = θ₂ = 0.
    pub fn legendre() -> Self {
        JacobiParams::new(0.0, 0.0).expect("valid parameters")
    }

    /// Arcsine density: θ₁ = θ₂ = −1/2 (Chebyshev of the first kind).
    pub fn chebyshev() -> Self {
        JacobiParams::new(-0.5, -0.5).expect("valid parameters")
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn is_chebyshev(&self) -> bool {
        self.theta1 == -0.5 && self.theta2 == -0.5
    }

    /// The normalization constant c of the density.
    pub fn normalization(&self) -> f64 {
        self.norm_constant
    }

    /// Monic-recurrence mean shift a_k (identical for the normalized
    /// measure) and squared offdiagonal b_k of the orthonormal recurrence.
    fn raw_a(&self, k: usize) -> f64 {
        let s = self.theta1 + self.theta2;
        if k == 0 {
            (self.theta2 - self.theta1) / (s + 2.0)
        } else {
            let two_k_s = 2.0 * k as f64 + s;
            (self.theta2 * self.theta2 - self.theta1 * self.theta1)
                / (two_k_s * (two_k_s + 2.0))
        }
    }

    fn raw_b(&self, k: usize) -> f64 {
        let (t1, t2) = (self.theta1, self.theta2);
        let s = t1 + t2;
        debug_assert!(k >= 1);
        if k == 1 {
            // The k = 1 case of the general formula after cancelling the
            // (1 + θ₁ + θ₂) factor, which vanishes at θ₁ + θ₂ = −1.
            4.0 * (1.0 + t1) * (1.0 + t2) / ((s + 2.0) * (s + 2.0) * (s + 3.0))
        } else {
            let kf = k as f64;
            let two_k_s = 2.0 * kf + s;
            4.0 * kf * (kf + t1) * (kf + t2) * (kf + s)
                / (two_k_s * two_k_s * (two_k_s + 1.0) * (two_k_s - 1.0))
        }
    }

    /// Extend the recurrence table so that degrees 0..=max_degree can be
    /// evaluated.
    fn ensure_degree(&self, max_degree: usize) {
        {
            let table = self.table.read().unwrap();
            if table.len() >= max_degree {
                return;
            }
        }
        let mut table = self.table.write().unwrap();
        while table.len() < max_degree {
            let k = table.len();
            table.push(Recurrence { a: self.raw_a(k), sqrt_b_next: self.raw_b(k + 1).sqrt() });
        }
    }

    /// Values of J_0(t), ..., J_{max_degree}(t) in one forward pass.
    pub fn univariate_values(&self, max_degree: usize, t: f64) -> Result<Vec<f64>> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("evaluation point {t} outside [-1, 1]")));
        }
        let mut values = Vec::with_capacity(max_degree + 1);
        values.push(1.0);
        if max_degree == 0 {
            return Ok(values);
        }
        self.ensure_degree(max_degree);
        let table = self.table.read().unwrap();
        let mut prev = 0.0f64;
        let mut cur = 1.0f64;
        for k in 0..max_degree {
            let rec = table[k];
            let next = ((t - rec.a) * cur - if k == 0 { 0.0 } else { table[k - 1].sqrt_b_next * prev })
                / rec.sqrt_b_next;
            values.push(next);
            prev = cur;
            cur = next;
        }
        Ok(values)
    }

    /// Value of the orthonormal J_k at t.
    pub fn eval_univariate(&self, k: usize, t: f64) -> Result<f64> {
        Ok(*self.univariate_values(k, t)?.last().unwrap())
    }

    /// Tensorized value J_ν(y) = ∏_j J_{ν_j}(y_j); factors with ν_j = 0
    /// contribute 1. `y` is indexed from coordinate 1 at position 0.
    pub fn eval_tensor(&self, nu: &MultiIndex, y: &[f64]) -> Result<f64> {
        if nu.max_coordinate() > y.len() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, index supports coordinate {}",
                y.len(),
                nu.max_coordinate()
            )));
        }
        let mut product = 1.0;
        for (j, e) in nu.support() {
            product *= self.eval_univariate(e as usize, y[j - 1])?;
        }
        Ok(product)
    }
}

impl Clone for JacobiParams {
    fn clone(&self) -> Self {
        JacobiParams {
            theta1: self.theta1,
            theta2: self.theta2,
            norm_constant: self.norm_constant,
            table: RwLock::new(self.table.read().unwrap().clone()),
        }
    }
}

impl PartialEq for JacobiParams {
    fn eq(&self, other: &Self) -> bool {
        self.theta1 == other.theta1 && self.theta2 == other.theta2
    }
}

impl Serialize for JacobiParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("JacobiParams", 2)?;
        s.serialize_field("theta1", &self.theta1)?;
        s.serialize_field("theta2", &self.theta2)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for JacobiParams {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Alias(String),
            Thetas { theta1: f64, theta2: f64 },
        }
        let repr = Repr::deserialize(deserializer)?;
        let params = match repr {
            Repr::Alias(name) => match name.as_str() {
                "legendre" => JacobiParams::legendre(),
                "chebyshev" => JacobiParams::chebyshev(),
                other => {
                    return Err(D::Error::custom(format!("unknown parameter alias '{other}'")))
                }
            },
            Repr::Thetas { theta1, theta2 } => {
                JacobiParams::new(theta1, theta2).map_err(D::Error::custom)?
            }
        };
        Ok(params)
    }
}

/// A tensorized basis function J_ν for fixed parameters.
#[derive(Debug, Clone)]
pub struct TensorBasisFunction<'a> {
    pub params: &'a JacobiParams,
    pub nu: MultiIndex,
}

impl TensorBasisFunction<'_> {
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        self.params.eval_tensor(&self.nu, y)
    }
}

/// How to evaluate K(P_Λ) = sup_y Σ_{ν∈Λ} J_ν(y)².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KStrategy {
    /// Exact endpoint evaluation; valid for θ₁, θ₂ ≥ −1/2, where each
    /// univariate |J_k| attains its maximum at an interval endpoint.
    /// Chebyshev parameters short-circuit to the closed form Σ 2^{#supp(ν)}.
    Endpoint,
    /// Coarse tensor-grid maximization over the active coordinates plus
    /// local coordinate-wise refinement; returns a certified lower bound of
    /// the supremum.
    GridRefine,
}

/// The stability quantity K(P_Λ) for a downward closed set.
pub fn k_quantity(params: &JacobiParams, set: &IndexSet, strategy: KStrategy) -> Result<f64> {
    if !set.is_downward_closed() {
        return Err(Error::Domain("K(P_Λ) is defined here for downward closed Λ".into()));
    }
    match strategy {
        KStrategy::Endpoint => {
            if params.is_chebyshev() {
                return Ok(chebyshev_k_closed_form(set));
            }
            if params.theta1().min(params.theta2()) < -0.5 {
                return Err(Error::Unsupported(format!(
                    "endpoint K evaluation needs θ ≥ -1/2, got ({}, {})",
                    params.theta1(),
                    params.theta2()
                )));
            }
            endpoint_k(params, set)
        }
        KStrategy::GridRefine => grid_refine_k(params, set),
    }
}

/// Closed form for Chebyshev parameters: every univariate factor with
/// positive degree contributes 2 at the endpoint, so K = Σ_ν 2^{#supp(ν)}.
fn chebyshev_k_closed_form(set: &IndexSet) -> f64 {
    set.members().iter().map(|v| 2f64.powi(v.support_size() as i32)).sum()
}

fn endpoint_k(params: &JacobiParams, set: &IndexSet) -> Result<f64> {
    let t_star = if params.theta1() >= params.theta2() { 1.0 } else { -1.0 };
    let max_degree =
        set.members().iter().flat_map(|v| v.support().map(|(_, e)| e as usize)).max().unwrap_or(0);
    let values = params.univariate_values(max_degree, t_star)?;
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    Ok(set
        .members()
        .iter()
        .map(|v| v.support().map(|(_, e)| squares[e as usize]).product::<f64>())
        .sum())
}

fn grid_refine_k(params: &JacobiParams, set: &IndexSet) -> Result<f64> {
    let active: Vec<usize> = {
        let mut coords: Vec<usize> =
            set.members().iter().flat_map(|v| v.support().map(|(j, _)| j)).collect();
        coords.sort_unstable();
        coords.dedup();
        coords
    };
    if active.is_empty() {
        return Ok(set.len() as f64);
    }
    let dim = active.len();
    let objective = |point: &[f64]| -> f64 {
        // point[i] is the coordinate active[i]; inactive coordinates do not
        // influence the sum of squares.
        let mut full = vec![0.0; *active.last().unwrap()];
        for (i, &j) in active.iter().enumerate() {
            full[j - 1] = point[i];
        }
        set.members()
            .iter()
            .map(|v| {
                let j = params.eval_tensor(v, &full).expect("in-range point");
                j * j
            })
            .sum()
    };

    let per_coord = match dim {
        1 => 65,
        2 => 21,
        3 => 11,
        _ => 5,
    };
    let grid: Vec<f64> =
        (0..per_coord).map(|i| -1.0 + 2.0 * i as f64 / (per_coord - 1) as f64).collect();

    let mut best_point = vec![1.0; dim];
    let mut best = objective(&best_point);
    let corner = vec![-1.0; dim];
    let at_corner = objective(&corner);
    if at_corner > best {
        best = at_corner;
        best_point = corner;
    }
    let mut odometer = vec![0usize; dim];
    loop {
        let point: Vec<f64> = odometer.iter().map(|&i| grid[i]).collect();
        let value = objective(&point);
        if value > best {
            best = value;
            best_point = point;
        }
        let mut carry = 0;
        loop {
            odometer[carry] += 1;
            if odometer[carry] < per_coord {
                break;
            }
            odometer[carry] = 0;
            carry += 1;
            if carry == dim {
                break;
            }
        }
        if carry == dim {
            break;
        }
    }

    // Coordinate-wise refinement around the incumbent, shrinking window.
    let mut window = 2.0 / (per_coord - 1) as f64;
    for _ in 0..40 {
        for i in 0..dim {
            let center = best_point[i];
            for step in -5i32..=5 {
                let t = (center + step as f64 * window / 5.0).clamp(-1.0, 1.0);
                let mut candidate = best_point.clone();
                candidate[i] = t;
                let value = objective(&candidate);
                if value > best {
                    best = value;
                    best_point = candidate;
                }
            }
        }
        window *= 0.6;
    }
    Ok(best)
}

/// Gauss–Jacobi quadrature for the normalized measure dβ: `order` nodes,
/// exact for polynomials up to degree 2·order − 1, weights summing to one.
///
/// Built by the Golub–Welsch construction: eigen-decomposition of the
/// symmetric tridiagonal recurrence matrix.
pub fn quadrature_rule(params: &JacobiParams, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 1 {
        return Err(Error::Domain("quadrature order must be at least 1".into()));
    }
    params.ensure_degree(order);
    let table = params.table.read().unwrap();
    let mut m = DMatrix::<f64>::zeros(order, order);
    for k in 0..order {
        m[(k, k)] = table[k].a;
        if k + 1 < order {
            m[(k, k + 1)] = table[k].sqrt_b_next;
            m[(k + 1, k)] = table[k].sqrt_b_next;
        }
    }
    drop(table);
    let eigen = m
        .try_symmetric_eigen(1e-14, 200 * order.max(10))
        .ok_or_else(|| Error::Convergence("Gauss–Jacobi node solve did not converge".into()))?;
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let node = eigen.eigenvalues[i];
            let first = eigen.eigenvectors[(0, i)];
            (node, first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(pairs.into_iter().unzip())
}
