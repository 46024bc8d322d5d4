//! Design matrix, Gramian, discrete least-squares projection, truncation
//! and exact L² error evaluation via tensor quadrature.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::index_sets::IndexSet;
use crate::jacobi::{quadrature_rule, JacobiParams};
use crate::sampling::SampleSet;

/// Below this smallest Gramian eigenvalue the fit is meaningless and is
/// signaled instead of being silently regularized.
pub const RANK_DEFICIENCY_THRESHOLD: f64 = 1e-12;

/// Node budget for tensor quadrature: nodes^d may not exceed this.
pub const QUADRATURE_NODE_BUDGET: u64 = 10_000_000;

/// A discrete least-squares fit: coefficients over an index set in
/// canonical member order plus Gramian spectral diagnostics.
#[derive(Debug, Clone)]
pub struct Fit {
    pub index_set: IndexSet,
    pub coefficients: Vec<f64>,
    pub m: usize,
    pub gramian_min_eig: f64,
    pub gramian_max_eig: f64,
    /// ‖u − Π_Λ^m u‖_m on the fitting sample.
    pub residual_empirical: f64,
}

impl Fit {
    /// Value of the fitted polynomial at a point.
    pub fn evaluate(&self, params: &JacobiParams, y: &[f64]) -> Result<f64> {
        eval_expansion(params, &self.index_set, &self.coefficients, y)
    }

    /// JSON wire form.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "index_set": self.index_set.to_dense_rows(),
            "coefficients": self.coefficients,
            "m": self.m,
            "gramian_min_eig": self.gramian_min_eig,
            "gramian_max_eig": self.gramian_max_eig,
            "residual_empirical": self.residual_empirical,
        })
    }
}

/// Value of Σ_k a_k J_{ν_k}(y) for coefficients in canonical member order.
pub fn eval_expansion(
    params: &JacobiParams,
    set: &IndexSet,
    coefficients: &[f64],
    y: &[f64],
) -> Result<f64> {
    if coefficients.len() != set.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for a set of {} members",
            coefficients.len(),
            set.len()
        )));
    }
    let values = univariate_table(params, set, y)?;
    Ok(set
        .members()
        .iter()
        .zip(coefficients)
        .map(|(v, &a)| {
            a * v.support().map(|(j, e)| values[j - 1][e as usize]).product::<f64>()
        })
        .sum())
}

/// Per-coordinate univariate values up to the set's maximal degree in that
/// coordinate.
fn univariate_table(params: &JacobiParams, set: &IndexSet, y: &[f64]) -> Result<Vec<Vec<f64>>> {
    let support_max = set.support_max();
    if support_max > y.len() {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, set supports coordinate {support_max}",
            y.len()
        )));
    }
    let mut max_degree = vec![0usize; y.len()];
    for v in set.members() {
        for (j, e) in v.support() {
            max_degree[j - 1] = max_degree[j - 1].max(e as usize);
        }
    }
    y.iter()
        .zip(&max_degree)
        .map(|(&t, &deg)| params.univariate_values(deg, t))
        .collect()
}

/// The m × #(Λ) design matrix D with D[i, k] = J_{ν_k}(yⁱ), columns in
/// canonical member order.
pub fn design_matrix(
    params: &JacobiParams,
    set: &IndexSet,
    samples: &SampleSet,
) -> Result<DMatrix<f64>> {
    if !set.is_downward_closed() {
        return Err(Error::Domain("design matrix requires a downward closed set".into()));
    }
    if set.support_max() > samples.d() {
        return Err(Error::Dimension(format!(
            "samples have dimension {}, set supports coordinate {}",
            samples.d(),
            set.support_max()
        )));
    }
    let m = samples.m();
    let n = set.len();
    let mut d_matrix = DMatrix::<f64>::zeros(m, n);
    for (i, row) in samples.rows().enumerate() {
        let values = univariate_table(params, set, row)?;
        for (k, v) in set.members().iter().enumerate() {
            d_matrix[(i, k)] =
                v.support().map(|(j, e)| values[j - 1][e as usize]).product::<f64>();
        }
    }
    Ok(d_matrix)
}

/// G = m⁻¹ DᵀD.
pub fn gramian(d_matrix: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    (d_matrix.transpose() * d_matrix) / m as f64
}

/// Extremal eigenvalues of a symmetric matrix.
pub fn symmetric_eig_bounds(g: &DMatrix<f64>) -> (f64, f64) {
    let eigen = g.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &lambda in eigen.eigenvalues.iter() {
        min = min.min(lambda);
        max = max.max(lambda);
    }
    (min, max)
}

/// Solve the discrete least-squares projection from a prebuilt design
/// matrix. Coefficients come from a thin QR factorization of D rather than
/// the normal equations; the Gramian is still formed for its spectral
/// diagnostics.
pub fn solve_projection_from_matrix(
    set: &IndexSet,
    d_matrix: &DMatrix<f64>,
    b: &[f64],
) -> Result<Fit> {
    let m = d_matrix.nrows();
    let n = d_matrix.ncols();
    if b.len() != m {
        return Err(Error::Dimension(format!("{} values for {m} samples", b.len())));
    }
    if m < n {
        return Err(Error::Dimension(format!("m = {m} samples cannot fit {n} coefficients")));
    }
    let g = gramian(d_matrix, m);
    let (min_eig, max_eig) = symmetric_eig_bounds(&g);
    if min_eig < RANK_DEFICIENCY_THRESHOLD {
        return Err(Error::RankDeficient { min_eig });
    }
    let rhs = DVector::from_column_slice(b);
    let qr = d_matrix.clone().qr();
    let qtb = qr.q().transpose() * &rhs;
    let coeffs = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { min_eig })?;
    let residual_vec = &rhs - d_matrix * &coeffs;
    let residual_empirical = residual_vec.norm() / (m as f64).sqrt();
    Ok(Fit {
        index_set: set.clone(),
        coefficients: coeffs.iter().copied().collect(),
        m,
        gramian_min_eig: min_eig,
        gramian_max_eig: max_eig,
        residual_empirical,
    })
}

/// Discrete least-squares projection Π_Λ^m u from sample values b.
pub fn solve_projection(
    params: &JacobiParams,
    set: &IndexSet,
    samples: &SampleSet,
    b: &[f64],
) -> Result<Fit> {
    let d_matrix = design_matrix(params, set, samples)?;
    solve_projection_from_matrix(set, &d_matrix, b)
}

/// T_τ(t) = sign(t) · min(τ, |t|).
pub fn truncate(t: f64, tau: f64) -> f64 {
    t.clamp(-tau, tau)
}

/// Pointwise truncation of a value slice.
pub fn truncate_values(values: &mut [f64], tau: f64) {
    for v in values.iter_mut() {
        *v = truncate(*v, tau);
    }
}

/// The truncated estimator T_τ(Π_Λ^m u) as a function object; it is not a
/// polynomial and is never re-projected.
#[derive(Debug, Clone)]
pub struct TruncatedFit<'a> {
    pub fit: &'a Fit,
    pub tau: f64,
}

impl TruncatedFit<'_> {
    pub fn evaluate(&self, params: &JacobiParams, y: &[f64]) -> Result<f64> {
        Ok(truncate(self.fit.evaluate(params, y)?, self.tau))
    }
}

/// True iff all Gramian eigenvalues lie in [1−δ, 1+δ]. With δ = 1/2 this is
/// the per-set event {max ‖v‖²/‖v‖_m² ≤ 2}, since that ratio equals
/// 1/λ_min(G).
pub fn stability_check(min_eig: f64, max_eig: f64, delta: f64) -> bool {
    min_eig >= 1.0 - delta && max_eig <= 1.0 + delta
}

/// ‖f‖ in L²(Γ, dρ) by tensor Gauss–Jacobi quadrature with `order` nodes
/// per coordinate; exact up to round-off when f is a polynomial of
/// coordinate-degree below 2·order.
pub fn l2_norm(
    params: &JacobiParams,
    d: usize,
    order: usize,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<f64> {
    Ok(l2_inner_product(params, d, order, f, f)?.max(0.0).sqrt())
}

/// ∫ f·g dρ by tensor quadrature.
pub fn l2_inner_product(
    params: &JacobiParams,
    d: usize,
    order: usize,
    f: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
) -> Result<f64> {
    if d < 1 || order < 1 {
        return Err(Error::Domain(format!("need d ≥ 1 and order ≥ 1, got d={d}, order={order}")));
    }
    let total = (order as u64).checked_pow(d as u32).unwrap_or(u64::MAX);
    if total > QUADRATURE_NODE_BUDGET {
        return Err(Error::Budget {
            what: "tensor quadrature nodes".into(),
            limit: QUADRATURE_NODE_BUDGET,
            reached: total,
        });
    }
    let (nodes, weights) = quadrature_rule(params, order)?;
    let mut sum = 0.0;
    let mut odometer = vec![0usize; d];
    let mut point = vec![nodes[0]; d];
    loop {
        let weight: f64 = odometer.iter().map(|&i| weights[i]).product();
        sum += weight * f(&point) * g(&point);
        let mut carry = 0;
        loop {
            odometer[carry] += 1;
            if odometer[carry] < order {
                point[carry] = nodes[odometer[carry]];
                break;
            }
            odometer[carry] = 0;
            point[carry] = nodes[0];
            carry += 1;
            if carry == d {
                return Ok(sum);
            }
        }
    }
}

/// ‖u − v‖ in L²(Γ, dρ).
pub fn l2_error(
    params: &JacobiParams,
    d: usize,
    order: usize,
    u: &dyn Fn(&[f64]) -> f64,
    v: &dyn Fn(&[f64]) -> f64,
) -> Result<f64> {
    l2_norm(params, d, order, &|y| u(y) - v(y))
}

/// Shared design-matrix columns over a superset of candidate indices, so
/// each candidate set solves an n-column subproblem without re-evaluating
/// basis functions.
pub struct ColumnCache {
    superset: IndexSet,
    columns: DMatrix<f64>,
}

impl ColumnCache {
    pub fn new(params: &JacobiParams, superset: &IndexSet, samples: &SampleSet) -> Result<Self> {
        let columns = design_matrix(params, superset, samples)?;
        Ok(ColumnCache { superset: superset.clone(), columns })
    }

    pub fn superset(&self) -> &IndexSet {
        &self.superset
    }

    pub fn m(&self) -> usize {
        self.columns.nrows()
    }

    /// Column for one member of the superset.
    pub fn column(
        &self,
        v: &crate::index_sets::MultiIndex,
    ) -> Option<nalgebra::DVectorView<'_, f64>> {
        self.superset.position(v).map(|k| self.columns.column(k))
    }

    /// Assemble the design matrix of a candidate subset.
    pub fn assemble(&self, set: &IndexSet) -> Result<DMatrix<f64>> {
        let mut d_matrix = DMatrix::<f64>::zeros(self.columns.nrows(), set.len());
        for (k, v) in set.members().iter().enumerate() {
            let pos = self.superset.position(v).ok_or_else(|| {
                Error::Dimension(format!("candidate member {v:?} missing from the column cache"))
            })?;
            d_matrix.set_column(k, &self.columns.column(pos));
        }
        Ok(d_matrix)
    }

    /// Solve the projection for a candidate subset of the superset.
    pub fn solve(&self, set: &IndexSet, b: &[f64]) -> Result<Fit> {
        let d_matrix = self.assemble(set)?;
        solve_projection_from_matrix(set, &d_matrix, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_sets::MultiIndex;
    use crate::sampling::{draw_samples, empirical_norm};

    fn constant_set() -> IndexSet {
        IndexSet::null_set(1)
    }

    #[test]
    fn design_matrix_constant_column() {
        let params = JacobiParams::legendre();
        let samples = draw_samples(&params, 2, 10, 1).unwrap();
        let d = design_matrix(&params, &constant_set(), &samples).unwrap();
        assert!(d.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn design_matrix_row_values() {
        // Row at a known point for Λ = {0, e1}.
        let params = JacobiParams::legendre();
        let set = IndexSet::from_dense_rows(&[vec![0], vec![1]], 1);
        let samples = draw_samples(&params, 1, 5, 3).unwrap();
        let d = design_matrix(&params, &set, &samples).unwrap();
        for (i, row) in samples.rows().enumerate() {
            assert!((d[(i, 0)] - 1.0).abs() < 1e-15);
            assert!((d[(i, 1)] - 3f64.sqrt() * row[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn gramian_of_ones() {
        let d = DMatrix::from_element(7, 1, 1.0);
        let g = gramian(&d, 7);
        assert!((g[(0, 0)] - 1.0).abs() < 1e-15);
        let d = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 3.0]);
        let g = gramian(&d, 4);
        assert!((g[(0, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_fit_is_mean() {
        let params = JacobiParams::legendre();
        let samples = draw_samples(&params, 1, 20, 9).unwrap();
        let b: Vec<f64> = samples.rows().map(|r| r[0] * r[0] + 0.7).collect();
        let fit = solve_projection(&params, &constant_set(), &samples, &b).unwrap();
        let mean = b.iter().sum::<f64>() / b.len() as f64;
        assert!((fit.coefficients[0] - mean).abs() < 1e-13);
    }

    #[test]
    fn recovers_exact_legendre_expansion() {
        // u(t) = t² = 1/3 + (2/(3√5)) J₂(t).
        let params = JacobiParams::legendre();
        let set = IndexSet::from_dense_rows(&[vec![0], vec![1], vec![2]], 1);
        let samples = draw_samples(&params, 1, 50, 11).unwrap();
        let b: Vec<f64> = samples.rows().map(|r| r[0] * r[0]).collect();
        let fit = solve_projection(&params, &set, &samples, &b).unwrap();
        assert!((fit.coefficients[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!(fit.coefficients[1].abs() < 1e-10);
        assert!((fit.coefficients[2] - 2.0 / (3.0 * 5f64.sqrt())).abs() < 1e-10);
        assert!(fit.residual_empirical <= 1e-10 * empirical_norm(&b));
    }

    #[test]
    fn interpolation_consistency() {
        // b sampled from a member of P_Λ is recovered with negligible residual.
        let params = JacobiParams::chebyshev();
        let set = IndexSet::from_dense_rows(&[vec![0, 0], vec![1, 0], vec![0, 1]], 2);
        let samples = draw_samples(&params, 2, 40, 17).unwrap();
        let coeffs = [0.5, -1.25, 2.0];
        let b: Vec<f64> = samples
            .rows()
            .map(|y| eval_expansion(&params, &set, &coeffs, y).unwrap())
            .collect();
        let fit = solve_projection(&params, &set, &samples, &b).unwrap();
        for (a, e) in fit.coefficients.iter().zip(&coeffs) {
            assert!((a - e).abs() < 1e-10);
        }
        assert!(fit.residual_empirical <= 1e-10 * empirical_norm(&b));
    }

    #[test]
    fn projection_idempotence() {
        let params = JacobiParams::legendre();
        let set = IndexSet::from_dense_rows(&[vec![0], vec![1], vec![2]], 1);
        let samples = draw_samples(&params, 1, 60, 23).unwrap();
        let b: Vec<f64> = samples.rows().map(|r| (r[0] * 2.2).sin()).collect();
        let fit = solve_projection(&params, &set, &samples, &b).unwrap();
        let b2: Vec<f64> =
            samples.rows().map(|y| fit.evaluate(&params, y).unwrap()).collect();
        let fit2 = solve_projection(&params, &set, &samples, &b2).unwrap();
        for (a, e) in fit2.coefficients.iter().zip(&fit.coefficients) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn empirical_pythagoras() {
        let params = JacobiParams::legendre();
        let set = IndexSet::from_dense_rows(&[vec![0], vec![1]], 1);
        let samples = draw_samples(&params, 1, 30, 29).unwrap();
        let b: Vec<f64> = samples.rows().map(|r| r[0].exp()).collect();
        let fit = solve_projection(&params, &set, &samples, &b).unwrap();
        let proj: Vec<f64> = samples.rows().map(|y| fit.evaluate(&params, y).unwrap()).collect();
        let lhs = empirical_norm(&b).powi(2);
        let rhs = empirical_norm(&proj).powi(2) + fit.residual_empirical.powi(2);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs);
    }

    #[test]
    fn nested_monotonicity() {
        let params = JacobiParams::legendre();
        let small = IndexSet::from_dense_rows(&[vec![0], vec![1]], 1);
        let large = IndexSet::from_dense_rows(&[vec![0], vec![1], vec![2]], 1);
        let samples = draw_samples(&params, 1, 40, 31).unwrap();
        let b: Vec<f64> = samples.rows().map(|r| (1.3 * r[0]).cos()).collect();
        let fit_small = solve_projection(&params, &small, &samples, &b).unwrap();
        let fit_large = solve_projection(&params, &large, &samples, &b).unwrap();
        assert!(fit_large.residual_empirical <= fit_small.residual_empirical + 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        // All rows sampled at one repeated point give a rank-one design.
        let params = JacobiParams::legendre();
        let set = IndexSet::from_dense_rows(&[vec![0], vec![1], vec![2]], 1);
        let d = DMatrix::from_fn(3, 3, |_, k| params.eval_univariate(k, 0.5).unwrap());
        let err = solve_projection_from_matrix(&set, &d, &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn inverse_min_eig_is_worst_norm_ratio() {
        // 1/λ_min(G) = max_v ‖v‖²/‖v‖_m², checked by inverse power iteration
        // (an independent route to the extremal Rayleigh quotient).
        let params = JacobiParams::legendre();
        let set = crate::index_sets::hyperbolic_cross(3, 2).unwrap();
        let samples = draw_samples(&params, 2, 80, 37).unwrap();
        let d = design_matrix(&params, &set, &samples).unwrap();
        let g = gramian(&d, samples.m());
        let (min_eig, _) = symmetric_eig_bounds(&g);
        let lu = g.clone().lu();
        let mut x = DVector::from_element(set.len(), 1.0);
        for _ in 0..200 {
            x = lu.solve(&x).expect("nonsingular");
            x /= x.norm();
        }
        // Rayleigh quotient of G at the converged vector ≈ λ_min; the norm
        // ratio for the polynomial with those coefficients is its inverse.
        let rayleigh = (x.transpose() * &g * &x)[(0, 0)];
        assert!((1.0 / rayleigh - 1.0 / min_eig).abs() <= 1e-8 * (1.0 / min_eig));
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate(0.5, 1.0), 0.5);
        assert_eq!(truncate(-3.0, 1.0), -1.0);
        assert_eq!(truncate(2.0, 2.0), 2.0);
        let mut vals = [0.1, -5.0, 5.0];
        truncate_values(&mut vals, 2.0);
        assert_eq!(vals, [0.1, -2.0, 2.0]);
    }

    #[test]
    fn truncation_contracts_toward_band() {
        // |T_τ(w) − u| ≤ |w − u| whenever |u| ≤ τ.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let tau = rng.gen::<f64>() * 3.0;
            let u = (rng.gen::<f64>() * 2.0 - 1.0) * tau;
            let w = rng.gen::<f64>() * 10.0 - 5.0;
            assert!((truncate(w, tau) - u).abs() <= (w - u).abs() + 1e-15);
        }
    }

    #[test]
    fn stability_check_examples() {
        assert!(stability_check(1.0, 1.0, 0.3));
        assert!(!stability_check(0.4, 1.0, 0.5));
        assert!(!stability_check(0.9, 1.6, 0.5));
    }

    #[test]
    fn l2_norm_examples() {
        let legendre = JacobiParams::legendre();
        // ‖t‖² = ∫ t²/2 dt = 1/3.
        let norm = l2_norm(&legendre, 1, 10, &|y| y[0]).unwrap();
        assert!((norm - (1f64 / 3.0).sqrt()).abs() < 1e-13);

        let chebyshev = JacobiParams::chebyshev();
        let norm = l2_norm(&chebyshev, 1, 10, &|y| y[0]).unwrap();
        assert!((norm - (0.5f64).sqrt()).abs() < 1e-13);

        // u = v gives zero.
        let err = l2_error(&legendre, 2, 8, &|y| y[0] * y[1], &|y| y[0] * y[1]).unwrap();
        assert!(err < 1e-12);
    }

    #[test]
    fn quadrature_budget_enforced() {
        let params = JacobiParams::legendre();
        let err = l2_norm(&params, 9, 100, &|_| 1.0).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn column_cache_matches_direct_solve() {
        let params = JacobiParams::legendre();
        let superset = crate::index_sets::hyperbolic_cross(4, 2).unwrap();
        let samples = draw_samples(&params, 2, 60, 41).unwrap();
        let cache = ColumnCache::new(&params, &superset, &samples).unwrap();
        let candidate = IndexSet::from_dense_rows(&[vec![0, 0], vec![1, 0], vec![0, 1]], 2);
        let b: Vec<f64> = samples.rows().map(|y| (y[0] + 0.5 * y[1]).exp()).collect();
        let via_cache = cache.solve(&candidate, &b).unwrap();
        let direct = solve_projection(&params, &candidate, &samples, &b).unwrap();
        for (a, e) in via_cache.coefficients.iter().zip(&direct.coefficients) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((via_cache.residual_empirical - direct.residual_empirical).abs() < 1e-12);
        assert!(cache.column(&MultiIndex::zero()).is_some());
        assert!(cache.column(&MultiIndex::from_dense(&[5, 5])).is_none());
    }

    #[test]
    fn fit_json_shape() {
        let params = JacobiParams::legendre();
        let samples = draw_samples(&params, 1, 10, 2).unwrap();
        let b: Vec<f64> = samples.rows().map(|r| r[0]).collect();
        let set = IndexSet::from_dense_rows(&[vec![0], vec![1]], 1);
        let fit = solve_projection(&params, &set, &samples, &b).unwrap();
        let json = fit.to_json();
        assert_eq!(json["m"], 10);
        assert!(json["index_set"].as_array().unwrap().len() == 2);
    }
}
