//! Monte Carlo experiment drivers: stability-probability verification,
//! accuracy verification in probability and expectation, and convergence
//! studies. Drivers are pure: they return report structs with
//! deterministic CSV bodies; all file I/O belongs to the CLI.
//!
//! Trial t of a run draws its randomness from the derived seed
//! derive(master_seed, t) and results are aggregated in trial order, so
//! reports are byte-identical for identical configurations regardless of
//! how trials are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{min_sample_size, probability_bound, ConditionKind, ConditionSpec};
use crate::error::{Error, Result};
use crate::index_sets::{hyperbolic_cross, Family, IndexSet};
use crate::jacobi::{k_quantity, JacobiParams, KStrategy};
use crate::least_squares::{
    design_matrix, gramian, l2_norm, symmetric_eig_bounds, truncate,
};
use crate::model_selection::{
    best_n_term_oracle, compute_stability_constant, dense_grid_max, exhaustive_select,
    family_members, greedy_select, BestNTermResult,
};
use crate::report::{acceptance_threshold, csv_row, format_float};
use crate::sampling::{derive_seed, draw_samples, empirical_norm};

/// One-sided 99.9% normal quantile used for mean-based slack.
pub const NORMAL_SLACK_QUANTILE: f64 = 3.090232306167813;

/// Synthetic target functions. All are bounded on Γ with a computable sup
/// bound τ₀, as the expectation bounds require.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionSpec {
    /// Σ c_ν y^ν over monomial exponent rows.
    Polynomial { terms: Vec<(Vec<u32>, f64)> },
    /// scale · exp(Σ c_j y_j).
    ExponentialSum { scale: f64, weights: Vec<f64> },
    /// 1 / (shift + Σ c_j y_j), requiring Σ|c_j| < shift.
    Rational { shift: f64, weights: Vec<f64> },
    /// Registry lookup, resolved against the ambient dimension.
    Named { name: String },
}

/// Default weight sequence c_j = (3/4)·2^{−j}.
pub fn default_weights(d: usize) -> Vec<f64> {
    (1..=d).map(|j| 0.75 * 0.5f64.powi(j as i32)).collect()
}

/// A resolved, evaluable test function.
#[derive(Debug, Clone)]
pub struct TestFunction {
    spec: TestFunctionSpec,
}

impl TestFunction {
    pub fn resolve(spec: &TestFunctionSpec, d: usize) -> Result<TestFunction> {
        let spec = match spec {
            TestFunctionSpec::Named { name } => match name.as_str() {
                "expsum" => {
                    TestFunctionSpec::ExponentialSum { scale: 1.0, weights: default_weights(d) }
                }
                "rational" => {
                    TestFunctionSpec::Rational { shift: 2.0, weights: default_weights(d) }
                }
                other => {
                    return Err(Error::Domain(format!("unknown test function '{other}'")));
                }
            },
            concrete => concrete.clone(),
        };
        if let TestFunctionSpec::Rational { shift, weights } = &spec {
            let mass: f64 = weights.iter().map(|c| c.abs()).sum();
            if mass >= *shift {
                return Err(Error::Domain(format!(
                    "rational target needs Σ|c_j| < shift, got {mass} ≥ {shift}"
                )));
            }
        }
        Ok(TestFunction { spec })
    }

    pub fn spec(&self) -> &TestFunctionSpec {
        &self.spec
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match &self.spec {
            TestFunctionSpec::Polynomial { terms } => terms
                .iter()
                .map(|(exps, c)| {
                    c * exps
                        .iter()
                        .enumerate()
                        .map(|(j, &e)| y[j].powi(e as i32))
                        .product::<f64>()
                })
                .sum(),
            TestFunctionSpec::ExponentialSum { scale, weights } => {
                scale
                    * weights
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * y[j])
                        .sum::<f64>()
                        .exp()
            }
            TestFunctionSpec::Rational { shift, weights } => {
                1.0 / (shift + weights.iter().enumerate().map(|(j, c)| c * y[j]).sum::<f64>())
            }
            TestFunctionSpec::Named { .. } => unreachable!("resolved at construction"),
        }
    }

    /// τ₀ with sup_Γ |u| ≤ τ₀.
    pub fn sup_bound(&self) -> f64 {
        match &self.spec {
            TestFunctionSpec::Polynomial { terms } => terms.iter().map(|(_, c)| c.abs()).sum(),
            TestFunctionSpec::ExponentialSum { scale, weights } => {
                scale.abs() * weights.iter().map(|c| c.abs()).sum::<f64>().exp()
            }
            TestFunctionSpec::Rational { shift, weights } => {
                1.0 / (shift - weights.iter().map(|c| c.abs()).sum::<f64>())
            }
            TestFunctionSpec::Named { .. } => unreachable!("resolved at construction"),
        }
    }
}

/// Which stability event a stability run measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVariant {
    /// One fixed set Λ: the event {all eigenvalues of G_Λ in [1−δ, 1+δ]}.
    FixedSet,
    /// Family scan: the event {C_n ≤ 1/(1−δ)} over the whole family.
    FamilyScan,
}

/// Everything that determines an experiment run. Two runs with equal
/// configurations produce byte-identical CSV bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub family: Family,
    pub n: usize,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    pub d: usize,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Truncation level; defaults to the target's sup bound.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Explicit sample size; wins over `m_condition`.
    #[serde(default)]
    pub m: Option<u64>,
    /// Derive m from this condition kind when no explicit m is given
    /// (accuracy runs evaluate it with n replaced by 2n−1).
    #[serde(default)]
    pub m_condition: Option<ConditionKind>,
    pub trials: usize,
    pub master_seed: u64,
    pub function: TestFunctionSpec,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_variant")]
    pub stability_variant: StabilityVariant,
    /// Dense exponent rows of the fixed set for the fixed-set variant.
    #[serde(default)]
    pub fixed_set: Option<Vec<Vec<u32>>>,
    #[serde(default = "default_linf_grid")]
    pub linf_grid: usize,
}

fn default_n_min() -> usize {
    1
}
fn default_r() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.5
}
fn default_quad_order() -> usize {
    30
}
fn default_budget() -> u64 {
    crate::index_sets::DEFAULT_ENUMERATION_BUDGET
}
fn default_variant() -> StabilityVariant {
    StabilityVariant::FamilyScan
}
fn default_linf_grid() -> usize {
    101
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<JacobiParams> {
        JacobiParams::new(self.theta1, self.theta2)
    }

    /// Resolve the sample size: explicit m, else the configured condition
    /// evaluated at cardinality `n_for_condition`.
    pub fn resolve_m(&self, n_for_condition: u64) -> Result<u64> {
        if let Some(m) = self.m {
            return Ok(m);
        }
        let kind = self.m_condition.ok_or_else(|| {
            Error::Domain("config needs either an explicit m or an m_condition".into())
        })?;
        let spec = ConditionSpec::new(
            kind,
            n_for_condition,
            self.d as u64,
            self.r,
            self.theta1,
            self.theta2,
        )
        .with_delta(self.delta)
        .with_family(self.family);
        min_sample_size(&spec, None)
    }
}

/// Run closures indexed by trial on the current rayon pool, collecting in
/// trial order.
pub fn run_trials<T: Send, F: Fn(usize) -> Result<T> + Sync>(
    trials: usize,
    f: F,
) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone)]
pub struct StabilityTrialRow {
    pub trial: usize,
    pub seed: u64,
    /// Family scan: the stability constant C; fixed set: 1/λ_min(G).
    pub statistic: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    pub stable: bool,
}

#[derive(Debug, Clone)]
pub struct StabilityMcReport {
    pub variant: StabilityVariant,
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub m: u64,
    pub r: f64,
    pub delta: f64,
    pub trials: usize,
    pub rows: Vec<StabilityTrialRow>,
    pub failures: u64,
    pub empirical_failure_rate: f64,
    /// 2·n·m^{−(r+1)}.
    pub bound_fine: f64,
    /// 2·m^{−r}.
    pub bound_coarse: f64,
    /// Largest failure count compatible with the governing bound at
    /// one-sided 99.9% confidence.
    pub accept_threshold: u64,
    pub pass: bool,
    /// K used to derive m, when it was derived from a condition.
    pub k_used: Option<f64>,
    /// Set when K came from the grid-refinement lower bound rather than an
    /// exact evaluation.
    pub k_approximate: bool,
}

impl StabilityMcReport {
    pub fn csv_body(&self) -> String {
        let mut out = String::from("schema=stability-mc-v1\n");
        out.push_str("trial,seed,statistic,min_eig,max_eig,stable\n");
        for row in &self.rows {
            out.push_str(&csv_row(&[
                row.trial.to_string(),
                row.seed.to_string(),
                format_float(row.statistic),
                format_float(row.min_eig),
                format_float(row.max_eig),
                (row.stable as u8).to_string(),
            ]));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "variant": match self.variant {
                StabilityVariant::FixedSet => "fixed_set",
                StabilityVariant::FamilyScan => "family_scan",
            },
            "family": self.family.to_string(),
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "r": self.r,
            "delta": self.delta,
            "trials": self.trials,
            "failures": self.failures,
            "empirical_failure_rate": self.empirical_failure_rate,
            "bound_fine": self.bound_fine,
            "bound_coarse": self.bound_coarse,
            "accept_threshold": self.accept_threshold,
            "pass": self.pass,
            "k_used": self.k_used,
            "k_approximate": self.k_approximate,
        })
    }
}

/// Monte Carlo verification of the stability probabilities: the empirical
/// frequency of instability must be compatible with the theoretical cap.
pub fn run_stability_mc(config: &ExperimentConfig) -> Result<StabilityMcReport> {
    let params = config.params()?;
    let fixed_set = match config.stability_variant {
        StabilityVariant::FixedSet => {
            let rows = config.fixed_set.as_ref().ok_or_else(|| {
                Error::Domain("fixed-set stability run needs a fixed_set in the config".into())
            })?;
            let set = IndexSet::from_dense_rows(rows, config.d);
            if !set.is_downward_closed() {
                return Err(Error::Domain("the fixed set must be downward closed".into()));
            }
            Some(set)
        }
        StabilityVariant::FamilyScan => None,
    };

    // Sample size: explicit, or from the configured condition. The
    // fixed-set variant derives K(P_Λ) for the theorem condition.
    let (m, k_used, k_approximate) = match (config.m, config.m_condition, &fixed_set) {
        (Some(m), _, _) => (m, None, false),
        (None, Some(kind), Some(set)) if kind == ConditionKind::Thm21 => {
            let (k, approx) = match k_quantity(&params, set, KStrategy::Endpoint) {
                Ok(k) => (k, false),
                Err(Error::Unsupported(_)) => {
                    (k_quantity(&params, set, KStrategy::GridRefine)?, true)
                }
                Err(e) => return Err(e),
            };
            let spec = ConditionSpec::new(
                ConditionKind::Thm21,
                set.len() as u64,
                config.d as u64,
                config.r,
                config.theta1,
                config.theta2,
            )
            .with_delta(config.delta)
            .with_family(config.family);
            (min_sample_size(&spec, Some(k))?, Some(k), approx)
        }
        _ => (config.resolve_m(config.n as u64)?, None, false),
    };

    let instability_threshold = 1.0 / (1.0 - config.delta);
    let rows = run_trials(config.trials, |t| {
        let seed = derive_seed(config.master_seed, t as u64);
        let samples = draw_samples(&params, config.d, m as usize, seed)?;
        match &fixed_set {
            Some(set) => {
                let d_matrix = design_matrix(&params, set, &samples)?;
                let g = gramian(&d_matrix, samples.m());
                let (min_eig, max_eig) = symmetric_eig_bounds(&g);
                let stable = crate::least_squares::stability_check(min_eig, max_eig, config.delta);
                Ok(StabilityTrialRow {
                    trial: t,
                    seed,
                    statistic: if min_eig > 0.0 { 1.0 / min_eig } else { f64::INFINITY },
                    min_eig,
                    max_eig,
                    stable,
                })
            }
            None => {
                let c = compute_stability_constant(
                    config.family,
                    config.n,
                    config.d,
                    &params,
                    &samples,
                    config.budget,
                )?;
                Ok(StabilityTrialRow {
                    trial: t,
                    seed,
                    statistic: c,
                    min_eig: if c.is_finite() { 1.0 / c } else { 0.0 },
                    max_eig: f64::NAN,
                    stable: c <= instability_threshold,
                })
            }
        }
    })?;

    let failures = rows.iter().filter(|r| !r.stable).count() as u64;
    let n_for_bound = fixed_set.as_ref().map(|s| s.len()).unwrap_or(config.n) as u64;
    let (bound_fine, bound_coarse) = probability_bound(n_for_bound, m, config.r);
    // The fixed-set theorem caps failures at the coarse bound; the family
    // union bound gives the fine cap.
    let governing = match config.stability_variant {
        StabilityVariant::FixedSet => bound_coarse,
        StabilityVariant::FamilyScan => bound_fine,
    };
    let accept = acceptance_threshold(config.trials as u64, governing);
    Ok(StabilityMcReport {
        variant: config.stability_variant,
        family: config.family,
        n: config.n,
        d: config.d,
        m,
        r: config.r,
        delta: config.delta,
        trials: config.trials,
        failures,
        empirical_failure_rate: failures as f64 / config.trials as f64,
        bound_fine,
        bound_coarse,
        accept_threshold: accept,
        pass: failures <= accept,
        rows,
        k_used,
        k_approximate,
    })
}

#[derive(Debug, Clone)]
pub struct AccuracyTrialRow {
    pub trial: usize,
    pub seed: u64,
    /// ‖u − w_n‖.
    pub error_l2: f64,
    /// ‖u − T_τ(w_n)‖².
    pub error_truncated_sq: f64,
    /// ‖u − w_n‖ > (1+2√2)·E∞ against the estimated E∞.
    pub violates_prob_bound: bool,
}

#[derive(Debug, Clone)]
pub struct AccuracyMcReport {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub m: u64,
    pub r: f64,
    pub tau: f64,
    pub trials: usize,
    pub rows: Vec<AccuracyTrialRow>,
    /// ‖u − u_n‖ from the best n-term oracle (exact L², quadrature).
    pub best_error_l2: f64,
    /// σ_n(u) with its declared tail.
    pub sigma_n: f64,
    /// Estimated family-minimal L∞ best-approximation error (dense-grid
    /// maximum over each candidate's L² projection); an estimate, not a
    /// certified bound.
    pub e_inf_estimated: f64,
    /// Mean over trials of ‖u − T_τ(w_n)‖².
    pub mean_truncated_sq: f64,
    pub stderr_truncated_sq: f64,
    /// (9+4√2)‖u−u_n‖² + 8τ²m^{−r}.
    pub expectation_rhs: f64,
    pub expectation_pass: bool,
    /// Violations of the in-probability bound vs 2m^{−r}, using the
    /// estimated E∞ (labeled estimated: not asserted as a theorem check).
    pub prob_violations: u64,
    pub prob_bound: f64,
    pub prob_accept_threshold: u64,
    pub prob_pass_estimated: bool,
}

impl AccuracyMcReport {
    pub fn csv_body(&self) -> String {
        let mut out = String::from("schema=accuracy-mc-v1\n");
        out.push_str("trial,seed,error_l2,error_truncated_sq,violates_prob_bound\n");
        for row in &self.rows {
            out.push_str(&csv_row(&[
                row.trial.to_string(),
                row.seed.to_string(),
                format_float(row.error_l2),
                format_float(row.error_truncated_sq),
                (row.violates_prob_bound as u8).to_string(),
            ]));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family.to_string(),
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "r": self.r,
            "tau": self.tau,
            "trials": self.trials,
            "best_error_l2": self.best_error_l2,
            "sigma_n": self.sigma_n,
            "e_inf_estimated": self.e_inf_estimated,
            "mean_truncated_sq": self.mean_truncated_sq,
            "stderr_truncated_sq": self.stderr_truncated_sq,
            "expectation_rhs": self.expectation_rhs,
            "expectation_pass": self.expectation_pass,
            "prob_violations": self.prob_violations,
            "prob_bound": self.prob_bound,
            "prob_accept_threshold": self.prob_accept_threshold,
            "prob_pass_estimated": self.prob_pass_estimated,
        })
    }
}

/// The best n-term oracle with the default working superset H_{4n}^d.
pub fn oracle_with_default_superset(
    family: Family,
    n: usize,
    d: usize,
    params: &JacobiParams,
    u: &dyn Fn(&[f64]) -> f64,
    quad_order: usize,
    budget: u64,
) -> Result<BestNTermResult> {
    let superset = hyperbolic_cross(4 * n as u64, d)?;
    best_n_term_oracle(family, n, params, u, &superset, quad_order, budget)
}

/// Estimated family-minimal L∞ best-approximation error: for each family
/// member, the dense-grid maximum of |u − Π_Λ u| over its exact L²
/// projection, minimized over the family. The grid maximum undershoots the
/// true sup and the L² projection is a proxy for the minimax polynomial,
/// so the result is an estimate in both directions.
pub fn estimate_e_inf(
    family: Family,
    n: usize,
    d: usize,
    params: &JacobiParams,
    u: &dyn Fn(&[f64]) -> f64,
    oracle: &BestNTermResult,
    grid_per_coord: usize,
    budget: u64,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for candidate in family_members(family, n, d, budget)? {
        let coeffs = oracle.projection_onto(&candidate)?;
        let gap = dense_grid_max(d, grid_per_coord, &|y| {
            (u(y) - crate::least_squares::eval_expansion(params, &candidate, &coeffs, y)
                .expect("in-range"))
            .abs()
        });
        best = best.min(gap);
    }
    Ok(best)
}

/// Monte Carlo verification of the accuracy theorems for the optimized
/// estimator: the in-expectation bound on ‖u − T_τ(w_n)‖² and the
/// in-probability bound against the (estimated) L∞ best error.
pub fn run_accuracy_mc(config: &ExperimentConfig) -> Result<AccuracyMcReport> {
    let params = config.params()?;
    let u_fn = TestFunction::resolve(&config.function, config.d)?;
    let tau = config.tau.unwrap_or_else(|| u_fn.sup_bound());
    // Theorems replace n by 2n−1 in the sample-size condition.
    let m = config.resolve_m((2 * config.n - 1) as u64)?;
    let u = |y: &[f64]| u_fn.eval(y);

    let oracle = oracle_with_default_superset(
        config.family,
        config.n,
        config.d,
        &params,
        &u,
        config.quad_order,
        config.budget,
    )?;
    let u_n_eval = |y: &[f64]| oracle.evaluate(&params, y).expect("in-range");
    let best_error_l2 =
        l2_norm(&params, config.d, config.quad_order, &|y| u(y) - u_n_eval(y))?;
    let e_inf_estimated = estimate_e_inf(
        config.family,
        config.n,
        config.d,
        &params,
        &u,
        &oracle,
        config.linf_grid,
        config.budget,
    )?;

    let prob_constant = 1.0 + 2.0 * 2f64.sqrt();
    let rows = run_trials(config.trials, |t| {
        let seed = derive_seed(config.master_seed, t as u64);
        let samples = draw_samples(&params, config.d, m as usize, seed)?;
        let b: Vec<f64> = samples.rows().map(|y| u(y)).collect();
        let selection =
            exhaustive_select(config.family, config.n, &params, &samples, &b, config.budget)?;
        let w_eval = |y: &[f64]| selection.fit.evaluate(&params, y).expect("in-range");
        let error_l2 = l2_norm(&params, config.d, config.quad_order, &|y| u(y) - w_eval(y))?;
        let error_truncated_sq = l2_norm(&params, config.d, config.quad_order, &|y| {
            u(y) - truncate(w_eval(y), tau)
        })?
        .powi(2);
        Ok(AccuracyTrialRow {
            trial: t,
            seed,
            error_l2,
            error_truncated_sq,
            violates_prob_bound: error_l2 > prob_constant * e_inf_estimated,
        })
    })?;

    let trials = config.trials as f64;
    let mean_truncated_sq = rows.iter().map(|r| r.error_truncated_sq).sum::<f64>() / trials;
    let variance = rows
        .iter()
        .map(|r| (r.error_truncated_sq - mean_truncated_sq).powi(2))
        .sum::<f64>()
        / (trials - 1.0).max(1.0);
    let stderr_truncated_sq = (variance / trials).sqrt();
    let expectation_rhs = (9.0 + 4.0 * 2f64.sqrt()) * best_error_l2 * best_error_l2
        + 8.0 * tau * tau * (m as f64).powf(-config.r);
    let expectation_pass =
        mean_truncated_sq <= expectation_rhs + NORMAL_SLACK_QUANTILE * stderr_truncated_sq;

    let prob_violations = rows.iter().filter(|r| r.violates_prob_bound).count() as u64;
    let (_, prob_bound) = probability_bound(config.n as u64, m, config.r);
    let prob_accept_threshold = acceptance_threshold(config.trials as u64, prob_bound);

    Ok(AccuracyMcReport {
        family: config.family,
        n: config.n,
        d: config.d,
        m,
        r: config.r,
        tau,
        trials: config.trials,
        rows,
        best_error_l2,
        sigma_n: oracle.sigma_n,
        e_inf_estimated,
        mean_truncated_sq,
        stderr_truncated_sq,
        expectation_rhs,
        expectation_pass,
        prob_violations,
        prob_bound,
        prob_accept_threshold,
        prob_pass_estimated: prob_violations <= prob_accept_threshold,
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m: u64,
    /// σ_n(u) restricted to the working superset (lower part).
    pub sigma_retained: f64,
    /// σ_n(u) with the declared tail.
    pub sigma_n: f64,
    /// ‖u − u_n‖ by quadrature.
    pub error_best: f64,
    /// ‖u − w_n‖ for the exhaustive estimator.
    pub error_exhaustive: f64,
    /// ‖u − greedy estimate‖.
    pub error_greedy: f64,
    /// C_{2n−1} on the trial samples.
    pub stability_constant: f64,
    /// error_exhaustive / sigma_retained (≥ 1 up to numerics).
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub family: Family,
    pub d: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Wall-clock seconds per row; sidecar material, never in the CSV body.
    pub wall_secs: Vec<f64>,
}

impl ConvergenceReport {
    pub fn csv_body(&self) -> String {
        let mut out = String::from("schema=convergence-v1\n");
        out.push_str(
            "n,m,sigma_retained,sigma_n,error_best,error_exhaustive,error_greedy,stability_constant,ratio\n",
        );
        for row in &self.rows {
            out.push_str(&csv_row(&[
                row.n.to_string(),
                row.m.to_string(),
                format_float(row.sigma_retained),
                format_float(row.sigma_n),
                format_float(row.error_best),
                format_float(row.error_exhaustive),
                format_float(row.error_greedy),
                format_float(row.stability_constant),
                format_float(row.ratio),
            ]));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family.to_string(),
            "d": self.d,
            "rows": self.rows.iter().map(|r| serde_json::json!({
                "n": r.n,
                "m": r.m,
                "sigma_retained": r.sigma_retained,
                "sigma_n": r.sigma_n,
                "error_best": r.error_best,
                "error_exhaustive": r.error_exhaustive,
                "error_greedy": r.error_greedy,
                "stability_constant": r.stability_constant,
                "ratio": r.ratio,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Convergence study: per cardinality, the best n-term error, the
/// exhaustive and greedy empirical-optimal errors, and the stability
/// constant, on one seeded draw per n.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let params = config.params()?;
    let u_fn = TestFunction::resolve(&config.function, config.d)?;
    let u = |y: &[f64]| u_fn.eval(y);
    let mut rows = Vec::new();
    let mut wall_secs = Vec::new();
    for n in config.n_min..=config.n {
        let started = std::time::Instant::now();
        let m = match config.m {
            Some(m) => m,
            None => config.resolve_m((2 * n - 1) as u64)?,
        };
        let oracle = oracle_with_default_superset(
            config.family,
            n,
            config.d,
            &params,
            &u,
            config.quad_order,
            config.budget,
        )?;
        let u_n_eval = |y: &[f64]| oracle.evaluate(&params, y).expect("in-range");
        let error_best =
            l2_norm(&params, config.d, config.quad_order, &|y| u(y) - u_n_eval(y))?;

        let seed = derive_seed(config.master_seed, n as u64);
        let samples = draw_samples(&params, config.d, m as usize, seed)?;
        let b: Vec<f64> = samples.rows().map(|y| u(y)).collect();
        let exhaustive = exhaustive_select(config.family, n, &params, &samples, &b, config.budget)?;
        let w_eval = |y: &[f64]| exhaustive.fit.evaluate(&params, y).expect("in-range");
        let error_exhaustive =
            l2_norm(&params, config.d, config.quad_order, &|y| u(y) - w_eval(y))?;
        let greedy = greedy_select(config.family, n, &params, &samples, &b)?;
        let g_eval = |y: &[f64]| greedy.fit.evaluate(&params, y).expect("in-range");
        let error_greedy = l2_norm(&params, config.d, config.quad_order, &|y| u(y) - g_eval(y))?;
        let stability_constant = compute_stability_constant(
            config.family,
            2 * n - 1,
            config.d,
            &params,
            &samples,
            config.budget,
        )?;
        let ratio = error_exhaustive / oracle.sigma_retained.max(1e-300);
        rows.push(ConvergenceRow {
            n,
            m,
            sigma_retained: oracle.sigma_retained,
            sigma_n: oracle.sigma_n,
            error_best,
            error_exhaustive,
            error_greedy,
            stability_constant,
            ratio,
        });
        wall_secs.push(started.elapsed().as_secs_f64());
    }
    Ok(ConvergenceReport { family: config.family, d: config.d, rows, wall_secs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            theta1: 0.0,
            theta2: 0.0,
            family: Family::DownwardClosed,
            n: 2,
            n_min: 1,
            d: 2,
            r: 1.0,
            delta: 0.5,
            tau: None,
            m: Some(120),
            m_condition: None,
            trials: 20,
            master_seed: 7,
            function: TestFunctionSpec::ExponentialSum { scale: 1.0, weights: vec![0.5, 0.5] },
            quad_order: 20,
            budget: 1_000_000,
            stability_variant: StabilityVariant::FamilyScan,
            fixed_set: None,
            linf_grid: 41,
        }
    }

    #[test]
    fn test_function_bounds() {
        let f = TestFunction::resolve(
            &TestFunctionSpec::ExponentialSum { scale: 1.0, weights: vec![0.5, 0.5] },
            2,
        )
        .unwrap();
        assert!((f.eval(&[1.0, 1.0]) - 1f64.exp()).abs() < 1e-14);
        assert!((f.sup_bound() - 1f64.exp()).abs() < 1e-14);

        let r = TestFunction::resolve(&TestFunctionSpec::Named { name: "rational".into() }, 3)
            .unwrap();
        let mass: f64 = default_weights(3).iter().sum();
        assert!((r.sup_bound() - 1.0 / (2.0 - mass)).abs() < 1e-14);

        let bad = TestFunctionSpec::Rational { shift: 1.0, weights: vec![0.8, 0.4] };
        assert!(TestFunction::resolve(&bad, 2).is_err());
    }

    #[test]
    fn polynomial_function_evaluates_monomials() {
        let f = TestFunction::resolve(
            &TestFunctionSpec::Polynomial {
                terms: vec![(vec![0, 0], 1.0), (vec![2, 1], -0.5)],
            },
            2,
        )
        .unwrap();
        assert!((f.eval(&[0.5, -1.0]) - (1.0 + 0.125)).abs() < 1e-15);
        assert!((f.sup_bound() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn stability_mc_singleton_never_fails() {
        // Λ = {0}: G = [1] exactly, every trial stable.
        let mut config = base_config();
        config.stability_variant = StabilityVariant::FixedSet;
        config.fixed_set = Some(vec![vec![0, 0]]);
        config.n = 1;
        let report = run_stability_mc(&config).unwrap();
        assert_eq!(report.failures, 0);
        assert!(report.pass);
        assert!(report.rows.iter().all(|r| (r.statistic - 1.0).abs() < 1e-12));
    }

    #[test]
    fn stability_mc_family_scan_runs() {
        let config = base_config();
        let report = run_stability_mc(&config).unwrap();
        assert_eq!(report.rows.len(), 20);
        assert!(report.rows.iter().all(|r| r.statistic >= 1.0));
        // Statistic is the constant over two candidate sets at n = 2.
        assert!(report.bound_fine <= report.bound_coarse);
    }

    #[test]
    fn stability_csv_deterministic_across_thread_counts() {
        let config = base_config();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let body1 = pool1.install(|| run_stability_mc(&config).unwrap().csv_body());
        let body4 = pool4.install(|| run_stability_mc(&config).unwrap().csv_body());
        assert_eq!(body1, body4);
        assert!(body1.starts_with("schema=stability-mc-v1\n"));
    }

    #[test]
    fn accuracy_mc_representable_target_zero_error() {
        let mut config = base_config();
        config.function =
            TestFunctionSpec::Polynomial { terms: vec![(vec![0, 0], 0.4), (vec![1, 0], 1.0)] };
        config.n = 2;
        config.trials = 10;
        let report = run_accuracy_mc(&config).unwrap();
        assert!(report.best_error_l2 < 1e-10);
        assert!(report.mean_truncated_sq < 1e-18);
        assert_eq!(report.prob_violations, 0);
        assert!(report.expectation_pass);
    }

    #[test]
    fn accuracy_mc_analytic_target_passes_expectation_bound() {
        let mut config = base_config();
        config.n = 3;
        config.trials = 15;
        config.m = Some(500);
        config.tau = Some(2.0);
        let report = run_accuracy_mc(&config).unwrap();
        assert!(report.expectation_pass, "mean {} vs rhs {}", report.mean_truncated_sq, report.expectation_rhs);
        assert!(report.e_inf_estimated > 0.0);
        assert!(report.sigma_n >= report.best_error_l2 - 1e-9);
    }

    #[test]
    fn convergence_rows_and_ratio() {
        let mut config = base_config();
        config.n = 4;
        config.m = Some(200);
        let report = run_convergence_study(&config).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.wall_secs.len(), 4);
        let mut last_sigma = f64::INFINITY;
        for row in &report.rows {
            assert!(row.sigma_n <= last_sigma + 1e-12);
            last_sigma = row.sigma_n;
            assert!(row.ratio >= 1.0 - 1e-9);
            assert!(row.error_best <= row.error_exhaustive + 1e-9);
        }
        let body = report.csv_body();
        // Wall times never reach the deterministic body.
        assert!(!body.contains("wall"));
    }

    #[test]
    fn convergence_polynomial_hits_floor() {
        let mut config = base_config();
        config.function =
            TestFunctionSpec::Polynomial { terms: vec![(vec![0, 0], 0.3), (vec![1, 1], 0.5)] };
        config.n = 4;
        config.m = Some(150);
        let report = run_convergence_study(&config).unwrap();
        let final_row = report.rows.last().unwrap();
        // The minimal downward closure of the support has 4 members.
        assert!(final_row.error_exhaustive <= 1e-9);
        assert!(final_row.error_best <= 1e-9);
        assert!(final_row.error_greedy <= 1e-9);
    }

    #[test]
    fn config_roundtrips_through_json() {
        let config = base_config();
        let json = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn resolve_m_from_condition() {
        let mut config = base_config();
        config.m = None;
        config.m_condition = Some(ConditionKind::Enc2Dc);
        let m = config.resolve_m(3).unwrap();
        let spec = ConditionSpec::new(ConditionKind::Enc2Dc, 3, 2, 1.0, 0.0, 0.0);
        assert_eq!(m, min_sample_size(&spec, None).unwrap());
    }
}
