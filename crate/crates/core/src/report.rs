//! Deterministic report rendering shared by experiments and the CLI.
//!
//! CSV bodies use RFC-4180 rows, '.' decimal separator and 17 significant
//! digits so that identical configurations produce byte-identical bodies.

use statrs::function::beta::beta_reg;

/// Render a float with 17 significant digits, round-trip safe for binary64.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{x:.16e}")
}

/// One CSV row from cells already rendered to strings.
pub fn csv_row(cells: &[String]) -> String {
    let mut row = cells.join(",");
    row.push('\n');
    row
}

/// One-sided binomial tail P(X ≥ k) for X ~ Bin(trials, p), evaluated via
/// the regularized incomplete beta function.
pub fn binomial_upper_tail(trials: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > trials {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    // P(X ≥ k) = I_p(k, n − k + 1).
    beta_reg(k as f64, (trials - k + 1) as f64, p)
}

/// Monte Carlo acceptance verdict at one-sided confidence 99.9%: the
/// observed failure count is rejected only when it is statistically
/// incompatible with the theoretical failure probability.
pub fn one_sided_verdict(trials: u64, failures: u64, bound: f64) -> bool {
    binomial_upper_tail(trials, failures, bound.min(1.0)) >= 1e-3
}

/// Largest failure count still accepted by [`one_sided_verdict`].
pub fn acceptance_threshold(trials: u64, bound: f64) -> u64 {
    let mut k = 0;
    while k < trials && one_sided_verdict(trials, k + 1, bound) {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_digits() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
        let x = 0.1 + 0.2;
        let rendered = format_float(x);
        assert_eq!(rendered.parse::<f64>().unwrap(), x);
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn binomial_tail_small_cases() {
        // P(X ≥ 1) = 1 − (1−p)^n.
        let p = 0.01f64;
        let n = 50u64;
        let exact = 1.0 - (1.0 - p).powi(n as i32);
        assert!((binomial_upper_tail(n, 1, p) - exact).abs() < 1e-12);
        assert_eq!(binomial_upper_tail(n, 0, p), 1.0);
        assert_eq!(binomial_upper_tail(n, 51, p), 0.0);
    }

    #[test]
    fn verdict_monotone_in_failures() {
        let trials = 500u64;
        let bound = 0.01;
        let threshold = acceptance_threshold(trials, bound);
        assert!(one_sided_verdict(trials, threshold, bound));
        assert!(!one_sided_verdict(trials, threshold + 1, bound));
        // The expected count is within the accepted region.
        assert!(threshold as f64 >= trials as f64 * bound);
    }
}
