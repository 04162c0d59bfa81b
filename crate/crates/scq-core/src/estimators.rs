//! Estimators of the maximum expected value of a set of random variables.
//!
//! Given M variables with unknown means, the *single* estimator takes the max
//! of one set of unbiased sample means (positively biased), the *double*
//! estimator selects the argmax on one independent set and evaluates it on
//! another (never positively biased), and the *self-correcting* estimator
//! evaluates a convex combination `b0 = tau*b1 + (1-tau)*btau` at the argmax
//! of `btau`. Its bias always lies between the other two, and moves from the
//! double end toward the single end as `tau` shrinks (`beta = 1/(1-tau)`).
//!
//! A Monte-Carlo harness ([`estimate_bias`]) measures all three biases under
//! a shared seed, with the two base sample sets drawn from disjoint ChaCha
//! streams so their independence holds by construction.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argmax::argmax_tied;
use crate::seeding::stream_rng;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("tau must lie in [0, 1), got {0}")]
    InvalidTau(f64),
    #[error("need at least one random variable")]
    EmptyVariableSet,
    #[error("selector has {selector} entries but evaluator has {evaluator}")]
    LengthMismatch { selector: usize, evaluator: usize },
    #[error("gaussian std must be >= 0, got {0}")]
    NegativeStd(f64),
    #[error("uniform interval inverted: lo {lo} > hi {hi}")]
    InvertedInterval { lo: f64, hi: f64 },
    #[error("samples_per_set must be >= 1")]
    ZeroSamples,
    #[error("n_trials must be >= 2 to report a standard error, got {0}")]
    TooFewTrials(u64),
    #[error("standard deviations must be > 0")]
    NonPositiveStd,
}

/// A scalar reward/value distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Constant { value: f64 },
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        match *self {
            DistributionSpec::Constant { .. } => Ok(()),
            DistributionSpec::Gaussian { std, .. } => {
                if std >= 0.0 {
                    Ok(())
                } else {
                    Err(EstimatorError::NegativeStd(std))
                }
            }
            DistributionSpec::Uniform { lo, hi } => {
                if lo <= hi {
                    Ok(())
                } else {
                    Err(EstimatorError::InvertedInterval { lo, hi })
                }
            }
        }
    }

    pub fn expected_value(&self) -> f64 {
        match *self {
            DistributionSpec::Constant { value } => value,
            DistributionSpec::Gaussian { mean, .. } => mean,
            DistributionSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            DistributionSpec::Constant { value } => value,
            DistributionSpec::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            DistributionSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// The estimator triple `{b1, btau, b0}` with `b0 = tau*b1 + (1-tau)*btau`.
///
/// `b1` and `btau` are independent unbiased estimates of the same M means;
/// `b0` is unbiased by linearity and correlates with `b1` with coefficient
/// `tau`. Constructed rather than built field-by-field so the combination
/// identity holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedEstimates {
    b1: Vec<f64>,
    btau: Vec<f64>,
    b0: Vec<f64>,
    tau: f64,
}

impl CorrelatedEstimates {
    pub fn new(b1: Vec<f64>, btau: Vec<f64>, tau: f64) -> Result<Self, EstimatorError> {
        if b1.is_empty() {
            return Err(EstimatorError::EmptyVariableSet);
        }
        if b1.len() != btau.len() {
            return Err(EstimatorError::LengthMismatch {
                selector: btau.len(),
                evaluator: b1.len(),
            });
        }
        if !(0.0..1.0).contains(&tau) {
            return Err(EstimatorError::InvalidTau(tau));
        }
        let b0 = b1
            .iter()
            .zip(&btau)
            .map(|(&x1, &xt)| tau * x1 + (1.0 - tau) * xt)
            .collect();
        Ok(CorrelatedEstimates { b1, btau, b0, tau })
    }

    pub fn len(&self) -> usize {
        self.b1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b1.is_empty()
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn btau(&self) -> &[f64] {
        &self.btau
    }

    pub fn b0(&self) -> &[f64] {
        &self.b0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Correction strength `beta = 1/(1-tau)`, finite because `tau < 1`.
    pub fn beta(&self) -> f64 {
        1.0 / (1.0 - self.tau)
    }
}

/// Draws the estimator triple for the given variables.
///
/// `b1[i]` and `btau[i]` are sample means of `samples_per_set` draws from
/// `dists[i]`. The two generators must be independent (the harness hands in
/// disjoint streams derived from one seed).
pub fn generate_correlated_sets(
    dists: &[DistributionSpec],
    tau: f64,
    samples_per_set: u32,
    rng_b1: &mut impl Rng,
    rng_btau: &mut impl Rng,
) -> Result<CorrelatedEstimates, EstimatorError> {
    if dists.is_empty() {
        return Err(EstimatorError::EmptyVariableSet);
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(EstimatorError::InvalidTau(tau));
    }
    if samples_per_set == 0 {
        return Err(EstimatorError::ZeroSamples);
    }
    for d in dists {
        d.validate()?;
    }
    fn sample_mean(dist: &DistributionSpec, n: u32, rng: &mut impl Rng) -> f64 {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += dist.sample(rng);
        }
        sum / n as f64
    }
    let b1: Vec<f64> = dists
        .iter()
        .map(|d| sample_mean(d, samples_per_set, rng_b1))
        .collect();
    let btau: Vec<f64> = dists
        .iter()
        .map(|d| sample_mean(d, samples_per_set, rng_btau))
        .collect();
    CorrelatedEstimates::new(b1, btau, tau)
}

/// `max_i values[i]` — the single estimator.
pub fn single_estimate(values: &[f64]) -> Result<f64, EstimatorError> {
    if values.is_empty() {
        return Err(EstimatorError::EmptyVariableSet);
    }
    Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Evaluates `evaluator` at the argmax of `selector` (ties uniform).
pub fn double_estimate(
    selector: &[f64],
    evaluator: &[f64],
    tie_rng: &mut impl Rng,
) -> Result<f64, EstimatorError> {
    if selector.is_empty() {
        return Err(EstimatorError::EmptyVariableSet);
    }
    if selector.len() != evaluator.len() {
        return Err(EstimatorError::LengthMismatch {
            selector: selector.len(),
            evaluator: evaluator.len(),
        });
    }
    Ok(evaluator[argmax_tied(selector, tie_rng)])
}

/// Evaluates `b0` at the argmax of `btau` (ties uniform).
pub fn self_correcting_estimate(corr: &CorrelatedEstimates, tie_rng: &mut impl Rng) -> f64 {
    corr.b0[argmax_tied(&corr.btau, tie_rng)]
}

/// Pearson correlation between `b0[i]` and `b1[i]` implied by the combination:
/// `rho = tau*sigma1 / sqrt(tau^2*sigma1^2 + (1-tau)^2*sigmatau^2)`.
pub fn pearson_rho(tau: f64, sigma1: f64, sigmatau: f64) -> Result<f64, EstimatorError> {
    if !(0.0..1.0).contains(&tau) {
        return Err(EstimatorError::InvalidTau(tau));
    }
    if sigma1 <= 0.0 || sigmatau <= 0.0 {
        return Err(EstimatorError::NonPositiveStd);
    }
    let num = tau * sigma1;
    let den = (tau * tau * sigma1 * sigma1 + (1.0 - tau) * (1.0 - tau) * sigmatau * sigmatau).sqrt();
    Ok(num / den)
}

/// Mean, spread and bias of one estimator over the Monte-Carlo trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub estimator: String,
    pub mean: f64,
    pub stderr: f64,
    pub true_max: f64,
    pub bias: f64,
}

/// Side-by-side bias measurement of the three estimators under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub tau: f64,
    pub samples_per_set: u32,
    pub n_trials: u64,
    pub seed: u64,
    pub single: EstimatorStats,
    pub double: EstimatorStats,
    pub self_correcting: EstimatorStats,
}

impl BiasReport {
    pub const CSV_HEADER: &'static str = "estimator,mean,stderr,true_max,bias";

    pub fn stats(&self) -> [&EstimatorStats; 3] {
        [&self.single, &self.double, &self.self_correcting]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in self.stats() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.estimator, s.mean, s.stderr, s.true_max, s.bias
            ));
        }
        out
    }
}

struct RunningStats {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl RunningStats {
    fn new() -> Self {
        RunningStats { n: 0, sum: 0.0, sumsq: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn stderr(&self) -> f64 {
        // sample std (ddof = 1) over sqrt(n)
        let n = self.n as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    fn finish(self, name: &str, true_max: f64) -> EstimatorStats {
        let mean = self.mean();
        EstimatorStats {
            estimator: name.to_string(),
            mean,
            stderr: self.stderr(),
            true_max,
            bias: mean - true_max,
        }
    }
}

/// Monte-Carlo bias measurement.
///
/// Per trial: draw the triple, take `a* = argmax btau` once (ties uniform),
/// then record `single = max btau`, `double = b1[a*]`, and
/// `self_correcting = b0[a*]`. Bias is reported against the analytic
/// `max_i E[dists[i]]`. Streams: `b1` draws on stream 0, `btau` on stream 1,
/// tie-breaks on stream 2, all derived from `seed`.
pub fn estimate_bias(
    dists: &[DistributionSpec],
    tau: f64,
    samples_per_set: u32,
    n_trials: u64,
    seed: u64,
) -> Result<BiasReport, EstimatorError> {
    if n_trials < 2 {
        return Err(EstimatorError::TooFewTrials(n_trials));
    }
    if dists.is_empty() {
        return Err(EstimatorError::EmptyVariableSet);
    }
    let true_max = dists
        .iter()
        .map(DistributionSpec::expected_value)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut rng_b1 = stream_rng(seed, 0);
    let mut rng_btau = stream_rng(seed, 1);
    let mut rng_tie = stream_rng(seed, 2);

    let mut single = RunningStats::new();
    let mut double = RunningStats::new();
    let mut self_corr = RunningStats::new();

    for _ in 0..n_trials {
        let corr = generate_correlated_sets(dists, tau, samples_per_set, &mut rng_b1, &mut rng_btau)?;
        let a_star = argmax_tied(corr.btau(), &mut rng_tie);
        single.push(corr.btau()[a_star]);
        double.push(corr.b1()[a_star]);
        self_corr.push(corr.b0()[a_star]);
    }

    Ok(BiasReport {
        tau,
        samples_per_set,
        n_trials,
        seed,
        single: single.finish("single", true_max),
        double: double.finish("double", true_max),
        self_correcting: self_corr.finish("self_correcting", true_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussians(n: usize, mean: f64, std: f64) -> Vec<DistributionSpec> {
        vec![DistributionSpec::Gaussian { mean, std }; n]
    }

    #[test]
    fn expected_values() {
        assert_eq!(DistributionSpec::Constant { value: 2.5 }.expected_value(), 2.5);
        assert_eq!(DistributionSpec::Gaussian { mean: -0.1, std: 1.0 }.expected_value(), -0.1);
        assert_eq!(DistributionSpec::Uniform { lo: -12.0, hi: 10.0 }.expected_value(), -1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(DistributionSpec::Gaussian { mean: 0.0, std: -1.0 }.validate().is_err());
        assert!(DistributionSpec::Uniform { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(DistributionSpec::Uniform { lo: 1.0, hi: 1.0 }.validate().is_ok());
    }

    #[test]
    fn generate_rejects_bad_inputs() {
        let mut a = stream_rng(0, 0);
        let mut b = stream_rng(0, 1);
        let g = gaussians(2, 0.0, 1.0);
        assert_eq!(
            generate_correlated_sets(&[], 0.5, 1, &mut a, &mut b).unwrap_err(),
            EstimatorError::EmptyVariableSet
        );
        assert_eq!(
            generate_correlated_sets(&g, 1.0, 1, &mut a, &mut b).unwrap_err(),
            EstimatorError::InvalidTau(1.0)
        );
        assert_eq!(
            generate_correlated_sets(&g, -0.1, 1, &mut a, &mut b).unwrap_err(),
            EstimatorError::InvalidTau(-0.1)
        );
        assert_eq!(
            generate_correlated_sets(&g, 0.5, 0, &mut a, &mut b).unwrap_err(),
            EstimatorError::ZeroSamples
        );
    }

    #[test]
    fn single_element_combination_is_exact() {
        let mut a = stream_rng(3, 0);
        let mut b = stream_rng(3, 1);
        let d = gaussians(1, 0.7, 2.0);
        let corr = generate_correlated_sets(&d, 0.3, 4, &mut a, &mut b).unwrap();
        assert_eq!(corr.b0()[0], 0.3 * corr.b1()[0] + 0.7 * corr.btau()[0]);
    }

    #[test]
    fn tau_zero_collapses_b0_to_btau() {
        let mut a = stream_rng(4, 0);
        let mut b = stream_rng(4, 1);
        let corr = generate_correlated_sets(&gaussians(5, 0.0, 1.0), 0.0, 3, &mut a, &mut b).unwrap();
        assert_eq!(corr.b0(), corr.btau());
    }

    #[test]
    fn single_estimate_basics() {
        assert_eq!(single_estimate(&[0.0]).unwrap(), 0.0);
        assert_eq!(single_estimate(&[-1.0, 2.0, 0.5]).unwrap(), 2.0);
        assert!(single_estimate(&[]).is_err());
    }

    #[test]
    fn double_estimate_basics() {
        let mut rng = stream_rng(5, 0);
        assert_eq!(double_estimate(&[1.0, 0.0], &[5.0, 7.0], &mut rng).unwrap(), 5.0);
        assert!(matches!(
            double_estimate(&[1.0], &[1.0, 2.0], &mut rng),
            Err(EstimatorError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn double_estimate_uniform_over_ties() {
        let mut rng = stream_rng(6, 0);
        let selector = [3.0; 4];
        let evaluator = [0.0, 1.0, 2.0, 3.0];
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            let v = double_estimate(&selector, &evaluator, &mut rng).unwrap();
            counts[v as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn self_correcting_formula_example() {
        let corr = CorrelatedEstimates::new(vec![1.0, 2.0], vec![3.0, 0.0], 0.5).unwrap();
        let mut rng = stream_rng(7, 0);
        // argmax btau = 0; b0[0] = 0.5*1 + 0.5*3 = 2
        assert_eq!(self_correcting_estimate(&corr, &mut rng), 2.0);
        assert_eq!(corr.beta(), 2.0);
    }

    #[test]
    fn tau_zero_self_correcting_equals_single_of_btau() {
        let mut a = stream_rng(8, 0);
        let mut b = stream_rng(8, 1);
        let mut tie = stream_rng(8, 2);
        for _ in 0..200 {
            let corr =
                generate_correlated_sets(&gaussians(6, -0.1, 1.0), 0.0, 1, &mut a, &mut b).unwrap();
            let sc = self_correcting_estimate(&corr, &mut tie);
            assert_eq!(sc, single_estimate(corr.btau()).unwrap());
        }
    }

    #[test]
    fn pearson_rho_values() {
        assert_eq!(pearson_rho(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(pearson_rho(0.999, 1.0, 1.0).unwrap() > 0.99);
        let r = pearson_rho(0.5, 1.0, 1.0).unwrap();
        assert!((r - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(pearson_rho(0.5, 0.0, 1.0).is_err());
        assert!(pearson_rho(1.0, 1.0, 1.0).is_err());
    }

    // Monte-Carlo oracle: empirical correlation of (b0[i], b1[i]) matches the
    // analytic rho = tau*s1/sqrt(tau^2 s1^2 + (1-tau)^2 st^2) with s1 = st.
    #[test]
    fn empirical_pearson_matches_formula() {
        let dists = gaussians(8, 0.0, 1.0);
        let tau = 0.5;
        let trials = 100_000usize;
        let mut rng_b1 = stream_rng(11, 0);
        let mut rng_bt = stream_rng(11, 1);
        let m = dists.len();
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) =
            (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for _ in 0..trials {
            let corr =
                generate_correlated_sets(&dists, tau, 10, &mut rng_b1, &mut rng_bt).unwrap();
            for i in 0..m {
                let (x, y) = (corr.b0()[i], corr.b1()[i]);
                sx[i] += x;
                sy[i] += y;
                sxy[i] += x * y;
                sxx[i] += x * x;
                syy[i] += y * y;
            }
        }
        let n = trials as f64;
        let expected = 1.0 / 2f64.sqrt();
        for i in 0..m {
            let cov = sxy[i] / n - sx[i] / n * (sy[i] / n);
            let vx = sxx[i] / n - (sx[i] / n).powi(2);
            let vy = syy[i] / n - (sy[i] / n).powi(2);
            let r = cov / (vx * vy).sqrt();
            assert!((r - expected).abs() <= 0.01, "index {i}: rho {r} vs {expected}");
        }
    }

    // Monte-Carlo oracle for the positive bias of the single estimator.
    #[test]
    fn single_estimator_overestimates_equal_means() {
        let report = estimate_bias(&gaussians(8, -0.1, 1.0), 0.5, 1, 100_000, 13).unwrap();
        assert!(report.single.mean >= -0.1 + 3.0 * report.single.stderr);
    }

    // Monte-Carlo oracle for the double estimator never overestimating.
    #[test]
    fn double_estimator_does_not_overestimate() {
        let report = estimate_bias(&gaussians(8, -0.1, 1.0), 0.5, 1, 100_000, 13).unwrap();
        assert!(report.double.mean <= -0.1 + 3.0 * report.double.stderr);
    }

    // Monte-Carlo oracle for the inequality chain: the self-correcting mean
    // lies between the double and single means.
    #[test]
    fn self_correcting_mean_between_double_and_single() {
        let report = estimate_bias(&gaussians(8, -0.1, 1.0), 0.5, 1, 100_000, 13).unwrap();
        let slack = 3.0 * combined_stderr(&report.double, &report.self_correcting);
        assert!(report.double.mean <= report.self_correcting.mean + slack);
        let slack = 3.0 * combined_stderr(&report.self_correcting, &report.single);
        assert!(report.self_correcting.mean <= report.single.mean + slack);
    }

    fn combined_stderr(a: &EstimatorStats, b: &EstimatorStats) -> f64 {
        (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
    }

    // Ordering with unequal means, where the double estimator is strictly
    // below the true max and the chain separations are visible.
    #[test]
    fn lemma_ordering_unequal_means() {
        let mut dists = gaussians(7, 0.0, 1.0);
        dists.push(DistributionSpec::Gaussian { mean: 0.3, std: 1.0 });
        for tau in [0.25, 0.5, 0.75] {
            let r = estimate_bias(&dists, tau, 1, 100_000, 17).unwrap();
            assert_eq!(r.single.true_max, 0.3);
            let s1 = 3.0 * combined_stderr(&r.double, &r.self_correcting);
            let s2 = 3.0 * combined_stderr(&r.self_correcting, &r.single);
            assert!(r.double.mean <= r.self_correcting.mean + s1, "tau {tau}");
            assert!(r.self_correcting.mean <= r.single.mean + s2, "tau {tau}");
            assert!(r.double.bias < 0.0, "tau {tau}: double bias {}", r.double.bias);
            assert!(r.single.bias > 0.0, "tau {tau}: single bias {}", r.single.bias);
        }
    }

    #[test]
    fn constant_distributions_have_zero_bias() {
        let dists = vec![
            DistributionSpec::Constant { value: 1.0 },
            DistributionSpec::Constant { value: -2.0 },
        ];
        let r = estimate_bias(&dists, 0.5, 1, 1000, 1).unwrap();
        assert_eq!(r.single.bias, 0.0);
        assert_eq!(r.double.bias, 0.0);
        assert_eq!(r.self_correcting.bias, 0.0);
    }

    #[test]
    fn true_max_is_analytic_max_of_means() {
        let dists = vec![
            DistributionSpec::Gaussian { mean: 0.0, std: 1.0 },
            DistributionSpec::Gaussian { mean: 0.5, std: 1.0 },
        ];
        let r = estimate_bias(&dists, 0.5, 1, 100, 2).unwrap();
        assert_eq!(r.single.true_max, 0.5);
    }

    // Components stay unbiased: each set's per-index mean tracks the true
    // mean within 4 standard errors.
    #[test]
    fn component_sets_are_unbiased() {
        let dists = gaussians(4, -0.1, 1.0);
        let trials = 100_000;
        let mut rng_b1 = stream_rng(19, 0);
        let mut rng_bt = stream_rng(19, 1);
        let m = dists.len();
        let mut acc = vec![[0.0f64; 3]; m];
        for _ in 0..trials {
            let c = generate_correlated_sets(&dists, 0.5, 1, &mut rng_b1, &mut rng_bt).unwrap();
            for i in 0..m {
                acc[i][0] += c.b1()[i];
                acc[i][1] += c.btau()[i];
                acc[i][2] += c.b0()[i];
            }
        }
        // per-trial std is 1 for b1/btau and sqrt(0.5) for b0; use 1 for all
        let stderr = 1.0 / (trials as f64).sqrt();
        for row in &acc {
            for &s in row {
                assert!((s / trials as f64 + 0.1).abs() <= 4.0 * stderr);
            }
        }
    }

    #[test]
    fn estimate_bias_is_deterministic() {
        let dists = gaussians(8, -0.1, 1.0);
        let a = estimate_bias(&dists, 0.75, 1, 5000, 99).unwrap();
        let b = estimate_bias(&dists, 0.75, 1, 5000, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn csv_shape() {
        let r = estimate_bias(&gaussians(2, 0.0, 1.0), 0.5, 1, 100, 3).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], BiasReport::CSV_HEADER);
        assert!(lines[1].starts_with("single,"));
        assert!(lines[2].starts_with("double,"));
        assert!(lines[3].starts_with("self_correcting,"));
    }

    proptest! {
        // Combination identity: b0 - (tau*b1 + (1-tau)*btau) is exactly zero.
        #[test]
        fn combination_identity(seed in 0u64..1000, tau in 0.0f64..0.999, m in 1usize..9) {
            let mut a = stream_rng(seed, 0);
            let mut b = stream_rng(seed, 1);
            let dists = vec![DistributionSpec::Gaussian { mean: 0.3, std: 2.0 }; m];
            let corr = generate_correlated_sets(&dists, tau, 2, &mut a, &mut b).unwrap();
            for i in 0..m {
                let recon = tau * corr.b1()[i] + (1.0 - tau) * corr.btau()[i];
                prop_assert_eq!(corr.b0()[i], recon);
            }
        }

        // The self-correcting value always lies inside [min, max] of the
        // elementwise component interval at the selected index.
        #[test]
        fn sc_value_is_convex_combination(seed in 0u64..1000, tau in 0.0f64..0.999) {
            let mut a = stream_rng(seed, 0);
            let mut b = stream_rng(seed, 1);
            let mut tie = stream_rng(seed, 2);
            let dists = vec![DistributionSpec::Uniform { lo: -1.0, hi: 1.0 }; 4];
            let corr = generate_correlated_sets(&dists, tau, 1, &mut a, &mut b).unwrap();
            let i = argmax_tied(corr.btau(), &mut tie);
            let (lo, hi) = (corr.b1()[i].min(corr.btau()[i]), corr.b1()[i].max(corr.btau()[i]));
            let sc = corr.b0()[i];
            prop_assert!(sc >= lo - 1e-12 && sc <= hi + 1e-12);
        }
    }
}
