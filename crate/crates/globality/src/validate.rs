//! Tests for whether a stationary point is consistent with the global
//! maximum-likelihood estimate.
//!
//! All of them compare the observed fit against the model's own predictions
//! at `theta_hat`. The two-sided and one-sided tests standardize the observed
//! log-likelihood by parametric-bootstrap moments; the score test checks
//! first-order consistency; the gap test measures how much a relaxed
//! embedding improves on the restricted optimum, calibrated by bootstrap.

use nalgebra::{DVector, SymmetricEigen};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{Dataset, Embedding, ParamPoint, StatisticalModel};
use crate::optimize::{minimize_local, neg_loglik_problem, restricted_relaxed_minimize, LbfgsConfig};
use crate::rng::RngStream;

/// Parametric-bootstrap summary of the log-likelihood at a fitted point.
#[derive(Debug, Clone)]
pub struct BootstrapMoments {
    pub mean: f64,
    /// Unbiased variance of the replicate values.
    pub variance: f64,
    pub replicates: usize,
    /// Fingerprint of the random stream that generated the replicates.
    pub seed: u64,
    values: Vec<f64>,
}

impl BootstrapMoments {
    /// Summarize raw replicate values (kept for empirical thresholds).
    pub fn from_values(values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("need at least 2 bootstrap replicates".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bootstrap replicate"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(BootstrapMoments { mean, variance, replicates: values.len(), seed, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    fn check_spread(&self) -> Result<f64> {
        let sd = self.sd();
        if sd <= 1e-12 * self.mean.abs().max(1.0) {
            return Err(Error::DegenerateVariance);
        }
        Ok(sd)
    }
}

/// Simulate `replicates` datasets at `theta_hat` (each with `n_columns`
/// columns, matching the observed data's shape) and summarize the resulting
/// log-likelihood values.
pub fn bootstrap_moments(
    model: &dyn StatisticalModel,
    theta_hat: &DVector<f64>,
    n_columns: usize,
    replicates: usize,
    stream: RngStream,
) -> Result<BootstrapMoments> {
    if replicates < 2 {
        return Err(Error::InvalidInput("need at least 2 bootstrap replicates".into()));
    }
    let values: Result<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.child(b as u64).rng();
            let data = model.sample(theta_hat, n_columns, &mut rng)?;
            model.log_likelihood(&data, theta_hat)
        })
        .collect();
    BootstrapMoments::from_values(values?, stream.fingerprint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Rao,
    TwoSided,
    OneSided,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    AcceptNull,
    RejectNull,
}

/// How rejection thresholds are obtained: large-sample reference
/// distributions, or quantiles of the bootstrap replicates themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    #[default]
    Asymptotic,
    Empirical,
}

#[derive(Debug, Clone)]
pub struct TestReport {
    pub kind: TestKind,
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub decision: Decision,
    /// Bootstrap moments the statistic was standardized with, when any.
    pub moments: Option<BootstrapMoments>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

// statrs falls back to a coarse generic inversion for the chi-squared
// quantile (~1e-5 absolute error), so refine with Newton steps on its
// accurate cdf/pdf instead. Wilson-Hilferty gives the starting point.
fn chi_squared_quantile(df: f64, p: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("valid degrees of freedom");
    let a = 2.0 / (9.0 * df);
    let mut x = df * (1.0 - a + normal_quantile(p) * a.sqrt()).powi(3);
    if !x.is_finite() || x <= 0.0 {
        x = df;
    }
    for _ in 0..60 {
        let density = dist.pdf(x);
        if density <= 0.0 {
            break;
        }
        let mut next = x - (dist.cdf(x) - p) / density;
        if next <= 0.0 {
            next = x / 2.0;
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Type-7 (linear-interpolation) sample quantile.
pub(crate) fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Two-sided consistency test: `(ll_obs - mean)^2 / variance` against a
/// chi-square(1) upper quantile. Rejects for surprises in either direction.
pub fn two_sided_test(ell_obs: f64, moments: &BootstrapMoments, alpha: f64) -> Result<TestReport> {
    two_sided_test_with(ell_obs, moments, alpha, ThresholdRule::Asymptotic)
}

pub fn two_sided_test_with(
    ell_obs: f64,
    moments: &BootstrapMoments,
    alpha: f64,
    rule: ThresholdRule,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let sd = moments.check_spread()?;
    let z = (ell_obs - moments.mean) / sd;
    let statistic = z * z;
    let threshold = match rule {
        ThresholdRule::Asymptotic => chi_squared_quantile(1.0, 1.0 - alpha),
        ThresholdRule::Empirical => {
            let stats: Vec<f64> = moments
                .values
                .iter()
                .map(|v| {
                    let z = (v - moments.mean) / sd;
                    z * z
                })
                .collect();
            empirical_quantile(&stats, 1.0 - alpha)
        }
    };
    let decision = if statistic > threshold { Decision::RejectNull } else { Decision::AcceptNull };
    Ok(TestReport {
        kind: TestKind::TwoSided,
        statistic,
        threshold,
        alpha,
        decision,
        moments: Some(moments.clone()),
    })
}

/// One-sided test: `(ll_obs - mean) / sd` against a lower normal quantile.
/// Only deficits reject; for location-family models the fitted point can only
/// overshoot the truth's expected log-likelihood, so all the evidence against
/// global optimality sits in the lower tail.
pub fn one_sided_test(ell_obs: f64, moments: &BootstrapMoments, alpha: f64) -> Result<TestReport> {
    one_sided_test_with(ell_obs, moments, alpha, ThresholdRule::Asymptotic)
}

pub fn one_sided_test_with(
    ell_obs: f64,
    moments: &BootstrapMoments,
    alpha: f64,
    rule: ThresholdRule,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let sd = moments.check_spread()?;
    let statistic = (ell_obs - moments.mean) / sd;
    let threshold = match rule {
        ThresholdRule::Asymptotic => normal_quantile(alpha),
        ThresholdRule::Empirical => {
            let stats: Vec<f64> = moments.values.iter().map(|v| (v - moments.mean) / sd).collect();
            empirical_quantile(&stats, alpha)
        }
    };
    let decision = if statistic < threshold { Decision::RejectNull } else { Decision::AcceptNull };
    Ok(TestReport {
        kind: TestKind::OneSided,
        statistic,
        threshold,
        alpha,
        decision,
        moments: Some(moments.clone()),
    })
}

/// Score test: `s^T I^-1 s / p` at `theta_hat`, with the dataset's Fisher
/// information (`n` times the per-observation matrix), against a
/// chi-square(p)/p upper quantile.
pub fn rao_score_test(
    model: &dyn StatisticalModel,
    data: &Dataset,
    theta_hat: &DVector<f64>,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let p = model.param_dim();
    let s = model.score(data, theta_hat)?;
    let info = model.fisher(theta_hat)? * data.n_columns() as f64;
    let eig = SymmetricEigen::new(info);
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let min_ev = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(max_ev > 0.0) || min_ev <= 1e-12 * max_ev {
        return Err(Error::SingularFisher(min_ev / max_ev.max(f64::MIN_POSITIVE)));
    }
    // I^-1 s through the eigendecomposition
    let proj = eig.eigenvectors.tr_mul(&s);
    let scaled = DVector::from_fn(p, |i, _| proj[i] / eig.eigenvalues[i]);
    let inv_s = &eig.eigenvectors * scaled;
    let statistic = s.dot(&inv_s) / p as f64;
    let threshold = chi_squared_quantile(p as f64, 1.0 - alpha) / p as f64;
    let decision = if statistic > threshold { Decision::RejectNull } else { Decision::AcceptNull };
    Ok(TestReport { kind: TestKind::Rao, statistic, threshold, alpha, decision, moments: None })
}

/// Everything the gap test needs beyond the data and the fitted point.
#[derive(Debug, Clone)]
pub struct GapTestConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub optim: LbfgsConfig,
    pub rule: ThresholdRule,
    pub stream: RngStream,
}

impl GapTestConfig {
    pub fn new(replicates: usize, alpha: f64, stream: RngStream) -> Self {
        GapTestConfig {
            replicates,
            alpha,
            optim: LbfgsConfig::default(),
            rule: ThresholdRule::Asymptotic,
            stream,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GapTestOutput {
    pub report: TestReport,
    /// Relaxation improvement on the observed data.
    pub observed_gap: f64,
    /// Bootstrap replicates whose inner optimizations failed (at most 10%).
    pub dropped_replicates: usize,
}

/// Gap test: how much does the relaxed embedding improve on `theta_hat`,
/// compared with what it gains on data that actually comes from `theta_hat`?
///
/// Each bootstrap replicate re-localizes the restricted optimum by descending
/// from `theta_hat` on the replicate data before relaxing; skipping that step
/// biases the reference gaps downward and can even make them negative.
pub fn gap_test(
    embedding: &Embedding,
    data: &Dataset,
    theta_hat: &ParamPoint,
    replicates: usize,
    alpha: f64,
    stream: RngStream,
) -> Result<GapTestOutput> {
    gap_test_with(embedding, data, theta_hat, &GapTestConfig::new(replicates, alpha, stream))
}

pub fn gap_test_with(
    embedding: &Embedding,
    data: &Dataset,
    theta_hat: &ParamPoint,
    cfg: &GapTestConfig,
) -> Result<GapTestOutput> {
    check_alpha(cfg.alpha)?;
    if cfg.replicates < 2 {
        return Err(Error::InvalidInput("need at least 2 bootstrap replicates".into()));
    }
    let observed = restricted_relaxed_minimize(embedding, data, theta_hat, &cfg.optim)?;
    let n = data.n_columns();

    let gaps: Vec<Option<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = cfg.stream.child(b as u64).rng();
            let replicate = match embedding.base().sample(theta_hat.values(), n, &mut rng) {
                Ok(d) => d,
                Err(_) => return None,
            };
            // re-localize the restricted optimum on the replicate data
            let (obj, grad) = neg_loglik_problem(embedding.base(), &replicate);
            let refit = match minimize_local(obj, grad, theta_hat, &cfg.optim) {
                Ok(r) => r,
                Err(_) => return None,
            };
            let refit_point = match theta_hat.bounds() {
                Some(b) => ParamPoint::with_bounds(refit.minimizer, b.clone()),
                None => ParamPoint::new(refit.minimizer),
            };
            let refit_point = match refit_point {
                Ok(p) => p,
                Err(_) => return None,
            };
            restricted_relaxed_minimize(embedding, &replicate, &refit_point, &cfg.optim)
                .ok()
                .map(|fit| fit.gap)
        })
        .collect();

    let total = gaps.len();
    let kept: Vec<f64> = gaps.into_iter().flatten().collect();
    let dropped = total - kept.len();
    if dropped * 10 > total {
        return Err(Error::TooManyDropped { dropped, total });
    }
    let moments = BootstrapMoments::from_values(kept, cfg.stream.fingerprint())?;
    let sd = moments.check_spread()?;
    let statistic = (observed.gap - moments.mean) / sd;
    let threshold = match cfg.rule {
        ThresholdRule::Asymptotic => normal_quantile(1.0 - cfg.alpha),
        ThresholdRule::Empirical => {
            let stats: Vec<f64> =
                moments.values.iter().map(|v| (v - moments.mean) / sd).collect();
            empirical_quantile(&stats, 1.0 - cfg.alpha)
        }
    };
    let decision = if statistic > threshold { Decision::RejectNull } else { Decision::AcceptNull };
    Ok(GapTestOutput {
        report: TestReport {
            kind: TestKind::Gap,
            statistic,
            threshold,
            alpha: cfg.alpha,
            decision,
            moments: Some(moments),
        },
        observed_gap: observed.gap,
        dropped_replicates: dropped,
    })
}
