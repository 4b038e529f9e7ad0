//! Gaussian location model: data = mean(theta) + isotropic Gaussian noise.
//!
//! The closed-form likelihood moments live here too. For a single column
//! drawn at `theta_true` and evaluated at `theta_eval`, the scaled residual
//! norm is a non-central chi-square with `m` degrees of freedom and
//! non-centrality `lambda = ||mu(theta_true) - mu(theta_eval)||^2 / sigma^2`,
//! which yields the mean `-(m + lambda)/2 - (m/2) ln(2 pi sigma^2)` and the
//! variance `(m + 2 lambda)/2` of the log-likelihood.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{check_dim, Dataset, MeanFn, StatisticalModel};
use crate::error::{Error, Result};

/// Gaussian model with mean `mu(theta)` and covariance `sigma^2 I`.
#[derive(Clone)]
pub struct GaussianLocationModel {
    mean_fn: Arc<dyn MeanFn>,
    sigma: f64,
}

impl GaussianLocationModel {
    pub fn new(mean_fn: Arc<dyn MeanFn>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianLocationModel { mean_fn, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean_fn(&self) -> &Arc<dyn MeanFn> {
        &self.mean_fn
    }

    /// `||mu(theta_true) - mu(theta_eval)||^2 / sigma^2`.
    pub fn noncentrality(&self, theta_true: &DVector<f64>, theta_eval: &DVector<f64>) -> Result<f64> {
        let mu_t = self.mean_checked(theta_true)?;
        let mu_e = self.mean_checked(theta_eval)?;
        Ok((mu_t - mu_e).norm_squared() / (self.sigma * self.sigma))
    }

    /// Expected log-likelihood of one column drawn at `theta_true` and scored
    /// at `theta_eval`.
    pub fn expected_log_likelihood(
        &self,
        theta_true: &DVector<f64>,
        theta_eval: &DVector<f64>,
    ) -> Result<f64> {
        let q = self.mean_fn.out_dim() as f64;
        let lambda = self.noncentrality(theta_true, theta_eval)?;
        Ok(-(q + lambda) / 2.0 - (q / 2.0) * (2.0 * std::f64::consts::PI * self.sigma * self.sigma).ln())
    }

    /// Variance of that same log-likelihood: `(m + 2 lambda) / 2`.
    pub fn log_likelihood_variance(
        &self,
        theta_true: &DVector<f64>,
        theta_eval: &DVector<f64>,
    ) -> Result<f64> {
        let q = self.mean_fn.out_dim() as f64;
        let lambda = self.noncentrality(theta_true, theta_eval)?;
        Ok((q + 2.0 * lambda) / 2.0)
    }

    fn mean_checked(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.mean_fn.param_dim(), theta.len())?;
        let mu = self.mean_fn.mean(theta);
        if mu.len() != self.mean_fn.out_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.mean_fn.out_dim(),
                actual: mu.len(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model mean"));
        }
        Ok(mu)
    }
}

impl StatisticalModel for GaussianLocationModel {
    fn param_dim(&self) -> usize {
        self.mean_fn.param_dim()
    }

    fn data_dim(&self) -> usize {
        self.mean_fn.out_dim()
    }

    fn mean(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.mean_checked(theta)
    }

    fn sample(&self, theta: &DVector<f64>, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidInput("sample count must be >= 1".into()));
        }
        let mu = self.mean_checked(theta)?;
        let m = mu.len();
        let mut out = DMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                let z: f64 = StandardNormal.sample(rng);
                out[(i, j)] = mu[i] + self.sigma * z;
            }
        }
        Dataset::new(out)
    }

    fn log_likelihood(&self, data: &Dataset, theta: &DVector<f64>) -> Result<f64> {
        let mu = self.mean_checked(theta)?;
        check_dim(mu.len(), data.dim())?;
        let m = mu.len() as f64;
        let s2 = self.sigma * self.sigma;
        let log_norm = (m / 2.0) * (2.0 * std::f64::consts::PI * s2).ln();
        let mut total = 0.0;
        for j in 0..data.n_columns() {
            let mut rss = 0.0;
            for i in 0..data.dim() {
                let r = data.samples()[(i, j)] - mu[i];
                rss += r * r;
            }
            total += -rss / (2.0 * s2) - log_norm;
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("log-likelihood"));
        }
        Ok(total)
    }

    fn score(&self, data: &Dataset, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let mu = self.mean_checked(theta)?;
        check_dim(mu.len(), data.dim())?;
        let s2 = self.sigma * self.sigma;
        // residual summed over columns; J^T r / sigma^2
        let mut resid = DVector::zeros(data.dim());
        for j in 0..data.n_columns() {
            for i in 0..data.dim() {
                resid[i] += data.samples()[(i, j)] - mu[i];
            }
        }
        let g = self.mean_fn.jac_t_vec(theta, &resid) / s2;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        Ok(g)
    }

    fn fisher(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.mean_fn.param_dim(), theta.len())?;
        let j = self.mean_fn.jacobian(theta);
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean Jacobian"));
        }
        Ok(j.tr_mul(&j) / (self.sigma * self.sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;

    /// mu(theta) = theta. m = p.
    pub(crate) struct IdentityMean {
        pub dim: usize,
    }

    impl MeanFn for IdentityMean {
        fn param_dim(&self) -> usize {
            self.dim
        }
        fn out_dim(&self) -> usize {
            self.dim
        }
        fn mean(&self, theta: &DVector<f64>) -> DVector<f64> {
            theta.clone()
        }
        fn jacobian(&self, _theta: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::identity(self.dim, self.dim)
        }
    }

    fn scalar_model() -> GaussianLocationModel {
        GaussianLocationModel::new(Arc::new(IdentityMean { dim: 1 }), 1.0).unwrap()
    }

    #[test]
    fn exact_fit_loglik_is_normalizer_only() {
        // 100-dim zero-residual column: log-likelihood is -(m/2) ln(2 pi).
        let model = GaussianLocationModel::new(Arc::new(IdentityMean { dim: 100 }), 1.0).unwrap();
        let theta = DVector::from_element(100, 0.25);
        let data = Dataset::single_column(theta.clone()).unwrap();
        let ll = model.log_likelihood(&data, &theta).unwrap();
        let expect = -50.0 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(ll, expect, max_relative = 1e-14);
        assert_relative_eq!(expect, -91.893_853_320_467_27, max_relative = 1e-12);
    }

    #[test]
    fn unit_residual_scalar_loglik() {
        let model = scalar_model();
        let theta = DVector::from_element(1, 0.0);
        let data = Dataset::single_column(DVector::from_element(1, 1.0)).unwrap();
        let ll = model.log_likelihood(&data, &theta).unwrap();
        assert_relative_eq!(ll, -0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln(), max_relative = 1e-15);
    }

    #[test]
    fn total_convention_sums_columns() {
        let model = scalar_model();
        let theta = DVector::from_element(1, 0.0);
        let two = Dataset::new(DMatrix::from_vec(1, 2, vec![1.0, 1.0])).unwrap();
        let one = Dataset::single_column(DVector::from_element(1, 1.0)).unwrap();
        let l2 = model.log_likelihood(&two, &theta).unwrap();
        let l1 = model.log_likelihood(&one, &theta).unwrap();
        assert_relative_eq!(l2, 2.0 * l1, max_relative = 1e-15);
    }

    #[test]
    fn score_of_linear_mean() {
        // d = theta + 2 with identity mean: score = 2.
        let model = scalar_model();
        let theta = DVector::from_element(1, 3.0);
        let data = Dataset::single_column(DVector::from_element(1, 5.0)).unwrap();
        let s = model.score(&data, &theta).unwrap();
        assert_relative_eq!(s[0], 2.0, max_relative = 1e-15);
    }

    #[test]
    fn fisher_of_identity_mean_is_identity() {
        let model = scalar_model();
        let f = model.fisher(&DVector::from_element(1, 0.7)).unwrap();
        assert_relative_eq!(f[(0, 0)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn expected_loglik_at_truth() {
        // theta_eval = theta_true, m = 100, sigma = 1:
        // -(m/2) - (m/2) ln(2 pi) = -141.8939...
        let model = GaussianLocationModel::new(Arc::new(IdentityMean { dim: 100 }), 1.0).unwrap();
        let theta = DVector::from_element(100, 0.0);
        let m = model.expected_log_likelihood(&theta, &theta).unwrap();
        assert_relative_eq!(m, -50.0 - 50.0 * (2.0 * std::f64::consts::PI).ln(), max_relative = 1e-14);
        assert_relative_eq!(m, -141.893_853_320_467_27, max_relative = 1e-12);
    }

    #[test]
    fn loglik_variance_values() {
        let model100 = GaussianLocationModel::new(Arc::new(IdentityMean { dim: 100 }), 1.0).unwrap();
        let theta = DVector::from_element(100, 0.0);
        assert_relative_eq!(model100.log_likelihood_variance(&theta, &theta).unwrap(), 50.0);
        let model1 = scalar_model();
        let t = DVector::from_element(1, 0.0);
        assert_relative_eq!(model1.log_likelihood_variance(&t, &t).unwrap(), 0.5);
    }

    #[test]
    fn mean_gap_identity_is_half_noncentrality() {
        // m(th_hat, th_hat) - m(th_true, th_hat) = lambda / 2 for any pair.
        let model = GaussianLocationModel::new(Arc::new(IdentityMean { dim: 4 }), 0.7).unwrap();
        let a = DVector::from_vec(vec![0.1, -0.3, 2.0, 0.9]);
        let b = DVector::from_vec(vec![1.1, 0.3, -1.0, 0.4]);
        let lambda = model.noncentrality(&a, &b).unwrap();
        let gap = model.expected_log_likelihood(&b, &b).unwrap()
            - model.expected_log_likelihood(&a, &b).unwrap();
        assert_relative_eq!(gap, lambda / 2.0, max_relative = 1e-12);
        assert!(gap >= 0.0);
    }

    #[test]
    fn sample_moments_match_model() {
        let model = GaussianLocationModel::new(Arc::new(IdentityMean { dim: 5 }), 2.0).unwrap();
        let theta = DVector::from_vec(vec![1.0, -2.0, 0.0, 3.0, 0.5]);
        let mut rng = RngStream::root(31).rng();
        let n = 100_000;
        let data = model.sample(&theta, n, &mut rng).unwrap();
        let nf = n as f64;
        for i in 0..5 {
            let mean: f64 = data.samples().row(i).sum() / nf;
            // 4-sigma band on the sample mean
            assert!((mean - theta[i]).abs() < 4.0 * 2.0 / nf.sqrt(), "coordinate {i}");
            let var: f64 = data.samples().row(i).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (nf - 1.0);
            assert!((var - 4.0).abs() / 4.0 < 0.05, "variance of coordinate {i}: {var}");
        }
    }

    #[test]
    fn monte_carlo_matches_expected_loglik_and_variance() {
        let model = GaussianLocationModel::new(Arc::new(IdentityMean { dim: 20 }), 1.0).unwrap();
        let truth = DVector::from_element(20, 0.0);
        let eval = DVector::from_element(20, 0.3);
        let draws = 10_000;
        let mut rng = RngStream::root(77).rng();
        let mut lls = Vec::with_capacity(draws);
        for _ in 0..draws {
            let d = model.sample(&truth, 1, &mut rng).unwrap();
            lls.push(model.log_likelihood(&d, &eval).unwrap());
        }
        let nf = draws as f64;
        let mc_mean = lls.iter().sum::<f64>() / nf;
        let mc_var = lls.iter().map(|v| (v - mc_mean) * (v - mc_mean)).sum::<f64>() / (nf - 1.0);
        let want_mean = model.expected_log_likelihood(&truth, &eval).unwrap();
        let want_var = model.log_likelihood_variance(&truth, &eval).unwrap();
        let se = (want_var / nf).sqrt();
        assert!((mc_mean - want_mean).abs() < 3.0 * se, "mean {mc_mean} vs {want_mean}");
        assert!((mc_var - want_var).abs() / want_var < 0.1, "var {mc_var} vs {want_var}");
    }

    #[test]
    fn kl_direction_is_nonnegative() {
        // E_true[ll(true)] >= E_true[ll(other)], by Monte Carlo with shared draws.
        let model = GaussianLocationModel::new(Arc::new(IdentityMean { dim: 8 }), 1.3).unwrap();
        let truth = DVector::from_element(8, 0.2);
        let mut rng = RngStream::root(5).rng();
        for k in 0..5 {
            let other = DVector::from_element(8, 0.2 + 0.4 * (k as f64 + 1.0));
            let draws = 4000;
            let mut diffs = Vec::with_capacity(draws);
            for _ in 0..draws {
                let d = model.sample(&truth, 1, &mut rng).unwrap();
                diffs.push(
                    model.log_likelihood(&d, &truth).unwrap() - model.log_likelihood(&d, &other).unwrap(),
                );
            }
            let nf = draws as f64;
            let mean = diffs.iter().sum::<f64>() / nf;
            let var = diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
            let se = (var / nf).sqrt().max(1e-12);
            assert!(mean > -3.0 * se, "KL estimate {mean} below -3 SE");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let model = scalar_model();
        let data = Dataset::single_column(DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(matches!(
            model.log_likelihood(&data, &DVector::from_element(1, 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
