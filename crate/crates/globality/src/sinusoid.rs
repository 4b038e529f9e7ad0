//! Sinusoidal frequency estimation: a one-parameter regression whose negative
//! log-likelihood has many well-separated local minima, which makes it a good
//! stress test for optimality validation.
//!
//! The mean is `sin(theta * x)` on the fixed grid `x_i = i / (m - 1)`,
//! `theta` ranges over `[0, 4 pi]`, and noise is isotropic Gaussian.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Bounds, Dataset, Embedding, GaussianLocationModel, MeanFn, ParamPoint};
use crate::optimize::{minimize_local, neg_loglik_problem, LbfgsConfig};

/// Scan density used by the stationary-point oracle.
pub const DEFAULT_SCAN_RESOLUTION: usize = 4001;
/// Two refined minima closer than this are treated as the same point.
pub const DEFAULT_DEDUP_TOL: f64 = 1e-4;

pub const THETA_MAX: f64 = 4.0 * std::f64::consts::PI;

/// Conventional ground-truth frequency: `3 pi`, which sits on the scan grid.
pub fn default_theta_true() -> f64 {
    3.0 * std::f64::consts::PI
}

/// `sin(theta * x)` on the unit grid.
pub struct SinusoidMean {
    x: DVector<f64>,
}

impl SinusoidMean {
    pub fn new(m: usize) -> Self {
        let denom = (m - 1) as f64;
        SinusoidMean { x: DVector::from_fn(m, |i, _| i as f64 / denom) }
    }

    pub fn grid(&self) -> &DVector<f64> {
        &self.x
    }
}

impl MeanFn for SinusoidMean {
    fn param_dim(&self) -> usize {
        1
    }

    fn out_dim(&self) -> usize {
        self.x.len()
    }

    fn mean(&self, theta: &DVector<f64>) -> DVector<f64> {
        let t = theta[0];
        self.x.map(|xi| (t * xi).sin())
    }

    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let t = theta[0];
        DMatrix::from_fn(self.x.len(), 1, |i, _| self.x[i] * (t * self.x[i]).cos())
    }
}

/// The benchmark model: sinusoid mean, isotropic noise, `theta in [0, 4 pi]`.
#[derive(Clone)]
pub struct SinusoidModel {
    model: GaussianLocationModel,
    bounds: Bounds,
}

impl SinusoidModel {
    pub fn new(m: usize, sigma: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput("need at least two grid points".into()));
        }
        let model = GaussianLocationModel::new(Arc::new(SinusoidMean::new(m)), sigma)?;
        Ok(SinusoidModel { model, bounds: Bounds::uniform(1, 0.0, THETA_MAX)? })
    }

    /// 100 grid points, unit noise.
    pub fn standard() -> Self {
        SinusoidModel::new(100, 1.0).expect("standard parameters are valid")
    }

    pub fn model(&self) -> &GaussianLocationModel {
        &self.model
    }

    pub fn into_model(self) -> GaussianLocationModel {
        self.model
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Wrap a frequency as a bounded parameter point.
    pub fn point(&self, theta: f64) -> Result<ParamPoint> {
        ParamPoint::with_bounds(DVector::from_element(1, theta), self.bounds.clone())
    }

    /// Noise-free dataset: one column equal to the model mean.
    pub fn noise_free_data(&self, theta: f64) -> Result<Dataset> {
        use crate::model::StatisticalModel;
        Dataset::single_column(self.model.mean(&DVector::from_element(1, theta))?)
    }

    /// Dense scan of the negative log-likelihood over `[0, 4 pi]`.
    /// The grid is `theta_i = 4 pi * i / (resolution - 1)`.
    pub fn profile(&self, data: &Dataset, resolution: usize) -> Result<Vec<(f64, f64)>> {
        use crate::model::StatisticalModel;
        if resolution < 3 {
            return Err(Error::InvalidInput("scan resolution must be >= 3".into()));
        }
        let denom = (resolution - 1) as f64;
        let mut out = Vec::with_capacity(resolution);
        for i in 0..resolution {
            let theta = THETA_MAX * (i as f64) / denom;
            let nll = -self.model.log_likelihood(data, &DVector::from_element(1, theta))?;
            out.push((theta, nll));
        }
        Ok(out)
    }

    /// All local minima of the profile, each refined by a bounded descent
    /// within its bracketing scan interval, then deduplicated.
    pub fn enumerate_local_minima(
        &self,
        data: &Dataset,
        resolution: usize,
        dedup_tol: f64,
    ) -> Result<Vec<ParamPoint>> {
        let prof = self.profile(data, resolution)?;
        let n = prof.len();
        let mut candidates: Vec<usize> = Vec::new();
        if prof[0].1 < prof[1].1 {
            candidates.push(0);
        }
        for i in 1..n - 1 {
            if prof[i].1 <= prof[i - 1].1 && prof[i].1 <= prof[i + 1].1 {
                candidates.push(i);
            }
        }
        if prof[n - 1].1 < prof[n - 2].1 {
            candidates.push(n - 1);
        }

        let cfg = LbfgsConfig::default();
        let (obj, grad) = neg_loglik_problem(self.model(), data);
        let mut refined: Vec<(f64, f64)> = Vec::with_capacity(candidates.len());
        for idx in candidates {
            let lo = prof[idx.saturating_sub(1)].0;
            let hi = prof[(idx + 1).min(n - 1)].0;
            let start = ParamPoint::with_bounds(
                DVector::from_element(1, prof[idx].0),
                Bounds::uniform(1, lo, hi)?,
            )?;
            let res = minimize_local(&obj, &grad, &start, &cfg)?;
            refined.push((res.minimizer[0], res.objective));
        }

        refined.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut minima: Vec<(f64, f64)> = Vec::new();
        for (theta, value) in refined {
            match minima.last_mut() {
                Some(last) if (theta - last.0).abs() <= dedup_tol => {
                    if value < last.1 {
                        *last = (theta, value);
                    }
                }
                _ => minima.push((theta, value)),
            }
        }

        minima
            .into_iter()
            .map(|(theta, _)| self.point(theta))
            .collect()
    }

    /// The deepest refined minimum of the scan: the oracle's global optimum.
    pub fn global_minimum(
        &self,
        data: &Dataset,
        resolution: usize,
        dedup_tol: f64,
    ) -> Result<ParamPoint> {
        use crate::model::StatisticalModel;
        let minima = self.enumerate_local_minima(data, resolution, dedup_tol)?;
        let mut best: Option<(f64, ParamPoint)> = None;
        for p in minima {
            let nll = -self.model.log_likelihood(data, p.values())?;
            match &best {
                Some((b, _)) if *b <= nll => {}
                _ => best = Some((nll, p)),
            }
        }
        best.map(|(_, p)| p).ok_or(Error::EmptyCollection)
    }
}

/// Phase-polynomial relaxed mean: `sin(t0 x + t1 x^2 + ... + tk x^(k+1))`.
/// The leading coordinate is the base frequency.
pub struct PolyPhaseMean {
    x: DVector<f64>,
    degree: usize,
}

impl MeanFn for PolyPhaseMean {
    fn param_dim(&self) -> usize {
        self.degree + 1
    }

    fn out_dim(&self) -> usize {
        self.x.len()
    }

    fn mean(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.x.len(), |i, _| {
            let xi = self.x[i];
            // accumulate in ascending order so zero extras reduce exactly
            let mut phase = theta[0] * xi;
            let mut pw = xi;
            for j in 1..=self.degree {
                pw *= xi;
                phase += theta[j] * pw;
            }
            phase.sin()
        })
    }

    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let m = self.x.len();
        let mut j = DMatrix::zeros(m, self.degree + 1);
        for i in 0..m {
            let xi = self.x[i];
            let mut phase = theta[0] * xi;
            let mut pw = xi;
            for k in 1..=self.degree {
                pw *= xi;
                phase += theta[k] * pw;
            }
            let c = phase.cos();
            let mut pw = xi;
            j[(i, 0)] = pw * c;
            for k in 1..=self.degree {
                pw *= xi;
                j[(i, k)] = pw * c;
            }
        }
        j
    }
}

/// The two relaxation families used with the sinusoid benchmark.
pub enum RelaxationSpec {
    /// Extra phase-polynomial coefficients of degree `k`, i.e. `k` extra
    /// coordinates beyond the base frequency.
    NaivePoly { degree: usize },
    /// Additive unit directions in measurement space:
    /// `sin(theta x) + sum_j c_j r_j`.
    LearnedDirections { directions: Vec<DVector<f64>> },
}

impl RelaxationSpec {
    pub fn naive_poly(degree: usize) -> Self {
        RelaxationSpec::NaivePoly { degree }
    }

    pub fn learned(directions: Vec<DVector<f64>>) -> Self {
        RelaxationSpec::LearnedDirections { directions }
    }

    pub fn extra_dims(&self) -> usize {
        match self {
            RelaxationSpec::NaivePoly { degree } => *degree,
            RelaxationSpec::LearnedDirections { directions } => directions.len(),
        }
    }

    /// Build the embedding of the benchmark model this spec describes.
    pub fn build(&self, base: &SinusoidModel) -> Result<Embedding> {
        match self {
            RelaxationSpec::NaivePoly { degree } => {
                if *degree == 0 {
                    return Err(Error::InvalidInput("polynomial relaxation needs degree >= 1".into()));
                }
                let mean_fn = base.model().mean_fn().clone();
                let m = mean_fn.out_dim();
                let relaxed_mean = PolyPhaseMean { x: SinusoidMean::new(m).x, degree: *degree };
                let relaxed = GaussianLocationModel::new(Arc::new(relaxed_mean), base.model().sigma())?;
                Embedding::new(base.model().clone(), relaxed, Bounds::unbounded(*degree))
            }
            RelaxationSpec::LearnedDirections { directions } => {
                let additive = Embedding::additive(base.model().clone())?;
                Embedding::along_directions(&additive, directions)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StatisticalModel;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn fisher_at_zero_is_grid_power_sum() {
        // J = x * cos(0) = x, so I(0) = sum x_i^2 = 328350 / 9801.
        let model = SinusoidModel::standard();
        let f = model.model().fisher(&DVector::from_element(1, 0.0)).unwrap();
        assert_relative_eq!(f[(0, 0)], 328_350.0 / 9_801.0, max_relative = 1e-13);
        assert_relative_eq!(f[(0, 0)], 33.501_683_501_683_5, max_relative = 1e-12);
    }

    #[test]
    fn noncentrality_matches_direct_sum() {
        let model = SinusoidModel::standard();
        let t0 = DVector::from_element(1, default_theta_true());
        let te = DVector::from_element(1, 2.0 * std::f64::consts::PI);
        let lambda = model.model().noncentrality(&t0, &te).unwrap();
        let direct: f64 = (0..100)
            .map(|i| {
                let x = i as f64 / 99.0;
                let d = (t0[0] * x).sin() - (te[0] * x).sin();
                d * d
            })
            .sum();
        assert_relative_eq!(lambda, direct, max_relative = 1e-13);
        let m_exp = model.model().expected_log_likelihood(&t0, &te).unwrap();
        assert_relative_eq!(
            m_exp,
            -(100.0 + direct) / 2.0 - 50.0 * (2.0 * std::f64::consts::PI).ln(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn profile_minimum_sits_at_truth_for_noise_free_data() {
        let model = SinusoidModel::standard();
        let data = model.noise_free_data(default_theta_true()).unwrap();
        let prof = model.profile(&data, DEFAULT_SCAN_RESOLUTION).unwrap();
        let (argmin, min) = prof
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .copied()
            .unwrap();
        assert_relative_eq!(argmin, default_theta_true(), max_relative = 1e-15);
        assert_relative_eq!(min, 50.0 * (2.0 * std::f64::consts::PI).ln(), max_relative = 1e-12);
    }

    #[test]
    fn enumerate_finds_multiple_stationary_points() {
        let model = SinusoidModel::standard();
        let data = model.noise_free_data(default_theta_true()).unwrap();
        let minima = model
            .enumerate_local_minima(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)
            .unwrap();
        assert!(minima.len() >= 2, "found {} minima", minima.len());
        // the truth is among them
        assert!(minima
            .iter()
            .any(|p| (p.values()[0] - default_theta_true()).abs() < 1e-6));
        // deduplicated: pairwise separation above tolerance
        for w in minima.windows(2) {
            assert!(w[1].values()[0] - w[0].values()[0] > DEFAULT_DEDUP_TOL);
        }
    }

    #[test]
    fn enumerate_on_zero_data_includes_origin() {
        let model = SinusoidModel::standard();
        let data = Dataset::single_column(DVector::zeros(100)).unwrap();
        let minima = model
            .enumerate_local_minima(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)
            .unwrap();
        assert!(!minima.is_empty());
        assert!(minima.iter().any(|p| p.values()[0].abs() < 1e-8));
    }

    #[test]
    fn enumerate_is_deterministic() {
        let model = SinusoidModel::standard();
        let mut rng = RngStream::root(404).rng();
        let data = model
            .model()
            .sample(&DVector::from_element(1, default_theta_true()), 1, &mut rng)
            .unwrap();
        let a = model
            .enumerate_local_minima(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)
            .unwrap();
        let b = model
            .enumerate_local_minima(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)
            .unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(b.iter()) {
            assert_eq!(p.values(), q.values());
        }
    }

    #[test]
    fn global_minimum_is_truth_on_noise_free_data() {
        let model = SinusoidModel::standard();
        let data = model.noise_free_data(default_theta_true()).unwrap();
        let g = model
            .global_minimum(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)
            .unwrap();
        assert!((g.values()[0] - default_theta_true()).abs() < 1e-8);
    }

    #[test]
    fn descent_from_truth_recovers_truth() {
        let model = SinusoidModel::standard();
        let data = model.noise_free_data(default_theta_true()).unwrap();
        let (obj, grad) = neg_loglik_problem(model.model(), &data);
        let start = model.point(default_theta_true()).unwrap();
        let res = minimize_local(obj, grad, &start, &LbfgsConfig::default()).unwrap();
        assert!((res.minimizer[0] - default_theta_true()).abs() < 1e-9);
        assert_relative_eq!(res.objective, 50.0 * (2.0 * std::f64::consts::PI).ln(), max_relative = 1e-12);
    }

    #[test]
    fn descent_lands_on_an_oracle_stationary_point() {
        let model = SinusoidModel::standard();
        let data = model.noise_free_data(default_theta_true()).unwrap();
        let minima = model
            .enumerate_local_minima(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)
            .unwrap();
        let (obj, grad) = neg_loglik_problem(model.model(), &data);
        // which basin a far-off start drains into is a line-search detail;
        // what matters is that every endpoint is on the enumerated list
        for s in [0.5, 2.0, 5.0, 11.0] {
            let start = model.point(s).unwrap();
            let res = minimize_local(&obj, &grad, &start, &LbfgsConfig::default()).unwrap();
            let nearest_found = minima
                .iter()
                .map(|p| (p.values()[0] - res.minimizer[0]).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(
                nearest_found < 1e-6,
                "descent endpoint from {s} off the oracle list by {nearest_found}"
            );
        }
        // a start placed on the spurious optimum must stay there
        let spur = minima
            .iter()
            .find(|p| (p.values()[0] - default_theta_true()).abs() > 0.1)
            .unwrap();
        let res = minimize_local(&obj, &grad, spur, &LbfgsConfig::default()).unwrap();
        assert!((res.minimizer[0] - spur.values()[0]).abs() < 1e-9);
    }

    #[test]
    fn relaxations_reduce_exactly_at_zero_extras() {
        let model = SinusoidModel::standard();
        let mut rng = RngStream::root(11).rng();
        let mut dir = DVector::from_fn(100, |i, _| ((i as f64) * 0.3).cos());
        dir /= dir.norm();
        let specs = [
            RelaxationSpec::naive_poly(1),
            RelaxationSpec::naive_poly(3),
            RelaxationSpec::learned(vec![dir]),
        ];
        for spec in &specs {
            let emb = spec.build(&model).unwrap();
            for _ in 0..100 {
                let theta = DVector::from_element(1, rng.gen_range(0.0..THETA_MAX));
                let lifted = emb.lift(&theta);
                let a = emb.relaxed().mean(&lifted).unwrap();
                let b = emb.base().mean(&theta).unwrap();
                assert_eq!((a - b).norm(), 0.0);
            }
        }
    }

    #[test]
    fn poly_jacobian_matches_finite_differences() {
        let mean = PolyPhaseMean { x: SinusoidMean::new(100).x, degree: 3 };
        let theta = DVector::from_vec(vec![7.5, 0.4, -0.2, 0.1]);
        let j = mean.jacobian(&theta);
        let eps = f64::EPSILON.powf(1.0 / 3.0);
        for k in 0..4 {
            let h = eps * theta[k].abs().max(1.0);
            let mut hi = theta.clone();
            hi[k] += h;
            let mut lo = theta.clone();
            lo[k] -= h;
            let fd = (mean.mean(&hi) - mean.mean(&lo)) / (2.0 * h);
            let col = j.column(k).into_owned();
            assert!((col - fd).norm() < 1e-6);
        }
    }
}
