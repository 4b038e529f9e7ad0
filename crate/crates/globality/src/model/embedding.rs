//! Reparameterized embeddings: a base model plus extra coordinates that can
//! only improve the fit, with `relaxed_mean(theta, 0) == mean(theta)` exactly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Bounds, GaussianLocationModel, MeanFn, StatisticalModel};
use crate::error::{Error, Result};

/// A base model embedded in a richer one. The relaxed parameter vector is the
/// base vector followed by `extra_dims()` additional coordinates, and setting
/// those to zero reproduces the base mean exactly.
#[derive(Clone)]
pub struct Embedding {
    base: GaussianLocationModel,
    relaxed: GaussianLocationModel,
    extra_bounds: Bounds,
}

impl Embedding {
    pub fn new(
        base: GaussianLocationModel,
        relaxed: GaussianLocationModel,
        extra_bounds: Bounds,
    ) -> Result<Self> {
        if relaxed.param_dim() != base.param_dim() + extra_bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.param_dim() + extra_bounds.dim(),
                actual: relaxed.param_dim(),
            });
        }
        if relaxed.data_dim() != base.data_dim() {
            return Err(Error::DimensionMismatch {
                expected: base.data_dim(),
                actual: relaxed.data_dim(),
            });
        }
        if relaxed.sigma() != base.sigma() {
            return Err(Error::InvalidInput("base and relaxed models must share sigma".into()));
        }
        Ok(Embedding { base, relaxed, extra_bounds })
    }

    /// Measurement-domain relaxation: `mu(theta) + theta_prime` with
    /// `theta_prime` free over the whole data space.
    pub fn additive(base: GaussianLocationModel) -> Result<Self> {
        let extra = base.data_dim();
        let relaxed_mean = AdditiveRelaxMean { base: base.mean_fn().clone() };
        let relaxed = GaussianLocationModel::new(Arc::new(relaxed_mean), base.sigma())?;
        Embedding::new(base, relaxed, Bounds::unbounded(extra))
    }

    /// Relaxation spanned by fixed unit directions in an existing embedding's
    /// extra space: extra coordinates become coefficients on those directions.
    pub fn along_directions(inner: &Embedding, directions: &[DVector<f64>]) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidInput("need at least one direction".into()));
        }
        for d in directions {
            if d.len() != inner.extra_dims() {
                return Err(Error::DimensionMismatch {
                    expected: inner.extra_dims(),
                    actual: d.len(),
                });
            }
            if (d.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidInput("directions must be unit-norm".into()));
            }
        }
        let composed = ComposedMean {
            relaxed: inner.relaxed.mean_fn().clone(),
            base_dim: inner.base_dim(),
            dirs: directions.to_vec(),
        };
        let relaxed = GaussianLocationModel::new(Arc::new(composed), inner.base.sigma())?;
        Embedding::new(inner.base.clone(), relaxed, Bounds::unbounded(directions.len()))
    }

    pub fn base(&self) -> &GaussianLocationModel {
        &self.base
    }

    pub fn relaxed(&self) -> &GaussianLocationModel {
        &self.relaxed
    }

    pub fn base_dim(&self) -> usize {
        self.base.param_dim()
    }

    pub fn extra_dims(&self) -> usize {
        self.extra_bounds.dim()
    }

    /// `[theta; 0]`: the canonical lift of a base point.
    pub fn lift(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.base_dim();
        let mut z = DVector::zeros(p + self.extra_dims());
        z.rows_mut(0, p).copy_from(theta);
        z
    }

    /// Bounds for the lifted vector: the base box stacked on the extra box.
    pub fn lift_bounds(&self, base_bounds: Option<&Bounds>) -> Bounds {
        let b = match base_bounds {
            Some(b) => b.clone(),
            None => Bounds::unbounded(self.base_dim()),
        };
        b.stack(&self.extra_bounds)
    }

    /// Verify `relaxed_mean(theta, 0) == mean(theta)` exactly at each point.
    pub fn check_reduction(&self, thetas: &[DVector<f64>]) -> Result<()> {
        for theta in thetas {
            let lifted = self.lift(theta);
            let a = self.relaxed.mean(&lifted)?;
            let b = self.base.mean(theta)?;
            if a != b {
                return Err(Error::InvalidInput(format!(
                    "embedding does not reduce at theta = {theta:?}: |diff| = {}",
                    (a - b).norm()
                )));
            }
        }
        Ok(())
    }
}

/// Mean `mu(theta) + theta_prime`, the full measurement-domain relaxation.
pub struct AdditiveRelaxMean {
    pub base: Arc<dyn MeanFn>,
}

impl MeanFn for AdditiveRelaxMean {
    fn param_dim(&self) -> usize {
        self.base.param_dim() + self.base.out_dim()
    }

    fn out_dim(&self) -> usize {
        self.base.out_dim()
    }

    fn mean(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.base.param_dim();
        let mut mu = self.base.mean(&theta.rows(0, p).into_owned());
        for i in 0..self.base.out_dim() {
            mu[i] += theta[p + i];
        }
        mu
    }

    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let p = self.base.param_dim();
        let m = self.base.out_dim();
        let jb = self.base.jacobian(&theta.rows(0, p).into_owned());
        let mut j = DMatrix::zeros(m, p + m);
        j.view_mut((0, 0), (m, p)).copy_from(&jb);
        for i in 0..m {
            j[(i, p + i)] = 1.0;
        }
        j
    }

    fn jac_t_vec(&self, theta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let p = self.base.param_dim();
        let m = self.base.out_dim();
        let head = self.base.jac_t_vec(&theta.rows(0, p).into_owned(), v);
        let mut out = DVector::zeros(p + m);
        out.rows_mut(0, p).copy_from(&head);
        out.rows_mut(p, m).copy_from(v);
        out
    }
}

/// A relaxed mean with its extra space restricted to the span of fixed
/// directions: parameters are `(theta, c)` and the inner mean is evaluated at
/// `(theta, sum_j c_j r_j)`.
pub struct ComposedMean {
    pub relaxed: Arc<dyn MeanFn>,
    pub base_dim: usize,
    pub dirs: Vec<DVector<f64>>,
}

impl ComposedMean {
    fn inner_point(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.base_dim;
        let inner_extra = self.relaxed.param_dim() - p;
        let mut z = DVector::zeros(self.relaxed.param_dim());
        z.rows_mut(0, p).copy_from(&theta.rows(0, p));
        let mut extra = DVector::zeros(inner_extra);
        for (j, dir) in self.dirs.iter().enumerate() {
            extra.axpy(theta[p + j], dir, 1.0);
        }
        z.rows_mut(p, inner_extra).copy_from(&extra);
        z
    }
}

impl MeanFn for ComposedMean {
    fn param_dim(&self) -> usize {
        self.base_dim + self.dirs.len()
    }

    fn out_dim(&self) -> usize {
        self.relaxed.out_dim()
    }

    fn mean(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.relaxed.mean(&self.inner_point(theta))
    }

    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let z = self.inner_point(theta);
        let jz = self.relaxed.jacobian(&z);
        let m = self.out_dim();
        let p = self.base_dim;
        let inner_extra = self.relaxed.param_dim() - p;
        let mut j = DMatrix::zeros(m, p + self.dirs.len());
        j.view_mut((0, 0), (m, p)).copy_from(&jz.view((0, 0), (m, p)));
        let j_extra = jz.view((0, p), (m, inner_extra));
        for (k, dir) in self.dirs.iter().enumerate() {
            let col = &j_extra * dir;
            j.view_mut((0, p + k), (m, 1)).copy_from(&col);
        }
        j
    }

    fn jac_t_vec(&self, theta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let z = self.inner_point(theta);
        let w = self.relaxed.jac_t_vec(&z, v);
        let p = self.base_dim;
        let inner_extra = self.relaxed.param_dim() - p;
        let w_extra = w.rows(p, inner_extra);
        let mut out = DVector::zeros(p + self.dirs.len());
        out.rows_mut(0, p).copy_from(&w.rows(0, p));
        for (k, dir) in self.dirs.iter().enumerate() {
            out[p + k] = dir.dot(&w_extra.into_owned());
        }
        out
    }
}

/// The relaxed mean with the base block frozen: a model over the extra
/// coordinates alone. Used when only the extra-space geometry matters.
pub struct FixedBaseMean {
    pub relaxed: Arc<dyn MeanFn>,
    pub theta_fix: DVector<f64>,
}

impl FixedBaseMean {
    fn full_point(&self, extra: &DVector<f64>) -> DVector<f64> {
        let p = self.theta_fix.len();
        let mut z = DVector::zeros(self.relaxed.param_dim());
        z.rows_mut(0, p).copy_from(&self.theta_fix);
        z.rows_mut(p, extra.len()).copy_from(extra);
        z
    }
}

impl MeanFn for FixedBaseMean {
    fn param_dim(&self) -> usize {
        self.relaxed.param_dim() - self.theta_fix.len()
    }

    fn out_dim(&self) -> usize {
        self.relaxed.out_dim()
    }

    fn mean(&self, extra: &DVector<f64>) -> DVector<f64> {
        self.relaxed.mean(&self.full_point(extra))
    }

    fn jacobian(&self, extra: &DVector<f64>) -> DMatrix<f64> {
        let p = self.theta_fix.len();
        let full = self.relaxed.jacobian(&self.full_point(extra));
        full.view((0, p), (self.out_dim(), self.param_dim())).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sinusoid::SinusoidModel;
    use approx::assert_relative_eq;

    fn fd_jacobian(f: &dyn MeanFn, theta: &DVector<f64>) -> DMatrix<f64> {
        let eps = f64::EPSILON.powf(1.0 / 3.0);
        let mut j = DMatrix::zeros(f.out_dim(), f.param_dim());
        for k in 0..f.param_dim() {
            let h = eps * theta[k].abs().max(1.0);
            let mut hi = theta.clone();
            hi[k] += h;
            let mut lo = theta.clone();
            lo[k] -= h;
            let col = (f.mean(&hi) - f.mean(&lo)) / (2.0 * h);
            j.view_mut((0, k), (f.out_dim(), 1)).copy_from(&col);
        }
        j
    }

    #[test]
    fn additive_embedding_reduces_exactly() {
        let base = SinusoidModel::standard().into_model();
        let emb = Embedding::additive(base).unwrap();
        let thetas: Vec<DVector<f64>> = (0..100)
            .map(|i| DVector::from_element(1, 4.0 * std::f64::consts::PI * (i as f64) / 99.0))
            .collect();
        emb.check_reduction(&thetas).unwrap();
        // exact, not approximate
        let z = emb.lift(&thetas[37]);
        assert_eq!(emb.relaxed().mean(&z).unwrap(), emb.base().mean(&thetas[37]).unwrap());
    }

    #[test]
    fn additive_jacobian_matches_finite_differences() {
        let base = SinusoidModel::standard().into_model();
        let mean = AdditiveRelaxMean { base: base.mean_fn().clone() };
        let mut theta = DVector::zeros(mean.param_dim());
        theta[0] = 2.3;
        for i in 1..theta.len() {
            theta[i] = 0.01 * (i as f64).sin();
        }
        let j = mean.jacobian(&theta);
        let fd = fd_jacobian(&mean, &theta);
        assert!((&j - &fd).norm() / fd.norm() < 1e-7);
        // jac_t_vec consistent with the dense Jacobian
        let v = DVector::from_fn(mean.out_dim(), |i, _| ((i * 7) % 5) as f64 - 2.0);
        assert_relative_eq!(mean.jac_t_vec(&theta, &v), j.tr_mul(&v), max_relative = 1e-12);
    }

    #[test]
    fn composed_mean_chain_rule() {
        let base = SinusoidModel::standard().into_model();
        let emb = Embedding::additive(base).unwrap();
        let m = emb.base().data_dim();
        let mut d1 = DVector::from_fn(m, |i, _| (i as f64 * 0.37).cos());
        d1 /= d1.norm();
        let mut d2 = DVector::from_fn(m, |i, _| (i as f64 * 0.11).sin() + 0.2);
        // orthogonalize to d1 so both are unit and independent
        let proj = d1.dot(&d2);
        d2 -= proj * &d1;
        d2 /= d2.norm();
        let span = Embedding::along_directions(&emb, &[d1, d2]).unwrap();
        let theta = DVector::from_vec(vec![5.0, 0.4, -0.3]);
        let j = span.relaxed().mean_fn().jacobian(&theta);
        let fd = fd_jacobian(span.relaxed().mean_fn().as_ref(), &theta);
        assert!((&j - &fd).norm() / fd.norm() < 1e-7);
        let v = DVector::from_fn(m, |i, _| 1.0 / (1.0 + i as f64));
        assert_relative_eq!(
            span.relaxed().mean_fn().jac_t_vec(&theta, &v),
            j.tr_mul(&v),
            max_relative = 1e-12
        );
    }

    #[test]
    fn along_directions_requires_unit_norm() {
        let base = SinusoidModel::standard().into_model();
        let emb = Embedding::additive(base).unwrap();
        let bad = DVector::from_element(emb.extra_dims(), 1.0);
        assert!(Embedding::along_directions(&emb, &[bad]).is_err());
    }

    #[test]
    fn fixed_base_freezes_leading_block() {
        let base = SinusoidModel::standard().into_model();
        let emb = Embedding::additive(base).unwrap();
        let theta = DVector::from_element(1, 1.5);
        let fixed = FixedBaseMean {
            relaxed: emb.relaxed().mean_fn().clone(),
            theta_fix: theta.clone(),
        };
        let extra = DVector::from_fn(emb.extra_dims(), |i, _| 0.001 * i as f64);
        let mut lifted = emb.lift(&theta);
        lifted.rows_mut(1, emb.extra_dims()).copy_from(&extra);
        assert_eq!(fixed.mean(&extra), emb.relaxed().mean(&lifted).unwrap());
        // Jacobian of the frozen model is the extra block: identity here.
        let j = fixed.jacobian(&extra);
        assert_relative_eq!(j, DMatrix::identity(100, 100), max_relative = 1e-15);
    }
}
