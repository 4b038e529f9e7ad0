//! Core statistical abstractions: parameter points, datasets, mean functions,
//! and the model interface shared by every test in the crate.

mod embedding;
mod gaussian;

pub use embedding::{AdditiveRelaxMean, ComposedMean, Embedding, FixedBaseMean};
pub use gaussian::GaussianLocationModel;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};

/// Box constraints for a parameter vector. Infinite entries mean "unbounded".
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Bounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::InvalidInput("bounds must satisfy lower <= upper".into()));
        }
        Ok(Bounds { lower, upper })
    }

    /// All coordinates unconstrained.
    pub fn unbounded(dim: usize) -> Self {
        Bounds {
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    /// One interval repeated across all coordinates.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Bounds::new(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Componentwise clamp onto the box.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }

    /// Stack two boxes: `self` for the leading block, `other` after it.
    pub fn stack(&self, other: &Bounds) -> Bounds {
        let mut lower = DVector::zeros(self.dim() + other.dim());
        let mut upper = DVector::zeros(self.dim() + other.dim());
        lower.rows_mut(0, self.dim()).copy_from(&self.lower);
        lower.rows_mut(self.dim(), other.dim()).copy_from(&other.lower);
        upper.rows_mut(0, self.dim()).copy_from(&self.upper);
        upper.rows_mut(self.dim(), other.dim()).copy_from(&other.upper);
        Bounds { lower, upper }
    }
}

/// A point in parameter space, optionally carrying the box it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    values: DVector<f64>,
    bounds: Option<Bounds>,
}

impl ParamPoint {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("parameter point must have dimension >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter point"));
        }
        Ok(ParamPoint { values, bounds: None })
    }

    pub fn with_bounds(values: DVector<f64>, bounds: Bounds) -> Result<Self> {
        if bounds.dim() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                actual: bounds.dim(),
            });
        }
        if !bounds.contains(&values) {
            return Err(Error::InvalidInput("parameter point violates its bounds".into()));
        }
        let mut p = ParamPoint::new(values)?;
        p.bounds = Some(bounds);
        Ok(p)
    }

    pub fn scalar(value: f64) -> Result<Self> {
        ParamPoint::new(DVector::from_element(1, value))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Observed data: an `m x n` matrix whose columns are independent draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: DMatrix<f64>,
}

impl Dataset {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidInput("dataset must be non-empty".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Dataset { samples })
    }

    pub fn single_column(column: DVector<f64>) -> Result<Self> {
        Dataset::new(DMatrix::from_columns(&[column]))
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Per-observation dimension `m`.
    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    /// Number of independent columns `n`.
    pub fn n_columns(&self) -> usize {
        self.samples.ncols()
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.samples.column(k).into_owned()
    }
}

/// A differentiable mean function `theta -> mu(theta)`.
///
/// `jacobian` returns the dense `m x p` derivative; models with very large
/// output dimension should override `jac_t_vec`, which is all that gradient
/// descent needs.
pub trait MeanFn: Send + Sync {
    fn param_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn mean(&self, theta: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64>;

    /// `J(theta)^T v` without materializing `J`.
    fn jac_t_vec(&self, theta: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.jacobian(theta).tr_mul(v)
    }
}

/// The model interface used by the validation tests: enough structure to
/// simulate data, evaluate the log-likelihood, and differentiate it.
pub trait StatisticalModel: Send + Sync {
    fn param_dim(&self) -> usize;
    fn data_dim(&self) -> usize;

    /// Model mean at `theta` (one column's worth).
    fn mean(&self, theta: &DVector<f64>) -> Result<DVector<f64>>;

    /// Draw `n` independent columns at `theta`.
    fn sample(&self, theta: &DVector<f64>, n: usize, rng: &mut dyn RngCore) -> Result<Dataset>;

    /// Total log-likelihood of the dataset: the sum over columns. Divide by
    /// `n_columns` to recover a per-sample average.
    fn log_likelihood(&self, data: &Dataset, theta: &DVector<f64>) -> Result<f64>;

    /// Gradient of [`Self::log_likelihood`] in `theta`.
    fn score(&self, data: &Dataset, theta: &DVector<f64>) -> Result<DVector<f64>>;

    /// Per-observation Fisher information at `theta`. The information of an
    /// `n`-column dataset is `n` times this.
    fn fisher(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>>;
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_point_rejects_empty_and_nonfinite() {
        assert!(ParamPoint::new(DVector::<f64>::zeros(0)).is_err());
        assert!(ParamPoint::new(DVector::from_vec(vec![1.0, f64::NAN])).is_err());
        assert!(ParamPoint::new(DVector::from_vec(vec![1.0, f64::INFINITY])).is_err());
    }

    #[test]
    fn param_point_bounds_enforced() {
        let b = Bounds::uniform(2, 0.0, 1.0).unwrap();
        assert!(ParamPoint::with_bounds(DVector::from_vec(vec![0.5, 0.5]), b.clone()).is_ok());
        assert!(ParamPoint::with_bounds(DVector::from_vec(vec![0.5, 1.5]), b).is_err());
    }

    #[test]
    fn bounds_project_clamps() {
        let b = Bounds::uniform(3, -1.0, 2.0).unwrap();
        let x = DVector::from_vec(vec![-5.0, 0.5, 9.0]);
        let p = b.project(&x);
        assert_eq!(p, DVector::from_vec(vec![-1.0, 0.5, 2.0]));
        assert!(b.contains(&p));
    }

    #[test]
    fn bounds_stack_concatenates() {
        let a = Bounds::uniform(1, 0.0, 1.0).unwrap();
        let b = Bounds::unbounded(2);
        let s = a.stack(&b);
        assert_eq!(s.dim(), 3);
        assert_eq!(s.lower()[0], 0.0);
        assert_eq!(s.lower()[1], f64::NEG_INFINITY);
    }

    #[test]
    fn dataset_rejects_nonfinite() {
        let m = DMatrix::from_vec(2, 1, vec![1.0, f64::NAN]);
        assert!(Dataset::new(m).is_err());
    }

    #[test]
    fn dataset_shape_accessors() {
        let d = Dataset::new(DMatrix::from_vec(3, 2, vec![1., 2., 3., 4., 5., 6.])).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.n_columns(), 2);
        assert_eq!(d.column(1), DVector::from_vec(vec![4., 5., 6.]));
    }
}
