//! Learning relaxation directions from optimizer failures.
//!
//! Runs the restricted optimizer on noise-free data from a grid of nominal
//! parameters, starting from a grid of initial guesses. Whenever descent
//! lands somewhere other than the nominal truth, the whitened score of the
//! relaxed model (restricted to the extra coordinates) is recorded as a
//! column. The first left-singular vector of the collected columns is the
//! direction in which the relaxation buys the most likelihood across the
//! observed failures.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Bounds, Dataset, Embedding, GaussianLocationModel, ParamPoint, StatisticalModel};
use crate::optimize::{minimize_local, neg_loglik_problem, LbfgsConfig};
use crate::sinusoid::{SinusoidModel, THETA_MAX};

/// Relative eigenvalue floor below which Fisher directions are treated as
/// unidentified and dropped from the whitening (pseudo-inverse behavior).
const EIGENVALUE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DiscoveryConfig {
    /// Nominal truths the noise-free datasets are generated from.
    pub nominal_set: Vec<ParamPoint>,
    /// Initial guesses the restricted optimizer descends from.
    pub start_set: Vec<ParamPoint>,
    /// Distance beyond which a descent result counts as a failure.
    pub mismatch_tol: f64,
    pub optim: LbfgsConfig,
}

impl DiscoveryConfig {
    /// Shared frequency grid for nominal truths and starts: `count` cell
    /// midpoints of [0, 4pi]. Midpoints keep the all-zero dataset at
    /// frequency 0 and starts pinned at the upper bound out of the grid.
    ///
    /// The optimizer steps are capped far below the spacing of the profile's
    /// local minima, so each descent settles in the basin it starts in and
    /// the mismatch set is a property of the likelihood surface, not of
    /// line-search luck. The iteration budget covers a capped march across
    /// the whole frequency range.
    pub fn frequency_grid(model: &SinusoidModel, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyCollection);
        }
        let points = (0..count)
            .map(|i| model.point(THETA_MAX * (i as f64 + 0.5) / count as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscoveryConfig {
            nominal_set: points.clone(),
            start_set: points,
            mismatch_tol: 1e-3,
            optim: LbfgsConfig::default()
                .with_step_cap(THETA_MAX / 1000.0)
                .with_max_iter(4000),
        })
    }
}

/// Result of one discovery round.
#[derive(Debug, Clone)]
pub struct RelaxationDirection {
    /// Unit vector in the relaxation's extra coordinates, sign-fixed so the
    /// largest-magnitude entry is positive.
    pub direction: DVector<f64>,
    /// Singular values of the collected column matrix, descending.
    pub singular_values: Vec<f64>,
    /// Number of mismatched (nominal, start) pairs that contributed.
    pub columns_used: usize,
}

/// `I(theta_ref)^(-1/2) s(data, theta_eval)` with the dataset-level Fisher
/// information. Directions with eigenvalues below the floor are dropped.
pub fn whitened_score(
    model: &dyn StatisticalModel,
    theta_ref: &DVector<f64>,
    data: &Dataset,
    theta_eval: &DVector<f64>,
) -> Result<DVector<f64>> {
    let s = model.score(data, theta_eval)?;
    let info = model.fisher(theta_ref)? * data.n_columns() as f64;
    pinv_sqrt_times(info, &s)
}

fn pinv_sqrt_times(info: DMatrix<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = SymmetricEigen::new(info);
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(max_ev > 0.0) {
        return Err(Error::SingularFisher(0.0));
    }
    let floor = EIGENVALUE_FLOOR * max_ev;
    let proj = eig.eigenvectors.tr_mul(s);
    let scaled = DVector::from_fn(proj.nrows(), |i, _| {
        if eig.eigenvalues[i] > floor {
            proj[i] / eig.eigenvalues[i].sqrt()
        } else {
            0.0
        }
    });
    Ok(&eig.eigenvectors * scaled)
}

/// Whitened score restricted to the embedding's extra coordinates: Fisher
/// block at the lifted nominal truth, score block at the lifted descent
/// result. For the additive embedding this reduces to `residual / sigma`.
fn extra_block_whitened_score(
    embedding: &Embedding,
    theta_nominal: &DVector<f64>,
    data: &Dataset,
    theta_hat: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = embedding.base_dim();
    let e = embedding.extra_dims();
    let relaxed = embedding.relaxed();
    let s_full = relaxed.score(data, &embedding.lift(theta_hat))?;
    let info_full = relaxed.fisher(&embedding.lift(theta_nominal))? * data.n_columns() as f64;
    let s_extra = s_full.rows(p, e).into_owned();
    let info_extra = info_full.view((p, p), (e, e)).into_owned();
    pinv_sqrt_times(info_extra, &s_extra)
}

/// One round of direction learning over the Cartesian product of nominal
/// truths and starts. Pairs whose descent fails to reach stationarity are
/// skipped; pairs that recover the nominal truth contribute nothing.
pub fn discover_relaxation_direction(
    embedding: &Embedding,
    cfg: &DiscoveryConfig,
) -> Result<RelaxationDirection> {
    if embedding.extra_dims() == 0 {
        return Err(Error::InvalidInput("embedding has no extra coordinates".into()));
    }
    if cfg.nominal_set.is_empty() || cfg.start_set.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let base = embedding.base();
    for p in cfg.nominal_set.iter().chain(cfg.start_set.iter()) {
        if p.dim() != base.param_dim() {
            return Err(Error::DimensionMismatch { expected: base.param_dim(), actual: p.dim() });
        }
    }

    let pairs: Vec<(usize, usize)> = (0..cfg.nominal_set.len())
        .flat_map(|i| (0..cfg.start_set.len()).map(move |j| (i, j)))
        .collect();
    let columns: Vec<Option<DVector<f64>>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let nominal = &cfg.nominal_set[i];
            let data = Dataset::single_column(base.mean(nominal.values()).ok()?).ok()?;
            let (obj, grad) = neg_loglik_problem(base, &data);
            let fit = minimize_local(obj, grad, &cfg.start_set[j], &cfg.optim).ok()?;
            if fit.gradient_norm > 10.0 * cfg.optim.grad_tol {
                return None;
            }
            if (&fit.minimizer - nominal.values()).norm() <= cfg.mismatch_tol {
                return None;
            }
            let col =
                extra_block_whitened_score(embedding, nominal.values(), &data, &fit.minimizer)
                    .ok()?;
            if col.iter().any(|v| !v.is_finite()) {
                return None;
            }
            Some(col)
        })
        .collect();
    let columns: Vec<DVector<f64>> = columns.into_iter().flatten().collect();
    if columns.is_empty() {
        return Err(Error::EmptyCollection);
    }

    let delta = DMatrix::from_columns(&columns);
    let svd = delta.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors were requested");
    let mut direction = u.column(0).into_owned();
    fix_sign(&mut direction);
    Ok(RelaxationDirection {
        direction,
        singular_values: svd.singular_values.iter().copied().collect(),
        columns_used: columns.len(),
    })
}

/// Flip so the largest-magnitude entry is positive. SVD only determines the
/// singular vector up to sign; this pins one representative.
fn fix_sign(v: &mut DVector<f64>) {
    let mut k = 0;
    for i in 1..v.nrows() {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        *v = -&*v;
    }
}

/// Learn several mutually orthogonal directions. After each round the base
/// model is augmented with the directions found so far (so previously
/// explained failures stop producing mismatches), and the new raw direction
/// is projected onto the orthogonal complement of the span.
pub fn iterate_discovery(
    base: &GaussianLocationModel,
    cfg: &DiscoveryConfig,
    dims: usize,
) -> Result<Vec<RelaxationDirection>> {
    if dims == 0 {
        return Err(Error::InvalidInput("dims must be positive".into()));
    }
    let ambient = Embedding::additive(base.clone())?;
    let mut found: Vec<RelaxationDirection> = Vec::new();
    for _ in 0..dims {
        let round = if found.is_empty() {
            discover_relaxation_direction(&ambient, cfg)?
        } else {
            let dirs: Vec<DVector<f64>> = found.iter().map(|r| r.direction.clone()).collect();
            let augmented = Embedding::along_directions(&ambient, &dirs)?.relaxed().clone();
            let padded = DiscoveryConfig {
                nominal_set: pad_points(&cfg.nominal_set, found.len())?,
                start_set: pad_points(&cfg.start_set, found.len())?,
                mismatch_tol: cfg.mismatch_tol,
                optim: cfg.optim.clone(),
            };
            discover_relaxation_direction(&Embedding::additive(augmented)?, &padded)?
        };
        let mut v = round.direction.clone();
        for prior in &found {
            let c = v.dot(&prior.direction);
            v -= &prior.direction * c;
        }
        let norm = v.norm();
        if norm < 1e-8 {
            return Err(Error::InvalidInput(
                "new direction lies in the span of those already found".into(),
            ));
        }
        v /= norm;
        fix_sign(&mut v);
        found.push(RelaxationDirection {
            direction: v,
            singular_values: round.singular_values,
            columns_used: round.columns_used,
        });
    }
    Ok(found)
}

/// Append zero coefficients (and unbounded box entries) for the directions
/// already absorbed into the restricted model.
fn pad_points(points: &[ParamPoint], extra: usize) -> Result<Vec<ParamPoint>> {
    points
        .iter()
        .map(|p| {
            let mut values = DVector::zeros(p.dim() + extra);
            values.rows_mut(0, p.dim()).copy_from(p.values());
            match p.bounds() {
                Some(b) => ParamPoint::with_bounds(values, b.stack(&Bounds::unbounded(extra))),
                None => ParamPoint::new(values),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::sinusoid::RelaxationSpec;
    use approx::assert_relative_eq;

    fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(b) / (a.norm() * b.norm())
    }

    #[test]
    fn additive_embedding_column_is_scaled_residual() {
        let model = SinusoidModel::new(100, 2.0).unwrap();
        let emb = Embedding::additive(model.model().clone()).unwrap();
        let truth = DVector::from_element(1, crate::sinusoid::default_theta_true());
        let hat = DVector::from_element(1, 2.0 * std::f64::consts::PI);
        let data = model.noise_free_data(truth[0]).unwrap();
        let col = extra_block_whitened_score(&emb, &truth, &data, &hat).unwrap();
        let residual =
            (model.model().mean(&truth).unwrap() - model.model().mean(&hat).unwrap()) / 2.0;
        assert_relative_eq!(col, residual, max_relative = 1e-12);
    }

    #[test]
    fn whitened_norm_squared_matches_score_test_quadratic_form() {
        let model = SinusoidModel::standard();
        let relaxed = RelaxationSpec::naive_poly(2).build(&model).unwrap().relaxed().clone();
        let theta = DVector::from_vec(vec![4.0, 0.3, -0.2]);
        let mut rng = RngStream::root(12).rng();
        let data = relaxed.sample(&theta, 1, &mut rng).unwrap();
        let w = whitened_score(&relaxed, &theta, &data, &theta).unwrap();
        let s = relaxed.score(&data, &theta).unwrap();
        let info = relaxed.fisher(&theta).unwrap();
        let quad = s.dot(&info.lu().solve(&s).unwrap());
        assert_relative_eq!(w.norm_squared(), quad, max_relative = 1e-9);
    }

    #[test]
    fn whitening_matches_jacobi_eigen_oracle() {
        let model = SinusoidModel::standard();
        let relaxed = RelaxationSpec::naive_poly(2).build(&model).unwrap().relaxed().clone();
        let theta_ref = DVector::from_vec(vec![5.5, 0.1, 0.05]);
        let theta_eval = DVector::from_vec(vec![5.2, 0.0, 0.1]);
        let mut rng = RngStream::root(13).rng();
        let data = relaxed.sample(&theta_ref, 1, &mut rng).unwrap();
        let w = whitened_score(&relaxed, &theta_ref, &data, &theta_eval).unwrap();

        // independent route: cyclic Jacobi eigendecomposition
        let info = relaxed.fisher(&theta_ref).unwrap();
        let n = info.nrows();
        let mut a = info.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let rot = {
                        let mut r = DMatrix::<f64>::identity(n, n);
                        r[(p, p)] = c;
                        r[(q, q)] = c;
                        r[(p, q)] = s;
                        r[(q, p)] = -s;
                        r
                    };
                    a = rot.transpose() * a * &rot;
                    v *= rot;
                }
            }
        }
        let s_vec = relaxed.score(&data, &theta_eval).unwrap();
        let proj = v.tr_mul(&s_vec);
        let scaled = DVector::from_fn(n, |i, _| proj[i] / a[(i, i)].sqrt());
        let oracle = &v * scaled;
        assert_relative_eq!(w, oracle, epsilon = 1e-10);
    }

    #[test]
    fn single_mismatch_pair_gives_rank_one_direction() {
        let model = SinusoidModel::standard();
        let emb = Embedding::additive(model.model().clone()).unwrap();
        let truth = crate::sinusoid::default_theta_true();
        // start exactly on the spurious optimum so descent stays put and the
        // pair mismatches no matter how bold the line search is
        let data = model.noise_free_data(truth).unwrap();
        let spur = model
            .enumerate_local_minima(&data, 4001, 1e-4)
            .unwrap()
            .into_iter()
            .find(|p| (p.values()[0] - truth).abs() > 0.1)
            .unwrap();
        let cfg = DiscoveryConfig {
            nominal_set: vec![model.point(truth).unwrap()],
            start_set: vec![spur.clone()],
            mismatch_tol: 1e-3,
            optim: LbfgsConfig::default(),
        };
        let found = discover_relaxation_direction(&emb, &cfg).unwrap();
        assert_eq!(found.columns_used, 1);
        assert_relative_eq!(found.direction.norm(), 1.0, max_relative = 1e-10);

        // with one column the direction is that column, normalized and sign-fixed
        let (obj, grad) = neg_loglik_problem(emb.base(), &data);
        let fit = minimize_local(obj, grad, &spur, &LbfgsConfig::default()).unwrap();
        let truth_vec = DVector::from_element(1, truth);
        let mut col = extra_block_whitened_score(&emb, &truth_vec, &data, &fit.minimizer).unwrap();
        col /= col.norm();
        fix_sign(&mut col);
        assert_relative_eq!(found.direction, col, epsilon = 1e-9);
    }

    #[test]
    fn consistent_pairs_leave_nothing_to_learn() {
        let model = SinusoidModel::standard();
        let emb = Embedding::additive(model.model().clone()).unwrap();
        let p = model.point(1.0).unwrap();
        let cfg = DiscoveryConfig {
            nominal_set: vec![p.clone()],
            start_set: vec![p],
            mismatch_tol: 1e-3,
            optim: LbfgsConfig::default(),
        };
        assert!(matches!(
            discover_relaxation_direction(&emb, &cfg),
            Err(Error::EmptyCollection)
        ));
    }

    #[test]
    fn grid_discovery_is_deterministic_and_sign_fixed() {
        let model = SinusoidModel::standard();
        let emb = Embedding::additive(model.model().clone()).unwrap();
        let cfg = DiscoveryConfig::frequency_grid(&model, 24).unwrap();
        let a = discover_relaxation_direction(&emb, &cfg).unwrap();
        let b = discover_relaxation_direction(&emb, &cfg).unwrap();
        assert_eq!(a.direction.as_slice(), b.direction.as_slice());
        assert_eq!(a.columns_used, b.columns_used);
        assert!(a.columns_used > 0);
        let mut k = 0;
        for i in 0..a.direction.nrows() {
            if a.direction[i].abs() > a.direction[k].abs() {
                k = i;
            }
        }
        assert!(a.direction[k] > 0.0);
        // descending singular values
        for w in a.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn iterated_directions_are_orthonormal() {
        let model = SinusoidModel::standard();
        let cfg = DiscoveryConfig::frequency_grid(&model, 24).unwrap();
        let dirs = iterate_discovery(model.model(), &cfg, 2).unwrap();
        assert_eq!(dirs.len(), 2);
        assert_relative_eq!(dirs[0].direction.norm(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(dirs[1].direction.norm(), 1.0, max_relative = 1e-10);
        assert!(dirs[0].direction.dot(&dirs[1].direction).abs() < 1e-10);
        assert!(dirs[1].columns_used > 0);
        // the second round genuinely differs from a re-run of the first
        assert!(cosine(&dirs[0].direction, &dirs[1].direction).abs() < 0.5);
    }
}
