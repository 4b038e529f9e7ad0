//! Bound-constrained local minimization.
//!
//! A projected limited-memory quasi-Newton method with a backtracking
//! (sufficient-decrease) line search. Every accepted step strictly lowers the
//! objective, so the set of points a run can reach from a given start is a
//! monotone-descent region; the gap test relies on that property.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{Bounds, Dataset, Embedding, ParamPoint, StatisticalModel};

#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    /// Number of curvature pairs retained.
    pub memory: usize,
    /// Terminate when the projected gradient's norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant for the backtracking line search.
    pub armijo: f64,
    /// Upper bound on the displacement of any accepted step. `None` lets the
    /// line search roam, which converges fastest but can carry an iterate
    /// clear across a ridge into a neighboring basin when the decrease there
    /// happens to satisfy the acceptance rule. Callers that need the start ->
    /// stationary-point map to follow the surface's basins (direction
    /// learning does) set a cap well below the basin scale.
    pub step_cap: Option<f64>,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig { memory: 10, grad_tol: 1e-8, max_iter: 500, armijo: 1e-4, step_cap: None }
    }
}

impl LbfgsConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Cap the displacement of every accepted step. Must be positive.
    pub fn with_step_cap(mut self, cap: f64) -> Self {
        self.step_cap = Some(cap);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimStatus {
    /// Projected gradient norm reached the tolerance.
    Converged,
    MaxIter,
    /// No acceptable step existed (or the objective went non-finite); the
    /// best point seen so far is returned.
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub minimizer: DVector<f64>,
    pub objective: f64,
    /// Projected gradient norm at the final point.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub status: OptimStatus,
    /// Objective value at the start and after each accepted step;
    /// non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

/// Gradient with descent components blocked by active bounds zeroed out.
/// Zero norm is the first-order optimality condition on a box.
pub fn projected_gradient(x: &DVector<f64>, g: &DVector<f64>, bounds: Option<&Bounds>) -> DVector<f64> {
    match bounds {
        None => g.clone(),
        Some(b) => DVector::from_fn(x.len(), |i, _| {
            let tol = 1e-12 * (1.0 + x[i].abs());
            if x[i] - b.lower()[i] <= tol && g[i] > 0.0 {
                0.0
            } else if b.upper()[i] - x[i] <= tol && g[i] < 0.0 {
                0.0
            } else {
                g[i]
            }
        }),
    }
}

fn project(x: &DVector<f64>, bounds: Option<&Bounds>) -> DVector<f64> {
    match bounds {
        None => x.clone(),
        Some(b) => b.project(x),
    }
}

/// Two-loop recursion: apply the inverse-Hessian approximation to `g`.
fn lbfgs_direction(
    g: &DVector<f64>,
    s_hist: &VecDeque<DVector<f64>>,
    y_hist: &VecDeque<DVector<f64>>,
    rho: &VecDeque<f64>,
) -> DVector<f64> {
    let mut q = g.clone();
    let k = s_hist.len();
    let mut alpha = vec![0.0; k];
    for i in (0..k).rev() {
        alpha[i] = rho[i] * s_hist[i].dot(&q);
        q.axpy(-alpha[i], &y_hist[i], 1.0);
    }
    if k > 0 {
        let gamma = s_hist[k - 1].dot(&y_hist[k - 1]) / y_hist[k - 1].dot(&y_hist[k - 1]);
        q *= gamma;
    }
    for i in 0..k {
        let beta = rho[i] * y_hist[i].dot(&q);
        q.axpy(alpha[i] - beta, &s_hist[i], 1.0);
    }
    -q
}

struct AcceptedStep {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    dx: DVector<f64>,
    clipped: bool,
}

/// Backtrack from a unit step until the decrease is sufficient, then apply
/// the weak Wolfe rule: while the endpoint slope is still steeply negative
/// the step is too short, so lengthen it while the decrease holds. Without
/// the lengthening, one backtracked step leaves a tiny curvature pair that
/// shrinks every later direction and the iteration crawls along curved
/// valleys. A configured step cap bounds the first trial and the
/// lengthening alike.
fn line_search<F, G>(
    objective: &F,
    gradient: &G,
    x: &DVector<f64>,
    fx: f64,
    gx: &DVector<f64>,
    dir: &DVector<f64>,
    bounds: Option<&Bounds>,
    cfg: &LbfgsConfig,
) -> Option<AcceptedStep>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut alpha = match cfg.step_cap {
        Some(cap) => (cap / dir.norm()).min(1.0),
        None => 1.0,
    };
    for _ in 0..64 {
        let raw = x + alpha * dir;
        let x_new = project(&raw, bounds);
        let dx = &x_new - x;
        if dx.norm() == 0.0 {
            return None; // move fully blocked by the box at every scale
        }
        let gdx = gx.dot(&dx);
        if gdx >= 0.0 {
            alpha *= 0.5;
            continue;
        }
        let f_new = objective(&x_new);
        if f_new.is_finite() && f_new <= fx + cfg.armijo * gdx {
            let mut acc = AcceptedStep {
                clipped: (&x_new - &raw).norm() != 0.0,
                g: gradient(&x_new),
                x: x_new,
                f: f_new,
                dx,
            };
            let mut gdx_acc = gdx;
            for _ in 0..24 {
                if acc.g.dot(&acc.dx) >= 0.9 * gdx_acc {
                    break;
                }
                if cfg.step_cap.is_some_and(|cap| 2.0 * alpha * dir.norm() > cap) {
                    break;
                }
                alpha *= 2.0;
                let raw_try = x + alpha * dir;
                let x_try = project(&raw_try, bounds);
                let dx_try = &x_try - x;
                if dx_try.norm() == 0.0 || (&x_try - &acc.x).norm() == 0.0 {
                    break;
                }
                let gdx_try = gx.dot(&dx_try);
                if gdx_try >= 0.0 {
                    break;
                }
                let f_try = objective(&x_try);
                if !(f_try.is_finite() && f_try <= fx + cfg.armijo * gdx_try && f_try < acc.f) {
                    break;
                }
                acc = AcceptedStep {
                    clipped: (&x_try - &raw_try).norm() != 0.0,
                    g: gradient(&x_try),
                    x: x_try,
                    f: f_try,
                    dx: dx_try,
                };
                gdx_acc = gdx_try;
            }
            return Some(acc);
        }
        alpha *= 0.5;
    }
    None
}

/// Minimize `objective` from `start`, staying inside `start`'s bounds.
///
/// The returned trace is strictly decreasing except for its final entry when
/// the run stops without accepting a step.
pub fn minimize_local<F, G>(objective: F, gradient: G, start: &ParamPoint, cfg: &LbfgsConfig) -> Result<OptimizeResult>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let bounds = start.bounds();
    let mut x = project(start.values(), bounds);
    let mut fx = objective(&x);
    if !fx.is_finite() {
        return Err(Error::InvalidInput("objective is not finite at the start point".into()));
    }
    let mut gx = gradient(&x);
    if gx.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: gx.len() });
    }

    let mut s_hist: VecDeque<DVector<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<DVector<f64>> = VecDeque::new();
    let mut rho: VecDeque<f64> = VecDeque::new();
    let mut trace = vec![fx];

    for iter in 0..cfg.max_iter {
        let pg = projected_gradient(&x, &gx, bounds);
        let pg_norm = pg.norm();
        if pg_norm <= cfg.grad_tol || !pg_norm.is_finite() {
            let status = if pg_norm.is_finite() { OptimStatus::Converged } else { OptimStatus::LineSearchFailure };
            return Ok(OptimizeResult {
                minimizer: x,
                objective: fx,
                gradient_norm: pg_norm,
                iterations: iter,
                status,
                objective_trace: trace,
            });
        }

        let mut dir = lbfgs_direction(&gx, &s_hist, &y_hist, &rho);
        // guard against non-descent directions from stale curvature pairs
        if !dir.iter().all(|v| v.is_finite()) || dir.dot(&gx) >= -1e-12 * dir.norm() * gx.norm() {
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            dir = -&gx;
        }

        let mut step = line_search(&objective, &gradient, &x, fx, &gx, &dir, bounds, cfg);
        if step.is_none() && !s_hist.is_empty() {
            // a badly scaled model can make every trial step fail; drop the
            // memory and give plain descent one chance before giving up
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            let descent = -&gx;
            step = line_search(&objective, &gradient, &x, fx, &gx, &descent, bounds, cfg);
        }
        let Some(acc) = step else {
            let pg = projected_gradient(&x, &gx, bounds);
            return Ok(OptimizeResult {
                minimizer: x,
                objective: fx,
                gradient_norm: pg.norm(),
                iterations: iter,
                status: OptimStatus::LineSearchFailure,
                objective_trace: trace,
            });
        };

        let y = &acc.g - &gx;
        let sy = acc.dx.dot(&y);
        // clipped moves mix the box geometry into the pair and corrupt the
        // inverse-Hessian model, so only free steps are remembered
        if !acc.clipped && sy > 1e-10 * acc.dx.norm() * y.norm() {
            if s_hist.len() == cfg.memory {
                s_hist.pop_front();
                y_hist.pop_front();
                rho.pop_front();
            }
            rho.push_back(1.0 / sy);
            s_hist.push_back(acc.dx);
            y_hist.push_back(y);
        }
        x = acc.x;
        fx = acc.f;
        gx = acc.g;
        trace.push(fx);
    }

    let pg = projected_gradient(&x, &gx, bounds);
    Ok(OptimizeResult {
        minimizer: x,
        objective: fx,
        gradient_norm: pg.norm(),
        iterations: cfg.max_iter,
        status: OptimStatus::MaxIter,
        objective_trace: trace,
    })
}

/// Negative log-likelihood objective/gradient pair for a model and dataset.
/// Evaluation failures surface as `+inf` (objective) and zeros (gradient),
/// which the line search treats as unacceptable steps.
pub fn neg_loglik_problem<'a>(
    model: &'a dyn StatisticalModel,
    data: &'a Dataset,
) -> (
    impl Fn(&DVector<f64>) -> f64 + 'a,
    impl Fn(&DVector<f64>) -> DVector<f64> + 'a,
) {
    let obj = move |theta: &DVector<f64>| -> f64 {
        model.log_likelihood(data, theta).map(|v| -v).unwrap_or(f64::INFINITY)
    };
    let grad = move |theta: &DVector<f64>| -> DVector<f64> {
        model
            .score(data, theta)
            .map(|s| -s)
            .unwrap_or_else(|_| DVector::zeros(model.param_dim()))
    };
    (obj, grad)
}

/// Result of relaxing a restricted optimum.
#[derive(Debug, Clone)]
pub struct RelaxedFit {
    pub optimum: OptimizeResult,
    /// Log-likelihood improvement available through the extra coordinates:
    /// `ll(relaxed optimum) - ll(theta_hat)`, never negative.
    pub gap: f64,
    /// Negative log-likelihood at the lifted start `(theta_hat, 0)`.
    pub lift_objective: f64,
}

/// Lift a restricted stationary point into the embedding's relaxed space and
/// descend from there.
///
/// `theta_hat` must already be stationary for the restricted problem: its
/// projected gradient norm may not exceed `10 * cfg.grad_tol`.
pub fn restricted_relaxed_minimize(
    embedding: &Embedding,
    data: &Dataset,
    theta_hat: &ParamPoint,
    cfg: &LbfgsConfig,
) -> Result<RelaxedFit> {
    let (base_obj, base_grad) = neg_loglik_problem(embedding.base(), data);
    let g0 = base_grad(theta_hat.values());
    let pg = projected_gradient(theta_hat.values(), &g0, theta_hat.bounds());
    let limit = 10.0 * cfg.grad_tol;
    if pg.norm() > limit {
        return Err(Error::NotStationary { grad_norm: pg.norm(), limit });
    }
    let f0 = base_obj(theta_hat.values());
    if !f0.is_finite() {
        return Err(Error::NonFinite("restricted objective at theta_hat"));
    }

    let lifted = embedding.lift(theta_hat.values());
    let bounds = embedding.lift_bounds(theta_hat.bounds());
    let start = ParamPoint::with_bounds(lifted, bounds)?;
    let (obj, grad) = neg_loglik_problem(embedding.relaxed(), data);
    let result = minimize_local(obj, grad, &start, cfg)?;

    // The lift leaves the objective unchanged and descent is monotone, so the
    // gap is non-negative up to the lift's exact reduction.
    let lift_objective = result.objective_trace[0];
    let gap = lift_objective - result.objective;
    Ok(RelaxedFit { optimum: result, gap, lift_objective })
}
