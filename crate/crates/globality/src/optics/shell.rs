//! Locally Strehl-maximal phase screens of a fixed RMS amplitude.
//!
//! When a wavefront estimate stalls, a good place to restart is "the same
//! estimate plus a perturbation that damages the PSF as little as possible".
//! On a sphere of coefficient vectors with RMS `tau`, those benign
//! perturbations are the local maxima of the Strehl ratio; this module finds
//! them by multi-start projected ascent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::zernike::zernike_value;
use super::PupilGrid;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand::Rng;

/// One local maximum of the Strehl ratio on the sphere `|coeffs| = tau`.
#[derive(Debug, Clone)]
pub struct ShellPoint {
    /// Zernike coefficients in waves.
    pub coeffs: DVector<f64>,
    pub strehl: f64,
}

/// Basis matrix: one row per aperture pixel, one column per mode.
fn mode_basis(grid: &PupilGrid, modes: &[usize]) -> DMatrix<f64> {
    let pixels = grid.aperture_pixels();
    DMatrix::from_fn(pixels.len(), modes.len(), |p, k| {
        let (i, j) = pixels[p];
        zernike_value(modes[k], grid.rho()[(i, j)], grid.phi()[(i, j)])
    })
}

/// Strehl ratio and its gradient in coefficient space, from cached basis
/// columns (no transforms involved).
fn strehl_and_gradient(basis: &DMatrix<f64>, coeffs: &DVector<f64>) -> (f64, DVector<f64>) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let pixels = basis.nrows();
    let beta = basis * coeffs * two_pi;
    let mut front = Complex64::new(0.0, 0.0);
    for p in 0..pixels {
        front += Complex64::from_polar(1.0, beta[p]);
    }
    let area_sq = (pixels * pixels) as f64;
    let s = front.norm_sqr() / area_sq;
    // dS/dc_k = -(4 pi / P^2) sum_p Z_pk Im(conj(F) e^(j beta_p))
    let weights = DVector::from_fn(pixels, |p, _| {
        (front.conj() * Complex64::from_polar(1.0, beta[p])).im
    });
    let grad = basis.tr_mul(&weights) * (-2.0 * two_pi / area_sq);
    (s, grad)
}

fn ascend_on_sphere(basis: &DMatrix<f64>, start: DVector<f64>, tau: f64) -> (DVector<f64>, f64) {
    let mut c = start;
    let (mut s, mut g) = strehl_and_gradient(basis, &c);
    let mut step = 0.05 * tau;
    for _ in 0..500 {
        let radial = g.dot(&c) / (tau * tau);
        let tangent = &g - &c * radial;
        let tn = tangent.norm();
        if tn < 1e-12 {
            break;
        }
        let mut improved = false;
        for _ in 0..50 {
            let mut cand = &c + &tangent * (step / tn);
            cand *= tau / cand.norm();
            let (s_new, g_new) = strehl_and_gradient(basis, &cand);
            if s_new > s {
                c = cand;
                s = s_new;
                g = g_new;
                step *= 1.8;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (c, s)
}

/// Find up to `n_points` distinct local Strehl maxima on the RMS-`tau`
/// sphere over the given Noll modes, sorted by Strehl descending. Multi-start
/// ascent from `n_starts` random directions; the result depends only on
/// `(grid, modes, tau, n_points, n_starts, stream)`.
pub fn max_strehl_shell(
    grid: &PupilGrid,
    modes: &[usize],
    tau: f64,
    n_points: usize,
    n_starts: usize,
    stream: RngStream,
) -> Result<Vec<ShellPoint>> {
    if modes.is_empty() {
        return Err(Error::InvalidInput("need at least one mode".into()));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidInput(format!("tau must be finite and >= 0, got {tau}")));
    }
    if n_points == 0 || n_starts == 0 {
        return Err(Error::InvalidInput("need at least one point and one start".into()));
    }
    if tau == 0.0 {
        return Ok(vec![ShellPoint { coeffs: DVector::zeros(modes.len()), strehl: 1.0 }]);
    }

    let basis = mode_basis(grid, modes);
    let mut candidates: Vec<ShellPoint> = (0..n_starts)
        .map(|k| {
            let mut rng = stream.child(k as u64).rng();
            let mut dir = DVector::from_fn(modes.len(), |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let norm = dir.norm();
            if norm == 0.0 {
                dir[0] = 1.0;
            } else {
                dir /= norm;
            }
            let (mut c, _) = ascend_on_sphere(&basis, dir * tau, tau);
            // pin the norm exactly, then re-score the pinned point
            c *= tau / c.norm();
            let (s, _) = strehl_and_gradient(&basis, &c);
            ShellPoint { coeffs: c, strehl: s }
        })
        .collect();

    candidates.sort_by(|a, b| {
        b.strehl.total_cmp(&a.strehl).then_with(|| {
            for (x, y) in a.coeffs.iter().zip(b.coeffs.iter()) {
                let ord = x.total_cmp(y);
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let dedup_tol = (1e-4 * tau).max(1e-12);
    let mut kept: Vec<ShellPoint> = Vec::new();
    for cand in candidates {
        if kept.iter().all(|k| (&k.coeffs - &cand.coeffs).norm() > dedup_tol) {
            kept.push(cand);
        }
        if kept.len() == n_points {
            break;
        }
    }
    Ok(kept)
}

/// Restart points for a stalled wavefront estimate: the estimate shifted by
/// each shell offset, most benign (highest Strehl) first.
pub fn restart_candidates(
    current: &DVector<f64>,
    shell: &[ShellPoint],
) -> Result<Vec<DVector<f64>>> {
    shell
        .iter()
        .map(|p| {
            if p.coeffs.len() != current.len() {
                return Err(Error::DimensionMismatch {
                    expected: current.len(),
                    actual: p.coeffs.len(),
                });
            }
            Ok(current + &p.coeffs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::psf::strehl;
    use crate::optics::zernike::phase_screen;
    use approx::assert_relative_eq;

    const MODES: [usize; 6] = [4, 5, 6, 7, 8, 9];

    #[test]
    fn zero_radius_collapses_to_the_flat_screen() {
        let grid = PupilGrid::new(32, 1.0).unwrap();
        let shell = max_strehl_shell(&grid, &MODES, 0.0, 4, 8, RngStream::root(1)).unwrap();
        assert_eq!(shell.len(), 1);
        assert_eq!(shell[0].coeffs.norm(), 0.0);
        assert_eq!(shell[0].strehl, 1.0);
    }

    #[test]
    fn points_sit_exactly_on_the_sphere_sorted_and_distinct() {
        let grid = PupilGrid::new(32, 1.0).unwrap();
        let tau = 0.2;
        let shell = max_strehl_shell(&grid, &MODES, tau, 4, 16, RngStream::root(2)).unwrap();
        assert!(!shell.is_empty());
        for p in &shell {
            assert!((p.coeffs.norm() - tau).abs() <= 1e-8 * tau);
            assert!(p.strehl > 0.0 && p.strehl < 1.0);
        }
        for w in shell.windows(2) {
            assert!(w[0].strehl >= w[1].strehl);
            assert!((&w[0].coeffs - &w[1].coeffs).norm() > 1e-4 * tau);
        }
    }

    #[test]
    fn internal_score_agrees_with_the_pupil_plane_definition() {
        let grid = PupilGrid::new(32, 1.0).unwrap();
        let shell = max_strehl_shell(&grid, &MODES, 0.1, 2, 8, RngStream::root(3)).unwrap();
        for p in &shell {
            let screen = phase_screen(&grid, &MODES, &p.coeffs).unwrap();
            assert_relative_eq!(strehl(&grid, &screen).unwrap(), p.strehl, max_relative = 1e-12);
        }
    }

    #[test]
    fn shell_beats_random_screens_of_the_same_rms() {
        let grid = PupilGrid::new(32, 1.0).unwrap();
        let tau = 0.2;
        let best = max_strehl_shell(&grid, &MODES, tau, 1, 16, RngStream::root(4)).unwrap()[0]
            .strehl;
        let mut rng = RngStream::root(5).rng();
        for _ in 0..1000 {
            let mut c = DVector::from_fn(MODES.len(), |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            c *= tau / c.norm();
            let screen = phase_screen(&grid, &MODES, &c).unwrap();
            let s = strehl(&grid, &screen).unwrap();
            assert!(s <= best + 1e-9, "random screen {s} beats shell {best}");
        }
    }

    #[test]
    fn best_strehl_decreases_with_radius() {
        let grid = PupilGrid::new(32, 1.0).unwrap();
        let best: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&tau| {
                max_strehl_shell(&grid, &MODES, tau, 1, 12, RngStream::root(6)).unwrap()[0].strehl
            })
            .collect();
        assert!(best[0] > best[1] && best[1] > best[2], "{best:?}");
    }

    #[test]
    fn shell_is_a_pure_function_of_its_inputs() {
        let grid = PupilGrid::new(32, 1.0).unwrap();
        let a = max_strehl_shell(&grid, &MODES, 0.15, 3, 10, RngStream::root(7)).unwrap();
        let b = max_strehl_shell(&grid, &MODES, 0.15, 3, 10, RngStream::root(7)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.coeffs.as_slice(), y.coeffs.as_slice());
            assert_eq!(x.strehl, y.strehl);
        }
    }

    #[test]
    fn restart_candidates_shift_the_current_estimate() {
        let current = DVector::from_vec(vec![0.3, -0.1]);
        let shell = vec![
            ShellPoint { coeffs: DVector::from_vec(vec![0.1, 0.0]), strehl: 0.9 },
            ShellPoint { coeffs: DVector::from_vec(vec![0.0, -0.1]), strehl: 0.8 },
        ];
        let cands = restart_candidates(&current, &shell).unwrap();
        assert_eq!(cands.len(), 2);
        assert_eq!(cands[0].as_slice(), &[0.4, -0.1]);
        assert_eq!(cands[1].as_slice(), &[0.3, -0.2]);

        let bad = vec![ShellPoint { coeffs: DVector::zeros(3), strehl: 1.0 }];
        assert!(restart_candidates(&current, &bad).is_err());
    }
}
