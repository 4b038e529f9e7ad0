//! Zernike circle polynomials with Noll indexing and normalization, so a
//! coefficient vector in waves has root-mean-square wavefront error equal to
//! its Euclidean norm.

use nalgebra::{DMatrix, DVector};

use super::PupilGrid;
use crate::error::{Error, Result};

/// Map a 1-based Noll index to (radial order n, azimuthal frequency m).
/// Even indices carry cosine terms (m > 0), odd ones sine terms (m < 0).
pub fn noll_to_nm(j: usize) -> (u32, i32) {
    assert!(j >= 1, "Noll indices start at 1");
    let mut n = 0usize;
    let mut acc = 0usize; // indices consumed by rows 0..n
    while acc + n + 1 < j {
        acc += n + 1;
        n += 1;
    }
    let k = j - acc; // 1-based position within row n
    let m_abs = if n % 2 == 0 { 2 * (k / 2) } else { 2 * ((k - 1) / 2) + 1 };
    let m = if m_abs == 0 {
        0
    } else if j % 2 == 0 {
        m_abs as i32
    } else {
        -(m_abs as i32)
    };
    (n as u32, m)
}

fn factorial(k: u32) -> f64 {
    (1..=k as u64).map(|v| v as f64).product()
}

/// Radial polynomial R_n^|m|(rho).
fn radial(n: u32, m_abs: u32, rho: f64) -> f64 {
    debug_assert!(m_abs <= n && (n - m_abs) % 2 == 0);
    let upper = (n - m_abs) / 2;
    let mut sum = 0.0;
    for s in 0..=upper {
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        let num = factorial(n - s);
        let den = factorial(s) * factorial((n + m_abs) / 2 - s) * factorial((n - m_abs) / 2 - s);
        sum += sign * num / den * rho.powi((n - 2 * s) as i32);
    }
    sum
}

/// Noll-normalized Z_j at polar coordinates (rho, phi): unit mean square over
/// the unit disk, so coefficients in waves are RMS contributions.
pub fn zernike_value(j: usize, rho: f64, phi: f64) -> f64 {
    let (n, m) = noll_to_nm(j);
    let m_abs = m.unsigned_abs();
    let r = radial(n, m_abs, rho);
    if m == 0 {
        ((n + 1) as f64).sqrt() * r
    } else if m > 0 {
        (2.0 * (n + 1) as f64).sqrt() * r * (m_abs as f64 * phi).cos()
    } else {
        (2.0 * (n + 1) as f64).sqrt() * r * (m_abs as f64 * phi).sin()
    }
}

/// Phase screen in radians for Noll `modes` with coefficients in waves:
/// `2 pi * sum_k coeffs[k] Z_modes[k]`, zero outside the aperture.
pub fn phase_screen(grid: &PupilGrid, modes: &[usize], coeffs: &DVector<f64>) -> Result<DMatrix<f64>> {
    if modes.len() != coeffs.len() {
        return Err(Error::DimensionMismatch { expected: modes.len(), actual: coeffs.len() });
    }
    if modes.iter().any(|&j| j == 0) {
        return Err(Error::InvalidInput("Noll indices start at 1".into()));
    }
    let n = grid.n();
    let mut screen = DMatrix::zeros(n, n);
    for &(i, jj) in grid.aperture_pixels() {
        let rho = grid.rho()[(i, jj)];
        let phi = grid.phi()[(i, jj)];
        let mut v = 0.0;
        for (k, &mode) in modes.iter().enumerate() {
            v += coeffs[k] * zernike_value(mode, rho, phi);
        }
        screen[(i, jj)] = 2.0 * std::f64::consts::PI * v;
    }
    Ok(screen)
}
