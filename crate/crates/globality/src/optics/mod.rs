//! Discrete scalar-diffraction toy: circular pupils, Zernike phase screens,
//! point-spread functions, and Strehl-based tools for wavefront estimation.

pub mod psf;
pub mod shell;
pub mod zernike;

pub use psf::{psf_from_phase, psf_perturbation_bound, strehl, PerturbationBound, Psf};
pub use shell::{max_strehl_shell, restart_candidates, ShellPoint};
pub use zernike::{noll_to_nm, phase_screen, zernike_value};

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Sampled circular aperture. The pupil lives on an `n x n` grid with pixel
/// coordinates `(i - n/2) / (n/2)`, strictly inside the unit disk; transforms
/// embed it in an `m x m` array (`m = round(n * oversampling)`), so
/// `oversampling = 2` puts the PSF at twice its Nyquist sampling rate.
#[derive(Clone)]
pub struct PupilGrid {
    n: usize,
    m: usize,
    oversampling: f64,
    aperture_pixels: Vec<(usize, usize)>,
    rho: DMatrix<f64>,
    phi: DMatrix<f64>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PupilGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PupilGrid")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("oversampling", &self.oversampling)
            .field("aperture_area", &self.aperture_pixels.len())
            .finish()
    }
}

impl PupilGrid {
    pub fn new(n: usize, oversampling: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!("pupil size must be even and >= 8, got {n}")));
        }
        if !oversampling.is_finite() || oversampling < 1.0 {
            return Err(Error::InvalidInput(format!("oversampling must be >= 1, got {oversampling}")));
        }
        let m = (n as f64 * oversampling).round() as usize;
        let half = n as f64 / 2.0;
        let c = (n / 2) as f64;
        let mut rho = DMatrix::zeros(n, n);
        let mut phi = DMatrix::zeros(n, n);
        let mut aperture_pixels = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let y = (i as f64 - c) / half;
                let x = (j as f64 - c) / half;
                let r = x.hypot(y);
                rho[(i, j)] = r;
                phi[(i, j)] = y.atan2(x);
                if r < 1.0 {
                    aperture_pixels.push((i, j));
                }
            }
        }
        let ifft = FftPlanner::new().plan_fft_inverse(m);
        Ok(PupilGrid { n, m, oversampling, aperture_pixels, rho, phi, ifft })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length of the padded transform array.
    pub fn padded(&self) -> usize {
        self.m
    }

    pub fn oversampling(&self) -> f64 {
        self.oversampling
    }

    /// Pixels strictly inside the unit disk.
    pub fn aperture_pixels(&self) -> &[(usize, usize)] {
        &self.aperture_pixels
    }

    /// Number of aperture pixels (the discrete aperture area).
    pub fn aperture_area(&self) -> usize {
        self.aperture_pixels.len()
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Unitary 2-D inverse transform of an `m x m` row-major buffer, so
    /// `sum |X|^2` is preserved exactly (up to roundoff).
    pub(crate) fn ifft2_unitary(&self, buf: &mut [Complex64]) {
        let m = self.m;
        assert_eq!(buf.len(), m * m);
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(m) {
            self.ifft.process_with_scratch(row, &mut scratch);
        }
        let mut col = vec![Complex64::default(); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = buf[i * m + j];
            }
            self.ifft.process_with_scratch(&mut col, &mut scratch);
            for i in 0..m {
                buf[i * m + j] = col[i];
            }
        }
        let scale = 1.0 / m as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}
