//! Point-spread functions of a phase-aberrated circular pupil, plus a
//! pixel-wise bound on how much a phase screen can move the PSF.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::PupilGrid;
use crate::error::{Error, Result};

/// Normalized intensity PSF on the padded grid, stored with the diffraction
/// peak shifted to the array center `(m/2, m/2)`.
#[derive(Debug, Clone)]
pub struct Psf {
    values: DMatrix<f64>,
}

impl Psf {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Location and value of the brightest pixel (first one in column-major
    /// order on ties).
    pub fn peak(&self) -> ((usize, usize), f64) {
        let mut best = ((0, 0), f64::NEG_INFINITY);
        for j in 0..self.values.ncols() {
            for i in 0..self.values.nrows() {
                if self.values[(i, j)] > best.1 {
                    best = ((i, j), self.values[(i, j)]);
                }
            }
        }
        best
    }
}

fn check_phase(grid: &PupilGrid, phase: &DMatrix<f64>) -> Result<()> {
    if phase.nrows() != grid.n() || phase.ncols() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), actual: phase.nrows().max(phase.ncols()) });
    }
    if phase.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("phase screen"));
    }
    Ok(())
}

/// Image-plane complex field `F^-1[A e^(j phase)]` (unitary transform,
/// unshifted: DC at index (0, 0)).
pub fn coherent_field(grid: &PupilGrid, phase: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    check_phase(grid, phase)?;
    let m = grid.padded();
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    for &(i, j) in grid.aperture_pixels() {
        buf[i * m + j] = Complex64::from_polar(1.0, phase[(i, j)]);
    }
    grid.ifft2_unitary(&mut buf);
    Ok(DMatrix::from_fn(m, m, |i, j| buf[i * m + j]))
}

fn fftshift(raw: &DMatrix<f64>) -> DMatrix<f64> {
    let m = raw.nrows();
    let c = m / 2;
    DMatrix::from_fn(m, m, |i, j| raw[((i + c) % m, (j + c) % m)])
}

/// Intensity PSF `|F^-1[A e^(j phase)]|^2 / area`: sums to one because the
/// transform is unitary and the pupil has unit amplitude on `area` pixels.
pub fn psf_from_phase(grid: &PupilGrid, phase: &DMatrix<f64>) -> Result<Psf> {
    let field = coherent_field(grid, phase)?;
    let area = grid.aperture_area() as f64;
    let raw = field.map(|v| v.norm_sqr() / area);
    Ok(Psf { values: fftshift(&raw) })
}

/// Strehl ratio `|sum_A e^(j phase)|^2 / area^2`, evaluated directly in the
/// pupil plane. Equals the normalized on-axis PSF intensity and is invariant
/// to piston.
pub fn strehl(grid: &PupilGrid, phase: &DMatrix<f64>) -> Result<f64> {
    check_phase(grid, phase)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(i, j) in grid.aperture_pixels() {
        acc += Complex64::from_polar(1.0, phase[(i, j)]);
    }
    let area = grid.aperture_area() as f64;
    Ok(acc.norm_sqr() / (area * area))
}

/// Pixel-wise comparison of the aberrated PSF against the unaberrated one.
///
/// `eps` is the actual difference of normalized PSFs; `bound` dominates
/// `|eps|` pixel by pixel. The bound's tightness is controlled by the unit
/// scalar `alignment` that rotates the nominal field onto the perturbed one;
/// the phase of the aperture sum of `e^(j phase)` minimizes the residual
/// `front_distance`, which ties to the screen's Strehl ratio through
/// `front_distance^2 = 2 (1 - sqrt(strehl))`.
#[derive(Debug, Clone)]
pub struct PerturbationBound {
    pub eps: DMatrix<f64>,
    pub bound: DMatrix<f64>,
    pub alignment: Complex64,
    pub front_distance: f64,
    pub strehl: f64,
}

impl PerturbationBound {
    /// Number of pixels where `|eps|` exceeds the bound by more than `slack`.
    pub fn violations(&self, slack: f64) -> usize {
        self.eps
            .iter()
            .zip(self.bound.iter())
            .filter(|(e, b)| e.abs() > **b + slack)
            .count()
    }

    pub fn max_abs_eps(&self) -> f64 {
        self.eps.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    pub fn max_bound(&self) -> f64 {
        self.bound.iter().fold(0.0f64, |a, &b| a.max(b))
    }
}

pub fn psf_perturbation_bound(grid: &PupilGrid, phase: &DMatrix<f64>) -> Result<PerturbationBound> {
    check_phase(grid, phase)?;
    let n = grid.n();
    let area = grid.aperture_area() as f64;
    let zero_phase = DMatrix::zeros(n, n);
    let nominal = coherent_field(grid, &zero_phase)?;
    let perturbed = coherent_field(grid, phase)?;

    // alignment: phase of the aperture sum of the screen
    let mut dc = Complex64::new(0.0, 0.0);
    for &(i, j) in grid.aperture_pixels() {
        dc += Complex64::from_polar(1.0, phase[(i, j)]);
    }
    let alignment =
        if dc.norm() > 0.0 { dc / dc.norm() } else { Complex64::new(1.0, 0.0) };
    let strehl_val = dc.norm_sqr() / (area * area);

    // residual between unit-energy fields, computed in the pupil plane where
    // the transform changes nothing
    let mut residual_sq = 0.0;
    for &(i, j) in grid.aperture_pixels() {
        residual_sq += (Complex64::from_polar(1.0, phase[(i, j)]) - alignment).norm_sqr();
    }
    let front_distance = (residual_sq / area).sqrt();

    let m = grid.padded();
    let sqrt_area = area.sqrt();
    let mut eps = DMatrix::zeros(m, m);
    let mut bound = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            eps[(i, j)] = (perturbed[(i, j)].norm_sqr() - nominal[(i, j)].norm_sqr()) / area;
            bound[(i, j)] =
                front_distance * (front_distance + 2.0 * nominal[(i, j)].norm() / sqrt_area);
        }
    }
    Ok(PerturbationBound {
        eps: fftshift(&eps),
        bound: fftshift(&bound),
        alignment,
        front_distance,
        strehl: strehl_val,
    })
}

/// Coefficients of the reflected-conjugate pupil, the screen `-beta(-u)`.
///
/// Intensity measurements cannot tell a pupil field from its reflected
/// conjugate, so this point produces pixel-for-pixel the same PSF: an exact
/// second global optimum of any intensity-only fit. Reflection flips the
/// sign of odd-|m| Zernike terms and the negation flips all of them, so
/// even-|m| coefficients change sign and odd-|m| ones survive.
pub fn reflected_conjugate_twin(
    modes: &[usize],
    coeffs: &nalgebra::DVector<f64>,
) -> Result<nalgebra::DVector<f64>> {
    if modes.len() != coeffs.len() {
        return Err(Error::DimensionMismatch { expected: modes.len(), actual: coeffs.len() });
    }
    if modes.iter().any(|&j| j == 0) {
        return Err(Error::InvalidInput("Noll indices start at 1".into()));
    }
    Ok(nalgebra::DVector::from_fn(coeffs.len(), |k, _| {
        let (_, m) = super::zernike::noll_to_nm(modes[k]);
        if m.rem_euclid(2) == 0 {
            -coeffs[k]
        } else {
            coeffs[k]
        }
    }))
}

/// Wavefront estimation as a statistical model: parameters are Zernike
/// coefficients in waves, observations are the pixels of the normalized PSF,
/// one image per diversity defocus. The Jacobian is analytic (one extra
/// transform per mode and image), which keeps scores and Fisher information
/// exact even at tiny noise levels.
///
/// A single in-focus image cannot be inverted: the even-mode derivatives
/// vanish identically on odd screens and every screen shares its PSF with
/// its reflected conjugate. A second image at a known defocus removes both
/// degeneracies, which is why the default estimation setup takes one.
pub struct PsfMean {
    grid: PupilGrid,
    modes: Vec<usize>,
    diversities: Vec<f64>,
    basis: DMatrix<f64>,
    defocus: nalgebra::DVector<f64>,
}

impl PsfMean {
    /// Single in-focus image.
    pub fn new(grid: PupilGrid, modes: Vec<usize>) -> Result<Self> {
        PsfMean::with_diversity(grid, modes, vec![0.0])
    }

    /// One image per entry of `diversities`, each with that many waves of
    /// extra known defocus applied to the pupil.
    pub fn with_diversity(grid: PupilGrid, modes: Vec<usize>, diversities: Vec<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidInput("need at least one mode".into()));
        }
        if modes.iter().any(|&j| j == 0) {
            return Err(Error::InvalidInput("Noll indices start at 1".into()));
        }
        if diversities.is_empty() || diversities.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidInput("need at least one finite diversity defocus".into()));
        }
        let pixels = grid.aperture_pixels();
        let basis = DMatrix::from_fn(pixels.len(), modes.len(), |p, k| {
            let (i, j) = pixels[p];
            super::zernike::zernike_value(modes[k], grid.rho()[(i, j)], grid.phi()[(i, j)])
        });
        let defocus = nalgebra::DVector::from_fn(pixels.len(), |p, _| {
            let (i, j) = pixels[p];
            super::zernike::zernike_value(4, grid.rho()[(i, j)], grid.phi()[(i, j)])
        });
        Ok(PsfMean { grid, modes, diversities, basis, defocus })
    }

    pub fn grid(&self) -> &PupilGrid {
        &self.grid
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn diversities(&self) -> &[f64] {
        &self.diversities
    }

    /// Image-plane field for aperture phases `beta` (unshifted, row-major).
    fn field(&self, beta: &nalgebra::DVector<f64>) -> Vec<Complex64> {
        let m = self.grid.padded();
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        for (p, &(i, j)) in self.grid.aperture_pixels().iter().enumerate() {
            buf[i * m + j] = Complex64::from_polar(1.0, beta[p]);
        }
        self.grid.ifft2_unitary(&mut buf);
        buf
    }

    /// Row-major flattening of the shifted `m x m` array.
    fn shifted_index(&self, k: usize) -> usize {
        let m = self.grid.padded();
        let (i, j) = (k / m, k % m);
        let c = m / 2;
        ((i + c) % m) * m + (j + c) % m
    }
}

impl crate::model::MeanFn for PsfMean {
    fn param_dim(&self) -> usize {
        self.modes.len()
    }

    fn out_dim(&self) -> usize {
        let m = self.grid.padded();
        self.diversities.len() * m * m
    }

    fn mean(&self, theta: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let beta = &self.basis * theta * two_pi;
        let m2 = self.grid.padded() * self.grid.padded();
        let area = self.grid.aperture_area() as f64;
        let mut out = nalgebra::DVector::zeros(self.diversities.len() * m2);
        for (img, &div) in self.diversities.iter().enumerate() {
            let w = self.field(&(&beta + &self.defocus * (two_pi * div)));
            for k in 0..m2 {
                out[img * m2 + k] = w[self.shifted_index(k)].norm_sqr() / area;
            }
        }
        out
    }

    fn jacobian(&self, theta: &nalgebra::DVector<f64>) -> DMatrix<f64> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let beta = &self.basis * theta * two_pi;
        let m2 = self.grid.padded() * self.grid.padded();
        let area = self.grid.aperture_area() as f64;
        let mut jac = DMatrix::zeros(self.diversities.len() * m2, self.modes.len());
        for (img, &div) in self.diversities.iter().enumerate() {
            let beta_img = &beta + &self.defocus * (two_pi * div);
            let w = self.field(&beta_img);
            for k in 0..self.modes.len() {
                // d(pupil)/dc_k = i 2 pi Z_k e^(j beta) on the aperture
                let mut buf = vec![Complex64::new(0.0, 0.0); m2];
                for (p, &(i, j)) in self.grid.aperture_pixels().iter().enumerate() {
                    buf[i * self.grid.padded() + j] =
                        Complex64::new(0.0, two_pi * self.basis[(p, k)])
                            * Complex64::from_polar(1.0, beta_img[p]);
                }
                self.grid.ifft2_unitary(&mut buf);
                for out in 0..m2 {
                    let src = self.shifted_index(out);
                    jac[(img * m2 + out, k)] = 2.0 * (w[src].conj() * buf[src]).re / area;
                }
            }
        }
        jac
    }
}
