//! The optics stack: Zernike phase screens on a circular pupil, unitary-FFT
//! point-spread functions, Strehl ratios, and the pixel-wise perturbation
//! bound that says how much a small wavefront error can move any PSF pixel.

use globality::optics::{
    noll_to_nm, phase_screen, psf_from_phase, psf_perturbation_bound, strehl, PupilGrid,
};
use globality::rng::RngStream;
use nalgebra::DVector;
use rand::Rng;

fn main() -> globality::Result<()> {
    let grid = PupilGrid::new(64, 2.0)?;
    println!(
        "pupil: {0}x{0} grid, padded to {1}x{1}, {2} aperture pixels",
        grid.n(),
        grid.padded(),
        grid.aperture_area()
    );

    let modes: Vec<usize> = (4..=15).collect();
    println!("\nNoll indices and their radial/azimuthal orders:");
    for &j in &modes {
        let (n, m) = noll_to_nm(j);
        println!("  j = {j:2}  (n, m) = ({n}, {m:+})");
    }

    // a flat wavefront concentrates everything it can into the core
    let flat = psf_from_phase(&grid, &nalgebra::DMatrix::zeros(grid.n(), grid.n()))?;
    let ((pi, pj), peak) = flat.peak();
    println!(
        "\nflat-pupil PSF: total energy = {:.12} (unit by construction), peak {:.5} at ({pi}, {pj})",
        flat.sum(),
        peak
    );

    // small-aberration regime: Strehl tracks exp(-phase variance)
    println!("\nStrehl ratio vs the small-aberration approximation exp(-(2 pi rms)^2):");
    let mut rng = RngStream::root(3).rng();
    for rms in [0.02, 0.05, 0.1] {
        let mut coeffs = DVector::from_fn(modes.len(), |_, _| rng.gen_range(-1.0..1.0));
        coeffs *= rms / coeffs.norm();
        let screen = phase_screen(&grid, &modes, &coeffs)?;
        let s = strehl(&grid, &screen)?;
        let approx = (-(2.0 * std::f64::consts::PI * rms).powi(2)).exp();
        println!("  rms {rms:.2} waves: strehl = {s:.4}, approximation = {approx:.4}");
    }

    // every PSF pixel moves by at most fd*(fd + 2|g|/sqrt(area)) under a
    // wavefront error with front distance fd
    let mut coeffs = DVector::from_fn(modes.len(), |_, _| rng.gen_range(-1.0..1.0));
    coeffs *= 0.05 / coeffs.norm();
    let screen = phase_screen(&grid, &modes, &coeffs)?;
    let check = psf_perturbation_bound(&grid, &screen)?;
    println!(
        "\nperturbation audit at rms 0.05: strehl = {:.4}, front distance = {:.4}",
        check.strehl, check.front_distance
    );
    println!(
        "  largest pixel change = {:.3e}, largest allowed = {:.3e}, violations = {}",
        check.max_abs_eps(),
        check.max_bound(),
        check.violations(1e-12)
    );
    Ok(())
}
