//! Where should a stalled wavefront fit restart from? From the perturbations
//! that damage the PSF least: local maxima of the Strehl ratio on a sphere of
//! fixed RMS. This example maps those shells at growing radii and shows they
//! beat random perturbations of the same size by a wide margin.

use globality::optics::{max_strehl_shell, phase_screen, restart_candidates, strehl, PupilGrid};
use globality::rng::RngStream;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> globality::Result<()> {
    let grid = PupilGrid::new(32, 2.0)?;
    let modes: Vec<usize> = (4..=9).collect();

    println!("locally Strehl-maximal screens per RMS radius (waves):");
    let mut last = Vec::new();
    for (i, tau) in [0.05, 0.1, 0.2].into_iter().enumerate() {
        let shell = max_strehl_shell(&grid, &modes, tau, 6, 32, RngStream::root(9).child(i as u64))?;

        // reference: random directions on the same sphere
        let mut rng = RngStream::root(10).child(i as u64).rng();
        let mut best_random = 0.0f64;
        for _ in 0..200 {
            let mut c =
                DVector::from_fn(modes.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            c *= tau / c.norm();
            best_random = best_random.max(strehl(&grid, &phase_screen(&grid, &modes, &c)?)?);
        }

        println!("  tau = {tau:.2}: {} distinct maxima found", shell.len());
        for (k, p) in shell.iter().enumerate() {
            println!("    #{k}: strehl = {:.5}", p.strehl);
        }
        println!("    best of 200 random screens: {best_random:.5}");
        last = shell;
    }

    // shifting a current estimate by each shell point gives restart proposals,
    // gentlest first
    let current = DVector::from_vec(vec![0.3, -0.1, 0.05, 0.0, 0.12, -0.07]);
    let cands = restart_candidates(&current, &last)?;
    println!("\nrestart proposals around an estimate with |c| = {:.3}:", current.norm());
    for (k, c) in cands.iter().enumerate() {
        println!("  candidate {k}: |c| = {:.4}, shift = {:.4}", c.norm(), (c - &current).norm());
    }
    Ok(())
}
