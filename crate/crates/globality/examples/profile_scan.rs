//! Scan the benchmark likelihood over its full frequency interval and list
//! every local optimum the scan oracle finds. On noise-free data the surface
//! has exactly two basins: a spurious fit near 0.31 and the truth at 3 pi,
//! which is why this model makes a good stress test for optimality checks.

use globality::model::StatisticalModel;
use globality::sinusoid::{
    default_theta_true, SinusoidModel, DEFAULT_DEDUP_TOL, DEFAULT_SCAN_RESOLUTION, THETA_MAX,
};

fn main() -> globality::Result<()> {
    let model = SinusoidModel::standard();
    let truth = default_theta_true();
    let data = model.noise_free_data(truth)?;

    let coarse = model.profile(&data, 61)?;
    let lo = coarse.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let hi = coarse.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    println!("negative log-likelihood over theta in [0, {THETA_MAX:.5}]:");
    for (theta, nll) in &coarse {
        let frac = (nll - lo) / (hi - lo);
        let bar = "#".repeat(1 + (40.0 * (1.0 - frac)).round() as usize);
        println!("  theta = {theta:7.4}  nll = {nll:9.3}  {bar}");
    }

    let minima = model.enumerate_local_minima(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)?;
    println!("\npolished local minima ({} found):", minima.len());
    for p in &minima {
        let theta = p.values()[0];
        let nll = -model.model().log_likelihood(&data, p.values())?;
        let lambda = model.model().noncentrality(&model.point(truth)?.values().clone(), p.values())?;
        println!(
            "  theta = {theta:10.6}  nll = {nll:10.5}  noncentrality = {lambda:8.3}{}",
            if (theta - truth).abs() < 1e-6 { "  <- truth" } else { "" }
        );
    }

    let global = model.global_minimum(&data, DEFAULT_SCAN_RESOLUTION, DEFAULT_DEDUP_TOL)?;
    println!("\nglobal minimum at theta = {:.10} (truth {:.10})", global.values()[0], truth);
    Ok(())
}
