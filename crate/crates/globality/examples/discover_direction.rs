//! Learn which relaxation direction matters, from optimizer failures alone.
//! Descend on noise-free data over a grid of (nominal truth, start) pairs;
//! every mismatch contributes a whitened score column, and the top left
//! singular vector of those columns is the direction a relaxation should
//! open up. No noise is involved anywhere.

use globality::discovery::{discover_relaxation_direction, iterate_discovery, DiscoveryConfig};
use globality::model::Embedding;
use globality::sinusoid::SinusoidModel;

fn main() -> globality::Result<()> {
    let model = SinusoidModel::standard();
    let cfg = DiscoveryConfig::frequency_grid(&model, 24)?;
    println!(
        "descending over {} nominal truths x {} starts...",
        cfg.nominal_set.len(),
        cfg.start_set.len()
    );

    let ambient = Embedding::additive(model.model().clone())?;
    let found = discover_relaxation_direction(&ambient, &cfg)?;
    println!(
        "{} of {} pairs mismatched; leading singular values:",
        found.columns_used,
        cfg.nominal_set.len() * cfg.start_set.len()
    );
    for (i, sv) in found.singular_values.iter().take(6).enumerate() {
        println!("  sigma_{i} = {sv:10.4}");
    }
    let energy = found.singular_values[0].powi(2)
        / found.singular_values.iter().map(|s| s * s).sum::<f64>();
    println!("rank-one share of the column energy: {:.1}%", 100.0 * energy);

    let n = found.direction.len();
    println!("\nlearned direction (first 8 of {n} coordinates):");
    for i in 0..8 {
        println!("  [{i:2}] {:+.5}", found.direction[i]);
    }

    // a second pass with the first direction absorbed finds what is left
    let pair = iterate_discovery(model.model(), &cfg, 2)?;
    println!(
        "\ntwo iterated directions: |<d1, d2>| = {:.2e} (orthogonal by construction)",
        pair[0].direction.dot(&pair[1].direction).abs()
    );
    println!(
        "second round (first direction absorbed into the model) used {} mismatched pairs",
        pair[1].columns_used
    );
    Ok(())
}
