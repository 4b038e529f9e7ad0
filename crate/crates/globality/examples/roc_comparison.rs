//! Head-to-head detection power of the optimality tests. Run noisy benchmark
//! trials from uniform random starts, label each fit against a dense scan
//! oracle, and rank the tests by area under the detection-vs-false-alarm
//! curve. The point the table makes: the one-sided bootstrap test beats the
//! two-sided one (rejecting fits that look too good wastes alpha), and the
//! gap test is only as strong as its relaxation, with a learned direction
//! beating a cubic phase beating a constant phase.

use globality::discovery::{iterate_discovery, DiscoveryConfig};
use globality::experiment::{
    auc_from_scores, detection_scores, roc_from_scores, run_benchmark_trials, BenchmarkSpec,
    StartMode,
};
use globality::optimize::LbfgsConfig;
use globality::rng::RngStream;
use globality::sinusoid::{
    default_theta_true, RelaxationSpec, SinusoidModel, DEFAULT_DEDUP_TOL, DEFAULT_SCAN_RESOLUTION,
};
use globality::validate::ThresholdRule;

fn main() -> globality::Result<()> {
    let model = SinusoidModel::standard();

    println!("learning a relaxation direction from noise-free optimizer failures...");
    let dcfg = DiscoveryConfig::frequency_grid(&model, 24)?;
    let learned = iterate_discovery(model.model(), &dcfg, 1)?
        .into_iter()
        .map(|r| r.direction)
        .collect::<Vec<_>>();

    let names = ["gap, constant phase", "gap, cubic phase", "gap, learned direction"];
    let embeddings = [
        RelaxationSpec::naive_poly(1).build(&model)?,
        RelaxationSpec::naive_poly(3).build(&model)?,
        RelaxationSpec::learned(learned).build(&model)?,
    ];
    let spec = BenchmarkSpec {
        model: &model,
        theta_true: default_theta_true(),
        trials: 100,
        n_columns: 1,
        start_mode: StartMode::Uniform,
        bootstrap_replicates: 400,
        gap_replicates: 120,
        embeddings: &embeddings,
        label_tol: 1e-3,
        scan_resolution: DEFAULT_SCAN_RESOLUTION,
        dedup_tol: DEFAULT_DEDUP_TOL,
        alpha: 0.05,
        rule: ThresholdRule::Asymptotic,
        optim: LbfgsConfig::default(),
        stream: RngStream::root(42),
    };
    println!("running {} trials (this takes a minute)...", spec.trials);
    let records = run_benchmark_trials(&spec)?;
    let global = records.iter().filter(|r| r.is_global).count();
    println!(
        "{} trials kept: {} reached the global optimum, {} got trapped",
        records.len(),
        global,
        records.len() - global
    );

    let null: Vec<_> = records.iter().filter(|r| r.is_global).cloned().collect();
    let alt: Vec<_> = records.iter().filter(|r| !r.is_global).cloned().collect();
    let (h0_two, h0_one, h0_gaps) = detection_scores(&null);
    let (h1_two, h1_one, h1_gaps) = detection_scores(&alt);

    println!("\narea under the detection curve (1.0 = perfect, 0.5 = coin flip):");
    let mut table = vec![
        ("two-sided".to_string(), auc_from_scores(&h0_two, &h1_two)),
        ("one-sided".to_string(), auc_from_scores(&h0_one, &h1_one)),
    ];
    for (k, (h0, h1)) in h0_gaps.iter().zip(&h1_gaps).enumerate() {
        table.push((names[k].to_string(), auc_from_scores(h0, h1)));
    }
    table.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, auc) in &table {
        println!("  {name:24} {auc:.4}");
    }

    let pfa = [0.01, 0.05, 0.1, 0.25];
    let roc_one = roc_from_scores(&h0_one, &h1_one, &pfa)?;
    let roc_gap = roc_from_scores(&h0_gaps[2], &h1_gaps[2], &pfa)?;
    println!("\ndetection probability at fixed false-alarm rates:");
    println!("  pfa      one-sided  gap (learned)");
    for i in 0..pfa.len() {
        println!("  {:5.2}    {:9.3}  {:.3}", pfa[i], roc_one.pd[i], roc_gap.pd[i]);
    }
    Ok(())
}
