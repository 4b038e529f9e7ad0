//! Fit the benchmark twice, once from a start that drains into the spurious
//! basin and once from the truth, then run the score test and the two
//! bootstrap consistency tests at both fits. The score statistic is blind
//! here (every fit is stationary); the likelihood-value tests are not.

use globality::model::StatisticalModel;
use globality::optimize::{minimize_local, neg_loglik_problem, LbfgsConfig};
use globality::rng::RngStream;
use globality::sinusoid::{default_theta_true, SinusoidModel};
use globality::validate::{
    bootstrap_moments, one_sided_test, rao_score_test, two_sided_test, Decision, TestReport,
};

fn describe(name: &str, report: &TestReport) {
    let verdict = match report.decision {
        Decision::AcceptNull => "accept (looks global)",
        Decision::RejectNull => "reject (not the global optimum)",
    };
    println!(
        "  {name:9}  statistic = {:9.4}  threshold = {:7.4}  {verdict}",
        report.statistic, report.threshold
    );
}

fn main() -> globality::Result<()> {
    let model = SinusoidModel::standard();
    let truth = default_theta_true();
    let stream = RngStream::root(10);
    let data = model
        .model()
        .sample(model.point(truth)?.values(), 1, &mut stream.child(0).rng())?;
    let (obj, grad) = neg_loglik_problem(model.model(), &data);

    let alpha = 0.05;
    for (i, (label, start)) in [("spurious basin", 0.3), ("the truth", truth)].iter().enumerate() {
        let fit = minimize_local(&obj, &grad, &model.point(*start)?, &LbfgsConfig::default())?;
        let hat = model.point(fit.minimizer[0])?;
        println!(
            "\ndescent from {label} (start {start:.4}) -> theta_hat = {:.6}, nll = {:.4}",
            fit.minimizer[0], fit.objective
        );

        // reference distribution of the log-likelihood under "theta_hat is true"
        let moments =
            bootstrap_moments(model.model(), hat.values(), 1, 2000, stream.child(1 + i as u64))?;
        let ell = model.model().log_likelihood(&data, hat.values())?;
        println!(
            "  observed log-likelihood {ell:.4}, bootstrap mean {:.4}, sd {:.4}",
            moments.mean,
            moments.variance.sqrt()
        );

        describe("rao", &rao_score_test(model.model(), &data, hat.values(), alpha)?);
        describe("two-sided", &two_sided_test(ell, &moments, alpha)?);
        describe("one-sided", &one_sided_test(ell, &moments, alpha)?);
    }
    Ok(())
}
