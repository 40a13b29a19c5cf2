// Temporary instrumentation; removed before release.
use issc_core::array_channel::presets;
use issc_core::optimizer::{self, OptimizerOptions};
use issc_core::sensing::{design_reference_cov, SensingConfig};
use std::time::Instant;

#[test]
fn debug_full_run_desk() {
    let scenario = presets::desk(20.0_f64, 0);
    let t0 = Instant::now();
    let (ref_cov, t_gap) = design_reference_cov(&scenario, &SensingConfig::default()).unwrap();
    println!("sensing reference: t = {t_gap:.4} mW, elapsed {:?}", t0.elapsed());

    let t1 = Instant::now();
    let out = optimizer::run(&scenario, &ref_cov, &OptimizerOptions::default()).unwrap();
    println!(
        "semantic run: {} outer iters, elapsed {:?}",
        out.state.outer_iter,
        t1.elapsed()
    );
    println!("objective history: {:?}", out.state.objective_history);
    println!("rhos: {:?}", out.state.rhos);
    println!("lambdas: {:?}", out.state.lambdas);
    println!("ssr: {:?}", out.report.ssr);
    println!(
        "sdr obj {} randomized {} ratio {}",
        out.sdr_objective, out.randomized_objective, out.randomization_ratio
    );

    let t2 = Instant::now();
    let bench = optimizer::run(
        &scenario,
        &ref_cov,
        &OptimizerOptions {
            optimize_rho: false,
            ..Default::default()
        },
    )
    .unwrap();
    println!(
        "benchmark run: {} outer iters, elapsed {:?}, sum ssr {} (semantic {})",
        bench.state.outer_iter,
        t2.elapsed(),
        bench.report.sum_ssr(),
        out.report.sum_ssr()
    );
}
