//! Find and dissect the spuriously infeasible realization.
use seesaw_core::model::check_feasibility;
use seesaw_core::sim::*;
use seesaw_core::solver::*;
use seesaw_core::transform::*;
use seesaw_core::Scenario;

fn main() {
    let spec = InstanceSpec::defaults(6, Scenario::Gas);
    for i in 0..4u64 {
        let seed = realization_seed(2026, i);
        let (master, _) = generate_instance(&spec, seed);
        let mut inst = restrict(&master, 8, 1);
        inst.scenario = Scenario::Gas;
        let mut cfg = SolverConfig::default();
        cfg.seed = seed;
        let obj = WeightedObjectiveConfig::with_default_normalization(&inst, 0.5, cfg.lambda_init);
        let report = mm_solve(&inst, &cfg, &obj).unwrap();
        let init = init_feasible(&inst, seed);
        let parts = eval_dc_parts(&inst, &init);
        let worst_init = (0..16)
            .map(|u| parts.per_user_log_signal[u] - parts.per_user_log_interference[u] - inst.r_min)
            .fold(f64::INFINITY, f64::min);
        let relaxed_parts = eval_dc_parts(&inst, &report.relaxed);
        let worst_relaxed = (0..16)
            .map(|u| relaxed_parts.per_user_log_signal[u] - relaxed_parts.per_user_log_interference[u] - inst.r_min)
            .fold(f64::INFINITY, f64::min);
        let rep = check_feasibility(&inst, &report.final_alloc, 1e-8);
        println!(
            "real {i}: feasible={} converged={} iters={} binviol={:.1e} worst_init_slack={:.3} worst_relaxed_slack={:.3} c5={:.3} trace_len={}",
            report.feasible, report.converged, report.iterations, report.binary_violation,
            worst_init, worst_relaxed, rep.min_rate, report.trace.len()
        );
    }
}
