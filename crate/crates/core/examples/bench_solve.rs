//! Quick timing probe for one full-scale solve.
use seesaw_core::model::check_feasibility;
use seesaw_core::sim::{generate_instance, restrict, InstanceSpec};
use seesaw_core::solver::{mm_solve, SolverConfig};
use seesaw_core::transform::{eval_dc_parts, WeightedObjectiveConfig};
use seesaw_core::Scenario;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let q: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let scenario = match args.get(2).map(|s| s.as_str()) {
        Some("cas") => Scenario::Cas,
        _ => Scenario::Gas,
    };
    let spec = InstanceSpec::defaults(6, scenario);
    let (master, _) = generate_instance(&spec, 1);
    let mut inst = restrict(&master, 8, q);
    inst.scenario = scenario;
    let cfg = SolverConfig::default();
    let obj = WeightedObjectiveConfig::with_default_normalization(&inst, 0.5, cfg.lambda_init);
    let t0 = Instant::now();
    let report = mm_solve(&inst, &cfg, &obj).unwrap();
    println!(
        "q={q} {scenario:?} elapsed={:.2?} iters={} feasible={} converged={} se={:.3} power={:.1} binviol={:.2e}",
        t0.elapsed(), report.iterations, report.feasible, report.converged,
        report.metrics.se, report.metrics.p_total_mw, report.binary_violation,
    );
    let rep = check_feasibility(&inst, &report.final_alloc, 1e-8);
    println!(
        "violations: c1={:.2e} c2={:.2e} c4={:.2e} c5={:.2e}",
        rep.subchannel_assignment, rep.antenna_assignment, rep.power_budget, rep.min_rate
    );
    // Relaxed per-user unmasked dc rate vs rounded masked rate.
    let parts = eval_dc_parts(&inst, &report.relaxed);
    let d = inst.dims;
    for u in 0..d.cells * d.users {
        let relaxed_rate = parts.per_user_log_signal[u] - parts.per_user_log_interference[u];
        let x_mass: f64 = match inst.scenario {
            Scenario::Gas => (0..d.subchannels)
                .map(|s| report.relaxed.subchannel[d.bms_index(u / d.users, u % d.users, s)])
                .sum(),
            Scenario::Cas => (0..d.subchannels)
                .flat_map(|s| (0..d.antennas).map(move |qq| (s, qq)))
                .map(|(s, qq)| report.relaxed.subchannel[d.link_index(u / d.users, u % d.users, s, qq)])
                .sum(),
        };
        println!(
            "user {u:2}: relaxed_dc_rate={:7.3} x_mass={:6.3} rounded_rate={:7.3}",
            relaxed_rate, x_mass, report.metrics.per_user_rate[u]
        );
    }
}
