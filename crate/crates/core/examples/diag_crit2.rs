//! Criterion-2-scale probe: trace monotonicity + terminal binary violation.
use seesaw_core::sim::*;
use seesaw_core::solver::*;
use seesaw_core::transform::*;
use seesaw_core::Scenario;

fn main() {
    let mut spec = InstanceSpec::defaults(2, Scenario::Gas);
    spec.geometry = NetworkGeometry::square_grid(2, 500.0, 1000.0);
    spec.users_per_cell = 2;
    spec.subchannels = 4;
    let mut worst_viol = 0.0f64;
    let mut worst_drop = 0.0f64;
    let mut infeas = 0;
    let n = 30;
    let t0 = std::time::Instant::now();
    for i in 0..n {
        let seed = realization_seed(7, i);
        let (inst, _) = generate_instance(&spec, seed);
        let mut cfg = SolverConfig::default();
        cfg.seed = seed;
        if let Ok(v) = std::env::var("LMAX") { cfg.lambda_max = v.parse().unwrap(); }
        let obj = WeightedObjectiveConfig::with_default_normalization(&inst, 0.5, cfg.lambda_init);
        let report = mm_solve(&inst, &cfg, &obj).unwrap();
        worst_viol = worst_viol.max(report.binary_violation);
        if !report.feasible { infeas += 1; }
        for w in report.trace.windows(2) {
            if w[0].lambda == w[1].lambda {
                worst_drop = worst_drop.max(w[0].objective - w[1].objective);
            }
        }
    }
    println!("n={n} infeasible={infeas} worst_binviol={worst_viol:.3e} worst_in_stage_drop={worst_drop:.3e} elapsed={:.1?}", t0.elapsed());
}
