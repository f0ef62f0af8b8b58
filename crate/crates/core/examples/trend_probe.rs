//! Mini Q-sweep to eyeball the EE/SE trends before freezing acceptance runs.
use seesaw_core::sim::*;
use seesaw_core::solver::SolverConfig;
use seesaw_core::Scenario;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let p_ant: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7.0);
    let reals: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let nu: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let mut spec = InstanceSpec::defaults(6, Scenario::Gas);
    spec.p_antenna_dbm = p_ant;
    let plan = ExperimentPlan {
        spec,
        sweep: SweepVar::AntennaCount(vec![1, 2, 3, 4, 5, 6]),
        scenarios: vec![ScenarioChoice::Gas, ScenarioChoice::Cas, ScenarioChoice::NoSelection],
        realizations: reals,
        master_seed: 2026,
        solver: SolverConfig::default(),
        nu,
    };
    let t0 = Instant::now();
    let table = run_monte_carlo(&plan).unwrap();
    println!("p_ant={p_ant} dBm, nu={nu}, realizations={reals}, elapsed={:.1?}", t0.elapsed());
    println!("{:<10} {:>3} {:>12} {:>10} {:>10} {:>10} {:>6} {:>4}", "scenario", "q", "mean_ee", "se_ee", "mean_se", "mean_pow", "infeas", "n");
    for r in &table.rows {
        println!(
            "{:<10} {:>3} {:>12.4e} {:>10.2e} {:>10.3} {:>10.1} {:>6} {:>4}",
            r.scenario, r.value, r.mean_ee, r.se_ee, r.mean_se, r.mean_power, r.infeasible_count, r.n
        );
    }
}
