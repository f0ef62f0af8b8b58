//! Replay the rounding/polish of the failing realization step by step.
use seesaw_core::model::{check_feasibility, compute_metrics};
use seesaw_core::sim::*;
use seesaw_core::solver::*;
use seesaw_core::transform::*;
use seesaw_core::Scenario;

fn main() {
    let spec = InstanceSpec::defaults(6, Scenario::Gas);
    let seed = realization_seed(2026, 3);
    let (master, _) = generate_instance(&spec, seed);
    let mut inst = restrict(&master, 8, 1);
    inst.scenario = Scenario::Gas;
    let mut cfg = SolverConfig::default();
    cfg.seed = seed;
    let obj = WeightedObjectiveConfig::with_default_normalization(&inst, 0.5, cfg.lambda_init);
    let report = mm_solve(&inst, &cfg, &obj).unwrap();

    // Re-do the rounding by hand: mask relaxed powers onto the rounded support.
    let polished = round_and_polish(&inst, &report.relaxed, &cfg, &obj);
    let d = inst.dims;
    let mut masked = polished.alloc.clone();
    for b in 0..d.cells {
        for m in 0..d.users {
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    let j = d.link_index(b, m, s, q);
                    masked.power[j] = if polished.alloc.mask(&inst, b, m, s, q) > 0.5 {
                        report.relaxed.power[j].max(0.0)
                    } else {
                        0.0
                    };
                }
            }
        }
    }
    let mm = compute_metrics(&inst, &masked);
    let mp = compute_metrics(&inst, &polished.alloc);
    println!("masked-relaxed per-user rates:  {:?}", mm.per_user_rate.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>());
    println!("polished per-user rates:        {:?}", mp.per_user_rate.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>());
    let rep = check_feasibility(&inst, &polished.alloc, 1e-8);
    println!("polish feasible={} c5={:.3}", polished.feasible, rep.min_rate);
    println!("masked objective={:.6} polished objective={:.6}",
        weighted_objective(&inst, &masked, &obj),
        weighted_objective(&inst, &polished.alloc, &obj));
    // Per-user power sums on the two.
    for u in 0..d.cells * d.users {
        let (b, m) = (u / d.users, u % d.users);
        let pm: f64 = (0..d.subchannels).map(|s| masked.power[d.link_index(b, m, s, 0)]).sum();
        let pp: f64 = (0..d.subchannels).map(|s| polished.alloc.power[d.link_index(b, m, s, 0)]).sum();
        if (pm - pp).abs() > 1.0 || mp.per_user_rate[u] < inst.r_min - 1e-6 {
            println!("user {u:2}: masked_p={pm:8.2} polished_p={pp:8.2} masked_rate={:6.2} polished_rate={:6.2}", mm.per_user_rate[u], mp.per_user_rate[u]);
        }
    }
}
