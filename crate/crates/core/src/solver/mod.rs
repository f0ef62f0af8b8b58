//! The successive-convex-approximation solver: majorize the penalized
//! objective at the current iterate, solve the resulting convex subproblem,
//! repeat until the objective plateaus, escalate the indicator penalty until
//! the relaxation is effectively binary, then round and re-optimize powers.

mod subproblem;

pub use subproblem::{SolveTolerances, SubproblemError};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    check_feasibility, compute_metrics, Allocation, Metrics, ProblemInstance, Scenario,
};
use crate::transform::{
    binary_violation, build_surrogate, dc_penalized_objective, eval_dc_parts, weighted_objective,
    SurrogateModel, WeightedObjectiveConfig,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Outer-loop controls. `lambda_init`, `lambda_mult` and `lambda_max` define
/// the penalty escalation schedule; `delta` is the relative objective-change
/// stopping tolerance per penalty stage.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    pub delta: f64,
    pub inner_tol: f64,
    pub lambda_init: f64,
    pub lambda_mult: f64,
    pub lambda_max: f64,
    /// Escalation stops once sum(t - t^2) over indicators falls below this.
    pub binary_violation_tol: f64,
    /// Indicators at or above this are considered committed when rounding;
    /// the report records the smallest selected relaxed value against it.
    pub rounding_threshold: f64,
    pub seed: u64,
    /// Cap on rate-restoration iterations per invocation.
    pub max_restoration_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iters: 50,
            delta: 1e-4,
            inner_tol: 1e-6,
            lambda_init: 10.0,
            lambda_mult: 10.0,
            lambda_max: 1e8,
            binary_violation_tol: 1e-4,
            rounding_threshold: 0.5,
            seed: 0,
            max_restoration_iters: 15,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if self.max_outer_iters < 1 {
            return Err(SolverError::InvalidConfig("max_outer_iters must be >= 1".into()));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("inner_tol", self.inner_tol),
            ("lambda_init", self.lambda_init),
            ("lambda_mult", self.lambda_mult),
            ("lambda_max", self.lambda_max),
            ("binary_violation_tol", self.binary_violation_tol),
        ] {
            if !(v > 0.0) {
                return Err(SolverError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    fn tolerances(&self) -> SolveTolerances {
        SolveTolerances { gap: self.inner_tol.min(1e-8), feas: self.inner_tol.min(1e-8), max_iter: 200 }
    }
}

/// One accepted outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub lambda: f64,
    /// Penalized objective in the solver's DC form at this iterate.
    pub objective: f64,
    pub binary_violation: f64,
}

/// Everything a solver run produces.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Rounded, power-polished binary allocation.
    pub final_alloc: Allocation,
    /// Last relaxed iterate before rounding.
    pub relaxed: Allocation,
    pub trace: Vec<TraceRow>,
    /// Metrics of `final_alloc` (unpenalized).
    pub metrics: Metrics,
    /// Weighted objective of `final_alloc` (unpenalized).
    pub objective: f64,
    pub converged: bool,
    pub feasible: bool,
    /// Total accepted outer iterations.
    pub iterations: usize,
    /// Interior-point iteration count per subproblem solve.
    pub subproblem_iters: Vec<usize>,
    /// Indicator fractionality of the relaxed solution.
    pub binary_violation: f64,
    /// Smallest relaxed indicator value among rounding selections.
    pub rounding_margin: f64,
}

/// Round-robin sub-channel assignment, strongest-gain antennas, equal power
/// split. Satisfies the assignment and budget constraints by construction;
/// the minimum-rate constraint is not guaranteed and is checked by the caller.
pub fn init_feasible(inst: &ProblemInstance, seed: u64) -> Allocation {
    let d = inst.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alloc = Allocation::zeros(inst);
    let p0 = inst.p_max_mw / d.subchannels as f64;

    // Argmax with seeded tie-breaking over exactly equal values.
    let mut pick_best = |vals: &[f64]| -> usize {
        let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cands: Vec<usize> =
            (0..vals.len()).filter(|i| vals[*i] == best).collect();
        if cands.len() == 1 {
            cands[0]
        } else {
            cands[rng.gen_range(0..cands.len())]
        }
    };

    match inst.scenario {
        Scenario::Gas => {
            for b in 0..d.cells {
                for s in 0..d.subchannels {
                    let m = s % d.users;
                    alloc.subchannel[d.bms_index(b, m, s)] = 1.0;
                    let gains: Vec<f64> =
                        (0..d.antennas).map(|q| inst.direct_gain(b, m, s, q)).collect();
                    let q = pick_best(&gains);
                    alloc.antenna[d.link_index(b, m, s, q)] = 1.0;
                    alloc.power[d.link_index(b, m, s, q)] = p0;
                }
            }
        }
        Scenario::Cas => {
            for b in 0..d.cells {
                let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); d.users];
                for s in 0..d.subchannels {
                    assigned[s % d.users].push(s);
                }
                for m in 0..d.users {
                    let q = if assigned[m].is_empty() {
                        0
                    } else {
                        let totals: Vec<f64> = (0..d.antennas)
                            .map(|q| {
                                assigned[m].iter().map(|&s| inst.direct_gain(b, m, s, q)).sum()
                            })
                            .collect();
                        pick_best(&totals)
                    };
                    alloc.antenna[d.bmq_index(b, m, q)] = 1.0;
                    for &s in &assigned[m] {
                        alloc.subchannel[d.link_index(b, m, s, q)] = 1.0;
                        alloc.power[d.link_index(b, m, s, q)] = p0;
                    }
                }
            }
        }
    }
    alloc
}

/// Worst per-user slack of the relaxed (indicator-free) rate constraint,
/// f_u - g_u - r_min.
fn worst_rate_slack(inst: &ProblemInstance, alloc: &Allocation) -> f64 {
    let parts = eval_dc_parts(inst, alloc);
    let mut worst = f64::INFINITY;
    for u in 0..inst.dims.cells * inst.dims.users {
        worst = worst
            .min(parts.per_user_log_signal[u] - parts.per_user_log_interference[u] - inst.r_min);
    }
    worst
}

/// Public form of the majorized-subproblem solve: maximizes the penalized
/// surrogate objective anchored in `surrogate` over the relaxed constraint
/// set. Returns the optimizer.
pub fn solve_subproblem(
    inst: &ProblemInstance,
    surrogate: &SurrogateModel,
    cfg: &SolverConfig,
    obj: &WeightedObjectiveConfig,
) -> Result<Allocation, SubproblemError> {
    subproblem::solve_full(inst, surrogate, obj, false, &cfg.tolerances()).map(|o| o.alloc)
}

/// One max-min-slack ascent from the given point. Returns the best slack
/// reached; `alloc` holds the corresponding point.
fn maximin_ascent(
    inst: &ProblemInstance,
    alloc: &mut Allocation,
    cfg: &SolverConfig,
    obj: &WeightedObjectiveConfig,
    sub_iters: &mut Vec<usize>,
) -> f64 {
    let tol = cfg.tolerances();
    let mut best = worst_rate_slack(inst, alloc);
    if best >= -1e-9 {
        return best;
    }
    let mut stalls = 0;
    for _ in 0..cfg.max_restoration_iters {
        let surrogate = build_surrogate(inst, alloc);
        match subproblem::solve_full(inst, &surrogate, obj, true, &tol) {
            Ok(out) => {
                sub_iters.push(out.ipm_iterations);
                let now = worst_rate_slack(inst, &out.alloc);
                if now > best {
                    *alloc = out.alloc;
                    best = now;
                }
                if best >= -1e-9 {
                    return best;
                }
                if now <= best + 1e-3 * best.abs().max(1.0) {
                    stalls += 1;
                    if stalls >= 2 {
                        return best;
                    }
                } else {
                    stalls = 0;
                }
            }
            Err(e) => {
                if std::env::var_os("SEESAW_DEBUG").is_some() {
                    eprintln!("restore_rate: {e}");
                }
                return best;
            }
        }
    }
    best
}

/// Drives the relaxed iterate toward satisfying the minimum-rate constraint
/// by maximizing the worst per-user slack, retrying from alternative
/// deterministic starts (rotated round-robin assignments, a low-power
/// variant) when the ascent gets stuck. Returns true when the slack is
/// nonnegative at exit.
fn restore_rate(
    inst: &ProblemInstance,
    alloc: &mut Allocation,
    cfg: &SolverConfig,
    obj: &WeightedObjectiveConfig,
    sub_iters: &mut Vec<usize>,
) -> bool {
    let mut best = maximin_ascent(inst, alloc, cfg, obj, sub_iters);
    if std::env::var_os("SEESAW_DEBUG").is_some() {
        eprintln!("restore_rate primary: slack {best:.4}");
    }
    if best >= -1e-9 {
        return true;
    }
    let rotations = inst.dims.users.min(3);
    for attempt in 0..=rotations {
        let mut candidate = init_feasible(inst, cfg.seed.wrapping_add(attempt as u64));
        candidate.binary = false;
        if attempt == rotations {
            // Low-power start: interference-limited instances sometimes
            // restore more easily from near-silence.
            for p in candidate.power.iter_mut() {
                *p *= 0.05;
            }
        } else {
            rotate_assignment(inst, &mut candidate, attempt + 1);
        }
        let slack = maximin_ascent(inst, &mut candidate, cfg, obj, sub_iters);
        if std::env::var_os("SEESAW_DEBUG").is_some() {
            eprintln!("restore_rate attempt {attempt}: slack {slack:.4}");
        }
        if slack > best {
            best = slack;
            *alloc = candidate;
        }
        if best >= -1e-9 {
            return true;
        }
    }
    false
}

/// Shifts the round-robin sub-channel ownership by `offset` users, keeping
/// the per-user antenna and power pattern of `init_feasible`.
fn rotate_assignment(inst: &ProblemInstance, alloc: &mut Allocation, offset: usize) {
    let d = inst.dims;
    let rotated = {
        let mut shifted = Allocation::zeros(inst);
        let p0 = inst.p_max_mw / d.subchannels as f64;
        match inst.scenario {
            Scenario::Gas => {
                for b in 0..d.cells {
                    for s in 0..d.subchannels {
                        let m = (s + offset) % d.users;
                        shifted.subchannel[d.bms_index(b, m, s)] = 1.0;
                        let mut q_best = 0;
                        for q in 1..d.antennas {
                            if inst.direct_gain(b, m, s, q) > inst.direct_gain(b, m, s, q_best) {
                                q_best = q;
                            }
                        }
                        shifted.antenna[d.link_index(b, m, s, q_best)] = 1.0;
                        shifted.power[d.link_index(b, m, s, q_best)] = p0;
                    }
                }
            }
            Scenario::Cas => {
                for b in 0..d.cells {
                    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); d.users];
                    for s in 0..d.subchannels {
                        assigned[(s + offset) % d.users].push(s);
                    }
                    for m in 0..d.users {
                        let q_best = if assigned[m].is_empty() {
                            0
                        } else {
                            (0..d.antennas)
                                .max_by(|&a, &b2| {
                                    let ga: f64 = assigned[m]
                                        .iter()
                                        .map(|&s| inst.direct_gain(b, m, s, a))
                                        .sum();
                                    let gb: f64 = assigned[m]
                                        .iter()
                                        .map(|&s| inst.direct_gain(b, m, s, b2))
                                        .sum();
                                    ga.partial_cmp(&gb).unwrap()
                                })
                                .unwrap_or(0)
                        };
                        shifted.antenna[d.bmq_index(b, m, q_best)] = 1.0;
                        for &s in &assigned[m] {
                            shifted.subchannel[d.link_index(b, m, s, q_best)] = 1.0;
                            shifted.power[d.link_index(b, m, s, q_best)] = p0;
                        }
                    }
                }
            }
        }
        shifted
    };
    alloc.power = rotated.power;
    alloc.subchannel = rotated.subchannel;
    alloc.antenna = rotated.antenna;
    alloc.binary = false;
}

/// Result of rounding plus power polishing.
#[derive(Debug, Clone)]
pub struct PolishResult {
    pub alloc: Allocation,
    pub feasible: bool,
    /// Smallest relaxed indicator value among the selections made.
    pub rounding_margin: f64,
}

// argmax with lowest-index tie-break
fn argmax(vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    best
}

/// Post-rounding coverage repair: with a positive rate demand, a user left
/// without any sub-channel can never meet it. Starved users take over their
/// strongest sub-channel from an owner holding more than one, lowest indices
/// first, until everyone is covered or no donor remains.
fn repair_coverage(
    inst: &ProblemInstance,
    relaxed: &Allocation,
    owners: &mut [usize],
    margin: &mut f64,
) {
    let d = inst.dims;
    for b in 0..d.cells {
        loop {
            let mut counts = vec![0usize; d.users];
            for s in 0..d.subchannels {
                counts[owners[b * d.subchannels + s]] += 1;
            }
            let Some(starved) = (0..d.users).find(|m| counts[*m] == 0) else { break };
            let mut best: Option<(f64, usize)> = None;
            for s in 0..d.subchannels {
                if counts[owners[b * d.subchannels + s]] < 2 {
                    continue;
                }
                let value = match inst.scenario {
                    Scenario::Gas => relaxed.subchannel[d.bms_index(b, starved, s)],
                    Scenario::Cas => (0..d.antennas)
                        .map(|q| relaxed.subchannel[d.link_index(b, starved, s, q)])
                        .sum(),
                };
                if best.map_or(true, |(v, _)| value > v) {
                    best = Some((value, s));
                }
            }
            let Some((value, s)) = best else { break };
            owners[b * d.subchannels + s] = starved;
            *margin = margin.min(value);
        }
    }
}

fn round_indicators(inst: &ProblemInstance, relaxed: &Allocation) -> (Allocation, f64) {
    let d = inst.dims;
    let mut out = Allocation::zeros(inst);
    let mut margin = f64::INFINITY;
    // Sub-channel owners by argmax of the relaxed indicator mass.
    let mut owners = vec![0usize; d.cells * d.subchannels];
    for b in 0..d.cells {
        for s in 0..d.subchannels {
            let mass: Vec<f64> = (0..d.users)
                .map(|m| match inst.scenario {
                    Scenario::Gas => relaxed.subchannel[d.bms_index(b, m, s)],
                    Scenario::Cas => (0..d.antennas)
                        .map(|q| relaxed.subchannel[d.link_index(b, m, s, q)])
                        .sum(),
                })
                .collect();
            let m = argmax(&mass);
            margin = margin.min(mass[m]);
            owners[b * d.subchannels + s] = m;
        }
    }
    if inst.r_min > 0.0 {
        repair_coverage(inst, relaxed, &mut owners, &mut margin);
    }

    match inst.scenario {
        Scenario::Gas => {
            for b in 0..d.cells {
                for s in 0..d.subchannels {
                    let m = owners[b * d.subchannels + s];
                    out.subchannel[d.bms_index(b, m, s)] = 1.0;
                    let avals: Vec<f64> = (0..d.antennas)
                        .map(|q| relaxed.antenna[d.link_index(b, m, s, q)])
                        .collect();
                    // A repaired owner carries no relaxed antenna mass; fall
                    // back to the strongest direct gain.
                    let q = if avals[argmax(&avals)] > 1e-6 {
                        argmax(&avals)
                    } else {
                        let gains: Vec<f64> =
                            (0..d.antennas).map(|q| inst.direct_gain(b, m, s, q)).collect();
                        argmax(&gains)
                    };
                    out.antenna[d.link_index(b, m, s, q)] = 1.0;
                }
            }
        }
        Scenario::Cas => {
            let mut chosen_q = vec![0usize; d.cells * d.users];
            for b in 0..d.cells {
                for m in 0..d.users {
                    let avals: Vec<f64> =
                        (0..d.antennas).map(|q| relaxed.antenna[d.bmq_index(b, m, q)]).collect();
                    let q = argmax(&avals);
                    margin = margin.min(avals[q]);
                    chosen_q[d.user_index(b, m)] = q;
                    out.antenna[d.bmq_index(b, m, q)] = 1.0;
                }
            }
            for b in 0..d.cells {
                for s in 0..d.subchannels {
                    let m = owners[b * d.subchannels + s];
                    out.subchannel[d.link_index(b, m, s, chosen_q[d.user_index(b, m)])] = 1.0;
                }
            }
        }
    }
    out.binary = true;
    (out, margin)
}

/// Clamps powers into [0, p_max] and rescales any user exceeding its budget.
fn repair_powers(inst: &ProblemInstance, alloc: &mut Allocation) {
    let d = inst.dims;
    for p in alloc.power.iter_mut() {
        *p = p.clamp(0.0, inst.p_max_mw);
    }
    for b in 0..d.cells {
        for m in 0..d.users {
            let mut sum = 0.0;
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    sum += alloc.power[d.link_index(b, m, s, q)];
                }
            }
            if sum > inst.p_max_mw {
                let scale = inst.p_max_mw / sum * (1.0 - 1e-12);
                for s in 0..d.subchannels {
                    for q in 0..d.antennas {
                        alloc.power[d.link_index(b, m, s, q)] *= scale;
                    }
                }
            }
        }
    }
}

/// Power polish on a fixed binary assignment: iterate the power-only
/// majorized subproblem (with max-min-slack restoration when the rate demand
/// is not yet met) until the weighted objective plateaus. Returns false when
/// the assignment cannot reach the rate demand.
fn polish_powers(
    inst: &ProblemInstance,
    binaries: &mut Allocation,
    cfg: &SolverConfig,
    obj: &WeightedObjectiveConfig,
) -> bool {
    // Tight rate margin so that interior-point residuals cannot push the
    // final allocation below r_min at the 1e-8 feasibility tolerance.
    let rate_margin = if inst.r_min > 0.0 { 1e-6 } else { 0.0 };
    let tol = SolveTolerances { gap: 1e-9, feas: 1e-10, max_iter: 200 };
    let mut prev = weighted_objective(inst, binaries, obj);
    let mut restoring = false;
    let mut prev_slack = f64::NEG_INFINITY;
    for _ in 0..30 {
        if restoring {
            match subproblem::solve_power_only(inst, binaries, &binaries.power.clone(), obj, true, rate_margin, &tol) {
                Ok(out) => {
                    let slack = out.min_slack.unwrap_or(f64::NEG_INFINITY);
                    binaries.power = out.alloc.power;
                    if slack >= 0.0 {
                        restoring = false;
                        prev = weighted_objective(inst, binaries, obj);
                    } else if slack <= prev_slack + 1e-9 {
                        return false;
                    } else {
                        prev_slack = slack;
                    }
                }
                Err(_) => return false,
            }
            continue;
        }
        match subproblem::solve_power_only(inst, binaries, &binaries.power.clone(), obj, false, rate_margin, &tol) {
            Ok(out) => {
                let mut cand = binaries.clone();
                cand.power = out.alloc.power;
                if inst.r_min > 0.0 {
                    let worst = compute_metrics(inst, &cand)
                        .per_user_rate
                        .iter()
                        .cloned()
                        .fold(f64::INFINITY, f64::min);
                    if worst < inst.r_min - 1e-9 {
                        // Loose interior-point pass; re-enter restoration.
                        restoring = true;
                        prev_slack = f64::NEG_INFINITY;
                        continue;
                    }
                }
                let val = weighted_objective(inst, &cand, obj);
                if val < prev - cfg.inner_tol * prev.abs().max(1.0) {
                    break;
                }
                let done = (val - prev).abs() <= cfg.delta * prev.abs().max(1.0);
                *binaries = cand;
                prev = val;
                if done {
                    break;
                }
            }
            Err(SubproblemError::Infeasible) => {
                restoring = true;
                prev_slack = f64::NEG_INFINITY;
            }
            Err(_) => break,
        }
    }
    if inst.r_min > 0.0 {
        let worst = compute_metrics(inst, binaries)
            .per_user_rate
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        worst >= inst.r_min - 1e-9
    } else {
        true
    }
}

/// Moves one sub-channel in the given cell from the donor with the largest
/// rate slack (holding at least two) to the user `short`, reselecting the
/// strongest antenna on the moved channel. Returns false when no donor
/// exists.
fn reassign_channel(
    inst: &ProblemInstance,
    binaries: &mut Allocation,
    cell: usize,
    short: usize,
    rates: &[f64],
) -> bool {
    let d = inst.dims;
    let mut counts = vec![0usize; d.users];
    let mut owner_of = vec![0usize; d.subchannels];
    for s in 0..d.subchannels {
        for m in 0..d.users {
            let owned = match inst.scenario {
                Scenario::Gas => binaries.subchannel[d.bms_index(cell, m, s)] > 0.5,
                Scenario::Cas => (0..d.antennas)
                    .any(|q| binaries.subchannel[d.link_index(cell, m, s, q)] > 0.5),
            };
            if owned {
                counts[m] += 1;
                owner_of[s] = m;
            }
        }
    }
    let mut best: Option<(f64, usize)> = None; // (priority, sub-channel)
    for s in 0..d.subchannels {
        let donor = owner_of[s];
        if donor == short || counts[donor] < 2 {
            continue;
        }
        let donor_slack = rates[d.user_index(cell, donor)] - inst.r_min;
        let gain = (0..d.antennas)
            .map(|q| inst.direct_gain(cell, short, s, q))
            .fold(0.0f64, f64::max);
        // Prefer slack-rich donors, then the short user's strongest channel.
        let priority = donor_slack * 1e3 + gain.log10().max(-300.0);
        if best.map_or(true, |(p, _)| priority > p) {
            best = Some((priority, s));
        }
    }
    let Some((_, s)) = best else { return false };
    let donor = owner_of[s];
    match inst.scenario {
        Scenario::Gas => {
            binaries.subchannel[d.bms_index(cell, donor, s)] = 0.0;
            binaries.subchannel[d.bms_index(cell, short, s)] = 1.0;
            for q in 0..d.antennas {
                binaries.antenna[d.link_index(cell, donor, s, q)] = 0.0;
                binaries.power[d.link_index(cell, donor, s, q)] = 0.0;
                binaries.antenna[d.link_index(cell, short, s, q)] = 0.0;
            }
            let mut q_best = 0;
            for q in 1..d.antennas {
                if inst.direct_gain(cell, short, s, q) > inst.direct_gain(cell, short, s, q_best) {
                    q_best = q;
                }
            }
            binaries.antenna[d.link_index(cell, short, s, q_best)] = 1.0;
            binaries.power[d.link_index(cell, short, s, q_best)] =
                inst.p_max_mw / d.subchannels as f64;
        }
        Scenario::Cas => {
            let q_short = (0..d.antennas)
                .find(|&q| binaries.antenna[d.bmq_index(cell, short, q)] > 0.5)
                .unwrap_or(0);
            for q in 0..d.antennas {
                binaries.subchannel[d.link_index(cell, donor, s, q)] = 0.0;
                binaries.power[d.link_index(cell, donor, s, q)] = 0.0;
            }
            binaries.subchannel[d.link_index(cell, short, s, q_short)] = 1.0;
            binaries.power[d.link_index(cell, short, s, q_short)] =
                inst.p_max_mw / d.subchannels as f64;
        }
    }
    // Keep the mover under its budget.
    let mut sum = 0.0;
    for s2 in 0..d.subchannels {
        for q in 0..d.antennas {
            sum += binaries.power[d.link_index(cell, short, s2, q)];
        }
    }
    if sum > inst.p_max_mw {
        let scale = inst.p_max_mw / sum * (1.0 - 1e-12);
        for s2 in 0..d.subchannels {
            for q in 0..d.antennas {
                binaries.power[d.link_index(cell, short, s2, q)] *= scale;
            }
        }
    }
    true
}


/// Greedy discrete improvement on a feasible binary allocation: single
/// sub-channel moves (with power transfer) and antenna swaps, accepted when
/// they improve the weighted objective without breaking the rate demand.
/// Scan order is fixed, so the outcome is deterministic.
fn improve_assignment(
    inst: &ProblemInstance,
    binaries: &mut Allocation,
    obj: &WeightedObjectiveConfig,
) -> bool {
    let d = inst.dims;
    let evaluate = |cand: &Allocation| -> Option<f64> {
        let metrics = compute_metrics(inst, cand);
        if inst.r_min > 0.0 {
            let worst = metrics.per_user_rate.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst < inst.r_min - 1e-9 {
                return None;
            }
        }
        Some(
            obj.nu / obj.w_rate * metrics.r_total
                - (1.0 - obj.nu) / obj.w_power * metrics.p_total_mw,
        )
    };
    let Some(mut incumbent) = evaluate(binaries) else { return false };
    let mut any = false;
    for b in 0..d.cells {
        for s in 0..d.subchannels {
            // Current owner and its transmit antenna on this sub-channel.
            let mut owner = usize::MAX;
            let mut q_owner = 0;
            for m in 0..d.users {
                for q in 0..d.antennas {
                    if binaries.mask(inst, b, m, s, q) > 0.5 {
                        owner = m;
                        q_owner = q;
                    }
                }
            }
            if owner == usize::MAX {
                continue;
            }
            let p_here = binaries.power[d.link_index(b, owner, s, q_owner)];

            // Antenna swaps for the owner (GAS only; CAS antennas are
            // per-user and handled below).
            if inst.scenario == Scenario::Gas {
                for q in 0..d.antennas {
                    if q == q_owner {
                        continue;
                    }
                    let mut cand = binaries.clone();
                    cand.antenna[d.link_index(b, owner, s, q_owner)] = 0.0;
                    cand.antenna[d.link_index(b, owner, s, q)] = 1.0;
                    cand.power[d.link_index(b, owner, s, q_owner)] = 0.0;
                    cand.power[d.link_index(b, owner, s, q)] = p_here;
                    if let Some(val) = evaluate(&cand) {
                        if val > incumbent + 1e-12 {
                            *binaries = cand;
                            incumbent = val;
                            any = true;
                            q_owner = q;
                        }
                    }
                }
            }

            // Ownership moves.
            for m in 0..d.users {
                if m == owner {
                    continue;
                }
                let mut cand = binaries.clone();
                match inst.scenario {
                    Scenario::Gas => {
                        cand.subchannel[d.bms_index(b, owner, s)] = 0.0;
                        cand.subchannel[d.bms_index(b, m, s)] = 1.0;
                        for q in 0..d.antennas {
                            cand.antenna[d.link_index(b, owner, s, q)] = 0.0;
                            cand.power[d.link_index(b, owner, s, q)] = 0.0;
                        }
                        let mut q_best = 0;
                        for q in 1..d.antennas {
                            if inst.direct_gain(b, m, s, q) > inst.direct_gain(b, m, s, q_best) {
                                q_best = q;
                            }
                        }
                        cand.antenna[d.link_index(b, m, s, q_best)] = 1.0;
                        cand.power[d.link_index(b, m, s, q_best)] = p_here;
                    }
                    Scenario::Cas => {
                        let q_new = (0..d.antennas)
                            .find(|&q| cand.antenna[d.bmq_index(b, m, q)] > 0.5)
                            .unwrap_or(0);
                        for q in 0..d.antennas {
                            cand.subchannel[d.link_index(b, owner, s, q)] = 0.0;
                            cand.power[d.link_index(b, owner, s, q)] = 0.0;
                        }
                        cand.subchannel[d.link_index(b, m, s, q_new)] = 1.0;
                        cand.power[d.link_index(b, m, s, q_new)] = p_here;
                    }
                }
                // Respect the mover's budget.
                let mut sum = 0.0;
                for s2 in 0..d.subchannels {
                    for q in 0..d.antennas {
                        sum += cand.power[d.link_index(b, m, s2, q)];
                    }
                }
                if sum > inst.p_max_mw {
                    let scale = inst.p_max_mw / sum * (1.0 - 1e-12);
                    for s2 in 0..d.subchannels {
                        for q in 0..d.antennas {
                            cand.power[d.link_index(b, m, s2, q)] *= scale;
                        }
                    }
                }
                if let Some(val) = evaluate(&cand) {
                    if val > incumbent + 1e-12 {
                        *binaries = cand;
                        incumbent = val;
                        any = true;
                        break; // owner changed; rescan this sub-channel later
                    }
                }
            }
        }
    }

    // CAS: per-user antenna switches, moving every assigned sub-channel.
    if inst.scenario == Scenario::Cas {
        for b in 0..d.cells {
            for m in 0..d.users {
                let q_cur = (0..d.antennas)
                    .find(|&q| binaries.antenna[d.bmq_index(b, m, q)] > 0.5)
                    .unwrap_or(0);
                for q in 0..d.antennas {
                    if q == q_cur {
                        continue;
                    }
                    let mut cand = binaries.clone();
                    cand.antenna[d.bmq_index(b, m, q_cur)] = 0.0;
                    cand.antenna[d.bmq_index(b, m, q)] = 1.0;
                    for s in 0..d.subchannels {
                        let x_old = cand.subchannel[d.link_index(b, m, s, q_cur)];
                        if x_old > 0.5 {
                            cand.subchannel[d.link_index(b, m, s, q_cur)] = 0.0;
                            cand.subchannel[d.link_index(b, m, s, q)] = 1.0;
                            cand.power[d.link_index(b, m, s, q)] =
                                cand.power[d.link_index(b, m, s, q_cur)];
                            cand.power[d.link_index(b, m, s, q_cur)] = 0.0;
                        }
                    }
                    if let Some(val) = evaluate(&cand) {
                        if val > incumbent + 1e-12 {
                            *binaries = cand;
                            incumbent = val;
                            any = true;
                        }
                    }
                }
            }
        }
    }
    any
}

/// Projects a relaxed solution onto binary indicators (argmax per assignment,
/// lowest index on ties) and re-optimizes the powers on the resulting active
/// set. When a user still misses the rate demand, sub-channels migrate from
/// slack-rich donors and the powers are re-polished. Feasibility of the
/// result is verified against the original constraints at tolerance 1e-8.
pub fn round_and_polish(
    inst: &ProblemInstance,
    relaxed: &Allocation,
    cfg: &SolverConfig,
    obj: &WeightedObjectiveConfig,
) -> PolishResult {
    let d = inst.dims;
    let (mut binaries, margin) = round_indicators(inst, relaxed);

    // Start from the relaxed powers masked to the active set.
    for b in 0..d.cells {
        for m in 0..d.users {
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    let j = d.link_index(b, m, s, q);
                    binaries.power[j] = if binaries.mask(inst, b, m, s, q) > 0.5 {
                        relaxed.power[j].max(0.0)
                    } else {
                        0.0
                    };
                }
            }
        }
    }
    repair_powers(inst, &mut binaries);

    let max_moves = d.cells * d.subchannels;
    let mut rate_ok = polish_powers(inst, &mut binaries, cfg, obj);
    for _ in 0..max_moves {
        if rate_ok || inst.r_min <= 0.0 {
            break;
        }
        let rates = compute_metrics(inst, &binaries).per_user_rate;
        let mut worst = (f64::INFINITY, 0usize);
        for (u, r) in rates.iter().enumerate() {
            if *r < worst.0 {
                worst = (*r, u);
            }
        }
        if worst.0 >= inst.r_min - 1e-9 {
            rate_ok = true;
            break;
        }
        let (cell, short) = (worst.1 / d.users, worst.1 % d.users);
        if !reassign_channel(inst, &mut binaries, cell, short, &rates) {
            break;
        }
        rate_ok = polish_powers(inst, &mut binaries, cfg, obj);
    }

    // Discrete local search interleaved with power re-polish: lifts the
    // rounded point to a local optimum of the binary problem.
    if rate_ok {
        for _ in 0..3 {
            if !improve_assignment(inst, &mut binaries, obj) {
                break;
            }
            rate_ok = polish_powers(inst, &mut binaries, cfg, obj) && rate_ok;
        }
    }

    repair_powers(inst, &mut binaries);
    let feasible = rate_ok && check_feasibility(inst, &binaries, 1e-8).feasible();
    PolishResult { alloc: binaries, feasible, rounding_margin: margin }
}

/// Full solve: feasible start, majorization-minimization outer loop with
/// penalty escalation, then rounding and power polish. The penalty factor
/// follows the config's schedule; the `lambda` field of `obj` is ignored.
///
/// The objective trace records the DC-form penalized objective of every
/// accepted iterate; within one penalty stage it is nondecreasing up to
/// `inner_tol` slack.
pub fn mm_solve(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    obj: &WeightedObjectiveConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    if !obj.valid() {
        return Err(SolverError::InvalidConfig("objective config invalid".into()));
    }
    let tol = cfg.tolerances();
    let mut alloc = init_feasible(inst, cfg.seed);
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut sub_iters: Vec<usize> = Vec::new();

    // Best-effort rate restoration from an infeasible start. The main loop
    // can also repair feasibility (its subproblems carry the same rate
    // rows), so a stalled restoration is not final.
    let mut rate_unreachable = false;
    if worst_rate_slack(inst, &alloc) < -1e-9 {
        alloc.binary = false;
        restore_rate(inst, &mut alloc, cfg, obj, &mut sub_iters);
    }

    let mut lambda = cfg.lambda_init;
    let converged;
    'stages: loop {
        let stage_obj = obj.with_lambda(lambda);
        let mut prev = dc_penalized_objective(inst, &alloc, &stage_obj);
        trace.push(TraceRow {
            iteration: trace.len(),
            lambda,
            objective: prev,
            binary_violation: binary_violation(&alloc),
        });
        let mut stage_converged = false;
        for _ in 0..cfg.max_outer_iters {
            let anchor_feasible = worst_rate_slack(inst, &alloc) >= -1e-9;
            let surrogate = build_surrogate(inst, &alloc);
            match subproblem::solve_full(inst, &surrogate, &stage_obj, false, &tol) {
                Ok(out) => {
                    sub_iters.push(out.ipm_iterations);
                    let cand_slack = worst_rate_slack(inst, &out.alloc);
                    if !anchor_feasible {
                        // Repair step: the subproblem solution satisfies the
                        // linearized rate rows, so accept it when it improves
                        // feasibility and restart the ascent baseline.
                        if cand_slack > worst_rate_slack(inst, &alloc) {
                            alloc = out.alloc;
                            prev = dc_penalized_objective(inst, &alloc, &stage_obj);
                            continue;
                        }
                        break;
                    }
                    // A loosely converged interior-point pass can hand back a
                    // point that breaks the true rate constraints; keep the
                    // feasible anchor instead.
                    if cand_slack < -1e-6 {
                        stage_converged = true;
                        break;
                    }
                    let val = dc_penalized_objective(inst, &out.alloc, &stage_obj);
                    if val < prev - cfg.inner_tol * prev.abs().max(1.0) {
                        // Numerical floor reached; the anchor is already
                        // stationary at solver accuracy.
                        stage_converged = true;
                        break;
                    }
                    alloc = out.alloc;
                    trace.push(TraceRow {
                        iteration: trace.len(),
                        lambda,
                        objective: val,
                        binary_violation: binary_violation(&alloc),
                    });
                    if (val - prev).abs() <= cfg.delta * prev.abs().max(1.0) {
                        prev = val;
                        stage_converged = true;
                        break;
                    }
                    prev = val;
                }
                Err(SubproblemError::Infeasible) => {
                    if !restore_rate(inst, &mut alloc, cfg, obj, &mut sub_iters) {
                        rate_unreachable = true;
                        converged = false;
                        break 'stages;
                    }
                    prev = dc_penalized_objective(inst, &alloc, &stage_obj);
                }
                Err(SubproblemError::Numerical(_)) => {
                    // Keep the anchor; the MM contract degrades gracefully.
                    break;
                }
            }
        }
        if binary_violation(&alloc) <= cfg.binary_violation_tol {
            converged = stage_converged;
            break;
        }
        let next = lambda * cfg.lambda_mult;
        if next > cfg.lambda_max * (1.0 + 1e-12) {
            converged = false; // schedule exhausted with fractional indicators
            break;
        }
        lambda = next;
    }
    let converged = converged && !rate_unreachable;

    let relaxed = alloc.clone();
    let polish = round_and_polish(inst, &relaxed, cfg, obj);
    let metrics = compute_metrics(inst, &polish.alloc);
    let objective = weighted_objective(inst, &polish.alloc, obj);
    // The polished point is the arbiter of feasibility; a stalled relaxed
    // phase only matters if the final allocation misses a constraint.
    let feasible = polish.feasible;
    Ok(SolveReport {
        final_alloc: polish.alloc,
        relaxed,
        binary_violation: binary_violation(&alloc),
        trace,
        metrics,
        objective,
        converged,
        feasible,
        iterations: sub_iters.len(),
        subproblem_iters: sub_iters,
        rounding_margin: polish.rounding_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn single_link(gain: f64, noise: f64, p_max: f64, r_min: f64) -> ProblemInstance {
        ProblemInstance {
            dims: Dims { cells: 1, users: 1, subchannels: 1, antennas: 1 },
            gains: vec![gain],
            noise_mw: noise,
            p_max_mw: p_max,
            r_min,
            kappa: 1.0,
            p_static_mw: 5.0,
            p_antenna_mw: 1.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn init_round_robin_one_subchannel_each() {
        let dims = Dims { cells: 1, users: 3, subchannels: 3, antennas: 2 };
        let inst = ProblemInstance {
            dims,
            gains: (0..dims.links() * dims.cells).map(|i| 0.1 + i as f64 * 1e-3).collect(),
            noise_mw: 1.0,
            p_max_mw: 9.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 1.0,
            p_antenna_mw: 1.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let alloc = init_feasible(&inst, 1);
        for m in 0..3 {
            let count: f64 = (0..3).map(|s| alloc.subchannel[dims.bms_index(0, m, s)]).sum();
            assert_eq!(count, 1.0);
        }
        let rep = check_feasibility(&inst, &alloc, 1e-12);
        assert_eq!(rep.subchannel_assignment, 0.0);
        assert_eq!(rep.antenna_assignment, 0.0);
        assert_eq!(rep.power_budget, 0.0);
    }

    #[test]
    fn init_single_antenna_forced() {
        let inst = single_link(1.0, 1.0, 10.0, 0.0);
        let alloc = init_feasible(&inst, 42);
        assert_eq!(alloc.antenna[0], 1.0);
        assert_eq!(alloc.power[0], 10.0);
    }

    #[test]
    fn init_budget_respected_when_users_exceed_subchannels() {
        let dims = Dims { cells: 1, users: 2, subchannels: 4, antennas: 1 };
        let inst = ProblemInstance {
            dims,
            gains: vec![1.0; dims.links()],
            noise_mw: 1.0,
            p_max_mw: 8.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 1.0,
            p_antenna_mw: 1.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let alloc = init_feasible(&inst, 0);
        for m in 0..2 {
            let sum: f64 = (0..4).map(|s| alloc.power[dims.link_index(0, m, s, 0)]).sum();
            assert!(sum <= 8.0 + 1e-12);
            assert!((sum - 4.0).abs() < 1e-12); // 2 sub-channels at p_max / S
        }
    }

    #[test]
    fn subproblem_maxes_power_when_rate_is_free() {
        // nu = 1, no rate demand, single link: the rate is increasing in p,
        // so the optimum sits on the budget.
        let inst = single_link(2.0, 1.0, 10.0, 0.0);
        let cfg = SolverConfig::default();
        let obj = WeightedObjectiveConfig { nu: 1.0, w_rate: 1.0, w_power: 1.0, lambda: 0.0 };
        let anchor = init_feasible(&inst, 0);
        let surrogate = build_surrogate(&inst, &anchor);
        let sol = solve_subproblem(&inst, &surrogate, &cfg, &obj).unwrap();
        assert!((sol.power[0] - 10.0).abs() < 1e-4 * 10.0);
    }

    #[test]
    fn subproblem_power_min_meets_rate_with_equality() {
        // nu = 0 with a binding rate demand: p* = noise (2^r - 1) / gain.
        let inst = single_link(4.0, 2.0, 50.0, 3.0);
        let cfg = SolverConfig::default();
        let obj = WeightedObjectiveConfig { nu: 0.0, w_rate: 1.0, w_power: 100.0, lambda: 0.0 };
        let anchor = init_feasible(&inst, 0);
        let surrogate = build_surrogate(&inst, &anchor);
        let sol = solve_subproblem(&inst, &surrogate, &cfg, &obj).unwrap();
        let expect = 2.0 * (2f64.powi(3) - 1.0) / 4.0; // 3.5 mW
        assert!(
            (sol.power[0] - expect).abs() < 1e-4 * expect,
            "p = {}, expected {expect}",
            sol.power[0]
        );
    }

    #[test]
    fn subproblem_keeps_stationary_anchor() {
        let inst = single_link(2.0, 1.0, 10.0, 0.0);
        let cfg = SolverConfig::default();
        let obj = WeightedObjectiveConfig { nu: 1.0, w_rate: 1.0, w_power: 1.0, lambda: 0.0 };
        let mut anchor = init_feasible(&inst, 0);
        anchor.power[0] = 10.0; // already optimal
        let surrogate = build_surrogate(&inst, &anchor);
        let sol = solve_subproblem(&inst, &surrogate, &cfg, &obj).unwrap();
        let before = dc_penalized_objective(&inst, &anchor, &obj);
        let after = dc_penalized_objective(&inst, &sol, &obj);
        assert!(after >= before - 1e-7);
        assert!((sol.power[0] - anchor.power[0]).abs() < 1e-3 * 10.0);
    }

    #[test]
    fn mm_solve_trivial_instance_hits_closed_forms() {
        let inst = single_link(2.0, 1.0, 10.0, 0.0);
        let cfg = SolverConfig::default();
        let obj = WeightedObjectiveConfig { nu: 1.0, w_rate: 1.0, w_power: 1.0, lambda: 0.0 };
        let report = mm_solve(&inst, &cfg, &obj).unwrap();
        assert!(report.feasible);
        assert!(!report.trace.is_empty());
        assert!((report.final_alloc.power[0] - 10.0).abs() < 1e-3 * 10.0);
        let expect_rate = (1.0f64 + 2.0 * 10.0).log2();
        assert!((report.metrics.r_total - expect_rate).abs() < 1e-4);

        let inst0 = single_link(4.0, 2.0, 50.0, 3.0);
        let obj0 = WeightedObjectiveConfig { nu: 0.0, w_rate: 1.0, w_power: 100.0, lambda: 0.0 };
        let report0 = mm_solve(&inst0, &cfg, &obj0).unwrap();
        assert!(report0.feasible);
        let expect_p = 2.0 * (2f64.powi(3) - 1.0) / 4.0;
        // The polish phase holds the rate to r_min with a hair of margin.
        assert!(
            (report0.final_alloc.power[0] - expect_p).abs() < 1e-3 * expect_p,
            "p = {}",
            report0.final_alloc.power[0]
        );
    }

    #[test]
    fn mm_solve_reports_unreachable_rate() {
        let inst = single_link(1e-6, 1.0, 1.0, 25.0); // needs ~2^25 / 1e-6 mW
        let cfg = SolverConfig::default();
        let obj = WeightedObjectiveConfig { nu: 0.5, w_rate: 10.0, w_power: 10.0, lambda: 0.0 };
        let report = mm_solve(&inst, &cfg, &obj).unwrap();
        assert!(!report.feasible);
    }

    #[test]
    fn rounding_prefers_heavier_user_and_breaks_ties_low() {
        let dims = Dims { cells: 1, users: 2, subchannels: 1, antennas: 1 };
        let inst = ProblemInstance {
            dims,
            gains: vec![1.0, 1.0],
            noise_mw: 1.0,
            p_max_mw: 4.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 1.0,
            p_antenna_mw: 1.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut relaxed = Allocation::zeros(&inst);
        relaxed.binary = false;
        relaxed.subchannel[dims.bms_index(0, 0, 0)] = 0.9;
        relaxed.subchannel[dims.bms_index(0, 1, 0)] = 0.1;
        relaxed.antenna[dims.link_index(0, 0, 0, 0)] = 0.9;
        relaxed.antenna[dims.link_index(0, 1, 0, 0)] = 0.1;
        relaxed.power[dims.link_index(0, 0, 0, 0)] = 1.0;
        let (rounded, _) = round_indicators(&inst, &relaxed);
        assert_eq!(rounded.subchannel[dims.bms_index(0, 0, 0)], 1.0);
        assert_eq!(rounded.subchannel[dims.bms_index(0, 1, 0)], 0.0);

        // Exact tie goes to the lowest index.
        relaxed.subchannel[dims.bms_index(0, 0, 0)] = 0.5;
        relaxed.subchannel[dims.bms_index(0, 1, 0)] = 0.5;
        let (rounded, margin) = round_indicators(&inst, &relaxed);
        assert_eq!(rounded.subchannel[dims.bms_index(0, 0, 0)], 1.0);
        assert!((margin - 0.5).abs() < 1e-12);
    }

    #[test]
    fn polish_is_idempotent_on_binary_input() {
        let inst = single_link(2.0, 1.0, 10.0, 1.0);
        let cfg = SolverConfig::default();
        let obj = WeightedObjectiveConfig { nu: 1.0, w_rate: 1.0, w_power: 1.0, lambda: 0.0 };
        let mut binary = init_feasible(&inst, 0);
        binary.power[0] = 10.0;
        let polished = round_and_polish(&inst, &binary, &cfg, &obj);
        assert!(polished.feasible);
        assert_eq!(polished.alloc.subchannel, binary.subchannel);
        assert_eq!(polished.alloc.antenna, binary.antenna);
        assert!((polished.alloc.power[0] - 10.0).abs() < 1e-3 * 10.0);
    }

    #[test]
    fn mm_solve_is_deterministic() {
        let dims = Dims { cells: 2, users: 2, subchannels: 2, antennas: 2 };
        let mut v: f64 = 0.13;
        let gains: Vec<f64> = (0..dims.links() * dims.cells)
            .map(|_| {
                v = (v * 883.0).fract();
                1e-3 + v * 1e-2
            })
            .collect();
        let inst = ProblemInstance {
            dims,
            gains,
            noise_mw: 1e-4,
            p_max_mw: 100.0,
            r_min: 1.0,
            kappa: 0.38,
            p_static_mw: 10.0,
            p_antenna_mw: 5.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let cfg = SolverConfig::default();
        let obj = WeightedObjectiveConfig::with_default_normalization(&inst, 0.5, cfg.lambda_init);
        let a = mm_solve(&inst, &cfg, &obj).unwrap();
        let b = mm_solve(&inst, &cfg, &obj).unwrap();
        assert_eq!(a.final_alloc, b.final_alloc);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.metrics, b.metrics);
    }
}
