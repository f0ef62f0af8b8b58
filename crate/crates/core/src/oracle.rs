//! Independent brute-force reference solver for small instances.
//!
//! Every feasible binary assignment pattern is enumerated; powers are then
//! optimized exactly per user when there is a single cell (no interference,
//! so the problem separates), or by grid search over a logarithmic power grid
//! when cells interfere. The oracle deliberately shares no machinery with the
//! iterative solver: it sees only the model-level rate and metric
//! definitions.

use thiserror::Error;

use crate::model::{compute_metrics, Allocation, ProblemInstance, Scenario};
use crate::transform::{weighted_objective, WeightedObjectiveConfig};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "instance too large for exhaustive search: {patterns} assignment patterns \
         (~{evaluations} power evaluations) exceed the cap of {cap}"
    )]
    TooLarge { patterns: u128, evaluations: u128, cap: u64 },
}

/// Brute-force controls: grid resolution per active link and the cap on the
/// total enumeration effort.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub power_grid_points: usize,
    pub max_enumeration: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { power_grid_points: 25, max_enumeration: 1_000_000 }
    }
}

/// Result of a brute-force solve.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub alloc: Allocation,
    /// Weighted objective of the best feasible combination, or -inf if none.
    pub objective: f64,
    pub feasible: bool,
    /// Bound on the objective loss from finite grid resolution (a small
    /// precision floor is reported for the exact single-cell tier).
    pub grid_error: f64,
    /// Number of assignment patterns examined.
    pub patterns: u128,
}

fn falling_factorial(m: u128, k: u128) -> u128 {
    (0..k).map(|i| m - i).product()
}

/// Stirling numbers of the second kind S(n, k) for n up to `n`.
fn stirling2(n: usize) -> Vec<Vec<u128>> {
    let mut t = vec![vec![0u128; n + 1]; n + 1];
    t[0][0] = 1;
    for i in 1..=n {
        for k in 1..=i {
            t[i][k] = t[i - 1][k - 1] + k as u128 * t[i - 1][k];
        }
    }
    t
}

/// Closed-form count of the binary assignment patterns the enumeration
/// yields.
pub fn pattern_count(inst: &ProblemInstance) -> u128 {
    let d = inst.dims;
    let (m, q) = (d.users as u128, d.antennas as u128);
    match inst.scenario {
        Scenario::Gas => {
            // Per (cell, sub-channel): joint owner and antenna choice.
            (m * q).pow((d.cells * d.subchannels) as u32)
        }
        Scenario::Cas => {
            // Per cell: sum over owner assignments of Q^(distinct owners);
            // inactive users keep a canonical antenna and are not enumerated.
            let s2 = stirling2(d.subchannels);
            let mut per_cell = 0u128;
            for k in 1..=d.subchannels.min(d.users) {
                per_cell +=
                    falling_factorial(m, k as u128) * s2[d.subchannels][k] * q.pow(k as u32);
            }
            per_cell.pow(d.cells as u32)
        }
    }
}

/// Iterator over every binary (x, a) pattern satisfying the assignment
/// constraints, in lexicographic order. Powers are zero.
pub struct AssignmentIter<'a> {
    inst: &'a ProblemInstance,
    /// Owner digits per (b, s); GAS packs (owner, antenna) into one digit of
    /// radix M*Q.
    owners: Vec<usize>,
    /// CAS antenna digits for the currently active users.
    antennas: Vec<usize>,
    active_users: Vec<usize>,
    fresh: bool,
    done: bool,
}

/// Enumerates assignment patterns after checking the enumeration cap.
pub fn enumerate_assignments<'a>(
    inst: &'a ProblemInstance,
    cfg: &OracleConfig,
) -> Result<AssignmentIter<'a>, OracleError> {
    let patterns = pattern_count(inst);
    if patterns > cfg.max_enumeration as u128 {
        return Err(OracleError::TooLarge {
            patterns,
            evaluations: patterns,
            cap: cfg.max_enumeration,
        });
    }
    Ok(AssignmentIter {
        inst,
        owners: vec![0; inst.dims.cells * inst.dims.subchannels],
        antennas: Vec::new(),
        active_users: Vec::new(),
        fresh: true,
        done: false,
    })
}

impl AssignmentIter<'_> {
    fn build(&self) -> Allocation {
        let inst = self.inst;
        let d = inst.dims;
        let mut alloc = Allocation::zeros(inst);
        match inst.scenario {
            Scenario::Gas => {
                for b in 0..d.cells {
                    for s in 0..d.subchannels {
                        let digit = self.owners[b * d.subchannels + s];
                        let (m, q) = (digit / d.antennas, digit % d.antennas);
                        alloc.subchannel[d.bms_index(b, m, s)] = 1.0;
                        alloc.antenna[d.link_index(b, m, s, q)] = 1.0;
                    }
                }
            }
            Scenario::Cas => {
                let mut chosen = vec![0usize; d.cells * d.users];
                for (i, &u) in self.active_users.iter().enumerate() {
                    chosen[u] = self.antennas[i];
                }
                for b in 0..d.cells {
                    for m in 0..d.users {
                        alloc.antenna[d.bmq_index(b, m, chosen[d.user_index(b, m)])] = 1.0;
                    }
                    for s in 0..d.subchannels {
                        let m = self.owners[b * d.subchannels + s];
                        alloc.subchannel[d.link_index(b, m, s, chosen[d.user_index(b, m)])] = 1.0;
                    }
                }
            }
        }
        alloc
    }

    fn refresh_active_users(&mut self) {
        let d = self.inst.dims;
        let mut seen = vec![false; d.cells * d.users];
        for b in 0..d.cells {
            for s in 0..d.subchannels {
                seen[d.user_index(b, self.owners[b * d.subchannels + s])] = true;
            }
        }
        self.active_users = (0..seen.len()).filter(|u| seen[*u]).collect();
        self.antennas = vec![0; self.active_users.len()];
    }

    /// Advances a mixed-radix counter; returns false on wrap-around.
    fn advance(digits: &mut [usize], radix: usize) -> bool {
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < radix {
                return true;
            }
            *d = 0;
        }
        false
    }
}

impl Iterator for AssignmentIter<'_> {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        if self.done {
            return None;
        }
        let d = self.inst.dims;
        match self.inst.scenario {
            Scenario::Gas => {
                let out = self.build();
                if !Self::advance(&mut self.owners, d.users * d.antennas) {
                    self.done = true;
                }
                Some(out)
            }
            Scenario::Cas => {
                if self.fresh {
                    self.refresh_active_users();
                    self.fresh = false;
                }
                let out = self.build();
                if !Self::advance(&mut self.antennas, d.antennas) {
                    if Self::advance(&mut self.owners, d.users) {
                        self.refresh_active_users();
                    } else {
                        self.done = true;
                    }
                }
                Some(out)
            }
        }
    }
}

/// Active transmit links of a pattern, grouped per user.
fn active_links_per_user(inst: &ProblemInstance, pattern: &Allocation) -> Vec<Vec<usize>> {
    let d = inst.dims;
    let mut per_user = vec![Vec::new(); d.cells * d.users];
    for b in 0..d.cells {
        for m in 0..d.users {
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    if pattern.mask(inst, b, m, s, q) > 0.5 {
                        per_user[d.user_index(b, m)].push(d.link_index(b, m, s, q));
                    }
                }
            }
        }
    }
    per_user
}

/// Exact single-user power optimization for the interference-free case.
///
/// Every KKT point of max alpha*R(p) - beta*sum(p) subject to the budget and
/// the minimum rate lies on the water-filling family p_e(w) = max(0, w - 1/c_e),
/// so the optimum reduces to clamping the unconstrained water level into
/// [w(rate), w(budget)]. Returns per-link powers, or None when the rate
/// demand is unreachable within the budget.
fn waterfill_user(
    coeffs: &[f64], // c_e = gain / noise, 1/mW
    p_max: f64,
    r_min: f64,
    alpha: f64,
    beta: f64,
) -> Option<Vec<f64>> {
    let n = coeffs.len();
    if n == 0 {
        return if r_min > 0.0 { None } else { Some(Vec::new()) };
    }
    if coeffs.iter().any(|c| *c <= 0.0) && r_min > 0.0 && coeffs.iter().all(|c| *c <= 0.0) {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| coeffs[j].partial_cmp(&coeffs[i]).unwrap().then(i.cmp(&j)));
    let thresholds: Vec<f64> = idx.iter().map(|&i| 1.0 / coeffs[i]).collect();

    // Largest level the budget allows: piecewise-linear in w over the sorted
    // thresholds.
    let mut w_budget = f64::INFINITY;
    let mut prefix = 0.0;
    for k in 1..=n {
        prefix += thresholds[k - 1];
        let w = (p_max + prefix) / k as f64;
        let hi = if k < n { thresholds[k] } else { f64::INFINITY };
        if w >= thresholds[k - 1] - 1e-15 && w <= hi {
            w_budget = w;
            break;
        }
    }

    // Smallest level meeting the rate demand: k*log2(w) + sum log2(c) = r_min
    // per segment.
    let w_rate = if r_min <= 0.0 {
        0.0
    } else {
        let mut found = f64::INFINITY;
        let mut log_sum = 0.0;
        for k in 1..=n {
            log_sum += coeffs[idx[k - 1]].log2();
            let w = 2f64.powf((r_min - log_sum) / k as f64);
            let hi = if k < n { thresholds[k] } else { f64::INFINITY };
            if w >= thresholds[k - 1] - 1e-15 && w <= hi {
                found = w;
                break;
            }
        }
        found
    };

    if w_rate > w_budget * (1.0 + 1e-12) {
        return None;
    }
    let w_free = if beta > 0.0 {
        alpha / (beta * std::f64::consts::LN_2)
    } else if alpha > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let w = w_free.clamp(w_rate.min(w_budget), w_budget);

    let mut powers = vec![0.0; n];
    for (sorted_pos, &i) in idx.iter().enumerate() {
        powers[i] = (w - thresholds[sorted_pos]).max(0.0).min(p_max);
    }
    Some(powers)
}

/// Exhaustive solve: enumerate assignment patterns, optimize powers for each,
/// return the best feasible combination and its weighted objective. Single
/// cell instances use the exact per-user tier; multi-cell instances grid the
/// powers. Ties keep the lexicographically first pattern.
pub fn oracle_solve(
    inst: &ProblemInstance,
    obj: &WeightedObjectiveConfig,
    cfg: &OracleConfig,
) -> Result<OracleOutcome, OracleError> {
    let d = inst.dims;
    let patterns = pattern_count(inst);
    let exact_tier = d.cells == 1;
    let grid = if exact_tier { Vec::new() } else { power_grid(inst, cfg) };
    let evaluations = if exact_tier {
        patterns
    } else {
        let combos = (grid.len() as u128 + 1).pow((d.cells * d.subchannels) as u32);
        patterns.saturating_mul(combos)
    };
    if evaluations > cfg.max_enumeration as u128 {
        return Err(OracleError::TooLarge { patterns, evaluations, cap: cfg.max_enumeration });
    }

    let mut best: Option<(f64, Allocation)> = None;
    let mut examined = 0u128;
    for pattern in enumerate_assignments(inst, cfg)? {
        examined += 1;
        let candidate = if exact_tier {
            optimize_exact(inst, obj, &pattern)
        } else {
            optimize_grid(inst, obj, &pattern, &grid)
        };
        if let Some((val, alloc)) = candidate {
            if best.as_ref().map_or(true, |(b, _)| val > *b) {
                best = Some((val, alloc));
            }
        }
    }
    debug_assert_eq!(examined, patterns);

    match best {
        Some((objective, alloc)) => {
            let grid_error = if exact_tier {
                1e-9 // numerical precision floor of the closed-form tier
            } else {
                grid_error_estimate(inst, obj, &alloc, &grid)
            };
            Ok(OracleOutcome { alloc, objective, feasible: true, grid_error, patterns: examined })
        }
        None => Ok(OracleOutcome {
            alloc: Allocation::zeros(inst),
            objective: f64::NEG_INFINITY,
            feasible: false,
            grid_error: 0.0,
            patterns: examined,
        }),
    }
}

fn optimize_exact(
    inst: &ProblemInstance,
    obj: &WeightedObjectiveConfig,
    pattern: &Allocation,
) -> Option<(f64, Allocation)> {
    let per_user = active_links_per_user(inst, pattern);
    let alpha = obj.nu / obj.w_rate;
    let beta = (1.0 - obj.nu) / (obj.w_power * inst.kappa);
    let mut alloc = pattern.clone();
    for links in per_user.iter() {
        // Single cell: the receiver index is the own cell, 0.
        let coeffs: Vec<f64> =
            links.iter().map(|&l| inst.gains[l * inst.dims.cells] / inst.noise_mw).collect();
        let powers = waterfill_user(&coeffs, inst.p_max_mw, inst.r_min, alpha, beta)?;
        for (k, &l) in links.iter().enumerate() {
            alloc.power[l] = powers[k];
        }
    }
    let val = weighted_objective(inst, &alloc, obj);
    Some((val, alloc))
}

/// Log-spaced power grid over three decades below p_max, with exact zero and
/// p_max endpoints.
fn power_grid(inst: &ProblemInstance, cfg: &OracleConfig) -> Vec<f64> {
    let n = cfg.power_grid_points.max(2);
    let mut grid = Vec::with_capacity(n);
    grid.push(0.0);
    if n == 2 {
        grid.push(inst.p_max_mw);
        return grid;
    }
    let decades = 3.0;
    for i in 1..n {
        let frac = (n - 1 - i) as f64 / (n - 2) as f64;
        grid.push(inst.p_max_mw * 10f64.powf(-decades * frac));
    }
    grid
}

fn unpack_cell(d: crate::model::Dims, link: usize) -> usize {
    link / (d.users * d.subchannels * d.antennas)
}

fn optimize_grid(
    inst: &ProblemInstance,
    obj: &WeightedObjectiveConfig,
    pattern: &Allocation,
    grid: &[f64],
) -> Option<(f64, Allocation)> {
    let d = inst.dims;
    let per_user = active_links_per_user(inst, pattern);
    if inst.r_min > 0.0 && per_user.iter().any(|l| l.is_empty()) {
        return None;
    }
    let links: Vec<usize> = per_user.iter().flatten().copied().collect();
    let user_of: Vec<usize> = per_user
        .iter()
        .enumerate()
        .flat_map(|(u, l)| std::iter::repeat(u).take(l.len()))
        .collect();

    // Per-link candidate values: the shared grid plus the single-link rate
    // equality point (noise-only approximation) where a user has one link.
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(links.len());
    for (k, &l) in links.iter().enumerate() {
        let mut c = grid.to_vec();
        if inst.r_min > 0.0 && per_user[user_of[k]].len() == 1 {
            let own = unpack_cell(d, l);
            let gain = inst.gains[l * d.cells + own];
            if gain > 0.0 {
                let p = inst.noise_mw * (2f64.powf(inst.r_min) - 1.0) / gain;
                if p <= inst.p_max_mw {
                    c.push(p);
                }
            }
        }
        candidates.push(c);
    }

    let n_users = d.cells * d.users;
    let mut alloc = pattern.clone();
    let mut counter = vec![0usize; links.len()];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let mut sums = vec![0.0; n_users];
        let mut ok = true;
        for (k, &l) in links.iter().enumerate() {
            let p = candidates[k][counter[k]];
            sums[user_of[k]] += p;
            alloc.power[l] = p;
            if sums[user_of[k]] > inst.p_max_mw * (1.0 + 1e-12) {
                ok = false;
            }
        }
        if ok {
            let metrics = compute_metrics(inst, &alloc);
            let rate_ok = (0..n_users)
                .all(|u| per_user[u].is_empty() || metrics.per_user_rate[u] >= inst.r_min - 1e-9);
            if rate_ok {
                let val = obj.nu / obj.w_rate * metrics.r_total
                    - (1.0 - obj.nu) / obj.w_power * metrics.p_total_mw;
                if best.as_ref().map_or(true, |(b, _)| val > *b) {
                    let powers = (0..links.len()).map(|k| candidates[k][counter[k]]).collect();
                    best = Some((val, powers));
                }
            }
        }
        let mut advanced = false;
        for k in (0..links.len()).rev() {
            counter[k] += 1;
            if counter[k] < candidates[k].len() {
                advanced = true;
                break;
            }
            counter[k] = 0;
        }
        if !advanced {
            break;
        }
    }

    best.map(|(val, powers)| {
        for (k, &l) in links.iter().enumerate() {
            alloc.power[l] = powers[k];
        }
        (val, alloc)
    })
}

/// Objective variation across one grid step around the reported optimum — an
/// upper bound on what finer gridding could recover.
fn grid_error_estimate(
    inst: &ProblemInstance,
    obj: &WeightedObjectiveConfig,
    alloc: &Allocation,
    grid: &[f64],
) -> f64 {
    let base = weighted_objective(inst, alloc, obj);
    let mut worst = 0.0f64;
    for l in 0..alloc.power.len() {
        let p = alloc.power[l];
        if p == 0.0 {
            continue; // inactive or shut-off links contribute no step error
        }
        let pos = grid.iter().position(|g| (g - p).abs() <= 1e-12 * p.abs().max(1e-300));
        let neighbors: Vec<f64> = match pos {
            Some(i) => {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(grid[i - 1]);
                }
                if i + 1 < grid.len() {
                    v.push(grid[i + 1]);
                }
                v
            }
            // The rate-equality extra point: compare against the whole grid's
            // nearest neighbors.
            None => grid.to_vec(),
        };
        for g in neighbors {
            let mut perturbed = alloc.clone();
            perturbed.power[l] = g;
            let val = weighted_objective(inst, &perturbed, obj);
            worst = worst.max((val - base).abs());
        }
    }
    worst
}

/// Solution-quality ratio of a candidate objective against a reference
/// optimum, oriented so that 1.0 means matching the reference and smaller
/// means worse regardless of the objective's sign. For positive references
/// this is candidate/reference; for negative ones (power-minimization
/// regimes, where less negative is better) the ratio inverts; near-zero
/// references fall back to an absolute-gap measure.
pub fn quality_ratio(candidate: f64, reference: f64) -> f64 {
    const EPS: f64 = 1e-12;
    if reference > EPS {
        candidate / reference
    } else if reference < -EPS {
        reference / candidate.min(-EPS)
    } else {
        1.0 - (candidate - reference).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn instance(dims: Dims, scenario: Scenario, gains: Vec<f64>, r_min: f64) -> ProblemInstance {
        ProblemInstance {
            dims,
            gains,
            noise_mw: 1.0,
            p_max_mw: 10.0,
            r_min,
            kappa: 1.0,
            p_static_mw: 5.0,
            p_antenna_mw: 1.0,
            scenario,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn gas_pattern_counts_match_enumeration() {
        // 2 users, 2 sub-channels, 1 antenna: 2 owner choices per sub-channel.
        let dims = Dims { cells: 1, users: 2, subchannels: 2, antennas: 1 };
        let inst = instance(dims, Scenario::Gas, vec![1.0; dims.links()], 0.0);
        assert_eq!(pattern_count(&inst), 4);
        let cfg = OracleConfig::default();
        assert_eq!(enumerate_assignments(&inst, &cfg).unwrap().count(), 4);

        // Antenna choice only.
        let dims = Dims { cells: 1, users: 1, subchannels: 1, antennas: 2 };
        let inst = instance(dims, Scenario::Gas, vec![1.0; dims.links()], 0.0);
        assert_eq!(pattern_count(&inst), 2);
        assert_eq!(enumerate_assignments(&inst, &cfg).unwrap().count(), 2);
    }

    #[test]
    fn cas_pattern_count_enumerates_user_and_antenna() {
        // One sub-channel, two users, two antennas: owner choice times that
        // owner's antenna; the idle user's antenna is canonical.
        let dims = Dims { cells: 1, users: 2, subchannels: 1, antennas: 2 };
        let inst = instance(dims, Scenario::Cas, vec![1.0; dims.links()], 0.0);
        assert_eq!(pattern_count(&inst), 4);
        let cfg = OracleConfig::default();
        let patterns: Vec<Allocation> = enumerate_assignments(&inst, &cfg).unwrap().collect();
        assert_eq!(patterns.len(), 4);
        for p in &patterns {
            let rep = crate::model::check_feasibility(&inst, p, 1e-12);
            assert_eq!(rep.subchannel_assignment, 0.0);
            assert_eq!(rep.antenna_assignment, 0.0);
        }
        let mut seen = std::collections::HashSet::new();
        for p in &patterns {
            let key: Vec<u8> =
                p.subchannel.iter().chain(p.antenna.iter()).map(|v| *v as u8).collect();
            assert!(seen.insert(key), "duplicate pattern emitted");
        }
    }

    #[test]
    fn larger_cas_count_matches_enumeration() {
        let dims = Dims { cells: 1, users: 3, subchannels: 2, antennas: 2 };
        let inst = instance(dims, Scenario::Cas, vec![1.0; dims.links()], 0.0);
        let cfg = OracleConfig::default();
        let n = enumerate_assignments(&inst, &cfg).unwrap().count();
        assert_eq!(pattern_count(&inst), n as u128);
        // 3 two-slot assignments: same owner (3 ways, Q^1) or distinct owners
        // (6 ways, Q^2): 3*2 + 6*4 = 30.
        assert_eq!(n, 30);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let dims = Dims { cells: 2, users: 4, subchannels: 4, antennas: 4 };
        let inst = instance(dims, Scenario::Gas, vec![1.0; dims.links() * dims.cells], 0.0);
        let cfg = OracleConfig { power_grid_points: 25, max_enumeration: 1000 };
        match enumerate_assignments(&inst, &cfg) {
            Err(OracleError::TooLarge { patterns, cap, .. }) => {
                assert_eq!(patterns, 16u128.pow(8));
                assert_eq!(cap, 1000);
            }
            _ => panic!("expected enumeration refusal"),
        }
    }

    #[test]
    fn single_link_rate_endpoint_uses_full_budget() {
        let dims = Dims { cells: 1, users: 1, subchannels: 1, antennas: 1 };
        let inst = instance(dims, Scenario::Gas, vec![2.0], 0.0);
        let obj = WeightedObjectiveConfig { nu: 1.0, w_rate: 3.0, w_power: 1.0, lambda: 0.0 };
        let out = oracle_solve(&inst, &obj, &OracleConfig::default()).unwrap();
        assert!(out.feasible);
        assert!((out.alloc.power[0] - 10.0).abs() < 1e-9);
        let expect = (1.0f64 + 10.0 * 2.0).log2() / 3.0;
        assert!((out.objective - expect).abs() < 1e-9);
    }

    #[test]
    fn power_min_meets_rate_with_equality() {
        let dims = Dims { cells: 1, users: 1, subchannels: 1, antennas: 1 };
        let mut inst = instance(dims, Scenario::Gas, vec![4.0], 3.0);
        inst.noise_mw = 2.0;
        let obj = WeightedObjectiveConfig { nu: 0.0, w_rate: 1.0, w_power: 50.0, lambda: 0.0 };
        let out = oracle_solve(&inst, &obj, &OracleConfig::default()).unwrap();
        assert!(out.feasible);
        let expect = 2.0 * (2f64.powi(3) - 1.0) / 4.0;
        assert!((out.alloc.power[0] - expect).abs() < 1e-9);
    }

    #[test]
    fn unreachable_rate_is_infeasible() {
        let dims = Dims { cells: 1, users: 1, subchannels: 1, antennas: 1 };
        let inst = instance(dims, Scenario::Gas, vec![1e-9], 20.0);
        let obj = WeightedObjectiveConfig { nu: 0.5, w_rate: 1.0, w_power: 1.0, lambda: 0.0 };
        let out = oracle_solve(&inst, &obj, &OracleConfig::default()).unwrap();
        assert!(!out.feasible);
        assert_eq!(out.objective, f64::NEG_INFINITY);
    }

    #[test]
    fn waterfill_splits_like_classic_waterfilling() {
        // Full budget used, levels equalized above thresholds:
        // p_0 - p_1 = 1/c_1 - 1/c_0 = 0.5.
        let powers = waterfill_user(&[2.0, 1.0], 3.0, 0.0, 1.0, 0.0).unwrap();
        assert!((powers.iter().sum::<f64>() - 3.0).abs() < 1e-9);
        assert!((powers[0] - powers[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn waterfill_interior_optimum_leaves_budget_slack() {
        // alpha/(beta ln2) below the budget level: spend only to the
        // unconstrained optimum.
        let c = 4.0;
        let alpha = 1.0;
        let beta = 0.5;
        let powers = waterfill_user(&[c], 100.0, 0.0, alpha, beta).unwrap();
        let w = alpha / (beta * std::f64::consts::LN_2);
        assert!((powers[0] - (w - 1.0 / c)).abs() < 1e-9);
    }

    #[test]
    fn quality_ratio_orients_both_signs() {
        assert!((quality_ratio(0.9, 1.0) - 0.9).abs() < 1e-12);
        assert!((quality_ratio(-1.0, -0.9) - 0.9).abs() < 1e-12);
        assert_eq!(quality_ratio(1.0, 1.0), 1.0);
        assert_eq!(quality_ratio(-0.9, -0.9), 1.0);
        assert_eq!(quality_ratio(0.0, 0.0), 1.0);
    }
}
