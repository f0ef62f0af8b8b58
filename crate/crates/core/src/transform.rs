//! Reformulation machinery: weighted objective, indicator penalty, big-M
//! power/indicator coupling, the difference-of-concave split of the rate
//! terms, and the first-order surrogates the iterative solver linearizes
//! against.

use crate::model::{compute_metrics, Allocation, ProblemInstance, Scenario, LN_2};

/// Scalarization and penalty parameters for the weighted rate/power objective.
#[derive(Debug, Clone, Copy)]
pub struct WeightedObjectiveConfig {
    /// Weight on the rate term, in [0, 1]. The power term gets 1 - nu.
    pub nu: f64,
    /// Rate normalization, bits/s/Hz.
    pub w_rate: f64,
    /// Power normalization, mW.
    pub w_power: f64,
    /// Penalty factor on fractional indicators, >= 0.
    pub lambda: f64,
}

impl WeightedObjectiveConfig {
    /// Config with instance-derived normalizations: the rate weight is an
    /// upper bound on the network sum rate (best direct gain at full power on
    /// every sub-channel), the power weight an upper bound on total consumed
    /// power (full budgets plus every RF chain active).
    pub fn with_default_normalization(inst: &ProblemInstance, nu: f64, lambda: f64) -> Self {
        let d = inst.dims;
        let h_max = inst.max_direct_gain();
        let w_rate = (d.cells * d.subchannels) as f64
            * (1.0 + inst.p_max_mw * h_max / inst.noise_mw).log2();
        let w_power = (d.cells * d.users) as f64
            * (inst.p_max_mw / inst.kappa
                + inst.p_static_mw
                + d.antennas as f64 * inst.p_antenna_mw);
        WeightedObjectiveConfig { nu, w_rate, w_power, lambda }
    }

    pub fn valid(&self) -> bool {
        self.w_rate > 0.0
            && self.w_power > 0.0
            && (0.0..=1.0).contains(&self.nu)
            && self.lambda >= 0.0
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// Weighted-sum scalarization of the rate/power objectives:
/// (nu / w_rate) * R_total - ((1 - nu) / w_power) * P_total.
pub fn weighted_objective(
    inst: &ProblemInstance,
    alloc: &Allocation,
    cfg: &WeightedObjectiveConfig,
) -> f64 {
    let m = compute_metrics(inst, alloc);
    cfg.nu / cfg.w_rate * m.r_total - (1.0 - cfg.nu) / cfg.w_power * m.p_total_mw
}

/// Total fractionality of the indicators, sum of t - t^2 over both indicator
/// families. Zero exactly on binary allocations; entries are clamped into
/// [0, 1] first so that solver round-off cannot make the sum negative.
pub fn binary_violation(alloc: &Allocation) -> f64 {
    let term = |t: &f64| {
        let t = t.clamp(0.0, 1.0);
        t - t * t
    };
    alloc.subchannel.iter().map(term).sum::<f64>() + alloc.antenna.iter().map(term).sum::<f64>()
}

/// Weighted objective minus the indicator penalty lambda * sum(t - t^2).
pub fn penalized_objective(
    inst: &ProblemInstance,
    alloc: &Allocation,
    cfg: &WeightedObjectiveConfig,
) -> f64 {
    weighted_objective(inst, alloc, cfg) - cfg.lambda * binary_violation(alloc)
}

// ---------------------------------------------------------------------------
// Big-M constraint set
// ---------------------------------------------------------------------------

/// Linear constraint families that replace the trilinear power coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BigMKind {
    /// p <= x * p_max per link.
    PowerSubchannelCap,
    /// p <= a * p_max per link.
    PowerAntennaCap,
    /// Antenna indicator only where the sub-channel indicator allows it.
    AntennaRequiresSubchannel,
    /// Per-user sum of powers <= p_max.
    PowerBudget,
}

/// One emitted big-M row; `q` is unused for `PowerBudget`.
#[derive(Debug, Clone, Copy)]
pub struct BigMConstraint {
    pub kind: BigMKind,
    pub b: usize,
    pub m: usize,
    pub s: usize,
    pub q: usize,
}

/// The big-M replacement of the trilinear budget constraint, as a checkable
/// list of linear rows.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub rows: Vec<BigMConstraint>,
}

impl BigMConstraint {
    /// Violation of this row at the given allocation (0 when satisfied).
    pub fn violation(&self, inst: &ProblemInstance, alloc: &Allocation) -> f64 {
        let d = inst.dims;
        let v = match self.kind {
            BigMKind::PowerSubchannelCap => {
                alloc.power[d.link_index(self.b, self.m, self.s, self.q)]
                    - alloc.subchannel_ind(inst, self.b, self.m, self.s, self.q) * inst.p_max_mw
            }
            BigMKind::PowerAntennaCap => {
                alloc.power[d.link_index(self.b, self.m, self.s, self.q)]
                    - alloc.antenna_ind(inst, self.b, self.m, self.s, self.q) * inst.p_max_mw
            }
            BigMKind::AntennaRequiresSubchannel => {
                // GAS: a^{sq} <= x^s. CAS: x^{sq} <= a^q.
                match inst.scenario {
                    Scenario::Gas => {
                        alloc.antenna_ind(inst, self.b, self.m, self.s, self.q)
                            - alloc.subchannel_ind(inst, self.b, self.m, self.s, self.q)
                    }
                    Scenario::Cas => {
                        alloc.subchannel_ind(inst, self.b, self.m, self.s, self.q)
                            - alloc.antenna_ind(inst, self.b, self.m, self.s, self.q)
                    }
                }
            }
            BigMKind::PowerBudget => {
                let mut sum = 0.0;
                for s in 0..d.subchannels {
                    for q in 0..d.antennas {
                        sum += alloc.power[d.link_index(self.b, self.m, s, q)];
                    }
                }
                sum - inst.p_max_mw
            }
        };
        v.max(0.0)
    }
}

impl ConstraintSet {
    /// Largest violation within one family.
    pub fn max_violation(&self, inst: &ProblemInstance, alloc: &Allocation, kind: BigMKind) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.violation(inst, alloc))
            .fold(0.0, f64::max)
    }

    pub fn satisfied(&self, inst: &ProblemInstance, alloc: &Allocation, tol: f64) -> bool {
        self.rows.iter().all(|r| r.violation(inst, alloc) <= tol)
    }
}

/// Emits the per-link big-M rows and the per-user budget rows for the
/// instance scenario.
pub fn big_m_constraints(inst: &ProblemInstance) -> ConstraintSet {
    let d = inst.dims;
    let mut rows = Vec::new();
    for b in 0..d.cells {
        for m in 0..d.users {
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    rows.push(BigMConstraint { kind: BigMKind::PowerSubchannelCap, b, m, s, q });
                    rows.push(BigMConstraint { kind: BigMKind::PowerAntennaCap, b, m, s, q });
                    rows.push(BigMConstraint { kind: BigMKind::AntennaRequiresSubchannel, b, m, s, q });
                }
            }
            rows.push(BigMConstraint { kind: BigMKind::PowerBudget, b, m, s: 0, q: 0 });
        }
    }
    ConstraintSet { rows }
}

// ---------------------------------------------------------------------------
// DC decomposition
// ---------------------------------------------------------------------------

/// The concave/convex pieces of the objective and rate constraints, evaluated
/// at one allocation. The rate pieces ignore the indicators: they see raw
/// powers only, which agrees with the indicator-masked rates at binary points
/// that respect the big-M coupling.
#[derive(Debug, Clone)]
pub struct DcParts {
    /// Sum over links of log2(noise + direct + interference).
    pub log_signal: f64,
    /// Sum over links of log2(noise + interference).
    pub log_interference: f64,
    /// Linear antenna-indicator sum.
    pub antenna_sum: f64,
    /// Squared antenna-indicator sum.
    pub antenna_sq_sum: f64,
    /// Linear sub-channel-indicator sum.
    pub subchannel_sum: f64,
    /// Squared sub-channel-indicator sum.
    pub subchannel_sq_sum: f64,
    /// Per-user slice of `log_signal`, indexed (b * users + m).
    pub per_user_log_signal: Vec<f64>,
    /// Per-user slice of `log_interference`.
    pub per_user_log_interference: Vec<f64>,
}

impl DcParts {
    /// F - G, the concave-minus-concave rate total.
    pub fn rate_dc(&self) -> f64 {
        self.log_signal - self.log_interference
    }
}

/// Unmasked interference at base station `rx` on sub-channel `s` (raw powers,
/// no indicators).
pub(crate) fn raw_interference(inst: &ProblemInstance, power: &[f64], rx: usize, s: usize) -> f64 {
    let d = inst.dims;
    let mut acc = 0.0;
    for b in 0..d.cells {
        if b == rx {
            continue;
        }
        for k in 0..d.users {
            for q in 0..d.antennas {
                acc += power[d.link_index(b, k, s, q)] * inst.gain(b, k, s, q, rx);
            }
        }
    }
    acc
}

/// Evaluates every DC piece at the given allocation.
pub fn eval_dc_parts(inst: &ProblemInstance, alloc: &Allocation) -> DcParts {
    let d = inst.dims;
    let n_users = d.cells * d.users;
    let mut log_signal = 0.0;
    let mut log_interference = 0.0;
    let mut per_user_log_signal = vec![0.0; n_users];
    let mut per_user_log_interference = vec![0.0; n_users];

    for b in 0..d.cells {
        for s in 0..d.subchannels {
            let interf = raw_interference(inst, &alloc.power, b, s);
            let base = inst.noise_mw + interf;
            let log_base = base.log2();
            for m in 0..d.users {
                let u = d.user_index(b, m);
                for q in 0..d.antennas {
                    let p = alloc.power[d.link_index(b, m, s, q)];
                    let term = (base + p * inst.direct_gain(b, m, s, q)).log2();
                    log_signal += term;
                    log_interference += log_base;
                    per_user_log_signal[u] += term;
                    per_user_log_interference[u] += log_base;
                }
            }
        }
    }

    let sq = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>();
    DcParts {
        log_signal,
        log_interference,
        antenna_sum: alloc.antenna.iter().sum(),
        antenna_sq_sum: sq(&alloc.antenna),
        subchannel_sum: alloc.subchannel.iter().sum(),
        subchannel_sq_sum: sq(&alloc.subchannel),
        per_user_log_signal,
        per_user_log_interference,
    }
}

/// Penalized objective in the solver's DC form:
/// (nu/w_rate)(F - G) - ((1-nu)/w_power) P_total - lambda * binary violation.
///
/// This is the quantity the majorized subproblems ascend. It coincides with
/// `penalized_objective` on binary allocations whose powers respect the big-M
/// coupling; at relaxed points the rate part ignores indicators.
pub fn dc_penalized_objective(
    inst: &ProblemInstance,
    alloc: &Allocation,
    cfg: &WeightedObjectiveConfig,
) -> f64 {
    let parts = eval_dc_parts(inst, alloc);
    let metrics = compute_metrics(inst, alloc);
    cfg.nu / cfg.w_rate * parts.rate_dc() - (1.0 - cfg.nu) / cfg.w_power * metrics.p_total_mw
        - cfg.lambda * binary_violation(alloc)
}

// ---------------------------------------------------------------------------
// First-order surrogates
// ---------------------------------------------------------------------------

/// An affine model value(anchor) + gradient . (z - anchor).
#[derive(Debug, Clone)]
pub struct AffineModel {
    pub value_at_anchor: f64,
    pub gradient: Vec<f64>,
}

impl AffineModel {
    pub fn eval(&self, anchor: &[f64], point: &[f64]) -> f64 {
        debug_assert_eq!(anchor.len(), point.len());
        debug_assert_eq!(anchor.len(), self.gradient.len());
        let mut acc = self.value_at_anchor;
        for i in 0..point.len() {
            acc += self.gradient[i] * (point[i] - anchor[i]);
        }
        acc
    }
}

/// Tangent models of the linearized DC pieces, anchored at an expansion
/// point. The interference logs are concave in the powers, so their tangents
/// overestimate; the squared indicator sums are convex, so their tangents
/// underestimate.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub anchor: Allocation,
    /// Tangent of G (total interference log), over powers.
    pub log_interference: AffineModel,
    /// Tangent of each user's interference log, over powers.
    pub per_user_log_interference: Vec<AffineModel>,
    /// Tangent of the squared antenna-indicator sum, over antenna indicators.
    pub antenna_sq: AffineModel,
    /// Tangent of the squared sub-channel-indicator sum, over sub-channel
    /// indicators.
    pub subchannel_sq: AffineModel,
}

/// Builds tangent surrogates at `anchor` with analytic gradients.
pub fn build_surrogate(inst: &ProblemInstance, anchor: &Allocation) -> SurrogateModel {
    let d = inst.dims;
    let parts = eval_dc_parts(inst, anchor);

    // d/dp_j log2(noise + I_{b,s}) = gain(j -> b) / (ln2 * (noise + I_{b,s}))
    // for j in a cell other than b on sub-channel s. Precompute the per-(b,s)
    // denominators once.
    let mut denom = vec![0.0; d.cells * d.subchannels];
    for b in 0..d.cells {
        for s in 0..d.subchannels {
            denom[b * d.subchannels + s] =
                inst.noise_mw + raw_interference(inst, &anchor.power, b, s);
        }
    }

    let n_p = d.links();
    let mut grad_total = vec![0.0; n_p];
    let n_users = d.cells * d.users;
    let mut grad_user = vec![vec![0.0; n_p]; n_users];
    let per_link_multiplicity = (d.users * d.antennas) as f64;
    for bj in 0..d.cells {
        for k in 0..d.users {
            for s in 0..d.subchannels {
                for qj in 0..d.antennas {
                    let j = d.link_index(bj, k, s, qj);
                    let mut total = 0.0;
                    for b in 0..d.cells {
                        if b == bj {
                            continue;
                        }
                        let g = inst.gain(bj, k, s, qj, b) / (LN_2 * denom[b * d.subchannels + s]);
                        total += g;
                        // Every user in cell b sums Q identical log terms on
                        // this sub-channel.
                        for m in 0..d.users {
                            grad_user[d.user_index(b, m)][j] += d.antennas as f64 * g;
                        }
                    }
                    grad_total[j] = per_link_multiplicity * total;
                }
            }
        }
    }

    let per_user_log_interference = (0..n_users)
        .map(|u| AffineModel {
            value_at_anchor: parts.per_user_log_interference[u],
            gradient: std::mem::take(&mut grad_user[u]),
        })
        .collect();

    SurrogateModel {
        anchor: anchor.clone(),
        log_interference: AffineModel { value_at_anchor: parts.log_interference, gradient: grad_total },
        per_user_log_interference,
        antenna_sq: AffineModel {
            value_at_anchor: parts.antenna_sq_sum,
            gradient: anchor.antenna.iter().map(|a| 2.0 * a).collect(),
        },
        subchannel_sq: AffineModel {
            value_at_anchor: parts.subchannel_sq_sum,
            gradient: anchor.subchannel.iter().map(|x| 2.0 * x).collect(),
        },
    }
}

impl SurrogateModel {
    /// G-tilde at the given powers.
    pub fn log_interference_at(&self, power: &[f64]) -> f64 {
        self.log_interference.eval(&self.anchor.power, power)
    }

    /// Per-user g-tilde at the given powers.
    pub fn per_user_log_interference_at(&self, user: usize, power: &[f64]) -> f64 {
        self.per_user_log_interference[user].eval(&self.anchor.power, power)
    }

    /// D2-tilde at the given antenna indicators.
    pub fn antenna_sq_at(&self, antenna: &[f64]) -> f64 {
        self.antenna_sq.eval(&self.anchor.antenna, antenna)
    }

    /// E2-tilde at the given sub-channel indicators.
    pub fn subchannel_sq_at(&self, subchannel: &[f64]) -> f64 {
        self.subchannel_sq.eval(&self.anchor.subchannel, subchannel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn two_cell_instance() -> ProblemInstance {
        let dims = Dims { cells: 2, users: 2, subchannels: 2, antennas: 2 };
        let mut gains = Vec::with_capacity(dims.links() * dims.cells);
        // Deterministic spread of gains, direct links stronger than cross.
        let mut v: f64 = 0.37;
        for b in 0..dims.cells {
            for _m in 0..dims.users {
                for _s in 0..dims.subchannels {
                    for _q in 0..dims.antennas {
                        for rx in 0..dims.cells {
                            v = (v * 997.0).fract();
                            gains.push(if b == rx { 1.0 + v } else { 0.1 * (0.5 + v) });
                        }
                    }
                }
            }
        }
        ProblemInstance {
            dims,
            gains,
            noise_mw: 0.8,
            p_max_mw: 10.0,
            r_min: 0.0,
            kappa: 0.5,
            p_static_mw: 5.0,
            p_antenna_mw: 2.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap()
    }

    fn random_point(inst: &ProblemInstance, rng: &mut impl Rng) -> Allocation {
        let mut a = Allocation::zeros(inst);
        a.binary = false;
        for p in a.power.iter_mut() {
            *p = rng.gen::<f64>() * inst.p_max_mw;
        }
        for x in a.subchannel.iter_mut() {
            *x = rng.gen::<f64>();
        }
        for t in a.antenna.iter_mut() {
            *t = rng.gen::<f64>();
        }
        a
    }

    fn known_metrics_instance() -> (ProblemInstance, Allocation) {
        // R_total = 4 (p * h / noise = 15), P_total = 3 (p = 1, kappa = 1,
        // p_static = 2, no antenna power).
        let dims = Dims { cells: 1, users: 1, subchannels: 1, antennas: 1 };
        let inst = ProblemInstance {
            dims,
            gains: vec![15.0],
            noise_mw: 1.0,
            p_max_mw: 10.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 2.0,
            p_antenna_mw: 0.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut alloc = Allocation::zeros(&inst);
        alloc.power[0] = 1.0;
        alloc.subchannel[0] = 1.0;
        alloc.antenna[0] = 1.0;
        (inst, alloc)
    }

    #[test]
    fn weighted_objective_endpoints_and_midpoint() {
        let (inst, alloc) = known_metrics_instance();
        let mk = |nu| WeightedObjectiveConfig { nu, w_rate: 1.0, w_power: 1.0, lambda: 0.0 };
        assert!((weighted_objective(&inst, &alloc, &mk(1.0)) - 4.0).abs() < 1e-12);
        assert!((weighted_objective(&inst, &alloc, &mk(0.0)) + 3.0).abs() < 1e-12);
        assert!((weighted_objective(&inst, &alloc, &mk(0.5)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn penalty_vanishes_on_binary_points() {
        let (inst, alloc) = known_metrics_instance();
        let cfg = WeightedObjectiveConfig { nu: 0.5, w_rate: 1.0, w_power: 1.0, lambda: 25.0 };
        assert_eq!(
            penalized_objective(&inst, &alloc, &cfg),
            weighted_objective(&inst, &alloc, &cfg)
        );
    }

    #[test]
    fn half_indicator_costs_quarter_lambda() {
        let (inst, mut alloc) = known_metrics_instance();
        alloc.subchannel[0] = 0.5;
        alloc.binary = false;
        let cfg = WeightedObjectiveConfig { nu: 0.5, w_rate: 1.0, w_power: 1.0, lambda: 10.0 };
        let diff = penalized_objective(&inst, &alloc, &cfg) - weighted_objective(&inst, &alloc, &cfg);
        assert!((diff + 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_recovers_weighted_objective() {
        let inst = two_cell_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alloc = random_point(&inst, &mut rng);
        let cfg = WeightedObjectiveConfig { nu: 0.3, w_rate: 5.0, w_power: 40.0, lambda: 0.0 };
        assert_eq!(
            penalized_objective(&inst, &alloc, &cfg),
            weighted_objective(&inst, &alloc, &cfg)
        );
    }

    #[test]
    fn big_m_zero_subchannel_forces_zero_power() {
        let (inst, mut alloc) = known_metrics_instance();
        alloc.subchannel[0] = 0.0;
        let set = big_m_constraints(&inst);
        assert!(set.max_violation(&inst, &alloc, BigMKind::PowerSubchannelCap) > 0.0);
        alloc.power[0] = 0.0;
        assert_eq!(set.max_violation(&inst, &alloc, BigMKind::PowerSubchannelCap), 0.0);
    }

    #[test]
    fn big_m_antenna_without_subchannel_violates_coupling() {
        let (inst, mut alloc) = known_metrics_instance();
        alloc.subchannel[0] = 0.0;
        alloc.antenna[0] = 1.0;
        alloc.power[0] = 0.0;
        let set = big_m_constraints(&inst);
        let v = set.max_violation(&inst, &alloc, BigMKind::AntennaRequiresSubchannel);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dc_parts_zero_power_all_noise() {
        let inst = two_cell_instance();
        let alloc = Allocation::zeros(&inst);
        let parts = eval_dc_parts(&inst, &alloc);
        let n_terms = inst.dims.links() as f64;
        let expect = n_terms * inst.noise_mw.log2();
        assert!((parts.log_signal - expect).abs() < 1e-9);
        assert!((parts.log_interference - expect).abs() < 1e-9);
    }

    #[test]
    fn single_cell_interference_log_is_constant() {
        let dims = Dims { cells: 1, users: 2, subchannels: 3, antennas: 2 };
        let inst = ProblemInstance {
            dims,
            gains: vec![0.5; dims.links()],
            noise_mw: 2.0,
            p_max_mw: 10.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 1.0,
            p_antenna_mw: 1.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let expect = dims.links() as f64 * 2.0f64.log2();
        for _ in 0..5 {
            let alloc = random_point(&inst, &mut rng);
            let parts = eval_dc_parts(&inst, &alloc);
            assert!((parts.log_interference - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn indicator_sums_match_arithmetic() {
        let dims = Dims { cells: 1, users: 1, subchannels: 2, antennas: 4 };
        let inst = ProblemInstance {
            dims,
            gains: vec![1.0; dims.links()],
            noise_mw: 1.0,
            p_max_mw: 1.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 1.0,
            p_antenna_mw: 1.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut alloc = Allocation::zeros(&inst);
        for a in alloc.antenna.iter_mut() {
            *a = 0.5;
        }
        let parts = eval_dc_parts(&inst, &alloc);
        assert_eq!(parts.antenna_sum, 4.0);
        assert_eq!(parts.antenna_sq_sum, 2.0);
    }

    #[test]
    fn rate_dc_matches_masked_rates_at_binary_points() {
        // Big-M-respecting binary allocation: powers only where mask = 1.
        let inst = two_cell_instance();
        let d = inst.dims;
        let mut alloc = Allocation::zeros(&inst);
        for b in 0..d.cells {
            for s in 0..d.subchannels {
                let m = s % d.users;
                let q = (b + s) % d.antennas;
                alloc.subchannel[d.bms_index(b, m, s)] = 1.0;
                alloc.antenna[d.link_index(b, m, s, q)] = 1.0;
                alloc.power[d.link_index(b, m, s, q)] = 3.0;
            }
        }
        let parts = eval_dc_parts(&inst, &alloc);
        let mut rate_sum = 0.0;
        for b in 0..d.cells {
            for m in 0..d.users {
                for s in 0..d.subchannels {
                    for q in 0..d.antennas {
                        rate_sum += alloc.mask(&inst, b, m, s, q)
                            * crate::model::compute_rate(&inst, &alloc, b, m, s, q);
                    }
                }
            }
        }
        assert!((parts.rate_dc() - rate_sum).abs() < 1e-9);
    }

    #[test]
    fn surrogate_touches_at_anchor() {
        let inst = two_cell_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let anchor = random_point(&inst, &mut rng);
        let parts = eval_dc_parts(&inst, &anchor);
        let sur = build_surrogate(&inst, &anchor);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        assert!(rel(sur.log_interference_at(&anchor.power), parts.log_interference) < 1e-10);
        assert!(rel(sur.antenna_sq_at(&anchor.antenna), parts.antenna_sq_sum) < 1e-10);
        assert!(rel(sur.subchannel_sq_at(&anchor.subchannel), parts.subchannel_sq_sum) < 1e-10);
        for u in 0..inst.dims.cells * inst.dims.users {
            assert!(rel(
                sur.per_user_log_interference_at(u, &anchor.power),
                parts.per_user_log_interference[u]
            ) < 1e-10);
        }
    }

    #[test]
    fn antenna_sq_surrogate_at_zero_anchor_is_zero_function() {
        let inst = two_cell_instance();
        let anchor = Allocation::zeros(&inst);
        let sur = build_surrogate(&inst, &anchor);
        let ones = vec![1.0; anchor.antenna.len()];
        assert_eq!(sur.antenna_sq_at(&ones), 0.0);
        assert!(sur.antenna_sq.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn tangents_bound_their_functions() {
        // 100 random points: the concave interference logs lie below their
        // tangents, the convex indicator squares above.
        let inst = two_cell_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let anchor = random_point(&inst, &mut rng);
        let sur = build_surrogate(&inst, &anchor);
        for _ in 0..100 {
            let point = random_point(&inst, &mut rng);
            let parts = eval_dc_parts(&inst, &point);
            assert!(sur.log_interference_at(&point.power) - parts.log_interference >= -1e-9);
            assert!(sur.antenna_sq_at(&point.antenna) - parts.antenna_sq_sum <= 1e-9);
            assert!(sur.subchannel_sq_at(&point.subchannel) - parts.subchannel_sq_sum <= 1e-9);
            for u in 0..inst.dims.cells * inst.dims.users {
                assert!(
                    sur.per_user_log_interference_at(u, &point.power)
                        - parts.per_user_log_interference[u]
                        >= -1e-9
                );
            }
        }
    }

    #[test]
    fn interference_gradient_matches_finite_differences() {
        let inst = two_cell_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let anchor = random_point(&inst, &mut rng);
        let sur = build_surrogate(&inst, &anchor);
        for j in 0..anchor.power.len() {
            let h = 1e-6 * anchor.power[j].abs().max(1.0);
            let mut plus = anchor.clone();
            plus.power[j] += h;
            let mut minus = anchor.clone();
            minus.power[j] -= h;
            let fd = (eval_dc_parts(&inst, &plus).log_interference
                - eval_dc_parts(&inst, &minus).log_interference)
                / (2.0 * h);
            let an = sur.log_interference.gradient[j];
            let denom = an.abs().max(fd.abs()).max(1e-12);
            assert!(
                (fd - an).abs() / denom < 1e-4,
                "grad mismatch at {j}: fd={fd} analytic={an}"
            );
        }
    }
}
