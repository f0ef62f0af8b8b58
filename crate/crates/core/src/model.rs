//! Domain types and exact evaluation of rates, power consumption and
//! constraint satisfaction for the uplink multi-cell OFDMA network.
//!
//! All powers are stored in linear milliwatts, all rates in bits/s/Hz per
//! sub-channel. Energy efficiency is reported in bits/Joule using the
//! per-sub-channel bandwidth carried by the instance.

use thiserror::Error;

/// Natural log of 2, used for log2 derivatives.
pub const LN_2: f64 = std::f64::consts::LN_2;

/// Converts a dBm value to linear milliwatts.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts linear milliwatts to dBm.
#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Antenna-selection operating mode.
///
/// `Gas` picks one antenna per assigned (user, sub-channel) pair and pays
/// circuit power per active pair; `Cas` commits each user to a single
/// antenna for all of its sub-channels and pays for exactly one RF chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Gas,
    Cas,
}

/// Problem dimensions: cells, users per cell, sub-channels, antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub cells: usize,
    pub users: usize,
    pub subchannels: usize,
    pub antennas: usize,
}

impl Dims {
    /// Number of (cell, user, sub-channel, antenna) tuples.
    #[inline]
    pub fn links(&self) -> usize {
        self.cells * self.users * self.subchannels * self.antennas
    }

    /// Flat index into a (cells, users, subchannels, antennas) tensor.
    #[inline]
    pub fn link_index(&self, b: usize, m: usize, s: usize, q: usize) -> usize {
        ((b * self.users + m) * self.subchannels + s) * self.antennas + q
    }

    /// Flat index into a (cells, users, subchannels) tensor.
    #[inline]
    pub fn bms_index(&self, b: usize, m: usize, s: usize) -> usize {
        (b * self.users + m) * self.subchannels + s
    }

    /// Flat index into a (cells, users, antennas) tensor.
    #[inline]
    pub fn bmq_index(&self, b: usize, m: usize, q: usize) -> usize {
        (b * self.users + m) * self.antennas + q
    }

    /// Flat index into a (cells, users) matrix.
    #[inline]
    pub fn user_index(&self, b: usize, m: usize) -> usize {
        b * self.users + m
    }
}

/// A fully specified problem instance: geometry-free channel gains plus the
/// power, rate and efficiency parameters of the network.
///
/// The gain tensor is indexed (tx cell, user, sub-channel, antenna, rx cell)
/// and holds dimensionless linear power gains.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub dims: Dims,
    pub gains: Vec<f64>,
    /// Noise power per sub-channel, mW.
    pub noise_mw: f64,
    /// Per-user transmit power budget, mW.
    pub p_max_mw: f64,
    /// Per-user minimum rate, bits/s/Hz.
    pub r_min: f64,
    /// Power-amplifier efficiency, in (0, 1].
    pub kappa: f64,
    /// Static circuit power per user, mW.
    pub p_static_mw: f64,
    /// Circuit power per active antenna (RF chain), mW.
    pub p_antenna_mw: f64,
    pub scenario: Scenario,
    /// Sub-channel bandwidth, Hz. Only used to convert rates to bits/Joule.
    pub bandwidth_hz: f64,
}

impl ProblemInstance {
    /// Validates the instance invariants, returning `self` on success.
    pub fn validated(self) -> Result<Self, ModelError> {
        let d = self.dims;
        if d.cells < 1 || d.users < 1 || d.subchannels < 1 || d.antennas < 1 {
            return Err(ModelError::InvalidParameter(
                "all dimensions must be >= 1".into(),
            ));
        }
        let expect = d.links() * d.cells;
        if self.gains.len() != expect {
            return Err(ModelError::DimensionMismatch(format!(
                "gain tensor has {} entries, expected B*M*S*Q*B = {}",
                self.gains.len(),
                expect
            )));
        }
        if self.gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(ModelError::InvalidParameter(
                "gains must be finite and nonnegative".into(),
            ));
        }
        for (name, v) in [
            ("noise_mw", self.noise_mw),
            ("p_max_mw", self.p_max_mw),
            ("p_static_mw", self.p_static_mw),
            ("p_antenna_mw", self.p_antenna_mw),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.noise_mw == 0.0 {
            return Err(ModelError::InvalidParameter("noise power must be > 0".into()));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "kappa must lie in (0, 1], got {}",
                self.kappa
            )));
        }
        if !self.bandwidth_hz.is_finite() || self.bandwidth_hz <= 0.0 {
            return Err(ModelError::InvalidParameter("bandwidth must be > 0".into()));
        }
        Ok(self)
    }

    /// Linear power gain from user (b, m), sub-channel s, antenna q to the
    /// base station of cell `rx`.
    #[inline]
    pub fn gain(&self, b: usize, m: usize, s: usize, q: usize, rx: usize) -> f64 {
        self.gains[self.dims.link_index(b, m, s, q) * self.dims.cells + rx]
    }

    /// Gain to the serving base station.
    #[inline]
    pub fn direct_gain(&self, b: usize, m: usize, s: usize, q: usize) -> f64 {
        self.gain(b, m, s, q, b)
    }

    /// Largest direct gain in the instance (used for rate normalization).
    pub fn max_direct_gain(&self) -> f64 {
        let d = self.dims;
        let mut best = 0.0f64;
        for b in 0..d.cells {
            for m in 0..d.users {
                for s in 0..d.subchannels {
                    for q in 0..d.antennas {
                        best = best.max(self.direct_gain(b, m, s, q));
                    }
                }
            }
        }
        best
    }
}

/// A (possibly relaxed) allocation of powers and indicator variables.
///
/// Shapes depend on the scenario:
/// * `power` is always (B, M, S, Q);
/// * `subchannel` is (B, M, S) under GAS and (B, M, S, Q) under CAS;
/// * `antenna` is (B, M, S, Q) under GAS and (B, M, Q) under CAS.
///
/// `binary` marks whether the indicators are intended to be exactly {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub power: Vec<f64>,
    pub subchannel: Vec<f64>,
    pub antenna: Vec<f64>,
    pub binary: bool,
}

impl Allocation {
    /// All-zero allocation with shapes matching the instance scenario.
    pub fn zeros(inst: &ProblemInstance) -> Self {
        let d = inst.dims;
        let (nx, na) = match inst.scenario {
            Scenario::Gas => (d.cells * d.users * d.subchannels, d.links()),
            Scenario::Cas => (d.links(), d.cells * d.users * d.antennas),
        };
        Allocation {
            power: vec![0.0; d.links()],
            subchannel: vec![0.0; nx],
            antenna: vec![0.0; na],
            binary: true,
        }
    }

    /// Checks that the vector lengths match the instance scenario.
    pub fn shape_ok(&self, inst: &ProblemInstance) -> bool {
        let z = Allocation::zeros(inst);
        self.power.len() == z.power.len()
            && self.subchannel.len() == z.subchannel.len()
            && self.antenna.len() == z.antenna.len()
    }

    /// Sub-channel indicator for link (b, m, s, q) under the instance scenario.
    #[inline]
    pub fn subchannel_ind(&self, inst: &ProblemInstance, b: usize, m: usize, s: usize, q: usize) -> f64 {
        match inst.scenario {
            Scenario::Gas => self.subchannel[inst.dims.bms_index(b, m, s)],
            Scenario::Cas => self.subchannel[inst.dims.link_index(b, m, s, q)],
        }
    }

    /// Antenna indicator for link (b, m, s, q) under the instance scenario.
    #[inline]
    pub fn antenna_ind(&self, inst: &ProblemInstance, b: usize, m: usize, s: usize, q: usize) -> f64 {
        match inst.scenario {
            Scenario::Gas => self.antenna[inst.dims.link_index(b, m, s, q)],
            Scenario::Cas => self.antenna[inst.dims.bmq_index(b, m, q)],
        }
    }

    /// Product of the two indicators, the mask applied to rates and powers.
    #[inline]
    pub fn mask(&self, inst: &ProblemInstance, b: usize, m: usize, s: usize, q: usize) -> f64 {
        self.subchannel_ind(inst, b, m, s, q) * self.antenna_ind(inst, b, m, s, q)
    }
}

/// Network-level performance numbers for one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Total achievable rate, bits/s/Hz (sum over assigned links).
    pub r_total: f64,
    /// Total consumed power, mW (amplifier plus circuit).
    pub p_total_mw: f64,
    /// Energy efficiency, bits/Joule.
    pub ee: f64,
    /// Spectral efficiency, bits/s/Hz (equals `r_total`).
    pub se: f64,
    /// Per-user rates, indexed (b * users + m).
    pub per_user_rate: Vec<f64>,
}

/// Indicator-masked interference seen at base station `rx` on sub-channel `s`,
/// i.e. the denominator sum of the rate expression.
fn masked_interference(inst: &ProblemInstance, alloc: &Allocation, rx: usize, s: usize) -> f64 {
    let d = inst.dims;
    let mut acc = 0.0;
    for b in 0..d.cells {
        if b == rx {
            continue;
        }
        for k in 0..d.users {
            for q in 0..d.antennas {
                let p = alloc.power[d.link_index(b, k, s, q)];
                if p != 0.0 {
                    acc += alloc.mask(inst, b, k, s, q) * p * inst.gain(b, k, s, q, rx);
                }
            }
        }
    }
    acc
}

/// Achievable rate of link (b, m, s, q) in bits/s/Hz.
///
/// Interfering powers from other cells enter weighted by their sub-channel and
/// antenna indicators. Panics if an index is out of range or the allocation
/// shape does not match the scenario.
pub fn compute_rate(
    inst: &ProblemInstance,
    alloc: &Allocation,
    b: usize,
    m: usize,
    s: usize,
    q: usize,
) -> f64 {
    let d = inst.dims;
    assert!(
        b < d.cells && m < d.users && s < d.subchannels && q < d.antennas,
        "link index ({b},{m},{s},{q}) out of range for dims {d:?}"
    );
    assert!(alloc.shape_ok(inst), "allocation shape does not match instance");
    let p = alloc.power[d.link_index(b, m, s, q)];
    if p == 0.0 {
        return 0.0;
    }
    let direct = p * inst.direct_gain(b, m, s, q);
    let interf = masked_interference(inst, alloc, b, s);
    (1.0 + direct / (inst.noise_mw + interf)).log2()
}

/// Evaluates rate, power and efficiency totals for an allocation.
pub fn compute_metrics(inst: &ProblemInstance, alloc: &Allocation) -> Metrics {
    let d = inst.dims;
    assert!(alloc.shape_ok(inst), "allocation shape does not match instance");
    let mut r_total = 0.0;
    let mut per_user_rate = vec![0.0; d.cells * d.users];
    for b in 0..d.cells {
        for s in 0..d.subchannels {
            let interf = masked_interference(inst, alloc, b, s);
            let denom = inst.noise_mw + interf;
            for m in 0..d.users {
                for q in 0..d.antennas {
                    let mask = alloc.mask(inst, b, m, s, q);
                    if mask == 0.0 {
                        continue;
                    }
                    let p = alloc.power[d.link_index(b, m, s, q)];
                    let rate = (1.0 + p * inst.direct_gain(b, m, s, q) / denom).log2();
                    let masked = mask * rate;
                    r_total += masked;
                    per_user_rate[d.user_index(b, m)] += masked;
                }
            }
        }
    }

    let transmit: f64 = alloc.power.iter().sum::<f64>() / inst.kappa;
    let mut circuit = 0.0;
    for b in 0..d.cells {
        for m in 0..d.users {
            circuit += inst.p_static_mw;
            match inst.scenario {
                Scenario::Gas => {
                    let mut active = 0.0;
                    for s in 0..d.subchannels {
                        for q in 0..d.antennas {
                            active += alloc.antenna[d.link_index(b, m, s, q)];
                        }
                    }
                    circuit += inst.p_antenna_mw * active;
                }
                Scenario::Cas => {
                    // One RF chain per user regardless of the selection.
                    circuit += inst.p_antenna_mw;
                }
            }
        }
    }
    let p_total_mw = transmit + circuit;
    let ee = if p_total_mw > 0.0 {
        inst.bandwidth_hz * r_total / (p_total_mw * 1e-3)
    } else {
        0.0
    };
    Metrics {
        r_total,
        p_total_mw,
        ee,
        se: r_total,
        per_user_rate,
    }
}

/// Largest violation per constraint family, all nonnegative.
///
/// Families follow the two problem statements: sub-channel assignment (one
/// user per sub-channel), antenna assignment (one antenna per assigned
/// sub-channel under GAS, one per user under CAS), power nonnegativity,
/// per-user power budget, per-user minimum rate, and binariness of the two
/// indicator families.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub subchannel_assignment: f64,
    pub antenna_assignment: f64,
    pub power_nonneg: f64,
    pub power_budget: f64,
    pub min_rate: f64,
    pub subchannel_binary: f64,
    pub antenna_binary: f64,
    pub tol: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.subchannel_assignment,
            self.antenna_assignment,
            self.power_nonneg,
            self.power_budget,
            self.min_rate,
            self.subchannel_binary,
            self.antenna_binary,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn feasible(&self) -> bool {
        self.max_violation() <= self.tol
    }
}

fn binary_distance(t: f64) -> f64 {
    t.abs().min((t - 1.0).abs())
}

/// Checks the original constraint families against an allocation and reports
/// the largest violation in each. Always succeeds; `feasible()` on the report
/// compares against `tol`.
pub fn check_feasibility(inst: &ProblemInstance, alloc: &Allocation, tol: f64) -> FeasibilityReport {
    let d = inst.dims;
    assert!(alloc.shape_ok(inst), "allocation shape does not match instance");

    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    match inst.scenario {
        Scenario::Gas => {
            for b in 0..d.cells {
                for s in 0..d.subchannels {
                    let sum: f64 = (0..d.users).map(|m| alloc.subchannel[d.bms_index(b, m, s)]).sum();
                    c1 = c1.max((sum - 1.0).abs());
                }
            }
            // One antenna on assigned sub-channels, none otherwise.
            for b in 0..d.cells {
                for m in 0..d.users {
                    for s in 0..d.subchannels {
                        let sum: f64 =
                            (0..d.antennas).map(|q| alloc.antenna[d.link_index(b, m, s, q)]).sum();
                        c2 = c2.max((sum - alloc.subchannel[d.bms_index(b, m, s)]).abs());
                    }
                }
            }
        }
        Scenario::Cas => {
            for b in 0..d.cells {
                for s in 0..d.subchannels {
                    let mut sum = 0.0;
                    for m in 0..d.users {
                        for q in 0..d.antennas {
                            sum += alloc.subchannel[d.link_index(b, m, s, q)];
                        }
                    }
                    c1 = c1.max((sum - 1.0).abs());
                }
            }
            for b in 0..d.cells {
                for m in 0..d.users {
                    let sum: f64 = (0..d.antennas).map(|q| alloc.antenna[d.bmq_index(b, m, q)]).sum();
                    c2 = c2.max((sum - 1.0).abs());
                }
            }
        }
    }

    let c3 = alloc.power.iter().fold(0.0f64, |acc, p| acc.max(-p));

    let mut c4 = 0.0f64;
    let metrics = compute_metrics(inst, alloc);
    let mut c5 = 0.0f64;
    for b in 0..d.cells {
        for m in 0..d.users {
            let mut masked_power = 0.0;
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    masked_power += alloc.mask(inst, b, m, s, q) * alloc.power[d.link_index(b, m, s, q)];
                }
            }
            c4 = c4.max(masked_power - inst.p_max_mw);
            c5 = c5.max(inst.r_min - metrics.per_user_rate[d.user_index(b, m)]);
        }
    }
    let c4 = c4.max(0.0);
    let c5 = c5.max(0.0);

    let c6 = alloc.subchannel.iter().fold(0.0f64, |acc, t| acc.max(binary_distance(*t)));
    let c7 = alloc.antenna.iter().fold(0.0f64, |acc, t| acc.max(binary_distance(*t)));

    FeasibilityReport {
        subchannel_assignment: c1,
        antenna_assignment: c2,
        power_nonneg: c3,
        power_budget: c4,
        min_rate: c5,
        subchannel_binary: c6,
        antenna_binary: c7,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single-link instance with explicit gain and noise.
    fn tiny_instance(gain: f64, noise: f64) -> ProblemInstance {
        ProblemInstance {
            dims: Dims { cells: 1, users: 1, subchannels: 1, antennas: 1 },
            gains: vec![gain],
            noise_mw: noise,
            p_max_mw: 100.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 10.0,
            p_antenna_mw: 5.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap()
    }

    fn assigned_alloc(inst: &ProblemInstance, p: f64) -> Allocation {
        let mut a = Allocation::zeros(inst);
        a.power[0] = p;
        a.subchannel[0] = 1.0;
        a.antenna[0] = 1.0;
        a
    }

    #[test]
    fn zero_power_gives_zero_rate() {
        let inst = tiny_instance(1.0, 1.0);
        let alloc = assigned_alloc(&inst, 0.0);
        assert_eq!(compute_rate(&inst, &alloc, 0, 0, 0, 0), 0.0);
    }

    #[test]
    fn single_cell_snr_three_gives_two_bits() {
        // p * |h|^2 / sigma^2 = 3  =>  log2(4) = 2
        let inst = tiny_instance(3.0, 1.0);
        let alloc = assigned_alloc(&inst, 1.0);
        assert!((compute_rate(&inst, &alloc, 0, 0, 0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn interference_halves_effective_snr() {
        // Direct power equals sigma^2 and one interferer contributes sigma^2:
        // log2(1 + 1/2) = log2(1.5)
        let dims = Dims { cells: 2, users: 1, subchannels: 1, antennas: 1 };
        // gains[(b,m,s,q)*B + rx]: user 0 in cell 0: direct 1.0, to cell 1: 1.0
        //                          user 0 in cell 1: to cell 0: 1.0, direct 1.0
        let inst = ProblemInstance {
            dims,
            gains: vec![1.0, 1.0, 1.0, 1.0],
            noise_mw: 1.0,
            p_max_mw: 100.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 10.0,
            p_antenna_mw: 5.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut alloc = Allocation::zeros(&inst);
        for b in 0..2 {
            alloc.power[dims.link_index(b, 0, 0, 0)] = 1.0;
            alloc.subchannel[dims.bms_index(b, 0, 0)] = 1.0;
            alloc.antenna[dims.link_index(b, 0, 0, 0)] = 1.0;
        }
        let r = compute_rate(&inst, &alloc, 0, 0, 0, 0);
        assert!((r - 1.5f64.log2()).abs() < 1e-12);
        assert!((r - 0.5849625007211562).abs() < 1e-12);
    }

    #[test]
    fn circuit_only_power() {
        let inst = tiny_instance(1.0, 1.0);
        let alloc = Allocation::zeros(&inst);
        let m = compute_metrics(&inst, &alloc);
        assert_eq!(m.p_total_mw, 10.0);
        assert_eq!(m.r_total, 0.0);
        assert_eq!(m.ee, 0.0);
    }

    #[test]
    fn ee_zero_when_everything_zero() {
        let mut inst = tiny_instance(1.0, 1.0);
        inst.p_static_mw = 0.0;
        let alloc = Allocation::zeros(&inst);
        let m = compute_metrics(&inst, &alloc);
        assert_eq!(m.p_total_mw, 0.0);
        assert_eq!(m.ee, 0.0);
    }

    #[test]
    fn cas_power_matches_dbm_parameters() {
        // 23 dBm budget spent fully (199.5 mW as quoted), 10 dBm static,
        // 7 dBm per-antenna, kappa = 1: total ~ 214.51 mW.
        let dims = Dims { cells: 1, users: 1, subchannels: 1, antennas: 1 };
        let inst = ProblemInstance {
            dims,
            gains: vec![1.0],
            noise_mw: 1.0,
            p_max_mw: dbm_to_mw(23.0),
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: dbm_to_mw(10.0),
            p_antenna_mw: dbm_to_mw(7.0),
            scenario: Scenario::Cas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut alloc = Allocation::zeros(&inst);
        alloc.power[0] = 199.5;
        alloc.subchannel[0] = 1.0;
        alloc.antenna[0] = 1.0;
        let m = compute_metrics(&inst, &alloc);
        let expected = 199.5 + dbm_to_mw(10.0) + dbm_to_mw(7.0);
        assert!((m.p_total_mw - expected).abs() < 1e-9);
        assert!((m.p_total_mw - 214.51).abs() < 0.01);
    }

    #[test]
    fn gas_single_active_antenna_reduces_to_cas_circuit() {
        let gas = tiny_instance(1.0, 1.0);
        let mut cas = gas.clone();
        cas.scenario = Scenario::Cas;
        let ag = assigned_alloc(&gas, 2.0);
        let mut ac = Allocation::zeros(&cas);
        ac.power[0] = 2.0;
        ac.subchannel[0] = 1.0;
        ac.antenna[0] = 1.0;
        let mg = compute_metrics(&gas, &ag);
        let mc = compute_metrics(&cas, &ac);
        assert!((mg.p_total_mw - mc.p_total_mw).abs() < 1e-12);
        assert!((mg.r_total - mc.r_total).abs() < 1e-12);
    }

    #[test]
    fn gas_multi_antenna_costs_more_than_cas() {
        // Two sub-channels on one user: GAS pays per active (s, q) pair.
        let dims = Dims { cells: 1, users: 1, subchannels: 2, antennas: 2 };
        let gains = vec![1.0; dims.links() * dims.cells];
        let base = ProblemInstance {
            dims,
            gains,
            noise_mw: 1.0,
            p_max_mw: 100.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 10.0,
            p_antenna_mw: 5.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut gas_alloc = Allocation::zeros(&base);
        for s in 0..2 {
            gas_alloc.subchannel[dims.bms_index(0, 0, s)] = 1.0;
            gas_alloc.antenna[dims.link_index(0, 0, s, s)] = 1.0; // different antennas
            gas_alloc.power[dims.link_index(0, 0, s, s)] = 1.0;
        }
        let mut cas = base.clone();
        cas.scenario = Scenario::Cas;
        let mut cas_alloc = Allocation::zeros(&cas);
        for s in 0..2 {
            cas_alloc.subchannel[dims.link_index(0, 0, s, 0)] = 1.0;
            cas_alloc.power[dims.link_index(0, 0, s, 0)] = 1.0;
        }
        cas_alloc.antenna[dims.bmq_index(0, 0, 0)] = 1.0;
        let mg = compute_metrics(&base, &gas_alloc);
        let mc = compute_metrics(&cas, &cas_alloc);
        // Symmetric gains: identical rates, strictly higher GAS circuit power.
        assert!((mg.r_total - mc.r_total).abs() < 1e-12);
        assert!(mg.p_total_mw > mc.p_total_mw);
    }

    #[test]
    fn ee_matches_definition_exactly() {
        let inst = tiny_instance(3.0, 1.0);
        let alloc = assigned_alloc(&inst, 1.0);
        let m = compute_metrics(&inst, &alloc);
        let expected = inst.bandwidth_hz * m.r_total / (m.p_total_mw * 1e-3);
        assert!((m.ee - expected).abs() <= 1e-9 * expected.abs());
        assert_eq!(m.se, m.r_total);
    }

    #[test]
    fn shared_subchannel_violates_assignment() {
        let dims = Dims { cells: 1, users: 2, subchannels: 1, antennas: 1 };
        let inst = ProblemInstance {
            dims,
            gains: vec![1.0, 1.0],
            noise_mw: 1.0,
            p_max_mw: 100.0,
            r_min: 0.0,
            kappa: 1.0,
            p_static_mw: 10.0,
            p_antenna_mw: 5.0,
            scenario: Scenario::Gas,
            bandwidth_hz: 180e3,
        }
        .validated()
        .unwrap();
        let mut alloc = Allocation::zeros(&inst);
        for m in 0..2 {
            alloc.subchannel[dims.bms_index(0, m, 0)] = 1.0;
            alloc.antenna[dims.link_index(0, m, 0, 0)] = 1.0;
        }
        let rep = check_feasibility(&inst, &alloc, 1e-9);
        assert!((rep.subchannel_assignment - 1.0).abs() < 1e-12);
        assert!(!rep.feasible());
    }

    #[test]
    fn budget_boundary_is_feasible() {
        let inst = tiny_instance(1.0, 1.0);
        let alloc = assigned_alloc(&inst, inst.p_max_mw);
        let rep = check_feasibility(&inst, &alloc, 1e-9);
        assert_eq!(rep.power_budget, 0.0);
        assert!(rep.feasible());
    }

    #[test]
    fn rate_shortfall_is_reported_as_slack() {
        let mut inst = tiny_instance(3.0, 1.0);
        // Assigned rate is exactly 2.0 bits/s/Hz; demand 2.1.
        inst.r_min = 2.1;
        let alloc = assigned_alloc(&inst, 1.0);
        let rep = check_feasibility(&inst, &alloc, 1e-9);
        assert!((rep.min_rate - 0.1).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_pure() {
        let inst = tiny_instance(2.5, 0.7);
        let alloc = assigned_alloc(&inst, 3.0);
        let a = compute_metrics(&inst, &alloc);
        let b = compute_metrics(&inst, &alloc);
        assert_eq!(a, b);
    }

    #[test]
    fn dbm_round_trip() {
        assert!((dbm_to_mw(0.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_mw(23.0) - 199.52623149688787).abs() < 1e-9);
        let x = 17.3;
        assert!((mw_to_dbm(dbm_to_mw(x)) - x).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_shapes_and_params() {
        let mut inst = tiny_instance(1.0, 1.0);
        inst.gains = vec![1.0, 2.0];
        assert!(matches!(inst.validated(), Err(ModelError::DimensionMismatch(_))));
        let mut inst = tiny_instance(1.0, 1.0);
        inst.kappa = 0.0;
        assert!(matches!(inst.validated(), Err(ModelError::InvalidParameter(_))));
        let mut inst = tiny_instance(1.0, 1.0);
        inst.kappa = 1.5;
        assert!(inst.validated().is_err());
    }
}
