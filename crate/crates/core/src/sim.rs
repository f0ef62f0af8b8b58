//! Channel realization generation and Monte-Carlo experiment execution.
//!
//! Users are dropped uniformly in their serving cell's disk (with a minimum
//! distance to the base station), every link draws independent unit-mean
//! exponential power fading, and gains follow phi * d^-alpha. Sweeps slice
//! sub-channels and antennas out of one master tensor per realization so that
//! sweep points share common random numbers.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use std::collections::HashMap;
use thiserror::Error;

use crate::model::{dbm_to_mw, Allocation, Dims, ProblemInstance, Scenario};
use crate::solver::{mm_solve, SolverConfig};
use crate::transform::WeightedObjectiveConfig;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),
    #[error("solver error: {0}")]
    Solver(#[from] crate::solver::SolverError),
}

/// Cell geometry shared by all realizations.
#[derive(Debug, Clone)]
pub struct NetworkGeometry {
    pub cell_radius_m: f64,
    pub cell_centers: Vec<(f64, f64)>,
    pub path_loss_exponent: f64,
    /// Users are kept at least this far from their serving base station.
    pub min_user_distance_m: f64,
}

impl NetworkGeometry {
    /// Cells at the nodes of a square grid, row-major, `spacing_m` apart.
    pub fn square_grid(num_cells: usize, cell_radius_m: f64, spacing_m: f64) -> Self {
        let side = (num_cells as f64).sqrt().ceil() as usize;
        let centers = (0..num_cells)
            .map(|i| ((i % side) as f64 * spacing_m, (i / side) as f64 * spacing_m))
            .collect();
        NetworkGeometry {
            cell_radius_m,
            cell_centers: centers,
            path_loss_exponent: 3.0,
            min_user_distance_m: 35.0,
        }
    }
}

/// One realization's user drop.
#[derive(Debug, Clone)]
pub struct NetworkLayout {
    /// Indexed (b * users_per_cell + m).
    pub user_positions: Vec<(f64, f64)>,
}

/// Physical and dimensional parameters of one generated instance.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub geometry: NetworkGeometry,
    pub users_per_cell: usize,
    pub subchannels: usize,
    pub antennas: usize,
    pub scenario: Scenario,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub p_max_dbm: f64,
    pub r_min: f64,
    pub kappa: f64,
    pub p_static_dbm: f64,
    pub p_antenna_dbm: f64,
}

impl InstanceSpec {
    /// Simulation defaults: 4 cells of radius 500 m on a 1000 m grid, 4 users
    /// per cell, 8 sub-channels of 180 kHz, -174 dBm/Hz noise density, path
    /// loss exponent 3, 10 dBm static and 7 dBm per-antenna circuit power,
    /// 23 dBm budget, 5 bits/s/Hz rate demand.
    pub fn defaults(antennas: usize, scenario: Scenario) -> Self {
        InstanceSpec {
            geometry: NetworkGeometry::square_grid(4, 500.0, 1000.0),
            users_per_cell: 4,
            subchannels: 8,
            antennas,
            scenario,
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 180e3,
            p_max_dbm: 23.0,
            r_min: 5.0,
            kappa: 0.38,
            p_static_dbm: 10.0,
            p_antenna_dbm: 7.0,
        }
    }
}

/// Noise power over one sub-channel in mW.
pub fn noise_power_mw(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_mw(noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10())
}

/// Deterministic per-realization seed derived from the master seed
/// (splitmix64 of master + index), so that parallel and serial sweeps agree.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws user positions and Rayleigh-faded channel gains. Fully determined by
/// the seed: position draws precede gain draws, both in index order.
pub fn generate_instance(spec: &InstanceSpec, seed: u64) -> (ProblemInstance, NetworkLayout) {
    let geom = &spec.geometry;
    let cells = geom.cell_centers.len();
    let dims = Dims {
        cells,
        users: spec.users_per_cell,
        subchannels: spec.subchannels,
        antennas: spec.antennas,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut positions = Vec::with_capacity(cells * spec.users_per_cell);
    for b in 0..cells {
        let (cx, cy) = geom.cell_centers[b];
        for _m in 0..spec.users_per_cell {
            // Uniform over the annulus [min_dist, radius]: r^2 uniform.
            let u: f64 = rng.gen();
            let r2 = geom.min_user_distance_m.powi(2)
                + u * (geom.cell_radius_m.powi(2) - geom.min_user_distance_m.powi(2));
            let r = r2.sqrt();
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            positions.push((cx + r * theta.cos(), cy + r * theta.sin()));
        }
    }

    let mut gains = vec![0.0; dims.links() * cells];
    for b in 0..cells {
        for m in 0..spec.users_per_cell {
            let (ux, uy) = positions[b * spec.users_per_cell + m];
            for s in 0..spec.subchannels {
                for q in 0..spec.antennas {
                    for rx in 0..cells {
                        let (tx_x, tx_y) = geom.cell_centers[rx];
                        let dist = ((ux - tx_x).powi(2) + (uy - tx_y).powi(2)).sqrt();
                        let fading: f64 = rng.sample(Exp1);
                        gains[dims.link_index(b, m, s, q) * cells + rx] =
                            fading * dist.powf(-geom.path_loss_exponent);
                    }
                }
            }
        }
    }

    let inst = ProblemInstance {
        dims,
        gains,
        noise_mw: noise_power_mw(spec.noise_psd_dbm_hz, spec.bandwidth_hz),
        p_max_mw: dbm_to_mw(spec.p_max_dbm),
        r_min: spec.r_min,
        kappa: spec.kappa,
        p_static_mw: dbm_to_mw(spec.p_static_dbm),
        p_antenna_mw: dbm_to_mw(spec.p_antenna_dbm),
        scenario: spec.scenario,
        bandwidth_hz: spec.bandwidth_hz,
    }
    .validated()
    .expect("generated instance is valid");
    (inst, NetworkLayout { user_positions: positions })
}

/// Restricts an instance to its first `subchannels` sub-channels and first
/// `antennas` antennas, keeping the remaining gains bit-identical.
pub fn restrict(inst: &ProblemInstance, subchannels: usize, antennas: usize) -> ProblemInstance {
    assert!(subchannels >= 1 && subchannels <= inst.dims.subchannels);
    assert!(antennas >= 1 && antennas <= inst.dims.antennas);
    let d = inst.dims;
    let nd = Dims { subchannels, antennas, ..d };
    let mut gains = vec![0.0; nd.links() * nd.cells];
    for b in 0..d.cells {
        for m in 0..d.users {
            for s in 0..subchannels {
                for q in 0..antennas {
                    for rx in 0..d.cells {
                        gains[nd.link_index(b, m, s, q) * nd.cells + rx] =
                            inst.gains[d.link_index(b, m, s, q) * d.cells + rx];
                    }
                }
            }
        }
    }
    let mut out = inst.clone();
    out.dims = nd;
    out.gains = gains;
    out
}

/// Axis swept by an experiment.
#[derive(Debug, Clone)]
pub enum SweepVar {
    AntennaCount(Vec<usize>),
    Nu(Vec<f64>),
    AntennaPowerDbm(Vec<f64>),
    SubchannelCount(Vec<usize>),
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::AntennaCount(_) => "antennas",
            SweepVar::Nu(_) => "nu",
            SweepVar::AntennaPowerDbm(_) => "p_antenna_dbm",
            SweepVar::SubchannelCount(_) => "subchannels",
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            SweepVar::AntennaCount(v) => v.iter().map(|x| *x as f64).collect(),
            SweepVar::Nu(v) => v.clone(),
            SweepVar::AntennaPowerDbm(v) => v.clone(),
            SweepVar::SubchannelCount(v) => v.iter().map(|x| *x as f64).collect(),
        }
    }
}

/// Antenna-selection scheme evaluated at a sweep point. `NoSelection` is the
/// generalized scheme restricted to a single antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioChoice {
    Gas,
    Cas,
    NoSelection,
}

impl ScenarioChoice {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioChoice::Gas => "gas",
            ScenarioChoice::Cas => "cas",
            ScenarioChoice::NoSelection => "no-selection",
        }
    }
}

/// A full Monte-Carlo experiment: sweep one axis over a set of scenarios,
/// averaging per-point metrics over seeded channel realizations.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Base parameters; dimensions must sit at the maximum of the swept axis.
    pub spec: InstanceSpec,
    pub sweep: SweepVar,
    pub scenarios: Vec<ScenarioChoice>,
    pub realizations: usize,
    pub master_seed: u64,
    pub solver: SolverConfig,
    /// Rate/power weighting used unless the sweep overrides it.
    pub nu: f64,
}

/// Aggregated results of one (value, scenario) sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub sweep_var: String,
    pub value: f64,
    pub scenario: String,
    pub mean_ee: f64,
    pub se_ee: f64,
    pub mean_se: f64,
    pub se_se: f64,
    pub mean_rate: f64,
    pub mean_power: f64,
    pub infeasible_count: usize,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub rows: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Copy)]
struct RunOutcome {
    ee: f64,
    se: f64,
    rate: f64,
    power: f64,
    feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PointKey {
    scenario: ScenarioChoice,
    subchannels: usize,
    antennas: usize,
    nu_bits: u64,
    p_antenna_bits: u64,
}

impl Eq for PointKey {}
impl std::hash::Hash for PointKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        (self.scenario, self.subchannels, self.antennas, self.nu_bits, self.p_antenna_bits)
            .hash(state)
    }
}

fn solve_point(
    master: &ProblemInstance,
    plan: &ExperimentPlan,
    scenario: ScenarioChoice,
    value: f64,
    seed: u64,
) -> Result<RunOutcome, SimError> {
    let (mut s_eff, mut q_eff) = (plan.spec.subchannels, plan.spec.antennas);
    let mut nu = plan.nu;
    let mut p_antenna_mw = master.p_antenna_mw;
    match &plan.sweep {
        SweepVar::AntennaCount(_) => q_eff = value as usize,
        SweepVar::Nu(_) => nu = value,
        SweepVar::AntennaPowerDbm(_) => p_antenna_mw = dbm_to_mw(value),
        SweepVar::SubchannelCount(_) => s_eff = value as usize,
    }
    if scenario == ScenarioChoice::NoSelection {
        q_eff = 1;
    }
    let mut inst = restrict(master, s_eff, q_eff);
    inst.p_antenna_mw = p_antenna_mw;
    inst.scenario = match scenario {
        ScenarioChoice::Cas => Scenario::Cas,
        _ => Scenario::Gas,
    };
    let mut cfg = plan.solver;
    cfg.seed = seed;
    let obj = WeightedObjectiveConfig::with_default_normalization(&inst, nu, cfg.lambda_init);
    let report = mm_solve(&inst, &cfg, &obj)?;
    Ok(RunOutcome {
        ee: report.metrics.ee,
        se: report.metrics.se,
        rate: report.metrics.r_total,
        power: report.metrics.p_total_mw,
        feasible: report.feasible,
    })
}

/// Runs the plan: realizations in parallel (deterministically seeded), every
/// (value, scenario) pair per realization, means and standard errors over the
/// feasible runs per point.
pub fn run_monte_carlo(plan: &ExperimentPlan) -> Result<ResultTable, SimError> {
    if plan.realizations < 1 {
        return Err(SimError::InvalidPlan("realizations must be >= 1".into()));
    }
    if plan.scenarios.is_empty() {
        return Err(SimError::InvalidPlan("at least one scenario required".into()));
    }
    let values = plan.sweep.values();
    match &plan.sweep {
        SweepVar::AntennaCount(v) => {
            if v.iter().any(|q| *q < 1 || *q > plan.spec.antennas) {
                return Err(SimError::InvalidPlan(format!(
                    "antenna sweep values must lie in [1, {}]",
                    plan.spec.antennas
                )));
            }
        }
        SweepVar::SubchannelCount(v) => {
            if v.iter().any(|s| *s < 1 || *s > plan.spec.subchannels) {
                return Err(SimError::InvalidPlan(format!(
                    "sub-channel sweep values must lie in [1, {}]",
                    plan.spec.subchannels
                )));
            }
        }
        SweepVar::Nu(v) => {
            if v.iter().any(|nu| !(0.0..=1.0).contains(nu)) {
                return Err(SimError::InvalidPlan("nu sweep values must lie in [0, 1]".into()));
            }
        }
        SweepVar::AntennaPowerDbm(_) => {}
    }

    // One master tensor per realization; every sweep point slices it.
    let per_realization: Result<Vec<Vec<RunOutcome>>, SimError> = (0..plan.realizations)
        .into_par_iter()
        .map(|r| {
            let seed = realization_seed(plan.master_seed, r as u64);
            let (master, _) = generate_instance(&plan.spec, seed);
            let mut memo: HashMap<PointKey, RunOutcome> = HashMap::new();
            let mut out = Vec::with_capacity(values.len() * plan.scenarios.len());
            for &value in &values {
                for &scenario in &plan.scenarios {
                    let key = point_key(plan, scenario, value);
                    let outcome = match memo.get(&key) {
                        Some(o) => *o,
                        None => {
                            let o = solve_point(&master, plan, scenario, value, seed)?;
                            memo.insert(key, o);
                            o
                        }
                    };
                    out.push(outcome);
                }
            }
            Ok(out)
        })
        .collect();
    let per_realization = per_realization?;

    let mut rows = Vec::new();
    for (vi, &value) in values.iter().enumerate() {
        for (si, &scenario) in plan.scenarios.iter().enumerate() {
            let idx = vi * plan.scenarios.len() + si;
            let outcomes: Vec<&RunOutcome> =
                per_realization.iter().map(|r| &r[idx]).collect();
            let feasible: Vec<&&RunOutcome> = outcomes.iter().filter(|o| o.feasible).collect();
            let n = feasible.len();
            let mean = |f: &dyn Fn(&RunOutcome) -> f64| -> f64 {
                if n == 0 {
                    0.0
                } else {
                    feasible.iter().map(|o| f(o)).sum::<f64>() / n as f64
                }
            };
            let std_err = |f: &dyn Fn(&RunOutcome) -> f64, m: f64| -> f64 {
                if n < 2 {
                    0.0
                } else {
                    let var = feasible.iter().map(|o| (f(o) - m).powi(2)).sum::<f64>()
                        / (n as f64 - 1.0);
                    (var / n as f64).sqrt()
                }
            };
            let mean_ee = mean(&|o| o.ee);
            let mean_se = mean(&|o| o.se);
            rows.push(SweepPoint {
                sweep_var: plan.sweep.name().to_string(),
                value,
                scenario: scenario.label().to_string(),
                mean_ee,
                se_ee: std_err(&|o| o.ee, mean_ee),
                mean_se,
                se_se: std_err(&|o| o.se, mean_se),
                mean_rate: mean(&|o| o.rate),
                mean_power: mean(&|o| o.power),
                infeasible_count: outcomes.len() - n,
                n,
            });
        }
    }
    Ok(ResultTable { rows })
}

fn point_key(plan: &ExperimentPlan, scenario: ScenarioChoice, value: f64) -> PointKey {
    let (mut s_eff, mut q_eff) = (plan.spec.subchannels, plan.spec.antennas);
    let mut nu = plan.nu;
    let mut p_antenna = dbm_to_mw(plan.spec.p_antenna_dbm);
    match &plan.sweep {
        SweepVar::AntennaCount(_) => q_eff = value as usize,
        SweepVar::Nu(_) => nu = value,
        SweepVar::AntennaPowerDbm(_) => p_antenna = dbm_to_mw(value),
        SweepVar::SubchannelCount(_) => s_eff = value as usize,
    }
    if scenario == ScenarioChoice::NoSelection {
        q_eff = 1;
    }
    PointKey {
        scenario,
        subchannels: s_eff,
        antennas: q_eff,
        nu_bits: nu.to_bits(),
        p_antenna_bits: p_antenna.to_bits(),
    }
}

/// Convenience wrapper: an `Allocation`-free summary of one generated
/// instance, handy for quick sanity checks.
pub fn zero_allocation(inst: &ProblemInstance) -> Allocation {
    Allocation::zeros(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> InstanceSpec {
        let mut spec = InstanceSpec::defaults(2, Scenario::Gas);
        spec.geometry = NetworkGeometry::square_grid(2, 500.0, 1000.0);
        spec.users_per_cell = 2;
        spec.subchannels = 2;
        spec.r_min = 1.0;
        spec
    }

    #[test]
    fn noise_power_matches_thermal_floor() {
        // -174 dBm/Hz over 180 kHz: about -121.45 dBm, 7.16e-13 mW.
        let sigma2 = noise_power_mw(-174.0, 180e3);
        let expect = dbm_to_mw(-174.0 + 10.0 * 180000f64.log10());
        assert_eq!(sigma2, expect);
        assert!((sigma2 - 7.16e-13).abs() / 7.16e-13 < 2e-3);
    }

    #[test]
    fn same_seed_same_tensor() {
        let spec = small_spec();
        let (a, la) = generate_instance(&spec, 99);
        let (b, lb) = generate_instance(&spec, 99);
        assert_eq!(a.gains, b.gains);
        assert_eq!(la.user_positions, lb.user_positions);
        let (c, _) = generate_instance(&spec, 100);
        assert_ne!(a.gains, c.gains);
    }

    #[test]
    fn doubling_distance_scales_gains_by_inverse_cube() {
        // Same seed, all geometry lengths doubled: identical fading draws,
        // distances exactly doubled, so every gain divides by 8 at alpha = 3.
        let spec = small_spec();
        let mut scaled = spec.clone();
        scaled.geometry.cell_radius_m *= 2.0;
        scaled.geometry.min_user_distance_m *= 2.0;
        scaled.geometry.cell_centers =
            spec.geometry.cell_centers.iter().map(|(x, y)| (x * 2.0, y * 2.0)).collect();
        let (a, _) = generate_instance(&spec, 7);
        let (b, _) = generate_instance(&scaled, 7);
        for (ga, gb) in a.gains.iter().zip(b.gains.iter()) {
            assert!((ga / gb - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn user_positions_respect_the_annulus() {
        let spec = small_spec();
        let (_, layout) = generate_instance(&spec, 3);
        for b in 0..2 {
            let (cx, cy) = spec.geometry.cell_centers[b];
            for m in 0..2 {
                let (x, y) = layout.user_positions[b * 2 + m];
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                assert!(d >= spec.geometry.min_user_distance_m - 1e-9);
                assert!(d <= spec.geometry.cell_radius_m + 1e-9);
            }
        }
    }

    #[test]
    fn restrict_slices_are_bit_identical() {
        let spec = small_spec();
        let (master, _) = generate_instance(&spec, 5);
        let sliced = restrict(&master, 1, 1);
        let d = master.dims;
        let nd = sliced.dims;
        for b in 0..d.cells {
            for m in 0..d.users {
                for rx in 0..d.cells {
                    assert_eq!(
                        sliced.gains[nd.link_index(b, m, 0, 0) * nd.cells + rx],
                        master.gains[d.link_index(b, m, 0, 0) * d.cells + rx]
                    );
                }
            }
        }
    }

    #[test]
    fn single_realization_mean_is_the_run_value() {
        let mut spec = small_spec();
        spec.r_min = 0.5;
        let plan = ExperimentPlan {
            spec,
            sweep: SweepVar::AntennaCount(vec![1, 2]),
            scenarios: vec![ScenarioChoice::Gas, ScenarioChoice::NoSelection],
            realizations: 1,
            master_seed: 11,
            solver: SolverConfig::default(),
            nu: 0.5,
        };
        let table = run_monte_carlo(&plan).unwrap();
        assert_eq!(table.rows.len(), 4);
        for row in &table.rows {
            assert_eq!(row.se_ee, 0.0); // single draw: no spread
            assert!(row.n + row.infeasible_count == 1);
        }
        // No-selection rows are identical across sweep values (same sliced
        // instance), and equal to GAS at the single-antenna point.
        let gas_q1 = &table.rows[0];
        let nosel_q1 = &table.rows[1];
        let nosel_q2 = &table.rows[3];
        assert_eq!(gas_q1.mean_ee, nosel_q1.mean_ee);
        assert_eq!(nosel_q1.mean_ee, nosel_q2.mean_ee);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let mut spec = small_spec();
        spec.r_min = 0.5;
        let plan = ExperimentPlan {
            spec,
            sweep: SweepVar::Nu(vec![0.3, 0.7]),
            scenarios: vec![ScenarioChoice::Gas],
            realizations: 2,
            master_seed: 21,
            solver: SolverConfig::default(),
            nu: 0.5,
        };
        let a = run_monte_carlo(&plan).unwrap();
        let b = run_monte_carlo(&plan).unwrap();
        for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(ra.mean_ee, rb.mean_ee);
            assert_eq!(ra.mean_se, rb.mean_se);
            assert_eq!(ra.mean_power, rb.mean_power);
        }
    }

    #[test]
    fn plan_validation_rejects_bad_values() {
        let spec = small_spec();
        let plan = ExperimentPlan {
            spec,
            sweep: SweepVar::AntennaCount(vec![3]), // beyond the master tensor
            scenarios: vec![ScenarioChoice::Gas],
            realizations: 1,
            master_seed: 0,
            solver: SolverConfig::default(),
            nu: 0.5,
        };
        assert!(matches!(run_monte_carlo(&plan), Err(SimError::InvalidPlan(_))));
    }
}
