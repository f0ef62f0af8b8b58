//! Conic assembly and solution of the per-iteration convex subproblems.
//!
//! Each majorized subproblem maximizes a concave objective (log-rate terms
//! plus affine surrogate and linear power/penalty terms) over the relaxed
//! constraint set. The log terms enter through exponential cones: an
//! auxiliary variable per link is capped by log2 of the normalized SINR
//! argument, so the whole problem becomes a linear-objective conic program
//! handed to an interior-point solver.
//!
//! Internally powers are expressed in units of `p_max` and every log argument
//! is normalized by the noise power, which keeps all linear rows near unit
//! scale; each exponential cone is additionally scaled by the anchor value of
//! its argument.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::model::{Allocation, ProblemInstance, Scenario, LN_2};
use crate::transform::{SurrogateModel, WeightedObjectiveConfig};

/// Failure modes of one subproblem solve.
#[derive(Debug, Clone)]
pub enum SubproblemError {
    /// The relaxed constraint set is empty (minimum rate unreachable).
    Infeasible,
    /// The interior-point solver stopped without a usable solution.
    Numerical(String),
}

impl std::fmt::Display for SubproblemError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubproblemError::Infeasible => write!(f, "subproblem infeasible"),
            SubproblemError::Numerical(s) => write!(f, "subproblem solver failed: {s}"),
        }
    }
}

/// Interior-point tolerances for one solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveTolerances {
    pub gap: f64,
    pub feas: f64,
    pub max_iter: u32,
}

impl Default for SolveTolerances {
    fn default() -> Self {
        SolveTolerances { gap: 1e-8, feas: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug)]
pub(crate) struct SubproblemOutcome {
    pub alloc: Allocation,
    pub ipm_iterations: usize,
    /// Achieved worst-user rate slack in max-min-slack mode.
    pub min_slack: Option<f64>,
}

/// Sparse conic program under assembly. Rows are appended in cone order:
/// equalities first, then nonnegative rows, then exponential cone triples.
struct Assembler {
    n_vars: usize,
    c: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    n_rows: usize,
}

impl Assembler {
    fn new(n_vars: usize) -> Self {
        Assembler { n_vars, c: vec![0.0; n_vars], triplets: Vec::new(), b: Vec::new(), n_rows: 0 }
    }

    fn push_row(&mut self, entries: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.n_rows;
        for &(col, val) in entries {
            if val != 0.0 {
                self.triplets.push((r, col, val));
            }
        }
        self.b.push(rhs);
        self.n_rows += 1;
        r
    }

    fn matrix(&mut self) -> CscMatrix<f64> {
        // Counting sort into CSC; duplicate (row, col) pairs are summed.
        let ncols = self.n_vars;
        let mut count = vec![0usize; ncols + 1];
        for &(_, c, _) in &self.triplets {
            count[c + 1] += 1;
        }
        for i in 0..ncols {
            count[i + 1] += count[i];
        }
        let nnz = self.triplets.len();
        let mut rows = vec![0usize; nnz];
        let mut vals = vec![0.0f64; nnz];
        let mut cursor = count.clone();
        for &(r, c, v) in &self.triplets {
            let k = cursor[c];
            rows[k] = r;
            vals[k] = v;
            cursor[c] += 1;
        }
        let mut colptr = vec![0usize; ncols + 1];
        let mut out_rows = Vec::with_capacity(nnz);
        let mut out_vals = Vec::with_capacity(nnz);
        for c in 0..ncols {
            let lo = count[c];
            let hi = count[c + 1];
            let mut seg: Vec<(usize, f64)> =
                (lo..hi).map(|k| (rows[k], vals[k])).collect();
            seg.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < seg.len() {
                let mut v = seg[i].1;
                let r = seg[i].0;
                let mut j = i + 1;
                while j < seg.len() && seg[j].0 == r {
                    v += seg[j].1;
                    j += 1;
                }
                out_rows.push(r);
                out_vals.push(v);
                i = j;
            }
            colptr[c + 1] = out_rows.len();
        }
        CscMatrix::new(self.n_rows, ncols, colptr, out_rows, out_vals)
    }
}

fn run_once(
    asm: &Assembler,
    a: &CscMatrix<f64>,
    cones: &[SupportedConeT<f64>],
    gap: f64,
    feas: f64,
    max_iter: u32,
) -> Result<(Vec<f64>, usize), SubproblemError> {
    let p = CscMatrix::<f64>::zeros((asm.n_vars, asm.n_vars));
    let settings = DefaultSettingsBuilder::default()
        .verbose(std::env::var_os("SEESAW_IPM_VERBOSE").is_some())
        .max_iter(max_iter)
        .tol_gap_abs(gap)
        .tol_gap_rel(gap)
        .tol_feas(feas)
        .equilibrate_min_scaling(1e-8)
        .equilibrate_max_scaling(1e8)
        .build()
        .map_err(|e| SubproblemError::Numerical(format!("settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, &asm.c, a, &asm.b, cones, settings)
        .map_err(|e| SubproblemError::Numerical(format!("assembly: {e}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            Ok((solver.solution.x.clone(), solver.info.iterations as usize))
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Err(SubproblemError::Infeasible)
        }
        other => Err(SubproblemError::Numerical(format!("{other:?}"))),
    }
}

/// Runs the interior-point solver; when `persistent` is set, stalls retry on
/// a ladder of loosened tolerances (restoration only needs a slack-improving
/// point, not a high-accuracy one).
fn run_solver(
    asm: &mut Assembler,
    cones: &[SupportedConeT<f64>],
    tol: &SolveTolerances,
    persistent: bool,
) -> Result<(Vec<f64>, usize), SubproblemError> {
    let a = asm.matrix();
    let mut outcome = run_once(asm, &a, cones, tol.gap, tol.feas, tol.max_iter);
    if persistent {
        for relax in [1e2, 1e4] {
            match &outcome {
                Err(SubproblemError::Numerical(_)) => {
                    outcome =
                        run_once(asm, &a, cones, tol.gap * relax, tol.feas * relax, tol.max_iter);
                }
                _ => break,
            }
        }
    }
    outcome
}

/// Column layout of the full relaxed subproblem. Besides the powers,
/// indicators and per-link log caps, one auxiliary column per (cell,
/// sub-channel) carries the normalized out-of-cell interference; the
/// linearized interference logs are linear in it, which keeps every row
/// short.
struct FullVars {
    n_p: usize,
    n_x: usize,
    n_a: usize,
    n_t: usize,
    n_interf: usize,
    n_r: usize,
    /// Extra trailing column for the max-min slack variable, if present.
    slack: Option<usize>,
}

impl FullVars {
    fn p(&self, i: usize) -> usize {
        i
    }
    fn x(&self, i: usize) -> usize {
        self.n_p + i
    }
    fn a(&self, i: usize) -> usize {
        self.n_p + self.n_x + i
    }
    fn t(&self, i: usize) -> usize {
        self.n_p + self.n_x + self.n_a + i
    }
    fn interf(&self, i: usize) -> usize {
        self.n_p + self.n_x + self.n_a + self.n_t + i
    }
    /// Per-(cell, user, sub-channel) rate credited toward the minimum-rate
    /// rows.
    fn r(&self, i: usize) -> usize {
        self.n_p + self.n_x + self.n_a + self.n_t + self.n_interf + i
    }
    fn total(&self) -> usize {
        self.n_p + self.n_x + self.n_a + self.n_t + self.n_interf + self.n_r
            + usize::from(self.slack.is_some())
    }
}

/// Interferer columns and normalized coefficients seen by receiver (b, s):
/// every out-of-cell link on sub-channel s with coefficient
/// p_max * gain / noise.
fn interferer_terms(inst: &ProblemInstance, rx: usize, s: usize) -> Vec<(usize, f64)> {
    let d = inst.dims;
    let scale = inst.p_max_mw / inst.noise_mw;
    let mut terms = Vec::new();
    for b in 0..d.cells {
        if b == rx {
            continue;
        }
        for k in 0..d.users {
            for q in 0..d.antennas {
                let g = inst.gain(b, k, s, q, rx);
                if g > 0.0 {
                    terms.push((d.link_index(b, k, s, q), g * scale));
                }
            }
        }
    }
    terms
}

/// Solves one majorized subproblem over the full relaxed variable set.
///
/// With `obj = Some(cfg)` the objective is the penalized weighted rate/power
/// surrogate; with `obj = None` the objective maximizes the worst per-user
/// rate slack (rate-restoration phase) and the achieved slack is reported.
pub(crate) fn solve_full(
    inst: &ProblemInstance,
    surrogate: &SurrogateModel,
    obj: &WeightedObjectiveConfig,
    maximin: bool,
    tol: &SolveTolerances,
) -> Result<SubproblemOutcome, SubproblemError> {
    let d = inst.dims;
    let anchor = &surrogate.anchor;
    let n_p = d.links();
    let (n_x, n_a) = (anchor.subchannel.len(), anchor.antenna.len());
    let n_t = n_p;
    let n_interf = d.cells * d.subchannels;
    let n_r = d.cells * d.users * d.subchannels;
    let base = n_p + n_x + n_a + n_t + n_interf + n_r;
    let vars = FullVars { n_p, n_x, n_a, n_t, n_interf, n_r, slack: maximin.then_some(base) };
    let mut asm = Assembler::new(vars.total());

    // Normalized interferer coefficients per receiver (b, s) and their anchor
    // totals. The tangents of the interference logs are linear in the totals:
    // d/dT [MQ * log2(1 + T)] = MQ / (ln2 * (1 + T0)).
    let interferers: Vec<Vec<(usize, f64)>> = (0..d.cells)
        .flat_map(|b| (0..d.subchannels).map(move |s| (b, s)))
        .map(|(b, s)| interferer_terms(inst, b, s))
        .collect();
    let anchor_interf: Vec<f64> = interferers
        .iter()
        .map(|terms| {
            terms.iter().map(|&(j, c)| c * anchor.power[j] / inst.p_max_mw).sum::<f64>()
        })
        .collect();

    // Objective (minimization form). In max-min-slack mode the worst-user
    // rate slack dominates and the weighted objective (penalty off) enters at
    // a small scale, which regularizes the otherwise cost-free directions.
    {
        let cfg = obj;
        let (scale, lambda) =
            if maximin { (1e-3, 0.0) } else { (1.0, cfg.lambda) };
        let rate_w = scale * cfg.nu / cfg.w_rate;
        let power_w = scale * (1.0 - cfg.nu) / cfg.w_power;
        for i in 0..n_t {
            asm.c[vars.t(i)] = -rate_w;
        }
        for j in 0..n_p {
            asm.c[vars.p(j)] = power_w * inst.p_max_mw / inst.kappa;
        }
        let multiplicity = (d.users * d.antennas) as f64;
        for i in 0..n_interf {
            asm.c[vars.interf(i)] = rate_w * multiplicity / (LN_2 * (1.0 + anchor_interf[i]));
        }
        for i in 0..n_x {
            asm.c[vars.x(i)] = lambda * (1.0 - 2.0 * anchor.subchannel[i]);
        }
        let antenna_power = match inst.scenario {
            Scenario::Gas => inst.p_antenna_mw,
            // CAS circuit power is one RF chain per user regardless of a.
            Scenario::Cas => 0.0,
        };
        for i in 0..n_a {
            asm.c[vars.a(i)] = lambda * (1.0 - 2.0 * anchor.antenna[i]) + power_w * antenna_power;
        }
        if let Some(col) = vars.slack {
            asm.c[col] = -1.0;
        }
    }

    // Equalities.
    let mut row = Vec::new();
    for i in 0..n_interf {
        row.clear();
        row.push((vars.interf(i), 1.0));
        for &(j, c) in &interferers[i] {
            row.push((vars.p(j), -c));
        }
        asm.push_row(&row, 0.0);
    }
    match inst.scenario {
        Scenario::Gas => {
            for b in 0..d.cells {
                for s in 0..d.subchannels {
                    row.clear();
                    for m in 0..d.users {
                        row.push((vars.x(d.bms_index(b, m, s)), 1.0));
                    }
                    asm.push_row(&row, 1.0);
                }
            }
            // One antenna on assigned sub-channels: sum_q a = x.
            for b in 0..d.cells {
                for m in 0..d.users {
                    for s in 0..d.subchannels {
                        row.clear();
                        for q in 0..d.antennas {
                            row.push((vars.a(d.link_index(b, m, s, q)), 1.0));
                        }
                        row.push((vars.x(d.bms_index(b, m, s)), -1.0));
                        asm.push_row(&row, 0.0);
                    }
                }
            }
        }
        Scenario::Cas => {
            for b in 0..d.cells {
                for s in 0..d.subchannels {
                    row.clear();
                    for m in 0..d.users {
                        for q in 0..d.antennas {
                            row.push((vars.x(d.link_index(b, m, s, q)), 1.0));
                        }
                    }
                    asm.push_row(&row, 1.0);
                }
            }
            for b in 0..d.cells {
                for m in 0..d.users {
                    row.clear();
                    for q in 0..d.antennas {
                        row.push((vars.a(d.bmq_index(b, m, q)), 1.0));
                    }
                    asm.push_row(&row, 1.0);
                }
            }
        }
    }
    let n_eq = asm.n_rows;

    // Nonnegative rows: boxes, big-M coupling, budgets, rate constraints.
    for j in 0..n_p {
        asm.push_row(&[(vars.p(j), -1.0)], 0.0);
    }
    for i in 0..n_x {
        asm.push_row(&[(vars.x(i), -1.0)], 0.0);
    }
    for i in 0..n_a {
        asm.push_row(&[(vars.a(i), -1.0)], 0.0);
    }
    for b in 0..d.cells {
        for m in 0..d.users {
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    let j = d.link_index(b, m, s, q);
                    let (xc, ac) = match inst.scenario {
                        Scenario::Gas => (vars.x(d.bms_index(b, m, s)), vars.a(j)),
                        Scenario::Cas => (vars.x(j), vars.a(d.bmq_index(b, m, q))),
                    };
                    // p <= x * p_max (in p_max units), p <= a * p_max.
                    asm.push_row(&[(vars.p(j), 1.0), (xc, -1.0)], 0.0);
                    asm.push_row(&[(vars.p(j), 1.0), (ac, -1.0)], 0.0);
                    if inst.scenario == Scenario::Cas {
                        // x^{sq} <= a^q. (Under GAS the antenna-sum equality
                        // plus nonnegativity already implies a <= x.)
                        asm.push_row(&[(xc, 1.0), (ac, -1.0)], 0.0);
                    }
                }
            }
            row.clear();
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    row.push((vars.p(d.link_index(b, m, s, q)), 1.0));
                }
            }
            asm.push_row(&row, 1.0);
        }
    }

    // With a positive rate demand every user must hold at least one
    // sub-channel in any feasible binary point, so the aggregated indicator
    // cut sum_s x >= 1 is valid and keeps the relaxation from serving a
    // user's rate through vanishing indicators.
    if inst.r_min > 0.0 {
        for b in 0..d.cells {
            for m in 0..d.users {
                row.clear();
                match inst.scenario {
                    Scenario::Gas => {
                        for s in 0..d.subchannels {
                            row.push((vars.x(d.bms_index(b, m, s)), -1.0));
                        }
                    }
                    Scenario::Cas => {
                        for s in 0..d.subchannels {
                            for q in 0..d.antennas {
                                row.push((vars.x(d.link_index(b, m, s, q)), -1.0));
                            }
                        }
                    }
                }
                asm.push_row(&row, -1.0);
            }
        }
    }

    // Per-(user, sub-channel) rate credit r: bounded by the DC rate of the
    // sub-channel (capped log terms minus the tangent of the interference
    // log, which overestimates it) and by the sub-channel indicator times the
    // interference-free rate ceiling. The indicator cap is valid at every
    // binary point and stops vanishing indicators from serving a user's rate
    // demand through powers the big-M rows still allow.
    let noise_scale = inst.p_max_mw / inst.noise_mw;
    for b in 0..d.cells {
        for s in 0..d.subchannels {
            let t0 = anchor_interf[b * d.subchannels + s];
            let beta = 1.0 / (LN_2 * (1.0 + t0));
            let qf = d.antennas as f64;
            let rhs = qf * (beta * t0 - (1.0 + t0).log2());
            for m in 0..d.users {
                let ri = vars.r(d.bms_index(b, m, s));
                row.clear();
                row.push((ri, 1.0));
                for q in 0..d.antennas {
                    row.push((vars.t(d.link_index(b, m, s, q)), -1.0));
                }
                row.push((vars.interf(b * d.subchannels + s), qf * beta));
                asm.push_row(&row, rhs);

                row.clear();
                row.push((ri, 1.0));
                match inst.scenario {
                    Scenario::Gas => {
                        let ceiling = (0..d.antennas)
                            .map(|q| 1.0 + inst.direct_gain(b, m, s, q) * noise_scale)
                            .fold(1.0f64, f64::max)
                            .log2();
                        row.push((vars.x(d.bms_index(b, m, s)), -ceiling));
                    }
                    Scenario::Cas => {
                        for q in 0..d.antennas {
                            let ceiling =
                                (1.0 + inst.direct_gain(b, m, s, q) * noise_scale).log2();
                            row.push((vars.x(d.link_index(b, m, s, q)), -ceiling));
                        }
                    }
                }
                asm.push_row(&row, 0.0);
                asm.push_row(&[(ri, -1.0)], 0.0);
            }
        }
    }

    // Per-user minimum rate over the credited sub-channel rates.
    for b in 0..d.cells {
        for m in 0..d.users {
            row.clear();
            for s in 0..d.subchannels {
                row.push((vars.r(d.bms_index(b, m, s)), -1.0));
            }
            if let Some(slack_col) = vars.slack {
                row.push((slack_col, 1.0));
            }
            asm.push_row(&row, -inst.r_min);
        }
    }
    let n_ineq = asm.n_rows - n_eq;

    // Exponential cones: per link, t * ln2 <= log of the normalized argument
    // 1 + direct / noise + T. Each cone is scaled by its anchor argument.
    let mut cones: Vec<SupportedConeT<f64>> =
        vec![SupportedConeT::ZeroConeT(n_eq), SupportedConeT::NonnegativeConeT(n_ineq)];
    for b in 0..d.cells {
        for s in 0..d.subchannels {
            let t0 = anchor_interf[b * d.subchannels + s];
            for m in 0..d.users {
                for q in 0..d.antennas {
                    let i = d.link_index(b, m, s, q);
                    let c_dir = inst.direct_gain(b, m, s, q) * noise_scale;
                    let v_anchor = 1.0 + t0 + c_dir * anchor.power[i] / inst.p_max_mw;
                    let alpha = 1.0 / v_anchor.max(1.0);
                    asm.push_row(&[(vars.t(i), -alpha * LN_2)], 0.0);
                    asm.push_row(&[], alpha);
                    row.clear();
                    row.push((vars.p(i), -alpha * c_dir));
                    row.push((vars.interf(b * d.subchannels + s), -alpha));
                    asm.push_row(&row, alpha);
                    cones.push(SupportedConeT::ExponentialConeT());
                }
            }
        }
    }

    let (x, iters) = run_solver(&mut asm, &cones, tol, maximin)?;
    let mut alloc = Allocation::zeros(inst);
    alloc.binary = false;
    for j in 0..n_p {
        alloc.power[j] = (x[vars.p(j)] * inst.p_max_mw).clamp(0.0, inst.p_max_mw);
    }
    for i in 0..n_x {
        alloc.subchannel[i] = x[vars.x(i)].clamp(0.0, 1.0);
    }
    for i in 0..n_a {
        alloc.antenna[i] = x[vars.a(i)].clamp(0.0, 1.0);
    }
    let min_slack = vars.slack.map(|col| x[col]);
    Ok(SubproblemOutcome { alloc, ipm_iterations: iters, min_slack })
}

/// One active transmit link of a fixed binary assignment.
#[derive(Debug, Clone, Copy)]
struct ActiveLink {
    link: usize,
    b: usize,
    s: usize,
    user: usize,
}

fn active_links(inst: &ProblemInstance, binaries: &Allocation) -> Vec<ActiveLink> {
    let d = inst.dims;
    let mut out = Vec::new();
    for b in 0..d.cells {
        for m in 0..d.users {
            for s in 0..d.subchannels {
                for q in 0..d.antennas {
                    if binaries.mask(inst, b, m, s, q) > 0.5 {
                        out.push(ActiveLink {
                            link: d.link_index(b, m, s, q),
                            b,
                            s,
                            user: d.user_index(b, m),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Solves the power-only subproblem for a fixed binary assignment, majorized
/// at `anchor_power`. Variables are the powers on active links plus one log
/// cap per active link; the rate constraints use the active-set restriction
/// of the DC split, so a solution's true per-user rate meets `r_min + margin`.
///
/// With `obj = None` the worst-user slack is maximized instead (power-only
/// rate restoration).
pub(crate) fn solve_power_only(
    inst: &ProblemInstance,
    binaries: &Allocation,
    anchor_power: &[f64],
    obj: &WeightedObjectiveConfig,
    maximin: bool,
    rmin_margin: f64,
    tol: &SolveTolerances,
) -> Result<SubproblemOutcome, SubproblemError> {
    let d = inst.dims;
    let links = active_links(inst, binaries);
    let n_act = links.len();
    let n_users = d.cells * d.users;

    // A user with no active link cannot meet a positive rate demand.
    if inst.r_min > 0.0 && !maximin {
        let mut covered = vec![false; n_users];
        for l in &links {
            covered[l.user] = true;
        }
        if covered.iter().any(|c| !c) {
            return Err(SubproblemError::Infeasible);
        }
    }

    let slack_col = maximin.then_some(2 * n_act);
    let n_vars = 2 * n_act + usize::from(slack_col.is_some());
    let mut asm = Assembler::new(n_vars);
    let p_col = |k: usize| k;
    let t_col = |k: usize| n_act + k;

    // Anchor interference per (b, s) from active links only.
    let mut denom = vec![inst.noise_mw; d.cells * d.subchannels];
    for l in &links {
        let (lb, lk, ls, lq) = unpack(d, l.link);
        for rx in 0..d.cells {
            if rx != l.b {
                denom[rx * d.subchannels + l.s] +=
                    anchor_power[l.link] * inst.gain(lb, lk, ls, lq, rx);
            }
        }
    }

    // Objective; in max-min-slack mode the weighted terms act as a small
    // regularizer under the dominant slack term.
    {
        let cfg = obj;
        let scale = if maximin { 1e-3 } else { 1.0 };
        let rate_w = scale * cfg.nu / cfg.w_rate;
        let power_w = scale * (1.0 - cfg.nu) / cfg.w_power;
        for k in 0..n_act {
            asm.c[t_col(k)] = -rate_w;
            asm.c[p_col(k)] = power_w * inst.p_max_mw / inst.kappa;
        }
        // The active-set interference log G_act: one term per (rx, s) pair
        // with an active receiver link; its gradient enters the linearized
        // objective.
        let mut receiver_count = vec![0usize; d.cells * d.subchannels];
        for l in &links {
            receiver_count[l.b * d.subchannels + l.s] += 1;
        }
        for (k, l) in links.iter().enumerate() {
            let (lb, lk, ls, lq) = unpack(d, l.link);
            let mut grad = 0.0;
            for rx in 0..d.cells {
                if rx == l.b {
                    continue;
                }
                let idx = rx * d.subchannels + l.s;
                if receiver_count[idx] > 0 {
                    grad += receiver_count[idx] as f64 * inst.gain(lb, lk, ls, lq, rx)
                        / (LN_2 * denom[idx]);
                }
            }
            asm.c[p_col(k)] += rate_w * grad * inst.p_max_mw;
        }
        if let Some(col) = slack_col {
            asm.c[col] = -1.0;
        }
    }

    // No equalities.
    let n_eq = 0;
    for k in 0..n_act {
        asm.push_row(&[(p_col(k), -1.0)], 0.0);
        asm.push_row(&[(p_col(k), 1.0)], 1.0);
    }
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    for (k, l) in links.iter().enumerate() {
        per_user[l.user].push(k);
    }
    let mut row = Vec::new();
    for u in 0..n_users {
        if per_user[u].is_empty() {
            continue;
        }
        row.clear();
        for &k in &per_user[u] {
            row.push((p_col(k), 1.0));
        }
        asm.push_row(&row, 1.0);
    }

    // Rate rows over the active-set DC split: for user u,
    // sum_k t_k >= r_min + margin + g_act_u(anchor) - sq_u*log2(noise)
    //              + grad_g_act_u . (p - anchor).
    for u in 0..n_users {
        if per_user[u].is_empty() {
            continue;
        }
        let (ub, _um) = (u / d.users, u % d.users);
        row.clear();
        // Active sub-channels of this user (exactly one link per assigned s).
        let mut user_subchannels = vec![false; d.subchannels];
        let mut g_anchor = 0.0;
        for &k in &per_user[u] {
            row.push((t_col(k), -1.0));
            user_subchannels[links[k].s] = true;
            let idx = ub * d.subchannels + links[k].s;
            g_anchor += (denom[idx] / inst.noise_mw).log2();
        }
        let mut rhs = -(inst.r_min + rmin_margin) - g_anchor;
        for (k, l) in links.iter().enumerate() {
            if l.b == ub || !user_subchannels[l.s] {
                continue;
            }
            let (lb, lk, ls, lq) = unpack(d, l.link);
            let g = inst.gain(lb, lk, ls, lq, ub) / (LN_2 * denom[ub * d.subchannels + l.s]);
            row.push((p_col(k), g * inst.p_max_mw));
            rhs += g * anchor_power[l.link];
        }
        if let Some(col) = slack_col {
            row.push((col, 1.0));
        }
        asm.push_row(&row, rhs);
    }
    let n_ineq = asm.n_rows - n_eq;

    let mut cones: Vec<SupportedConeT<f64>> = vec![SupportedConeT::NonnegativeConeT(n_ineq)];
    let noise_scale = inst.p_max_mw / inst.noise_mw;
    for (k, l) in links.iter().enumerate() {
        let (lb, lk, ls, lq) = unpack(d, l.link);
        let c_dir = inst.direct_gain(lb, lk, ls, lq) * noise_scale;
        let mut interferers: Vec<(usize, f64)> = Vec::new();
        for (k2, l2) in links.iter().enumerate() {
            if l2.b != l.b && l2.s == l.s {
                let (jb, jk, js, jq) = unpack(d, l2.link);
                interferers.push((k2, inst.gain(jb, jk, js, jq, l.b) * noise_scale));
            }
        }
        let v_anchor = (denom[l.b * d.subchannels + l.s]
            + anchor_power[l.link] * inst.direct_gain(lb, lk, ls, lq))
            / inst.noise_mw;
        let alpha = 1.0 / v_anchor.max(1.0);
        asm.push_row(&[(t_col(k), -alpha * LN_2)], 0.0);
        asm.push_row(&[], alpha);
        row.clear();
        row.push((p_col(k), -alpha * c_dir));
        for &(k2, coeff) in &interferers {
            row.push((p_col(k2), -alpha * coeff));
        }
        asm.push_row(&row, alpha);
        cones.push(SupportedConeT::ExponentialConeT());
    }

    let (x, iters) = run_solver(&mut asm, &cones, tol, maximin)?;
    let mut alloc = binaries.clone();
    alloc.power = vec![0.0; d.links()];
    for (k, l) in links.iter().enumerate() {
        alloc.power[l.link] = (x[p_col(k)] * inst.p_max_mw).clamp(0.0, inst.p_max_mw);
    }
    let min_slack = slack_col.map(|col| x[col]);
    Ok(SubproblemOutcome { alloc, ipm_iterations: iters, min_slack })
}

fn unpack(d: crate::model::Dims, link: usize) -> (usize, usize, usize, usize) {
    let q = link % d.antennas;
    let rest = link / d.antennas;
    let s = rest % d.subchannels;
    let rest = rest / d.subchannels;
    let m = rest % d.users;
    let b = rest / d.users;
    (b, m, s, q)
}
