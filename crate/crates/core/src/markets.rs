//! Benchmark market clearings: the sequential reserve / day-ahead /
//! balancing chain and the two-stage stochastic co-optimization that lower
//! bounds every other design.
//!
//! Degenerate ties between equal-cost generators are broken by a
//! lexicographic objective perturbation of 1e-9 per generator index;
//! reported costs are always recomputed from primal values with the true
//! coefficients.

use serde::Serialize;
use thiserror::Error;

use crate::milp::{solve_lp, LinExpr, MilpModel, ModelError, Solution, SolverParams, VarId};
use crate::net::{Generator, GridMatrices, PowerNetwork};
use crate::scen::{deterministic_requirements, ScenError, ScenarioSet};

const TIE_BREAK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("{stage} clearing infeasible: {detail}")]
    Infeasible { stage: &'static str, detail: String },
    #[error("{stage} clearing unbounded")]
    Unbounded { stage: &'static str },
    #[error(transparent)]
    Solver(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenError),
    #[error("internal: {0}")]
    Internal(String),
}

/// Procured reserve capacity per generator.
#[derive(Debug, Clone, Serialize)]
pub struct ReserveSchedule {
    pub r_up: Vec<f64>,
    pub r_dn: Vec<f64>,
    /// Procurement cost at true coefficients.
    pub cost: f64,
    /// Marginal prices of the up/down requirement rows (zero when the
    /// schedule was not produced by a requirement-constrained clearing).
    pub price_up: f64,
    pub price_dn: f64,
}

impl ReserveSchedule {
    pub fn zeros(n_gens: usize) -> Self {
        ReserveSchedule {
            r_up: vec![0.0; n_gens],
            r_dn: vec![0.0; n_gens],
            cost: 0.0,
            price_up: 0.0,
            price_dn: 0.0,
        }
    }

    pub fn total_up(&self) -> f64 {
        self.r_up.iter().sum()
    }

    pub fn total_dn(&self) -> f64 {
        self.r_dn.iter().sum()
    }
}

/// Day-ahead energy schedule with expected PTDF flows.
#[derive(Debug, Clone, Serialize)]
pub struct DayAheadSchedule {
    pub p: Vec<f64>,
    pub w: Vec<f64>,
    pub flows: Vec<f64>,
    pub cost: f64,
}

/// Per-scenario recourse outcome.
#[derive(Debug, Clone, Serialize)]
pub struct BalancingOutcome {
    pub p_up: Vec<f64>,
    pub p_dn: Vec<f64>,
    pub curtail: Vec<f64>,
    pub shed: Vec<f64>,
    pub flows: Vec<f64>,
    pub cost: f64,
}

/// The reporting unit: reserve / day-ahead / expected balancing / total.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct CostBreakdown {
    pub reserve: f64,
    pub day_ahead: f64,
    pub expected_balancing: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(reserve: f64, day_ahead: f64, expected_balancing: f64) -> Self {
        CostBreakdown {
            reserve,
            day_ahead,
            expected_balancing,
            total: reserve + day_ahead + expected_balancing,
        }
    }

    /// Additivity check, 1e-6 relative.
    pub fn is_consistent(&self) -> bool {
        let sum = self.reserve + self.day_ahead + self.expected_balancing;
        (self.total - sum).abs() <= 1e-6 * self.total.abs().max(1.0)
    }
}

fn lp(model: &MilpModel, params: &SolverParams, stage: &'static str) -> Result<Solution, MarketError> {
    let sol = solve_lp(model, params)?;
    match sol.status {
        crate::milp::SolveStatus::Optimal => Ok(sol),
        crate::milp::SolveStatus::Infeasible => Err(MarketError::Infeasible {
            stage,
            detail: "LP reported infeasible".into(),
        }),
        crate::milp::SolveStatus::Unbounded => Err(MarketError::Unbounded { stage }),
        s => Err(MarketError::Internal(format!("{stage}: unexpected status {s}"))),
    }
}

/// Cost-minimal merit-order reserve procurement against system-wide
/// requirements.
pub fn solve_reserve_market(
    fleet: &[Generator],
    lambda_up: f64,
    lambda_dn: f64,
    params: &SolverParams,
) -> Result<ReserveSchedule, MarketError> {
    let mut m = MilpModel::new("reserve_market");
    let mut up_vars = Vec::with_capacity(fleet.len());
    let mut dn_vars = Vec::with_capacity(fleet.len());
    let mut sum_up = LinExpr::new();
    let mut sum_dn = LinExpr::new();
    for (g, gen) in fleet.iter().enumerate() {
        let ru = m.continuous(&format!("rup_g{}", gen.id), 0.0, gen.r_up_max)?;
        let rd = m.continuous(&format!("rdn_g{}", gen.id), 0.0, gen.r_dn_max)?;
        m.obj_coef(ru, gen.c_up + TIE_BREAK * (g + 1) as f64);
        m.obj_coef(rd, gen.c_dn + TIE_BREAK * (g + 1) as f64);
        sum_up.add(ru, 1.0);
        sum_dn.add(rd, 1.0);
        up_vars.push(ru);
        dn_vars.push(rd);
    }
    let req_up = m.ge("req_up", sum_up, lambda_up)?;
    let req_dn = m.ge("req_dn", sum_dn, lambda_dn)?;

    let total_up: f64 = fleet.iter().map(|g| g.r_up_max).sum();
    let total_dn: f64 = fleet.iter().map(|g| g.r_dn_max).sum();
    let sol = lp(&m, params, "reserve").map_err(|e| match e {
        MarketError::Infeasible { stage, .. } => MarketError::Infeasible {
            stage,
            detail: format!(
                "requirements ({lambda_up}, {lambda_dn}) MW exceed offered capacity ({total_up}, {total_dn}) MW"
            ),
        },
        other => other,
    })?;

    let r_up: Vec<f64> = up_vars.iter().map(|&v| sol.value(v)).collect();
    let r_dn: Vec<f64> = dn_vars.iter().map(|&v| sol.value(v)).collect();
    let cost = fleet
        .iter()
        .enumerate()
        .map(|(g, gen)| gen.c_up * r_up[g] + gen.c_dn * r_dn[g])
        .sum();
    Ok(ReserveSchedule {
        r_up,
        r_dn,
        cost,
        price_up: sol.dual(req_up),
        price_dn: sol.dual(req_dn),
    })
}

/// PTDF flow expression over generator and wind variables; the constant
/// -M.D part is returned for folding into the row rhs.
fn flow_terms(
    net: &PowerNetwork,
    mat: &GridMatrices,
    l: usize,
    p_vars: &[VarId],
    w_vars: &[VarId],
) -> (LinExpr, f64) {
    let mut e = LinExpr::new();
    for (g, gen) in net.generators.iter().enumerate() {
        let coef = mat.ptdf[(l, net.bus_index(gen.bus))];
        e.add(p_vars[g], coef);
    }
    for (j, w) in net.wind_farms.iter().enumerate() {
        let coef = mat.ptdf[(l, net.bus_index(w.bus))];
        e.add(w_vars[j], coef);
    }
    let base: f64 = (0..net.n_buses())
        .map(|n| -mat.ptdf[(l, n)] * net.buses[n].load)
        .sum();
    (e, base)
}

/// Least-cost day-ahead dispatch under reserve-restricted limits and
/// capacity margins `gamma` withdrawn from the line ratings.
pub fn solve_day_ahead(
    net: &PowerNetwork,
    mat: &GridMatrices,
    reserves: &ReserveSchedule,
    gamma: &[f64],
    wind_point: &[f64],
    params: &SolverParams,
) -> Result<DayAheadSchedule, MarketError> {
    for (l, line) in net.lines.iter().enumerate() {
        if !(0.0..=line.rating + 1e-9).contains(&gamma[l]) {
            return Err(MarketError::Infeasible {
                stage: "day-ahead",
                detail: format!(
                    "margin {} on line {} outside [0, {}]",
                    gamma[l], line.id, line.rating
                ),
            });
        }
    }
    let mut m = MilpModel::new("day_ahead");
    let mut p_vars = Vec::new();
    let mut w_vars = Vec::new();
    for (g, gen) in net.generators.iter().enumerate() {
        let lb = gen.p_min + reserves.r_dn[g];
        let ub = gen.p_max - reserves.r_up[g];
        if lb > ub + 1e-9 {
            return Err(MarketError::Infeasible {
                stage: "day-ahead",
                detail: format!(
                    "generator {} squeezed out: p_min + r_dn = {lb} > p_max - r_up = {ub}",
                    gen.id
                ),
            });
        }
        let v = m.continuous(&format!("p_g{}", gen.id), lb, ub.max(lb))?;
        m.obj_coef(v, gen.c + TIE_BREAK * (g + 1) as f64);
        p_vars.push(v);
    }
    for (j, w) in net.wind_farms.iter().enumerate() {
        let v = m.continuous(&format!("w_j{}", w.id), 0.0, wind_point[j])?;
        w_vars.push(v);
    }
    let mut balance = LinExpr::new();
    for &v in p_vars.iter().chain(&w_vars) {
        balance.add(v, 1.0);
    }
    m.eq("balance", balance, net.total_load())?;
    for (l, line) in net.lines.iter().enumerate() {
        let cap = line.rating - gamma[l];
        let (expr, base) = flow_terms(net, mat, l, &p_vars, &w_vars);
        m.le(&format!("fmax_l{}", line.id), expr.clone(), cap - base)?;
        m.ge(&format!("fmin_l{}", line.id), expr, -cap - base)?;
    }

    let sol = lp(&m, params, "day-ahead").map_err(|e| match e {
        MarketError::Infeasible { stage, detail } => {
            let headroom: f64 = net
                .generators
                .iter()
                .enumerate()
                .map(|(g, gen)| gen.p_max - reserves.r_up[g])
                .sum::<f64>()
                + wind_point.iter().sum::<f64>();
            let choked: Vec<u32> = net
                .lines
                .iter()
                .enumerate()
                .filter(|(l, line)| gamma[*l] >= line.rating - 1e-9)
                .map(|(_, line)| line.id)
                .collect();
            MarketError::Infeasible {
                stage,
                detail: format!(
                    "{detail}; headroom {headroom} MW vs load {} MW; fully withdrawn lines {choked:?}",
                    net.total_load()
                ),
            }
        }
        other => other,
    })?;

    let p: Vec<f64> = p_vars.iter().map(|&v| sol.value(v)).collect();
    let w: Vec<f64> = w_vars.iter().map(|&v| sol.value(v)).collect();
    let flows = dispatch_flows(net, mat, &p, &w, None);
    let cost = net
        .generators
        .iter()
        .zip(&p)
        .map(|(gen, &pv)| gen.c * pv)
        .sum();
    Ok(DayAheadSchedule { p, w, flows, cost })
}

/// PTDF flows for a dispatch; `recourse` optionally adjusts injections by
/// (delta_gen, wind_actual_minus_curtail, shed) for balancing states.
fn dispatch_flows(
    net: &PowerNetwork,
    mat: &GridMatrices,
    p: &[f64],
    w: &[f64],
    recourse: Option<(&[f64], &[f64], &[f64])>,
) -> Vec<f64> {
    let n = net.n_buses();
    let mut inj = vec![0.0; n];
    for (g, gen) in net.generators.iter().enumerate() {
        inj[net.bus_index(gen.bus)] += p[g];
    }
    for (j, wf) in net.wind_farms.iter().enumerate() {
        inj[net.bus_index(wf.bus)] += w[j];
    }
    for (b, bus) in net.buses.iter().enumerate() {
        inj[b] -= bus.load;
    }
    if let Some((dp, dw, shed)) = recourse {
        for (g, gen) in net.generators.iter().enumerate() {
            inj[net.bus_index(gen.bus)] += dp[g];
        }
        for (j, wf) in net.wind_farms.iter().enumerate() {
            inj[net.bus_index(wf.bus)] += dw[j];
        }
        for (b, s) in shed.iter().enumerate() {
            inj[b] += s;
        }
    }
    mat.flows(&inj)
}

/// Least-cost recourse for one wind realization. Down-activation is a
/// cost credit; negative balancing cost is legal.
pub fn solve_balancing(
    net: &PowerNetwork,
    mat: &GridMatrices,
    day_ahead: &DayAheadSchedule,
    reserves: &ReserveSchedule,
    realization: &[f64],
    params: &SolverParams,
) -> Result<BalancingOutcome, MarketError> {
    let mut m = MilpModel::new("balancing");
    let mut up = Vec::new();
    let mut dn = Vec::new();
    for (g, gen) in net.generators.iter().enumerate() {
        let u = m.continuous(&format!("pup_g{}", gen.id), 0.0, reserves.r_up[g].max(0.0))?;
        let d = m.continuous(&format!("pdn_g{}", gen.id), 0.0, reserves.r_dn[g].max(0.0))?;
        m.obj_coef(u, gen.c + TIE_BREAK * (g + 1) as f64);
        m.obj_coef(d, -gen.c + TIE_BREAK * (g + 1) as f64);
        up.push(u);
        dn.push(d);
    }
    let mut ct = Vec::new();
    for (j, w) in net.wind_farms.iter().enumerate() {
        let v = m.continuous(&format!("wct_j{}", w.id), 0.0, realization[j])?;
        m.obj_coef(v, net.curtail_cost);
        ct.push(v);
    }
    let mut sh = Vec::new();
    for bus in &net.buses {
        let v = m.continuous(&format!("dsh_n{}", bus.id), 0.0, bus.load)?;
        m.obj_coef(v, net.shed_cost);
        sh.push(v);
    }

    // sum dW_j = sum (W_js - w*_j) enters the balance as a constant.
    let imbalance: f64 = realization
        .iter()
        .zip(&day_ahead.w)
        .map(|(act, sched)| act - sched)
        .sum();
    let mut balance = LinExpr::new();
    for g in 0..net.n_gens() {
        balance.add(up[g], 1.0).add(dn[g], -1.0);
    }
    for &v in &ct {
        balance.add(v, -1.0);
    }
    for &v in &sh {
        balance.add(v, 1.0);
    }
    m.eq("balance", balance, -imbalance)?;

    // Real-time flows at full ratings.
    for (l, line) in net.lines.iter().enumerate() {
        let mut e = LinExpr::new();
        let mut base = 0.0;
        for (g, gen) in net.generators.iter().enumerate() {
            let coef = mat.ptdf[(l, net.bus_index(gen.bus))];
            e.add(up[g], coef).add(dn[g], -coef);
            base += coef * day_ahead.p[g];
        }
        for (j, w) in net.wind_farms.iter().enumerate() {
            let coef = mat.ptdf[(l, net.bus_index(w.bus))];
            e.add(ct[j], -coef);
            base += coef * realization[j];
        }
        for (b, bus) in net.buses.iter().enumerate() {
            let coef = mat.ptdf[(l, b)];
            e.add(sh[b], coef);
            base -= coef * bus.load;
        }
        m.le(&format!("fmax_l{}", line.id), e.clone(), line.rating - base)?;
        m.ge(&format!("fmin_l{}", line.id), e, -line.rating - base)?;
    }

    let sol = lp(&m, params, "balancing").map_err(|e| match e {
        MarketError::Infeasible { .. } => MarketError::Internal(
            "balancing LP reported infeasible; recourse should be complete".into(),
        ),
        other => other,
    })?;

    let p_up: Vec<f64> = up.iter().map(|&v| sol.value(v)).collect();
    let p_dn: Vec<f64> = dn.iter().map(|&v| sol.value(v)).collect();
    let curtail: Vec<f64> = ct.iter().map(|&v| sol.value(v)).collect();
    let shed: Vec<f64> = sh.iter().map(|&v| sol.value(v)).collect();
    let cost = balancing_cost(net, &p_up, &p_dn, &curtail, &shed);

    let dp: Vec<f64> = p_up.iter().zip(&p_dn).map(|(u, d)| u - d).collect();
    let dw: Vec<f64> = realization
        .iter()
        .zip(&curtail)
        .zip(&day_ahead.w)
        .map(|((act, c), sched)| act - c - sched)
        .collect();
    let flows = dispatch_flows(net, mat, &day_ahead.p, &day_ahead.w, Some((&dp, &dw, &shed)));
    Ok(BalancingOutcome {
        p_up,
        p_dn,
        curtail,
        shed,
        flows,
        cost,
    })
}

pub(crate) fn balancing_cost(
    net: &PowerNetwork,
    p_up: &[f64],
    p_dn: &[f64],
    curtail: &[f64],
    shed: &[f64],
) -> f64 {
    let act: f64 = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| gen.c * (p_up[g] - p_dn[g]))
        .sum();
    act + net.curtail_cost * curtail.iter().sum::<f64>()
        + net.shed_cost * shed.iter().sum::<f64>()
}

/// Variable handles of one scenario's recourse block inside a larger
/// model (stochastic extensive form, zonal MILP, Benders subproblem).
#[derive(Debug, Clone)]
pub struct RecourseVars {
    pub up: Vec<VarId>,
    pub dn: Vec<VarId>,
    pub ct: Vec<VarId>,
    pub sh: Vec<VarId>,
}

/// Emits one balancing block: activation bounded by the (variable)
/// procured reserves, scenario balance, and full-rating flow limits.
/// Objective terms are weighted by `pi`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn emit_recourse_block(
    m: &mut MilpModel,
    net: &PowerNetwork,
    mat: &GridMatrices,
    realization: &[f64],
    s: usize,
    pi: f64,
    rup: &[VarId],
    rdn: &[VarId],
    p_vars: &[VarId],
    w_vars: &[VarId],
) -> Result<RecourseVars, ModelError> {
    let mut blk = RecourseVars {
        up: Vec::new(),
        dn: Vec::new(),
        ct: Vec::new(),
        sh: Vec::new(),
    };
    for (g, gen) in net.generators.iter().enumerate() {
        let u = m.continuous(&format!("pup_g{}_s{s}", gen.id), 0.0, gen.r_up_max)?;
        let d = m.continuous(&format!("pdn_g{}_s{s}", gen.id), 0.0, gen.r_dn_max)?;
        m.obj_coef(u, pi * gen.c + TIE_BREAK * (g + 1) as f64);
        m.obj_coef(d, pi * -gen.c + TIE_BREAK * (g + 1) as f64);
        // Activation within procured reserve.
        let mut e = LinExpr::new();
        e.add(u, 1.0).add(rup[g], -1.0);
        m.le(&format!("actup_g{}_s{s}", gen.id), e, 0.0)?;
        let mut e = LinExpr::new();
        e.add(d, 1.0).add(rdn[g], -1.0);
        m.le(&format!("actdn_g{}_s{s}", gen.id), e, 0.0)?;
        blk.up.push(u);
        blk.dn.push(d);
    }
    for (j, w) in net.wind_farms.iter().enumerate() {
        let v = m.continuous(&format!("wct_j{}_s{s}", w.id), 0.0, realization[j])?;
        m.obj_coef(v, pi * net.curtail_cost);
        blk.ct.push(v);
    }
    for bus in &net.buses {
        let v = m.continuous(&format!("dsh_n{}_s{s}", bus.id), 0.0, bus.load)?;
        m.obj_coef(v, pi * net.shed_cost);
        blk.sh.push(v);
    }
    // Scenario balance: sum(dp) + sum(W - w - ct) + sum(sh) = 0.
    let mut e = LinExpr::new();
    for g in 0..net.n_gens() {
        e.add(blk.up[g], 1.0).add(blk.dn[g], -1.0);
    }
    let mut w_total = 0.0;
    for j in 0..net.n_wind() {
        e.add(w_vars[j], -1.0).add(blk.ct[j], -1.0);
        w_total += realization[j];
    }
    for &v in &blk.sh {
        e.add(v, 1.0);
    }
    m.eq(&format!("bal_s{s}"), e, -w_total)?;
    // Real-time flows at full ratings.
    for (l, line) in net.lines.iter().enumerate() {
        let mut e = LinExpr::new();
        let mut base = 0.0;
        for (g, gen) in net.generators.iter().enumerate() {
            let coef = mat.ptdf[(l, net.bus_index(gen.bus))];
            e.add(p_vars[g], coef)
                .add(blk.up[g], coef)
                .add(blk.dn[g], -coef);
        }
        for (j, w) in net.wind_farms.iter().enumerate() {
            let coef = mat.ptdf[(l, net.bus_index(w.bus))];
            e.add(blk.ct[j], -coef);
            base += coef * realization[j];
        }
        for (b, bus) in net.buses.iter().enumerate() {
            let coef = mat.ptdf[(l, b)];
            e.add(blk.sh[b], coef);
            base -= coef * bus.load;
        }
        m.le(&format!("fmax_l{}_s{s}", line.id), e.clone(), line.rating - base)?;
        m.ge(&format!("fmin_l{}_s{s}", line.id), e, -line.rating - base)?;
    }
    Ok(blk)
}

/// Reads a recourse block's outcome out of a solution vector.
pub(crate) fn recourse_outcome(
    net: &PowerNetwork,
    mat: &GridMatrices,
    values: &[f64],
    blk: &RecourseVars,
    da_p: &[f64],
    da_w: &[f64],
    realization: &[f64],
) -> BalancingOutcome {
    let p_up: Vec<f64> = blk.up.iter().map(|&v| values[v.index()]).collect();
    let p_dn: Vec<f64> = blk.dn.iter().map(|&v| values[v.index()]).collect();
    let curtail: Vec<f64> = blk.ct.iter().map(|&v| values[v.index()]).collect();
    let shed: Vec<f64> = blk.sh.iter().map(|&v| values[v.index()]).collect();
    let cost = balancing_cost(net, &p_up, &p_dn, &curtail, &shed);
    let dp: Vec<f64> = p_up.iter().zip(&p_dn).map(|(u, d)| u - d).collect();
    let dw: Vec<f64> = realization
        .iter()
        .zip(&curtail)
        .zip(da_w)
        .map(|((act, c), sched)| act - c - sched)
        .collect();
    let flows = dispatch_flows(net, mat, da_p, da_w, Some((&dp, &dw, &shed)));
    BalancingOutcome {
        p_up,
        p_dn,
        curtail,
        shed,
        flows,
        cost,
    }
}

/// Full chained outcome of one market design.
#[derive(Debug, Clone, Serialize)]
pub struct MarketOutcome {
    pub reserves: ReserveSchedule,
    pub day_ahead: DayAheadSchedule,
    pub balancing: Vec<BalancingOutcome>,
    pub breakdown: CostBreakdown,
    /// System requirements used, when the design has them.
    pub lambda_up: f64,
    pub lambda_dn: f64,
}

/// Sequential pipeline: quantile requirements, reserve clearing, day-ahead
/// clearing, per-scenario balancing.
pub fn run_sequential(
    net: &PowerNetwork,
    mat: &GridMatrices,
    scenarios: &ScenarioSet,
    q: f64,
    params: &SolverParams,
) -> Result<MarketOutcome, MarketError> {
    let (lambda_up, lambda_dn) = deterministic_requirements(scenarios, q)?;
    let reserves = solve_reserve_market(&net.generators, lambda_up, lambda_dn, params)?;
    let gamma = vec![0.0; net.n_lines()];
    let wind_point: Vec<f64> = net.wind_farms.iter().map(|w| w.forecast).collect();
    let day_ahead = solve_day_ahead(net, mat, &reserves, &gamma, &wind_point, params)?;
    let mut balancing = Vec::with_capacity(scenarios.n_scenarios());
    let mut expected = 0.0;
    for s in 0..scenarios.n_scenarios() {
        let out = solve_balancing(net, mat, &day_ahead, &reserves, &scenarios.values[s], params)?;
        expected += scenarios.probabilities[s] * out.cost;
        balancing.push(out);
    }
    let breakdown = CostBreakdown::new(reserves.cost, day_ahead.cost, expected);
    Ok(MarketOutcome {
        reserves,
        day_ahead,
        balancing,
        breakdown,
        lambda_up,
        lambda_dn,
    })
}

/// Two-stage stochastic co-optimization of reserve and energy; the
/// lower-bound benchmark. Reserves are only capacity-bounded, positioned
/// freely by the optimizer.
pub fn solve_stochastic(
    net: &PowerNetwork,
    mat: &GridMatrices,
    scenarios: &ScenarioSet,
    params: &SolverParams,
) -> Result<MarketOutcome, MarketError> {
    scenarios.validate()?;
    let mut m = MilpModel::new("stochastic");

    let mut rup = Vec::new();
    let mut rdn = Vec::new();
    let mut p_vars = Vec::new();
    let mut w_vars = Vec::new();
    for (g, gen) in net.generators.iter().enumerate() {
        let ru = m.continuous(&format!("rup_g{}", gen.id), 0.0, gen.r_up_max)?;
        let rd = m.continuous(&format!("rdn_g{}", gen.id), 0.0, gen.r_dn_max)?;
        m.obj_coef(ru, gen.c_up + TIE_BREAK * (g + 1) as f64);
        m.obj_coef(rd, gen.c_dn + TIE_BREAK * (g + 1) as f64);
        let p = m.continuous(&format!("p_g{}", gen.id), gen.p_min, gen.p_max)?;
        m.obj_coef(p, gen.c + TIE_BREAK * (g + 1) as f64);
        rup.push(ru);
        rdn.push(rd);
        p_vars.push(p);
    }
    for w in &net.wind_farms {
        w_vars.push(m.continuous(&format!("w_j{}", w.id), 0.0, w.forecast)?);
    }
    // Reserve-restricted dispatch limits, with r as variables.
    for (g, gen) in net.generators.iter().enumerate() {
        let mut e = LinExpr::new();
        e.add(p_vars[g], 1.0).add(rup[g], 1.0);
        m.le(&format!("pmax_g{}", gen.id), e, gen.p_max)?;
        let mut e = LinExpr::new();
        e.add(p_vars[g], 1.0).add(rdn[g], -1.0);
        m.ge(&format!("pmin_g{}", gen.id), e, gen.p_min)?;
    }
    let mut balance = LinExpr::new();
    for &v in p_vars.iter().chain(&w_vars) {
        balance.add(v, 1.0);
    }
    m.eq("da_balance", balance, net.total_load())?;

    // Per-scenario recourse blocks.
    let mut blocks = Vec::with_capacity(scenarios.n_scenarios());
    for s in 0..scenarios.n_scenarios() {
        let blk = emit_recourse_block(
            &mut m,
            net,
            mat,
            &scenarios.values[s],
            s,
            scenarios.probabilities[s],
            &rup,
            &rdn,
            &p_vars,
            &w_vars,
        )?;
        blocks.push(blk);
    }

    let sol = lp(&m, params, "stochastic")?;

    let r_up: Vec<f64> = rup.iter().map(|&v| sol.value(v)).collect();
    let r_dn: Vec<f64> = rdn.iter().map(|&v| sol.value(v)).collect();
    let p: Vec<f64> = p_vars.iter().map(|&v| sol.value(v)).collect();
    let w: Vec<f64> = w_vars.iter().map(|&v| sol.value(v)).collect();
    let reserve_cost: f64 = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| gen.c_up * r_up[g] + gen.c_dn * r_dn[g])
        .sum();
    let da_cost: f64 = net
        .generators
        .iter()
        .zip(&p)
        .map(|(gen, &pv)| gen.c * pv)
        .sum();

    let day_ahead = DayAheadSchedule {
        flows: dispatch_flows(net, mat, &p, &w, None),
        p,
        w,
        cost: da_cost,
    };
    let reserves = ReserveSchedule {
        r_up,
        r_dn,
        cost: reserve_cost,
        price_up: 0.0,
        price_dn: 0.0,
    };

    let mut balancing = Vec::with_capacity(scenarios.n_scenarios());
    let mut expected = 0.0;
    for (s, blk) in blocks.iter().enumerate() {
        let out = recourse_outcome(
            net,
            mat,
            &sol.values,
            blk,
            &day_ahead.p,
            &day_ahead.w,
            &scenarios.values[s],
        );
        expected += scenarios.probabilities[s] * out.cost;
        balancing.push(out);
    }

    let breakdown = CostBreakdown::new(reserve_cost, da_cost, expected);
    Ok(MarketOutcome {
        reserves,
        day_ahead,
        balancing,
        breakdown,
        lambda_up: 0.0,
        lambda_dn: 0.0,
    })
}
