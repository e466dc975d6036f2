//! Multi-cut Benders decomposition of the zonal MILP.
//!
//! The master keeps everything upstream of the balancing stage (both KKT
//! systems, partitioning, capacity allocation) plus one value variable per
//! scenario; subproblems are the per-scenario balancing LPs with the
//! first-stage quantities pinned by equality rows whose duals become the
//! cut subgradients. Recourse is complete, so only optimality cuts exist.

use serde::Serialize;
use thiserror::Error;

use crate::markets::{self, CostBreakdown, MarketError};
use crate::milp::{
    solve_lp_relaxation, solve_milp, LinExpr, MilpModel, ModelError, SolveStatus, SolverParams,
    VarId,
};
use crate::net::{GridMatrices, PowerNetwork};
use crate::scen::ScenarioSet;
use crate::zonal::{certify_first_stage, emit_first_stage, FirstStage, ZonalConfig, ZonalError, ZonalOutcome};

#[derive(Debug, Error)]
pub enum BendersError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Zonal(#[from] ZonalError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("master problem {0} at iteration {1}")]
    MasterFailed(String, usize),
    #[error("subproblem for scenario {0} reported {1}; recourse should be complete")]
    SubproblemFailed(usize, String),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Decomposition controls.
#[derive(Debug, Clone)]
pub struct BendersConfig {
    /// Convergence tolerance on |sum pi theta - sum pi C_B|.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Lower bound for the per-scenario value variables. Defaults to the
    /// deepest possible down-activation credit, -sum_g C_g R_g^-.
    pub theta_lb: Option<f64>,
}

impl Default for BendersConfig {
    fn default() -> Self {
        BendersConfig {
            epsilon: 1e-4,
            max_iterations: 100,
            theta_lb: None,
        }
    }
}

fn default_theta_lb(net: &PowerNetwork) -> f64 {
    -net.generators
        .iter()
        .map(|g| g.c * g.r_dn_max)
        .sum::<f64>()
}

/// First-stage values a cut is anchored at.
#[derive(Debug, Clone, Serialize)]
pub struct FirstStagePoint {
    pub r_up: Vec<f64>,
    pub r_dn: Vec<f64>,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
}

/// One optimality cut.
#[derive(Debug, Clone, Serialize)]
pub struct Cut {
    pub scenario: usize,
    /// Subproblem value at the anchor.
    pub intercept: f64,
    pub d_r_up: Vec<f64>,
    pub d_r_dn: Vec<f64>,
    pub d_p: Vec<f64>,
    pub d_w: Vec<f64>,
    pub anchor: FirstStagePoint,
}

impl Cut {
    /// Cut value at an arbitrary first-stage point.
    pub fn evaluate(&self, point: &FirstStagePoint) -> f64 {
        let mut v = self.intercept;
        for g in 0..self.d_r_up.len() {
            v += self.d_r_up[g] * (point.r_up[g] - self.anchor.r_up[g]);
            v += self.d_r_dn[g] * (point.r_dn[g] - self.anchor.r_dn[g]);
            v += self.d_p[g] * (point.p[g] - self.anchor.p[g]);
        }
        for j in 0..self.d_w.len() {
            v += self.d_w[j] * (point.w[j] - self.anchor.w[j]);
        }
        v
    }
}

/// Master problem state across iterations.
pub struct MasterState {
    pub model: MilpModel,
    pub first_stage: FirstStage,
    pub theta: Vec<VarId>,
    pub theta_lb: f64,
    pub cuts: Vec<Cut>,
    pub iteration: usize,
}

impl MasterState {
    pub fn cut_count(&self) -> usize {
        self.cuts.len()
    }
}

/// Builds the cutless master: first-stage blocks plus bounded value
/// variables weighted by the scenario probabilities.
pub fn build_master(
    net: &PowerNetwork,
    mat: &GridMatrices,
    probabilities: &[f64],
    cfg: &ZonalConfig,
    bcfg: &BendersConfig,
) -> Result<MasterState, BendersError> {
    let mut model = MilpModel::new(&format!("benders_master_z{}", cfg.zones));
    let first_stage = emit_first_stage(&mut model, net, mat, cfg)?;
    let theta_lb = bcfg.theta_lb.unwrap_or_else(|| default_theta_lb(net));
    let mut theta = Vec::with_capacity(probabilities.len());
    for (s, &pi) in probabilities.iter().enumerate() {
        let t = model.continuous(&format!("theta_s{s}"), theta_lb, f64::INFINITY)?;
        model.obj_coef(t, pi);
        theta.push(t);
    }
    Ok(MasterState {
        model,
        first_stage,
        theta,
        theta_lb,
        cuts: Vec::new(),
        iteration: 0,
    })
}

/// Subproblem solve: the balancing LP for one scenario with the first
/// stage pinned by equality rows. Returns the cost and the fixing-row
/// duals (the cut subgradients).
pub fn solve_subproblem(
    net: &PowerNetwork,
    mat: &GridMatrices,
    realization: &[f64],
    point: &FirstStagePoint,
    params: &SolverParams,
) -> Result<(f64, Cut), BendersError> {
    let ng = net.n_gens();
    let nj = net.n_wind();
    let mut m = MilpModel::new("benders_sub");
    let inf = f64::INFINITY;
    let mut rup = Vec::with_capacity(ng);
    let mut rdn = Vec::with_capacity(ng);
    let mut p = Vec::with_capacity(ng);
    for gen in &net.generators {
        rup.push(m.continuous(&format!("rup_g{}", gen.id), -inf, inf)?);
        rdn.push(m.continuous(&format!("rdn_g{}", gen.id), -inf, inf)?);
        p.push(m.continuous(&format!("p_g{}", gen.id), -inf, inf)?);
    }
    let mut w = Vec::with_capacity(nj);
    for wf in &net.wind_farms {
        w.push(m.continuous(&format!("w_j{}", wf.id), -inf, inf)?);
    }
    let mut fix_rup = Vec::with_capacity(ng);
    let mut fix_rdn = Vec::with_capacity(ng);
    let mut fix_p = Vec::with_capacity(ng);
    for (g, gen) in net.generators.iter().enumerate() {
        fix_rup.push(m.eq(&format!("fixru_g{}", gen.id), LinExpr::term(rup[g], 1.0), point.r_up[g])?);
        fix_rdn.push(m.eq(&format!("fixrd_g{}", gen.id), LinExpr::term(rdn[g], 1.0), point.r_dn[g])?);
        fix_p.push(m.eq(&format!("fixp_g{}", gen.id), LinExpr::term(p[g], 1.0), point.p[g])?);
    }
    let mut fix_w = Vec::with_capacity(nj);
    for (j, wf) in net.wind_farms.iter().enumerate() {
        fix_w.push(m.eq(&format!("fixw_j{}", wf.id), LinExpr::term(w[j], 1.0), point.w[j])?);
    }
    emit_recourse_block_for_sub(&mut m, net, mat, realization, &rup, &rdn, &p, &w)?;

    let sol = solve_lp_relaxation(&m, params)?;
    if sol.status != SolveStatus::Optimal {
        return Err(BendersError::SubproblemFailed(0, sol.status.to_string()));
    }
    let cut = Cut {
        scenario: 0,
        intercept: sol.objective,
        d_r_up: fix_rup.iter().map(|&c| sol.dual(c)).collect(),
        d_r_dn: fix_rdn.iter().map(|&c| sol.dual(c)).collect(),
        d_p: fix_p.iter().map(|&c| sol.dual(c)).collect(),
        d_w: fix_w.iter().map(|&c| sol.dual(c)).collect(),
        anchor: point.clone(),
    };
    Ok((sol.objective, cut))
}

// The shared recourse emitter lives in markets; this thin wrapper keeps
// its probability weight at one (subproblem objectives are unweighted).
#[allow(clippy::too_many_arguments)]
fn emit_recourse_block_for_sub(
    m: &mut MilpModel,
    net: &PowerNetwork,
    mat: &GridMatrices,
    realization: &[f64],
    rup: &[VarId],
    rdn: &[VarId],
    p: &[VarId],
    w: &[VarId],
) -> Result<(), ModelError> {
    markets::emit_recourse_block(m, net, mat, realization, 0, 1.0, rup, rdn, p, w)?;
    Ok(())
}

/// Appends one optimality cut per scenario to the master.
pub fn add_cuts(master: &mut MasterState, cuts: Vec<Cut>) -> Result<(), BendersError> {
    for cut in cuts {
        let s = cut.scenario;
        let k = master.iteration;
        // theta_s >= intercept + d . (v - anchor)
        let mut e = LinExpr::term(master.theta[s], 1.0);
        let mut rhs = cut.intercept;
        for g in 0..cut.d_r_up.len() {
            e.add(master.first_stage.reserve.r_up[g], -cut.d_r_up[g]);
            e.add(master.first_stage.reserve.r_dn[g], -cut.d_r_dn[g]);
            e.add(master.first_stage.day_ahead.p[g], -cut.d_p[g]);
            rhs -= cut.d_r_up[g] * cut.anchor.r_up[g];
            rhs -= cut.d_r_dn[g] * cut.anchor.r_dn[g];
            rhs -= cut.d_p[g] * cut.anchor.p[g];
        }
        for j in 0..cut.d_w.len() {
            e.add(master.first_stage.day_ahead.w[j], -cut.d_w[j]);
            rhs -= cut.d_w[j] * cut.anchor.w[j];
        }
        master
            .model
            .ge(&format!("cut_s{s}_k{k}"), e, rhs)?;
        master.cuts.push(cut);
    }
    Ok(())
}

/// One iteration record.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BendersTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

/// Runs the decomposition to the convergence test
/// |sum_s pi_s theta_s - sum_s pi_s C_B,s| <= epsilon.
pub fn run_benders(
    net: &PowerNetwork,
    mat: &GridMatrices,
    scenarios: &ScenarioSet,
    cfg: &ZonalConfig,
    bcfg: &BendersConfig,
    params: &SolverParams,
) -> Result<(ZonalOutcome, BendersTrace), BendersError> {
    if bcfg.epsilon <= 0.0 {
        return Err(BendersError::BadTolerance(bcfg.epsilon));
    }
    scenarios.validate().map_err(MarketError::from)?;
    let started = std::time::Instant::now();
    let mut master = build_master(net, mat, &scenarios.probabilities, cfg, bcfg)?;
    let mut trace = BendersTrace::default();
    let mut best: Option<(f64, crate::milp::Solution, Vec<(f64, Cut)>)> = None;

    for iteration in 1..=bcfg.max_iterations {
        master.iteration = iteration;
        // Master re-solved from scratch each iteration; deterministic.
        let sol = solve_milp(&master.model, params, None)?;
        match sol.status {
            SolveStatus::Infeasible => {
                return Err(BendersError::MasterFailed("infeasible".into(), iteration))
            }
            SolveStatus::Unbounded => {
                return Err(BendersError::MasterFailed("unbounded".into(), iteration))
            }
            s if !s.is_ok() => {
                return Err(BendersError::MasterFailed(s.to_string(), iteration))
            }
            _ => {}
        }
        // Proven master bound, not just the incumbent value.
        let lower = sol.objective - sol.gap * sol.objective.abs();

        let point = FirstStagePoint {
            r_up: master.first_stage.reserve.r_up.iter().map(|&v| sol.value(v)).collect(),
            r_dn: master.first_stage.reserve.r_dn.iter().map(|&v| sol.value(v)).collect(),
            p: master.first_stage.day_ahead.p.iter().map(|&v| sol.value(v)).collect(),
            w: master.first_stage.day_ahead.w.iter().map(|&v| sol.value(v)).collect(),
        };
        let mut sub_results = Vec::with_capacity(scenarios.n_scenarios());
        let mut expected_true = 0.0;
        let mut expected_theta = 0.0;
        for s in 0..scenarios.n_scenarios() {
            let (cost, mut cut) =
                solve_subproblem(net, mat, &scenarios.values[s], &point, params)
                    .map_err(|e| match e {
                        BendersError::SubproblemFailed(_, msg) => {
                            BendersError::SubproblemFailed(s, msg)
                        }
                        other => other,
                    })?;
            cut.scenario = s;
            expected_true += scenarios.probabilities[s] * cost;
            expected_theta += scenarios.probabilities[s] * sol.value(master.theta[s]);
            sub_results.push((cost, cut));
        }
        let first_stage_cost = sol.objective
            - master
                .theta
                .iter()
                .zip(&scenarios.probabilities)
                .map(|(&t, &pi)| pi * sol.value(t))
                .sum::<f64>();
        let upper = first_stage_cost + expected_true;

        let improved = match &best {
            None => true,
            Some((u, _, _)) => upper < *u - 1e-12,
        };
        if improved {
            best = Some((upper, sol.clone(), sub_results.clone()));
        }

        trace.rows.push(TraceRow {
            iteration,
            lower,
            upper,
            gap: upper - lower,
            wall_s: started.elapsed().as_secs_f64(),
        });

        if (expected_theta - expected_true).abs() <= bcfg.epsilon {
            trace.converged = true;
            break;
        }
        add_cuts(&mut master, sub_results.into_iter().map(|(_, c)| c).collect())?;
    }

    let (_, sol, sub_results) = best.ok_or_else(|| {
        BendersError::MasterFailed("no iteration produced a solution".into(), 0)
    })?;

    // Certify the first stage exactly like the extensive path.
    let fs = certify_first_stage(
        net,
        mat,
        &master.model,
        &master.first_stage.partition,
        &master.first_stage.capacity,
        &master.first_stage.lambda_up,
        &master.first_stage.lambda_dn,
        &master.first_stage.reserve,
        &master.first_stage.day_ahead,
        &master.first_stage.all_complementarities(),
        &sol,
        params,
    )?;

    // Balancing outcomes re-solved at the accepted first stage.
    let reserves = fs.reserves.clone();
    let mut balancing = Vec::with_capacity(scenarios.n_scenarios());
    let mut expected = 0.0;
    for s in 0..scenarios.n_scenarios() {
        let b = markets::solve_balancing(
            net,
            mat,
            &fs.day_ahead,
            &reserves,
            &scenarios.values[s],
            params,
        )?;
        expected += scenarios.probabilities[s] * b.cost;
        balancing.push(b);
    }
    let _ = sub_results;
    let breakdown = CostBreakdown::new(fs.reserves.cost, fs.day_ahead.cost, expected);
    let outcome = ZonalOutcome {
        status: if trace.converged {
            "optimal".into()
        } else {
            "iteration_limit".into()
        },
        gap: trace.rows.last().map(|r| r.gap).unwrap_or(f64::NAN),
        nodes: 0,
        partition: fs.partition,
        lambda_up: fs.lambda_up,
        lambda_dn: fs.lambda_dn,
        zone_price_up: fs.zone_price_up,
        zone_price_dn: fs.zone_price_dn,
        reserves: fs.reserves,
        reserve_split_up: fs.reserve_split_up,
        reserve_split_dn: fs.reserve_split_dn,
        day_ahead: fs.day_ahead,
        balancing,
        gamma: fs.gamma,
        breakdown,
        bigm_clean: true,
        cert_reserve: fs.cert_reserve,
        cert_day_ahead: fs.cert_day_ahead,
    };
    Ok((outcome, trace))
}

/// Serializes a trace as CSV (iteration, lower, upper, gap, wall seconds).
pub fn trace_to_csv(trace: &BendersTrace) -> String {
    let mut out = String::from("iteration,lower,upper,gap,wall_s\n");
    for r in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration, r.lower, r.upper, r.gap, r.wall_s
        ));
    }
    out
}
