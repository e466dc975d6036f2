//! The zonal clearing design as a single MILP: zone boundaries, zonal
//! reserve requirements, and cross-zonal capacity set-asides are chosen
//! upstream while both lower-level clearings (zonal reserve market,
//! day-ahead energy market) are embedded through their KKT conditions with
//! linearized complementarity.
//!
//! Every accepted solve is certified: the lower-level LPs are re-solved at
//! the fixed upper level and must reproduce the embedded KKT objectives,
//! and no complementarity big-M may be binding. A failed certificate is a
//! hard error, not a warning.

use serde::Serialize;
use thiserror::Error;

use crate::markets::{
    self, emit_recourse_block, recourse_outcome, BalancingOutcome, CostBreakdown,
    DayAheadSchedule, MarketError, RecourseVars, ReserveSchedule,
};
use crate::milp::{
    audit_bigm, linearize_complementarity, solve_lp_relaxation, solve_milp, BigMAudit, ComplHandle,
    ConId, LinExpr, MilpModel, ModelError, SolveStatus, SolverParams, VarId,
};
use crate::net::{GridMatrices, PowerNetwork};
use crate::partition::{
    emit_partition_block, enumerate_partitions, extract_partition, verify_partition, Partition,
    PartitionConfig, PartitionError, PartitionVars,
};
use crate::scen::ScenarioSet;

#[derive(Debug, Error)]
pub enum ZonalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("zonal model infeasible: {0}")]
    Infeasible(String),
    #[error("zonal solve failed: {0}")]
    Solve(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("config: {0}")]
    Config(String),
}

/// Configuration of one zonal clearing design.
#[derive(Debug, Clone)]
pub struct ZonalConfig {
    pub zones: usize,
    /// Fraction of a cross-zonal line's rating eligible for set-aside.
    pub chi: f64,
    pub y_min: u32,
    pub y_max: Option<u32>,
    pub symmetry_breaking: bool,
    /// Upper bound on every embedded dual; defaults to 10x the shed cost.
    pub dual_bound: Option<f64>,
    /// Seed the branch-and-bound with feasible points built from the
    /// sequential design on a quantile grid.
    pub seed_incumbent: bool,
}

impl ZonalConfig {
    pub fn new(zones: usize, chi: f64, y_min: u32) -> Self {
        ZonalConfig {
            zones,
            chi,
            y_min,
            y_max: None,
            symmetry_breaking: true,
            dual_bound: None,
            seed_incumbent: true,
        }
    }

    fn partition_config(&self) -> PartitionConfig {
        PartitionConfig {
            zones: self.zones,
            y_min: self.y_min,
            y_max: self.y_max,
            symmetry_breaking: self.symmetry_breaking,
        }
    }

    fn dual_bound(&self, net: &PowerNetwork) -> f64 {
        self.dual_bound.unwrap_or(10.0 * net.shed_cost)
    }
}

/// Capacity-allocation variables: per-line-and-zone endpoint counts and
/// set-aside shares, plus the per-line margin withdrawn from day-ahead.
#[derive(Debug, Clone)]
pub struct CapacityVars {
    /// h[l][z] in {0,1,2}: endpoints of line l inside zone z.
    pub h: Vec<Vec<VarId>>,
    /// gamma_share[l][z]: capacity set aside for exchanges with zone z.
    pub gamma_share: Vec<Vec<VarId>>,
    /// gamma[l]: the margin applied to day-ahead flow limits.
    pub gamma: Vec<VarId>,
    pub chi: f64,
}

/// Emits the capacity-allocation block. With `chi = 0` every margin is
/// pinned to zero and day-ahead limits revert to the full ratings.
pub fn emit_capacity_block(
    model: &mut MilpModel,
    pvars: &PartitionVars,
    net: &PowerNetwork,
    chi: f64,
) -> Result<CapacityVars, ZonalError> {
    if !(0.0..=1.0).contains(&chi) {
        return Err(ZonalError::Config(format!("chi {chi} outside [0, 1]")));
    }
    let nz = pvars.zones;
    let nl = net.n_lines();
    let mut h = vec![Vec::with_capacity(nz); nl];
    let mut gamma_share = vec![Vec::with_capacity(nz); nl];
    let mut gamma = Vec::with_capacity(nl);
    for (l, line) in net.lines.iter().enumerate() {
        let from = net.bus_index(line.from);
        let to = net.bus_index(line.to);
        let cap = chi * line.rating;
        let g = model.continuous(&format!("gam_l{}", line.id), 0.0, cap)?;
        for z in 0..nz {
            let hv = model.integer(&format!("h_l{}_z{}", line.id, z + 1), 0.0, 2.0)?;
            let mut e = LinExpr::term(hv, 1.0);
            e.add(pvars.x[from][z], -1.0).add(pvars.x[to][z], -1.0);
            model.eq(&format!("hdef_l{}_z{}", line.id, z + 1), e, 0.0)?;

            let gs = model.continuous(&format!("gams_l{}_z{}", line.id, z + 1), 0.0, cap)?;
            // gamma_share <= chi F h  and  gamma_share <= chi F (2 - h):
            // zero unless the line is cross-zonal for this zone (h = 1).
            let mut e = LinExpr::term(gs, 1.0);
            e.add(hv, -cap);
            model.le(&format!("env1_l{}_z{}", line.id, z + 1), e, 0.0)?;
            let mut e = LinExpr::term(gs, 1.0);
            e.add(hv, cap);
            model.le(&format!("env2_l{}_z{}", line.id, z + 1), e, 2.0 * cap)?;
            // 0 <= gamma_share <= gamma
            let mut e = LinExpr::term(gs, 1.0);
            e.add(g, -1.0);
            model.le(&format!("shr_l{}_z{}", line.id, z + 1), e, 0.0)?;
            h[l].push(hv);
            gamma_share[l].push(gs);
        }
        // gamma = 1/2 sum_z gamma_share (the half avoids double counting
        // the two zones of a cross-zonal line).
        let mut e = LinExpr::term(g, 1.0);
        for z in 0..nz {
            e.add(gamma_share[l][z], -0.5);
        }
        model.eq(&format!("gamdef_l{}", line.id), e, 0.0)?;
        gamma.push(g);
    }
    Ok(CapacityVars {
        h,
        gamma_share,
        gamma,
        chi,
    })
}

/// Handles of one embedded KKT system.
#[derive(Debug, Clone)]
pub struct KktBlock {
    pub stationarity: Vec<ConId>,
    pub complementarity: Vec<ComplHandle>,
    /// Every dual variable of the system (bounded multipliers first-class:
    /// the post-solve polish minimizes over exactly these).
    pub duals: Vec<VarId>,
}

/// Zonal reserve market variables and its KKT system.
#[derive(Debug, Clone)]
pub struct ReserveKkt {
    /// Per-zone procurement r[g][z].
    pub r_up_gz: Vec<Vec<VarId>>,
    pub r_dn_gz: Vec<Vec<VarId>>,
    /// Aggregates per generator.
    pub r_up: Vec<VarId>,
    pub r_dn: Vec<VarId>,
    /// Requirement duals per zone (the zonal reserve prices).
    pub price_up: Vec<VarId>,
    pub price_dn: Vec<VarId>,
    pub block: KktBlock,
}

/// Emits the zonal reserve market KKT system. `lambda_*` are the
/// upper-level requirement variables; eligibility couples to the
/// partition binaries linearly.
pub fn emit_zonal_reserve_kkt(
    model: &mut MilpModel,
    pvars: &PartitionVars,
    lambda_up: &[VarId],
    lambda_dn: &[VarId],
    net: &PowerNetwork,
    dual_bound: f64,
) -> Result<ReserveKkt, ZonalError> {
    let nz = pvars.zones;
    let ng = net.n_gens();
    if lambda_up.len() != nz || lambda_dn.len() != nz {
        return Err(ZonalError::Config(format!(
            "expected {nz} lambda variables per direction, got {} / {}",
            lambda_up.len(),
            lambda_dn.len()
        )));
    }
    let total_up: f64 = net.generators.iter().map(|g| g.r_up_max).sum();
    let total_dn: f64 = net.generators.iter().map(|g| g.r_dn_max).sum();

    let mut r_up_gz = vec![Vec::with_capacity(nz); ng];
    let mut r_dn_gz = vec![Vec::with_capacity(nz); ng];
    let mut r_up = Vec::with_capacity(ng);
    let mut r_dn = Vec::with_capacity(ng);
    for (g, gen) in net.generators.iter().enumerate() {
        for z in 0..nz {
            r_up_gz[g].push(model.continuous(
                &format!("rupz_g{}_z{}", gen.id, z + 1),
                0.0,
                gen.r_up_max,
            )?);
            r_dn_gz[g].push(model.continuous(
                &format!("rdnz_g{}_z{}", gen.id, z + 1),
                0.0,
                gen.r_dn_max,
            )?);
        }
        r_up.push(model.continuous(&format!("rup_g{}", gen.id), 0.0, gen.r_up_max)?);
        r_dn.push(model.continuous(&format!("rdn_g{}", gen.id), 0.0, gen.r_dn_max)?);
    }

    // Duals.
    let mut price_up = Vec::with_capacity(nz);
    let mut price_dn = Vec::with_capacity(nz);
    for z in 0..nz {
        price_up.push(model.continuous(&format!("gReqUp_z{}", z + 1), 0.0, dual_bound)?);
        price_dn.push(model.continuous(&format!("gReqDn_z{}", z + 1), 0.0, dual_bound)?);
    }
    let mut g_cap_up = vec![Vec::with_capacity(nz); ng];
    let mut g_cap_dn = vec![Vec::with_capacity(nz); ng];
    let mut g_lo_up = vec![Vec::with_capacity(nz); ng];
    let mut g_lo_dn = vec![Vec::with_capacity(nz); ng];
    let mut g_def_up = Vec::with_capacity(ng);
    let mut g_def_dn = Vec::with_capacity(ng);
    for (g, gen) in net.generators.iter().enumerate() {
        for z in 0..nz {
            g_cap_up[g].push(model.continuous(
                &format!("gCapUp_g{}_z{}", gen.id, z + 1),
                0.0,
                dual_bound,
            )?);
            g_cap_dn[g].push(model.continuous(
                &format!("gCapDn_g{}_z{}", gen.id, z + 1),
                0.0,
                dual_bound,
            )?);
            g_lo_up[g].push(model.continuous(
                &format!("gLoUp_g{}_z{}", gen.id, z + 1),
                0.0,
                dual_bound,
            )?);
            g_lo_dn[g].push(model.continuous(
                &format!("gLoDn_g{}_z{}", gen.id, z + 1),
                0.0,
                dual_bound,
            )?);
        }
        g_def_up.push(model.continuous(
            &format!("gDefUp_g{}", gen.id),
            -dual_bound,
            dual_bound,
        )?);
        g_def_dn.push(model.continuous(
            &format!("gDefDn_g{}", gen.id),
            -dual_bound,
            dual_bound,
        )?);
    }

    let mut stationarity = Vec::new();
    let mut complementarity = Vec::new();

    // Aggregation equalities r_g = sum_z r_gz.
    for (g, gen) in net.generators.iter().enumerate() {
        let mut e = LinExpr::term(r_up[g], 1.0);
        for z in 0..nz {
            e.add(r_up_gz[g][z], -1.0);
        }
        model.eq(&format!("aggUp_g{}", gen.id), e, 0.0)?;
        let mut e = LinExpr::term(r_dn[g], 1.0);
        for z in 0..nz {
            e.add(r_dn_gz[g][z], -1.0);
        }
        model.eq(&format!("aggDn_g{}", gen.id), e, 0.0)?;
    }

    // Stationarity: per (g,z) for the zonal variables, per g for the
    // aggregates (whose dual pins to the reserve offer price).
    for (g, gen) in net.generators.iter().enumerate() {
        for z in 0..nz {
            let mut e = LinExpr::term(price_up[z], -1.0);
            e.add(g_cap_up[g][z], 1.0)
                .add(g_lo_up[g][z], -1.0)
                .add(g_def_up[g], -1.0);
            stationarity.push(model.eq(&format!("stUpZ_g{}_z{}", gen.id, z + 1), e, 0.0)?);
            let mut e = LinExpr::term(price_dn[z], -1.0);
            e.add(g_cap_dn[g][z], 1.0)
                .add(g_lo_dn[g][z], -1.0)
                .add(g_def_dn[g], -1.0);
            stationarity.push(model.eq(&format!("stDnZ_g{}_z{}", gen.id, z + 1), e, 0.0)?);
        }
        let mut e = LinExpr::term(g_def_up[g], 1.0);
        stationarity.push(model.eq(&format!("stUpG_g{}", gen.id), e.add_const(gen.c_up).clone(), 0.0)?);
        let mut e = LinExpr::term(g_def_dn[g], 1.0);
        stationarity.push(model.eq(&format!("stDnG_g{}", gen.id), e.add_const(gen.c_dn).clone(), 0.0)?);
    }

    // Complementarity rows. Primal envelopes carry 2-3x headroom over the
    // data-derived slack ranges: a slack can then never rest on its
    // envelope naturally, so an active envelope in the post-solve audit
    // always means the reformulation interfered.
    for z in 0..nz {
        let mut slack = LinExpr::term(lambda_up[z], 1.0);
        for g in 0..ng {
            slack.add(r_up_gz[g][z], -1.0);
        }
        complementarity.push(linearize_complementarity(
            model,
            &format!("cReqUp_z{}", z + 1),
            slack,
            2.0 * total_up.max(1.0),
            price_up[z],
            dual_bound,
        )?);
        let mut slack = LinExpr::term(lambda_dn[z], 1.0);
        for g in 0..ng {
            slack.add(r_dn_gz[g][z], -1.0);
        }
        complementarity.push(linearize_complementarity(
            model,
            &format!("cReqDn_z{}", z + 1),
            slack,
            2.0 * total_dn.max(1.0),
            price_dn[z],
            dual_bound,
        )?);
    }
    // Eligibility caps r_gz <= R_g x[bus(g)][z] and nonnegativity.
    for (g, gen) in net.generators.iter().enumerate() {
        let node = net.bus_index(gen.bus);
        for z in 0..nz {
            let mut slack = LinExpr::term(r_up_gz[g][z], 1.0);
            slack.add(pvars.x[node][z], -gen.r_up_max);
            complementarity.push(linearize_complementarity(
                model,
                &format!("cCapUp_g{}_z{}", gen.id, z + 1),
                slack,
                2.0 * gen.r_up_max.max(1.0),
                g_cap_up[g][z],
                dual_bound,
            )?);
            let mut slack = LinExpr::term(r_dn_gz[g][z], 1.0);
            slack.add(pvars.x[node][z], -gen.r_dn_max);
            complementarity.push(linearize_complementarity(
                model,
                &format!("cCapDn_g{}_z{}", gen.id, z + 1),
                slack,
                2.0 * gen.r_dn_max.max(1.0),
                g_cap_dn[g][z],
                dual_bound,
            )?);
            let slack = LinExpr::term(r_up_gz[g][z], -1.0);
            complementarity.push(linearize_complementarity(
                model,
                &format!("cLoUp_g{}_z{}", gen.id, z + 1),
                slack,
                2.0 * gen.r_up_max.max(1.0),
                g_lo_up[g][z],
                dual_bound,
            )?);
            let slack = LinExpr::term(r_dn_gz[g][z], -1.0);
            complementarity.push(linearize_complementarity(
                model,
                &format!("cLoDn_g{}_z{}", gen.id, z + 1),
                slack,
                2.0 * gen.r_dn_max.max(1.0),
                g_lo_dn[g][z],
                dual_bound,
            )?);
        }
    }

    let mut duals: Vec<VarId> = Vec::new();
    duals.extend(price_up.iter().copied());
    duals.extend(price_dn.iter().copied());
    for g in 0..ng {
        duals.extend(g_cap_up[g].iter().copied());
        duals.extend(g_cap_dn[g].iter().copied());
        duals.extend(g_lo_up[g].iter().copied());
        duals.extend(g_lo_dn[g].iter().copied());
        duals.push(g_def_up[g]);
        duals.push(g_def_dn[g]);
    }
    Ok(ReserveKkt {
        r_up_gz,
        r_dn_gz,
        r_up,
        r_dn,
        price_up,
        price_dn,
        block: KktBlock {
            stationarity,
            complementarity,
            duals,
        },
    })
}

/// Day-ahead market variables and its KKT system.
#[derive(Debug, Clone)]
pub struct DayAheadKkt {
    pub p: Vec<VarId>,
    pub w: Vec<VarId>,
    pub block: KktBlock,
}

/// Emits the day-ahead clearing KKT. Reserve aggregates enter the dispatch
/// bounds and the capacity margins shrink the flow limits, all linearly.
pub fn emit_day_ahead_kkt(
    model: &mut MilpModel,
    net: &PowerNetwork,
    mat: &GridMatrices,
    r_up: &[VarId],
    r_dn: &[VarId],
    gamma: &[VarId],
    dual_bound: f64,
) -> Result<DayAheadKkt, ZonalError> {
    let ng = net.n_gens();
    let nj = net.n_wind();
    let nl = net.n_lines();

    let mut p = Vec::with_capacity(ng);
    for gen in &net.generators {
        p.push(model.continuous(&format!("p_g{}", gen.id), gen.p_min, gen.p_max)?);
    }
    let mut w = Vec::with_capacity(nj);
    for wf in &net.wind_farms {
        w.push(model.continuous(&format!("w_j{}", wf.id), 0.0, wf.forecast)?);
    }

    // Duals.
    let g_bal = model.continuous("gBal", -dual_bound, dual_bound)?;
    let mut g_pmin = Vec::new();
    let mut g_pmax = Vec::new();
    for gen in &net.generators {
        g_pmin.push(model.continuous(&format!("gPmin_g{}", gen.id), 0.0, dual_bound)?);
        g_pmax.push(model.continuous(&format!("gPmax_g{}", gen.id), 0.0, dual_bound)?);
    }
    let mut g_wlo = Vec::new();
    let mut g_whi = Vec::new();
    for wf in &net.wind_farms {
        g_wlo.push(model.continuous(&format!("gWlo_j{}", wf.id), 0.0, dual_bound)?);
        g_whi.push(model.continuous(&format!("gWhi_j{}", wf.id), 0.0, dual_bound)?);
    }
    let mut g_fup = Vec::new();
    let mut g_fdn = Vec::new();
    for line in &net.lines {
        g_fup.push(model.continuous(&format!("gFup_l{}", line.id), 0.0, dual_bound)?);
        g_fdn.push(model.continuous(&format!("gFdn_l{}", line.id), 0.0, dual_bound)?);
    }

    let mut stationarity = Vec::new();
    let mut complementarity = Vec::new();

    // Primal balance.
    let mut e = LinExpr::new();
    for &v in p.iter().chain(&w) {
        e.add(v, 1.0);
    }
    model.eq("daBal", e, net.total_load())?;

    // Stationarity wrt p_g and w_j with PTDF-weighted congestion terms.
    for (g, gen) in net.generators.iter().enumerate() {
        let node = net.bus_index(gen.bus);
        let mut e = LinExpr::term(g_bal, 1.0);
        e.add(g_pmin[g], -1.0).add(g_pmax[g], 1.0);
        for l in 0..nl {
            let coef = mat.ptdf[(l, node)];
            e.add(g_fup[l], coef).add(g_fdn[l], -coef);
        }
        e.add_const(gen.c);
        stationarity.push(model.eq(&format!("stP_g{}", gen.id), e, 0.0)?);
    }
    for (j, wf) in net.wind_farms.iter().enumerate() {
        let node = net.bus_index(wf.bus);
        let mut e = LinExpr::term(g_bal, 1.0);
        e.add(g_wlo[j], -1.0).add(g_whi[j], 1.0);
        for l in 0..nl {
            let coef = mat.ptdf[(l, node)];
            e.add(g_fup[l], coef).add(g_fdn[l], -coef);
        }
        stationarity.push(model.eq(&format!("stW_j{}", wf.id), e, 0.0)?);
    }

    // Complementarity: dispatch bounds shifted by reserves.
    for (g, gen) in net.generators.iter().enumerate() {
        let span = gen.p_max - gen.p_min;
        let mut slack = LinExpr::term(p[g], -1.0);
        slack.add(r_dn[g], 1.0).add_const(gen.p_min);
        complementarity.push(linearize_complementarity(
            model,
            &format!("cPmin_g{}", gen.id),
            slack,
            2.0 * span.max(1.0),
            g_pmin[g],
            dual_bound,
        )?);
        let mut slack = LinExpr::term(p[g], 1.0);
        slack.add(r_up[g], 1.0).add_const(-gen.p_max);
        complementarity.push(linearize_complementarity(
            model,
            &format!("cPmax_g{}", gen.id),
            slack,
            2.0 * span.max(1.0),
            g_pmax[g],
            dual_bound,
        )?);
    }
    for (j, wf) in net.wind_farms.iter().enumerate() {
        let slack = LinExpr::term(w[j], -1.0);
        complementarity.push(linearize_complementarity(
            model,
            &format!("cWlo_j{}", wf.id),
            slack,
            2.0 * wf.forecast.max(1.0),
            g_wlo[j],
            dual_bound,
        )?);
        let mut slack = LinExpr::term(w[j], 1.0);
        slack.add_const(-wf.forecast);
        complementarity.push(linearize_complementarity(
            model,
            &format!("cWhi_j{}", wf.id),
            slack,
            2.0 * wf.forecast.max(1.0),
            g_whi[j],
            dual_bound,
        )?);
    }
    // Flow limits at F - Gamma.
    for (l, line) in net.lines.iter().enumerate() {
        let mut flow = LinExpr::new();
        let mut base = 0.0;
        for (g, gen) in net.generators.iter().enumerate() {
            flow.add(p[g], mat.ptdf[(l, net.bus_index(gen.bus))]);
        }
        for (j, wf) in net.wind_farms.iter().enumerate() {
            flow.add(w[j], mat.ptdf[(l, net.bus_index(wf.bus))]);
        }
        for (b, bus) in net.buses.iter().enumerate() {
            base -= mat.ptdf[(l, b)] * bus.load;
        }
        // flow + base - F + gamma <= 0
        let mut slack = flow.clone();
        slack.add(gamma[l], 1.0).add_const(base - line.rating);
        complementarity.push(linearize_complementarity(
            model,
            &format!("cFup_l{}", line.id),
            slack,
            3.0 * line.rating,
            g_fup[l],
            dual_bound,
        )?);
        // -flow - base - F + gamma <= 0
        let mut slack = LinExpr::new();
        for &(v, c) in flow.terms() {
            slack.add(v, -c);
        }
        slack.add(gamma[l], 1.0).add_const(-base - line.rating);
        complementarity.push(linearize_complementarity(
            model,
            &format!("cFdn_l{}", line.id),
            slack,
            3.0 * line.rating,
            g_fdn[l],
            dual_bound,
        )?);
    }

    let mut duals: Vec<VarId> = vec![g_bal];
    duals.extend(g_pmin.iter().copied());
    duals.extend(g_pmax.iter().copied());
    duals.extend(g_wlo.iter().copied());
    duals.extend(g_whi.iter().copied());
    duals.extend(g_fup.iter().copied());
    duals.extend(g_fdn.iter().copied());
    Ok(DayAheadKkt {
        p,
        w,
        block: KktBlock {
            stationarity,
            complementarity,
            duals,
        },
    })
}

/// Everything upstream of the balancing stage: partitioning, capacity
/// allocation, requirement variables, and both embedded KKT systems, with
/// the reserve and day-ahead costs already on the objective. Shared
/// between the extensive MILP and the Benders master.
pub struct FirstStage {
    pub partition: PartitionVars,
    pub capacity: CapacityVars,
    pub lambda_up: Vec<VarId>,
    pub lambda_dn: Vec<VarId>,
    pub reserve: ReserveKkt,
    pub day_ahead: DayAheadKkt,
}

impl FirstStage {
    pub fn all_complementarities(&self) -> Vec<ComplHandle> {
        let mut v = self.reserve.block.complementarity.clone();
        v.extend(self.day_ahead.block.complementarity.clone());
        v
    }
}

pub(crate) fn emit_first_stage(
    model: &mut MilpModel,
    net: &PowerNetwork,
    mat: &GridMatrices,
    cfg: &ZonalConfig,
) -> Result<FirstStage, ZonalError> {
    let dual_bound = cfg.dual_bound(net);
    let pvars = emit_partition_block(model, net, &cfg.partition_config())?;
    let capacity = emit_capacity_block(model, &pvars, net, cfg.chi)?;

    let total_up: f64 = net.generators.iter().map(|g| g.r_up_max).sum();
    let total_dn: f64 = net.generators.iter().map(|g| g.r_dn_max).sum();
    let mut lambda_up = Vec::with_capacity(cfg.zones);
    let mut lambda_dn = Vec::with_capacity(cfg.zones);
    for z in 0..cfg.zones {
        lambda_up.push(model.continuous(&format!("lamUp_z{}", z + 1), 0.0, total_up)?);
        lambda_dn.push(model.continuous(&format!("lamDn_z{}", z + 1), 0.0, total_dn)?);
    }

    let reserve = emit_zonal_reserve_kkt(model, &pvars, &lambda_up, &lambda_dn, net, dual_bound)?;
    let day_ahead = emit_day_ahead_kkt(
        model,
        net,
        mat,
        &reserve.r_up,
        &reserve.r_dn,
        &capacity.gamma,
        dual_bound,
    )?;
    for (g, gen) in net.generators.iter().enumerate() {
        model.obj_coef(reserve.r_up[g], gen.c_up);
        model.obj_coef(reserve.r_dn[g], gen.c_dn);
        model.obj_coef(day_ahead.p[g], gen.c);
    }
    Ok(FirstStage {
        partition: pvars,
        capacity,
        lambda_up,
        lambda_dn,
        reserve,
        day_ahead,
    })
}

/// Assembled zonal MILP with every handle needed for extraction.
pub struct Mpec {
    pub model: MilpModel,
    pub partition: PartitionVars,
    pub capacity: CapacityVars,
    pub lambda_up: Vec<VarId>,
    pub lambda_dn: Vec<VarId>,
    pub reserve: ReserveKkt,
    pub day_ahead: DayAheadKkt,
    pub recourse: Vec<RecourseVars>,
    pub config: ZonalConfig,
}

impl Mpec {
    pub fn all_complementarities(&self) -> Vec<ComplHandle> {
        let mut v = self.reserve.block.complementarity.clone();
        v.extend(self.day_ahead.block.complementarity.clone());
        v
    }

    /// (variables, constraints, discrete variables).
    pub fn statistics(&self) -> (usize, usize, usize) {
        (
            self.model.num_vars(),
            self.model.num_cons(),
            self.model.num_discrete(),
        )
    }
}

/// Builds the full zonal MILP: objective, both KKT systems, balancing
/// blocks per scenario, partitioning, and capacity allocation.
pub fn assemble_mpec(
    net: &PowerNetwork,
    mat: &GridMatrices,
    scenarios: &ScenarioSet,
    cfg: &ZonalConfig,
) -> Result<Mpec, ZonalError> {
    scenarios.validate().map_err(MarketError::from)?;
    let mut model = MilpModel::new(&format!("zonal_z{}_chi{}", cfg.zones, cfg.chi));
    let fs = emit_first_stage(&mut model, net, mat, cfg)?;
    let mut recourse = Vec::with_capacity(scenarios.n_scenarios());
    for s in 0..scenarios.n_scenarios() {
        recourse.push(emit_recourse_block(
            &mut model,
            net,
            mat,
            &scenarios.values[s],
            s,
            scenarios.probabilities[s],
            &fs.reserve.r_up,
            &fs.reserve.r_dn,
            &fs.day_ahead.p,
            &fs.day_ahead.w,
        )?);
    }
    Ok(Mpec {
        model,
        partition: fs.partition,
        capacity: fs.capacity,
        lambda_up: fs.lambda_up,
        lambda_dn: fs.lambda_dn,
        reserve: fs.reserve,
        day_ahead: fs.day_ahead,
        recourse,
        config: cfg.clone(),
    })
}

/// Zonal clearing result with certification evidence.
#[derive(Debug, Clone, Serialize)]
pub struct ZonalOutcome {
    pub status: String,
    pub gap: f64,
    pub nodes: u64,
    pub partition: Partition,
    pub lambda_up: Vec<f64>,
    pub lambda_dn: Vec<f64>,
    pub reserves: ReserveSchedule,
    /// Per-zone split r[g][z].
    pub reserve_split_up: Vec<Vec<f64>>,
    pub reserve_split_dn: Vec<Vec<f64>>,
    /// Zonal reserve prices (requirement duals recovered from the KKT).
    pub zone_price_up: Vec<f64>,
    pub zone_price_dn: Vec<f64>,
    pub day_ahead: DayAheadSchedule,
    pub balancing: Vec<BalancingOutcome>,
    pub gamma: Vec<f64>,
    pub breakdown: CostBreakdown,
    pub bigm_clean: bool,
    /// Lower-level re-solve evidence: (embedded, re-solved) objectives.
    pub cert_reserve: (f64, f64),
    pub cert_day_ahead: (f64, f64),
}

/// Per-zone reserve volume/cost rows (up MW, down MW, total MW, avg $/MW).
#[derive(Debug, Clone, Serialize)]
pub struct ZoneRow {
    pub zone: usize,
    pub up_mw: f64,
    pub dn_mw: f64,
    pub total_mw: f64,
    pub avg_cost: f64,
}

impl ZonalOutcome {
    pub fn zone_table(&self, net: &PowerNetwork) -> Vec<ZoneRow> {
        let nz = self.partition.zones();
        let mut rows = Vec::with_capacity(nz);
        for z in 0..nz {
            let mut up = 0.0;
            let mut dn = 0.0;
            let mut cost = 0.0;
            for (g, gen) in net.generators.iter().enumerate() {
                up += self.reserve_split_up[g][z];
                dn += self.reserve_split_dn[g][z];
                cost += gen.c_up * self.reserve_split_up[g][z]
                    + gen.c_dn * self.reserve_split_dn[g][z];
            }
            let total = up + dn;
            rows.push(ZoneRow {
                zone: z + 1,
                up_mw: up,
                dn_mw: dn,
                total_mw: total,
                avg_cost: if total > 1e-9 { cost / total } else { 0.0 },
            });
        }
        rows
    }
}

/// The zonal reserve clearing LP at a fixed partition and requirements;
/// the certification oracle for the embedded KKT system.
fn zonal_reserve_lp(
    net: &PowerNetwork,
    partition: &Partition,
    lambda_up: &[f64],
    lambda_dn: &[f64],
    params: &SolverParams,
) -> Result<f64, ZonalError> {
    let nz = partition.zones();
    let mut m = MilpModel::new("zonal_reserve_cert");
    let mut up = vec![Vec::new(); nz];
    let mut dn = vec![Vec::new(); nz];
    for gen in &net.generators {
        let z = partition.zone_of[net.bus_index(gen.bus)];
        let u = m.continuous(&format!("ru_g{}", gen.id), 0.0, gen.r_up_max)?;
        let d = m.continuous(&format!("rd_g{}", gen.id), 0.0, gen.r_dn_max)?;
        m.obj_coef(u, gen.c_up);
        m.obj_coef(d, gen.c_dn);
        up[z].push(u);
        dn[z].push(d);
    }
    for z in 0..nz {
        let mut e = LinExpr::new();
        for &v in &up[z] {
            e.add(v, 1.0);
        }
        m.ge(&format!("requp_z{z}"), e, lambda_up[z])?;
        let mut e = LinExpr::new();
        for &v in &dn[z] {
            e.add(v, 1.0);
        }
        m.ge(&format!("reqdn_z{z}"), e, lambda_dn[z])?;
    }
    let sol = solve_lp_relaxation(&m, params)?;
    if sol.status != SolveStatus::Optimal {
        return Err(ZonalError::Certification(format!(
            "zonal reserve certification LP is {}",
            sol.status
        )));
    }
    Ok(sol.objective)
}

/// Re-selects the minimal-magnitude dual certificate at a frozen primal
/// point: every non-dual variable is pinned to its incumbent value and the
/// nonnegative multipliers are minimized. Leaves the solution untouched if
/// the polish LP fails.
fn polish_duals(
    model: &MilpModel,
    sol: &mut crate::milp::Solution,
    dual_ids: &[VarId],
    params: &SolverParams,
) {
    let mut m = model.clone();
    let is_dual: std::collections::HashSet<usize> =
        dual_ids.iter().map(|v| v.index()).collect();
    for j in 0..m.num_vars() {
        let id = VarId(j);
        if is_dual.contains(&j) {
            m.obj_coef(id, if m.var(id).lb >= 0.0 { 1.0 } else { 0.0 });
        } else {
            let v = sol.values[j];
            m.set_bounds(id, v, v);
        }
    }
    // Wipe the original objective on dual columns only matters for scale;
    // simplest is a fresh objective: zero everything non-dual.
    for j in 0..m.num_vars() {
        let id = VarId(j);
        if !is_dual.contains(&j) {
            let coef = m.objective()[j];
            if coef != 0.0 {
                m.obj_coef(id, -coef);
            }
        }
    }
    if let Ok(polished) = solve_lp_relaxation(&m, params) {
        if polished.status == SolveStatus::Optimal {
            for &v in dual_ids {
                sol.values[v.index()] = polished.values[v.index()];
            }
        }
    }
}

/// Certified first-stage extraction shared by the extensive solve and the
/// Benders master: partition verification, big-M audit, and lower-level
/// re-solve certificates.
pub(crate) struct CertifiedFirstStage {
    pub partition: Partition,
    pub lambda_up: Vec<f64>,
    pub lambda_dn: Vec<f64>,
    pub reserves: ReserveSchedule,
    pub reserve_split_up: Vec<Vec<f64>>,
    pub reserve_split_dn: Vec<Vec<f64>>,
    pub zone_price_up: Vec<f64>,
    pub zone_price_dn: Vec<f64>,
    pub day_ahead: DayAheadSchedule,
    pub gamma: Vec<f64>,
    pub cert_reserve: (f64, f64),
    pub cert_day_ahead: (f64, f64),
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn certify_first_stage(
    net: &PowerNetwork,
    mat: &GridMatrices,
    model: &MilpModel,
    pvars: &PartitionVars,
    capacity: &CapacityVars,
    lambda_up_vars: &[VarId],
    lambda_dn_vars: &[VarId],
    reserve: &ReserveKkt,
    day_ahead_kkt: &DayAheadKkt,
    compl: &[ComplHandle],
    sol: &crate::milp::Solution,
    params: &SolverParams,
) -> Result<CertifiedFirstStage, ZonalError> {
    let partition = extract_partition(net, model, sol, pvars)?;
    let violations = verify_partition(net, &partition);
    if !violations.is_empty() {
        return Err(ZonalError::Certification(format!(
            "partition verification failed: {violations:?}"
        )));
    }

    let ng = net.n_gens();
    let nz = pvars.zones;
    let lambda_up: Vec<f64> = lambda_up_vars.iter().map(|&v| sol.value(v)).collect();
    let lambda_dn: Vec<f64> = lambda_dn_vars.iter().map(|&v| sol.value(v)).collect();
    // Solver values carry tolerance-level noise; schedules are physical
    // quantities, so clamp at zero.
    let r_up: Vec<f64> = reserve.r_up.iter().map(|&v| sol.value(v).max(0.0)).collect();
    let r_dn: Vec<f64> = reserve.r_dn.iter().map(|&v| sol.value(v).max(0.0)).collect();
    let mut reserve_split_up = vec![vec![0.0; nz]; ng];
    let mut reserve_split_dn = vec![vec![0.0; nz]; ng];
    for g in 0..ng {
        for z in 0..nz {
            reserve_split_up[g][z] = sol.value(reserve.r_up_gz[g][z]).max(0.0);
            reserve_split_dn[g][z] = sol.value(reserve.r_dn_gz[g][z]).max(0.0);
        }
    }
    let reserve_cost: f64 = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| gen.c_up * r_up[g] + gen.c_dn * r_dn[g])
        .sum();

    let p: Vec<f64> = day_ahead_kkt.p.iter().map(|&v| sol.value(v)).collect();
    let w: Vec<f64> = day_ahead_kkt.w.iter().map(|&v| sol.value(v)).collect();
    let da_cost: f64 = net
        .generators
        .iter()
        .zip(&p)
        .map(|(gen, &pv)| gen.c * pv)
        .sum();
    let gamma: Vec<f64> = capacity.gamma.iter().map(|&v| sol.value(v)).collect();

    let mut inj = vec![0.0; net.n_buses()];
    for (g, gen) in net.generators.iter().enumerate() {
        inj[net.bus_index(gen.bus)] += p[g];
    }
    for (j, wf) in net.wind_farms.iter().enumerate() {
        inj[net.bus_index(wf.bus)] += w[j];
    }
    for (b, bus) in net.buses.iter().enumerate() {
        inj[b] -= bus.load;
    }
    let day_ahead = DayAheadSchedule {
        flows: mat.flows(&inj),
        p,
        w,
        cost: da_cost,
    };

    // Dual polish: the MILP may park multipliers anywhere in the band the
    // fixed binaries allow, including on the artificial cap. Re-selecting
    // the minimal dual certificate at a frozen primal point removes that
    // arbitrariness; a cap still touched afterwards is a real finding.
    let mut sol = sol.clone();
    let mut dual_ids: Vec<VarId> = reserve.block.duals.clone();
    dual_ids.extend(day_ahead_kkt.block.duals.iter().copied());
    polish_duals(model, &mut sol, &dual_ids, params);
    let sol = &sol;

    // Certification 1: big-M audit over every complementarity handle.
    let audit: BigMAudit = audit_bigm(model, sol, compl);
    if !audit.is_clean() {
        let flagged: Vec<&str> = audit.flagged().map(|f| f.handle.as_str()).collect();
        return Err(ZonalError::Certification(format!(
            "binding big-M bounds on {flagged:?}"
        )));
    }

    // Certification 2: lower-level optimality by direct re-solves.
    let cert_r = zonal_reserve_lp(net, &partition, &lambda_up, &lambda_dn, params)?;
    let rel = (reserve_cost - cert_r).abs() / cert_r.abs().max(1.0);
    if rel > 1e-5 {
        return Err(ZonalError::Certification(format!(
            "zonal reserve KKT point costs {reserve_cost}, LP optimum {cert_r}"
        )));
    }
    let reserves = ReserveSchedule {
        r_up,
        r_dn,
        cost: reserve_cost,
        price_up: 0.0,
        price_dn: 0.0,
    };
    let wind_point: Vec<f64> = net.wind_farms.iter().map(|wf| wf.forecast).collect();
    let cert_da = markets::solve_day_ahead(net, mat, &reserves, &gamma, &wind_point, params)?;
    let rel = (da_cost - cert_da.cost).abs() / cert_da.cost.abs().max(1.0);
    if rel > 1e-5 {
        return Err(ZonalError::Certification(format!(
            "day-ahead KKT point costs {da_cost}, LP optimum {}",
            cert_da.cost
        )));
    }

    Ok(CertifiedFirstStage {
        partition,
        lambda_up,
        lambda_dn,
        zone_price_up: reserve.price_up.iter().map(|&v| sol.value(v)).collect(),
        zone_price_dn: reserve.price_dn.iter().map(|&v| sol.value(v)).collect(),
        reserves,
        reserve_split_up,
        reserve_split_dn,
        day_ahead,
        gamma,
        cert_reserve: (reserve_cost, cert_r),
        cert_day_ahead: (da_cost, cert_da.cost),
    })
}

/// Extracts, verifies, and certifies a zonal solution.
fn extract_outcome(
    net: &PowerNetwork,
    mat: &GridMatrices,
    scenarios: &ScenarioSet,
    mpec: &Mpec,
    sol: &crate::milp::Solution,
    params: &SolverParams,
) -> Result<ZonalOutcome, ZonalError> {
    let fs = certify_first_stage(
        net,
        mat,
        &mpec.model,
        &mpec.partition,
        &mpec.capacity,
        &mpec.lambda_up,
        &mpec.lambda_dn,
        &mpec.reserve,
        &mpec.day_ahead,
        &mpec.all_complementarities(),
        sol,
        params,
    )?;
    let mut balancing = Vec::with_capacity(scenarios.n_scenarios());
    let mut expected = 0.0;
    for (s, blk) in mpec.recourse.iter().enumerate() {
        let out = recourse_outcome(
            net,
            mat,
            &sol.values,
            blk,
            &fs.day_ahead.p,
            &fs.day_ahead.w,
            &scenarios.values[s],
        );
        expected += scenarios.probabilities[s] * out.cost;
        balancing.push(out);
    }
    let breakdown = CostBreakdown::new(fs.reserves.cost, fs.day_ahead.cost, expected);
    Ok(ZonalOutcome {
        status: sol.status.to_string(),
        gap: sol.gap,
        nodes: sol.nodes,
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
    })
}

/// A valid partition to seed from: enumeration on small nets, BFS zone
/// growth on larger ones.
fn seed_partition(net: &PowerNetwork, cfg: &ZonalConfig) -> Option<Partition> {
    let pcfg = cfg.partition_config();
    if net.n_buses() <= 12 {
        return enumerate_partitions(net, &pcfg).ok()?.into_iter().next();
    }
    let n = net.n_buses();
    let nz = cfg.zones;
    let y_min = cfg.y_min.max(1) as usize;
    let adj = net.adjacency();
    // Grow zones by BFS from successive unassigned nodes, targeting equal
    // sizes; retry from different start offsets until verification passes.
    for offset in 0..n {
        let mut zone_of = vec![usize::MAX; n];
        let target = n.div_ceil(nz);
        let mut assigned = 0;
        for z in 0..nz {
            let start = (0..n)
                .map(|i| (i + offset) % n)
                .find(|&i| zone_of[i] == usize::MAX);
            let Some(start) = start else { break };
            let mut queue = std::collections::VecDeque::from([start]);
            zone_of[start] = z;
            assigned += 1;
            let mut size = 1;
            let cap = if z + 1 == nz { n } else { target };
            while let Some(u) = queue.pop_front() {
                if size >= cap {
                    break;
                }
                for &v in &adj[u] {
                    if zone_of[v] == usize::MAX && size < cap {
                        zone_of[v] = z;
                        size += 1;
                        assigned += 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        if assigned < n {
            // Attach leftovers to any adjacent zone.
            let mut progress = true;
            while progress {
                progress = false;
                for i in 0..n {
                    if zone_of[i] == usize::MAX {
                        if let Some(&nb) = adj[i].iter().find(|&&v| zone_of[v] != usize::MAX) {
                            zone_of[i] = zone_of[nb];
                            progress = true;
                        }
                    }
                }
            }
        }
        if zone_of.iter().any(|&z| z == usize::MAX) {
            continue;
        }
        let p = crate::partition::partition_from_assignment(
            net,
            zone_of,
            nz,
            y_min as u32,
            net.n_buses() as u32,
        );
        if verify_partition(net, &p).is_empty() {
            return Some(p.canonical());
        }
    }
    None
}

/// Per-zone merit-order procurement against the given requirements (the
/// closed-form optimum of the zonal reserve clearing LP).
fn zone_merit_fill(
    net: &PowerNetwork,
    partition: &Partition,
    lam_up: &[f64],
    lam_dn: &[f64],
) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let ng = net.n_gens();
    let nz = partition.zones();
    let mut up = vec![vec![0.0; nz]; ng];
    let mut dn = vec![vec![0.0; nz]; ng];
    for z in 0..nz {
        let members: Vec<usize> = (0..ng)
            .filter(|&g| partition.zone_of[net.bus_index(net.generators[g].bus)] == z)
            .collect();
        let mut by_up = members.clone();
        by_up.sort_by(|&a, &b| {
            net.generators[a]
                .c_up
                .partial_cmp(&net.generators[b].c_up)
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut need = lam_up[z];
        for &g in &by_up {
            let take = need.min(net.generators[g].r_up_max);
            up[g][z] = take;
            need -= take;
        }
        if need > 1e-9 {
            return None; // zone cannot meet the requirement
        }
        let mut by_dn = members;
        by_dn.sort_by(|&a, &b| {
            net.generators[a]
                .c_dn
                .partial_cmp(&net.generators[b].c_dn)
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut need = lam_dn[z];
        for &g in &by_dn {
            let take = need.min(net.generators[g].r_dn_max);
            dn[g][z] = take;
            need -= take;
        }
        if need > 1e-9 {
            return None;
        }
    }
    Some((up, dn))
}

/// Builds a feasible MILP point from a requirement vector pinned to a
/// partition: the zonal reserve clearing is filled by merit order, the
/// day-ahead LP is re-solved against those reserves, complementarity
/// binaries come from the resulting active sets, and the binary-fixed
/// model is re-solved as an LP to fill in consistent duals and recourse.
fn build_seed(
    net: &PowerNetwork,
    mat: &GridMatrices,
    mpec: &Mpec,
    partition: &Partition,
    lam_up: &[f64],
    lam_dn: &[f64],
    params: &SolverParams,
) -> Option<Vec<f64>> {
    let nz = mpec.config.zones;
    let ng = net.n_gens();

    let (r_up_gz, r_dn_gz) = zone_merit_fill(net, partition, lam_up, lam_dn)?;
    let r_up: Vec<f64> = (0..ng).map(|g| r_up_gz[g].iter().sum()).collect();
    let r_dn: Vec<f64> = (0..ng).map(|g| r_dn_gz[g].iter().sum()).collect();
    let reserves = ReserveSchedule {
        cost: net
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| gen.c_up * r_up[g] + gen.c_dn * r_dn[g])
            .sum(),
        r_up,
        r_dn,
        price_up: 0.0,
        price_dn: 0.0,
    };
    // Day-ahead consistent with these reserves, no capacity withdrawn.
    let gamma0 = vec![0.0; net.n_lines()];
    let wind_point: Vec<f64> = net.wind_farms.iter().map(|w| w.forecast).collect();
    let da = markets::solve_day_ahead(net, mat, &reserves, &gamma0, &wind_point, params).ok()?;

    // Candidate primal point for slack evaluation.
    let mut values = vec![0.0; mpec.model.num_vars()];
    for (node, &z) in partition.zone_of.iter().enumerate() {
        for zz in 0..nz {
            values[mpec.partition.x[node][zz].index()] = if zz == z { 1.0 } else { 0.0 };
        }
    }
    for z in 0..nz {
        values[mpec.lambda_up[z].index()] = lam_up[z];
        values[mpec.lambda_dn[z].index()] = lam_dn[z];
    }
    for g in 0..ng {
        for z in 0..nz {
            values[mpec.reserve.r_up_gz[g][z].index()] = r_up_gz[g][z];
            values[mpec.reserve.r_dn_gz[g][z].index()] = r_dn_gz[g][z];
        }
        values[mpec.reserve.r_up[g].index()] = reserves.r_up[g];
        values[mpec.reserve.r_dn[g].index()] = reserves.r_dn[g];
    }
    for (g, &v) in mpec.day_ahead.p.iter().enumerate() {
        values[v.index()] = da.p[g];
    }
    for (j, &v) in mpec.day_ahead.w.iter().enumerate() {
        values[v.index()] = da.w[j];
    }
    // gamma stays zero in the seed.

    let mut m = mpec.model.clone();
    for (node, &z) in partition.zone_of.iter().enumerate() {
        for zz in 0..nz {
            let val = if zz == z { 1.0 } else { 0.0 };
            m.set_bounds(mpec.partition.x[node][zz], val, val);
        }
    }
    for (z, &root) in partition.roots.iter().enumerate() {
        for node in 0..net.n_buses() {
            let val = if node as u32 + 1 == root { 1.0 } else { 0.0 };
            m.set_bounds(mpec.partition.c[node][z], val, val);
        }
    }
    for z in 0..nz {
        m.set_bounds(mpec.lambda_up[z], lam_up[z], lam_up[z]);
        m.set_bounds(mpec.lambda_dn[z], lam_dn[z], lam_dn[z]);
    }
    for (l, line) in net.lines.iter().enumerate() {
        let zf = partition.zone_of[net.bus_index(line.from)];
        let zt = partition.zone_of[net.bus_index(line.to)];
        for z in 0..nz {
            let val = ((zf == z) as i32 + (zt == z) as i32) as f64;
            m.set_bounds(mpec.capacity.h[l][z], val, val);
        }
        m.set_bounds(mpec.capacity.gamma[l], 0.0, 0.0);
    }
    // Complementarity binaries from the candidate's active sets.
    for h in &mpec.all_complementarities() {
        let slack = h.slack.eval(&values);
        let b = if slack.abs() <= 1e-7 { 1.0 } else { 0.0 };
        m.set_bounds(h.bin, b, b);
    }

    let sol = solve_lp_relaxation(&m, params).ok()?;
    if sol.status != SolveStatus::Optimal {
        return None;
    }
    // The point must be feasible for the unfixed MILP as well.
    if mpec.model.max_violation(&sol.values) > 10.0 * params.tol_feas {
        return None;
    }
    Some(sol.values)
}

/// Solves the assembled MILP, extracts the outcome, and certifies it.
pub fn solve_extensive(
    net: &PowerNetwork,
    mat: &GridMatrices,
    scenarios: &ScenarioSet,
    cfg: &ZonalConfig,
    params: &SolverParams,
) -> Result<ZonalOutcome, ZonalError> {
    let mpec = assemble_mpec(net, mat, scenarios, cfg)?;

    // Incumbent seeds: the sequential design's procurement, restated as
    // zonal requirements, at several risk levels (plus the trivial zero).
    let mut seed: Option<Vec<f64>> = None;
    if cfg.seed_incumbent {
        if let Some(partition) = seed_partition(net, cfg) {
            let mut best = f64::INFINITY;
            let mut candidates: Vec<(Vec<f64>, Vec<f64>)> =
                vec![(vec![0.0; cfg.zones], vec![0.0; cfg.zones])];
            for q in [0.01, 0.03, 0.05, 0.10] {
                let Ok(seq) = markets::run_sequential(net, mat, scenarios, q, params) else {
                    continue;
                };
                let mut lam_up = vec![0.0; cfg.zones];
                let mut lam_dn = vec![0.0; cfg.zones];
                for (g, gen) in net.generators.iter().enumerate() {
                    let z = partition.zone_of[net.bus_index(gen.bus)];
                    lam_up[z] += seq.reserves.r_up[g];
                    lam_dn[z] += seq.reserves.r_dn[g];
                }
                candidates.push((lam_up, lam_dn));
            }
            for (lam_up, lam_dn) in candidates {
                if let Some(v) = build_seed(net, mat, &mpec, &partition, &lam_up, &lam_dn, params)
                {
                    let obj = mpec.model.eval_objective(&v);
                    if obj < best {
                        best = obj;
                        seed = Some(v);
                    }
                }
            }
        }
    }

    let sol = solve_milp(&mpec.model, params, seed.as_deref())?;
    match sol.status {
        SolveStatus::Infeasible => {
            return Err(ZonalError::Infeasible(
                "no feasible zonal clearing (check sizing and requirements)".into(),
            ))
        }
        SolveStatus::Unbounded => {
            return Err(ZonalError::Solve("zonal MILP unbounded".into()));
        }
        SolveStatus::IterationLimit if sol.values.is_empty() => {
            return Err(ZonalError::Solve(
                "node limit reached without any incumbent".into(),
            ));
        }
        _ => {}
    }
    extract_outcome(net, mat, scenarios, &mpec, &sol, params)
}

/// One row of the stability table: a design's first stage re-evaluated on
/// out-of-sample scenario sets, normalized by the stochastic optimum on
/// each set.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub model: String,
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// First-stage decisions under stability evaluation.
#[derive(Debug, Clone)]
pub struct FixedFirstStage {
    pub label: String,
    pub reserves: ReserveSchedule,
    pub gamma: Vec<f64>,
}

/// Re-solves day-ahead and balancing for each fixed first stage on every
/// scenario set; reports total cost divided by the stochastic optimum on
/// the same set. The stochastic benchmark row is the identity.
pub fn run_stability(
    net: &PowerNetwork,
    mat: &GridMatrices,
    fixed: &[FixedFirstStage],
    omegas: &[ScenarioSet],
    params: &SolverParams,
) -> Result<Vec<StabilityRow>, ZonalError> {
    let mut stochastic_totals = Vec::with_capacity(omegas.len());
    for omega in omegas {
        let st = markets::solve_stochastic(net, mat, omega, params)?;
        stochastic_totals.push(st.breakdown.total);
    }
    let wind_point: Vec<f64> = net.wind_farms.iter().map(|w| w.forecast).collect();

    let mut rows = Vec::new();
    let mut stoch_row = StabilityRow {
        model: "stochastic".into(),
        ratios: vec![1.0; omegas.len()],
        mean: 1.0,
        min: 1.0,
        max: 1.0,
    };
    // Keep the identity honest: numerator and denominator are the same
    // solve, so the ratio is exactly one.
    for (i, &t) in stochastic_totals.iter().enumerate() {
        stoch_row.ratios[i] = t / t;
    }
    rows.push(stoch_row);

    for fs in fixed {
        let day_ahead = markets::solve_day_ahead(net, mat, &fs.reserves, &fs.gamma, &wind_point, params)?;
        let mut ratios = Vec::with_capacity(omegas.len());
        for (i, omega) in omegas.iter().enumerate() {
            let mut expected = 0.0;
            for s in 0..omega.n_scenarios() {
                let b = markets::solve_balancing(
                    net,
                    mat,
                    &day_ahead,
                    &fs.reserves,
                    &omega.values[s],
                    params,
                )?;
                expected += omega.probabilities[s] * b.cost;
            }
            let total = fs.reserves.cost + day_ahead.cost + expected;
            ratios.push(total / stochastic_totals[i]);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        rows.push(StabilityRow {
            model: fs.label.clone(),
            ratios,
            mean,
            min,
            max,
        });
    }
    Ok(rows)
}
