//! Command implementations: scenario pipeline, model solves with report
//! generation, the stability harness, MPS export, and case validation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde_json::json;

use rezone_core::benders::{run_benders, trace_to_csv, BendersConfig};
use rezone_core::markets::{run_sequential, solve_stochastic, CostBreakdown, MarketOutcome};
use rezone_core::milp::{mps, SolverParams};
use rezone_core::net::{build_matrices, load_case, verify_network, GridMatrices, PowerNetwork};
use rezone_core::scen::{
    fast_forward_reduce, parse_scenario_file, sample_scenarios, spearman, write_scenario_file,
    ProbabilisticForecast, ScenarioSet,
};
use rezone_core::zonal::{
    assemble_mpec, solve_extensive, run_stability, FixedFirstStage, StabilityRow, ZonalConfig,
    ZonalOutcome,
};

use crate::config::{ModelKind, RunConfig};

/// Marker error for limit-terminated solves (exit code 3).
#[derive(Debug)]
pub struct LimitReached(pub String);

impl std::fmt::Display for LimitReached {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver limit reached: {}", self.0)
    }
}

impl std::error::Error for LimitReached {}

/// Atomic file write: temp file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn solver_params(cfg: &RunConfig) -> SolverParams {
    let mut p = SolverParams::default();
    if let Some(g) = cfg.solver.gap {
        p.gap = g;
    }
    if let Some(n) = cfg.solver.node_limit {
        p.node_limit = n;
    }
    if let Some(t) = cfg.solver.tol_feas {
        p.tol_feas = t;
    }
    if let Some(m) = cfg.solver.big_m_dual {
        p.big_m_dual = m;
    }
    p
}

fn zonal_config(cfg: &RunConfig, net: &PowerNetwork) -> ZonalConfig {
    let mut z = ZonalConfig::new(cfg.zones, cfg.chi, cfg.effective_y_min(net.n_buses()));
    z.dual_bound = cfg.solver.big_m_dual;
    z
}

fn load_network(cfg: &RunConfig) -> anyhow::Result<(PowerNetwork, GridMatrices)> {
    let net = load_case(&cfg.case)
        .with_context(|| format!("loading case {}", cfg.case.display()))?;
    let mat = build_matrices(&net)?;
    Ok((net, mat))
}

fn forecast(cfg: &RunConfig, net: &PowerNetwork) -> anyhow::Result<ProbabilisticForecast> {
    let [c0, c1, c2] = cfg.forecast.variance_coeffs;
    Ok(ProbabilisticForecast::from_network(
        net,
        (c0, c1, c2),
        cfg.forecast.corr_tau,
    )?)
}

fn build_scenarios(cfg: &RunConfig, net: &PowerNetwork, seed: u64) -> anyhow::Result<ScenarioSet> {
    let set = match cfg.scenarios.source.as_str() {
        "generate" => {
            let fc = forecast(cfg, net)?;
            let raw = sample_scenarios(&fc, cfg.scenarios.count, seed)?;
            match cfg.scenarios.reduce_to {
                Some(target) => fast_forward_reduce(&raw, target)?,
                None => raw,
            }
        }
        "file" => {
            let path = cfg.scenarios.file.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scenario file {}", path.display()))?;
            parse_scenario_file(&text)?
        }
        _ => unreachable!("validated"),
    };
    // Realizations must respect the fleet in the case file.
    let ids: Vec<u32> = net.wind_farms.iter().map(|w| w.id).collect();
    if set.farm_ids != ids {
        bail!(
            "scenario farms {:?} do not match the case wind fleet {:?}",
            set.farm_ids,
            ids
        );
    }
    for s in 0..set.n_scenarios() {
        for (j, wf) in net.wind_farms.iter().enumerate() {
            let v = set.values[s][j];
            if !(0.0..=wf.capacity + 1e-9).contains(&v) {
                bail!(
                    "scenario {} holds {v} MW for farm {} (capacity {})",
                    s + 1,
                    wf.id,
                    wf.capacity
                );
            }
        }
    }
    Ok(set)
}

pub fn cmd_scen(cfg: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    if cfg.scenarios.source != "generate" {
        bail!("`scen` generates scenarios; set scenarios.source = \"generate\"");
    }
    let (net, _) = load_network(cfg)?;
    let set = build_scenarios(cfg, &net, cfg.scenarios.seed)?;
    let path = out.unwrap_or_else(|| cfg.out_dir.join("scenarios.csv"));
    write_atomic(&path, write_scenario_file(&set).as_bytes())?;

    let totals: Vec<f64> = (0..set.n_scenarios()).map(|s| set.total(s)).collect();
    let mean = set.expected_total();
    let mut sorted = totals.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quant = |q: f64| sorted[(((sorted.len() - 1) as f64) * q).round() as usize];
    println!("wrote {} scenarios to {}", set.n_scenarios(), path.display());
    println!(
        "total wind MW: mean {mean:.2}, q05 {:.2}, median {:.2}, q95 {:.2}",
        quant(0.05),
        quant(0.50),
        quant(0.95)
    );
    let j = set.n_farms();
    if j > 1 {
        let mut line = String::from("sample rank correlation (upper triangle):");
        for a in 0..j {
            for b in (a + 1)..j {
                let xs: Vec<f64> = set.values.iter().map(|r| r[a]).collect();
                let ys: Vec<f64> = set.values.iter().map(|r| r[b]).collect();
                write!(
                    line,
                    " ({},{})={:.3}",
                    set.farm_ids[a],
                    set.farm_ids[b],
                    spearman(&xs, &ys)
                )
                .unwrap();
            }
        }
        println!("{line}");
    }
    Ok(())
}

fn costs_csv(rows: &[(String, CostBreakdown)]) -> String {
    let mut out = String::from("model,reserve_cost,day_ahead_cost,balancing_cost,total_cost\n");
    for (name, b) in rows {
        out.push_str(&format!(
            "{name},{},{},{},{}\n",
            b.reserve, b.day_ahead, b.expected_balancing, b.total
        ));
    }
    out
}

fn epoch_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn market_report(cfg: &RunConfig, label: &str, out: &MarketOutcome) -> serde_json::Value {
    json!({
        "generated_at": epoch_seconds(),
        "case": cfg.case.display().to_string(),
        "model": label,
        "q": cfg.q,
        "seed": cfg.scenarios.seed,
        "lambda_up": out.lambda_up,
        "lambda_dn": out.lambda_dn,
        "cost": out.breakdown,
        "reserves": out.reserves,
        "day_ahead": out.day_ahead,
        "balancing": out.balancing,
    })
}

fn zonal_report(cfg: &RunConfig, label: &str, out: &ZonalOutcome) -> serde_json::Value {
    json!({
        "generated_at": epoch_seconds(),
        "case": cfg.case.display().to_string(),
        "model": label,
        "zones": cfg.zones,
        "chi": cfg.chi,
        "seed": cfg.scenarios.seed,
        "status": out.status,
        "gap": out.gap,
        "nodes": out.nodes,
        "cost": out.breakdown,
        "partition": out.partition,
        "lambda_up": out.lambda_up,
        "lambda_dn": out.lambda_dn,
        "zone_price_up": out.zone_price_up,
        "zone_price_dn": out.zone_price_dn,
        "reserves": out.reserves,
        "day_ahead": out.day_ahead,
        "balancing": out.balancing,
        "gamma": out.gamma,
        "bigm_audit_clean": out.bigm_clean,
        "certification": {
            "reserve": { "kkt": out.cert_reserve.0, "lp": out.cert_reserve.1 },
            "day_ahead": { "kkt": out.cert_day_ahead.0, "lp": out.cert_day_ahead.1 },
        },
    })
}

fn zones_csv(net: &PowerNetwork, out: &ZonalOutcome) -> String {
    let mut s = String::from("zone,up_mw,dn_mw,total_mw,avg_cost_per_mw\n");
    let rows = out.zone_table(net);
    let mut tot = (0.0, 0.0, 0.0, 0.0);
    for r in &rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.zone, r.up_mw, r.dn_mw, r.total_mw, r.avg_cost
        ));
        tot.0 += r.up_mw;
        tot.1 += r.dn_mw;
        tot.2 += r.total_mw;
        tot.3 += r.avg_cost * r.total_mw;
    }
    let avg = if tot.2 > 1e-9 { tot.3 / tot.2 } else { 0.0 };
    s.push_str(&format!("total,{},{},{},{}\n", tot.0, tot.1, tot.2, avg));
    s
}

pub fn cmd_solve(cfg: &RunConfig, export_mps: bool) -> anyhow::Result<()> {
    let (net, mat) = load_network(cfg)?;
    let scenarios = build_scenarios(cfg, &net, cfg.scenarios.seed)?;
    let params = solver_params(cfg);
    let out_dir = &cfg.out_dir;
    let label = cfg.model.to_string();

    let mut limit: Option<String> = None;
    match cfg.model {
        ModelKind::Sequential => {
            let out = run_sequential(&net, &mat, &scenarios, cfg.q, &params)?;
            write_atomic(
                &out_dir.join("run_report.json"),
                serde_json::to_string_pretty(&market_report(cfg, &label, &out))?.as_bytes(),
            )?;
            write_atomic(
                &out_dir.join("costs.csv"),
                costs_csv(&[(label.clone(), out.breakdown)]).as_bytes(),
            )?;
            print_breakdown(&label, &out.breakdown);
        }
        ModelKind::Stochastic => {
            let out = solve_stochastic(&net, &mat, &scenarios, &params)?;
            write_atomic(
                &out_dir.join("run_report.json"),
                serde_json::to_string_pretty(&market_report(cfg, &label, &out))?.as_bytes(),
            )?;
            write_atomic(
                &out_dir.join("costs.csv"),
                costs_csv(&[(label.clone(), out.breakdown)]).as_bytes(),
            )?;
            print_breakdown(&label, &out.breakdown);
        }
        ModelKind::ZonalExtensive | ModelKind::ZonalBenders => {
            let zcfg = zonal_config(cfg, &net);
            let out = if cfg.model == ModelKind::ZonalExtensive {
                solve_extensive(&net, &mat, &scenarios, &zcfg, &params)?
            } else {
                let bcfg = BendersConfig {
                    epsilon: cfg.solver.epsilon.unwrap_or(1e-4),
                    max_iterations: cfg.solver.max_iterations.unwrap_or(100),
                    theta_lb: None,
                };
                let (out, trace) = run_benders(&net, &mat, &scenarios, &zcfg, &bcfg, &params)?;
                write_atomic(
                    &out_dir.join("benders_trace.csv"),
                    trace_to_csv(&trace).as_bytes(),
                )?;
                if !trace.converged {
                    limit = Some(format!(
                        "decomposition unconverged after {} iterations",
                        trace.rows.len()
                    ));
                }
                out
            };
            write_atomic(
                &out_dir.join("run_report.json"),
                serde_json::to_string_pretty(&zonal_report(cfg, &label, &out))?.as_bytes(),
            )?;
            write_atomic(
                &out_dir.join("costs.csv"),
                costs_csv(&[(label.clone(), out.breakdown)]).as_bytes(),
            )?;
            write_atomic(&out_dir.join("zones.csv"), zones_csv(&net, &out).as_bytes())?;
            write_atomic(
                &out_dir.join("partition.dot"),
                out.partition.to_dot(&net).as_bytes(),
            )?;
            if export_mps {
                let mpec = assemble_mpec(&net, &mat, &scenarios, &zcfg)?;
                let doc = mps::export_mps(&mpec.model);
                write_atomic(&out_dir.join("model.mps"), doc.text.as_bytes())?;
            }
            print_breakdown(&label, &out.breakdown);
            println!(
                "status {}, gap {:.3e}, partition sizes {:?}, margins sum {:.2} MW",
                out.status,
                out.gap,
                out.partition.sizes,
                out.gamma.iter().sum::<f64>()
            );
            if out.status == "iteration_limit" {
                limit = Some("branch-and-bound node budget exhausted".into());
            }
        }
    }
    if let Some(msg) = limit {
        return Err(anyhow::Error::new(LimitReached(msg)));
    }
    Ok(())
}

fn print_breakdown(label: &str, b: &CostBreakdown) {
    println!(
        "{label}: reserve {:.3} + day-ahead {:.3} + balancing {:.3} = total {:.3} $",
        b.reserve, b.day_ahead, b.expected_balancing, b.total
    );
}

pub fn cmd_stability(cfg: &RunConfig, jobs: usize) -> anyhow::Result<()> {
    let (net, mat) = load_network(cfg)?;
    let params = solver_params(cfg);
    if cfg.scenarios.source != "generate" {
        bail!("stability derives its scenario sets from seeds; use source = \"generate\"");
    }

    // Omega_0 trains the first stages; the rest evaluate them.
    let mut omegas = Vec::with_capacity(cfg.stability.omegas);
    for i in 0..cfg.stability.omegas {
        omegas.push(build_scenarios(cfg, &net, cfg.scenarios.seed + i as u64)?);
    }
    let train = &omegas[0];
    let eval: Vec<ScenarioSet> = omegas[1..].to_vec();

    let mut fixed = Vec::new();
    for &q in &cfg.stability.q_grid {
        let seq = run_sequential(&net, &mat, train, q, &params)?;
        fixed.push(FixedFirstStage {
            label: format!("sequential-q{q}"),
            reserves: seq.reserves,
            gamma: vec![0.0; net.n_lines()],
        });
    }
    for &zones in &cfg.stability.zonal_zones {
        let mut zcfg = zonal_config(cfg, &net);
        zcfg.zones = zones;
        let out = solve_extensive(&net, &mat, train, &zcfg, &params)?;
        fixed.push(FixedFirstStage {
            label: format!("zonal-Z{zones}-chi{}", cfg.chi),
            reserves: out.reserves,
            gamma: out.gamma,
        });
    }

    // Independent per-omega evaluations, optionally in parallel; results
    // are stitched back in omega order so the output is deterministic.
    let jobs = jobs.max(1);
    let mut per_omega: Vec<Vec<StabilityRow>> = Vec::with_capacity(eval.len());
    if jobs == 1 || eval.len() <= 1 {
        for omega in &eval {
            per_omega.push(run_stability(
                &net,
                &mat,
                &fixed,
                std::slice::from_ref(omega),
                &params,
            )?);
        }
    } else {
        let mut results: Vec<Option<anyhow::Result<Vec<StabilityRow>>>> =
            (0..eval.len()).map(|_| None).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(eval.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= eval.len() {
                        break;
                    }
                    let r = run_stability(
                        &net,
                        &mat,
                        &fixed,
                        std::slice::from_ref(&eval[i]),
                        &params,
                    )
                    .map_err(anyhow::Error::from);
                    slots.lock().unwrap()[i] = Some(r);
                });
            }
        });
        for slot in results {
            per_omega.push(slot.expect("every omega evaluated")?);
        }
    }

    // Merge: rows are (model) x (omega ratios...).
    let model_count = per_omega.first().map(|r| r.len()).unwrap_or(0);
    let mut merged: Vec<StabilityRow> = Vec::with_capacity(model_count);
    for m in 0..model_count {
        let ratios: Vec<f64> = per_omega.iter().map(|cols| cols[m].ratios[0]).collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        merged.push(StabilityRow {
            model: per_omega[0][m].model.clone(),
            ratios,
            mean,
            min,
            max,
        });
    }

    let mut csv = String::from("model,omega,ratio\n");
    for row in &merged {
        for (i, r) in row.ratios.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", row.model, i + 2, r));
        }
    }
    write_atomic(&cfg.out_dir.join("stability.csv"), csv.as_bytes())?;
    let mut summary = String::from("model,mean,min,max\n");
    for row in &merged {
        summary.push_str(&format!("{},{},{},{}\n", row.model, row.mean, row.min, row.max));
    }
    write_atomic(&cfg.out_dir.join("stability_summary.csv"), summary.as_bytes())?;
    for row in &merged {
        println!(
            "{}: mean {:.4}, min {:.4}, max {:.4}",
            row.model, row.mean, row.min, row.max
        );
    }
    Ok(())
}

pub fn cmd_export(cfg: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let (net, mat) = load_network(cfg)?;
    let scenarios = build_scenarios(cfg, &net, cfg.scenarios.seed)?;
    let zcfg = zonal_config(cfg, &net);
    let mpec = assemble_mpec(&net, &mat, &scenarios, &zcfg)?;
    let (vars, cons, discrete) = mpec.statistics();
    let doc = mps::export_mps(&mpec.model);
    let path = out.unwrap_or_else(|| cfg.out_dir.join("model.mps"));
    write_atomic(&path, doc.text.as_bytes())?;
    if !doc.renames.is_empty() {
        let mut map = String::from("original,emitted\n");
        for (orig, new) in &doc.renames {
            map.push_str(&format!("{orig},{new}\n"));
        }
        write_atomic(&path.with_extension("renames.csv"), map.as_bytes())?;
    }
    println!(
        "wrote {} ({vars} variables, {cons} constraints, {discrete} discrete, {} renames)",
        path.display(),
        doc.renames.len()
    );
    Ok(())
}

pub fn cmd_case_validate(path: &Path) -> anyhow::Result<()> {
    let net = load_case(path).map_err(|e| anyhow!("{e}"))?;
    let d = verify_network(&net);
    println!(
        "{}: {} buses, {} lines, {} generators, {} wind farms",
        path.display(),
        net.n_buses(),
        net.n_lines(),
        net.n_gens(),
        net.n_wind()
    );
    println!(
        "load {:.1} MW, dispatchable {:.1} MW, wind capacity {:.1} MW",
        d.total_load, d.total_gen_capacity, d.total_wind_capacity
    );
    if d.is_clean() {
        println!("no violations");
    } else {
        for v in &d.violations {
            println!("violation: {v}");
        }
    }
    Ok(())
}
