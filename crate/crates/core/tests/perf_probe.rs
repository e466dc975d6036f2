//! Manual profiling probe (run with --ignored).

use std::time::Instant;

use rezone_core::markets;
use rezone_core::milp::{solve_lp_relaxation, SolverParams};
use rezone_core::net::{build_matrices, load_case};
use rezone_core::scen::ScenarioSet;
use rezone_core::zonal::{assemble_mpec, ZonalConfig};

#[test]
#[ignore]
fn probe_rts24_z1() {
    let net = load_case(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/rts24.json")).unwrap();
    let mat = build_matrices(&net).unwrap();
    let w0: Vec<f64> = net.wind_farms.iter().map(|w| w.forecast).collect();
    let mut values = Vec::new();
    for d in [-150.0, 0.0, 150.0] {
        values.push(w0.iter().map(|w| (w + d / 6.0).max(0.0)).collect());
    }
    let scen = ScenarioSet {
        farm_ids: net.wind_farms.iter().map(|w| w.id).collect(),
        values,
        probabilities: vec![1.0 / 3.0; 3],
    };
    let params = SolverParams::default();

    let t = Instant::now();
    let st = markets::solve_stochastic(&net, &mat, &scen, &params).unwrap();
    println!("stochastic: {:?} total={}", t.elapsed(), st.breakdown.total);

    let t = Instant::now();
    let seq = markets::run_sequential(&net, &mat, &scen, 0.05, &params).unwrap();
    println!("sequential: {:?} total={}", t.elapsed(), seq.breakdown.total);

    let t = Instant::now();
    let cfg = ZonalConfig::new(1, 0.0, 4);
    let mpec = assemble_mpec(&net, &mat, &scen, &cfg).unwrap();
    let (v, c, d) = mpec.statistics();
    println!("assemble: {:?} vars={v} cons={c} discrete={d}", t.elapsed());

    let t = Instant::now();
    let relax = solve_lp_relaxation(&mpec.model, &params).unwrap();
    println!(
        "root LP relax: {:?} status={} obj={}",
        t.elapsed(),
        relax.status,
        relax.objective
    );
}

#[test]
#[ignore]
fn probe_rts24_budgeted_zonal() {
    let net = load_case(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/rts24.json")).unwrap();
    let mat = build_matrices(&net).unwrap();
    let w0: Vec<f64> = net.wind_farms.iter().map(|w| w.forecast).collect();
    let mut values = Vec::new();
    for d in [-150.0, 0.0, 150.0] {
        values.push(w0.iter().map(|w| (w + d / 6.0).max(0.0)).collect::<Vec<f64>>());
    }
    let scen = ScenarioSet {
        farm_ids: net.wind_farms.iter().map(|w| w.id).collect(),
        values,
        probabilities: vec![1.0 / 3.0; 3],
    };
    let params = SolverParams {
        gap: 1e-3,
        node_limit: 300,
        ..Default::default()
    };
    for zones in [1usize, 2] {
        let t = Instant::now();
        let cfg = ZonalConfig::new(zones, 0.0, 4);
        let out = rezone_core::zonal::solve_extensive(&net, &mat, &scen, &cfg, &params).unwrap();
        println!(
            "Z={zones}: {:?} status={} gap={:.4} total={} sizes={:?}",
            t.elapsed(),
            out.status,
            out.gap,
            out.breakdown.total,
            out.partition.sizes
        );
    }
}

#[test]
#[ignore]
fn probe_capacity_allocation_fixture() {
    // Path 1-2-3-4; cheap flexible reserve west, wind + scarce expensive
    // reserve east, tight cross line 2-3.
    let net = rezone_core::net::load_case_str(
        r#"{
        "name": "path4-congested",
        "slack": 1,
        "penalties": {"curtail": 100.0, "shed": 1000.0},
        "buses": [
            {"id": 1, "load": 0.0},
            {"id": 2, "load": 50.0},
            {"id": 3, "load": 150.0},
            {"id": 4, "load": 50.0}
        ],
        "lines": [
            {"id": 1, "from": 1, "to": 2, "reactance": 0.1, "rating": 260.0},
            {"id": 2, "from": 2, "to": 3, "reactance": 0.1, "rating": 120.0},
            {"id": 3, "from": 3, "to": 4, "reactance": 0.1, "rating": 150.0}
        ],
        "generators": [
            {"id": 1, "bus": 1, "p_min": 0.0, "p_max": 300.0, "c": 10.0,
             "c_up": 2.0, "c_dn": 2.0, "r_up_max": 100.0, "r_dn_max": 100.0},
            {"id": 2, "bus": 3, "p_min": 0.0, "p_max": 200.0, "c": 30.0,
             "c_up": 30.0, "c_dn": 30.0, "r_up_max": 30.0, "r_dn_max": 30.0}
        ],
        "wind": [
            {"id": 1, "bus": 4, "capacity": 200.0, "forecast": 100.0}
        ]
    }"#,
    )
    .unwrap();
    let mat = build_matrices(&net).unwrap();
    let scen = ScenarioSet {
        farm_ids: vec![1],
        values: vec![vec![40.0], vec![160.0]],
        probabilities: vec![0.5, 0.5],
    };
    let params = SolverParams {
        gap: 0.0,
        ..Default::default()
    };
    for chi in [0.0, 1.0] {
        let t = Instant::now();
        let cfg = ZonalConfig::new(2, chi, 2);
        let out = rezone_core::zonal::solve_extensive(&net, &mat, &scen, &cfg, &params).unwrap();
        println!(
            "chi={chi}: {:?} status={} total={} breakdown=({:.1},{:.1},{:.1}) gamma={:?} lambda_up={:?}",
            t.elapsed(),
            out.status,
            out.breakdown.total,
            out.breakdown.reserve,
            out.breakdown.day_ahead,
            out.breakdown.expected_balancing,
            out.gamma,
            out.lambda_up,
        );
    }
}

#[test]
#[ignore]
fn probe_rts24_scenario_seeds() {
    let net = load_case(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/rts24.json")).unwrap();
    let fc = rezone_core::scen::ProbabilisticForecast::from_network(
        &net,
        rezone_core::scen::DEFAULT_VARIANCE_COEFFS,
        rezone_core::scen::DEFAULT_CORR_TAU,
    )
    .unwrap();
    let total_up: f64 = net.generators.iter().map(|g| g.r_up_max).sum();
    for seed in [1u64, 7, 11, 21, 42] {
        let raw = rezone_core::scen::sample_scenarios(&fc, 200, seed).unwrap();
        let red = rezone_core::scen::fast_forward_reduce(&raw, 5).unwrap();
        let (lu, ld) = rezone_core::scen::deterministic_requirements(&red, 0.01).unwrap();
        println!(
            "seed {seed}: S=5 lambda_up={lu:.1} lambda_dn={ld:.1} (cap {total_up}) totals={:?}",
            (0..5).map(|s| red.total(s).round()).collect::<Vec<_>>()
        );
    }
}
