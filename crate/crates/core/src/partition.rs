//! Connectivity-aware grid partitioning as a MILP block, plus independent
//! graph-search oracles used to certify it.
//!
//! Zones are encoded by assignment binaries; connectivity uses the
//! single-commodity flow device: each zone's root (itself a decision)
//! injects as many abstract units as the zone has nodes, every in-zone
//! node sinks one unit, and flow is confined to lines interior to the
//! zone. Bilinear products (root injection, per-line flow caps) are
//! linearized with explicit big-M envelopes that are exact at integral
//! points.

use serde::Serialize;
use thiserror::Error;

use crate::milp::{
    solve_milp, LinExpr, MilpModel, ModelError, Solution, SolveStatus, SolverParams, VarId,
};
use crate::net::PowerNetwork;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("sizing infeasible: {zones} zones with minimum size {y_min} exceed {nodes} nodes")]
    SizingInfeasible {
        zones: usize,
        y_min: u32,
        nodes: usize,
    },
    #[error("zone count must be at least 1")]
    NoZones,
    #[error("exhaustive enumeration limited to 12 nodes, got {0}")]
    TooLarge(usize),
    #[error("binary `{name}` not integral in solution ({value}); solver failure")]
    NonIntegral { name: String, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("partition block solve failed: {0}")]
    Solve(String),
}

/// Partitioning block configuration.
#[derive(Debug, Clone)]
pub struct PartitionConfig {
    pub zones: usize,
    /// Minimum zone size; clamped to at least 1 (every zone owns a root).
    pub y_min: u32,
    /// Maximum zone size; defaults to N.
    pub y_max: Option<u32>,
    /// Canonical zone labeling: the root is the smallest node of its zone
    /// and roots are ordered across zones. Halves the search tree without
    /// excluding any distinct partition.
    pub symmetry_breaking: bool,
}

impl PartitionConfig {
    pub fn new(zones: usize, y_min: u32) -> Self {
        PartitionConfig {
            zones,
            y_min,
            y_max: None,
            symmetry_breaking: true,
        }
    }

    fn check(&self, n: usize) -> Result<(u32, u32), PartitionError> {
        if self.zones == 0 {
            return Err(PartitionError::NoZones);
        }
        let y_min = self.y_min.max(1);
        let y_max = self.y_max.unwrap_or(n as u32).min(n as u32);
        if (self.zones as u32) * y_min > n as u32 {
            return Err(PartitionError::SizingInfeasible {
                zones: self.zones,
                y_min,
                nodes: n,
            });
        }
        Ok((y_min, y_max))
    }
}

/// Variable handles of one emitted partition block.
#[derive(Debug, Clone)]
pub struct PartitionVars {
    pub zones: usize,
    /// x[n][z]: node-to-zone assignment binaries.
    pub x: Vec<Vec<VarId>>,
    /// c[n][z]: root selection binaries.
    pub c: Vec<Vec<VarId>>,
    /// y[z]: zone sizes.
    pub y: Vec<VarId>,
    /// phi[l][z]: connectivity flow units.
    pub phi: Vec<Vec<VarId>>,
    /// u[n][z]: linearized root injection c*y.
    pub u: Vec<Vec<VarId>>,
    /// Linearized per-line flow caps y*x_from, y*x_to.
    pub cap_from: Vec<Vec<VarId>>,
    pub cap_to: Vec<Vec<VarId>>,
    pub y_min: u32,
    pub y_max: u32,
}

/// Product linearization with caller-chosen envelope constants
/// (root injection uses m=1, flow caps m=0; both exact at integral points).
fn product_rows(
    model: &mut MilpModel,
    tag: &str,
    bin: VarId,
    int: VarId,
    m_lo: f64,
    m_hi: f64,
) -> Result<VarId, ModelError> {
    let aux = model.continuous(&format!("{tag}_u"), 0.0, m_hi)?;
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(int, -1.0).add(bin, -m_hi);
    model.ge(&format!("{tag}_lo"), e, -m_hi)?;
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(int, -1.0).add(bin, -m_lo);
    model.le(&format!("{tag}_hi"), e, -m_lo)?;
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(bin, -m_lo);
    model.ge(&format!("{tag}_bl"), e, 0.0)?;
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(bin, -m_hi);
    model.le(&format!("{tag}_bu"), e, 0.0)?;
    Ok(aux)
}

/// Emits the full partitioning block into `model`.
pub fn emit_partition_block(
    model: &mut MilpModel,
    net: &PowerNetwork,
    cfg: &PartitionConfig,
) -> Result<PartitionVars, PartitionError> {
    let n = net.n_buses();
    let nl = net.n_lines();
    let nz = cfg.zones;
    let (y_min, y_max) = cfg.check(n)?;

    let mut x = vec![Vec::with_capacity(nz); n];
    let mut c = vec![Vec::with_capacity(nz); n];
    for (node, bus) in net.buses.iter().enumerate() {
        for z in 0..nz {
            x[node].push(model.binary(&format!("x_n{}_z{}", bus.id, z + 1))?);
            c[node].push(model.binary(&format!("c_n{}_z{}", bus.id, z + 1))?);
        }
    }
    let mut y = Vec::with_capacity(nz);
    for z in 0..nz {
        y.push(model.integer(&format!("y_z{}", z + 1), y_min as f64, y_max as f64)?);
    }

    // Every node belongs to exactly one zone.
    for (node, bus) in net.buses.iter().enumerate() {
        let mut e = LinExpr::new();
        for z in 0..nz {
            e.add(x[node][z], 1.0);
        }
        model.eq(&format!("cover_n{}", bus.id), e, 1.0)?;
    }
    // Zone size definition.
    for z in 0..nz {
        let mut e = LinExpr::term(y[z], 1.0);
        for node in 0..n {
            e.add(x[node][z], -1.0);
        }
        model.eq(&format!("size_z{}", z + 1), e, 0.0)?;
    }
    // Root exclusivity and uniqueness.
    for (node, bus) in net.buses.iter().enumerate() {
        let mut e = LinExpr::new();
        for z in 0..nz {
            e.add(c[node][z], 1.0);
        }
        model.le(&format!("rootex_n{}", bus.id), e, 1.0)?;
    }
    for z in 0..nz {
        let mut e = LinExpr::new();
        for node in 0..n {
            e.add(c[node][z], 1.0);
        }
        model.eq(&format!("rootone_z{}", z + 1), e, 1.0)?;
    }
    // Roots live inside their zone (implied; tightens the relaxation).
    for (node, bus) in net.buses.iter().enumerate() {
        for z in 0..nz {
            let mut e = LinExpr::term(c[node][z], 1.0);
            e.add(x[node][z], -1.0);
            model.le(&format!("rootin_n{}_z{}", bus.id, z + 1), e, 0.0)?;
        }
    }

    // Root injection u = c*y (m=1: a selected root's zone has >= 1 node).
    let mut u = vec![Vec::with_capacity(nz); n];
    for (node, bus) in net.buses.iter().enumerate() {
        for z in 0..nz {
            let aux = product_rows(
                model,
                &format!("inj_n{}_z{}", bus.id, z + 1),
                c[node][z],
                y[z],
                1.0,
                y_max as f64,
            )?;
            u[node].push(aux);
        }
    }

    // Flow caps from both endpoints: cap = y * x_endpoint (m=0).
    let mut phi = vec![Vec::with_capacity(nz); nl];
    let mut cap_from = vec![Vec::with_capacity(nz); nl];
    let mut cap_to = vec![Vec::with_capacity(nz); nl];
    for (l, line) in net.lines.iter().enumerate() {
        let from = net.bus_index(line.from);
        let to = net.bus_index(line.to);
        for z in 0..nz {
            let f = model.continuous(
                &format!("phi_l{}_z{}", line.id, z + 1),
                -(y_max as f64),
                y_max as f64,
            )?;
            let cf = product_rows(
                model,
                &format!("capf_l{}_z{}", line.id, z + 1),
                x[from][z],
                y[z],
                0.0,
                y_max as f64,
            )?;
            let ct = product_rows(
                model,
                &format!("capt_l{}_z{}", line.id, z + 1),
                x[to][z],
                y[z],
                0.0,
                y_max as f64,
            )?;
            // |phi| <= cap_from and |phi| <= cap_to.
            for (tag, cap) in [("f", cf), ("t", ct)] {
                let mut e = LinExpr::term(f, 1.0);
                e.add(cap, -1.0);
                model.le(&format!("phiub{tag}_l{}_z{}", line.id, z + 1), e, 0.0)?;
                let mut e = LinExpr::term(f, 1.0);
                e.add(cap, 1.0);
                model.ge(&format!("philb{tag}_l{}_z{}", line.id, z + 1), e, 0.0)?;
            }
            phi[l].push(f);
            cap_from[l].push(cf);
            cap_to[l].push(ct);
        }
    }

    // Nodal balance of flow units: H^T phi + u = x per node and zone.
    for (node, bus) in net.buses.iter().enumerate() {
        for z in 0..nz {
            let mut e = LinExpr::new();
            for (l, line) in net.lines.iter().enumerate() {
                if net.bus_index(line.to) == node {
                    e.add(phi[l][z], 1.0);
                } else if net.bus_index(line.from) == node {
                    e.add(phi[l][z], -1.0);
                }
            }
            e.add(u[node][z], 1.0).add(x[node][z], -1.0);
            model.eq(&format!("units_n{}_z{}", bus.id, z + 1), e, 0.0)?;
        }
    }

    if cfg.symmetry_breaking {
        // Root = smallest node of its zone.
        for (node, bus) in net.buses.iter().enumerate() {
            for z in 0..nz {
                let mut e = LinExpr::term(c[node][z], -1.0);
                e.add(x[node][z], 1.0);
                for earlier in 0..node {
                    e.add(x[earlier][z], -1.0);
                }
                model.le(&format!("minroot_n{}_z{}", bus.id, z + 1), e, 0.0)?;
            }
        }
        // Zones ordered by root id.
        for z in 0..nz.saturating_sub(1) {
            let mut e = LinExpr::new();
            for node in 0..n {
                e.add(c[node][z], (node + 1) as f64);
                e.add(c[node][z + 1], -((node + 1) as f64));
            }
            model.le(&format!("rootord_z{}", z + 1), e, -1.0)?;
        }
    }

    Ok(PartitionVars {
        zones: nz,
        x,
        c,
        y,
        phi,
        u,
        cap_from,
        cap_to,
        y_min,
        y_max,
    })
}

/// A concrete zone assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    /// 0-based zone index per node (node order = bus order).
    pub zone_of: Vec<usize>,
    /// 1-based node id of each zone's root.
    pub roots: Vec<u32>,
    pub sizes: Vec<u32>,
    /// Line ids with endpoints in different zones.
    pub cross_zonal_lines: Vec<u32>,
    pub y_min: u32,
    pub y_max: u32,
}

impl Partition {
    pub fn zones(&self) -> usize {
        self.sizes.len()
    }

    /// Canonical relabeling: zones ordered by smallest contained node,
    /// roots at those minima.
    pub fn canonical(&self) -> Partition {
        let nz = self.zones();
        let mut min_node = vec![usize::MAX; nz];
        for (node, &z) in self.zone_of.iter().enumerate() {
            min_node[z] = min_node[z].min(node);
        }
        let mut order: Vec<usize> = (0..nz).collect();
        order.sort_by_key(|&z| min_node[z]);
        let mut relabel = vec![0usize; nz];
        for (new_z, &old_z) in order.iter().enumerate() {
            relabel[old_z] = new_z;
        }
        let zone_of: Vec<usize> = self.zone_of.iter().map(|&z| relabel[z]).collect();
        let mut sizes = vec![0u32; nz];
        let mut roots = vec![u32::MAX; nz];
        for (node, &z) in zone_of.iter().enumerate() {
            sizes[z] += 1;
            roots[z] = roots[z].min(node as u32 + 1);
        }
        Partition {
            cross_zonal_lines: self.cross_zonal_lines.clone(),
            zone_of,
            roots,
            sizes,
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }

    /// GraphViz export for visual inspection.
    pub fn to_dot(&self, net: &PowerNetwork) -> String {
        let mut out = String::from("graph zones {\n");
        for (node, bus) in net.buses.iter().enumerate() {
            out.push_str(&format!(
                "  n{} [label=\"{} (z{})\"];\n",
                bus.id,
                bus.id,
                self.zone_of[node] + 1
            ));
        }
        for line in &net.lines {
            let cross = self.cross_zonal_lines.contains(&line.id);
            out.push_str(&format!(
                "  n{} -- n{} [label=\"l{}\"{}];\n",
                line.from,
                line.to,
                line.id,
                if cross { ", style=bold" } else { "" }
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn cross_lines(net: &PowerNetwork, zone_of: &[usize]) -> Vec<u32> {
    net.lines
        .iter()
        .filter(|l| zone_of[net.bus_index(l.from)] != zone_of[net.bus_index(l.to)])
        .map(|l| l.id)
        .collect()
}

/// Builds a partition from a raw zone assignment (roots at zone minima).
pub fn partition_from_assignment(
    net: &PowerNetwork,
    zone_of: Vec<usize>,
    zones: usize,
    y_min: u32,
    y_max: u32,
) -> Partition {
    let mut sizes = vec![0u32; zones];
    let mut roots = vec![u32::MAX; zones];
    for (node, &z) in zone_of.iter().enumerate() {
        sizes[z] += 1;
        roots[z] = roots[z].min(node as u32 + 1);
    }
    Partition {
        cross_zonal_lines: cross_lines(net, &zone_of),
        zone_of,
        roots,
        sizes,
        y_min,
        y_max,
    }
}

/// Reads a partition out of a block solution, rounding binaries at 0.5 and
/// rejecting anything not integral within tolerance.
pub fn extract_partition(
    net: &PowerNetwork,
    model: &MilpModel,
    solution: &Solution,
    vars: &PartitionVars,
) -> Result<Partition, PartitionError> {
    let n = vars.x.len();
    let nz = vars.zones;
    let mut zone_of = vec![usize::MAX; n];
    for node in 0..n {
        for z in 0..nz {
            let v = solution.value(vars.x[node][z]);
            if (v - v.round()).abs() > 1e-4 {
                return Err(PartitionError::NonIntegral {
                    name: model.var(vars.x[node][z]).name.clone(),
                    value: v,
                });
            }
            if v >= 0.5 {
                zone_of[node] = z;
            }
        }
    }
    let mut roots = vec![0u32; nz];
    for node in 0..n {
        for z in 0..nz {
            let v = solution.value(vars.c[node][z]);
            if (v - v.round()).abs() > 1e-4 {
                return Err(PartitionError::NonIntegral {
                    name: model.var(vars.c[node][z]).name.clone(),
                    value: v,
                });
            }
            if v >= 0.5 {
                roots[z] = node as u32 + 1;
            }
        }
    }
    let mut sizes = vec![0u32; nz];
    for &z in &zone_of {
        sizes[z] += 1;
    }
    Ok(Partition {
        cross_zonal_lines: cross_lines(net, &zone_of),
        zone_of,
        roots,
        sizes,
        y_min: vars.y_min,
        y_max: vars.y_max,
    })
}

/// Violations of exclusivity, coverage, sizing, or per-zone connectivity,
/// checked by breadth-first search only (no MILP involvement).
pub fn verify_partition(net: &PowerNetwork, partition: &Partition) -> Vec<String> {
    let mut violations = Vec::new();
    let n = net.n_buses();
    let nz = partition.zones();
    if partition.zone_of.len() != n {
        violations.push(format!(
            "coverage: assignment covers {} of {} nodes",
            partition.zone_of.len(),
            n
        ));
        return violations;
    }
    let mut counts = vec![0u32; nz];
    for (node, &z) in partition.zone_of.iter().enumerate() {
        if z >= nz {
            violations.push(format!("node {} assigned to unknown zone {}", node + 1, z));
            return violations;
        }
        counts[z] += 1;
    }
    for (z, (&count, &size)) in counts.iter().zip(&partition.sizes).enumerate() {
        if count != size {
            violations.push(format!(
                "zone {}: recorded size {} but {} members",
                z + 1,
                size,
                count
            ));
        }
        if count < partition.y_min || count > partition.y_max {
            violations.push(format!(
                "zone {}: size {} outside [{}, {}]",
                z + 1,
                count,
                partition.y_min,
                partition.y_max
            ));
        }
    }
    // Connectivity of each induced subgraph by BFS.
    let adj = net.adjacency();
    for z in 0..nz {
        let members: Vec<usize> = (0..n).filter(|&i| partition.zone_of[i] == z).collect();
        if members.is_empty() {
            violations.push(format!("zone {}: empty", z + 1));
            continue;
        }
        let mut seen = vec![false; n];
        let mut queue = vec![members[0]];
        seen[members[0]] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop() {
            for &v in &adj[u] {
                if !seen[v] && partition.zone_of[v] == z {
                    seen[v] = true;
                    reached += 1;
                    queue.push(v);
                }
            }
        }
        if reached != members.len() {
            violations.push(format!(
                "zone {}: disconnected ({} of {} nodes reachable)",
                z + 1,
                reached,
                members.len()
            ));
        }
    }
    violations
}

/// Exhaustive generation of all valid partitions, canonically labeled.
/// Guarded to 12 nodes.
pub fn enumerate_partitions(
    net: &PowerNetwork,
    cfg: &PartitionConfig,
) -> Result<Vec<Partition>, PartitionError> {
    let n = net.n_buses();
    if n > 12 {
        return Err(PartitionError::TooLarge(n));
    }
    let (y_min, y_max) = cfg.check(n)?;
    let nz = cfg.zones;
    let mut out = Vec::new();
    let mut assignment = vec![0usize; n];
    loop {
        // Canonical labeling filter: zone k's first appearance order must
        // be 0,1,2,... so each unordered partition shows up exactly once.
        let mut next_label = 0usize;
        let mut canonical = true;
        for &z in &assignment {
            if z > next_label {
                canonical = false;
                break;
            }
            if z == next_label {
                next_label += 1;
            }
        }
        if canonical && next_label == nz {
            let p = partition_from_assignment(net, assignment.clone(), nz, y_min, y_max);
            if verify_partition(net, &p).is_empty() {
                out.push(p);
            }
        }
        // Next assignment in base-nz counting.
        let mut i = 0;
        loop {
            if i == n {
                return Ok(out);
            }
            assignment[i] += 1;
            if assignment[i] < nz {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

/// Enumerates the x-projections of the MILP block's feasible set via
/// no-good cuts. Every found point is returned with its full solution so
/// structural properties can be asserted against it.
pub fn enumerate_block_solutions(
    net: &PowerNetwork,
    cfg: &PartitionConfig,
    params: &SolverParams,
) -> Result<Vec<(Partition, Vec<f64>)>, PartitionError> {
    let mut model = MilpModel::new("partition_enum");
    let vars = emit_partition_block(&mut model, net, cfg)?;
    let n = net.n_buses();
    let mut found = Vec::new();
    for round in 0..100_000 {
        let sol = solve_milp(&model, params, None)?;
        match sol.status {
            SolveStatus::Infeasible => break,
            s if s.is_ok() => {}
            s => return Err(PartitionError::Solve(format!("status {s}"))),
        }
        let mut zone_of = vec![usize::MAX; n];
        let mut cut = LinExpr::new();
        let mut ones = 0.0;
        for node in 0..n {
            for z in 0..vars.zones {
                let v = sol.value(vars.x[node][z]);
                if (v - v.round()).abs() > 1e-4 {
                    return Err(PartitionError::NonIntegral {
                        name: model.var(vars.x[node][z]).name.clone(),
                        value: v,
                    });
                }
                if v >= 0.5 {
                    zone_of[node] = z;
                    cut.add(vars.x[node][z], 1.0);
                    ones += 1.0;
                } else {
                    cut.add(vars.x[node][z], -1.0);
                }
            }
        }
        let p = partition_from_assignment(net, zone_of, vars.zones, vars.y_min, vars.y_max);
        found.push((p, sol.values));
        // Exclude this exact x-assignment and resolve.
        model.le(&format!("nogood_{round}"), cut, ones - 1.0)?;
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::ring4;
    use crate::net::load_case_str;

    fn params() -> SolverParams {
        SolverParams {
            gap: 0.0,
            ..Default::default()
        }
    }

    fn path3() -> PowerNetwork {
        load_case_str(
            r#"{
            "penalties": {"curtail": 50.0, "shed": 500.0},
            "buses": [{"id": 1, "load": 1.0}, {"id": 2, "load": 1.0}, {"id": 3, "load": 1.0}],
            "lines": [
                {"id": 1, "from": 1, "to": 2, "reactance": 0.1, "rating": 10.0},
                {"id": 2, "from": 2, "to": 3, "reactance": 0.1, "rating": 10.0}
            ],
            "generators": [{"id": 1, "bus": 1, "p_min": 0.0, "p_max": 10.0, "c": 10.0,
                            "c_up": 1.0, "c_dn": 1.0, "r_up_max": 5.0, "r_dn_max": 5.0}],
            "wind": []
        }"#,
        )
        .unwrap()
    }

    fn sorted_assignments(ps: &[Partition]) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = ps.iter().map(|p| p.canonical().zone_of.clone()).collect();
        v.sort();
        v
    }

    #[test]
    fn oracle_path3_two_zones() {
        let net = path3();
        let ps = enumerate_partitions(&net, &PartitionConfig::new(2, 1)).unwrap();
        assert_eq!(sorted_assignments(&ps), vec![vec![0, 0, 1], vec![0, 1, 1]]);
    }

    #[test]
    fn oracle_ring4_counts() {
        let net = ring4();
        let count = |z, ymin| {
            enumerate_partitions(&net, &PartitionConfig::new(z, ymin))
                .unwrap()
                .len()
        };
        assert_eq!(count(2, 1), 6); // cut-pair counting C(4,2)
        assert_eq!(count(2, 2), 2); // opposite-edge cuts
        assert_eq!(count(1, 1), 1);
        assert_eq!(count(3, 1), 4); // choose the lone pair: 4 adjacent pairs
    }

    #[test]
    fn oracle_rejects_disconnected_zone() {
        let net = path3();
        // {1,3} | {2} is size-valid but zone 1 is disconnected.
        let p = partition_from_assignment(&net, vec![0, 1, 0], 2, 1, 3);
        let v = verify_partition(&net, &p);
        assert!(v.iter().any(|s| s.contains("disconnected")), "{v:?}");
        let ps = enumerate_partitions(&net, &PartitionConfig::new(2, 1)).unwrap();
        assert!(!ps.iter().any(|q| q.zone_of == vec![0, 1, 0]));
    }

    #[test]
    fn verify_flags_size_violation() {
        let net = ring4();
        let p = partition_from_assignment(&net, vec![0, 0, 0, 1], 2, 4, 4);
        let v = verify_partition(&net, &p);
        assert!(v.iter().any(|s| s.contains("outside [4, 4]")), "{v:?}");
    }

    #[test]
    fn milp_matches_oracle_ring4() {
        let net = ring4();
        for (z, ymin) in [(1usize, 1u32), (2, 1), (2, 2), (3, 1)] {
            let cfg = PartitionConfig::new(z, ymin);
            let oracle = enumerate_partitions(&net, &cfg).unwrap();
            let milp = enumerate_block_solutions(&net, &cfg, &params()).unwrap();
            let milp_parts: Vec<Partition> = milp.iter().map(|(p, _)| p.clone()).collect();
            assert_eq!(
                sorted_assignments(&milp_parts),
                sorted_assignments(&oracle),
                "Z={z} y_min={ymin}"
            );
        }
    }

    #[test]
    fn milp_without_symmetry_has_all_labelings() {
        let net = ring4();
        let mut cfg = PartitionConfig::new(2, 1);
        cfg.symmetry_breaking = false;
        let milp = enumerate_block_solutions(&net, &cfg, &params()).unwrap();
        // 6 unordered splits x 2 labelings.
        assert_eq!(milp.len(), 12);
        let mut canon: Vec<Vec<usize>> = milp
            .iter()
            .map(|(p, _)| p.canonical().zone_of.clone())
            .collect();
        canon.sort();
        canon.dedup();
        assert_eq!(canon.len(), 6);
    }

    #[test]
    fn single_zone_forced() {
        let net = ring4();
        let milp = enumerate_block_solutions(&net, &PartitionConfig::new(1, 1), &params()).unwrap();
        assert_eq!(milp.len(), 1);
        let (p, _) = &milp[0];
        assert_eq!(p.zone_of, vec![0, 0, 0, 0]);
        assert!(p.cross_zonal_lines.is_empty());
        assert_eq!(p.roots, vec![1]);
    }

    #[test]
    fn singleton_zones_feasible_with_zero_flow() {
        let net = ring4();
        let mut model = MilpModel::new("p4");
        let cfg = PartitionConfig::new(4, 1);
        let vars = emit_partition_block(&mut model, &net, &cfg).unwrap();
        let sol = solve_milp(&model, &params(), None).unwrap();
        assert!(sol.status.is_ok());
        for l in 0..net.n_lines() {
            for z in 0..4 {
                assert!(sol.value(vars.phi[l][z]).abs() < 1e-6);
            }
        }
        for z in 0..4 {
            assert!((sol.value(vars.y[z]) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sizing_infeasible_rejected_at_build() {
        let net = path3();
        let mut model = MilpModel::new("bad");
        match emit_partition_block(&mut model, &net, &PartitionConfig::new(2, 2)) {
            Err(PartitionError::SizingInfeasible { .. }) => {}
            other => panic!("expected sizing error, got {other:?}"),
        }
    }

    #[test]
    fn feasible_points_satisfy_structural_properties() {
        // Root inside its zone with x[root]=1; |phi| <= y and phi = 0 on
        // lines not interior to the zone.
        let net = ring4();
        let cfg = PartitionConfig::new(2, 1);
        let mut model = MilpModel::new("props");
        let vars = emit_partition_block(&mut model, &net, &cfg).unwrap();
        let _ = &model;
        let found = enumerate_block_solutions(&net, &cfg, &params()).unwrap();
        assert_eq!(found.len(), 6);
        for (p, values) in &found {
            for (z, &root) in p.roots.iter().enumerate() {
                assert_eq!(p.zone_of[(root - 1) as usize], z, "root in zone");
            }
            for (l, line) in net.lines.iter().enumerate() {
                for z in 0..2 {
                    let phi = values[vars.phi[l][z].index()];
                    let y = values[vars.y[z].index()];
                    assert!(phi.abs() <= y + 1e-6);
                    let interior = p.zone_of[net.bus_index(line.from)] == z
                        && p.zone_of[net.bus_index(line.to)] == z;
                    if !interior {
                        assert!(phi.abs() < 1e-6, "phi nonzero outside zone interior");
                    }
                }
            }
        }
    }

    #[test]
    fn cross_zonal_sets_on_ring() {
        // ring4 line layout: l1=(1,2), l2=(2,3), l3=(3,4), l4=(4,1).
        let net = ring4();
        // {1} | {2,3,4}: crossing lines l1 and l4.
        let p = partition_from_assignment(&net, vec![0, 1, 1, 1], 2, 1, 4);
        assert_eq!(p.cross_zonal_lines, vec![1, 4]);
        // {1,2} | {3,4}: crossing lines l2 and l4.
        let p = partition_from_assignment(&net, vec![0, 0, 1, 1], 2, 1, 4);
        assert_eq!(p.cross_zonal_lines, vec![2, 4]);
    }

    #[test]
    fn dot_export_mentions_all_nodes() {
        let net = ring4();
        let p = partition_from_assignment(&net, vec![0, 0, 1, 1], 2, 1, 4);
        let dot = p.to_dot(&net);
        for b in 1..=4 {
            assert!(dot.contains(&format!("n{b} ")));
        }
        assert!(dot.contains("style=bold"));
    }
}
