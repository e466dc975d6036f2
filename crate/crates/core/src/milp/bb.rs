//! Depth-first-dive branch-and-bound over the embedded simplex.
//!
//! One rolling simplex state is rebounded per node and re-optimized from
//! the previous basis, so tree moves cost a handful of pivots instead of a
//! fresh factorization. Branching follows the most-fractional rule with
//! lowest-id ties; after a dive ends the next node is the best-bound open
//! node. Everything is deterministic for fixed parameters.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::presolve::presolve;
use super::simplex::{LpStatus, Simplex};
use super::{MilpModel, ModelError, Solution, SolveStatus, SolverParams, VarKind};

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    /// LP bound inherited from the parent.
    bound: f64,
    /// Cumulative integer bound changes along the path from the root.
    changes: Vec<(usize, f64, f64)>,
}

/// Min-heap ordering: lowest bound first, then lowest id.
struct OpenNode(Node);

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.0.bound == other.0.bound && self.0.id == other.0.id
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for BinaryHeap (max-heap) semantics.
        other
            .0
            .bound
            .partial_cmp(&self.0.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

pub(crate) fn branch_and_bound(
    model: &MilpModel,
    params: &SolverParams,
    warm_start: Option<&[f64]>,
) -> Result<Solution, ModelError> {
    let discrete: Vec<usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind != VarKind::Continuous)
        .map(|(j, _)| j)
        .collect();

    // Pure LP: identical to solve_lp.
    if discrete.is_empty() {
        return super::solve_lp_relaxation(model, params);
    }

    let pre = presolve(model);
    if pre.infeasible {
        return Ok(Solution::empty(SolveStatus::Infeasible));
    }
    let mut spx = Simplex::with_skipped_rows(
        model,
        params,
        Some(&pre.skip_row),
        Some((&pre.lb, &pre.ub)),
    );

    // Seed the incumbent from a caller-provided point when it checks out
    // against the original model.
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(ws) = warm_start {
        if ws.len() == model.num_vars() && model.max_violation(ws) <= 10.0 * params.tol_feas {
            incumbent = Some((model.eval_objective(ws), ws.to_vec()));
        }
    }

    let mut open: BinaryHeap<OpenNode> = BinaryHeap::new();
    let mut next_id: u64 = 0;
    let mut nodes_evaluated: u64 = 0;
    let mut touched: Vec<usize> = Vec::new();

    let root = Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        changes: Vec::new(),
    };
    next_id += 1;
    let mut dive: Option<Node> = Some(root);
    let mut exhausted = true;

    while let Some(node) = dive.take().or_else(|| {
        open.pop().map(|OpenNode(n)| {
            // Best-bound nodes worse than the cutoff die unevaluated.
            n
        })
    }) {
        // Prune against the incumbent before spending an LP solve.
        if let Some((inc_obj, _)) = &incumbent {
            let cutoff = inc_obj - node_cutoff_slack(*inc_obj, params);
            if node.bound >= cutoff {
                continue;
            }
        }
        if nodes_evaluated >= params.node_limit {
            exhausted = false;
            open.push(OpenNode(node));
            break;
        }
        nodes_evaluated += 1;

        // Rebound the rolling simplex to this node.
        for &col in &touched {
            spx.reset_col_bounds(col);
        }
        touched.clear();
        for &(col, lo, hi) in &node.changes {
            spx.set_col_bounds(col, lo, hi);
            touched.push(col);
        }

        let status = spx.reoptimize()?;
        match status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // Relaxation unbounded at the root means the MILP is
                // unbounded or infeasible; report the relaxation verdict.
                if node.changes.is_empty() {
                    return Ok(Solution::empty(SolveStatus::Unbounded));
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let obj = spx.objective_value();
        if let Some((inc_obj, _)) = &incumbent {
            if obj >= inc_obj - node_cutoff_slack(*inc_obj, params) {
                continue;
            }
        }

        // Most-fractional branching variable, ties by lowest id.
        let mut branch: Option<(usize, f64, f64)> = None; // (col, value, dist to 0.5)
        for &j in &discrete {
            let v = spx.col_value(j);
            let frac = v - v.floor();
            let fr = frac.min(1.0 - frac);
            if fr > params.tol_int {
                let dist = (frac - 0.5).abs();
                let better = match &branch {
                    None => true,
                    Some((_, _, best)) => dist < *best - 1e-12,
                };
                if better {
                    branch = Some((j, v, dist));
                }
            }
        }

        match branch {
            None => {
                // Integral: record incumbent (with discrete values snapped).
                let mut values: Vec<f64> = (0..model.num_vars())
                    .map(|j| spx.col_value(j))
                    .collect();
                for &j in &discrete {
                    values[j] = values[j].round();
                }
                let true_obj = model.eval_objective(&values);
                let accept = match &incumbent {
                    None => true,
                    Some((inc_obj, _)) => true_obj < *inc_obj - 1e-12,
                };
                if accept {
                    incumbent = Some((true_obj, values));
                }
            }
            Some((col, v, _)) => {
                let (node_lb, node_ub) = current_bounds(&node, col, &pre.lb[col], &pre.ub[col]);
                let down = Node {
                    id: next_id,
                    bound: obj,
                    changes: with_change(&node.changes, col, node_lb, v.floor()),
                };
                next_id += 1;
                let up = Node {
                    id: next_id,
                    bound: obj,
                    changes: with_change(&node.changes, col, v.ceil(), node_ub),
                };
                next_id += 1;
                let frac = v - v.floor();
                let (first, second) = if frac <= 0.5 { (down, up) } else { (up, down) };
                open.push(OpenNode(second));
                dive = Some(first);
            }
        }
    }

    // Global bound: best open node (all evaluated ones were pruned or
    // branched; their children carry the information).
    let best_open = open
        .peek()
        .map(|OpenNode(n)| n.bound)
        .unwrap_or(f64::INFINITY);

    let sol = match incumbent {
        None => {
            if exhausted {
                Solution::empty(SolveStatus::Infeasible)
            } else {
                let mut s = Solution::empty(SolveStatus::IterationLimit);
                s.nodes = nodes_evaluated;
                s
            }
        }
        Some((obj, values)) => {
            // Exhausting the tree proves optimality only up to the pruning
            // slack actually used.
            let gap = if exhausted {
                if params.gap <= 1e-9 {
                    0.0
                } else {
                    params.gap
                }
            } else {
                let lower = best_open.min(obj);
                ((obj - lower) / obj.abs().max(1.0)).max(0.0)
            };
            let status = if exhausted || gap <= params.gap + 1e-12 {
                if gap <= 1e-9 {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapLimit
                }
            } else {
                SolveStatus::IterationLimit
            };
            Solution {
                status,
                values,
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                objective: obj,
                gap,
                nodes: nodes_evaluated,
            }
        }
    };
    Ok(sol)
}

fn node_cutoff_slack(incumbent: f64, params: &SolverParams) -> f64 {
    (params.gap * incumbent.abs()).max(1e-9)
}

fn current_bounds(node: &Node, col: usize, root_lb: &f64, root_ub: &f64) -> (f64, f64) {
    for &(c, lo, hi) in node.changes.iter().rev() {
        if c == col {
            return (lo, hi);
        }
    }
    (*root_lb, *root_ub)
}

fn with_change(changes: &[(usize, f64, f64)], col: usize, lo: f64, hi: f64) -> Vec<(usize, f64, f64)> {
    let mut out = changes.to_vec();
    out.push((col, lo, hi));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_milp, LinExpr, MilpModel};

    fn params() -> SolverParams {
        SolverParams {
            gap: 0.0,
            ..SolverParams::default()
        }
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // max 3a + 4b + 5c + 6d + 7e (as min of negation) with weights
        // 2,3,4,5,6 and capacity 10.
        let profits = [3.0, 4.0, 5.0, 6.0, 7.0];
        let weights = [2.0, 3.0, 4.0, 5.0, 6.0];
        let cap = 10.0;
        let mut m = MilpModel::new("knap");
        let vars: Vec<_> = (0..5).map(|i| m.binary(&format!("b{i}")).unwrap()).collect();
        let mut e = LinExpr::new();
        for (i, &v) in vars.iter().enumerate() {
            m.obj_coef(v, -profits[i]);
            e.add(v, weights[i]);
        }
        m.le("cap", e, cap).unwrap();
        let sol = solve_milp(&m, &params(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        // Exhaustive oracle over 2^5 subsets.
        let mut best = 0.0f64;
        for mask in 0..32u32 {
            let w: f64 = (0..5)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| weights[i])
                .sum();
            if w <= cap {
                let p: f64 = (0..5)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| profits[i])
                    .sum();
                best = best.max(p);
            }
        }
        assert!((sol.objective + best).abs() < 1e-9, "{} vs {best}", sol.objective);
    }

    #[test]
    fn pure_lp_passthrough() {
        let mut m = MilpModel::new("lp");
        let x = m.continuous("x", 0.0, 5.0).unwrap();
        m.obj_coef(x, 1.0);
        m.ge("c", LinExpr::term(x, 1.0), 2.0).unwrap();
        let milp = solve_milp(&m, &params(), None).unwrap();
        let lp = crate::milp::solve_lp(&m, &params()).unwrap();
        assert_eq!(milp.status, SolveStatus::Optimal);
        assert!((milp.objective - lp.objective).abs() < 1e-12);
    }

    #[test]
    fn ten_binary_proven_within_node_budget() {
        // A 10-binary set packing; gap 0 must prove optimality and the
        // node count stays within the full-tree bound 2^11.
        let mut m = MilpModel::new("pack");
        let vars: Vec<_> = (0..10).map(|i| m.binary(&format!("b{i}")).unwrap()).collect();
        for (i, &v) in vars.iter().enumerate() {
            m.obj_coef(v, -(1.0 + (i as f64) * 0.3));
        }
        for i in 0..9 {
            let mut e = LinExpr::new();
            e.add(vars[i], 1.0).add(vars[i + 1], 1.0);
            m.le(&format!("pair{i}"), e, 1.0).unwrap();
        }
        let sol = solve_milp(&m, &params(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.nodes <= 1 << 11, "nodes = {}", sol.nodes);

        // Enumeration oracle.
        let mut best = 0.0f64;
        for mask in 0..1024u32 {
            if (0..9).any(|i| mask >> i & 1 == 1 && mask >> (i + 1) & 1 == 1) {
                continue;
            }
            let p: f64 = (0..10)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| 1.0 + (i as f64) * 0.3)
                .sum();
            best = best.max(p);
        }
        assert!((sol.objective + best).abs() < 1e-9);
    }

    #[test]
    fn infeasible_milp_reported() {
        let mut m = MilpModel::new("inf");
        let a = m.binary("a").unwrap();
        let b = m.binary("b").unwrap();
        let mut e = LinExpr::new();
        e.add(a, 1.0).add(b, 1.0);
        m.ge("c", e, 3.0).unwrap();
        let sol = solve_milp(&m, &params(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn warm_start_prunes() {
        let mut m = MilpModel::new("ws");
        let vars: Vec<_> = (0..6).map(|i| m.binary(&format!("b{i}")).unwrap()).collect();
        let mut e = LinExpr::new();
        for &v in &vars {
            m.obj_coef(v, -1.0);
            e.add(v, 1.0);
        }
        m.le("cap", e, 3.0).unwrap();
        let start = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let sol = solve_milp(&m, &params(), Some(&start)).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_across_runs() {
        let build = || {
            let mut m = MilpModel::new("det");
            let vars: Vec<_> = (0..8).map(|i| m.binary(&format!("b{i}")).unwrap()).collect();
            for (i, &v) in vars.iter().enumerate() {
                m.obj_coef(v, -((i % 3) as f64 + 0.7));
            }
            let mut e = LinExpr::new();
            for (i, &v) in vars.iter().enumerate() {
                e.add(v, (i + 1) as f64);
            }
            m.le("cap", e, 17.0).unwrap();
            m
        };
        let a = solve_milp(&build(), &params(), None).unwrap();
        let b = solve_milp(&build(), &params(), None).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.objective, b.objective);
    }
}
