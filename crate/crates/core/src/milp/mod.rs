//! Language-neutral LP/MILP container with an embedded simplex and
//! branch-and-bound solver, big-M linearization helpers and MPS export.
//!
//! The container is deliberately plain: variables with bounds and a kind,
//! sparse linear constraints with a sense, a linear minimization objective.
//! Everything downstream (market clearings, KKT systems, partitioning
//! blocks, Benders masters) is emitted into this one structure.

mod bb;
pub mod mps;
mod presolve;
mod simplex;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

/// Handle to a declared constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConId(pub(crate) usize);

impl VarId {
    pub fn index(&self) -> usize {
        self.0
    }
}

impl ConId {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// Sparse coefficient list; at most one entry per variable.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Sparse linear expression builder. Duplicate variables are merged.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        let mut e = Self::default();
        e.add(var, coef);
        e
    }

    pub fn add(&mut self, var: VarId, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }

    pub fn add_const(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    /// Collapse duplicate variables, dropping exact zeros.
    fn normalized(mut self) -> Vec<(VarId, f64)> {
        self.terms.sort_by_key(|(v, _)| *v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        out
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(v, c)| c * values[v.0])
                .sum::<f64>()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("variable `{name}` has inconsistent bounds [{lb}, {ub}]")]
    BadBounds { name: String, lb: f64, ub: f64 },
    #[error("binary variable `{0}` must be bounded within [0, 1]")]
    BadBinaryBounds(String),
    #[error("variable `{name}` must have finite bounds for {ctx}")]
    UnboundedOperand { name: String, ctx: String },
    #[error("negative big-M bound {value} for `{name}`")]
    NegativeBound { name: String, value: f64 },
    #[error("expected a {expected} variable, got `{name}`")]
    WrongKind { expected: String, name: String },
    #[error("model has discrete variables; relax them or call solve_milp")]
    DiscreteInLp,
    #[error("simplex failed: {0}")]
    Numerical(String),
}

/// Mixed-integer linear model, minimization only.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    pub name: String,
    vars: Vec<Variable>,
    cons: Vec<Constraint>,
    obj: Vec<f64>,
    pub obj_offset: f64,
    names: HashMap<String, ()>,
}

impl MilpModel {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn num_discrete(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind != VarKind::Continuous)
            .count()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn cons(&self) -> &[Constraint] {
        &self.cons
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn con(&self, id: ConId) -> &Constraint {
        &self.cons[id.0]
    }

    pub fn objective(&self) -> &[f64] {
        &self.obj
    }

    fn claim_name(&mut self, name: &str) -> Result<(), ModelError> {
        if self.names.insert(name.to_string(), ()).is_some() {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn add_var(
        &mut self,
        name: &str,
        kind: VarKind,
        lb: f64,
        ub: f64,
    ) -> Result<VarId, ModelError> {
        if lb > ub || lb.is_nan() || ub.is_nan() {
            return Err(ModelError::BadBounds {
                name: name.to_string(),
                lb,
                ub,
            });
        }
        if kind == VarKind::Binary && (lb < 0.0 || ub > 1.0) {
            return Err(ModelError::BadBinaryBounds(name.to_string()));
        }
        self.claim_name(name)?;
        self.vars.push(Variable {
            name: name.to_string(),
            kind,
            lb,
            ub,
        });
        self.obj.push(0.0);
        Ok(VarId(self.vars.len() - 1))
    }

    pub fn continuous(&mut self, name: &str, lb: f64, ub: f64) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Continuous, lb, ub)
    }

    pub fn binary(&mut self, name: &str) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn integer(&mut self, name: &str, lb: f64, ub: f64) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Integer, lb, ub)
    }

    /// Adds `expr sense rhs`; the expression's constant folds into the rhs.
    pub fn add_con(
        &mut self,
        name: &str,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConId, ModelError> {
        self.claim_name(name)?;
        let adj = rhs - expr.constant;
        self.cons.push(Constraint {
            name: name.to_string(),
            terms: expr.normalized(),
            sense,
            rhs: adj,
        });
        Ok(ConId(self.cons.len() - 1))
    }

    pub fn le(&mut self, name: &str, expr: LinExpr, rhs: f64) -> Result<ConId, ModelError> {
        self.add_con(name, expr, Sense::Le, rhs)
    }

    pub fn ge(&mut self, name: &str, expr: LinExpr, rhs: f64) -> Result<ConId, ModelError> {
        self.add_con(name, expr, Sense::Ge, rhs)
    }

    pub fn eq(&mut self, name: &str, expr: LinExpr, rhs: f64) -> Result<ConId, ModelError> {
        self.add_con(name, expr, Sense::Eq, rhs)
    }

    /// Adds to the variable's objective coefficient.
    pub fn obj_coef(&mut self, var: VarId, coef: f64) {
        self.obj[var.0] += coef;
    }

    pub fn set_bounds(&mut self, var: VarId, lb: f64, ub: f64) {
        self.vars[var.0].lb = lb;
        self.vars[var.0].ub = ub;
    }

    pub fn set_var_kind(&mut self, var: VarId, kind: VarKind) {
        self.vars[var.0].kind = kind;
    }

    /// Objective value of a point, offset included.
    pub fn eval_objective(&self, values: &[f64]) -> f64 {
        self.obj_offset
            + self
                .obj
                .iter()
                .zip(values)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    /// Largest bound or constraint violation of a point.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lb - x).max(x - v.ub);
            if v.kind != VarKind::Continuous {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.cons {
            let act: f64 = c.terms.iter().map(|(v, k)| k * values[v.0]).sum();
            match c.sense {
                Sense::Le => worst = worst.max(act - c.rhs),
                Sense::Ge => worst = worst.max(c.rhs - act),
                Sense::Eq => worst = worst.max((act - c.rhs).abs()),
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped once the requested relative gap was proven.
    GapLimit,
    /// Node or iteration budget exhausted; best incumbent reported.
    IterationLimit,
}

impl SolveStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::IterationLimit => "iteration_limit",
        };
        write!(f, "{s}")
    }
}

/// Result of an LP or MILP solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Primal values per variable (empty unless an incumbent exists).
    pub values: Vec<f64>,
    /// Constraint duals, `d(objective)/d(rhs)` convention (LP only).
    pub duals: Vec<f64>,
    /// Reduced costs per variable (LP only).
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// Proven relative MIP gap (0 for LPs).
    pub gap: f64,
    /// Branch-and-bound nodes evaluated (0 for LPs).
    pub nodes: u64,
}

impl Solution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn dual(&self, con: ConId) -> f64 {
        self.duals[con.0]
    }

    fn empty(status: SolveStatus) -> Self {
        Solution {
            status,
            values: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            gap: f64::INFINITY,
            nodes: 0,
        }
    }
}

/// Solver knobs; everything has a desk-scale default.
#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Relative MIP gap target.
    pub gap: f64,
    /// Absolute primal feasibility tolerance on scaled data.
    pub tol_feas: f64,
    /// Integrality tolerance.
    pub tol_int: f64,
    pub node_limit: u64,
    /// Simplex iteration limit per LP solve.
    pub iter_limit: u64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_threshold: u64,
    /// Fallback dual bound for complementarity big-Ms.
    pub big_m_dual: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            gap: 1e-4,
            tol_feas: 1e-6,
            tol_int: 1e-6,
            node_limit: 200_000,
            iter_limit: 2_000_000,
            bland_threshold: 500,
            big_m_dual: 1e4,
        }
    }
}

/// Solves a pure LP; errors if the model declares discrete variables.
pub fn solve_lp(model: &MilpModel, params: &SolverParams) -> Result<Solution, ModelError> {
    if model.num_discrete() > 0 {
        return Err(ModelError::DiscreteInLp);
    }
    solve_lp_relaxation(model, params)
}

/// Solves the LP relaxation regardless of variable kinds.
pub fn solve_lp_relaxation(
    model: &MilpModel,
    params: &SolverParams,
) -> Result<Solution, ModelError> {
    let mut spx = simplex::Simplex::new(model, params);
    spx.solve_from_scratch()
}

/// Branch-and-bound solve. `warm_start` seeds the incumbent when it is
/// feasible for the model within `tol_feas`.
pub fn solve_milp(
    model: &MilpModel,
    params: &SolverParams,
    warm_start: Option<&[f64]>,
) -> Result<Solution, ModelError> {
    bb::branch_and_bound(model, params, warm_start)
}

/// Big-M product linearization bookkeeping (aux = bin * int).
#[derive(Debug, Clone)]
pub struct LinearizationHandle {
    pub aux: VarId,
    pub bin: VarId,
    pub operand: VarId,
    pub m_lo: f64,
    pub m_hi: f64,
    pub rows: [ConId; 4],
}

/// Adds `aux = b * y` for binary `b` and bounded integer `y in [m, M]`.
///
/// Emits `y - M(1-b) <= aux <= y - m(1-b)` and `m b <= aux <= M b`; at
/// integral points the auxiliary is pinned to the product exactly.
pub fn linearize_bin_int_product(
    model: &mut MilpModel,
    tag: &str,
    b: VarId,
    y: VarId,
) -> Result<LinearizationHandle, ModelError> {
    if model.var(b).kind != VarKind::Binary {
        return Err(ModelError::WrongKind {
            expected: "binary".into(),
            name: model.var(b).name.clone(),
        });
    }
    let (m, big) = (model.var(y).lb, model.var(y).ub);
    if !m.is_finite() || !big.is_finite() {
        return Err(ModelError::UnboundedOperand {
            name: model.var(y).name.clone(),
            ctx: "product linearization".into(),
        });
    }
    let aux = model.continuous(&format!("{tag}_u"), m.min(0.0), big.max(0.0))?;

    // aux >= y - M(1-b)
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(y, -1.0).add(b, -big);
    let r1 = model.ge(&format!("{tag}_lo"), e, -big)?;
    // aux <= y - m(1-b)
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(y, -1.0).add(b, -m);
    let r2 = model.le(&format!("{tag}_hi"), e, -m)?;
    // aux >= m b
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(b, -m);
    let r3 = model.ge(&format!("{tag}_bl"), e, 0.0)?;
    // aux <= M b
    let mut e = LinExpr::new();
    e.add(aux, 1.0).add(b, -big);
    let r4 = model.le(&format!("{tag}_bu"), e, 0.0)?;

    Ok(LinearizationHandle {
        aux,
        bin: b,
        operand: y,
        m_lo: m,
        m_hi: big,
        rows: [r1, r2, r3, r4],
    })
}

/// One linearized complementarity pair `g <= 0`, `mu >= 0`, `g * mu = 0`.
#[derive(Debug, Clone)]
pub struct ComplHandle {
    pub name: String,
    pub bin: VarId,
    /// Slack expression `g` (terms plus constant), enforced `<= 0`.
    pub slack: LinExpr,
    pub dual: VarId,
    pub g_max: f64,
    pub u_max: f64,
    pub primal_row: ConId,
    pub bigm_rows: [ConId; 2],
}

/// Emits `g <= 0`, `g >= -G(1-b)`, `mu <= U b` with a fresh binary `b`.
///
/// The dual variable must be declared nonnegative by the caller; its upper
/// bound is tightened to `u_max` here.
pub fn linearize_complementarity(
    model: &mut MilpModel,
    name: &str,
    slack: LinExpr,
    g_max: f64,
    dual: VarId,
    u_max: f64,
) -> Result<ComplHandle, ModelError> {
    if g_max < 0.0 {
        return Err(ModelError::NegativeBound {
            name: format!("{name} (primal)"),
            value: g_max,
        });
    }
    if u_max < 0.0 {
        return Err(ModelError::NegativeBound {
            name: format!("{name} (dual)"),
            value: u_max,
        });
    }
    if model.var(dual).lb < 0.0 {
        return Err(ModelError::WrongKind {
            expected: "nonnegative dual".into(),
            name: model.var(dual).name.clone(),
        });
    }
    model.set_bounds(dual, 0.0, u_max);

    let primal_row = model.le(&format!("{name}_pr"), slack.clone(), 0.0)?;
    let b = model.binary(&format!("{name}_b"))?;

    // g >= -G_max (1 - b)
    let mut lo = slack.clone();
    lo.add(b, -g_max);
    let r_lo = model.ge(&format!("{name}_lo"), lo, -g_max)?;
    // mu <= U_max b
    let mut du = LinExpr::term(dual, 1.0);
    du.add(b, -u_max);
    let r_du = model.le(&format!("{name}_du"), du, 0.0)?;

    Ok(ComplHandle {
        name: name.to_string(),
        bin: b,
        slack,
        dual,
        g_max,
        u_max,
        primal_row,
        bigm_rows: [r_lo, r_du],
    })
}

/// One audited complementarity pair.
#[derive(Debug, Clone)]
pub struct BigMFinding {
    pub handle: String,
    pub binary_value: f64,
    pub slack_value: f64,
    pub dual_value: f64,
    /// True when either artificial bound is active within tolerance:
    /// the reformulation may have cut the true KKT point.
    pub binding: bool,
}

#[derive(Debug, Clone, Default)]
pub struct BigMAudit {
    pub findings: Vec<BigMFinding>,
}

impl BigMAudit {
    pub fn is_clean(&self) -> bool {
        self.findings.iter().all(|f| !f.binding)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &BigMFinding> {
        self.findings.iter().filter(|f| f.binding)
    }
}

/// Checks every complementarity handle for an active big-M bound.
///
/// A slack resting on `-G_max` or a dual resting on `U_max` means the
/// artificial bound shaped the solution; such solves cannot be trusted.
pub fn audit_bigm(model: &MilpModel, solution: &Solution, handles: &[ComplHandle]) -> BigMAudit {
    let tol = 1e-6;
    let mut audit = BigMAudit::default();
    for h in handles {
        let b = solution.value(h.bin);
        let g = h.slack.eval(&solution.values);
        let mu = solution.value(h.dual);
        let binding = if b < 0.5 {
            h.g_max > 0.0 && (g + h.g_max).abs() <= tol
        } else {
            h.u_max > 0.0 && (h.u_max - mu).abs() <= tol
        };
        audit.findings.push(BigMFinding {
            handle: h.name.clone(),
            binary_value: b,
            slack_value: g,
            dual_value: mu,
            binding,
        });
    }
    let _ = model;
    audit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut m = MilpModel::new("t");
        m.continuous("x", 0.0, 1.0).unwrap();
        assert!(matches!(
            m.continuous("x", 0.0, 1.0),
            Err(ModelError::DuplicateName(_))
        ));
    }

    #[test]
    fn expr_merges_duplicates() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 10.0).unwrap();
        let mut e = LinExpr::new();
        e.add(x, 1.0).add(x, 2.0);
        let c = m.le("c", e, 5.0).unwrap();
        assert_eq!(m.con(c).terms, vec![(x, 3.0)]);
    }

    #[test]
    fn constant_folds_into_rhs() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 10.0).unwrap();
        let mut e = LinExpr::term(x, 1.0);
        e.add_const(2.0);
        let c = m.le("c", e, 5.0).unwrap();
        assert_eq!(m.con(c).rhs, 3.0);
    }

    #[test]
    fn product_linearization_rejects_unbounded() {
        let mut m = MilpModel::new("t");
        let b = m.binary("b").unwrap();
        let y = m.integer("y", 1.0, f64::INFINITY).unwrap();
        assert!(matches!(
            linearize_bin_int_product(&mut m, "p", b, y),
            Err(ModelError::UnboundedOperand { .. })
        ));
    }

    #[test]
    fn complementarity_rejects_negative_bounds() {
        let mut m = MilpModel::new("t");
        let g = m.continuous("g", -5.0, 0.0).unwrap();
        let mu = m.continuous("mu", 0.0, f64::INFINITY).unwrap();
        let e = LinExpr::term(g, 1.0);
        assert!(matches!(
            linearize_complementarity(&mut m, "c", e, -1.0, mu, 10.0),
            Err(ModelError::NegativeBound { .. })
        ));
    }
}
