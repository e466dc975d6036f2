//! Bound-tightening presolve for branch-and-bound roots.
//!
//! Iterated min/max-activity propagation: tightens variable bounds implied
//! by each row, rounds integer bounds, marks rows that can never bind, and
//! fixes columns that no longer appear in any live row. Only bound logic is
//! used, so every feasible point of the original model survives.

use super::{MilpModel, Sense, VarKind};

const TOL: f64 = 1e-9;
const MAX_ROUNDS: usize = 25;

#[derive(Debug)]
pub(crate) struct Presolved {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub skip_row: Vec<bool>,
    pub infeasible: bool,
}

struct Activity {
    min: f64,
    max: f64,
    /// Count of -inf contributions to min / +inf to max.
    inf_min: usize,
    inf_max: usize,
}

fn row_activity(terms: &[(super::VarId, f64)], lb: &[f64], ub: &[f64]) -> Activity {
    let mut act = Activity {
        min: 0.0,
        max: 0.0,
        inf_min: 0,
        inf_max: 0,
    };
    for &(v, a) in terms {
        let (lo, hi) = if a >= 0.0 {
            (a * lb[v.0], a * ub[v.0])
        } else {
            (a * ub[v.0], a * lb[v.0])
        };
        if lo.is_finite() {
            act.min += lo;
        } else {
            act.inf_min += 1;
        }
        if hi.is_finite() {
            act.max += hi;
        } else {
            act.inf_max += 1;
        }
    }
    act
}

pub(crate) fn presolve(model: &MilpModel) -> Presolved {
    let n = model.num_vars();
    let mut lb: Vec<f64> = model.vars().iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = model.vars().iter().map(|v| v.ub).collect();
    let mut skip_row = vec![false; model.num_cons()];

    for _ in 0..MAX_ROUNDS {
        let mut changed = false;
        for (ci, con) in model.cons().iter().enumerate() {
            if skip_row[ci] {
                continue;
            }
            let act = row_activity(&con.terms, &lb, &ub);
            let min_act = if act.inf_min > 0 {
                f64::NEG_INFINITY
            } else {
                act.min
            };
            let max_act = if act.inf_max > 0 {
                f64::INFINITY
            } else {
                act.max
            };

            // Infeasibility and redundancy by activity range.
            match con.sense {
                Sense::Le => {
                    if min_act > con.rhs + 1e-7 {
                        return Presolved {
                            lb,
                            ub,
                            skip_row,
                            infeasible: true,
                        };
                    }
                    if max_act <= con.rhs + TOL {
                        skip_row[ci] = true;
                        changed = true;
                        continue;
                    }
                }
                Sense::Ge => {
                    if max_act < con.rhs - 1e-7 {
                        return Presolved {
                            lb,
                            ub,
                            skip_row,
                            infeasible: true,
                        };
                    }
                    if min_act >= con.rhs - TOL {
                        skip_row[ci] = true;
                        changed = true;
                        continue;
                    }
                }
                Sense::Eq => {
                    if min_act > con.rhs + 1e-7 || max_act < con.rhs - 1e-7 {
                        return Presolved {
                            lb,
                            ub,
                            skip_row,
                            infeasible: true,
                        };
                    }
                }
            }

            // Per-variable tightening from the residual activity.
            for &(v, a) in &con.terms {
                if a.abs() < 1e-12 {
                    continue;
                }
                let j = v.0;
                let (c_min, c_max) = if a >= 0.0 {
                    (a * lb[j], a * ub[j])
                } else {
                    (a * ub[j], a * lb[j])
                };
                // Residual min activity of the other terms.
                let res_min = if act.inf_min == 0 {
                    Some(act.min - if c_min.is_finite() { c_min } else { 0.0 })
                } else if act.inf_min == 1 && !c_min.is_finite() {
                    Some(act.min)
                } else {
                    None
                };
                let res_max = if act.inf_max == 0 {
                    Some(act.max - if c_max.is_finite() { c_max } else { 0.0 })
                } else if act.inf_max == 1 && !c_max.is_finite() {
                    Some(act.max)
                } else {
                    None
                };

                // a*x <= rhs - res_min  (for Le/Eq rows)
                if matches!(con.sense, Sense::Le | Sense::Eq) {
                    if let Some(res) = res_min {
                        let limit = con.rhs - res;
                        if a > 0.0 {
                            let new_ub = limit / a;
                            if new_ub < ub[j] - 1e-9 {
                                ub[j] = round_bound(model, j, new_ub, false);
                                changed = true;
                            }
                        } else {
                            let new_lb = limit / a;
                            if new_lb > lb[j] + 1e-9 {
                                lb[j] = round_bound(model, j, new_lb, true);
                                changed = true;
                            }
                        }
                    }
                }
                // a*x >= rhs - res_max  (for Ge/Eq rows)
                if matches!(con.sense, Sense::Ge | Sense::Eq) {
                    if let Some(res) = res_max {
                        let limit = con.rhs - res;
                        if a > 0.0 {
                            let new_lb = limit / a;
                            if new_lb > lb[j] + 1e-9 {
                                lb[j] = round_bound(model, j, new_lb, true);
                                changed = true;
                            }
                        } else {
                            let new_ub = limit / a;
                            if new_ub < ub[j] - 1e-9 {
                                ub[j] = round_bound(model, j, new_ub, false);
                                changed = true;
                            }
                        }
                    }
                }
                if lb[j] > ub[j] + 1e-7 {
                    return Presolved {
                        lb,
                        ub,
                        skip_row,
                        infeasible: true,
                    };
                }
                // Clamp tiny crossings from tolerance slack.
                if lb[j] > ub[j] {
                    lb[j] = ub[j];
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Columns absent from every live row: pin them to the bound the
    // objective prefers so they stop generating branching noise.
    let mut appears = vec![false; n];
    for (ci, con) in model.cons().iter().enumerate() {
        if skip_row[ci] {
            continue;
        }
        for &(v, _) in &con.terms {
            appears[v.0] = true;
        }
    }
    for j in 0..n {
        if appears[j] || lb[j] == ub[j] {
            continue;
        }
        let c = model.objective()[j];
        let pick = if c > 0.0 {
            lb[j]
        } else if c < 0.0 {
            ub[j]
        } else {
            lb[j]
        };
        if pick.is_finite() {
            lb[j] = pick;
            ub[j] = pick;
        }
    }

    Presolved {
        lb,
        ub,
        skip_row,
        infeasible: false,
    }
}

fn round_bound(model: &MilpModel, j: usize, value: f64, is_lower: bool) -> f64 {
    if model.vars()[j].kind == VarKind::Continuous {
        value
    } else if is_lower {
        (value - 1e-6).ceil()
    } else {
        (value + 1e-6).floor()
    }
}
