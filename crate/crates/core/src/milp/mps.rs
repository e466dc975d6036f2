//! Fixed-format MPS writer and parser (IBM layout, minimization).
//!
//! Names are truncated to the 8-character fixed-format fields; collisions
//! are resolved by a deterministic renaming pass and the original-to-emitted
//! map is both returned and embedded as `*` comment lines. Value fields are
//! laid out at the fixed offsets but may overflow their 12-character width:
//! exact round-tripping of doubles takes precedence over column purity, and
//! whitespace-tokenizing readers (including ours) accept the overflow.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{MilpModel, ModelError, Sense, VarKind};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exported document plus the renames applied to fit 8-character fields.
#[derive(Debug, Clone)]
pub struct MpsDocument {
    pub text: String,
    /// (original, emitted) pairs, in emission order.
    pub renames: Vec<(String, String)>,
}

struct Renamer {
    used: HashMap<String, ()>,
    renames: Vec<(String, String)>,
    counter: usize,
    prefix: char,
}

impl Renamer {
    fn new(prefix: char) -> Self {
        Renamer {
            used: HashMap::new(),
            renames: Vec::new(),
            counter: 0,
            prefix,
        }
    }

    fn assign(&mut self, original: &str) -> String {
        let clean: String = original
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let candidate: String = clean.chars().take(8).collect();
        let name = if !candidate.is_empty() && self.used.insert(candidate.clone(), ()).is_none() {
            candidate
        } else {
            loop {
                let fresh = format!("{}{:07}", self.prefix, self.counter);
                self.counter += 1;
                if self.used.insert(fresh.clone(), ()).is_none() {
                    break fresh;
                }
            }
        };
        if name != original {
            self.renames.push((original.to_string(), name.clone()));
        }
        name
    }
}

fn field(value: f64) -> String {
    // Shortest representation that round-trips; padded toward the fixed
    // 12-char field, overflowing when exactness demands it.
    format!("{:<12}", format!("{}", value))
}

/// Serializes the model as fixed-format MPS.
pub fn export_mps(model: &MilpModel) -> MpsDocument {
    let mut rows = Renamer::new('R');
    let obj_name = rows.assign("COST");
    let row_names: Vec<String> = model.cons().iter().map(|c| rows.assign(&c.name)).collect();
    let mut cols = Renamer::new('X');
    let col_names: Vec<String> = model.vars().iter().map(|v| cols.assign(&v.name)).collect();

    let mut renames = rows.renames;
    renames.extend(cols.renames);

    let mut out = String::new();
    let model_name: String = model
        .name
        .chars()
        .filter(|c| !c.is_whitespace())
        .take(8)
        .collect();
    writeln!(out, "NAME          {}", model_name).unwrap();
    for (orig, new) in &renames {
        writeln!(out, "* RENAME {new} {orig}").unwrap();
    }
    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N  {obj_name}").unwrap();
    for (c, rn) in model.cons().iter().zip(&row_names) {
        let tag = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        writeln!(out, " {tag}  {rn}").unwrap();
    }

    // Column-major coefficient lists.
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (ci, c) in model.cons().iter().enumerate() {
        for &(v, a) in &c.terms {
            by_col[v.0].push((ci, a));
        }
    }

    writeln!(out, "COLUMNS").unwrap();
    let mut in_int_block = false;
    let mut marker_seq = 0usize;
    for (j, var) in model.vars().iter().enumerate() {
        let discrete = var.kind != VarKind::Continuous;
        if discrete && !in_int_block {
            writeln!(
                out,
                "    MARKER{:<21}'MARKER'                 'INTORG'",
                marker_seq
            )
            .unwrap();
            marker_seq += 1;
            in_int_block = true;
        } else if !discrete && in_int_block {
            writeln!(
                out,
                "    MARKER{:<21}'MARKER'                 'INTEND'",
                marker_seq
            )
            .unwrap();
            marker_seq += 1;
            in_int_block = false;
        }
        let mut entries: Vec<(&str, f64)> = Vec::new();
        let oc = model.objective()[j];
        if oc != 0.0 {
            entries.push((obj_name.as_str(), oc));
        }
        for &(ci, a) in &by_col[j] {
            entries.push((row_names[ci].as_str(), a));
        }
        if entries.is_empty() {
            // Column must still exist; emit a zero objective entry.
            entries.push((obj_name.as_str(), 0.0));
        }
        for pair in entries.chunks(2) {
            let mut line = format!(
                "    {:<8}  {:<8}  {}",
                col_names[j],
                pair[0].0,
                field(pair[0].1)
            );
            if let Some((rn, a)) = pair.get(1) {
                line = format!("{line}   {:<8}  {}", rn, field(*a));
            }
            writeln!(out, "{}", line.trim_end()).unwrap();
        }
    }
    if in_int_block {
        writeln!(
            out,
            "    MARKER{:<21}'MARKER'                 'INTEND'",
            marker_seq
        )
        .unwrap();
    }

    writeln!(out, "RHS").unwrap();
    if model.obj_offset != 0.0 {
        // IBM convention: the objective row's RHS stores the negated offset.
        writeln!(
            out,
            "    RHS       {:<8}  {}",
            obj_name,
            field(-model.obj_offset).trim_end()
        )
        .unwrap();
    }
    for (c, rn) in model.cons().iter().zip(&row_names) {
        if c.rhs != 0.0 {
            writeln!(out, "    RHS       {:<8}  {}", rn, field(c.rhs).trim_end()).unwrap();
        }
    }

    writeln!(out, "BOUNDS").unwrap();
    for (j, var) in model.vars().iter().enumerate() {
        let name = &col_names[j];
        match var.kind {
            VarKind::Binary => {
                writeln!(out, " BV BND       {:<8}", name).unwrap();
            }
            _ => {
                let (lb, ub) = (var.lb, var.ub);
                if lb == ub {
                    writeln!(out, " FX BND       {:<8}  {}", name, field(lb).trim_end()).unwrap();
                } else if lb.is_infinite() && ub.is_infinite() {
                    writeln!(out, " FR BND       {:<8}", name).unwrap();
                } else {
                    if lb.is_infinite() {
                        writeln!(out, " MI BND       {:<8}", name).unwrap();
                    } else if lb != 0.0 || var.kind == VarKind::Integer {
                        writeln!(out, " LO BND       {:<8}  {}", name, field(lb).trim_end())
                            .unwrap();
                    }
                    if ub.is_finite() {
                        writeln!(out, " UP BND       {:<8}  {}", name, field(ub).trim_end())
                            .unwrap();
                    }
                }
            }
        }
    }
    writeln!(out, "ENDATA").unwrap();

    MpsDocument { text: out, renames }
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    Done,
}

/// Parses fixed-format MPS back into a model (whitespace-tokenizing).
pub fn parse_mps(text: &str) -> Result<MilpModel, MpsError> {
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_sense: HashMap<String, Sense> = HashMap::new();
    let mut row_order: Vec<String> = Vec::new();
    let mut col_index: HashMap<String, super::VarId> = HashMap::new();
    let mut row_terms: HashMap<String, Vec<(super::VarId, f64)>> = HashMap::new();
    let mut row_rhs: HashMap<String, f64> = HashMap::new();
    let mut integer_mode = false;
    let mut saw_endata = false;
    let mut bound_edits: Vec<(super::VarId, String, f64, usize)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let is_header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if is_header {
            let mut it = raw.split_whitespace();
            let head = it.next().unwrap_or("");
            section = match head {
                "NAME" => {
                    model.name = it.next().unwrap_or("").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    saw_endata = true;
                    Section::Done
                }
                other => {
                    return Err(MpsError::Parse {
                        line,
                        msg: format!("unknown section `{other}`"),
                    })
                }
            };
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(MpsError::Parse {
                        line,
                        msg: "ROWS entries need a type and a name".into(),
                    });
                }
                match toks[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(toks[1].to_string());
                        }
                    }
                    "L" | "G" | "E" => {
                        let sense = match toks[0] {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            _ => Sense::Eq,
                        };
                        row_sense.insert(toks[1].to_string(), sense);
                        row_terms.insert(toks[1].to_string(), Vec::new());
                        row_order.push(toks[1].to_string());
                    }
                    t => {
                        return Err(MpsError::Parse {
                            line,
                            msg: format!("unknown row type `{t}`"),
                        })
                    }
                }
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match *toks.last().unwrap() {
                        "'INTORG'" => integer_mode = true,
                        "'INTEND'" => integer_mode = false,
                        m => {
                            return Err(MpsError::Parse {
                                line,
                                msg: format!("unknown marker `{m}`"),
                            })
                        }
                    }
                    continue;
                }
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(MpsError::Parse {
                        line,
                        msg: "COLUMNS entries come as name then row/value pairs".into(),
                    });
                }
                let cname = toks[0];
                let var = match col_index.get(cname) {
                    Some(&v) => v,
                    None => {
                        let kind = if integer_mode {
                            VarKind::Integer
                        } else {
                            VarKind::Continuous
                        };
                        let v = model.add_var(cname, kind, 0.0, f64::INFINITY)?;
                        col_index.insert(cname.to_string(), v);
                        v
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let rname = pair[0];
                    let value: f64 = pair[1].parse().map_err(|_| MpsError::Parse {
                        line,
                        msg: format!("bad value `{}`", pair[1]),
                    })?;
                    if Some(rname) == obj_row.as_deref() {
                        model.obj_coef(var, value);
                    } else if let Some(terms) = row_terms.get_mut(rname) {
                        terms.push((var, value));
                    } else {
                        return Err(MpsError::Parse {
                            line,
                            msg: format!("unknown row `{rname}`"),
                        });
                    }
                }
            }
            Section::Rhs => {
                if toks.len() < 3 {
                    return Err(MpsError::Parse {
                        line,
                        msg: "RHS entries come as a set name then row/value pairs".into(),
                    });
                }
                for pair in toks[1..].chunks(2) {
                    if pair.len() != 2 {
                        return Err(MpsError::Parse {
                            line,
                            msg: "dangling RHS entry".into(),
                        });
                    }
                    let value: f64 = pair[1].parse().map_err(|_| MpsError::Parse {
                        line,
                        msg: format!("bad value `{}`", pair[1]),
                    })?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.obj_offset = -value;
                    } else if row_sense.contains_key(pair[0]) {
                        row_rhs.insert(pair[0].to_string(), value);
                    } else {
                        return Err(MpsError::Parse {
                            line,
                            msg: format!("RHS for unknown row `{}`", pair[0]),
                        });
                    }
                }
            }
            Section::Ranges => {
                return Err(MpsError::Parse {
                    line,
                    msg: "RANGES rows are not supported; split into Le/Ge pairs".into(),
                });
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(MpsError::Parse {
                        line,
                        msg: "BOUNDS entries need type, set, column".into(),
                    });
                }
                let var = *col_index.get(toks[2]).ok_or_else(|| MpsError::Parse {
                    line,
                    msg: format!("bound for unknown column `{}`", toks[2]),
                })?;
                let value = if toks.len() > 3 {
                    toks[3].parse().map_err(|_| MpsError::Parse {
                        line,
                        msg: format!("bad value `{}`", toks[3]),
                    })?
                } else {
                    0.0
                };
                bound_edits.push((var, toks[0].to_string(), value, line));
            }
            Section::None | Section::Done => {
                return Err(MpsError::Parse {
                    line,
                    msg: "data outside any section".into(),
                });
            }
        }
    }
    if !saw_endata {
        return Err(MpsError::MissingSection("ENDATA"));
    }
    if obj_row.is_none() {
        return Err(MpsError::MissingSection("objective (N) row"));
    }

    for name in row_order {
        let sense = row_sense[&name];
        let terms = row_terms.remove(&name).unwrap_or_default();
        let rhs = row_rhs.get(&name).copied().unwrap_or(0.0);
        let mut expr = super::LinExpr::new();
        for (v, a) in terms {
            expr.add(v, a);
        }
        model.add_con(&name, expr, sense, rhs)?;
    }

    for (var, kind, value, line) in bound_edits {
        let (mut lb, mut ub) = (model.var(var).lb, model.var(var).ub);
        match kind.as_str() {
            "UP" => ub = value,
            "LO" => lb = value,
            "FX" => {
                lb = value;
                ub = value;
            }
            "FR" => {
                lb = f64::NEG_INFINITY;
                ub = f64::INFINITY;
            }
            "MI" => lb = f64::NEG_INFINITY,
            "PL" => ub = f64::INFINITY,
            "BV" => {
                model.set_var_kind(var, VarKind::Binary);
                model.set_bounds(var, 0.0, 1.0);
                continue;
            }
            other => {
                return Err(MpsError::Parse {
                    line,
                    msg: format!("unknown bound type `{other}`"),
                })
            }
        }
        model.set_bounds(var, lb, ub);
    }

    Ok(model)
}
