//! Free-format MPS parsing and a thin HiGHS front end.
//!
//! The binary in this crate reads one MPS file, solves it with HiGHS, and
//! writes a plain-text solution file: an objective line (prefixed with a
//! status word unless the solve was clean), then one `name value` line per
//! column.  It exists so the solver bridge has a working default backend
//! out of the box; any other MILP solver with an MPS reader can be
//! substituted through the same file contract.
//!
//! Supported MPS subset: `NAME`, `OBJSENSE` (`MIN`/`MAX`), `ROWS`,
//! `COLUMNS` with `INTORG`/`INTEND` markers, `RHS` (including an objective
//! constant), `BOUNDS` (`UP LO BV FX MI FR PL UI LI`), `ENDATA`, and `*`
//! comments.  `RANGES` is rejected.  Defaults follow the common modern
//! convention: continuous and integer columns both start at `[0, +inf)`,
//! and the first `N` row is the objective.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Bound;

/// Constraint-row comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct MpsRow {
    pub name: String,
    pub kind: RowKind,
    pub rhs: f64,
    /// (column index, coefficient), accumulated in file order.
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct MpsColumn {
    pub name: String,
    pub integer: bool,
    pub objective: f64,
    pub lower: f64,
    pub upper: f64,
}

/// A parsed problem, still in file terms.
#[derive(Debug, Clone)]
pub struct MpsProblem {
    pub name: String,
    pub maximize: bool,
    /// Constant added to the objective (from an RHS entry on the N row,
    /// which by convention carries the negated constant).
    pub objective_constant: f64,
    pub rows: Vec<MpsRow>,
    pub columns: Vec<MpsColumn>,
}

#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    Done,
}

/// Parses free-format MPS text.
///
/// Section headers start in the first byte of the line; data lines are
/// indented — the convention every MPS writer follows and the only
/// reliable way to tell a section keyword from a row of the same name.
pub fn parse_mps(text: &str) -> Result<MpsProblem, ParseError> {
    let mut problem = MpsProblem {
        name: String::new(),
        maximize: false,
        objective_constant: 0.0,
        rows: Vec::new(),
        columns: Vec::new(),
    };
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut column_index: HashMap<String, usize> = HashMap::new();
    let mut section = Section::None;
    let mut integer_mode = false;

    for (number, raw) in text.lines().enumerate() {
        let number = number + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        let tokens: Vec<&str> = raw.split_whitespace().collect();

        if !indented {
            match tokens[0].to_ascii_uppercase().as_str() {
                "NAME" => {
                    problem.name = tokens.get(1).unwrap_or(&"").to_string();
                    continue;
                }
                "OBJSENSE" => {
                    section = Section::ObjSense;
                    if let Some(&value) = tokens.get(1) {
                        problem.maximize = parse_objsense(value, number)?;
                        section = Section::None;
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "RANGES" => {
                    section = Section::Ranges;
                    continue;
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(err(number, format!("unknown section {other:?}"))),
            }
        }

        match section {
            Section::None => return Err(err(number, "data line before any section")),
            Section::Done => unreachable!("loop breaks on ENDATA"),
            Section::ObjSense => {
                problem.maximize = parse_objsense(tokens[0], number)?;
                section = Section::None;
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(err(number, "ROWS lines are `<type> <name>`"));
                }
                let name = tokens[1].to_string();
                match tokens[0].to_ascii_uppercase().as_str() {
                    "N" => {
                        // First N row is the objective; later ones are
                        // ignored free rows.
                        if objective_row.is_none() {
                            objective_row = Some(name);
                        }
                    }
                    kind => {
                        let kind = match kind {
                            "L" => RowKind::Le,
                            "G" => RowKind::Ge,
                            "E" => RowKind::Eq,
                            other => {
                                return Err(err(number, format!("unknown row type {other:?}")))
                            }
                        };
                        if row_index.contains_key(&name) {
                            return Err(err(number, format!("duplicate row {name:?}")));
                        }
                        row_index.insert(name.clone(), problem.rows.len());
                        problem.rows.push(MpsRow { name, kind, rhs: 0.0, terms: Vec::new() });
                    }
                }
            }
            Section::Columns => {
                // Marker lines toggle integrality for subsequent columns.
                if tokens.iter().any(|t| t.trim_matches('\'') == "MARKER") {
                    let last = tokens.last().unwrap().trim_matches('\'');
                    match last {
                        "INTORG" => integer_mode = true,
                        "INTEND" => integer_mode = false,
                        other => return Err(err(number, format!("unknown marker {other:?}"))),
                    }
                    continue;
                }
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(err(number, "COLUMNS lines are `<col> (<row> <value>)+`"));
                }
                let column = *column_index.entry(tokens[0].to_string()).or_insert_with(|| {
                    problem.columns.push(MpsColumn {
                        name: tokens[0].to_string(),
                        integer: integer_mode,
                        objective: 0.0,
                        lower: 0.0,
                        upper: f64::INFINITY,
                    });
                    problem.columns.len() - 1
                });
                for pair in tokens[1..].chunks(2) {
                    let value = parse_number(pair[1], number)?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        problem.columns[column].objective += value;
                    } else if let Some(&row) = row_index.get(pair[0]) {
                        problem.rows[row].terms.push((column, value));
                    } else {
                        return Err(err(number, format!("unknown row {:?}", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(err(number, "RHS lines are `<set> (<row> <value>)+`"));
                }
                for pair in tokens[1..].chunks(2) {
                    let value = parse_number(pair[1], number)?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        problem.objective_constant = -value;
                    } else if let Some(&row) = row_index.get(pair[0]) {
                        problem.rows[row].rhs = value;
                    } else {
                        return Err(err(number, format!("unknown row {:?}", pair[0])));
                    }
                }
            }
            Section::Ranges => {
                return Err(err(number, "RANGES is not supported"));
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err(number, "BOUNDS lines are `<type> <set> <col> [<value>]`"));
                }
                let Some(&column) = column_index.get(tokens[2]) else {
                    return Err(err(number, format!("unknown column {:?}", tokens[2])));
                };
                let column = &mut problem.columns[column];
                let bound_value = || -> Result<f64, ParseError> {
                    tokens
                        .get(3)
                        .ok_or_else(|| err(number, "missing bound value"))
                        .and_then(|t| parse_number(t, number))
                };
                match tokens[0].to_ascii_uppercase().as_str() {
                    "UP" => column.upper = bound_value()?,
                    "LO" => column.lower = bound_value()?,
                    "FX" => {
                        let v = bound_value()?;
                        column.lower = v;
                        column.upper = v;
                    }
                    "BV" => {
                        column.integer = true;
                        column.lower = 0.0;
                        column.upper = 1.0;
                    }
                    "MI" => column.lower = f64::NEG_INFINITY,
                    "PL" => column.upper = f64::INFINITY,
                    "FR" => {
                        column.lower = f64::NEG_INFINITY;
                        column.upper = f64::INFINITY;
                    }
                    "UI" => {
                        column.integer = true;
                        column.upper = bound_value()?;
                    }
                    "LI" => {
                        column.integer = true;
                        column.lower = bound_value()?;
                    }
                    other => return Err(err(number, format!("unknown bound type {other:?}"))),
                }
            }
        }
    }

    if section != Section::Done {
        return Err(err(text.lines().count(), "missing ENDATA"));
    }
    Ok(problem)
}

fn parse_objsense(token: &str, line: usize) -> Result<bool, ParseError> {
    match token.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" | "MAXIMISE" => Ok(true),
        "MIN" | "MINIMIZE" | "MINIMISE" => Ok(false),
        other => Err(err(line, format!("unknown objective sense {other:?}"))),
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64, ParseError> {
    token.parse::<f64>().map_err(|_| err(line, format!("not a number: {token:?}")))
}

/// What the solve produced, in the file's own objective sense.
#[derive(Debug)]
pub enum Verdict {
    Optimal { objective: f64, values: Vec<f64> },
    Feasible { objective: f64, values: Vec<f64> },
    Infeasible,
    Timeout,
    Unbounded,
    Error { status: String },
}

/// Solves the parsed problem with HiGHS.
///
/// Determinism and exactness over speed: one thread, zero MIP gap.  A
/// `time_limit` of `None` or `Some(0.0)` means no limit.
pub fn solve(problem: &MpsProblem, time_limit: Option<f64>) -> Verdict {
    let mut pb = highs::RowProblem::default();
    let mut cols = Vec::with_capacity(problem.columns.len());
    for column in &problem.columns {
        let bounds = (bound_of(column.lower), bound_of(column.upper));
        let col = if column.integer {
            pb.add_integer_column(column.objective, bounds)
        } else {
            pb.add_column(column.objective, bounds)
        };
        cols.push(col);
    }
    for row in &problem.rows {
        let factors: Vec<(highs::Col, f64)> =
            row.terms.iter().map(|&(c, v)| (cols[c], v)).collect();
        match row.kind {
            RowKind::Le => pb.add_row(..=row.rhs, &factors),
            RowKind::Ge => pb.add_row(row.rhs.., &factors),
            RowKind::Eq => pb.add_row(row.rhs..=row.rhs, &factors),
        };
    }

    let sense = if problem.maximize { highs::Sense::Maximise } else { highs::Sense::Minimise };
    let mut model = pb.optimise(sense);
    // Quiet by default so the bridge only sees the solution file; set
    // MPSOLVE_LOG=1 to watch the engine work on a stubborn model.
    let log = std::env::var("MPSOLVE_LOG").is_ok_and(|v| v == "1");
    model.set_option("output_flag", log);
    model.set_option("threads", 1);
    model.set_option("mip_rel_gap", 0.0);
    model.set_option("mip_abs_gap", 0.0);
    if let Some(limit) = time_limit {
        if limit > 0.0 {
            model.set_option("time_limit", limit);
        }
    }

    let solved = model.solve();
    let status = solved.status();
    let objective_of = |values: &[f64]| {
        problem.objective_constant
            + problem
                .columns
                .iter()
                .zip(values)
                .map(|(c, &v)| c.objective * v)
                .sum::<f64>()
    };
    match status {
        highs::HighsModelStatus::Optimal => {
            let values = solved.get_solution().columns().to_vec();
            Verdict::Optimal { objective: objective_of(&values), values }
        }
        highs::HighsModelStatus::Infeasible => Verdict::Infeasible,
        highs::HighsModelStatus::Unbounded
        | highs::HighsModelStatus::UnboundedOrInfeasible => Verdict::Unbounded,
        highs::HighsModelStatus::ReachedTimeLimit => {
            let values = solved.get_solution().columns().to_vec();
            if values.len() == problem.columns.len() && values.iter().all(|v| v.is_finite()) {
                Verdict::Feasible { objective: objective_of(&values), values }
            } else {
                Verdict::Timeout
            }
        }
        other => Verdict::Error { status: format!("{other:?}") },
    }
}

/// Renders the solution file the bridge contract expects.
pub fn render_solution(problem: &MpsProblem, verdict: &Verdict) -> String {
    let mut out = String::new();
    match verdict {
        Verdict::Optimal { objective, values } => {
            let _ = writeln!(out, "{objective}");
            for (column, value) in problem.columns.iter().zip(values) {
                let _ = writeln!(out, "{} {value}", column.name);
            }
        }
        Verdict::Feasible { objective, values } => {
            let _ = writeln!(out, "FEASIBLE {objective}");
            for (column, value) in problem.columns.iter().zip(values) {
                let _ = writeln!(out, "{} {value}", column.name);
            }
        }
        Verdict::Infeasible => out.push_str("INFEASIBLE\n"),
        Verdict::Timeout => out.push_str("TIMEOUT\n"),
        Verdict::Unbounded => out.push_str("UNBOUNDED\n"),
        Verdict::Error { status } => {
            let _ = writeln!(out, "ERROR {status}");
        }
    }
    out
}

fn bound_of(value: f64) -> Bound<f64> {
    if value.is_infinite() {
        Bound::Unbounded
    } else {
        Bound::Included(value)
    }
}
