//! Free-format MPS emission.
//!
//! MPS has no portable way to state a maximisation objective, so the
//! emitter negates every objective coefficient and the file always
//! minimises; consumers of the solved objective must negate it back (the
//! bridge does).  Output depends only on the model's variable and row
//! insertion order, so equal models emit byte-identical files.

use super::{MilpModel, RowSense, VarKind};
use std::fmt::Write as _;

/// Formats a coefficient the way the emitter writes all numbers: shortest
/// decimal form that round-trips, with negative zero normalised away.
fn num(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    format!("{value}")
}

/// Renders the model's active rows (deferred rows are not emitted) as a
/// free-format MPS string.
pub fn emit_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "* maximisation model emitted with negated objective");
    let _ = writeln!(out, "NAME {}", model.name);

    out.push_str("ROWS\n");
    out.push_str(" N OBJ\n");
    for row in &model.rows {
        let tag = match row.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let _ = writeln!(out, " {tag} {}", row.name);
    }

    // Column-major entries: objective first, then rows in emission order.
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.vars.len()];
    for (index, var) in model.vars.iter().enumerate() {
        if var.objective != 0.0 {
            columns[index].push(("OBJ", -var.objective));
        }
    }
    for row in &model.rows {
        for &(var, coeff) in &row.terms {
            columns[var].push((row.name.as_str(), coeff));
        }
    }

    out.push_str("COLUMNS\n");
    let mut integer_section = false;
    let mut marker = 0usize;
    for (index, var) in model.vars.iter().enumerate() {
        let integral = var.kind == VarKind::Binary;
        if integral != integer_section {
            let tag = if integral { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, " M{marker} 'MARKER' {tag}");
            marker += 1;
            integer_section = integral;
        }
        for &(row, coeff) in &columns[index] {
            let _ = writeln!(out, " {} {row} {}", var.name, num(coeff));
        }
    }
    if integer_section {
        let _ = writeln!(out, " M{marker} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    for row in &model.rows {
        if row.rhs != 0.0 {
            let _ = writeln!(out, " RHS {} {}", row.name, num(row.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for var in &model.vars {
        match var.kind {
            VarKind::Binary => {
                let _ = writeln!(out, " BV BND {}", var.name);
            }
            VarKind::Continuous => {
                // Default continuous bounds are [0, +inf); emit only
                // deviations.
                if var.lower != 0.0 {
                    let _ = writeln!(out, " LO BND {} {}", var.name, num(var.lower));
                }
                if var.upper.is_finite() {
                    let _ = writeln!(out, " UP BND {} {}", var.name, num(var.upper));
                }
            }
        }
    }

    out.push_str("ENDATA\n");
    out
}
