//! Driving an external MILP solver over MPS files.
//!
//! The solver is described by a command template such as
//! `"mpsolve {mps} {sol}"` — or anything else that reads free-format MPS
//! and writes a solution file.  Placeholders:
//!
//! * `{mps}` (required): path of the problem file the bridge writes;
//! * `{sol}` (required): path the solver must write its solution to;
//! * `{time_limit}` (optional): time limit in seconds, `0` for none.
//!
//! The template is split on whitespace and placeholders are substituted
//! inside tokens, so paths never pass through a shell.  The environment
//! variable `MCFOD_SOLVER_CMD`, when set, is the conventional source of
//! the template (the CLI reads it; this module just takes a string).
//!
//! ## Solution file contract
//!
//! Lines are whitespace-separated; empty lines and `#` comments are
//! skipped.  The first meaningful line decides the dialect:
//!
//! * a status word (`OPTIMAL`, `FEASIBLE`, `INFEASIBLE`, `TIMEOUT`,
//!   `UNBOUNDED`, `ERROR`), optionally followed by the objective value;
//! * a bare number: the objective value, status assumed `OPTIMAL`;
//! * a `name value` pair: pairs-only dialect, status assumed `OPTIMAL`.
//!
//! Every following line is a `name value` pair.  Since the emitted MPS
//! minimises the negated objective, file objectives are negated back;
//! unknown variable names are ignored and absent ones default to zero.
//! Solvers must exit with status 0 even for infeasible models — a nonzero
//! exit is reported as a solver failure, not a verdict.

use super::{emit_mps, MilpError, MilpModel};
use std::io::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::model::MONEY_EPS;

/// Terminal state of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal.
    Optimal,
    /// A feasible incumbent without a proof (typically a time limit).
    Feasible,
    /// No feasible point exists.
    Infeasible,
    /// The time budget ran out with nothing to show.
    Timeout,
    /// The solver misbehaved (crashed, unbounded, unparseable output).
    SolverError,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "OPTIMAL",
            SolveStatus::Feasible => "FEASIBLE",
            SolveStatus::Infeasible => "INFEASIBLE",
            SolveStatus::Timeout => "TIMEOUT",
            SolveStatus::SolverError => "SOLVER_ERROR",
        };
        f.write_str(s)
    }
}

/// Result of [`bridge_solve`] / [`solve_with_cuts`].
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Objective in the maximisation sense, when a point is available.
    pub objective: Option<f64>,
    /// One value per model column; zero for anything the solver omitted.
    pub values: Vec<f64>,
    /// Deferred rows promoted to active rows across the whole solve.
    pub cuts_added: usize,
    /// Re-solves after the first (0 when the first model was already
    /// feasible for every deferred row).
    pub resolves: usize,
    pub wall_time: Duration,
    /// Locations of the problem/solution files when they were kept.
    pub mps_path: Option<PathBuf>,
    pub sol_path: Option<PathBuf>,
}

/// Splits the template, substitutes placeholders, and validates shape.
fn render_command(
    template: &str,
    mps: &str,
    sol: &str,
    time_limit: Option<Duration>,
) -> Result<Vec<String>, MilpError> {
    if !template.contains("{mps}") || !template.contains("{sol}") {
        return Err(MilpError::BadCommand { template: template.to_string() });
    }
    let seconds = time_limit.map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let tokens: Vec<String> = template
        .split_whitespace()
        .map(|token| {
            token
                .replace("{mps}", mps)
                .replace("{sol}", sol)
                .replace("{time_limit}", &format!("{seconds}"))
        })
        .collect();
    if tokens.is_empty() {
        return Err(MilpError::BadCommand { template: template.to_string() });
    }
    Ok(tokens)
}

/// Parsed solution file, still in file conventions (minimisation).
struct ParsedSolution {
    status: SolveStatus,
    /// Objective as written in the file (minimisation sense), if written.
    file_objective: Option<f64>,
    values: Vec<f64>,
    has_values: bool,
}

fn parse_solution(text: &str, model: &MilpModel) -> Result<ParsedSolution, MilpError> {
    let mut status: Option<SolveStatus> = None;
    let mut file_objective: Option<f64> = None;
    let mut values = vec![0.0; model.variables().len()];
    let mut has_values = false;
    let mut first = true;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if first {
            first = false;
            let head = tokens[0].to_ascii_uppercase();
            let parsed_status = match head.as_str() {
                "OPTIMAL" => Some(SolveStatus::Optimal),
                "FEASIBLE" => Some(SolveStatus::Feasible),
                "INFEASIBLE" => Some(SolveStatus::Infeasible),
                "TIMEOUT" => Some(SolveStatus::Timeout),
                "UNBOUNDED" | "ERROR" => Some(SolveStatus::SolverError),
                _ => None,
            };
            if let Some(s) = parsed_status {
                status = Some(s);
                // Only solution-bearing statuses promise an objective;
                // trailing diagnostics after error statuses are ignored.
                if matches!(s, SolveStatus::Optimal | SolveStatus::Feasible) {
                    if let Some(token) = tokens.get(1) {
                        file_objective =
                            Some(token.parse::<f64>().map_err(|_| MilpError::BadSolution {
                                reason: format!("objective after status is not a number: {line:?}"),
                            })?);
                    }
                }
                continue;
            }
            if tokens.len() == 1 {
                // Dialect A: bare objective line.
                file_objective =
                    Some(tokens[0].parse::<f64>().map_err(|_| MilpError::BadSolution {
                        reason: format!("unrecognised first line: {line:?}"),
                    })?);
                status = Some(SolveStatus::Optimal);
                continue;
            }
            // Fall through: dialect B, the first line is already a pair.
            status = Some(SolveStatus::Optimal);
        }
        if tokens.len() != 2 {
            return Err(MilpError::BadSolution {
                reason: format!("expected `name value`, got {line:?}"),
            });
        }
        let value = tokens[1].parse::<f64>().map_err(|_| MilpError::BadSolution {
            reason: format!("unparseable value in {line:?}"),
        })?;
        if let Some(index) = model.var_index(tokens[0]) {
            values[index] = value;
            has_values = true;
        }
        // Names we did not emit (solver-internal artifacts) are ignored.
    }

    let status = status.ok_or_else(|| MilpError::BadSolution {
        reason: "solution file is empty".to_string(),
    })?;
    Ok(ParsedSolution { status, file_objective, values, has_values })
}

/// Solves the model's active rows once through the external command.
///
/// `time_limit` is both substituted into the template (when it has a
/// `{time_limit}` placeholder) and enforced on the child process; a killed
/// solver yields [`SolveStatus::Timeout`].  With `keep_files` the MPS and
/// solution files survive and their paths land in the outcome.
pub fn bridge_solve(
    model: &MilpModel,
    command_template: &str,
    time_limit: Option<Duration>,
    keep_files: bool,
) -> Result<SolveOutcome, MilpError> {
    let started = Instant::now();
    let dir = tempfile::Builder::new().prefix("mcfod-milp").tempdir()?;
    let mps_path = dir.path().join(format!("{}.mps", model.name));
    let sol_path = dir.path().join(format!("{}.sol", model.name));
    {
        let mut file = std::fs::File::create(&mps_path)?;
        file.write_all(emit_mps(model).as_bytes())?;
    }

    let tokens = render_command(
        command_template,
        mps_path.to_str().expect("temp paths are valid UTF-8"),
        sol_path.to_str().expect("temp paths are valid UTF-8"),
        time_limit,
    )?;
    let command_line = tokens.join(" ");
    let mut child = std::process::Command::new(&tokens[0])
        .args(&tokens[1..])
        .stdin(std::process::Stdio::null())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .map_err(|source| MilpError::Launch { command: command_line.clone(), source })?;

    // Enforce the wall clock ourselves so any solver can be plugged in,
    // graceful or not.
    let exit = loop {
        match child.try_wait()? {
            Some(exit) => break Some(exit),
            None => {
                if let Some(limit) = time_limit {
                    if started.elapsed() > limit + Duration::from_secs(2) {
                        let _ = child.kill();
                        let _ = child.wait();
                        break None;
                    }
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };

    let keep = |dir: tempfile::TempDir| {
        if keep_files {
            let _ = dir.keep();
            (Some(mps_path.clone()), Some(sol_path.clone()))
        } else {
            (None, None)
        }
    };

    let Some(exit) = exit else {
        let (mps_kept, sol_kept) = keep(dir);
        return Ok(SolveOutcome {
            status: SolveStatus::Timeout,
            objective: None,
            values: vec![0.0; model.variables().len()],
            cuts_added: 0,
            resolves: 0,
            wall_time: started.elapsed(),
            mps_path: mps_kept,
            sol_path: sol_kept,
        });
    };

    if !exit.success() {
        let mut stderr = String::new();
        if let Some(mut pipe) = child.stderr.take() {
            use std::io::Read as _;
            let _ = pipe.read_to_string(&mut stderr);
        }
        return Err(MilpError::SolverFailed { status: exit.to_string(), stderr });
    }

    let text = std::fs::read_to_string(&sol_path).map_err(|e| MilpError::BadSolution {
        reason: format!("solver wrote no solution file ({e})"),
    })?;
    let parsed = parse_solution(&text, model)?;

    // File objectives follow the MPS minimisation convention; flip back.
    // Prefer the file's number when present, otherwise recompute.
    let objective = match parsed.status {
        SolveStatus::Optimal | SolveStatus::Feasible => Some(match parsed.file_objective {
            Some(v) => -v,
            None if parsed.has_values => model.objective_value(&parsed.values),
            None => {
                return Err(MilpError::BadSolution {
                    reason: "solution has neither objective nor values".to_string(),
                })
            }
        }),
        _ => None,
    };

    let (mps_kept, sol_kept) = keep(dir);
    Ok(SolveOutcome {
        status: parsed.status,
        objective,
        values: parsed.values,
        cuts_added: 0,
        resolves: 0,
        wall_time: started.elapsed(),
        mps_path: mps_kept,
        sol_path: sol_kept,
    })
}

/// Iteratively solves, separating violated deferred rows between rounds.
///
/// Models without deferred rows behave exactly like [`bridge_solve`].
/// Otherwise each round promotes every deferred row the incumbent violates
/// by more than [`MONEY_EPS`] and re-solves; the loop ends when the
/// incumbent satisfies all deferred rows.  More than 100 re-solves is
/// treated as divergence.  The time limit covers the whole loop.  A
/// `Feasible`/`Timeout` outcome is returned as-is and may still violate
/// deferred rows.
pub fn solve_with_cuts(
    model: &MilpModel,
    command_template: &str,
    time_limit: Option<Duration>,
    keep_files: bool,
) -> Result<SolveOutcome, MilpError> {
    let started = Instant::now();
    let mut work = model.clone();
    let mut cuts_added = 0usize;
    let mut resolves = 0usize;

    loop {
        let remaining = match time_limit {
            Some(limit) => {
                let left = limit.saturating_sub(started.elapsed());
                if left.is_zero() {
                    return Ok(SolveOutcome {
                        status: SolveStatus::Timeout,
                        objective: None,
                        values: vec![0.0; model.variables().len()],
                        cuts_added,
                        resolves,
                        wall_time: started.elapsed(),
                        mps_path: None,
                        sol_path: None,
                    });
                }
                Some(left)
            }
            None => None,
        };

        let mut outcome = bridge_solve(&work, command_template, remaining, keep_files)?;
        outcome.cuts_added = cuts_added;
        outcome.resolves = resolves;
        outcome.wall_time = started.elapsed();
        if outcome.status != SolveStatus::Optimal {
            return Ok(outcome);
        }

        let violated: Vec<usize> = work
            .deferred
            .iter()
            .enumerate()
            .filter(|(_, row)| row.slack(&outcome.values) < -MONEY_EPS)
            .map(|(index, _)| index)
            .collect();
        if violated.is_empty() {
            return Ok(outcome);
        }

        for index in violated.into_iter().rev() {
            let row = work.deferred.remove(index);
            work.rows.push(row);
            cuts_added += 1;
        }
        resolves += 1;
        if resolves > 100 {
            return Err(MilpError::CutLoopDiverged { resolves });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Formulation, VarKind, VarRole};
    use crate::model::Variant;

    fn tiny_model() -> MilpModel {
        let mut model = MilpModel::new("tiny".into(), Formulation::Ep, Variant::Free);
        model.add_var("s_r1".into(), VarKind::Binary, 5.0, 0.0, 1.0, VarRole::Serve { r: 0 });
        model.add_var(
            "x_r1_i1_j1".into(),
            VarKind::Continuous,
            -2.0,
            0.0,
            f64::INFINITY,
            VarRole::Route { r: 0, i: 1, j: 1 },
        );
        model.add_row(
            "serve_r1".into(),
            crate::milp::RowSense::Eq,
            0.0,
            vec![(1, 1.0), (0, -1.0)],
        );
        model
    }

    #[test]
    fn parses_objective_then_pairs() {
        let model = tiny_model();
        let parsed = parse_solution("-3\ns_r1 1\nx_r1_i1_j1 1\n", &model).unwrap();
        assert_eq!(parsed.status, SolveStatus::Optimal);
        assert_eq!(parsed.file_objective, Some(-3.0));
        assert_eq!(parsed.values, vec![1.0, 1.0]);
    }

    #[test]
    fn parses_pairs_only_and_ignores_unknown_names() {
        let model = tiny_model();
        let parsed = parse_solution("s_r1 1\nONE_VAR_CONSTANT 1\nx_r1_i1_j1 0.5\n", &model).unwrap();
        assert_eq!(parsed.status, SolveStatus::Optimal);
        assert_eq!(parsed.file_objective, None);
        assert_eq!(parsed.values, vec![1.0, 0.5]);
        assert!(parsed.has_values);
    }

    #[test]
    fn parses_status_lines() {
        let model = tiny_model();
        let parsed = parse_solution("INFEASIBLE\n", &model).unwrap();
        assert_eq!(parsed.status, SolveStatus::Infeasible);

        let parsed = parse_solution("FEASIBLE -7.5\ns_r1 1\n", &model).unwrap();
        assert_eq!(parsed.status, SolveStatus::Feasible);
        assert_eq!(parsed.file_objective, Some(-7.5));

        let parsed = parse_solution("# comment\n\nOPTIMAL\ns_r1 0\n", &model).unwrap();
        assert_eq!(parsed.status, SolveStatus::Optimal);
        assert_eq!(parsed.file_objective, None);
    }

    #[test]
    fn rejects_garbage() {
        let model = tiny_model();
        assert!(parse_solution("", &model).is_err());
        assert!(parse_solution("what is this\n", &model).is_err());
        assert!(parse_solution("OPTIMAL\ns_r1 one\n", &model).is_err());
    }

    #[test]
    fn command_rendering_substitutes_tokens() {
        let tokens = render_command(
            "solver --in={mps} {sol} --limit {time_limit}",
            "/tmp/a.mps",
            "/tmp/a.sol",
            Some(Duration::from_secs(30)),
        )
        .unwrap();
        assert_eq!(tokens, vec!["solver", "--in=/tmp/a.mps", "/tmp/a.sol", "--limit", "30"]);

        assert!(render_command("solver {mps}", "a", "b", None).is_err());
    }
}
