//! `mpsolve <problem.mps> <solution.out> [time_limit_seconds]`
//!
//! Reads free-format MPS, solves with HiGHS, writes the solution file the
//! bridge contract expects (see the crate docs).  Exits 0 whenever a
//! verdict was reached — including infeasibility — and 1 only for usage,
//! i/o or parse failures.

use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 || args.len() > 4 {
        eprintln!("usage: mpsolve <problem.mps> <solution.out> [time_limit_seconds]");
        return ExitCode::FAILURE;
    }
    let time_limit = match args.get(3) {
        Some(raw) => match raw.parse::<f64>() {
            Ok(v) if v >= 0.0 => Some(v),
            _ => {
                eprintln!("mpsolve: time limit must be a nonnegative number, got {raw:?}");
                return ExitCode::FAILURE;
            }
        },
        None => None,
    };

    let text = match std::fs::read_to_string(&args[1]) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("mpsolve: cannot read {}: {e}", args[1]);
            return ExitCode::FAILURE;
        }
    };
    let problem = match mpsolve::parse_mps(&text) {
        Ok(problem) => problem,
        Err(e) => {
            eprintln!("mpsolve: {}: {e}", args[1]);
            return ExitCode::FAILURE;
        }
    };

    let verdict = mpsolve::solve(&problem, time_limit);
    let rendered = mpsolve::render_solution(&problem, &verdict);
    if let Err(e) = std::fs::write(&args[2], rendered) {
        eprintln!("mpsolve: cannot write {}: {e}", args[2]);
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
