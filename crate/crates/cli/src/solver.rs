//! Locating an external MILP solver.
//!
//! The bridge runs any solver that takes an MPS file and writes a
//! solution file, described by a command template with `{mps}`, `{sol}`
//! and optional `{time_limit}` placeholders.  Resolution order:
//!
//! 1. an explicit template (`--solver` flag or experiment spec);
//! 2. the `MCFOD_SOLVER_CMD` environment variable;
//! 3. an `mpsolve` binary sitting next to the current executable;
//! 4. an `mpsolve` binary on `PATH`.
//!
//! Templates are split on whitespace, so solver paths containing spaces
//! must be configured through a wrapper script.

use std::path::Path;

fn bundled_name() -> &'static str {
    if cfg!(windows) {
        "mpsolve.exe"
    } else {
        "mpsolve"
    }
}

fn template_for(path: &Path) -> String {
    format!("{} {{mps}} {{sol}} {{time_limit}}", path.display())
}

/// Resolves the solver command template, trying the sources in the order
/// documented above.
pub fn resolve_solver_command(explicit: Option<&str>) -> Result<String, String> {
    if let Some(cmd) = explicit {
        if !cmd.trim().is_empty() {
            return Ok(cmd.to_string());
        }
    }
    if let Ok(cmd) = std::env::var("MCFOD_SOLVER_CMD") {
        if !cmd.trim().is_empty() {
            return Ok(cmd);
        }
    }
    if let Ok(exe) = std::env::current_exe() {
        if let Some(dir) = exe.parent() {
            let sibling = dir.join(bundled_name());
            if sibling.is_file() {
                return Ok(template_for(&sibling));
            }
        }
    }
    if let Some(path_var) = std::env::var_os("PATH") {
        for dir in std::env::split_paths(&path_var) {
            let candidate = dir.join(bundled_name());
            if candidate.is_file() {
                return Ok(template_for(&candidate));
            }
        }
    }
    Err(
        "no MILP solver found: pass --solver, set MCFOD_SOLVER_CMD, or put `mpsolve` \
         next to this binary or on PATH"
            .to_string(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_template_wins() {
        let cmd = resolve_solver_command(Some("mysolver {mps} {sol}")).unwrap();
        assert_eq!(cmd, "mysolver {mps} {sol}");
    }

    #[test]
    fn blank_explicit_template_is_ignored() {
        // Falls through to the environment/lookup chain; we only assert it
        // does not echo the blank back.
        match resolve_solver_command(Some("   ")) {
            Ok(cmd) => assert!(!cmd.trim().is_empty()),
            Err(message) => assert!(message.contains("no MILP solver")),
        }
    }
}
