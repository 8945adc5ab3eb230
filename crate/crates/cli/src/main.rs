//! `mcfod` — command-line front end for the MCFOD solver toolkit.
//!
//! Subcommands cover the instance lifecycle: `generate` synthesises
//! instances, `preprocess` normalises them, `build` writes MPS models,
//! `solve` runs the exact or MILP solvers, `verify` checks solutions
//! against the carrier-response rules, `fees` derives fee schedules, and
//! `experiment` runs whole batches with CSV reports.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use mcfod_cli::experiment::{
    report_service_profit, run_experiment, write_rows_csv, write_service_rate_plot,
    write_summary_csv, ExperimentSpec, Method,
};
use mcfod_cli::{parse_variant, solver::resolve_solver_command};
use mcfod_core::follower::verify_solution;
use mcfod_core::generator::{
    build_instance, make_fixed_fees, random_raw, select_hubs, FeeKind, GenParams, RawData,
};
use mcfod_core::milp::{build, emit_mps, solve_with_cuts, BuildOptions, Formulation, SolveStatus};
use mcfod_core::model::{
    load_instance, save_instance, FeeSchedule, Instance, LeaderSolution, Variant,
};
use mcfod_core::preprocess::{
    complete_hub_network, compute_costs, prune_unprofitable, remove_redundant_hubs,
};
use mcfod_core::{exact, fees};

#[derive(Parser)]
#[command(name = "mcfod", version, about = "Solver toolkit for hub networks with outsourced first and last legs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise an instance from raw CSV data or random points.
    Generate(GenerateArgs),
    /// Complete the hub network, drop redundant hubs, report prunable work.
    Preprocess(PreprocessArgs),
    /// Build a MILP formulation and write it as an MPS file.
    Build(BuildArgs),
    /// Solve an instance and print (or save) the leader solution.
    Solve(SolveArgs),
    /// Check a solution file against the carrier-response rules.
    Verify(VerifyArgs),
    /// Derive a fee schedule from reservation prices or a solution.
    Fees(FeesArgs),
    /// Run a batch of (instance, variant, method) combinations.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory holding nodes.csv, demand.csv and optionally unitcost.csv.
    #[arg(long, conflicts_with = "nodes")]
    raw: Option<PathBuf>,
    /// Generate this many random nodes instead of reading raw data.
    #[arg(long)]
    nodes: Option<u32>,
    /// Parameter file (TOML or JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    carriers: Option<u32>,
    /// Hub fraction.
    #[arg(long)]
    tau: Option<f64>,
    /// Demand share the hub disc must cover.
    #[arg(long)]
    mu: Option<f64>,
    /// Inter-hub discount factor.
    #[arg(long)]
    alpha: Option<f64>,
    /// Carrier margin on reservation prices.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated hub ids, bypassing automatic selection.
    #[arg(long, value_delimiter = ',')]
    hubs: Option<Vec<u32>>,
    /// Output instance file (JSON).
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    instance: PathBuf,
    /// Also remove hubs that no cheapest route ever uses.
    #[arg(long)]
    strip_redundant_hubs: bool,
    /// Variant whose pruning report to compute.
    #[arg(long, default_value = "FREE", value_parser = parse_variant_arg)]
    variant: Variant,
    /// Fee schedule (path, MAX or AVG) for fixed-fee pruning reports.
    #[arg(long)]
    fees: Option<String>,
    /// Write the processed instance here (default: report only).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write the per-commodity pruning report CSV here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    instance: PathBuf,
    #[arg(long, value_parser = parse_formulation_arg)]
    formulation: Formulation,
    #[arg(long, value_parser = parse_variant_arg)]
    variant: Variant,
    /// Fee schedule (path, MAX or AVG); required for fixed-fee variants.
    #[arg(long)]
    fees: Option<String>,
    /// Use the aggregated big-M leg-cost rows (EF/IF, free fees).
    #[arg(long)]
    big_m: bool,
    /// Defer leg-cost rows to the cutting loop instead of emitting them.
    #[arg(long)]
    defer_cuts: bool,
    /// Output MPS file.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// exact (enumeration), bnb (branch-and-bound) or a formulation name
    /// (EP, EF, IF, IP) for the external MILP solver.
    #[arg(long, default_value = "exact")]
    method: String,
    #[arg(long, default_value = "FREE", value_parser = parse_variant_arg)]
    variant: Variant,
    /// Fee schedule (path, MAX or AVG); required for fixed-fee variants.
    #[arg(long)]
    fees: Option<String>,
    /// Solver command template with {mps}, {sol} and {time_limit}.
    #[arg(long)]
    solver: Option<String>,
    /// Wall-clock budget in seconds for MILP solves.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    /// Keep the MPS/solution exchange files and print their paths.
    #[arg(long)]
    keep_files: bool,
    /// Use the aggregated big-M leg-cost rows (EF/IF, free fees).
    #[arg(long)]
    big_m: bool,
    /// Defer leg-cost rows to the cutting loop.
    #[arg(long)]
    defer_cuts: bool,
    /// Write the solution as JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    /// Solution file written by `solve --out`.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value = "FREE", value_parser = parse_variant_arg)]
    variant: Variant,
    /// Fee schedule (path, MAX or AVG); required for fixed-fee variants.
    #[arg(long)]
    fees: Option<String>,
}

#[derive(Args)]
struct FeesArgs {
    instance: PathBuf,
    /// Collapse reservation prices: MAX or AVG.
    #[arg(long, conflicts_with = "from_solution")]
    kind: Option<FeeKind>,
    /// Synthesise the cheapest acceptable fees for this solution instead.
    #[arg(long)]
    from_solution: Option<PathBuf>,
    /// Output fee schedule (JSON, default stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Spec file (TOML or JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Results CSV (default stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the per-group service/profit summary CSV here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also render the service-rate summary as an SVG bar chart.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker pool size (default: half the CPUs).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_variant_arg(s: &str) -> Result<Variant, String> {
    parse_variant(s)
}

fn parse_formulation_arg(s: &str) -> Result<Formulation, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Build(args) => cmd_build(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Fees(args) => cmd_fees(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

/// Loads a fee argument: a literal MAX/AVG derives the schedule from the
/// instance's reservation prices, anything else is a JSON file path.
fn load_fees(inst: &Instance, arg: &str) -> Result<FeeSchedule, String> {
    if let Ok(kind) = arg.parse::<FeeKind>() {
        return Ok(make_fixed_fees(inst, kind));
    }
    let text = std::fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{arg}: {e}"))?;
    let fees = FeeSchedule::from_json(&value).map_err(|e| format!("{arg}: {e}"))?;
    fees.validate(inst).map_err(|e| format!("{arg}: {e}"))?;
    Ok(fees)
}

fn fees_for(
    inst: &Instance,
    variant: Variant,
    arg: Option<&str>,
) -> Result<Option<FeeSchedule>, String> {
    match (variant, arg) {
        (Variant::Free, None) => Ok(None),
        (Variant::Free, Some(_)) => {
            Err("FREE variants take no --fees: fees are decision variables".to_string())
        }
        (_, Some(arg)) => Ok(Some(load_fees(inst, arg)?)),
        (variant, None) => Err(format!("{variant} needs --fees (a path, MAX or AVG)")),
    }
}

fn load_params(args: &GenerateArgs) -> Result<GenParams, String> {
    let mut params = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            match path.extension().and_then(|e| e.to_str()) {
                Some("toml") => {
                    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                Some("json") => {
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                _ => {
                    return Err(format!(
                        "{}: unknown config format, expected .toml or .json",
                        path.display()
                    ))
                }
            }
        }
        None => GenParams::default(),
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    if let Some(carriers) = args.carriers {
        params.carriers = carriers;
    }
    if let Some(tau) = args.tau {
        params.tau = tau;
    }
    if let Some(mu) = args.mu {
        params.mu = mu;
    }
    if let Some(alpha) = args.alpha {
        params.alpha = alpha;
    }
    if let Some(epsilon) = args.epsilon {
        params.epsilon = epsilon;
    }
    Ok(params)
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode, String> {
    let params = load_params(&args)?;
    let raw = match (&args.raw, args.nodes) {
        (Some(dir), _) => RawData::from_csv_dir(dir).map_err(|e| e.to_string())?,
        (None, Some(n)) => random_raw(n, params.seed),
        (None, None) => return Err("pass either --raw DIR or --nodes N".to_string()),
    };
    let hubs = match &args.hubs {
        Some(hubs) => hubs.clone(),
        None => select_hubs(&raw, &params).map_err(|e| e.to_string())?,
    };
    let instance = build_instance(&raw, &hubs, &params).map_err(|e| e.to_string())?;
    save_instance(&instance, &args.out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} nodes, {} hubs, {} carriers, {} commodities)",
        args.out.display(),
        instance.node_count(),
        instance.hubs().len(),
        instance.carrier_count(),
        instance.commodity_count()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<ExitCode, String> {
    let instance = load_instance(&args.instance).map_err(|e| e.to_string())?;
    let mut instance = complete_hub_network(&instance).map_err(|e| e.to_string())?;
    if args.strip_redundant_hubs {
        let (stripped, removed) = remove_redundant_hubs(&instance);
        if !removed.is_empty() {
            println!(
                "removed {} redundant hub(s): {}",
                removed.len(),
                removed.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(", ")
            );
        }
        instance = stripped;
    }
    let fees = fees_for(&instance, args.variant, args.fees.as_deref())?;
    let costs =
        compute_costs(&instance, args.variant, fees.as_ref()).map_err(|e| e.to_string())?;
    let (instance, report) = prune_unprofitable(&instance, &costs);
    println!(
        "{} of {} commodities can never be served at a profit; {} of {} serving pairs remain",
        report.unprofitable().len(),
        instance.commodity_count(),
        report.pairs_remaining,
        report.pairs_initial
    );
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &args.out {
        save_instance(&instance, path).map_err(|e| e.to_string())?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn build_model_for(
    inst: &Instance,
    formulation: Formulation,
    variant: Variant,
    fees: Option<&FeeSchedule>,
    options: BuildOptions,
) -> Result<mcfod_core::milp::MilpModel, String> {
    let costs = if formulation == Formulation::Ip {
        Some(compute_costs(inst, variant, fees).map_err(|e| e.to_string())?)
    } else {
        None
    };
    build(inst, formulation, variant, fees, costs.as_ref(), options).map_err(|e| e.to_string())
}

fn cmd_build(args: BuildArgs) -> Result<ExitCode, String> {
    let instance = load_instance(&args.instance).map_err(|e| e.to_string())?;
    let fees = fees_for(&instance, args.variant, args.fees.as_deref())?;
    let options = BuildOptions { big_m: args.big_m, defer_cuts: args.defer_cuts };
    let model = build_model_for(&instance, args.formulation, args.variant, fees.as_ref(), options)?;
    std::fs::write(&args.out, emit_mps(&model))
        .map_err(|e| format!("{}: {e}", args.out.display()))?;
    println!(
        "wrote {} ({} variables, {} rows, {} deferred)",
        args.out.display(),
        model.variables().len(),
        model.rows().len(),
        model.deferred_rows().len()
    );
    Ok(ExitCode::SUCCESS)
}

fn print_solution(inst: &Instance, solution: &LeaderSolution, status: &str) {
    println!("status     {status}");
    println!("objective  {}", solution.objective);
    println!("served     {} of {}", solution.served.len(), inst.commodity_count());
    let allocated: Vec<String> = inst
        .non_hubs()
        .filter_map(|v| solution.allocation.get(v).map(|k| format!("{v}->{k}")))
        .collect();
    println!("allocation {}", if allocated.is_empty() { "-".to_string() } else { allocated.join(" ") });
    for (&r, &(i, j)) in &solution.routes {
        let c = inst.commodity(r);
        println!("route      commodity {} ({}->{}) via hubs ({i}, {j})", r + 1, c.origin, c.destination);
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, String> {
    let instance = load_instance(&args.instance).map_err(|e| e.to_string())?;
    let fees = fees_for(&instance, args.variant, args.fees.as_deref())?;
    let method: Method = args.method.parse()?;

    let (solution, status) = match method {
        Method::Exact | Method::Bnb => {
            let costs = compute_costs(&instance, args.variant, fees.as_ref())
                .map_err(|e| e.to_string())?;
            let solution = match method {
                Method::Exact => exact::brute_force(&instance, &costs),
                _ => exact::branch_and_bound(&instance, &costs),
            }
            .map_err(|e| e.to_string())?;
            (solution, SolveStatus::Optimal)
        }
        Method::Milp(formulation) => {
            let solver = resolve_solver_command(args.solver.as_deref())?;
            let options = BuildOptions { big_m: args.big_m, defer_cuts: args.defer_cuts };
            let model =
                build_model_for(&instance, formulation, args.variant, fees.as_ref(), options)?;
            let outcome = solve_with_cuts(
                &model,
                &solver,
                Some(Duration::from_secs_f64(args.time_limit.max(0.0))),
                args.keep_files,
            )
            .map_err(|e| e.to_string())?;
            if args.keep_files {
                if let (Some(mps), Some(sol)) = (&outcome.mps_path, &outcome.sol_path) {
                    println!("kept {} and {}", mps.display(), sol.display());
                }
            }
            match outcome.status {
                SolveStatus::Optimal | SolveStatus::Feasible => {
                    let solution =
                        mcfod_core::milp::extract(&instance, &model, &outcome, fees.as_ref())
                            .map_err(|e| e.to_string())?;
                    (solution, outcome.status)
                }
                status => {
                    println!("status     {status}");
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
    };

    // Optimality is only ever claimed for solutions that survive the
    // carrier-response check.
    let report = verify_solution(&instance, &solution, args.variant, fees.as_ref());
    let label = match (status, report.ok) {
        (SolveStatus::Optimal, true) => "OPTIMAL".to_string(),
        (status, true) => status.to_string(),
        _ => "VERIFY_FAILED".to_string(),
    };
    print_solution(&instance, &solution, &label);
    if !report.ok {
        for violation in &report.violations {
            eprintln!("violation: {violation:?}");
        }
    }
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&solution).map_err(|e| e.to_string())?;
        std::fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let instance = load_instance(&args.instance).map_err(|e| e.to_string())?;
    let fees = fees_for(&instance, args.variant, args.fees.as_deref())?;
    let text = std::fs::read_to_string(&args.solution)
        .map_err(|e| format!("{}: {e}", args.solution.display()))?;
    let mut solution: LeaderSolution = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", args.solution.display()))?;
    // Solution files carry no fee schedule; free-fee games re-synthesise
    // the canonical one from the stored routing decision.
    if args.variant == Variant::Free && solution.fees.is_none() {
        solution.fees = Some(
            fees::synthesize(&instance, &solution.allocation, &solution.routes)
                .map_err(|e| e.to_string())?,
        );
    }
    let report = verify_solution(&instance, &solution, args.variant, fees.as_ref());
    if report.ok {
        println!("ok: solution verifies under {}", args.variant);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAILED: {} violation(s)", report.violations.len());
        for violation in &report.violations {
            println!("  {violation:?}");
        }
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_fees(args: FeesArgs) -> Result<ExitCode, String> {
    let instance = load_instance(&args.instance).map_err(|e| e.to_string())?;
    let schedule = match (&args.kind, &args.from_solution) {
        (Some(kind), None) => make_fixed_fees(&instance, *kind),
        (None, Some(path)) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let solution: LeaderSolution =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            fees::synthesize(&instance, &solution.allocation, &solution.routes)
                .map_err(|e| e.to_string())?
        }
        _ => return Err("pass exactly one of --kind MAX|AVG or --from-solution FILE".to_string()),
    };
    let json = serde_json::to_string_pretty(&schedule.to_json()).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode, String> {
    let spec = ExperimentSpec::from_path(&args.spec)?;
    let rows = run_experiment(&spec, args.jobs)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            write_rows_csv(&rows, file)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
        }
        None => write_rows_csv(&rows, std::io::stdout().lock())?,
    }
    let failed = rows.iter().filter(|row| row.status.starts_with("ERROR")).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see the status column", rows.len());
    }
    if args.summary.is_some() || args.plot.is_some() {
        let summary = report_service_profit(&rows);
        if let Some(path) = &args.summary {
            let file = std::fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            write_summary_csv(&summary, file)?;
            println!("wrote {}", path.display());
        }
        if let Some(path) = &args.plot {
            write_service_rate_plot(&summary, path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
