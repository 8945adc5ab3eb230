//! Batch experiment harness: run a matrix of instances × variants ×
//! methods, collect one result row per combination, and summarise
//! service rates and profits per variant.
//!
//! Specs are TOML or JSON files.  A minimal one:
//!
//! ```toml
//! instances = ["fixtures/example1.json"]
//! variants = ["FREE", "FIXED_OPTIMISTIC:MAX", "FIXED_RELAXED:MAX"]
//! methods = ["EXACT", "IP"]
//! time_limit = 600.0
//! ```
//!
//! Instead of (or in addition to) explicit instance files, a generation
//! matrix crosses sizes × carrier counts × seeds:
//!
//! ```toml
//! [matrix]
//! sizes = [10, 15]
//! carriers = [2, 3]
//! seeds = [1, 2, 3]
//! [matrix.params]
//! tau = 0.3
//! ```
//!
//! Failures of individual runs land in their row's `status` column; the
//! batch itself never aborts.  Identical seeds reproduce identical
//! objective columns (timings vary).

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mcfod_core::exact;
use mcfod_core::follower::verify_solution;
use mcfod_core::generator::{
    build_instance, make_fixed_fees, random_raw, select_hubs, FeeKind, GenParams,
};
use mcfod_core::milp::{build, solve_with_cuts, BuildOptions, Formulation, SolveStatus};
use mcfod_core::model::{load_instance, FeeSchedule, Instance, Variant};
use mcfod_core::preprocess::compute_costs;

use crate::parse_variant;

/// How one run solves its instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exhaustive allocation enumeration.
    Exact,
    /// Branch-and-bound enumeration.
    Bnb,
    /// One of the four MILP formulations via the external solver.
    Milp(Formulation),
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Exact => f.write_str("EXACT"),
            Method::Bnb => f.write_str("BNB"),
            Method::Milp(formulation) => write!(f, "{formulation}"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "EXACT" => Ok(Method::Exact),
            "BNB" => Ok(Method::Bnb),
            "EP" => Ok(Method::Milp(Formulation::Ep)),
            "EF" => Ok(Method::Milp(Formulation::Ef)),
            "IF" => Ok(Method::Milp(Formulation::If)),
            "IP" => Ok(Method::Milp(Formulation::Ip)),
            other => Err(format!(
                "unknown method {other:?}; expected EXACT, BNB, EP, EF, IF or IP"
            )),
        }
    }
}

/// Where a fixed-fee game gets its schedule: derived from reservation
/// prices (MAX/AVG) or loaded from a JSON file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeeSource {
    Kind(FeeKind),
    File(PathBuf),
}

impl std::fmt::Display for FeeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeeSource::Kind(kind) => write!(f, "{kind}"),
            FeeSource::File(path) => write!(f, "{}", path.display()),
        }
    }
}

/// A variant to run, together with the fee schedule for the fixed-fee
/// games ("FIXED_OPTIMISTIC:MAX", "FIXED_RELAXED:AVG",
/// "FIXED_RELAXED:fees.json", ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantSpec {
    pub variant: Variant,
    pub fees: Option<FeeSource>,
}

impl std::fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.fees {
            Some(source) => write!(f, "{}:{source}", self.variant),
            None => write!(f, "{}", self.variant),
        }
    }
}

impl std::str::FromStr for VariantSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, fees) = match s.split_once(':') {
            Some((name, source)) => {
                let source = match source.parse::<FeeKind>() {
                    Ok(kind) => FeeSource::Kind(kind),
                    Err(_) => FeeSource::File(PathBuf::from(source)),
                };
                (name, Some(source))
            }
            None => (s, None),
        };
        let variant = parse_variant(name)?;
        match (variant, fees) {
            (Variant::Free, Some(_)) => {
                Err("FREE takes no fee source: fees are decision variables".to_string())
            }
            (Variant::Free, None) => Ok(VariantSpec { variant, fees: None }),
            (_, None) => Err(format!(
                "{variant} needs a fee source, e.g. \"{variant}:MAX\", \"{variant}:AVG\" or \
                 \"{variant}:fees.json\""
            )),
            (_, fees) => Ok(VariantSpec { variant, fees }),
        }
    }
}

/// Generation matrix: one instance per (size, carrier count, seed) cell,
/// built from random raw data with `params` (whose own `carriers` and
/// `seed` fields are overridden per cell).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub sizes: Vec<u32>,
    pub carriers: Vec<u32>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub params: GenParams,
}

/// A batch description, loadable from TOML or JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Instance files to load.
    #[serde(default)]
    pub instances: Vec<PathBuf>,
    /// Generation matrix, crossed with `instances`.
    #[serde(default)]
    pub matrix: Option<Matrix>,
    /// Variant names, e.g. `"FREE"` or `"FIXED_RELAXED:AVG"`.
    pub variants: Vec<String>,
    /// Method names: EXACT, BNB, EP, EF, IF, IP.
    pub methods: Vec<String>,
    /// Per-solve wall-clock budget in seconds (default 600).
    #[serde(default)]
    pub time_limit: Option<f64>,
    /// Solver command template; falls back to the usual discovery chain.
    #[serde(default)]
    pub solver: Option<String>,
}

impl ExperimentSpec {
    /// Loads a spec from a `.toml` or `.json` file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        match path.extension().and_then(|ext| ext.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display())),
            Some("json") => {
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
            _ => Err(format!(
                "{}: unknown spec format, expected a .toml or .json file",
                path.display()
            )),
        }
    }

    /// Parses and validates the variant/method lists.
    pub fn plan(&self) -> Result<(Vec<VariantSpec>, Vec<Method>), String> {
        if self.instances.is_empty() && self.matrix.is_none() {
            return Err("spec lists no instances and no generation matrix".to_string());
        }
        if let Some(matrix) = &self.matrix {
            if matrix.sizes.is_empty() || matrix.carriers.is_empty() || matrix.seeds.is_empty() {
                return Err("generation matrix must list sizes, carriers and seeds".to_string());
            }
        }
        let variants: Vec<VariantSpec> =
            self.variants.iter().map(|v| v.parse()).collect::<Result<_, _>>()?;
        let methods: Vec<Method> =
            self.methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
        if variants.is_empty() {
            return Err("spec lists no variants".to_string());
        }
        if methods.is_empty() {
            return Err("spec lists no methods".to_string());
        }
        Ok((variants, methods))
    }

    pub fn time_limit(&self) -> Duration {
        Duration::from_secs_f64(self.time_limit.unwrap_or(600.0).max(0.0))
    }
}

/// One line of the results table.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub instance: String,
    pub nodes: u32,
    pub carriers: u32,
    pub hubs: usize,
    pub variant: String,
    pub method: String,
    pub preprocess_s: f64,
    pub load_s: f64,
    pub solve_s: f64,
    pub objective: Option<f64>,
    pub status: String,
    pub served: usize,
    pub total: usize,
    pub service_rate: f64,
    pub cuts_added: usize,
}

/// Runs the whole batch.  `jobs` caps the worker pool (default: half the
/// CPUs, at least one).  Individual failures are reported in the rows.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<ResultRow>, String> {
    let (variants, methods) = spec.plan()?;

    // Materialise instances up front: explicit files first, then the
    // generation matrix in (size, carriers, seed) order.
    let mut instances: Vec<(String, Result<Instance, String>)> = Vec::new();
    for path in &spec.instances {
        let id = path
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        instances.push((id, load_instance(path).map_err(|e| e.to_string())));
    }
    if let Some(matrix) = &spec.matrix {
        for &n in &matrix.sizes {
            for &k in &matrix.carriers {
                for &seed in &matrix.seeds {
                    let id = format!("gen_n{n}_k{k}_s{seed}");
                    let mut params = matrix.params.clone();
                    params.carriers = k;
                    params.seed = seed;
                    let built = (|| {
                        let raw = random_raw(n, seed);
                        let hubs = select_hubs(&raw, &params).map_err(|e| e.to_string())?;
                        build_instance(&raw, &hubs, &params).map_err(|e| e.to_string())
                    })();
                    instances.push((id, built));
                }
            }
        }
    }

    let needs_solver = methods.iter().any(|m| matches!(m, Method::Milp(_)));
    let solver_cmd: Result<String, String> = if needs_solver {
        crate::solver::resolve_solver_command(spec.solver.as_deref())
    } else {
        Ok(String::new())
    };

    let mut jobs_list: Vec<(usize, VariantSpec, Method)> = Vec::new();
    for index in 0..instances.len() {
        for variant in &variants {
            for &method in &methods {
                jobs_list.push((index, variant.clone(), method));
            }
        }
    }

    let workers = jobs.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2) / 2
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| e.to_string())?;

    let time_limit = spec.time_limit();
    let rows = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|(index, variant, method)| {
                let (index, method) = (*index, *method);
                let (id, instance) = &instances[index];
                match instance {
                    Ok(inst) => run_one(id, inst, variant, method, time_limit, &solver_cmd),
                    Err(error) => ResultRow {
                        instance: id.clone(),
                        nodes: 0,
                        carriers: 0,
                        hubs: 0,
                        variant: variant.to_string(),
                        method: method.to_string(),
                        preprocess_s: 0.0,
                        load_s: 0.0,
                        solve_s: 0.0,
                        objective: None,
                        status: format!("ERROR: {error}"),
                        served: 0,
                        total: 0,
                        service_rate: 0.0,
                        cuts_added: 0,
                    },
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

fn run_one(
    id: &str,
    inst: &Instance,
    variant_spec: &VariantSpec,
    method: Method,
    time_limit: Duration,
    solver_cmd: &Result<String, String>,
) -> ResultRow {
    let total = inst.commodity_count();
    let mut row = ResultRow {
        instance: id.to_string(),
        nodes: inst.node_count(),
        carriers: inst.carrier_count(),
        hubs: inst.hubs().len(),
        variant: variant_spec.to_string(),
        method: method.to_string(),
        preprocess_s: 0.0,
        load_s: 0.0,
        solve_s: 0.0,
        objective: None,
        status: String::new(),
        served: 0,
        total,
        service_rate: 0.0,
        cuts_added: 0,
    };

    let variant = variant_spec.variant;

    let outcome = (|| -> Result<(), String> {
        let fees: Option<FeeSchedule> = match &variant_spec.fees {
            None => None,
            Some(FeeSource::Kind(kind)) => Some(make_fixed_fees(inst, *kind)),
            Some(FeeSource::File(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                let schedule = FeeSchedule::from_json(&value).map_err(|e| e.to_string())?;
                schedule.validate(inst).map_err(|e| e.to_string())?;
                Some(schedule)
            }
        };
        match method {
            Method::Exact | Method::Bnb => {
                let started = Instant::now();
                let costs =
                    compute_costs(inst, variant, fees.as_ref()).map_err(|e| e.to_string())?;
                row.preprocess_s = started.elapsed().as_secs_f64();

                let started = Instant::now();
                let solution = match method {
                    Method::Exact => exact::brute_force(inst, &costs),
                    _ => exact::branch_and_bound(inst, &costs),
                }
                .map_err(|e| e.to_string())?;
                row.solve_s = started.elapsed().as_secs_f64();

                let report = verify_solution(inst, &solution, variant, fees.as_ref());
                row.objective = Some(solution.objective);
                row.served = solution.served.len();
                row.status =
                    if report.ok { "OPTIMAL".to_string() } else { "VERIFY_FAILED".to_string() };
            }
            Method::Milp(formulation) => {
                let solver = solver_cmd.as_ref().map_err(|e| e.clone())?;
                let started = Instant::now();
                let costs = if formulation == Formulation::Ip {
                    Some(compute_costs(inst, variant, fees.as_ref()).map_err(|e| e.to_string())?)
                } else {
                    None
                };
                row.preprocess_s = started.elapsed().as_secs_f64();

                let started = Instant::now();
                let model = build(
                    inst,
                    formulation,
                    variant,
                    fees.as_ref(),
                    costs.as_ref(),
                    BuildOptions::default(),
                )
                .map_err(|e| e.to_string())?;
                row.load_s = started.elapsed().as_secs_f64();

                let started = Instant::now();
                let outcome = solve_with_cuts(&model, solver, Some(time_limit), false)
                    .map_err(|e| e.to_string())?;
                row.solve_s = started.elapsed().as_secs_f64();
                row.cuts_added = outcome.cuts_added;

                match outcome.status {
                    SolveStatus::Optimal | SolveStatus::Feasible => {
                        match mcfod_core::milp::extract(inst, &model, &outcome, fees.as_ref()) {
                            Ok(solution) => {
                                row.objective = Some(solution.objective);
                                row.served = solution.served.len();
                                let report =
                                    verify_solution(inst, &solution, variant, fees.as_ref());
                                row.status = match (outcome.status, report.ok) {
                                    (SolveStatus::Optimal, true) => "OPTIMAL".to_string(),
                                    (SolveStatus::Optimal, false) => "VERIFY_FAILED".to_string(),
                                    // A feasible-but-unproven incumbent is
                                    // reported as such even when it verifies.
                                    (_, true) => "FEASIBLE".to_string(),
                                    (_, false) => "VERIFY_FAILED".to_string(),
                                };
                            }
                            Err(error) => {
                                row.objective = outcome.objective;
                                row.status = format!("DECODE_FAILED: {error}");
                            }
                        }
                    }
                    status => row.status = status.to_string(),
                }
            }
        }
        Ok(())
    })();

    if let Err(error) = outcome {
        row.status = format!("ERROR: {error}");
    }
    if row.total > 0 {
        row.service_rate = 100.0 * row.served as f64 / row.total as f64;
    }
    row
}

/// Writes result rows as CSV (UTF-8, header row) to any writer.
pub fn write_rows_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<(), String> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| e.to_string())?;
    }
    writer.flush().map_err(|e| e.to_string())
}

/// One line of the per-group summary: averages for a (node count, fee
/// kind) group, one column per variant in the fixed order optimistic,
/// relaxed, free.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub nodes: u32,
    pub fees: String,
    pub metric: String,
    pub mcfod_f: Option<f64>,
    pub rmcfod_f: Option<f64>,
    pub mcfod: Option<f64>,
}

/// Groups solved rows by (node count, fee kind) and averages service rate
/// and profit per variant.  Only rows whose status is `OPTIMAL` count —
/// mixing proven optima with incumbents or failures would skew the means.
/// Free-fee rows carry no fee kind and join every fee group of their node
/// size (their column is the same either way).
pub fn report_service_profit(rows: &[ResultRow]) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;

    #[derive(Default)]
    struct Acc {
        rate_sum: f64,
        profit_sum: f64,
        count: usize,
    }
    impl Acc {
        fn push(&mut self, row: &ResultRow) {
            self.rate_sum += row.service_rate;
            self.profit_sum += row.objective.unwrap_or(0.0);
            self.count += 1;
        }
        fn rate(&self) -> Option<f64> {
            (self.count > 0).then(|| self.rate_sum / self.count as f64)
        }
        fn profit(&self) -> Option<f64> {
            (self.count > 0).then(|| self.profit_sum / self.count as f64)
        }
    }

    let solved: Vec<&ResultRow> = rows.iter().filter(|row| row.status == "OPTIMAL").collect();

    // Fee kinds present per node size; "-" when only free-fee rows exist.
    let mut fee_groups: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for row in &solved {
        let kinds = fee_groups.entry(row.nodes).or_default();
        let kind = row.variant.split_once(':').map(|(_, k)| k.to_string());
        if let Some(kind) = kind {
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
    }
    for kinds in fee_groups.values_mut() {
        if kinds.is_empty() {
            kinds.push("-".to_string());
        }
        kinds.sort();
    }

    let mut out = Vec::new();
    for (&nodes, kinds) in &fee_groups {
        for kind in kinds {
            // Column accumulators: optimistic, relaxed, free.
            let mut optimistic = Acc::default();
            let mut relaxed = Acc::default();
            let mut free = Acc::default();
            for row in &solved {
                if row.nodes != nodes {
                    continue;
                }
                let (name, row_kind) = match row.variant.split_once(':') {
                    Some((name, k)) => (name, Some(k)),
                    None => (row.variant.as_str(), None),
                };
                match (name, row_kind) {
                    ("FREE", _) => free.push(row),
                    ("FIXED_OPTIMISTIC", Some(k)) if k == kind => optimistic.push(row),
                    ("FIXED_RELAXED", Some(k)) if k == kind => relaxed.push(row),
                    _ => {}
                }
            }
            out.push(SummaryRow {
                nodes,
                fees: kind.clone(),
                metric: "profit".to_string(),
                mcfod_f: optimistic.profit(),
                rmcfod_f: relaxed.profit(),
                mcfod: free.profit(),
            });
            out.push(SummaryRow {
                nodes,
                fees: kind.clone(),
                metric: "service_rate".to_string(),
                mcfod_f: optimistic.rate(),
                rmcfod_f: relaxed.rate(),
                mcfod: free.rate(),
            });
        }
    }
    out
}

/// Writes summary rows as CSV.
pub fn write_summary_csv<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<(), String> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| e.to_string())?;
    }
    writer.flush().map_err(|e| e.to_string())
}

/// Renders the service-rate summary as a small static SVG bar chart, one
/// bar group per (node count, fee kind), bars ordered optimistic,
/// relaxed, free.
pub fn write_service_rate_plot(summary: &[SummaryRow], path: &Path) -> Result<(), String> {
    let groups: Vec<&SummaryRow> =
        summary.iter().filter(|row| row.metric == "service_rate").collect();
    let group_width = 110.0;
    let width = 60.0 + group_width * groups.len().max(1) as f64;
    let height = 260.0;
    let base = 200.0;
    let scale = 1.6; // pixels per percentage point

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    svg.push_str(&format!(
        " <line x1=\"40\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"#333\"/>\n",
        width - 10.0
    ));
    svg.push_str(" <text x=\"6\" y=\"44\">rate %</text>\n");
    for (g, row) in groups.iter().enumerate() {
        let x0 = 50.0 + group_width * g as f64;
        let bars = [
            (row.mcfod_f, "#c66", "MCFOD_F"),
            (row.rmcfod_f, "#66c", "rMCFOD_F"),
            (row.mcfod, "#3a3", "MCFOD"),
        ];
        for (b, (value, color, label)) in bars.iter().enumerate() {
            if let Some(value) = value {
                let h = value.clamp(0.0, 100.0) * scale;
                let x = x0 + 30.0 * b as f64;
                svg.push_str(&format!(
                    " <rect x=\"{x}\" y=\"{}\" width=\"24\" height=\"{h}\" fill=\"{color}\">\
                     <title>{label}: {value:.2}%</title></rect>\n",
                    base - h
                ));
            }
        }
        svg.push_str(&format!(
            " <text x=\"{x0}\" y=\"{}\">n={} fees={}</text>\n",
            base + 16.0,
            row.nodes,
            row.fees
        ));
    }
    // Legend.
    for (i, (color, label)) in
        [("#c66", "MCFOD_F"), ("#66c", "rMCFOD_F"), ("#3a3", "MCFOD")].iter().enumerate()
    {
        let y = 20.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            " <rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            width - 110.0,
            y - 10.0
        ));
        svg.push_str(&format!(" <text x=\"{}\" y=\"{y}\">{label}</text>\n", width - 92.0));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| format!("{}: {e}", path.display()))
}
