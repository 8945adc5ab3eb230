//! Mixed-integer formulations and the external-solver bridge.
//!
//! Four formulations of the same game are supported, trading row count
//! against relaxation strength:
//!
//! * **EP** — node-arc form with per-carrier leg variables; routing variables
//!   may stay continuous because any fractional routing is a convex mixture
//!   of whole routes;
//! * **EF** — hub-assignment form with binary routing and one leg-cost
//!   variable per (commodity, hub);
//! * **IF** — like EF but with a single aggregated leg-cost variable per
//!   commodity side;
//! * **IP** — pair-assignment form over precomputed serving costs, one
//!   variable per (commodity, entry carrier, exit carrier).
//!
//! Each builds for the free-fee game or either fixed-fee convention.  Models
//! are emitted as free-format MPS and solved through a pluggable external
//! command ([`bridge`]); leg-cost rows of EF/IF can be withheld and separated
//! lazily ([`bridge::solve_with_cuts`]).

mod build;
mod bridge;
mod extract;
mod mps;

pub use bridge::{bridge_solve, solve_with_cuts, SolveOutcome, SolveStatus};
pub use build::{build, BuildOptions, Formulation};
pub use extract::extract;
pub use mps::emit_mps;

use crate::model::{CarrierId, NodeId, Variant};
use std::collections::HashMap;

/// Errors from building, solving or decoding MILP models.
#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("variant {variant} requires a fee schedule, none was supplied")]
    MissingFees { variant: Variant },
    #[error("variant FREE takes no fee schedule, but one was supplied")]
    UnexpectedFees,
    #[error("the pair-assignment formulation needs a precomputed cost tensor")]
    MissingCosts,
    #[error("cost tensor was computed for variant {tensor}, model requested {requested}")]
    CostVariantMismatch { tensor: Variant, requested: Variant },
    #[error("solver command is empty or has no {{mps}} placeholder: {template:?}")]
    BadCommand { template: String },
    #[error("failed to launch solver {command:?}: {source}")]
    Launch { command: String, source: std::io::Error },
    #[error("solver exited with {status}; stderr: {stderr}")]
    SolverFailed { status: String, stderr: String },
    #[error("cannot parse solution file: {reason}")]
    BadSolution { reason: String },
    #[error("lazy-cut loop did not close after {resolves} re-solves")]
    CutLoopDiverged { resolves: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Continuous or integral variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Integer restricted to {0, 1}.
    Binary,
    /// Continuous with the stated bounds.
    Continuous,
}

/// What a variable means, for decoding solver output back into a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarRole {
    /// Commodity `r` is served.
    Serve { r: usize },
    /// Carrier `k` is allocated to non-hub `node`.
    Assign { node: NodeId, k: CarrierId },
    /// Commodity `r` routed over inter-hub arc `(i, j)`.
    Route { r: usize, i: NodeId, j: NodeId },
    /// Carrier `k` runs the first leg of `r` into hub `i`.
    EntryLeg { r: usize, k: CarrierId, i: NodeId },
    /// Carrier `k` runs the last leg of `r` out of hub `i`.
    ExitLeg { r: usize, k: CarrierId, i: NodeId },
    /// First-leg cost charged to `r` at entry hub `i`.
    EntryCost { r: usize, i: NodeId },
    /// Last-leg cost charged to `r` at exit hub `i`.
    ExitCost { r: usize, i: NodeId },
    /// Aggregated first-leg cost of `r`.
    EntryCostAgg { r: usize },
    /// Aggregated last-leg cost of `r`.
    ExitCostAgg { r: usize },
    /// Commodity `r` served with entry carrier `k` and exit carrier `l`
    /// along the tensor's witness `route`.
    PairServe { r: usize, k: CarrierId, l: CarrierId, route: (NodeId, NodeId) },
}

/// One variable: objective coefficient, bounds, integrality and meaning.
#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// Objective coefficient in the *maximisation* objective.
    pub objective: f64,
    pub lower: f64,
    /// `f64::INFINITY` for unbounded.
    pub upper: f64,
    pub role: VarRole,
}

/// Row comparison sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

/// One linear row: `sum(coeff * var) sense rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub sense: RowSense,
    pub rhs: f64,
    /// (variable index, coefficient), one entry per variable, ascending.
    pub terms: Vec<(usize, f64)>,
}

impl Row {
    /// Signed slack of the row at `values`: nonnegative iff satisfied.
    /// For equality rows, the negated absolute residual.
    pub fn slack(&self, values: &[f64]) -> f64 {
        let lhs: f64 = self.terms.iter().map(|&(v, c)| c * values[v]).sum();
        match self.sense {
            RowSense::Le => self.rhs - lhs,
            RowSense::Ge => lhs - self.rhs,
            RowSense::Eq => -(lhs - self.rhs).abs(),
        }
    }
}

/// A built model: maximisation objective over the variables, active rows,
/// and any deferred rows withheld for lazy separation.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub name: String,
    pub formulation: Formulation,
    pub variant: Variant,
    pub(crate) vars: Vec<Variable>,
    pub(crate) rows: Vec<Row>,
    /// Rows withheld from the initial relaxation; [`bridge::solve_with_cuts`]
    /// separates them at incumbents.
    pub(crate) deferred: Vec<Row>,
    pub(crate) by_name: HashMap<String, usize>,
}

impl MilpModel {
    pub(crate) fn new(name: String, formulation: Formulation, variant: Variant) -> Self {
        MilpModel {
            name,
            formulation,
            variant,
            vars: Vec::new(),
            rows: Vec::new(),
            deferred: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub(crate) fn add_var(
        &mut self,
        name: String,
        kind: VarKind,
        objective: f64,
        lower: f64,
        upper: f64,
        role: VarRole,
    ) -> usize {
        debug_assert!(!self.by_name.contains_key(&name), "duplicate variable {name}");
        let index = self.vars.len();
        self.by_name.insert(name.clone(), index);
        self.vars.push(Variable { name, kind, objective, lower, upper, role });
        index
    }

    pub(crate) fn add_row(&mut self, name: String, sense: RowSense, rhs: f64, terms: Vec<(usize, f64)>) {
        self.rows.push(Row { name, sense, rhs, terms });
    }

    pub(crate) fn defer_row(
        &mut self,
        name: String,
        sense: RowSense,
        rhs: f64,
        terms: Vec<(usize, f64)>,
    ) {
        self.deferred.push(Row { name, sense, rhs, terms });
    }

    /// All variables, in column order.
    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    /// Active rows, in emission order.
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Deferred (lazily separated) rows.
    pub fn deferred_rows(&self) -> &[Row] {
        &self.deferred
    }

    /// Column index of a variable name, if any.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// Objective value of a point, in the maximisation sense.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, &x)| v.objective * x).sum()
    }
}
