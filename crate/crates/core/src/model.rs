//! Instance data model: nodes, hubs, carriers, commodities, leader-side
//! inter-hub costs, carrier reservation prices, fee schedules, allocations
//! and solutions.
//!
//! Conventions used throughout the crate:
//!
//! * node and carrier ids are 1-based, matching the on-disk format;
//! * commodities are addressed by 0-based index in the Rust API, while every
//!   outward-facing artifact (JSON files, CSV reports, MPS row/column names,
//!   verification records) uses the 1-based id;
//! * an absent reservation-price entry means the carrier cannot operate that
//!   leg at all — absence is meaningful and is never conflated with a zero
//!   price;
//! * money-valued comparisons use the absolute tolerance [`MONEY_EPS`].

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

/// 1-based node identifier.
pub type NodeId = u32;
/// 1-based carrier identifier.
pub type CarrierId = u32;

/// Absolute tolerance for comparing money-valued quantities (costs, fees,
/// margins, objective values).
pub const MONEY_EPS: f64 = 1e-9;

/// Absolute tolerance when rounding a relaxed binary variable back to an
/// integer during solution decoding.
pub const INTEGRALITY_EPS: f64 = 1e-6;

/// Which game the leader is playing: free fees, or fees fixed up front with
/// one of two carrier-response conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Fees are leader decision variables (the full bilevel problem).
    Free,
    /// Fees are fixed; carriers serve only their most profitable acceptable
    /// hubs, with ties broken in the leader's favour.
    FixedOptimistic,
    /// Fees are fixed; carriers accept any hub whose fee covers the
    /// reservation price, regardless of profitability ranking.
    FixedRelaxed,
}

impl Variant {
    /// Carrier-response convention used when evaluating or verifying a
    /// solution of this variant.  Free fees are synthesised so that intended
    /// hubs are weakly optimal for the carriers, which is exactly the
    /// optimistic convention.
    pub fn response_mode(self) -> ResponseMode {
        match self {
            Variant::Free | Variant::FixedOptimistic => ResponseMode::Optimistic,
            Variant::FixedRelaxed => ResponseMode::Relaxed,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Free => "FREE",
            Variant::FixedOptimistic => "FIXED_OPTIMISTIC",
            Variant::FixedRelaxed => "FIXED_RELAXED",
        };
        f.write_str(s)
    }
}

/// How a carrier chooses among hubs once fees are posted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResponseMode {
    /// Only margin-maximising hubs are acceptable (and only when the best
    /// margin is nonnegative).
    Optimistic,
    /// Every hub with nonnegative margin is acceptable.
    Relaxed,
}

/// One origin-destination demand with its prize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commodity {
    /// Origin node (may be a hub).
    pub origin: NodeId,
    /// Destination node (may be a hub).
    pub destination: NodeId,
    /// Shipped volume; strictly positive.  Cost and price fields of the
    /// instance are already volume-scaled, so the solvers never multiply by
    /// this again — it is carried for reporting and generation.
    pub demand: f64,
    /// Revenue collected if (and only if) the commodity is served.
    pub revenue: f64,
}

/// A problem instance.
///
/// Construct via [`Instance::new`] (which validates) or [`load_instance`].
/// Instances are immutable after construction; preprocessing steps return new
/// instances instead of mutating.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub(crate) node_count: u32,
    /// Sorted, deduplicated hub ids.
    pub(crate) hubs: Vec<NodeId>,
    pub(crate) carrier_count: u32,
    pub(crate) commodities: Vec<Commodity>,
    /// Inter-hub arc cost per commodity, keyed by (commodity index, tail,
    /// head).  An absent non-loop key means the arc does not exist (yet);
    /// an absent loop key means a zero-cost loop.
    pub(crate) leader_cost: BTreeMap<(usize, NodeId, NodeId), f64>,
    /// First-leg reservation price, keyed by (commodity index, carrier,
    /// entry hub).  Absent key: the carrier cannot run that leg.
    pub(crate) access_price: BTreeMap<(usize, CarrierId, NodeId), f64>,
    /// Last-leg reservation price, keyed by (commodity index, carrier,
    /// exit hub).
    pub(crate) dist_price: BTreeMap<(usize, CarrierId, NodeId), f64>,
    /// Free-form provenance (generator name, seed, source files, ...).
    pub(crate) metadata: serde_json::Map<String, serde_json::Value>,
}

impl Instance {
    /// Builds and validates an instance from its parts.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        node_count: u32,
        hubs: Vec<NodeId>,
        carrier_count: u32,
        commodities: Vec<Commodity>,
        leader_cost: BTreeMap<(usize, NodeId, NodeId), f64>,
        access_price: BTreeMap<(usize, CarrierId, NodeId), f64>,
        dist_price: BTreeMap<(usize, CarrierId, NodeId), f64>,
        metadata: serde_json::Map<String, serde_json::Value>,
    ) -> Result<Self, ModelError> {
        let mut hubs = hubs;
        hubs.sort_unstable();
        let inst = Instance {
            node_count,
            hubs,
            carrier_count,
            commodities,
            leader_cost,
            access_price,
            dist_price,
            metadata,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), ModelError> {
        fn err(path: impl Into<String>, message: impl Into<String>) -> Result<(), ModelError> {
            Err(ModelError::Validation {
                path: path.into(),
                message: message.into(),
            })
        }

        if self.node_count == 0 {
            return err("nodes", "instance must have at least one node");
        }
        if self.carrier_count == 0 {
            return err("carriers", "instance must have at least one carrier");
        }
        if self.hubs.is_empty() {
            return err("hubs", "instance must have at least one hub");
        }
        for w in self.hubs.windows(2) {
            if w[0] == w[1] {
                return err("hubs", format!("duplicate hub id {}", w[0]));
            }
        }
        for &h in &self.hubs {
            if h == 0 || h > self.node_count {
                return err("hubs", format!("hub id {h} out of range 1..={}", self.node_count));
            }
        }
        for (idx, c) in self.commodities.iter().enumerate() {
            let path = format!("commodities[{}]", idx + 1);
            for (field, node) in [("o", c.origin), ("d", c.destination)] {
                if node == 0 || node > self.node_count {
                    return err(
                        format!("{path}.{field}"),
                        format!("node id {node} out of range 1..={}", self.node_count),
                    );
                }
            }
            if c.origin == c.destination {
                return err(format!("{path}.d"), "origin and destination coincide");
            }
            if !(c.demand > 0.0) || !c.demand.is_finite() {
                return err(format!("{path}.w"), format!("demand must be finite and positive, got {}", c.demand));
            }
            if !(c.revenue > 0.0) || !c.revenue.is_finite() {
                return err(format!("{path}.b"), format!("revenue must be finite and positive, got {}", c.revenue));
            }
        }
        for (&(r, i, j), &c) in &self.leader_cost {
            let path = format!("leader_cost[r={},i={i},j={j}]", r + 1);
            if r >= self.commodities.len() {
                return err(&path, "unknown commodity");
            }
            if !self.is_hub(i) || !self.is_hub(j) {
                return err(&path, "endpoint is not a hub");
            }
            if !c.is_finite() || c < 0.0 {
                return err(&path, format!("cost must be finite and nonnegative, got {c}"));
            }
        }
        for (label, map, endpoint) in [
            ("access_price", &self.access_price, 0usize),
            ("dist_price", &self.dist_price, 1usize),
        ] {
            for (&(r, k, i), &c) in map {
                let path = format!("{label}[r={},k={k},i={i}]", r + 1);
                if r >= self.commodities.len() {
                    return err(&path, "unknown commodity");
                }
                if k == 0 || k > self.carrier_count {
                    return err(&path, format!("carrier id {k} out of range 1..={}", self.carrier_count));
                }
                if !self.is_hub(i) {
                    return err(&path, format!("node {i} is not a hub"));
                }
                let node = if endpoint == 0 {
                    self.commodities[r].origin
                } else {
                    self.commodities[r].destination
                };
                if self.is_hub(node) {
                    return err(
                        &path,
                        "price entry for a leg that does not exist (commodity endpoint is a hub)",
                    );
                }
                if !c.is_finite() || c <= 0.0 {
                    return err(&path, format!("reservation price must be finite and positive, got {c}"));
                }
            }
        }
        Ok(())
    }

    /// Number of nodes; ids are `1..=node_count()`.
    #[inline]
    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    /// All node ids in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.node_count
    }

    /// Hub ids, ascending.
    #[inline]
    pub fn hubs(&self) -> &[NodeId] {
        &self.hubs
    }

    /// Whether `node` is a hub.
    #[inline]
    pub fn is_hub(&self, node: NodeId) -> bool {
        self.hubs.binary_search(&node).is_ok()
    }

    /// Non-hub node ids, ascending.
    pub fn non_hubs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&n| !self.is_hub(n))
    }

    /// Number of carriers; ids are `1..=carrier_count()`.
    #[inline]
    pub fn carrier_count(&self) -> u32 {
        self.carrier_count
    }

    /// All carrier ids in ascending order.
    pub fn carriers(&self) -> impl Iterator<Item = CarrierId> {
        1..=self.carrier_count
    }

    /// Number of commodities.
    #[inline]
    pub fn commodity_count(&self) -> usize {
        self.commodities.len()
    }

    /// All commodities, in index order.
    #[inline]
    pub fn commodities(&self) -> &[Commodity] {
        &self.commodities
    }

    /// The commodity at 0-based index `r`.
    #[inline]
    pub fn commodity(&self, r: usize) -> &Commodity {
        &self.commodities[r]
    }

    /// Inter-hub arc cost for commodity `r` on `(i, j)`.  Loops default to
    /// zero when no entry is stored; a missing non-loop entry means the arc
    /// is not (yet) part of the network and yields `None`.
    #[inline]
    pub fn leader_cost(&self, r: usize, i: NodeId, j: NodeId) -> Option<f64> {
        match self.leader_cost.get(&(r, i, j)) {
            Some(&c) => Some(c),
            None if i == j => Some(0.0),
            None => None,
        }
    }

    /// First-leg reservation price of carrier `k` for commodity `r` into hub
    /// `i`; `None` when the carrier cannot run that leg.
    #[inline]
    pub fn access_price(&self, r: usize, k: CarrierId, i: NodeId) -> Option<f64> {
        self.access_price.get(&(r, k, i)).copied()
    }

    /// Last-leg reservation price of carrier `k` for commodity `r` out of hub
    /// `i`; `None` when the carrier cannot run that leg.
    #[inline]
    pub fn dist_price(&self, r: usize, k: CarrierId, i: NodeId) -> Option<f64> {
        self.dist_price.get(&(r, k, i)).copied()
    }

    /// Provenance metadata.
    pub fn metadata(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.metadata
    }

    /// The inter-hub arcs commodity `r` may be routed on, in lexicographic
    /// order.  Hub endpoints pin the corresponding side of the arc: a hub
    /// origin must enter the network at itself, a hub destination must leave
    /// it at itself, and a commodity between two hubs has exactly the single
    /// arc `(origin, destination)` available.
    pub fn interhub_arcs(&self, r: usize) -> Vec<(NodeId, NodeId)> {
        let c = &self.commodities[r];
        let o_hub = self.is_hub(c.origin);
        let d_hub = self.is_hub(c.destination);
        match (o_hub, d_hub) {
            (true, true) => vec![(c.origin, c.destination)],
            (true, false) => self.hubs.iter().map(|&j| (c.origin, j)).collect(),
            (false, true) => self.hubs.iter().map(|&i| (i, c.destination)).collect(),
            (false, false) => {
                let mut arcs = Vec::with_capacity(self.hubs.len() * self.hubs.len());
                for &i in &self.hubs {
                    for &j in &self.hubs {
                        arcs.push((i, j));
                    }
                }
                arcs
            }
        }
    }
}

/// Assignment of non-hub nodes to carriers.  A node absent from the map is
/// left unallocated (no carrier may serve legs touching it).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Allocation {
    assign: BTreeMap<NodeId, CarrierId>,
}

impl Allocation {
    /// The empty allocation (every node unallocated).
    pub fn new() -> Self {
        Self::default()
    }

    /// Allocates `node` to `carrier` (replacing any previous assignment).
    pub fn set(&mut self, node: NodeId, carrier: CarrierId) {
        self.assign.insert(node, carrier);
    }

    /// Removes any assignment for `node`.
    pub fn clear(&mut self, node: NodeId) {
        self.assign.remove(&node);
    }

    /// Carrier allocated to `node`, if any.
    #[inline]
    pub fn get(&self, node: NodeId) -> Option<CarrierId> {
        self.assign.get(&node).copied()
    }

    /// Allocated (node, carrier) pairs in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, CarrierId)> + '_ {
        self.assign.iter().map(|(&n, &k)| (n, k))
    }

    /// Checks that every assigned node is a non-hub of `instance` and every
    /// carrier id is in range.
    pub fn validate(&self, instance: &Instance) -> Result<(), ModelError> {
        for (&node, &k) in &self.assign {
            if node == 0 || node > instance.node_count() || instance.is_hub(node) {
                return Err(ModelError::Validation {
                    path: format!("allocation[{node}]"),
                    message: "allocated node is not a non-hub node of the instance".into(),
                });
            }
            if k == 0 || k > instance.carrier_count() {
                return Err(ModelError::Validation {
                    path: format!("allocation[{node}]"),
                    message: format!("carrier id {k} out of range 1..={}", instance.carrier_count()),
                });
            }
        }
        Ok(())
    }
}

/// Posted outsourcing fees: `first_leg[(r, i)]` is paid to the carrier
/// bringing commodity `r` from its origin to hub `i`, `third_leg[(r, i)]`
/// for the leg from hub `i` to the destination.  Entries exist exactly for
/// the commodities whose corresponding endpoint is a non-hub (hub endpoints
/// have no outsourced leg), and cover every hub.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeeSchedule {
    pub(crate) first_leg: BTreeMap<(usize, NodeId), f64>,
    pub(crate) third_leg: BTreeMap<(usize, NodeId), f64>,
}

impl FeeSchedule {
    /// Creates an empty schedule; fill via [`FeeSchedule::set_first_leg`] /
    /// [`FeeSchedule::set_third_leg`].
    pub fn new() -> Self {
        Self::default()
    }

    /// A schedule with every fee zero, shaped for `instance` (entries for
    /// each hub of each commodity with the corresponding non-hub endpoint).
    pub fn zero(instance: &Instance) -> Self {
        let mut fees = FeeSchedule::new();
        for r in 0..instance.commodity_count() {
            let c = instance.commodity(r);
            for &h in instance.hubs() {
                if !instance.is_hub(c.origin) {
                    fees.first_leg.insert((r, h), 0.0);
                }
                if !instance.is_hub(c.destination) {
                    fees.third_leg.insert((r, h), 0.0);
                }
            }
        }
        fees
    }

    /// Sets the first-leg fee for commodity `r` into hub `i`.
    pub fn set_first_leg(&mut self, r: usize, i: NodeId, value: f64) {
        self.first_leg.insert((r, i), value);
    }

    /// Sets the third-leg fee for commodity `r` out of hub `i`.
    pub fn set_third_leg(&mut self, r: usize, i: NodeId, value: f64) {
        self.third_leg.insert((r, i), value);
    }

    /// First-leg fee for commodity `r` into hub `i`.
    #[inline]
    pub fn first_leg(&self, r: usize, i: NodeId) -> Option<f64> {
        self.first_leg.get(&(r, i)).copied()
    }

    /// Third-leg fee for commodity `r` out of hub `i`.
    #[inline]
    pub fn third_leg(&self, r: usize, i: NodeId) -> Option<f64> {
        self.third_leg.get(&(r, i)).copied()
    }

    /// Checks shape against `instance`: entries present exactly for non-hub
    /// endpoints, covering every hub, all values finite and nonnegative.
    pub fn validate(&self, instance: &Instance) -> Result<(), ModelError> {
        let check = |leg: &str,
                     map: &BTreeMap<(usize, NodeId), f64>,
                     wants_entries: &dyn Fn(usize) -> bool|
         -> Result<(), ModelError> {
            let fail = |path: String, message: String| {
                Err(ModelError::Validation { path, message })
            };
            for (&(r, i), &v) in map {
                let path = format!("{leg}[r={},i={i}]", r + 1);
                if r >= instance.commodity_count() {
                    return fail(path, "unknown commodity".into());
                }
                if !instance.is_hub(i) {
                    return fail(path, format!("node {i} is not a hub"));
                }
                if !wants_entries(r) {
                    return fail(path, "fee posted for a leg that does not exist (endpoint is a hub)".into());
                }
                if !v.is_finite() || v < 0.0 {
                    return fail(path, format!("fee must be finite and nonnegative, got {v}"));
                }
            }
            for r in 0..instance.commodity_count() {
                if wants_entries(r) {
                    for &h in instance.hubs() {
                        if !map.contains_key(&(r, h)) {
                            return fail(
                                format!("{leg}[r={},i={h}]", r + 1),
                                "missing fee entry".into(),
                            );
                        }
                    }
                }
            }
            Ok(())
        };
        check("first_leg", &self.first_leg, &|r| {
            !instance.is_hub(instance.commodity(r).origin)
        })?;
        check("third_leg", &self.third_leg, &|r| {
            !instance.is_hub(instance.commodity(r).destination)
        })?;
        Ok(())
    }

    /// Serialises to the on-disk JSON form (1-based commodity ids, rows
    /// sorted by key).
    pub fn to_json(&self) -> serde_json::Value {
        let rows = |map: &BTreeMap<(usize, NodeId), f64>| -> Vec<serde_json::Value> {
            map.iter()
                .map(|(&(r, i), &v)| {
                    serde_json::json!({"r": r + 1, "i": i, "v": v})
                })
                .collect()
        };
        serde_json::json!({
            "first_leg": rows(&self.first_leg),
            "third_leg": rows(&self.third_leg),
        })
    }

    /// Parses the on-disk JSON form produced by [`FeeSchedule::to_json`].
    pub fn from_json(value: &serde_json::Value) -> Result<Self, ModelError> {
        #[derive(Deserialize)]
        struct Row {
            r: usize,
            i: NodeId,
            v: f64,
        }
        #[derive(Deserialize)]
        struct File {
            #[serde(default)]
            first_leg: Vec<Row>,
            #[serde(default)]
            third_leg: Vec<Row>,
        }
        let file: File = serde_json::from_value(value.clone())?;
        let mut fees = FeeSchedule::new();
        for (rows, map) in [
            (&file.first_leg, &mut fees.first_leg),
            (&file.third_leg, &mut fees.third_leg),
        ] {
            for row in rows {
                if row.r == 0 {
                    return Err(ModelError::Validation {
                        path: "fees".into(),
                        message: "commodity ids are 1-based; got 0".into(),
                    });
                }
                if map.insert((row.r - 1, row.i), row.v).is_some() {
                    return Err(ModelError::Validation {
                        path: format!("fees[r={},i={}]", row.r, row.i),
                        message: "duplicate fee entry".into(),
                    });
                }
            }
        }
        Ok(fees)
    }

    /// Renders the schedule as CSV with columns `leg,r,i,value` (1-based
    /// commodity ids, first-leg rows before third-leg rows, keys ascending).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("leg,r,i,value\n");
        for (leg, map) in [("first", &self.first_leg), ("third", &self.third_leg)] {
            for (&(r, i), &v) in map {
                out.push_str(&format!("{leg},{},{i},{v}\n", r + 1));
            }
        }
        out
    }
}

/// A complete leader decision together with its evaluated objective.
///
/// Serialised solutions omit the fee schedule; free-fee schedules are
/// recovered deterministically from the allocation and routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderSolution {
    /// Carrier allocation of the non-hub nodes.
    pub allocation: Allocation,
    /// Indices of served commodities.
    pub served: BTreeSet<usize>,
    /// Chosen inter-hub arc for every served commodity.
    pub routes: BTreeMap<usize, (NodeId, NodeId)>,
    /// Fee schedule: synthesised for free-fee solutions, absent when fees
    /// were fixed externally.
    #[serde(skip)]
    pub fees: Option<FeeSchedule>,
    /// Total profit (prizes minus inter-hub costs minus outsourcing fees).
    pub objective: f64,
}

/// One failed check from solution verification.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    /// 1-based commodity id, when the check concerns a single commodity.
    pub commodity: Option<usize>,
    /// Stable machine-readable check name.
    pub check: String,
    /// What the check expected.
    pub expected: String,
    /// What the solution actually contained.
    pub actual: String,
}

/// Outcome of verifying a solution against an instance.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// True when no check failed.
    pub ok: bool,
    /// All failed checks.
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub(crate) fn clean() -> Self {
        VerificationReport { ok: true, violations: Vec::new() }
    }

    pub(crate) fn push(
        &mut self,
        commodity: Option<usize>,
        check: &str,
        expected: impl Into<String>,
        actual: impl Into<String>,
    ) {
        self.ok = false;
        self.violations.push(Violation {
            commodity,
            check: check.to_string(),
            expected: expected.into(),
            actual: actual.into(),
        });
    }
}

/// Errors from loading, saving or validating model data.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid data at {path}: {message}")]
    Validation { path: String, message: String },
}

// ---------------------------------------------------------------------------
// On-disk instance format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CommodityRow {
    o: NodeId,
    d: NodeId,
    w: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct LeaderCostRow {
    r: usize,
    i: NodeId,
    j: NodeId,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct PriceRow {
    r: usize,
    k: CarrierId,
    i: NodeId,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    nodes: u32,
    hubs: Vec<NodeId>,
    carriers: u32,
    commodities: Vec<CommodityRow>,
    leader_cost: Vec<LeaderCostRow>,
    access_price: Vec<PriceRow>,
    dist_price: Vec<PriceRow>,
    #[serde(default)]
    metadata: serde_json::Map<String, serde_json::Value>,
}

fn file_to_instance(file: InstanceFile) -> Result<Instance, ModelError> {
    let commodity_count = file.commodities.len();
    let to_index = |r: usize, path: &str| -> Result<usize, ModelError> {
        if r == 0 || r > commodity_count {
            Err(ModelError::Validation {
                path: path.to_string(),
                message: format!("commodity id {r} out of range 1..={commodity_count}"),
            })
        } else {
            Ok(r - 1)
        }
    };

    let mut leader_cost = BTreeMap::new();
    for row in &file.leader_cost {
        let path = format!("leader_cost[r={},i={},j={}]", row.r, row.i, row.j);
        let r = to_index(row.r, &path)?;
        if leader_cost.insert((r, row.i, row.j), row.c).is_some() {
            return Err(ModelError::Validation { path, message: "duplicate entry".into() });
        }
    }
    let mut access_price = BTreeMap::new();
    let mut dist_price = BTreeMap::new();
    for (rows, map, label) in [
        (&file.access_price, &mut access_price, "access_price"),
        (&file.dist_price, &mut dist_price, "dist_price"),
    ] {
        for row in rows {
            let path = format!("{label}[r={},k={},i={}]", row.r, row.k, row.i);
            let r = to_index(row.r, &path)?;
            if map.insert((r, row.k, row.i), row.c).is_some() {
                return Err(ModelError::Validation { path, message: "duplicate entry".into() });
            }
        }
    }

    Instance::new(
        file.nodes,
        file.hubs,
        file.carriers,
        file.commodities
            .iter()
            .map(|c| Commodity {
                origin: c.o,
                destination: c.d,
                demand: c.w,
                revenue: c.b,
            })
            .collect(),
        leader_cost,
        access_price,
        dist_price,
        file.metadata,
    )
}

fn instance_to_file(instance: &Instance) -> InstanceFile {
    InstanceFile {
        nodes: instance.node_count,
        hubs: instance.hubs.clone(),
        carriers: instance.carrier_count,
        commodities: instance
            .commodities
            .iter()
            .map(|c| CommodityRow { o: c.origin, d: c.destination, w: c.demand, b: c.revenue })
            .collect(),
        leader_cost: instance
            .leader_cost
            .iter()
            .map(|(&(r, i, j), &c)| LeaderCostRow { r: r + 1, i, j, c })
            .collect(),
        access_price: instance
            .access_price
            .iter()
            .map(|(&(r, k, i), &c)| PriceRow { r: r + 1, k, i, c })
            .collect(),
        dist_price: instance
            .dist_price
            .iter()
            .map(|(&(r, k, i), &c)| PriceRow { r: r + 1, k, i, c })
            .collect(),
        metadata: instance.metadata.clone(),
    }
}

/// Parses an instance from its JSON text form.
pub fn instance_from_json(text: &str) -> Result<Instance, ModelError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file_to_instance(file)
}

/// Renders an instance to its canonical JSON text form: fixed key order,
/// entry lists sorted by (commodity, carrier, node) keys, metadata keys
/// sorted, trailing newline.  Equal instances render byte-identically.
pub fn instance_to_json(instance: &Instance) -> String {
    let mut text = serde_json::to_string_pretty(&instance_to_file(instance))
        .expect("instance serialisation cannot fail");
    text.push('\n');
    text
}

/// Loads and validates an instance from a JSON file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    let text = std::fs::read_to_string(path)?;
    instance_from_json(&text)
}

/// Writes an instance to `path` in the canonical JSON form.
pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, instance_to_json(instance))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_json() -> String {
        serde_json::json!({
            "nodes": 4,
            "hubs": [2, 3],
            "carriers": 1,
            "commodities": [{"o": 1, "d": 4, "w": 2.0, "b": 50.0}],
            "leader_cost": [
                {"r": 1, "i": 2, "j": 3, "c": 5.0},
                {"r": 1, "i": 3, "j": 2, "c": 5.0}
            ],
            "access_price": [
                {"r": 1, "k": 1, "i": 2, "c": 3.0},
                {"r": 1, "k": 1, "i": 3, "c": 4.0}
            ],
            "dist_price": [
                {"r": 1, "k": 1, "i": 2, "c": 6.0},
                {"r": 1, "k": 1, "i": 3, "c": 2.0}
            ],
            "metadata": {"name": "tiny"}
        })
        .to_string()
    }

    #[test]
    fn loads_and_indexes_a_small_instance() {
        let inst = instance_from_json(&tiny_json()).unwrap();
        assert_eq!(inst.node_count(), 4);
        assert_eq!(inst.hubs(), &[2, 3]);
        assert!(inst.is_hub(2) && !inst.is_hub(1));
        assert_eq!(inst.non_hubs().collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(inst.carrier_count(), 1);
        assert_eq!(inst.commodity_count(), 1);
        // 1-based file ids map to 0-based API indices.
        assert_eq!(inst.leader_cost(0, 2, 3), Some(5.0));
        assert_eq!(inst.access_price(0, 1, 2), Some(3.0));
        assert_eq!(inst.dist_price(0, 1, 3), Some(2.0));
        // Absent prices stay absent rather than becoming zero.
        assert_eq!(inst.access_price(0, 1, 99), None);
    }

    #[test]
    fn loops_default_to_zero_but_missing_arcs_stay_missing() {
        let inst = instance_from_json(&tiny_json()).unwrap();
        assert_eq!(inst.leader_cost(0, 2, 2), Some(0.0));
        assert_eq!(inst.leader_cost(0, 3, 3), Some(0.0));
        assert_eq!(inst.leader_cost(0, 99, 99), Some(0.0)); // loops are free everywhere
        assert_eq!(inst.leader_cost(1, 2, 3), None); // unknown commodity, no entry
    }

    #[test]
    fn roundtrip_is_identity() {
        let inst = instance_from_json(&tiny_json()).unwrap();
        let text = instance_to_json(&inst);
        let again = instance_from_json(&text).unwrap();
        assert_eq!(inst, again);
        assert_eq!(text, instance_to_json(&again));
    }

    #[test]
    fn interhub_arcs_follow_endpoint_classes() {
        let json = serde_json::json!({
            "nodes": 5,
            "hubs": [2, 3],
            "carriers": 1,
            "commodities": [
                {"o": 1, "d": 5, "w": 1.0, "b": 10.0},
                {"o": 2, "d": 5, "w": 1.0, "b": 10.0},
                {"o": 1, "d": 3, "w": 1.0, "b": 10.0},
                {"o": 2, "d": 3, "w": 1.0, "b": 10.0}
            ],
            "leader_cost": [],
            "access_price": [],
            "dist_price": [],
            "metadata": {}
        })
        .to_string();
        let inst = instance_from_json(&json).unwrap();
        assert_eq!(inst.interhub_arcs(0), vec![(2, 2), (2, 3), (3, 2), (3, 3)]);
        assert_eq!(inst.interhub_arcs(1), vec![(2, 2), (2, 3)]);
        assert_eq!(inst.interhub_arcs(2), vec![(2, 3), (3, 3)]);
        assert_eq!(inst.interhub_arcs(3), vec![(2, 3)]);
    }

    #[test]
    fn rejects_malformed_instances() {
        let base: serde_json::Value = serde_json::from_str(&tiny_json()).unwrap();
        let reject = |mutate: &dyn Fn(&mut serde_json::Value)| {
            let mut v = base.clone();
            mutate(&mut v);
            let res = instance_from_json(&v.to_string());
            assert!(
                matches!(res, Err(ModelError::Validation { .. })),
                "expected validation failure for {v}"
            );
        };

        reject(&|v| v["hubs"] = serde_json::json!([2, 2]));
        reject(&|v| v["hubs"] = serde_json::json!([9]));
        reject(&|v| v["hubs"] = serde_json::json!([]));
        reject(&|v| v["commodities"][0]["d"] = serde_json::json!(1)); // o == d
        reject(&|v| v["commodities"][0]["w"] = serde_json::json!(0.0));
        reject(&|v| v["commodities"][0]["b"] = serde_json::json!(-3.0));
        reject(&|v| v["leader_cost"][0]["i"] = serde_json::json!(1)); // not a hub
        reject(&|v| v["leader_cost"][0]["c"] = serde_json::json!(-1.0));
        reject(&|v| v["leader_cost"][0]["r"] = serde_json::json!(7)); // unknown commodity
        reject(&|v| v["access_price"][0]["k"] = serde_json::json!(2)); // unknown carrier
        reject(&|v| v["access_price"][0]["c"] = serde_json::json!(0.0)); // prices are positive
        reject(&|v| {
            // duplicate price entry
            let row = v["access_price"][0].clone();
            v["access_price"].as_array_mut().unwrap().push(row);
        });
        reject(&|v| {
            // access entry for a hub-origin commodity: that leg does not exist
            v["commodities"][0]["o"] = serde_json::json!(2);
        });
    }

    #[test]
    fn fee_schedule_shape_is_validated() {
        let inst = instance_from_json(&tiny_json()).unwrap();
        let mut fees = FeeSchedule::zero(&inst);
        assert!(fees.validate(&inst).is_ok());
        fees.set_first_leg(0, 2, 7.5);
        assert_eq!(fees.first_leg(0, 2), Some(7.5));
        assert!(fees.validate(&inst).is_ok());

        // Missing entry.
        let mut missing = fees.clone();
        missing.first_leg.remove(&(0, 3));
        assert!(missing.validate(&inst).is_err());

        // Entry on a non-hub.
        let mut stray = fees.clone();
        stray.set_third_leg(0, 1, 1.0);
        assert!(stray.validate(&inst).is_err());

        // Negative fee.
        let mut negative = fees.clone();
        negative.set_first_leg(0, 2, -0.5);
        assert!(negative.validate(&inst).is_err());
    }

    #[test]
    fn fee_schedule_roundtrips_through_json_and_csv() {
        let inst = instance_from_json(&tiny_json()).unwrap();
        let mut fees = FeeSchedule::zero(&inst);
        fees.set_first_leg(0, 2, 3.0);
        fees.set_third_leg(0, 3, 2.0);
        let json = fees.to_json();
        let back = FeeSchedule::from_json(&json).unwrap();
        assert_eq!(fees, back);
        let csv = fees.to_csv();
        assert!(csv.starts_with("leg,r,i,value\n"));
        assert!(csv.contains("first,1,2,3\n"));
        assert!(csv.contains("third,1,3,2\n"));
    }

    #[test]
    fn allocation_validates_against_instance() {
        let inst = instance_from_json(&tiny_json()).unwrap();
        let mut alloc = Allocation::new();
        alloc.set(1, 1);
        alloc.set(4, 1);
        assert!(alloc.validate(&inst).is_ok());
        assert_eq!(alloc.get(1), Some(1));
        assert_eq!(alloc.get(4), Some(1));
        alloc.clear(4);
        assert_eq!(alloc.get(4), None);

        let mut bad = Allocation::new();
        bad.set(2, 1); // hub
        assert!(bad.validate(&inst).is_err());
        let mut bad2 = Allocation::new();
        bad2.set(1, 9); // unknown carrier
        assert!(bad2.validate(&inst).is_err());
    }
}
