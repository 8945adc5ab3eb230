//! Benchmark-instance synthesis.
//!
//! Instances are derived from raw per-node data (coordinates, a demand
//! matrix, and a unit-cost matrix) by picking hubs near the demand-weighted
//! center of mass and pricing everything off the unit costs with seeded
//! randomness.  The same recipe serves three uses: turning real datasets
//! (CSV) into instances, generating random test corpora, and producing the
//! quadratic-semi-assignment reductions used to sanity-check the solvers.
//!
//! ## Randomness discipline
//!
//! All draws come from ChaCha12 seeded with the configured 64-bit seed and
//! a hand-rolled 53-bit uniform (`lo + (hi-lo)·(next_u64() >> 11)/2^53`),
//! so streams are reproducible across platforms and library upgrades.  The
//! draw order is fixed and documented per function; consuming code must
//! never reorder it, or old seeds stop reproducing old instances.

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::rand_core::{RngCore as _, SeedableRng as _};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    CarrierId, Commodity, FeeSchedule, Instance, ModelError, NodeId,
};

/// 53-bit uniform draw in `[lo, hi)`; the only primitive used for all
/// generated quantities.
fn uniform(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 * SCALE)
}

fn validation(message: impl Into<String>) -> ModelError {
    ModelError::Validation { path: "generator".into(), message: message.into() }
}

// ---------------------------------------------------------------------------
// Raw data
// ---------------------------------------------------------------------------

/// Per-node source data an instance is synthesized from.
///
/// Nodes are implicitly `1..=n` in vector order.  `demand[o-1][d-1]` is the
/// flow from `o` to `d`; `unit_cost[i-1][j-1]` the cost of moving one flow
/// unit from `i` to `j`.  Both have zero diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct RawData {
    coords: Vec<(f64, f64)>,
    demand: Vec<Vec<f64>>,
    unit_cost: Vec<Vec<f64>>,
}

impl RawData {
    /// Validates shapes: square matrices matching the coordinate count,
    /// nonnegative entries, zero diagonals (self-flows are dropped rather
    /// than rejected).
    pub fn new(
        coords: Vec<(f64, f64)>,
        mut demand: Vec<Vec<f64>>,
        unit_cost: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let n = coords.len();
        if n == 0 {
            return Err(validation("raw data needs at least one node"));
        }
        for (name, matrix) in [("demand", &demand), ("unit cost", &unit_cost)] {
            if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                return Err(validation(format!("{name} matrix must be {n}x{n}")));
            }
            for (i, row) in matrix.iter().enumerate() {
                for (j, &value) in row.iter().enumerate() {
                    if !value.is_finite() || value < 0.0 {
                        return Err(validation(format!(
                            "{name}[{}][{}] must be finite and nonnegative, got {value}",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        for (i, row) in unit_cost.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(validation(format!(
                    "unit cost diagonal must be zero, got {} at node {}",
                    row[i],
                    i + 1
                )));
            }
        }
        // Self-flows carry no routing decision; drop them.
        for (i, row) in demand.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        Ok(RawData { coords, demand, unit_cost })
    }

    /// Builds raw data with unit costs set to Euclidean distances between
    /// the coordinates.
    pub fn euclidean(coords: Vec<(f64, f64)>, demand: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let n = coords.len();
        let unit_cost = (0..n)
            .map(|i| (0..n).map(|j| distance(coords[i], coords[j])).collect())
            .collect();
        RawData::new(coords, demand, unit_cost)
    }

    /// Reads `nodes.csv` (`id,x,y`), `demand.csv` (`o,d,w`) and, when
    /// present, `unitcost.csv` (`i,j,c`) from a directory.  Node ids must
    /// be exactly `1..=n`; pairs absent from the demand file mean zero
    /// flow; without a unit-cost file Euclidean distances are used.
    pub fn from_csv_dir(dir: impl AsRef<Path>) -> Result<Self, ModelError> {
        let dir = dir.as_ref();

        #[derive(Deserialize)]
        struct NodeRow {
            id: u32,
            x: f64,
            y: f64,
        }
        let mut nodes: Vec<NodeRow> = read_csv(&dir.join("nodes.csv"))?;
        nodes.sort_by_key(|row| row.id);
        let n = nodes.len();
        for (index, row) in nodes.iter().enumerate() {
            if row.id as usize != index + 1 {
                return Err(validation(format!(
                    "nodes.csv ids must be exactly 1..={n}, found {}",
                    row.id
                )));
            }
        }
        let coords: Vec<(f64, f64)> = nodes.iter().map(|row| (row.x, row.y)).collect();

        #[derive(Deserialize)]
        struct DemandRow {
            o: u32,
            d: u32,
            w: f64,
        }
        let mut demand = vec![vec![0.0; n]; n];
        for row in read_csv::<DemandRow>(&dir.join("demand.csv"))? {
            let (o, d) = in_range(row.o, row.d, n)?;
            demand[o][d] = row.w;
        }

        #[derive(Deserialize)]
        struct CostRow {
            i: u32,
            j: u32,
            c: f64,
        }
        let cost_path = dir.join("unitcost.csv");
        if cost_path.exists() {
            let mut unit_cost = vec![vec![0.0; n]; n];
            for row in read_csv::<CostRow>(&cost_path)? {
                let (i, j) = in_range(row.i, row.j, n)?;
                unit_cost[i][j] = row.c;
            }
            RawData::new(coords, demand, unit_cost)
        } else {
            RawData::euclidean(coords, demand)
        }
    }

    pub fn node_count(&self) -> u32 {
        self.coords.len() as u32
    }

    /// Total flow over all ordered pairs.
    pub fn total_demand(&self) -> f64 {
        self.demand.iter().flatten().sum()
    }

    /// Flow touching a node: everything it sends plus everything it
    /// receives.
    pub fn node_demand(&self, v: NodeId) -> f64 {
        let v = (v - 1) as usize;
        let out: f64 = self.demand[v].iter().sum();
        let inward: f64 = self.demand.iter().map(|row| row[v]).sum();
        out + inward
    }

    pub fn coordinates(&self, v: NodeId) -> (f64, f64) {
        self.coords[(v - 1) as usize]
    }

    pub fn demand_between(&self, o: NodeId, d: NodeId) -> f64 {
        self.demand[(o - 1) as usize][(d - 1) as usize]
    }

    pub fn unit_cost_between(&self, i: NodeId, j: NodeId) -> f64 {
        self.unit_cost[(i - 1) as usize][(j - 1) as usize]
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn in_range(a: u32, b: u32, n: usize) -> Result<(usize, usize), ModelError> {
    if a == 0 || b == 0 || a as usize > n || b as usize > n {
        return Err(validation(format!("node pair ({a}, {b}) outside 1..={n}")));
    }
    Ok(((a - 1) as usize, (b - 1) as usize))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ModelError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| validation(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| validation(format!("{}: {e}", path.display())))
}

/// Random raw data for test corpora: coordinates uniform on `[0,100]^2`,
/// symmetric dense demand uniform on `[1,10)`, Euclidean unit costs.
///
/// Draw order: per node `x` then `y` (ascending id), then one demand value
/// per unordered pair `(o, d)`, `o < d`, lexicographically, mirrored to
/// both directions.
pub fn random_raw(node_count: u32, seed: u64) -> RawData {
    let n = node_count as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let coords: Vec<(f64, f64)> =
        (0..n).map(|_| (uniform(&mut rng, 0.0, 100.0), uniform(&mut rng, 0.0, 100.0))).collect();
    let mut demand = vec![vec![0.0; n]; n];
    for o in 0..n {
        for d in (o + 1)..n {
            let w = uniform(&mut rng, 1.0, 10.0);
            demand[o][d] = w;
            demand[d][o] = w;
        }
    }
    RawData::euclidean(coords, demand).expect("random raw data is valid by construction")
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Knobs of the synthesis recipe, all serde-friendly so configs can be
/// TOML or JSON with partial overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    /// Fraction of nodes that become hubs (count is the ceiling).
    pub tau: f64,
    /// Demand share the hub-selection disc must cover.
    pub mu: f64,
    /// Inter-hub discount on unit costs.
    pub alpha: f64,
    /// Carrier efficiency multiplier range, one draw per (carrier, non-hub).
    pub theta_range: (f64, f64),
    /// Access/distribution arc discount range, one draw per arc.
    pub chi_range: (f64, f64),
    /// Carrier profit margin on reservation prices.
    pub epsilon: f64,
    /// Revenue multiplier range, one draw per commodity.
    pub phi_range: (f64, f64),
    /// Number of carriers.
    pub carriers: u32,
    /// RNG seed; recorded in instance metadata.
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            tau: 0.05,
            mu: 0.6,
            alpha: 0.5,
            theta_range: (0.6, 1.2),
            chi_range: (0.89, 0.99),
            epsilon: 0.01,
            phi_range: (0.25, 0.35),
            carriers: 2,
            seed: 0,
        }
    }
}

impl GenParams {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(validation(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(validation(format!("mu must be in (0, 1], got {}", self.mu)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(validation(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if self.epsilon < 0.0 {
            return Err(validation(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        for (name, (lo, hi)) in [
            ("theta_range", self.theta_range),
            ("chi_range", self.chi_range),
            ("phi_range", self.phi_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > 0.0) {
                return Err(validation(format!("{name} must be well-ordered and positive")));
            }
        }
        if self.carriers == 0 {
            return Err(validation("at least one carrier is required"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Hub selection
// ---------------------------------------------------------------------------

/// Picks `ceil(tau·n)` hubs: grow a disc around the demand-weighted center
/// of mass in steps of 1% of the graph diameter until it covers nodes
/// carrying at least `mu` of the total demand (and enough nodes to fill
/// the hub count), then take the highest-demand covered nodes, smaller ids
/// first on ties.
pub fn select_hubs(raw: &RawData, params: &GenParams) -> Result<Vec<NodeId>, ModelError> {
    params.validate()?;
    let n = raw.node_count();
    let hub_count = ((params.tau * n as f64).ceil() as u32).clamp(1, n);

    let weights: Vec<f64> = (1..=n).map(|v| raw.node_demand(v)).collect();
    let total_weight: f64 = weights.iter().sum();
    let center = if total_weight > 0.0 {
        let x = (1..=n)
            .map(|v| weights[(v - 1) as usize] * raw.coordinates(v).0)
            .sum::<f64>()
            / total_weight;
        let y = (1..=n)
            .map(|v| weights[(v - 1) as usize] * raw.coordinates(v).1)
            .sum::<f64>()
            / total_weight;
        (x, y)
    } else {
        let x = (1..=n).map(|v| raw.coordinates(v).0).sum::<f64>() / n as f64;
        let y = (1..=n).map(|v| raw.coordinates(v).1).sum::<f64>() / n as f64;
        (x, y)
    };

    let mut diameter = 0.0f64;
    for a in 1..=n {
        for b in (a + 1)..=n {
            diameter = diameter.max(distance(raw.coordinates(a), raw.coordinates(b)));
        }
    }
    let increment = (diameter * 0.01).max(f64::MIN_POSITIVE);
    // The coverage target counts per-node totals, whose grand sum is twice
    // the total flow (each unit counted at its origin and destination).
    let target = params.mu * raw.total_demand();

    let mut radius = 0.0;
    let covered = loop {
        let covered: Vec<NodeId> = (1..=n)
            .filter(|&v| distance(raw.coordinates(v), center) <= radius)
            .collect();
        let covered_weight: f64 = covered.iter().map(|&v| weights[(v - 1) as usize]).sum();
        if (covered_weight >= target && covered.len() as u32 >= hub_count)
            || covered.len() as u32 == n
        {
            break covered;
        }
        radius += increment;
    };

    let mut ranked = covered;
    ranked.sort_by(|&a, &b| {
        weights[(b - 1) as usize]
            .total_cmp(&weights[(a - 1) as usize])
            .then(a.cmp(&b))
    });
    let mut hubs: Vec<NodeId> = ranked.into_iter().take(hub_count as usize).collect();
    hubs.sort_unstable();
    Ok(hubs)
}

// ---------------------------------------------------------------------------
// Instance synthesis
// ---------------------------------------------------------------------------

/// Builds an instance from raw data and a hub choice.
///
/// Commodities are every ordered pair with positive flow, in lexicographic
/// order.  All money amounts are volume-scaled by the commodity's flow `w`:
///
/// * inter-hub cost `c = w·alpha·unit_cost(i,j)` on every hub pair;
/// * reservation prices `w·theta(k, endpoint)·chi(arc)·unit_cost(arc)·(1+epsilon)`
///   on every (commodity, carrier, hub) with a non-hub endpoint — access
///   uses the origin's theta and the `(origin, hub)` arc, distribution the
///   destination's theta and the `(hub, destination)` arc;
/// * revenue `w·phi·avg_{(i,j) over all hub pairs, loops included}
///   [unit_cost(o,i) + alpha·unit_cost(i,j) + unit_cost(j,d)]`.
///
/// Draw order: theta per (carrier, non-hub) carrier-major, then chi per
/// access/distribution arc in `(tail, head)` lexicographic order, then phi
/// per commodity.
pub fn build_instance(
    raw: &RawData,
    hubs: &[NodeId],
    params: &GenParams,
) -> Result<Instance, ModelError> {
    params.validate()?;
    let n = raw.node_count();
    if hubs.is_empty() {
        return Err(validation("at least one hub is required"));
    }
    let mut hubs = hubs.to_vec();
    hubs.sort_unstable();
    hubs.dedup();
    if hubs.iter().any(|&h| h == 0 || h > n) {
        return Err(validation(format!("hub ids must lie in 1..={n}")));
    }
    let non_hubs: Vec<NodeId> = (1..=n).filter(|v| !hubs.contains(v)).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let (theta_lo, theta_hi) = params.theta_range;
    let mut theta: BTreeMap<(CarrierId, NodeId), f64> = BTreeMap::new();
    for k in 1..=params.carriers {
        for &v in &non_hubs {
            theta.insert((k, v), uniform(&mut rng, theta_lo, theta_hi));
        }
    }
    let (chi_lo, chi_hi) = params.chi_range;
    let mut arcs: Vec<(NodeId, NodeId)> = Vec::new();
    for &v in &non_hubs {
        for &h in &hubs {
            arcs.push((v, h));
            arcs.push((h, v));
        }
    }
    arcs.sort_unstable();
    let mut chi: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for &arc in &arcs {
        chi.insert(arc, uniform(&mut rng, chi_lo, chi_hi));
    }

    let mut commodities: Vec<Commodity> = Vec::new();
    for o in 1..=n {
        for d in 1..=n {
            if o == d {
                continue;
            }
            let w = raw.demand_between(o, d);
            if w > 0.0 {
                commodities.push(Commodity { origin: o, destination: d, demand: w, revenue: 0.0 });
            }
        }
    }
    let (phi_lo, phi_hi) = params.phi_range;
    let hub_pairs = (hubs.len() * hubs.len()) as f64;
    for commodity in &mut commodities {
        let phi = uniform(&mut rng, phi_lo, phi_hi);
        let mut lambda_sum = 0.0;
        for &i in &hubs {
            for &j in &hubs {
                lambda_sum += raw.unit_cost_between(commodity.origin, i)
                    + params.alpha * raw.unit_cost_between(i, j)
                    + raw.unit_cost_between(j, commodity.destination);
            }
        }
        commodity.revenue = commodity.demand * phi * lambda_sum / hub_pairs;
    }

    let is_hub = |v: NodeId| hubs.binary_search(&v).is_ok();
    let mut leader_cost: BTreeMap<(usize, NodeId, NodeId), f64> = BTreeMap::new();
    let mut access_price: BTreeMap<(usize, CarrierId, NodeId), f64> = BTreeMap::new();
    let mut dist_price: BTreeMap<(usize, CarrierId, NodeId), f64> = BTreeMap::new();
    let margin = 1.0 + params.epsilon;
    for (r, commodity) in commodities.iter().enumerate() {
        let w = commodity.demand;
        for &i in &hubs {
            for &j in &hubs {
                if i != j {
                    leader_cost
                        .insert((r, i, j), w * params.alpha * raw.unit_cost_between(i, j));
                }
            }
        }
        if !is_hub(commodity.origin) {
            for k in 1..=params.carriers {
                for &i in &hubs {
                    let price = w
                        * theta[&(k, commodity.origin)]
                        * chi[&(commodity.origin, i)]
                        * raw.unit_cost_between(commodity.origin, i)
                        * margin;
                    access_price.insert((r, k, i), price);
                }
            }
        }
        if !is_hub(commodity.destination) {
            for k in 1..=params.carriers {
                for &i in &hubs {
                    let price = w
                        * theta[&(k, commodity.destination)]
                        * chi[&(i, commodity.destination)]
                        * raw.unit_cost_between(i, commodity.destination)
                        * margin;
                    dist_price.insert((r, k, i), price);
                }
            }
        }
    }

    let mut metadata = serde_json::Map::new();
    metadata.insert("generator".into(), serde_json::json!("center-of-mass-recipe"));
    metadata.insert("seed".into(), serde_json::json!(params.seed));
    metadata.insert(
        "params".into(),
        serde_json::to_value(params).expect("params serialize").clone(),
    );
    Instance::new(
        n,
        hubs,
        params.carriers,
        commodities,
        leader_cost,
        access_price,
        dist_price,
        metadata,
    )
}

// ---------------------------------------------------------------------------
// Fixed-fee schedules
// ---------------------------------------------------------------------------

/// How to collapse per-carrier reservation prices into one posted fee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeeKind {
    /// Highest reservation price among carriers holding the arc — every
    /// such carrier finds the offer acceptable.
    Max,
    /// Arithmetic mean over carriers holding the arc.
    Avg,
}

impl std::fmt::Display for FeeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeeKind::Max => "MAX",
            FeeKind::Avg => "AVG",
        })
    }
}

impl std::str::FromStr for FeeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MAX" => Ok(FeeKind::Max),
            "AVG" => Ok(FeeKind::Avg),
            other => Err(format!("unknown fee kind {other:?}, expected MAX or AVG")),
        }
    }
}

/// Posts a fee on every (commodity, hub) leg from the carriers'
/// reservation prices.  Hubs no carrier can reach keep a zero fee (nobody
/// can accept there anyway).
pub fn make_fixed_fees(instance: &Instance, kind: FeeKind) -> FeeSchedule {
    let collapse = |prices: &[f64]| match kind {
        FeeKind::Max => prices.iter().copied().fold(0.0f64, f64::max),
        FeeKind::Avg => prices.iter().sum::<f64>() / prices.len() as f64,
    };
    let mut fees = FeeSchedule::zero(instance);
    for (r, commodity) in instance.commodities().iter().enumerate() {
        for &i in instance.hubs() {
            if !instance.is_hub(commodity.origin) {
                let prices: Vec<f64> = instance
                    .carriers()
                    .filter_map(|k| instance.access_price(r, k, i))
                    .collect();
                if !prices.is_empty() {
                    fees.set_first_leg(r, i, collapse(&prices));
                }
            }
            if !instance.is_hub(commodity.destination) {
                let prices: Vec<f64> = instance
                    .carriers()
                    .filter_map(|k| instance.dist_price(r, k, i))
                    .collect();
                if !prices.is_empty() {
                    fees.set_third_leg(r, i, collapse(&prices));
                }
            }
        }
    }
    fees
}

// ---------------------------------------------------------------------------
// Quadratic semi-assignment reduction
// ---------------------------------------------------------------------------

/// A quadratic semi-assignment instance: map each facility to one of the
/// locations, paying `weight(i,j)·distance(m(i),m(j))` over ordered
/// facility pairs.  Facilities and locations are `1..=count`.
#[derive(Debug, Clone, PartialEq)]
pub struct QsapInstance {
    pub facilities: u32,
    pub locations: u32,
    /// Strictly positive weights on ordered distinct facility pairs.
    pub weights: BTreeMap<(u32, u32), f64>,
    /// `distances[k-1][l-1] >= 0`, diagonal included (zero means
    /// co-location is free).
    pub distances: Vec<Vec<f64>>,
}

impl QsapInstance {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.facilities == 0 || self.locations == 0 {
            return Err(validation("facilities and locations must be nonzero"));
        }
        let l = self.locations as usize;
        if self.distances.len() != l || self.distances.iter().any(|row| row.len() != l) {
            return Err(validation(format!("distances must be {l}x{l}")));
        }
        if self.distances.iter().flatten().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(validation("distances must be finite and nonnegative"));
        }
        for (&(i, j), &w) in &self.weights {
            if i == j || i == 0 || j == 0 || i > self.facilities || j > self.facilities {
                return Err(validation(format!("weight pair ({i}, {j}) is out of range")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(validation(format!("weight ({i}, {j}) must be positive, got {w}")));
            }
        }
        Ok(())
    }

    /// Objective of one mapping (`mapping[i-1]` is facility `i`'s
    /// location).
    pub fn value(&self, mapping: &[u32]) -> f64 {
        self.weights
            .iter()
            .map(|(&(i, j), &w)| {
                w * self.distances[(mapping[(i - 1) as usize] - 1) as usize]
                    [(mapping[(j - 1) as usize] - 1) as usize]
            })
            .sum()
    }

    /// Exhaustive optimum over all `|L|^|F|` mappings; lexicographically
    /// smallest minimizer.  This is the oracle the reduction is checked
    /// against, so it stays brutally simple.
    pub fn optimum(&self) -> (f64, Vec<u32>) {
        let f = self.facilities as usize;
        let mut best_value = f64::INFINITY;
        let mut best: Vec<u32> = vec![1; f];
        let mut mapping: Vec<u32> = vec![1; f];
        loop {
            let value = self.value(&mapping);
            if value < best_value {
                best_value = value;
                best = mapping.clone();
            }
            // Lexicographic successor (most significant digit first).
            let mut position = f;
            loop {
                if position == 0 {
                    return (best_value, best);
                }
                position -= 1;
                if mapping[position] < self.locations {
                    mapping[position] += 1;
                    for digit in &mut mapping[position + 1..] {
                        *digit = 1;
                    }
                    break;
                }
            }
        }
    }
}

/// Encodes a QSAP as a free-fee instance: one hub per location, one
/// carrier per location only able to reach its own hub, facilities as
/// non-hub nodes, and one commodity per weighted facility pair whose
/// inter-hub cost from hub `k` to hub `l` is `weight·distance(k,l)`.
///
/// Allocating carrier `k` to facility `i` then *is* mapping `i` to
/// location `k`; each leg costs a flat `1/2`, so with revenue
/// `max_pair_cost + 2` every commodity stays strictly profitable and the
/// optimum is `M·|F|·(|F|−1) − OPT(qsap)` exactly, where
/// `M = max_{r,k,l} weight_r·distance(k,l) + 1` (every ordered facility
/// pair must carry a weight for this count to hold).
pub fn reduce_qsap(qsap: &QsapInstance) -> Result<Instance, ModelError> {
    qsap.validate()?;
    let facilities = qsap.facilities;
    let locations = qsap.locations;
    let hubs: Vec<NodeId> = (facilities + 1..=facilities + locations).collect();
    let hub_of = |location: u32| facilities + location;

    let mut commodities = Vec::new();
    let mut max_pair_cost = 0.0f64;
    for (&(i, j), &w) in &qsap.weights {
        commodities.push(Commodity { origin: i, destination: j, demand: w, revenue: 0.0 });
        for row in &qsap.distances {
            for &d in row {
                max_pair_cost = max_pair_cost.max(w * d);
            }
        }
    }
    let revenue = max_pair_cost + 1.0 + 2.0 * LEG_CHARGE;
    for commodity in &mut commodities {
        commodity.revenue = revenue;
    }

    let mut leader_cost = BTreeMap::new();
    let mut access_price = BTreeMap::new();
    let mut dist_price = BTreeMap::new();
    for (r, commodity) in commodities.iter().enumerate() {
        let w = commodity.demand;
        for k in 1..=locations {
            for l in 1..=locations {
                let cost = w * qsap.distances[(k - 1) as usize][(l - 1) as usize];
                if k != l || cost != 0.0 {
                    leader_cost.insert((r, hub_of(k), hub_of(l)), cost);
                }
            }
        }
        // Carrier k operates exactly one access and one distribution arc:
        // the ones touching its own hub.
        for k in 1..=locations {
            access_price.insert((r, k, hub_of(k)), LEG_CHARGE);
            dist_price.insert((r, k, hub_of(k)), LEG_CHARGE);
        }
    }

    let mut metadata = serde_json::Map::new();
    metadata.insert("generator".into(), serde_json::json!("qsap-reduction"));
    metadata.insert("facilities".into(), serde_json::json!(facilities));
    metadata.insert("locations".into(), serde_json::json!(locations));
    Instance::new(
        facilities + locations,
        hubs,
        locations,
        commodities,
        leader_cost,
        access_price,
        dist_price,
        metadata,
    )
}

/// Flat per-leg reservation price in the QSAP encoding; folded into the
/// revenue constant so it cancels out of the optimum identity.
pub const LEG_CHARGE: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::preprocess::compute_costs;
    use crate::model::Variant;

    fn square_raw() -> RawData {
        // Unit square with uniform symmetric demand.
        let coords = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let mut demand = vec![vec![0.0; 4]; 4];
        for o in 0..4 {
            for d in 0..4 {
                if o != d {
                    demand[o][d] = 1.0;
                }
            }
        }
        RawData::euclidean(coords, demand).unwrap()
    }

    #[test]
    fn hub_selection_covers_demand_and_breaks_ties_by_id() {
        let raw = square_raw();
        let params = GenParams { tau: 0.5, ..GenParams::default() };
        // All four corners are equidistant from the centroid and tie on
        // demand, so the two smallest ids win.
        assert_eq!(select_hubs(&raw, &params).unwrap(), vec![1, 2]);

        // Concentrating demand on node 4 pulls it into the hub set.
        let coords = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let mut demand = vec![vec![0.0; 4]; 4];
        demand[3][0] = 10.0;
        demand[0][3] = 10.0;
        demand[3][1] = 5.0;
        demand[1][2] = 1.0;
        let raw = RawData::euclidean(coords, demand).unwrap();
        let hubs = select_hubs(&raw, &GenParams { tau: 0.25, ..GenParams::default() }).unwrap();
        assert_eq!(hubs, vec![4]);
    }

    #[test]
    fn degenerate_parameters_collapse_to_plain_unit_costs() {
        let raw = square_raw();
        let params = GenParams {
            tau: 0.5,
            theta_range: (1.0, 1.0),
            chi_range: (1.0, 1.0),
            epsilon: 0.0,
            carriers: 2,
            ..GenParams::default()
        };
        let hubs = select_hubs(&raw, &params).unwrap();
        let instance = build_instance(&raw, &hubs, &params).unwrap();
        for (r, commodity) in instance.commodities().iter().enumerate() {
            if instance.is_hub(commodity.origin) {
                continue;
            }
            for k in instance.carriers() {
                for &i in instance.hubs() {
                    let expected = commodity.demand
                        * raw.unit_cost_between(commodity.origin, i);
                    let got = instance.access_price(r, k, i).unwrap();
                    assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
                }
            }
        }
        // Inter-hub cost is the discounted unit cost times flow.
        let r = 0; // commodity (1, 2): both endpoints non-hub? hubs are {1, 2}
        let _ = r;
        for (r, _) in instance.commodities().iter().enumerate() {
            for &i in instance.hubs() {
                for &j in instance.hubs() {
                    if i == j {
                        continue;
                    }
                    let expected = instance.commodity(r).demand
                        * params.alpha
                        * raw.unit_cost_between(i, j);
                    assert!((instance.leader_cost(r, i, j).unwrap() - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identical_seeds_reproduce_identical_instances() {
        let raw = random_raw(9, 7);
        assert_eq!(raw, random_raw(9, 7));
        let params = GenParams { tau: 0.3, carriers: 3, seed: 42, ..GenParams::default() };
        let hubs = select_hubs(&raw, &params).unwrap();
        let a = build_instance(&raw, &hubs, &params).unwrap();
        let b = build_instance(&raw, &hubs, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(crate::model::instance_to_json(&a), crate::model::instance_to_json(&b));
    }

    #[test]
    fn fee_schedules_collapse_reservation_prices() {
        let instance =
            crate::model::load_instance(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/example1.json"))
                .unwrap();
        let max = make_fixed_fees(&instance, FeeKind::Max);
        let avg = make_fixed_fees(&instance, FeeKind::Avg);
        // First commodity: access prices {10, 30} at hub 3, {40, 40} at 4.
        assert_eq!(max.first_leg(0, 3), Some(30.0));
        assert_eq!(max.first_leg(0, 4), Some(40.0));
        assert_eq!(avg.first_leg(0, 3), Some(20.0));
        assert_eq!(avg.first_leg(0, 4), Some(40.0));
        // Distribution prices {40, 45} / {40, 20} for every commodity.
        for r in 0..instance.commodity_count() {
            assert_eq!(max.third_leg(r, 3), Some(45.0));
            assert_eq!(max.third_leg(r, 4), Some(40.0));
            assert_eq!(avg.third_leg(r, 3), Some(42.5));
            assert_eq!(avg.third_leg(r, 4), Some(30.0));
        }
        // MAX dominates AVG entrywise.
        for r in 0..instance.commodity_count() {
            for &i in instance.hubs() {
                assert!(max.first_leg(r, i).unwrap_or(0.0) >= avg.first_leg(r, i).unwrap_or(0.0));
                assert!(max.third_leg(r, i).unwrap_or(0.0) >= avg.third_leg(r, i).unwrap_or(0.0));
            }
        }
    }

    #[test]
    fn qsap_reduction_identity_on_the_colocation_example() {
        let qsap = QsapInstance {
            facilities: 2,
            locations: 2,
            weights: [((1, 2), 1.0), ((2, 1), 1.0)].into_iter().collect(),
            distances: vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        };
        let (qsap_opt, mapping) = qsap.optimum();
        assert_eq!(qsap_opt, 0.0); // co-locate both facilities
        assert_eq!(mapping, vec![1, 1]);

        let instance = reduce_qsap(&qsap).unwrap();
        let costs = compute_costs(&instance, Variant::Free, None).unwrap();
        let solution = exact::brute_force(&instance, &costs).unwrap();
        let m = 1.0 * 2.0 + 1.0; // max weight·distance + 1
        assert_eq!(solution.objective, m * 2.0 - qsap_opt);
        assert_eq!(solution.served.len(), 2);
    }

    #[test]
    fn single_facility_reduction_has_no_commodities() {
        let qsap = QsapInstance {
            facilities: 1,
            locations: 2,
            weights: BTreeMap::new(),
            distances: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        };
        let instance = reduce_qsap(&qsap).unwrap();
        assert_eq!(instance.commodity_count(), 0);
        let costs = compute_costs(&instance, Variant::Free, None).unwrap();
        let solution = exact::brute_force(&instance, &costs).unwrap();
        assert_eq!(solution.objective, 0.0);
        assert!(solution.served.is_empty());
    }
}
