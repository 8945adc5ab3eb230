//! Instance preprocessing: hub-network completion, redundant-hub removal,
//! hub-to-hub commodity resolution, and the per-(commodity, carrier-pair)
//! serving-cost tensors consumed by the compact solvers.
//!
//! The intended pipeline is
//!
//! ```text
//! load -> complete_hub_network -> remove_redundant_hubs
//!      -> resolve_hub_commodities -> compute_costs -> prune_unprofitable
//! ```
//!
//! Each step takes an instance by reference and returns a new one (plus a
//! report where applicable); commodity indices are never remapped, so every
//! report and downstream artifact addresses commodities consistently.

use crate::follower::{first_leg_response, third_leg_response};
use crate::model::{
    CarrierId, FeeSchedule, Instance, NodeId, Variant, MONEY_EPS,
};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Errors from preprocessing steps.
#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    /// A commodity may be routed over a hub pair that has no finite-cost
    /// path in the inter-hub network.
    #[error("commodity {commodity}: hub pair ({i}, {j}) is unreachable in the inter-hub network")]
    DisconnectedHubPair { commodity: usize, i: NodeId, j: NodeId },
    /// Fixed-fee cost tensors need the fixed fee schedule.
    #[error("variant {variant} requires a fee schedule, none was supplied")]
    MissingFees { variant: Variant },
    /// Free-fee cost tensors take no fee schedule.
    #[error("variant FREE takes no fee schedule, but one was supplied")]
    UnexpectedFees,
}

/// Completes the inter-hub cost map of every commodity to all ordered hub
/// pairs by per-commodity all-pairs shortest paths over the existing arcs
/// (explicit loop entries participate; absent loops count as cost zero).
///
/// Commodities whose cost maps are scalar multiples of each other share one
/// shortest-path computation.  Fails if any hub pair a commodity could be
/// routed on remains unreachable, naming the first such pair.
pub fn complete_hub_network(instance: &Instance) -> Result<Instance, PreprocessError> {
    let hubs = instance.hubs().to_vec();
    let n = hubs.len();
    let hub_pos: BTreeMap<NodeId, usize> = hubs.iter().enumerate().map(|(p, &h)| (h, p)).collect();

    // Group commodities whose cost maps coincide after dividing by demand;
    // one Floyd-Warshall run then serves the whole group.  Grouping is a
    // pure optimisation: a group key mismatch only means extra work.
    let mut groups: BTreeMap<Vec<((NodeId, NodeId), u64)>, Vec<usize>> = BTreeMap::new();
    for r in 0..instance.commodity_count() {
        let w = instance.commodity(r).demand;
        let key: Vec<((NodeId, NodeId), u64)> = instance
            .leader_cost
            .range((r, 0, 0)..(r + 1, 0, 0))
            .map(|(&(_, i, j), &c)| ((i, j), (c / w).to_bits()))
            .collect();
        groups.entry(key).or_default().push(r);
    }

    let mut completed: BTreeMap<(usize, NodeId, NodeId), f64> = BTreeMap::new();
    for (_, members) in groups {
        let lead = members[0];
        // Distance matrix over hub positions, seeded from the lead
        // commodity's normalised costs.
        let w_lead = instance.commodity(lead).demand;
        let mut dist = vec![f64::INFINITY; n * n];
        for p in 0..n {
            dist[p * n + p] = 0.0;
        }
        for (&(_, i, j), &c) in instance.leader_cost.range((lead, 0, 0)..(lead + 1, 0, 0)) {
            let (pi, pj) = (hub_pos[&i], hub_pos[&j]);
            let norm = c / w_lead;
            if pi == pj {
                // An explicit loop entry is a real handling charge; only
                // absent loops default to zero.  Relaxation below may still
                // undercut it with a round trip.
                dist[pi * n + pj] = norm;
            } else if norm < dist[pi * n + pj] {
                dist[pi * n + pj] = norm;
            }
        }
        for via in 0..n {
            for a in 0..n {
                let da = dist[a * n + via];
                if !da.is_finite() {
                    continue;
                }
                for b in 0..n {
                    let candidate = da + dist[via * n + b];
                    if candidate < dist[a * n + b] {
                        dist[a * n + b] = candidate;
                    }
                }
            }
        }
        for &r in &members {
            let w = instance.commodity(r).demand;
            for (pi, &i) in hubs.iter().enumerate() {
                for (pj, &j) in hubs.iter().enumerate() {
                    let d = dist[pi * n + pj];
                    if d.is_finite() {
                        completed.insert((r, i, j), d * w);
                    }
                }
            }
        }
    }

    // Every hub pair a commodity may be routed on must now have a cost.
    for r in 0..instance.commodity_count() {
        for (i, j) in instance.interhub_arcs(r) {
            if i != j && !completed.contains_key(&(r, i, j)) {
                return Err(PreprocessError::DisconnectedHubPair { commodity: r + 1, i, j });
            }
        }
    }

    let mut out = instance.clone();
    out.leader_cost = completed;
    Ok(out)
}

/// Drops hubs that no commodity can ever use: not a commodity endpoint, and
/// no carrier holds a reservation price into or out of them.  Inter-hub cost
/// entries touching dropped hubs are discarded.  Returns the reduced
/// instance and the dropped hub ids.
///
/// Run this after [`complete_hub_network`]: completed costs already account
/// for paths *through* the dropped hubs, so removal never worsens a route.
pub fn remove_redundant_hubs(instance: &Instance) -> (Instance, Vec<NodeId>) {
    let mut used: BTreeMap<NodeId, bool> = instance.hubs().iter().map(|&h| (h, false)).collect();
    for c in instance.commodities() {
        for node in [c.origin, c.destination] {
            if let Some(flag) = used.get_mut(&node) {
                *flag = true;
            }
        }
    }
    for (&(_, _, i), _) in instance.access_price.iter().chain(instance.dist_price.iter()) {
        if let Some(flag) = used.get_mut(&i) {
            *flag = true;
        }
    }

    let removed: Vec<NodeId> = used.iter().filter(|&(_, &u)| !u).map(|(&h, _)| h).collect();
    if removed.is_empty() {
        return (instance.clone(), removed);
    }
    let mut out = instance.clone();
    out.hubs.retain(|h| used[h]);
    out.leader_cost.retain(|&(_, i, j), _| used[&i] && used[&j]);
    (out, removed)
}

/// How one commodity was classified by a preprocessing step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CommodityResolution {
    /// Both endpoints are hubs; the commodity needs no carrier and is served
    /// exactly when its prize strictly exceeds the direct inter-hub cost.
    HubToHub { commodity: usize, serve: bool, profit: f64 },
    /// No carrier pair can serve the commodity at a cost below its prize;
    /// solvers will never serve it.
    Unprofitable { commodity: usize },
}

/// Report of preprocessing decisions.  Commodity ids are 1-based.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PruneReport {
    /// Per-commodity classifications, ascending by commodity id.
    pub resolutions: Vec<CommodityResolution>,
    /// Serving-pair variables before pruning: commodities times squared
    /// carrier count.
    pub pairs_initial: usize,
    /// Serving-pair variables remaining after dropping unservable and
    /// unprofitable (prize minus cost nonpositive) pairs.
    pub pairs_remaining: usize,
}

impl PruneReport {
    /// 1-based ids of commodities no solver will serve.
    pub fn unprofitable(&self) -> Vec<usize> {
        self.resolutions
            .iter()
            .filter_map(|res| match res {
                CommodityResolution::Unprofitable { commodity } => Some(*commodity),
                _ => None,
            })
            .collect()
    }

    /// Renders the report as CSV with columns `kind,commodity,detail`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,commodity,detail\n");
        for res in &self.resolutions {
            match res {
                CommodityResolution::HubToHub { commodity, serve, profit } => {
                    let verdict = if *serve { "serve" } else { "drop" };
                    out.push_str(&format!("hub_to_hub,{commodity},{verdict} (profit {profit})\n"));
                }
                CommodityResolution::Unprofitable { commodity } => {
                    out.push_str(&format!("unprofitable,{commodity},\n"));
                }
            }
        }
        out.push_str(&format!("pairs_initial,,{}\n", self.pairs_initial));
        out.push_str(&format!("pairs_remaining,,{}\n", self.pairs_remaining));
        out
    }
}

/// Classifies commodities whose two endpoints are both hubs: they involve no
/// outsourced leg, so serving them is a pure profit check — serve exactly
/// when the prize strictly exceeds the direct inter-hub cost.
///
/// The instance is returned unchanged (indices stay stable; solvers handle
/// these commodities natively); the report records the determination.
pub fn resolve_hub_commodities(instance: &Instance) -> (Instance, PruneReport) {
    let mut report = PruneReport::default();
    for r in 0..instance.commodity_count() {
        let c = instance.commodity(r);
        if instance.is_hub(c.origin) && instance.is_hub(c.destination) {
            let direct = instance.leader_cost(r, c.origin, c.destination);
            let profit = direct.map(|d| c.revenue - d).unwrap_or(f64::NEG_INFINITY);
            report.resolutions.push(CommodityResolution::HubToHub {
                commodity: r + 1,
                serve: profit > MONEY_EPS,
                profit,
            });
        }
    }
    (instance.clone(), report)
}

/// Serving-cost tensors: for every commodity and every (entry carrier, exit
/// carrier) pair, the cheapest way the leader can serve the commodity, plus
/// the arc realising it.
///
/// For hub endpoints the corresponding carrier coordinate is irrelevant (no
/// leg is outsourced); values are stored uniformly across that coordinate.
#[derive(Debug, Clone)]
pub struct PreprocessedCosts {
    variant: Variant,
    commodity_count: usize,
    carrier_count: u32,
    cost: Vec<Option<f64>>,
    witness: Vec<Option<(NodeId, NodeId)>>,
}

impl PreprocessedCosts {
    #[inline]
    fn index(&self, r: usize, k: CarrierId, l: CarrierId) -> usize {
        let kk = self.carrier_count as usize;
        r * kk * kk + (k as usize - 1) * kk + (l as usize - 1)
    }

    /// Which game's costs these are.
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Number of commodities covered.
    pub fn commodity_count(&self) -> usize {
        self.commodity_count
    }

    /// Number of carriers covered.
    pub fn carrier_count(&self) -> u32 {
        self.carrier_count
    }

    /// Cheapest serving cost of commodity `r` when its origin-side carrier is
    /// `k` and its destination-side carrier is `l`; `None` when unservable.
    #[inline]
    pub fn get(&self, r: usize, k: CarrierId, l: CarrierId) -> Option<f64> {
        self.cost[self.index(r, k, l)]
    }

    /// The lexicographically smallest arc attaining [`PreprocessedCosts::get`].
    #[inline]
    pub fn witness(&self, r: usize, k: CarrierId, l: CarrierId) -> Option<(NodeId, NodeId)> {
        self.witness[self.index(r, k, l)]
    }

    /// Cheapest serving cost of `r` over all carrier pairs.
    pub fn best(&self, r: usize) -> Option<f64> {
        let kk = self.carrier_count as usize;
        self.cost[r * kk * kk..(r + 1) * kk * kk]
            .iter()
            .flatten()
            .fold(None, |acc: Option<f64>, &c| Some(acc.map_or(c, |a| a.min(c))))
    }
}

/// Computes the serving-cost tensor of `instance` for `variant`.
///
/// * [`Variant::Free`]: the leader pays exactly the allocated carrier's
///   reservation price on each outsourced leg (fees are synthesised to make
///   carriers indifferent), so the cost over arc `(i, j)` is reservation
///   price in + inter-hub cost + reservation price out.  Pass no fees.
/// * [`Variant::FixedOptimistic`]: the leader pays the posted fees and may
///   only use hubs in the carriers' optimistic response sets.
/// * [`Variant::FixedRelaxed`]: posted fees, relaxed response sets.
///
/// Inter-hub arcs without a cost entry (possible when completion was
/// skipped) are treated as unusable.
pub fn compute_costs(
    instance: &Instance,
    variant: Variant,
    fees: Option<&FeeSchedule>,
) -> Result<PreprocessedCosts, PreprocessError> {
    match (variant, fees) {
        (Variant::Free, Some(_)) => return Err(PreprocessError::UnexpectedFees),
        (Variant::FixedOptimistic | Variant::FixedRelaxed, None) => {
            return Err(PreprocessError::MissingFees { variant })
        }
        _ => {}
    }

    let kk = instance.carrier_count() as usize;
    let per_commodity: Vec<(Vec<Option<f64>>, Vec<Option<(NodeId, NodeId)>>)> = (0..instance
        .commodity_count())
        .into_par_iter()
        .map(|r| commodity_costs(instance, r, variant, fees))
        .collect();

    let mut cost = Vec::with_capacity(instance.commodity_count() * kk * kk);
    let mut witness = Vec::with_capacity(instance.commodity_count() * kk * kk);
    for (c, w) in per_commodity {
        cost.extend(c);
        witness.extend(w);
    }
    Ok(PreprocessedCosts {
        variant,
        commodity_count: instance.commodity_count(),
        carrier_count: instance.carrier_count(),
        cost,
        witness,
    })
}

/// Entry-side options for one carrier: (hub, amount the leader pays on the
/// first leg when entering there).
fn entry_options(
    instance: &Instance,
    r: usize,
    k: CarrierId,
    variant: Variant,
    fees: Option<&FeeSchedule>,
) -> Vec<(NodeId, f64)> {
    let origin = instance.commodity(r).origin;
    if instance.is_hub(origin) {
        // No first leg: the commodity enters the network at its origin hub.
        return vec![(origin, 0.0)];
    }
    match variant {
        Variant::Free => instance
            .hubs()
            .iter()
            .filter_map(|&i| instance.access_price(r, k, i).map(|p| (i, p)))
            .collect(),
        Variant::FixedOptimistic | Variant::FixedRelaxed => {
            let fees = fees.expect("checked by compute_costs");
            let resp = first_leg_response(instance, r, k, fees, variant.response_mode());
            resp.hubs
                .iter()
                .map(|&i| (i, fees.first_leg(r, i).unwrap_or(0.0)))
                .collect()
        }
    }
}

/// Exit-side options, symmetric to [`entry_options`].
fn exit_options(
    instance: &Instance,
    r: usize,
    l: CarrierId,
    variant: Variant,
    fees: Option<&FeeSchedule>,
) -> Vec<(NodeId, f64)> {
    let destination = instance.commodity(r).destination;
    if instance.is_hub(destination) {
        return vec![(destination, 0.0)];
    }
    match variant {
        Variant::Free => instance
            .hubs()
            .iter()
            .filter_map(|&j| instance.dist_price(r, l, j).map(|q| (j, q)))
            .collect(),
        Variant::FixedOptimistic | Variant::FixedRelaxed => {
            let fees = fees.expect("checked by compute_costs");
            let resp = third_leg_response(instance, r, l, fees, variant.response_mode());
            resp.hubs
                .iter()
                .map(|&j| (j, fees.third_leg(r, j).unwrap_or(0.0)))
                .collect()
        }
    }
}

fn commodity_costs(
    instance: &Instance,
    r: usize,
    variant: Variant,
    fees: Option<&FeeSchedule>,
) -> (Vec<Option<f64>>, Vec<Option<(NodeId, NodeId)>>) {
    let kk = instance.carrier_count() as usize;
    let mut cost = vec![None; kk * kk];
    let mut witness = vec![None; kk * kk];

    let entries: Vec<Vec<(NodeId, f64)>> = instance
        .carriers()
        .map(|k| entry_options(instance, r, k, variant, fees))
        .collect();
    let exits: Vec<Vec<(NodeId, f64)>> = instance
        .carriers()
        .map(|l| exit_options(instance, r, l, variant, fees))
        .collect();

    for (ki, entry) in entries.iter().enumerate() {
        for (li, exit) in exits.iter().enumerate() {
            let mut best: Option<(f64, (NodeId, NodeId))> = None;
            for &(i, pay_in) in entry {
                for &(j, pay_out) in exit {
                    let Some(c) = instance.leader_cost(r, i, j) else {
                        continue;
                    };
                    let total = pay_in + c + pay_out;
                    // Keep the lexicographically-smallest arc among those
                    // within tolerance of the minimum; entry/exit options
                    // are hub-ascending, so the first winner is lex-least.
                    match &best {
                        Some((incumbent, _)) if total >= incumbent - MONEY_EPS => {}
                        _ => best = Some((total, (i, j))),
                    }
                }
            }
            let slot = ki * kk + li;
            if let Some((c, arc)) = best {
                cost[slot] = Some(c);
                witness[slot] = Some(arc);
            }
        }
    }
    (cost, witness)
}

/// Flags commodities that can never be served at a profit: the cheapest
/// serving cost over all carrier pairs is at least the prize (or serving is
/// outright impossible).  Also counts serving-pair variables before/after
/// dropping pairs whose profit is nonpositive — the size the pair-based
/// solver will actually build.
///
/// The instance is returned unchanged: indices stay stable, and every solver
/// already refuses nonpositive-profit serving on its own.
pub fn prune_unprofitable(
    instance: &Instance,
    costs: &PreprocessedCosts,
) -> (Instance, PruneReport) {
    let kk = instance.carrier_count() as usize;
    let mut report = PruneReport {
        resolutions: Vec::new(),
        pairs_initial: instance.commodity_count() * kk * kk,
        pairs_remaining: 0,
    };
    for r in 0..instance.commodity_count() {
        let revenue = instance.commodity(r).revenue;
        let mut profitable_pairs = 0usize;
        for k in instance.carriers() {
            for l in instance.carriers() {
                if let Some(c) = costs.get(r, k, l) {
                    if revenue - c > MONEY_EPS {
                        profitable_pairs += 1;
                    }
                }
            }
        }
        report.pairs_remaining += profitable_pairs;
        if profitable_pairs == 0 {
            report.resolutions.push(CommodityResolution::Unprofitable { commodity: r + 1 });
        }
    }
    (instance.clone(), report)
}
