//! Builders for the four MILP formulations.
//!
//! All four encode the same decisions — who is allocated where, which
//! commodities are served, and along which inter-hub arc — and differ only
//! in how first/last-leg outsourcing costs enter the model:
//!
//! * [`Formulation::Ep`]: per-carrier leg variables `f`/`t` carry the leg
//!   costs; routing variables stay continuous (for fixed allocations the
//!   inner problem is a transportation LP with integral vertices).
//! * [`Formulation::Ef`]: binary routing plus one nonnegative cost variable
//!   per (commodity, hub); lower-bound rows pin the variable to the
//!   allocated carrier's price whenever the route touches the hub.
//! * [`Formulation::If`]: like EF with the per-hub cost variables collapsed
//!   into one per commodity side.
//! * [`Formulation::Ip`]: one binary per (commodity, entry carrier, exit
//!   carrier) priced by a precomputed serving-cost tensor.
//!
//! ## Variants
//!
//! With free fees the leader ends up paying each allocated carrier exactly
//! its reservation price, so the builders charge reservation prices
//! directly.  With fixed fees the posted fee schedule determines both the
//! amounts paid and which hubs a carrier is willing to route through; the
//! builders restrict hub usage to the appropriate response sets (the
//! margin-maximising hubs under the optimistic convention, every
//! nonnegative-margin hub under the relaxed one).
//!
//! ## Reductions baked into the rows
//!
//! * EP with fixed fees drops routing variables whose fee-inclusive arc
//!   cost already exhausts the commodity's revenue, and leg variables whose
//!   margin is negative (the carrier would refuse the leg).
//! * EP with free fees adds pair cuts `x + a + a <= 2` forbidding
//!   carrier pairs that cannot serve an arc profitably.
//! * Serving a commodity at a profit within `MONEY_EPS` of zero is treated
//!   as not worth it, mirroring the strict-improvement rule used
//!   everywhere else in this crate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::follower::{first_leg_response, third_leg_response};
use crate::model::{CarrierId, FeeSchedule, Instance, NodeId, Variant, MONEY_EPS};
use crate::preprocess::PreprocessedCosts;

use super::{MilpError, MilpModel, RowSense, VarKind, VarRole};

/// Which of the four formulations to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// Node-arc form with per-carrier leg variables.
    Ep,
    /// Hub-assignment form with per-hub leg-cost variables.
    Ef,
    /// Hub-assignment form with aggregated leg-cost variables.
    If,
    /// Pair-assignment form over a precomputed cost tensor.
    Ip,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Formulation::Ep => "EP",
            Formulation::Ef => "EF",
            Formulation::If => "IF",
            Formulation::Ip => "IP",
        };
        f.write_str(s)
    }
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "EP" => Ok(Formulation::Ep),
            "EF" => Ok(Formulation::Ef),
            "IF" => Ok(Formulation::If),
            "IP" => Ok(Formulation::Ip),
            other => Err(format!("unknown formulation {other:?}, expected EP, EF, IF or IP")),
        }
    }
}

/// Build-time switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Use the big-M style leg-cost rows of EF/IF instead of the
    /// per-carrier indicator rows.  Only meaningful for the free-fee
    /// variant; the fixed-fee leg-cost families have a single form.
    pub big_m: bool,
    /// Withhold the leg-cost rows of EF/IF from the initial model so that
    /// [`super::solve_with_cuts`] can separate them lazily.  EP and IP have
    /// no deferrable rows and ignore this.
    pub defer_cuts: bool,
}

/// Builds `formulation` for `instance` under `variant`.
///
/// * Fixed-fee variants of EP/EF/IF need the posted `fees`; the free
///   variant must not get any.
/// * IP needs the serving-cost tensor `costs` computed for the same
///   variant (fees are already folded into the tensor and are ignored
///   here).
pub fn build(
    instance: &Instance,
    formulation: Formulation,
    variant: Variant,
    fees: Option<&FeeSchedule>,
    costs: Option<&PreprocessedCosts>,
    options: BuildOptions,
) -> Result<MilpModel, MilpError> {
    if formulation == Formulation::Ip {
        let costs = costs.ok_or(MilpError::MissingCosts)?;
        if costs.variant() != variant {
            return Err(MilpError::CostVariantMismatch {
                tensor: costs.variant(),
                requested: variant,
            });
        }
        return Ok(build_ip(instance, variant, costs));
    }
    match (variant, fees) {
        (Variant::Free, Some(_)) => return Err(MilpError::UnexpectedFees),
        (Variant::FixedOptimistic | Variant::FixedRelaxed, None) => {
            return Err(MilpError::MissingFees { variant })
        }
        _ => {}
    }
    Ok(match formulation {
        Formulation::Ep => build_ep(instance, variant, fees),
        Formulation::Ef => build_path(instance, variant, fees, options, false),
        Formulation::If => build_path(instance, variant, fees, options, true),
        Formulation::Ip => unreachable!("handled above"),
    })
}

/// Hub -> carriers willing (and able) to run the first leg of `r` into it.
///
/// Free fees: every carrier holding the access arc (the leader can always
/// make the leg worthwhile).  Fixed fees: the carriers whose response set,
/// under the variant's convention, contains the hub.
fn entry_acceptors(
    instance: &Instance,
    r: usize,
    variant: Variant,
    fees: Option<&FeeSchedule>,
) -> BTreeMap<NodeId, Vec<CarrierId>> {
    let mut map: BTreeMap<NodeId, Vec<CarrierId>> = BTreeMap::new();
    for k in instance.carriers() {
        match variant {
            Variant::Free => {
                for &i in instance.hubs() {
                    if instance.access_price(r, k, i).is_some() {
                        map.entry(i).or_default().push(k);
                    }
                }
            }
            Variant::FixedOptimistic | Variant::FixedRelaxed => {
                let response = first_leg_response(
                    instance,
                    r,
                    k,
                    fees.expect("fixed variants carry fees"),
                    variant.response_mode(),
                );
                for &i in &response.hubs {
                    map.entry(i).or_default().push(k);
                }
            }
        }
    }
    map
}

/// Hub -> carriers willing to run the last leg of `r` out of it.
fn exit_acceptors(
    instance: &Instance,
    r: usize,
    variant: Variant,
    fees: Option<&FeeSchedule>,
) -> BTreeMap<NodeId, Vec<CarrierId>> {
    let mut map: BTreeMap<NodeId, Vec<CarrierId>> = BTreeMap::new();
    for k in instance.carriers() {
        match variant {
            Variant::Free => {
                for &i in instance.hubs() {
                    if instance.dist_price(r, k, i).is_some() {
                        map.entry(i).or_default().push(k);
                    }
                }
            }
            Variant::FixedOptimistic | Variant::FixedRelaxed => {
                let response = third_leg_response(
                    instance,
                    r,
                    k,
                    fees.expect("fixed variants carry fees"),
                    variant.response_mode(),
                );
                for &i in &response.hubs {
                    map.entry(i).or_default().push(k);
                }
            }
        }
    }
    map
}

/// Routable arcs of `r`: the commodity's inter-hub arcs that have a cost.
fn routable_arcs(instance: &Instance, r: usize) -> Vec<((NodeId, NodeId), f64)> {
    instance
        .interhub_arcs(r)
        .into_iter()
        .filter_map(|(i, j)| instance.leader_cost(r, i, j).map(|c| ((i, j), c)))
        .collect()
}

fn posted_first(fees: Option<&FeeSchedule>, r: usize, i: NodeId) -> f64 {
    fees.and_then(|f| f.first_leg(r, i)).unwrap_or(0.0)
}

fn posted_third(fees: Option<&FeeSchedule>, r: usize, i: NodeId) -> f64 {
    fees.and_then(|f| f.third_leg(r, i)).unwrap_or(0.0)
}

/// Shared prologue: serve and allocation variables plus the
/// one-carrier-per-node rows.
fn add_serve_and_assign(
    model: &mut MilpModel,
    instance: &Instance,
) -> (Vec<usize>, BTreeMap<(NodeId, CarrierId), usize>) {
    let mut serve = Vec::with_capacity(instance.commodity_count());
    for (r, commodity) in instance.commodities().iter().enumerate() {
        serve.push(model.add_var(
            format!("s_r{}", r + 1),
            VarKind::Binary,
            commodity.revenue,
            0.0,
            1.0,
            VarRole::Serve { r },
        ));
    }
    let mut assign = BTreeMap::new();
    for node in instance.non_hubs().collect::<Vec<_>>() {
        for k in instance.carriers() {
            let index = model.add_var(
                format!("a_n{node}_k{k}"),
                VarKind::Binary,
                0.0,
                0.0,
                1.0,
                VarRole::Assign { node, k },
            );
            assign.insert((node, k), index);
        }
    }
    for node in instance.non_hubs().collect::<Vec<_>>() {
        let terms: Vec<(usize, f64)> =
            instance.carriers().map(|k| (assign[&(node, k)], 1.0)).collect();
        model.add_row(format!("alloc_n{node}"), RowSense::Le, 1.0, terms);
    }
    (serve, assign)
}

// ---------------------------------------------------------------------------
// EP: node-arc form with per-carrier leg variables
// ---------------------------------------------------------------------------

fn build_ep(instance: &Instance, variant: Variant, fees: Option<&FeeSchedule>) -> MilpModel {
    let mut model = MilpModel::new(format!("ep_{variant}").to_lowercase(), Formulation::Ep, variant);
    let (serve, assign) = add_serve_and_assign(&mut model, instance);
    let fixed = variant != Variant::Free;

    // Routing variables.  Continuous: once serving and allocation are fixed
    // the routing subproblem is a transportation LP, so vertices are
    // integral.  With fixed fees the fee of each endpoint hub is folded
    // into the arc coefficient and arcs that cannot be profitable are
    // dropped outright.
    let mut route: BTreeMap<(usize, NodeId, NodeId), usize> = BTreeMap::new();
    for (r, commodity) in instance.commodities().iter().enumerate() {
        for ((i, j), c) in routable_arcs(instance, r) {
            let mut cost = c;
            if fixed {
                if !instance.is_hub(commodity.origin) {
                    cost += posted_first(fees, r, i);
                }
                if !instance.is_hub(commodity.destination) {
                    cost += posted_third(fees, r, j);
                }
                if cost >= commodity.revenue - MONEY_EPS {
                    continue; // cannot serve profitably along this arc
                }
            }
            let index = model.add_var(
                format!("x_r{}_i{i}_j{j}", r + 1),
                VarKind::Continuous,
                -cost,
                0.0,
                f64::INFINITY,
                VarRole::Route { r, i, j },
            );
            route.insert((r, i, j), index);
        }
    }

    // Leg variables.  Free fees: the leader pays the reservation price, so
    // it lands in the objective.  Fixed fees: payment is already in the
    // routing coefficients; legs the carrier would refuse (negative margin)
    // are dropped, which is exactly the relaxed response and, together with
    // the margin rows below, also the optimistic one.
    let mut entry: BTreeMap<(usize, CarrierId, NodeId), usize> = BTreeMap::new();
    let mut exit: BTreeMap<(usize, CarrierId, NodeId), usize> = BTreeMap::new();
    for (r, commodity) in instance.commodities().iter().enumerate() {
        if !instance.is_hub(commodity.origin) {
            for k in instance.carriers() {
                for &i in instance.hubs() {
                    let Some(price) = instance.access_price(r, k, i) else { continue };
                    if fixed && posted_first(fees, r, i) - price < -MONEY_EPS {
                        continue;
                    }
                    let objective = if fixed { 0.0 } else { -price };
                    let index = model.add_var(
                        format!("f_r{}_k{k}_i{i}", r + 1),
                        VarKind::Continuous,
                        objective,
                        0.0,
                        f64::INFINITY,
                        VarRole::EntryLeg { r, k, i },
                    );
                    entry.insert((r, k, i), index);
                }
            }
        }
        if !instance.is_hub(commodity.destination) {
            for k in instance.carriers() {
                for &i in instance.hubs() {
                    let Some(price) = instance.dist_price(r, k, i) else { continue };
                    if fixed && posted_third(fees, r, i) - price < -MONEY_EPS {
                        continue;
                    }
                    let objective = if fixed { 0.0 } else { -price };
                    let index = model.add_var(
                        format!("t_r{}_k{k}_i{i}", r + 1),
                        VarKind::Continuous,
                        objective,
                        0.0,
                        f64::INFINITY,
                        VarRole::ExitLeg { r, k, i },
                    );
                    exit.insert((r, k, i), index);
                }
            }
        }
    }

    // A carrier hauls legs only where it is allocated.
    for (r, commodity) in instance.commodities().iter().enumerate() {
        for k in instance.carriers() {
            let terms: Vec<(usize, f64)> = instance
                .hubs()
                .iter()
                .filter_map(|&i| entry.get(&(r, k, i)).map(|&v| (v, 1.0)))
                .collect();
            if !terms.is_empty() {
                let mut terms = terms;
                terms.push((assign[&(commodity.origin, k)], -1.0));
                model.add_row(format!("fcap_r{}_k{k}", r + 1), RowSense::Le, 0.0, terms);
            }
            let terms: Vec<(usize, f64)> = instance
                .hubs()
                .iter()
                .filter_map(|&i| exit.get(&(r, k, i)).map(|&v| (v, 1.0)))
                .collect();
            if !terms.is_empty() {
                let mut terms = terms;
                terms.push((assign[&(commodity.destination, k)], -1.0));
                model.add_row(format!("tcap_r{}_k{k}", r + 1), RowSense::Le, 0.0, terms);
            }
        }
    }

    // Routing through a hub needs matching leg mass.
    for (r, commodity) in instance.commodities().iter().enumerate() {
        if !instance.is_hub(commodity.origin) {
            for &i in instance.hubs() {
                let mut terms: Vec<(usize, f64)> = instance
                    .carriers()
                    .filter_map(|k| entry.get(&(r, k, i)).map(|&v| (v, 1.0)))
                    .collect();
                let arcs: Vec<usize> = instance
                    .hubs()
                    .iter()
                    .filter_map(|&j| route.get(&(r, i, j)).copied())
                    .collect();
                if arcs.is_empty() {
                    continue;
                }
                terms.extend(arcs.into_iter().map(|v| (v, -1.0)));
                model.add_row(format!("flink_r{}_i{i}", r + 1), RowSense::Ge, 0.0, terms);
            }
        }
        if !instance.is_hub(commodity.destination) {
            for &j in instance.hubs() {
                let mut terms: Vec<(usize, f64)> = instance
                    .carriers()
                    .filter_map(|k| exit.get(&(r, k, j)).map(|&v| (v, 1.0)))
                    .collect();
                let arcs: Vec<usize> = instance
                    .hubs()
                    .iter()
                    .filter_map(|&i| route.get(&(r, i, j)).copied())
                    .collect();
                if arcs.is_empty() {
                    continue;
                }
                terms.extend(arcs.into_iter().map(|v| (v, -1.0)));
                model.add_row(format!("tlink_r{}_j{j}", r + 1), RowSense::Ge, 0.0, terms);
            }
        }
    }

    // Serving means routing over exactly one (unit of) arc.
    for r in 0..instance.commodity_count() {
        let mut terms: Vec<(usize, f64)> = instance
            .interhub_arcs(r)
            .into_iter()
            .filter_map(|(i, j)| route.get(&(r, i, j)).map(|&v| (v, 1.0)))
            .collect();
        terms.push((serve[r], -1.0));
        model.add_row(format!("serve_r{}", r + 1), RowSense::Eq, 0.0, terms);
    }

    match variant {
        Variant::Free => {
            // Pair cuts: if the carrier pair (k, l) cannot run r over (i, j)
            // at a strictly positive profit, forbid combining that arc with
            // that pair of allocations.  Serving at a profit of zero is
            // never strictly better than not serving, so optima survive.
            for (r, commodity) in instance.commodities().iter().enumerate() {
                if instance.is_hub(commodity.origin) || instance.is_hub(commodity.destination) {
                    continue;
                }
                for k in instance.carriers() {
                    for l in instance.carriers() {
                        for ((i, j), c) in routable_arcs(instance, r) {
                            let Some(access) = instance.access_price(r, k, i) else { continue };
                            let Some(dist) = instance.dist_price(r, l, j) else { continue };
                            if access + c + dist < commodity.revenue - MONEY_EPS {
                                continue;
                            }
                            let Some(&x) = route.get(&(r, i, j)) else { continue };
                            model.add_row(
                                format!("cut_r{}_k{k}_l{l}_i{i}_j{j}", r + 1),
                                RowSense::Le,
                                2.0,
                                vec![
                                    (x, 1.0),
                                    (assign[&(commodity.origin, k)], 1.0),
                                    (assign[&(commodity.destination, l)], 1.0),
                                ],
                            );
                        }
                    }
                }
            }
        }
        Variant::FixedOptimistic => {
            // An allocated carrier concentrates its leg mass on hubs where
            // its margin is maximal.  With the leg caps above, forcing the
            // margin-weighted mass to reach the best margin does exactly
            // that.  Skipped when the best margin is zero (every surviving
            // leg variable already has nonnegative... exactly zero margin).
            for (r, commodity) in instance.commodities().iter().enumerate() {
                if !instance.is_hub(commodity.origin) {
                    for k in instance.carriers() {
                        let response = first_leg_response(
                            instance,
                            r,
                            k,
                            fees.expect("fixed variant"),
                            crate::model::ResponseMode::Optimistic,
                        );
                        if response.value <= MONEY_EPS {
                            continue;
                        }
                        let mut terms: Vec<(usize, f64)> = Vec::new();
                        for &i in instance.hubs() {
                            let Some(&v) = entry.get(&(r, k, i)) else { continue };
                            let margin = posted_first(fees, r, i)
                                - instance.access_price(r, k, i).expect("leg var has a price");
                            terms.push((v, margin));
                        }
                        terms.push((assign[&(commodity.origin, k)], -response.value));
                        model.add_row(format!("respf_r{}_k{k}", r + 1), RowSense::Ge, 0.0, terms);
                    }
                }
                if !instance.is_hub(commodity.destination) {
                    for k in instance.carriers() {
                        let response = third_leg_response(
                            instance,
                            r,
                            k,
                            fees.expect("fixed variant"),
                            crate::model::ResponseMode::Optimistic,
                        );
                        if response.value <= MONEY_EPS {
                            continue;
                        }
                        let mut terms: Vec<(usize, f64)> = Vec::new();
                        for &i in instance.hubs() {
                            let Some(&v) = exit.get(&(r, k, i)) else { continue };
                            let margin = posted_third(fees, r, i)
                                - instance.dist_price(r, k, i).expect("leg var has a price");
                            terms.push((v, margin));
                        }
                        terms.push((assign[&(commodity.destination, k)], -response.value));
                        model.add_row(format!("respt_r{}_k{k}", r + 1), RowSense::Ge, 0.0, terms);
                    }
                }
            }
        }
        Variant::FixedRelaxed => {
            // Dropping negative-margin leg variables already encodes the
            // relaxed response; no extra rows are needed.
        }
    }

    model
}

// ---------------------------------------------------------------------------
// EF / IF: hub-assignment forms
// ---------------------------------------------------------------------------

/// Builds EF (`aggregated == false`) or IF (`aggregated == true`).
fn build_path(
    instance: &Instance,
    variant: Variant,
    fees: Option<&FeeSchedule>,
    options: BuildOptions,
    aggregated: bool,
) -> MilpModel {
    let formulation = if aggregated { Formulation::If } else { Formulation::Ef };
    let mut model =
        MilpModel::new(format!("{formulation}_{variant}").to_lowercase(), formulation, variant);
    let (serve, assign) = add_serve_and_assign(&mut model, instance);

    // Binary routing: the leg-cost rows below read "the route enters hub i"
    // off `sum_j x_ij`, which only works for 0/1 routing.
    let mut route: BTreeMap<(usize, NodeId, NodeId), usize> = BTreeMap::new();
    for (r, _) in instance.commodities().iter().enumerate() {
        for ((i, j), c) in routable_arcs(instance, r) {
            let index = model.add_var(
                format!("x_r{}_i{i}_j{j}", r + 1),
                VarKind::Binary,
                -c,
                0.0,
                1.0,
                VarRole::Route { r, i, j },
            );
            route.insert((r, i, j), index);
        }
    }

    // Leg-cost variables, charged in the objective at face value.
    let mut entry_cost: BTreeMap<(usize, Option<NodeId>), usize> = BTreeMap::new();
    let mut exit_cost: BTreeMap<(usize, Option<NodeId>), usize> = BTreeMap::new();
    for (r, commodity) in instance.commodities().iter().enumerate() {
        if !instance.is_hub(commodity.origin) {
            if aggregated {
                let index = model.add_var(
                    format!("Fa_r{}", r + 1),
                    VarKind::Continuous,
                    -1.0,
                    0.0,
                    f64::INFINITY,
                    VarRole::EntryCostAgg { r },
                );
                entry_cost.insert((r, None), index);
            } else {
                for &i in instance.hubs() {
                    let index = model.add_var(
                        format!("F_r{}_i{i}", r + 1),
                        VarKind::Continuous,
                        -1.0,
                        0.0,
                        f64::INFINITY,
                        VarRole::EntryCost { r, i },
                    );
                    entry_cost.insert((r, Some(i)), index);
                }
            }
        }
        if !instance.is_hub(commodity.destination) {
            if aggregated {
                let index = model.add_var(
                    format!("Ta_r{}", r + 1),
                    VarKind::Continuous,
                    -1.0,
                    0.0,
                    f64::INFINITY,
                    VarRole::ExitCostAgg { r },
                );
                exit_cost.insert((r, None), index);
            } else {
                for &i in instance.hubs() {
                    let index = model.add_var(
                        format!("T_r{}_i{i}", r + 1),
                        VarKind::Continuous,
                        -1.0,
                        0.0,
                        f64::INFINITY,
                        VarRole::ExitCost { r, i },
                    );
                    exit_cost.insert((r, Some(i)), index);
                }
            }
        }
    }

    // Serving means picking exactly one arc.
    for r in 0..instance.commodity_count() {
        let mut terms: Vec<(usize, f64)> = instance
            .interhub_arcs(r)
            .into_iter()
            .filter_map(|(i, j)| route.get(&(r, i, j)).map(|&v| (v, 1.0)))
            .collect();
        terms.push((serve[r], -1.0));
        model.add_row(format!("serve_r{}", r + 1), RowSense::Eq, 0.0, terms);
    }

    // Entering (leaving) a hub needs an allocated carrier that is willing
    // to run the corresponding leg through it.
    for (r, commodity) in instance.commodities().iter().enumerate() {
        if !instance.is_hub(commodity.origin) {
            let acceptors = entry_acceptors(instance, r, variant, fees);
            for &i in instance.hubs() {
                let arcs: Vec<usize> = instance
                    .hubs()
                    .iter()
                    .filter_map(|&j| route.get(&(r, i, j)).copied())
                    .collect();
                if arcs.is_empty() {
                    continue;
                }
                let mut terms: Vec<(usize, f64)> = arcs.into_iter().map(|v| (v, 1.0)).collect();
                if let Some(carriers) = acceptors.get(&i) {
                    terms.extend(carriers.iter().map(|&k| (assign[&(commodity.origin, k)], -1.0)));
                }
                model.add_row(format!("olink_r{}_i{i}", r + 1), RowSense::Le, 0.0, terms);
            }
        }
        if !instance.is_hub(commodity.destination) {
            let acceptors = exit_acceptors(instance, r, variant, fees);
            for &j in instance.hubs() {
                let arcs: Vec<usize> = instance
                    .hubs()
                    .iter()
                    .filter_map(|&i| route.get(&(r, i, j)).copied())
                    .collect();
                if arcs.is_empty() {
                    continue;
                }
                let mut terms: Vec<(usize, f64)> = arcs.into_iter().map(|v| (v, 1.0)).collect();
                if let Some(carriers) = acceptors.get(&j) {
                    terms.extend(
                        carriers.iter().map(|&k| (assign[&(commodity.destination, k)], -1.0)),
                    );
                }
                model.add_row(format!("dlink_r{}_j{j}", r + 1), RowSense::Le, 0.0, terms);
            }
        }
    }

    // Leg-cost lower bounds (the lazily separable family).
    let mut leg = LegCostRows { model: &mut model, defer: options.defer_cuts };
    for (r, commodity) in instance.commodities().iter().enumerate() {
        if !instance.is_hub(commodity.origin) {
            for &i in instance.hubs() {
                let arcs: Vec<usize> = instance
                    .hubs()
                    .iter()
                    .filter_map(|&j| route.get(&(r, i, j)).copied())
                    .collect();
                if arcs.is_empty() {
                    continue;
                }
                let cost_var = entry_cost[&(r, if aggregated { None } else { Some(i) })];
                match variant {
                    Variant::Free => {
                        let prices: Vec<(CarrierId, f64)> = instance
                            .carriers()
                            .filter_map(|k| instance.access_price(r, k, i).map(|p| (k, p)))
                            .collect();
                        if prices.is_empty() {
                            continue; // olink already forbids entering here
                        }
                        if options.big_m && !aggregated {
                            // F_ri >= sum_k price a_ok - M (1 - sum_j x_ij)
                            let m = prices.iter().fold(0.0f64, |acc, &(_, p)| acc.max(p));
                            let mut terms = vec![(cost_var, 1.0)];
                            terms.extend(
                                prices.iter().map(|&(k, p)| (assign[&(commodity.origin, k)], -p)),
                            );
                            terms.extend(arcs.iter().map(|&v| (v, -m)));
                            leg.add(format!("fcost_r{}_i{i}", r + 1), -m, terms);
                        } else if !options.big_m {
                            // F_ri >= price (sum_j x_ij + a_ok - 1), per carrier
                            for &(k, p) in &prices {
                                let mut terms = vec![(cost_var, 1.0)];
                                terms.extend(arcs.iter().map(|&v| (v, -p)));
                                terms.push((assign[&(commodity.origin, k)], -p));
                                leg.add(format!("fcost_r{}_i{i}_k{k}", r + 1), -p, terms);
                            }
                        }
                        // big_m && aggregated: handled per carrier below.
                    }
                    Variant::FixedOptimistic => {
                        // F >= fee (sum_j x_ij + a_ok - 1) for hubs in the
                        // carrier's optimistic response set.
                        let fee = posted_first(fees, r, i);
                        if fee <= MONEY_EPS {
                            continue;
                        }
                        for k in instance.carriers() {
                            let response = first_leg_response(
                                instance,
                                r,
                                k,
                                fees.expect("fixed variant"),
                                crate::model::ResponseMode::Optimistic,
                            );
                            if !response.contains(i) {
                                continue;
                            }
                            let mut terms = vec![(cost_var, 1.0)];
                            terms.extend(arcs.iter().map(|&v| (v, -fee)));
                            terms.push((assign[&(commodity.origin, k)], -fee));
                            leg.add(format!("fcost_r{}_i{i}_k{k}", r + 1), -fee, terms);
                        }
                    }
                    Variant::FixedRelaxed => {
                        // Any entering carrier was already screened by the
                        // olink row, so the fee is due whenever the route
                        // enters the hub: F >= fee sum_j x_ij.  The
                        // aggregated form folds all hubs into one row below.
                        if aggregated {
                            continue;
                        }
                        let fee = posted_first(fees, r, i);
                        if fee <= MONEY_EPS {
                            continue;
                        }
                        let mut terms = vec![(cost_var, 1.0)];
                        terms.extend(arcs.iter().map(|&v| (v, -fee)));
                        leg.add(format!("fcost_r{}_i{i}", r + 1), 0.0, terms);
                    }
                }
            }
            // Aggregated big-M rows run per carrier, not per hub.
            if variant == Variant::Free && options.big_m && aggregated {
                let cost_var = entry_cost[&(r, None)];
                for k in instance.carriers() {
                    let mut terms = vec![(cost_var, 1.0)];
                    let mut m = 0.0f64;
                    for &i in instance.hubs() {
                        let Some(price) = instance.access_price(r, k, i) else { continue };
                        m = m.max(price);
                        for &j in instance.hubs() {
                            if let Some(&x) = route.get(&(r, i, j)) {
                                terms.push((x, -price));
                            }
                        }
                    }
                    if terms.len() == 1 {
                        continue; // carrier covers no entry hub of this commodity
                    }
                    terms.push((assign[&(commodity.origin, k)], -m));
                    leg.add(format!("fcost_r{}_k{k}", r + 1), -m, terms);
                }
            }
            // The aggregated relaxed form totals the entry fee over entered
            // hubs in a single row per commodity.
            if variant == Variant::FixedRelaxed && aggregated {
                let cost_var = entry_cost[&(r, None)];
                let mut terms = vec![(cost_var, 1.0)];
                for &i in instance.hubs() {
                    let fee = posted_first(fees, r, i);
                    if fee <= MONEY_EPS {
                        continue;
                    }
                    for &j in instance.hubs() {
                        if let Some(&x) = route.get(&(r, i, j)) {
                            terms.push((x, -fee));
                        }
                    }
                }
                if terms.len() > 1 {
                    leg.add(format!("fcost_r{}", r + 1), 0.0, terms);
                }
            }
        }
        if !instance.is_hub(commodity.destination) {
            for &j in instance.hubs() {
                let arcs: Vec<usize> = instance
                    .hubs()
                    .iter()
                    .filter_map(|&i| route.get(&(r, i, j)).copied())
                    .collect();
                if arcs.is_empty() {
                    continue;
                }
                let cost_var = exit_cost[&(r, if aggregated { None } else { Some(j) })];
                match variant {
                    Variant::Free => {
                        let prices: Vec<(CarrierId, f64)> = instance
                            .carriers()
                            .filter_map(|k| instance.dist_price(r, k, j).map(|p| (k, p)))
                            .collect();
                        if prices.is_empty() {
                            continue;
                        }
                        if options.big_m && !aggregated {
                            let m = prices.iter().fold(0.0f64, |acc, &(_, p)| acc.max(p));
                            let mut terms = vec![(cost_var, 1.0)];
                            terms.extend(
                                prices
                                    .iter()
                                    .map(|&(k, p)| (assign[&(commodity.destination, k)], -p)),
                            );
                            terms.extend(arcs.iter().map(|&v| (v, -m)));
                            leg.add(format!("tcost_r{}_j{j}", r + 1), -m, terms);
                        } else if !options.big_m {
                            for &(k, p) in &prices {
                                let mut terms = vec![(cost_var, 1.0)];
                                terms.extend(arcs.iter().map(|&v| (v, -p)));
                                terms.push((assign[&(commodity.destination, k)], -p));
                                leg.add(format!("tcost_r{}_j{j}_k{k}", r + 1), -p, terms);
                            }
                        }
                    }
                    Variant::FixedOptimistic => {
                        let fee = posted_third(fees, r, j);
                        if fee <= MONEY_EPS {
                            continue;
                        }
                        for k in instance.carriers() {
                            let response = third_leg_response(
                                instance,
                                r,
                                k,
                                fees.expect("fixed variant"),
                                crate::model::ResponseMode::Optimistic,
                            );
                            if !response.contains(j) {
                                continue;
                            }
                            let mut terms = vec![(cost_var, 1.0)];
                            terms.extend(arcs.iter().map(|&v| (v, -fee)));
                            terms.push((assign[&(commodity.destination, k)], -fee));
                            leg.add(format!("tcost_r{}_j{j}_k{k}", r + 1), -fee, terms);
                        }
                    }
                    Variant::FixedRelaxed => {
                        if aggregated {
                            continue;
                        }
                        let fee = posted_third(fees, r, j);
                        if fee <= MONEY_EPS {
                            continue;
                        }
                        let mut terms = vec![(cost_var, 1.0)];
                        terms.extend(arcs.iter().map(|&v| (v, -fee)));
                        leg.add(format!("tcost_r{}_j{j}", r + 1), 0.0, terms);
                    }
                }
            }
            if variant == Variant::Free && options.big_m && aggregated {
                let cost_var = exit_cost[&(r, None)];
                for k in instance.carriers() {
                    let mut terms = vec![(cost_var, 1.0)];
                    let mut m = 0.0f64;
                    for &j in instance.hubs() {
                        let Some(price) = instance.dist_price(r, k, j) else { continue };
                        m = m.max(price);
                        for &i in instance.hubs() {
                            if let Some(&x) = route.get(&(r, i, j)) {
                                terms.push((x, -price));
                            }
                        }
                    }
                    if terms.len() == 1 {
                        continue;
                    }
                    terms.push((assign[&(commodity.destination, k)], -m));
                    leg.add(format!("tcost_r{}_k{k}", r + 1), -m, terms);
                }
            }
            if variant == Variant::FixedRelaxed && aggregated {
                let cost_var = exit_cost[&(r, None)];
                let mut terms = vec![(cost_var, 1.0)];
                for &j in instance.hubs() {
                    let fee = posted_third(fees, r, j);
                    if fee <= MONEY_EPS {
                        continue;
                    }
                    for &i in instance.hubs() {
                        if let Some(&x) = route.get(&(r, i, j)) {
                            terms.push((x, -fee));
                        }
                    }
                }
                if terms.len() > 1 {
                    leg.add(format!("tcost_r{}", r + 1), 0.0, terms);
                }
            }
        }
    }

    model
}

/// Routes leg-cost rows into the active or the deferred set.
struct LegCostRows<'a> {
    model: &'a mut MilpModel,
    defer: bool,
}

impl LegCostRows<'_> {
    fn add(&mut self, name: String, rhs: f64, terms: Vec<(usize, f64)>) {
        if self.defer {
            self.model.defer_row(name, RowSense::Ge, rhs, terms);
        } else {
            self.model.add_row(name, RowSense::Ge, rhs, terms);
        }
    }
}

// ---------------------------------------------------------------------------
// IP: pair-assignment over the cost tensor
// ---------------------------------------------------------------------------

fn build_ip(instance: &Instance, variant: Variant, costs: &PreprocessedCosts) -> MilpModel {
    let mut model = MilpModel::new(format!("ip_{variant}").to_lowercase(), Formulation::Ip, variant);
    let (serve, assign) = add_serve_and_assign(&mut model, instance);

    // One binary per servable, profitable carrier pair; priced by the
    // tensor and routed along its witness arc on extraction.
    let mut pair: BTreeMap<(usize, CarrierId, CarrierId), usize> = BTreeMap::new();
    for (r, commodity) in instance.commodities().iter().enumerate() {
        for k in instance.carriers() {
            for l in instance.carriers() {
                let Some(cost) = costs.get(r, k, l) else { continue };
                if cost >= commodity.revenue - MONEY_EPS {
                    continue;
                }
                let witness = costs.witness(r, k, l).expect("finite cell has a witness");
                let index = model.add_var(
                    format!("pi_r{}_k{k}_l{l}", r + 1),
                    VarKind::Binary,
                    -cost,
                    0.0,
                    1.0,
                    VarRole::PairServe { r, k, l, route: witness },
                );
                pair.insert((r, k, l), index);
            }
        }
    }

    // Serving picks exactly one pair (commodities with no profitable pair
    // get the bare row, forcing s to zero).
    for r in 0..instance.commodity_count() {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for k in instance.carriers() {
            for l in instance.carriers() {
                if let Some(&v) = pair.get(&(r, k, l)) {
                    terms.push((v, 1.0));
                }
            }
        }
        terms.push((serve[r], -1.0));
        model.add_row(format!("serve_r{}", r + 1), RowSense::Eq, 0.0, terms);
    }

    // Pairs are available only where the endpoint carriers are allocated.
    for (r, commodity) in instance.commodities().iter().enumerate() {
        if !instance.is_hub(commodity.origin) {
            for k in instance.carriers() {
                let terms: Vec<(usize, f64)> = instance
                    .carriers()
                    .filter_map(|l| pair.get(&(r, k, l)).map(|&v| (v, 1.0)))
                    .collect();
                if terms.is_empty() {
                    continue;
                }
                let mut terms = terms;
                terms.push((assign[&(commodity.origin, k)], -1.0));
                model.add_row(format!("olink_r{}_k{k}", r + 1), RowSense::Le, 0.0, terms);
            }
        }
        if !instance.is_hub(commodity.destination) {
            for l in instance.carriers() {
                let terms: Vec<(usize, f64)> = instance
                    .carriers()
                    .filter_map(|k| pair.get(&(r, k, l)).map(|&v| (v, 1.0)))
                    .collect();
                if terms.is_empty() {
                    continue;
                }
                let mut terms = terms;
                terms.push((assign[&(commodity.destination, l)], -1.0));
                model.add_row(format!("dlink_r{}_l{l}", r + 1), RowSense::Le, 0.0, terms);
            }
        }
    }

    model
}
