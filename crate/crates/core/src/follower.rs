//! Carrier-side response behaviour and leader-side serving costs.
//!
//! Once fees are posted, a carrier allocated to a commodity endpoint compares,
//! hub by hub, the offered fee against its own reservation price.  The leg
//! margin into hub `i` is `fee - reservation price`; hubs whose leg the
//! carrier cannot operate at all (no reservation-price entry) never enter the
//! comparison.  Two response conventions are supported:
//!
//! * **optimistic** — the carrier runs only margin-maximising hubs, and only
//!   when the best margin is nonnegative; indifference is resolved in the
//!   leader's favour, so a zero best margin still yields acceptance;
//! * **relaxed** — the carrier accepts every hub with nonnegative margin.
//!
//! On top of the response sets this module evaluates the leader's cheapest
//! way of serving a commodity under a given allocation and fee schedule, and
//! verifies complete solutions.

use crate::model::{
    Allocation, FeeSchedule, Instance, LeaderSolution, NodeId, ResponseMode, VerificationReport,
    Variant, MONEY_EPS,
};

/// Hubs a carrier is willing to run one leg through, together with the best
/// margin the fee schedule offers it on that leg.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    /// Best achievable margin over hubs whose leg the carrier can operate;
    /// `f64::NEG_INFINITY` when it can operate none.
    pub value: f64,
    /// Acceptable hubs, ascending.  Empty when the carrier refuses the leg.
    pub hubs: Vec<NodeId>,
}

impl ResponseSet {
    fn refuse() -> Self {
        ResponseSet { value: f64::NEG_INFINITY, hubs: Vec::new() }
    }

    /// Whether the carrier accepts the leg through at least one hub.
    pub fn accepts(&self) -> bool {
        !self.hubs.is_empty()
    }

    /// Whether hub `i` is acceptable.
    pub fn contains(&self, i: NodeId) -> bool {
        self.hubs.binary_search(&i).is_ok()
    }
}

fn leg_response(margins: impl Iterator<Item = (NodeId, f64)>, mode: ResponseMode) -> ResponseSet {
    let all: Vec<(NodeId, f64)> = margins.collect();
    let best = all.iter().fold(f64::NEG_INFINITY, |acc, &(_, m)| acc.max(m));
    let hubs: Vec<NodeId> = match mode {
        ResponseMode::Optimistic => {
            if best >= -MONEY_EPS {
                // Margin-maximising hubs, with a tolerance band so that
                // synthesised fees hitting the maximum exactly are robust to
                // rounding noise.
                all.iter()
                    .filter(|&&(_, m)| m >= best - MONEY_EPS)
                    .map(|&(h, _)| h)
                    .collect()
            } else {
                Vec::new()
            }
        }
        ResponseMode::Relaxed => all
            .iter()
            .filter(|&&(_, m)| m >= -MONEY_EPS)
            .map(|&(h, _)| h)
            .collect(),
    };
    ResponseSet { value: best, hubs }
}

/// Hubs through which carrier `k` is willing to run the first leg of
/// commodity `r` (origin to entry hub) under `fees`.
///
/// The commodity's origin must be a non-hub node; hub origins have no first
/// leg to outsource.
pub fn first_leg_response(
    instance: &Instance,
    r: usize,
    k: crate::model::CarrierId,
    fees: &FeeSchedule,
    mode: ResponseMode,
) -> ResponseSet {
    let origin = instance.commodity(r).origin;
    debug_assert!(!instance.is_hub(origin), "hub origins have no first leg");
    if instance.is_hub(origin) {
        return ResponseSet::refuse();
    }
    let margins = instance.hubs().iter().filter_map(move |&i| {
        let price = instance.access_price(r, k, i)?;
        let fee = fees.first_leg(r, i).unwrap_or(0.0);
        Some((i, fee - price))
    });
    leg_response(margins, mode)
}

/// Hubs through which carrier `k` is willing to run the last leg of
/// commodity `r` (exit hub to destination) under `fees`.
///
/// The commodity's destination must be a non-hub node.
pub fn third_leg_response(
    instance: &Instance,
    r: usize,
    k: crate::model::CarrierId,
    fees: &FeeSchedule,
    mode: ResponseMode,
) -> ResponseSet {
    let destination = instance.commodity(r).destination;
    debug_assert!(!instance.is_hub(destination), "hub destinations have no last leg");
    if instance.is_hub(destination) {
        return ResponseSet::refuse();
    }
    let margins = instance.hubs().iter().filter_map(move |&i| {
        let price = instance.dist_price(r, k, i)?;
        let fee = fees.third_leg(r, i).unwrap_or(0.0);
        Some((i, fee - price))
    });
    leg_response(margins, mode)
}

/// Direct cost to the leader of pushing commodity `r` along inter-hub arc
/// `(i, j)`: outsourcing fees for legs that exist plus the inter-hub cost.
/// `None` when the arc is not part of the commodity's network.
pub fn route_cost(
    instance: &Instance,
    r: usize,
    route: (NodeId, NodeId),
    fees: &FeeSchedule,
) -> Option<f64> {
    let (i, j) = route;
    if !instance.interhub_arcs(r).contains(&(i, j)) {
        return None;
    }
    let c = instance.leader_cost(r, i, j)?;
    let commodity = instance.commodity(r);
    let mut total = c;
    if !instance.is_hub(commodity.origin) {
        total += fees.first_leg(r, i).unwrap_or(0.0);
    }
    if !instance.is_hub(commodity.destination) {
        total += fees.third_leg(r, j).unwrap_or(0.0);
    }
    Some(total)
}

/// Cheapest cost at which the leader can serve commodity `r` given an
/// allocation, posted fees and a response convention; `None` when no
/// acceptable routing exists (endpoint unallocated, carrier refusal, or no
/// usable inter-hub arc).
pub fn leader_cost(
    instance: &Instance,
    r: usize,
    allocation: &Allocation,
    fees: &FeeSchedule,
    mode: ResponseMode,
) -> Option<f64> {
    best_route(instance, r, allocation, fees, mode).map(|(_, cost)| cost)
}

/// Like [`leader_cost`], additionally reporting the lexicographically
/// smallest cost-minimising arc.
pub fn best_route(
    instance: &Instance,
    r: usize,
    allocation: &Allocation,
    fees: &FeeSchedule,
    mode: ResponseMode,
) -> Option<((NodeId, NodeId), f64)> {
    let commodity = instance.commodity(r);
    let o_hub = instance.is_hub(commodity.origin);
    let d_hub = instance.is_hub(commodity.destination);

    let entry: Option<ResponseSet> = if o_hub {
        None
    } else {
        let k = allocation.get(commodity.origin)?;
        let resp = first_leg_response(instance, r, k, fees, mode);
        if !resp.accepts() {
            return None;
        }
        Some(resp)
    };
    let exit: Option<ResponseSet> = if d_hub {
        None
    } else {
        let k = allocation.get(commodity.destination)?;
        let resp = third_leg_response(instance, r, k, fees, mode);
        if !resp.accepts() {
            return None;
        }
        Some(resp)
    };

    let mut best: Option<((NodeId, NodeId), f64)> = None;
    for (i, j) in instance.interhub_arcs(r) {
        if let Some(resp) = &entry {
            if !resp.contains(i) {
                continue;
            }
        }
        if let Some(resp) = &exit {
            if !resp.contains(j) {
                continue;
            }
        }
        let Some(cost) = route_cost(instance, r, (i, j), fees) else {
            continue;
        };
        match &best {
            Some((_, incumbent)) if cost >= incumbent - MONEY_EPS => {}
            _ => best = Some(((i, j), cost)),
        }
    }
    best
}

/// Verifies a complete solution against the instance under the given
/// variant's response convention.
///
/// Checks, per served commodity: the non-hub endpoints are allocated; the
/// recorded route uses hubs the allocated carriers accept; the route's cost
/// is minimal among acceptable routes; and globally, that the recorded
/// objective re-derives from prizes minus route costs.  Fees come from the
/// solution itself for [`Variant::Free`] and from `fixed_fees` otherwise.
pub fn verify_solution(
    instance: &Instance,
    solution: &LeaderSolution,
    variant: Variant,
    fixed_fees: Option<&FeeSchedule>,
) -> VerificationReport {
    let mut report = VerificationReport::clean();
    let mode = variant.response_mode();

    let fees = match variant {
        Variant::Free => match &solution.fees {
            Some(f) => f,
            None => {
                report.push(
                    None,
                    "fees_present",
                    "free-fee solution carries its fee schedule",
                    "no fees in solution",
                );
                return report;
            }
        },
        Variant::FixedOptimistic | Variant::FixedRelaxed => match fixed_fees {
            Some(f) => f,
            None => {
                report.push(
                    None,
                    "fees_present",
                    "fixed-fee verification receives the fixed schedule",
                    "no fixed fees supplied",
                );
                return report;
            }
        },
    };

    if let Err(e) = solution.allocation.validate(instance) {
        report.push(None, "allocation_valid", "well-formed allocation", e.to_string());
    }
    if let Err(e) = fees.validate(instance) {
        report.push(None, "fees_valid", "well-formed fee schedule", e.to_string());
    }

    for &r in &solution.served {
        if r >= instance.commodity_count() {
            report.push(
                Some(r + 1),
                "commodity_known",
                format!("commodity index < {}", instance.commodity_count()),
                format!("served set contains {r}"),
            );
            continue;
        }
        let commodity = instance.commodity(r);
        let Some(&(i, j)) = solution.routes.get(&r) else {
            report.push(Some(r + 1), "route_present", "served commodity has a route", "no route");
            continue;
        };
        if !instance.interhub_arcs(r).contains(&(i, j)) {
            report.push(
                Some(r + 1),
                "route_in_network",
                "route drawn from the commodity's inter-hub arcs",
                format!("({i}, {j})"),
            );
            continue;
        }

        // Endpoint allocation and carrier acceptance of the chosen hubs.
        let mut acceptable = true;
        if !instance.is_hub(commodity.origin) {
            match solution.allocation.get(commodity.origin) {
                None => {
                    acceptable = false;
                    report.push(
                        Some(r + 1),
                        "origin_allocated",
                        format!("carrier allocated to node {}", commodity.origin),
                        "unallocated",
                    );
                }
                Some(k) => {
                    let resp = first_leg_response(instance, r, k, fees, mode);
                    if !resp.contains(i) {
                        acceptable = false;
                        report.push(
                            Some(r + 1),
                            "entry_hub_accepted",
                            format!("carrier {k} accepts first leg into hub {i}"),
                            format!("acceptable hubs {:?}", resp.hubs),
                        );
                    }
                }
            }
        }
        if !instance.is_hub(commodity.destination) {
            match solution.allocation.get(commodity.destination) {
                None => {
                    acceptable = false;
                    report.push(
                        Some(r + 1),
                        "destination_allocated",
                        format!("carrier allocated to node {}", commodity.destination),
                        "unallocated",
                    );
                }
                Some(k) => {
                    let resp = third_leg_response(instance, r, k, fees, mode);
                    if !resp.contains(j) {
                        acceptable = false;
                        report.push(
                            Some(r + 1),
                            "exit_hub_accepted",
                            format!("carrier {k} accepts last leg out of hub {j}"),
                            format!("acceptable hubs {:?}", resp.hubs),
                        );
                    }
                }
            }
        }
        if !acceptable {
            continue;
        }

        // Route cost optimality among acceptable routes.
        let stated = route_cost(instance, r, (i, j), fees);
        let cheapest = leader_cost(instance, r, &solution.allocation, fees, mode);
        match (stated, cheapest) {
            (Some(at_route), Some(minimum)) => {
                if (at_route - minimum).abs() > MONEY_EPS {
                    report.push(
                        Some(r + 1),
                        "route_cost_minimal",
                        format!("route cost {minimum}"),
                        format!("route ({i}, {j}) costs {at_route}"),
                    );
                }
            }
            _ => {
                report.push(
                    Some(r + 1),
                    "route_servable",
                    "commodity servable under allocation and fees",
                    "no acceptable routing",
                );
            }
        }
    }

    for &r in solution.routes.keys() {
        if !solution.served.contains(&r) {
            report.push(
                Some(r + 1),
                "route_only_when_served",
                "routes recorded only for served commodities",
                "route present for unserved commodity",
            );
        }
    }

    // Objective re-derivation from the recorded decisions.
    let mut derived = 0.0;
    let mut derivable = true;
    for &r in &solution.served {
        if r >= instance.commodity_count() {
            derivable = false;
            continue;
        }
        let Some(&route) = solution.routes.get(&r) else {
            derivable = false;
            continue;
        };
        match route_cost(instance, r, route, fees) {
            Some(cost) => derived += instance.commodity(r).revenue - cost,
            None => derivable = false,
        }
    }
    if derivable && (derived - solution.objective).abs() > MONEY_EPS {
        report.push(
            None,
            "objective_rederives",
            format!("{derived}"),
            format!("{}", solution.objective),
        );
    }

    report
}
