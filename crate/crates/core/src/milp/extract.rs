//! Decoding a solver point back into a leader solution.

use std::collections::{BTreeMap, BTreeSet};

use super::{MilpError, MilpModel, SolveOutcome, SolveStatus, VarRole};
use crate::fees;
use crate::follower::route_cost;
use crate::model::{
    Allocation, FeeSchedule, Instance, LeaderSolution, NodeId, Variant, INTEGRALITY_EPS,
};

/// Turns a solved model into a [`LeaderSolution`].
///
/// * Binaries are decoded with a `0.5` threshold (solver output is noisy
///   at far below [`INTEGRALITY_EPS`], but the threshold keeps decoding
///   total).
/// * EP routing is continuous and may split across cost-tied arcs; the
///   arc with the largest value wins, first-in-emission-order (which is
///   lexicographic) on ties within [`INTEGRALITY_EPS`].
/// * `fixed_fees` must be the schedule the model was built with for the
///   fixed-fee variants, and `None` for the free variant, where the
///   reservation-price schedule supporting the allocation is synthesised.
///
/// The returned objective is recomputed from the decoded decisions, not
/// copied from the solver, so it is exactly the value the verifier will
/// rederive.
pub fn extract(
    instance: &Instance,
    model: &MilpModel,
    outcome: &SolveOutcome,
    fixed_fees: Option<&FeeSchedule>,
) -> Result<LeaderSolution, MilpError> {
    match outcome.status {
        SolveStatus::Optimal | SolveStatus::Feasible => {}
        status => {
            return Err(MilpError::BadSolution {
                reason: format!("no solution to extract from a {status} outcome"),
            })
        }
    }
    match (model.variant, fixed_fees) {
        (Variant::Free, Some(_)) => return Err(MilpError::UnexpectedFees),
        (Variant::FixedOptimistic | Variant::FixedRelaxed, None) => {
            return Err(MilpError::MissingFees { variant: model.variant })
        }
        _ => {}
    }

    let values = &outcome.values;
    let mut allocation = Allocation::new();
    let mut best_assign: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut served: BTreeSet<usize> = BTreeSet::new();
    // (value, arc) per commodity, best-so-far.
    let mut routes: BTreeMap<usize, (f64, (NodeId, NodeId))> = BTreeMap::new();

    for (index, var) in model.variables().iter().enumerate() {
        let value = values[index];
        match var.role {
            VarRole::Serve { r } => {
                if value > 0.5 {
                    served.insert(r);
                }
            }
            VarRole::Assign { node, k } => {
                if value > 0.5 && value > best_assign.get(&node).copied().unwrap_or(0.0) {
                    best_assign.insert(node, value);
                    allocation.set(node, k);
                }
            }
            VarRole::Route { r, i, j } => {
                let best = routes.get(&r).map(|&(v, _)| v).unwrap_or(0.0);
                if value > best + INTEGRALITY_EPS {
                    routes.insert(r, (value, (i, j)));
                }
            }
            VarRole::PairServe { r, route, .. } => {
                let best = routes.get(&r).map(|&(v, _)| v).unwrap_or(0.0);
                if value > best + INTEGRALITY_EPS {
                    routes.insert(r, (value, route));
                }
            }
            _ => {}
        }
    }

    let routes: BTreeMap<usize, (NodeId, NodeId)> = served
        .iter()
        .map(|&r| {
            routes
                .get(&r)
                .map(|&(_, arc)| (r, arc))
                .ok_or_else(|| MilpError::BadSolution {
                    reason: format!(
                        "commodity {} is served but carries no routing mass",
                        r + 1
                    ),
                })
        })
        .collect::<Result<_, _>>()?;

    let synthesized;
    let effective_fees = match model.variant {
        Variant::Free => {
            synthesized =
                fees::synthesize(instance, &allocation, &routes).map_err(|e| {
                    MilpError::BadSolution {
                        reason: format!("cannot support the decoded routes with fees: {e}"),
                    }
                })?;
            &synthesized
        }
        _ => fixed_fees.expect("checked above"),
    };

    let mut objective = 0.0;
    for (&r, &arc) in &routes {
        let cost =
            route_cost(instance, r, arc, effective_fees).ok_or_else(|| MilpError::BadSolution {
                reason: format!("decoded route {arc:?} of commodity {} is unusable", r + 1),
            })?;
        objective += instance.commodity(r).revenue - cost;
    }

    Ok(LeaderSolution {
        allocation,
        served,
        routes,
        fees: match model.variant {
            Variant::Free => Some(effective_fees.clone()),
            _ => None,
        },
        objective,
    })
}
