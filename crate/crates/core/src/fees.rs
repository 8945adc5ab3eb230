//! Fee synthesis: turning a routing decision into an optimal posted-fee
//! schedule.
//!
//! When fees are leader decision variables, an optimal schedule can be read
//! off any served-set/route/allocation choice: pay the allocated carrier
//! exactly its reservation price on the leg actually used, and nothing
//! anywhere else.  The chosen hub is then the carrier's unique
//! margin-maximiser (margin zero there, strictly negative elsewhere), every
//! other commodity leg is refused, and the leader never pays a cent above
//! reservation.  Candidate optimal fees therefore always live in the finite
//! support set {0} ∪ {reservation prices of some carrier for that leg}.

use crate::model::{Allocation, CarrierId, FeeSchedule, Instance, NodeId};
use std::collections::BTreeMap;

/// Chosen inter-hub arc (entry hub, exit hub) per served commodity index.
pub type LegChoice = BTreeMap<usize, (NodeId, NodeId)>;

/// Errors from fee synthesis.
#[derive(Debug, thiserror::Error)]
pub enum FeeError {
    #[error("commodity {commodity}: endpoint node {node} is not allocated to any carrier")]
    UnallocatedEndpoint { commodity: usize, node: NodeId },
    #[error(
        "commodity {commodity}: carrier {carrier} has no reservation price for the {leg} leg at hub {hub}"
    )]
    MissingPrice { commodity: usize, carrier: CarrierId, hub: NodeId, leg: &'static str },
    #[error("commodity {commodity}: ({i}, {j}) is not one of its inter-hub arcs")]
    InvalidRoute { commodity: usize, i: NodeId, j: NodeId },
}

/// Synthesises the cheapest fee schedule that makes the allocated carriers
/// run exactly the legs picked by `legs`.
///
/// For every commodity with a non-hub origin the first-leg fee equals the
/// allocated carrier's reservation price at the chosen entry hub and is zero
/// at every other hub; symmetrically for exit legs.  Commodities absent from
/// `legs` (unserved ones) get all-zero fees, which every carrier refuses.
pub fn synthesize(
    instance: &Instance,
    allocation: &Allocation,
    legs: &LegChoice,
) -> Result<FeeSchedule, FeeError> {
    let mut fees = FeeSchedule::zero(instance);
    for (&r, &(i, j)) in legs {
        if !instance.interhub_arcs(r).contains(&(i, j)) {
            return Err(FeeError::InvalidRoute { commodity: r + 1, i, j });
        }
        let commodity = instance.commodity(r);
        if !instance.is_hub(commodity.origin) {
            let k = allocation.get(commodity.origin).ok_or(FeeError::UnallocatedEndpoint {
                commodity: r + 1,
                node: commodity.origin,
            })?;
            let price = instance.access_price(r, k, i).ok_or(FeeError::MissingPrice {
                commodity: r + 1,
                carrier: k,
                hub: i,
                leg: "first",
            })?;
            fees.set_first_leg(r, i, price);
        }
        if !instance.is_hub(commodity.destination) {
            let l = allocation.get(commodity.destination).ok_or(FeeError::UnallocatedEndpoint {
                commodity: r + 1,
                node: commodity.destination,
            })?;
            let price = instance.dist_price(r, l, j).ok_or(FeeError::MissingPrice {
                commodity: r + 1,
                carrier: l,
                hub: j,
                leg: "third",
            })?;
            fees.set_third_leg(r, j, price);
        }
    }
    Ok(fees)
}

/// The candidate values an optimal first-leg fee (`.0`) or third-leg fee
/// (`.1`) for commodity `r` at hub `i` can take: zero plus each carrier's
/// reservation price for that leg.  Sorted ascending, deduplicated.
pub fn support_sets(instance: &Instance, r: usize, i: NodeId) -> (Vec<f64>, Vec<f64>) {
    let collect = |prices: &dyn Fn(CarrierId) -> Option<f64>| -> Vec<f64> {
        let mut values = vec![0.0];
        for k in instance.carriers() {
            if let Some(p) = prices(k) {
                values.push(p);
            }
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
    };
    (
        collect(&|k| instance.access_price(r, k, i)),
        collect(&|k| instance.dist_price(r, k, i)),
    )
}
