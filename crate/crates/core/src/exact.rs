//! Reference solvers for small instances: exhaustive allocation enumeration
//! and a branch-and-bound over partial allocations.
//!
//! Both work on a precomputed serving-cost tensor and agree bit-for-bit: the
//! optimal objective, the lexicographically smallest optimal allocation
//! (unallocated before carrier 1 before carrier 2, ..., scanning non-hub
//! nodes in ascending order), and the tensor's witness routes.

use crate::fees::synthesize;
use crate::model::{Allocation, Instance, LeaderSolution, NodeId, Variant, MONEY_EPS};
use crate::preprocess::PreprocessedCosts;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

/// Enumeration guard: refuse to walk more than this many allocations.
const MAX_STATES: u128 = 5_000_000;

/// Errors from the reference solvers.
#[derive(Debug, thiserror::Error)]
pub enum ExactError {
    #[error(
        "{states} candidate allocations ({carriers}+1 carriers to the power of {nodes} non-hub \
         nodes) exceed the enumeration guard of {max}"
    )]
    TooLarge { nodes: usize, carriers: u32, states: u128, max: u128 },
    #[error("cost tensor covers {tensor} commodities, instance has {instance}")]
    TensorMismatch { tensor: usize, instance: usize },
}

/// Per-commodity view of the tensor geared for allocation evaluation.
struct CommodityView {
    /// Position of the origin in the non-hub node list; `None` for hub
    /// origins (no carrier needed on that side).
    origin_slot: Option<usize>,
    dest_slot: Option<usize>,
    revenue: f64,
}

struct Evaluator<'a> {
    instance: &'a Instance,
    costs: &'a PreprocessedCosts,
    non_hubs: Vec<NodeId>,
    views: Vec<CommodityView>,
}

impl<'a> Evaluator<'a> {
    fn new(instance: &'a Instance, costs: &'a PreprocessedCosts) -> Result<Self, ExactError> {
        if costs.commodity_count() != instance.commodity_count() {
            return Err(ExactError::TensorMismatch {
                tensor: costs.commodity_count(),
                instance: instance.commodity_count(),
            });
        }
        let non_hubs: Vec<NodeId> = instance.non_hubs().collect();
        let slot_of = |node: NodeId| non_hubs.binary_search(&node).ok();
        let views = instance
            .commodities()
            .iter()
            .map(|c| CommodityView {
                origin_slot: if instance.is_hub(c.origin) { None } else { slot_of(c.origin) },
                dest_slot: if instance.is_hub(c.destination) {
                    None
                } else {
                    slot_of(c.destination)
                },
                revenue: c.revenue,
            })
            .collect();
        Ok(Evaluator { instance, costs, non_hubs, views })
    }

    /// Objective of a complete assignment (digit 0 = unallocated, digit k =
    /// carrier k, indexed like `non_hubs`).
    fn objective(&self, assign: &[u32]) -> f64 {
        let mut total = 0.0;
        for (r, view) in self.views.iter().enumerate() {
            if let Some(profit) = self.commodity_profit(r, view, assign) {
                total += profit;
            }
        }
        total
    }

    /// Strictly positive serving profit of commodity `r`, if served.
    fn commodity_profit(&self, r: usize, view: &CommodityView, assign: &[u32]) -> Option<f64> {
        let k = match view.origin_slot {
            Some(slot) if assign[slot] == 0 => return None,
            Some(slot) => assign[slot],
            None => 1, // hub side: tensor is constant across this coordinate
        };
        let l = match view.dest_slot {
            Some(slot) if assign[slot] == 0 => return None,
            Some(slot) => assign[slot],
            None => 1,
        };
        let cost = self.costs.get(r, k, l)?;
        let profit = view.revenue - cost;
        (profit > MONEY_EPS).then_some(profit)
    }

    /// Upper bound on the objective over completions of `assign[..depth]`:
    /// every commodity independently takes its best profit over carrier
    /// pairs consistent with the fixed prefix.
    fn bound(&self, assign: &[u32], depth: usize) -> f64 {
        let carriers = self.instance.carrier_count();
        let mut total = 0.0;
        for (r, view) in self.views.iter().enumerate() {
            let k_choices: Vec<u32> = match view.origin_slot {
                Some(slot) if slot < depth => {
                    if assign[slot] == 0 {
                        continue; // origin fixed unallocated: unservable
                    }
                    vec![assign[slot]]
                }
                Some(_) => (1..=carriers).collect(),
                None => vec![1],
            };
            let l_choices: Vec<u32> = match view.dest_slot {
                Some(slot) if slot < depth => {
                    if assign[slot] == 0 {
                        continue;
                    }
                    vec![assign[slot]]
                }
                Some(_) => (1..=carriers).collect(),
                None => vec![1],
            };
            let mut best = 0.0f64;
            for &k in &k_choices {
                for &l in &l_choices {
                    if let Some(cost) = self.costs.get(r, k, l) {
                        best = best.max(view.revenue - cost);
                    }
                }
            }
            total += best;
        }
        total
    }

    /// Assembles the solution for a winning assignment.
    fn solution(&self, assign: &[u32]) -> LeaderSolution {
        let mut allocation = Allocation::new();
        for (slot, &digit) in assign.iter().enumerate() {
            if digit > 0 {
                allocation.set(self.non_hubs[slot], digit);
            }
        }
        let mut served = BTreeSet::new();
        let mut routes = BTreeMap::new();
        let mut objective = 0.0;
        for (r, view) in self.views.iter().enumerate() {
            if let Some(profit) = self.commodity_profit(r, view, assign) {
                let k = view.origin_slot.map(|s| assign[s]).unwrap_or(1);
                let l = view.dest_slot.map(|s| assign[s]).unwrap_or(1);
                served.insert(r);
                routes.insert(
                    r,
                    self.costs.witness(r, k, l).expect("finite cost cells carry a witness"),
                );
                objective += profit;
            }
        }
        let fees = match self.costs.variant() {
            Variant::Free => Some(
                synthesize(self.instance, &allocation, &routes)
                    .expect("witness routes are always priced for the allocated carriers"),
            ),
            Variant::FixedOptimistic | Variant::FixedRelaxed => None,
        };
        LeaderSolution { allocation, served, routes, fees, objective }
    }
}

fn state_count(nodes: usize, carriers: u32) -> u128 {
    let base = carriers as u128 + 1;
    let mut states: u128 = 1;
    for _ in 0..nodes {
        states = states.saturating_mul(base);
    }
    states
}

/// Decodes enumeration index `index` into an assignment vector, most
/// significant digit first (so ascending indices enumerate assignment
/// vectors in lexicographic order).
fn decode(index: u128, base: u128, digits: usize, out: &mut [u32]) {
    let mut rest = index;
    for slot in (0..digits).rev() {
        out[slot] = (rest % base) as u32;
        rest /= base;
    }
}

/// Exhaustively enumerates all carrier allocations and returns the best
/// solution (ties broken towards the lexicographically smallest assignment).
///
/// The tensor's variant decides the game being solved; free-fee solutions
/// come back with their synthesised fee schedule attached.
pub fn brute_force(
    instance: &Instance,
    costs: &PreprocessedCosts,
) -> Result<LeaderSolution, ExactError> {
    let eval = Evaluator::new(instance, costs)?;
    let m = eval.non_hubs.len();
    let carriers = instance.carrier_count();
    let states = state_count(m, carriers);
    if states > MAX_STATES {
        return Err(ExactError::TooLarge { nodes: m, carriers, states, max: MAX_STATES });
    }
    let base = carriers as u128 + 1;

    // Shard on the first digit so the scan parallelises; combining shards in
    // digit order preserves the lexicographic tie-break.
    let shard_span = if m == 0 { 1 } else { states / base };
    let shards: Vec<(f64, u128)> = (0..if m == 0 { 1 } else { base })
        .into_par_iter()
        .map(|shard| {
            let mut assign = vec![0u32; m];
            let mut best = (f64::NEG_INFINITY, 0u128);
            for index in shard * shard_span..(shard + 1) * shard_span {
                decode(index, base, m, &mut assign);
                let objective = eval.objective(&assign);
                if objective > best.0 + MONEY_EPS {
                    best = (objective, index);
                }
            }
            best
        })
        .collect();

    let mut best = (f64::NEG_INFINITY, 0u128);
    for shard in shards {
        if shard.0 > best.0 + MONEY_EPS {
            best = shard;
        }
    }
    let mut assign = vec![0u32; m];
    decode(best.1, base, m, &mut assign);
    Ok(eval.solution(&assign))
}

/// Depth-first branch-and-bound over partial allocations, pruning with a
/// per-commodity optimistic completion bound.  Agrees exactly with
/// [`brute_force`], including the lexicographic tie-break, but visits far
/// fewer allocations on instances with slack.
pub fn branch_and_bound(
    instance: &Instance,
    costs: &PreprocessedCosts,
) -> Result<LeaderSolution, ExactError> {
    let eval = Evaluator::new(instance, costs)?;
    let m = eval.non_hubs.len();
    let carriers = instance.carrier_count();

    let mut assign = vec![0u32; m];
    let mut incumbent = f64::NEG_INFINITY;
    let mut best_assign = vec![0u32; m];

    fn dfs(
        eval: &Evaluator,
        carriers: u32,
        assign: &mut Vec<u32>,
        depth: usize,
        incumbent: &mut f64,
        best_assign: &mut Vec<u32>,
    ) {
        if depth == assign.len() {
            let objective = eval.objective(assign);
            if objective > *incumbent + MONEY_EPS {
                *incumbent = objective;
                best_assign.copy_from_slice(assign);
            }
            return;
        }
        if eval.bound(assign, depth) <= *incumbent + MONEY_EPS {
            return; // cannot strictly beat the incumbent
        }
        for digit in 0..=carriers {
            assign[depth] = digit;
            dfs(eval, carriers, assign, depth + 1, incumbent, best_assign);
        }
        assign[depth] = 0;
    }

    dfs(&eval, carriers, &mut assign, 0, &mut incumbent, &mut best_assign);
    Ok(eval.solution(&best_assign))
}
