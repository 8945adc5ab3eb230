//! Toolkit for the multi-commodity flow problem with outsourcing decisions
//! (MCFOD).
//!
//! A leader operates an inter-hub transport network and decides, for every
//! commodity, whether to serve it and along which pair of hubs to route it.
//! First and last legs (origin to entry hub, exit hub to destination) are not
//! operated by the leader: they are outsourced to independent carriers.  The
//! leader allocates at most one carrier to every non-hub node and posts
//! per-leg outsourcing fees; a carrier accepts a leg only when the posted fee
//! covers its own reservation price, and among acceptable entry (exit) hubs
//! the carrier picks the most profitable one.  The leader's revenue for a
//! served commodity is a fixed prize, so the objective trades prizes against
//! inter-hub routing costs plus outsourcing fees.
//!
//! The crate is organised around the lifecycle of an instance:
//!
//! * [`model`] — instance data model, validation, JSON (de)serialisation;
//! * [`preprocess`] — hub-network completion, redundant-hub removal and the
//!   per-(commodity, carrier-pair) cost tensors used by the compact solvers;
//! * [`follower`] — carrier response sets, leader-side serving costs and
//!   solution verification;
//! * [`fees`] — synthesis of optimal fee schedules from a routing decision;
//! * [`milp`] — mixed-integer formulations, MPS emission and the external
//!   solver bridge (including the deferred-cut re-solve loop);
//! * [`exact`] — enumeration and branch-and-bound references for small
//!   instances;
//! * [`generator`] — random instance synthesis from point/demand data and the
//!   quadratic semi-assignment reduction.

pub mod exact;
pub mod fees;
pub mod follower;
pub mod generator;
pub mod milp;
pub mod model;
pub mod preprocess;

pub use model::{
    Allocation, CarrierId, Commodity, FeeSchedule, Instance, LeaderSolution, ModelError, NodeId,
    ResponseMode, Variant, INTEGRALITY_EPS, MONEY_EPS,
};
