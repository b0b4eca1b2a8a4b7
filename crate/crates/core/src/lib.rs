//! Equilibrium solver and simulator for a two-queue limit order book in which
//! every order chooses between providing liquidity (joining its own queue) and
//! consuming it (trading immediately against the opposite queue).
//!
//! The market is reduced to the pair of best-quote queue sizes `(Q_a, Q_b)` on
//! a regular lattice. Strategic flow routes each order by comparing the value
//! of waiting in a queue against the marginal execution price implied by the
//! opposite queue's depth; non-strategic flow always trades immediately. The
//! crate solves the resulting fixed point, classifies the routing regions,
//! derives closed-form approximations of the switching curves, computes the
//! stationary law of the queue pair, simulates the jump process event by
//! event, and reports traded-volume and spread metrics.
//!
//! Modules:
//! - [`market`]: trader-class parameters and market configuration.
//! - [`lattice`]: queue-size grid geometry and dense per-node storage.
//! - [`pricing`]: marginal execution prices against a finite queue.
//! - [`decisions`]: routing indicator fields, boundary forcing, region labels.
//! - [`single_queue`]: one-queue waiting-value models (pro-rata and FIFO).
//! - [`equilibrium`]: the two-sided value/decision fixed-point solver.
//! - [`frontiers`]: analytic and numeric switching curves.
//! - [`markov`]: jump generator, stationary measure, event simulation.
//! - [`metrics`]: traded volumes, average prices, spreads.
//! - [`presets`]: ready-made market configurations used throughout the tests.

#![deny(unsafe_code)]
#![warn(missing_docs)]

pub mod banded;
pub mod decisions;
pub mod equilibrium;
pub mod error;
pub mod frontiers;
pub mod lattice;
pub mod market;
pub mod markov;
pub mod metrics;
pub mod presets;
pub mod pricing;
pub mod single_queue;

pub use decisions::{ClassRegion, CombinedRegion, DecisionField};
pub use equilibrium::{
    extract_decisions, solve_equilibrium, solve_equilibrium_from, update_u, update_v,
    EquilibriumSolution, SolveDiagnostics,
};
pub use error::Error;
// pub use frontiers::{FrontierCurve, FrontierKind};
pub use lattice::{Grid2, Lattice, LatticePoint};
pub use market::{AgentClassParams, MarketConfig};
// pub use markov::{JumpGenerator, StationaryMeasure, Trajectory};
// pub use metrics::{compute_metrics, TradeMetrics};
pub use pricing::{buy_price, sell_price};
