//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::decisions::DecisionField;

/// Everything that can go wrong while configuring, solving, or post-processing
/// a market model.
#[derive(Debug, Error)]
pub enum Error {
    /// A marginal execution price was requested against a queue that is too
    /// shallow to absorb the order. Callers are expected to gate these
    /// evaluations; reaching this error indicates a logic bug upstream.
    #[error("execution price undefined: queue size {queue} must exceed order size {order}")]
    PriceDomain {
        /// Queue size the price was evaluated at.
        queue: f64,
        /// Order size that would trade against the queue.
        order: f64,
    },

    /// One or more configuration invariants are violated.
    #[error("invalid configuration: {}", issues.join("; "))]
    InvalidConfig {
        /// Every violated invariant, one entry per violation.
        issues: Vec<String>,
    },

    /// An iterative solve hit its iteration cap before reaching tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        /// Iterations performed before giving up.
        iterations: usize,
        /// Residual at the last iteration.
        residual: f64,
    },

    /// The decision field oscillates with a short period instead of settling.
    #[error("decision field limit cycle of period {period} detected after {iterations} outer steps")]
    LimitCycle {
        /// Length of the detected cycle.
        period: usize,
        /// Outer iterations performed when the cycle was confirmed.
        iterations: usize,
        /// The distinct decision fields forming the cycle, in visit order.
        states: Vec<DecisionField>,
    },

    /// A value update produced a NaN or infinity.
    #[error("non-finite value encountered in {context}")]
    NonFinite {
        /// Where the non-finite value appeared.
        context: String,
    },

    /// A chain state has no outgoing transition.
    #[error("absorbing state at queue sizes ({ask}, {bid})")]
    AbsorbingState {
        /// Ask-queue size of the absorbing state.
        ask: f64,
        /// Bid-queue size of the absorbing state.
        bid: f64,
    },

    /// The recurrent class reached from the minimal state is not strongly
    /// connected, so the stationary measure is ill-defined.
    #[error("chain is reducible: {count} reachable states cannot return to the minimal state (first few: {sample:?})")]
    ReducibleChain {
        /// Number of offending states.
        count: usize,
        /// Queue-size pairs of the first few offending states.
        sample: Vec<(f64, f64)>,
    },

    /// A bracketing root search found no sign change.
    #[error("no root in [{lo}, {hi}] for {context}")]
    NoRoot {
        /// Lower end of the searched interval.
        lo: f64,
        /// Upper end of the searched interval.
        hi: f64,
        /// What was being solved.
        context: String,
    },

    /// A frontier evaluation was requested outside the curve's domain.
    #[error("frontier domain error: {0}")]
    FrontierDomain(String),

    /// A conditional average has zero conditioning flow.
    #[error("average undefined: {0} has zero weight under the stationary measure")]
    UndefinedAverage(String),

    /// The banded linear solver met a negligible pivot.
    #[error("banded solve failed: near-zero pivot at row {row}")]
    SingularSystem {
        /// Row index of the offending pivot.
        row: usize,
    },

    /// An operation restricted to single-class markets was called with more.
    #[error("{context} requires exactly one trader class, got {actual}")]
    ClassCount {
        /// The operation that was attempted.
        context: String,
        /// Number of classes in the configuration.
        actual: usize,
    },

    /// A curve or point set required by an operation is empty.
    #[error("empty curve: {0}")]
    EmptyCurve(String),
}
