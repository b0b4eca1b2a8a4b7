//! Waiting values in a single queue with endogenous entry.
//!
//! A tagged order sits in one queue that is served at a size-dependent rate
//! and joined by new orders whenever joining has positive value. Two fill
//! mechanisms are covered: pro-rata sharing, where each service event fills
//! every resting order in proportion to its share of the queue, and FIFO,
//! where service fills the front of the queue first and the value depends on
//! the position within the queue.
//!
//! Queue sizes live on the lattice `q, 2q, ..., x_max`. The entry decision
//! compares the waiting value at the current queue size against zero, so the
//! solved value function doubles as the entry policy.

use std::fmt;

use crate::error::Error;
use crate::lattice::Lattice;

/// How a service event allocates the consumed shares among resting orders.
///
/// Both rules remove `q` shares from the queue and give the tagged order the
/// same expected fill, so they induce the same waiting value; they are kept
/// separate to make that coincidence checkable instead of assumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillRule {
    /// Every resting order fills in proportion to its share of the queue.
    ProRata,
    /// One resting order, chosen with probability proportional to its size,
    /// fills completely.
    RandomizedFullFill,
}

/// A single-queue market: fixed order size, entry intensity, waiting cost,
/// and size-dependent service intensity and execution price.
pub struct QueueModel {
    /// Order size `q`; also the lattice step.
    pub order_size: f64,
    /// Intensity of candidate entrants, `lambda`.
    pub entry_intensity: f64,
    /// Waiting cost per share and unit of time, `c`.
    pub waiting_cost: f64,
    /// Largest queue size on the lattice, `x_max`.
    pub queue_max: f64,
    service: Box<dyn Fn(f64) -> f64>,
    price: Box<dyn Fn(f64) -> f64>,
}

impl fmt::Debug for QueueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QueueModel")
            .field("order_size", &self.order_size)
            .field("entry_intensity", &self.entry_intensity)
            .field("waiting_cost", &self.waiting_cost)
            .field("queue_max", &self.queue_max)
            .finish_non_exhaustive()
    }
}

impl QueueModel {
    /// Builds and validates a model with size-dependent service intensity
    /// `service(x)` and execution price `price(x)`.
    pub fn new(
        order_size: f64,
        entry_intensity: f64,
        waiting_cost: f64,
        queue_max: f64,
        service: impl Fn(f64) -> f64 + 'static,
        price: impl Fn(f64) -> f64 + 'static,
    ) -> Result<Self, Error> {
        let model = Self {
            order_size,
            entry_intensity,
            waiting_cost,
            queue_max,
            service: Box::new(service),
            price: Box::new(price),
        };
        model.validate()?;
        Ok(model)
    }

    /// Builds a model whose service intensity steps from `slow` to `fast` at
    /// queue size `threshold`, with a constant execution price.
    pub fn step(
        order_size: f64,
        entry_intensity: f64,
        waiting_cost: f64,
        queue_max: f64,
        slow: f64,
        fast: f64,
        threshold: f64,
        exec_price: f64,
    ) -> Result<Self, Error> {
        if !(slow < fast) {
            return Err(Error::InvalidConfig {
                issues: vec![format!(
                    "step service intensity must increase: slow {slow} vs fast {fast}"
                )],
            });
        }
        Self::new(
            order_size,
            entry_intensity,
            waiting_cost,
            queue_max,
            move |x| if x < threshold { slow } else { fast },
            move |_| exec_price,
        )
    }

    /// Builds a model with constant service intensity and execution price.
    pub fn constant(
        order_size: f64,
        entry_intensity: f64,
        waiting_cost: f64,
        queue_max: f64,
        service_intensity: f64,
        exec_price: f64,
    ) -> Result<Self, Error> {
        Self::new(
            order_size,
            entry_intensity,
            waiting_cost,
            queue_max,
            move |_| service_intensity,
            move |_| exec_price,
        )
    }

    /// Service intensity at queue size `x`.
    pub fn service_at(&self, x: f64) -> f64 {
        (self.service)(x)
    }

    /// Execution price at queue size `x`.
    pub fn price_at(&self, x: f64) -> f64 {
        (self.price)(x)
    }

    /// The queue-size lattice `q, 2q, ..., x_max`.
    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.order_size, (self.queue_max / self.order_size).round() as usize)
    }

    fn validate(&self) -> Result<(), Error> {
        let mut issues = Vec::new();
        if !(self.order_size > 0.0) || !self.order_size.is_finite() {
            issues.push("order_size must be positive and finite".to_string());
        }
        if !(self.entry_intensity > 0.0) {
            issues.push("entry_intensity must be positive".to_string());
        }
        if !(self.waiting_cost > 0.0) {
            issues.push("waiting_cost must be positive".to_string());
        }
        let ratio = self.queue_max / self.order_size;
        if !(self.queue_max >= 2.0 * self.order_size) || (ratio - ratio.round()).abs() > 1e-6 {
            issues.push(format!(
                "queue_max {} must be a multiple of order_size {} and at least twice it",
                self.queue_max, self.order_size
            ));
        }
        if issues.is_empty() {
            let mut sup_service = 0.0_f64;
            let mut prev: Option<(f64, f64)> = None;
            for (_, x) in self.lattice().iter() {
                let mu = self.service_at(x);
                let p = self.price_at(x);
                if !(mu >= 0.0) || !mu.is_finite() {
                    issues.push(format!("service intensity at x = {x} is {mu}"));
                    break;
                }
                if !(p >= 0.0) || !p.is_finite() {
                    issues.push(format!("execution price at x = {x} is {p}, must be non-negative"));
                    break;
                }
                if let Some((mu_prev, p_prev)) = prev {
                    if mu < mu_prev - 1e-12 {
                        issues.push(format!("service intensity decreases at x = {x}"));
                        break;
                    }
                    if p > p_prev + 1e-12 {
                        issues.push(format!("execution price increases at x = {x}"));
                        break;
                    }
                }
                prev = Some((mu, p));
                sup_service = sup_service.max(mu);
            }
            if issues.is_empty() && !(self.entry_intensity > sup_service) {
                issues.push(format!(
                    "entry_intensity {} must exceed the largest service intensity {sup_service}",
                    self.entry_intensity
                ));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig { issues })
        }
    }

    fn sup_service(&self) -> f64 {
        self.lattice()
            .iter()
            .fold(0.0_f64, |m, (_, x)| m.max(self.service_at(x)))
    }

    /// Solves the waiting value by damped fixed-point iteration, starting
    /// from the all-zero field. See [`QueueModel::solve_from`].
    pub fn solve(
        &self,
        rule: FillRule,
        tolerance: f64,
        relaxation: f64,
        max_iterations: usize,
    ) -> Result<QueueValue, Error> {
        let n = self.lattice().len();
        self.solve_from(rule, vec![0.0; n], tolerance, relaxation, max_iterations)
    }

    /// Solves the waiting value by damped fixed-point iteration from a given
    /// start.
    ///
    /// At queue size `x` a service event removes `q` shares: pro-rata it
    /// fills the fraction `q / x` of the tagged order at the execution
    /// price, under randomized full fill it executes the tagged order
    /// completely with probability `q / x`. Candidate entrants join while
    /// the waiting value at the current size is positive, except at the
    /// largest queue size, where entry is blocked.
    ///
    /// The entry indicator can keep flipping at the node where the value
    /// crosses zero, which puts a floor on the reachable residual; choose
    /// the tolerance above that floor or expect
    /// [`Error::NonConvergence`].
    pub fn solve_from(
        &self,
        rule: FillRule,
        start: Vec<f64>,
        tolerance: f64,
        relaxation: f64,
        max_iterations: usize,
    ) -> Result<QueueValue, Error> {
        let lattice = self.lattice();
        let n = lattice.len();
        assert_eq!(start.len(), n, "start field does not match the lattice");
        let q = self.order_size;
        let lambda = self.entry_intensity;
        let c = self.waiting_cost;
        let sup_mu = self.sup_service();
        let floor = -c * q * self.queue_max / lambda;

        let mut values = start;
        let mut next = vec![0.0_f64; n];
        let mut residual = f64::INFINITY;
        for iteration in 1..=max_iterations {
            residual = 0.0;
            for i in 0..n {
                let x = lattice.coord(i);
                let mu = self.service_at(x);
                let down = if i == 0 { 0.0 } else { values[i - 1] };
                let serviced = match rule {
                    FillRule::ProRata => (q / x) * self.price_at(x) + (1.0 - q / x) * down,
                    FillRule::RandomizedFullFill => {
                        let fill_probability = q / x;
                        fill_probability * self.price_at(x) + (1.0 - fill_probability) * down
                    }
                };
                let entering = values[i] > 0.0 && i + 1 < n;
                let mut rate = mu;
                let mut flow = mu * serviced;
                if entering {
                    rate += lambda;
                    flow += lambda * values[i + 1];
                }
                let raw = if rate > 0.0 {
                    (flow - c * q) / rate
                } else {
                    (values[i] - c * q / (lambda + sup_mu)).max(floor)
                };
                residual = residual.max((raw - values[i]).abs());
                next[i] = (1.0 - relaxation) * values[i] + relaxation * raw;
            }
            std::mem::swap(&mut values, &mut next);
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("single-queue value at iteration {iteration}"),
                });
            }
            if residual < tolerance {
                return Ok(QueueValue { lattice, values, iterations: iteration, residual });
            }
        }
        Err(Error::NonConvergence { iterations: max_iterations, residual })
    }

    /// Solves the FIFO waiting value over queue positions.
    ///
    /// The value depends on the shares `z` at or ahead of the tagged order
    /// and on the total queue size `x`. Service fills the front: the order
    /// at `z = q` executes fully, everyone else moves up by `q`. Entrants
    /// join at the back while the back-of-queue value is positive.
    pub fn solve_fifo(
        &self,
        tolerance: f64,
        relaxation: f64,
        max_iterations: usize,
    ) -> Result<FifoValue, Error> {
        let lattice = self.lattice();
        let n = lattice.len();
        let q = self.order_size;
        let lambda = self.entry_intensity;
        let c = self.waiting_cost;
        let sup_mu = self.sup_service();
        let floor = -c * q * self.queue_max / lambda;

        let len = n * (n + 1) / 2;
        let mut values = vec![0.0_f64; len];
        let mut next = vec![0.0_f64; len];
        let mut residual = f64::INFINITY;
        for iteration in 1..=max_iterations {
            residual = 0.0;
            for xi in 0..n {
                let x = lattice.coord(xi);
                let mu = self.service_at(x);
                let back = values[tri(xi, xi)];
                let entering = back > 0.0 && xi + 1 < n;
                for zi in 0..=xi {
                    let mut rate = mu;
                    let mut flow = mu
                        * if zi == 0 {
                            self.price_at(x)
                        } else {
                            values[tri(zi - 1, xi - 1)]
                        };
                    if entering {
                        rate += lambda;
                        flow += lambda * values[tri(zi, xi + 1)];
                    }
                    let idx = tri(zi, xi);
                    let raw = if rate > 0.0 {
                        (flow - c * q) / rate
                    } else {
                        (values[idx] - c * q / (lambda + sup_mu)).max(floor)
                    };
                    residual = residual.max((raw - values[idx]).abs());
                    next[idx] = (1.0 - relaxation) * values[idx] + relaxation * raw;
                }
            }
            std::mem::swap(&mut values, &mut next);
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("FIFO value at iteration {iteration}"),
                });
            }
            if residual < tolerance {
                return Ok(FifoValue { lattice, values, iterations: iteration, residual });
            }
        }
        Err(Error::NonConvergence { iterations: max_iterations, residual })
    }
}

/// Flat offset of position `zi` within queue-size row `xi` in triangular
/// storage.
#[inline]
fn tri(zi: usize, xi: usize) -> usize {
    xi * (xi + 1) / 2 + zi
}

/// Solved pro-rata waiting value on the queue lattice.
#[derive(Debug, Clone)]
pub struct QueueValue {
    /// The queue-size lattice.
    pub lattice: Lattice,
    /// Waiting value per lattice node.
    pub values: Vec<f64>,
    /// Iterations used by the solver.
    pub iterations: usize,
    /// Final fixed-point residual.
    pub residual: f64,
}

impl QueueValue {
    /// Waiting value at node `i`.
    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Maximal intervals of queue sizes with strictly positive value, as
    /// `(first coordinate, last coordinate)` pairs.
    pub fn positive_runs(&self) -> Vec<(f64, f64)> {
        let mut runs = Vec::new();
        let mut start: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            match (start, *v > 0.0) {
                (None, true) => start = Some(i),
                (Some(s), false) => {
                    runs.push((self.lattice.coord(s), self.lattice.coord(i - 1)));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((self.lattice.coord(s), self.lattice.max_coord()));
        }
        runs
    }
}

/// Solved FIFO waiting value over queue positions, stored triangularly.
#[derive(Debug, Clone)]
pub struct FifoValue {
    /// The queue-size lattice.
    pub lattice: Lattice,
    values: Vec<f64>,
    /// Iterations used by the solver.
    pub iterations: usize,
    /// Final fixed-point residual.
    pub residual: f64,
}

impl FifoValue {
    /// Value with `(zi + 1) * q` shares at or ahead of the tagged order in a
    /// queue of `(xi + 1) * q` shares. Requires `zi <= xi`.
    pub fn at(&self, zi: usize, xi: usize) -> f64 {
        assert!(zi <= xi, "position beyond queue size");
        self.values[tri(zi, xi)]
    }

    /// Value at the front of a queue with size index `xi`.
    pub fn front(&self, xi: usize) -> f64 {
        self.at(0, xi)
    }

    /// Value at the back of a queue with size index `xi`.
    pub fn back(&self, xi: usize) -> f64 {
        self.at(xi, xi)
    }
}

/// First-order switching points for a step service intensity with constant
/// payoff: the queue sizes `slow * payoff / cost` and `fast * payoff / cost`
/// at which waiting at the respective service rate breaks even.
pub fn first_order_switch_points(slow: f64, fast: f64, payoff: f64, cost: f64) -> (f64, f64) {
    (slow * payoff / cost, fast * payoff / cost)
}

/// Queue size at which staying in the queue stops paying: the root of
/// `c * x - service(x) * price(x)` on `[lo, hi]`.
///
/// The interval is scanned with the given step for a sign change, which is
/// then sharpened by bisection. Discontinuous service intensities are fine;
/// the returned point is where the scanned function changes sign.
pub fn switch_point(
    waiting_cost: f64,
    service: &dyn Fn(f64) -> f64,
    price: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    scan_step: f64,
) -> Result<f64, Error> {
    let g = |x: f64| waiting_cost * x - service(x) * price(x);
    let mut a = lo;
    let mut fa = g(a);
    let mut bracket = None;
    let mut x = lo;
    while x < hi {
        let next = (x + scan_step).min(hi);
        let fb = g(next);
        if fa == 0.0 {
            return Ok(a);
        }
        if fa * fb < 0.0 {
            bracket = Some((a, next, fa));
            break;
        }
        a = next;
        fa = fb;
        x = next;
    }
    let (mut a, mut b, fa) = bracket.ok_or_else(|| Error::NoRoot {
        lo,
        hi,
        context: "switch point of the entry decision".to_string(),
    })?;
    let mut sign_a = fa.signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = g(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == sign_a {
            a = mid;
            sign_a = fm.signum();
        } else {
            b = mid;
        }
        if (b - a) < 1e-13 * (1.0 + b.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}
