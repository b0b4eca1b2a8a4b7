//! Fixed point of the two-sided value functions and routing decisions.
//!
//! A resting sell order values its spot in the ask queue by `u`, a resting
//! buy order values its spot in the bid queue by `v`, per class. Every
//! arriving order routes by comparing the post-insertion value against the
//! marginal execution price, and the values in turn average over the flows
//! that those routing decisions create, minus the cost of waiting. The
//! solver alternates between the two families: it freezes the decisions,
//! solves the then-linear systems for `u`, refreshes the sell decisions,
//! solves for `v`, refreshes the buy decisions, and repeats with relaxation
//! until both the values and the decisions stop moving.
//!
//! Flows that would push a queue outside `[h, Q_max]` cannot execute and
//! are dropped from both the averages and their normalization.

use std::collections::VecDeque;

use crate::decisions::DecisionField;
use crate::error::Error;
use crate::lattice::Grid2;
use crate::market::MarketConfig;

/// Cap on inner sweeps per linear solve.
const INNER_SWEEP_CAP: usize = 100_000;
/// Shortest sustained fingerprint period treated as a routing cycle.
const CYCLE_MIN_PERIOD: usize = 2;
/// Longest fingerprint period checked for routing cycles.
const CYCLE_MAX_PERIOD: usize = 4;
/// Outer steps a periodic fingerprint pattern must persist to count as a
/// cycle.
const CYCLE_PERSISTENCE: usize = 50;

/// Converged value functions and routing decisions, one grid per class.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    /// Seller (ask-queue) value per class.
    pub u: Vec<Grid2>,
    /// Buyer (bid-queue) value per class.
    pub v: Vec<Grid2>,
    /// Routing decisions extracted from the converged values.
    pub decisions: DecisionField,
    /// Iteration counts and final residual.
    pub diagnostics: SolveDiagnostics,
}

/// Facts about a completed solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveDiagnostics {
    /// Outer alternating steps performed.
    pub outer_iterations: usize,
    /// Inner sweeps summed over all linear solves.
    pub inner_sweeps: usize,
    /// Last sup-norm change of the value fields.
    pub residual: f64,
}

impl EquilibriumSolution {
    /// Largest violation of the mirror identity between the two sides for
    /// one class: `max |u(x,y) + v(y,x) - 2P|`.
    pub fn antisymmetry_defect(&self, config: &MarketConfig, class: usize) -> f64 {
        let n = self.u[class].n();
        let mut worst = 0.0_f64;
        for ix in 0..n {
            for iy in 0..n {
                let gap = self.u[class].at(ix, iy) + self.v[class].at(iy, ix)
                    - 2.0 * config.fair_price;
                worst = worst.max(gap.abs());
            }
        }
        worst
    }
}

/// Per-class constants used by the node updates.
struct ClassView {
    k: usize,
    smart: f64,
    plain: f64,
    q: f64,
}

/// Everything a node update needs besides the value grid itself.
struct Kernel<'a> {
    field: &'a DecisionField,
    views: &'a [ClassView],
    step: f64,
    fair: f64,
    depth: f64,
    cost: f64,
}

impl Kernel<'_> {
    /// Seller-side balance at `(ix, iy)`: averages the value over every
    /// executable flow, charging the waiting cost.
    fn u_value(&self, grid: &Grid2, ix: usize, iy: usize) -> Result<f64, Error> {
        let mut num = -self.cost;
        let mut den = 0.0;
        for (j, view) in self.views.iter().enumerate() {
            let k = view.k;
            let sell_posts = self.field.sell_post_at(j, ix + k, iy);
            if sell_posts && view.smart > 0.0 {
                num += view.smart * grid.at(ix + k, iy);
                den += view.smart;
            }
            let sell_take = if sell_posts { 0.0 } else { view.smart } + view.plain;
            if sell_take > 0.0 && iy >= k {
                num += sell_take * grid.at(ix, iy - k);
                den += sell_take;
            }
            let buy_posts = self.field.buy_post_at(j, ix, iy + k);
            if buy_posts && view.smart > 0.0 {
                num += view.smart * grid.at(ix, iy + k);
                den += view.smart;
            }
            let buy_take = if buy_posts { 0.0 } else { view.smart } + view.plain;
            if buy_take > 0.0 && ix >= k {
                let x = (ix as f64 + 1.0) * self.step;
                let share = view.q / x;
                let paid = self.fair + self.depth * view.q / (x - view.q);
                num += buy_take * (share * paid + (1.0 - share) * grid.at(ix - k, iy));
                den += buy_take;
            }
        }
        if den <= 0.0 {
            return Err(Error::NonFinite {
                context: format!("no executable flow at node ({ix}, {iy})"),
            });
        }
        Ok(num / den)
    }

    /// Buyer-side balance at `(ix, iy)`, mirror of
    /// [`Kernel::u_value`]: the bid queue is the one being consumed by
    /// sell flow, and buy takes shrink the ask.
    fn v_value(&self, grid: &Grid2, ix: usize, iy: usize) -> Result<f64, Error> {
        let mut num = -self.cost;
        let mut den = 0.0;
        for (j, view) in self.views.iter().enumerate() {
            let k = view.k;
            let sell_posts = self.field.sell_post_at(j, ix + k, iy);
            if sell_posts && view.smart > 0.0 {
                num += view.smart * grid.at(ix + k, iy);
                den += view.smart;
            }
            let sell_take = if sell_posts { 0.0 } else { view.smart } + view.plain;
            if sell_take > 0.0 && iy >= k {
                let y = (iy as f64 + 1.0) * self.step;
                let share = view.q / y;
                let received = self.fair - self.depth * view.q / (y - view.q);
                num += sell_take * (share * received + (1.0 - share) * grid.at(ix, iy - k));
                den += sell_take;
            }
            let buy_posts = self.field.buy_post_at(j, ix, iy + k);
            if buy_posts && view.smart > 0.0 {
                num += view.smart * grid.at(ix, iy + k);
                den += view.smart;
            }
            let buy_take = if buy_posts { 0.0 } else { view.smart } + view.plain;
            if buy_take > 0.0 && ix >= k {
                num += buy_take * grid.at(ix - k, iy);
                den += buy_take;
            }
        }
        if den <= 0.0 {
            return Err(Error::NonFinite {
                context: format!("no executable flow at node ({ix}, {iy})"),
            });
        }
        Ok(num / den)
    }
}

fn class_views(config: &MarketConfig) -> Vec<ClassView> {
    let steps = config.class_steps();
    config
        .classes
        .iter()
        .zip(steps)
        .map(|(c, k)| ClassView {
            k,
            smart: c.sor_intensity,
            plain: c.nonsor_intensity,
            q: c.order_size,
        })
        .collect()
}

fn kernel<'a>(
    config: &MarketConfig,
    field: &'a DecisionField,
    views: &'a [ClassView],
    class: usize,
) -> Kernel<'a> {
    Kernel {
        field,
        views,
        step: config.grid_step,
        fair: config.fair_price,
        depth: config.market_depth,
        cost: config.classes[class].waiting_cost * config.classes[class].order_size,
    }
}

/// Routing decisions implied by a set of value grids, boundary rules
/// included.
pub fn extract_decisions(u: &[Grid2], v: &[Grid2], config: &MarketConfig) -> DecisionField {
    let mut field = DecisionField::empty(config);
    for class in 0..config.classes.len() {
        field.update_sell_side(class, &u[class], config);
        field.update_buy_side(class, &v[class], config);
    }
    field
}

/// One full Jacobi sweep of the seller-side balance for `class`, with
/// routing decisions read off the passed grids.
pub fn update_u(
    u: &[Grid2],
    v: &[Grid2],
    config: &MarketConfig,
    class: usize,
) -> Result<Grid2, Error> {
    let field = extract_decisions(u, v, config);
    let views = class_views(config);
    let kernel = kernel(config, &field, &views, class);
    let n = u[class].n();
    let mut out = Grid2::filled(n, 0.0);
    for ix in 0..n {
        for iy in 0..n {
            *out.at_mut(ix, iy) = kernel.u_value(&u[class], ix, iy)?;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite { context: "seller-value sweep".to_string() });
    }
    Ok(out)
}

/// One full Jacobi sweep of the buyer-side balance for `class`, mirror of
/// [`update_u`].
pub fn update_v(
    u: &[Grid2],
    v: &[Grid2],
    config: &MarketConfig,
    class: usize,
) -> Result<Grid2, Error> {
    let field = extract_decisions(u, v, config);
    let views = class_views(config);
    let kernel = kernel(config, &field, &views, class);
    let n = v[class].n();
    let mut out = Grid2::filled(n, 0.0);
    for ix in 0..n {
        for iy in 0..n {
            *out.at_mut(ix, iy) = kernel.v_value(&v[class], ix, iy)?;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite { context: "buyer-value sweep".to_string() });
    }
    Ok(out)
}

/// Gauss-Seidel solve of one class's balance with frozen decisions, in
/// place, alternating the sweep direction. Returns the sweeps used.
fn inner_solve(
    grid: &mut Grid2,
    kernel: &Kernel<'_>,
    seller_side: bool,
    tolerance: f64,
) -> Result<usize, Error> {
    let n = grid.n();
    for sweep in 1..=INNER_SWEEP_CAP {
        let mut delta = 0.0_f64;
        let forward = sweep % 2 == 1;
        for step in 0..n * n {
            let idx = if forward { step } else { n * n - 1 - step };
            let (ix, iy) = (idx / n, idx % n);
            let new = if seller_side {
                kernel.u_value(grid, ix, iy)?
            } else {
                kernel.v_value(grid, ix, iy)?
            };
            delta = delta.max((new - grid.at(ix, iy)).abs());
            *grid.at_mut(ix, iy) = new;
        }
        if !grid.is_finite() {
            return Err(Error::NonFinite { context: "inner linear solve".to_string() });
        }
        if delta < tolerance {
            return Ok(sweep);
        }
    }
    Err(Error::NonConvergence { iterations: INNER_SWEEP_CAP, residual: f64::NAN })
}

/// Solves the equilibrium starting from flat value fields at the fair
/// price.
pub fn solve_equilibrium(config: &MarketConfig) -> Result<EquilibriumSolution, Error> {
    config.validate()?;
    let n = config.lattice().len();
    let classes = config.classes.len();
    let flat = vec![Grid2::filled(n, config.fair_price); classes];
    solve_equilibrium_from(config, flat.clone(), flat)
}

/// Solves the equilibrium from the given starting value fields.
///
/// The outer loop alternates seller and buyer solves: each phase freezes
/// the decision field, solves the linear balance per class by Gauss-Seidel
/// sweeps warm-started at the previous values, applies relaxation, and
/// refreshes its side of the decisions. Convergence requires the value
/// change below `tolerance * fair_price` and an unchanged decision field
/// over two consecutive outer steps. A decision field that keeps revisiting
/// a short cycle instead of settling is reported as an error carrying the
/// cycle.
pub fn solve_equilibrium_from(
    config: &MarketConfig,
    u0: Vec<Grid2>,
    v0: Vec<Grid2>,
) -> Result<EquilibriumSolution, Error> {
    config.validate()?;
    let classes = config.classes.len();
    let n = config.lattice().len();
    assert_eq!(u0.len(), classes, "one seller grid per class");
    assert_eq!(v0.len(), classes, "one buyer grid per class");
    assert!(
        u0.iter().chain(&v0).all(|g| g.n() == n),
        "start grids do not match the lattice"
    );

    let views = class_views(config);
    let omega = config.relaxation;
    let outer_tol = config.value_tolerance();
    let inner_tol = outer_tol / 100.0;

    let mut u = u0;
    let mut v = v0;
    let mut field = extract_decisions(&u, &v, config);
    let mut inner_sweeps = 0_usize;
    let mut stable_steps = 0_usize;
    let mut residual = f64::INFINITY;
    let mut history: VecDeque<u64> = VecDeque::new();
    let mut recent: VecDeque<DecisionField> = VecDeque::new();

    for outer in 1..=config.max_iterations {
        residual = 0.0;

        for class in 0..classes {
            let kern = kernel(config, &field, &views, class);
            let mut tilde = u[class].clone();
            inner_sweeps += inner_solve(&mut tilde, &kern, true, inner_tol)?;
            for (cur, new) in u[class].data_mut().iter_mut().zip(tilde.as_slice()) {
                let change = omega * (new - *cur);
                residual = residual.max(change.abs());
                *cur += change;
            }
        }
        for class in 0..classes {
            field.update_sell_side(class, &u[class], config);
        }

        for class in 0..classes {
            let kern = kernel(config, &field, &views, class);
            let mut tilde = v[class].clone();
            inner_sweeps += inner_solve(&mut tilde, &kern, false, inner_tol)?;
            for (cur, new) in v[class].data_mut().iter_mut().zip(tilde.as_slice()) {
                let change = omega * (new - *cur);
                residual = residual.max(change.abs());
                *cur += change;
            }
        }
        let before = field.fingerprint();
        for class in 0..classes {
            field.update_buy_side(class, &v[class], config);
        }

        let unchanged = field.fingerprint() == before
            && history.back().copied() == Some(before);
        stable_steps = if unchanged { stable_steps + 1 } else { 0 };

        history.push_back(field.fingerprint());
        if history.len() > CYCLE_PERSISTENCE + CYCLE_MAX_PERIOD {
            history.pop_front();
        }
        recent.push_back(field.clone());
        if recent.len() > 2 * CYCLE_MAX_PERIOD {
            recent.pop_front();
        }

        if residual < outer_tol && stable_steps >= 2 {
            return Ok(EquilibriumSolution {
                u,
                v,
                decisions: field,
                diagnostics: SolveDiagnostics {
                    outer_iterations: outer,
                    inner_sweeps,
                    residual,
                },
            });
        }

        if let Some(period) = sustained_period(&history) {
            let states: Vec<DecisionField> = recent
                .iter()
                .rev()
                .take(period)
                .rev()
                .cloned()
                .collect();
            return Err(Error::LimitCycle { period, iterations: outer, states });
        }
    }
    Err(Error::NonConvergence { iterations: config.max_iterations, residual })
}

/// Smallest period in `[CYCLE_MIN_PERIOD, CYCLE_MAX_PERIOD]` that the
/// fingerprint history has followed for the last [`CYCLE_PERSISTENCE`]
/// entries, if any. A constant tail is stability, not a cycle, and is
/// excluded by requiring the periodic tail to take more than one value.
fn sustained_period(history: &VecDeque<u64>) -> Option<usize> {
    for period in CYCLE_MIN_PERIOD..=CYCLE_MAX_PERIOD {
        if history.len() < CYCLE_PERSISTENCE + period {
            continue;
        }
        let tail: Vec<u64> = history
            .iter()
            .rev()
            .take(CYCLE_PERSISTENCE + period)
            .copied()
            .collect();
        let periodic = tail.windows(period + 1).all(|w| w[0] == w[period]);
        let varied = tail[..period].iter().any(|&f| f != tail[0]);
        if periodic && varied {
            return Some(period);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::AgentClassParams;

    fn one_class(cost: f64) -> MarketConfig {
        MarketConfig::new(
            100.0,
            2.0,
            vec![AgentClassParams::new("ii", 1.0, 1.0, 0.2, cost)],
        )
        .unwrap()
    }

    #[test]
    fn all_posting_sweep_drifts_by_the_waiting_cost() {
        let config = MarketConfig::new(
            100.0,
            2.0,
            vec![AgentClassParams::new("ii", 1.0, 1.0, 0.0, 2.5e-3)],
        )
        .unwrap();
        let n = config.lattice().len();
        let u = vec![Grid2::filled(n, 100.0)];
        let v = vec![Grid2::filled(n, 100.0)];
        let swept = update_u(&u, &v, &config, 0).unwrap();
        let expected = 100.0 - 2.5e-3 * 1.0 / 2.0;
        assert!((swept.at(20, 20) - expected).abs() < 1e-12);
    }

    #[test]
    fn one_class_solve_is_antisymmetric_and_balanced() {
        let config = one_class(1e-2);
        let solution = solve_equilibrium(&config).unwrap();
        assert!(
            solution.antisymmetry_defect(&config, 0) < 1e-6 * config.market_depth,
            "antisymmetry defect {}",
            solution.antisymmetry_defect(&config, 0)
        );
        let raw = update_u(&solution.u, &solution.v, &config, 0).unwrap();
        let residual = raw.sup_distance(&solution.u[0]);
        assert!(
            residual < 10.0 * config.value_tolerance(),
            "raw balance residual {residual}"
        );
        let raw_v = update_v(&solution.u, &solution.v, &config, 0).unwrap();
        assert!(raw_v.sup_distance(&solution.v[0]) < 10.0 * config.value_tolerance());
    }

    #[test]
    fn decisions_mirror_across_the_diagonal() {
        let config = one_class(1e-2);
        let solution = solve_equilibrium(&config).unwrap();
        let n = solution.decisions.n();
        for ix in 0..n {
            for iy in 0..n {
                assert_eq!(
                    solution.decisions.sell_post_at(0, ix, iy),
                    solution.decisions.buy_post_at(0, iy, ix),
                    "mirror broken at ({ix}, {iy})"
                );
            }
        }
    }

    #[test]
    fn corners_provide_when_small_and_consume_when_large() {
        use crate::decisions::ClassRegion;
        let config = one_class(1e-2);
        let solution = solve_equilibrium(&config).unwrap();
        let n = solution.decisions.n();
        assert_eq!(solution.decisions.class_region(0, 0, 0), ClassRegion::ProvideProvide);
        assert_eq!(
            solution.decisions.class_region(0, n - 1, n - 1),
            ClassRegion::ConsumeConsume
        );
    }

    #[test]
    fn diagonal_switch_sits_near_the_first_order_point() {
        let config = one_class(1e-2);
        let solution = solve_equilibrium(&config).unwrap();
        let lattice = config.lattice();
        let first_consumer = lattice
            .iter()
            .find(|&(i, _)| !solution.decisions.sell_post_at(0, i, i))
            .map(|(_, x)| x)
            .expect("sellers never turn consumer on the diagonal");
        let eta = 1e-2 / (2.0 * 1.0 * 0.2);
        let first_order = 0.5 * (1.0 + (1.0_f64 + 8.0 / eta).sqrt());
        assert!(
            (first_consumer - first_order).abs() <= 2.0,
            "diagonal switch at {first_consumer}, first-order point {first_order}"
        );
    }

    #[test]
    fn restart_reaches_the_same_fixed_point() {
        let config = one_class(1e-2);
        let base = solve_equilibrium(&config).unwrap();
        let n = config.lattice().len();
        let shifted = solve_equilibrium_from(
            &config,
            vec![Grid2::filled(n, 100.1)],
            vec![Grid2::filled(n, 100.1)],
        )
        .unwrap();
        let gap = base.u[0].sup_distance(&shifted.u[0]);
        assert!(gap < 10.0 * config.value_tolerance(), "restart gap {gap}");
        assert_eq!(base.decisions, shifted.decisions);
    }

    #[test]
    #[ignore]
    fn probe_solve() {
        let config = one_class(1e-2);
        let t = std::time::Instant::now();
        match solve_equilibrium(&config) {
            Ok(s) => println!(
                "converged outer={} inner={} residual={:.3e} elapsed={:?}",
                s.diagnostics.outer_iterations,
                s.diagnostics.inner_sweeps,
                s.diagnostics.residual,
                t.elapsed()
            ),
            Err(e) => println!("failed after {:?}: {e}", t.elapsed()),
        }
    }
}
