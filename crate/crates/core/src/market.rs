//! Trader-class parameters and market-level configuration.
//!
//! A market hosts one or two trader classes. Each class submits buy and sell
//! orders of a fixed size: a fraction of the flow is routed strategically
//! (it weighs queueing against trading at the marginal price) and the rest
//! always trades immediately. The configuration also fixes the fair price,
//! the depth parameter of the marginal price schedule, and the numerical
//! grid/solver settings.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::lattice::Lattice;

/// Default number of largest-order multiples spanned by the queue grid.
pub const DEFAULT_GRID_SPAN: f64 = 40.0;
/// Default fixed-point tolerance, relative to the fair price.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Default cap on outer fixed-point iterations.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
/// Default relaxation weight applied to value updates.
pub const DEFAULT_RELAXATION: f64 = 0.5;
/// Hard cap on lattice nodes per axis, guarding against degenerate grid steps.
pub const MAX_NODES_PER_AXIS: usize = 4096;

/// Resolution used when reducing order sizes to a common grid step.
const SIZE_SCALE: f64 = 1e6;

/// Parameters of one trader class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentClassParams {
    /// Short identifier used in output file names and reports.
    pub label: String,
    /// Order size `q`, in shares. Every order of the class has this size.
    pub order_size: f64,
    /// Intensity of strategically routed (smart) flow per side, `lambda`.
    pub sor_intensity: f64,
    /// Intensity of always-consuming flow per side, `lambda_minus`.
    pub nonsor_intensity: f64,
    /// Waiting cost per share and unit of time, `c`.
    pub waiting_cost: f64,
}

impl AgentClassParams {
    /// Builds a class from its label and the four model parameters.
    pub fn new(
        label: impl Into<String>,
        order_size: f64,
        sor_intensity: f64,
        nonsor_intensity: f64,
        waiting_cost: f64,
    ) -> Self {
        Self {
            label: label.into(),
            order_size,
            sor_intensity,
            nonsor_intensity,
            waiting_cost,
        }
    }

    /// Total one-side arrival intensity of the class, `Lambda = lambda + lambda_minus`.
    pub fn total_intensity(&self) -> f64 {
        self.sor_intensity + self.nonsor_intensity
    }

    fn check(&self, idx: usize, issues: &mut Vec<String>) {
        let who = format!("class {idx} ({})", self.label);
        if !(self.order_size > 0.0) || !self.order_size.is_finite() {
            issues.push(format!("{who}: order_size must be positive and finite"));
        }
        if !(self.sor_intensity >= 0.0) || !self.sor_intensity.is_finite() {
            issues.push(format!("{who}: sor_intensity must be non-negative"));
        }
        if !(self.nonsor_intensity >= 0.0) || !self.nonsor_intensity.is_finite() {
            issues.push(format!("{who}: nonsor_intensity must be non-negative"));
        }
        if !(self.waiting_cost > 0.0) || !self.waiting_cost.is_finite() {
            issues.push(format!("{who}: waiting_cost must be positive"));
        }
        if !(self.total_intensity() > 0.0) {
            issues.push(format!("{who}: sor_intensity + nonsor_intensity must be positive"));
        }
        if self.label.is_empty() {
            issues.push(format!("class {idx}: label must not be empty"));
        }
    }
}

/// Full market configuration: classes, price schedule, grid, solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Fair price `P` around which marginal execution prices are centred.
    pub fair_price: f64,
    /// Depth parameter `delta` of the marginal price schedule.
    pub market_depth: f64,
    /// One or two trader classes.
    pub classes: Vec<AgentClassParams>,
    /// Grid step `h`, the common divisor of all order sizes.
    pub grid_step: f64,
    /// Largest queue size on the grid, `Q_max`.
    pub grid_max: f64,
    /// Fixed-point tolerance relative to the fair price.
    pub tolerance: f64,
    /// Cap on outer fixed-point iterations.
    pub max_iterations: usize,
    /// Relaxation weight on value updates, in `(0, 1]`.
    pub relaxation: f64,
}

impl MarketConfig {
    /// Builds a configuration with derived grid defaults and validates it.
    ///
    /// The grid step defaults to the greatest common divisor of the order
    /// sizes and the grid extent to [`DEFAULT_GRID_SPAN`] times the largest
    /// order size.
    pub fn new(
        fair_price: f64,
        market_depth: f64,
        classes: Vec<AgentClassParams>,
    ) -> Result<Self, Error> {
        if classes.is_empty() {
            return Err(Error::InvalidConfig {
                issues: vec!["at least one trader class is required".into()],
            });
        }
        let step = common_step(classes.iter().map(|c| c.order_size));
        let max_q = classes.iter().fold(0.0_f64, |m, c| m.max(c.order_size));
        let grid_max = snap_to_step(DEFAULT_GRID_SPAN * max_q, step);
        let config = Self {
            fair_price,
            market_depth,
            classes,
            grid_step: step,
            grid_max,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            relaxation: DEFAULT_RELAXATION,
        };
        config.validate()?;
        Ok(config)
    }

    /// Replaces the grid extent, snapping it to the grid step.
    pub fn with_grid_max(mut self, grid_max: f64) -> Self {
        self.grid_max = snap_to_step(grid_max, self.grid_step);
        self
    }

    /// Replaces the grid step. The step must divide every order size; this is
    /// checked by [`MarketConfig::validate`], not here.
    pub fn with_grid_step(mut self, grid_step: f64) -> Self {
        self.grid_step = grid_step;
        self.grid_max = snap_to_step(self.grid_max, grid_step);
        self
    }

    /// Replaces the fixed-point tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Replaces the outer iteration cap.
    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Replaces the relaxation weight.
    pub fn with_relaxation(mut self, relaxation: f64) -> Self {
        self.relaxation = relaxation;
        self
    }

    /// Checks every invariant, collecting all violations.
    pub fn validate(&self) -> Result<(), Error> {
        let mut issues = Vec::new();
        if !(self.market_depth > 0.0) || !self.market_depth.is_finite() {
            issues.push("market_depth must be positive".into());
        }
        if !(self.fair_price > self.market_depth) {
            issues.push(format!(
                "fair_price ({}) must exceed market_depth ({})",
                self.fair_price, self.market_depth
            ));
        }
        if self.classes.is_empty() || self.classes.len() > 2 {
            issues.push(format!("expected 1 or 2 trader classes, got {}", self.classes.len()));
        }
        for (idx, class) in self.classes.iter().enumerate() {
            class.check(idx, &mut issues);
        }
        if self.classes.len() == 2 && self.classes[0].label == self.classes[1].label {
            issues.push(format!("class labels must differ, both are '{}'", self.classes[0].label));
        }
        if !(self.grid_step > 0.0) || !self.grid_step.is_finite() {
            issues.push("grid_step must be positive".into());
        } else {
            for class in &self.classes {
                if !is_multiple(class.order_size, self.grid_step) {
                    issues.push(format!(
                        "order_size {} of class '{}' is not a multiple of grid_step {} (common divisor of sizes is {})",
                        class.order_size,
                        class.label,
                        self.grid_step,
                        common_step(self.classes.iter().map(|c| c.order_size)),
                    ));
                }
            }
            if !is_multiple(self.grid_max, self.grid_step) {
                issues.push(format!(
                    "grid_max {} is not a multiple of grid_step {}",
                    self.grid_max, self.grid_step
                ));
            }
            let nodes = (self.grid_max / self.grid_step).round();
            if nodes as usize > MAX_NODES_PER_AXIS {
                issues.push(format!(
                    "grid has {nodes} nodes per axis (grid_max {} / grid_step {}), above the cap of {MAX_NODES_PER_AXIS}",
                    self.grid_max, self.grid_step
                ));
            }
        }
        let max_q = self.classes.iter().fold(0.0_f64, |m, c| m.max(c.order_size));
        if self.grid_max < DEFAULT_GRID_SPAN * max_q - 1e-9 {
            issues.push(format!(
                "grid_max {} is below {DEFAULT_GRID_SPAN} times the largest order size {max_q}",
                self.grid_max
            ));
        }
        if !(self.tolerance > 0.0) || !(self.tolerance < 1.0) {
            issues.push("tolerance must lie in (0, 1)".into());
        }
        if self.max_iterations == 0 {
            issues.push("max_iterations must be at least 1".into());
        }
        if !(self.relaxation > 0.0) || !(self.relaxation <= 1.0) {
            issues.push("relaxation must lie in (0, 1]".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig { issues })
        }
    }

    /// The queue-size lattice implied by the grid settings.
    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.grid_step, (self.grid_max / self.grid_step).round() as usize)
    }

    /// Order size of each class expressed in grid steps.
    pub fn class_steps(&self) -> Vec<usize> {
        self.classes
            .iter()
            .map(|c| (c.order_size / self.grid_step).round() as usize)
            .collect()
    }

    /// Largest order size across classes.
    pub fn max_order_size(&self) -> f64 {
        self.classes.iter().fold(0.0_f64, |m, c| m.max(c.order_size))
    }

    /// Absolute value tolerance, `tolerance * fair_price`.
    pub fn value_tolerance(&self) -> f64 {
        self.tolerance * self.fair_price
    }
}

/// Greatest common divisor of a set of sizes, computed on a fixed decimal
/// resolution of [`SIZE_SCALE`] steps per share.
pub fn common_step(sizes: impl Iterator<Item = f64>) -> f64 {
    let mut acc: u64 = 0;
    for size in sizes {
        let scaled = (size * SIZE_SCALE).round() as u64;
        acc = gcd(acc, scaled);
    }
    acc as f64 / SIZE_SCALE
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn is_multiple(value: f64, step: f64) -> bool {
    if step <= 0.0 {
        return false;
    }
    let ratio = value / step;
    (ratio - ratio.round()).abs() < 1e-6 && ratio.round() >= 1.0
}

fn snap_to_step(value: f64, step: f64) -> f64 {
    if step <= 0.0 {
        return value;
    }
    (value / step).round() * step
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_class() -> Vec<AgentClassParams> {
        vec![AgentClassParams::new("ii", 1.0, 1.0, 0.2, 2.5e-3)]
    }

    fn two_classes() -> Vec<AgentClassParams> {
        vec![
            AgentClassParams::new("ii", 1.0, 0.5, 0.5, 2.5e-3),
            AgentClassParams::new("hft", 0.25, 4.0, 0.0, 1e-2),
        ]
    }

    #[test]
    fn defaults_follow_order_sizes() {
        let config = MarketConfig::new(100.0, 2.0, one_class()).unwrap();
        assert_eq!(config.grid_step, 1.0);
        assert_eq!(config.grid_max, 40.0);
        assert_eq!(config.lattice().len(), 40);
    }

    #[test]
    fn two_class_step_is_gcd_of_sizes() {
        let config = MarketConfig::new(100.0, 2.0, two_classes()).unwrap();
        assert_eq!(config.grid_step, 0.25);
        assert_eq!(config.class_steps(), vec![4, 1]);
        assert_eq!(config.grid_max, 40.0);
        assert_eq!(config.lattice().len(), 160);
    }

    #[test]
    fn negative_cost_is_rejected() {
        let mut classes = one_class();
        classes[0].waiting_cost = -1.0;
        let err = MarketConfig::new(100.0, 2.0, classes).unwrap_err();
        let Error::InvalidConfig { issues } = err else {
            panic!("expected InvalidConfig")
        };
        assert!(issues.iter().any(|m| m.contains("waiting_cost")));
    }

    #[test]
    fn dead_class_is_rejected() {
        let mut classes = one_class();
        classes[0].sor_intensity = 0.0;
        classes[0].nonsor_intensity = 0.0;
        let err = MarketConfig::new(100.0, 2.0, classes).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { .. }));
    }

    #[test]
    fn depth_must_stay_below_fair_price() {
        let err = MarketConfig::new(1.5, 2.0, one_class()).unwrap_err();
        let Error::InvalidConfig { issues } = err else {
            panic!("expected InvalidConfig")
        };
        assert!(issues.iter().any(|m| m.contains("fair_price")));
    }

    #[test]
    fn incompatible_step_override_names_the_divisor() {
        let config = MarketConfig::new(100.0, 2.0, two_classes())
            .unwrap()
            .with_grid_step(0.4);
        let err = config.validate().unwrap_err();
        let Error::InvalidConfig { issues } = err else {
            panic!("expected InvalidConfig")
        };
        assert!(issues.iter().any(|m| m.contains("common divisor")));
    }

    #[test]
    fn degenerate_size_ratio_trips_the_node_cap() {
        let mut classes = two_classes();
        classes[1].order_size = 1.0 / 3.0;
        let err = MarketConfig::new(100.0, 2.0, classes).unwrap_err();
        let Error::InvalidConfig { issues } = err else {
            panic!("expected InvalidConfig")
        };
        assert!(issues.iter().any(|m| m.contains("nodes per axis")));
    }

    #[test]
    fn refined_step_passes_when_it_divides_sizes() {
        let config = MarketConfig::new(100.0, 2.0, one_class())
            .unwrap()
            .with_grid_step(0.5);
        assert!(config.validate().is_ok());
        assert_eq!(config.lattice().len(), 80);
    }

    #[test]
    fn grid_below_span_floor_is_rejected() {
        let config = MarketConfig::new(100.0, 2.0, one_class()).unwrap().with_grid_max(20.0);
        assert!(config.validate().is_err());
    }
}
