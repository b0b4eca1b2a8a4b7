//! Routing decisions of smart order flow.
//!
//! At every book state each class decides, separately for its sell and buy
//! flow, whether to post a passive order (provide liquidity, symbol `+`) or
//! to take from the opposite queue at the marginal price (consume, symbol
//! `-`). A sell decision is stored at the book state that would hold after
//! joining the ask queue, and a buy decision after joining the bid queue,
//! so one lookup table serves both the value recursion and the transition
//! rates of the queue process.
//!
//! Posting is forced near the edges of the admissible book: taking from a
//! queue that holds at most one order of the class would wipe it out, so
//! such states admit only the passive route.

use std::fmt;

use crate::lattice::Grid2;
use crate::market::MarketConfig;

/// Per-class routing table for both sides of the book.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionField {
    n: usize,
    steps: Vec<usize>,
    sell_post: Vec<Vec<bool>>,
    buy_post: Vec<Vec<bool>>,
}

impl DecisionField {
    /// Builds an all-consuming field matching the configuration's grid.
    pub fn empty(config: &MarketConfig) -> Self {
        let n = config.lattice().len();
        let classes = config.classes.len();
        Self {
            n,
            steps: config.class_steps(),
            sell_post: vec![vec![false; n * n]; classes],
            buy_post: vec![vec![false; n * n]; classes],
        }
    }

    /// Nodes per lattice axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of trader classes covered.
    pub fn classes(&self) -> usize {
        self.sell_post.len()
    }

    /// Order size of `class` in grid steps.
    pub fn step_of(&self, class: usize) -> usize {
        self.steps[class]
    }

    /// Sell decision stored at field point `(ix, iy)`; out-of-grid points
    /// never post.
    #[inline]
    pub fn sell_post_at(&self, class: usize, ix: usize, iy: usize) -> bool {
        ix < self.n && iy < self.n && self.sell_post[class][ix * self.n + iy]
    }

    /// Buy decision stored at field point `(ix, iy)`; out-of-grid points
    /// never post.
    #[inline]
    pub fn buy_post_at(&self, class: usize, ix: usize, iy: usize) -> bool {
        ix < self.n && iy < self.n && self.buy_post[class][ix * self.n + iy]
    }

    /// Whether a seller of `class` arriving at book state `(ix, iy)` posts.
    ///
    /// The lookup shifts the ask index by the class order size, because the
    /// stored decision refers to the book after the order joins the queue.
    /// A full ask queue leaves no room to post, so the flow takes instead.
    #[inline]
    pub fn seller_posts(&self, class: usize, ix: usize, iy: usize) -> bool {
        self.sell_post_at(class, ix + self.steps[class], iy)
    }

    /// Whether a buyer of `class` arriving at book state `(ix, iy)` posts.
    #[inline]
    pub fn buyer_posts(&self, class: usize, ix: usize, iy: usize) -> bool {
        self.buy_post_at(class, ix, iy + self.steps[class])
    }

    /// Recomputes the sell side of `class` from its seller value function.
    ///
    /// Posting wins strictly positive comparisons only; at a tie the flow
    /// takes. Points where taking would empty the bid queue, and points
    /// below the class order size on the ask axis, are forced to post.
    pub fn update_sell_side(&mut self, class: usize, u: &Grid2, config: &MarketConfig) {
        debug_assert_eq!(u.n(), self.n);
        let k = self.steps[class];
        let q = config.classes[class].order_size;
        let lattice = config.lattice();
        let field = &mut self.sell_post[class];
        for ix in 0..self.n {
            for iy in 0..self.n {
                field[ix * self.n + iy] = if iy < k || ix + 1 < k {
                    true
                } else {
                    let price = config.fair_price
                        - config.market_depth * q / (lattice.coord(iy) - q);
                    u.at(ix, iy) > price
                };
            }
        }
    }

    /// Recomputes the buy side of `class` from its buyer value function.
    ///
    /// Mirror image of [`DecisionField::update_sell_side`]: forced posts
    /// protect the ask queue, and posting requires a strictly better value
    /// than the marginal buy price.
    pub fn update_buy_side(&mut self, class: usize, v: &Grid2, config: &MarketConfig) {
        debug_assert_eq!(v.n(), self.n);
        let k = self.steps[class];
        let q = config.classes[class].order_size;
        let lattice = config.lattice();
        let field = &mut self.buy_post[class];
        for ix in 0..self.n {
            for iy in 0..self.n {
                field[ix * self.n + iy] = if ix < k || iy + 1 < k {
                    true
                } else {
                    let price = config.fair_price
                        + config.market_depth * q / (lattice.coord(ix) - q);
                    v.at(ix, iy) < price
                };
            }
        }
    }

    /// Routing pattern of `class` at field point `(ix, iy)`.
    pub fn class_region(&self, class: usize, ix: usize, iy: usize) -> ClassRegion {
        match (
            self.sell_post_at(class, ix, iy),
            self.buy_post_at(class, ix, iy),
        ) {
            (true, true) => ClassRegion::ProvideProvide,
            (true, false) => ClassRegion::ProvideConsume,
            (false, true) => ClassRegion::ConsumeProvide,
            (false, false) => ClassRegion::ConsumeConsume,
        }
    }

    /// Order-independent 64-bit digest of the whole field.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bit: bool| {
            hash ^= bit as u64 + 1;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        };
        for side in [&self.sell_post, &self.buy_post] {
            for field in side {
                for &bit in field {
                    eat(bit);
                }
            }
        }
        hash
    }

    /// Total number of posting entries, summed over classes and sides.
    pub fn post_count(&self) -> usize {
        self.sell_post
            .iter()
            .chain(&self.buy_post)
            .map(|f| f.iter().filter(|&&b| b).count())
            .sum()
    }
}

/// Routing pattern of a single class: sell decision then buy decision,
/// `+` for provide and `-` for consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassRegion {
    /// Both flows post.
    ProvideProvide,
    /// Sell flow posts, buy flow takes.
    ProvideConsume,
    /// Sell flow takes, buy flow posts.
    ConsumeProvide,
    /// Both flows take.
    ConsumeConsume,
}

impl ClassRegion {
    /// Whether the sell flow posts.
    pub fn sell_provides(&self) -> bool {
        matches!(self, ClassRegion::ProvideProvide | ClassRegion::ProvideConsume)
    }

    /// Whether the buy flow posts.
    pub fn buy_provides(&self) -> bool {
        matches!(self, ClassRegion::ProvideProvide | ClassRegion::ConsumeProvide)
    }
}

impl fmt::Display for ClassRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassRegion::ProvideProvide => "R++",
            ClassRegion::ProvideConsume => "R+-",
            ClassRegion::ConsumeProvide => "R-+",
            ClassRegion::ConsumeConsume => "R--",
        };
        f.write_str(s)
    }
}

/// Named joint routing pattern of a two-class market.
///
/// Nine of the sixteen conceivable pattern pairs occur in equilibrium and
/// carry a name; [`CombinedRegion::classify`] returns `None` for the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[allow(missing_docs)]
pub enum CombinedRegion {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
}

impl CombinedRegion {
    /// Looks up the named pattern for (class 1 region, class 2 region).
    pub fn classify(first: ClassRegion, second: ClassRegion) -> Option<Self> {
        use ClassRegion::*;
        match (first, second) {
            (ProvideProvide, ProvideProvide) => Some(CombinedRegion::R1),
            (ProvideProvide, ConsumeConsume) => Some(CombinedRegion::R2),
            (ConsumeConsume, ConsumeConsume) => Some(CombinedRegion::R3),
            (ProvideProvide, ConsumeProvide) => Some(CombinedRegion::R4),
            (ConsumeProvide, ProvideConsume) => Some(CombinedRegion::R5),
            (ConsumeProvide, ConsumeConsume) => Some(CombinedRegion::R6),
            (ProvideProvide, ProvideConsume) => Some(CombinedRegion::R7),
            (ProvideConsume, ProvideConsume) => Some(CombinedRegion::R8),
            (ProvideConsume, ConsumeConsume) => Some(CombinedRegion::R9),
            _ => None,
        }
    }

    /// The two class regions making up the pattern.
    pub fn parts(&self) -> (ClassRegion, ClassRegion) {
        use ClassRegion::*;
        match self {
            CombinedRegion::R1 => (ProvideProvide, ProvideProvide),
            CombinedRegion::R2 => (ProvideProvide, ConsumeConsume),
            CombinedRegion::R3 => (ConsumeConsume, ConsumeConsume),
            CombinedRegion::R4 => (ProvideProvide, ConsumeProvide),
            CombinedRegion::R5 => (ConsumeProvide, ProvideConsume),
            CombinedRegion::R6 => (ConsumeProvide, ConsumeConsume),
            CombinedRegion::R7 => (ProvideProvide, ProvideConsume),
            CombinedRegion::R8 => (ProvideConsume, ProvideConsume),
            CombinedRegion::R9 => (ProvideConsume, ConsumeConsume),
        }
    }
}

impl fmt::Display for CombinedRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", *self as u8 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::AgentClassParams;

    fn config() -> MarketConfig {
        MarketConfig::new(
            100.0,
            2.0,
            vec![AgentClassParams::new("ii", 1.0, 1.0, 0.2, 2.5e-3)],
        )
        .unwrap()
    }

    #[test]
    fn low_value_posts_only_where_forced() {
        let config = config();
        let n = config.lattice().len();
        let mut field = DecisionField::empty(&config);
        let u = Grid2::filled(n, 0.0);
        field.update_sell_side(0, &u, &config);
        for ix in 0..n {
            for iy in 0..n {
                let expected = iy < 1;
                assert_eq!(field.sell_post_at(0, ix, iy), expected, "at ({ix}, {iy})");
            }
        }
    }

    #[test]
    fn high_value_posts_everywhere() {
        let config = config();
        let n = config.lattice().len();
        let mut field = DecisionField::empty(&config);
        let u = Grid2::filled(n, 100.0);
        field.update_sell_side(0, &u, &config);
        assert_eq!(
            field.sell_post.iter().map(|f| f.iter().filter(|&&b| b).count()).sum::<usize>(),
            n * n
        );
    }

    #[test]
    fn exact_price_tie_takes() {
        let config = config();
        let n = config.lattice().len();
        let mut field = DecisionField::empty(&config);
        let mut u = Grid2::filled(n, 0.0);
        let iy = 4;
        let price = 100.0 - 2.0 / (config.lattice().coord(iy) - 1.0);
        *u.at_mut(7, iy) = price;
        field.update_sell_side(0, &u, &config);
        assert!(!field.sell_post_at(0, 7, iy));
        *u.at_mut(7, iy) = price + 1e-12;
        field.update_sell_side(0, &u, &config);
        assert!(field.sell_post_at(0, 7, iy));
    }

    #[test]
    fn routing_shifts_by_the_order_size() {
        let config = config();
        let n = config.lattice().len();
        let mut field = DecisionField::empty(&config);
        let u = Grid2::filled(n, 100.0);
        field.update_sell_side(0, &u, &config);
        assert!(field.seller_posts(0, 0, 5));
        assert!(
            !field.seller_posts(0, n - 1, 5),
            "a full ask queue leaves no room to post"
        );
    }

    #[test]
    fn buy_side_forces_posting_at_the_ask_floor() {
        let config = config();
        let n = config.lattice().len();
        let mut field = DecisionField::empty(&config);
        let v = Grid2::filled(n, 200.0);
        field.update_buy_side(0, &v, &config);
        for iy in 0..n {
            assert!(field.buy_post_at(0, 0, iy));
        }
        assert!(!field.buy_post_at(0, 1, 3));
    }

    #[test]
    fn region_symbols() {
        assert_eq!(ClassRegion::ProvideProvide.to_string(), "R++");
        assert_eq!(ClassRegion::ProvideConsume.to_string(), "R+-");
        assert_eq!(ClassRegion::ConsumeProvide.to_string(), "R-+");
        assert_eq!(ClassRegion::ConsumeConsume.to_string(), "R--");
    }

    #[test]
    fn combined_regions_round_trip() {
        use CombinedRegion::*;
        for region in [R1, R2, R3, R4, R5, R6, R7, R8, R9] {
            let (a, b) = region.parts();
            assert_eq!(CombinedRegion::classify(a, b), Some(region));
        }
        assert_eq!(
            CombinedRegion::classify(ClassRegion::ConsumeConsume, ClassRegion::ProvideProvide),
            None
        );
        assert_eq!(CombinedRegion::R7.to_string(), "R7");
    }

    #[test]
    fn fingerprint_tracks_content() {
        let config = config();
        let n = config.lattice().len();
        let mut a = DecisionField::empty(&config);
        let mut b = DecisionField::empty(&config);
        let u = Grid2::filled(n, 100.0);
        a.update_sell_side(0, &u, &config);
        b.update_sell_side(0, &u, &config);
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.update_buy_side(0, &Grid2::filled(n, 200.0), &config);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
