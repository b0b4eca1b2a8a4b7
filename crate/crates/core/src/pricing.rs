//! Marginal execution prices against a finite queue.
//!
//! An order of size `q` that consumes liquidity from a queue of size `Q`
//! pays a premium (or receives a discount) inversely proportional to the
//! liquidity left behind: buys execute at `P + delta * q / (Q - q)` against
//! the ask queue, sells at `P - delta * q / (Q - q)` against the bid queue.
//! The schedule blows up as the order approaches the whole queue, which is
//! why consuming the last `q` shares is never admissible.

use crate::error::Error;

/// Price paid per share when buying `order` shares from an ask queue of
/// size `queue`. Requires `queue > order`.
pub fn buy_price(fair_price: f64, depth: f64, queue: f64, order: f64) -> Result<f64, Error> {
    premium(depth, queue, order).map(|p| fair_price + p)
}

/// Price received per share when selling `order` shares into a bid queue of
/// size `queue`. Requires `queue > order`.
pub fn sell_price(fair_price: f64, depth: f64, queue: f64, order: f64) -> Result<f64, Error> {
    premium(depth, queue, order).map(|p| fair_price - p)
}

fn premium(depth: f64, queue: f64, order: f64) -> Result<f64, Error> {
    if !(queue > order) {
        return Err(Error::PriceDomain { queue, order });
    }
    Ok(depth * order / (queue - order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deep_queue_prices_approach_fair_price() {
        let p = buy_price(100.0, 2.0, 1e9, 1.0).unwrap();
        assert!((p - 100.0).abs() < 1e-8);
    }

    #[test]
    fn known_values() {
        assert_eq!(buy_price(100.0, 2.0, 2.0, 1.0).unwrap(), 102.0);
        assert_eq!(sell_price(100.0, 2.0, 2.0, 1.0).unwrap(), 98.0);
        assert_eq!(buy_price(100.0, 2.0, 5.0, 1.0).unwrap(), 100.5);
    }

    #[test]
    fn consuming_the_whole_queue_is_rejected() {
        assert!(matches!(
            buy_price(100.0, 2.0, 1.0, 1.0),
            Err(Error::PriceDomain { .. })
        ));
        assert!(matches!(
            sell_price(100.0, 2.0, 0.5, 1.0),
            Err(Error::PriceDomain { .. })
        ));
    }

    proptest! {
        #[test]
        fn buy_and_sell_mirror_around_the_fair_price(
            queue in 0.3_f64..200.0,
            order in 0.25_f64..20.0,
        ) {
            prop_assume!(queue > order);
            let buy = buy_price(100.0, 2.0, queue, order).unwrap();
            let sell = sell_price(100.0, 2.0, queue, order).unwrap();
            prop_assert!((buy + sell - 200.0).abs() < 1e-9);
            prop_assert!(buy > 100.0);
            prop_assert!(sell < 100.0);
        }

        #[test]
        fn buy_price_decreases_with_queue_size(
            queue in 1.1_f64..100.0,
            bump in 0.1_f64..50.0,
        ) {
            let near = buy_price(100.0, 2.0, queue, 1.0).unwrap();
            let far = buy_price(100.0, 2.0, queue + bump, 1.0).unwrap();
            prop_assert!(far < near);
        }
    }
}
