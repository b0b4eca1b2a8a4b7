//! Discrete queue-size lattice and dense fields living on it.
//!
//! Queue sizes take values `h, 2h, ..., Q_max` on each side of the book.
//! Index `i` stands for the size `(i + 1) * h`, so index 0 is the smallest
//! admissible queue and `n - 1` the largest. Two-dimensional fields over
//! (ask size, bid size) are stored row-major with the ask index as the row.

use serde::{Deserialize, Serialize};

/// One-dimensional grid of admissible queue sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    step: f64,
    count: usize,
}

impl Lattice {
    /// Builds a lattice with `count` nodes spaced `step` apart.
    pub fn new(step: f64, count: usize) -> Self {
        Self { step, count }
    }

    /// Grid spacing `h`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.count
    }

    /// Whether the lattice has no nodes.
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Queue size at node `i`, which is `(i + 1) * h`.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.step
    }

    /// Largest queue size on the lattice.
    pub fn max_coord(&self) -> f64 {
        self.coord(self.count - 1)
    }

    /// Node index of a queue size, if it lies on the lattice.
    pub fn index_of(&self, coord: f64) -> Option<usize> {
        let ratio = coord / self.step;
        let idx = ratio.round();
        if (ratio - idx).abs() > 1e-6 || idx < 1.0 || idx > self.count as f64 {
            return None;
        }
        Some(idx as usize - 1)
    }

    /// Iterates over `(index, queue size)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.count).map(move |i| (i, self.coord(i)))
    }
}

/// Point of the two-sided lattice: one queue size per side of the book.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    /// Ask-side queue size.
    pub ask: f64,
    /// Bid-side queue size.
    pub bid: f64,
}

/// Dense scalar field over the two-sided lattice.
///
/// Entry `(ix, iy)` holds the value at ask size `(ix + 1) * h` and bid size
/// `(iy + 1) * h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    n: usize,
    data: Vec<f64>,
}

impl Grid2 {
    /// Builds an `n x n` field filled with `value`.
    pub fn filled(n: usize, value: f64) -> Self {
        Self { n, data: vec![value; n * n] }
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Value at `(ix, iy)`.
    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[ix * self.n + iy]
    }

    /// Mutable value at `(ix, iy)`.
    #[inline]
    pub fn at_mut(&mut self, ix: usize, iy: usize) -> &mut f64 {
        &mut self.data[ix * self.n + iy]
    }

    /// Flat view of the data, row-major with the ask index as the row.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat view of the data.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Largest absolute entry-wise difference to another field of equal shape.
    pub fn sup_distance(&self, other: &Grid2) -> f64 {
        assert_eq!(self.n, other.n, "grid shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Whether every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_start_one_step_in() {
        let lat = Lattice::new(0.25, 160);
        assert_eq!(lat.coord(0), 0.25);
        assert_eq!(lat.coord(3), 1.0);
        assert_eq!(lat.max_coord(), 40.0);
    }

    #[test]
    fn index_lookup_round_trips() {
        let lat = Lattice::new(0.25, 160);
        for (i, q) in lat.iter() {
            assert_eq!(lat.index_of(q), Some(i));
        }
        assert_eq!(lat.index_of(0.0), None);
        assert_eq!(lat.index_of(40.25), None);
        assert_eq!(lat.index_of(0.3), None);
    }

    #[test]
    fn grid_indexing_is_row_major_in_ask() {
        let mut g = Grid2::filled(3, 0.0);
        *g.at_mut(1, 2) = 7.0;
        assert_eq!(g.as_slice()[1 * 3 + 2], 7.0);
        assert_eq!(g.at(1, 2), 7.0);
    }

    #[test]
    fn sup_distance_picks_the_largest_gap() {
        let a = Grid2::filled(2, 1.0);
        let mut b = Grid2::filled(2, 1.0);
        *b.at_mut(0, 1) = -1.0;
        assert_eq!(a.sup_distance(&b), 2.0);
    }
}
