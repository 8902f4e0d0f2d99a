//! Square process grids.

use crate::error::{Error, Result};

/// A `q x q` grid of ranks, numbered row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProcessGrid {
    q: usize,
}

impl ProcessGrid {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::param("grid side must be at least 1"));
        }
        Ok(Self { q })
    }

    /// Grid for `ranks` processes; only perfect squares are accepted.
    pub fn from_ranks(ranks: usize) -> Result<Self> {
        let q = (ranks as f64).sqrt().round() as usize;
        if ranks == 0 || q * q != ranks {
            return Err(Error::param(format!(
                "rank count {ranks} is not a perfect square; only q x q grids are supported"
            )));
        }
        Self::new(q)
    }

    pub fn side(&self) -> usize {
        self.q
    }

    pub fn ranks(&self) -> usize {
        self.q * self.q
    }

    pub fn rank_of(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.q && col < self.q);
        row * self.q + col
    }

    pub fn coords(&self, rank: usize) -> (usize, usize) {
        (rank / self.q, rank % self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_squares_only() {
        assert_eq!(ProcessGrid::from_ranks(16).unwrap().side(), 4);
        assert_eq!(ProcessGrid::from_ranks(1).unwrap().side(), 1);
        for bad in [0, 2, 8, 15, 24] {
            assert!(matches!(ProcessGrid::from_ranks(bad), Err(Error::Parameter(_))));
        }
        assert!(ProcessGrid::new(0).is_err());
    }

    #[test]
    fn rank_coordinates_round_trip() {
        let g = ProcessGrid::new(3).unwrap();
        for rank in 0..g.ranks() {
            let (r, c) = g.coords(rank);
            assert_eq!(g.rank_of(r, c), rank);
        }
        assert_eq!(g.coords(5), (1, 2));
    }
}
