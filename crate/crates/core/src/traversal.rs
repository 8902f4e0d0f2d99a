//! Cache-oblivious ordering of the block product space.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// Default leaf extent, in blocks, of [`plan_traversal`].
pub const DEFAULT_CUTOFF: usize = 16;

/// A rectangle of C block coordinates: A block rows by B block columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl Tile {
    /// Block coordinates of the tile, A rows outer and B columns inner.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .clone()
            .flat_map(move |r| self.cols.clone().map(move |c| (r, c)))
    }
}

/// Recursively bisects the larger extent until both are at most `cutoff`,
/// emitting leaves depth-first.
pub fn plan_traversal(rows: Range<usize>, cols: Range<usize>, cutoff: usize) -> Result<Vec<Tile>> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::param("traversal ranges must be non-empty"));
    }
    if cutoff == 0 {
        return Err(Error::param("traversal cutoff must be at least 1"));
    }
    let mut tiles = Vec::new();
    bisect(rows, cols, cutoff, &mut tiles);
    Ok(tiles)
}

fn bisect(rows: Range<usize>, cols: Range<usize>, cutoff: usize, out: &mut Vec<Tile>) {
    if rows.len() <= cutoff && cols.len() <= cutoff {
        out.push(Tile { rows, cols });
    } else if rows.len() >= cols.len() {
        let mid = rows.start + rows.len() / 2;
        bisect(rows.start..mid, cols.clone(), cutoff, out);
        bisect(mid..rows.end, cols, cutoff, out);
    } else {
        let mid = cols.start + cols.len() / 2;
        bisect(rows.clone(), cols.start..mid, cutoff, out);
        bisect(rows, mid..cols.end, cutoff, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    #[test]
    fn single_cell() {
        assert_eq!(
            plan_traversal(3..4, 7..8, 1).unwrap(),
            vec![Tile { rows: 3..4, cols: 7..8 }]
        );
    }

    #[test]
    fn four_by_four_cutoff_two() {
        let tiles = plan_traversal(0..4, 0..4, 2).unwrap();
        assert_eq!(
            tiles,
            vec![
                Tile { rows: 0..2, cols: 0..2 },
                Tile { rows: 0..2, cols: 2..4 },
                Tile { rows: 2..4, cols: 0..2 },
                Tile { rows: 2..4, cols: 2..4 },
            ]
        );
        let cells: Vec<_> = tiles.iter().flat_map(|t| t.cells()).collect();
        assert_eq!(cells.len(), 16);
        assert_eq!(cells.iter().collect::<BTreeSet<_>>().len(), 16);
    }

    #[test]
    fn uneven_ranges_cover_product_once() {
        let tiles = plan_traversal(0..13, 0..7, 3).unwrap();
        let mut cells: Vec<_> = tiles.iter().flat_map(|t| t.cells()).collect();
        for t in &tiles {
            assert!(t.rows.len() <= 3 && t.cols.len() <= 3);
        }
        cells.sort_unstable();
        let expected: Vec<_> = (0..13).flat_map(|r| (0..7).map(move |c| (r, c))).collect();
        assert_eq!(cells, expected);
    }

    #[test]
    fn leaf_iterates_rows_outer() {
        let t = Tile { rows: 0..2, cols: 5..7 };
        assert_eq!(t.cells().collect::<Vec<_>>(), vec![(0, 5), (0, 6), (1, 5), (1, 6)]);
    }

    #[test]
    fn rejects_empty_and_zero_cutoff() {
        assert!(plan_traversal(0..0, 0..3, 2).is_err());
        assert!(plan_traversal(0..3, 2..2, 2).is_err());
        assert!(plan_traversal(0..3, 0..3, 0).is_err());
    }
}
