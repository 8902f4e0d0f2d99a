//! Block partitioning of the row and column index spaces.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Block sizes along one axis, with element offsets as prefix sums.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockAxis {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockAxis {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::param(alloc::format!("block size at index {pos} is zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    pub fn uniform(count: usize, size: usize) -> Result<Self> {
        Self::new(alloc::vec![size; count])
    }

    /// Number of blocks along the axis.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn size(&self, block: usize) -> usize {
        self.sizes[block]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Element offset of `block`; `offset(len())` is the total element count.
    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn total(&self) -> usize {
        self.offsets[self.sizes.len()]
    }

    /// Axis made of the blocks at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self::new(indices.iter().map(|&i| self.sizes[i]).collect())
            .expect("sizes of an existing axis are positive")
    }
}

/// Row and column block partitioning of a matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockLayout {
    rows: BlockAxis,
    cols: BlockAxis,
}

impl BlockLayout {
    pub fn new(rows: BlockAxis, cols: BlockAxis) -> Self {
        Self { rows, cols }
    }

    pub fn from_sizes(row_sizes: Vec<usize>, col_sizes: Vec<usize>) -> Result<Self> {
        Ok(Self::new(BlockAxis::new(row_sizes)?, BlockAxis::new(col_sizes)?))
    }

    /// Square layout with the same partitioning on both axes.
    pub fn square(sizes: Vec<usize>) -> Result<Self> {
        let axis = BlockAxis::new(sizes)?;
        Ok(Self::new(axis.clone(), axis))
    }

    pub fn rows(&self) -> &BlockAxis {
        &self.rows
    }

    pub fn cols(&self) -> &BlockAxis {
        &self.cols
    }

    pub fn block_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn block_cols(&self) -> usize {
        self.cols.len()
    }

    /// Element count of the block at `(row, col)`.
    pub fn block_len(&self, row: usize, col: usize) -> usize {
        self.rows.size(row) * self.cols.size(col)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn offsets_are_prefix_sums() {
        let axis = BlockAxis::new(vec![5, 13, 5]).unwrap();
        assert_eq!(axis.offset(0), 0);
        assert_eq!(axis.offset(1), 5);
        assert_eq!(axis.offset(2), 18);
        assert_eq!(axis.total(), 23);
    }

    #[test]
    fn zero_size_rejected() {
        assert!(matches!(BlockAxis::new(vec![3, 0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn select_keeps_order() {
        let axis = BlockAxis::new(vec![1, 2, 3, 4]).unwrap();
        assert_eq!(axis.select(&[3, 1]).sizes(), &[4, 2]);
    }
}
