//! Blocked compressed sparse row storage.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::layout::BlockLayout;

/// Frobenius norm of a dense block: the square root of the sum of squares,
/// accumulated in element order.
pub fn frobenius_norm(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    for &v in values {
        sum += v * v;
    }
    libm::sqrt(sum)
}

/// One dense block of a triplet list. `values` are column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub values: Vec<f64>,
}

impl BlockEntry {
    pub fn new(row: usize, col: usize, values: Vec<f64>) -> Self {
        Self { row, col, values }
    }
}

/// Block-sparse matrix in blocked CSR form.
///
/// Stored blocks are laid out back to back in `data` in CSR order, each one
/// column-major. Column indices are strictly increasing within a block row.
/// Explicit all-zero blocks are allowed; only [`BlockCsr::filter_blocks`]
/// removes blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCsr {
    layout: BlockLayout,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    block_offsets: Vec<usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl BlockCsr {
    pub fn empty(layout: BlockLayout) -> Self {
        let rows = layout.block_rows();
        Self {
            layout,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            block_offsets: Vec::new(),
            data: Vec::new(),
            norms: Vec::new(),
        }
    }

    /// Assembles a matrix from an unordered triplet list. Entries that hit the
    /// same block coordinates are summed in input order.
    pub fn build_from_triplets<I>(layout: BlockLayout, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = BlockEntry>,
    {
        let (rows, cols) = (layout.block_rows(), layout.block_cols());
        let mut merged: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for entry in entries {
            let BlockEntry { row, col, values } = entry;
            if row >= rows || col >= cols {
                return Err(Error::BlockIndex { row, col, rows, cols });
            }
            let expected = layout.block_len(row, col);
            if values.len() != expected {
                return Err(Error::BlockShape {
                    row,
                    col,
                    expected,
                    found: values.len(),
                });
            }
            match merged.get_mut(&(row, col)) {
                Some(acc) => acc.iter_mut().zip(&values).for_each(|(a, v)| *a += v),
                None => {
                    merged.insert((row, col), values);
                }
            }
        }
        let mut builder = BlockCsrBuilder::new(layout);
        for ((row, col), values) in merged {
            builder.push(row, col, &values)?;
        }
        Ok(builder.finish())
    }

    /// Builds a matrix from raw CSR arrays, checking every structural
    /// invariant. Norms are computed from `data`.
    pub fn from_raw_parts(
        layout: BlockLayout,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self> {
        check_structure(&layout, &row_ptr, &col_idx)?;
        let mut block_offsets = Vec::with_capacity(col_idx.len());
        let mut norms = Vec::with_capacity(col_idx.len());
        let mut offset = 0usize;
        for row in 0..layout.block_rows() {
            for &col in &col_idx[row_ptr[row]..row_ptr[row + 1]] {
                let len = layout.block_len(row, col);
                if offset + len > data.len() {
                    return Err(Error::Invariant(format!(
                        "block data too short: block ({row}, {col}) needs {} values, {} available",
                        len,
                        data.len() - offset
                    )));
                }
                block_offsets.push(offset);
                norms.push(frobenius_norm(&data[offset..offset + len]));
                offset += len;
            }
        }
        if offset != data.len() {
            return Err(Error::Invariant(format!(
                "block data holds {} values, blocks cover {offset}",
                data.len()
            )));
        }
        Ok(Self {
            layout,
            row_ptr,
            col_idx,
            block_offsets,
            data,
            norms,
        })
    }

    /// Checks every structural and numerical invariant of the representation.
    pub fn validate(&self) -> Result<()> {
        check_structure(&self.layout, &self.row_ptr, &self.col_idx)?;
        if self.block_offsets.len() != self.col_idx.len() || self.norms.len() != self.col_idx.len() {
            return Err(Error::Invariant("per-block arrays disagree in length".into()));
        }
        let mut offset = 0usize;
        for (b, (row, col)) in self.coords().enumerate() {
            if self.block_offsets[b] != offset {
                return Err(Error::Invariant(format!(
                    "block {b} starts at {}, expected {offset}",
                    self.block_offsets[b]
                )));
            }
            let len = self.layout.block_len(row, col);
            offset += len;
            if offset > self.data.len() {
                return Err(Error::Invariant(format!("block {b} runs past the data array")));
            }
            let norm = frobenius_norm(self.block(b));
            let stored = self.norms[b];
            if (norm - stored).abs() > 1e-14 * norm.max(f64::MIN_POSITIVE) && norm != stored {
                return Err(Error::Invariant(format!(
                    "block ({row}, {col}) stores norm {stored}, recomputed {norm}"
                )));
            }
        }
        if offset != self.data.len() {
            return Err(Error::Invariant(format!(
                "data holds {} values, blocks cover {offset}",
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn block_rows(&self) -> usize {
        self.layout.block_rows()
    }

    pub fn block_cols(&self) -> usize {
        self.layout.block_cols()
    }

    /// Number of stored blocks.
    pub fn n_blocks(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn block_offsets(&self) -> &[usize] {
        &self.block_offsets
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Stored-block index range of block row `row`.
    pub fn row_range(&self, row: usize) -> Range<usize> {
        self.row_ptr[row]..self.row_ptr[row + 1]
    }

    /// Column-major values of stored block `b`.
    pub fn block(&self, b: usize) -> &[f64] {
        let start = self.block_offsets[b];
        let end = self
            .block_offsets
            .get(b + 1)
            .copied()
            .unwrap_or(self.data.len());
        &self.data[start..end]
    }

    /// Stored-block index of `(row, col)`, if present.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_range(row);
        self.col_idx[range.clone()]
            .binary_search(&col)
            .ok()
            .map(|pos| range.start + pos)
    }

    /// Block coordinates of every stored block, in CSR order.
    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.block_rows())
            .flat_map(move |row| self.row_range(row).map(move |b| (row, self.col_idx[b])))
    }

    /// `(row, col, values)` for every stored block, in CSR order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        self.coords()
            .enumerate()
            .map(move |(b, (row, col))| (row, col, self.block(b)))
    }

    /// Stored-block count of every block row.
    pub fn row_weights(&self) -> Vec<u64> {
        self.row_ptr.windows(2).map(|w| (w[1] - w[0]) as u64).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let rows = self.layout.rows();
        let cols = self.layout.cols();
        let mut dense = DenseMatrix::zeros(rows.total(), cols.total());
        for (row, col, values) in self.iter() {
            let (m, n) = (rows.size(row), cols.size(col));
            let (r0, c0) = (rows.offset(row), cols.offset(col));
            for j in 0..n {
                for i in 0..m {
                    dense.set(r0 + i, c0 + j, values[i + j * m]);
                }
            }
        }
        dense
    }

    /// Keeps exactly the blocks whose norm is strictly greater than `eps`.
    pub fn filter_blocks(&self, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let mut builder = BlockCsrBuilder::new(self.layout.clone());
        for (b, (row, col)) in self.coords().enumerate() {
            if self.norms[b] > eps {
                builder.push_with_norm(row, col, self.block(b), self.norms[b]);
            }
        }
        Ok(builder.finish())
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::param(format!("filter threshold must be >= 0, got {eps}")));
    }
    Ok(())
}

fn check_structure(layout: &BlockLayout, row_ptr: &[usize], col_idx: &[usize]) -> Result<()> {
    let rows = layout.block_rows();
    let cols = layout.block_cols();
    if row_ptr.len() != rows + 1 {
        return Err(Error::Invariant(format!(
            "row_ptr has {} entries, expected {}",
            row_ptr.len(),
            rows + 1
        )));
    }
    if row_ptr[0] != 0 {
        return Err(Error::Invariant("row_ptr[0] is not 0".into()));
    }
    if row_ptr[rows] != col_idx.len() {
        return Err(Error::Invariant(format!(
            "row_ptr ends at {}, but {} blocks are stored",
            row_ptr[rows],
            col_idx.len()
        )));
    }
    for row in 0..rows {
        if row_ptr[row + 1] < row_ptr[row] {
            return Err(Error::Invariant(format!("row_ptr decreases at block row {row}")));
        }
        let cols_in_row = &col_idx[row_ptr[row]..row_ptr[row + 1]];
        for (pos, &col) in cols_in_row.iter().enumerate() {
            if col >= cols {
                return Err(Error::BlockIndex { row, col, rows, cols });
            }
            if pos > 0 && cols_in_row[pos - 1] >= col {
                return Err(Error::Invariant(format!(
                    "block row {row}: column {col} not strictly increasing"
                )));
            }
        }
    }
    Ok(())
}

/// Appends blocks in CSR order (row-major over block coordinates).
#[derive(Debug)]
pub struct BlockCsrBuilder {
    layout: BlockLayout,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    block_offsets: Vec<usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
    current_row: usize,
}

impl BlockCsrBuilder {
    pub fn new(layout: BlockLayout) -> Self {
        Self {
            layout,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            block_offsets: Vec::new(),
            data: Vec::new(),
            norms: Vec::new(),
            current_row: 0,
        }
    }

    pub fn with_capacity(layout: BlockLayout, blocks: usize, values: usize) -> Self {
        let mut builder = Self::new(layout);
        builder.col_idx.reserve(blocks);
        builder.block_offsets.reserve(blocks);
        builder.norms.reserve(blocks);
        builder.data.reserve(values);
        builder
    }

    /// Appends a block. Coordinates must follow CSR order.
    pub fn push(&mut self, row: usize, col: usize, values: &[f64]) -> Result<()> {
        let (rows, cols) = (self.layout.block_rows(), self.layout.block_cols());
        if row >= rows || col >= cols {
            return Err(Error::BlockIndex { row, col, rows, cols });
        }
        let expected = self.layout.block_len(row, col);
        if values.len() != expected {
            return Err(Error::BlockShape {
                row,
                col,
                expected,
                found: values.len(),
            });
        }
        let in_order = row > self.current_row
            || (row == self.current_row
                && (self.col_idx.len() == self.row_ptr[row]
                    || self.col_idx.last().is_some_and(|&last| last < col)));
        if !in_order {
            return Err(Error::Invariant(format!(
                "block ({row}, {col}) pushed out of CSR order"
            )));
        }
        self.push_with_norm(row, col, values, frobenius_norm(values));
        Ok(())
    }

    pub(crate) fn push_with_norm(&mut self, row: usize, col: usize, values: &[f64], norm: f64) {
        self.advance_to(row);
        self.col_idx.push(col);
        self.block_offsets.push(self.data.len());
        self.data.extend_from_slice(values);
        self.norms.push(norm);
    }

    fn advance_to(&mut self, row: usize) {
        while self.current_row < row {
            self.row_ptr.push(self.col_idx.len());
            self.current_row += 1;
        }
    }

    pub fn finish(mut self) -> BlockCsr {
        let rows = self.layout.block_rows();
        self.advance_to(rows);
        BlockCsr {
            layout: self.layout,
            row_ptr: self.row_ptr,
            col_idx: self.col_idx,
            block_offsets: self.block_offsets,
            data: self.data,
            norms: self.norms,
        }
    }
}

/// Row-major dense matrix, used to check block-sparse results element-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Cuts the matrix into blocks of `layout`, keeping blocks with at least
    /// one nonzero element.
    pub fn to_blocks(&self, layout: &BlockLayout) -> Result<Vec<BlockEntry>> {
        let (rows, cols) = (layout.rows(), layout.cols());
        if rows.total() != self.rows || cols.total() != self.cols {
            return Err(Error::LayoutMismatch(format!(
                "layout covers {}x{} elements, matrix is {}x{}",
                rows.total(),
                cols.total(),
                self.rows,
                self.cols
            )));
        }
        let mut out = Vec::new();
        for br in 0..rows.len() {
            for bc in 0..cols.len() {
                let (m, n) = (rows.size(br), cols.size(bc));
                let (r0, c0) = (rows.offset(br), cols.offset(bc));
                let mut values = vec![0.0; m * n];
                for j in 0..n {
                    for i in 0..m {
                        values[i + j * m] = self.get(r0 + i, c0 + j);
                    }
                }
                if values.iter().any(|&v| v != 0.0) {
                    out.push(BlockEntry::new(br, bc, values));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i + i * n] = 1.0;
        }
        v
    }

    #[test]
    fn norm_examples() {
        assert_eq!(frobenius_norm(&[0.0; 15]), 0.0);
        assert_eq!(frobenius_norm(&identity(2)), 2f64.sqrt());
        assert_eq!(frobenius_norm(&identity(2)), core::f64::consts::SQRT_2);
        let one_to_nine: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(frobenius_norm(&one_to_nine), 285f64.sqrt());
        assert_eq!(frobenius_norm(&one_to_nine), 16.881943016134134);
    }

    #[test]
    fn empty_triplets() {
        let layout = BlockLayout::square(vec![2, 3, 1]).unwrap();
        let m = BlockCsr::build_from_triplets(layout, Vec::new()).unwrap();
        assert_eq!(m.row_ptr(), &[0, 0, 0, 0]);
        assert_eq!(m.n_blocks(), 0);
        m.validate().unwrap();
    }

    #[test]
    fn identity_block() {
        let layout = BlockLayout::square(vec![2, 2]).unwrap();
        let m = BlockCsr::build_from_triplets(layout, [BlockEntry::new(0, 0, identity(2))]).unwrap();
        assert_eq!(m.n_blocks(), 1);
        assert_eq!(m.norms(), &[2f64.sqrt()]);
        let dense = m.to_dense();
        assert_eq!(dense.rows(), 4);
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r == c && r < 2 { 1.0 } else { 0.0 };
                assert_eq!(dense.get(r, c), expected);
            }
        }
        m.validate().unwrap();
    }

    #[test]
    fn empty_to_dense_is_zero() {
        let layout = BlockLayout::square(vec![2, 2]).unwrap();
        let dense = BlockCsr::empty(layout).to_dense();
        assert_eq!(dense.data(), &[0.0; 16]);
    }

    #[test]
    fn shape_mismatch_names_block() {
        let layout = BlockLayout::square(vec![2, 3]).unwrap();
        let err = BlockCsr::build_from_triplets(layout, [BlockEntry::new(0, 1, vec![1.0; 4])])
            .unwrap_err();
        assert_eq!(
            err,
            Error::BlockShape {
                row: 0,
                col: 1,
                expected: 6,
                found: 4
            }
        );
    }

    #[test]
    fn out_of_grid_rejected() {
        let layout = BlockLayout::square(vec![1]).unwrap();
        let err = BlockCsr::build_from_triplets(layout, [BlockEntry::new(1, 0, vec![1.0])]).unwrap_err();
        assert!(matches!(err, Error::BlockIndex { row: 1, col: 0, .. }));
    }

    #[test]
    fn explicit_zero_blocks_are_kept() {
        let layout = BlockLayout::square(vec![2]).unwrap();
        let m = BlockCsr::build_from_triplets(layout, [BlockEntry::new(0, 0, vec![0.0; 4])]).unwrap();
        assert_eq!(m.n_blocks(), 1);
        assert_eq!(m.norms(), &[0.0]);
    }

    fn with_norms(norms: &[f64]) -> BlockCsr {
        let layout = BlockLayout::square(vec![1; norms.len()]).unwrap();
        let entries = norms
            .iter()
            .enumerate()
            .map(|(i, &n)| BlockEntry::new(i, i, vec![n]));
        BlockCsr::build_from_triplets(layout, entries).unwrap()
    }

    #[test]
    fn filter_is_strict() {
        let m = with_norms(&[0.0, 0.5, 2.0]);
        let f = m.filter_blocks(1.0).unwrap();
        assert_eq!(f.n_blocks(), 1);
        assert_eq!(f.norms(), &[2.0]);
        assert_eq!(f.coords().collect::<Vec<_>>(), vec![(2, 2)]);
        f.validate().unwrap();

        let f0 = m.filter_blocks(0.0).unwrap();
        assert_eq!(f0.norms(), &[0.5, 2.0]);
        f0.validate().unwrap();
    }

    #[test]
    fn negative_eps_rejected() {
        let m = with_norms(&[1.0]);
        assert!(matches!(m.filter_blocks(-1e-3), Err(Error::Parameter(_))));
        assert!(matches!(m.filter_blocks(f64::NAN), Err(Error::Parameter(_))));
    }

    #[test]
    fn builder_rejects_out_of_order() {
        let layout = BlockLayout::square(vec![1, 1]).unwrap();
        let mut b = BlockCsrBuilder::new(layout);
        b.push(1, 1, &[1.0]).unwrap();
        assert!(b.push(1, 0, &[1.0]).is_err());
        assert!(b.push(0, 1, &[1.0]).is_err());
        assert!(b.push(1, 1, &[1.0]).is_err());
    }

    #[test]
    fn raw_parts_check_invariants() {
        let layout = BlockLayout::square(vec![1, 1]).unwrap();
        assert!(BlockCsr::from_raw_parts(layout.clone(), vec![0, 1, 2], vec![1, 0], vec![1.0, 2.0]).is_ok());
        assert!(BlockCsr::from_raw_parts(layout.clone(), vec![0, 2, 2], vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(BlockCsr::from_raw_parts(layout.clone(), vec![1, 1, 2], vec![0, 1], vec![1.0, 2.0]).is_err());
        assert!(BlockCsr::from_raw_parts(layout, vec![0, 1, 2], vec![0, 1], vec![1.0]).is_err());
    }

    #[test]
    fn find_locates_blocks() {
        let m = with_norms(&[1.0, 2.0, 3.0]);
        assert_eq!(m.find(1, 1), Some(1));
        assert_eq!(m.find(1, 2), None);
    }
}
