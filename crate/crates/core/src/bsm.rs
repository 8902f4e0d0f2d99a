//! BSM1 binary encoding of [`BlockCsr`] matrices.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "BSM1"                       magic, 4 bytes
//! u32 version = 1
//! u64 n_row_blocks, n_col_blocks, n_blocks
//! u32 x n_row_blocks           row block sizes
//! u32 x n_col_blocks           column block sizes
//! u64 x (n_row_blocks + 1)     row_ptr
//! u64 x n_blocks               col_idx
//! f64 ...                      block values, column-major per block, CSR order
//! ```
//!
//! Everything after the version field is the *body*, which is also the wire
//! format for matrix panels exchanged between ranks. Norms are not stored;
//! they are recomputed on decode.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::csr::BlockCsr;
use crate::error::{Error, Result};
use crate::layout::{BlockAxis, BlockLayout};

pub const MAGIC: [u8; 4] = *b"BSM1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8;

/// Exact size in bytes of the encoded body of `m`.
pub fn body_len(m: &BlockCsr) -> usize {
    let layout = m.layout();
    3 * 8
        + 4 * (layout.block_rows() + layout.block_cols())
        + 8 * (layout.block_rows() + 1)
        + 8 * m.n_blocks()
        + 8 * m.data().len()
}

pub fn encoded_len(m: &BlockCsr) -> usize {
    HEADER_LEN + body_len(m)
}

pub fn encode(m: &BlockCsr) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(encoded_len(m));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    write_body(m, &mut out)?;
    Ok(out)
}

pub fn encode_body(m: &BlockCsr) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(body_len(m));
    write_body(m, &mut out)?;
    Ok(out)
}

fn write_body(m: &BlockCsr, out: &mut Vec<u8>) -> Result<()> {
    let layout = m.layout();
    out.extend_from_slice(&(layout.block_rows() as u64).to_le_bytes());
    out.extend_from_slice(&(layout.block_cols() as u64).to_le_bytes());
    out.extend_from_slice(&(m.n_blocks() as u64).to_le_bytes());
    for axis in [layout.rows(), layout.cols()] {
        for &size in axis.sizes() {
            let size = u32::try_from(size)
                .map_err(|_| Error::param(format!("block size {size} does not fit in u32")))?;
            out.extend_from_slice(&size.to_le_bytes());
        }
    }
    for &p in m.row_ptr() {
        out.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in m.col_idx() {
        out.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for &v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn decode(bytes: &[u8]) -> Result<BlockCsr> {
    let mut reader = Reader { bytes, pos: 0 };
    let magic = reader.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: format!("bad magic {magic:?}"),
        });
    }
    let version = reader.u32("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    read_body(reader)
}

pub fn decode_body(bytes: &[u8]) -> Result<BlockCsr> {
    read_body(Reader { bytes, pos: 0 })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(self.err(format!(
                "truncated while reading {what}: need {n} bytes, {remaining} left"
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        let v = self.u64(what)?;
        let v = usize::try_from(v).map_err(|_| Error::Format {
            offset: start,
            reason: format!("{what} {v} exceeds the address space"),
        })?;
        Ok(v)
    }

    /// Rejects counts that cannot possibly fit in the remaining input.
    fn check_room(&self, count: usize, width: usize, what: &str) -> Result<()> {
        let remaining = self.bytes.len() - self.pos;
        if count.checked_mul(width).is_none_or(|need| need > remaining) {
            return Err(self.err(format!("truncated: {count} {what} do not fit in {remaining} bytes")));
        }
        Ok(())
    }
}

fn read_body(mut r: Reader<'_>) -> Result<BlockCsr> {
    let n_rows = r.count("n_row_blocks")?;
    let n_cols = r.count("n_col_blocks")?;
    let n_blocks = r.count("n_blocks")?;

    let mut axes = Vec::with_capacity(2);
    for (n, what) in [(n_rows, "row block sizes"), (n_cols, "column block sizes")] {
        r.check_room(n, 4, what)?;
        let start = r.pos;
        let mut sizes = Vec::with_capacity(n);
        for _ in 0..n {
            sizes.push(r.u32(what)? as usize);
        }
        let axis = BlockAxis::new(sizes).map_err(|e| Error::Format {
            offset: start,
            reason: format!("{what}: {e}"),
        })?;
        axes.push(axis);
    }
    let cols = axes.pop().expect("two axes");
    let rows = axes.pop().expect("two axes");
    let layout = BlockLayout::new(rows, cols);

    r.check_room(n_rows + 1, 8, "row_ptr entries")?;
    let row_ptr_start = r.pos;
    let mut row_ptr = Vec::with_capacity(n_rows + 1);
    for _ in 0..=n_rows {
        row_ptr.push(r.count("row_ptr")?);
    }
    r.check_room(n_blocks, 8, "col_idx entries")?;
    let col_idx_start = r.pos;
    let mut col_idx = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        col_idx.push(r.count("col_idx")?);
    }
    if row_ptr.last() != Some(&n_blocks) {
        return Err(Error::Format {
            offset: row_ptr_start,
            reason: format!("row_ptr does not end at n_blocks = {n_blocks}"),
        });
    }
    if let Some(row) = (0..n_rows).find(|&i| row_ptr[i + 1] < row_ptr[i]) {
        return Err(Error::Format {
            offset: row_ptr_start + 8 * row,
            reason: format!("row_ptr decreases at block row {row}"),
        });
    }
    if row_ptr[0] != 0 {
        return Err(Error::Format {
            offset: row_ptr_start,
            reason: "row_ptr[0] is not 0".into(),
        });
    }

    let mut n_values = 0usize;
    for row in 0..n_rows {
        for &col in &col_idx[row_ptr[row]..row_ptr[row + 1]] {
            if col >= n_cols {
                return Err(Error::Format {
                    offset: col_idx_start,
                    reason: format!("column index {col} out of range in block row {row}"),
                });
            }
            n_values += layout.block_len(row, col);
        }
    }
    r.check_room(n_values, 8, "block values")?;
    let data_start = r.pos;
    let raw = r.take(8 * n_values, "block values")?;
    let data: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    if r.pos != r.bytes.len() {
        return Err(r.err(format!("{} trailing bytes", r.bytes.len() - r.pos)));
    }
    BlockCsr::from_raw_parts(layout, row_ptr, col_idx, data).map_err(|e| Error::Format {
        offset: data_start,
        reason: format!("{e}"),
    })
}
