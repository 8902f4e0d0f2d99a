//! Block-cyclic distribution of a permuted matrix over a process grid.

use std::collections::BTreeMap;

use bsmm_core::{random_permutation, BlockCsr, BlockLayout, Permutation};
use bsmm_core::csr::BlockCsrBuilder;

use crate::error::{Error, Result};
use crate::grid::ProcessGrid;

/// The part of a distributed matrix held by one rank.
///
/// Local block row `i` is global block row `row_map[i]`, likewise for
/// columns. Maps are ascending in the global index.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub rank: usize,
    pub row_map: Vec<usize>,
    pub col_map: Vec<usize>,
    pub local: BlockCsr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    grid: ProcessGrid,
    row_perm: Permutation,
    col_perm: Permutation,
    layout: BlockLayout,
    shards: Vec<Shard>,
}

/// Global block indices whose permuted index falls in residue class `class`.
pub fn axis_members(perm: &Permutation, q: usize, class: usize) -> Vec<usize> {
    (0..perm.len()).filter(|&i| perm.apply(i) % q == class).collect()
}

/// Block layout of the panel owned by grid cell `(r, c)`.
pub fn shard_layout(layout: &BlockLayout, row_map: &[usize], col_map: &[usize]) -> BlockLayout {
    BlockLayout::new(layout.rows().select(row_map), layout.cols().select(col_map))
}

/// Distributes `m` with random row and column permutations drawn from `seed`.
///
/// Both axes use the same seed, so matrices distributed with one seed can be
/// multiplied with each other and with their products.
pub fn distribute(m: &BlockCsr, grid: ProcessGrid, seed: u64) -> Result<DistMatrix> {
    let row_perm = axis_permutation(m.block_rows(), seed)?;
    let col_perm = axis_permutation(m.block_cols(), seed)?;
    distribute_with(m, grid, row_perm, col_perm)
}

fn axis_permutation(n: usize, seed: u64) -> Result<Permutation> {
    if n == 0 {
        return Ok(Permutation::identity(0));
    }
    Ok(random_permutation(n, seed)?)
}

/// Distributes `m` under explicit permutations.
pub fn distribute_with(
    m: &BlockCsr,
    grid: ProcessGrid,
    row_perm: Permutation,
    col_perm: Permutation,
) -> Result<DistMatrix> {
    if row_perm.len() != m.block_rows() || col_perm.len() != m.block_cols() {
        return Err(Error::param(format!(
            "permutations of length {}x{} for a {}x{} block matrix",
            row_perm.len(),
            col_perm.len(),
            m.block_rows(),
            m.block_cols()
        )));
    }
    let q = grid.side();
    let layout = m.layout().clone();
    let row_maps: Vec<Vec<usize>> = (0..q).map(|r| axis_members(&row_perm, q, r)).collect();
    let col_maps: Vec<Vec<usize>> = (0..q).map(|c| axis_members(&col_perm, q, c)).collect();
    // global -> local index along each axis
    let mut row_local = vec![0; m.block_rows()];
    for map in &row_maps {
        for (l, &g) in map.iter().enumerate() {
            row_local[g] = l;
        }
    }
    let mut col_local = vec![0; m.block_cols()];
    for map in &col_maps {
        for (l, &g) in map.iter().enumerate() {
            col_local[g] = l;
        }
    }

    // Global rows are visited in ascending order, and within a shard the local
    // columns of one row come out ascending too, so plain pushes keep CSR order.
    let mut builders: Vec<BlockCsrBuilder> = (0..grid.ranks())
        .map(|rank| {
            let (r, c) = grid.coords(rank);
            BlockCsrBuilder::new(shard_layout(&layout, &row_maps[r], &col_maps[c]))
        })
        .collect();
    for (row, col, values) in m.iter() {
        let rank = grid.rank_of(row_perm.apply(row) % q, col_perm.apply(col) % q);
        builders[rank].push(row_local[row], col_local[col], values)?;
    }
    let shards = builders
        .into_iter()
        .enumerate()
        .map(|(rank, b)| {
            let (r, c) = grid.coords(rank);
            Shard {
                rank,
                row_map: row_maps[r].clone(),
                col_map: col_maps[c].clone(),
                local: b.finish(),
            }
        })
        .collect();
    Ok(DistMatrix {
        grid,
        row_perm,
        col_perm,
        layout,
        shards,
    })
}

impl DistMatrix {
    /// Assembles a distributed matrix from shards produced elsewhere.
    pub fn from_shards(
        grid: ProcessGrid,
        row_perm: Permutation,
        col_perm: Permutation,
        layout: BlockLayout,
        mut shards: Vec<Shard>,
    ) -> Result<Self> {
        if shards.len() != grid.ranks() {
            return Err(Error::Integrity(format!(
                "{} shards for a grid of {} ranks",
                shards.len(),
                grid.ranks()
            )));
        }
        shards.sort_by_key(|s| s.rank);
        for (rank, s) in shards.iter().enumerate() {
            if s.rank != rank {
                return Err(Error::Integrity(format!("shard rank {} duplicated or missing", s.rank)));
            }
            let expected = shard_layout(&layout, &s.row_map, &s.col_map);
            if s.local.layout() != &expected {
                return Err(Error::Integrity(format!("shard {rank} layout disagrees with its index maps")));
            }
        }
        Ok(Self {
            grid,
            row_perm,
            col_perm,
            layout,
            shards,
        })
    }

    pub fn grid(&self) -> ProcessGrid {
        self.grid
    }

    pub fn row_perm(&self) -> &Permutation {
        &self.row_perm
    }

    pub fn col_perm(&self) -> &Permutation {
        &self.col_perm
    }

    /// Global block layout.
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn shards(&self) -> &[Shard] {
        &self.shards
    }

    pub fn shard(&self, rank: usize) -> &Shard {
        &self.shards[rank]
    }

    pub fn n_blocks(&self) -> usize {
        self.shards.iter().map(|s| s.local.n_blocks()).sum()
    }

    pub fn occupancy(&self) -> f64 {
        let positions = self.layout.block_rows() as f64 * self.layout.block_cols() as f64;
        if positions == 0.0 {
            0.0
        } else {
            self.n_blocks() as f64 / positions
        }
    }

    /// Drops blocks with norm at most `eps` on every shard.
    pub fn filter_blocks(&self, eps: f64) -> Result<Self> {
        let shards = self
            .shards
            .iter()
            .map(|s| {
                Ok(Shard {
                    local: s.local.filter_blocks(eps)?,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shards, ..self.clone() })
    }

    /// Reassembles the global matrix in original index order.
    pub fn gather(&self) -> Result<BlockCsr> {
        let mut rows: Vec<BTreeMap<usize, &[f64]>> = vec![BTreeMap::new(); self.layout.block_rows()];
        for s in &self.shards {
            for (lr, lc, values) in s.local.iter() {
                let (row, col) = (s.row_map[lr], s.col_map[lc]);
                if rows[row].insert(col, values).is_some() {
                    return Err(Error::Integrity(format!(
                        "block ({row}, {col}) is stored on more than one shard"
                    )));
                }
            }
        }
        let n_blocks = rows.iter().map(BTreeMap::len).sum();
        let n_values = rows.iter().flat_map(|r| r.values()).map(|v| v.len()).sum();
        let mut out = BlockCsrBuilder::with_capacity(self.layout.clone(), n_blocks, n_values);
        for (row, blocks) in rows.iter().enumerate() {
            for (&col, values) in blocks {
                out.push(row, col, values)?;
            }
        }
        Ok(out.finish())
    }
}
