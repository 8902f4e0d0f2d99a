//! Node-local block-sparse multiplication `C += A * B`.
//!
//! The A block rows are split into contiguous ranges, one per worker, using
//! stored-block counts as weights. Each worker walks its rows times all B
//! block columns in cache-oblivious tiles ([`plan_traversal`]). A candidate
//! triple `(i, k, j)` is executed only when `norm(A_ik) * norm(B_kj) > eps`.
//! Survivors of a tile are grouped by kernel key into batches of at most
//! `batch_capacity` entries; the batches of a tile run in ascending key
//! order.
//!
//! Every contribution to a C block `(i, j)` comes from the single tile that
//! contains `(i, j)`, so each C block is accumulated in (key, k) order no
//! matter how rows are split among workers, how tiles are cut, or how large
//! batches are. Results are therefore bit-identical across worker counts and
//! batch capacities.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::csr::{check_eps, BlockCsr, BlockCsrBuilder};
use crate::error::{Error, Result};
use crate::kernels::{KernelKey, KernelTable, MAX_BLOCK_DIM};
use crate::layout::BlockLayout;
use crate::partition::partition_rows;
use crate::traversal::{plan_traversal, DEFAULT_CUTOFF};

/// Default maximum number of entries per batch.
pub const DEFAULT_BATCH_CAPACITY: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplyOptions {
    /// Norm-product threshold; a triple runs iff the product is `> eps`.
    pub eps: f64,
    pub workers: usize,
    pub batch_capacity: usize,
    /// Leaf extent of the traversal, in blocks.
    pub cutoff: usize,
    /// Record every candidate triple in [`LocalMmStats::log`].
    pub record_log: bool,
}

impl Default for MultiplyOptions {
    fn default() -> Self {
        Self {
            eps: 0.0,
            workers: 1,
            batch_capacity: DEFAULT_BATCH_CAPACITY,
            cutoff: DEFAULT_CUTOFF,
            record_log: false,
        }
    }
}

impl MultiplyOptions {
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_batch_capacity(mut self, capacity: usize) -> Self {
        self.batch_capacity = capacity;
        self
    }

    pub fn with_log(mut self) -> Self {
        self.record_log = true;
        self
    }

    /// Rejects a negative or NaN eps and zero workers, capacity or cutoff.
    pub fn check(&self) -> Result<()> {
        check_eps(self.eps)?;
        if self.workers == 0 {
            return Err(Error::param("worker count must be at least 1"));
        }
        if self.batch_capacity == 0 {
            return Err(Error::param("batch capacity must be at least 1"));
        }
        if self.cutoff == 0 {
            return Err(Error::param("traversal cutoff must be at least 1"));
        }
        Ok(())
    }
}

/// One block product scheduled for execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchEntry {
    /// Stored-block index into A.
    pub a_block: usize,
    /// Stored-block index into B.
    pub b_block: usize,
    pub c_row: usize,
    pub c_col: usize,
    pub key: KernelKey,
}

/// Homogeneous run of entries handed to one dispatched kernel.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub key: KernelKey,
    pub entries: &'a [BatchEntry],
    pub owner: usize,
}

/// A candidate triple `(row, inner, col)` and whether it passed the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TripleRecord {
    pub row: usize,
    pub col: usize,
    pub inner: usize,
    pub executed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalMmStats {
    /// `2 m n k` summed over executed triples.
    pub flops: u64,
    pub executed: u64,
    pub skipped: u64,
    pub batches: u64,
    /// Batches that ran on a fixed-size kernel.
    pub specialized_batches: u64,
    /// Wall time each worker spent on its rows; zeros without `std`.
    pub worker_busy_secs: Vec<f64>,
    pub worker_flops: Vec<u64>,
    /// `(max - mean) / mean` of worker busy time.
    pub imbalance: f64,
    /// `(max - mean) / mean` of worker flops.
    pub flop_imbalance: f64,
    /// Sorted candidate log, filled when requested.
    pub log: Vec<TripleRecord>,
}

impl LocalMmStats {
    /// Adds the counters of `other`, matching workers by index.
    pub fn absorb(&mut self, other: &LocalMmStats) {
        self.flops += other.flops;
        self.executed += other.executed;
        self.skipped += other.skipped;
        self.batches += other.batches;
        self.specialized_batches += other.specialized_batches;
        let n = self.worker_busy_secs.len().max(other.worker_busy_secs.len());
        self.worker_busy_secs.resize(n, 0.0);
        self.worker_flops.resize(n, 0);
        for (w, &t) in other.worker_busy_secs.iter().enumerate() {
            self.worker_busy_secs[w] += t;
        }
        for (w, &f) in other.worker_flops.iter().enumerate() {
            self.worker_flops[w] += f;
        }
        self.log.extend_from_slice(&other.log);
        self.refresh_imbalance();
    }

    fn refresh_imbalance(&mut self) {
        self.imbalance = relative_excess(self.worker_busy_secs.iter().copied());
        self.flop_imbalance = relative_excess(self.worker_flops.iter().map(|&f| f as f64));
    }
}

/// `(max - mean) / mean`, or 0 when the mean is 0.
pub fn relative_excess(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    if mean > 0.0 {
        (max - mean) / mean
    } else {
        0.0
    }
}

/// Exact flop total of a run.
pub fn count_flops(stats: &LocalMmStats) -> u64 {
    stats.flops
}

type AccRow = BTreeMap<usize, Vec<f64>>;

/// C blocks under construction, one ordered map per block row.
///
/// Blocks are created, zero-filled, on their first executed contribution.
#[derive(Debug, Clone)]
pub struct ProductAccumulator {
    layout: BlockLayout,
    rows: Vec<AccRow>,
}

impl ProductAccumulator {
    pub fn new(layout: BlockLayout) -> Self {
        let rows = (0..layout.block_rows()).map(|_| BTreeMap::new()).collect();
        Self { layout, rows }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn n_blocks(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    /// Converts to CSR, computing block norms.
    pub fn finish(self) -> BlockCsr {
        let n_blocks = self.n_blocks();
        let n_values = self
            .rows
            .iter()
            .flat_map(|r| r.values())
            .map(Vec::len)
            .sum();
        let mut builder = BlockCsrBuilder::with_capacity(self.layout, n_blocks, n_values);
        for (row, blocks) in self.rows.into_iter().enumerate() {
            for (col, values) in blocks {
                builder
                    .push(row, col, &values)
                    .expect("accumulator blocks are shaped by the layout and visited in order");
            }
        }
        builder.finish()
    }
}

/// `C = A * B` with the default kernel table.
pub fn multiply_local(a: &BlockCsr, b: &BlockCsr, opts: &MultiplyOptions) -> Result<(BlockCsr, LocalMmStats)> {
    multiply_local_with(a, b, opts, &KernelTable::default())
}

pub fn multiply_local_with(
    a: &BlockCsr,
    b: &BlockCsr,
    opts: &MultiplyOptions,
    table: &KernelTable,
) -> Result<(BlockCsr, LocalMmStats)> {
    let layout = BlockLayout::new(a.layout().rows().clone(), b.layout().cols().clone());
    let mut acc = ProductAccumulator::new(layout);
    let stats = multiply_into(a, b, &mut acc, opts, table)?;
    Ok((acc.finish(), stats))
}

/// `C += A * B` into an existing accumulator.
pub fn multiply_into(
    a: &BlockCsr,
    b: &BlockCsr,
    acc: &mut ProductAccumulator,
    opts: &MultiplyOptions,
    table: &KernelTable,
) -> Result<LocalMmStats> {
    opts.check()?;
    if a.layout().cols() != b.layout().rows() {
        return Err(Error::LayoutMismatch(format!(
            "A has {} block columns {:?}..., B has {} block rows",
            a.block_cols(),
            &a.layout().cols().sizes()[..a.block_cols().min(4)],
            b.block_rows()
        )));
    }
    if acc.layout.rows() != a.layout().rows() || acc.layout.cols() != b.layout().cols() {
        return Err(Error::LayoutMismatch(
            "accumulator layout does not match A rows by B columns".into(),
        ));
    }
    for axis in [a.layout().rows(), a.layout().cols(), b.layout().cols()] {
        if let Some(&big) = axis.sizes().iter().find(|&&s| s > MAX_BLOCK_DIM) {
            return Err(Error::param(format!(
                "block dimension {big} exceeds the kernel limit {MAX_BLOCK_DIM}"
            )));
        }
    }

    let partition = partition_rows(&a.row_weights(), opts.workers)?;
    let ctx = WorkerContext { a, b, opts, table };

    let mut slices: Vec<(usize, Range<usize>, &mut [AccRow])> = Vec::with_capacity(opts.workers);
    let mut rest: &mut [AccRow] = &mut acc.rows;
    for (owner, range) in partition.ranges().iter().enumerate() {
        let (mine, tail) = core::mem::take(&mut rest).split_at_mut(range.len());
        slices.push((owner, range.clone(), mine));
        rest = tail;
    }

    let outcomes = run_workers(&ctx, slices);

    let mut stats = LocalMmStats {
        worker_busy_secs: vec![0.0; opts.workers],
        worker_flops: vec![0; opts.workers],
        ..LocalMmStats::default()
    };
    for (owner, out) in outcomes.into_iter().enumerate() {
        stats.flops += out.flops;
        stats.executed += out.executed;
        stats.skipped += out.skipped;
        stats.batches += out.batches;
        stats.specialized_batches += out.specialized_batches;
        stats.worker_busy_secs[owner] = out.busy_secs;
        stats.worker_flops[owner] = out.flops;
        stats.log.extend(out.log);
    }
    stats.log.sort_unstable();
    stats.refresh_imbalance();
    Ok(stats)
}

struct WorkerContext<'a> {
    a: &'a BlockCsr,
    b: &'a BlockCsr,
    opts: &'a MultiplyOptions,
    table: &'a KernelTable,
}

#[derive(Default)]
struct WorkerOutcome {
    flops: u64,
    executed: u64,
    skipped: u64,
    batches: u64,
    specialized_batches: u64,
    busy_secs: f64,
    log: Vec<TripleRecord>,
}

#[cfg(feature = "std")]
fn run_workers(ctx: &WorkerContext<'_>, slices: Vec<(usize, Range<usize>, &mut [AccRow])>) -> Vec<WorkerOutcome> {
    let timed = |owner: usize, rows: Range<usize>, acc: &mut [AccRow]| {
        let start = std::time::Instant::now();
        let mut out = run_worker(ctx, owner, rows, acc);
        out.busy_secs = start.elapsed().as_secs_f64();
        out
    };
    if slices.len() == 1 {
        return slices
            .into_iter()
            .map(|(owner, rows, acc)| timed(owner, rows, acc))
            .collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = slices
            .into_iter()
            .map(|(owner, rows, acc)| scope.spawn(move || timed(owner, rows, acc)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("local multiplication worker panicked"))
            .collect()
    })
}

#[cfg(not(feature = "std"))]
fn run_workers(ctx: &WorkerContext<'_>, slices: Vec<(usize, Range<usize>, &mut [AccRow])>) -> Vec<WorkerOutcome> {
    slices
        .into_iter()
        .map(|(owner, rows, acc)| run_worker(ctx, owner, rows, acc))
        .collect()
}

/// Processes the block rows `rows`; `acc` holds exactly those C rows.
fn run_worker(ctx: &WorkerContext<'_>, owner: usize, rows: Range<usize>, acc: &mut [AccRow]) -> WorkerOutcome {
    let mut out = WorkerOutcome::default();
    let (a, b) = (ctx.a, ctx.b);
    if rows.is_empty() || b.block_cols() == 0 {
        return out;
    }
    let base = rows.start;
    let (a_rows, a_cols, b_cols) = (a.layout().rows(), a.layout().cols(), b.layout().cols());
    let tiles = plan_traversal(rows, 0..b.block_cols(), ctx.opts.cutoff).expect("ranges are non-empty");
    let eps = ctx.opts.eps;
    let mut pending: BTreeMap<KernelKey, Vec<BatchEntry>> = BTreeMap::new();

    for tile in tiles {
        for i in tile.rows.clone() {
            let m = a_rows.size(i);
            for ai in a.row_range(i) {
                let inner = a.col_idx()[ai];
                let a_norm = a.norms()[ai];
                let k = a_cols.size(inner);
                let b_range = b.row_range(inner);
                let b_cols_of_row = &b.col_idx()[b_range.clone()];
                let first = b_range.start + b_cols_of_row.partition_point(|&c| c < tile.cols.start);
                for bi in first..b_range.end {
                    let j = b.col_idx()[bi];
                    if j >= tile.cols.end {
                        break;
                    }
                    let executed = a_norm * b.norms()[bi] > eps;
                    if ctx.opts.record_log {
                        out.log.push(TripleRecord {
                            row: i,
                            col: j,
                            inner,
                            executed,
                        });
                    }
                    if !executed {
                        out.skipped += 1;
                        continue;
                    }
                    let key = KernelKey {
                        m,
                        n: b_cols.size(j),
                        k,
                    };
                    pending.entry(key).or_default().push(BatchEntry {
                        a_block: ai,
                        b_block: bi,
                        c_row: i,
                        c_col: j,
                        key,
                    });
                }
            }
        }
        for (&key, entries) in pending.iter_mut() {
            for chunk in entries.chunks(ctx.opts.batch_capacity) {
                let batch = Batch {
                    key,
                    entries: chunk,
                    owner,
                };
                execute_batch(ctx, &batch, base, acc, &mut out);
            }
            entries.clear();
        }
    }
    out
}

fn execute_batch(ctx: &WorkerContext<'_>, batch: &Batch<'_>, base: usize, acc: &mut [AccRow], out: &mut WorkerOutcome) {
    let kernel = ctx.table.dispatch(batch.key);
    let c_len = batch.key.c_len();
    for e in batch.entries {
        debug_assert!(
            e.c_row >= base && e.c_row - base < acc.len(),
            "worker {} wrote C row {} outside its rows",
            batch.owner,
            e.c_row
        );
        let c = acc[e.c_row - base]
            .entry(e.c_col)
            .or_insert_with(|| vec![0.0; c_len]);
        kernel.call_unchecked(ctx.a.block(e.a_block), ctx.b.block(e.b_block), c);
    }
    let n = batch.entries.len() as u64;
    out.executed += n;
    out.flops += n * batch.key.flops();
    out.batches += 1;
    if kernel.is_specialized() {
        out.specialized_batches += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csr::BlockEntry;

    fn diag(sizes: &[usize], scale: f64) -> BlockCsr {
        let layout = BlockLayout::square(sizes.to_vec()).unwrap();
        let entries = sizes.iter().enumerate().map(|(i, &s)| {
            let mut v = vec![0.0; s * s];
            for d in 0..s {
                v[d + d * s] = scale;
            }
            BlockEntry::new(i, i, v)
        });
        BlockCsr::build_from_triplets(layout, entries).unwrap()
    }

    #[test]
    fn identity_times_b_is_b() {
        let sizes = [2, 3, 1];
        let id = diag(&sizes, 1.0);
        let layout = BlockLayout::square(sizes.to_vec()).unwrap();
        let b = BlockCsr::build_from_triplets(
            layout,
            [
                BlockEntry::new(0, 1, (0..6).map(|v| v as f64 + 0.5).collect()),
                BlockEntry::new(2, 0, vec![-1.0, 3.0]),
                BlockEntry::new(1, 1, (0..9).map(|v| 1.0 / (v as f64 + 1.0)).collect()),
            ],
        )
        .unwrap();
        let (c, stats) = multiply_local(&id, &b, &MultiplyOptions::default()).unwrap();
        assert_eq!(c, b);
        assert_eq!(stats.executed, 3);
        assert_eq!(stats.skipped, 0);
        c.validate().unwrap();
    }

    #[test]
    fn product_below_threshold_is_skipped() {
        let layout = BlockLayout::square(vec![1]).unwrap();
        let a = BlockCsr::build_from_triplets(layout.clone(), [BlockEntry::new(0, 0, vec![0.1])]).unwrap();
        let b = BlockCsr::build_from_triplets(layout, [BlockEntry::new(0, 0, vec![0.05])]).unwrap();
        let (c, stats) = multiply_local(&a, &b, &MultiplyOptions::default().with_eps(0.01)).unwrap();
        assert_eq!(c.n_blocks(), 0);
        assert_eq!(stats.executed, 0);
        assert_eq!(stats.skipped, 1);
        assert_eq!(count_flops(&stats), 0);
    }

    #[test]
    fn single_666_entry_flops() {
        let a = diag(&[6], 1.0);
        let (_, stats) = multiply_local(&a, &a, &MultiplyOptions::default()).unwrap();
        assert_eq!(count_flops(&stats), 432);
        assert_eq!(stats.batches, 1);
        assert_eq!(stats.specialized_batches, 1);
    }

    #[test]
    fn no_entries_no_flops() {
        let layout = BlockLayout::square(vec![3, 3]).unwrap();
        let e = BlockCsr::empty(layout);
        let (c, stats) = multiply_local(&e, &e, &MultiplyOptions::default().with_workers(3)).unwrap();
        assert_eq!(c.n_blocks(), 0);
        assert_eq!(count_flops(&stats), 0);
        assert_eq!(stats.worker_flops, vec![0, 0, 0]);
        assert_eq!(stats.flop_imbalance, 0.0);
    }

    #[test]
    fn parameter_errors() {
        let a = diag(&[2, 2], 1.0);
        let b = diag(&[2, 3], 1.0);
        assert!(matches!(
            multiply_local(&a, &b, &MultiplyOptions::default()),
            Err(Error::LayoutMismatch(_))
        ));
        for opts in [
            MultiplyOptions::default().with_eps(-1.0),
            MultiplyOptions::default().with_workers(0),
            MultiplyOptions::default().with_batch_capacity(0),
        ] {
            assert!(matches!(multiply_local(&a, &a, &opts), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn oversized_blocks_rejected() {
        let a = diag(&[129], 1.0);
        assert!(matches!(
            multiply_local(&a, &a, &MultiplyOptions::default()),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn empty_grid_dimensions() {
        let a = BlockCsr::empty(BlockLayout::from_sizes(vec![], vec![2]).unwrap());
        let b = BlockCsr::empty(BlockLayout::from_sizes(vec![2], vec![]).unwrap());
        let (c, _) = multiply_local(&a, &b, &MultiplyOptions::default().with_workers(2)).unwrap();
        assert_eq!(c.block_rows(), 0);
        assert_eq!(c.block_cols(), 0);
    }

    #[test]
    fn absorb_sums_workers() {
        let mut s = LocalMmStats {
            worker_flops: vec![1, 2],
            worker_busy_secs: vec![1.0, 1.0],
            ..Default::default()
        };
        s.absorb(&LocalMmStats {
            flops: 7,
            worker_flops: vec![3, 0],
            worker_busy_secs: vec![1.0, 3.0],
            ..Default::default()
        });
        assert_eq!(s.flops, 7);
        assert_eq!(s.worker_flops, vec![4, 2]);
        assert_eq!(s.worker_busy_secs, vec![2.0, 4.0]);
        assert!((s.imbalance - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.flop_imbalance - 1.0 / 3.0).abs() < 1e-15);
    }
}
