//! Cannon multiplication with stationary C.
//!
//! Rank `(r, c)` first obtains A panel `(r, r + c)` and B panel `(r + c, c)`,
//! then runs `q` steps. Each step posts the current panels to the left and
//! upper neighbours, multiplies them into the resident C shard, and waits for
//! the panels arriving from the right and below. Panels travel as BSM1 bodies.

use std::time::{Duration, Instant};

use bsmm_core::{bsm, BlockCsr, BlockLayout, KernelTable, LocalMmStats, MultiplyOptions};
use bsmm_core::local::{multiply_into, ProductAccumulator};

use crate::dist::{DistMatrix, Shard};
use crate::error::{Error, Result};
use crate::grid::ProcessGrid;
use crate::transport::{channel_fabric, ChannelEndpoint, LinkModel, Transport};

#[derive(Debug, Clone, Default)]
pub struct CannonOptions {
    pub multiply: MultiplyOptions,
    pub link: LinkModel,
}

impl CannonOptions {
    pub fn new(multiply: MultiplyOptions, link: LinkModel) -> Self {
        Self { multiply, link }
    }
}

/// Per-rank traffic and time breakdown of one distributed multiplication.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommStats {
    pub rank: usize,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Blocked inside `waitall`.
    pub waitall_secs: f64,
    /// Running local multiplications.
    pub batch_secs: f64,
    /// Everything else: serialization, posting, bookkeeping.
    pub other_secs: f64,
    pub total_secs: f64,
    pub local: LocalMmStats,
}

impl CommStats {
    /// Adds counters and times of another run on the same rank.
    pub fn absorb(&mut self, other: &CommStats) {
        self.bytes_sent += other.bytes_sent;
        self.bytes_received += other.bytes_received;
        self.waitall_secs += other.waitall_secs;
        self.batch_secs += other.batch_secs;
        self.other_secs += other.other_secs;
        self.total_secs += other.total_secs;
        self.local.absorb(&other.local);
    }

    fn pct(&self, part: f64) -> f64 {
        if self.total_secs > 0.0 {
            100.0 * part / self.total_secs
        } else {
            0.0
        }
    }

    pub fn waitall_pct(&self) -> f64 {
        self.pct(self.waitall_secs)
    }

    pub fn batch_pct(&self) -> f64 {
        self.pct(self.batch_secs)
    }

    pub fn other_pct(&self) -> f64 {
        self.pct(self.other_secs)
    }
}

/// Splits a rank's wall time into waitall, batch and the remainder.
struct PhaseClock {
    start: Instant,
    waitall: Duration,
    batch: Duration,
}

impl PhaseClock {
    fn start() -> Self {
        Self {
            start: Instant::now(),
            waitall: Duration::ZERO,
            batch: Duration::ZERO,
        }
    }

    fn finish(self, stats: &mut CommStats) {
        stats.total_secs = self.start.elapsed().as_secs_f64();
        stats.waitall_secs = self.waitall.as_secs_f64();
        stats.batch_secs = self.batch.as_secs_f64();
        // derived, so the three parts add up to the total
        stats.other_secs = (stats.total_secs - stats.waitall_secs - stats.batch_secs).max(0.0);
    }
}

/// A panel both decoded and in wire form, so received panels are forwarded
/// without re-encoding.
struct Panel {
    matrix: BlockCsr,
    wire: Vec<u8>,
}

impl Panel {
    fn from_matrix(matrix: BlockCsr) -> Result<Self> {
        let wire = bsm::encode_body(&matrix)?;
        Ok(Self { matrix, wire })
    }

    fn from_wire(wire: Vec<u8>) -> Result<Self> {
        let matrix = bsm::decode_body(&wire)
            .map_err(|e| Error::Integrity(format!("received panel does not decode: {e}")))?;
        Ok(Self { matrix, wire })
    }
}

const TAG_ALIGN_A: u64 = 0;
const TAG_ALIGN_B: u64 = 1;

fn shift_tags(step: usize) -> (u64, u64) {
    let base = 2 + 2 * step as u64;
    (base, base + 1)
}

struct RankContext<'a> {
    grid: ProcessGrid,
    a: &'a DistMatrix,
    b: &'a DistMatrix,
    opts: &'a MultiplyOptions,
    table: &'a KernelTable,
    c_layout: &'a BlockLayout,
}

/// `C = A * B` on the grid shared by `a` and `b`.
///
/// `a`'s column permutation must equal `b`'s row permutation. C carries
/// `a`'s row and `b`'s column permutation.
pub fn cannon_multiply(a: &DistMatrix, b: &DistMatrix, opts: &CannonOptions) -> Result<(DistMatrix, Vec<CommStats>)> {
    if a.grid() != b.grid() {
        return Err(Error::param(format!(
            "operands live on different grids ({0}x{0} and {1}x{1})",
            a.grid().side(),
            b.grid().side()
        )));
    }
    if a.layout().cols() != b.layout().rows() {
        return Err(bsmm_core::Error::LayoutMismatch(format!(
            "A has {} block columns, B has {} block rows",
            a.layout().block_cols(),
            b.layout().block_rows()
        ))
        .into());
    }
    if a.col_perm() != b.row_perm() {
        return Err(Error::param(
            "A's column permutation differs from B's row permutation; distribute both with the same seed",
        ));
    }
    opts.multiply.check()?;
    let grid = a.grid();
    let c_layout = BlockLayout::new(a.layout().rows().clone(), b.layout().cols().clone());
    let table = KernelTable::default();
    let ctx = RankContext {
        grid,
        a,
        b,
        opts: &opts.multiply,
        table: &table,
        c_layout: &c_layout,
    };

    let endpoints = channel_fabric(grid.ranks(), opts.link);
    let outcomes: Vec<Result<(Shard, CommStats)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|mut ep| {
                let ctx = &ctx;
                scope.spawn(move || run_rank(&mut ep, ctx))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Integrity("rank thread panicked".into()))))
            .collect()
    });

    let mut shards = Vec::with_capacity(grid.ranks());
    let mut stats = Vec::with_capacity(grid.ranks());
    for outcome in outcomes {
        let (shard, s) = outcome?;
        shards.push(shard);
        stats.push(s);
    }
    let c = DistMatrix::from_shards(grid, a.row_perm().clone(), b.col_perm().clone(), c_layout, shards)?;
    Ok((c, stats))
}

fn run_rank(ep: &mut ChannelEndpoint, ctx: &RankContext<'_>) -> Result<(Shard, CommStats)> {
    let mut clock = PhaseClock::start();
    let rank = ep.rank();
    let grid = ctx.grid;
    let q = grid.side();
    let (r, c) = grid.coords(rank);
    let mut stats = CommStats {
        rank,
        ..CommStats::default()
    };

    let mut a_panel = Panel::from_matrix(ctx.a.shard(rank).local.clone())?;
    let mut b_panel = Panel::from_matrix(ctx.b.shard(rank).local.clone())?;

    // alignment: A moves r columns left, B moves c rows up
    let mut handles = Vec::with_capacity(4);
    let a_shift = r % q != 0;
    let b_shift = c % q != 0;
    if a_shift {
        let dest = grid.rank_of(r, (c + q - r % q) % q);
        stats.bytes_sent += a_panel.wire.len() as u64;
        handles.push(ep.isend(dest, TAG_ALIGN_A, a_panel.wire.clone())?);
        handles.push(ep.irecv(grid.rank_of(r, (c + r) % q), TAG_ALIGN_A)?);
    }
    if b_shift {
        let dest = grid.rank_of((r + q - c % q) % q, c);
        stats.bytes_sent += b_panel.wire.len() as u64;
        handles.push(ep.isend(dest, TAG_ALIGN_B, b_panel.wire.clone())?);
        handles.push(ep.irecv(grid.rank_of((r + c) % q, c), TAG_ALIGN_B)?);
    }
    let done = ep.waitall(&handles)?;
    clock.waitall += done.elapsed;
    stats.bytes_received += done.bytes_received as u64;
    let mut received = done.payloads.into_iter().flatten();
    if a_shift {
        a_panel = Panel::from_wire(received.next().expect("alignment A payload"))?;
    }
    if b_shift {
        b_panel = Panel::from_wire(received.next().expect("alignment B payload"))?;
    }

    let mut acc = ProductAccumulator::new(BlockLayout::new(
        ctx.c_layout.rows().select(&ctx.a.shard(rank).row_map),
        ctx.c_layout.cols().select(&ctx.b.shard(rank).col_map),
    ));
    let left = grid.rank_of(r, (c + q - 1) % q);
    let right = grid.rank_of(r, (c + 1) % q);
    let up = grid.rank_of((r + q - 1) % q, c);
    let down = grid.rank_of((r + 1) % q, c);

    for step in 0..q {
        let last = step + 1 == q;
        let mut handles = Vec::with_capacity(4);
        if !last {
            let (tag_a, tag_b) = shift_tags(step);
            stats.bytes_sent += (a_panel.wire.len() + b_panel.wire.len()) as u64;
            handles.push(ep.isend(left, tag_a, a_panel.wire.clone())?);
            handles.push(ep.isend(up, tag_b, b_panel.wire.clone())?);
            handles.push(ep.irecv(right, tag_a)?);
            handles.push(ep.irecv(down, tag_b)?);
        }

        let t = Instant::now();
        let local = multiply_into(&a_panel.matrix, &b_panel.matrix, &mut acc, ctx.opts, ctx.table)?;
        clock.batch += t.elapsed();
        stats.local.absorb(&local);

        if !last {
            let done = ep.waitall(&handles)?;
            clock.waitall += done.elapsed;
            stats.bytes_received += done.bytes_received as u64;
            let mut received = done.payloads.into_iter().flatten();
            a_panel = Panel::from_wire(received.next().expect("shifted A payload"))?;
            b_panel = Panel::from_wire(received.next().expect("shifted B payload"))?;
        }
    }

    let shard = Shard {
        rank,
        row_map: ctx.a.shard(rank).row_map.clone(),
        col_map: ctx.b.shard(rank).col_map.clone(),
        local: acc.finish(),
    };
    clock.finish(&mut stats);
    Ok((shard, stats))
}
