//! Deterministic generators for benchmark-shaped block-sparse matrices.
//!
//! Preset matrices are square. A diagonal band of blocks is always stored and
//! the remaining positions are filled independently with the probability that
//! makes the expected occupancy equal the preset target. Block norms decay as
//! `exp(-decay * |i - j|)` with a small random jitter, then every block row is
//! rescaled so that the squared block norms of row `i` sum to the row's block
//! height. With that normalization a product `A * B` keeps the row energy of
//! `A` in expectation, so long multiplication chains neither blow up nor
//! vanish.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csr::{frobenius_norm, BlockCsr, BlockCsrBuilder};
use crate::error::{Error, Result};
use crate::layout::{BlockAxis, BlockLayout};

/// Norm structure of generated blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel {
    /// Half-width, in blocks, of the always-stored diagonal band.
    pub band_half_width: usize,
    /// Norm decay rate per block of distance from the diagonal.
    pub decay: f64,
}

/// Recipe for a family of benchmark matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchPreset {
    pub name: &'static str,
    /// Allowed block sizes, in elements.
    pub block_sizes: Vec<usize>,
    /// Block rows (and columns) at full scale.
    pub block_rows: usize,
    /// Target fraction of stored block positions.
    pub occupancy: f64,
    /// Multiplications in one benchmark chain.
    pub chain: usize,
    /// Fraction of block rows taking `block_sizes[0]`; the rest take
    /// `block_sizes[1]`. Ignored for single-size presets.
    pub size_mix: f64,
    pub values: ValueModel,
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = ["s-e", "h2o-dft-ls", "amorph", "dense"];

impl BenchPreset {
    /// Semi-empirical water system: 6x6 blocks, very sparse.
    pub fn s_e() -> Self {
        Self {
            name: "s-e",
            block_sizes: vec![6],
            block_rows: 1_119_744 / 6,
            occupancy: 5e-4,
            chain: 618,
            size_mix: 1.0,
            values: ValueModel {
                band_half_width: 2,
                decay: 1.0,
            },
        }
    }

    /// Linear-scaling DFT water system: 23x23 blocks, medium sparsity.
    pub fn h2o_dft_ls() -> Self {
        Self {
            name: "h2o-dft-ls",
            block_sizes: vec![23],
            block_rows: 158_976 / 23,
            occupancy: 0.10,
            chain: 193,
            size_mix: 1.0,
            values: ValueModel {
                band_half_width: 8,
                decay: 0.35,
            },
        }
    }

    /// Amorphous system: mixed 5 and 13 blocks, low sparsity. The full-scale
    /// mix of 7848 five-blocks and 7844 thirteen-blocks spans 141,212 rows.
    pub fn amorph() -> Self {
        Self {
            name: "amorph",
            block_sizes: vec![5, 13],
            block_rows: 7848 + 7844,
            occupancy: 0.55,
            chain: 187,
            size_mix: 7848.0 / 15692.0,
            values: ValueModel {
                band_half_width: 16,
                decay: 0.15,
            },
        }
    }

    /// Synthetic fully occupied matrix of 23x23 blocks.
    pub fn dense() -> Self {
        Self {
            name: "dense",
            block_sizes: vec![23],
            block_rows: 64,
            occupancy: 1.0,
            chain: 4,
            size_mix: 1.0,
            values: ValueModel {
                band_half_width: 4,
                decay: 0.05,
            },
        }
    }

    /// Block rows after scaling.
    pub fn scaled_block_rows(&self, scale: f64) -> Result<usize> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::param(format!("scale must lie in (0, 1], got {scale}")));
        }
        let n = libm::round(self.block_rows as f64 * scale) as usize;
        if n < 4 {
            return Err(Error::param(format!(
                "preset {} at scale {scale} has {n} block rows, at least 4 are needed",
                self.name
            )));
        }
        Ok(n)
    }

    fn check(&self) -> Result<()> {
        if !(self.occupancy > 0.0 && self.occupancy <= 1.0) {
            return Err(Error::param(format!("occupancy {} outside (0, 1]", self.occupancy)));
        }
        if self.block_sizes.is_empty() || self.block_sizes.len() > 2 || self.block_sizes.contains(&0) {
            return Err(Error::param("a preset declares one or two positive block sizes"));
        }
        if self.chain == 0 {
            return Err(Error::param("chain length must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.size_mix) {
            return Err(Error::param("size mix must lie in [0, 1]"));
        }
        if self.values.decay.is_nan() || self.values.decay < 0.0 {
            return Err(Error::param("norm decay must be >= 0"));
        }
        Ok(())
    }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<BenchPreset> {
    match name {
        "s-e" => Ok(BenchPreset::s_e()),
        "h2o-dft-ls" => Ok(BenchPreset::h2o_dft_ls()),
        "amorph" => Ok(BenchPreset::amorph()),
        "dense" => Ok(BenchPreset::dense()),
        other => Err(Error::param(format!(
            "unknown preset {other:?}, expected one of {PRESET_NAMES:?}"
        ))),
    }
}

/// Stored blocks over block positions; 0 for an empty grid.
pub fn occupancy(m: &BlockCsr) -> f64 {
    let positions = m.block_rows() as f64 * m.block_cols() as f64;
    if positions == 0.0 {
        0.0
    } else {
        m.n_blocks() as f64 / positions
    }
}

/// Generates the preset matrix at `scale`; deterministic per
/// `(preset, scale, seed)`.
pub fn generate(preset: &BenchPreset, scale: f64, seed: u64) -> Result<BlockCsr> {
    preset.check()?;
    let n = preset.scaled_block_rows(scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let sizes = block_sizes(preset, n);
    let layout = BlockLayout::square(sizes.clone())?;

    let target = preset.occupancy * (n as f64) * (n as f64);
    let max_width = if preset.occupancy * n as f64 >= 1.0 {
        libm::floor((preset.occupancy * n as f64 - 1.0) / 2.0) as usize
    } else {
        0
    };
    let w = preset.values.band_half_width.min(max_width).min(n - 1);
    let band_count: usize = (0..n).map(|i| band(i, w, n).len()).sum();
    let off_band = n * n - band_count;
    let p = if off_band == 0 {
        0.0
    } else {
        ((target - band_count as f64) / off_band as f64).clamp(0.0, 1.0)
    };

    let expected_blocks = libm::ceil(target) as usize + band_count;
    let avg = sizes.iter().sum::<usize>() as f64 / n as f64;
    let mut builder = BlockCsrBuilder::with_capacity(
        layout,
        expected_blocks,
        (expected_blocks as f64 * avg * avg) as usize,
    );
    let mut cols: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for i in 0..n {
        cols.clear();
        let in_band = band(i, w, n);
        sample_positions(&mut rng, 0, in_band.start, p, &mut cols);
        cols.extend(in_band.clone());
        sample_positions(&mut rng, in_band.end, n, p, &mut cols);

        weights.clear();
        for &j in &cols {
            let distance = i.abs_diff(j) as f64;
            let jitter = 0.75 + 0.5 * rng.random::<f64>();
            weights.push(libm::exp(-preset.values.decay * distance) * jitter);
        }
        let energy: f64 = weights.iter().map(|t| t * t).sum();
        let row_scale = if energy > 0.0 {
            libm::sqrt(sizes[i] as f64 / energy)
        } else {
            0.0
        };
        for (&j, &t) in cols.iter().zip(&weights) {
            values.clear();
            random_block(&mut rng, sizes[i] * sizes[j], &mut values);
            let scale_to = row_scale * t / frobenius_norm(&values);
            values.iter_mut().for_each(|v| *v *= scale_to);
            builder.push(i, j, &values)?;
        }
    }
    Ok(builder.finish())
}

/// Uniform-random block-sparse matrix: every position is stored with
/// probability `occupancy`, block sizes are drawn from `size_choices`, values
/// are uniform in `[-1, 1]`.
pub fn random_uniform(
    block_rows: usize,
    block_cols: usize,
    size_choices: &[usize],
    occupancy: f64,
    seed: u64,
) -> Result<BlockCsr> {
    if !(occupancy > 0.0 && occupancy <= 1.0) {
        return Err(Error::param(format!("occupancy {occupancy} outside (0, 1]")));
    }
    if size_choices.is_empty() {
        return Err(Error::param("at least one block size is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw_axis = |count: usize| -> Result<BlockAxis> {
        BlockAxis::new(
            (0..count)
                .map(|_| size_choices[rng.random_range(0..size_choices.len())])
                .collect(),
        )
    };
    let rows = draw_axis(block_rows)?;
    let cols = draw_axis(block_cols)?;
    fill_random(BlockLayout::new(rows, cols), occupancy, &mut rng)
}

/// Like [`random_uniform`], on a caller-supplied layout.
pub fn random_with_layout(layout: BlockLayout, occupancy: f64, seed: u64) -> Result<BlockCsr> {
    if !(occupancy > 0.0 && occupancy <= 1.0) {
        return Err(Error::param(format!("occupancy {occupancy} outside (0, 1]")));
    }
    fill_random(layout, occupancy, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn fill_random(layout: BlockLayout, occupancy: f64, rng: &mut ChaCha8Rng) -> Result<BlockCsr> {
    let mut builder = BlockCsrBuilder::new(layout.clone());
    let mut values = Vec::new();
    for i in 0..layout.block_rows() {
        for j in 0..layout.block_cols() {
            if occupancy < 1.0 && rng.random::<f64>() >= occupancy {
                continue;
            }
            values.clear();
            values.extend((0..layout.block_len(i, j)).map(|_| rng.random_range(-1.0..=1.0)));
            builder.push(i, j, &values)?;
        }
    }
    Ok(builder.finish())
}

fn band(i: usize, w: usize, n: usize) -> core::ops::Range<usize> {
    i.saturating_sub(w)..(i + w + 1).min(n)
}

/// Seed of the block-size shuffle. The layout depends on preset and scale
/// only, so matrices generated with different seeds can be multiplied.
const LAYOUT_SEED: u64 = 0x6c61_796f_7574;

fn block_sizes(preset: &BenchPreset, n: usize) -> Vec<usize> {
    if preset.block_sizes.len() == 1 {
        return vec![preset.block_sizes[0]; n];
    }
    let first = libm::round(n as f64 * preset.size_mix) as usize;
    let mut sizes = vec![preset.block_sizes[1]; n];
    sizes[..first].fill(preset.block_sizes[0]);
    sizes.shuffle(&mut ChaCha8Rng::seed_from_u64(LAYOUT_SEED));
    sizes
}

/// Appends the positions of `lo..hi` selected with probability `p`, using
/// geometric gaps so the cost scales with the number selected.
fn sample_positions(rng: &mut ChaCha8Rng, lo: usize, hi: usize, p: f64, out: &mut Vec<usize>) {
    if p <= 0.0 || lo >= hi {
        return;
    }
    if p >= 1.0 {
        out.extend(lo..hi);
        return;
    }
    let log_q = libm::log1p(-p);
    let mut pos = lo;
    loop {
        let u = 1.0 - rng.random::<f64>();
        let gap = libm::floor(libm::log(u) / log_q);
        if gap >= (hi - pos) as f64 {
            return;
        }
        pos += gap as usize;
        out.push(pos);
        pos += 1;
        if pos >= hi {
            return;
        }
    }
}

fn random_block(rng: &mut ChaCha8Rng, len: usize, out: &mut Vec<f64>) {
    loop {
        out.extend((0..len).map(|_| rng.random_range(-1.0..=1.0)));
        if out.iter().any(|&v| v != 0.0) {
            return;
        }
        out.clear();
    }
}
