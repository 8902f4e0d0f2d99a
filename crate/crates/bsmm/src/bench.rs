//! Multiplication chains over preset matrices.

use std::time::Instant;

use bsmm_core::gen;
use bsmm_core::MultiplyOptions;

use crate::cannon::{cannon_multiply, CannonOptions, CommStats};
use crate::dist::{distribute, DistMatrix};
use crate::error::{Error, Result};
use crate::grid::ProcessGrid;
use crate::report::{BenchReport, CommReport, RunConfig, RunReport};
use crate::transport::LinkModel;

/// Outcome of `C1 = A B`, `Ct = filter(Ct-1) B`.
#[derive(Debug, Clone)]
pub struct ChainRun {
    /// Filtered product after the last step.
    pub c: DistMatrix,
    /// Per-rank statistics summed over steps.
    pub stats: Vec<CommStats>,
    pub step_flops: Vec<u64>,
    pub occupancy: Vec<f64>,
    /// Wall time inside the multiplications.
    pub elapsed_secs: f64,
}

/// Runs `steps` multiplications, filtering C with the multiply eps after each.
pub fn run_chain(a: &DistMatrix, b: &DistMatrix, steps: usize, opts: &CannonOptions) -> Result<ChainRun> {
    if steps == 0 {
        return Err(Error::param("chain length must be at least 1"));
    }
    let eps = opts.multiply.eps;
    let mut stats: Vec<CommStats> = (0..a.grid().ranks())
        .map(|rank| CommStats {
            rank,
            ..CommStats::default()
        })
        .collect();
    let mut step_flops = Vec::with_capacity(steps);
    let mut occupancy = Vec::with_capacity(steps);
    let mut elapsed_secs = 0.0;
    let mut c: Option<DistMatrix> = None;
    for step in 0..steps {
        let left = c.as_ref().unwrap_or(a);
        let t = Instant::now();
        let (product, step_stats) = cannon_multiply(left, b, opts)?;
        elapsed_secs += t.elapsed().as_secs_f64();
        let product = product.filter_blocks(eps)?;
        step_flops.push(step_stats.iter().map(|s| s.local.flops).sum());
        occupancy.push(product.occupancy());
        for (total, s) in stats.iter_mut().zip(&step_stats) {
            total.absorb(s);
        }
        log::debug!(
            "step {}: {} blocks, occupancy {:.4e}",
            step + 1,
            product.n_blocks(),
            product.occupancy()
        );
        c = Some(product);
    }
    Ok(ChainRun {
        c: c.expect("at least one step ran"),
        stats,
        step_flops,
        occupancy,
        elapsed_secs,
    })
}

/// A single multiplication packaged like a one-step chain, without the
/// trailing filter, so C is exactly what the engine produced.
pub fn multiply_once(a: &DistMatrix, b: &DistMatrix, opts: &CannonOptions) -> Result<ChainRun> {
    let t = Instant::now();
    let (c, stats) = cannon_multiply(a, b, opts)?;
    let elapsed_secs = t.elapsed().as_secs_f64();
    Ok(ChainRun {
        step_flops: vec![stats.iter().map(|s| s.local.flops).sum()],
        occupancy: vec![c.occupancy()],
        c,
        stats,
        elapsed_secs,
    })
}

impl ChainRun {
    pub fn report(&self) -> RunReport {
        let flops: u64 = self.step_flops.iter().sum();
        let n = self.stats.len().max(1) as f64;
        RunReport {
            time_to_solution_s: self.elapsed_secs,
            flops,
            gflops: if self.elapsed_secs > 0.0 {
                flops as f64 / self.elapsed_secs / 1e9
            } else {
                0.0
            },
            worker_imbalance_pct: 100.0 * self.stats.iter().map(|s| s.local.imbalance).sum::<f64>() / n,
            worker_flop_imbalance_pct: 100.0 * self.stats.iter().map(|s| s.local.flop_imbalance).sum::<f64>() / n,
            step_flops: self.step_flops.clone(),
            occupancy: self.occupancy.clone(),
            comm: CommReport::new(&self.stats),
        }
    }
}

/// Settings of a preset benchmark.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub preset: String,
    pub scale: f64,
    pub seed: u64,
    pub ranks: usize,
    pub reps: usize,
    /// Overrides the preset's chain length.
    pub chain: Option<usize>,
    pub multiply: MultiplyOptions,
    pub link: LinkModel,
}

impl BenchConfig {
    pub fn new(preset: &str, scale: f64) -> Self {
        Self {
            preset: preset.to_string(),
            scale,
            seed: 0,
            ranks: 1,
            reps: 4,
            chain: None,
            multiply: MultiplyOptions::default(),
            link: LinkModel::default(),
        }
    }
}

pub fn link_echo(link: &LinkModel) -> (f64, Option<f64>) {
    let bw = link.bytes_per_sec;
    (
        link.latency.as_secs_f64() * 1e6,
        if bw.is_finite() { Some(bw / 1e9) } else { None },
    )
}

/// Generates A (seed) and B (seed + 1) from the preset, distributes both with
/// `seed` and runs the chain `reps` times.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.reps == 0 {
        return Err(Error::param("reps must be at least 1"));
    }
    let preset = gen::preset(&cfg.preset)?;
    let steps = cfg.chain.unwrap_or(preset.chain);
    if steps == 0 {
        return Err(Error::param("chain length must be at least 1"));
    }
    cfg.multiply.check()?;
    let grid = ProcessGrid::from_ranks(cfg.ranks)?;
    let a = gen::generate(&preset, cfg.scale, cfg.seed)?;
    let b = gen::generate(&preset, cfg.scale, cfg.seed.wrapping_add(1))?;
    let da = distribute(&a, grid, cfg.seed)?;
    let db = distribute(&b, grid, cfg.seed)?;
    let opts = CannonOptions::new(cfg.multiply.clone(), cfg.link);

    let mut runs = Vec::with_capacity(cfg.reps);
    for rep in 0..cfg.reps {
        let run = run_chain(&da, &db, steps, &opts)?;
        log::info!(
            "{} rep {}: {:.3} s, {} flops",
            cfg.preset,
            rep + 1,
            run.elapsed_secs,
            run.step_flops.iter().sum::<u64>()
        );
        runs.push(run.report());
    }
    let (latency_us, bandwidth_gbs) = link_echo(&cfg.link);
    let config = RunConfig {
        preset: Some(cfg.preset.clone()),
        inputs: vec![],
        scale: Some(cfg.scale),
        seed: cfg.seed,
        eps: cfg.multiply.eps,
        ranks: cfg.ranks,
        workers: cfg.multiply.workers,
        batch_capacity: cfg.multiply.batch_capacity,
        reps: cfg.reps,
        chain: steps,
        latency_us,
        bandwidth_gbs,
    };
    BenchReport::new(config, runs)
}
