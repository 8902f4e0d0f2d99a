//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Duration;

use bsmm_core::gen;
use bsmm_core::local::DEFAULT_BATCH_CAPACITY;
use bsmm_core::MultiplyOptions;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{bench, link_echo, multiply_once, BenchConfig};
use crate::cannon::CannonOptions;
use crate::dist::distribute;
use crate::error::{Error, Result};
use crate::grid::ProcessGrid;
use crate::io::{read_bsm, write_bsm, write_csv, write_json};
use crate::microbench::{microbench, square_keys};
use crate::report::{BenchReport, RunConfig};
use crate::transport::LinkModel;

#[derive(Debug, Parser)]
#[command(name = "bsmm", version, about = "Block-sparse matrix multiplication harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a preset matrix as a BSM1 file.
    Gen(GenArgs),
    /// Multiply two BSM1 files on a simulated process grid.
    Multiply(MultiplyArgs),
    /// Run a preset multiplication chain and report timings.
    Bench(BenchArgs),
    /// Measure small-kernel throughput.
    Kernels(KernelArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Simulated ranks; must be a perfect square.
    #[arg(long, default_value_t = 1)]
    pub ranks: usize,
    /// Threads per rank.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_CAPACITY)]
    pub batch_capacity: usize,
    /// Per-message latency of the simulated network.
    #[arg(long, default_value_t = 5.0)]
    pub latency_us: f64,
    /// Per-rank bandwidth of the simulated network; `inf` for unlimited.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_gbs: f64,
}

impl EngineArgs {
    fn multiply_options(&self) -> MultiplyOptions {
        MultiplyOptions::default()
            .with_eps(self.eps)
            .with_workers(self.workers)
            .with_batch_capacity(self.batch_capacity)
    }

    fn link(&self) -> Result<LinkModel> {
        if !(self.latency_us >= 0.0 && self.latency_us.is_finite()) {
            return Err(Error::param("latency must be a finite non-negative number"));
        }
        if self.bandwidth_gbs.is_nan() || self.bandwidth_gbs <= 0.0 {
            return Err(Error::param("bandwidth must be positive"));
        }
        Ok(LinkModel {
            latency: Duration::from_secs_f64(self.latency_us * 1e-6),
            bytes_per_sec: self.bandwidth_gbs * 1e9,
        })
    }
}

#[derive(Debug, Args)]
pub struct MultiplyArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Seed of the distribution permutations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write C.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Where to write the JSON report; printed to stdout otherwise.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = 0.01)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 4)]
    pub reps: usize,
    /// Chain length; the preset's own length by default.
    #[arg(long)]
    pub chain: Option<usize>,
    /// CSV of per-repetition rows; the trajectory goes next to it.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Square kernel sizes as `start:end:step`.
    #[arg(long, default_value = "4:32:4")]
    pub sizes: String,
    /// Bytes of operand pairs streamed per key, e.g. `256MiB`.
    #[arg(long, default_value = "256MiB")]
    pub working_set: String,
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    /// CSV with one row per key.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses `start:end:step`.
pub fn parse_sizes(text: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::param(format!("size range {text:?} is not start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let n: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    Ok((n[0], n[1], n[2]))
}

/// Parses a byte count such as `4096`, `64KiB`, `256MiB`, `2GB`.
pub fn parse_bytes(text: &str) -> Result<u64> {
    let t = text.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: u64 = num
        .parse()
        .map_err(|_| Error::param(format!("byte size {text:?} has no leading number")))?;
    let mult: u64 = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kib" => 1 << 10,
        "m" | "mib" => 1 << 20,
        "g" | "gib" => 1 << 30,
        "kb" => 1_000,
        "mb" => 1_000_000,
        "gb" => 1_000_000_000,
        other => return Err(Error::param(format!("unknown byte unit {other:?}"))),
    };
    value
        .checked_mul(mult)
        .ok_or_else(|| Error::param(format!("byte size {text:?} overflows")))
}

#[derive(Debug, Serialize)]
struct GenSummary<'a> {
    preset: &'a str,
    scale: f64,
    seed: u64,
    path: &'a Path,
    block_rows: usize,
    rows: usize,
    blocks: usize,
    occupancy: f64,
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Multiply(args) => cmd_multiply(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Kernels(args) => cmd_kernels(&args),
    }
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let preset = gen::preset(&args.preset)?;
    let m = gen::generate(&preset, args.scale, args.seed)?;
    write_bsm(&args.output, &m)?;
    let summary = GenSummary {
        preset: preset.name,
        scale: args.scale,
        seed: args.seed,
        path: &args.output,
        block_rows: m.block_rows(),
        rows: m.layout().rows().total(),
        blocks: m.n_blocks(),
        occupancy: gen::occupancy(&m),
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn cmd_multiply(args: &MultiplyArgs) -> Result<()> {
    let a = read_bsm(&args.a)?;
    let b = read_bsm(&args.b)?;
    let grid = ProcessGrid::from_ranks(args.engine.ranks)?;
    let opts = CannonOptions::new(args.engine.multiply_options(), args.engine.link()?);
    opts.multiply.check()?;
    let da = distribute(&a, grid, args.seed)?;
    let db = distribute(&b, grid, args.seed)?;
    let run = multiply_once(&da, &db, &opts)?;
    let (latency_us, bandwidth_gbs) = link_echo(&opts.link);
    let config = RunConfig {
        preset: None,
        inputs: vec![args.a.display().to_string(), args.b.display().to_string()],
        scale: None,
        seed: args.seed,
        eps: args.engine.eps,
        ranks: args.engine.ranks,
        workers: args.engine.workers,
        batch_capacity: args.engine.batch_capacity,
        reps: 1,
        chain: 1,
        latency_us,
        bandwidth_gbs,
    };
    let report = BenchReport::new(config, vec![run.report()])?;
    if let Some(path) = &args.output {
        write_bsm(path, &run.c.gather()?)?;
    }
    emit_json(args.report.as_deref(), &report)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        preset: args.preset.clone(),
        scale: args.scale,
        seed: args.seed,
        ranks: args.engine.ranks,
        reps: args.reps,
        chain: args.chain,
        multiply: args.engine.multiply_options(),
        link: args.engine.link()?,
    };
    let report = bench(&cfg)?;
    if let Some(path) = &args.output {
        write_csv(path, &report.run_rows())?;
        write_csv(&path.with_extension("trajectory.csv"), &report.trajectory_rows())?;
    }
    emit_json(args.report.as_deref(), &report)
}

fn cmd_kernels(args: &KernelArgs) -> Result<()> {
    let (start, end, step) = parse_sizes(&args.sizes)?;
    let keys = square_keys(start, end, step)?;
    let ws = parse_bytes(&args.working_set)?;
    let report = microbench(&keys, ws, args.reps)?;
    if let Some(path) = &args.output {
        let rows: Vec<KeyRow> = report
            .keys
            .iter()
            .map(|k| KeyRow {
                m: k.m,
                n: k.n,
                k: k.k,
                gflops: k.gflops,
            })
            .collect();
        write_csv(path, &rows)?;
    }
    emit_json(args.report.as_deref(), &report)
}

#[derive(Debug, Serialize)]
struct KeyRow {
    m: usize,
    n: usize,
    k: usize,
    gflops: f64,
}
