//! Streaming throughput measurement of the small-matrix kernels.
//!
//! For each key the working set is filled with distinct `(A_i, B_i)` pairs,
//! all accumulated into one cache-resident C, so the loop streams operands
//! from memory the way batched block products do.

use std::hint::black_box;
use std::time::Instant;

use bsmm_core::{KernelKey, KernelTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timed runs per key; the fastest counts.
pub const TRIALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub gflops: f64,
    /// Pairs resident in the working set.
    pub pairs: u64,
    /// Floating-point operations in one timed run: `2 m n k * pairs * reps`.
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrobenchReport {
    pub keys: Vec<KeyRate>,
    pub geomean_gflops: f64,
    pub working_set_bytes: u64,
    pub reps: u64,
}

pub fn geometric_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// Number of `(A, B)` pairs of `key` that fit in `working_set_bytes`.
pub fn pair_count(key: KernelKey, working_set_bytes: u64) -> u64 {
    working_set_bytes / (8 * (key.a_len() + key.b_len()) as u64)
}

/// Square keys `m = n = k` for `m` in `start..=end` by `step`.
pub fn square_keys(start: usize, end: usize, step: usize) -> Result<Vec<KernelKey>> {
    if step == 0 || start == 0 || start > end {
        return Err(Error::param(format!("size range {start}:{end}:{step} is empty or invalid")));
    }
    (start..=end)
        .step_by(step)
        .map(|s| Ok(KernelKey::new(s, s, s)?))
        .collect()
}

pub fn microbench(keys: &[KernelKey], working_set_bytes: u64, reps: u64) -> Result<MicrobenchReport> {
    if reps == 0 {
        return Err(Error::param("reps must be at least 1"));
    }
    if keys.is_empty() {
        return Err(Error::param("no kernel keys to measure"));
    }
    for &key in keys {
        if pair_count(key, working_set_bytes) == 0 {
            return Err(Error::param(format!(
                "working set of {working_set_bytes} bytes cannot hold one {key} operand pair"
            )));
        }
    }
    let len = usize::try_from(working_set_bytes / 8)
        .map_err(|_| Error::param("working set exceeds the address space"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let buffer: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let table = KernelTable::default();

    let mut rates = Vec::with_capacity(keys.len());
    for &key in keys {
        let kernel = table.dispatch(key);
        let pairs = pair_count(key, working_set_bytes);
        let stride = key.a_len() + key.b_len();
        let mut c = vec![0.0; key.c_len()];
        let mut best = f64::INFINITY;
        for _ in 0..TRIALS {
            let start = Instant::now();
            for _ in 0..reps {
                for pair in buffer.chunks_exact(stride).take(pairs as usize) {
                    let (a, b) = pair.split_at(key.a_len());
                    kernel.call(a, b, &mut c)?;
                }
                black_box(&mut c);
            }
            best = best.min(start.elapsed().as_secs_f64());
        }
        let flops = key.flops() * pairs * reps;
        log::debug!("{key}: {pairs} pairs, best {best:.4} s");
        rates.push(KeyRate {
            m: key.m,
            n: key.n,
            k: key.k,
            gflops: flops as f64 / best.max(1e-9) / 1e9,
            pairs,
            flops,
        });
    }
    let geomean_gflops = geometric_mean(&rates.iter().map(|r| r.gflops).collect::<Vec<_>>());
    Ok(MicrobenchReport {
        keys: rates,
        geomean_gflops,
        working_set_bytes,
        reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geomean_of_one_and_four_is_two() {
        assert!((geometric_mean(&[1.0, 4.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn geomean_scales_with_rates() {
        let rates = [0.3, 2.5, 7.0, 11.0];
        let scaled: Vec<f64> = rates.iter().map(|r| r * 3.5).collect();
        let ratio = geometric_mean(&scaled) / geometric_mean(&rates);
        assert!((ratio - 3.5).abs() < 1e-12);
    }

    #[test]
    fn single_key_report() {
        let key = KernelKey::new(4, 4, 4).unwrap();
        let r = microbench(&[key], 1 << 16, 1).unwrap();
        assert_eq!(r.keys.len(), 1);
        assert!((r.geomean_gflops / r.keys[0].gflops - 1.0).abs() < 1e-12);
        assert_eq!(r.keys[0].pairs, (1 << 16) / 256);
        assert_eq!(r.keys[0].flops, 128 * r.keys[0].pairs);
    }

    #[test]
    fn tiny_working_set_rejected() {
        let key = KernelKey::new(32, 32, 32).unwrap();
        assert!(matches!(microbench(&[key], 1000, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn square_key_range() {
        let keys = square_keys(4, 32, 4).unwrap();
        assert_eq!(keys.len(), 8);
        assert_eq!(keys[7], KernelKey::new(32, 32, 32).unwrap());
        assert!(square_keys(8, 4, 1).is_err());
        assert!(square_keys(4, 8, 0).is_err());
    }
}
