//! Report schemas, validation and CSV rows.

use serde::{Deserialize, Serialize};

use crate::cannon::CommStats;
use crate::error::{Error, Result};

/// Allowed distance of the percentage sum from 100.
pub const PCT_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub waitall_pct: f64,
    pub batch_pct: f64,
    pub other_pct: f64,
    pub total_s: f64,
}

impl From<&CommStats> for RankReport {
    fn from(s: &CommStats) -> Self {
        Self {
            rank: s.rank,
            bytes_sent: s.bytes_sent,
            bytes_received: s.bytes_received,
            waitall_pct: s.waitall_pct(),
            batch_pct: s.batch_pct(),
            other_pct: s.other_pct(),
            total_s: s.total_secs,
        }
    }
}

impl RankReport {
    fn check(&self) -> Result<()> {
        let parts = [self.waitall_pct, self.batch_pct, self.other_pct];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Report(format!("rank {} has a non-finite or negative share", self.rank)));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 100.0).abs() > PCT_TOLERANCE {
            return Err(Error::Report(format!(
                "rank {} percentages sum to {sum:.3}, not 100",
                self.rank
            )));
        }
        Ok(())
    }
}

/// Per-rank breakdown plus the rank averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommReport {
    pub ranks: Vec<RankReport>,
    pub avg_waitall_pct: f64,
    pub avg_batch_pct: f64,
    pub avg_other_pct: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl CommReport {
    pub fn new(stats: &[CommStats]) -> Self {
        let ranks: Vec<RankReport> = stats.iter().map(RankReport::from).collect();
        Self {
            avg_waitall_pct: mean(ranks.iter().map(|r| r.waitall_pct)),
            avg_batch_pct: mean(ranks.iter().map(|r| r.batch_pct)),
            avg_other_pct: mean(ranks.iter().map(|r| r.other_pct)),
            ranks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() {
            return Err(Error::Report("no ranks reported".into()));
        }
        for r in &self.ranks {
            r.check()?;
        }
        let sent: u64 = self.ranks.iter().map(|r| r.bytes_sent).sum();
        let received: u64 = self.ranks.iter().map(|r| r.bytes_received).sum();
        if sent != received {
            return Err(Error::Report(format!("{sent} bytes sent but {received} received")));
        }
        Ok(())
    }
}

/// Configuration echo of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub inputs: Vec<String>,
    pub scale: Option<f64>,
    pub seed: u64,
    pub eps: f64,
    pub ranks: usize,
    pub workers: usize,
    pub batch_capacity: usize,
    pub reps: usize,
    pub chain: usize,
    pub latency_us: f64,
    /// `None` for unlimited bandwidth.
    pub bandwidth_gbs: Option<f64>,
}

/// One execution of the multiplication chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub time_to_solution_s: f64,
    pub flops: u64,
    pub gflops: f64,
    /// Mean over ranks of the worker busy-time imbalance.
    pub worker_imbalance_pct: f64,
    /// Mean over ranks of the worker flop imbalance.
    pub worker_flop_imbalance_pct: f64,
    pub step_flops: Vec<u64>,
    /// Occupancy of C after each step.
    pub occupancy: Vec<f64>,
    pub comm: CommReport,
}

impl RunReport {
    pub fn validate(&self) -> Result<()> {
        self.comm.validate()?;
        let sum: u64 = self.step_flops.iter().sum();
        if sum != self.flops {
            return Err(Error::Report(format!(
                "flops {} differ from the step total {sum}",
                self.flops
            )));
        }
        if self.occupancy.len() != self.step_flops.len() {
            return Err(Error::Report("occupancy trajectory length differs from the step count".into()));
        }
        if !(self.time_to_solution_s >= 0.0 && self.gflops >= 0.0) {
            return Err(Error::Report("negative or NaN timing".into()));
        }
        Ok(())
    }
}

/// Means over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub time_to_solution_s: f64,
    pub avg_waitall_pct: f64,
    pub avg_batch_pct: f64,
    pub avg_other_pct: f64,
    pub gflops: f64,
    pub worker_imbalance_pct: f64,
    /// `(max - min) / mean` of time to solution.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: RunConfig,
    /// Flops of one run; identical for every repetition.
    pub flops: u64,
    pub occupancy_trajectory: Vec<f64>,
    pub average: Averages,
    pub runs: Vec<RunReport>,
}

impl BenchReport {
    pub fn new(config: RunConfig, runs: Vec<RunReport>) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::Report("a report needs at least one run".into()))?;
        let times: Vec<f64> = runs.iter().map(|r| r.time_to_solution_s).collect();
        let t_mean = mean(times.iter().copied());
        let t_max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
        let average = Averages {
            time_to_solution_s: t_mean,
            avg_waitall_pct: mean(runs.iter().map(|r| r.comm.avg_waitall_pct)),
            avg_batch_pct: mean(runs.iter().map(|r| r.comm.avg_batch_pct)),
            avg_other_pct: mean(runs.iter().map(|r| r.comm.avg_other_pct)),
            gflops: mean(runs.iter().map(|r| r.gflops)),
            worker_imbalance_pct: mean(runs.iter().map(|r| r.worker_imbalance_pct)),
            spread: if t_mean > 0.0 { (t_max - t_min) / t_mean } else { 0.0 },
        };
        let report = Self {
            flops: first.flops,
            occupancy_trajectory: first.occupancy.clone(),
            config,
            average,
            runs,
        };
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs.len() != self.config.reps {
            return Err(Error::Report(format!(
                "{} runs recorded for {} repetitions",
                self.runs.len(),
                self.config.reps
            )));
        }
        for (i, run) in self.runs.iter().enumerate() {
            run.validate().map_err(|e| Error::Report(format!("run {i}: {e}")))?;
            if run.flops != self.flops || run.occupancy != self.occupancy_trajectory {
                return Err(Error::Report(format!("run {i} did different work than run 0")));
            }
        }
        let sum = self.average.avg_waitall_pct + self.average.avg_batch_pct + self.average.avg_other_pct;
        if (sum - 100.0).abs() > PCT_TOLERANCE {
            return Err(Error::Report(format!("average percentages sum to {sum:.3}")));
        }
        Ok(())
    }

    pub fn run_rows(&self) -> Vec<RunRow> {
        self.runs
            .iter()
            .enumerate()
            .map(|(rep, r)| RunRow {
                rep,
                time_to_solution_s: r.time_to_solution_s,
                avg_waitall_pct: r.comm.avg_waitall_pct,
                avg_batch_pct: r.comm.avg_batch_pct,
                avg_other_pct: r.comm.avg_other_pct,
                flops: r.flops,
                gflops: r.gflops,
                worker_imbalance_pct: r.worker_imbalance_pct,
            })
            .collect()
    }

    pub fn trajectory_rows(&self) -> Vec<StepRow> {
        let first = &self.runs[0];
        first
            .occupancy
            .iter()
            .zip(&first.step_flops)
            .enumerate()
            .map(|(step, (&occupancy, &flops))| StepRow {
                step: step + 1,
                occupancy,
                flops,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub rep: usize,
    pub time_to_solution_s: f64,
    pub avg_waitall_pct: f64,
    pub avg_batch_pct: f64,
    pub avg_other_pct: f64,
    pub flops: u64,
    pub gflops: f64,
    pub worker_imbalance_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRow {
    pub step: usize,
    pub occupancy: f64,
    pub flops: u64,
}
