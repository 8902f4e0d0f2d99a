mod common;

use std::path::Path;
use std::process::{Command, Output};

use bsmm::io::read_bsm;
use bsmm::report::BenchReport;
use bsmm::microbench::MicrobenchReport;
use bsmm::{cannon_multiply, distribute, CannonOptions, LinkModel, ProcessGrid};
use bsmm_core::{gen, MultiplyOptions};
use serde_json::Value;

use common::{dense_gemm, max_relative_difference};

fn bsmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsmm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bsmm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_writes_file_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bsm");
    let out = ok(&["gen", "--preset", "s-e", "--scale", "0.01", "--seed", "42", "-o", p(&a)]);
    let summary: Value = serde_json::from_str(&out).unwrap();
    let occ = summary["occupancy"].as_f64().unwrap();
    assert!((4e-4..=6e-4).contains(&occ), "{occ}");
    let m = read_bsm(&a).unwrap();
    assert_eq!(summary["blocks"].as_u64().unwrap() as usize, m.n_blocks());

    let again = dir.path().join("again.bsm");
    ok(&["gen", "--preset", "s-e", "--scale", "0.01", "--seed", "42", "-o", p(&again)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn bad_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.bsm");
    let out = bsmm(&["gen", "--preset", "h2o-dft-ls", "--scale", "0", "-o", p(&x)]);
    assert_eq!(out.status.code(), Some(2));
    let out = bsmm(&["gen", "--preset", "nope", "-o", p(&x)]);
    assert_eq!(out.status.code(), Some(2));
    let out = bsmm(&["bench", "--preset", "dense", "--scale", "0.1", "--ranks", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bsmm(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_an_internal_error() {
    let out = bsmm(&["multiply", "/nonexistent/a.bsm", "/nonexistent/b.bsm"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn multiply_agrees_across_ranks_and_with_library() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bsm"), dir.path().join("b.bsm"));
    ok(&["gen", "--preset", "amorph", "--scale", "0.002", "--seed", "1", "-o", p(&a)]);
    ok(&["gen", "--preset", "amorph", "--scale", "0.002", "--seed", "2", "-o", p(&b)]);
    let (ma, mb) = (read_bsm(&a).unwrap(), read_bsm(&b).unwrap());
    let (_, mag) = dense_gemm(&ma, &mb);

    let mut products = Vec::new();
    for ranks in ["1", "4"] {
        let c = dir.path().join(format!("c{ranks}.bsm"));
        let r = dir.path().join(format!("r{ranks}.json"));
        ok(&["multiply", p(&a), p(&b), "--ranks", ranks, "--seed", "5", "-o", p(&c), "--report", p(&r)]);
        let report: BenchReport = serde_json::from_str(&std::fs::read_to_string(&r).unwrap()).unwrap();
        report.validate().unwrap();
        products.push(read_bsm(&c).unwrap());
    }
    assert!(max_relative_difference(&products[0], &products[1], &mag) <= 1e-12);

    let grid = ProcessGrid::from_ranks(4).unwrap();
    let opts = CannonOptions::new(MultiplyOptions::default(), LinkModel::instant());
    let (c, _) = cannon_multiply(
        &distribute(&ma, grid, 5).unwrap(),
        &distribute(&mb, grid, 5).unwrap(),
        &opts,
    )
    .unwrap();
    assert_eq!(c.gather().unwrap(), products[1]);
}

#[test]
fn huge_eps_gives_empty_product_and_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bsm");
    let c = dir.path().join("c.bsm");
    ok(&["gen", "--preset", "h2o-dft-ls", "--scale", "0.002", "-o", p(&a)]);
    let out = ok(&["multiply", p(&a), p(&a), "--ranks", "4", "--eps", "1e30", "-o", p(&c)]);
    let report: BenchReport = serde_json::from_str(&out).unwrap();
    report.validate().unwrap();
    assert_eq!(report.flops, 0);
    assert_eq!(read_bsm(&c).unwrap().n_blocks(), 0);
}

#[test]
fn bench_emits_consistent_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let json = dir.path().join("bench.json");
    ok(&[
        "bench", "--preset", "s-e", "--scale", "0.005", "--ranks", "4", "--reps", "4", "--chain", "3",
        "--eps", "1e-5", "--workers", "2", "-o", p(&csv), "--report", p(&json),
    ]);
    let report: BenchReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    report.validate().unwrap();
    assert_eq!(report.runs.len(), 4);
    assert!(report.runs.iter().all(|r| r.flops == report.flops));
    for run in &report.runs {
        for rank in &run.comm.ranks {
            let sum = rank.waitall_pct + rank.batch_pct + rank.other_pct;
            assert!((sum - 100.0).abs() <= 0.5);
        }
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("rep,time_to_solution_s,avg_waitall_pct"));
    assert_eq!(text.lines().count(), 5);
    let traj = std::fs::read_to_string(dir.path().join("runs.trajectory.csv")).unwrap();
    assert!(traj.starts_with("step,occupancy,flops"));
    assert_eq!(traj.lines().count(), 4);
}

#[test]
fn sparse_chain_occupancy_stays_bounded() {
    let mut cfg = bsmm::bench::BenchConfig::new("s-e", 0.01);
    cfg.reps = 1;
    cfg.chain = Some(12);
    cfg.ranks = 4;
    cfg.multiply = MultiplyOptions::default().with_eps(1e-5);
    cfg.link = LinkModel::instant();
    let r = bsmm::bench::bench(&cfg).unwrap();
    let a = gen::generate(&gen::BenchPreset::s_e(), 0.01, 0).unwrap();
    let start = gen::occupancy(&a);
    let traj = &r.occupancy_trajectory;
    assert!(traj.iter().all(|&o| o > 0.0 && o < 10.0 * start), "{traj:?}");
    assert!(traj.windows(2).any(|w| w[1] <= w[0]), "grows every step: {traj:?}");
}

#[test]
fn kernels_csv_and_geomean_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    let json = dir.path().join("k.json");
    ok(&["kernels", "--sizes", "4:32:4", "--working-set", "16MiB", "-o", p(&csv), "--report", p(&json)]);
    let report: MicrobenchReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["m", "n", "k", "gflops"]);
    let rates: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[3].parse::<f64>().unwrap())
        .collect();
    assert_eq!(rates.len(), 8);
    assert!(rates.iter().all(|&r| r.is_finite() && r > 0.0));
    let geo = (rates.iter().map(|r| r.ln()).sum::<f64>() / rates.len() as f64).exp();
    assert!((geo / report.geomean_gflops - 1.0).abs() < 1e-9);
    for k in &report.keys {
        assert_eq!(k.flops, 2 * (k.m * k.n * k.k) as u64 * k.pairs * report.reps);
    }
}

#[test]
fn kernel_rates_are_stable_across_reps() {
    let run = |reps: &str| -> MicrobenchReport {
        serde_json::from_str(&ok(&["kernels", "--sizes", "8:16:8", "--working-set", "8MiB", "--reps", reps])).unwrap()
    };
    let (one, two) = (run("1"), run("2"));
    for (x, y) in one.keys.iter().zip(&two.keys) {
        let ratio = x.gflops / y.gflops;
        assert!((0.5..=2.0).contains(&ratio), "{}x{}x{}: {ratio}", x.m, x.n, x.k);
    }
}
