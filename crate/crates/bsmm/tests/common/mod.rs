#![allow(dead_code)]

use bsmm_core::{BlockCsr, BlockLayout};

/// Row-major dense product and the matching `sum |a| |b|` magnitudes.
pub fn dense_gemm(a: &BlockCsr, b: &BlockCsr) -> (Vec<f64>, Vec<f64>) {
    let (da, db) = (a.to_dense(), b.to_dense());
    let (m, k, n) = (da.rows(), da.cols(), db.cols());
    let mut c = vec![0.0; m * n];
    let mut mag = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let x = da.get(i, p);
            if x == 0.0 {
                continue;
            }
            for j in 0..n {
                let y = db.get(p, j);
                c[i * n + j] += x * y;
                mag[i * n + j] += (x * y).abs();
            }
        }
    }
    (c, mag)
}

/// Largest element-wise error relative to the product magnitude.
pub fn max_relative_error(got: &BlockCsr, want: &[f64], mag: &[f64]) -> f64 {
    let d = got.to_dense();
    d.data()
        .iter()
        .zip(want)
        .zip(mag)
        .map(|((g, w), m)| {
            let err = (g - w).abs();
            if *m == 0.0 {
                if err == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                err / m
            }
        })
        .fold(0.0, f64::max)
}

/// Largest element-wise difference of two products of the same operands,
/// relative to the product magnitude `mag`.
pub fn max_relative_difference(x: &BlockCsr, y: &BlockCsr, mag: &[f64]) -> f64 {
    max_relative_error(x, y.to_dense().data(), mag)
}

/// Layout whose rows are `x`'s columns, for building a right operand.
pub fn transposed_layout(x: &BlockCsr) -> BlockLayout {
    BlockLayout::new(x.layout().cols().clone(), x.layout().rows().clone())
}
