#![allow(dead_code)]

use bsmm_core::{BlockCsr, DenseMatrix};

/// Naive dense product, row-major, inner index ascending. Also returns the
/// element-wise magnitude bound `sum_k |a_ik| |b_kj|` used to scale errors.
pub fn dense_gemm(a: &DenseMatrix, b: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.cols(), b.rows());
    let (m, n, k) = (a.rows(), b.cols(), a.cols());
    let mut c = vec![0.0; m * n];
    let mut mag = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a.get(i, p);
            if aip == 0.0 {
                continue;
            }
            for j in 0..n {
                let bpj = b.get(p, j);
                c[i * n + j] += aip * bpj;
                mag[i * n + j] += (aip * bpj).abs();
            }
        }
    }
    (c, mag)
}

/// Largest element-wise error of `got` against the dense oracle, relative to
/// the magnitude of the summed products (the scale rounding errors live on).
pub fn max_relative_error(got: &BlockCsr, a: &BlockCsr, b: &BlockCsr) -> f64 {
    let (expected, mag) = dense_gemm(&a.to_dense(), &b.to_dense());
    let got = got.to_dense();
    assert_eq!(got.data().len(), expected.len());
    got.data()
        .iter()
        .zip(&expected)
        .zip(&mag)
        .map(|((&g, &e), &s)| {
            let diff = (g - e).abs();
            if diff == 0.0 {
                0.0
            } else if s == 0.0 {
                f64::INFINITY
            } else {
                diff / s
            }
        })
        .fold(0.0, f64::max)
}

/// Bitwise equality, including norms and layout.
pub fn assert_bit_identical(x: &BlockCsr, y: &BlockCsr) {
    assert_eq!(x.layout(), y.layout());
    assert_eq!(x.row_ptr(), y.row_ptr());
    assert_eq!(x.col_idx(), y.col_idx());
    let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(x.data()), bits(y.data()));
    assert_eq!(bits(x.norms()), bits(y.norms()));
}
