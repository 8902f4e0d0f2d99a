//! Block-sparse matrix-matrix multiplication core.
//!
//! Matrices are stored in blocked compressed sparse row form ([`BlockCsr`]):
//! every stored entry is a small dense block kept in column-major order
//! together with its Frobenius norm. Products `C += A * B` are computed by
//! [`local::multiply_local`], which walks the block grid in a cache-oblivious
//! order, drops block pairs whose norm product does not exceed a threshold,
//! groups the survivors into homogeneous batches and hands each batch to a
//! small-GEMM kernel picked from a [`kernels::KernelTable`].
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. With `std`, local multiplication runs its workers on scoped
//! threads and records per-worker busy time.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bsm;
pub mod csr;
pub mod error;
pub mod gen;
pub mod kernels;
pub mod layout;
pub mod local;
pub mod partition;
pub mod perm;
pub mod traversal;

pub use csr::{frobenius_norm, BlockCsr, BlockEntry, DenseMatrix};
pub use error::{Error, Result};
pub use kernels::{gemm_acc, KernelKey, KernelTable};
pub use layout::{BlockAxis, BlockLayout};
pub use local::{multiply_local, LocalMmStats, MultiplyOptions};
pub use perm::{random_permutation, Permutation};
