//! Small dense multiply-accumulate kernels and their dispatch table.
//!
//! Every kernel computes `c += a * b` on column-major operands
//! (`a` is `m x k`, `b` is `k x n`, `c` is `m x n`). For each element of `c`
//! the products are added one at a time in ascending inner index, with a
//! separate multiply and add. Fixed-size kernels and the generic kernel
//! therefore produce bit-identical results.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest block dimension accepted by the kernels.
pub const MAX_BLOCK_DIM: usize = 128;

/// Block dimensions with compiled fixed-size kernels; the default table covers
/// every `(m, n, k)` drawn from this set.
pub const SPECIALIZED_SIZES: [usize; 10] = [4, 5, 6, 8, 9, 13, 16, 22, 23, 32];

/// Dimensions of one block product: `a` is `m x k`, `b` is `k x n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KernelKey {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl KernelKey {
    pub fn new(m: usize, n: usize, k: usize) -> Result<Self> {
        for (name, v) in [("m", m), ("n", n), ("k", k)] {
            if v == 0 || v > MAX_BLOCK_DIM {
                return Err(Error::param(format!(
                    "kernel dimension {name} = {v} outside 1..={MAX_BLOCK_DIM}"
                )));
            }
        }
        Ok(Self { m, n, k })
    }

    /// Floating-point operations of one product, `2 m n k`.
    pub fn flops(&self) -> u64 {
        2 * (self.m * self.n * self.k) as u64
    }

    pub fn a_len(&self) -> usize {
        self.m * self.k
    }

    pub fn b_len(&self) -> usize {
        self.k * self.n
    }

    pub fn c_len(&self) -> usize {
        self.m * self.n
    }
}

impl core::fmt::Display for KernelKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}x{}", self.m, self.n, self.k)
    }
}

/// Raw kernel entry point. Fixed-size kernels ignore the key.
pub type KernelFn = fn(KernelKey, &[f64], &[f64], &mut [f64]);

/// Reference kernel for arbitrary dimensions.
pub fn gemm_generic(key: KernelKey, a: &[f64], b: &[f64], c: &mut [f64]) {
    let KernelKey { m, n, k } = key;
    let a = &a[..m * k];
    let b = &b[..k * n];
    for j in 0..n {
        let c_col = &mut c[j * m..(j + 1) * m];
        for p in 0..k {
            let b_pj = b[p + j * k];
            let a_col = &a[p * m..(p + 1) * m];
            for i in 0..m {
                c_col[i] += a_col[i] * b_pj;
            }
        }
    }
}

fn gemm_fixed<const M: usize, const N: usize, const K: usize>(
    _key: KernelKey,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
) {
    let a = &a[..M * K];
    let b = &b[..K * N];
    let c = &mut c[..M * N];
    for j in 0..N {
        let c_col = &mut c[j * M..(j + 1) * M];
        for p in 0..K {
            let b_pj = b[p + j * K];
            let a_col = &a[p * M..(p + 1) * M];
            for i in 0..M {
                c_col[i] += a_col[i] * b_pj;
            }
        }
    }
}

macro_rules! kernel_cube {
    ([$($m:literal),*], $ns:tt, $ks:tt) => {
        [$(kernel_cube!(@m $m, $ns, $ks)),*]
    };
    (@m $m:literal, [$($n:literal),*], $ks:tt) => {
        [$(kernel_cube!(@n $m, $n, $ks)),*]
    };
    (@n $m:literal, $n:literal, [$($k:literal),*]) => {
        [$(gemm_fixed::<$m, $n, $k> as KernelFn),*]
    };
}

const N_SIZES: usize = SPECIALIZED_SIZES.len();

static FIXED_KERNELS: [[[KernelFn; N_SIZES]; N_SIZES]; N_SIZES] = kernel_cube!(
    [4, 5, 6, 8, 9, 13, 16, 22, 23, 32],
    [4, 5, 6, 8, 9, 13, 16, 22, 23, 32],
    [4, 5, 6, 8, 9, 13, 16, 22, 23, 32]
);

fn fixed_kernel(key: KernelKey) -> Option<KernelFn> {
    let index = |v: usize| SPECIALIZED_SIZES.iter().position(|&s| s == v);
    Some(FIXED_KERNELS[index(key.m)?][index(key.n)?][index(key.k)?])
}

/// A dispatched kernel: entry point plus whether it is a fixed-size one.
#[derive(Clone, Copy)]
pub struct Kernel {
    key: KernelKey,
    func: KernelFn,
    specialized: bool,
}

impl core::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Kernel")
            .field("key", &self.key)
            .field("specialized", &self.specialized)
            .finish()
    }
}

impl Kernel {
    pub fn key(&self) -> KernelKey {
        self.key
    }

    pub fn is_specialized(&self) -> bool {
        self.specialized
    }

    /// `c += a * b`, after checking buffer lengths against the key.
    pub fn call(&self, a: &[f64], b: &[f64], c: &mut [f64]) -> Result<()> {
        check_lengths(self.key, a, b, c)?;
        (self.func)(self.key, a, b, c);
        Ok(())
    }

    /// `c += a * b` without length checks beyond slice indexing.
    #[inline]
    pub(crate) fn call_unchecked(&self, a: &[f64], b: &[f64], c: &mut [f64]) {
        debug_assert!(check_lengths(self.key, a, b, c).is_ok());
        (self.func)(self.key, a, b, c);
    }
}

fn check_lengths(key: KernelKey, a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    for (name, got, want) in [
        ("a", a.len(), key.a_len()),
        ("b", b.len(), key.b_len()),
        ("c", c.len(), key.c_len()),
    ] {
        if got != want {
            return Err(Error::param(format!(
                "kernel {key}: buffer {name} holds {got} values, expected {want}"
            )));
        }
    }
    Ok(())
}

/// Maps kernel keys to ahead-of-time specialized kernels, falling back to
/// [`gemm_generic`] for everything else.
#[derive(Clone)]
pub struct KernelTable {
    specialized: BTreeMap<KernelKey, KernelFn>,
}

impl core::fmt::Debug for KernelTable {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("KernelTable")
            .field("specialized", &self.specialized.len())
            .finish()
    }
}

impl Default for KernelTable {
    fn default() -> Self {
        let mut specialized = BTreeMap::new();
        for &m in &SPECIALIZED_SIZES {
            for &n in &SPECIALIZED_SIZES {
                for &k in &SPECIALIZED_SIZES {
                    let key = KernelKey { m, n, k };
                    specialized.insert(key, fixed_kernel(key).expect("key from the size set"));
                }
            }
        }
        Self { specialized }
    }
}

impl KernelTable {
    /// Table with no specialized kernels.
    pub fn generic_only() -> Self {
        Self {
            specialized: BTreeMap::new(),
        }
    }

    /// Table restricted to the given keys; keys without a compiled
    /// fixed-size kernel are ignored.
    pub fn with_keys(keys: impl IntoIterator<Item = KernelKey>) -> Self {
        let specialized = keys
            .into_iter()
            .filter_map(|key| fixed_kernel(key).map(|f| (key, f)))
            .collect();
        Self { specialized }
    }

    pub fn specialized_keys(&self) -> Vec<KernelKey> {
        self.specialized.keys().copied().collect()
    }

    pub fn is_specialized(&self, key: KernelKey) -> bool {
        self.specialized.contains_key(&key)
    }

    pub fn dispatch(&self, key: KernelKey) -> Kernel {
        match self.specialized.get(&key) {
            Some(&func) => Kernel {
                key,
                func,
                specialized: true,
            },
            None => Kernel {
                key,
                func: gemm_generic,
                specialized: false,
            },
        }
    }
}

/// `c += a * b` through the default table.
pub fn gemm_acc(key: KernelKey, a: &[f64], b: &[f64], c: &mut [f64]) -> Result<()> {
    let kernel = match fixed_kernel(key) {
        Some(func) => Kernel {
            key,
            func,
            specialized: true,
        },
        None => Kernel {
            key,
            func: gemm_generic,
            specialized: false,
        },
    };
    kernel.call(a, b, c)
}
