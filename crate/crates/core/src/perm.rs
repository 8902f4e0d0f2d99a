//! Seeded random permutations of block indices.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A bijection on `0..n` together with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
    seed: u64,
}

/// Uniform shuffle of `0..n` drawn from a ChaCha8 stream seeded with `seed`.
pub fn random_permutation(n: usize, seed: u64) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::param("permutation length must be at least 1"));
    }
    let mut forward: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    forward.shuffle(&mut rng);
    let mut perm = Permutation::from_forward(forward)?;
    perm.seed = seed;
    Ok(perm)
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let forward: Vec<usize> = (0..n).collect();
        Self {
            inverse: forward.clone(),
            forward,
            seed: 0,
        }
    }

    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = alloc::vec![usize::MAX; n];
        for (i, &f) in forward.iter().enumerate() {
            if f >= n || inverse[f] != usize::MAX {
                return Err(Error::param(format!("index {f} breaks the bijection at position {i}")));
            }
            inverse[f] = i;
        }
        Ok(Self {
            forward,
            inverse,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Image of `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.forward[i]
    }

    /// Preimage of `j`.
    pub fn invert(&self, j: usize) -> usize {
        self.inverse[j]
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
            seed: self.seed,
        }
    }

    /// `self` followed by `other`: `i -> other(self(i))`.
    pub fn then(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::param("permutations differ in length"));
        }
        Permutation::from_forward(self.forward.iter().map(|&i| other.apply(i)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element() {
        for seed in [0, 1, 42, u64::MAX] {
            assert_eq!(random_permutation(1, seed).unwrap().forward(), &[0]);
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(matches!(random_permutation(0, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn is_bijection() {
        for n in [2, 7, 100] {
            let p = random_permutation(n, 9).unwrap();
            let mut sorted = p.forward().to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn golden_snapshot() {
        let p = random_permutation(8, 42).unwrap();
        assert_eq!(p.forward(), &GOLDEN_8_42);
        assert_eq!(p.seed(), 42);
        assert_eq!(random_permutation(8, 42).unwrap(), p);
    }

    const GOLDEN_8_42: [usize; 8] = [7, 1, 5, 4, 6, 0, 3, 2];

    #[test]
    fn inverse_composes_to_identity() {
        for n in 1..=64 {
            let p = random_permutation(n, n as u64 * 31).unwrap();
            assert_eq!(p.then(&p.inverse()).unwrap().forward(), Permutation::identity(n).forward());
            assert_eq!(p.inverse().then(&p).unwrap().forward(), Permutation::identity(n).forward());
            for i in 0..n {
                assert_eq!(p.invert(p.apply(i)), i);
            }
        }
    }

    #[test]
    fn from_forward_rejects_duplicates() {
        assert!(Permutation::from_forward(alloc::vec![0, 0]).is_err());
        assert!(Permutation::from_forward(alloc::vec![0, 2]).is_err());
    }
}
