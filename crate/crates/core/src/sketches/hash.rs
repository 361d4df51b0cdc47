use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from;

/// Mersenne prime 2^61 - 1, the field for the four-wise family.
pub const MERSENNE_61: u64 = (1 << 61) - 1;
/// Mersenne prime 2^31 - 1, the field for the pairwise family.
pub const MERSENNE_31: u64 = (1 << 31) - 1;

#[inline]
fn mulmod61(a: u64, b: u64) -> u64 {
    let prod = (a as u128) * (b as u128);
    let lo = (prod as u64) & MERSENNE_61;
    let hi = (prod >> 61) as u64;
    let s = lo + hi;
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

#[inline]
fn addmod61(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

#[inline]
fn reduce61(x: u64) -> u64 {
    let s = (x & MERSENNE_61) + (x >> 61);
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

/// Powers `x, x^2, x^3` of a key, reduced mod 2^61 - 1. Lets a caller hash one
/// key under many functions with three multiplications each.
#[derive(Debug, Clone, Copy)]
pub struct KeyPowers([u64; 3]);

impl KeyPowers {
    pub fn new(key: u64) -> Self {
        let x = reduce61(key);
        let x2 = mulmod61(x, x);
        Self([x, x2, mulmod61(x2, x)])
    }
}

/// Degree-3 polynomial over GF(2^61 - 1): a four-wise independent family.
/// The lowest bit of the value picks the sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourWiseHash {
    coeffs: [u64; 4],
    seed: u64,
}

impl FourWiseHash {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut coeffs = [0u64; 4];
        for c in &mut coeffs {
            *c = rng.random_range(0..MERSENNE_61);
        }
        Self { coeffs, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn coeffs(&self) -> [u64; 4] {
        self.coeffs
    }

    pub fn prime(&self) -> u64 {
        MERSENNE_61
    }

    #[inline]
    pub fn eval_powers(&self, p: &KeyPowers) -> u64 {
        let [a0, a1, a2, a3] = self.coeffs;
        let [x, x2, x3] = p.0;
        addmod61(addmod61(a0, mulmod61(a1, x)), addmod61(mulmod61(a2, x2), mulmod61(a3, x3)))
    }

    pub fn eval(&self, key: u64) -> u64 {
        self.eval_powers(&KeyPowers::new(key))
    }

    #[inline]
    pub fn sign_powers(&self, p: &KeyPowers) -> i64 {
        if self.eval_powers(p) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// ±1 sign of `key`.
    pub fn sign(&self, key: u64) -> i64 {
        self.sign_powers(&KeyPowers::new(key))
    }
}

/// `a·x + b mod 2^31 - 1` with `a ≠ 0`: pairwise independent, which is all
/// the k-minimum-values estimator needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseHash {
    a: u64,
    b: u64,
}

impl PairwiseHash {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let a = rng.random_range(1..MERSENNE_31);
        let b = rng.random_range(0..MERSENNE_31);
        Self { a, b }
    }

    pub fn from_coeffs(a: u64, b: u64) -> Self {
        Self { a: a % MERSENNE_31, b: b % MERSENNE_31 }
    }

    pub fn coeffs(&self) -> (u64, u64) {
        (self.a, self.b)
    }

    /// Value in `[0, 2^31 - 1)`.
    #[inline]
    pub fn eval(&self, key: u64) -> u64 {
        let x = key % MERSENNE_31;
        (self.a * x + self.b) % MERSENNE_31
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mulmod_matches_bigint() {
        let cases = [(0u64, 5u64), (1, MERSENNE_61 - 1), (MERSENNE_61 - 1, MERSENNE_61 - 1), (123_456_789_012, 987_654_321_098)];
        for (a, b) in cases {
            let want = ((a as u128 * b as u128) % MERSENNE_61 as u128) as u64;
            assert_eq!(mulmod61(a, b), want);
        }
        assert_eq!(reduce61(u64::MAX), (u64::MAX as u128 % MERSENNE_61 as u128) as u64);
    }

    #[test]
    fn four_wise_eval_matches_naive_polynomial() {
        let h = FourWiseHash::from_seed(7);
        let p = MERSENNE_61 as u128;
        for key in [0u64, 1, 2, 1000, u64::MAX] {
            let x = key as u128 % p;
            let [a0, a1, a2, a3] = h.coeffs().map(|c| c as u128);
            let naive = (a0 + a1 * x % p + a2 * (x * x % p) % p + a3 * (x * x % p * x % p) % p) % p;
            assert_eq!(h.eval(key) as u128, naive);
        }
    }

    #[test]
    fn signs_are_pm_one_and_deterministic() {
        let h = FourWiseHash::from_seed(3);
        let g = FourWiseHash::from_seed(3);
        for key in 1..200u64 {
            let s = h.sign(key);
            assert!(s == 1 || s == -1);
            assert_eq!(s, g.sign(key));
        }
    }

    /// Over random seeds, the 16 sign patterns of 4 fixed keys are uniform.
    #[test]
    fn four_keys_get_independent_signs() {
        let keys = [3u64, 17, 1000, 65_537];
        let trials = 16_000u64;
        let mut counts = [0u64; 16];
        for s in 0..trials {
            let h = FourWiseHash::from_seed(crate::seed::trial_seed(11, s));
            let mut pattern = 0usize;
            for (bit, &k) in keys.iter().enumerate() {
                if h.sign(k) == 1 {
                    pattern |= 1 << bit;
                }
            }
            counts[pattern] += 1;
        }
        let expected = trials as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square, 15 dof: 0.001 critical value is 37.70
        assert!(chi2 < 37.70, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn pairwise_in_range() {
        let h = PairwiseHash::from_seed(5);
        for key in [0u64, 1, MERSENNE_31, u64::MAX] {
            assert!(h.eval(key) < MERSENNE_31);
        }
        let (a, _) = h.coeffs();
        assert!(a >= 1);
    }
}
