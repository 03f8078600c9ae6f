//! The cyclic group Z/pZ for a prime p.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % small == 0 {
            return n == small;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Z/pZ with p prime. Elements are canonical residues in `0..p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeGroup {
    p: u64,
}

impl TryFrom<u64> for PrimeGroup {
    type Error = Error;
    fn try_from(p: u64) -> Result<Self> {
        PrimeGroup::new(p)
    }
}

impl From<PrimeGroup> for u64 {
    fn from(g: PrimeGroup) -> u64 {
        g.p
    }
}

impl PrimeGroup {
    /// Largest modulus accepted; keeps products of residues inside `i64`.
    pub const MAX_P: u64 = 1 << 31;

    pub fn new(p: u64) -> Result<Self> {
        if p > Self::MAX_P {
            return Err(Error::invalid("p", format!("{p} exceeds {}", Self::MAX_P)));
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeGroup { p })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.p as usize
    }

    #[inline]
    pub fn reduce(&self, a: i64) -> u64 {
        a.rem_euclid(self.p as i64) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    pub fn pow(&self, mut b: u64, mut e: u64) -> u64 {
        let mut acc = 1 % self.p;
        b %= self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if a % self.p == 0 {
            None
        } else {
            Some(self.pow(a, self.p - 2))
        }
    }

    /// Representative of `a` in `(-p/2, p/2]`.
    #[inline]
    pub fn centered(&self, a: u64) -> i64 {
        if 2 * a > self.p {
            a as i64 - self.p as i64
        } else {
            a as i64
        }
    }

    /// Numerator of `‖a/p‖_{R/Z}`, i.e. `min(a, p - a)`.
    #[inline]
    pub fn circle_num(&self, a: u64) -> u64 {
        let a = a % self.p;
        a.min(self.p - a)
    }

    pub fn elements(&self) -> std::ops::Range<u64> {
        0..self.p
    }
}

/// Smallest prime in `[lo, hi]`.
pub fn find_prime_in(lo: u64, hi: u64) -> Result<PrimeGroup> {
    if lo < 2 || lo >= hi {
        return Err(Error::invalid("lo", "need 2 <= lo < hi"));
    }
    (lo..=hi)
        .find(|&n| is_prime(n))
        .ok_or(Error::NoPrimeInRange { lo, hi })
        .and_then(PrimeGroup::new)
}
