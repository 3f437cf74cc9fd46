//! The finite database universe: `n` rows over an alphabet of size `m`.
//!
//! A database is stored as its base-`m` integer encoding with row 0 as the
//! least significant digit, so every table over the universe is a dense
//! array indexed by [`DbIndex`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on the number of states `m^n`.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct UniverseSpec {
    n: usize,
    m: usize,
    #[serde(skip)]
    states: usize,
}

/// Base-`m` encoding of one database, in `[0, m^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DbIndex(pub usize);

impl DbIndex {
    pub fn get(self) -> usize {
        self.0
    }
}

impl From<usize> for DbIndex {
    fn from(v: usize) -> Self {
        DbIndex(v)
    }
}

impl fmt::Display for DbIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UniverseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, m={})", self.n, self.m)
    }
}

impl UniverseSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Self::with_cap(n, m, DEFAULT_STATE_CAP)
    }

    /// Builds a universe, rejecting it when `m^n` overflows or exceeds `cap`.
    pub fn with_cap(n: usize, m: usize, cap: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidUniverse(format!("n must be >= 1, got {n}")));
        }
        if m < 2 {
            return Err(Error::InvalidUniverse(format!("m must be >= 2, got {m}")));
        }
        let mut states: u128 = 1;
        for _ in 0..n {
            states = states.saturating_mul(m as u128);
            if states > cap as u128 {
                return Err(Error::StateCapExceeded { states, cap });
            }
        }
        Ok(UniverseSpec {
            n,
            m,
            states: states as usize,
        })
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Alphabet size.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of databases, `m^n`.
    pub fn states(&self) -> usize {
        self.states
    }

    /// Largest meaningful distortion for the curve `h`, `n(m-1)/m`.
    pub fn max_exponential_distortion(&self) -> f64 {
        self.n as f64 * (self.m - 1) as f64 / self.m as f64
    }

    pub fn index(&self, value: usize) -> Result<DbIndex> {
        self.check(DbIndex(value))?;
        Ok(DbIndex(value))
    }

    pub fn indices(&self) -> impl Iterator<Item = DbIndex> {
        (0..self.states).map(DbIndex)
    }

    fn check(&self, x: DbIndex) -> Result<()> {
        if x.0 >= self.states {
            return Err(Error::IndexOutOfRange {
                index: x.0,
                states: self.states,
            });
        }
        Ok(())
    }

    /// Row values of `x`, row 0 first.
    pub fn digits(&self, x: DbIndex) -> Result<Vec<usize>> {
        self.check(x)?;
        let mut v = x.0;
        Ok((0..self.n)
            .map(|_| {
                let d = v % self.m;
                v /= self.m;
                d
            })
            .collect())
    }

    /// Encodes row values (row 0 first) into an index.
    pub fn encode(&self, digits: &[usize]) -> Result<DbIndex> {
        if digits.len() != self.n {
            return Err(Error::OutOfRange(format!(
                "expected {} row values, got {}",
                self.n,
                digits.len()
            )));
        }
        let mut value = 0;
        for &d in digits.iter().rev() {
            if d >= self.m {
                return Err(Error::OutOfRange(format!(
                    "row value {d} outside alphabet of size {}",
                    self.m
                )));
            }
            value = value * self.m + d;
        }
        Ok(DbIndex(value))
    }

    /// Number of rows on which `x` and `y` differ.
    pub fn hamming(&self, x: DbIndex, y: DbIndex) -> Result<usize> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.hamming_unchecked(x.0, y.0))
    }

    pub(crate) fn hamming_unchecked(&self, mut a: usize, mut b: usize) -> usize {
        let mut dist = 0;
        for _ in 0..self.n {
            if a % self.m != b % self.m {
                dist += 1;
            }
            a /= self.m;
            b /= self.m;
        }
        dist
    }

    /// All databases at Hamming distance exactly one from `x`, ascending.
    pub fn neighbors(&self, x: DbIndex) -> Result<Vec<DbIndex>> {
        self.check(x)?;
        let mut out: Vec<DbIndex> = self
            .neighbors_unchecked(x.0)
            .map(DbIndex)
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    pub(crate) fn neighbors_unchecked(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.m;
        (0..self.n).flat_map(move |row| {
            let place = m.pow(row as u32);
            let digit = (x / place) % m;
            (0..m)
                .filter(move |&v| v != digit)
                .map(move |v| x - digit * place + v * place)
        })
    }

    /// Size of the Hamming sphere of radius `l`: `C(n, l) (m-1)^l`.
    pub fn sphere_size(&self, l: usize) -> Result<u128> {
        if l > self.n {
            return Err(Error::OutOfRange(format!(
                "sphere radius {l} exceeds n={}",
                self.n
            )));
        }
        Ok(binomial(self.n, l) * ((self.m - 1) as u128).pow(l as u32))
    }

    /// Dense `N x N` table of Hamming distances, row-major.
    pub fn distance_table(&self) -> Vec<u8> {
        let n = self.states;
        let mut table = vec![0u8; n * n];
        for x in 0..n {
            for y in 0..n {
                table[x * n + y] = self.hamming_unchecked(x, y) as u8;
            }
        }
        table
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_specs() {
        assert!(UniverseSpec::new(0, 2).is_err());
        assert!(UniverseSpec::new(2, 1).is_err());
        assert!(matches!(
            UniverseSpec::new(64, 2),
            Err(Error::StateCapExceeded { .. })
        ));
        assert!(matches!(
            UniverseSpec::new(200, 1000),
            Err(Error::StateCapExceeded { .. })
        ));
        assert_eq!(UniverseSpec::with_cap(3, 3, 27).unwrap().states(), 27);
        assert!(UniverseSpec::with_cap(3, 3, 26).is_err());
    }

    #[test]
    fn hamming_examples() {
        let s = UniverseSpec::new(2, 3).unwrap();
        assert_eq!(s.hamming(DbIndex(0), DbIndex(0)).unwrap(), 0);
        assert_eq!(s.hamming(DbIndex(0), DbIndex(4)).unwrap(), 2);
        let s = UniverseSpec::new(4, 2).unwrap();
        assert_eq!(s.hamming(DbIndex(0), DbIndex(8)).unwrap(), 1);
        assert!(s.hamming(DbIndex(0), DbIndex(16)).is_err());
    }

    #[test]
    fn neighbor_examples() {
        let s = UniverseSpec::new(1, 2).unwrap();
        assert_eq!(s.neighbors(DbIndex(0)).unwrap(), vec![DbIndex(1)]);
        let s = UniverseSpec::new(2, 2).unwrap();
        assert_eq!(s.neighbors(DbIndex(0)).unwrap(), vec![DbIndex(1), DbIndex(2)]);
        let s = UniverseSpec::new(2, 3).unwrap();
        assert_eq!(
            s.neighbors(DbIndex(0)).unwrap(),
            vec![DbIndex(1), DbIndex(2), DbIndex(3), DbIndex(6)]
        );
        assert!(s.neighbors(DbIndex(9)).is_err());
    }

    #[test]
    fn sphere_examples() {
        let s = UniverseSpec::new(4, 2).unwrap();
        assert_eq!(s.sphere_size(0).unwrap(), 1);
        assert_eq!(s.sphere_size(2).unwrap(), 6);
        assert!(s.sphere_size(5).is_err());
        let s = UniverseSpec::new(3, 3).unwrap();
        assert_eq!(s.sphere_size(3).unwrap(), 8);
    }

    #[test]
    fn digits_round_trip() {
        let s = UniverseSpec::new(3, 4).unwrap();
        for x in s.indices() {
            let d = s.digits(x).unwrap();
            assert_eq!(s.encode(&d).unwrap(), x);
        }
        assert_eq!(s.digits(DbIndex(1)).unwrap(), vec![1, 0, 0]);
    }
}
