//! Points, subsets and the p-biased product measure on `{0,1}^n`.
//!
//! Coordinates are numbered `1..=n` in the public API; coordinate `i` lives at
//! word bit `i - 1`. Truth tables and dense vectors are indexed by the
//! little-endian point word, so entry `x` of a vector is the value at the point
//! whose bit `i - 1` equals `x(i)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension a single machine word can hold.
pub const MAX_WORD_DIM: usize = 64;

/// Bias `p ∈ (0, 1)` of each coordinate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BiasParam(f64);

impl BiasParam {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(BiasParam(p))
        } else {
            Err(Error::InvalidBias(p))
        }
    }

    /// Degenerate biases for test fixtures only.
    #[cfg(test)]
    pub(crate) fn unchecked(p: f64) -> Self {
        BiasParam(p)
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `p(1-p)`.
    #[inline]
    pub fn variance(self) -> f64 {
        self.0 * (1.0 - self.0)
    }

    /// Probability that resampling coordinate `i` changes it, given its current value.
    #[inline]
    pub fn flip_rate(self, bit: bool) -> f64 {
        if bit {
            1.0 - self.0
        } else {
            self.0
        }
    }

    /// Probability that resampling leaves the coordinate as it was.
    #[inline]
    pub fn stay_rate(self, bit: bool) -> f64 {
        if bit {
            self.0
        } else {
            1.0 - self.0
        }
    }
}

impl TryFrom<f64> for BiasParam {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        BiasParam::new(p)
    }
}

impl From<BiasParam> for f64 {
    fn from(p: BiasParam) -> f64 {
        p.0
    }
}

#[inline]
pub(crate) fn dim_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_word(bits: u64, n: usize) -> Result<()> {
    if n == 0 || n > MAX_WORD_DIM {
        return Err(Error::InvalidArgument(format!(
            "dimension must be in 1..={MAX_WORD_DIM}, got {n}"
        )));
    }
    if bits & !dim_mask(n) != 0 {
        return Err(Error::BitsOutOfRange { bits, n });
    }
    Ok(())
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i == 0 || i > n {
        Err(Error::IndexOutOfRange { index: i, n })
    } else {
        Ok(())
    }
}

/// A point `x ∈ {0,1}^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    bits: u64,
    n: usize,
}

impl Point {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        check_word(bits, n)?;
        Ok(Point { bits, n })
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn dim(self) -> usize {
        self.n
    }

    /// Hamming weight `|x|`.
    pub fn weight(self) -> u32 {
        self.bits.count_ones()
    }

    /// Coordinate `x(i)`, `i ∈ 1..=n`.
    pub fn coord(self, i: usize) -> Result<bool> {
        check_index(i, self.n)?;
        Ok(self.bits >> (i - 1) & 1 == 1)
    }

    /// `x ⊕ e_i`.
    pub fn flip_bit(self, i: usize) -> Result<Point> {
        check_index(i, self.n)?;
        Ok(Point {
            bits: self.bits ^ (1 << (i - 1)),
            n: self.n,
        })
    }

    /// `x^{i ↦ y}`.
    pub fn set_bit(self, i: usize, y: bool) -> Result<Point> {
        check_index(i, self.n)?;
        let m = 1u64 << (i - 1);
        let bits = if y { self.bits | m } else { self.bits & !m };
        Ok(Point { bits, n: self.n })
    }

    /// `R_i x`: coordinate `i` replaced by a fresh Bernoulli(p) draw.
    pub fn resample_bit<R: Rng + ?Sized>(self, i: usize, p: BiasParam, rng: &mut R) -> Result<Point> {
        let y = rng.random::<f64>() < p.get();
        self.set_bit(i, y)
    }
}

/// A subset `S ⊆ [n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubsetMask {
    bits: u64,
    n: usize,
}

impl SubsetMask {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        check_word(bits, n)?;
        Ok(SubsetMask { bits, n })
    }

    pub fn empty(n: usize) -> Result<Self> {
        SubsetMask::new(0, n)
    }

    pub fn full(n: usize) -> Result<Self> {
        SubsetMask::new(dim_mask(n), n)
    }

    /// Builds a subset from 1-based coordinate indices.
    pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &i in indices {
            check_index(i, n)?;
            bits |= 1 << (i - 1);
        }
        SubsetMask::new(bits, n)
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn dim(self) -> usize {
        self.n
    }

    /// `|S|`.
    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i >= 1 && i <= self.n && self.bits >> (i - 1) & 1 == 1
    }

    /// Sorted 1-based indices.
    pub fn indices(self) -> Vec<usize> {
        (1..=self.n).filter(|&i| self.contains(i)).collect()
    }
}

/// The product measure `((1-p)δ_0 + pδ_1)^{⊗n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasure {
    pub p: BiasParam,
    pub n: usize,
}

impl ProductMeasure {
    pub fn new(p: BiasParam, n: usize) -> Self {
        ProductMeasure { p, n }
    }

    /// `p^{|x|}(1-p)^{n-|x|}`.
    pub fn weight(&self, x: Point) -> Result<f64> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.dim(),
            });
        }
        Ok(weight_of_word(x.bits(), self.n, self.p))
    }

    /// Dense vector of all `2^n` weights, indexed by point word.
    pub fn weights(&self) -> Vec<f64> {
        stationary_weights(self.n, self.p)
    }

    /// Draws `X_0 ~ π_n` as a word (`n ≤ 64`).
    pub fn sample_word<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let p = self.p.get();
        (0..self.n).fold(0u64, |acc, i| {
            if rng.random::<f64>() < p {
                acc | (1 << i)
            } else {
                acc
            }
        })
    }
}

#[inline]
pub(crate) fn weight_of_word(bits: u64, n: usize, p: BiasParam) -> f64 {
    let k = bits.count_ones() as i32;
    p.get().powi(k) * (1.0 - p.get()).powi(n as i32 - k)
}

/// Builds the weight vector by doubling, one coordinate at a time.
pub(crate) fn stationary_weights(n: usize, p: BiasParam) -> Vec<f64> {
    let p = p.get();
    let mut w = Vec::with_capacity(1 << n);
    w.push(1.0);
    for _ in 0..n {
        let len = w.len();
        for j in 0..len {
            let v = w[j];
            w[j] = v * (1.0 - p);
            w.push(v * p);
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sum::compensated_sum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(bits: u64, n: usize) -> Point {
        Point::new(bits, n).unwrap()
    }

    #[test]
    fn bias_rejects_endpoints() {
        assert!(BiasParam::new(0.0).is_err());
        assert!(BiasParam::new(1.0).is_err());
        assert!(BiasParam::new(f64::NAN).is_err());
        assert!(BiasParam::new(0.3).is_ok());
    }

    #[test]
    fn point_rejects_high_bits() {
        assert!(matches!(Point::new(0b1000, 3), Err(Error::BitsOutOfRange { .. })));
    }

    #[test]
    fn flip_examples() {
        assert_eq!(pt(0b000, 3).flip_bit(2).unwrap(), pt(0b010, 3));
        assert_eq!(pt(0b111, 3).flip_bit(1).unwrap(), pt(0b110, 3));
        assert!(matches!(pt(0, 3).flip_bit(4), Err(Error::IndexOutOfRange { .. })));
        assert!(pt(0, 3).flip_bit(0).is_err());
    }

    #[test]
    fn set_examples() {
        assert_eq!(pt(0b010, 3).set_bit(2, true).unwrap(), pt(0b010, 3));
        assert_eq!(pt(0b010, 3).set_bit(2, false).unwrap(), pt(0b000, 3));
    }

    #[test]
    fn flip_and_set_exhaustive() {
        for n in 1..=10 {
            for bits in 0..1u64 << n {
                let x = pt(bits, n);
                for i in 1..=n {
                    assert_eq!(x.flip_bit(i).unwrap().flip_bit(i).unwrap(), x);
                    assert_eq!(x.set_bit(i, x.coord(i).unwrap()).unwrap(), x);
                    for y in [false, true] {
                        assert_eq!(x.set_bit(i, y).unwrap().coord(i).unwrap(), y);
                    }
                }
            }
        }
    }

    #[test]
    fn resample_with_certain_bias_sets_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = BiasParam::unchecked(1.0);
        for bits in 0..8 {
            for i in 1..=3 {
                assert!(pt(bits, 3).resample_bit(i, one, &mut rng).unwrap().coord(i).unwrap());
            }
        }
    }

    #[test]
    fn resample_leaves_other_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = BiasParam::new(0.3).unwrap();
        for n in 1..=10 {
            for bits in 0..1u64 << n {
                let x = pt(bits, n);
                for i in 1..=n {
                    let y = x.resample_bit(i, p, &mut rng).unwrap();
                    assert_eq!((y.bits() ^ x.bits()) & !(1 << (i - 1)), 0);
                }
            }
        }
    }

    #[test]
    fn resample_change_rate() {
        // P(R_i x != x) = 2p(1-p) under stationarity.
        let p = BiasParam::new(0.3).unwrap();
        let mu = ProductMeasure::new(p, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000;
        let changed = (0..trials)
            .filter(|_| {
                let x = pt(mu.sample_word(&mut rng), 4);
                x.resample_bit(3, p, &mut rng).unwrap() != x
            })
            .count();
        let q = 2.0 * p.variance();
        let se = (q * (1.0 - q) / trials as f64).sqrt();
        assert!((changed as f64 / trials as f64 - q).abs() < 3.0 * se);
    }

    #[test]
    fn weight_examples() {
        let half = ProductMeasure::new(BiasParam::new(0.5).unwrap(), 2);
        for b in 0..4 {
            assert_eq!(half.weight(pt(b, 2)).unwrap(), 0.25);
        }
        let mu = ProductMeasure::new(BiasParam::new(0.3).unwrap(), 3);
        assert!((mu.weight(pt(0b101, 3)).unwrap() - 0.063).abs() < 1e-15);
        assert!(mu.weight(pt(0, 2)).is_err());
    }

    #[test]
    fn weights_normalised() {
        for &p in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let p = BiasParam::new(p).unwrap();
            for n in 1..=16 {
                let w = stationary_weights(n, p);
                assert!((compensated_sum(w.iter().copied()) - 1.0).abs() < 1e-12);
                if n <= 6 {
                    for (x, &wx) in w.iter().enumerate() {
                        assert!((wx - weight_of_word(x as u64, n, p)).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn subset_indices() {
        let s = SubsetMask::from_indices(&[3, 1], 4).unwrap();
        assert_eq!(s.bits(), 0b101);
        assert_eq!(s.indices(), vec![1, 3]);
        assert_eq!(s.len(), 2);
    }
}
