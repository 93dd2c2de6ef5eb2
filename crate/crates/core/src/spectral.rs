//! The p-biased Fourier–Walsh basis `χ_S(x) = Π_{i∈S} (x(i) - p)/√(p(1-p))`.
//!
//! The forward transform is an `n`-stage butterfly. At each coordinate the pair
//! `(v₀, v₁)` (values with that coordinate 0 and 1) is mixed into
//!
//! ```text
//! unselected: (1-p)·v₀ + p·v₁
//! selected:   √(p(1-p))·(v₁ - v₀)
//! ```
//!
//! which is the one-coordinate transform `v ↦ (E[v], E[v·χ₁])`. The inverse
//! stage maps `(c₀, c₁)` back to `(c₀ - (p/σ)c₁, c₀ + ((1-p)/σ)c₁)`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::cube::{stationary_weights, BiasParam, Point, SubsetMask};
use crate::error::{Error, Result};
use crate::function::{BooleanFunction, TruthTable, EXACT_MAX_N};
use crate::sum::{compensated_sum, weighted_dot};

const PAR_MIN_LEN: usize = 1 << 14;

/// `σ = √(p(1-p))` and `λ = (1-2p)/σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisScale {
    pub sigma: f64,
    pub lambda: f64,
}

impl BasisScale {
    pub fn new(p: BiasParam) -> Self {
        let sigma = p.variance().sqrt();
        BasisScale {
            sigma,
            lambda: (1.0 - 2.0 * p.get()) / sigma,
        }
    }
}

/// Per-stage mixing weights of the forward butterfly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButterflyWeights {
    pub keep0: f64,
    pub keep1: f64,
    pub diff: f64,
}

impl ButterflyWeights {
    pub fn new(p: BiasParam) -> Self {
        ButterflyWeights {
            keep0: 1.0 - p.get(),
            keep1: p.get(),
            diff: p.variance().sqrt(),
        }
    }
}

/// Dense coefficient table `S ↦ f̂(S)`, indexed by subset word.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    p: BiasParam,
    coeffs: Vec<f64>,
}

impl Spectrum {
    pub fn from_coeffs(n: usize, p: BiasParam, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: coeffs.len(),
            });
        }
        Ok(Spectrum { n, p, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bias(&self) -> BiasParam {
        self.p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn at(&self, s: u64) -> f64 {
        self.coeffs[s as usize]
    }

    pub fn coeff(&self, s: SubsetMask) -> Result<f64> {
        check_dim(s.dim(), self.n)?;
        Ok(self.at(s.bits()))
    }

    /// CSV with columns `mask` (hex), `subset` (sorted 1-based indices) and
    /// `coefficient` (17 significant digits).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["mask", "subset", "coefficient"])?;
        for (s, &c) in self.coeffs.iter().enumerate() {
            let idx: Vec<String> = (0..self.n)
                .filter(|&i| s >> i & 1 == 1)
                .map(|i| (i + 1).to_string())
                .collect();
            out.write_record([
                format!("{s:#x}"),
                format!("{{{}}}", idx.join(",")),
                format!("{c:.16e}"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`Spectrum::write_csv`]; the bias is not stored.
    pub fn read_csv<R: Read>(r: R, p: BiasParam) -> Result<Spectrum> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mask = rec
                .get(0)
                .and_then(|m| m.strip_prefix("0x"))
                .and_then(|m| u64::from_str_radix(m, 16).ok())
                .ok_or_else(|| Error::Parse(format!("bad mask in {rec:?}")))?;
            let c: f64 = rec
                .get(2)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad coefficient in {rec:?}")))?;
            entries.push((mask, c));
        }
        let len = entries.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Parse(format!("{len} rows is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        let mut coeffs = vec![f64::NAN; len];
        for (mask, c) in entries {
            let slot = coeffs
                .get_mut(mask as usize)
                .ok_or_else(|| Error::Parse(format!("mask {mask:#x} out of range")))?;
            *slot = c;
        }
        if coeffs.iter().any(|c| c.is_nan()) {
            return Err(Error::Parse("missing or duplicated masks".into()));
        }
        Spectrum::from_coeffs(n, p, coeffs)
    }
}

fn check_dim(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

fn check_len(len: usize, n: usize) -> Result<()> {
    if n > EXACT_MAX_N {
        return Err(Error::DimensionTooLarge {
            op: "transform",
            n,
            max: EXACT_MAX_N,
        });
    }
    check_dim(len, 1 << n)
}

/// `χ_S(x)`.
pub fn chi_eval(s: SubsetMask, x: Point, p: BiasParam) -> Result<f64> {
    check_dim(x.dim(), s.dim())?;
    Ok(chi_word(s.bits(), x.bits(), p))
}

#[inline]
pub(crate) fn chi_word(s: u64, x: u64, p: BiasParam) -> f64 {
    let sigma = p.variance().sqrt();
    let up = (1.0 - p.get()) / sigma;
    let down = -p.get() / sigma;
    let ones = (s & x).count_ones() as i32;
    let zeros = (s & !x).count_ones() as i32;
    up.powi(ones) * down.powi(zeros)
}

/// `χ_S` as a dense vector over all points.
pub fn chi_vector(s: u64, n: usize, p: BiasParam) -> Vec<f64> {
    (0..1u64 << n).map(|x| chi_word(s, x, p)).collect()
}

fn butterfly_forward(data: &mut [f64], w: ButterflyWeights) {
    let stage = |block: &mut [f64], h: usize| {
        let (lo, hi) = block.split_at_mut(h);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let v0 = *a;
            let v1 = *b;
            *a = w.keep0 * v0 + w.keep1 * v1;
            *b = w.diff * (v1 - v0);
        }
    };
    run_stages(data, stage);
}

fn butterfly_inverse(data: &mut [f64], p: BiasParam) {
    let sigma = p.variance().sqrt();
    let down = p.get() / sigma;
    let up = (1.0 - p.get()) / sigma;
    let stage = |block: &mut [f64], h: usize| {
        let (lo, hi) = block.split_at_mut(h);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let c0 = *a;
            let c1 = *b;
            *a = c0 - down * c1;
            *b = c0 + up * c1;
        }
    };
    run_stages(data, stage);
}

fn run_stages(data: &mut [f64], stage: impl Fn(&mut [f64], usize) + Sync) {
    let len = data.len();
    let mut h = 1;
    while h < len {
        if len >= PAR_MIN_LEN {
            data.par_chunks_mut(2 * h).for_each(|b| stage(b, h));
        } else {
            data.chunks_mut(2 * h).for_each(|b| stage(b, h));
        }
        h *= 2;
    }
}

/// Coefficients `E_π[v·χ_S]` of a real-valued function given as a dense vector.
pub fn transform_values(values: &[f64], n: usize, p: BiasParam) -> Result<Spectrum> {
    transform_values_with(values, n, p, ButterflyWeights::new(p))
}

/// As [`transform_values`] with explicit stage weights.
pub fn transform_values_with(
    values: &[f64],
    n: usize,
    p: BiasParam,
    weights: ButterflyWeights,
) -> Result<Spectrum> {
    check_len(values.len(), n)?;
    let mut data = values.to_vec();
    butterfly_forward(&mut data, weights);
    Ok(Spectrum { n, p, coeffs: data })
}

pub fn transform(f: &BooleanFunction, p: BiasParam) -> Result<Spectrum> {
    let t = f.table_for("transform", EXACT_MAX_N)?;
    transform_values(&t.to_f64(), t.dim(), p)
}

/// Pointwise values `Σ_S ŝ(S)χ_S(x)`.
pub fn inverse_values(s: &Spectrum) -> Vec<f64> {
    let mut data = s.coeffs.clone();
    butterfly_inverse(&mut data, s.p);
    data
}

/// Reconstructs a Boolean function; values farther than 1e-6 from a bit are rejected.
pub fn inverse_transform(s: &Spectrum) -> Result<BooleanFunction> {
    let values = inverse_values(s);
    let bits = values
        .iter()
        .enumerate()
        .map(|(x, &v)| {
            if v.abs() <= 1e-6 {
                Ok(false)
            } else if (v - 1.0).abs() <= 1e-6 {
                Ok(true)
            } else {
                Err(Error::CorruptSpectrum {
                    point: x as u64,
                    value: v,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BooleanFunction::from_table(
        TruthTable::new(s.n, bits)?,
        "inverse",
    ))
}

/// `⟨f, g⟩ = Σ_x π(x) f(x) g(x)`.
pub fn inner_product(f: &BooleanFunction, g: &BooleanFunction, p: BiasParam) -> Result<f64> {
    let a = f.table_for("inner_product", EXACT_MAX_N)?;
    let b = g.table_for("inner_product", EXACT_MAX_N)?;
    check_dim(b.dim(), a.dim())?;
    Ok(inner_product_values(&a.to_f64(), &b.to_f64(), a.dim(), p))
}

pub fn inner_product_values(a: &[f64], b: &[f64], n: usize, p: BiasParam) -> f64 {
    weighted_dot(&stationary_weights(n, p), a, b)
}

/// Calls `visit(t, t', |T∩T'∩S|, |T∩T'∖S|)` for every pair with `TΔT' ⊆ S ⊆ T∪T'`.
///
/// Each coordinate of `S` lies in `T` only, `T'` only, or both; each
/// coordinate outside `S` lies in neither or both.
pub(crate) fn for_each_compatible_pair(s: u64, n: usize, mut visit: impl FnMut(u64, u64, u32, u32)) {
    let outside = crate::cube::dim_mask(n) & !s;
    let mut a = s;
    loop {
        let mut b = a;
        loop {
            let mut d = outside;
            loop {
                let t = a | d;
                let t2 = (s & !a) | b | d;
                visit(t, t2, b.count_ones(), d.count_ones());
                if d == 0 {
                    break;
                }
                d = (d - 1) & outside;
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & a;
        }
        if a == 0 {
            break;
        }
        a = (a - 1) & s;
    }
}

/// `⟨fg, χ_S⟩` from the spectra of `f` and `g`:
/// `Σ_{TΔT' ⊆ S ⊆ T∪T'} f̂(T) ĝ(T') λ^{|S∩T∩T'|}`.
pub fn product_coefficient_from_spectra(fs: &Spectrum, gs: &Spectrum, s: SubsetMask) -> Result<f64> {
    check_dim(gs.n, fs.n)?;
    check_dim(s.dim(), fs.n)?;
    let lambda = BasisScale::new(fs.p).lambda;
    let mut terms = Vec::new();
    for_each_compatible_pair(s.bits(), fs.n, |t, t2, shared_in, _| {
        terms.push(fs.at(t) * gs.at(t2) * lambda.powi(shared_in as i32));
    });
    Ok(compensated_sum(terms))
}

pub fn product_coefficient(
    f: &BooleanFunction,
    g: &BooleanFunction,
    s: SubsetMask,
    p: BiasParam,
) -> Result<f64> {
    product_coefficient_from_spectra(&transform(f, p)?, &transform(g, p)?, s)
}

/// `E[χ_S χ_T χ_R] = 1(SΔTΔR = S∩T∩R) · λ^{|S∩T∩R|}`.
pub fn tri_product_expectation(s: SubsetMask, t: SubsetMask, r: SubsetMask, p: BiasParam) -> Result<f64> {
    check_dim(t.dim(), s.dim())?;
    check_dim(r.dim(), s.dim())?;
    let (s, t, r) = (s.bits(), t.bits(), r.bits());
    let common = s & t & r;
    if s ^ t ^ r != common {
        return Ok(0.0);
    }
    Ok(BasisScale::new(p).lambda.powi(common.count_ones() as i32))
}

/// `χ_{SΔT}(x) · Π_{i∈S∩T} (1 + λ·χ_{i}(x))`, which equals `χ_S(x)χ_T(x)`.
pub fn pair_product_expand(s: SubsetMask, t: SubsetMask, x: Point, p: BiasParam) -> Result<f64> {
    check_dim(t.dim(), s.dim())?;
    check_dim(x.dim(), s.dim())?;
    let lambda = BasisScale::new(p).lambda;
    let shared = s.bits() & t.bits();
    let mut v = chi_word(s.bits() ^ t.bits(), x.bits(), p);
    for i in 0..s.dim() {
        if shared >> i & 1 == 1 {
            v *= 1.0 + lambda * chi_word(1 << i, x.bits(), p);
        }
    }
    Ok(v)
}

/// `D_i f` at every point via `(1/σ) Σ_{T∌i} f̂(T∪{i}) χ_T`.
pub fn derivative_expansion(f: &BooleanFunction, i: usize, p: BiasParam) -> Result<Vec<f64>> {
    let s = transform(f, p)?;
    derivative_from_spectrum(&s, i)
}

pub fn derivative_from_spectrum(s: &Spectrum, i: usize) -> Result<Vec<f64>> {
    if i == 0 || i > s.n {
        return Err(Error::IndexOutOfRange { index: i, n: s.n });
    }
    let bit = 1u64 << (i - 1);
    let sigma = s.p.variance().sqrt();
    let shifted: Vec<f64> = (0..1u64 << s.n)
        .map(|t| if t & bit == 0 { s.at(t | bit) / sigma } else { 0.0 })
        .collect();
    Ok(inverse_values(&Spectrum {
        n: s.n,
        p: s.p,
        coeffs: shifted,
    }))
}

/// `f(x^{i↦1}) - f(x^{i↦0})` at every point.
pub fn direct_derivative(f: &BooleanFunction, i: usize) -> Result<Vec<f64>> {
    let t = f.table_for("direct_derivative", EXACT_MAX_N)?;
    let n = t.dim();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    let bit = 1u64 << (i - 1);
    Ok((0..1u64 << n)
        .map(|x| t.get(x | bit) as u8 as f64 - t.get(x & !bit) as u8 as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::exact_nondegeneracy;

    const GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

    fn bias(p: f64) -> BiasParam {
        BiasParam::new(p).unwrap()
    }

    fn mask(bits: u64, n: usize) -> SubsetMask {
        SubsetMask::new(bits, n).unwrap()
    }

    /// Naive `O(4^n)` coefficient oracle.
    fn naive_transform(values: &[f64], n: usize, p: BiasParam) -> Vec<f64> {
        let w = stationary_weights(n, p);
        (0..1u64 << n)
            .map(|s| {
                compensated_sum((0..1u64 << n).map(|x| w[x as usize] * values[x as usize] * chi_word(s, x, p)))
            })
            .collect()
    }

    #[test]
    fn chi_examples() {
        let p = bias(0.5);
        let x1 = Point::new(0b101, 3).unwrap();
        let x0 = Point::new(0b100, 3).unwrap();
        assert_eq!(chi_eval(mask(0, 3), x1, p).unwrap(), 1.0);
        assert_eq!(chi_eval(mask(1, 3), x1, p).unwrap(), 1.0);
        assert_eq!(chi_eval(mask(1, 3), x0, p).unwrap(), -1.0);
        let v = chi_eval(mask(0b11, 2), Point::new(0b11, 2).unwrap(), bias(0.3)).unwrap();
        let oracle = (0.7 / 0.21f64.sqrt()).powi(2);
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 7.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn dictator_and_parity_spectra() {
        for &p in &GRID {
            let p = bias(p);
            let s = transform(&BooleanFunction::dictator(4).unwrap(), p).unwrap();
            assert!((s.at(0) - p.get()).abs() < 1e-15);
            assert!((s.at(1) - p.variance().sqrt()).abs() < 1e-15);
            assert!(s.coeffs()[2..].iter().all(|c| c.abs() < 1e-15));
        }
        let s = transform(&BooleanFunction::parity(2).unwrap(), bias(0.5)).unwrap();
        assert_eq!(s.coeffs(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn butterfly_matches_naive() {
        for n in 1..=10 {
            for &p in &[0.3, 0.5, 0.8] {
                let p = bias(p);
                let f = BooleanFunction::random(n, 100 + n as u64).unwrap();
                let v = f.truth_table().unwrap().to_f64();
                let fast = transform_values(&v, n, p).unwrap();
                let slow = naive_transform(&v, n, p);
                for (a, b) in fast.coeffs().iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12, "n={n} {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn parseval_and_variance() {
        for n in 1..=12 {
            for &p in &GRID {
                let p = bias(p);
                let f = BooleanFunction::random(n, n as u64).unwrap();
                let s = transform(&f, p).unwrap();
                let mean = exact_nondegeneracy(&f, p).unwrap();
                let energy = compensated_sum(s.coeffs().iter().map(|c| c * c));
                assert!((energy - mean).abs() < 1e-10);
                let var = compensated_sum(s.coeffs()[1..].iter().map(|c| c * c));
                assert!((var - (mean - mean * mean)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn round_trip_exhaustive_small() {
        for n in 1..=12 {
            for &p in &GRID {
                let f = BooleanFunction::random(n, 7 * n as u64).unwrap();
                let g = inverse_transform(&transform(&f, bias(p)).unwrap()).unwrap();
                assert_eq!(g.truth_table(), f.truth_table());
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let p = bias(0.4);
        let zero = Spectrum::from_coeffs(3, p, vec![0.0; 8]).unwrap();
        assert!(inverse_transform(&zero).unwrap().truth_table().unwrap().bits().iter().all(|b| !b));
        let s = Spectrum::from_coeffs(2, bias(0.5), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let f = inverse_transform(&s).unwrap();
        assert_eq!(f.truth_table().unwrap().bits(), &[true, false, false, true]);
        let bad = Spectrum::from_coeffs(2, bias(0.5), vec![0.5, 0.1, 0.0, 0.5]).unwrap();
        assert!(matches!(inverse_transform(&bad), Err(Error::CorruptSpectrum { .. })));
    }

    #[test]
    fn orthonormality() {
        for n in 1..=6 {
            for &p in &GRID {
                let p = bias(p);
                let chis: Vec<Vec<f64>> = (0..1u64 << n).map(|s| chi_vector(s, n, p)).collect();
                for s in 0..chis.len() {
                    for t in 0..chis.len() {
                        let ip = inner_product_values(&chis[s], &chis[t], n, p);
                        let want = if s == t { 1.0 } else { 0.0 };
                        assert!((ip - want).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let p = bias(0.3);
        let d = BooleanFunction::dictator(3).unwrap();
        assert!((inner_product(&d, &d, p).unwrap() - 0.3).abs() < 1e-15);
        let f = BooleanFunction::random(6, 1).unwrap();
        let g = BooleanFunction::random(6, 2).unwrap();
        let direct = inner_product(&f, &g, p).unwrap();
        let (fs, gs) = (transform(&f, p).unwrap(), transform(&g, p).unwrap());
        let spectral = compensated_sum(fs.coeffs().iter().zip(gs.coeffs()).map(|(a, b)| a * b));
        assert!((direct - spectral).abs() < 1e-10);
        assert!((inner_product(&f, &f, p).unwrap() - exact_nondegeneracy(&f, p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn compatible_pairs_are_exactly_the_condition() {
        let n = 4;
        for s in 0..16u64 {
            let mut seen = std::collections::HashSet::new();
            for_each_compatible_pair(s, n, |t, t2, a, b| {
                assert_eq!(a, (t & t2 & s).count_ones());
                assert_eq!(b, (t & t2 & !s).count_ones());
                assert!(seen.insert((t, t2)));
            });
            let brute = (0..16u64)
                .flat_map(|t| (0..16u64).map(move |t2| (t, t2)))
                .filter(|&(t, t2)| (t ^ t2) & !s == 0 && s & !(t | t2) == 0)
                .count();
            assert_eq!(seen.len(), brute);
        }
    }

    #[test]
    fn product_coefficient_examples() {
        let d = BooleanFunction::dictator(3).unwrap();
        let p = bias(0.3);
        assert!((product_coefficient(&d, &d, mask(0, 3), p).unwrap() - 0.3).abs() < 1e-14);
        let par = BooleanFunction::parity(2).unwrap();
        assert!((product_coefficient(&par, &par, mask(0, 2), bias(0.5)).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn product_coefficient_matches_transform_of_product() {
        for n in 1..=8 {
            for &p in &[0.2, 0.5, 0.7] {
                let p = bias(p);
                let f = BooleanFunction::random(n, 11 * n as u64).unwrap();
                let g = BooleanFunction::random(n, 13 * n as u64).unwrap();
                let (fs, gs) = (transform(&f, p).unwrap(), transform(&g, p).unwrap());
                let fg = transform(&f.and(&g).unwrap(), p).unwrap();
                for s in 0..1u64 << n {
                    let v = product_coefficient_from_spectra(&fs, &gs, mask(s, n)).unwrap();
                    assert!((v - fg.at(s)).abs() < 1e-10, "n={n} s={s:b}");
                }
            }
        }
    }

    #[test]
    fn tri_product_examples() {
        let one = mask(1, 1);
        let empty = mask(0, 1);
        assert_eq!(tri_product_expectation(one, one, empty, bias(0.3)).unwrap(), 1.0);
        assert_eq!(tri_product_expectation(one, one, one, bias(0.5)).unwrap(), 0.0);
        let v = tri_product_expectation(one, one, one, bias(0.3)).unwrap();
        // E[χ₁³] over the two points of {0,1}.
        let p = bias(0.3);
        let brute = 0.7 * chi_word(1, 0, p).powi(3) + 0.3 * chi_word(1, 1, p).powi(3);
        assert!((v - brute).abs() < 1e-14);
        assert!((v - 0.4 / 0.21f64.sqrt()).abs() < 1e-14);
        assert!((v - 0.87287).abs() < 1e-5);
    }

    #[test]
    fn tri_product_matches_brute_force() {
        for n in 1..=6 {
            for &p in &[0.1, 0.5, 0.7] {
                let p = bias(p);
                let w = stationary_weights(n, p);
                let chis: Vec<Vec<f64>> = (0..1u64 << n).map(|s| chi_vector(s, n, p)).collect();
                for s in 0..1u64 << n {
                    for t in 0..1u64 << n {
                        for r in 0..1u64 << n {
                            let brute = compensated_sum((0..1usize << n).map(|x| {
                                w[x] * chis[s as usize][x] * chis[t as usize][x] * chis[r as usize][x]
                            }));
                            let v = tri_product_expectation(mask(s, n), mask(t, n), mask(r, n), p).unwrap();
                            assert!((v - brute).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pair_product_identity() {
        for n in 1..=8 {
            let p = bias(0.35);
            for s in 0..1u64 << n {
                for t in [s, 0, (s * 7 + 3) & ((1 << n) - 1)] {
                    for x in 0..1u64 << n {
                        let v = pair_product_expand(mask(s, n), mask(t, n), Point::new(x, n).unwrap(), p).unwrap();
                        let direct = chi_word(s, x, p) * chi_word(t, x, p);
                        assert!((v - direct).abs() < 1e-10 * direct.abs().max(1.0));
                    }
                }
            }
        }
        let x = Point::new(1, 1).unwrap();
        assert_eq!(pair_product_expand(mask(1, 1), mask(1, 1), x, bias(0.5)).unwrap(), 1.0);
    }

    #[test]
    fn derivative_examples() {
        let p = bias(0.3);
        let d = BooleanFunction::dictator(3).unwrap();
        assert!(derivative_expansion(&d, 1, p).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(derivative_expansion(&d, 2, p).unwrap().iter().all(|v| v.abs() < 1e-12));
        let m = BooleanFunction::majority(3).unwrap();
        let spectral = derivative_expansion(&m, 1, bias(0.5)).unwrap();
        for x in 0..8u64 {
            let pivotal = (x >> 1 & 1) != (x >> 2 & 1);
            assert!((spectral[x as usize] - pivotal as u8 as f64).abs() < 1e-12);
        }
        assert!(derivative_expansion(&m, 4, p).is_err());
    }

    #[test]
    fn derivative_spectral_equals_direct() {
        for n in 1..=10 {
            let p = bias(0.27);
            let f = BooleanFunction::random(n, 5 + n as u64).unwrap();
            let s = transform(&f, p).unwrap();
            for i in 1..=n {
                let a = derivative_from_spectrum(&s, i).unwrap();
                let b = direct_derivative(&f, i).unwrap();
                assert!(a.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-10));
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = bias(0.3);
        let s = transform(&BooleanFunction::random(4, 3).unwrap(), p).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mask,subset,coefficient\n0x0,{},"));
        assert_eq!(Spectrum::read_csv(&buf[..], p).unwrap(), s);
    }
}
