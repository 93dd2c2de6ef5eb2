//! Matrix-free jump-chain operators `Q_n`, `Q_∂f`, `Q_f` and the quantities
//! built from them: influences, the sensitivity function and the boundary
//! pairing `π^T Q_∂f χ_S`.
//!
//! Row `x` of `Q_n` has diagonal `(1/n)Σ_i ((1-p)(1-x(i)) + p·x(i))` and weight
//! `(1/n)(p(1-x(i)) + (1-p)x(i))` on each neighbour `x ⊕ e_i`. `Q_∂f` keeps only
//! the neighbours across which `f` changes and has zero diagonal.

use rayon::prelude::*;
use serde::Serialize;

use crate::cube::{stationary_weights, BiasParam, SubsetMask};
use crate::error::{Error, Result};
use crate::function::{is_increasing, BooleanFunction, TruthTable, EXACT_MAX_N};
use crate::spectral::{chi_vector, for_each_compatible_pair, transform, BasisScale, Spectrum};
use crate::sum::{compensated_sum, weighted_dot, CompensatedSum};

const PAR_MIN_LEN: usize = 1 << 12;

/// Operators are applied to dense vectors only up to this dimension.
pub const OPERATOR_MAX_N: usize = EXACT_MAX_N;
pub const PAIRING_MAX_N: usize = 12;
pub const GENERAL_PAIRING_MAX_N: usize = 8;
pub const EIGEN_MAX_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    /// Jump-chain transition matrix.
    Qn,
    /// Boundary part: transitions that change `f`.
    Qdf,
    /// `Q_n - Q_∂f`.
    Qf,
}

/// A matrix-free operator on `ℝ^{{0,1}^n}`.
#[derive(Debug, Clone, Copy)]
pub struct OperatorHandle<'a> {
    table: Option<&'a TruthTable>,
    p: BiasParam,
    n: usize,
    kind: OperatorKind,
}

impl<'a> OperatorHandle<'a> {
    pub fn new(f: &'a BooleanFunction, p: BiasParam, kind: OperatorKind) -> Result<Self> {
        let table = f.table_for("operator apply", OPERATOR_MAX_N)?;
        Ok(OperatorHandle {
            table: Some(table),
            p,
            n: table.dim(),
            kind,
        })
    }

    /// `Q_n` alone; needs no function.
    pub fn walk(n: usize, p: BiasParam) -> Result<Self> {
        if n == 0 || n > OPERATOR_MAX_N {
            return Err(Error::DimensionTooLarge {
                op: "operator apply",
                n,
                max: OPERATOR_MAX_N,
            });
        }
        Ok(OperatorHandle {
            table: None,
            p,
            n,
            kind: OperatorKind::Qn,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, x: u64, v: &[f64]) -> f64 {
        let n = self.n;
        let p = self.p.get();
        let inv_n = 1.0 / n as f64;
        let ones = x.count_ones() as f64;
        let diag = inv_n * ((1.0 - p) * (n as f64 - ones) + p * ones);
        let fx = self.table.map(|t| t.get(x));
        let mut acc = match self.kind {
            OperatorKind::Qdf => 0.0,
            _ => diag * v[x as usize],
        };
        for i in 0..n {
            let y = x ^ (1 << i);
            let rate = if x >> i & 1 == 1 { 1.0 - p } else { p };
            let keep = match (self.kind, fx) {
                (OperatorKind::Qn, _) => true,
                (OperatorKind::Qdf, Some(fx)) => fx != self.table.unwrap().get(y),
                (OperatorKind::Qf, Some(fx)) => fx == self.table.unwrap().get(y),
                (_, None) => true,
            };
            if keep {
                acc += inv_n * rate * v[y as usize];
            }
        }
        acc
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != 1 << self.n {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n,
                found: v.len(),
            });
        }
        let len = v.len() as u64;
        Ok(if v.len() >= PAR_MIN_LEN {
            (0..len).into_par_iter().map(|x| self.row(x, v)).collect()
        } else {
            (0..len).map(|x| self.row(x, v)).collect()
        })
    }

    /// `(Q - I)v` in place of a separate identity subtraction.
    pub fn apply_minus_identity(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut w = self.apply(v)?;
        w.iter_mut().zip(v).for_each(|(w, v)| *w -= v);
        Ok(w)
    }
}

/// `‖(Q_n - I)χ_S + (|S|/n)χ_S‖_∞`.
pub fn eigen_residual(s: SubsetMask, p: BiasParam) -> Result<f64> {
    let n = s.dim();
    if n > EIGEN_MAX_N {
        return Err(Error::DimensionTooLarge {
            op: "eigen_residual",
            n,
            max: EIGEN_MAX_N,
        });
    }
    let chi = chi_vector(s.bits(), n, p);
    let w = OperatorHandle::walk(n, p)?.apply_minus_identity(&chi)?;
    let eig = s.len() as f64 / n as f64;
    Ok(w.iter()
        .zip(&chi)
        .map(|(w, c)| (w + eig * c).abs())
        .fold(0.0, f64::max))
}

/// `(Q_∂f 1)(x) = (1/n) Σ_i (p(1-x(i)) + (1-p)x(i)) · 1(f(x) ≠ f(x ⊕ e_i))`.
pub fn sensitivity_function(f: &BooleanFunction, p: BiasParam) -> Result<Vec<f64>> {
    let t = f.table_for("sensitivity_function", OPERATOR_MAX_N)?;
    let n = t.dim();
    let inv_n = 1.0 / n as f64;
    let row = |x: u64| {
        let fx = t.get(x);
        (0..n)
            .filter(|&i| t.get(x ^ (1 << i)) != fx)
            .map(|i| p.flip_rate(x >> i & 1 == 1))
            .sum::<f64>()
            * inv_n
    };
    let len = 1u64 << n;
    Ok(if len as usize >= PAR_MIN_LEN {
        (0..len).into_par_iter().map(row).collect()
    } else {
        (0..len).map(row).collect()
    })
}

/// Per-coordinate influences `I_i(f) = P(f(X_0) ≠ f(R_i X_0))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceProfile {
    pub per_bit: Vec<f64>,
    pub total: f64,
    pub sq_sum: f64,
    /// `I_i / (2p(1-p))`, the flip-influence convention.
    pub normalized: Vec<f64>,
}

impl InfluenceProfile {
    fn from_per_bit(per_bit: Vec<f64>, p: BiasParam) -> Self {
        let total = compensated_sum(per_bit.iter().copied());
        let sq_sum = compensated_sum(per_bit.iter().map(|v| v * v));
        let scale = 2.0 * p.variance();
        let normalized = per_bit.iter().map(|v| v / scale).collect();
        InfluenceProfile {
            per_bit,
            total,
            sq_sum,
            normalized,
        }
    }

    /// All coordinate influences equal within `tol`.
    pub fn is_regular(&self, tol: f64) -> bool {
        let (lo, hi) = self
            .per_bit
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo <= tol
    }
}

/// Exact profile via `I_i = E[(p(1-x(i)) + (1-p)x(i)) · (D_i f(x))²]`.
pub fn influence_profile(f: &BooleanFunction, p: BiasParam) -> Result<InfluenceProfile> {
    let t = f.table_for("influence_profile", EXACT_MAX_N)?;
    let n = t.dim();
    let w = stationary_weights(n, p);
    let per_bit = (0..n)
        .map(|i| {
            let bit = 1u64 << i;
            compensated_sum((0..1u64 << n).filter_map(|x| {
                let d = t.get(x | bit) as i8 - t.get(x & !bit) as i8;
                (d != 0).then(|| w[x as usize] * p.flip_rate(x & bit != 0))
            }))
        })
        .collect();
    Ok(InfluenceProfile::from_per_bit(per_bit, p))
}

/// Influences straight from the resampling definition: average over `X_0 ~ π`
/// and the resampled value `y ~ Bernoulli(p)` of `1(f(x) ≠ f(x^{i↦y}))`.
pub fn influence_by_resampling(f: &BooleanFunction, p: BiasParam) -> Result<InfluenceProfile> {
    let t = f.table_for("influence_by_resampling", EXACT_MAX_N)?;
    let n = t.dim();
    let w = stationary_weights(n, p);
    let per_bit = (0..n)
        .map(|i| {
            let bit = 1u64 << i;
            let mut acc = CompensatedSum::new();
            for x in 0..1u64 << n {
                let fx = t.get(x);
                if t.get(x & !bit) != fx {
                    acc.add(w[x as usize] * (1.0 - p.get()));
                }
                if t.get(x | bit) != fx {
                    acc.add(w[x as usize] * p.get());
                }
            }
            acc.value()
        })
        .collect();
    Ok(InfluenceProfile::from_per_bit(per_bit, p))
}

/// `π^T Q_∂f χ_S` computed by independent routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingReport {
    pub subset: Vec<usize>,
    /// Apply `Q_∂f` to `χ_S`, then average against `π`.
    pub direct: f64,
    /// `⟨Q_∂f 1, χ_S⟩`.
    pub lemma31: f64,
    /// Linear Fourier formula; increasing `f` only.
    pub lemma32: Option<f64>,
    /// Quadratic Fourier formula over compatible pairs; `n ≤ 8`.
    pub general: Option<f64>,
}

impl PairingReport {
    pub fn max_disagreement(&self) -> f64 {
        [Some(self.lemma31), self.lemma32, self.general]
            .into_iter()
            .flatten()
            .map(|v| (v - self.direct).abs())
            .fold(0.0, f64::max)
    }

    /// Fails when any route differs from the direct one by more than `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let d = self.max_disagreement();
        if d > tol {
            Err(Error::InvalidArgument(format!(
                "boundary pairing routes disagree by {d:e} for S = {:?}",
                self.subset
            )))
        } else {
            Ok(())
        }
    }
}

/// Shared state for evaluating the pairing at many subsets of one `(f, p)`.
pub struct PairingContext<'a> {
    f: &'a BooleanFunction,
    p: BiasParam,
    n: usize,
    weights: Vec<f64>,
    sensitivity: Vec<f64>,
    spectrum: Spectrum,
    increasing: bool,
}

impl<'a> PairingContext<'a> {
    pub fn new(f: &'a BooleanFunction, p: BiasParam) -> Result<Self> {
        f.table_for("boundary_pairing", PAIRING_MAX_N)?;
        Ok(PairingContext {
            f,
            p,
            n: f.dim(),
            weights: stationary_weights(f.dim(), p),
            sensitivity: sensitivity_function(f, p)?,
            spectrum: transform(f, p)?,
            increasing: is_increasing(f)?,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn direct(&self, s: u64) -> Result<f64> {
        let chi = chi_vector(s, self.n, self.p);
        let q = OperatorHandle::new(self.f, self.p, OperatorKind::Qdf)?.apply(&chi)?;
        Ok(compensated_sum(self.weights.iter().zip(&q).map(|(w, q)| w * q)))
    }

    pub fn lemma31(&self, s: u64) -> f64 {
        let chi = chi_vector(s, self.n, self.p);
        weighted_dot(&self.weights, &self.sensitivity, &chi)
    }

    pub fn lemma32(&self, s: u64) -> Option<f64> {
        self.increasing
            .then(|| pairing_increasing(&self.spectrum, s))
    }

    pub fn general(&self, s: u64) -> Option<f64> {
        (self.n <= GENERAL_PAIRING_MAX_N).then(|| pairing_general(&self.spectrum, s))
    }

    pub fn report(&self, s: SubsetMask) -> Result<PairingReport> {
        if s.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: s.dim(),
            });
        }
        let b = s.bits();
        Ok(PairingReport {
            subset: s.indices(),
            direct: self.direct(b)?,
            lemma31: self.lemma31(b),
            lemma32: self.lemma32(b),
            general: self.general(b),
        })
    }
}

pub fn boundary_pairing(f: &BooleanFunction, s: SubsetMask, p: BiasParam) -> Result<PairingReport> {
    PairingContext::new(f, p)?.report(s)
}

/// `(1/n)[(1-2p)|S| f̂(S) + 2√(p(1-p)) Σ_{i∉S} f̂(S∪{i})]`, valid for increasing `f`.
pub fn pairing_increasing(spectrum: &Spectrum, s: u64) -> f64 {
    fourier_bracket(spectrum, s) / spectrum.dim() as f64
}

/// `n·π^T Q_∂f χ_S` for increasing `f`: `(1-2p)|S| f̂(S) + 2σ Σ_{i∉S} f̂(S∪{i})`.
pub fn fourier_bracket(spectrum: &Spectrum, s: u64) -> f64 {
    let n = spectrum.dim();
    let p = spectrum.bias();
    let sigma = p.variance().sqrt();
    let up = compensated_sum(
        (0..n)
            .filter(|&i| s >> i & 1 == 0)
            .map(|i| spectrum.at(s | 1 << i)),
    );
    (1.0 - 2.0 * p.get()) * s.count_ones() as f64 * spectrum.at(s) + 2.0 * sigma * up
}

/// General Fourier form of `π^T Q_∂f χ_S`, valid for every `f`:
///
/// ```text
/// (1/n) Σ_{TΔT' ⊆ S ⊆ T∪T'} (2|T∩T'∖S| + |T∩T'∩S|) f̂(T) f̂(T') λ^{|S∩T∩T'|}
/// ```
///
/// It follows from writing `1(f(x) ≠ f(x⊕e_i)) = (D_i f(x))²`, expanding `D_i f`
/// in the basis and taking the triple-product expectation against `χ_S`.
pub fn pairing_general(spectrum: &Spectrum, s: u64) -> f64 {
    let n = spectrum.dim();
    let lambda = BasisScale::new(spectrum.bias()).lambda;
    let mut acc = CompensatedSum::new();
    for_each_compatible_pair(s, n, |t, t2, shared_in, shared_out| {
        let m = 2 * shared_out + shared_in;
        if m > 0 {
            acc.add(m as f64 * spectrum.at(t) * spectrum.at(t2) * lambda.powi(shared_in as i32));
        }
    });
    acc.value() / n as f64
}

/// The same double sum weighted by `σ·|T∩T'|` instead. It does not equal the
/// pairing (already at `S = ∅` it gives `σ/2` times the influence); the verify
/// report uses it only to record that residual.
pub fn pairing_sigma_weighted(spectrum: &Spectrum, s: u64) -> f64 {
    let n = spectrum.dim();
    let scale = BasisScale::new(spectrum.bias());
    let mut acc = CompensatedSum::new();
    for_each_compatible_pair(s, n, |t, t2, shared_in, shared_out| {
        let m = shared_in + shared_out;
        if m > 0 {
            acc.add(m as f64 * spectrum.at(t) * spectrum.at(t2) * scale.lambda.powi(shared_in as i32));
        }
    });
    scale.sigma * acc.value() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bias(p: f64) -> BiasParam {
        BiasParam::new(p).unwrap()
    }

    fn mask(bits: u64, n: usize) -> SubsetMask {
        SubsetMask::new(bits, n).unwrap()
    }

    /// Dense `Q_n` built entry by entry for cross-checking the matrix-free apply.
    fn dense_walk(n: usize, p: f64) -> Vec<Vec<f64>> {
        let len = 1usize << n;
        let mut q = vec![vec![0.0; len]; len];
        for x in 0..len {
            for i in 0..n {
                let xi = x >> i & 1;
                q[x][x] += ((1 - xi) as f64 * (1.0 - p) + xi as f64 * p) / n as f64;
                q[x][x ^ (1 << i)] += ((1 - xi) as f64 * p + xi as f64 * (1.0 - p)) / n as f64;
            }
        }
        q
    }

    #[test]
    fn matrix_free_matches_dense() {
        for n in 1..=5 {
            let p = 0.3;
            let q = dense_walk(n, p);
            let v: Vec<f64> = (0..1 << n).map(|x| (x as f64 * 0.37).sin()).collect();
            let w = OperatorHandle::walk(n, bias(p)).unwrap().apply(&v).unwrap();
            for x in 0..1 << n {
                let want: f64 = (0..1 << n).map(|y| q[x][y] * v[y]).sum();
                assert!((w[x] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stochastic_rows() {
        for n in 1..=12 {
            for &p in &[0.1, 0.5, 0.9] {
                let ones = vec![1.0; 1 << n];
                let w = OperatorHandle::walk(n, bias(p)).unwrap().apply(&ones).unwrap();
                assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn two_state_walk() {
        let w = OperatorHandle::walk(1, bias(0.5)).unwrap().apply(&[1.0, 0.0]).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert!(OperatorHandle::walk(1, bias(0.5)).unwrap().apply(&[1.0]).is_err());
    }

    #[test]
    fn parity_boundary_on_ones() {
        let f = BooleanFunction::parity(2).unwrap();
        let q = OperatorHandle::new(&f, bias(0.5), OperatorKind::Qdf).unwrap();
        assert!(q.apply(&[1.0; 4]).unwrap().iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn decomposition() {
        for n in 1..=10 {
            let f = BooleanFunction::random(n, n as u64).unwrap();
            let p = bias(0.37);
            let v: Vec<f64> = (0..1 << n).map(|x| ((x * 31 % 17) as f64) - 8.0).collect();
            let qn = OperatorHandle::new(&f, p, OperatorKind::Qn).unwrap().apply(&v).unwrap();
            let qd = OperatorHandle::new(&f, p, OperatorKind::Qdf).unwrap().apply(&v).unwrap();
            let qf = OperatorHandle::new(&f, p, OperatorKind::Qf).unwrap().apply(&v).unwrap();
            for x in 0..1 << n {
                assert!((qn[x] - qd[x] - qf[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_examples() {
        let p = bias(0.3);
        assert!(eigen_residual(mask(0, 6), p).unwrap() <= 1e-15);
        for s in 0..64 {
            assert!(eigen_residual(mask(s, 6), p).unwrap() <= 1e-12);
        }
        assert!(eigen_residual(SubsetMask::full(6).unwrap(), p).unwrap() <= 1e-12);
    }

    #[test]
    fn reversibility_identity() {
        for n in 1..=10 {
            for &p in &[0.2, 0.5, 0.6] {
                let p = bias(p);
                let w = stationary_weights(n, p);
                for x in 0..1u64 << n {
                    for i in 0..n {
                        let y = x ^ (1 << i);
                        let lhs = w[y as usize] * p.flip_rate(y >> i & 1 == 1);
                        let rhs = w[x as usize] * p.flip_rate(x >> i & 1 == 1);
                        assert!((lhs - rhs).abs() <= 1e-15 * rhs.max(1e-300) + 1e-300);
                    }
                }
            }
        }
    }

    #[test]
    fn sensitivity_examples() {
        let p = bias(0.3);
        let c = BooleanFunction::constant(4, true).unwrap();
        assert!(sensitivity_function(&c, p).unwrap().iter().all(|&v| v == 0.0));
        let par = BooleanFunction::parity(2).unwrap();
        assert!(sensitivity_function(&par, bias(0.5)).unwrap().iter().all(|&v| v == 0.5));
        let n = 4;
        let d = BooleanFunction::dictator(n).unwrap();
        let s = sensitivity_function(&d, p).unwrap();
        for x in 0..1 << n {
            let x1 = (x & 1) as f64;
            let want = (p.get() * (1.0 - x1) + (1.0 - p.get()) * x1) / n as f64;
            assert!((s[x] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn influence_examples() {
        for &p in &[0.1, 0.3, 0.5] {
            let p = bias(p);
            let prof = influence_profile(&BooleanFunction::dictator(4).unwrap(), p).unwrap();
            assert!((prof.per_bit[0] - 2.0 * p.variance()).abs() < 1e-15);
            assert!(prof.per_bit[1..].iter().all(|&v| v == 0.0));
            assert!((prof.normalized[0] - 1.0).abs() < 1e-14);
        }
        let half = bias(0.5);
        let maj = influence_profile(&BooleanFunction::majority(3).unwrap(), half).unwrap();
        assert!(maj.per_bit.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!((maj.total - 0.75).abs() < 1e-15);
        assert!(maj.is_regular(1e-10));
        for n in 1..=8 {
            let par = influence_profile(&BooleanFunction::parity(n).unwrap(), half).unwrap();
            assert!(par.per_bit.iter().all(|v| (v - 0.5).abs() < 1e-15));
            assert!((par.total - n as f64 / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn influence_bounds_and_routes() {
        for n in 1..=10 {
            for &p in &[0.1, 0.5, 0.8] {
                let p = bias(p);
                let f = BooleanFunction::random(n, 40 + n as u64).unwrap();
                let a = influence_profile(&f, p).unwrap();
                let b = influence_by_resampling(&f, p).unwrap();
                for (x, y) in a.per_bit.iter().zip(&b.per_bit) {
                    assert!((x - y).abs() < 1e-12);
                    assert!(*x >= 0.0 && *x <= 2.0 * p.variance() + 1e-15);
                }
                let sens = sensitivity_function(&f, p).unwrap();
                let w = stationary_weights(n, p);
                let via_operator = n as f64 * compensated_sum(w.iter().zip(&sens).map(|(w, s)| w * s));
                assert!((via_operator - a.total).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pairing_examples() {
        let half = bias(0.5);
        let par = BooleanFunction::parity(2).unwrap();
        let r = boundary_pairing(&par, mask(1, 2), half).unwrap();
        assert!(r.direct.abs() < 1e-15 && r.lemma31.abs() < 1e-15);
        assert!(r.general.unwrap().abs() < 1e-15);
        assert!(r.lemma32.is_none());

        for &p in &[0.2, 0.5] {
            let p = bias(p);
            let n = 3;
            let r = boundary_pairing(&BooleanFunction::dictator(n).unwrap(), mask(0, n), p).unwrap();
            let want = 2.0 * p.variance() / n as f64;
            assert!((r.direct - want).abs() < 1e-15);
            assert!(r.max_disagreement() < 1e-12);
        }

        let maj = BooleanFunction::majority(3).unwrap();
        let r = boundary_pairing(&maj, mask(1, 3), half).unwrap();
        assert!((r.direct - r.lemma31).abs() < 1e-12);
        assert!((r.direct - r.lemma32.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pairing_routes_agree_on_random_functions() {
        for n in 1..=7 {
            for &p in &[0.15, 0.5, 0.65] {
                let p = bias(p);
                let f = BooleanFunction::random(n, 90 + n as u64).unwrap();
                let ctx = PairingContext::new(&f, p).unwrap();
                for s in 0..1u64 << n {
                    ctx.report(mask(s, n)).unwrap().check(1e-12).unwrap();
                }
                let g = BooleanFunction::random_increasing(n, 3 + n as u64).unwrap();
                let ctx = PairingContext::new(&g, p).unwrap();
                for s in 0..1u64 << n {
                    let r = ctx.report(mask(s, n)).unwrap();
                    assert!(r.lemma32.is_some());
                    r.check(1e-12).unwrap();
                }
            }
        }
    }

    #[test]
    fn sigma_weighted_variant_misses_at_empty_set() {
        let p = bias(0.5);
        let f = BooleanFunction::parity(2).unwrap();
        let s = transform(&f, p).unwrap();
        // Influence total is 1, so n·pairing at S = ∅ is 1; the σ weighting gives 1/4.
        assert!((2.0 * pairing_general(&s, 0) - 1.0).abs() < 1e-15);
        assert!((2.0 * pairing_sigma_weighted(&s, 0) - 0.25).abs() < 1e-15);
    }
}
