//! First and second moments of the switch count `C_f`, its moment generating
//! function, and the bounds built on them.
//!
//! Three independent routes give `E[C_f²]`:
//!
//! * the power series `E[C] + 2 Σ_{k≥2} (n^k/k!) π^T Q_∂f (Q_n - I)^{k-2} Q_∂f 1`,
//!   summed matrix-free with a certified tail;
//! * the spectral form `E[C] + E[C]² + 2 Σ_{S≠∅} g(|S|) (n π^T Q_∂f χ_S)²` with
//!   `g(m) = (e^{-m} - (1-m))/m²`, where all pairings come from one transform
//!   of the sensitivity function;
//! * for increasing `f`, the same sum with the pairing replaced by its linear
//!   Fourier bracket and a leading constant fixed by [`increasing_constant`].

use std::sync::OnceLock;

use serde::Serialize;

use crate::cube::{stationary_weights, BiasParam};
use crate::dynamics::{
    fourier_bracket, influence_profile, sensitivity_function, InfluenceProfile, OperatorHandle,
    OperatorKind,
};
use crate::error::{Error, Result};
use crate::function::{exact_nondegeneracy, is_increasing, BooleanFunction, EXACT_MAX_N};
use crate::spectral::{transform, transform_values};
use crate::sum::{compensated_sum, CompensatedSum};

/// Dimension limit of the second-moment routes and the MGF.
pub const SECOND_MOMENT_MAX_N: usize = 14;

/// Truncation of the infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicy {
    pub tol: f64,
    /// Explicit cap on the number of terms; `None` means `max(8n, 128)`.
    pub k_max: Option<usize>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tol: 1e-12,
            k_max: None,
        }
    }
}

impl TruncationPolicy {
    pub fn with_tol(tol: f64) -> Self {
        TruncationPolicy { tol, k_max: None }
    }

    pub fn k_max_for(&self, n: usize) -> usize {
        self.k_max.unwrap_or_else(|| (8 * n).max(128))
    }
}

/// Upper bound on `Σ_{k>K} a^k/k!`, given `term = a^K/K!`. Requires `K + 2 > a`.
fn exp_tail(a: f64, k: usize, term: f64) -> f64 {
    let next = term * a / (k + 1) as f64;
    let ratio = a / (k + 2) as f64;
    if ratio >= 1.0 {
        f64::INFINITY
    } else {
        next / (1.0 - ratio)
    }
}

fn gate(f: &BooleanFunction, op: &'static str, max: usize) -> Result<()> {
    f.table_for(op, max).map(|_| ())
}

/// `E[C_f] = n · π^T Q_∂f 1`.
pub fn expected_count(f: &BooleanFunction, p: BiasParam) -> Result<f64> {
    let sens = sensitivity_function(f, p)?;
    let n = f.dim();
    let w = stationary_weights(n, p);
    Ok(n as f64 * compensated_sum(w.iter().zip(&sens).map(|(w, s)| w * s)))
}

/// A truncated series together with its certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Index of the last term included.
    pub terms: usize,
    pub tail_bound: f64,
}

/// The power-series route, with truncation details.
///
/// With `B = Q_∂f` reversible for `π` and `Q_n - I` a contraction on `L²(π)`,
/// every summand satisfies `|π^T B (Q_n - I)^{k-2} B 1| ≤ ‖B1‖²_π`.
pub fn second_moment_series_detailed(
    f: &BooleanFunction,
    p: BiasParam,
    policy: &TruncationPolicy,
) -> Result<SeriesValue> {
    gate(f, "second_moment_series", SECOND_MOMENT_MAX_N)?;
    let n = f.dim();
    let nf = n as f64;
    let w = stationary_weights(n, p);
    let boundary = OperatorHandle::new(f, p, OperatorKind::Qdf)?;
    let walk = OperatorHandle::walk(n, p)?;
    let pi_dot = |v: &[f64]| compensated_sum(w.iter().zip(v).map(|(w, v)| w * v));

    let b1 = boundary.apply(&vec![1.0; 1 << n])?;
    let first = nf * pi_dot(&b1);
    let bound = compensated_sum(w.iter().zip(&b1).map(|(w, b)| w * b * b));

    let k_max = policy.k_max_for(n);
    let mut acc = CompensatedSum::new();
    let mut coeff = nf; // n^k / k! at k = 1
    let mut v = b1;
    for k in 2..=k_max {
        coeff *= nf / k as f64;
        acc.add(coeff * pi_dot(&boundary.apply(&v)?));
        let tail = 2.0 * bound * exp_tail(nf, k, coeff);
        if tail <= policy.tol {
            return Ok(SeriesValue {
                value: first + 2.0 * acc.value(),
                terms: k,
                tail_bound: tail,
            });
        }
        v = walk.apply_minus_identity(&v)?;
    }
    Err(Error::TruncationFailure {
        k_max,
        tail: 2.0 * bound * exp_tail(nf, k_max, coeff),
        tol: policy.tol,
    })
}

pub fn second_moment_series(f: &BooleanFunction, p: BiasParam, policy: &TruncationPolicy) -> Result<f64> {
    second_moment_series_detailed(f, p, policy).map(|s| s.value)
}

/// `(e^{-m} - (1 - m))/m²`.
pub fn series_weight(m: usize) -> f64 {
    let m = m as f64;
    ((-m).exp_m1() + m) / (m * m)
}

/// The spectral route, valid for every `f`.
pub fn second_moment_fourier(f: &BooleanFunction, p: BiasParam) -> Result<f64> {
    gate(f, "second_moment_fourier", SECOND_MOMENT_MAX_N)?;
    let n = f.dim();
    let nf = n as f64;
    let sens = sensitivity_function(f, p)?;
    let pairings = transform_values(&sens, n, p)?;
    let e = nf * pairings.at(0);
    let tail = compensated_sum((1..1u64 << n).map(|s| {
        let v = nf * pairings.at(s);
        series_weight(s.count_ones() as usize) * v * v
    }));
    Ok(e + e * e + 2.0 * tail)
}

/// `Σ_{S≠∅} g(|S|) · [(1-2p)|S| f̂(S) + 2σ Σ_{i∉S} f̂(S∪{i})]²`.
fn increasing_sum(f: &BooleanFunction, p: BiasParam) -> Result<f64> {
    let spectrum = transform(f, p)?;
    Ok(compensated_sum((1..1u64 << f.dim()).map(|s| {
        let b = fourier_bracket(&spectrum, s);
        series_weight(s.count_ones() as usize) * b * b
    })))
}

/// `E[C] + E[C]² + c · Σ_{S≠∅} g(|S|) · bracket(S)²` for increasing `f` and a given `c`.
pub fn second_moment_increasing_with(f: &BooleanFunction, p: BiasParam, c: f64) -> Result<f64> {
    gate(f, "second_moment_increasing", SECOND_MOMENT_MAX_N)?;
    if !is_increasing(f)? {
        return Err(Error::NotIncreasing {
            op: "second_moment_increasing",
        });
    }
    let e = expected_count(f, p)?;
    Ok(e + e * e + c * increasing_sum(f, p)?)
}

/// The increasing-function route with the resolved leading constant.
pub fn second_moment_increasing(f: &BooleanFunction, p: BiasParam) -> Result<f64> {
    second_moment_increasing_with(f, p, increasing_constant().constant)
}

/// How the leading constant of the increasing-function formula was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantResolution {
    /// Adopted value.
    pub constant: f64,
    /// `(E[C²]_series - E[C] - E[C]²) / Σ g·bracket²` on the pinning run.
    pub raw_estimate: f64,
    /// `|formula(constant) - series|` on the pinning run.
    pub residual: f64,
    /// Residuals of the two candidate constants 1 and 2 on the same run.
    pub residual_c1: f64,
    pub residual_c2: f64,
    pub pin_n: usize,
    pub pin_p: f64,
}

/// Pins the constant with the one-coordinate Dictator at `p = 0.3`, where the
/// bracket at `S = {1}` is `0.4·√0.21 ≠ 0`, against the power-series route.
pub fn resolve_increasing_constant() -> Result<ConstantResolution> {
    let p = BiasParam::new(0.3)?;
    let f = BooleanFunction::dictator(1)?;
    let series = second_moment_series(&f, p, &TruncationPolicy::with_tol(1e-15))?;
    let e = expected_count(&f, p)?;
    let sum = increasing_sum(&f, p)?;
    let raw = (series - e - e * e) / sum;
    let rounded = raw.round();
    let constant = if (raw - rounded).abs() < 1e-8 { rounded } else { raw };
    let residual_of = |c: f64| (e + e * e + c * sum - series).abs();
    Ok(ConstantResolution {
        constant,
        raw_estimate: raw,
        residual: residual_of(constant),
        residual_c1: residual_of(1.0),
        residual_c2: residual_of(2.0),
        pin_n: 1,
        pin_p: p.get(),
    })
}

/// Cached result of [`resolve_increasing_constant`].
pub fn increasing_constant() -> &'static ConstantResolution {
    static CELL: OnceLock<ConstantResolution> = OnceLock::new();
    CELL.get_or_init(|| resolve_increasing_constant().expect("pinning run is well within gates"))
}

/// `E[e^{sC_f}] = Σ_k (n^k/k!) π^T ((Q_n - I) + (e^s - 1)Q_∂f)^k 1`.
///
/// Every row of the iterated operator has absolute sum at most
/// `max(p, 1-p)·(1 + max(1, e^s))`, which bounds the tail. `s ≤ 0` always
/// certifies within the default `k_max`; large positive `s` fails with
/// [`Error::TruncationFailure`].
pub fn mgf(f: &BooleanFunction, p: BiasParam, s: f64, policy: &TruncationPolicy) -> Result<f64> {
    gate(f, "mgf", SECOND_MOMENT_MAX_N)?;
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!("mgf argument {s}")));
    }
    let n = f.dim();
    let nf = n as f64;
    let u = s.exp_m1();
    let w = stationary_weights(n, p);
    let walk = OperatorHandle::walk(n, p)?;
    let boundary = OperatorHandle::new(f, p, OperatorKind::Qdf)?;
    let rho = p.get().max(1.0 - p.get()) * (1.0 + s.exp().max(1.0));
    let a = nf * rho;

    let k_max = policy.k_max_for(n);
    let mut acc = CompensatedSum::new();
    let mut v = vec![1.0; 1 << n];
    let mut coeff = 1.0;
    let mut growth = 1.0; // a^k / k!
    for k in 0..=k_max {
        if k > 0 {
            coeff *= nf / k as f64;
            growth *= a / k as f64;
        }
        acc.add(coeff * compensated_sum(w.iter().zip(&v).map(|(w, v)| w * v)));
        let tail = exp_tail(a, k, growth);
        if tail <= policy.tol {
            return Ok(acc.value());
        }
        let mut next = walk.apply_minus_identity(&v)?;
        if u != 0.0 {
            let b = boundary.apply(&v)?;
            next.iter_mut().zip(&b).for_each(|(x, b)| *x += u * b);
        }
        v = next;
    }
    Err(Error::TruncationFailure {
        k_max,
        tail: exp_tail(a, k_max, growth),
        tol: policy.tol,
    })
}

/// Whether the MGF tail bound certifies at `s` within the policy's term cap.
fn mgf_certifies(n: usize, p: BiasParam, s: f64, policy: &TruncationPolicy) -> bool {
    let rho = p.get().max(1.0 - p.get()) * (1.0 + s.exp().max(1.0));
    let a = n as f64 * rho;
    let mut growth = 1.0;
    for k in 0..=policy.k_max_for(n) {
        if k > 0 {
            growth *= a / k as f64;
        }
        if exp_tail(a, k, growth) <= policy.tol {
            return true;
        }
    }
    false
}

/// Largest `s ≥ 0` (to within 1e-6, capped at 64) at which [`mgf`] certifies.
pub fn mgf_certified_radius(n: usize, p: BiasParam, policy: &TruncationPolicy) -> f64 {
    let (mut lo, mut hi) = (0.0, 64.0);
    if mgf_certifies(n, p, hi, policy) {
        return hi;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if mgf_certifies(n, p, mid, policy) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Right-hand side `(1-θ)·E[C]²/E[C²]` of the Paley–Zygmund step, with the
/// factor `(1-θ)` taken to the first power.
pub fn pz_bound_from_moments(expected: f64, second: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta} not in (0, 1)")));
    }
    if expected <= 0.0 || second <= 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - theta) * expected * expected / second)
}

pub fn pz_lower_bound(f: &BooleanFunction, p: BiasParam, theta: f64) -> Result<f64> {
    let e = expected_count(f, p)?;
    let e2 = second_moment_fourier(f, p)?;
    pz_bound_from_moments(e, e2, theta)
}

/// `E[C] + E[C]² + 4(1-2p)²E[C] + 32p(1-p)·n·Var_π(f)`, an upper bound on
/// `E[C²]` for increasing `f`.
pub fn increasing_upper_bound(f: &BooleanFunction, p: BiasParam) -> Result<f64> {
    gate(f, "increasing_upper_bound", EXACT_MAX_N)?;
    if !is_increasing(f)? {
        return Err(Error::NotIncreasing {
            op: "increasing_upper_bound",
        });
    }
    let e = expected_count(f, p)?;
    let mean = exact_nondegeneracy(f, p)?;
    let var = mean - mean * mean;
    let q = 1.0 - 2.0 * p.get();
    Ok(e + e * e + 4.0 * q * q * e + 32.0 * p.variance() * f.dim() as f64 * var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionOutcome {
    /// `p(1-p)·n·Var_π(f) / I(f)²`.
    pub ratio: f64,
    pub satisfied: bool,
}

pub fn nontame_criterion(f: &BooleanFunction, p: BiasParam, constant: f64) -> Result<CriterionOutcome> {
    let total = influence_profile(f, p)?.total;
    let mean = exact_nondegeneracy(f, p)?;
    criterion_from_parts(p, f.dim(), mean - mean * mean, total, constant)
}

pub(crate) fn criterion_from_parts(
    p: BiasParam,
    n: usize,
    var: f64,
    total: f64,
    constant: f64,
) -> Result<CriterionOutcome> {
    if total <= 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let ratio = p.variance() * n as f64 * var / (total * total);
    Ok(CriterionOutcome {
        ratio,
        satisfied: ratio <= constant,
    })
}

/// Outcome of the regularity argument: for regular `f`, `Σ I_i² > D²` forces
/// `I(f) ≥ D√n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityCheck {
    pub regular: bool,
    pub sq_sum: f64,
    pub d_squared: f64,
    pub total: f64,
    pub d_sqrt_n: f64,
    /// `Some(premise ⇒ conclusion)` for regular `f`, `None` otherwise.
    pub implication: Option<bool>,
    pub increasing: bool,
    /// `√(np)`.
    pub monotone_cap: f64,
    /// `Some(I(f) ≤ √(np))` for increasing `f`; a soft diagnostic.
    pub monotone_bound_holds: Option<bool>,
}

pub fn regularity_influence_bound(f: &BooleanFunction, p: BiasParam, d: f64) -> Result<RegularityCheck> {
    let prof = influence_profile(f, p)?;
    let increasing = is_increasing(f)?;
    Ok(regularity_from_profile(&prof, f.dim(), p, d, increasing))
}

pub(crate) fn regularity_from_profile(
    prof: &InfluenceProfile,
    n: usize,
    p: BiasParam,
    d: f64,
    increasing: bool,
) -> RegularityCheck {
    let regular = prof.is_regular(1e-10);
    let d_sqrt_n = d * (n as f64).sqrt();
    let premise = prof.sq_sum > d * d;
    let conclusion = prof.total >= d_sqrt_n;
    let monotone_cap = (n as f64 * p.get()).sqrt();
    RegularityCheck {
        regular,
        sq_sum: prof.sq_sum,
        d_squared: d * d,
        total: prof.total,
        d_sqrt_n,
        implication: regular.then_some(!premise || conclusion),
        increasing,
        monotone_cap,
        monotone_bound_holds: increasing.then_some(prof.total <= monotone_cap),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PzBound {
    pub theta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteResiduals {
    /// `|E[C] - I(f)|`.
    pub expected_vs_influence: f64,
    pub series_vs_fourier: Option<f64>,
    pub increasing_vs_series: Option<f64>,
}

/// Everything known about `C_f` for one `(f, p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub function: String,
    pub n: usize,
    pub p: f64,
    pub increasing: bool,
    pub p_f1: f64,
    pub expected_count: f64,
    pub second_series: Option<f64>,
    pub second_fourier: Option<f64>,
    pub second_increasing: Option<f64>,
    pub variance_f: f64,
    pub pz_bounds: Vec<PzBound>,
    pub increasing_upper: Option<f64>,
    pub criterion_ratio: Option<f64>,
    pub increasing_constant: f64,
    pub influence: InfluenceProfile,
    pub residuals: RouteResiduals,
}

impl MomentReport {
    /// Best available `E[C²]`: the series, else the spectral route.
    pub fn second_moment(&self) -> Option<f64> {
        self.second_series.or(self.second_fourier)
    }
}

/// Assembles a [`MomentReport`]; second-moment fields beyond their gate are `None`.
pub fn moment_report(
    f: &BooleanFunction,
    p: BiasParam,
    thetas: &[f64],
    policy: &TruncationPolicy,
) -> Result<MomentReport> {
    let n = f.dim();
    let influence = influence_profile(f, p)?;
    let increasing = is_increasing(f)?;
    let e = expected_count(f, p)?;
    let mean = exact_nondegeneracy(f, p)?;
    let variance_f = mean - mean * mean;
    let within = n <= SECOND_MOMENT_MAX_N;
    let second_series = within
        .then(|| second_moment_series(f, p, policy))
        .transpose()?;
    let second_fourier = within.then(|| second_moment_fourier(f, p)).transpose()?;
    let second_increasing = (within && increasing)
        .then(|| second_moment_increasing(f, p))
        .transpose()?;
    let e2 = second_series.or(second_fourier);
    let pz_bounds = match e2 {
        Some(e2) => thetas
            .iter()
            .map(|&theta| pz_bound_from_moments(e, e2, theta).map(|value| PzBound { theta, value }))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let increasing_upper = increasing.then(|| increasing_upper_bound(f, p)).transpose()?;
    let criterion_ratio = criterion_from_parts(p, n, variance_f, influence.total, f64::INFINITY)
        .ok()
        .map(|c| c.ratio);
    let residuals = RouteResiduals {
        expected_vs_influence: (e - influence.total).abs(),
        series_vs_fourier: second_series.zip(second_fourier).map(|(a, b)| (a - b).abs()),
        increasing_vs_series: second_increasing.zip(second_series).map(|(a, b)| (a - b).abs()),
    };
    Ok(MomentReport {
        function: f.name().to_string(),
        n,
        p: p.get(),
        increasing,
        p_f1: mean,
        expected_count: e,
        second_series,
        second_fourier,
        second_increasing,
        variance_f,
        pz_bounds,
        increasing_upper,
        criterion_ratio,
        increasing_constant: increasing_constant().constant,
        influence,
        residuals,
    })
}
