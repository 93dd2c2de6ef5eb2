use rayon::prelude::*;
use serde::Serialize;

use super::{unix_timestamp, SCHEMA_VERSION};
use crate::cube::{stationary_weights, BiasParam, SubsetMask};
use crate::dynamics::{
    eigen_residual, influence_by_resampling, influence_profile, pairing_sigma_weighted, OperatorHandle, OperatorKind,
    PairingContext, GENERAL_PAIRING_MAX_N,
};
use crate::error::Result;
use crate::function::{is_increasing, BooleanFunction, FamilySpec};
use crate::moments::{
    expected_count, increasing_constant, increasing_upper_bound, mgf, pz_lower_bound, second_moment_fourier,
    second_moment_increasing, second_moment_series, ConstantResolution, TruncationPolicy,
};
use crate::simulate::{exact_count_distribution, incremental_evaluator, monte_carlo_moments, trial_rng, McConfig, SwitchState};
use crate::spectral::{
    chi_vector, derivative_expansion, direct_derivative, inner_product_values, inverse_transform,
    product_coefficient_from_spectra, transform, transform_values_with, ButterflyWeights,
};
use crate::sum::compensated_sum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub n_max: usize,
    pub p_grid: Vec<f64>,
    pub seed: u64,
    /// Random functions (and random increasing functions) per dimension.
    pub random_per_n: usize,
    pub mc_trials: u64,
    pub policy: TruncationPolicy,
    /// Perturbs one butterfly weight; the orthonormality check must then fail.
    pub corrupt_butterfly: bool,
    pub reproducible: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_max: 8,
            p_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            seed: 0,
            random_per_n: 3,
            mc_trials: 40_000,
            policy: TruncationPolicy::default(),
            corrupt_butterfly: false,
            reproducible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: &'static str,
    pub max_residual: f64,
    pub note: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub command: &'static str,
    pub options: VerifyOptions,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub increasing_constant: ConstantResolution,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Check {
    name: &'static str,
    tol: f64,
    worst: f64,
    cases: usize,
    broken: bool,
}

impl Check {
    fn new(name: &'static str, tol: f64) -> Self {
        Check {
            name,
            tol,
            worst: 0.0,
            cases: 0,
            broken: false,
        }
    }

    fn observe(&mut self, r: f64) {
        self.cases += 1;
        if r.is_nan() {
            self.broken = true;
        } else {
            self.worst = self.worst.max(r);
        }
    }

    fn observe_all(&mut self, rs: impl IntoIterator<Item = f64>) {
        rs.into_iter().for_each(|r| self.observe(r));
    }

    /// Records a predicate as residual 0 (holds) or 1 (fails).
    fn holds(&mut self, ok: bool) {
        self.observe(if ok { 0.0 } else { 1.0 });
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            cases: self.cases,
            max_residual: if self.broken { f64::NAN } else { self.worst },
            tolerance: self.tol,
            passed: !self.broken && self.worst <= self.tol,
        }
    }
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Families and random functions at dimension `n`.
fn test_functions(n: usize, seed: u64, randoms: usize) -> Vec<BooleanFunction> {
    let mut fs = vec![
        BooleanFunction::dictator(n).unwrap(),
        BooleanFunction::majority(n).unwrap(),
        BooleanFunction::parity(n).unwrap(),
        BooleanFunction::family(FamilySpec::And, n).unwrap(),
        BooleanFunction::family(FamilySpec::Or, n).unwrap(),
    ];
    for w in [2, 3] {
        if n > w && n.is_multiple_of(w) {
            fs.push(BooleanFunction::tribes(n, w).unwrap());
        }
    }
    for j in 0..randoms as u64 {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(100 * n as u64 + j);
        fs.push(BooleanFunction::random(n, s).unwrap());
        fs.push(BooleanFunction::random_increasing(n, s ^ 0x5bd1_e995).unwrap());
    }
    fs
}

/// `max_{S,T} |⟨χ_S, χ_T⟩ - 1(S=T)|` from explicit vectors.
pub fn orthonormality_direct(n: usize, p: BiasParam) -> f64 {
    let chis: Vec<Vec<f64>> = (0..1u64 << n).map(|s| chi_vector(s, n, p)).collect();
    (0..chis.len())
        .into_par_iter()
        .map(|s| {
            (s..chis.len())
                .map(|t| {
                    let ip = inner_product_values(&chis[s], &chis[t], n, p);
                    (ip - if s == t { 1.0 } else { 0.0 }).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Transforms every `χ_S` with `weights` and measures the distance to the unit vector `e_S`.
pub fn orthonormality_butterfly(n: usize, p: BiasParam, weights: ButterflyWeights) -> f64 {
    (0..1u64 << n)
        .into_par_iter()
        .map(|s| {
            let spec = transform_values_with(&chi_vector(s, n, p), n, p, weights).expect("length matches");
            spec.coeffs()
                .iter()
                .enumerate()
                .map(|(t, c)| (c - if t as u64 == s { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn corrupted(w: ButterflyWeights) -> ButterflyWeights {
    ButterflyWeights {
        keep0: w.keep0 * (1.0 + 1e-3),
        ..w
    }
}

/// Runs every invariant suite; `passed` is false if any check fails.
pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let ps = opts
        .p_grid
        .iter()
        .map(|&p| BiasParam::new(p))
        .collect::<Result<Vec<_>>>()?;
    let n_max = opts.n_max.max(1);
    let dims: Vec<usize> = (1..=n_max).collect();
    let pol = &opts.policy;
    let mut checks = Vec::new();

    let mut c = Check::new("measure_normalization", 1e-12);
    for &p in &ps {
        for &n in &dims {
            c.observe((compensated_sum(stationary_weights(n, p)) - 1.0).abs());
        }
    }
    checks.push(c.finish());

    let mut fam = Check::new("family_vs_table", 0.0);
    let mut inc = Check::new("incremental_vs_table", 0.0);
    let mut rng = trial_rng(opts.seed, u64::MAX);
    for &n in dims.iter().filter(|&&n| n <= 12) {
        for f in test_functions(n, opts.seed, 0) {
            let spec = f.family_spec().unwrap().clone();
            let t = f.truth_table().unwrap();
            fam.holds((0..1u64 << n).all(|x| spec.eval_word(x, n) == Some(t.get(x))));
            let mut ev = incremental_evaluator(&spec, n)?;
            ev.reset(0.5, &mut rng);
            let mut word: u64 = ev.bits().iter().enumerate().fold(0, |a, (i, &b)| a | (b as u64) << i);
            let mut ok = ev.value() == t.get(word);
            for _ in 0..2000 {
                use rand::Rng;
                let i = rng.random_range(0..n);
                let y = rng.random::<bool>();
                ev.set(i, y);
                word = if y { word | 1 << i } else { word & !(1 << i) };
                ok &= ev.value() == t.get(word);
            }
            inc.holds(ok);
        }
    }
    checks.push(fam.finish());
    checks.push(inc.finish());

    let mut c = Check::new("increasing_predicates", 0.0);
    for &n in &dims {
        c.holds(is_increasing(&BooleanFunction::majority(n)?)?);
        c.holds(is_increasing(&BooleanFunction::dictator(n)?)?);
        c.holds(n < 2 || !is_increasing(&BooleanFunction::parity(n)?)?);
        if n >= 2 && n % 2 == 0 {
            c.holds(is_increasing(&BooleanFunction::tribes(n, 2)?)?);
        }
    }
    checks.push(c.finish());

    let mut direct = Check::new("orthonormality_direct", 1e-10);
    let mut fast = Check::new("orthonormality_butterfly", 1e-10);
    for &p in &ps {
        let w = if opts.corrupt_butterfly {
            corrupted(ButterflyWeights::new(p))
        } else {
            ButterflyWeights::new(p)
        };
        for &n in dims.iter().filter(|&&n| n <= 8) {
            direct.observe(orthonormality_direct(n, p));
            fast.observe(orthonormality_butterfly(n, p, w));
        }
    }
    checks.push(direct.finish());
    checks.push(fast.finish());

    // Per-function suites.
    let cases: Vec<(usize, BiasParam, BooleanFunction)> = dims
        .iter()
        .flat_map(|&n| {
            let fs = test_functions(n, opts.seed, opts.random_per_n);
            ps.iter().flat_map(move |&p| fs.clone().into_iter().map(move |f| (n, p, f)))
        })
        .collect();

    let rows: Vec<Vec<(usize, f64)>> = cases
        .par_iter()
        .map(|(n, p, f)| per_function(*n, *p, f, pol))
        .collect::<Result<Vec<_>>>()?;
    let names = PER_FUNCTION;
    let mut per: Vec<Check> = names.iter().map(|&(name, tol)| Check::new(name, tol)).collect();
    let mut sigma_worst = 0.0f64;
    for row in rows {
        for (idx, r) in row {
            if idx == SIGMA_SLOT {
                sigma_worst = sigma_worst.max(r);
            } else {
                per[idx].observe(r);
            }
        }
    }
    checks.extend(per.into_iter().map(Check::finish));

    let mut c = Check::new("eigen_relation", 1e-12);
    for &p in &ps {
        for &n in dims.iter().filter(|&&n| n <= 10) {
            let rs = (0..1u64 << n)
                .into_par_iter()
                .map(|s| eigen_residual(SubsetMask::new(s, n).unwrap(), p))
                .collect::<Result<Vec<_>>>()?;
            c.observe_all(rs);
        }
    }
    checks.push(c.finish());

    let mut c = Check::new("closed_form_oracles", 1e-10);
    let half = BiasParam::new(0.5)?;
    let d = BooleanFunction::dictator(3)?;
    let par2 = BooleanFunction::parity(2)?;
    let maj3 = BooleanFunction::majority(3)?;
    c.observe((expected_count(&d, half)? - 0.5).abs());
    c.observe((second_moment_series(&d, half, pol)? - 0.75).abs());
    c.observe((expected_count(&par2, half)? - 1.0).abs());
    c.observe((second_moment_series(&par2, half, pol)? - 2.0).abs());
    c.observe((influence_profile(&maj3, half)?.total - 0.75).abs());
    c.observe((pz_lower_bound(&d, half, 0.5)? - 1.0 / 6.0).abs());
    c.observe((mgf(&d, half, -1.0, pol)? - ((-1f64).exp_m1() / 2.0).exp()).abs());
    checks.push(c.finish());

    let mut c = Check::new("pz_monotone_in_theta", 0.0);
    for f in [&maj3, &d, &par2] {
        let v: Vec<f64> = (1..20)
            .map(|i| pz_lower_bound(f, half, i as f64 / 20.0))
            .collect::<Result<_>>()?;
        c.holds(v.windows(2).all(|w| w[1] < w[0]));
    }
    checks.push(c.finish());

    let mut c1 = Check::new("mgf_first_derivative", 1e-4);
    let mut c2 = Check::new("mgf_second_derivative", 1e-3);
    let h = 1e-5;
    let fine = TruncationPolicy::with_tol(1e-15);
    for (f, p) in [(&maj3, half), (&BooleanFunction::random(5, opts.seed)?, BiasParam::new(0.3)?)] {
        let (mp, m0, mm) = (mgf(f, p, h, &fine)?, mgf(f, p, 0.0, &fine)?, mgf(f, p, -h, &fine)?);
        c1.observe(((mp - mm) / (2.0 * h) - expected_count(f, p)?).abs());
        c2.observe(((mp - 2.0 * m0 + mm) / (h * h) - second_moment_series(f, p, pol)?).abs());
    }
    checks.push(c1.finish());
    checks.push(c2.finish());

    // Residuals are z-scores against the exact law.
    let mut c = Check::new("mc_vs_exact", 4.0);
    let cfg = McConfig::new(opts.mc_trials, opts.seed)?;
    for (f, p) in [
        (BooleanFunction::dictator(1)?, half),
        (BooleanFunction::majority(5)?, BiasParam::new(0.3)?),
        (BooleanFunction::random_increasing(6, opts.seed)?, BiasParam::new(0.4)?),
    ] {
        let dist = exact_count_distribution(&f, p, 40, pol)?;
        let mc = monte_carlo_moments(&f, p, &cfg)?;
        for k in 0..dist.probs.len() {
            if dist.probs[k] < 1e-3 {
                continue;
            }
            let q = dist.tail_at(k);
            let se = (q * (1.0 - q) / mc.trials as f64).sqrt();
            if se > 0.0 {
                c.observe((mc.tail_at(k) - q).abs() / se);
            }
        }
        if mc.se_mean > 0.0 {
            c.observe((mc.mean - dist.mean()).abs() / mc.se_mean);
        }
    }
    checks.push(c.finish());

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        schema: SCHEMA_VERSION,
        command: "verify",
        options: opts.clone(),
        passed,
        checks,
        increasing_constant: *increasing_constant(),
        diagnostics: vec![Diagnostic {
            name: "pairing_sigma_weighted",
            max_residual: sigma_worst,
            note: "sigma-weighted variant of the quadratic pairing formula, compared with the direct route; informational",
        }],
        generated_at_unix: (!opts.reproducible).then(unix_timestamp),
    })
}

const PER_FUNCTION: [(&str, f64); 12] = [
    ("inverse_round_trip", 0.0),
    ("derivative_expansion", 1e-10),
    ("product_coefficient", 1e-10),
    ("operator_decomposition", 1e-12),
    ("expected_count_equals_influence", 1e-10),
    ("influence_routes", 1e-12),
    ("pairing_sensitivity_route", 1e-12),
    ("pairing_fourier_routes", 1e-9),
    ("second_moment_series_vs_fourier", 1e-8),
    ("second_moment_increasing_vs_series", 1e-8),
    ("increasing_upper_bound", 1e-9),
    ("count_distribution_moments", 1e-7),
];
const SIGMA_SLOT: usize = usize::MAX;

fn per_function(n: usize, p: BiasParam, f: &BooleanFunction, pol: &TruncationPolicy) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let len = 1usize << n;
    let values = f.truth_table().unwrap().to_f64();
    let increasing = is_increasing(f)?;

    let back = inverse_transform(&transform(f, p)?)?;
    out.push((0, (back.truth_table() != f.truth_table()) as u8 as f64));
    if n <= 8 {
        for i in 1..=n {
            out.push((1, sup(&derivative_expansion(f, i, p)?, &direct_derivative(f, i)?)));
        }
    }
    if n <= 6 {
        let g = BooleanFunction::random(n, n as u64 + 17)?;
        let (fs, gs, fg) = (transform(f, p)?, transform(&g, p)?, transform(&f.and(&g)?, p)?);
        for s in 0..1u64 << n {
            let v = product_coefficient_from_spectra(&fs, &gs, SubsetMask::new(s, n)?)?;
            out.push((2, (v - fg.at(s)).abs()));
        }
    }

    let walk = OperatorHandle::walk(n, p)?;
    let qf = OperatorHandle::new(f, p, OperatorKind::Qf)?;
    let qd = OperatorHandle::new(f, p, OperatorKind::Qdf)?;
    let ones = vec![1.0; len];
    out.push((3, walk.apply(&ones)?.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)));
    let a = qf.apply(&values)?;
    let b = qd.apply(&values)?;
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    out.push((3, sup(&sum, &walk.apply(&values)?)));

    let prof = influence_profile(f, p)?;
    out.push((4, (expected_count(f, p)? - prof.total).abs()));
    out.push((5, sup(&prof.per_bit, &influence_by_resampling(f, p)?.per_bit)));

    if n <= GENERAL_PAIRING_MAX_N {
        let ctx = PairingContext::new(f, p)?;
        for s in 0..1u64 << n {
            let d = ctx.direct(s)?;
            out.push((6, (ctx.lemma31(s) - d).abs()));
            for v in [ctx.lemma32(s), ctx.general(s)].into_iter().flatten() {
                out.push((7, (v - d).abs()));
            }
            out.push((SIGMA_SLOT, (pairing_sigma_weighted(ctx.spectrum(), s) - d).abs()));
        }
    }

    if n <= 10 {
        let series = second_moment_series(f, p, pol)?;
        out.push((8, (series - second_moment_fourier(f, p)?).abs()));
        if increasing {
            out.push((9, (second_moment_increasing(f, p)? - series).abs()));
        }
        if increasing {
            out.push((10, (series - increasing_upper_bound(f, p)?).max(0.0)));
        }
        if n <= 8 {
            let dist = exact_count_distribution(f, p, 80, pol)?;
            out.push((11, (dist.mean() - expected_count(f, p)?).abs()));
            out.push((11, (dist.second_moment() - series).abs()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyOptions {
        VerifyOptions {
            n_max: 5,
            p_grid: vec![0.3, 0.5],
            random_per_n: 1,
            mc_trials: 20_000,
            reproducible: true,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn small_run_passes() {
        let r = run_verify(&small()).unwrap();
        let bad: Vec<_> = r.failures().collect();
        assert!(r.passed, "{bad:?}");
        assert_eq!(r.increasing_constant.constant, 2.0);
        assert!(r.diagnostics[0].max_residual > 1e-3);
    }

    #[test]
    fn corrupted_butterfly_fails_orthonormality() {
        let r = run_verify(&VerifyOptions {
            corrupt_butterfly: true,
            ..small()
        })
        .unwrap();
        assert!(!r.passed);
        let failed: Vec<_> = r.failures().map(|c| c.name).collect();
        assert_eq!(failed, vec!["orthonormality_butterfly"]);
    }
}
