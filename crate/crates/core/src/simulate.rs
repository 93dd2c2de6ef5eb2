//! Monte Carlo of the dynamics on `(0,1)` and the exact law of `C_f` for small `n`.
//!
//! Over the unit interval the `n` rate-one clocks ring `T ~ Poisson(n)` times
//! in total, and each ring is attached to a uniform coordinate. Only the order
//! of rings matters for `C_f`, so a trajectory is `X_0 ~ π_n` followed by `T`
//! resampling events. Events that redraw the current bit leave the state
//! unchanged, as in the definition of the dynamics.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, and trial `t` of a
//! batch uses stream `t` (`set_stream(t)`), so trials are independent of the
//! thread schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{stationary_weights, BiasParam};
use crate::dynamics::{OperatorHandle, OperatorKind};
use crate::error::{Error, Result};
use crate::function::{BooleanFunction, FamilySpec, TruthTable, EXACT_MAX_N};
use crate::moments::TruncationPolicy;
use crate::sum::{compensated_sum, CompensatedSum};

/// Dimension limit of [`exact_count_distribution`].
pub const EXACT_COUNT_MAX_N: usize = 12;

/// Largest `n` for which simulation uses a word-indexed truth table.
const TABLE_STATE_MAX_N: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    /// Trials per parallel work unit.
    pub batch: u64,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        McConfig {
            trials,
            seed,
            batch: 4096,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch must be at least 1".into()));
        }
        Ok(self)
    }
}

/// One trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub count: u64,
    pub jumps: u64,
    pub seed: u64,
    pub stream: u64,
}

/// The generator for trial `stream` under `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
fn draw_bit<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// A state of the walk together with the current value of `f`.
pub trait SwitchState {
    fn dim(&self) -> usize;
    /// Redraws the whole state from `π_n`.
    fn reset<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R);
    /// Sets coordinate `i` (0-based) to `y`.
    fn set(&mut self, i: usize, y: bool);
    fn value(&self) -> bool;
}

/// Truth-table lookup on a machine word.
#[derive(Debug, Clone)]
pub struct TableState<'a> {
    table: &'a TruthTable,
    word: u64,
}

impl<'a> TableState<'a> {
    pub fn new(table: &'a TruthTable) -> Self {
        TableState { table, word: 0 }
    }

    pub fn word(&self) -> u64 {
        self.word
    }
}

impl SwitchState for TableState<'_> {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn reset<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R) {
        self.word = (0..self.dim()).fold(0, |acc, i| if draw_bit(rng, p) { acc | 1 << i } else { acc });
    }

    fn set(&mut self, i: usize, y: bool) {
        if y {
            self.word |= 1 << i;
        } else {
            self.word &= !(1 << i);
        }
    }

    fn value(&self) -> bool {
        self.table.get(self.word)
    }
}

#[derive(Debug, Clone)]
enum Statistic {
    Dictator,
    Majority,
    Parity,
    Tribes { size: usize, counts: Vec<u32>, full: usize },
    And,
    Or,
}

/// O(1)-per-event evaluator for the closed-form families, for any `n`.
#[derive(Debug, Clone)]
pub struct IncrementalEvaluator {
    bits: Vec<bool>,
    ones: usize,
    stat: Statistic,
}

/// Builds the evaluator for `spec` in dimension `n`; starts at the all-zeros point.
pub fn incremental_evaluator(spec: &FamilySpec, n: usize) -> Result<IncrementalEvaluator> {
    spec.validate(n)?;
    let stat = match spec {
        FamilySpec::Dictator => Statistic::Dictator,
        FamilySpec::Majority => Statistic::Majority,
        FamilySpec::Parity => Statistic::Parity,
        FamilySpec::Tribes { tribe_size } => Statistic::Tribes {
            size: *tribe_size,
            counts: vec![0; n / tribe_size],
            full: 0,
        },
        FamilySpec::And => Statistic::And,
        FamilySpec::Or => Statistic::Or,
        FamilySpec::Custom { .. } => return Err(Error::UnsupportedFamily(spec.name())),
    };
    Ok(IncrementalEvaluator {
        bits: vec![false; n],
        ones: 0,
        stat,
    })
}

impl IncrementalEvaluator {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn rebuild(&mut self) {
        self.ones = self.bits.iter().filter(|&&b| b).count();
        if let Statistic::Tribes { size, counts, full } = &mut self.stat {
            for (c, chunk) in counts.iter_mut().zip(self.bits.chunks(*size)) {
                *c = chunk.iter().filter(|&&b| b).count() as u32;
            }
            *full = counts.iter().filter(|&&c| c as usize == *size).count();
        }
    }
}

impl SwitchState for IncrementalEvaluator {
    fn dim(&self) -> usize {
        self.bits.len()
    }

    fn reset<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R) {
        for b in self.bits.iter_mut() {
            *b = draw_bit(rng, p);
        }
        self.rebuild();
    }

    fn set(&mut self, i: usize, y: bool) {
        if self.bits[i] == y {
            return;
        }
        self.bits[i] = y;
        if y {
            self.ones += 1;
        } else {
            self.ones -= 1;
        }
        if let Statistic::Tribes { size, counts, full } = &mut self.stat {
            let c = &mut counts[i / *size];
            let was_full = *c as usize == *size;
            if y {
                *c += 1;
            } else {
                *c -= 1;
            }
            let is_full = *c as usize == *size;
            match (was_full, is_full) {
                (false, true) => *full += 1,
                (true, false) => *full -= 1,
                _ => {}
            }
        }
    }

    fn value(&self) -> bool {
        let n = self.bits.len();
        match &self.stat {
            Statistic::Dictator => self.bits[0],
            Statistic::Majority => 2 * self.ones >= n,
            Statistic::Parity => self.ones.is_multiple_of(2),
            Statistic::Tribes { full, .. } => *full > 0,
            Statistic::And => self.ones == n,
            Statistic::Or => self.ones > 0,
        }
    }
}

/// Runs one trajectory on `state`, returning `(count, jumps)`.
pub fn run_trajectory<S: SwitchState, R: Rng + ?Sized>(state: &mut S, p: BiasParam, rng: &mut R) -> (u64, u64) {
    let n = state.dim();
    let p = p.get();
    state.reset(p, rng);
    let jumps = Poisson::new(n as f64)
        .expect("positive rate")
        .sample(rng) as u64;
    let mut value = state.value();
    let mut count = 0;
    for _ in 0..jumps {
        let i = rng.random_range(0..n);
        let y = draw_bit(rng, p);
        state.set(i, y);
        let v = state.value();
        count += (v != value) as u64;
        value = v;
    }
    (count, jumps)
}

enum StateBox<'a> {
    Table(TableState<'a>),
    Family(IncrementalEvaluator),
}

fn state_for(f: &BooleanFunction) -> Result<StateBox<'_>> {
    if let Some(t) = f.truth_table().filter(|t| t.dim() <= TABLE_STATE_MAX_N) {
        return Ok(StateBox::Table(TableState::new(t)));
    }
    match f.family_spec() {
        Some(spec) => Ok(StateBox::Family(incremental_evaluator(spec, f.dim())?)),
        None => Err(Error::UnsupportedFamily(f.name().to_string())),
    }
}

impl StateBox<'_> {
    fn run<R: Rng + ?Sized>(&mut self, p: BiasParam, rng: &mut R) -> (u64, u64) {
        match self {
            StateBox::Table(s) => run_trajectory(s, p, rng),
            StateBox::Family(s) => run_trajectory(s, p, rng),
        }
    }
}

/// One trajectory from stream 0 of `seed`.
pub fn sample_count(f: &BooleanFunction, p: BiasParam, seed: u64) -> Result<TrajectoryStats> {
    sample_count_stream(f, p, seed, 0)
}

pub fn sample_count_stream(f: &BooleanFunction, p: BiasParam, seed: u64, stream: u64) -> Result<TrajectoryStats> {
    let mut state = state_for(f)?;
    let (count, jumps) = state.run(p, &mut trial_rng(seed, stream));
    Ok(TrajectoryStats {
        count,
        jumps,
        seed,
        stream,
    })
}

/// `X_1` as a word, for trajectories on `n ≤ 24` coordinates.
pub fn sample_endpoint(f: &BooleanFunction, p: BiasParam, seed: u64, stream: u64) -> Result<u64> {
    let t = f.table_for("sample_endpoint", TABLE_STATE_MAX_N)?;
    let mut state = TableState::new(t);
    run_trajectory(&mut state, p, &mut trial_rng(seed, stream));
    Ok(state.word())
}

fn batches(cfg: &McConfig) -> Vec<(u64, u64)> {
    (0..cfg.trials)
        .step_by(cfg.batch as usize)
        .map(|lo| (lo, (lo + cfg.batch).min(cfg.trials)))
        .collect()
}

/// Every trajectory of `cfg`, in trial order.
pub fn simulate_trials(f: &BooleanFunction, p: BiasParam, cfg: &McConfig) -> Result<Vec<TrajectoryStats>> {
    let cfg = cfg.validated()?;
    state_for(f)?;
    let chunks: Vec<Vec<TrajectoryStats>> = batches(&cfg)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut state = state_for(f).expect("checked above");
            (lo..hi)
                .map(|t| {
                    let (count, jumps) = state.run(p, &mut trial_rng(cfg.seed, t));
                    TrajectoryStats {
                        count,
                        jumps,
                        seed: cfg.seed,
                        stream: t,
                    }
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Aggregate Monte Carlo estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub trials: u64,
    pub seed: u64,
    pub mean: f64,
    pub second_moment: f64,
    pub se_mean: f64,
    pub se_second: f64,
    pub mean_jumps: f64,
    /// `histogram[k]` trials had `C = k`.
    pub histogram: Vec<u64>,
    /// `tail[k]` = empirical `P(C ≥ k)` for `k = 0..=max count`.
    pub tail: Vec<f64>,
}

impl McSummary {
    pub fn from_histogram(histogram: Vec<u64>, jumps_total: u128, seed: u64) -> Self {
        let trials: u64 = histogram.iter().sum();
        let nt = trials as f64;
        let moment = |pow: i32| {
            compensated_sum(histogram.iter().enumerate().map(|(k, &c)| c as f64 * (k as f64).powi(pow))) / nt
        };
        let (m1, m2, m4) = (moment(1), moment(2), moment(4));
        let correction = if trials > 1 { nt / (nt - 1.0) } else { 0.0 };
        let var1 = ((m2 - m1 * m1) * correction).max(0.0);
        let var2 = ((m4 - m2 * m2) * correction).max(0.0);
        let mut tail = vec![0.0; histogram.len()];
        let mut above = 0u64;
        for k in (0..histogram.len()).rev() {
            above += histogram[k];
            tail[k] = above as f64 / nt;
        }
        McSummary {
            trials,
            seed,
            mean: m1,
            second_moment: m2,
            se_mean: (var1 / nt).sqrt(),
            se_second: (var2 / nt).sqrt(),
            mean_jumps: jumps_total as f64 / nt,
            histogram,
            tail,
        }
    }

    /// Empirical `P(C ≥ k)`, zero past the largest observed count.
    pub fn tail_at(&self, k: usize) -> f64 {
        self.tail.get(k).copied().unwrap_or(0.0)
    }

    /// Binomial standard error of [`McSummary::tail_at`].
    pub fn tail_se(&self, k: usize) -> f64 {
        let q = self.tail_at(k);
        (q * (1.0 - q) / self.trials as f64).sqrt()
    }
}

/// Mean, second moment, standard errors and the tail table of `C_f`.
/// Bit-identical for identical `(f, p, cfg)`.
pub fn monte_carlo_moments(f: &BooleanFunction, p: BiasParam, cfg: &McConfig) -> Result<McSummary> {
    let cfg = cfg.validated()?;
    state_for(f)?;
    let parts: Vec<(Vec<u64>, u128)> = batches(&cfg)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut state = state_for(f).expect("checked above");
            let mut hist = Vec::new();
            let mut jumps_total = 0u128;
            for t in lo..hi {
                let (count, jumps) = state.run(p, &mut trial_rng(cfg.seed, t));
                let k = count as usize;
                if hist.len() <= k {
                    hist.resize(k + 1, 0);
                }
                hist[k] += 1;
                jumps_total += jumps as u128;
            }
            (hist, jumps_total)
        })
        .collect();
    let mut histogram = Vec::new();
    let mut jumps_total = 0;
    for (hist, j) in parts {
        if histogram.len() < hist.len() {
            histogram.resize(hist.len(), 0);
        }
        histogram.iter_mut().zip(&hist).for_each(|(a, b)| *a += b);
        jumps_total += j;
    }
    Ok(McSummary::from_histogram(histogram, jumps_total, cfg.seed))
}

/// A value with its standard error; `se = 0` for exact values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub exact: bool,
}

/// `P(f(X_0) = 1)`: exact for `n ≤ 20`, sampled from `π_n` otherwise.
pub fn nondegeneracy(f: &BooleanFunction, p: BiasParam, cfg: &McConfig) -> Result<Estimate> {
    if f.dim() <= EXACT_MAX_N && f.truth_table().is_some() {
        return Ok(Estimate {
            value: crate::function::exact_nondegeneracy(f, p)?,
            se: 0.0,
            exact: true,
        });
    }
    let cfg = cfg.validated()?;
    state_for(f)?;
    let hits: u64 = batches(&cfg)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut state = state_for(f).expect("checked above");
            (lo..hi)
                .map(|t| {
                    let mut rng = trial_rng(cfg.seed, t);
                    match &mut state {
                        StateBox::Table(s) => {
                            s.reset(p.get(), &mut rng);
                            s.value() as u64
                        }
                        StateBox::Family(s) => {
                            s.reset(p.get(), &mut rng);
                            s.value() as u64
                        }
                    }
                })
                .sum::<u64>()
        })
        .sum();
    let q = hits as f64 / cfg.trials as f64;
    Ok(Estimate {
        value: q,
        se: (q * (1.0 - q) / cfg.trials as f64).sqrt(),
        exact: false,
    })
}

/// Exact law of `C_f`, truncated at `k_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountDistribution {
    /// `probs[m] = P(C_f = m)` for `m = 0..=k_max`.
    pub probs: Vec<f64>,
    /// `P(C_f > k_max)` plus the Poisson mass of ignored jump counts.
    pub truncation_mass: f64,
    /// Largest jump count included in the Poisson mixture.
    pub jump_terms: usize,
    /// Part of `truncation_mass` from the ignored jump counts.
    pub poisson_tail: f64,
}

impl CountDistribution {
    pub fn mean(&self) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(m, q)| m as f64 * q))
    }

    pub fn second_moment(&self) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(m, q)| (m * m) as f64 * q))
    }

    /// `P(C ≥ k)`; the truncated mass is counted as lying above `k_max`.
    pub fn tail_at(&self, k: usize) -> f64 {
        if k >= self.probs.len() {
            return self.truncation_mass;
        }
        compensated_sum(self.probs[k..].iter().copied()) + self.truncation_mass
    }
}

/// Conditions on `T = k` jumps and mixes with Poisson(n) weights. With
/// `v_m^{(k)}(x) = P_x(C = m after k jumps)`, one jump maps
/// `v_m ← Q_f v_m + Q_∂f v_{m-1}`, and `P(C = m | T = k) = π^T v_m^{(k)}`.
/// Counts above `k_max` are pooled in one vector evolving under `Q_n`.
pub fn exact_count_distribution(
    f: &BooleanFunction,
    p: BiasParam,
    k_max: usize,
    policy: &TruncationPolicy,
) -> Result<CountDistribution> {
    f.table_for("exact_count_distribution", EXACT_COUNT_MAX_N)?;
    let n = f.dim();
    let nf = n as f64;
    let len = 1usize << n;
    let w = stationary_weights(n, p);
    let pi_dot = |v: &[f64]| compensated_sum(w.iter().zip(v).map(|(w, v)| w * v));
    let keep = OperatorHandle::new(f, p, OperatorKind::Qf)?;
    let cross = OperatorHandle::new(f, p, OperatorKind::Qdf)?;
    let walk = OperatorHandle::walk(n, p)?;

    let jump_cap = policy.k_max_for(n).max(4 * n + 64);
    let mut v: Vec<Vec<f64>> = vec![vec![0.0; len]; k_max + 1];
    v[0] = vec![1.0; len];
    let mut over = vec![0.0; len];
    let mut probs: Vec<CompensatedSum> = vec![CompensatedSum::new(); k_max + 1];
    let mut over_mass = CompensatedSum::new();
    let mut included = CompensatedSum::new();
    let mut pmf = (-nf).exp();
    for k in 0..=jump_cap {
        if k > 0 {
            pmf *= nf / k as f64;
        }
        included.add(pmf);
        // Only v_0..v_{min(k, k_max)} can be nonzero after k jumps.
        let top = k.min(k_max);
        for (m, acc) in probs.iter_mut().enumerate().take(top + 1) {
            acc.add(pmf * pi_dot(&v[m]));
        }
        over_mass.add(pmf * pi_dot(&over));

        let tail_bound = poisson_tail_bound(nf, k, pmf);
        if tail_bound <= policy.tol {
            let poisson_tail = (1.0 - included.value()).max(0.0);
            return Ok(CountDistribution {
                probs: probs.iter().map(|c| c.value()).collect(),
                truncation_mass: over_mass.value() + poisson_tail,
                jump_terms: k,
                poisson_tail,
            });
        }

        let mut next_over = walk.apply(&over)?;
        let spill = cross.apply(&v[k_max])?;
        next_over.iter_mut().zip(&spill).for_each(|(a, b)| *a += b);
        over = next_over;
        for m in (0..=(top + 1).min(k_max)).rev() {
            let mut next = keep.apply(&v[m])?;
            if m > 0 {
                let c = cross.apply(&v[m - 1])?;
                next.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
            }
            v[m] = next;
        }
    }
    Err(Error::TruncationFailure {
        k_max: jump_cap,
        tail: poisson_tail_bound(nf, jump_cap, pmf),
        tol: policy.tol,
    })
}

/// Bound on `P(T > k)` for `T ~ Poisson(a)` given `pmf = P(T = k)`.
fn poisson_tail_bound(a: f64, k: usize, pmf: f64) -> f64 {
    let ratio = a / (k + 2) as f64;
    if ratio >= 1.0 {
        f64::INFINITY
    } else {
        pmf * a / (k + 1) as f64 / (1.0 - ratio)
    }
}
