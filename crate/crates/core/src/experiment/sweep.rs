use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{unix_timestamp, Schedule, NOT_COMPUTED, SCHEMA_VERSION};
use crate::cube::BiasParam;
use crate::error::{Error, Result};
use crate::function::{BooleanFunction, FamilySpec, EXACT_MAX_N};
use crate::moments::{moment_report, PzBound, TruncationPolicy, SECOND_MOMENT_MAX_N};
use crate::simulate::{exact_count_distribution, monte_carlo_moments, McConfig, EXACT_COUNT_MAX_N};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub family: FamilySpec,
    pub n_grid: Vec<usize>,
    pub schedule: Schedule,
    pub thetas: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub mc: McConfig,
    pub policy: TruncationPolicy,
    /// Omits the timestamp so repeated runs are byte-identical.
    pub reproducible: bool,
}

impl SweepConfig {
    pub fn new(family: FamilySpec, n_grid: Vec<usize>, schedule: Schedule) -> Self {
        SweepConfig {
            family,
            n_grid,
            schedule,
            thetas: vec![0.25, 0.5, 0.75],
            k_grid: vec![1, 2, 4, 8, 16],
            mc: McConfig {
                trials: 20_000,
                seed: 0,
                batch: 4096,
            },
            policy: TruncationPolicy::default(),
            reproducible: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCell {
    pub k: usize,
    /// Exact `P(C ≥ k)`; `None` beyond the exact-distribution gate.
    pub exact: Option<f64>,
    pub mc: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PzCell {
    pub theta: f64,
    pub value: Option<f64>,
}

/// One grid point. `None` marks an exact column beyond its gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub p_n: f64,
    pub p_f1: Option<f64>,
    pub influence_total: Option<f64>,
    pub influence_sq_sum: Option<f64>,
    pub expected_count: Option<f64>,
    pub second_series: Option<f64>,
    pub second_fourier: Option<f64>,
    pub second_increasing: Option<f64>,
    pub variance_f: Option<f64>,
    pub pz: Vec<PzCell>,
    pub increasing_upper: Option<f64>,
    pub criterion_ratio: Option<f64>,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub mc_second: f64,
    pub mc_second_se: f64,
    pub tails: Vec<TailCell>,
}

impl SweepRow {
    /// Exact `E[C]` when available, the Monte Carlo mean otherwise.
    pub fn best_mean(&self) -> f64 {
        self.expected_count.unwrap_or(self.mc_mean)
    }

    /// Exact tail when available, the Monte Carlo one otherwise.
    pub fn best_tail(&self, k: usize) -> Option<f64> {
        self.tails.iter().find(|t| t.k == k).map(|t| t.exact.unwrap_or(t.mc))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub heuristic: &'static str,
    pub expected_count_increasing: bool,
    /// Largest change of `P(C ≥ k)` across the grid, over all `k`.
    pub max_tail_spread: f64,
    pub verdict: &'static str,
}

const HEURISTIC: &str = "finite-n evidence only: compares P(C >= k) at fixed k across the n grid; \
stable tails suggest tame, tails rising toward 1 suggest volatile, growing E[C] with non-vanishing tails suggests not tame";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gates {
    pub exact_max_n: usize,
    pub second_moment_max_n: usize,
    pub exact_tail_max_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub schema: u32,
    pub command: &'static str,
    pub family: String,
    pub schedule: String,
    pub thetas: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub mc: McConfig,
    pub tol: f64,
    pub gates: Gates,
    pub rows: Vec<SweepRow>,
    pub evidence: Evidence,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
}

fn validate(cfg: &SweepConfig) -> Result<Vec<BiasParam>> {
    if cfg.n_grid.is_empty() {
        return Err(Error::InvalidArgument("empty n grid".into()));
    }
    if let Some(t) = cfg.thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidArgument(format!("theta = {t} not in (0, 1)")));
    }
    for &n in &cfg.n_grid {
        cfg.family.validate(n)?;
    }
    cfg.mc.validated()?;
    cfg.schedule.resolve(&cfg.n_grid)
}

fn sweep_row(cfg: &SweepConfig, n: usize, p: BiasParam) -> Result<SweepRow> {
    let f = BooleanFunction::family(cfg.family.clone(), n)?;
    let report = (n <= EXACT_MAX_N)
        .then(|| moment_report(&f, p, &cfg.thetas, &cfg.policy))
        .transpose()?;
    let k_top = cfg.k_grid.iter().copied().max().unwrap_or(0);
    let dist = (n <= EXACT_COUNT_MAX_N)
        .then(|| exact_count_distribution(&f, p, k_top, &cfg.policy))
        .transpose()?;
    let mc = monte_carlo_moments(&f, p, &cfg.mc)?;

    let r = report.as_ref();
    let pz_of = |theta: f64| {
        r.and_then(|r| r.pz_bounds.iter().find(|b: &&PzBound| b.theta == theta))
            .map(|b| b.value)
    };
    Ok(SweepRow {
        n,
        p_n: p.get(),
        p_f1: r.map(|r| r.p_f1),
        influence_total: r.map(|r| r.influence.total),
        influence_sq_sum: r.map(|r| r.influence.sq_sum),
        expected_count: r.map(|r| r.expected_count),
        second_series: r.and_then(|r| r.second_series),
        second_fourier: r.and_then(|r| r.second_fourier),
        second_increasing: r.and_then(|r| r.second_increasing),
        variance_f: r.map(|r| r.variance_f),
        pz: cfg
            .thetas
            .iter()
            .map(|&theta| PzCell {
                theta,
                value: pz_of(theta),
            })
            .collect(),
        increasing_upper: r.and_then(|r| r.increasing_upper),
        criterion_ratio: r.and_then(|r| r.criterion_ratio),
        mc_mean: mc.mean,
        mc_se: mc.se_mean,
        mc_second: mc.second_moment,
        mc_second_se: mc.se_second,
        tails: cfg
            .k_grid
            .iter()
            .map(|&k| TailCell {
                k,
                exact: dist.as_ref().map(|d| d.tail_at(k)),
                mc: mc.tail_at(k),
                mc_se: mc.tail_se(k),
            })
            .collect(),
    })
}

fn evidence(rows: &[SweepRow], k_grid: &[usize]) -> Evidence {
    let means: Vec<f64> = rows.iter().map(SweepRow::best_mean).collect();
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let mean_spread = spread(&means);
    let columns: Vec<Vec<f64>> = k_grid
        .iter()
        .map(|&k| rows.iter().filter_map(|r| r.best_tail(k)).collect())
        .collect();
    let max_tail_spread = columns.iter().map(|c| spread(c)).fold(0.0, f64::max);
    let rising = columns
        .iter()
        .all(|c| c.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let last_small_k = columns.first().and_then(|c| c.last()).copied().unwrap_or(0.0);
    let verdict = if rows.len() < 2 {
        "inconclusive: a single grid point"
    } else if max_tail_spread <= 0.05 && mean_spread <= 0.05 {
        "stable tails: consistent with tame"
    } else if increasing && rising && last_small_k >= 0.9 {
        "tails rising toward 1: consistent with volatile"
    } else if increasing && columns.iter().all(|c| c.last().is_some_and(|&t| t > 0.0)) {
        "growing E[C] with non-vanishing tails: consistent with not tame"
    } else {
        "inconclusive"
    };
    Evidence {
        heuristic: HEURISTIC,
        expected_count_increasing: increasing,
        max_tail_spread,
        verdict,
    }
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if v.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Runs every grid point. The schedule and family are validated before any row starts.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let ps = validate(cfg)?;
    let rows = cfg
        .n_grid
        .par_iter()
        .zip(ps.par_iter())
        .map(|(&n, &p)| sweep_row(cfg, n, p))
        .collect::<Result<Vec<_>>>()?;
    let evidence = evidence(&rows, &cfg.k_grid);
    Ok(SweepReport {
        schema: SCHEMA_VERSION,
        command: "sweep",
        family: cfg.family.name(),
        schedule: cfg.schedule.to_string(),
        thetas: cfg.thetas.clone(),
        k_grid: cfg.k_grid.clone(),
        mc: cfg.mc,
        tol: cfg.policy.tol,
        gates: Gates {
            exact_max_n: EXACT_MAX_N,
            second_moment_max_n: SECOND_MOMENT_MAX_N,
            exact_tail_max_n: EXACT_COUNT_MAX_N,
        },
        rows,
        evidence,
        generated_at_unix: (!cfg.reproducible).then(unix_timestamp),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| NOT_COMPUTED.to_string(), |x| x.to_string())
}

impl SweepReport {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "n",
            "p_n",
            "p_f1",
            "influence_total",
            "influence_sq_sum",
            "expected_count",
            "second_series",
            "second_fourier",
            "second_increasing",
            "variance_f",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(self.thetas.iter().map(|t| format!("pz_{t}")));
        h.extend(
            ["increasing_upper", "criterion_ratio", "mc_mean", "mc_se", "mc_second", "mc_second_se"]
                .iter()
                .map(|s| s.to_string()),
        );
        h.extend(self.k_grid.iter().map(|k| format!("tail_exact_ge_{k}")));
        h.extend(self.k_grid.iter().map(|k| format!("tail_mc_ge_{k}")));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.csv_header())?;
        for r in &self.rows {
            let mut rec = vec![r.n.to_string(), r.p_n.to_string()];
            rec.extend(
                [
                    r.p_f1,
                    r.influence_total,
                    r.influence_sq_sum,
                    r.expected_count,
                    r.second_series,
                    r.second_fourier,
                    r.second_increasing,
                    r.variance_f,
                ]
                .into_iter()
                .map(cell),
            );
            rec.extend(r.pz.iter().map(|c| cell(c.value)));
            rec.extend([cell(r.increasing_upper), cell(r.criterion_ratio)]);
            rec.extend([r.mc_mean, r.mc_se, r.mc_second, r.mc_second_se].map(|x| x.to_string()));
            rec.extend(r.tails.iter().map(|t| cell(t.exact)));
            rec.extend(r.tails.iter().map(|t| t.mc.to_string()));
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(family: FamilySpec, grid: Vec<usize>) -> SweepConfig {
        let mut c = SweepConfig::new(family, grid, Schedule::Constant { c: 0.5 });
        c.mc.trials = 2000;
        c.reproducible = true;
        c
    }

    #[test]
    fn dictator_rows_are_exact() {
        let r = run_sweep(&cfg(FamilySpec::Dictator, vec![1, 3, 5])).unwrap();
        for row in &r.rows {
            assert!((row.expected_count.unwrap() - 0.5).abs() < 1e-12);
            assert!((row.second_series.unwrap() - 0.75).abs() < 1e-10);
        }
        assert!(r.evidence.verdict.contains("tame"));
    }

    #[test]
    fn gates_mark_not_computed() {
        let mut c = cfg(FamilySpec::Parity, vec![13, 16, 22]);
        c.mc.trials = 300;
        let r = run_sweep(&c).unwrap();
        assert!(r.rows[0].second_series.is_some());
        assert!(r.rows[0].tails[0].exact.is_none());
        assert!(r.rows[1].second_series.is_none());
        assert!(r.rows[1].expected_count.is_some());
        assert!(r.rows[2].expected_count.is_none());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(3).unwrap().contains(",NA,"));
    }

    #[test]
    fn invalid_schedule_fails_first() {
        let mut c = cfg(FamilySpec::Majority, vec![3, 5]);
        c.schedule = Schedule::Inverse { c: 4.0 };
        assert!(matches!(run_sweep(&c), Err(Error::InvalidSchedule(_))));
        let t = cfg(FamilySpec::Tribes { tribe_size: 2 }, vec![4, 5]);
        assert!(run_sweep(&t).is_err());
    }

    #[test]
    fn reproducible_json_is_byte_identical() {
        let c = cfg(FamilySpec::Majority, vec![3, 5, 7]);
        let json = |c: &SweepConfig| {
            let mut buf = Vec::new();
            run_sweep(c).unwrap().write_json(&mut buf).unwrap();
            buf
        };
        let a = json(&c);
        assert_eq!(a, json(&c));
        assert!(!String::from_utf8(a).unwrap().contains("generated_at_unix"));
    }

    #[test]
    fn header_is_fixed() {
        let r = run_sweep(&cfg(FamilySpec::Dictator, vec![2])).unwrap();
        let h = r.csv_header();
        assert_eq!(h[0], "n");
        assert!(h.contains(&"pz_0.5".to_string()));
        assert!(h.contains(&"tail_exact_ge_16".to_string()));
        assert_eq!(h.len(), 10 + 3 + 6 + 10);
    }
}
