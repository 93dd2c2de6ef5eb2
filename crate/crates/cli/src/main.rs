use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use switchcount::dynamics::influence_profile;
use switchcount::experiment::{run_sweep, run_verify, Schedule, SweepConfig, VerifyOptions, SCHEMA_VERSION};
use switchcount::moments::{moment_report, TruncationPolicy};
use switchcount::simulate::{monte_carlo_moments, simulate_trials, McConfig};
use switchcount::spectral::transform;
use switchcount::{BiasParam, BooleanFunction, FamilySpec, TruthTable};

#[derive(Parser, Debug)]
#[command(name = "switchcount", version, about = "Switch counts of Boolean functions under the p-biased dynamics")]
struct Cli {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Truncation tolerance for the infinite series.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit timestamps so identical runs give identical bytes.
    #[arg(long, global = true)]
    reproducible: bool,
    /// JSON file with defaults for any flag (keys use underscores).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the p-biased Fourier-Walsh spectrum as CSV.
    Spectrum(FnArgs),
    /// Per-coordinate and total influences.
    Influence(FnArgs),
    /// Full moment report.
    Moments {
        #[command(flatten)]
        func: FnArgs,
        /// Comma-separated theta values for the Paley-Zygmund bound.
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
    },
    /// Monte Carlo of the switch count.
    Simulate {
        #[command(flatten)]
        func: FnArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Emit one CSV row per trial instead of the JSON summary.
        #[arg(long)]
        per_trial: bool,
    },
    /// One row of exact and simulated diagnostics per n; writes OUT.csv and OUT.json.
    Sweep {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        tribe_size: Option<usize>,
        /// Comma-separated n values, or START:END[:STEP].
        #[arg(long)]
        n_grid: Option<String>,
        /// constant:C, power:C,ALPHA, inverse:C or custom:P1,P2,...
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        k_grid: Option<Vec<usize>>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Run every invariant check; exits nonzero on failure.
    Verify {
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        p_grid: Option<Vec<f64>>,
        #[arg(long)]
        random_per_n: Option<usize>,
        #[arg(long)]
        mc_trials: Option<u64>,
        #[arg(long, hide = true)]
        corrupt_butterfly: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct FnArgs {
    /// dictator, majority, parity, tribes, and, or
    #[arg(long)]
    family: Option<String>,
    #[arg(short = 'n', long = "n")]
    n: Option<usize>,
    #[arg(long)]
    tribe_size: Option<usize>,
    /// Truth-table file ("n=<int>" line, then 2^n bits); overrides --family.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(short = 'p', long = "p")]
    p: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct McArgs {
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    batch: Option<u64>,
}

/// Mirrors the flags; command-line values win.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    reproducible: Option<bool>,
    family: Option<String>,
    n: Option<usize>,
    tribe_size: Option<usize>,
    table: Option<PathBuf>,
    p: Option<f64>,
    thetas: Option<Vec<f64>>,
    trials: Option<u64>,
    batch: Option<u64>,
    per_trial: Option<bool>,
    n_grid: Option<String>,
    schedule: Option<String>,
    k_grid: Option<Vec<usize>>,
    n_max: Option<usize>,
    p_grid: Option<Vec<f64>>,
    random_per_n: Option<usize>,
    mc_trials: Option<u64>,
}

struct Globals {
    seed: u64,
    policy: TruncationPolicy,
    out: Option<PathBuf>,
    reproducible: bool,
}

fn parse_family(name: &str, tribe_size: Option<usize>) -> Result<FamilySpec> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "dictator" => FamilySpec::Dictator,
        "majority" => FamilySpec::Majority,
        "parity" => FamilySpec::Parity,
        "tribes" => FamilySpec::Tribes {
            tribe_size: tribe_size.context("tribes needs --tribe-size")?,
        },
        "and" => FamilySpec::And,
        "or" => FamilySpec::Or,
        other => bail!("unknown family {other:?}"),
    })
}

fn build_function(a: &FnArgs, cfg: &FileConfig) -> Result<BooleanFunction> {
    if let Some(path) = a.table.clone().or_else(|| cfg.table.clone()) {
        let t = TruthTable::load(&path).with_context(|| format!("loading {}", path.display()))?;
        let name = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
        return Ok(BooleanFunction::from_table(t, name));
    }
    let family = a.family.clone().or_else(|| cfg.family.clone()).context("--family or --table is required")?;
    let n = a.n.or(cfg.n).context("-n is required")?;
    let spec = parse_family(&family, a.tribe_size.or(cfg.tribe_size))?;
    Ok(BooleanFunction::family(spec, n)?)
}

fn bias(a: &FnArgs, cfg: &FileConfig) -> Result<BiasParam> {
    Ok(BiasParam::new(a.p.or(cfg.p).unwrap_or(0.5))?)
}

fn mc_config(a: &McArgs, cfg: &FileConfig, seed: u64, default_trials: u64) -> Result<McConfig> {
    Ok(McConfig {
        trials: a.trials.or(cfg.trials).unwrap_or(default_trials),
        seed,
        batch: a.batch.or(cfg.batch).unwrap_or(4096),
    }
    .validated()?)
}

fn parse_grid(s: &str) -> Result<Vec<usize>> {
    if let Some((start, rest)) = s.split_once(':') {
        let (end, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let (start, end, step): (usize, usize, usize) = (start.trim().parse()?, end.trim().parse()?, step.trim().parse()?);
        if step == 0 || end < start {
            bail!("bad range {s:?}");
        }
        return Ok((start..=end).step_by(step).collect());
    }
    s.split(',').map(|v| Ok(v.trim().parse()?)).collect()
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn envelope(g: &Globals, command: &str, body: Value) -> Value {
    let mut v = json!({ "schema": SCHEMA_VERSION, "command": command });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
        if !g.reproducible {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            dst.insert("generated_at_unix".into(), now.into());
        }
    }
    v
}

fn write_json(g: &Globals, v: &Value) -> Result<()> {
    let mut w = open_out(g.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let g = Globals {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        policy: TruncationPolicy::with_tol(cli.tol.or(cfg.tol).unwrap_or(1e-12)),
        out: cli.out.clone().or_else(|| cfg.out.clone()),
        reproducible: cli.reproducible || cfg.reproducible.unwrap_or(false),
    };

    match cli.command {
        Command::Spectrum(a) => {
            let f = build_function(&a, &cfg)?;
            let s = transform(&f, bias(&a, &cfg)?)?;
            let mut w = open_out(g.out.as_deref())?;
            s.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Influence(a) => {
            let f = build_function(&a, &cfg)?;
            let p = bias(&a, &cfg)?;
            let prof = influence_profile(&f, p)?;
            let body = json!({ "function": f.name(), "n": f.dim(), "p": p.get(), "influence": prof });
            write_json(&g, &envelope(&g, "influence", body))?;
        }
        Command::Moments { func, thetas } => {
            let f = build_function(&func, &cfg)?;
            let p = bias(&func, &cfg)?;
            let thetas = thetas.or(cfg.thetas.clone()).unwrap_or_else(|| vec![0.25, 0.5, 0.75]);
            let r = moment_report(&f, p, &thetas, &g.policy)?;
            write_json(&g, &envelope(&g, "moments", json!({ "report": r })))?;
        }
        Command::Simulate { func, mc, per_trial } => {
            let f = build_function(&func, &cfg)?;
            let p = bias(&func, &cfg)?;
            let mc = mc_config(&mc, &cfg, g.seed, 100_000)?;
            if per_trial || cfg.per_trial.unwrap_or(false) {
                let mut w = open_out(g.out.as_deref())?;
                writeln!(w, "trial,count,jumps")?;
                for t in simulate_trials(&f, p, &mc)? {
                    writeln!(w, "{},{},{}", t.stream, t.count, t.jumps)?;
                }
                w.flush()?;
            } else {
                let s = monte_carlo_moments(&f, p, &mc)?;
                let body = json!({ "function": f.name(), "n": f.dim(), "p": p.get(), "summary": s });
                write_json(&g, &envelope(&g, "simulate", body))?;
            }
        }
        Command::Sweep {
            family,
            tribe_size,
            n_grid,
            schedule,
            thetas,
            k_grid,
            mc,
        } => {
            let family = family.or(cfg.family.clone()).context("--family is required")?;
            let spec = parse_family(&family, tribe_size.or(cfg.tribe_size))?;
            let grid = parse_grid(&n_grid.or(cfg.n_grid.clone()).context("--n-grid is required")?)?;
            let schedule: Schedule = schedule
                .or(cfg.schedule.clone())
                .unwrap_or_else(|| "constant:0.5".into())
                .parse()?;
            let mut sc = SweepConfig::new(spec, grid, schedule);
            if let Some(t) = thetas.or(cfg.thetas.clone()) {
                sc.thetas = t;
            }
            if let Some(k) = k_grid.or(cfg.k_grid.clone()) {
                sc.k_grid = k;
            }
            sc.mc = mc_config(&mc, &cfg, g.seed, sc.mc.trials)?;
            sc.policy = g.policy;
            sc.reproducible = g.reproducible;
            let r = run_sweep(&sc)?;
            match &g.out {
                Some(out) => {
                    r.write_csv(BufWriter::new(File::create(out.with_extension("csv"))?))?;
                    r.write_json(BufWriter::new(File::create(out.with_extension("json"))?))?;
                }
                None => r.write_csv(io::stdout().lock())?,
            }
        }
        Command::Verify {
            n_max,
            p_grid,
            random_per_n,
            mc_trials,
            corrupt_butterfly,
        } => {
            let d = VerifyOptions::default();
            let opts = VerifyOptions {
                n_max: n_max.or(cfg.n_max).unwrap_or(d.n_max),
                p_grid: p_grid.or(cfg.p_grid.clone()).unwrap_or(d.p_grid),
                seed: g.seed,
                random_per_n: random_per_n.or(cfg.random_per_n).unwrap_or(d.random_per_n),
                mc_trials: mc_trials.or(cfg.mc_trials).unwrap_or(d.mc_trials),
                policy: g.policy,
                corrupt_butterfly,
                reproducible: g.reproducible,
            };
            let r = run_verify(&opts)?;
            write_json(&g, &serde_json::to_value(&r)?)?;
            for c in r.failures() {
                eprintln!("FAILED {}: residual {:e} > {:e}", c.name, c.max_residual, c.tolerance);
            }
            return Ok(r.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
