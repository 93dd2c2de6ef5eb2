//! Boolean functions `f: {0,1}^n → {0,1}`, their families and structural predicates.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{dim_mask, stationary_weights, BiasParam, Point};
use crate::error::{Error, Result};
use crate::sum::compensated_sum;

/// Largest dimension for which a truth table is stored.
pub const TABLE_MAX_N: usize = 24;
/// Largest dimension for which exact routines run.
pub const EXACT_MAX_N: usize = 20;

/// Dense truth table indexed by the little-endian point word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    bits: Vec<bool>,
}

impl TruthTable {
    pub fn new(n: usize, bits: Vec<bool>) -> Result<Self> {
        if n == 0 || n > TABLE_MAX_N {
            return Err(Error::DimensionTooLarge {
                op: "truth table",
                n,
                max: TABLE_MAX_N,
            });
        }
        if bits.len() != 1 << n {
            return Err(Error::TruthTableLength {
                n,
                expected: 1 << n,
                found: bits.len(),
            });
        }
        Ok(TruthTable { n, bits })
    }

    pub fn from_fn(n: usize, f: impl Fn(u64) -> bool) -> Result<Self> {
        if n == 0 || n > TABLE_MAX_N {
            return Err(Error::DimensionTooLarge {
                op: "truth table",
                n,
                max: TABLE_MAX_N,
            });
        }
        let bits = (0..1u64 << n).map(f).collect();
        Ok(TruthTable { n, bits })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, word: u64) -> bool {
        self.bits[word as usize]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as u8 as f64).collect()
    }

    /// Parses the `n=<int>` / `0101...` text format.
    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty truth table file".into()))??;
        let n: usize = header
            .trim()
            .strip_prefix("n=")
            .ok_or_else(|| Error::Parse(format!("expected 'n=<int>', got {header:?}")))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad dimension in {header:?}: {e}")))?;
        let body = lines
            .next()
            .ok_or_else(|| Error::Parse("missing truth table line".into()))??;
        let bits = body
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("unexpected character {other:?} in truth table"))),
            })
            .collect::<Result<Vec<_>>>()?;
        TruthTable::new(n, bits)
    }

    pub fn load(path: &Path) -> Result<Self> {
        TruthTable::read_from(fs::File::open(path)?)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n={}", self.n)?;
        let line: String = self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        writeln!(w, "{line}")?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(fs::File::create(path)?)
    }
}

/// The named function families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FamilySpec {
    Dictator,
    /// `1(Σ x(i) ≥ n/2)`; even-n ties evaluate to 1.
    Majority,
    /// `1(Σ x(i) is even)`.
    Parity,
    /// OR of ANDs over consecutive blocks of `tribe_size` coordinates.
    Tribes { tribe_size: usize },
    And,
    Or,
    /// Truth table stored in a file.
    Custom { path: PathBuf },
}

impl FamilySpec {
    pub fn name(&self) -> String {
        match self {
            FamilySpec::Dictator => "dictator".into(),
            FamilySpec::Majority => "majority".into(),
            FamilySpec::Parity => "parity".into(),
            FamilySpec::Tribes { tribe_size } => format!("tribes{tribe_size}"),
            FamilySpec::And => "and".into(),
            FamilySpec::Or => "or".into(),
            FamilySpec::Custom { path } => format!("custom:{}", path.display()),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidFamily("dimension must be positive".into()));
        }
        if let FamilySpec::Tribes { tribe_size } = *self {
            if tribe_size == 0 || !n.is_multiple_of(tribe_size) {
                return Err(Error::InvalidFamily(format!(
                    "tribe size {tribe_size} does not divide n = {n}"
                )));
            }
        }
        Ok(())
    }

    /// Closed-form evaluation on a word. `None` for file-backed families.
    pub fn eval_word(&self, bits: u64, n: usize) -> Option<bool> {
        let ones = bits.count_ones() as usize;
        Some(match self {
            FamilySpec::Dictator => bits & 1 == 1,
            FamilySpec::Majority => 2 * ones >= n,
            FamilySpec::Parity => ones.is_multiple_of(2),
            FamilySpec::Tribes { tribe_size } => {
                let w = *tribe_size;
                let block = dim_mask(w);
                (0..n / w).any(|t| (bits >> (t * w)) & block == block)
            }
            FamilySpec::And => ones == n,
            FamilySpec::Or => ones > 0,
            FamilySpec::Custom { .. } => return None,
        })
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A Boolean function backed by a truth table, a family, or both.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanFunction {
    n: usize,
    name: String,
    family: Option<FamilySpec>,
    table: Option<TruthTable>,
}

impl BooleanFunction {
    /// A family member; the truth table is materialised when `n ≤ EXACT_MAX_N`.
    pub fn family(spec: FamilySpec, n: usize) -> Result<Self> {
        spec.validate(n)?;
        let table = match &spec {
            FamilySpec::Custom { path } => {
                let t = TruthTable::load(path)?;
                if t.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: t.dim(),
                    });
                }
                Some(t)
            }
            _ if n <= EXACT_MAX_N => Some(TruthTable::from_fn(n, |x| {
                spec.eval_word(x, n).expect("closed-form family")
            })?),
            _ => None,
        };
        Ok(BooleanFunction {
            n,
            name: format!("{}_{n}", spec.name()),
            family: Some(spec),
            table,
        })
    }

    pub fn from_table(table: TruthTable, name: impl Into<String>) -> Self {
        BooleanFunction {
            n: table.dim(),
            name: name.into(),
            family: None,
            table: Some(table),
        }
    }

    pub fn from_fn(n: usize, name: impl Into<String>, f: impl Fn(u64) -> bool) -> Result<Self> {
        Ok(BooleanFunction::from_table(TruthTable::from_fn(n, f)?, name))
    }

    pub fn dictator(n: usize) -> Result<Self> {
        BooleanFunction::family(FamilySpec::Dictator, n)
    }

    pub fn majority(n: usize) -> Result<Self> {
        BooleanFunction::family(FamilySpec::Majority, n)
    }

    pub fn parity(n: usize) -> Result<Self> {
        BooleanFunction::family(FamilySpec::Parity, n)
    }

    pub fn tribes(n: usize, tribe_size: usize) -> Result<Self> {
        BooleanFunction::family(FamilySpec::Tribes { tribe_size }, n)
    }

    pub fn constant(n: usize, value: bool) -> Result<Self> {
        BooleanFunction::from_fn(n, if value { "one" } else { "zero" }, |_| value)
    }

    /// Uniformly random truth table.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = (0..1usize << n).map(|_| rng.random::<bool>()).collect();
        Ok(BooleanFunction::from_table(
            TruthTable::new(n, bits)?,
            format!("random_{n}_{seed}"),
        ))
    }

    /// Random increasing function: either a monotone DNF over random
    /// minterms or a positive-weight threshold function.
    pub fn random_increasing(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let name = format!("random_increasing_{n}_{seed}");
        if rng.random::<bool>() {
            let terms = rng.random_range(1..=n + 1);
            let minterms: Vec<u64> = (0..terms)
                .map(|_| {
                    let mut m = 0u64;
                    while m == 0 {
                        m = rng.random::<u64>() & rng.random::<u64>() & dim_mask(n);
                    }
                    m
                })
                .collect();
            BooleanFunction::from_fn(n, name, |x| minterms.iter().any(|&m| m & !x == 0))
        } else {
            let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            let threshold = total * rng.random_range(0.2..0.8);
            BooleanFunction::from_fn(n, name, |x| {
                let s: f64 = (0..n).filter(|&i| x >> i & 1 == 1).map(|i| weights[i]).sum();
                s >= threshold
            })
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family_spec(&self) -> Option<&FamilySpec> {
        self.family.as_ref()
    }

    pub fn truth_table(&self) -> Option<&TruthTable> {
        self.table.as_ref()
    }

    /// The truth table, or an error naming the operation that needed it.
    pub fn table_for(&self, op: &'static str, max: usize) -> Result<&TruthTable> {
        if self.n > max {
            return Err(Error::DimensionTooLarge { op, n: self.n, max });
        }
        self.table.as_ref().ok_or(Error::DimensionTooLarge {
            op,
            n: self.n,
            max: EXACT_MAX_N,
        })
    }

    pub fn evaluate(&self, x: Point) -> Result<bool> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.dim(),
            });
        }
        if let Some(t) = &self.table {
            return Ok(t.get(x.bits()));
        }
        self.family
            .as_ref()
            .and_then(|s| s.eval_word(x.bits(), self.n))
            .ok_or_else(|| Error::InvalidFamily(format!("{} cannot be evaluated", self.name)))
    }

    /// `f·g` pointwise.
    pub fn and(&self, other: &BooleanFunction) -> Result<BooleanFunction> {
        let a = self.table_for("pointwise product", EXACT_MAX_N)?;
        let b = other.table_for("pointwise product", EXACT_MAX_N)?;
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        BooleanFunction::from_fn(a.dim(), format!("({})*({})", self.name, other.name), |x| {
            a.get(x) && b.get(x)
        })
    }
}

/// Checks `f(x) ≤ f(x^{i↦1})` over every covering pair.
pub fn is_increasing(f: &BooleanFunction) -> Result<bool> {
    let t = f.table_for("is_increasing", TABLE_MAX_N)?;
    let n = t.dim();
    Ok((0..1u64 << n).all(|x| {
        !t.get(x) || (0..n).all(|i| x >> i & 1 == 1 || t.get(x | 1 << i))
    }))
}

/// Exact `P(f(X_0) = 1) = E_π[f]`.
pub fn exact_nondegeneracy(f: &BooleanFunction, p: BiasParam) -> Result<f64> {
    let t = f.table_for("nondegeneracy", EXACT_MAX_N)?;
    let w = stationary_weights(t.dim(), p);
    Ok(compensated_sum(
        t.bits().iter().zip(&w).filter(|(&b, _)| b).map(|(_, &w)| w),
    ))
}

/// `Var_π(f) = E[f] - E[f]^2`.
pub fn variance(f: &BooleanFunction, p: BiasParam) -> Result<f64> {
    let m = exact_nondegeneracy(f, p)?;
    Ok(m - m * m)
}
