use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cube::BiasParam;
use crate::error::{Error, Result};

/// How the bias `p_n` depends on `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    Constant { c: f64 },
    /// `p_n = c·n^{-α}`.
    Power { c: f64, alpha: f64 },
    /// `p_n = c/n`.
    Inverse { c: f64 },
    /// One value per grid entry, in order.
    Custom { values: Vec<f64> },
}

impl Schedule {
    fn raw(&self, n: usize, index: usize) -> Result<f64> {
        let nf = n as f64;
        Ok(match self {
            Schedule::Constant { c } => *c,
            Schedule::Power { c, alpha } => c * nf.powf(-alpha),
            Schedule::Inverse { c } => c / nf,
            Schedule::Custom { values } => *values.get(index).ok_or_else(|| {
                Error::InvalidSchedule(format!(
                    "custom schedule has {} values, grid entry {index} requested",
                    values.len()
                ))
            })?,
        })
    }

    /// `p_n` for every grid entry; fails before returning anything if one is outside `(0,1)`.
    pub fn resolve(&self, n_grid: &[usize]) -> Result<Vec<BiasParam>> {
        if let Schedule::Custom { values } = self {
            if values.len() != n_grid.len() {
                return Err(Error::InvalidSchedule(format!(
                    "custom schedule has {} values for {} grid points",
                    values.len(),
                    n_grid.len()
                )));
            }
        }
        n_grid
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let p = self.raw(n, i)?;
                BiasParam::new(p)
                    .map_err(|_| Error::InvalidSchedule(format!("{self} gives p = {p} at n = {n}")))
            })
            .collect()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant { c } => write!(f, "constant:{c}"),
            Schedule::Power { c, alpha } => write!(f, "power:{c},{alpha}"),
            Schedule::Inverse { c } => write!(f, "inverse:{c}"),
            Schedule::Custom { values } => {
                let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
                write!(f, "custom:{}", v.join(","))
            }
        }
    }
}

/// `constant:C`, `power:C,ALPHA`, `inverse:C` or `custom:P1,P2,...`.
impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSchedule(format!("expected KIND:ARGS, got {s:?}")))?;
        let nums = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidSchedule(format!("{a:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let arity = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidSchedule(format!("{kind} takes {k} argument(s)")))
            }
        };
        match kind {
            "constant" => arity(1).map(|_| Schedule::Constant { c: nums[0] }),
            "power" => arity(2).map(|_| Schedule::Power {
                c: nums[0],
                alpha: nums[1],
            }),
            "inverse" => arity(1).map(|_| Schedule::Inverse { c: nums[0] }),
            "custom" => Ok(Schedule::Custom { values: nums }),
            _ => Err(Error::InvalidSchedule(format!("unknown schedule kind {kind:?}"))),
        }
    }
}
