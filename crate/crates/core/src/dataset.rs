//! Observation datasets consumed by the revealed-preference tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;

/// Default absolute tolerance for "the constraint is active at the response".
pub const ACTIVITY_TOL: f64 = 1e-6;

/// A response (consumption bundle, per-channel power) in the nonnegative orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResponseVector(Vec<f64>);

impl ResponseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Schema("response vector must have dimension >= 1".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Schema(format!(
                "response coordinate {i} must be finite and nonnegative, got {v}"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ResponseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetMode {
    /// Known constraints `g_t(beta) <= 0`, observed responses; tests for a utility.
    UtilityTest,
    /// Known utilities `u_t`, observed responses; tests for a budget.
    StrategyTest,
}

/// One `(function, response)` pair. In utility-test mode the function is the
/// constraint `g_t`; in strategy-test mode it is the utility `u_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub function: FunctionSpec,
    pub response: ResponseVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    mode: DatasetMode,
    entries: Vec<Observation>,
}

impl Dataset {
    pub fn new(mode: DatasetMode, entries: Vec<Observation>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Schema("dataset horizon K must be >= 1".into()))?;
        let m = first.response.dim();
        for (t, e) in entries.iter().enumerate() {
            if e.response.dim() != m {
                return Err(Error::Schema(format!(
                    "response {t} has dimension {} but m = {m}",
                    e.response.dim()
                )));
            }
            e.function
                .check(m)
                .map_err(|err| Error::Schema(format!("function {t}: {err}")))?;
        }
        Ok(Self { mode, entries })
    }

    pub fn from_pairs(mode: DatasetMode, pairs: Vec<(FunctionSpec, Vec<f64>)>) -> Result<Self> {
        let entries = pairs
            .into_iter()
            .map(|(function, r)| {
                Ok(Observation {
                    function,
                    response: ResponseVector::new(r)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mode, entries)
    }

    pub fn mode(&self) -> DatasetMode {
        self.mode
    }

    pub fn horizon(&self) -> usize {
        self.entries.len()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].response.dim()
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn function(&self, t: usize) -> &FunctionSpec {
        &self.entries[t].function
    }

    pub fn response(&self, t: usize) -> &[f64] {
        self.entries[t].response.as_slice()
    }

    /// `values[t][s] = f_t(beta_s)`.
    pub fn cross_values(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|row| self.entries.iter().map(|col| row.function.value(&col.response)).collect())
            .collect()
    }

    pub(crate) fn require_mode(&self, mode: DatasetMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidInput(format!(
                "dataset mode is {:?}, this test needs {:?}",
                self.mode, mode
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `|g_t(beta_t)|` exceeds the activity tolerance.
    InactiveConstraint,
    /// The function does not evaluate to a finite number at its own response.
    NonFiniteValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Zero-based observation index.
    pub index: usize,
    pub kind: ViolationKind,
    /// Signed residual (`g_t(beta_t)` for activity violations).
    pub magnitude: f64,
}

/// Every invariant violation of `d` at tolerance `tol`; empty means valid.
/// Structural invariants (K >= 1, shared `m`, nonnegative responses) are
/// enforced when the dataset is built, so only value-level checks remain.
pub fn validate_dataset(d: &Dataset, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (t, e) in d.entries().iter().enumerate() {
        let v = e.function.value(&e.response);
        if !v.is_finite() {
            out.push(Violation {
                index: t,
                kind: ViolationKind::NonFiniteValue,
                magnitude: v,
            });
            continue;
        }
        if d.mode() == DatasetMode::UtilityTest && v.abs() > tol {
            out.push(Violation {
                index: t,
                kind: ViolationKind::InactiveConstraint,
                magnitude: v,
            });
        }
    }
    out
}

/// A per-time budget `g(beta) <= gamma_t` sharing one base function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    base: FunctionSpec,
    thresholds: Vec<f64>,
}

impl BudgetSpec {
    pub fn new(base: FunctionSpec, thresholds: Vec<f64>) -> Result<Self> {
        let m = base
            .dim()
            .ok_or_else(|| Error::Schema("budget base has no fixed dimension".into()))?;
        base.check(m)?;
        if thresholds.is_empty() {
            return Err(Error::Schema("budget needs at least one threshold".into()));
        }
        let floor = base.value(&vec![0.0; m]);
        for (t, g) in thresholds.iter().enumerate() {
            if !(g.is_finite() && *g > 0.0) {
                return Err(Error::Schema(format!("threshold {t} must be positive, got {g}")));
            }
            if floor > *g {
                return Err(Error::InfeasibleRegion { gamma: *g, floor });
            }
        }
        Ok(Self { base, thresholds })
    }

    pub fn base(&self) -> &FunctionSpec {
        &self.base
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}
