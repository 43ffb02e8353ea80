//! Evaluatable scalar fields on the nonnegative orthant.
//!
//! Every utility, budget and reconstructed envelope in the crate is a
//! [`FunctionSpec`]. Gradients are analytic per kind; nothing here does
//! symbolic or automatic differentiation.

use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, SquareMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeMode {
    /// Pointwise minimum; the utility reconstruction.
    Min,
    /// Pointwise maximum; the budget reconstruction.
    Max,
}

/// One piece `level + multiplier * (base(beta) - reference)` of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePiece {
    pub level: f64,
    pub multiplier: f64,
    pub reference: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
    pub base: FunctionSpec,
}

impl EnvelopePiece {
    pub fn value(&self, beta: &[f64]) -> f64 {
        self.level + self.multiplier * (self.base.value(beta) - self.reference)
    }
}

type CallbackFn = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync;

/// A function supplied at runtime (for example through the C interface).
/// It serializes as its id but cannot be read back from a file.
#[derive(Clone)]
pub struct CallbackFunction {
    pub id: String,
    pub dim: usize,
    pub monotone: Option<bool>,
    eval: Arc<CallbackFn>,
}

impl CallbackFunction {
    pub fn new<F>(id: impl Into<String>, dim: usize, monotone: Option<bool>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            dim,
            monotone,
            eval: Arc::new(eval),
        }
    }
}

impl fmt::Debug for CallbackFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallbackFunction")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .finish()
    }
}

impl PartialEq for CallbackFunction {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && Arc::ptr_eq(&self.eval, &other.eval)
    }
}

impl Serialize for CallbackFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CallbackFunction", 2)?;
        st.serialize_field("id", &self.id)?;
        st.serialize_field("dim", &self.dim)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for CallbackFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Tag {
            id: String,
        }
        let tag = Tag::deserialize(d)?;
        Err(de::Error::custom(format!(
            "callback function `{}` cannot be loaded from a file",
            tag.id
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionSpec {
    /// `coeffs' beta + offset`
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// `beta' matrix beta + linear' beta + offset`
    Quadratic {
        matrix: SquareMatrix,
        linear: Vec<f64>,
        offset: f64,
    },
    /// `beta' signal beta / (beta' interference beta + noise)`
    QuadraticFractional {
        signal: SquareMatrix,
        interference: SquareMatrix,
        noise: f64,
    },
    /// `prod_i beta_i ^ exponents_i`
    CobbDouglas { exponents: Vec<f64> },
    /// `sum_i weights_i * ln(beta_i)`
    LogLinear { weights: Vec<f64> },
    Envelope {
        mode: EnvelopeMode,
        pieces: Vec<EnvelopePiece>,
    },
    /// `base(beta) + linear' beta + offset`
    AffineShift {
        base: Box<FunctionSpec>,
        linear: Vec<f64>,
        offset: f64,
    },
    Callback(CallbackFunction),
}

impl FunctionSpec {
    pub fn linear(coeffs: Vec<f64>, offset: f64) -> Self {
        FunctionSpec::Linear { coeffs, offset }
    }

    pub fn quadratic_fractional(signal: SquareMatrix, interference: SquareMatrix, noise: f64) -> Self {
        FunctionSpec::QuadraticFractional {
            signal,
            interference,
            noise,
        }
    }

    pub fn cobb_douglas(exponents: Vec<f64>) -> Self {
        FunctionSpec::CobbDouglas { exponents }
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        match self {
            FunctionSpec::Linear { coeffs, offset } => dot(coeffs, beta) + offset,
            FunctionSpec::Quadratic {
                matrix,
                linear,
                offset,
            } => matrix.quad_form(beta) + dot(linear, beta) + offset,
            FunctionSpec::QuadraticFractional {
                signal,
                interference,
                noise,
            } => signal.quad_form(beta) / (interference.quad_form(beta) + noise),
            FunctionSpec::CobbDouglas { exponents } => exponents
                .iter()
                .zip(beta)
                .map(|(a, b)| b.powf(*a))
                .product(),
            FunctionSpec::LogLinear { weights } => {
                weights.iter().zip(beta).map(|(w, b)| w * b.ln()).sum()
            }
            FunctionSpec::Envelope { mode, pieces } => {
                let values = pieces.iter().map(|p| p.value(beta));
                match mode {
                    EnvelopeMode::Min => values.fold(f64::INFINITY, f64::min),
                    EnvelopeMode::Max => values.fold(f64::NEG_INFINITY, f64::max),
                }
            }
            FunctionSpec::AffineShift { base, linear, offset } => {
                base.value(beta) + dot(linear, beta) + offset
            }
            FunctionSpec::Callback(cb) => (cb.eval)(beta).0,
        }
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        match self {
            FunctionSpec::Linear { coeffs, .. } => coeffs.clone(),
            FunctionSpec::Quadratic { matrix, linear, .. } => {
                let mut g = matrix.sym_mul_vec(beta);
                for (gi, li) in g.iter_mut().zip(linear) {
                    *gi += li;
                }
                g
            }
            FunctionSpec::QuadraticFractional {
                signal,
                interference,
                noise,
            } => {
                let num = signal.quad_form(beta);
                let den = interference.quad_form(beta) + noise;
                let dn = signal.sym_mul_vec(beta);
                let dd = interference.sym_mul_vec(beta);
                dn.iter()
                    .zip(&dd)
                    .map(|(a, b)| (a * den - num * b) / (den * den))
                    .collect()
            }
            FunctionSpec::CobbDouglas { exponents } => (0..exponents.len())
                .map(|i| {
                    let others: f64 = exponents
                        .iter()
                        .zip(beta)
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, (a, b))| b.powf(*a))
                        .product();
                    exponents[i] * beta[i].powf(exponents[i] - 1.0) * others
                })
                .collect(),
            FunctionSpec::LogLinear { weights } => {
                weights.iter().zip(beta).map(|(w, b)| w / b).collect()
            }
            FunctionSpec::Envelope { pieces, .. } => {
                let (idx, _) = self.active_piece(beta).expect("envelope has no pieces");
                let p = &pieces[idx];
                p.base
                    .gradient(beta)
                    .into_iter()
                    .map(|g| g * p.multiplier)
                    .collect()
            }
            FunctionSpec::AffineShift { base, linear, .. } => {
                let mut g = base.gradient(beta);
                for (gi, li) in g.iter_mut().zip(linear) {
                    *gi += li;
                }
                g
            }
            FunctionSpec::Callback(cb) => (cb.eval)(beta).1,
        }
    }

    /// Index and value of the piece attaining the envelope extremum (lowest
    /// index on ties). `None` for non-envelope kinds or empty envelopes.
    pub fn active_piece(&self, beta: &[f64]) -> Option<(usize, f64)> {
        let FunctionSpec::Envelope { mode, pieces } = self else {
            return None;
        };
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in pieces.iter().enumerate() {
            let v = p.value(beta);
            let better = match (best, mode) {
                (None, _) => true,
                (Some((_, b)), EnvelopeMode::Min) => v < b,
                (Some((_, b)), EnvelopeMode::Max) => v > b,
            };
            if better {
                best = Some((i, v));
            }
        }
        best
    }

    /// Response dimension this function expects, when it is fixed by the spec.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FunctionSpec::Linear { coeffs, .. } => Some(coeffs.len()),
            FunctionSpec::Quadratic { matrix, .. } => Some(matrix.dim()),
            FunctionSpec::QuadraticFractional { signal, .. } => Some(signal.dim()),
            FunctionSpec::CobbDouglas { exponents } => Some(exponents.len()),
            FunctionSpec::LogLinear { weights } => Some(weights.len()),
            FunctionSpec::Envelope { pieces, .. } => pieces.first().and_then(|p| p.base.dim()),
            FunctionSpec::AffineShift { linear, .. } => Some(linear.len()),
            FunctionSpec::Callback(cb) => Some(cb.dim),
        }
    }

    /// `Some(true)` when the kind is known to be nondecreasing on the
    /// nonnegative orthant, `Some(false)` when known not to be, `None` when
    /// only a numerical spot-check can tell.
    pub fn monotone(&self) -> Option<bool> {
        match self {
            FunctionSpec::Linear { coeffs, .. } => Some(coeffs.iter().all(|c| *c >= 0.0)),
            FunctionSpec::Quadratic { matrix, linear, .. } => {
                if matrix.data().iter().all(|v| *v >= 0.0) && linear.iter().all(|c| *c >= 0.0) {
                    Some(true)
                } else {
                    None
                }
            }
            FunctionSpec::QuadraticFractional { .. } => None,
            FunctionSpec::CobbDouglas { exponents } => Some(exponents.iter().all(|a| *a >= 0.0)),
            FunctionSpec::LogLinear { weights } => Some(weights.iter().all(|w| *w >= 0.0)),
            FunctionSpec::Envelope { pieces, .. } => {
                let all = pieces
                    .iter()
                    .all(|p| p.multiplier >= 0.0 && p.base.monotone() == Some(true));
                if all {
                    Some(true)
                } else {
                    None
                }
            }
            FunctionSpec::AffineShift { base, linear, .. } => {
                if base.monotone() == Some(true) && linear.iter().all(|c| *c >= 0.0) {
                    Some(true)
                } else {
                    None
                }
            }
            FunctionSpec::Callback(cb) => cb.monotone,
        }
    }

    /// Structural check against response dimension `m`.
    pub fn check(&self, m: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let dim_err = |what: &str, found: usize| Error::DimensionMismatch {
            context: what.to_string(),
            expected: m,
            found,
        };
        match self {
            FunctionSpec::Linear { coeffs, offset } => {
                if coeffs.len() != m {
                    return Err(dim_err("linear coefficients", coeffs.len()));
                }
                if !finite(coeffs) || !offset.is_finite() {
                    return Err(Error::Schema("non-finite linear coefficient".into()));
                }
            }
            FunctionSpec::Quadratic {
                matrix,
                linear,
                offset,
            } => {
                if matrix.dim() != m {
                    return Err(dim_err("quadratic matrix", matrix.dim()));
                }
                if linear.len() != m {
                    return Err(dim_err("quadratic linear term", linear.len()));
                }
                if !matrix.is_finite() || !finite(linear) || !offset.is_finite() {
                    return Err(Error::Schema("non-finite quadratic coefficient".into()));
                }
            }
            FunctionSpec::QuadraticFractional {
                signal,
                interference,
                noise,
            } => {
                if signal.dim() != m {
                    return Err(dim_err("signal matrix", signal.dim()));
                }
                if interference.dim() != m {
                    return Err(dim_err("interference matrix", interference.dim()));
                }
                if !(*noise > 0.0) || !noise.is_finite() {
                    return Err(Error::Schema(format!("noise power must be positive, got {noise}")));
                }
                if !signal.is_finite() || !interference.is_finite() {
                    return Err(Error::Schema("non-finite matrix entry".into()));
                }
            }
            FunctionSpec::CobbDouglas { exponents } => {
                if exponents.len() != m {
                    return Err(dim_err("Cobb-Douglas exponents", exponents.len()));
                }
                if !exponents.iter().all(|a| a.is_finite() && *a >= 0.0) {
                    return Err(Error::Schema("Cobb-Douglas exponents must be nonnegative".into()));
                }
            }
            FunctionSpec::LogLinear { weights } => {
                if weights.len() != m {
                    return Err(dim_err("log-linear weights", weights.len()));
                }
                if !finite(weights) {
                    return Err(Error::Schema("non-finite log-linear weight".into()));
                }
            }
            FunctionSpec::Envelope { pieces, .. } => {
                if pieces.is_empty() {
                    return Err(Error::Schema("envelope needs at least one piece".into()));
                }
                for p in pieces {
                    if !p.level.is_finite() || !p.multiplier.is_finite() || !p.reference.is_finite() {
                        return Err(Error::Schema("non-finite envelope piece".into()));
                    }
                    if let Some(a) = &p.anchor {
                        if a.len() != m {
                            return Err(dim_err("envelope anchor", a.len()));
                        }
                    }
                    p.base.check(m)?;
                }
            }
            FunctionSpec::AffineShift { base, linear, offset } => {
                if linear.len() != m {
                    return Err(dim_err("affine shift", linear.len()));
                }
                if !finite(linear) || !offset.is_finite() {
                    return Err(Error::Schema("non-finite affine shift".into()));
                }
                base.check(m)?;
            }
            FunctionSpec::Callback(cb) => {
                if cb.dim != m {
                    return Err(dim_err("callback", cb.dim));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinr_2d() -> FunctionSpec {
        FunctionSpec::quadratic_fractional(
            SquareMatrix::diagonal(&[5.0, 5.0]),
            SquareMatrix::diagonal(&[2.0, 2.0]),
            1.0,
        )
    }

    #[test]
    fn sinr_value_at_unit_vertex() {
        assert!((sinr_2d().value(&[1.0, 0.0]) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(sinr_2d().value(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn envelope_picks_extremum() {
        let piece = |level: f64, c: f64| EnvelopePiece {
            level,
            multiplier: 1.0,
            reference: 0.0,
            anchor: None,
            base: FunctionSpec::linear(vec![c, 0.0], 0.0),
        };
        let pieces = vec![piece(0.0, 2.0), piece(1.0, 1.0)];
        let min = FunctionSpec::Envelope {
            mode: EnvelopeMode::Min,
            pieces: pieces.clone(),
        };
        let max = FunctionSpec::Envelope {
            mode: EnvelopeMode::Max,
            pieces,
        };
        assert_eq!(min.value(&[0.5, 0.0]), 1.0);
        assert_eq!(min.value(&[2.0, 0.0]), 3.0);
        assert_eq!(max.value(&[2.0, 0.0]), 4.0);
        assert_eq!(max.gradient(&[2.0, 0.0]), vec![2.0, 0.0]);
        assert_eq!(min.active_piece(&[0.25, 0.0]).unwrap().0, 0);
    }

    #[test]
    fn callback_round_trip_is_rejected() {
        let cb = FunctionSpec::Callback(CallbackFunction::new("u", 1, Some(true), |b| (b[0], vec![1.0])));
        let text = serde_json::to_string(&cb).unwrap();
        assert!(text.contains("\"kind\":\"callback\""));
        let err = serde_json::from_str::<FunctionSpec>(&text).unwrap_err();
        assert!(err.to_string().contains("cannot be loaded"));
    }

    #[test]
    fn check_flags_dimension() {
        let f = FunctionSpec::linear(vec![1.0, 2.0], 0.0);
        assert!(f.check(2).is_ok());
        assert!(matches!(f.check(3), Err(Error::DimensionMismatch { .. })));
    }
}
