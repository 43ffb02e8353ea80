//! KKT multipliers and revealed-preference margins.

use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplier {
    pub value: f64,
    /// Set when `value <= 0`, which means the data are not monotone at this point.
    pub nonpositive: bool,
}

/// Least-squares scalar `lambda` with `lambda * grad_source ~= grad_target`.
pub fn kkt_multiplier(grad_target: &[f64], grad_source: &[f64]) -> Result<Multiplier> {
    if grad_target.len() != grad_source.len() {
        return Err(Error::DimensionMismatch {
            context: "kkt multiplier gradients".into(),
            expected: grad_source.len(),
            found: grad_target.len(),
        });
    }
    let ss = dot(grad_source, grad_source);
    if !(ss > 0.0) || !ss.is_finite() {
        return Err(Error::DegenerateGradient { index: None });
    }
    let value = dot(grad_source, grad_target) / ss;
    if !value.is_finite() {
        return Err(Error::DegenerateGradient { index: None });
    }
    Ok(Multiplier {
        value,
        nonpositive: value <= 0.0,
    })
}

/// Coordinates treated as "in the support" of a response.
pub fn support(point: &[f64]) -> Vec<usize> {
    let scale = point.iter().fold(0.0f64, |a, b| a.max(*b));
    let cut = 1e-9 * (1.0 + scale);
    (0..point.len()).filter(|&i| point[i] > cut).collect()
}

/// [`kkt_multiplier`] restricted to the coordinates where `point` is
/// positive. At a boundary optimum the nonnegativity multipliers absorb the
/// gradient mismatch on the zero coordinates, so only the support carries the
/// budget multiplier. Falls back to the full gradients when the support is empty.
pub fn kkt_multiplier_at(grad_target: &[f64], grad_source: &[f64], point: &[f64]) -> Result<Multiplier> {
    let idx = support(point);
    if idx.is_empty() || idx.len() == point.len() {
        return kkt_multiplier(grad_target, grad_source);
    }
    let t: Vec<f64> = idx.iter().map(|&i| grad_target[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| grad_source[i]).collect();
    kkt_multiplier(&t, &s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// A margin together with the per-pair terms it was extracted from.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub value: f64,
    pub extremum: Extremum,
    /// `pair_terms[j][k]`; the diagonal is stored as 0 and excluded.
    pub pair_terms: Vec<Vec<f64>>,
    /// `(j, k)` attaining the extremum.
    pub arg: (usize, usize),
    pub multipliers: Vec<f64>,
    /// Indices whose multiplier came out nonpositive.
    pub nonpositive: Vec<usize>,
}

impl MarginReport {
    pub(crate) fn from_terms(
        pair_terms: Vec<Vec<f64>>,
        extremum: Extremum,
        multipliers: &[Multiplier],
    ) -> Result<Self> {
        let k = pair_terms.len();
        let (value, arg) = extremum_off_diagonal(&pair_terms, extremum).ok_or(Error::UndefinedMargin { k })?;
        Ok(Self {
            value,
            extremum,
            pair_terms,
            arg,
            multipliers: multipliers.iter().map(|m| m.value).collect(),
            nonpositive: multipliers
                .iter()
                .enumerate()
                .filter(|(_, m)| m.nonpositive)
                .map(|(i, _)| i)
                .collect(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.pair_terms.len()
    }

    /// Re-extracts the extremum from `pair_terms`.
    pub fn recomputed(&self) -> f64 {
        extremum_off_diagonal(&self.pair_terms, self.extremum)
            .map(|(v, _)| v)
            .unwrap_or(f64::NAN)
    }
}

fn extremum_off_diagonal(terms: &[Vec<f64>], ext: Extremum) -> Option<(f64, (usize, usize))> {
    let mut best: Option<(f64, (usize, usize))> = None;
    for (j, row) in terms.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if j == k {
                continue;
            }
            let better = match (best, ext) {
                (None, _) => true,
                (Some((b, _)), Extremum::Max) => v > b,
                (Some((b, _)), Extremum::Min) => v < b,
            };
            if better {
                best = Some((v, (j, k)));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_examples() {
        assert_eq!(kkt_multiplier(&[2.0, 2.0], &[1.0, 1.0]).unwrap().value, 2.0);
        assert_eq!(kkt_multiplier(&[1.0, 0.0], &[1.0, 0.0]).unwrap().value, 1.0);
        // argmin_l |l(1,1) - (3,1)|^2 = (3 + 1) / 2
        assert_eq!(kkt_multiplier(&[3.0, 1.0], &[1.0, 1.0]).unwrap().value, 2.0);
    }

    #[test]
    fn multiplier_errors_and_warnings() {
        assert!(matches!(
            kkt_multiplier(&[1.0, 1.0], &[0.0, 0.0]),
            Err(Error::DegenerateGradient { .. })
        ));
        let m = kkt_multiplier(&[-1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(m.nonpositive);
    }

    #[test]
    fn support_restriction_at_vertex() {
        // u = a'b with a = (3, 1) at the vertex (1/2, 0) of 2 b1 + b2 <= 1:
        // the budget gradient (2, 1) matches 3/2 * a only on coordinate 0.
        let m = kkt_multiplier_at(&[2.0, 1.0], &[3.0, 1.0], &[0.5, 0.0]).unwrap();
        assert!((m.value - 2.0 / 3.0).abs() < 1e-15);
        let full = kkt_multiplier(&[2.0, 1.0], &[3.0, 1.0]).unwrap();
        assert!((full.value - 0.7).abs() < 1e-15);
    }

    #[test]
    fn margin_excludes_diagonal() {
        let terms = vec![vec![0.0, -1.0], vec![2.0, 0.0]];
        let mult = [Multiplier { value: 1.0, nonpositive: false }; 2];
        let max = MarginReport::from_terms(terms.clone(), Extremum::Max, &mult).unwrap();
        assert_eq!(max.value, 2.0);
        assert_eq!(max.arg, (1, 0));
        let min = MarginReport::from_terms(terms, Extremum::Min, &mult).unwrap();
        assert_eq!(min.value, -1.0);
        assert_eq!(min.recomputed(), min.value);
        let single = MarginReport::from_terms(vec![vec![0.0]], Extremum::Min, &mult[..1]);
        assert!(matches!(single, Err(Error::UndefinedMargin { k: 1 })));
    }
}
