//! Numerical machinery shared by the tests and the masking optimizer.

mod ascent;
mod coordinate;
mod grid;
mod simplex;

pub use ascent::{kkt_residual, maximize_concave, AscentOptions};
pub use coordinate::{coordinate_search_minimize, SearchOptions, SearchResult};
pub use grid::grid_oracle_maximize;
pub use simplex::{solve_feasibility, solve_with_objective, FeasibilityResult, LinearFeasibilityProblem, Row, Sense};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::linalg::dot;

/// Absolute tolerance for "the budget is active at this point".
pub const ACTIVE_TOL: f64 = 1e-6;

/// A solution of `max u(beta) s.t. beta >= 0, g(beta) <= gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumPoint {
    pub point: Vec<f64>,
    pub objective: f64,
    /// Scaled KKT residual, see [`kkt_residual`].
    pub kkt_residual: f64,
    /// Budget multiplier recovered at the point.
    pub multiplier: f64,
    pub active: bool,
    pub iterations: usize,
    /// Index of the start that produced the point (0 = first start tried).
    pub start: usize,
}

/// The set `{beta >= 0 : g(beta) <= gamma}` with a projection onto it.
pub(crate) struct Region<'a> {
    g: &'a FunctionSpec,
    gamma: f64,
    m: usize,
    /// `(a, b)` when the set is `{a'beta <= b}`.
    halfspace: Option<(Vec<f64>, f64)>,
}

impl<'a> Region<'a> {
    pub(crate) fn new(g: &'a FunctionSpec, gamma: f64, m: usize) -> Result<Self> {
        g.check(m)?;
        let floor = g.value(&vec![0.0; m]);
        if !(floor <= gamma) {
            return Err(Error::InfeasibleRegion { gamma, floor });
        }
        let halfspace = match g {
            FunctionSpec::Linear { coeffs, offset } => {
                if coeffs.iter().any(|a| *a <= 0.0) {
                    return Err(Error::InvalidInput(
                        "linear budget needs positive coefficients for a bounded feasible set".into(),
                    ));
                }
                Some((coeffs.clone(), gamma - offset))
            }
            _ => None,
        };
        Ok(Self {
            g,
            gamma,
            m,
            halfspace,
        })
    }

    pub(crate) fn slack(&self, x: &[f64]) -> f64 {
        self.g.value(x) - self.gamma
    }

    /// Largest `s` with `g(s e_i) <= gamma`, per axis.
    pub(crate) fn axis_extents(&self) -> Result<Vec<f64>> {
        if let Some((a, b)) = &self.halfspace {
            return Ok(a.iter().map(|ai| b / ai).collect());
        }
        (0..self.m)
            .map(|i| {
                let at = |s: f64| {
                    let mut e = vec![0.0; self.m];
                    e[i] = s;
                    self.slack(&e)
                };
                let mut hi = 1.0;
                while at(hi) <= 0.0 {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return Err(Error::InvalidInput(format!(
                            "feasible set is unbounded along coordinate {i}"
                        )));
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if at(mid) <= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo)
            })
            .collect()
    }

    /// Euclidean projection for a halfspace budget, radial retraction otherwise.
    pub(crate) fn project(&self, x: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        match &self.halfspace {
            Some((a, b)) => project_halfspace(&y, a, *b),
            None => self.retract(y),
        }
    }

    /// Displacement `proj(x + s grad) - x`, plus the normal of the budget
    /// face it lands on, if any.
    ///
    /// For a halfspace the displacement is rebuilt on the landing support as
    /// `s (grad - c a) - r a` instead of subtracting two nearly equal points,
    /// which keeps its tangential part accurate when `grad` is almost normal
    /// to the face.
    pub(crate) fn step(&self, x: &[f64], s: f64, grad: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let z: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| (xi + s * gi).max(0.0)).collect();
        let Some((a, b)) = &self.halfspace else {
            let y = self.project(&z);
            return (y.iter().zip(x).map(|(yi, xi)| yi - xi).collect(), None);
        };
        if dot(a, &z) <= *b {
            return (z.iter().zip(x).map(|(zi, xi)| zi - xi).collect(), None);
        }
        let y = project_halfspace(&z, a, *b);
        let naive: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi - xi).collect();
        let normal: Vec<f64> = y.iter().zip(a).map(|(yi, ai)| if *yi > 0.0 { *ai } else { 0.0 }).collect();
        let nn = dot(&normal, &normal);
        if nn == 0.0 {
            return (naive, None);
        }
        let c = dot(&normal, grad) / nn;
        let r = (dot(&normal, x) - b) / nn;
        let d: Vec<f64> = (0..x.len())
            .map(|i| {
                if normal[i] > 0.0 {
                    s * (grad[i] - c * normal[i]) - r * normal[i]
                } else {
                    -x[i]
                }
            })
            .collect();
        if x.iter().zip(&d).any(|(xi, di)| xi + di < 0.0) {
            return (naive, Some(normal));
        }
        (d, Some(normal))
    }

    fn retract(&self, y: Vec<f64>) -> Vec<f64> {
        if self.slack(&y) <= 0.0 {
            return y;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let z: Vec<f64> = y.iter().map(|v| v * mid).collect();
            if self.slack(&z) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        y.iter().map(|v| v * lo).collect()
    }
}

/// Projection of a nonnegative `y` onto `{x >= 0, a'x <= b}` with `a > 0`.
fn project_halfspace(y: &[f64], a: &[f64], b: f64) -> Vec<f64> {
    if dot(a, y) <= b {
        return y.to_vec();
    }
    // x(tau) = max(y - tau a, 0); a'x(tau) is piecewise linear and decreasing.
    let mut breaks: Vec<f64> = y.iter().zip(a).map(|(yi, ai)| yi / ai).collect();
    breaks.sort_by(f64::total_cmp);
    let mut lo = 0.0;
    let mut tau = breaks[breaks.len() - 1];
    for &bp in &breaks {
        let (mut num, mut den) = (-b, 0.0);
        for (yi, ai) in y.iter().zip(a) {
            if yi / ai >= bp {
                num += ai * yi;
                den += ai * ai;
            }
        }
        if den > 0.0 {
            let cand = num / den;
            if cand >= lo && cand <= bp {
                tau = cand;
                break;
            }
        }
        lo = bp;
    }
    y.iter().zip(a).map(|(yi, ai)| (yi - tau * ai).max(0.0)).collect()
}
