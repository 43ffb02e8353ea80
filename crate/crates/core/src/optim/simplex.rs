//! Dense two-phase simplex for small feasibility systems.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub sense: Sense,
}

/// Rows `coeffs' x (<= | >=) rhs` over variables bounded below by `floors`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFeasibilityProblem {
    pub n_vars: usize,
    pub rows: Vec<Row>,
    pub floors: Vec<f64>,
}

impl LinearFeasibilityProblem {
    pub fn new(n_vars: usize, floors: Vec<f64>) -> Result<Self> {
        if floors.len() != n_vars {
            return Err(Error::DimensionMismatch {
                context: "variable floors".into(),
                expected: n_vars,
                found: floors.len(),
            });
        }
        if floors.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidInput("floors must be finite".into()));
        }
        Ok(Self {
            n_vars,
            rows: Vec::new(),
            floors,
        })
    }

    pub fn push(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Result<()> {
        if coeffs.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                context: format!("row {}", self.rows.len()),
                expected: self.n_vars,
                found: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !rhs.is_finite() {
            return Err(Error::InvalidInput(format!("row {} has a non-finite entry", self.rows.len())));
        }
        self.rows.push(Row { coeffs, rhs, sense });
        Ok(())
    }

    /// Slack of row `i` at `x`, positive when satisfied.
    pub fn slack(&self, i: usize, x: &[f64]) -> f64 {
        let r = &self.rows[i];
        let lhs: f64 = r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match r.sense {
            Sense::Le => r.rhs - lhs,
            Sense::Ge => lhs - r.rhs,
        }
    }

    /// Most negative row slack (or floor slack) at `x`; `>= 0` means feasible.
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        let rows = (0..self.rows.len()).map(|i| self.slack(i, x));
        let floors = x.iter().zip(&self.floors).map(|(v, f)| v - f);
        rows.chain(floors).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityResult {
    /// A point satisfying every row and floor; `None` when infeasible.
    pub witness: Option<Vec<f64>>,
    /// Optimal phase-1 objective: the smallest uniform relaxation of the
    /// rows that admits a solution. Positive certifies infeasibility.
    pub phase1_residual: f64,
    /// Smallest row slack at the witness (at least `-1e-9` when feasible).
    pub min_slack: f64,
    pub pivots: usize,
    /// Set when the witness check needed the tolerance, i.e. the rows are
    /// numerically touchy.
    pub ill_conditioned: bool,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.witness.is_some()
    }
}

const EPS: f64 = 1e-11;
const WITNESS_TOL: f64 = 1e-9;

/// Dictionary `x_B = b - A x_N`, objective `z = z0 + c' x_N` (maximized).
struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x (cols + 1)`, the last column is `b`.
    a: Vec<f64>,
    c: Vec<f64>,
    z0: f64,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.cols + 1;
        let piv = self.at(r, e);
        for j in 0..w {
            if j == e {
                self.a[r * w + j] = 1.0 / piv;
            } else {
                self.a[r * w + j] /= piv;
            }
        }
        let row_r: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + e];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                if j == e {
                    self.a[i * w + j] = -f * row_r[j];
                } else {
                    self.a[i * w + j] -= f * row_r[j];
                }
            }
        }
        let ce = self.c[e];
        for j in 0..self.cols {
            if j == e {
                self.c[j] = -ce * row_r[j];
            } else {
                self.c[j] -= ce * row_r[j];
            }
        }
        self.z0 += ce * row_r[self.cols];
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[e]);
        self.pivots += 1;
    }

    /// Dantzig's rule, switching to Bland's after a run of degenerate pivots.
    fn optimize(&mut self, max_pivots: usize) -> Outcome {
        let mut degenerate = 0;
        loop {
            let bland = degenerate > 50;
            let mut enter: Option<usize> = None;
            for j in 0..self.cols {
                if self.c[j] <= EPS {
                    continue;
                }
                enter = match enter {
                    None => Some(j),
                    Some(k) if bland && self.nonbasic[j] < self.nonbasic[k] => Some(j),
                    Some(k) if !bland && self.c[j] > self.c[k] => Some(j),
                    keep => keep,
                };
            }
            let Some(e) = enter else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let aie = self.at(i, e);
                if aie <= EPS {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / aie;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basic[i] < self.basic[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Outcome::Unbounded;
            };
            degenerate = if ratio <= 1e-12 { degenerate + 1 } else { 0 };
            self.pivot(r, e);
            if self.pivots >= max_pivots {
                return Outcome::Optimal;
            }
        }
    }
}

/// Decides feasibility; the witness minimizes `sum(x - floors)`.
pub fn solve_feasibility(p: &LinearFeasibilityProblem) -> Result<FeasibilityResult> {
    solve_with_objective(p, &vec![1.0; p.n_vars])
}

/// Like [`solve_feasibility`] with the witness minimizing `weights' x`.
/// Weights must be nonnegative so the second phase stays bounded.
pub fn solve_with_objective(p: &LinearFeasibilityProblem, weights: &[f64]) -> Result<FeasibilityResult> {
    if weights.len() != p.n_vars {
        return Err(Error::DimensionMismatch {
            context: "objective weights".into(),
            expected: p.n_vars,
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("objective weights must be nonnegative".into()));
    }
    let n = p.n_vars;
    let m = p.rows.len();
    // x = floor + y, y >= 0; every row as a'y <= b.
    let cols = n + 1; // y_1..y_n and the auxiliary x0
    let w = cols + 1;
    let mut a = vec![0.0; m * w];
    for (i, row) in p.rows.iter().enumerate() {
        let sign = match row.sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
        };
        let shift: f64 = row.coeffs.iter().zip(&p.floors).map(|(c, f)| c * f).sum();
        for j in 0..n {
            a[i * w + j] = sign * row.coeffs[j];
        }
        a[i * w + n] = -1.0;
        a[i * w + cols] = sign * (row.rhs - shift);
    }
    // labels: 0..n structural, n = x0, n+1.. slacks
    let mut t = Tableau {
        rows: m,
        cols,
        a,
        c: vec![0.0; cols],
        z0: 0.0,
        basic: (0..m).map(|i| n + 1 + i).collect(),
        nonbasic: (0..=n).collect(),
        pivots: 0,
    };
    let max_pivots = 50 * (m + n + 10);
    let mut residual = 0.0;
    if let Some((r, _)) = (0..m)
        .map(|i| (i, t.rhs(i)))
        .filter(|(_, b)| *b < 0.0)
        .min_by(|x, y| x.1.total_cmp(&y.1))
    {
        // phase 1: maximize -x0
        t.c[n] = -1.0;
        t.pivot(r, n);
        t.optimize(max_pivots);
        residual = (-t.z0).max(0.0);
        let scale = p
            .rows
            .iter()
            .map(|r| r.rhs.abs())
            .fold(1.0f64, f64::max);
        if residual > 1e-9 * scale {
            return Ok(FeasibilityResult {
                witness: None,
                phase1_residual: residual,
                min_slack: -residual,
                pivots: t.pivots,
                ill_conditioned: false,
            });
        }
        // drive x0 out of the basis if it stayed there at level 0
        if let Some(r) = t.basic.iter().position(|&b| b == n) {
            let e = (0..cols)
                .filter(|&j| t.nonbasic[j] != n)
                .max_by(|&x, &y| t.at(r, x).abs().total_cmp(&t.at(r, y).abs()))
                .expect("at least one structural column");
            if t.at(r, e).abs() > EPS {
                t.pivot(r, e);
            }
        }
    }
    // freeze x0 at zero: a nonbasic x0 column is dropped by zeroing it
    if let Some(j) = t.nonbasic.iter().position(|&l| l == n) {
        for i in 0..m {
            t.a[i * w + j] = 0.0;
        }
    }
    // phase 2: maximize -weights'y
    t.c = vec![0.0; cols];
    t.z0 = 0.0;
    for (j, &label) in t.nonbasic.clone().iter().enumerate() {
        if label < n {
            t.c[j] -= weights[label];
        }
    }
    for i in 0..m {
        let label = t.basic[i];
        if label < n {
            let wgt = weights[label];
            t.z0 -= wgt * t.rhs(i);
            for j in 0..cols {
                if t.nonbasic[j] != n {
                    t.c[j] += wgt * t.at(i, j);
                }
            }
        }
    }
    for j in 0..cols {
        if t.nonbasic[j] == n {
            t.c[j] = 0.0;
        }
    }
    if let Outcome::Unbounded = t.optimize(max_pivots) {
        return Err(Error::InvalidInput("second phase unbounded despite nonnegative weights".into()));
    }
    let mut y = vec![0.0; n];
    for i in 0..m {
        if t.basic[i] < n {
            y[t.basic[i]] = t.rhs(i).max(0.0);
        }
    }
    let x: Vec<f64> = y.iter().zip(&p.floors).map(|(v, f)| v + f).collect();
    let min_slack = p.min_slack(&x);
    if min_slack < -WITNESS_TOL {
        return Err(Error::InvalidInput(format!(
            "simplex witness violates a row by {:.3e}; the system is too ill-conditioned",
            -min_slack
        )));
    }
    Ok(FeasibilityResult {
        witness: Some(x),
        phase1_residual: residual,
        min_slack,
        pivots: t.pivots,
        ill_conditioned: min_slack < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_afriat_system() {
        let mut p = LinearFeasibilityProblem::new(2, vec![1.0, 1.0]).unwrap();
        p.push(vec![0.0, 0.0], Sense::Le, 0.0).unwrap();
        let r = solve_feasibility(&p).unwrap();
        assert_eq!(r.witness, Some(vec![1.0, 1.0]));
    }

    #[test]
    fn contradictory_rows() {
        // x >= 3 and x <= 2
        let mut p = LinearFeasibilityProblem::new(1, vec![0.0]).unwrap();
        p.push(vec![1.0], Sense::Ge, 3.0).unwrap();
        p.push(vec![1.0], Sense::Le, 2.0).unwrap();
        let r = solve_feasibility(&p).unwrap();
        assert!(!r.is_feasible());
        assert!((r.phase1_residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn minimal_witness() {
        // x + y >= 4, x - y <= 1, floors 1: minimum of x + y is 4
        let mut p = LinearFeasibilityProblem::new(2, vec![1.0, 1.0]).unwrap();
        p.push(vec![1.0, 1.0], Sense::Ge, 4.0).unwrap();
        p.push(vec![1.0, -1.0], Sense::Le, 1.0).unwrap();
        let r = solve_feasibility(&p).unwrap();
        let x = r.witness.unwrap();
        assert!((x[0] + x[1] - 4.0).abs() < 1e-12);
        assert!(p.min_slack(&x) >= -1e-12);
    }
}
