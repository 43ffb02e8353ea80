use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals: usize,
    /// Extra random starts around `x0`, kept only when feasible.
    pub n_starts: usize,
    pub seed: u64,
    #[serde(skip)]
    pub lower: Option<Vec<f64>>,
    #[serde(skip)]
    pub upper: Option<Vec<f64>>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.25,
            min_step: 1e-9,
            max_evals: 20_000,
            n_starts: 4,
            seed: 0,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Counter<'a> {
    objective: &'a dyn Fn(&[f64]) -> f64,
    constraint: &'a dyn Fn(&[f64]) -> f64,
    evals: usize,
}

impl Counter<'_> {
    fn feasible(&mut self, x: &[f64]) -> bool {
        self.evals += 1;
        (self.constraint)(x) <= 0.0
    }
}

fn clamp(x: &mut [f64], opts: &SearchOptions) {
    for i in 0..x.len() {
        if let Some(lo) = &opts.lower {
            x[i] = x[i].max(lo[i]);
        }
        if let Some(hi) = &opts.upper {
            x[i] = x[i].min(hi[i]);
        }
    }
}

/// Compass search from one feasible start. A trial point that improves the
/// objective but violates the constraint triggers a bisection back toward
/// the current point so that boundary optima are reached to `min_step`.
fn compass(c: &mut Counter, x0: &[f64], opts: &SearchOptions) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = (c.objective)(&x);
    let mut h = opts.initial_step;
    while h >= opts.min_step && c.evals < opts.max_evals {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [-1.0, 1.0] {
                let mut y = x.clone();
                y[i] += dir * h;
                clamp(&mut y, opts);
                if y[i] == x[i] {
                    continue;
                }
                let fy = (c.objective)(&y);
                if fy >= fx {
                    continue;
                }
                if c.feasible(&y) {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
                // bisect on the segment [x, y] for the last feasible point
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    let mut z = x.clone();
                    z[i] += (y[i] - x[i]) * mid;
                    if c.feasible(&z) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo > 0.0 {
                    let mut z = x.clone();
                    z[i] += (y[i] - x[i]) * lo;
                    let fz = (c.objective)(&z);
                    if fz < fx {
                        x = z;
                        fx = fz;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}

/// Derivative-free minimization of `objective` subject to `constraint <= 0`.
///
/// `x0` must be feasible. The result is feasible, no worse than `x0`, and
/// deterministic for a given `opts.seed`; the lowest-index start wins ties.
pub fn coordinate_search_minimize(
    objective: &dyn Fn(&[f64]) -> f64,
    constraint: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let mut c = Counter {
        objective,
        constraint,
        evals: 0,
    };
    if !c.feasible(x0) {
        return Err(Error::InvalidInput(
            "coordinate search needs a feasible initial point; supply one that satisfies the constraint".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![x0.to_vec()];
    for _ in 0..opts.n_starts {
        let mut y: Vec<f64> = x0
            .iter()
            .map(|v| v + opts.initial_step * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        clamp(&mut y, opts);
        if c.feasible(&y) {
            starts.push(y);
        }
    }
    let mut best = (x0.to_vec(), objective(x0));
    for s in &starts {
        let (x, fx) = compass(&mut c, s, opts);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(SearchResult {
        x: best.0,
        value: best.1,
        evaluations: c.evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimizer_at_start() {
        let x0 = [0.3, -0.2];
        let obj = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2);
        let r = coordinate_search_minimize(&obj, &|_| -1.0, &x0, &SearchOptions::default()).unwrap();
        assert_eq!(r.x, x0.to_vec());
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn projection_onto_halfline() {
        let obj = |x: &[f64]| (x[0] - 1.0).powi(2);
        let con = |x: &[f64]| x[0];
        let r = coordinate_search_minimize(&obj, &con, &[-2.0], &SearchOptions::default()).unwrap();
        assert!(r.x[0].abs() < 1e-6 && r.x[0] <= 0.0, "{:?}", r.x);
    }

    #[test]
    fn infeasible_start_rejected() {
        let r = coordinate_search_minimize(&|x| x[0], &|x| x[0], &[1.0], &SearchOptions::default());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
