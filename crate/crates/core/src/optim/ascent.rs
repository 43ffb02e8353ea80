use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{OptimumPoint, Region, ACTIVE_TOL};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::linalg::{dot, norm};
use crate::margin::support;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AscentOptions {
    pub kkt_tol: f64,
    pub max_iters: usize,
    /// Random interior starts on top of the deterministic ones.
    pub n_starts: usize,
    /// Also try every vertex of the feasible region and the face centroid.
    pub vertex_starts: bool,
    /// Ascend only from the warm start and the `n` other starts with the
    /// highest objective. `None` ascends from every start.
    pub screen: Option<usize>,
    pub seed: u64,
    #[serde(skip)]
    pub warm_start: Option<Vec<f64>>,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-6,
            max_iters: 5000,
            n_starts: 8,
            vertex_starts: true,
            screen: None,
            seed: 0,
            warm_start: None,
        }
    }
}

impl AscentOptions {
    pub fn with_warm_start(&self, x: &[f64]) -> Self {
        Self {
            warm_start: Some(x.to_vec()),
            ..self.clone()
        }
    }
}

/// Scaled KKT residual of `max u s.t. beta >= 0, g <= gamma` at `point`.
///
/// The budget multiplier is fitted on the support of `point` only; off the
/// support just the positive part of `du_i - mu dg_i` counts, since the
/// nonnegativity multiplier absorbs the rest. Returns `(residual, mu)` with
/// the residual divided by `max(1, |du|)`.
pub fn kkt_residual(grad_u: &[f64], grad_g: &[f64], point: &[f64], active: bool) -> (f64, f64) {
    let supp = support(point);
    let mu = if active {
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &supp {
            num += grad_u[i] * grad_g[i];
            den += grad_g[i] * grad_g[i];
        }
        if supp.is_empty() || den == 0.0 {
            // a vertex at the origin: fit on all coordinates
            let den = dot(grad_g, grad_g);
            if den > 0.0 {
                (dot(grad_u, grad_g) / den).max(0.0)
            } else {
                0.0
            }
        } else {
            (num / den).max(0.0)
        }
    } else {
        0.0
    };
    let mut sq = 0.0;
    for i in 0..point.len() {
        let r = grad_u[i] - mu * grad_g[i];
        let r = if supp.contains(&i) { r } else { r.max(0.0) };
        sq += r * r;
    }
    (sq.sqrt() / norm(grad_u).max(1.0), mu)
}

struct Run {
    point: Vec<f64>,
    value: f64,
    iterations: usize,
}

/// `grad . d` with the component of `grad` along `normal` removed.
fn tangential(grad: &[f64], normal: Option<&[f64]>, d: &[f64]) -> f64 {
    match normal {
        None => dot(grad, d),
        Some(n) => {
            let c = dot(grad, n) / dot(n, n);
            grad.iter().zip(n).zip(d).map(|((g, ni), di)| (g - c * ni) * di).sum()
        }
    }
}

fn ascend(u: &FunctionSpec, g: &FunctionSpec, region: &Region, x0: Vec<f64>, scale: f64, opts: &AscentOptions) -> Run {
    let mut x = x0;
    let mut fx = u.value(&x);
    let mut step = f64::NAN;
    let mut it = 0;
    while it < opts.max_iters {
        let grad = u.gradient(&x);
        if !grad.iter().all(|v| v.is_finite()) {
            break;
        }
        let active = region.slack(&x).abs() <= ACTIVE_TOL;
        let (res, _) = kkt_residual(&grad, &g.gradient(&x), &x, active);
        if res <= opts.kkt_tol {
            break;
        }
        let gn = norm(&grad);
        if gn == 0.0 {
            break;
        }
        if !step.is_finite() {
            step = scale / gn;
        }
        let mut moved = false;
        let mut grown = 0;
        for _ in 0..160 {
            let (d, normal) = region.step(&x, step, &grad);
            if d.iter().all(|v| *v == 0.0) {
                // the move vanished in rounding: only a longer step can
                // expose the tangential part of the gradient
                if grown >= 40 {
                    break;
                }
                grown += 1;
                step *= 4.0;
                continue;
            }
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let fy = u.value(&y);
            // Close to the optimum the gain drops below the rounding level of
            // `u`; then a step that does not overshoot along `d` is accepted,
            // judged by the gradient at `y` within the landing face.
            let flat = (fy - fx).abs() <= 1e-13 * fx.abs().max(1.0);
            let sufficient = fy >= fx + 1e-4 * dot(&grad, &d) && fy >= fx;
            if fy.is_finite() && (sufficient || (flat && tangential(&u.gradient(&y), normal.as_deref(), &d) >= 0.0)) {
                x = y;
                fx = fy;
                step *= 2.0;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        it += 1;
        if !moved {
            break;
        }
    }
    Run {
        point: x,
        value: fx,
        iterations: it,
    }
}

fn finish(u: &FunctionSpec, g: &FunctionSpec, region: &Region, run: Run, start: usize) -> OptimumPoint {
    let active = region.slack(&run.point).abs() <= ACTIVE_TOL;
    let grad = u.gradient(&run.point);
    let (kkt, mu) = if grad.iter().all(|v| v.is_finite()) {
        kkt_residual(&grad, &g.gradient(&run.point), &run.point, active)
    } else {
        (f64::INFINITY, f64::NAN)
    };
    OptimumPoint {
        point: run.point,
        objective: run.value,
        kkt_residual: kkt,
        multiplier: mu,
        active,
        iterations: run.iterations,
        start,
    }
}

/// Starting points: warm start, the vertices `extent_i e_i`, the face
/// centroid, then `n_starts` random points drawn uniformly from the simplex
/// spanned by the origin and the vertices.
fn starts(region: &Region, m: usize, opts: &AscentOptions) -> Result<Vec<Vec<f64>>> {
    let ext = region.axis_extents()?;
    let mut out = Vec::new();
    if let Some(w) = &opts.warm_start {
        if w.len() != m {
            return Err(Error::DimensionMismatch {
                context: "warm start".into(),
                expected: m,
                found: w.len(),
            });
        }
        out.push(region.project(w));
    }
    if opts.vertex_starts {
        for i in 0..m {
            let mut v = vec![0.0; m];
            v[i] = ext[i];
            out.push(region.project(&v));
        }
        let c: Vec<f64> = ext.iter().map(|e| e / m as f64).collect();
        out.push(region.project(&c));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.n_starts {
        let w: Vec<f64> = (0..=m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = w.iter().sum();
        let x: Vec<f64> = (0..m).map(|i| ext[i] * w[i] / total).collect();
        out.push(region.project(&x));
    }
    if out.is_empty() {
        // no start configured at all: fall back to the centroid
        out.push(region.project(&ext.iter().map(|e| e / m as f64).collect::<Vec<_>>()));
    }
    Ok(out)
}

/// Maximizes `u` over `{beta >= 0, g(beta) <= gamma}` by projected gradient
/// ascent with Armijo backtracking, from several starts.
///
/// The best start wins (lowest start index on ties). If its KKT residual is
/// above `opts.kkt_tol` the result is [`Error::NonConverged`] carrying the point.
pub fn maximize_concave(u: &FunctionSpec, g: &FunctionSpec, gamma: f64, opts: &AscentOptions) -> Result<OptimumPoint> {
    let m = u
        .dim()
        .or_else(|| g.dim())
        .ok_or_else(|| Error::InvalidInput("cannot infer the response dimension".into()))?;
    u.check(m)?;
    let region = Region::new(g, gamma, m)?;
    let ext = region.axis_extents()?;
    let scale = ext.iter().fold(0.0f64, |a, b| a.max(*b)).max(1e-12);
    let mut best: Option<OptimumPoint> = None;
    let all = starts(&region, m, opts)?;
    let values: Vec<f64> = all.iter().map(|x| u.value(x)).collect();
    let keep: Vec<bool> = match opts.screen {
        None => vec![true; all.len()],
        Some(n) => {
            let warm = opts.warm_start.is_some() as usize;
            let mut rest: Vec<usize> = (warm..all.len()).filter(|&i| values[i].is_finite()).collect();
            rest.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
            let mut keep = vec![false; all.len()];
            keep[..warm].fill(true);
            for &i in rest.iter().take(n.max(1 - warm)) {
                keep[i] = true;
            }
            keep
        }
    };
    for (idx, x0) in all.into_iter().enumerate() {
        if !keep[idx] || !values[idx].is_finite() || !u.gradient(&x0).iter().all(|v| v.is_finite()) {
            continue;
        }
        let run = ascend(u, g, &region, x0, scale, opts);
        let better = match &best {
            None => true,
            Some(b) => run.value > b.objective + 1e-12 * b.objective.abs().max(1.0),
        };
        if better {
            best = Some(finish(u, g, &region, run, idx));
        }
    }
    let best = best.ok_or_else(|| Error::InvalidInput("no start with a finite objective and gradient".into()))?;
    if !(best.kkt_residual <= opts.kkt_tol) {
        return Err(Error::NonConverged { best: Box::new(best) });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SquareMatrix;

    #[test]
    fn linear_objective_on_its_own_budget() {
        let f = FunctionSpec::linear(vec![1.0, 1.0], 0.0);
        let r = maximize_concave(&f, &f, 1.0, &AscentOptions::default()).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-12);
        assert!(r.active);
    }

    #[test]
    fn sinr_vertex() {
        let u = FunctionSpec::quadratic_fractional(
            SquareMatrix::diagonal(&[5.0, 5.0]),
            SquareMatrix::diagonal(&[2.0, 2.0]),
            1.0,
        );
        let g = FunctionSpec::linear(vec![1.0, 1.0], 0.0);
        let r = maximize_concave(&u, &g, 1.0, &AscentOptions::default()).unwrap();
        assert!((r.objective - 5.0 / 3.0).abs() < 1e-9, "{r:?}");
        // lowest-index vertex start wins the symmetric tie
        assert!((r.point[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn screened_starts_keep_the_best_vertex() {
        let u = FunctionSpec::quadratic_fractional(
            SquareMatrix::diagonal(&[5.0, 6.0]),
            SquareMatrix::diagonal(&[2.0, 2.0]),
            1.0,
        );
        let g = FunctionSpec::linear(vec![1.0, 1.0], 0.0);
        let opts = AscentOptions {
            warm_start: Some(vec![0.9, 0.1]),
            screen: Some(1),
            ..Default::default()
        };
        let r = maximize_concave(&u, &g, 1.0, &opts).unwrap();
        assert!((r.objective - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn cobb_douglas_interior() {
        let u = FunctionSpec::cobb_douglas(vec![0.5, 0.5]);
        let g = FunctionSpec::linear(vec![1.0, 2.0], -1.0);
        let r = maximize_concave(&u, &g, 0.0, &AscentOptions::default()).unwrap();
        assert!((r.point[0] - 0.5).abs() < 1e-5 && (r.point[1] - 0.25).abs() < 1e-5, "{r:?}");
        assert!(r.active);
    }

    #[test]
    fn kkt_residual_zero_at_linear_vertex() {
        let (r, mu) = kkt_residual(&[3.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], true);
        assert_eq!(r, 0.0);
        assert_eq!(mu, 3.0);
    }

    #[test]
    fn non_convergence_carries_point() {
        let u = FunctionSpec::cobb_douglas(vec![0.3, 0.7]);
        let g = FunctionSpec::linear(vec![1.0, 2.0], 0.0);
        let opts = AscentOptions {
            max_iters: 1,
            n_starts: 0,
            vertex_starts: false,
            kkt_tol: 1e-14,
            ..Default::default()
        };
        match maximize_concave(&u, &g, 1.0, &opts) {
            Err(Error::NonConverged { best }) => assert!(best.iterations <= 1),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
