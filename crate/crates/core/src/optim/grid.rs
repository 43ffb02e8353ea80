use super::{kkt_residual, OptimumPoint, Region, ACTIVE_TOL};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;

pub const GRID_MAX_DIM: usize = 3;

/// Brute-force maximizer: evaluates `u` on a uniform `grid_n^m` grid over the
/// bounding box of the feasible set (endpoints included) and keeps the best
/// feasible node. Meant as an independent check on [`super::maximize_concave`].
pub fn grid_oracle_maximize(u: &FunctionSpec, g: &FunctionSpec, gamma: f64, grid_n: usize) -> Result<OptimumPoint> {
    let m = u
        .dim()
        .or_else(|| g.dim())
        .ok_or_else(|| Error::InvalidInput("cannot infer the response dimension".into()))?;
    if m > GRID_MAX_DIM {
        return Err(Error::UnsupportedDimension { m, max: GRID_MAX_DIM });
    }
    if grid_n < 2 {
        return Err(Error::InvalidInput("grid_n must be at least 2".into()));
    }
    u.check(m)?;
    let region = Region::new(g, gamma, m)?;
    let ext = region.axis_extents()?;
    let tol = 1e-12 * gamma.abs().max(1.0);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let mut evaluated = 0usize;
    loop {
        for i in 0..m {
            x[i] = ext[i] * idx[i] as f64 / (grid_n - 1) as f64;
        }
        if region.slack(&x) <= tol {
            let v = u.value(&x);
            evaluated += 1;
            if v.is_finite() && best.as_ref().map_or(true, |(_, b)| v > *b) {
                best = Some((x.clone(), v));
            }
        }
        // odometer increment
        let mut d = 0;
        while d < m {
            idx[d] += 1;
            if idx[d] < grid_n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == m {
            break;
        }
    }
    let (point, objective) = best.ok_or_else(|| Error::InvalidInput("no finite objective on the grid".into()))?;
    let active = region.slack(&point).abs() <= ACTIVE_TOL;
    let grad = u.gradient(&point);
    let (kkt, mu) = if grad.iter().all(|v| v.is_finite()) {
        kkt_residual(&grad, &g.gradient(&point), &point, active)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(OptimumPoint {
        point,
        objective,
        kkt_residual: kkt,
        multiplier: mu,
        active,
        iterations: evaluated,
        start: 0,
    })
}
