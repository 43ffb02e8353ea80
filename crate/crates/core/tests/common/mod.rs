//! Test-side oracles, written independently of the library code paths they check.
#![allow(dead_code)]

use iirl_core::FunctionSpec;

/// Central differences with a step scaled to the coordinate.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Separable concave quadratic `a'b - sum h_i b_i^2 / 2`.
#[derive(Debug, Clone)]
pub struct Quad {
    pub a: Vec<f64>,
    pub h: Vec<f64>,
}

impl Quad {
    pub fn value(&self, b: &[f64]) -> f64 {
        (0..b.len()).map(|i| self.a[i] * b[i] - 0.5 * self.h[i] * b[i] * b[i]).sum()
    }

    /// Reads the coefficients back out of the library representation.
    pub fn from_spec(u: &FunctionSpec) -> Quad {
        match u {
            FunctionSpec::Quadratic { matrix, linear, .. } => Quad {
                a: linear.clone(),
                h: (0..linear.len()).map(|i| -2.0 * matrix.get(i, i)).collect(),
            },
            _ => panic!("not a quadratic"),
        }
    }

    /// Water-filling solution of `max s.t. p'b <= gamma, b >= 0`:
    /// `b_i = max(0, (a_i - mu p_i) / h_i)` with `mu` found by bisection.
    /// Returns `(b, mu)`.
    pub fn respond(&self, p: &[f64], gamma: f64) -> (Vec<f64>, f64) {
        let at = |mu: f64| -> Vec<f64> {
            (0..p.len())
                .map(|i| ((self.a[i] - mu * p[i]) / self.h[i]).max(0.0))
                .collect()
        };
        let cost = |b: &[f64]| -> f64 { b.iter().zip(p).map(|(x, c)| x * c).sum() };
        let free = at(0.0);
        if cost(&free) <= gamma {
            return (free, 0.0);
        }
        let mut lo = 0.0;
        let mut hi = (0..p.len()).map(|i| self.a[i] / p[i]).fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cost(&at(mid)) > gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        (at(mu), mu)
    }
}

/// Threshold-form strategy margin from closed-form responses:
/// `min_{s != t} gt_s - gt_t - (u_t(b_s) - u_t(b_t)) / mu_t`.
pub fn quad_margin(us: &[Quad], p: &[f64], gt: &[f64]) -> f64 {
    let resp: Vec<(Vec<f64>, f64)> = us.iter().zip(gt).map(|(u, g)| u.respond(p, *g)).collect();
    quad_margin_at(us, gt, &resp)
}

pub fn quad_margin_at(us: &[Quad], gt: &[f64], resp: &[(Vec<f64>, f64)]) -> f64 {
    let k = us.len();
    let mut best = f64::INFINITY;
    for t in 0..k {
        let lam = 1.0 / resp[t].1;
        for s in 0..k {
            if s != t {
                let e = gt[s] - gt[t] - lam * (us[t].value(&resp[s].0) - us[t].value(&resp[t].0));
                best = best.min(e);
            }
        }
    }
    best
}

pub fn linear_coeffs(g: &FunctionSpec) -> Vec<f64> {
    match g {
        FunctionSpec::Linear { coeffs, .. } => coeffs.clone(),
        _ => panic!("not linear"),
    }
}
