//! Strategy masking: the decision maker perturbs its budget thresholds so
//! that the adversary's budget test passes with a smaller margin.
//!
//! Given utilities `u_t`, a budget `g(beta) <= gamma_t` and an extent
//! `eta in [0, 1]`, find thresholds `gt` minimizing `sum (gt_t - gamma_t)^2`
//! such that the responses `bt_t = argmax u_t s.t. g <= gt_t` have threshold
//! margin at most `(1 - eta) psi_true`.
//!
//! The margin is a minimum of pair terms and each term `(j, k)` only depends
//! on `gt_j` and `gt_k`, so the feasible set is a union of sets that each
//! constrain two coordinates. The search exploits that: besides the uniform
//! shift start it tabulates each `bt_t` along its own threshold axis, ranks
//! the pairs on that table and refines the best ones with a polar search.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::BudgetSpec;
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::irl_strategy::margin_strategy_thresholds;
use crate::margin::{kkt_multiplier_at, MarginReport};
use crate::optim::{coordinate_search_minimize, maximize_concave, AscentOptions, OptimumPoint, SearchOptions, ACTIVE_TOL};

/// Slack allowed when checking the masking constraint after the fact.
pub const VERIFY_SLACK: f64 = 1e-6;

/// Slack the masking search works to, kept well inside [`VERIFY_SLACK`] so
/// that independent re-evaluation of a solution still passes.
pub const MASK_SLACK: f64 = 1e-7;

/// Adversary utilities, the true budget and optionally a masking extent.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub utilities: Vec<FunctionSpec>,
    pub budget: BudgetSpec,
    pub eta: Option<f64>,
}

impl Scenario {
    pub fn new(utilities: Vec<FunctionSpec>, base: FunctionSpec, thresholds: Vec<f64>, eta: Option<f64>) -> Result<Self> {
        let budget = BudgetSpec::new(base, thresholds)?;
        if utilities.len() != budget.thresholds().len() {
            return Err(Error::Schema(format!(
                "{} utilities but {} thresholds",
                utilities.len(),
                budget.thresholds().len()
            )));
        }
        let m = budget.base().dim().expect("checked by BudgetSpec");
        for (t, u) in utilities.iter().enumerate() {
            u.check(m).map_err(|e| Error::Schema(format!("utility {t}: {e}")))?;
        }
        if let Some(e) = eta {
            check_eta(e)?;
        }
        Ok(Self { utilities, budget, eta })
    }

    pub fn horizon(&self) -> usize {
        self.utilities.len()
    }

    pub fn dim(&self) -> usize {
        self.budget.base().dim().expect("checked by BudgetSpec")
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("masking extent eta must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskingOptions {
    /// Options for every inner `argmax u_t s.t. g <= gt_t`.
    pub inner: AscentOptions,
    /// Final full-dimensional polish.
    pub search: SearchOptions,
    /// Thresholds tabulated per axis when ranking pairs.
    pub table_n: usize,
    /// Number of best-ranked pairs refined by the polar search.
    pub refine_pairs: usize,
    pub bisection_iters: usize,
    pub golden_iters: usize,
    /// Run the full-dimensional coordinate polish on the best candidate.
    pub polish: bool,
}

impl Default for MaskingOptions {
    fn default() -> Self {
        Self {
            inner: AscentOptions {
                kkt_tol: 1e-9,
                screen: Some(2),
                ..AscentOptions::default()
            },
            search: SearchOptions {
                initial_step: 0.05,
                min_step: 1e-7,
                max_evals: 4000,
                n_starts: 0,
                ..SearchOptions::default()
            },
            table_n: 48,
            refine_pairs: 6,
            bisection_iters: 20,
            golden_iters: 12,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskingProblem {
    pub utilities: Vec<FunctionSpec>,
    pub budget: BudgetSpec,
    pub eta: f64,
    pub options: MaskingOptions,
}

impl MaskingProblem {
    pub fn new(utilities: Vec<FunctionSpec>, budget: BudgetSpec, eta: f64, options: MaskingOptions) -> Result<Self> {
        check_eta(eta)?;
        let k = utilities.len();
        if k < 2 {
            return Err(Error::UndefinedMargin { k });
        }
        if budget.thresholds().len() != k {
            return Err(Error::DimensionMismatch {
                context: "thresholds".into(),
                expected: k,
                found: budget.thresholds().len(),
            });
        }
        Ok(Self {
            utilities,
            budget,
            eta,
            options,
        })
    }

    pub fn from_scenario(s: &Scenario, eta: f64, options: MaskingOptions) -> Result<Self> {
        Self::new(s.utilities.clone(), s.budget.clone(), eta, options)
    }

    pub fn horizon(&self) -> usize {
        self.utilities.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        self.budget.thresholds()
    }

    pub fn g(&self) -> &FunctionSpec {
        self.budget.base()
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self { eta, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveSolution {
    pub responses: Vec<OptimumPoint>,
    pub psi_true: f64,
    pub margin: MarginReport,
}

impl NaiveSolution {
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.responses.iter().map(|r| r.point.clone()).collect()
    }
}

/// `beta*_t = argmax u_t s.t. g <= gamma_t` and the resulting margin.
pub fn naive_responses(p: &MaskingProblem) -> Result<NaiveSolution> {
    // no warm start here, so every start is ascended
    let inner = AscentOptions {
        screen: None,
        ..p.options.inner.clone()
    };
    let responses = p
        .utilities
        .iter()
        .zip(p.thresholds())
        .enumerate()
        .map(|(t, (u, &gamma))| maximize_concave(u, p.g(), gamma, &inner).map_err(|e| e.at(t)))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<Vec<f64>> = responses.iter().map(|r| r.point.clone()).collect();
    let margin = margin_strategy_thresholds(&points, &p.utilities, p.thresholds(), p.g())?;
    Ok(NaiveSolution {
        responses,
        psi_true: margin.value,
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskingResult {
    pub eta: f64,
    pub naive: Vec<Vec<f64>>,
    pub psi_true: f64,
    /// `(1 - eta) psi_true`
    pub target: f64,
    pub thresholds: Vec<f64>,
    pub responses: Vec<Vec<f64>>,
    pub psi_masked: f64,
    /// `sum (gt_t - gamma_t)^2`
    pub objective: f64,
    /// `sqrt(objective)`, the deliberate constraint violation.
    pub violation_norm: f64,
    pub feasible: bool,
    /// `psi_true <= 0`: the naive data already fail the test and nothing was masked.
    pub degenerate: bool,
    pub inner_solves: usize,
}

#[derive(Clone)]
struct Response {
    beta: Vec<f64>,
    lambda: f64,
    /// `u_t(beta)`
    own: f64,
}

/// Inner solves cached by `(t, threshold bits)`.
struct Evaluator<'a> {
    p: &'a MaskingProblem,
    warm: &'a [Vec<f64>],
    cache: RefCell<HashMap<(usize, u64), Option<Rc<Response>>>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Smallest pair term seen so far.
    lowest: Cell<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(p: &'a MaskingProblem, warm: &'a [Vec<f64>]) -> Self {
        let lo = p.thresholds().iter().map(|g| 1e-6 * g).collect();
        let hi = p.thresholds().iter().map(|g| 2.0 * g).collect();
        Self {
            p,
            warm,
            cache: RefCell::new(HashMap::new()),
            lo,
            hi,
            lowest: Cell::new(f64::INFINITY),
        }
    }

    fn solves(&self) -> usize {
        self.cache.borrow().len()
    }

    fn in_box(&self, t: usize, v: f64) -> bool {
        v >= self.lo[t] && v <= self.hi[t]
    }

    fn response(&self, t: usize, gamma: f64) -> Option<Rc<Response>> {
        let key = (t, gamma.to_bits());
        if let Some(r) = self.cache.borrow().get(&key) {
            return r.clone();
        }
        let u = &self.p.utilities[t];
        let g = self.p.g();
        let opts = self.p.options.inner.with_warm_start(&self.warm[t]);
        let r = maximize_concave(u, g, gamma, &opts).ok().and_then(|o| {
            let lambda = kkt_multiplier_at(&g.gradient(&o.point), &u.gradient(&o.point), &o.point).ok()?;
            Some(Rc::new(Response {
                own: u.value(&o.point),
                beta: o.point,
                lambda: lambda.value,
            }))
        });
        self.cache.borrow_mut().insert(key, r.clone());
        r
    }

    /// Pair term `gt_j - gt_k - lambda_k (u_k(bt_j) - u_k(bt_k))`.
    fn pair(&self, j: usize, k: usize, gj: f64, gk: f64) -> f64 {
        let v = match (self.response(j, gj), self.response(k, gk)) {
            (Some(rj), Some(rk)) => gj - gk - rk.lambda * (self.p.utilities[k].value(&rj.beta) - rk.own),
            _ => f64::INFINITY,
        };
        self.lowest.set(self.lowest.get().min(v));
        v
    }

    fn margin(&self, gam: &[f64]) -> f64 {
        let k = gam.len();
        if (0..k).any(|t| !self.in_box(t, gam[t])) {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for j in 0..k {
            for kk in 0..k {
                if j != kk {
                    best = best.min(self.pair(j, kk, gam[j], gam[kk]));
                }
            }
        }
        best
    }
}

fn cost(gam: &[f64], gamma: &[f64]) -> f64 {
    gam.iter().zip(gamma).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Uniform shift `gt = gamma - s`: doubling outward in both directions from
/// a small shift, then bisection back to the smallest feasible `|s|`.
fn uniform_shift(ev: &Evaluator, target: f64) -> Option<Vec<f64>> {
    let gamma = ev.p.thresholds();
    let gmin = gamma.iter().cloned().fold(f64::INFINITY, f64::min);
    let at = |s: f64| -> Vec<f64> { gamma.iter().map(|g| g - s).collect() };
    let feasible = |s: f64| ev.margin(&at(s)) <= target;
    let s_max = gmin * (1.0 - 1e-6);
    let mut found: Option<(f64, f64)> = None; // (infeasible, feasible)
    let mut s = 1e-3 * gmin;
    let mut prev = 0.0;
    while found.is_none() && prev < s_max {
        let step = s.min(s_max);
        for dir in [1.0, -1.0] {
            if feasible(dir * step) {
                found = Some((dir * prev, dir * step));
                break;
            }
        }
        prev = step;
        s *= 2.0;
    }
    let (mut bad, mut good) = found?;
    for _ in 0..ev.p.options.bisection_iters {
        let mid = 0.5 * (bad + good);
        if feasible(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Some(at(good))
}

struct PairCandidate {
    j: usize,
    k: usize,
    dj: f64,
    dk: f64,
    cost: f64,
}

/// Best feasible table point for every ordered pair, sorted by cost.
fn rank_pairs(ev: &Evaluator, target: f64) -> Vec<PairCandidate> {
    let gamma = ev.p.thresholds();
    let k = gamma.len();
    let n = ev.p.options.table_n.max(2);
    let axis = |t: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (1..=n).map(|i| 2.0 * gamma[t] * i as f64 / n as f64).collect();
        v.push(gamma[t]);
        // geometric points below the first step, where small targets live
        let mut g = 2.0 * gamma[t] / n as f64;
        while g / 4.0 >= ev.lo[t] {
            g /= 4.0;
            v.push(g);
        }
        v
    };
    let axes: Vec<Vec<f64>> = (0..k).map(axis).collect();
    let mut out = Vec::new();
    for j in 0..k {
        for kk in 0..k {
            if j == kk {
                continue;
            }
            let mut best: Option<PairCandidate> = None;
            for &gj in &axes[j] {
                for &gk in &axes[kk] {
                    let c = (gj - gamma[j]).powi(2) + (gk - gamma[kk]).powi(2);
                    if best.as_ref().is_some_and(|b| c >= b.cost) {
                        continue;
                    }
                    if ev.pair(j, kk, gj, gk) <= target {
                        best = Some(PairCandidate {
                            j,
                            k: kk,
                            dj: gj - gamma[j],
                            dk: gk - gamma[kk],
                            cost: c,
                        });
                    }
                }
            }
            out.extend(best);
        }
    }
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then((a.j, a.k).cmp(&(b.j, b.k))));
    out
}

/// Polar refinement of one pair: for a direction `theta` in the `(j, k)`
/// plane, bisect the distance to the first feasible point; golden-section
/// search over `theta` around the table optimum.
fn refine_pair(ev: &Evaluator, c: &PairCandidate, target: f64) -> Option<(f64, f64)> {
    let gamma = ev.p.thresholds();
    let (j, k) = (c.j, c.k);
    let feasible = |dj: f64, dk: f64| ev.pair(j, k, gamma[j] + dj, gamma[k] + dk) <= target
        && ev.in_box(j, gamma[j] + dj)
        && ev.in_box(k, gamma[k] + dk);
    let r0 = c.cost.sqrt();
    let radius = |theta: f64| -> Option<f64> {
        let (dx, dy) = (theta.cos(), theta.sin());
        // largest r inside the box along the ray
        let limit = |d: f64, t: usize| -> f64 {
            if d > 0.0 {
                (ev.hi[t] - gamma[t]) / d
            } else if d < 0.0 {
                (ev.lo[t] - gamma[t]) / d
            } else {
                f64::INFINITY
            }
        };
        let r_box = limit(dx, j).min(limit(dy, k));
        // Feasibility along a ray need not be monotone, so scan outward for
        // the first feasible sample before bisecting.
        let reach = (2.0 * r0).min(r_box);
        let n_scan = 16;
        let mut lo = 0.0;
        let mut hi = None;
        for i in 1..=n_scan {
            let r = reach * i as f64 / n_scan as f64;
            if feasible(r * dx, r * dy) {
                hi = Some(r);
                break;
            }
            lo = r;
        }
        let mut hi = match hi {
            Some(h) => h,
            None if r_box > reach && feasible(r_box * dx, r_box * dy) => r_box,
            None => return None,
        };
        for _ in 0..ev.p.options.bisection_iters {
            let mid = 0.5 * (lo + hi);
            if feasible(mid * dx, mid * dy) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };
    let theta0 = c.dk.atan2(c.dj);
    let width = std::f64::consts::PI / 8.0;
    let f = |th: f64| radius(th).unwrap_or(f64::INFINITY);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (theta0 - width, theta0 + width);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = (theta0, f(theta0));
    for (th, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 {
            best = (th, v);
        }
    }
    for _ in 0..ev.p.options.golden_iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
            if f1 < best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
            if f2 < best.1 {
                best = (x2, f2);
            }
        }
    }
    if !best.1.is_finite() {
        return None;
    }
    let (th, r) = best;
    Some((r * th.cos(), r * th.sin()))
}

/// Solves the masking problem with precomputed naive responses.
pub fn mask_with_naive(p: &MaskingProblem, naive: &NaiveSolution) -> Result<MaskingResult> {
    let gamma = p.thresholds().to_vec();
    let warm = naive.points();
    let psi_true = naive.psi_true;
    let target = (1.0 - p.eta) * psi_true;
    let unchanged = |degenerate: bool| MaskingResult {
        eta: p.eta,
        naive: warm.clone(),
        psi_true,
        target,
        thresholds: gamma.clone(),
        responses: warm.clone(),
        psi_masked: psi_true,
        objective: 0.0,
        violation_norm: 0.0,
        feasible: true,
        degenerate,
        inner_solves: 0,
    };
    if p.eta == 0.0 {
        return Ok(unchanged(false));
    }
    if psi_true <= 0.0 {
        return Ok(unchanged(true));
    }
    let ev = Evaluator::new(p, &warm);
    // A zero target (eta = 1) is only reached in the limit of coinciding
    // responses, so the search works to the same slack the verifier allows.
    let goal = target + MASK_SLACK;
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    if let Some(x) = uniform_shift(&ev, goal) {
        candidates.push(x);
    }
    for c in rank_pairs(&ev, goal).iter().take(p.options.refine_pairs) {
        let mut x = gamma.clone();
        x[c.j] += c.dj;
        x[c.k] += c.dk;
        candidates.push(x.clone());
        if let Some((dj, dk)) = refine_pair(&ev, c, goal) {
            x = gamma.clone();
            x[c.j] += dj;
            x[c.k] += dk;
            candidates.push(x);
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x in candidates {
        if ev.margin(&x) > goal {
            continue;
        }
        let c = cost(&x, &gamma);
        if best.as_ref().map_or(true, |b| c < b.1) {
            best = Some((x, c));
        }
    }
    let Some((mut x, mut obj)) = best else {
        return Err(Error::MaskingInfeasible {
            best_margin: ev.lowest.get(),
            target,
        });
    };
    if p.options.polish {
        let objective = |y: &[f64]| cost(y, &gamma);
        let constraint = |y: &[f64]| ev.margin(y) - goal;
        let opts = SearchOptions {
            lower: Some(ev.lo.clone()),
            upper: Some(ev.hi.clone()),
            ..p.options.search.clone()
        };
        if let Ok(r) = coordinate_search_minimize(&objective, &constraint, &x, &opts) {
            if r.value < obj {
                x = r.x;
                obj = r.value;
            }
        }
    }
    let responses: Vec<Vec<f64>> = (0..gamma.len())
        .map(|t| ev.response(t, x[t]).map(|r| r.beta.clone()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidInput("inner solve failed at the masked thresholds".into()))?;
    let psi_masked = ev.margin(&x);
    Ok(MaskingResult {
        eta: p.eta,
        naive: warm.clone(),
        psi_true,
        target,
        thresholds: x,
        responses,
        psi_masked,
        objective: obj,
        violation_norm: obj.sqrt(),
        feasible: psi_masked <= target + VERIFY_SLACK,
        degenerate: false,
        inner_solves: ev.solves(),
    })
}

/// Minimally violated thresholds for the problem's `eta`.
pub fn mask_strategy(p: &MaskingProblem) -> Result<MaskingResult> {
    let naive = naive_responses(p)?;
    mask_with_naive(p, &naive)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub eta: f64,
    /// Masking failures are kept as gaps in the curve.
    pub result: std::result::Result<MaskingResult, String>,
}

/// Runs the masking problem for every `eta` in `etas`, sharing the naive
/// responses. A solution found for a larger `eta` is also feasible for a
/// smaller one (its margin target is looser), so each point keeps the
/// cheaper of its own solution and any solution from a larger `eta`.
pub fn violation_curve(p: &MaskingProblem, etas: &[f64]) -> Result<(NaiveSolution, Vec<CurvePoint>)> {
    for &e in etas {
        check_eta(e)?;
    }
    let naive = naive_responses(p)?;
    let mut points: Vec<CurvePoint> = etas
        .par_iter()
        .map(|&eta| {
            let q = MaskingProblem { eta, ..p.clone() };
            CurvePoint {
                eta,
                result: mask_with_naive(&q, &naive).map_err(|e| e.to_string()),
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].eta.total_cmp(&points[a].eta));
    let mut carry: Option<MaskingResult> = None;
    for i in order {
        let own = points[i].result.as_ref().ok().filter(|r| r.feasible).cloned();
        let pick = match (own, carry.take()) {
            (Some(o), Some(c)) if c.objective < o.objective => Some(MaskingResult {
                eta: o.eta,
                target: o.target,
                feasible: c.psi_masked <= o.target + VERIFY_SLACK,
                ..c
            }),
            (Some(o), _) => Some(o),
            (None, Some(c)) => {
                let eta = points[i].eta;
                let target = (1.0 - eta) * c.psi_true;
                Some(MaskingResult {
                    eta,
                    target,
                    feasible: c.psi_masked <= target + VERIFY_SLACK,
                    ..c
                })
            }
            (None, None) => None,
        };
        if let Some(r) = pick {
            if !r.degenerate && points[i].eta > 0.0 {
                points[i].result = Ok(r.clone());
            }
            carry = Some(r);
        }
    }
    Ok((naive, points))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub ok: bool,
    pub psi_true: f64,
    pub psi_masked: f64,
    pub target: f64,
    /// Largest `|g(bt_t) - gt_t|` over the recomputed responses.
    pub activity_gap: f64,
}

/// Recomputes both margins from scratch (fresh inner solves, no warm
/// starts) and checks `psi_masked <= (1 - eta) psi_true + 1e-6`.
pub fn verify_masking(r: &MaskingResult, p: &MaskingProblem) -> Result<Verification> {
    let cold = MaskingProblem {
        options: MaskingOptions {
            inner: AscentOptions {
                warm_start: None,
                screen: None,
                ..p.options.inner.clone()
            },
            ..p.options.clone()
        },
        ..p.clone()
    };
    let naive = naive_responses(&cold)?;
    let responses = r
        .thresholds
        .iter()
        .zip(&p.utilities)
        .enumerate()
        .map(|(t, (&gam, u))| {
            maximize_concave(u, p.g(), gam, &cold.options.inner)
                .map(|o| o.point)
                .map_err(|e| e.at(t))
        })
        .collect::<Result<Vec<_>>>()?;
    let masked = margin_strategy_thresholds(&responses, &p.utilities, &r.thresholds, p.g())?;
    let target = (1.0 - p.eta) * naive.psi_true;
    let activity_gap = responses
        .iter()
        .zip(&r.thresholds)
        .map(|(b, gam)| (p.g().value(b) - gam).abs())
        .fold(0.0, f64::max);
    Ok(Verification {
        ok: masked.value <= target + VERIFY_SLACK && activity_gap <= ACTIVE_TOL,
        psi_true: naive.psi_true,
        psi_masked: masked.value,
        target,
        activity_gap,
    })
}
