//! Synthetic data with known ground truth.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMode};
use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::iirl::Scenario;
use crate::irl_strategy::garp_transformed;
use crate::irl_utility::{garp_check, GARP_TOL};
use crate::linalg::{dot, SquareMatrix};

const REDRAW_EVERY: usize = 200;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RationalKind {
    CobbDouglas,
    LogLinear,
}

/// Utility-test data with one true utility and budgets `p_t'b - y_t <= 0`.
#[derive(Debug, Clone)]
pub struct UtilityData {
    pub dataset: Dataset,
    pub u_true: FunctionSpec,
    pub prices: Vec<Vec<f64>>,
    pub incomes: Vec<f64>,
}

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn budget_pairs(prices: &[Vec<f64>], incomes: &[f64], responses: Vec<Vec<f64>>) -> Vec<(FunctionSpec, Vec<f64>)> {
    prices
        .iter()
        .zip(incomes)
        .zip(responses)
        .map(|((p, y), b)| (FunctionSpec::linear(p.clone(), -y), b))
        .collect()
}

/// Both families have the demand `b_i = (w_i / sum w) y / p_i`.
pub fn rational_utility_data<R: Rng + ?Sized>(kind: RationalKind, k: usize, m: usize, rng: &mut R) -> Result<UtilityData> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidInput("rational data needs K >= 1 and m >= 1".into()));
    }
    let w = uniform_vec(rng, m, 0.2, 1.0);
    let total: f64 = w.iter().sum();
    let u_true = match kind {
        RationalKind::CobbDouglas => FunctionSpec::cobb_douglas(w.iter().map(|v| v / total).collect()),
        RationalKind::LogLinear => FunctionSpec::LogLinear { weights: w.clone() },
    };
    let prices: Vec<Vec<f64>> = (0..k).map(|_| uniform_vec(rng, m, 0.5, 2.0)).collect();
    let incomes = uniform_vec(rng, k, 1.0, 2.0);
    let responses = prices
        .iter()
        .zip(&incomes)
        .map(|(p, y)| (0..m).map(|i| w[i] / total * y / p[i]).collect())
        .collect();
    let dataset = Dataset::from_pairs(DatasetMode::UtilityTest, budget_pairs(&prices, &incomes, responses))?;
    Ok(UtilityData {
        dataset,
        u_true,
        prices,
        incomes,
    })
}

/// Perturbs rational data (multiplicative noise, and occasionally a swap of
/// two responses) and puts each response back on its budget line, repeating
/// until GARP fails. Nested budget lines admit no violation at all, so the
/// underlying rational data are redrawn every few hundred attempts.
pub fn irrational_utility_data<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<UtilityData> {
    if k < 2 || m < 2 {
        return Err(Error::InvalidInput("irrational data needs K >= 2 and m >= 2".into()));
    }
    let mut base = rational_utility_data(RationalKind::CobbDouglas, k, m, rng)?;
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 && attempt % REDRAW_EVERY == 0 {
            base = rational_utility_data(RationalKind::CobbDouglas, k, m, rng)?;
        }
        let mut responses: Vec<Vec<f64>> = base.dataset.entries().iter().map(|e| e.response.to_vec()).collect();
        if rng.random_bool(0.5) {
            let i = rng.random_range(0..k);
            let j = (i + rng.random_range(1..k)) % k;
            responses.swap(i, j);
        }
        for (t, b) in responses.iter_mut().enumerate() {
            for v in b.iter_mut() {
                *v *= rng.random_range(0.5..1.5);
            }
            let s = base.incomes[t] / dot(&base.prices[t], b);
            b.iter_mut().for_each(|v| *v *= s);
        }
        let d = Dataset::from_pairs(DatasetMode::UtilityTest, budget_pairs(&base.prices, &base.incomes, responses))?;
        if !garp_check(&d, GARP_TOL)?.passes {
            return Ok(UtilityData { dataset: d, ..base });
        }
    }
    Err(Error::InvalidInput("could not produce a GARP violation".into()))
}

/// Strategy-test data with linear utilities and one linear budget.
#[derive(Debug, Clone)]
pub struct StrategyData {
    pub dataset: Dataset,
    pub g_true: FunctionSpec,
    pub thresholds: Vec<f64>,
}

fn vertex(a: &[f64], p: &[f64], gamma: f64) -> Vec<f64> {
    let mut best = 0;
    for i in 1..a.len() {
        if a[i] / p[i] > a[best] / p[best] {
            best = i;
        }
    }
    let mut b = vec![0.0; a.len()];
    b[best] = gamma / p[best];
    b
}

/// `u_t = a_t'b`, budget `p'b <= gamma_t`, responses at the optimal vertex.
pub fn strategy_vertex_data<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<StrategyData> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidInput("strategy data needs K >= 1 and m >= 1".into()));
    }
    let p = uniform_vec(rng, m, 1.0, 2.0);
    let thresholds = uniform_vec(rng, k, 1.0, 2.0);
    let pairs = thresholds
        .iter()
        .map(|&g| {
            let a = uniform_vec(rng, m, 0.5, 2.0);
            let b = vertex(&a, &p, g);
            (FunctionSpec::linear(a, 0.0), b)
        })
        .collect();
    Ok(StrategyData {
        dataset: Dataset::from_pairs(DatasetMode::StrategyTest, pairs)?,
        g_true: FunctionSpec::linear(p, 0.0),
        thresholds,
    })
}

/// Vertex data whose responses are shuffled or moved to random points of
/// their budget sets until the transformed GARP test fails.
pub fn strategy_irrational_data<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<StrategyData> {
    if k < 2 || m < 2 {
        return Err(Error::InvalidInput("irrational strategy data needs K >= 2 and m >= 2".into()));
    }
    let base = strategy_vertex_data(k, m, rng)?;
    let p = match &base.g_true {
        FunctionSpec::Linear { coeffs, .. } => coeffs.clone(),
        _ => unreachable!(),
    };
    for _ in 0..MAX_ATTEMPTS {
        let mut responses: Vec<Vec<f64>> = base.dataset.entries().iter().map(|e| e.response.to_vec()).collect();
        responses.shuffle(rng);
        for (t, b) in responses.iter_mut().enumerate() {
            if rng.random_bool(0.5) {
                let w = uniform_vec(rng, m, 0.0, 1.0);
                let s = base.thresholds[t] / dot(&p, &w);
                *b = w.iter().map(|v| v * s).collect();
            }
        }
        let pairs = base
            .dataset
            .entries()
            .iter()
            .zip(responses)
            .map(|(e, b)| (e.function.clone(), b))
            .collect();
        let d = Dataset::from_pairs(DatasetMode::StrategyTest, pairs)?;
        if !garp_transformed(&d, GARP_TOL)?.passes {
            return Ok(StrategyData { dataset: d, ..base });
        }
    }
    Err(Error::InvalidInput("could not produce a transformed GARP violation".into()))
}

/// `u_t = a_t'b - b' diag(h_t) b / 2` with `a ~ U(2,4)`, `h ~ U(0.2,0.6)`,
/// budget `p'b <= gamma_t`, `p ~ U(1,2)`, `gamma ~ U(1,2)`. The utilities
/// stay increasing on the whole budget set, and the interior curvature makes
/// the masking margin nondegenerate.
pub fn concave_quadratic_scenario<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<Scenario> {
    let p = uniform_vec(rng, m, 1.0, 2.0);
    let thresholds = uniform_vec(rng, k, 1.0, 2.0);
    let utilities = (0..k)
        .map(|_| {
            let a = uniform_vec(rng, m, 2.0, 4.0);
            let h = uniform_vec(rng, m, 0.2, 0.6);
            FunctionSpec::Quadratic {
                matrix: SquareMatrix::diagonal(&h.iter().map(|v| -0.5 * v).collect::<Vec<_>>()),
                linear: a,
                offset: 0.0,
            }
        })
        .collect();
    Scenario::new(utilities, FunctionSpec::linear(p, 0.0), thresholds, None)
}
