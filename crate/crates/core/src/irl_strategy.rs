//! The adversary's test for the decision maker's strategy: given the
//! utilities `u_t` it controls and the responses `beta_t`, is there a budget
//! `g(beta) <= gamma_t` under which every response was optimal?

use serde::Serialize;

use crate::dataset::{Dataset, DatasetMode};
use crate::error::{Error, Result};
use crate::function::{EnvelopeMode, EnvelopePiece, FunctionSpec};
use crate::irl_utility::{garp_from_costs, GarpResult, LP_FLOOR};
use crate::margin::{kkt_multiplier_at, Extremum, MarginReport, Multiplier};
use crate::optim::{solve_feasibility, FeasibilityResult, LinearFeasibilityProblem, Sense};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReconstruction {
    pub thresholds: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// `max_t { gbar_t + lambda_t (u_t(beta) - u_t(beta_t)) }`
    pub envelope: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub feasibility: FeasibilityResult,
    pub reconstruction: Option<BudgetReconstruction>,
}

/// Variables `[gbar_1..gbar_K, lambda_1..lambda_K]`, rows
/// `gbar_s - gbar_t - lambda_t (u_t(beta_s) - u_t(beta_t)) >= 0` for `t != s`.
pub fn strategy_system(d: &Dataset) -> Result<LinearFeasibilityProblem> {
    d.require_mode(DatasetMode::StrategyTest)?;
    // The sufficiency direction relies on non-satiated utilities; only
    // utilities known to decrease somewhere are rejected.
    if let Some(t) = (0..d.horizon()).find(|&t| d.function(t).monotone() == Some(false)) {
        return Err(Error::InvalidInput(format!(
            "utility {t} is not monotone; the strategy test needs nondecreasing utilities"
        )));
    }
    let k = d.horizon();
    let util = d.cross_values();
    let mut p = LinearFeasibilityProblem::new(2 * k, vec![LP_FLOOR; 2 * k])?;
    for t in 0..k {
        for s in 0..k {
            if s == t {
                continue;
            }
            let mut row = vec![0.0; 2 * k];
            row[s] += 1.0;
            row[t] -= 1.0;
            row[k + t] = -(util[t][s] - util[t][t]);
            p.push(row, Sense::Ge, 0.0)?;
        }
    }
    if k == 1 {
        p.push(vec![0.0, 0.0], Sense::Ge, 0.0)?;
    }
    Ok(p)
}

pub fn budget_from_witness(d: &Dataset, witness: &[f64]) -> Result<BudgetReconstruction> {
    let k = d.horizon();
    if witness.len() != 2 * k {
        return Err(Error::DimensionMismatch {
            context: "strategy witness".into(),
            expected: 2 * k,
            found: witness.len(),
        });
    }
    let thresholds = witness[..k].to_vec();
    let multipliers = witness[k..].to_vec();
    let pieces = (0..k)
        .map(|t| EnvelopePiece {
            level: thresholds[t],
            multiplier: multipliers[t],
            reference: d.function(t).value(d.response(t)),
            anchor: Some(d.response(t).to_vec()),
            base: d.function(t).clone(),
        })
        .collect();
    Ok(BudgetReconstruction {
        thresholds,
        multipliers,
        envelope: FunctionSpec::Envelope {
            mode: EnvelopeMode::Max,
            pieces,
        },
    })
}

/// Solves the budget inequalities; on success also returns the max-envelope
/// budget whose level sets rationalize the responses.
pub fn strategy_feasibility_test(d: &Dataset) -> Result<StrategyOutcome> {
    let p = strategy_system(d)?;
    let feasibility = solve_feasibility(&p)?;
    let reconstruction = match &feasibility.witness {
        Some(w) => Some(budget_from_witness(d, w)?),
        None => None,
    };
    Ok(StrategyOutcome {
        feasibility,
        reconstruction,
    })
}

/// GARP on the transformed data `h_t(beta) = u_t(beta_t) - u_t(beta)`.
/// `h_t(beta_t) = 0` by construction so no activity check is needed.
pub fn garp_transformed(d: &Dataset, tol: f64) -> Result<GarpResult> {
    d.require_mode(DatasetMode::StrategyTest)?;
    let util = d.cross_values();
    let k = d.horizon();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|t| (0..k).map(|s| util[t][t] - util[t][s]).collect())
        .collect();
    Ok(garp_from_costs(&cost, tol))
}

fn budget_multipliers(responses: &[Vec<f64>], utilities: &[FunctionSpec], g: &FunctionSpec) -> Result<Vec<Multiplier>> {
    responses
        .iter()
        .zip(utilities)
        .enumerate()
        .map(|(t, (b, u))| kkt_multiplier_at(&g.gradient(b), &u.gradient(b), b).map_err(|e| e.at(t)))
        .collect()
}

/// `g_best(beta) = max_t { gamma_t + lambda_t (u_t(beta) - u_t(beta_t)) }`.
pub fn best_budget_estimate(d: &Dataset, g_true: &FunctionSpec, thresholds: &[f64]) -> Result<FunctionSpec> {
    d.require_mode(DatasetMode::StrategyTest)?;
    if thresholds.len() != d.horizon() {
        return Err(Error::DimensionMismatch {
            context: "thresholds".into(),
            expected: d.horizon(),
            found: thresholds.len(),
        });
    }
    let responses: Vec<Vec<f64>> = (0..d.horizon()).map(|t| d.response(t).to_vec()).collect();
    let utilities: Vec<FunctionSpec> = (0..d.horizon()).map(|t| d.function(t).clone()).collect();
    let lambdas = budget_multipliers(&responses, &utilities, g_true)?;
    let pieces = (0..d.horizon())
        .map(|t| EnvelopePiece {
            level: thresholds[t],
            multiplier: lambdas[t].value,
            reference: utilities[t].value(&responses[t]),
            anchor: Some(responses[t].clone()),
            base: utilities[t].clone(),
        })
        .collect();
    Ok(FunctionSpec::Envelope {
        mode: EnvelopeMode::Max,
        pieces,
    })
}

/// Both forms of the budget margin.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyMargin {
    /// Terms `g(beta_j) - g(beta_k) - lambda_k (u_k(beta_j) - u_k(beta_k))`.
    pub g_form: MarginReport,
    /// Terms `gamma_j - gamma_k - lambda_k (u_k(beta_j) - u_k(beta_k))`; equal
    /// to the first form when every budget is active.
    pub threshold_form: MarginReport,
}

/// Pair terms `level_j - level_k - lambda_k (u_k(beta_j) - u_k(beta_k))`.
pub(crate) fn strategy_terms(
    responses: &[Vec<f64>],
    utilities: &[FunctionSpec],
    levels: &[f64],
    lambdas: &[Multiplier],
) -> Vec<Vec<f64>> {
    let k = responses.len();
    (0..k)
        .map(|j| {
            (0..k)
                .map(|kk| {
                    if j == kk {
                        0.0
                    } else {
                        let du = utilities[kk].value(&responses[j]) - utilities[kk].value(&responses[kk]);
                        levels[j] - levels[kk] - lambdas[kk].value * du
                    }
                })
                .collect()
        })
        .collect()
}

fn check_lengths(responses: &[Vec<f64>], utilities: &[FunctionSpec], thresholds: &[f64]) -> Result<()> {
    let k = responses.len();
    for (what, n) in [("utilities", utilities.len()), ("thresholds", thresholds.len())] {
        if n != k {
            return Err(Error::DimensionMismatch {
                context: what.into(),
                expected: k,
                found: n,
            });
        }
    }
    if k < 2 {
        return Err(Error::UndefinedMargin { k });
    }
    Ok(())
}

/// Threshold-form margin only; what the masking constraint uses.
pub fn margin_strategy_thresholds(
    responses: &[Vec<f64>],
    utilities: &[FunctionSpec],
    thresholds: &[f64],
    g_true: &FunctionSpec,
) -> Result<MarginReport> {
    check_lengths(responses, utilities, thresholds)?;
    let lambdas = budget_multipliers(responses, utilities, g_true)?;
    let terms = strategy_terms(responses, utilities, thresholds, &lambdas);
    MarginReport::from_terms(terms, Extremum::Min, &lambdas)
}

/// `psi_g = min_{j != k} ...`; nonnegative for data generated by exact
/// maximization under `g_true`, and the larger the stronger the pass.
pub fn margin_strategy(
    responses: &[Vec<f64>],
    utilities: &[FunctionSpec],
    thresholds: &[f64],
    g_true: &FunctionSpec,
) -> Result<StrategyMargin> {
    check_lengths(responses, utilities, thresholds)?;
    let lambdas = budget_multipliers(responses, utilities, g_true)?;
    let g_levels: Vec<f64> = responses.iter().map(|b| g_true.value(b)).collect();
    Ok(StrategyMargin {
        g_form: MarginReport::from_terms(
            strategy_terms(responses, utilities, &g_levels, &lambdas),
            Extremum::Min,
            &lambdas,
        )?,
        threshold_form: MarginReport::from_terms(
            strategy_terms(responses, utilities, thresholds, &lambdas),
            Extremum::Min,
            &lambdas,
        )?,
    })
}
