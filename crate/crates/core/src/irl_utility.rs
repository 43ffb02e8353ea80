//! The adversary's test for utility maximization: given constraints
//! `g_t(beta) <= 0` and chosen responses `beta_t`, is there a monotone concave
//! utility the responses maximize?

use std::collections::VecDeque;

use serde::Serialize;

use crate::dataset::{validate_dataset, Dataset, DatasetMode, ACTIVITY_TOL};
use crate::error::{Error, Result};
use crate::function::{EnvelopeMode, EnvelopePiece, FunctionSpec};
use crate::margin::{kkt_multiplier_at, Extremum, MarginReport, Multiplier};
use crate::optim::{solve_feasibility, FeasibilityResult, LinearFeasibilityProblem, Sense};

/// "Strictly cheaper" threshold for the revealed-preference relations.
pub const GARP_TOL: f64 = 1e-9;

/// Floor for the LP variables. The system is invariant under a common
/// positive scaling of `(u, lambda)` and under shifting every `u_t` by a
/// constant, so any positive floor is equivalent; 1 keeps the tableau well scaled.
pub const LP_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GarpResult {
    pub passes: bool,
    /// Shortest violating cycle `t_0 -> t_1 -> ... -> t_n (-> t_0)`; the
    /// closing edge is the strict one.
    pub cycle: Option<Vec<usize>>,
    /// `direct[t][s]`: `beta_t` is directly revealed preferred to `beta_s`.
    pub direct: Vec<Vec<bool>>,
    /// Transitive closure of `direct`.
    pub closure: Vec<Vec<bool>>,
}

/// GARP from `cost[t][s] = g_t(beta_s)` (so `cost[t][t]` is ~0).
pub(crate) fn garp_from_costs(cost: &[Vec<f64>], tol: f64) -> GarpResult {
    let k = cost.len();
    let direct: Vec<Vec<bool>> = (0..k).map(|t| (0..k).map(|s| cost[t][s] <= tol).collect()).collect();
    let mut closure = direct.clone();
    for mid in 0..k {
        for t in 0..k {
            if !closure[t][mid] {
                continue;
            }
            for s in 0..k {
                if closure[mid][s] {
                    closure[t][s] = true;
                }
            }
        }
    }
    let mut best: Option<Vec<usize>> = None;
    for t in 0..k {
        for s in 0..k {
            if closure[t][s] && cost[s][t] < -tol {
                let path = shortest_path(&direct, t, s);
                if best.as_ref().map_or(true, |b| path.len() < b.len()) {
                    best = Some(path);
                }
            }
        }
    }
    GarpResult {
        passes: best.is_none(),
        cycle: best,
        direct,
        closure,
    }
}

fn shortest_path(adj: &[Vec<bool>], from: usize, to: usize) -> Vec<usize> {
    if from == to {
        return vec![from];
    }
    let k = adj.len();
    let mut prev = vec![usize::MAX; k];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for w in 0..k {
            if adj[v][w] && prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    let mut v = to;
    while v != from {
        v = prev[v];
        path.push(v);
    }
    path.reverse();
    path
}

fn require_valid(d: &Dataset) -> Result<()> {
    d.require_mode(DatasetMode::UtilityTest)?;
    let v = validate_dataset(d, ACTIVITY_TOL);
    if let Some(first) = v.first() {
        return Err(Error::InvalidInput(format!(
            "{} invalid observation(s); first at t = {}: {:?} (residual {:.3e})",
            v.len(),
            first.index,
            first.kind,
            first.magnitude
        )));
    }
    Ok(())
}

/// Generalized Axiom of Revealed Preference via Warshall's closure.
pub fn garp_check(d: &Dataset, tol: f64) -> Result<GarpResult> {
    require_valid(d)?;
    Ok(garp_from_costs(&d.cross_values(), tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReconstruction {
    pub levels: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// `min_t { u_t + lambda_t g_t(beta) }`
    pub envelope: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AfriatOutcome {
    pub feasibility: FeasibilityResult,
    pub reconstruction: Option<UtilityReconstruction>,
}

/// Variables `[u_1..u_K, lambda_1..lambda_K]`, rows
/// `u_s - u_t - lambda_t g_t(beta_s) <= 0` for every `t != s`.
pub fn afriat_system(d: &Dataset) -> Result<LinearFeasibilityProblem> {
    let k = d.horizon();
    let cost = d.cross_values();
    let mut p = LinearFeasibilityProblem::new(2 * k, vec![LP_FLOOR; 2 * k])?;
    for t in 0..k {
        for s in 0..k {
            if s == t {
                continue;
            }
            let mut row = vec![0.0; 2 * k];
            row[s] += 1.0;
            row[t] -= 1.0;
            row[k + t] = -cost[t][s];
            p.push(row, Sense::Le, 0.0)?;
        }
    }
    if k == 1 {
        p.push(vec![0.0, 0.0], Sense::Le, 0.0)?;
    }
    Ok(p)
}

/// The min-envelope built from a witness `[u.., lambda..]` of [`afriat_system`].
pub fn reconstruction_from_witness(d: &Dataset, witness: &[f64]) -> Result<UtilityReconstruction> {
    let k = d.horizon();
    if witness.len() != 2 * k {
        return Err(Error::DimensionMismatch {
            context: "Afriat witness".into(),
            expected: 2 * k,
            found: witness.len(),
        });
    }
    let levels = witness[..k].to_vec();
    let multipliers = witness[k..].to_vec();
    let pieces = (0..k)
        .map(|t| EnvelopePiece {
            level: levels[t],
            multiplier: multipliers[t],
            reference: 0.0,
            anchor: Some(d.response(t).to_vec()),
            base: d.function(t).clone(),
        })
        .collect();
    Ok(UtilityReconstruction {
        levels,
        multipliers,
        envelope: FunctionSpec::Envelope {
            mode: EnvelopeMode::Min,
            pieces,
        },
    })
}

/// Solves the Afriat inequalities; on success also returns the envelope
/// utility that rationalizes the data.
pub fn afriat_test(d: &Dataset) -> Result<AfriatOutcome> {
    require_valid(d)?;
    let p = afriat_system(d)?;
    let feasibility = solve_feasibility(&p)?;
    let reconstruction = match &feasibility.witness {
        Some(w) => Some(reconstruction_from_witness(d, w)?),
        None => None,
    };
    Ok(AfriatOutcome {
        feasibility,
        reconstruction,
    })
}

fn utility_multipliers(d: &Dataset, u_true: &FunctionSpec) -> Result<Vec<Multiplier>> {
    (0..d.horizon())
        .map(|t| {
            let b = d.response(t);
            kkt_multiplier_at(&u_true.gradient(b), &d.function(t).gradient(b), b).map_err(|e| e.at(t))
        })
        .collect()
}

/// `u_best(beta) = min_t { u(beta_t) + lambda_t g_t(beta) }` with the
/// multipliers read off the true utility's gradients.
pub fn best_utility_estimate(d: &Dataset, u_true: &FunctionSpec) -> Result<FunctionSpec> {
    d.require_mode(DatasetMode::UtilityTest)?;
    let lambdas = utility_multipliers(d, u_true)?;
    let pieces = (0..d.horizon())
        .map(|t| EnvelopePiece {
            level: u_true.value(d.response(t)),
            multiplier: lambdas[t].value,
            reference: 0.0,
            anchor: Some(d.response(t).to_vec()),
            base: d.function(t).clone(),
        })
        .collect();
    Ok(FunctionSpec::Envelope {
        mode: EnvelopeMode::Min,
        pieces,
    })
}

/// `psi_u = max_{j != k} u(beta_j) - u(beta_k) - lambda_k g_k(beta_j)`.
/// Nonpositive for exactly rational data; more negative is a stronger pass.
pub fn margin_utility(d: &Dataset, u_true: &FunctionSpec) -> Result<MarginReport> {
    d.require_mode(DatasetMode::UtilityTest)?;
    let k = d.horizon();
    if k < 2 {
        return Err(Error::UndefinedMargin { k });
    }
    let lambdas = utility_multipliers(d, u_true)?;
    let values: Vec<f64> = (0..k).map(|t| u_true.value(d.response(t))).collect();
    let terms = (0..k)
        .map(|j| {
            (0..k)
                .map(|kk| {
                    if j == kk {
                        0.0
                    } else {
                        values[j] - values[kk] - lambdas[kk].value * d.function(kk).value(d.response(j))
                    }
                })
                .collect()
        })
        .collect();
    MarginReport::from_terms(terms, Extremum::Max, &lambdas)
}

/// Axis-aligned integration box.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn unit(m: usize) -> Self {
        Self {
            lower: vec![0.0; m],
            upper: vec![1.0; m],
        }
    }
}

/// Midpoint-rule approximation of `int (u_true - candidate)^2` over `region`
/// with `grid_n` cells per axis. Points where either function is not finite
/// (a log utility on the boundary) are skipped.
pub fn integrated_squared_error(
    candidate: &FunctionSpec,
    u_true: &FunctionSpec,
    region: &Region,
    grid_n: usize,
) -> Result<f64> {
    let m = region.lower.len();
    if region.upper.len() != m {
        return Err(Error::DimensionMismatch {
            context: "integration box".into(),
            expected: m,
            found: region.upper.len(),
        });
    }
    if m == 0 || m > 2 {
        return Err(Error::UnsupportedDimension { m, max: 2 });
    }
    if grid_n == 0 {
        return Err(Error::InvalidInput("grid_n must be positive".into()));
    }
    let h: Vec<f64> = (0..m).map(|i| (region.upper[i] - region.lower[i]) / grid_n as f64).collect();
    let cell: f64 = h.iter().product();
    let ny = if m == 2 { grid_n } else { 1 };
    let mut total = 0.0;
    let mut x = vec![0.0; m];
    for i in 0..grid_n {
        x[0] = region.lower[0] + (i as f64 + 0.5) * h[0];
        for j in 0..ny {
            if m == 2 {
                x[1] = region.lower[1] + (j as f64 + 0.5) * h[1];
            }
            let diff = u_true.value(&x) - candidate.value(&x);
            if diff.is_finite() {
                total += diff * diff * cell;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cobb_douglas_k2() -> Dataset {
        Dataset::from_pairs(
            DatasetMode::UtilityTest,
            vec![
                (FunctionSpec::linear(vec![1.0, 2.0], -1.0), vec![0.5, 0.25]),
                (FunctionSpec::linear(vec![2.0, 1.0], -1.0), vec![0.25, 0.5]),
            ],
        )
        .unwrap()
    }

    fn warp_violation() -> Dataset {
        Dataset::from_pairs(
            DatasetMode::UtilityTest,
            vec![
                (FunctionSpec::linear(vec![2.0, 1.0], -1.0), vec![0.5, 0.0]),
                (FunctionSpec::linear(vec![1.0, 2.0], -1.0), vec![0.0, 0.5]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn garp_examples() {
        assert!(garp_check(&cobb_douglas_k2(), GARP_TOL).unwrap().passes);
        let bad = garp_check(&warp_violation(), GARP_TOL).unwrap();
        assert!(!bad.passes);
        assert_eq!(bad.cycle, Some(vec![0, 1]));
        let single = Dataset::from_pairs(
            DatasetMode::UtilityTest,
            vec![(FunctionSpec::linear(vec![1.0, 1.0], -1.0), vec![1.0, 0.0])],
        )
        .unwrap();
        assert!(garp_check(&single, GARP_TOL).unwrap().passes);
    }

    #[test]
    fn afriat_examples() {
        let ok = afriat_test(&cobb_douglas_k2()).unwrap();
        assert!(ok.feasibility.is_feasible());
        let rec = ok.reconstruction.unwrap();
        for t in 0..2 {
            let b = cobb_douglas_k2().response(t).to_vec();
            assert!((rec.envelope.value(&b) - rec.levels[t]).abs() < 1e-9);
        }
        assert!(!afriat_test(&warp_violation()).unwrap().feasibility.is_feasible());
    }

    #[test]
    fn inactive_dataset_rejected() {
        let d = Dataset::from_pairs(
            DatasetMode::UtilityTest,
            vec![(FunctionSpec::linear(vec![1.0, 1.0], -1.0), vec![0.3, 0.3])],
        )
        .unwrap();
        assert!(matches!(garp_check(&d, GARP_TOL), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cobb_douglas_margin_and_estimate() {
        let d = cobb_douglas_k2();
        let u = FunctionSpec::cobb_douglas(vec![0.5, 0.5]);
        let est = best_utility_estimate(&d, &u).unwrap();
        let target = (1.0f64 / 8.0).sqrt();
        assert!((est.value(d.response(0)) - target).abs() < 1e-15);
        // grad u at (1/2, 1/4) = (1/(2 sqrt 2), 1/sqrt 2) = lambda (1, 2)
        let lambda = 1.0 / (2.0 * 2f64.sqrt());
        let FunctionSpec::Envelope { pieces, .. } = &est else { panic!() };
        assert!((pieces[0].multiplier - lambda).abs() < 1e-15);
        let m = margin_utility(&d, &u).unwrap();
        // u(b_1) = u(b_2) and g_k(b_j) = 1/4 for j != k
        assert!((m.value + lambda * 0.25).abs() < 1e-15);
        assert!(m.value <= 0.0);
    }

    #[test]
    fn ise_of_constant_offset() {
        let u = FunctionSpec::linear(vec![1.0, 2.0], 0.0);
        let shifted = FunctionSpec::linear(vec![1.0, 2.0], 1.0);
        let r = Region::unit(2);
        assert_eq!(integrated_squared_error(&u, &u, &r, 20).unwrap(), 0.0);
        assert!((integrated_squared_error(&shifted, &u, &r, 50).unwrap() - 1.0).abs() < 1e-12);
    }
}
