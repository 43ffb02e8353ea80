//! Cognitive radar case study: the radar picks per-channel transmit powers
//! `beta` maximizing `SINR = beta'Q beta / (beta'P_t beta + zeta)` under a
//! linear power budget `p'beta <= gamma_t`, and masks its budget from an
//! adversary observing `(P_t, beta_t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::iirl::{violation_curve, MaskingOptions, MaskingProblem, Scenario};
use crate::linalg::{dot, SquareMatrix};
use crate::optim::{maximize_concave, AscentOptions, OptimumPoint};

const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarScenario {
    pub q: SquareMatrix,
    /// Interference matrix `P(alpha_t)` of every probe.
    pub interference: Vec<SquareMatrix>,
    pub zeta: f64,
    pub price: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl RadarScenario {
    pub fn new(
        q: SquareMatrix,
        interference: Vec<SquareMatrix>,
        zeta: f64,
        price: Vec<f64>,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        let m = q.dim();
        if !(zeta > 0.0) {
            return Err(Error::InvalidInput(format!("noise power must be positive, got {zeta}")));
        }
        if price.len() != m || price.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput("prices must be positive with one per channel".into()));
        }
        if interference.len() != thresholds.len() || interference.is_empty() {
            return Err(Error::InvalidInput("need one interference matrix per threshold".into()));
        }
        if !q.is_symmetric(1e-12) || q.cholesky().is_none() {
            return Err(Error::InvalidInput("signal matrix must be symmetric positive definite".into()));
        }
        for (t, p) in interference.iter().enumerate() {
            if p.dim() != m || !p.is_symmetric(1e-12) || p.cholesky().is_none() {
                return Err(Error::InvalidInput(format!(
                    "interference matrix {t} must be {m}x{m} symmetric positive definite"
                )));
            }
        }
        Ok(Self {
            q,
            interference,
            zeta,
            price,
            thresholds,
        })
    }

    pub fn horizon(&self) -> usize {
        self.thresholds.len()
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn utility(&self, t: usize) -> FunctionSpec {
        FunctionSpec::quadratic_fractional(self.q.clone(), self.interference[t].clone(), self.zeta)
    }

    pub fn budget(&self) -> FunctionSpec {
        FunctionSpec::linear(self.price.clone(), 0.0)
    }

    pub fn to_scenario(&self, eta: Option<f64>) -> Result<Scenario> {
        Scenario::new(
            (0..self.horizon()).map(|t| self.utility(t)).collect(),
            self.budget(),
            self.thresholds.clone(),
            eta,
        )
    }
}

pub fn sinr(q: &SquareMatrix, p: &SquareMatrix, zeta: f64, beta: &[f64]) -> f64 {
    q.quad_form(beta) / (p.quad_form(beta) + zeta)
}

/// Best waveform for probe `t` under budget `gamma`.
pub fn radar_response(s: &RadarScenario, t: usize, gamma: f64, opts: &AscentOptions) -> Result<OptimumPoint> {
    if t >= s.horizon() {
        return Err(Error::InvalidInput(format!("probe index {t} out of range")));
    }
    maximize_concave(&s.utility(t), &s.budget(), gamma, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    pub k: usize,
    pub m: usize,
    pub q_diag: f64,
    pub interference_diag: (f64, f64),
    pub interference_off: f64,
    pub price: (f64, f64),
    pub zeta: f64,
    pub thresholds: (f64, f64),
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            k: 100,
            m: 6,
            q_diag: 5.0,
            interference_diag: (1.0, 3.0),
            interference_off: -0.05,
            price: (1.0, 4.0),
            zeta: 1.0,
            // Power budgets well above the noise floor. At budgets of order one
            // the SINR is still convex along rays and naive responses fail the
            // strategy test outright, leaving nothing to mask.
            thresholds: (20.0, 40.0),
        }
    }
}

pub fn sample_scenario<R: Rng + ?Sized>(config: &RadarConfig, rng: &mut R) -> Result<RadarScenario> {
    let (k, m) = (config.k, config.m);
    if k == 0 || m == 0 {
        return Err(Error::InvalidInput("radar scenario needs K >= 1 and m >= 1".into()));
    }
    let q = SquareMatrix::identity(m).scaled(config.q_diag);
    let mut interference = Vec::with_capacity(k);
    for _ in 0..k {
        let mut ok = None;
        for _ in 0..MAX_RESAMPLES {
            let mut p = SquareMatrix::zeros(m);
            for i in 0..m {
                for j in 0..m {
                    let v = if i == j {
                        rng.random_range(config.interference_diag.0..config.interference_diag.1)
                    } else {
                        config.interference_off
                    };
                    p.set(i, j, v);
                }
            }
            if p.cholesky().is_some() {
                ok = Some(p);
                break;
            }
        }
        interference.push(ok.ok_or_else(|| {
            Error::InvalidInput(format!(
                "no positive definite interference matrix after {MAX_RESAMPLES} draws"
            ))
        })?);
    }
    let price = (0..m).map(|_| rng.random_range(config.price.0..config.price.1)).collect();
    let thresholds = (0..k)
        .map(|_| rng.random_range(config.thresholds.0..config.thresholds.1))
        .collect();
    RadarScenario::new(q, interference, config.zeta, price, thresholds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// `(t, beta, beta')` with `beta' >= beta` but lower SINR.
    pub violations: Vec<(usize, Vec<f64>, Vec<f64>)>,
}

impl MonotonicityReport {
    pub fn flagged(&self) -> bool {
        !self.violations.is_empty()
    }
}

/// Draws `pairs` random `beta <= beta'` inside the loosest budget box for
/// every probe and records where the SINR decreases.
pub fn monotonicity_check<R: Rng + ?Sized>(s: &RadarScenario, pairs: usize, rng: &mut R) -> MonotonicityReport {
    let gmax = s.thresholds.iter().cloned().fold(0.0, f64::max);
    let mut violations = Vec::new();
    for t in 0..s.horizon() {
        let p = &s.interference[t];
        for _ in 0..pairs {
            let b: Vec<f64> = s.price.iter().map(|c| gmax / c * rng.random::<f64>()).collect();
            let b2: Vec<f64> = b
                .iter()
                .zip(&s.price)
                .map(|(v, c)| v + (gmax / c - v) * rng.random::<f64>())
                .collect();
            if sinr(&s.q, p, s.zeta, &b2) < sinr(&s.q, p, s.zeta, &b) - 1e-12 {
                violations.push((t, b, b2));
            }
        }
    }
    MonotonicityReport { pairs, violations }
}

/// `start, start + step, ..., stop` (inclusive up to rounding).
pub fn eta_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(Error::InvalidInput(format!("bad eta grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig2Config {
    pub radar: RadarConfig,
    pub seed: u64,
    pub etas: Vec<f64>,
    pub masking: MaskingOptions,
    pub monotonicity_pairs: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            radar: RadarConfig::default(),
            seed: 0,
            etas: eta_grid(0.05, 0.95, 0.05).expect("static grid"),
            masking: MaskingOptions::default(),
            monotonicity_pairs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    pub eta: f64,
    /// `None` where masking failed.
    pub violation_norm: Option<f64>,
    pub psi_true: f64,
    pub psi_masked: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Result {
    pub scenario: RadarScenario,
    pub monotonicity: MonotonicityReport,
    pub psi_true: f64,
    /// The `eta = 0` row first, then one row per configured `eta`.
    pub rows: Vec<Fig2Row>,
    /// Over the configured grid only.
    pub spearman: f64,
}

impl Fig2Result {
    pub fn series(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.violation_norm.map(|v| (r.eta, v)))
            .collect()
    }
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx).powi(2);
        syy += (ry[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Samples a radar scenario and traces the masking violation over `etas`.
pub fn run_fig2_experiment(config: &Fig2Config) -> Result<Fig2Result> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scenario = sample_scenario(&config.radar, &mut rng)?;
    let monotonicity = monotonicity_check(&scenario, config.monotonicity_pairs, &mut rng);
    let s = scenario.to_scenario(None)?;
    let problem = MaskingProblem::from_scenario(&s, 0.0, config.masking.clone())?;
    let (naive, curve) = violation_curve(&problem, &config.etas)?;
    let mut rows = vec![Fig2Row {
        eta: 0.0,
        violation_norm: Some(0.0),
        psi_true: naive.psi_true,
        psi_masked: Some(naive.psi_true),
        error: None,
    }];
    for c in curve {
        rows.push(match c.result {
            Ok(r) => Fig2Row {
                eta: c.eta,
                violation_norm: Some(r.violation_norm),
                psi_true: r.psi_true,
                psi_masked: Some(r.psi_masked),
                error: None,
            },
            Err(e) => Fig2Row {
                eta: c.eta,
                violation_norm: None,
                psi_true: naive.psi_true,
                psi_masked: None,
                error: Some(e),
            },
        });
    }
    let pts: Vec<(f64, f64)> = rows[1..]
        .iter()
        .filter_map(|r| r.violation_norm.map(|v| (r.eta, v)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let spearman = if x.len() >= 2 { spearman(&x, &y) } else { f64::NAN };
    Ok(Fig2Result {
        scenario,
        monotonicity,
        psi_true: naive.psi_true,
        rows,
        spearman,
    })
}

/// Helper for callers that only need `p'beta`.
pub fn power_cost(s: &RadarScenario, beta: &[f64]) -> f64 {
    dot(&s.price, beta)
}
