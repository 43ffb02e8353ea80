//! How often does masking against noisy utilities fail to reach the target
//! margin, and how does that compare with the analytic bound
//! `Phi(2 L Delta kappa / sqrt(tr Sigma))^K`?

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::iirl::{mask_with_naive, naive_responses, MaskingProblem, MaskingResult};
use crate::irl_strategy::margin_strategy_thresholds;
use crate::linalg::{norm, sub, SquareMatrix};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Multiplier applied to the empirical maxima of Delta and kappa.
pub const SAFETY: f64 = 1.1;
/// Largest tolerated share of failed trials.
pub const MAX_INVALID_SHARE: f64 = 0.1;

/// Zero-mean Gaussian utility noise `delta ~ N(0, Sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    covariance: SquareMatrix,
    factor: SquareMatrix,
    isotropic: bool,
}

impl NoiseModel {
    pub fn isotropic(m: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!("noise variance must be >= 0, got {sigma2}")));
        }
        let cov = SquareMatrix::diagonal(&vec![sigma2; m]);
        let mut n = Self::new(cov)?;
        n.isotropic = true;
        Ok(n)
    }

    pub fn new(covariance: SquareMatrix) -> Result<Self> {
        if !covariance.is_finite() || !covariance.is_symmetric(1e-12) {
            return Err(Error::InvalidInput("noise covariance must be finite and symmetric".into()));
        }
        let factor = covariance
            .psd_factor(1e-12)
            .ok_or_else(|| Error::InvalidInput("noise covariance is not positive semidefinite".into()))?;
        let n = covariance.dim();
        let isotropic = (0..n).all(|i| {
            (0..n).all(|j| {
                let v = covariance.get(i, j);
                if i == j {
                    v == covariance.get(0, 0)
                } else {
                    v == 0.0
                }
            })
        });
        Ok(Self {
            covariance,
            factor,
            isotropic,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }

    pub fn covariance(&self) -> &SquareMatrix {
        &self.covariance
    }

    /// The bound's variance argument is exact only for `sigma^2 I`.
    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    pub fn sample(&self, g: &mut Gaussian) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| g.next()).collect();
        self.factor.mul_vec(&z)
    }
}

/// Box-Muller standard normals from a ChaCha stream.
pub struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    /// Stream `stream` of the generator seeded with `seed`.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * th.sin());
        r * th.cos()
    }
}

/// The `K` noise vectors of trial `trial`.
pub fn draw_noise(noise: &NoiseModel, seed: u64, trial: u64, k: usize) -> Vec<Vec<f64>> {
    let mut g = Gaussian::new(seed, trial);
    (0..k).map(|_| noise.sample(&mut g)).collect()
}

/// `u(beta) + delta'beta`
pub fn perturb_utility(u: &FunctionSpec, delta: &[f64]) -> FunctionSpec {
    FunctionSpec::AffineShift {
        base: Box::new(u.clone()),
        linear: delta.to_vec(),
        offset: 0.0,
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Wilson score interval for `successes` out of `n` at quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `Phi(2 L Delta kappa / sqrt(tr Sigma))^K`
pub fn analytic_bound(l: f64, delta_max: f64, kappa: f64, trace_sigma: f64, k: usize) -> Result<f64> {
    for (name, v) in [("L", l), ("Delta_max", delta_max), ("kappa", kappa)] {
        if !(v >= 0.0) {
            return Err(Error::InvalidInput(format!("{name} must be nonnegative, got {v}")));
        }
    }
    if k == 0 {
        return Err(Error::InvalidInput("horizon K must be >= 1".into()));
    }
    if !(trace_sigma > 0.0) {
        return Err(Error::ZeroNoiseTrace);
    }
    let arg = 2.0 * l * delta_max * kappa / trace_sigma.sqrt();
    Ok(normal_cdf(arg).powi(k as i32))
}

/// Which event counts as a masking error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorForm {
    /// Mask against the noisy utilities, then score the masked thresholds and
    /// responses with the true utilities.
    Pipeline,
    /// Score the noiseless masking solution with the noisy utilities.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyOptions {
    pub n_trials: usize,
    pub seed: u64,
    pub form: ErrorForm,
    /// Point pairs per utility when estimating the smoothness constant.
    pub lipschitz_samples: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            n_trials: 1000,
            seed: 0,
            form: ErrorForm::Pipeline,
            lipschitz_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// Gradient-Lipschitz (smoothness) constant of the utilities.
    pub l_hat: f64,
    pub delta_max_hat: f64,
    pub kappa_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub valid: bool,
    pub exceed: bool,
    /// Masked margin scored per the chosen [`ErrorForm`].
    pub margin: f64,
    /// `max eps - min eps` over the noisy pair terms.
    pub delta: f64,
    pub kappa: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseStudy {
    pub n_trials: usize,
    pub valid_trials: usize,
    pub exceed_count: usize,
    pub p_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Empirical maxima.
    pub raw: Constants,
    /// Maxima times [`SAFETY`] (the smoothness constant is not inflated).
    pub constants: Constants,
    pub bound: f64,
    /// Set for anisotropic noise, where the bound is only heuristic.
    pub bound_heuristic: bool,
    pub psi_true: f64,
    pub target: f64,
    pub outcomes: Vec<TrialOutcome>,
}

/// Largest `|du_t(x) - du_t(y)| / |x - y|` over random pairs in the box
/// spanned by the loosest budget.
pub fn estimate_lipschitz(p: &MaskingProblem, n_samples: usize, seed: u64) -> Result<f64> {
    let m = p
        .g()
        .dim()
        .ok_or_else(|| Error::InvalidInput("budget has no fixed dimension".into()))?;
    let gmax = p.thresholds().iter().cloned().fold(0.0, f64::max);
    let ext: Vec<f64> = match p.g() {
        FunctionSpec::Linear { coeffs, offset } => coeffs.iter().map(|a| (gmax - offset) / a).collect(),
        _ => vec![gmax.max(1.0); m],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for u in &p.utilities {
        for _ in 0..n_samples {
            let x: Vec<f64> = ext.iter().map(|e| e * rng.random::<f64>()).collect();
            let y: Vec<f64> = ext.iter().map(|e| e * rng.random::<f64>()).collect();
            let d = norm(&sub(&x, &y));
            if d == 0.0 {
                continue;
            }
            let r = norm(&sub(&u.gradient(&x), &u.gradient(&y))) / d;
            if r.is_finite() {
                best = best.max(r);
            }
        }
    }
    Ok(best)
}

/// `[max_k |du_k(b_k)|^2 / |dg(b_k)|] / [min_{j != k} |du_k(b_k) - du_k(b_j)|^2]`
fn kappa(utilities: &[FunctionSpec], g: &FunctionSpec, responses: &[Vec<f64>]) -> Result<f64> {
    let k = responses.len();
    let mut num = 0.0f64;
    let mut den = f64::INFINITY;
    let mut arg = (0, 0);
    for kk in 0..k {
        let du = utilities[kk].gradient(&responses[kk]);
        let dg = norm(&g.gradient(&responses[kk]));
        if dg == 0.0 {
            return Err(Error::DegenerateGradient { index: Some(kk) });
        }
        num = num.max(norm(&du).powi(2) / dg);
        for j in 0..k {
            if j == kk {
                continue;
            }
            let d = norm(&sub(&du, &utilities[kk].gradient(&responses[j]))).powi(2);
            if d < den {
                den = d;
                arg = (j, kk);
            }
        }
    }
    if !(den > 0.0) {
        return Err(Error::KappaDegenerate { j: arg.0, k: arg.1 });
    }
    Ok(num / den)
}

fn spread(terms: &[Vec<f64>]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (j, row) in terms.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            if j != k {
                hi = hi.max(*v);
                lo = lo.min(*v);
            }
        }
    }
    hi - lo
}

struct Baseline {
    psi_true: f64,
    target: f64,
    noiseless: MaskingResult,
}

fn baseline(p: &MaskingProblem) -> Result<Baseline> {
    let naive = naive_responses(p)?;
    let noiseless = mask_with_naive(p, &naive)?;
    Ok(Baseline {
        psi_true: naive.psi_true,
        target: (1.0 - p.eta) * naive.psi_true,
        noiseless,
    })
}

fn run_trial(p: &MaskingProblem, noise: &NoiseModel, opts: &StudyOptions, base: &Baseline, trial: usize) -> Result<TrialOutcome> {
    let deltas = draw_noise(noise, opts.seed, trial as u64, p.horizon());
    let noisy: Vec<FunctionSpec> = p
        .utilities
        .iter()
        .zip(&deltas)
        .map(|(u, d)| perturb_utility(u, d))
        .collect();
    let (thresholds, responses, margin) = match opts.form {
        ErrorForm::Pipeline => {
            let q = MaskingProblem {
                utilities: noisy.clone(),
                ..p.clone()
            };
            let naive = naive_responses(&q)?;
            let r = mask_with_naive(&q, &naive)?;
            let scored = margin_strategy_thresholds(&r.responses, &p.utilities, &r.thresholds, p.g())?;
            (r.thresholds, r.responses, scored.value)
        }
        ErrorForm::Literal => {
            let r = &base.noiseless;
            let scored = margin_strategy_thresholds(&r.responses, &noisy, &r.thresholds, p.g())?;
            (r.thresholds.clone(), r.responses.clone(), scored.value)
        }
    };
    let eps = margin_strategy_thresholds(&responses, &noisy, &thresholds, p.g())?;
    Ok(TrialOutcome {
        trial,
        valid: true,
        exceed: margin >= base.target,
        margin,
        delta: spread(&eps.pair_terms),
        kappa: kappa(&noisy, p.g(), &responses)?,
        error: None,
    })
}

fn run_trials(p: &MaskingProblem, noise: &NoiseModel, opts: &StudyOptions, base: &Baseline) -> Vec<TrialOutcome> {
    (0..opts.n_trials)
        .into_par_iter()
        .map(|trial| {
            run_trial(p, noise, opts, base, trial).unwrap_or_else(|e| TrialOutcome {
                trial,
                valid: false,
                exceed: false,
                margin: f64::NAN,
                delta: f64::NAN,
                kappa: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

fn check_inputs(p: &MaskingProblem, noise: &NoiseModel, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let m = p.g().dim().unwrap_or(0);
    if noise.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "noise covariance".into(),
            expected: m,
            found: noise.dim(),
        });
    }
    Ok(())
}

fn maxima(outcomes: &[TrialOutcome]) -> (f64, f64) {
    outcomes
        .iter()
        .filter(|o| o.valid)
        .fold((0.0f64, 0.0f64), |(d, k), o| (d.max(o.delta), k.max(o.kappa)))
}

/// Empirical `(L, Delta_max, kappa)` from `n_samples` noisy masking runs.
pub fn estimate_constants(p: &MaskingProblem, noise: &NoiseModel, n_samples: usize, seed: u64) -> Result<Constants> {
    check_inputs(p, noise, n_samples)?;
    let opts = StudyOptions {
        n_trials: n_samples,
        seed,
        ..StudyOptions::default()
    };
    let base = baseline(p)?;
    let outcomes = run_trials(p, noise, &opts, &base);
    if let Some(e) = outcomes.iter().find_map(|o| o.error.clone()) {
        return Err(Error::InvalidInput(format!("noisy masking run failed: {e}")));
    }
    let (delta_max_hat, kappa_hat) = maxima(&outcomes);
    Ok(Constants {
        l_hat: estimate_lipschitz(p, opts.lipschitz_samples, seed)?,
        delta_max_hat,
        kappa_hat,
    })
}

/// Monte Carlo estimate of the masking error probability together with
/// the constants and the analytic bound they imply.
pub fn empirical_error_probability(p: &MaskingProblem, noise: &NoiseModel, opts: &StudyOptions) -> Result<NoiseStudy> {
    check_inputs(p, noise, opts.n_trials)?;
    let base = baseline(p)?;
    let outcomes = run_trials(p, noise, opts, &base);
    let valid = outcomes.iter().filter(|o| o.valid).count();
    let invalid = opts.n_trials - valid;
    if invalid as f64 > MAX_INVALID_SHARE * opts.n_trials as f64 {
        return Err(Error::UnreliableStudy {
            invalid,
            total: opts.n_trials,
        });
    }
    let exceed_count = outcomes.iter().filter(|o| o.valid && o.exceed).count();
    let p_err = exceed_count as f64 / valid as f64;
    let (ci_low, ci_high) = wilson_interval(exceed_count, valid, Z95);
    let (delta_max_hat, kappa_hat) = maxima(&outcomes);
    let raw = Constants {
        l_hat: estimate_lipschitz(p, opts.lipschitz_samples, opts.seed)?,
        delta_max_hat,
        kappa_hat,
    };
    let constants = Constants {
        l_hat: raw.l_hat,
        delta_max_hat: raw.delta_max_hat * SAFETY,
        kappa_hat: raw.kappa_hat * SAFETY,
    };
    let bound = analytic_bound(
        constants.l_hat,
        constants.delta_max_hat,
        constants.kappa_hat,
        noise.trace(),
        p.horizon(),
    )?;
    Ok(NoiseStudy {
        n_trials: opts.n_trials,
        valid_trials: valid,
        exceed_count,
        p_err,
        ci_low,
        ci_high,
        raw,
        constants,
        bound,
        bound_heuristic: !noise.is_isotropic(),
        psi_true: base.psi_true,
        target: base.target,
        outcomes,
    })
}
