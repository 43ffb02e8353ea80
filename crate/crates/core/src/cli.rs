//! `iirl` command-line front end. Exit codes: 0 success, 1 domain error,
//! 2 usage error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{validate_dataset, Dataset, DatasetMode, ACTIVITY_TOL};
use crate::error::Error;
use crate::iirl::{violation_curve, MaskingOptions, MaskingProblem};
use crate::io;
use crate::irl_strategy::{garp_transformed, margin_strategy, strategy_feasibility_test};
use crate::irl_utility::{afriat_test, garp_check, margin_utility, GARP_TOL};
use crate::plot::{emit_plot, PlotLabels};
use crate::radar::{eta_grid, run_fig2_experiment, sample_scenario, Fig2Config, RadarConfig};
use crate::report::{fmt_f64, fmt_opt, fmt_vec, CsvReport};
use crate::sample_complexity::{empirical_error_probability, ErrorForm, NoiseModel, StudyOptions};
use crate::synth;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "iirl", version, about = "Revealed-preference IRL and strategy masking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GenerateKind {
    CobbDouglas,
    LogLinear,
    Irrational,
    StrategyVertex,
    StrategyIrrational,
    QuadraticScenario,
    RadarScenario,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormArg {
    Pipeline,
    Literal,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test utility-maximization data (GARP and Afriat) and report the margin.
    IrlUtility {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        u_true: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test strategy data against some budget and report the margin.
    IrlStrategy {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        g_true: Option<PathBuf>,
        /// Comma-separated thresholds; defaults to `g_true(beta_t)`.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask a scenario's budget for one extent or a grid of extents.
    Mask {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, conflicts_with = "eta_grid")]
        eta: Option<f64>,
        /// `start:stop:step`
        #[arg(long)]
        eta_grid: Option<String>,
        /// JSON masking options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo masking error probability against the analytic bound.
    Bound {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, value_enum, default_value = "pipeline")]
        form: FormArg,
        /// JSON masking options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Violation-versus-extent curve on a sampled radar scenario.
    RadarFig2 {
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "0.05:0.95:0.05")]
        eta_grid: String,
        /// JSON experiment configuration; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a synthetic dataset or scenario.
    Generate {
        #[arg(long, value_enum)]
        kind: GenerateKind,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the ground-truth utility or budget.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Check a dataset or scenario file.
    Validate {
        #[arg(long, required_unless_present = "scenario")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

/// An error tagged with the operation that raised it.
struct Failure {
    op: &'static str,
    error: Error,
}

type Outcome = std::result::Result<(), Failure>;

trait Ctx<T> {
    fn ctx(self, op: &'static str) -> std::result::Result<T, Failure>;
}

impl<T> Ctx<T> for crate::Result<T> {
    fn ctx(self, op: &'static str) -> std::result::Result<T, Failure> {
        self.map_err(|error| Failure { op, error })
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error [{}]: {}", f.op, f.error);
            EXIT_DOMAIN
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::IrlUtility { dataset, u_true, out } => irl_utility(&dataset, u_true.as_deref(), &out),
        Command::IrlStrategy {
            dataset,
            g_true,
            thresholds,
            out,
        } => irl_strategy(&dataset, g_true.as_deref(), thresholds, &out),
        Command::Mask {
            scenario,
            eta,
            eta_grid,
            config,
            out,
        } => mask(&scenario, eta, eta_grid.as_deref(), config.as_deref(), &out),
        Command::Bound {
            scenario,
            sigma2,
            trials,
            seed,
            eta,
            form,
            config,
            out,
        } => bound(&scenario, sigma2, trials, seed, eta, form, config.as_deref(), &out),
        Command::RadarFig2 {
            k,
            m,
            seed,
            eta_grid,
            config,
            out_dir,
        } => radar_fig2(k, m, seed, &eta_grid, config.as_deref(), &out_dir),
        Command::Generate {
            kind,
            k,
            m,
            seed,
            out,
            truth_out,
        } => generate(kind, k, m, seed, &out, truth_out.as_deref()),
        Command::Validate { dataset, scenario } => validate(dataset.as_deref(), scenario.as_deref()),
    }
}

fn parse_grid(s: &str) -> crate::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidInput(format!("eta grid must be start:stop:step, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<crate::Result<_>>()?;
    eta_grid(v[0], v[1], v[2])
}

fn irl_utility(dataset: &Path, u_true: Option<&Path>, out: &Path) -> Outcome {
    let d = io::load_dataset(dataset).ctx("io::load_dataset")?;
    let garp = garp_check(&d, GARP_TOL).ctx("irl_utility::garp_check")?;
    let afriat = afriat_test(&d).ctx("irl_utility::afriat_test")?;
    let mut r = CsvReport::new("irl-utility", &["record", "t", "s", "value"]);
    r.seed(None);
    r.comment(format!("dataset: {}", dataset.display()));
    let cell = |x: usize| x.to_string();
    r.row(vec!["garp_pass".into(), String::new(), String::new(), cell(garp.passes as usize)]);
    r.row(vec![
        "afriat_feasible".into(),
        String::new(),
        String::new(),
        cell(afriat.feasibility.is_feasible() as usize),
    ]);
    if let Some(c) = &garp.cycle {
        let path = c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        r.row(vec!["garp_cycle".into(), String::new(), String::new(), path]);
    }
    if let Some(rec) = &afriat.reconstruction {
        for t in 0..d.horizon() {
            r.row(vec!["level".into(), cell(t), String::new(), fmt_f64(rec.levels[t])]);
            r.row(vec!["multiplier".into(), cell(t), String::new(), fmt_f64(rec.multipliers[t])]);
        }
    }
    if let Some(path) = u_true {
        let u = io::load_function(path).ctx("io::load_function")?;
        let m = margin_utility(&d, &u).ctx("irl_utility::margin_utility")?;
        r.row(vec!["psi_u".into(), cell(m.arg.0), cell(m.arg.1), fmt_f64(m.value)]);
        for (t, row) in m.pair_terms.iter().enumerate() {
            for (s, v) in row.iter().enumerate() {
                if s != t {
                    r.row(vec!["pair".into(), cell(t), cell(s), fmt_f64(*v)]);
                }
            }
        }
    }
    r.write(out).ctx("report::write")?;
    println!(
        "garp: {}, afriat: {}",
        if garp.passes { "pass" } else { "fail" },
        if afriat.feasibility.is_feasible() { "feasible" } else { "infeasible" }
    );
    Ok(())
}

fn irl_strategy(dataset: &Path, g_true: Option<&Path>, thresholds: Option<Vec<f64>>, out: &Path) -> Outcome {
    let d = io::load_dataset(dataset).ctx("io::load_dataset")?;
    let garp = garp_transformed(&d, GARP_TOL).ctx("irl_strategy::garp_transformed")?;
    let test = strategy_feasibility_test(&d).ctx("irl_strategy::strategy_feasibility_test")?;
    let mut r = CsvReport::new("irl-strategy", &["record", "t", "s", "value"]);
    r.seed(None);
    r.comment(format!("dataset: {}", dataset.display()));
    let cell = |x: usize| x.to_string();
    r.row(vec!["garp_pass".into(), String::new(), String::new(), cell(garp.passes as usize)]);
    r.row(vec![
        "strategy_feasible".into(),
        String::new(),
        String::new(),
        cell(test.feasibility.is_feasible() as usize),
    ]);
    if let Some(rec) = &test.reconstruction {
        for t in 0..d.horizon() {
            r.row(vec!["threshold".into(), cell(t), String::new(), fmt_f64(rec.thresholds[t])]);
            r.row(vec!["multiplier".into(), cell(t), String::new(), fmt_f64(rec.multipliers[t])]);
        }
    }
    if let Some(path) = g_true {
        let g = io::load_function(path).ctx("io::load_function")?;
        let responses: Vec<Vec<f64>> = d.entries().iter().map(|e| e.response.to_vec()).collect();
        let utilities: Vec<_> = d.entries().iter().map(|e| e.function.clone()).collect();
        let th = thresholds.unwrap_or_else(|| responses.iter().map(|b| g.value(b)).collect());
        let m = margin_strategy(&responses, &utilities, &th, &g).ctx("irl_strategy::margin_strategy")?;
        r.row(vec![
            "psi_g".into(),
            cell(m.g_form.arg.0),
            cell(m.g_form.arg.1),
            fmt_f64(m.g_form.value),
        ]);
        r.row(vec![
            "psi_g_thresholds".into(),
            cell(m.threshold_form.arg.0),
            cell(m.threshold_form.arg.1),
            fmt_f64(m.threshold_form.value),
        ]);
        for (t, row) in m.g_form.pair_terms.iter().enumerate() {
            for (s, v) in row.iter().enumerate() {
                if s != t {
                    r.row(vec!["pair".into(), cell(t), cell(s), fmt_f64(*v)]);
                }
            }
        }
    }
    r.write(out).ctx("report::write")?;
    println!(
        "transformed garp: {}, strategy system: {}",
        if garp.passes { "pass" } else { "fail" },
        if test.feasibility.is_feasible() { "feasible" } else { "infeasible" }
    );
    Ok(())
}

fn load_options<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> std::result::Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(Error::from).ctx("cli::load_config")?;
            io::from_json_str(&text).ctx("cli::load_config")
        }
    }
}

fn mask(scenario: &Path, eta: Option<f64>, grid: Option<&str>, config: Option<&Path>, out: &Path) -> Outcome {
    let s = io::load_scenario(scenario).ctx("io::load_scenario")?;
    let options: MaskingOptions = load_options(config)?;
    let etas = match (eta, grid) {
        (Some(e), _) => vec![e],
        (None, Some(g)) => parse_grid(g).ctx("cli::parse_grid")?,
        (None, None) => match s.eta {
            Some(e) => vec![e],
            None => {
                return Err(Failure {
                    op: "cli::mask",
                    error: Error::InvalidInput("give --eta, --eta-grid or an eta in the scenario".into()),
                })
            }
        },
    };
    let p = MaskingProblem::from_scenario(&s, etas[0], options.clone()).ctx("iirl::MaskingProblem")?;
    let (naive, curve) = violation_curve(&p, &etas).ctx("iirl::violation_curve")?;
    let mut r = CsvReport::new(
        "mask",
        &[
            "eta",
            "gamma",
            "gamma_star",
            "violation_norm",
            "psi_true",
            "psi_masked",
            "feasible",
            "degenerate",
            "error",
        ],
    );
    r.seed(Some(options.inner.seed));
    r.comment(format!("scenario: {}", scenario.display()));
    r.config(&options).ctx("report::config")?;
    let gamma = fmt_vec(p.thresholds());
    for c in &curve {
        match &c.result {
            Ok(m) => r.row(vec![
                fmt_f64(c.eta),
                gamma.clone(),
                fmt_vec(&m.thresholds),
                fmt_f64(m.violation_norm),
                fmt_f64(m.psi_true),
                fmt_f64(m.psi_masked),
                (m.feasible as u8).to_string(),
                (m.degenerate as u8).to_string(),
                String::new(),
            ]),
            Err(e) => r.row(vec![
                fmt_f64(c.eta),
                gamma.clone(),
                String::new(),
                String::new(),
                fmt_f64(naive.psi_true),
                String::new(),
                "0".into(),
                String::new(),
                e.clone(),
            ]),
        };
    }
    r.write(out).ctx("report::write")?;
    println!("psi_true = {}, {} extent(s) written to {}", naive.psi_true, curve.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bound(
    scenario: &Path,
    sigma2: f64,
    trials: usize,
    seed: u64,
    eta: Option<f64>,
    form: FormArg,
    config: Option<&Path>,
    out: &Path,
) -> Outcome {
    let s = io::load_scenario(scenario).ctx("io::load_scenario")?;
    let options: MaskingOptions = load_options(config)?;
    let eta = eta.or(s.eta).unwrap_or(0.5);
    let p = MaskingProblem::from_scenario(&s, eta, options.clone()).ctx("iirl::MaskingProblem")?;
    let noise = NoiseModel::isotropic(s.dim(), sigma2).ctx("sample_complexity::NoiseModel")?;
    let study_opts = StudyOptions {
        n_trials: trials,
        seed,
        form: match form {
            FormArg::Pipeline => ErrorForm::Pipeline,
            FormArg::Literal => ErrorForm::Literal,
        },
        ..StudyOptions::default()
    };
    let study =
        empirical_error_probability(&p, &noise, &study_opts).ctx("sample_complexity::empirical_error_probability")?;
    let cols = [
        "record",
        "trial",
        "valid",
        "exceed",
        "margin",
        "delta",
        "kappa",
        "p_err",
        "ci_low",
        "ci_high",
        "l_hat",
        "delta_max_hat",
        "kappa_hat",
        "bound",
    ];
    let mut r = CsvReport::new("bound", &cols);
    r.seed(Some(seed));
    r.comment(format!("scenario: {}", scenario.display()));
    r.config(&serde_json::json!({
        "sigma2": sigma2,
        "eta": eta,
        "study": study_opts,
        "masking": options,
    }))
    .ctx("report::config")?;
    let blank = || String::new();
    for o in &study.outcomes {
        let mut row = vec![
            "trial".into(),
            o.trial.to_string(),
            (o.valid as u8).to_string(),
            (o.exceed as u8).to_string(),
            fmt_f64(o.margin),
            fmt_f64(o.delta),
            fmt_f64(o.kappa),
        ];
        row.extend((0..7).map(|_| blank()));
        r.row(row);
    }
    let mut summary: Vec<String> = vec!["summary".into()];
    summary.extend((0..6).map(|_| blank()));
    summary.extend([
        fmt_f64(study.p_err),
        fmt_f64(study.ci_low),
        fmt_f64(study.ci_high),
        fmt_f64(study.constants.l_hat),
        fmt_f64(study.constants.delta_max_hat),
        fmt_f64(study.constants.kappa_hat),
        fmt_f64(study.bound),
    ]);
    r.row(summary);
    if study.bound_heuristic {
        r.comment("anisotropic noise: the bound is heuristic");
    }
    r.write(out).ctx("report::write")?;
    println!(
        "P_err = {} (95% CI {}..{}), bound = {}",
        study.p_err, study.ci_low, study.ci_high, study.bound
    );
    Ok(())
}

fn radar_fig2(k: usize, m: usize, seed: u64, grid: &str, config: Option<&Path>, out_dir: &Path) -> Outcome {
    let mut cfg: Fig2Config = load_options(config)?;
    cfg.radar = RadarConfig { k, m, ..cfg.radar };
    cfg.seed = seed;
    cfg.etas = parse_grid(grid).ctx("cli::parse_grid")?;
    let res = run_fig2_experiment(&cfg).ctx("radar::run_fig2_experiment")?;
    std::fs::create_dir_all(out_dir).map_err(Error::from).ctx("cli::radar_fig2")?;
    let mut r = CsvReport::new("radar-fig2", &["eta", "violation_norm", "psi_true", "psi_masked"]);
    r.seed(Some(seed));
    r.config(&cfg).ctx("report::config")?;
    r.comment(format!("spearman: {}", fmt_f64(res.spearman)));
    if res.monotonicity.flagged() {
        r.comment(format!(
            "sinr monotonicity violated at {} of {} sampled pairs per probe",
            res.monotonicity.violations.len(),
            res.monotonicity.pairs
        ));
    }
    for row in &res.rows {
        r.row(vec![
            fmt_f64(row.eta),
            fmt_opt(row.violation_norm),
            fmt_f64(row.psi_true),
            fmt_opt(row.psi_masked),
        ]);
    }
    r.write(out_dir.join("curve.csv")).ctx("report::write")?;
    emit_plot(&res.series(), &PlotLabels::default(), out_dir.join("curve.svg")).ctx("plot::emit_plot")?;
    println!("psi_true = {}, spearman = {}", res.psi_true, res.spearman);
    Ok(())
}

fn generate(kind: GenerateKind, k: usize, m: usize, seed: u64, out: &Path, truth_out: Option<&Path>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = "synth::generate";
    match kind {
        GenerateKind::CobbDouglas | GenerateKind::LogLinear | GenerateKind::Irrational => {
            let data = match kind {
                GenerateKind::CobbDouglas => synth::rational_utility_data(synth::RationalKind::CobbDouglas, k, m, &mut rng),
                GenerateKind::LogLinear => synth::rational_utility_data(synth::RationalKind::LogLinear, k, m, &mut rng),
                _ => synth::irrational_utility_data(k, m, &mut rng),
            }
            .ctx(op)?;
            io::save_dataset(&data.dataset, out).ctx("io::save_dataset")?;
            if let Some(p) = truth_out {
                io::save_function(&data.u_true, p).ctx("io::save_function")?;
            }
        }
        GenerateKind::StrategyVertex | GenerateKind::StrategyIrrational => {
            let data = match kind {
                GenerateKind::StrategyVertex => synth::strategy_vertex_data(k, m, &mut rng),
                _ => synth::strategy_irrational_data(k, m, &mut rng),
            }
            .ctx(op)?;
            io::save_dataset(&data.dataset, out).ctx("io::save_dataset")?;
            if let Some(p) = truth_out {
                io::save_function(&data.g_true, p).ctx("io::save_function")?;
            }
        }
        GenerateKind::QuadraticScenario => {
            let s = synth::concave_quadratic_scenario(k, m, &mut rng).ctx(op)?;
            io::save_scenario(&s, out).ctx("io::save_scenario")?;
        }
        GenerateKind::RadarScenario => {
            let cfg = RadarConfig {
                k,
                m,
                ..RadarConfig::default()
            };
            let s = sample_scenario(&cfg, &mut rng)
                .and_then(|r| r.to_scenario(None))
                .ctx("radar::sample_scenario")?;
            io::save_scenario(&s, out).ctx("io::save_scenario")?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn report_dataset(d: &Dataset) -> Outcome {
    let tol = if d.mode() == DatasetMode::UtilityTest { ACTIVITY_TOL } else { 0.0 };
    let v = validate_dataset(d, tol);
    for x in &v {
        println!("observation {}: {:?} ({})", x.index, x.kind, x.magnitude);
    }
    if v.is_empty() {
        println!("ok: K = {}, m = {}", d.horizon(), d.dim());
        Ok(())
    } else {
        Err(Failure {
            op: "dataset::validate_dataset",
            error: Error::InvalidInput(format!("{} observation(s) failed validation", v.len())),
        })
    }
}

fn validate(dataset: Option<&Path>, scenario: Option<&Path>) -> Outcome {
    if let Some(p) = dataset {
        let d = io::load_dataset(p).ctx("io::load_dataset")?;
        report_dataset(&d)?;
    }
    if let Some(p) = scenario {
        let s = io::load_scenario(p).ctx("io::load_scenario")?;
        println!("ok: K = {}, m = {}", s.horizon(), s.dim());
    }
    Ok(())
}
