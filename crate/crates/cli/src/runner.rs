//! Scenario orchestration. Estimators parallelize internally; this layer is
//! sequential and only decides what to compute, what to assert and where
//! to write it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bvylab::diagnostics::{
    check_volume_lower_with, default_radii, estimate_beta_with, estimate_density_bounds_with,
    volume_radius_range, DiagOptions,
};
use bvylab::estimator::{
    bound_check, grad_norm, k_const, k_norm, limit_fit, rescaled_curve, BVYConfig, EstimatorChoice,
    EstimatorKind, RescaledCurve,
};
use bvylab::lipcalc::TestFunction;
use bvylab::rng::derive_seed;
use bvylab::space::SpaceInstance;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::CliError;
use crate::plot::emit_plot;
use crate::report::{Assertion, Budgets, DensitySummary, Quantities, Report, SlopeCase, Verdict};

/// Ladder of the golden regression: small enough that the `lambda^-p`
/// correction is visible, large enough that the plateau sits near 2.
pub const GOLDEN_LADDER: [f64; 6] = [2.0, 3.0, 4.0, 6.0, 8.0, 10.0];

/// Parse `WORKERS` from the environment; unset or empty means rayon's default.
pub fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("WORKERS") {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "WORKERS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Run on a dedicated pool of `workers` threads (results do not depend on it).
pub fn run_with_workers(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Report, CliError> {
    match workers {
        None => run_scenario(cfg),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Pool(e.to_string()))?
            .install(|| run_scenario(cfg)),
    }
}

/// Validate, compute, assert, and write `report.json` plus the scenario's
/// CSV and SVG files into `output_dir`. Wall-clock time goes to
/// `timing.log` so the JSON stays reproducible.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let prepared = cfg.prepare()?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let start = Instant::now();
    let mut run = Run {
        cfg,
        space: &prepared.space,
        function: prepared.function.as_ref(),
        out: &out,
        q: Quantities::default(),
        assertions: Vec::new(),
        files: Vec::new(),
        budgets: Budgets::default(),
    };
    match cfg.scenario {
        Scenario::Golden1d => run.golden()?,
        Scenario::VerifyBvyEuclidean => run.bvy_euclidean()?,
        Scenario::VerifyBounds => run.bounds()?,
        Scenario::VerifyOptimality => run.optimality()?,
        Scenario::VerifyAsymptotic => run.asymptotic()?,
        Scenario::DiagnoseSpace => run.diagnose()?,
    }
    let verdict = if run.assertions.iter().all(|a| a.holds) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut files = std::mem::take(&mut run.files);
    files.push("report.json".into());
    let report = Report {
        scenario: cfg.scenario,
        seed: cfg.seed,
        config: cfg.clone(),
        quantities: run.q,
        assertions: run.assertions,
        verdict,
        budgets: run.budgets,
        files,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write(&out.join("report.json"), json.as_bytes())?;
    let timing = format!(
        "wall_clock_seconds = {:.3}\nworkers = {}\n",
        start.elapsed().as_secs_f64(),
        rayon::current_num_threads()
    );
    write(&out.join("timing.log"), timing.as_bytes())?;
    Ok(report)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    space: &'a SpaceInstance,
    function: Option<&'a TestFunction>,
    out: &'a PathBuf,
    q: Quantities,
    assertions: Vec<Assertion>,
    files: Vec<String>,
    budgets: Budgets,
}

impl Run<'_> {
    fn u(&self) -> &TestFunction {
        self.function.expect("checked in prepare")
    }

    fn bvy(&self) -> BVYConfig {
        BVYConfig {
            seed: self.cfg.seed,
            ..self.cfg.bvy.clone()
        }
    }

    fn diag_options(&self) -> DiagOptions {
        DiagOptions {
            include_boundary: self.cfg.diagnostics.include_boundary,
            mass_samples: self.cfg.diagnostics.mass_samples,
        }
    }

    fn radii(&self) -> Result<Vec<f64>, CliError> {
        if self.cfg.diagnostics.radii.is_empty() {
            Ok(default_radii(self.space)?)
        } else {
            Ok(self.cfg.diagnostics.radii.clone())
        }
    }

    fn n(&self) -> f64 {
        self.space.hom_dim()
    }

    fn curve(&mut self, b: &BVYConfig, stem: &str) -> Result<RescaledCurve, CliError> {
        let curve = rescaled_curve(self.space, self.u(), b)?;
        self.save_curve(&curve, stem)?;
        Ok(curve)
    }

    fn save_curve(&mut self, curve: &RescaledCurve, stem: &str) -> Result<(), CliError> {
        let csv_name = format!("{stem}.csv");
        let svg_name = format!("{stem}.svg");
        let csv_path = self.out.join(&csv_name);
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in curve.records() {
            w.serialize(r)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Config(e.to_string()))?;
        write(&csv_path, &bytes)?;
        emit_plot(&csv_path, &self.out.join(&svg_name))?;
        self.files.push(csv_name);
        self.files.push(svg_name);
        self.budgets.curve_rungs += curve.rows.len();
        self.budgets.pair_samples_per_rung =
            curve.rows.first().map_or(0, |r| r.n_outer * r.n_inner);
        Ok(())
    }

    fn golden(&mut self) -> Result<(), CliError> {
        let mut b = self.bvy();
        b.n_bar.get_or_insert(1.0);
        if b.estimator == EstimatorChoice::Auto {
            b.estimator = EstimatorChoice::Direct;
        }
        if b.lambda_ladder.is_empty() {
            b.lambda_ladder = GOLDEN_LADDER.to_vec();
        }
        let u = self.u().clone();
        let c = u.scale * u.params.direction.as_ref().map_or(1.0, |d| d[0]);
        let len = self.space.window().width(0);
        let (p, n_bar) = (b.p, b.n_bar.unwrap());
        let curve = self.curve(&b, "curve")?;
        for (i, row) in curve.rows.iter().enumerate() {
            let delta = (c.abs() / row.lambda).powf(p / n_bar).min(len);
            let truth = 2.0 * delta * len - delta * delta;
            let se = match row.estimator {
                EstimatorKind::Direct => {
                    let q = truth / (len * len);
                    len * len * (q * (1.0 - q) / b.n_pairs as f64).sqrt()
                }
                EstimatorKind::Localized => row.estimate.stderr,
            };
            self.assertions.push(Assertion::le(
                format!(
                    "rung {i} (lambda = {}): |M_hat - strip formula| <= 3 stderr",
                    row.lambda
                ),
                (row.estimate.value - truth).abs(),
                3.0 * se,
            ));
        }
        let fit = limit_fit(&curve)?;
        if n_bar == 1.0 {
            let target = 2.0 * len * c.abs().powf(p);
            self.assertions.push(Assertion::within(
                "fitted limit vs 2 L |c|^p",
                fit.limit,
                target,
                self.cfg.checks.tolerance,
            ));
            self.q.target = Some(target);
        }
        self.q.n = Some(1.0);
        self.q.p = Some(p);
        self.q.curve = Some(curve);
        self.q.fit = Some(fit);
        Ok(())
    }

    fn bvy_euclidean(&mut self) -> Result<(), CliError> {
        let n = self.n();
        let mut b = self.bvy();
        b.n_bar = Some(n);
        let curve = self.curve(&b, "curve")?;
        let fit = limit_fit(&curve)?;
        let grad = grad_norm(
            self.space,
            self.u(),
            b.p,
            self.cfg.n_grad,
            derive_seed(self.cfg.seed, 1),
        )?;
        let k = k_const(b.p, n as u32)?;
        let target = k / n * grad.lip_p.value;
        self.assertions.push(Assertion::within(
            "fitted limit vs k_{p,N}/N * int |grad u|^p",
            fit.limit,
            target,
            self.cfg.checks.tolerance,
        ));
        self.budgets.grad_samples = self.cfg.n_grad;
        self.q.n = Some(n);
        self.q.p = Some(b.p);
        self.q.k_const = Some(k);
        self.q.grad_norm = Some(grad);
        self.q.target = Some(target);
        self.q.curve = Some(curve);
        self.q.fit = Some(fit);
        Ok(())
    }

    fn bounds(&mut self) -> Result<(), CliError> {
        let n = self.n();
        let radii = self.radii()?;
        let opts = self.diag_options();
        let d = &self.cfg.diagnostics;
        let density = estimate_density_bounds_with(
            self.space,
            n,
            d.density_points,
            &radii,
            derive_seed(self.cfg.seed, 2),
            &opts,
        )?;
        let doubling = estimate_beta_with(
            self.space,
            d.n_points,
            &radii,
            derive_seed(self.cfg.seed, 3),
            &opts,
        )?;
        let report = bound_check(
            self.space,
            self.u(),
            &self.bvy(),
            density.a_hat,
            density.b_hat,
            self.cfg.n_grad,
        )?;
        self.save_curve(&report.curve, "curve")?;
        self.assertions.push(Assertion::le(
            "C1 * int lip^{N+p} / Lip^N <= limit",
            report.lower_bound,
            report.limit,
        ));
        self.assertions.push(Assertion::le(
            "limit <= C2 * int Lip^p",
            report.limit,
            report.upper_bound,
        ));
        self.budgets.grad_samples = self.cfg.n_grad;
        self.budgets.diagnostic_points = d.n_points + d.density_points;
        self.q.n = Some(n);
        self.q.p = Some(report.p);
        self.q.density = Some(DensitySummary {
            n,
            a_hat: density.a_hat,
            b_hat: density.b_hat,
            r_ladder: density.r_ladder,
            n_points: d.density_points,
        });
        self.q.doubling = Some(doubling);
        self.q.bound = Some(report);
        Ok(())
    }

    fn optimality(&mut self) -> Result<(), CliError> {
        let n = self.n();
        let tol = self.cfg.checks.slope_tolerance;
        for &v in &self.cfg.checks.n_bar_values {
            let mut b = self.bvy();
            b.n_bar = Some(v);
            let stem = format!("curve_nbar_{v}");
            let curve = self.curve(&b, &stem)?;
            let fit = limit_fit(&curve)?;
            let predicted = b.p * (1.0 - n / v);
            let slope = fit.slope.unwrap_or(f64::NAN);
            self.assertions.push(Assertion::le(
                format!("N_bar = {v}: |slope - p (1 - N / N_bar)| <= tol"),
                if slope.is_nan() {
                    f64::INFINITY
                } else {
                    (slope - predicted).abs()
                },
                tol,
            ));
            let behaviour = if predicted > 0.0 {
                self.assertions.push(Assertion::lt(
                    format!("N_bar = {v}: slope > 0 (diverges)"),
                    0.0,
                    slope,
                ));
                "diverges"
            } else if predicted < 0.0 {
                // an all-zero tail also classifies as decay
                let s = if fit.diverges_to_zero { -1.0 } else { slope };
                self.assertions.push(Assertion::lt(
                    format!("N_bar = {v}: slope < 0 (decays)"),
                    s,
                    0.0,
                ));
                "decays"
            } else {
                "finite"
            };
            self.q.slopes.push(SlopeCase {
                n_bar: v,
                predicted_slope: predicted,
                predicted_behaviour: behaviour,
                curve_file: format!("{stem}.csv"),
                curve,
                fit,
            });
        }
        self.q.n = Some(n);
        self.q.p = Some(self.cfg.bvy.p);
        Ok(())
    }

    fn asymptotic(&mut self) -> Result<(), CliError> {
        let n = self.n();
        let mut b = self.bvy();
        b.n_bar = Some(n);
        let curve = self.curve(&b, "curve")?;
        let fit = limit_fit(&curve)?;
        let mut kc = self.cfg.k_norm.clone();
        kc.seed = derive_seed(self.cfg.seed, 4);
        let k = k_norm(self.space, self.u(), b.p, &kc)?;
        self.assertions.push(Assertion::within(
            "fitted limit vs K_norm",
            fit.limit,
            k.value,
            self.cfg.checks.tolerance,
        ));
        if let Some(exp) = self.cfg.checks.expected_k_norm {
            self.assertions.push(Assertion::within(
                "K_norm vs closed form",
                k.value,
                exp,
                self.cfg.checks.k_norm_tolerance,
            ));
            self.q.target = Some(exp);
        }
        self.budgets.k_norm_outer = kc.n_outer;
        self.budgets.k_norm_shell = kc.n_shell;
        self.q.n = Some(n);
        self.q.p = Some(b.p);
        self.q.k_norm = Some(k);
        self.q.curve = Some(curve);
        self.q.fit = Some(fit);
        Ok(())
    }

    fn diagnose(&mut self) -> Result<(), CliError> {
        let n = self.n();
        let radii = self.radii()?;
        let opts = self.diag_options();
        let d = &self.cfg.diagnostics;
        let seed = self.cfg.seed;
        let doubling =
            estimate_beta_with(self.space, d.n_points, &radii, derive_seed(seed, 3), &opts)?;
        let density = estimate_density_bounds_with(
            self.space,
            n,
            d.density_points,
            &radii,
            derive_seed(seed, 2),
            &opts,
        )?;
        let volume = check_volume_lower_with(
            self.space,
            doubling.beta_hat,
            d.n_trials,
            derive_seed(seed, 5),
            volume_radius_range(self.space),
            &opts,
        )?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in density.trace_rows() {
            w.serialize(row)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Config(e.to_string()))?;
        write(&self.out.join("traces.csv"), &bytes)?;
        self.files.push("traces.csv".into());

        self.assertions.push(Assertion::le(
            "volume lower bound violations with beta = beta_hat",
            volume.violations as f64,
            0.0,
        ));
        if let Some(exp) = self.cfg.checks.expected_dimension {
            self.assertions.push(Assertion::le(
                "|dimension_hat - expected|",
                (doubling.dimension_hat - exp).abs(),
                self.cfg.checks.dimension_tolerance,
            ));
            self.q.target = Some(exp);
        }
        self.budgets.diagnostic_points = d.n_points + d.density_points;
        self.budgets.volume_trials = d.n_trials;
        self.q.n = Some(n);
        self.q.density = Some(DensitySummary {
            n,
            a_hat: density.a_hat,
            b_hat: density.b_hat,
            r_ladder: density.r_ladder,
            n_points: d.density_points,
        });
        self.q.doubling = Some(doubling);
        self.q.volume_lower = Some(volume);
        Ok(())
    }
}
