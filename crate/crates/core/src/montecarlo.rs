//! Simulation designs, seeded replications of the full pipeline, and the
//! per-table summaries.
//!
//! Replication `i` draws from its own ChaCha8 stream seeded with
//! `base_seed + i`, so the schedule never changes what a replication sees.
//! The out-of-sample draw used for MSE comes from stream 1 of the same seed.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{GridSpec, ThresholdRegressionFit};
use crate::exec::{map_indexed, Execution};
use crate::model::{build_design, Dataset, InterceptMode, TrueModel};
use crate::pipeline::{estimate, FitOptions};
use crate::selector::ThresholdedFit;

/// Nonzero entries of a coefficient vector as `(position, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Pattern(pub Vec<(usize, f64)>);

impl Pattern {
    /// `values` placed in the first positions.
    pub fn leading(values: &[f64]) -> Self {
        Pattern(values.iter().copied().enumerate().collect())
    }

    pub fn zero() -> Self {
        Pattern(Vec::new())
    }

    fn dense(&self, m: usize, scale: f64) -> Vec<f64> {
        let mut v = vec![0.0; m];
        for &(j, x) in &self.0 {
            v[j] = scale * x;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    #[serde(default)]
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub tau0: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    pub beta: Pattern,
    pub delta: Pattern,
    #[serde(default = "default_true")]
    pub include_intercept: bool,
    /// Number of nonzero entries per block, for designs that vary it.
    #[serde(default)]
    pub m1: Option<usize>,
}

fn default_sigma2() -> f64 {
    0.25
}
fn default_scale() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

const FIVE_TWOS: [f64; 5] = [2.0, 2.0, 2.0, 2.0, 2.0];
const ALTERNATING: [f64; 5] = [2.0, -2.0, 2.0, -2.0, 2.0];

impl DgpConfig {
    /// The baseline design: `β = (2,2,2,2,2,0,…)`, `δ = (2,−2,2,−2,2,0,…)`.
    pub fn baseline(n: usize, m: usize, tau0: f64) -> Self {
        DgpConfig {
            label: format!("n={n},m={m},tau0={tau0}"),
            n,
            m,
            tau0,
            sigma2: default_sigma2(),
            scale: 1.0,
            beta: Pattern::leading(&FIVE_TWOS),
            delta: Pattern::leading(&ALTERNATING),
            include_intercept: true,
            m1: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m == 0 {
            return Err(Error::InvalidParameter(format!("need n >= 2 and m >= 1, got n={} m={}", self.n, self.m)));
        }
        if !(self.sigma2 >= 0.0) || !self.scale.is_finite() || !self.tau0.is_finite() {
            return Err(Error::InvalidParameter("sigma2 must be >= 0; scale and tau0 finite".into()));
        }
        for &(j, v) in self.beta.0.iter().chain(&self.delta.0) {
            if j >= self.m || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("pattern entry ({j}, {v}) does not fit m={}", self.m)));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> TrueModel {
        TrueModel {
            beta0: self.beta.dense(self.m, self.scale),
            delta0: self.delta.dense(self.m, self.scale),
            tau0: self.tau0,
        }
    }
}

fn draw_sample(config: &DgpConfig, truth: &TrueModel, rng: &mut ChaCha8Rng, noise_sd: f64) -> Result<Dataset> {
    let (n, m) = (config.n, config.m);
    let mut cols = vec![vec![0.0; n]; m];
    let mut q = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut row = vec![0.0; m];
    for i in 0..n {
        for (j, x) in row.iter_mut().enumerate() {
            *x = StandardNormal.sample(rng);
            cols[j][i] = *x;
        }
        q[i] = rng.random::<f64>();
        let u: f64 = StandardNormal.sample(rng);
        y[i] = truth.mean(&row, q[i]) + noise_sd * u;
    }
    let mode = if config.include_intercept {
        InterceptMode::Common
    } else {
        InterceptMode::None
    };
    Dataset::new(cols, y, q)?.with_intercept(mode, false)
}

/// Draws `X ~ N(0, I)`, `Q ~ U[0,1]`, `U ~ N(0, σ²)` and
/// `Y = Xβ0 + Xδ0·1{Q<τ0} + U`.
pub fn generate(config: &DgpConfig, seed: u64) -> Result<(Dataset, TrueModel)> {
    config.validate()?;
    let truth = config.truth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = draw_sample(config, &truth, &mut rng, config.sigma2.sqrt())?;
    Ok((ds, truth))
}

/// Independent noiseless draw of the same size; its response is the true
/// regression function.
pub fn generate_test(config: &DgpConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let truth = config.truth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    draw_sample(config, &truth, &mut rng, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub mse: f64,
    pub false_pos: usize,
    pub false_neg: usize,
    pub perfect: bool,
    pub n_nonzero: usize,
    pub l1_err: f64,
    pub linf_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    pub lasso: EstimatorMetrics,
    pub thresholded: EstimatorMetrics,
    pub tau_abs_err: f64,
    pub c_hat: f64,
    pub lambda_hat: f64,
    pub break_detected: bool,
    pub converged: bool,
}

fn estimator_metrics(alpha: &[f64], tau: f64, fit: &ThresholdRegressionFit, truth: &TrueModel, test: &Dataset) -> EstimatorMetrics {
    let alpha0 = truth.alpha0();
    let coords: Vec<usize> = (0..alpha0.len()).filter(|&j| fit.penalized[j]).collect();
    let (mut fp, mut fneg, mut nz) = (0, 0, 0);
    let (mut l1, mut linf) = (0.0f64, 0.0f64);
    for &j in &coords {
        let (est, tru) = (alpha[j] != 0.0, alpha0[j] != 0.0);
        nz += usize::from(est);
        fp += usize::from(est && !tru);
        fneg += usize::from(tru && !est);
        let e = (alpha[j] - alpha0[j]).abs();
        l1 += e;
        linf = linf.max(e);
    }
    let design = build_design(test, tau);
    let fitted = design.columns().mul_vec(alpha);
    let mse = fitted
        .iter()
        .zip(test.y())
        .map(|(f, t)| (f - t) * (f - t))
        .sum::<f64>()
        / test.n() as f64;
    EstimatorMetrics {
        mse,
        false_pos: fp,
        false_neg: fneg,
        perfect: fp == 0 && fneg == 0,
        n_nonzero: nz,
        l1_err: l1,
        linf_err: linf,
    }
}

/// All reported statistics of one replication. Supports are taken over the
/// penalized coordinates; the test set's response must be noiseless.
pub fn evaluate(fit: &ThresholdRegressionFit, thresholded: &ThresholdedFit, truth: &TrueModel, test: &Dataset) -> RepMetrics {
    RepMetrics {
        lasso: estimator_metrics(&fit.alpha_hat, fit.tau_hat, fit, truth, test),
        thresholded: estimator_metrics(&thresholded.alpha_tilde, fit.tau_hat, fit, truth, test),
        tau_abs_err: (fit.tau_hat - truth.tau0).abs(),
        c_hat: thresholded.c.unwrap_or(f64::NAN),
        lambda_hat: fit.lambda,
        break_detected: thresholded.break_detected,
        converged: fit.all_converged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    pub fit: FitOptions,
    /// Schedules replications.
    pub exec: Execution,
}

impl Default for ExperimentOptions {
    /// Threshold values 0.15 to 0.85 by 0.05, matching `Q ~ U[0,1]`.
    fn default() -> Self {
        ExperimentOptions {
            fit: FitOptions {
                grid: GridSpec::Values {
                    lo: 0.15,
                    hi: 0.85,
                    step: 0.05,
                },
                ..FitOptions::default()
            },
            exec: Execution::default(),
        }
    }
}

/// One replication: generate, estimate, threshold, evaluate.
pub fn run_replication(config: &DgpConfig, seed: u64, opts: &ExperimentOptions) -> Result<RepMetrics> {
    let (ds, truth) = generate(config, seed)?;
    let test = generate_test(config, seed)?;
    let (fit, thresholded) = estimate(&ds, &opts.fit)?;
    Ok(evaluate(&fit, &thresholded, &truth, &test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub mse: f64,
    pub false_pos: f64,
    pub false_neg: f64,
    /// Share of perfect selections in percent.
    pub perfect_pct: f64,
    pub n_nonzero: f64,
    pub l1_err: f64,
    pub linf_err: f64,
}

impl MeanMetrics {
    fn from_reps<'a>(it: impl Iterator<Item = &'a EstimatorMetrics>) -> Self {
        let mut acc = [0.0f64; 7];
        let mut count = 0usize;
        for e in it {
            count += 1;
            acc[0] += e.mse;
            acc[1] += e.false_pos as f64;
            acc[2] += e.false_neg as f64;
            acc[3] += if e.perfect { 100.0 } else { 0.0 };
            acc[4] += e.n_nonzero as f64;
            acc[5] += e.l1_err;
            acc[6] += e.linf_err;
        }
        let c = count.max(1) as f64;
        MeanMetrics {
            mse: acc[0] / c,
            false_pos: acc[1] / c,
            false_neg: acc[2] / c,
            perfect_pct: acc[3] / c,
            n_nonzero: acc[4] / c,
            l1_err: acc[5] / c,
            linf_err: acc[6] / c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: DgpConfig,
    pub reps: usize,
    pub failures: usize,
    pub base_seed: u64,
    pub lasso: MeanMetrics,
    pub thresholded: MeanMetrics,
    pub tau_abs_err: f64,
    pub c_hat: f64,
    pub lambda_hat: f64,
    pub break_detected_pct: f64,
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub summary: ExperimentSummary,
    /// Successful replications in index order, with their seeds.
    pub replications: Vec<(u64, RepMetrics)>,
}

pub fn summarize(config: &DgpConfig, base_seed: u64, failures: usize, reps: &[(u64, RepMetrics)]) -> ExperimentSummary {
    let k = reps.len().max(1) as f64;
    let mean = |f: fn(&RepMetrics) -> f64| reps.iter().map(|(_, r)| f(r)).sum::<f64>() / k;
    ExperimentSummary {
        config: config.clone(),
        reps: reps.len(),
        failures,
        base_seed,
        lasso: MeanMetrics::from_reps(reps.iter().map(|(_, r)| &r.lasso)),
        thresholded: MeanMetrics::from_reps(reps.iter().map(|(_, r)| &r.thresholded)),
        tau_abs_err: mean(|r| r.tau_abs_err),
        c_hat: mean(|r| r.c_hat),
        lambda_hat: mean(|r| r.lambda_hat),
        break_detected_pct: mean(|r| if r.break_detected { 100.0 } else { 0.0 }),
        nonconverged: reps.iter().filter(|(_, r)| !r.converged).count(),
    }
}

/// Runs `reps` replications with seeds `base_seed + i`. Failed replications
/// are excluded and counted; more than 1% failures aborts.
pub fn run_experiment(config: &DgpConfig, reps: usize, base_seed: u64, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    if reps == 0 {
        return Err(Error::InvalidParameter("need at least one replication".into()));
    }
    config.validate()?;
    let results = map_indexed(opts.exec, reps, |i| {
        let seed = base_seed.wrapping_add(i as u64);
        (seed, run_replication(config, seed, opts))
    });
    let mut ok = Vec::with_capacity(reps);
    let mut failures = 0usize;
    for (seed, r) in results {
        match r {
            Ok(m) => ok.push((seed, m)),
            Err(e) => {
                log::warn!("replication with seed {seed} failed: {e}");
                failures += 1;
            }
        }
    }
    if failures * 100 > reps {
        return Err(Error::TooManyFailures { failed: failures, total: reps });
    }
    Ok(ExperimentResult {
        summary: summarize(config, base_seed, failures, &ok),
        replications: ok,
    })
}

pub const TABLE_NAMES: [&str; 5] = ["table1", "table2", "table3", "table4", "table5"];

/// The configuration grid of each simulation table.
pub fn table_suite(name: &str) -> Result<Vec<DgpConfig>> {
    let mut out = Vec::new();
    match name {
        "table1" => {
            for m in [50, 100, 200, 400] {
                for tau0 in [0.3, 0.4, 0.5] {
                    let mut c = DgpConfig::baseline(200, m, tau0);
                    c.label = format!("m={m} tau0={tau0}");
                    out.push(c);
                }
            }
        }
        "table2" => {
            for m in [50, 100, 200, 400] {
                let mut c = DgpConfig::baseline(200, m, 0.5);
                c.delta = Pattern::zero();
                c.label = format!("m={m} n=200");
                out.push(c);
            }
        }
        "table3" => {
            for tau0 in [0.3, 0.5] {
                for n in [50, 100, 200, 500, 1000] {
                    let mut c = DgpConfig::baseline(n, 100, tau0);
                    c.label = format!("tau0={tau0} n={n}");
                    out.push(c);
                }
            }
        }
        "table4" => {
            for a in [0.3, 0.5, 1.0, 2.0] {
                for n in [100, 200, 1000] {
                    let mut c = DgpConfig::baseline(n, 100, 0.5);
                    c.scale = a / 2.0;
                    c.label = format!("a={a} n={n}");
                    out.push(c);
                }
            }
        }
        "table5" => {
            for m1 in [1usize, 5, 10, 25] {
                for tau0 in [0.3, 0.4, 0.5] {
                    let mut c = DgpConfig::baseline(200, 100 + m1, tau0);
                    c.beta = Pattern::leading(&vec![2.0; m1]);
                    c.delta = Pattern::leading(&vec![2.0; m1]);
                    c.m1 = Some(m1);
                    c.label = format!("m1={m1} tau0={tau0}");
                    out.push(c);
                }
            }
        }
        other => return Err(Error::UnknownTable(other.to_string())),
    }
    Ok(out)
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

/// One row per configuration and estimator (`L` Lasso, `T` thresholded).
pub fn write_summary_csv<W: Write>(table: &str, summaries: &[ExperimentSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "table", "config", "n", "m", "tau0", "scale", "estimator", "reps", "failures", "mse", "false_pos", "false_neg",
        "perfect_pct", "n_nonzero", "l1_err", "linf_err", "tau_abs_err", "c_hat", "lambda_hat", "break_pct",
    ])?;
    for s in summaries {
        let c = &s.config;
        for (est, mm) in [("L", &s.lasso), ("T", &s.thresholded)] {
            let (tau, cc, lam) = if est == "L" {
                (f6(s.tau_abs_err), String::new(), f6(s.lambda_hat))
            } else {
                (String::new(), f6(s.c_hat), String::new())
            };
            w.write_record([
                table.to_string(),
                c.label.clone(),
                c.n.to_string(),
                c.m.to_string(),
                f6(c.tau0),
                f6(c.scale),
                est.to_string(),
                s.reps.to_string(),
                s.failures.to_string(),
                f6(mm.mse),
                f6(mm.false_pos),
                f6(mm.false_neg),
                f6(mm.perfect_pct),
                f6(mm.n_nonzero),
                f6(mm.l1_err),
                f6(mm.linf_err),
                tau,
                cc,
                lam,
                f6(s.break_detected_pct),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text layout: one L and one T line per configuration.
pub fn format_text_table(summaries: &[ExperimentSummary]) -> String {
    let mut s = String::new();
    let header = format!(
        "{:<22} {:>3} {:>8} {:>7} {:>7} {:>7} {:>8} {:>8} {:>8} {:>7} {:>6} {:>7}\n",
        "config", "est", "MSE", "FP", "FN", "Perfect", "#nonzero", "l1", "linf", "|tau|", "C", "lambda"
    );
    s.push_str(&header);
    s.push_str(&"-".repeat(header.len() - 1));
    s.push('\n');
    for x in summaries {
        for (est, mm) in [("L", &x.lasso), ("T", &x.thresholded)] {
            let (tau, c, lam) = if est == "L" {
                (format!("{:.2}", x.tau_abs_err), "-".to_string(), format!("{:.3}", x.lambda_hat))
            } else {
                ("-".to_string(), format!("{:.2}", x.c_hat), "-".to_string())
            };
            s.push_str(&format!(
                "{:<22} {:>3} {:>8.2} {:>7.2} {:>7.2} {:>7.0} {:>8.2} {:>8.2} {:>8.2} {:>7} {:>6} {:>7}\n",
                x.config.label, est, mm.mse, mm.false_pos, mm.false_neg, mm.perfect_pct, mm.n_nonzero, mm.l1_err,
                mm.linf_err, tau, c, lam
            ));
        }
    }
    s
}
