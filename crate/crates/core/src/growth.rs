//! Pooled country-year growth regressions: CSV ingestion, forward-average
//! growth target, optional country dummies, and the coefficient report.
//!
//! Also generates a synthetic panel with a planted threshold, used as a test
//! fixture and for examples.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::GridSpec;
use crate::linalg::quantile_sorted;
use crate::model::{Dataset, InterceptMode};
use crate::pipeline::{estimate, FitOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SampleFilter {
    #[default]
    All,
    /// Inclusive range of target years.
    YearRange { from: i32, to: i32 },
    Years(Vec<i32>),
}

impl SampleFilter {
    pub fn keeps(&self, year: i32) -> bool {
        match self {
            SampleFilter::All => true,
            SampleFilter::YearRange { from, to } => (*from..=*to).contains(&year),
            SampleFilter::Years(ys) => ys.contains(&year),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSpec {
    pub csv: PathBuf,
    pub country_col: String,
    pub year_col: String,
    pub gdp_col: String,
    pub controls: Vec<String>,
    pub debt_col: String,
    pub horizon: usize,
    pub fixed_effects: bool,
    pub filter: SampleFilter,
    pub grid: GridSpec,
    /// Multiplies the growth target, e.g. 100 for percent.
    pub growth_scale: f64,
    pub penalize_intercepts: bool,
}

impl Default for PanelSpec {
    fn default() -> Self {
        PanelSpec {
            csv: PathBuf::new(),
            country_col: "country".into(),
            year_col: "year".into(),
            gdp_col: "gdp".into(),
            controls: Vec::new(),
            debt_col: "debt".into(),
            horizon: 5,
            fixed_effects: false,
            filter: SampleFilter::All,
            grid: GridSpec::default(),
            growth_scale: 1.0,
            penalize_intercepts: false,
        }
    }
}

/// `(ln y[t+h] − ln y[t]) / h`, the mean of the next `h` log growth rates.
/// `levels` must be sorted by year; years without a level `h` years ahead
/// produce no target. Non-positive levels produce no target either.
pub fn forward_average_growth(levels: &[(i32, f64)], h: usize) -> Vec<(i32, f64)> {
    if h == 0 {
        return Vec::new();
    }
    let by_year: BTreeMap<i32, f64> = levels.iter().copied().collect();
    levels
        .iter()
        .filter_map(|&(t, y)| {
            let ahead = *by_year.get(&(t + h as i32))?;
            (y > 0.0 && ahead > 0.0).then(|| (t, (ahead.ln() - y.ln()) / h as f64))
        })
        .collect()
}

/// One parsed CSV row; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub country: String,
    pub year: i32,
    pub gdp: Option<f64>,
    pub debt: Option<f64>,
    pub controls: Vec<Option<f64>>,
}

fn parse_cell(s: &str, column: &str) -> Result<Option<f64>> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") || t == "." {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Panel(format!("column `{column}`: cannot parse `{s}`")))
}

pub fn read_panel<R: Read>(reader: R, spec: &PanelSpec) -> Result<Vec<PanelRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Panel(format!("missing column `{name}`")))
    };
    let ci = find(&spec.country_col)?;
    let yi = find(&spec.year_col)?;
    let gi = find(&spec.gdp_col)?;
    let di = find(&spec.debt_col)?;
    let xi: Vec<usize> = spec.controls.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let year = get(yi)
            .trim()
            .parse::<i32>()
            .map_err(|_| Error::Panel(format!("bad year `{}`", get(yi))))?;
        rows.push(PanelRow {
            country: get(ci).trim().to_string(),
            year,
            gdp: parse_cell(get(gi), &spec.gdp_col)?,
            debt: parse_cell(get(di), &spec.debt_col)?,
            controls: xi
                .iter()
                .zip(&spec.controls)
                .map(|(&i, c)| parse_cell(get(i), c))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RowCounts {
    pub read: usize,
    /// Rows whose year passes the sample filter.
    pub in_sample: usize,
    /// In-sample rows without a forward growth target.
    pub no_target: usize,
    /// In-sample rows with a target but a missing control or debt value.
    pub missing: usize,
    pub used: usize,
    pub countries: usize,
    /// Countries with a series too short for the horizon.
    pub short_countries: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub dataset: Dataset,
    pub counts: RowCounts,
    pub row_country: Vec<String>,
    pub row_year: Vec<i32>,
}

/// Pools the rows into a dataset: `Y` is forward-average growth, `Q` the debt
/// measure, `X` the controls followed by the debt level. An intercept enters
/// both regimes; with fixed effects, dummies for every country but the first
/// are added unpenalized.
pub fn build_panel_from_rows(rows: &[PanelRow], spec: &PanelSpec) -> Result<Panel> {
    if spec.horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut by_country: BTreeMap<&str, Vec<&PanelRow>> = BTreeMap::new();
    for r in rows {
        by_country.entry(r.country.as_str()).or_default().push(r);
    }
    let mut counts = RowCounts {
        read: rows.len(),
        ..Default::default()
    };
    let m = spec.controls.len() + 1;
    let mut x_cols = vec![Vec::new(); m];
    let (mut y, mut q, mut row_country, mut row_year) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (country, mut series) in by_country {
        series.sort_by_key(|r| r.year);
        if series.windows(2).any(|w| w[0].year == w[1].year) {
            return Err(Error::Panel(format!("duplicate year for `{country}`")));
        }
        let levels: Vec<(i32, f64)> = series.iter().filter_map(|r| r.gdp.map(|g| (r.year, g))).collect();
        if levels.len() <= spec.horizon {
            log::warn!("{country}: series too short for horizon {}", spec.horizon);
            counts.short_countries.push(country.to_string());
        }
        let target: BTreeMap<i32, f64> = forward_average_growth(&levels, spec.horizon).into_iter().collect();
        for r in series {
            if !spec.filter.keeps(r.year) {
                continue;
            }
            counts.in_sample += 1;
            let Some(&g) = target.get(&r.year) else {
                counts.no_target += 1;
                continue;
            };
            let values: Option<Vec<f64>> = r.controls.iter().copied().chain([r.debt]).collect();
            let Some(values) = values else {
                counts.missing += 1;
                continue;
            };
            for (col, v) in x_cols.iter_mut().zip(values) {
                col.push(v);
            }
            y.push(spec.growth_scale * g);
            q.push(r.debt.expect("checked above"));
            row_country.push(country.to_string());
            row_year.push(r.year);
        }
    }
    counts.used = y.len();
    if y.is_empty() {
        return Err(Error::Panel("no usable rows after filtering".into()));
    }
    let mut labels = spec.controls.clone();
    labels.push(spec.debt_col.clone());
    let mut ds = Dataset::new(x_cols, y, q)?
        .with_labels(labels)?
        .with_intercept(InterceptMode::BothRegimes, spec.penalize_intercepts)?;
    let mut present: Vec<&str> = row_country.iter().map(String::as_str).collect();
    present.dedup();
    counts.countries = present.len();
    if spec.fixed_effects && present.len() > 1 {
        let dummies: Vec<Vec<f64>> = present[1..]
            .iter()
            .map(|c| row_country.iter().map(|r| f64::from(u8::from(r == c))).collect())
            .collect();
        let names = present[1..].iter().map(|c| format!("fe_{c}")).collect();
        ds = ds.with_fixed_columns(dummies, names)?;
    }
    Ok(Panel {
        dataset: ds,
        counts,
        row_country,
        row_year,
    })
}

pub fn build_panel(spec: &PanelSpec) -> Result<Panel> {
    let file = std::fs::File::open(&spec.csv)?;
    let rows = read_panel(std::io::BufReader::new(file), spec)?;
    build_panel_from_rows(&rows, spec)
}

/// One regressor's estimates; `None` in a δ column means the regressor has
/// no threshold counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub lasso_beta: f64,
    pub lasso_delta: Option<f64>,
    pub thresh_beta: f64,
    pub thresh_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub coefficients: Vec<CoefficientRow>,
    pub tau_hat: f64,
    pub lambda_hat: f64,
    pub c_hat: Option<f64>,
    pub break_detected: bool,
    /// Regressors whose δ survives thresholding.
    pub thresholded_delta_support: Vec<String>,
    pub counts: RowCounts,
    pub n: usize,
    pub horizon: usize,
    pub fixed_effects: bool,
    pub filter: SampleFilter,
}

pub fn run_growth_regression(spec: &PanelSpec, opts: &FitOptions) -> Result<GrowthReport> {
    let panel = build_panel(spec)?;
    report_for_panel(&panel, spec, opts)
}

pub fn report_for_panel(panel: &Panel, spec: &PanelSpec, opts: &FitOptions) -> Result<GrowthReport> {
    let ds = &panel.dataset;
    let opts = FitOptions {
        grid: spec.grid.clone(),
        ..opts.clone()
    };
    let (fit, thr) = estimate(ds, &opts)?;
    let layout = fit.layout;
    let mut coefficients = Vec::with_capacity(layout.m + layout.k);
    for (j, name) in ds.labels().iter().enumerate() {
        coefficients.push(CoefficientRow {
            name: name.clone(),
            lasso_beta: fit.alpha_hat[j],
            lasso_delta: Some(fit.alpha_hat[layout.m + j]),
            thresh_beta: thr.alpha_tilde[j],
            thresh_delta: Some(thr.alpha_tilde[layout.m + j]),
        });
    }
    for (k, name) in ds.fixed_labels().iter().enumerate() {
        let j = 2 * layout.m + k;
        coefficients.push(CoefficientRow {
            name: name.clone(),
            lasso_beta: fit.alpha_hat[j],
            lasso_delta: None,
            thresh_beta: thr.alpha_tilde[j],
            thresh_delta: None,
        });
    }
    Ok(GrowthReport {
        coefficients,
        tau_hat: fit.tau_hat,
        lambda_hat: fit.lambda,
        c_hat: thr.c,
        break_detected: thr.break_detected,
        thresholded_delta_support: thr.j_delta.iter().map(|&j| ds.labels()[j].clone()).collect(),
        counts: panel.counts.clone(),
        n: ds.n(),
        horizon: spec.horizon,
        fixed_effects: spec.fixed_effects,
        filter: spec.filter.clone(),
    })
}

fn cell(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(x) if x == 0.0 => String::new(),
        Some(x) => format!("{x:.6}"),
    }
}

/// Columns `name, lasso_beta, lasso_delta, thresh_beta, thresh_delta`;
/// zeros are empty cells and absent parameters are dashes.
pub fn write_report_csv<W: Write>(report: &GrowthReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "lasso_beta", "lasso_delta", "thresh_beta", "thresh_delta"])?;
    for c in &report.coefficients {
        w.write_record([
            c.name.clone(),
            cell(Some(c.lasso_beta)),
            cell(c.lasso_delta),
            cell(Some(c.thresh_beta)),
            cell(c.thresh_delta),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_report_text(report: &GrowthReport) -> String {
    let mut s = format!(
        "{:<18} {:>11} {:>11} {:>11} {:>11}\n",
        "", "beta (L)", "beta (T)", "delta (L)", "delta (T)"
    );
    for c in &report.coefficients {
        s.push_str(&format!(
            "{:<18} {:>11} {:>11} {:>11} {:>11}\n",
            c.name,
            cell(Some(c.lasso_beta)),
            cell(Some(c.thresh_beta)),
            cell(c.lasso_delta),
            cell(c.thresh_delta)
        ));
    }
    s.push_str(&format!("\ntau      {:.6}\nlambda   {:.6}\n", report.tau_hat, report.lambda_hat));
    match report.c_hat {
        Some(c) => s.push_str(&format!("C        {c:.2}\n")),
        None => s.push_str("C        -\n"),
    }
    s.push_str(&format!(
        "n        {}\nFE       {}\nbreak    {}\n",
        report.n,
        if report.fixed_effects { "yes" } else { "no" },
        if report.break_detected { "yes" } else { "no" }
    ));
    s
}

pub const SYNTH_CONTROLS: [&str; 9] = [
    "pop_growth",
    "savings",
    "schooling",
    "openness",
    "inflation",
    "crisis",
    "liquid_liab",
    "gov_cons",
    "dependency",
];
pub const SYNTH_DEBT: &str = "gov_debt";
pub const SYNTH_COUNTRIES: usize = 18;
pub const SYNTH_FIRST_YEAR: i32 = 1980;
pub const SYNTH_LAST_YEAR: i32 = 2009;
/// Centile of the debt distribution, over the full usable sample, at which the
/// synthetic threshold is planted.
pub const SYNTH_TAU_CENTILE: f64 = 0.60;
/// Regressors whose effect differs below the threshold.
pub const SYNTH_BREAK_VARS: [&str; 2] = ["savings", "liquid_liab"];
/// Growth noise sd of the shipped fixture.
pub const SYNTH_NOISE_SD: f64 = 1e-4;
/// Noise seed of the shipped fixture; the design seed is 0.
pub const SYNTH_FIXTURE_SEED: u64 = 0;

// Regressors, debt included, are standardized scores drawn as N(0, 1).
/// Coefficients above the threshold, debt last.
const BETA_EFFECT: [f64; 10] = [-0.004, 0.004, 0.003, 0.0, -0.003, -0.003, 0.0, 0.0, 0.0, -0.002];
/// Additional coefficients below the threshold.
const DELTA_EFFECT: [f64; 10] = [0.0, 0.006, 0.0, 0.0, 0.0, 0.0, 0.006, 0.0, 0.0, 0.0];
/// Years that may carry the one missing savings value per country.
const MISSING_YEARS: [i32; 12] = [1990, 1991, 1992, 1993, 1995, 1996, 1997, 1998, 2000, 2001, 2002, 2003];

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub rows: Vec<PanelRow>,
    /// Planted threshold in debt units.
    pub tau0: f64,
}

impl SyntheticPanel {
    /// The panel shipped as `tests/data/synthetic_panel.csv`.
    pub fn fixture() -> Self {
        synthetic_panel(0, SYNTH_FIXTURE_SEED, SYNTH_NOISE_SD).expect("valid noise sd")
    }

    /// Spec matching the synthetic column names, reading from `csv`.
    pub fn spec(csv: impl AsRef<Path>) -> PanelSpec {
        PanelSpec {
            csv: csv.as_ref().to_path_buf(),
            controls: SYNTH_CONTROLS.iter().map(|s| s.to_string()).collect(),
            debt_col: SYNTH_DEBT.into(),
            ..PanelSpec::default()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["country", "year", "gdp", SYNTH_DEBT];
        header.extend(SYNTH_CONTROLS);
        w.write_record(&header)?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![r.country.clone(), r.year.to_string(), fmt(r.gdp), fmt(r.debt)];
            rec.extend(r.controls.iter().map(|&v| fmt(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// 18 countries × 1980–2009 with a threshold planted at the 60th debt
/// centile of the usable full sample. Regressors and debt depend on
/// `design_seed` only, the growth noise on `noise_seed` only.
///
/// First-differenced controls are blank in 1980 and each country misses one
/// savings value between 1990 and 2003 (never in 1994 or 1999), so with a
/// horizon of 5 the full sample has 414 rows, 1990–2004 has 252, and the five
/// years 1984, 1989, 1994, 1999, 2004 have 90.
pub fn synthetic_panel(design_seed: u64, noise_seed: u64, noise_sd: f64) -> Result<SyntheticPanel> {
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidParameter("noise sd must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(design_seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid");
    struct Draw {
        country: String,
        year: i32,
        x: Vec<f64>,
        missing: Option<usize>,
    }
    let years = SYNTH_FIRST_YEAR..=SYNTH_LAST_YEAR;
    let mut draws = Vec::new();
    let mut base = Vec::new();
    for c in 0..SYNTH_COUNTRIES {
        let country = format!("C{:02}", c + 1);
        let missing_year = MISSING_YEARS[rng.random_range(0..MISSING_YEARS.len())];
        base.push(rng.random_range(8_000.0..40_000.0f64));
        for year in years.clone() {
            let x: Vec<f64> = (0..10).map(|_| round6(std_normal.sample(&mut rng))).collect();
            let missing = (year == missing_year).then_some(1);
            draws.push(Draw {
                country: country.clone(),
                year,
                x,
                missing,
            });
        }
    }
    let h = 5i32;
    let usable = |d: &Draw| d.year > SYNTH_FIRST_YEAR && d.year <= SYNTH_LAST_YEAR - h && d.missing.is_none();
    let mut q: Vec<f64> = draws.iter().filter(|d| usable(d)).map(|d| d.x[9]).collect();
    q.sort_by(f64::total_cmp);
    let tau0 = quantile_sorted(&q, SYNTH_TAU_CENTILE);

    let intercept = 0.02;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    noise_rng.set_stream(1);
    let mut rows = Vec::with_capacity(draws.len());
    let per_country = years.clone().count();
    for (c, chunk) in draws.chunks(per_country).enumerate() {
        let mut ln_y = vec![0.0; per_country];
        for (i, d) in chunk.iter().enumerate() {
            let below = d.x[9] < tau0;
            let mean = intercept
                + d.x.iter().zip(&BETA_EFFECT).map(|(x, b)| x * b).sum::<f64>()
                + if below {
                    d.x.iter().zip(&DELTA_EFFECT).map(|(x, b)| x * b).sum::<f64>()
                } else {
                    0.0
                };
            let target = mean + noise_sd * std_normal.sample(&mut noise_rng);
            if i < h as usize {
                ln_y[i] = base[c].ln() + 0.01 * i as f64;
            }
            if i + (h as usize) < per_country {
                ln_y[i + h as usize] = ln_y[i] + h as f64 * target;
            }
        }
        for (i, d) in chunk.iter().enumerate() {
            let mut controls: Vec<Option<f64>> = d.x[..9].iter().map(|&v| Some(v)).collect();
            if d.year == SYNTH_FIRST_YEAR {
                controls[0] = None;
                controls[4] = None;
            }
            if let Some(j) = d.missing {
                controls[j] = None;
            }
            rows.push(PanelRow {
                country: d.country.clone(),
                year: d.year,
                gdp: Some(round6(ln_y[i].exp())),
                debt: Some(d.x[9]),
                controls,
            });
        }
    }
    Ok(SyntheticPanel { rows, tau0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_growth_hand_example() {
        let g = forward_average_growth(&[(2000, 100.0), (2001, 110.0), (2002, 121.0)], 2);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].0, 2000);
        assert!((g[0].1 - 1.1f64.ln()).abs() < 1e-12);
        assert!((g[0].1 - 0.09531).abs() < 1e-5);
    }

    #[test]
    fn constant_growth_gives_constant_target() {
        let lv: Vec<(i32, f64)> = (0..12).map(|t| (1990 + t, 50.0 * (0.03 * t as f64).exp())).collect();
        let g = forward_average_growth(&lv, 5);
        assert_eq!(g.len(), 7);
        assert!(g.iter().all(|(_, v)| (v - 0.03).abs() < 1e-12));
        assert_eq!(forward_average_growth(&lv[..6], 5).len(), 1);
        assert!(forward_average_growth(&lv[..5], 5).is_empty());
    }

    #[test]
    fn gaps_do_not_produce_targets() {
        let g = forward_average_growth(&[(2000, 1.0), (2001, 2.0), (2003, 4.0)], 1);
        assert_eq!(g, vec![(2000, 2f64.ln())]);
    }

    #[test]
    fn filters() {
        assert!(SampleFilter::All.keeps(1900));
        let r = SampleFilter::YearRange { from: 1990, to: 2004 };
        assert!(r.keeps(1990) && r.keeps(2004) && !r.keeps(1989));
        assert!(SampleFilter::Years(vec![1984, 1989]).keeps(1989));
    }

    fn synth_rows() -> (SyntheticPanel, PanelSpec) {
        let p = synthetic_panel(0, 0, 0.0).unwrap();
        (p, SyntheticPanel::spec("unused.csv"))
    }

    #[test]
    fn synthetic_row_counts() {
        let (p, mut spec) = synth_rows();
        assert_eq!(p.rows.len(), 18 * 30);
        let full = build_panel_from_rows(&p.rows, &spec).unwrap();
        assert_eq!(full.counts.used, 414);
        assert_eq!(full.counts.no_target, 18 * 5);
        assert_eq!(full.counts.missing, 18 * 2);
        spec.filter = SampleFilter::YearRange { from: 1990, to: 2004 };
        assert_eq!(build_panel_from_rows(&p.rows, &spec).unwrap().counts.used, 252);
        spec.filter = SampleFilter::Years(vec![1984, 1989, 1994, 1999, 2004]);
        assert_eq!(build_panel_from_rows(&p.rows, &spec).unwrap().counts.used, 90);
    }

    #[test]
    fn design_layout() {
        let (p, mut spec) = synth_rows();
        let panel = build_panel_from_rows(&p.rows, &spec).unwrap();
        let ds = &panel.dataset;
        // intercept, nine controls, debt
        assert_eq!(ds.m(), 11);
        assert_eq!(ds.labels()[0], "intercept");
        assert_eq!(ds.labels()[10], SYNTH_DEBT);
        assert!(!ds.penalized()[0] && !ds.penalized()[11]);
        assert!(ds.penalized()[1..11].iter().all(|&b| b));
        spec.fixed_effects = true;
        let fe = build_panel_from_rows(&p.rows, &spec).unwrap();
        assert_eq!(fe.dataset.fixed().ncols(), 17);
        assert_eq!(fe.dataset.penalized().len(), 22 + 17);
        assert!(fe.dataset.penalized()[22..].iter().all(|&b| !b));
    }

    #[test]
    fn planted_tau_is_a_grid_point() {
        let (p, spec) = synth_rows();
        let panel = build_panel_from_rows(&p.rows, &spec).unwrap();
        let grid = crate::estimator::candidate_taus(panel.dataset.q(), &spec.grid).unwrap();
        assert_eq!(grid.values()[9], p.tau0);
    }

    #[test]
    fn missing_column_is_reported() {
        let (p, mut spec) = synth_rows();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        spec.controls.push("nosuch".into());
        let err = read_panel(&buf[..], &spec).unwrap_err();
        assert!(err.to_string().contains("nosuch"));
    }

    #[test]
    fn csv_round_trip_keeps_rows() {
        let (p, spec) = synth_rows();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let rows = read_panel(&buf[..], &spec).unwrap();
        assert_eq!(rows.len(), p.rows.len());
        assert_eq!(rows[0].controls[0], None);
        assert_eq!(rows[1].debt, p.rows[1].debt);
    }

    #[test]
    fn report_cells() {
        assert_eq!(cell(Some(0.0)), "");
        assert_eq!(cell(None), "-");
        assert_eq!(cell(Some(-0.5)), "-0.500000");
    }
}
