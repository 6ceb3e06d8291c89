//! Monte Carlo calibration of the estimators against synthetic ground truth.
//!
//! Every replicate draws from its own substream of the master seed and
//! results are collected in replicate order, so reports are identical for a
//! given seed whatever the thread count.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::omori::{
    cumulative_curve, detect_events, fit_omori, portfolio_curve, split_displaced, FitRange, OmoriFit, Side,
};
use crate::rng::{substream, substream2};
use crate::stats::{self, DayExceedances};
use crate::synth::{
    simulate_market_day, simulate_marked_omori, simulate_omori, MarkBand, MarketDaySpec, NoiseModel,
    OmoriProcessSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationConfig {
    pub omegas: Vec<f64>,
    pub expected_events: f64,
    pub horizon: u32,
    pub replicates: usize,
    pub null_replicates: usize,
    pub test_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            omegas: vec![-0.2, 0.0, 0.24, 0.5],
            expected_events: 500.0,
            horizon: 285,
            replicates: 100,
            null_replicates: 200,
            test_replicates: 1000,
            alpha: 0.05,
            seed: 42,
        }
    }
}

/// Pass thresholds.
pub const MAX_ABS_BIAS: f64 = 0.05;
pub const MAX_RMSE: f64 = 0.08;
pub const MIN_NULL_COVERAGE: f64 = 0.90;
pub const MIN_AMPLITUDE_ORDERING: f64 = 0.90;
pub const MIN_MONOTONE_SHARE: f64 = 0.95;
/// Allowed deviation of a rejection rate from α, in binomial standard errors.
pub const REJECTION_RATE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub omega_true: f64,
    pub mean_omega: f64,
    pub bias: f64,
    pub rmse: f64,
    pub sd: f64,
    /// Share of replicates with `|Ω̂ − Ω| ≤ 2 se`.
    pub coverage_2se: f64,
    pub mean_events: f64,
    pub mean_acceptance: f64,
    pub n_fitted: usize,
    pub n_failed: usize,
    pub pass: bool,
}

fn fit_replicates(spec: OmoriProcessSpec, replicates: usize, seed: u64) -> Vec<(Option<OmoriFit>, usize, f64)> {
    let range = FitRange {
        tau_min: 1,
        tau_max: spec.horizon as usize,
    };
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let s = simulate_omori(&OmoriProcessSpec {
                seed: substream(seed, r as u64).random(),
                ..spec
            })
            .expect("validated spec");
            (fit_omori(&s.curve(), range, 1).ok(), s.len(), s.acceptance_rate())
        })
        .collect()
}

/// Bias and RMSE of the fitted exponent for one true value.
pub fn omega_recovery(omega: f64, cfg: &CalibrationConfig, seed: u64) -> Result<RecoveryRow> {
    let spec = OmoriProcessSpec::with_expected_count(omega, cfg.expected_events, cfg.horizon, Side::After, 0)?;
    let reps = fit_replicates(spec, cfg.replicates, seed);
    let fits: Vec<&OmoriFit> = reps.iter().filter_map(|r| r.0.as_ref()).collect();
    if fits.is_empty() {
        return Err(Error::InsufficientData("every replicate fit failed".into()));
    }
    let est: Vec<f64> = fits.iter().map(|f| f.omega).collect();
    let mean = stats::mean(&est);
    let rmse = (est.iter().map(|e| (e - omega).powi(2)).sum::<f64>() / est.len() as f64).sqrt();
    let covered = fits.iter().filter(|f| (f.omega - omega).abs() <= 2.0 * f.omega_se).count();
    let bias = mean - omega;
    Ok(RecoveryRow {
        omega_true: omega,
        mean_omega: mean,
        bias,
        rmse,
        sd: if est.len() > 1 { stats::sample_std(&est) } else { 0.0 },
        coverage_2se: covered as f64 / fits.len() as f64,
        mean_events: reps.iter().map(|r| r.1 as f64).sum::<f64>() / reps.len() as f64,
        mean_acceptance: reps.iter().map(|r| r.2).sum::<f64>() / reps.len() as f64,
        n_fitted: fits.len(),
        n_failed: reps.len() - fits.len(),
        pass: bias.abs() <= MAX_ABS_BIAS && rmse <= MAX_RMSE && fits.len() == reps.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullRow {
    pub replicates: usize,
    /// Share with `|Ω̂| ≤ 2 se`.
    pub within_2se: f64,
    /// Same share using the independent-residual OLS error.
    pub within_2se_ols: f64,
    pub mean_omega: f64,
    pub pass: bool,
}

/// Homogeneous Poisson input: how often is `Ω̂` within two standard errors of 0?
pub fn null_calibration(cfg: &CalibrationConfig, seed: u64) -> Result<NullRow> {
    let spec = OmoriProcessSpec::with_expected_count(0.0, cfg.expected_events, cfg.horizon, Side::After, 0)?;
    let reps = fit_replicates(spec, cfg.null_replicates, seed);
    let fits: Vec<&OmoriFit> = reps.iter().filter_map(|r| r.0.as_ref()).collect();
    let n = reps.len() as f64;
    let within = fits.iter().filter(|f| f.omega.abs() <= 2.0 * f.omega_se).count() as f64 / n;
    let within_ols = fits.iter().filter(|f| f.omega.abs() <= 2.0 * f.omega_se_ols).count() as f64 / n;
    Ok(NullRow {
        replicates: reps.len(),
        within_2se: within,
        within_2se_ols: within_ols,
        mean_omega: stats::mean(&fits.iter().map(|f| f.omega).collect::<Vec<_>>()),
        pass: within >= MIN_NULL_COVERAGE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeRow {
    pub beta_before: f64,
    pub beta_after: f64,
    pub n_stocks: usize,
    pub replicates: usize,
    /// Share of seeds with `β̂_b < β̂_a` for the portfolio fit.
    pub ordered: f64,
    /// Same share for the first stock of each ensemble fitted alone.
    pub ordered_single_stock: f64,
    pub n_failed: usize,
    pub pass: bool,
}

/// Planted `β_b < β_a` on synthetic market days of an `n_stocks` ensemble,
/// recovered through event detection, the displaced split and a portfolio
/// fit on each side.
pub fn amplitude_asymmetry(
    beta_before: f64,
    beta_after: f64,
    n_stocks: usize,
    replicates: usize,
    seed: u64,
) -> Result<AmplitudeRow> {
    if n_stocks == 0 {
        return Err(Error::param("ensemble needs at least one stock"));
    }
    let t0 = crate::SCHEDULED_ANNOUNCE_MINUTE as usize;
    let range = FitRange::same_day(t0)?;
    let date = NaiveDate::from_ymd_opt(2001, 8, 21).expect("valid date");
    let outcomes: Vec<Option<(bool, bool)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut before = Vec::with_capacity(n_stocks);
            let mut after = Vec::with_capacity(n_stocks);
            for j in 0..n_stocks {
                let mut rng = substream2(seed, r as u64, j as u64);
                let spec = MarketDaySpec {
                    announce: t0,
                    before: Some(
                        OmoriProcessSpec::new(0.0, beta_before, (t0 - 1) as u32, Side::Before, rng.random()).ok()?,
                    ),
                    after: Some(
                        OmoriProcessSpec::new(
                            0.24,
                            beta_after,
                            (crate::MINUTES_PER_DAY - 1 - t0) as u32,
                            Side::After,
                            rng.random(),
                        )
                        .ok()?,
                    ),
                    baseline_rate: 0.0,
                    noise: NoiseModel::default(),
                    seed: rng.random(),
                };
                let day = simulate_market_day("SYN", date, &spec).ok()?;
                let d = split_displaced(&cumulative_curve(&detect_events(&day.to_series(), 3.0), t0).ok()?);
                before.push(d.before);
                after.push(d.after);
            }
            let single = match (fit_omori(&before[0], range, 1), fit_omori(&after[0], range, 1)) {
                (Ok(b), Ok(a)) => b.beta < a.beta,
                _ => false,
            };
            let b = fit_omori(&portfolio_curve(&before).ok()?, range, n_stocks).ok()?;
            let a = fit_omori(&portfolio_curve(&after).ok()?, range, n_stocks).ok()?;
            Some((b.beta < a.beta, single))
        })
        .collect();
    let share = |f: &dyn Fn(&(bool, bool)) -> bool| {
        outcomes.iter().filter(|o| o.as_ref().is_some_and(f)).count() as f64 / replicates as f64
    };
    let ordered = share(&|o| o.0);
    Ok(AmplitudeRow {
        beta_before,
        beta_after,
        n_stocks,
        replicates,
        ordered,
        ordered_single_stock: share(&|o| o.1),
        n_failed: outcomes.iter().filter(|o| o.is_none()).count(),
        pass: ordered >= MIN_AMPLITUDE_ORDERING,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityRow {
    pub q: Vec<f64>,
    pub band_omegas: Vec<f64>,
    pub events_per_band: f64,
    pub replicates: usize,
    /// Mean fitted Ω at each q.
    pub mean_omega: Vec<f64>,
    /// Share of seeds whose Ω̂(q) is nondecreasing with every fit present.
    pub monotone: f64,
    pub pass: bool,
}

/// Marked process with tighter clustering at higher marks; the sweep should
/// recover a nondecreasing `Ω(q)`.
pub fn q_monotonicity(
    q: &[f64],
    band_omegas: &[f64],
    events_per_band: f64,
    horizon: u32,
    replicates: usize,
    seed: u64,
) -> Result<MonotonicityRow> {
    if q.len() != band_omegas.len() {
        return Err(Error::param("one exponent per band threshold"));
    }
    let range = FitRange::new(1, horizon as usize)?;
    let sweeps: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let bands = q
                .iter()
                .zip(band_omegas)
                .enumerate()
                .map(|(k, (&ql, &om))| {
                    let seed = substream2(seed, r as u64, k as u64).random();
                    OmoriProcessSpec::with_expected_count(om, events_per_band, horizon, Side::After, seed)
                        .map(|process| MarkBand { q_lower: ql, process })
                })
                .collect::<Result<Vec<_>>>()
                .ok()?;
            let stream = simulate_marked_omori(&bands).ok()?;
            stream
                .sweep(q, range)
                .ok()?
                .into_iter()
                .map(|p| p.after.map(|f| f.omega))
                .collect()
        })
        .collect();
    let complete: Vec<&Vec<f64>> = sweeps.iter().flatten().collect();
    let monotone = complete
        .iter()
        .filter(|s| s.windows(2).all(|w| w[0] <= w[1]))
        .count() as f64
        / replicates as f64;
    let mean_omega = (0..q.len())
        .map(|k| stats::mean(&complete.iter().map(|s| s[k]).collect::<Vec<_>>()))
        .collect();
    Ok(MonotonicityRow {
        q: q.to_vec(),
        band_omegas: band_omegas.to_vec(),
        events_per_band,
        replicates,
        mean_omega,
        monotone,
        pass: monotone >= MIN_MONOTONE_SHARE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub test: String,
    pub replicates: usize,
    pub alpha: f64,
    pub rejection_rate: f64,
    pub binomial_se: f64,
    pub pass: bool,
}

fn rejection_row(test: &str, rejects: &[bool], alpha: f64) -> RejectionRow {
    let n = rejects.len();
    let rate = rejects.iter().filter(|r| **r).count() as f64 / n as f64;
    let se = (alpha * (1.0 - alpha) / n as f64).sqrt();
    RejectionRow {
        test: test.to_string(),
        replicates: n,
        alpha,
        rejection_rate: rate,
        binomial_se: se,
        pass: (rate - alpha).abs() <= REJECTION_RATE_SIGMAS * se,
    }
}

fn normals(rng: &mut crate::rng::StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Rejection rates of the four tests on data simulated under their nulls.
pub fn test_calibration(replicates: usize, alpha: f64, seed: u64) -> Result<Vec<RejectionRow>> {
    let run = |k: u64, f: &(dyn Fn(&mut crate::rng::StreamRng) -> Result<bool> + Sync)| {
        (0..replicates)
            .into_par_iter()
            .map(|r| f(&mut substream2(seed, k, r as u64)))
            .collect::<Result<Vec<bool>>>()
    };
    let t = run(0, &|rng| {
        let x: Vec<f64> = normals(rng, 20).iter().map(|z| 1.3 + 0.7 * z).collect();
        Ok(stats::t_test_mean(&x, 1.3, alpha)?.reject)
    })?;
    let z = run(1, &|rng| {
        let pop: Vec<f64> = normals(rng, 1000).iter().map(|z| 1.0 + 0.4 * z).collect();
        let mut idx: Vec<usize> = (0..pop.len()).collect();
        idx.shuffle(rng);
        let sub: Vec<f64> = idx[..50].iter().map(|&i| pop[i]).collect();
        Ok(stats::z_test_shift(&sub, &pop, alpha)?.reject)
    })?;
    let f = run(2, &|rng| {
        let x = normals(rng, 66);
        let y = normals(rng, 66);
        Ok(stats::anova_f_test(&x, &y, alpha)?.reject)
    })?;
    let b = run(3, &|rng| {
        let days: Vec<DayExceedances> = (0..100)
            .map(|d| DayExceedances {
                is_announcement: d % 10 == 0,
                exceedances: (0..389).filter(|_| rng.random::<f64>() < 0.04).count() as u64,
                minutes: 389,
            })
            .collect();
        Ok(stats::concentration_test(&days, alpha)?.reject)
    })?;
    Ok(vec![
        rejection_row("t_test_mean", &t, alpha),
        rejection_row("z_test_shift", &z, alpha),
        rejection_row("anova_f", &f, alpha),
        rejection_row("concentration", &b, alpha),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub config: CalibrationConfig,
    pub recovery: Vec<RecoveryRow>,
    pub null: NullRow,
    pub amplitude: AmplitudeRow,
    pub monotonicity: MonotonicityRow,
    pub tests: Vec<RejectionRow>,
}

impl CalibrationReport {
    pub fn all_pass(&self) -> bool {
        self.recovery.iter().all(|r| r.pass)
            && self.null.pass
            && self.amplitude.pass
            && self.monotonicity.pass
            && self.tests.iter().all(|t| t.pass)
    }

    /// One line per check.
    pub fn summary_lines(&self) -> Vec<String> {
        let mark = |p: bool| if p { "PASS" } else { "FAIL" };
        let mut out = Vec::new();
        for r in &self.recovery {
            out.push(format!(
                "{} recovery omega={:+.2}: mean {:.4} bias {:+.4} rmse {:.4} (|bias| <= {MAX_ABS_BIAS}, rmse <= {MAX_RMSE})",
                mark(r.pass),
                r.omega_true,
                r.mean_omega,
                r.bias,
                r.rmse
            ));
        }
        out.push(format!(
            "{} null: |omega| <= 2 se in {:.3} of {} (>= {MIN_NULL_COVERAGE}); ols se {:.3}",
            mark(self.null.pass),
            self.null.within_2se,
            self.null.replicates,
            self.null.within_2se_ols
        ));
        out.push(format!(
            "{} amplitude: beta_b < beta_a in {:.3} of {} (>= {MIN_AMPLITUDE_ORDERING}); single stock {:.3}",
            mark(self.amplitude.pass),
            self.amplitude.ordered,
            self.amplitude.replicates,
            self.amplitude.ordered_single_stock
        ));
        out.push(format!(
            "{} monotonicity: omega(q) nondecreasing in {:.3} of {} (>= {MIN_MONOTONE_SHARE}); means {:?}",
            mark(self.monotonicity.pass),
            self.monotonicity.monotone,
            self.monotonicity.replicates,
            self.monotonicity
                .mean_omega
                .iter()
                .map(|x| (x * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ));
        for t in &self.tests {
            out.push(format!(
                "{} {}: rejection rate {:.4} vs alpha {} (+/- {:.4})",
                mark(t.pass),
                t.test,
                t.rejection_rate,
                t.alpha,
                REJECTION_RATE_SIGMAS * t.binomial_se
            ));
        }
        out
    }
}

/// Default marked-process bands: lower mark thresholds and their exponents.
pub const MARK_BANDS: [(f64, f64); 4] = [(2.0, 0.0), (3.0, 0.2), (4.0, 0.4), (5.0, 0.6)];
pub const EVENTS_PER_BAND: f64 = 300.0;
pub const PLANTED_BETA_BEFORE: f64 = 0.3;
pub const PLANTED_BETA_AFTER: f64 = 0.9;
/// Stocks per ensemble in the amplitude check.
pub const AMPLITUDE_STOCKS: usize = 100;

/// Runs the full suite; each part gets its own derived seed.
pub fn run_calibration(cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    if cfg.replicates == 0 || cfg.null_replicates == 0 || cfg.test_replicates == 0 {
        return Err(Error::param("replicate counts must be positive"));
    }
    let seed = |k: u64| -> u64 { substream(cfg.seed, 1000 + k).random() };
    let recovery = cfg
        .omegas
        .iter()
        .enumerate()
        .map(|(k, &om)| omega_recovery(om, cfg, seed(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let (q, om): (Vec<f64>, Vec<f64>) = MARK_BANDS.iter().copied().unzip();
    Ok(CalibrationReport {
        config: cfg.clone(),
        recovery,
        null: null_calibration(cfg, seed(100))?,
        amplitude: amplitude_asymmetry(
            PLANTED_BETA_BEFORE,
            PLANTED_BETA_AFTER,
            AMPLITUDE_STOCKS,
            cfg.replicates,
            seed(101),
        )?,
        monotonicity: q_monotonicity(&q, &om, EVENTS_PER_BAND, cfg.horizon, cfg.replicates, seed(102))?,
        tests: test_calibration(cfg.test_replicates, cfg.alpha, seed(103))?,
    })
}
