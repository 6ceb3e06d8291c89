//! Announcement-level metrics.
//!
//! * relative spread `δ(t) = ln(F(t)/T(t))` between the effective funds rate
//!   and the 6-month bill,
//! * speculation `Θ`: exponentially weighted mean of δ over the `L₁`
//!   trading days before the meeting,
//! * surprise `Δ`: weighted mean before minus weighted mean after, signed by
//!   the direction of the rate decision,
//! * event-day volatility `V`: volume-weighted cross-stock mean of the
//!   normalised high-low range,
//! * the ensemble profile `⟨v(Δt)⟩` over all stocks and meetings.
//!
//! All offsets are in trading days.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{event_window, AnnouncementEvent, DailyBarSet, RateSeries, TradingCalendar};
use crate::ols::{fit_line, LineFit};
use crate::preprocess::{volatility_window, volume_weight, DailyVolatilityWindow, VolumeBaseline};
use crate::rng::substream;
use crate::stats::{anova_from_fit, kahan_sum, TestResult};

/// δ(t) on the rate calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadSeries {
    calendar: TradingCalendar,
    pub delta: Vec<f64>,
}

impl SpreadSeries {
    pub fn new(calendar: TradingCalendar, delta: Vec<f64>) -> Result<Self> {
        if calendar.len() != delta.len() {
            return Err(Error::param("spread values must match the calendar"));
        }
        Ok(Self { calendar, delta })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn at(&self, date: NaiveDate) -> Option<f64> {
        self.calendar.index_of(date).map(|i| self.delta[i])
    }
}

/// `δ(t) = ln(F(t) / T(t))`.
pub fn relative_spread(rates: &RateSeries) -> Result<SpreadSeries> {
    let delta = rates
        .effective
        .iter()
        .zip(&rates.tbill6m)
        .zip(rates.dates())
        .map(|((f, t), d)| {
            if *f > 0.0 && *t > 0.0 {
                Ok((f / t).ln())
            } else {
                Err(Error::param(format!("non-positive rate on {d}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SpreadSeries::new(rates.calendar().clone(), delta)
}

/// Exponential weights `w(Δt) = e^{−Δt/λ}` for `Δt ∈ [1, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightProfile {
    pub lambda: f64,
    pub horizon: usize,
}

impl Default for WeightProfile {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            horizon: 15,
        }
    }
}

impl WeightProfile {
    pub fn new(lambda: f64, horizon: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {lambda}")));
        }
        if horizon < 1 {
            return Err(Error::param("weight horizon must be at least 1 day"));
        }
        Ok(Self { lambda, horizon })
    }

    /// Weights for `Δt = 1..=L`.
    pub fn weights(&self) -> Vec<f64> {
        (1..=self.horizon)
            .map(|dt| (-(dt as f64) / self.lambda).exp())
            .collect()
    }

    fn weighted_mean(&self, values: impl Iterator<Item = f64>) -> f64 {
        let w = self.weights();
        let num = kahan_sum(values.zip(&w).map(|(v, w)| v * w));
        num / kahan_sum(w.iter().copied())
    }
}

fn event_index(spread: &SpreadSeries, date: NaiveDate) -> Result<usize> {
    spread.calendar.index_of(date).ok_or(Error::NotTradingDay(date))
}

/// Speculation `Θ`: weighted mean of `δ(t_i − Δt)` over `Δt ∈ [1, L]`.
pub fn speculation_theta(
    spread: &SpreadSeries,
    event_date: NaiveDate,
    profile: &WeightProfile,
) -> Result<f64> {
    let i = event_index(spread, event_date)?;
    if i < profile.horizon {
        return Err(Error::InsufficientData(format!(
            "{event_date}: {i} days of spread history, {} needed",
            profile.horizon
        )));
    }
    Ok(profile.weighted_mean((1..=profile.horizon).map(|dt| spread.delta[i - dt])))
}

/// Surprise `Δ = (before − after) · S(ΔR)`, both sides weighted over
/// `Δt ∈ [1, L]` and excluding the meeting day itself.
pub fn surprise_delta(
    spread: &SpreadSeries,
    event: &AnnouncementEvent,
    profile: &WeightProfile,
) -> Result<f64> {
    let i = event_index(spread, event.date)?;
    let l = profile.horizon;
    if i < l || i + l >= spread.delta.len() {
        return Err(Error::InsufficientData(format!(
            "{}: surprise needs {l} spread days on both sides",
            event.date
        )));
    }
    let before = profile.weighted_mean((1..=l).map(|dt| spread.delta[i - dt]));
    let after = profile.weighted_mean((1..=l).map(|dt| spread.delta[i + dt]));
    Ok((before - after) * event.rate_sign())
}

/// `V = Σ v_j φ_j / Σ φ_j` over the stocks observed on the event day.
pub fn event_day_volatility(observations: &[(f64, f64)]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::InsufficientData("no stocks on the event day".into()));
    }
    let den = kahan_sum(observations.iter().map(|(_, phi)| *phi));
    if !(den > 0.0) {
        return Err(Error::degenerate("volume weights sum to zero"));
    }
    Ok(kahan_sum(observations.iter().map(|(v, phi)| v * phi)) / den)
}

/// One (stock, meeting) contribution to the ensemble profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileInput {
    pub window: DailyVolatilityWindow,
    /// Volume weight against the window-mean baseline.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolatilityProfile {
    pub half_width: usize,
    pub mean: Vec<f64>,
    /// Standard deviation of the profile under within-window circular shuffles.
    pub sigma: Vec<f64>,
    pub n_pairs: usize,
}

impl VolatilityProfile {
    pub fn at(&self, dt: i64) -> Option<f64> {
        let i = self.half_width as i64 + dt;
        (i >= 0).then(|| self.mean.get(i as usize).copied()).flatten()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dt", "v_mean", "v_sigma"])?;
        let hw = self.half_width as i64;
        for (k, (m, s)) in self.mean.iter().zip(&self.sigma).enumerate() {
            w.write_record([(k as i64 - hw).to_string(), m.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<profile writer>", e))?;
        Ok(())
    }
}

fn weighted_profile<'a>(
    inputs: &'a [ProfileInput],
    len: usize,
    series: impl Fn(usize) -> &'a [f64] + Sync,
) -> Vec<f64> {
    let den = kahan_sum(inputs.iter().map(|p| p.phi));
    (0..len)
        .map(|k| kahan_sum(inputs.iter().enumerate().map(|(j, p)| series(j)[k] * p.phi)) / den)
        .collect()
}

/// `⟨v(Δt)⟩ = Σ v(t_i + Δt) φ / Σ φ` over all (stock, meeting) pairs.
///
/// The dispersion band comes from `shuffles` replicates in which each
/// window is rotated by an independent random offset, removing any
/// alignment with the meeting day. Replicate `r` draws from substream `r`
/// of `seed`.
pub fn volatility_profile(inputs: &[ProfileInput], shuffles: usize, seed: u64) -> Result<VolatilityProfile> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InsufficientData("no (stock, meeting) pairs for the profile".into()))?;
    let hw = first.window.half_width;
    let len = 2 * hw + 1;
    if inputs.iter().any(|p| p.window.v.len() != len) {
        return Err(Error::param("profile windows must share the half-width"));
    }
    if !(kahan_sum(inputs.iter().map(|p| p.phi)) > 0.0) {
        return Err(Error::degenerate("volume weights sum to zero"));
    }
    let mean = weighted_profile(inputs, len, |j| &inputs[j].window.v);

    let sigma = if shuffles >= 2 {
        let replicates: Vec<Vec<f64>> = (0..shuffles)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, r as u64);
                let rotated: Vec<Vec<f64>> = inputs
                    .iter()
                    .map(|p| {
                        let mut v = p.window.v.clone();
                        v.rotate_left(rng.random_range(0..len));
                        v
                    })
                    .collect();
                weighted_profile(inputs, len, |j| &rotated[j])
            })
            .collect();
        (0..len)
            .map(|k| {
                let col: Vec<f64> = replicates.iter().map(|r| r[k]).collect();
                crate::stats::sample_std(&col)
            })
            .collect()
    } else {
        vec![0.0; len]
    };

    Ok(VolatilityProfile {
        half_width: hw,
        mean,
        sigma,
        n_pairs: inputs.len(),
    })
}

/// OLS of `V` on `Θ` with the ANOVA F test of zero slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRegression {
    pub fit: LineFit,
    pub anova: TestResult,
}

pub fn theta_volatility_regression(theta: &[f64], v: &[f64], alpha: f64) -> Result<ThetaRegression> {
    if theta.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Θ–V regression needs at least 3 events, got {}",
            theta.len()
        )));
    }
    let fit = fit_line(theta, v).map_err(|e| match e {
        Error::Degenerate(_) => Error::degenerate("Θ has zero variance"),
        e => e,
    })?;
    let mut anova = anova_from_fit(&fit, alpha);
    anova.name = "anova_theta_v".into();
    Ok(ThetaRegression { fit, anova })
}

/// Which events enter the Θ–V regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegressionSubset {
    #[default]
    All,
    RateChangesOnly,
}

/// One row of `event_metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventMetrics {
    pub event_date: NaiveDate,
    pub theta: f64,
    pub delta: f64,
    pub sign: i8,
    #[serde(rename = "V")]
    pub v: f64,
    pub n_stocks: usize,
    #[serde(skip)]
    pub rate_change: bool,
}

/// An event left out of the metric table, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedEvent {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyConfig {
    pub speculation: WeightProfile,
    pub surprise: WeightProfile,
    pub half_width: usize,
}

impl Default for DailyConfig {
    fn default() -> Self {
        Self {
            speculation: WeightProfile::default(),
            surprise: WeightProfile::default(),
            half_width: 20,
        }
    }
}

/// Θ, Δ and V for every event, plus the windows feeding the ensemble profile.
#[derive(Debug, Clone)]
pub struct DailyMetrics {
    pub events: Vec<EventMetrics>,
    pub dropped: Vec<DroppedEvent>,
    pub profile_inputs: Vec<ProfileInput>,
}

pub fn compute_daily_metrics(
    spread: &SpreadSeries,
    events: &[AnnouncementEvent],
    daily: &DailyBarSet,
    config: &DailyConfig,
) -> DailyMetrics {
    let mut out = DailyMetrics {
        events: Vec::new(),
        dropped: Vec::new(),
        profile_inputs: Vec::new(),
    };
    for ev in events {
        let mut drop = |reason: String| {
            log::info!("dropping event {}: {reason}", ev.date);
            out.dropped.push(DroppedEvent {
                date: ev.date,
                reason,
            });
        };
        let theta = match speculation_theta(spread, ev.date, &config.speculation) {
            Ok(t) => t,
            Err(e) => {
                drop(e.to_string());
                continue;
            }
        };
        let delta = match surprise_delta(spread, ev, &config.surprise) {
            Ok(d) => d,
            Err(e) => {
                drop(e.to_string());
                continue;
            }
        };
        let mut day_obs = Vec::new();
        let mut profile = Vec::new();
        for series in daily.series.values() {
            let Ok(win) = event_window(series, ev.date, config.half_width) else {
                continue;
            };
            let Ok(vol) = volatility_window(&win) else {
                continue;
            };
            let v0 = vol.at(0).expect("window contains the event day");
            if let Ok(w) = volume_weight(series, ev.date, VolumeBaseline::WholePeriod) {
                day_obs.push((v0, w.phi));
            }
            if let Ok(w) = volume_weight(series, ev.date, VolumeBaseline::Window(config.half_width)) {
                profile.push(ProfileInput {
                    window: vol,
                    phi: w.phi,
                });
            }
        }
        let v = match event_day_volatility(&day_obs) {
            Ok(v) => v,
            Err(e) => {
                drop(e.to_string());
                continue;
            }
        };
        out.profile_inputs.extend(profile);
        out.events.push(EventMetrics {
            event_date: ev.date,
            theta,
            delta,
            sign: ev.rate_sign() as i8,
            v,
            n_stocks: day_obs.len(),
            rate_change: ev.delta_r != 0.0,
        });
    }
    out
}

pub fn write_event_metrics<W: Write>(writer: W, rows: &[EventMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["event_date", "theta", "delta", "sign", "V", "n_stocks"])?;
    for r in rows {
        w.write_record([
            r.event_date.to_string(),
            r.theta.to_string(),
            r.delta.to_string(),
            r.sign.to_string(),
            r.v.to_string(),
            r.n_stocks.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics writer>", e))?;
    Ok(())
}

/// Groups profile inputs by ticker (sector-level profiles).
pub fn inputs_by_ticker(inputs: &[ProfileInput]) -> BTreeMap<&str, Vec<&ProfileInput>> {
    let mut m: BTreeMap<&str, Vec<&ProfileInput>> = BTreeMap::new();
    for p in inputs {
        m.entry(p.window.ticker.as_str()).or_default().push(p);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start: NaiveDate = "2001-01-01".parse().unwrap();
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn spread(values: Vec<f64>) -> SpreadSeries {
        SpreadSeries::new(TradingCalendar::new(dates(values.len())).unwrap(), values).unwrap()
    }

    #[test]
    fn spread_examples() {
        let d = dates(2);
        let rates = RateSeries::new(d, vec![5.0, 5.0], vec![5.0, 2.0], vec![5.0, 1.0]).unwrap();
        let s = relative_spread(&rates).unwrap();
        assert_eq!(s.delta[0], 0.0);
        assert!((s.delta[1] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn theta_examples() {
        let prof = WeightProfile::new(10.0, 15).unwrap();
        let s = spread(vec![0.3; 40]);
        let date = s.calendar().date_at(20).unwrap();
        assert!((speculation_theta(&s, date, &prof).unwrap() - 0.3).abs() < 1e-15);
        let s0 = spread(vec![0.0; 40]);
        assert_eq!(speculation_theta(&s0, date, &prof).unwrap(), 0.0);

        // δ(t_i − Δt) = Δt, L = 3, λ = 10
        let mut v = vec![0.0; 10];
        for dt in 1..=3 {
            v[5 - dt] = dt as f64;
        }
        let s = spread(v);
        let prof = WeightProfile::new(10.0, 3).unwrap();
        let (e1, e2, e3) = ((-0.1f64).exp(), (-0.2f64).exp(), (-0.3f64).exp());
        let want = (e1 + 2.0 * e2 + 3.0 * e3) / (e1 + e2 + e3);
        let got = speculation_theta(&s, s.calendar().date_at(5).unwrap(), &prof).unwrap();
        assert!((got - want).abs() < 1e-15);

        assert!(matches!(
            speculation_theta(&s, s.calendar().date_at(2).unwrap(), &prof),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn delta_examples() {
        let prof = WeightProfile::default();
        let s = spread(vec![0.2; 40]);
        let date = s.calendar().date_at(20).unwrap();
        let ev = AnnouncementEvent::scheduled(date, 2.0, 0.25).unwrap();
        assert_eq!(surprise_delta(&s, &ev, &prof).unwrap(), 0.0);

        let dd = 0.7;
        let step: Vec<f64> = (0..40).map(|i| if i > 20 { dd } else { 0.0 }).collect();
        let s = spread(step);
        let up = AnnouncementEvent::scheduled(date, 2.0, 0.25).unwrap();
        assert!((surprise_delta(&s, &up, &prof).unwrap() + dd).abs() < 1e-15);
        // 11/06/02: ΔR = −0.5, the sign flips the window difference
        let cut = AnnouncementEvent::scheduled(date, 1.25, -0.5).unwrap();
        assert!((surprise_delta(&s, &cut, &prof).unwrap() - dd).abs() < 1e-15);

        let late = AnnouncementEvent::scheduled(s.calendar().date_at(30).unwrap(), 1.0, 0.0).unwrap();
        assert!(surprise_delta(&s, &late, &prof).is_err());
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(event_day_volatility(&[(1.0, 0.3), (1.0, 5.0)]).unwrap(), 1.0);
        assert_eq!(event_day_volatility(&[(1.0, 1.0), (3.0, 1.0)]).unwrap(), 2.0);
        assert!(event_day_volatility(&[(1.0, 0.0)]).is_err());
        assert!(event_day_volatility(&[]).is_err());
    }

    fn window(v: Vec<f64>) -> DailyVolatilityWindow {
        DailyVolatilityWindow {
            ticker: "A".into(),
            event_date: "2001-01-01".parse().unwrap(),
            half_width: v.len() / 2,
            v,
            mean_range: 1.0,
        }
    }

    #[test]
    fn profile_examples() {
        let ones: Vec<_> = (0..5).map(|_| ProfileInput { window: window(vec![1.0; 41]), phi: 1.3 }).collect();
        let p = volatility_profile(&ones, 20, 1).unwrap();
        assert!(p.mean.iter().all(|m| (m - 1.0).abs() < 1e-15));
        assert_eq!(p.mean.len(), 41);

        let single = [ProfileInput { window: window(vec![0.5, 1.5, 1.0]), phi: 2.0 }];
        let p = volatility_profile(&single, 0, 1).unwrap();
        assert_eq!(p.mean, vec![0.5, 1.5, 1.0]);
        assert!(volatility_profile(&[], 10, 1).is_err());
    }

    #[test]
    fn profile_is_seed_deterministic() {
        let inputs: Vec<_> = (0..7)
            .map(|j| ProfileInput {
                window: window((0..41).map(|k| 0.5 + ((j * 41 + k) % 13) as f64 / 13.0).collect()),
                phi: 1.0 + j as f64,
            })
            .collect();
        let a = volatility_profile(&inputs, 50, 9).unwrap();
        let b = volatility_profile(&inputs, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.sigma.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn regression_examples() {
        let theta = [-0.2, -0.1, 0.0, 0.15, 0.3];
        let v: Vec<f64> = theta.iter().map(|t| 0.36 * t + 1.0).collect();
        let r = theta_volatility_regression(&theta, &v, 0.05).unwrap();
        assert!((r.fit.slope - 0.36).abs() < 1e-12);
        assert!((r.fit.r2 - 1.0).abs() < 1e-12);
        assert!(r.anova.reject);
        assert!(matches!(
            theta_volatility_regression(&[0.1; 4], &[1.0, 2.0, 3.0, 4.0], 0.05),
            Err(Error::Degenerate(_))
        ));
        assert!(theta_volatility_regression(&[0.1, 0.2], &[1.0, 2.0], 0.05).is_err());
    }
}
