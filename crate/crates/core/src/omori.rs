//! Omori-law relaxation around an announcement.
//!
//! Minutes with detrended volatility above a threshold `q` are events. Their
//! cumulative count is split at the announcement minute `T` into a before
//! curve and an after curve, both indexed by the displaced time
//! `τ = |t − T| ≥ 1`:
//!
//! ```text
//! N_b(τ) = #{ events t : T − τ ≤ t < T }
//! N_a(τ) = #{ events t : T ≤ t ≤ T + τ }
//! ```
//!
//! An event exactly at `T` belongs to the after curve from `τ = 1` on. Each
//! curve is fitted with `N(τ) = β τ^{1−Ω}` by least squares on
//! `ln N = ln β + (1 − Ω) ln τ`, using every integer `τ` in the fit range
//! with `N(τ) > 0`.
//!
//! Consecutive points of a cumulative curve share most of their events, so
//! the textbook OLS standard errors are far too small. The reported errors
//! instead propagate the counting-process covariance
//! `Cov(N(s), N(t)) = μ(min(s, t))` (Poisson increments, `μ` the fitted
//! curve) through the OLS weights. The naive OLS error is kept alongside.

use std::io::Write;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::TradingCalendar;
use crate::ols::fit_line;
use crate::preprocess::IntradayVolatilitySeries;
use crate::rng::substream;
use crate::MINUTES_PER_DAY;

/// Minutes whose observable exceeded `q`, on a grid of `grid_len` minutes.
///
/// Detected streams are strictly increasing. Simulated streams may repeat a
/// minute; each repeat is a separate event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub ticker: String,
    pub date: NaiveDate,
    pub q: f64,
    pub minutes: Vec<u32>,
    pub grid_len: usize,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.minutes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutes.is_empty()
    }
}

fn detect_on(v: &[f64], mask: &[bool], q: f64) -> Vec<u32> {
    v.iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (x, m))| !**m && **x > q)
        .map(|(t, _)| t as u32)
        .collect()
}

/// Minutes with `v(t) > q` (strict); masked minutes never qualify.
pub fn detect_events(series: &IntradayVolatilitySeries, q: f64) -> EventStream {
    EventStream {
        ticker: series.ticker.clone(),
        date: series.date,
        q,
        minutes: detect_on(&series.v, &series.mask, q),
        grid_len: series.v.len(),
    }
}

/// Fraction of unmasked minutes above `q`.
pub fn exceedance_fraction(series: &[IntradayVolatilitySeries], q: f64) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for s in series {
        for (_, v) in s.unmasked() {
            n += 1;
            if v > q {
                hit += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// `N(t)`: events at or before minute `t`. Fractional after averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCurve {
    pub counts: Vec<f64>,
    pub announce: usize,
}

impl CumulativeCurve {
    pub fn grid_len(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> f64 {
        self.counts.last().copied().unwrap_or(0.0)
    }

    /// `N(t)` with `N(−1) = 0`.
    fn at(&self, t: i64) -> f64 {
        if t < 0 {
            0.0
        } else {
            self.counts[(t as usize).min(self.counts.len() - 1)]
        }
    }
}

/// Step function with a unit jump per event.
pub fn cumulative_curve(stream: &EventStream, announce: usize) -> Result<CumulativeCurve> {
    if announce >= stream.grid_len {
        return Err(Error::param(format!(
            "announcement minute {announce} outside grid of {}",
            stream.grid_len
        )));
    }
    let mut jumps = vec![0.0; stream.grid_len];
    for &m in &stream.minutes {
        let m = m as usize;
        if m >= stream.grid_len {
            return Err(Error::param(format!("event minute {m} outside grid")));
        }
        jumps[m] += 1.0;
    }
    let mut acc = 0.0;
    let counts = jumps
        .into_iter()
        .map(|j| {
            acc += j;
            acc
        })
        .collect();
    Ok(CumulativeCurve { counts, announce })
}

/// Before and after curves in displaced time; index `τ − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacedCurves {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    /// Events at `t = T`, already included in `after`.
    pub at_announcement: f64,
    pub announce: usize,
}

impl DisplacedCurves {
    pub fn before_at(&self, tau: usize) -> Option<f64> {
        tau.checked_sub(1).and_then(|i| self.before.get(i).copied())
    }

    pub fn after_at(&self, tau: usize) -> Option<f64> {
        tau.checked_sub(1).and_then(|i| self.after.get(i).copied())
    }

    /// `T = 0` leaves nothing before the announcement.
    pub fn before_is_empty(&self) -> bool {
        self.before.is_empty()
    }

    pub fn before_total(&self) -> f64 {
        self.before.last().copied().unwrap_or(0.0)
    }

    pub fn after_total(&self) -> f64 {
        self.after.last().copied().unwrap_or(0.0)
    }

    pub fn curve(&self, side: Side) -> &[f64] {
        match side {
            Side::Before => &self.before,
            Side::After => &self.after,
        }
    }
}

/// Splits `N(t)` at the announcement minute.
pub fn split_displaced(curve: &CumulativeCurve) -> DisplacedCurves {
    let t0 = curve.announce as i64;
    let g = curve.grid_len() as i64;
    let base_b = curve.at(t0 - 1);
    let before = (1..=t0).map(|tau| base_b - curve.at(t0 - tau - 1)).collect();
    let after_len = (g - 1 - t0).max(1);
    let after = (1..=after_len).map(|tau| curve.at(t0 + tau) - base_b).collect();
    DisplacedCurves {
        before,
        after,
        at_announcement: curve.at(t0) - base_b,
        announce: curve.announce,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Before,
    After,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Before => "before",
            Side::After => "after",
        }
    }
}

/// `N(τ)` for `τ = 1..=horizon` from displaced event times (repeats allowed).
pub fn displaced_counts(taus: &[u32], horizon: usize) -> Vec<f64> {
    let mut jumps = vec![0.0; horizon];
    for &t in taus {
        if t >= 1 && (t as usize) <= horizon {
            jumps[t as usize - 1] += 1.0;
        }
    }
    let mut acc = 0.0;
    jumps
        .into_iter()
        .map(|j| {
            acc += j;
            acc
        })
        .collect()
}

/// Inclusive `[tau_min, tau_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FitRange {
    pub tau_min: usize,
    pub tau_max: usize,
}

impl FitRange {
    pub fn new(tau_min: usize, tau_max: usize) -> Result<Self> {
        if tau_min < 1 || tau_min >= tau_max {
            return Err(Error::param(format!(
                "degenerate fit range [{tau_min}, {tau_max}]"
            )));
        }
        Ok(Self { tau_min, tau_max })
    }

    /// `[1, min(T, 390 − T)]`, the same maximum span on both sides of a
    /// same-day announcement. An announcement in the first minute has no
    /// before side; the range then spans the rest of the day.
    pub fn same_day(announce: usize) -> Result<Self> {
        let span = announce.min(MINUTES_PER_DAY.saturating_sub(announce));
        if span < 2 && announce < 2 {
            return Self::new(1, MINUTES_PER_DAY - 1 - announce);
        }
        Self::new(1, span)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmoriFit {
    pub omega: f64,
    pub beta: f64,
    pub omega_se: f64,
    pub beta_se: f64,
    /// Standard error assuming independent residuals.
    pub omega_se_ols: f64,
    pub r2: f64,
    pub tau_min: usize,
    pub tau_max: usize,
    pub n_points: usize,
    /// Points in range skipped because `N(τ) = 0`.
    pub n_excluded: usize,
    /// `N(τ_max)` of the fitted curve.
    pub n_events: f64,
}

/// Quadratic form `Σ_jk a_j a_k μ(min(τ_j, τ_k))` for increasing τ, in O(n).
fn min_kernel_form(a: &[f64], mu: &[f64]) -> f64 {
    let mut suffix = 0.0;
    let mut total = 0.0;
    for j in (0..a.len()).rev() {
        total += a[j] * mu[j] * (a[j] + 2.0 * suffix);
        suffix += a[j];
    }
    total.max(0.0)
}

/// Fits `N(τ) = β τ^{1−Ω}` to `curve[τ − 1]` over `range`.
///
/// `n_curves` is the number of per-stock curves averaged into `curve` (1
/// for a single stock); it scales the counting variance.
pub fn fit_omori(curve: &[f64], range: FitRange, n_curves: usize) -> Result<OmoriFit> {
    if range.tau_min < 1 || range.tau_min >= range.tau_max {
        return Err(Error::param(format!(
            "degenerate fit range [{}, {}]",
            range.tau_min, range.tau_max
        )));
    }
    let hi = range.tau_max.min(curve.len());
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut excluded = 0;
    for tau in range.tau_min..=hi {
        let n = curve[tau - 1];
        if n > 0.0 {
            x.push((tau as f64).ln());
            y.push(n.ln());
        } else {
            excluded += 1;
        }
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no events in fit range".into()));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Omori fit needs 3 points with N > 0, got {}",
            x.len()
        )));
    }
    let line = fit_line(&x, &y)?;
    let omega = 1.0 - line.slope;
    let beta = line.intercept.exp();

    let mu: Vec<f64> = x.iter().map(|lx| (line.intercept + line.slope * lx).exp()).collect();
    let scale = 1.0 / n_curves.max(1) as f64;
    let a_slope: Vec<f64> = line
        .slope_weights(&x)
        .iter()
        .zip(&mu)
        .map(|(c, m)| c / m)
        .collect();
    let a_int: Vec<f64> = line
        .intercept_weights(&x)
        .iter()
        .zip(&mu)
        .map(|(c, m)| c / m)
        .collect();
    let omega_se = (scale * min_kernel_form(&a_slope, &mu)).sqrt();
    let beta_se = beta * (scale * min_kernel_form(&a_int, &mu)).sqrt();

    Ok(OmoriFit {
        omega,
        beta,
        omega_se,
        beta_se,
        omega_se_ols: line.slope_se,
        r2: line.r2,
        tau_min: range.tau_min,
        tau_max: hi,
        n_points: x.len(),
        n_excluded: excluded,
        n_events: curve[hi - 1],
    })
}

/// Pointwise mean of curves on a shared grid.
pub fn portfolio_curve<C: AsRef<[f64]>>(curves: &[C]) -> Result<Vec<f64>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InsufficientData("no curves to average".into()))?
        .as_ref();
    let len = first.len();
    if curves.iter().any(|c| c.as_ref().len() != len) {
        return Err(Error::param("curves do not share a grid"));
    }
    let s = curves.len() as f64;
    Ok((0..len)
        .map(|k| curves.iter().map(|c| c.as_ref()[k]).sum::<f64>() / s)
        .collect())
}

/// Mean of full-day cumulative curves sharing grid and announcement minute.
pub fn portfolio_cumulative(curves: &[CumulativeCurve]) -> Result<CumulativeCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InsufficientData("no curves to average".into()))?;
    if curves.iter().any(|c| c.announce != first.announce) {
        return Err(Error::param("curves have different announcement minutes"));
    }
    let counts: Vec<&[f64]> = curves.iter().map(|c| c.counts.as_slice()).collect();
    Ok(CumulativeCurve {
        counts: portfolio_curve(&counts)?,
        announce: first.announce,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnsembleMethod {
    Individual,
    Portfolio,
    /// Random groups of `M` stocks.
    Partial(usize),
}

impl EnsembleMethod {
    pub fn label(self) -> String {
        match self {
            EnsembleMethod::Individual => "individual".into(),
            EnsembleMethod::Portfolio => "portfolio".into(),
            EnsembleMethod::Partial(m) => format!("partial{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleFit {
    pub method: EnsembleMethod,
    pub mean_omega: f64,
    /// Sample std across stocks or groups; `None` for the portfolio method.
    pub sigma_omega: Option<f64>,
    pub mean_beta: f64,
    /// Stocks (individual), groups (partial) or 1 (portfolio) that were fitted.
    pub n_units: usize,
    /// Stock count `S`.
    pub n_stocks: usize,
    /// Units dropped for lack of events.
    pub n_dropped: usize,
    /// Per-unit fits, in stock or group order.
    pub fits: Vec<OmoriFit>,
    /// Stock indices behind each entry of `fits`.
    pub groups: Vec<Vec<usize>>,
    /// Seed used to shuffle stocks into groups.
    pub seed: Option<u64>,
}

fn summarize(
    method: EnsembleMethod,
    fits: Vec<OmoriFit>,
    n_stocks: usize,
    n_dropped: usize,
) -> Result<EnsembleFit> {
    if fits.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: every unit was dropped for lack of events",
            method.label()
        )));
    }
    let omegas: Vec<f64> = fits.iter().map(|f| f.omega).collect();
    let betas: Vec<f64> = fits.iter().map(|f| f.beta).collect();
    let sigma = match method {
        EnsembleMethod::Portfolio => None,
        _ if omegas.len() > 1 => Some(crate::stats::sample_std(&omegas)),
        _ => Some(0.0),
    };
    Ok(EnsembleFit {
        method,
        mean_omega: crate::stats::mean(&omegas),
        sigma_omega: sigma,
        mean_beta: crate::stats::mean(&betas),
        n_units: fits.len(),
        n_stocks,
        n_dropped,
        fits,
        groups: Vec::new(),
        seed: None,
    })
}

/// Mean of the selected curves, summed in ascending stock order.
fn group_average(curves: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let len = curves[members[0]].len();
    let s = members.len() as f64;
    (0..len)
        .map(|k| members.iter().map(|&j| curves[j][k]).sum::<f64>() / s)
        .collect()
}

/// Aggregates one side's per-stock curves by the requested method.
pub fn ensemble_fit(
    curves: &[Vec<f64>],
    method: EnsembleMethod,
    range: FitRange,
    seed: u64,
) -> Result<EnsembleFit> {
    let s = curves.len();
    if s == 0 {
        return Err(Error::InsufficientData("no stock curves".into()));
    }
    if curves.iter().any(|c| c.len() != curves[0].len()) {
        return Err(Error::param("curves do not share a grid"));
    }
    match method {
        EnsembleMethod::Individual => {
            let mut fits = Vec::new();
            let mut groups = Vec::new();
            let mut dropped = 0;
            for (j, c) in curves.iter().enumerate() {
                match fit_omori(c, range, 1) {
                    Ok(f) => {
                        fits.push(f);
                        groups.push(vec![j]);
                    }
                    Err(e) => {
                        log::debug!("individual fit of stock {j} dropped: {e}");
                        dropped += 1;
                    }
                }
            }
            let mut out = summarize(method, fits, s, dropped)?;
            out.groups = groups;
            Ok(out)
        }
        EnsembleMethod::Portfolio => {
            let all: Vec<usize> = (0..s).collect();
            let fit = fit_omori(&group_average(curves, &all), range, s)?;
            let mut out = summarize(method, vec![fit], s, 0)?;
            out.groups = vec![all];
            Ok(out)
        }
        EnsembleMethod::Partial(m) => {
            if m == 0 {
                return Err(Error::param("group size must be at least 1"));
            }
            let mut order: Vec<usize> = (0..s).collect();
            order.shuffle(&mut substream(seed, 0));
            let mut groups = Vec::new();
            let mut fits = Vec::new();
            let mut dropped = 0;
            for chunk in order.chunks(m) {
                let mut members = chunk.to_vec();
                members.sort_unstable();
                let avg = group_average(curves, &members);
                if avg.iter().all(|n| *n == 0.0) {
                    log::info!("partial group {members:?} has no events; dropped");
                    dropped += 1;
                    continue;
                }
                match fit_omori(&avg, range, members.len()) {
                    Ok(f) => {
                        fits.push(f);
                        groups.push(members);
                    }
                    Err(e) => {
                        log::info!("partial group {members:?} dropped: {e}");
                        dropped += 1;
                    }
                }
            }
            let mut out = summarize(method, fits, s, dropped)?;
            out.groups = groups;
            out.seed = Some(seed);
            Ok(out)
        }
    }
}

/// Before and after fits at one threshold; `None` where there were too few events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub q: f64,
    pub before: Option<OmoriFit>,
    pub after: Option<OmoriFit>,
}

/// Fits both sides of the (portfolio-averaged) displaced curves at each `q`.
pub fn omega_q_sweep(
    series: &[IntradayVolatilitySeries],
    q_list: &[f64],
    announce: usize,
    range: Option<FitRange>,
) -> Result<Vec<SweepPoint>> {
    if q_list.is_empty() {
        return Err(Error::param("empty threshold list"));
    }
    if q_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("thresholds must be strictly ascending"));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("no series to sweep".into()));
    }
    let range = match range {
        Some(r) => r,
        None => FitRange::same_day(announce)?,
    };
    q_list
        .iter()
        .map(|&q| {
            let displaced = series
                .iter()
                .map(|s| cumulative_curve(&detect_events(s, q), announce).map(|c| split_displaced(&c)))
                .collect::<Result<Vec<_>>>()?;
            let fit_side = |side: Side| {
                let curves: Vec<Vec<f64>> = displaced.iter().map(|d| d.curve(side).to_vec()).collect();
                if curves[0].is_empty() {
                    return None;
                }
                let avg = portfolio_curve(&curves).ok()?;
                fit_omori(&avg, range, curves.len()).ok()
            };
            Ok(SweepPoint {
                q,
                before: fit_side(Side::Before),
                after: fit_side(Side::After),
            })
        })
        .collect()
}

/// Concatenates consecutive trading days into one grid of `390·D` minutes
/// and returns the cumulative event curve. Overnight gaps contribute no
/// grid points; the first `exclude_open_minutes` of every continuation day
/// are masked.
pub fn multiday_curve(
    days: &[IntradayVolatilitySeries],
    calendar: &TradingCalendar,
    q: f64,
    announce: usize,
    exclude_open_minutes: usize,
) -> Result<CumulativeCurve> {
    let stream = multiday_stream(days, calendar, q, exclude_open_minutes)?;
    cumulative_curve(&stream, announce)
}

pub fn multiday_stream(
    days: &[IntradayVolatilitySeries],
    calendar: &TradingCalendar,
    q: f64,
    exclude_open_minutes: usize,
) -> Result<EventStream> {
    let first = days
        .first()
        .ok_or_else(|| Error::InsufficientData("no days for a multi-day curve".into()))?;
    for w in days.windows(2) {
        if calendar.offset(w[0].date, 1) != Some(w[1].date) {
            return Err(Error::param(format!(
                "{} and {} are not consecutive trading days",
                w[0].date, w[1].date
            )));
        }
        if w[0].ticker != w[1].ticker {
            return Err(Error::param("multi-day curve mixes tickers"));
        }
    }
    let mut v = Vec::with_capacity(days.len() * MINUTES_PER_DAY);
    let mut mask = Vec::with_capacity(days.len() * MINUTES_PER_DAY);
    for (k, d) in days.iter().enumerate() {
        for t in 0..d.v.len() {
            v.push(d.v[t]);
            mask.push(d.mask[t] || (k > 0 && t < exclude_open_minutes));
        }
    }
    Ok(EventStream {
        ticker: first.ticker.clone(),
        date: first.date,
        q,
        minutes: detect_on(&v, &mask, q),
        grid_len: v.len(),
    })
}

/// One row of `omori_fits.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub event_date: NaiveDate,
    pub ticker_or_portfolio: String,
    pub side: Side,
    pub q: f64,
    pub omega: f64,
    pub omega_se: f64,
    pub beta: f64,
    pub beta_se: f64,
    pub r2: f64,
    pub n_events: f64,
    pub tau_min: usize,
    pub tau_max: usize,
    pub method: String,
}

impl FitRow {
    pub fn new(
        event_date: NaiveDate,
        who: impl Into<String>,
        side: Side,
        q: f64,
        fit: &OmoriFit,
        method: impl Into<String>,
    ) -> Self {
        Self {
            event_date,
            ticker_or_portfolio: who.into(),
            side,
            q,
            omega: fit.omega,
            omega_se: fit.omega_se,
            beta: fit.beta,
            beta_se: fit.beta_se,
            r2: fit.r2,
            n_events: fit.n_events,
            tau_min: fit.tau_min,
            tau_max: fit.tau_max,
            method: method.into(),
        }
    }
}

pub const FIT_HEADER: [&str; 13] = [
    "event_date",
    "ticker_or_portfolio",
    "side",
    "q",
    "omega",
    "omega_se",
    "beta",
    "beta_se",
    "r2",
    "n_events",
    "tau_min",
    "tau_max",
    "method",
];

pub fn write_fit_rows<W: Write>(writer: W, rows: &[FitRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FIT_HEADER)?;
    for r in rows {
        w.write_record([
            r.event_date.to_string(),
            r.ticker_or_portfolio.clone(),
            r.side.label().to_string(),
            r.q.to_string(),
            r.omega.to_string(),
            r.omega_se.to_string(),
            r.beta.to_string(),
            r.beta_se.to_string(),
            r.r2.to_string(),
            r.n_events.to_string(),
            r.tau_min.to_string(),
            r.tau_max.to_string(),
            r.method.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<fits writer>", e))?;
    Ok(())
}

/// `tau,N_b,N_a`; the shorter side is left blank past its end.
pub fn write_displaced_csv<W: Write>(writer: W, curves: &DisplacedCurves) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau", "N_b", "N_a"])?;
    let n = curves.before.len().max(curves.after.len());
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for tau in 1..=n {
        w.write_record([
            tau.to_string(),
            cell(curves.before_at(tau)),
            cell(curves.after_at(tau)),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<curve writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn date() -> NaiveDate {
        "2001-08-21".parse().unwrap()
    }

    fn stream(minutes: Vec<u32>) -> EventStream {
        EventStream {
            ticker: "A".into(),
            date: date(),
            q: 3.0,
            minutes,
            grid_len: MINUTES_PER_DAY,
        }
    }

    fn series_with(values: &[(usize, f64)]) -> IntradayVolatilitySeries {
        let mut v = vec![0.5; MINUTES_PER_DAY];
        for &(t, x) in values {
            v[t] = x;
        }
        let mut mask = vec![false; MINUTES_PER_DAY];
        mask[0] = true;
        IntradayVolatilitySeries::new("A", date(), v, mask).unwrap()
    }

    #[test]
    fn detection_threshold_is_strict() {
        assert!(detect_events(&series_with(&[]), 3.0).is_empty());
        let s = series_with(&[(100, 3.2), (200, 3.0)]);
        assert_eq!(detect_events(&s, 3.0).minutes, vec![100]);
        assert!(detect_events(&s, 4.0).is_empty());
        let mut masked = s.clone();
        masked.mask[100] = true;
        assert!(detect_events(&masked, 3.0).is_empty());
    }

    #[test]
    fn cumulative_examples() {
        let c = cumulative_curve(&stream(vec![]), 285).unwrap();
        assert!(c.counts.iter().all(|n| *n == 0.0));
        let all: Vec<u32> = (0..MINUTES_PER_DAY as u32).collect();
        let c = cumulative_curve(&stream(all), 285).unwrap();
        for (t, n) in c.counts.iter().enumerate() {
            assert_eq!(*n, t as f64 + 1.0);
        }
        let c = cumulative_curve(&stream(vec![3, 3, 9]), 5).unwrap();
        assert_eq!(c.total(), 3.0);
        assert_eq!(c.counts[3], 2.0);
        assert!(cumulative_curve(&stream(vec![]), 390).is_err());
    }

    #[test]
    fn split_one_sided_and_symmetric() {
        let c = cumulative_curve(&stream(vec![290, 300, 301]), 285).unwrap();
        let d = split_displaced(&c);
        assert!(d.before.iter().all(|n| *n == 0.0));
        assert_eq!(d.after_total(), 3.0);
        assert_eq!(d.before.len(), 285);
        assert_eq!(d.after.len(), 104);

        let ks = [1u32, 4, 9, 30, 77];
        let mut m: Vec<u32> = ks.iter().flat_map(|k| [285 - k, 285 + k]).collect();
        m.sort_unstable();
        let d = split_displaced(&cumulative_curve(&stream(m), 285).unwrap());
        for tau in 1..=104 {
            assert_eq!(d.before_at(tau), d.after_at(tau), "tau {tau}");
        }
    }

    #[test]
    fn event_at_announcement_joins_after_curve() {
        let d = split_displaced(&cumulative_curve(&stream(vec![284, 285, 286]), 285).unwrap());
        assert_eq!(d.at_announcement, 1.0);
        assert_eq!(d.after_at(1), Some(2.0));
        assert_eq!(d.before_at(1), Some(1.0));
        assert_eq!(d.before_total() + d.after_total(), 3.0);
    }

    #[test]
    fn announcement_at_open_has_empty_before_curve() {
        let d = split_displaced(&cumulative_curve(&stream(vec![0, 5, 10]), 0).unwrap());
        assert!(d.before_is_empty());
        assert_eq!(d.after_total(), 3.0);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let curve: Vec<f64> = (1..=100).map(|t| 2.0 * (t as f64).powf(0.7)).collect();
        let f = fit_omori(&curve, FitRange::new(1, 100).unwrap(), 1).unwrap();
        assert_relative_eq!(f.omega, 0.3, max_relative = 1e-12);
        assert_relative_eq!(f.beta, 2.0, max_relative = 1e-12);
        assert_relative_eq!(f.r2, 1.0, max_relative = 1e-12);

        let linear: Vec<f64> = (1..=50).map(|t| t as f64).collect();
        let f = fit_omori(&linear, FitRange::new(1, 50).unwrap(), 1).unwrap();
        assert!(f.omega.abs() < 1e-12);
        assert!((f.beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rescaling_changes_beta_only() {
        // N(τ) = β τ^{1−Ω} sampled at c·τ equals β c^{1−Ω} τ^{1−Ω}
        let (omega, beta, c) = (0.35f64, 1.7f64, 3.0f64);
        let curve: Vec<f64> = (1..=90).map(|t| beta * (c * t as f64).powf(1.0 - omega)).collect();
        let f = fit_omori(&curve, FitRange::new(1, 90).unwrap(), 1).unwrap();
        assert_relative_eq!(f.omega, omega, max_relative = 1e-12);
        assert_relative_eq!(f.beta, beta * c.powf(1.0 - omega), max_relative = 1e-12);
    }

    #[test]
    fn fit_errors() {
        let zeros = vec![0.0; 50];
        assert!(matches!(
            fit_omori(&zeros, FitRange { tau_min: 1, tau_max: 50 }, 1),
            Err(Error::InsufficientData(_))
        ));
        let mut sparse = vec![0.0; 50];
        sparse[48] = 1.0;
        sparse[49] = 1.0;
        assert!(fit_omori(&sparse, FitRange { tau_min: 1, tau_max: 50 }, 1).is_err());
        assert!(FitRange::new(5, 5).is_err());
        assert!(fit_omori(&zeros, FitRange { tau_min: 7, tau_max: 3 }, 1).is_err());
    }

    #[test]
    fn zero_points_are_excluded_and_counted() {
        let mut curve: Vec<f64> = (1..=40).map(|t| t as f64).collect();
        curve[0] = 0.0;
        curve[1] = 0.0;
        let f = fit_omori(&curve, FitRange::new(1, 40).unwrap(), 1).unwrap();
        assert_eq!(f.n_excluded, 2);
        assert_eq!(f.n_points, 38);
    }

    #[test]
    fn min_kernel_matches_brute_force() {
        let a = [0.3, -1.2, 0.7, 2.0, -0.4];
        let mu = [1.0, 1.5, 4.0, 4.5, 9.0];
        let mut brute = 0.0;
        for j in 0..5 {
            for k in 0..5 {
                brute += a[j] * a[k] * mu[j.min(k)];
            }
        }
        assert_relative_eq!(min_kernel_form(&a, &mu), brute, max_relative = 1e-14);
    }

    #[test]
    fn portfolio_examples() {
        let a: Vec<f64> = (0..10).map(|t| t as f64).collect();
        assert_eq!(portfolio_curve(&[a.clone(), a.clone(), a.clone()]).unwrap(), a);
        let zero = vec![0.0; 10];
        let avg = portfolio_curve(&[zero, a.clone()]).unwrap();
        for (t, v) in avg.iter().enumerate() {
            assert_eq!(*v, t as f64 / 2.0);
        }
        assert!(portfolio_curve::<Vec<f64>>(&[]).is_err());
        assert_eq!(FitRange::same_day(285).unwrap(), FitRange { tau_min: 1, tau_max: 105 });
        assert_eq!(FitRange::same_day(0).unwrap(), FitRange { tau_min: 1, tau_max: 389 });
        assert!(portfolio_curve(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    fn power_curve(beta: f64, omega: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|t| (beta * (t as f64).powf(1.0 - omega)).round()).collect()
    }

    #[test]
    fn identical_stocks_agree_across_methods() {
        let c = power_curve(3.0, 0.3, 100);
        let curves = vec![c.clone(); 12];
        let range = FitRange::new(1, 100).unwrap();
        let ind = ensemble_fit(&curves, EnsembleMethod::Individual, range, 1).unwrap();
        let port = ensemble_fit(&curves, EnsembleMethod::Portfolio, range, 1).unwrap();
        let part = ensemble_fit(&curves, EnsembleMethod::Partial(5), range, 1).unwrap();
        assert_eq!(ind.mean_omega, port.mean_omega);
        assert_eq!(part.mean_omega, port.mean_omega);
        assert_eq!(ind.sigma_omega, Some(0.0));
        assert_eq!(part.sigma_omega, Some(0.0));
        assert_eq!(part.n_units, 3);
        assert_eq!(ind.n_units, 12);
    }

    #[test]
    fn partial_with_all_stocks_is_portfolio() {
        let curves: Vec<Vec<f64>> = (0..7).map(|j| power_curve(1.0 + j as f64, 0.1 * j as f64, 80)).collect();
        let range = FitRange::new(1, 80).unwrap();
        let port = ensemble_fit(&curves, EnsembleMethod::Portfolio, range, 5).unwrap();
        let part = ensemble_fit(&curves, EnsembleMethod::Partial(7), range, 5).unwrap();
        assert_eq!(part.fits, port.fits);
        assert_eq!(part.mean_omega, port.mean_omega);
    }

    #[test]
    fn heterogeneous_methods_both_report() {
        let curves: Vec<Vec<f64>> = (0..6).map(|j| power_curve(2.0 + j as f64, -0.2 + 0.15 * j as f64, 80)).collect();
        let range = FitRange::new(1, 80).unwrap();
        let ind = ensemble_fit(&curves, EnsembleMethod::Individual, range, 5).unwrap();
        let port = ensemble_fit(&curves, EnsembleMethod::Portfolio, range, 5).unwrap();
        assert_eq!(ind.method.label(), "individual");
        assert_eq!(port.method.label(), "portfolio");
        assert!(ind.sigma_omega.unwrap() > 0.0);
        assert_ne!(ind.mean_omega, port.mean_omega);
    }

    #[test]
    fn partial_drops_empty_groups() {
        let mut curves = vec![vec![0.0; 50]; 4];
        curves.push(power_curve(5.0, 0.2, 50));
        let range = FitRange::new(1, 50).unwrap();
        let part = ensemble_fit(&curves, EnsembleMethod::Partial(1), range, 3).unwrap();
        assert_eq!(part.n_units, 1);
        assert_eq!(part.n_dropped, 4);
        let none = vec![vec![0.0; 50]; 4];
        assert!(ensemble_fit(&none, EnsembleMethod::Partial(2), range, 3).is_err());
    }

    #[test]
    fn sweep_saturation_and_absence() {
        let s = series_with(&[(10, 9.0)]);
        let pts = omega_q_sweep(&[s.clone()], &[0.1, 100.0], 285, None).unwrap();
        // every minute is an event: N_b(τ) = τ exactly, N_a(τ) = τ + 1
        let before = pts[0].before.as_ref().unwrap();
        assert!(before.omega.abs() < 1e-12, "{}", before.omega);
        let after = pts[0].after.as_ref().unwrap();
        assert!(after.omega.abs() < 0.1, "{}", after.omega);
        assert!(pts[1].after.is_none() && pts[1].before.is_none());
        assert!(omega_q_sweep(&[s.clone()], &[], 285, None).is_err());
        assert!(omega_q_sweep(&[s], &[3.0, 2.0], 285, None).is_err());
    }

    fn day(ticker: &str, date: NaiveDate, hits: &[usize]) -> IntradayVolatilitySeries {
        let mut s = series_with(&hits.iter().map(|t| (*t, 10.0)).collect::<Vec<_>>());
        s.ticker = ticker.into();
        s.date = date;
        s
    }

    #[test]
    fn multiday_grid() {
        let dates: Vec<NaiveDate> = ["2001-08-21", "2001-08-22", "2001-08-23", "2001-08-24"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let cal = TradingCalendar::new(dates.clone()).unwrap();
        let one = multiday_curve(&[day("A", dates[0], &[300])], &cal, 3.0, 285, 0).unwrap();
        let single = cumulative_curve(&detect_events(&day("A", dates[0], &[300]), 3.0), 285).unwrap();
        assert_eq!(one, single);

        let days: Vec<_> = dates.iter().map(|d| day("A", *d, &[10, 100])).collect();
        let c = multiday_curve(&days, &cal, 3.0, 285, 0).unwrap();
        assert_eq!(c.grid_len(), 1560);
        let d = split_displaced(&c);
        assert_eq!(d.after.len(), 1274);
        assert_eq!(c.total(), 8.0);

        let excl = multiday_stream(&days, &cal, 3.0, 60).unwrap();
        // minute 10 of days 2–4 falls in the excluded opening hour
        assert_eq!(excl.minutes, vec![10, 100, 490, 880, 1270]);

        let gap = [days[0].clone(), days[2].clone()];
        assert!(multiday_curve(&gap, &cal, 3.0, 285, 0).is_err());
    }
}
