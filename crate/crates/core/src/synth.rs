//! Synthetic data with known ground truth.
//!
//! Omori processes are simulated in displaced time `τ` with cumulative mean
//! `E[N(τ)] = β τ^{1−Ω}`. The first minute receives `Poisson(β)` events (the
//! exact mass of the intensity on `(0, 1]`, where it is singular for
//! `Ω > 0`); on `(1, H]` events come from thinning a homogeneous process with
//! the constant rate `max n(τ)`. A continuous time `τ` is assigned to minute
//! `⌈τ⌉`, so the expected count up to minute `k` is exactly `β k^{1−Ω}`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    create_file, write_daily_bars, write_events, write_minute_bars, write_rates, AnnouncementEvent,
    DailyBar, DailyBarSeries, MinuteSeries, RateSeries, TradingCalendar,
};
use crate::metrics::WeightProfile;
use crate::omori::{displaced_counts, fit_omori, FitRange, Side, SweepPoint};
use crate::preprocess::IntradayVolatilitySeries;
use crate::rng::{substream, StreamRng};
use crate::MINUTES_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmoriProcessSpec {
    pub omega: f64,
    pub beta: f64,
    /// Last minute of displaced time simulated.
    pub horizon: u32,
    pub side: Side,
    pub seed: u64,
}

impl OmoriProcessSpec {
    pub fn new(omega: f64, beta: f64, horizon: u32, side: Side, seed: u64) -> Result<Self> {
        let spec = Self {
            omega,
            beta,
            horizon,
            side,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Chooses `β` so that `expected_events` fall within the horizon.
    pub fn with_expected_count(
        omega: f64,
        expected_events: f64,
        horizon: u32,
        side: Side,
        seed: u64,
    ) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::param("horizon must be at least 1 minute"));
        }
        Self::new(omega, expected_events / (horizon as f64).powf(1.0 - omega), horizon, side, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega < 1.0) || !self.omega.is_finite() {
            return Err(Error::param(format!(
                "Omori exponent must be below 1, got {}",
                self.omega
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!("amplitude must be positive, got {}", self.beta)));
        }
        if self.horizon < 1 {
            return Err(Error::param("horizon must be at least 1 minute"));
        }
        Ok(())
    }

    /// `n(τ) = β (1 − Ω) τ^{−Ω}`.
    pub fn intensity(&self, tau: f64) -> f64 {
        self.beta * (1.0 - self.omega) * tau.powf(-self.omega)
    }

    /// `β τ^{1−Ω}`.
    pub fn expected_cumulative(&self, tau: f64) -> f64 {
        self.beta * tau.powf(1.0 - self.omega)
    }

    pub fn expected_count(&self) -> f64 {
        self.expected_cumulative(self.horizon as f64)
    }

    /// Constant rate dominating the intensity on `[1, horizon]`.
    pub fn dominating_rate(&self) -> f64 {
        self.intensity(1.0).max(self.intensity(self.horizon as f64))
    }
}

/// Event minutes in displaced time, sorted, with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStream {
    pub spec: OmoriProcessSpec,
    pub taus: Vec<u32>,
    pub proposals: usize,
    pub accepted: usize,
}

impl SimulatedStream {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Share of thinning proposals kept; 1 when there were none.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// `N(τ)` for `τ = 1..=horizon`.
    pub fn curve(&self) -> Vec<f64> {
        displaced_counts(&self.taus, self.spec.horizon as usize)
    }

    /// Distinct minutes (one mark per minute on a market day).
    pub fn distinct(&self) -> Vec<u32> {
        let mut d = self.taus.clone();
        d.dedup();
        d
    }
}

fn poisson(rng: &mut StreamRng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    let n: f64 = d.sample(rng);
    n as usize
}

fn simulate_with(spec: &OmoriProcessSpec, rng: &mut StreamRng) -> SimulatedStream {
    let mut taus = vec![1u32; poisson(rng, spec.beta)];
    let h = spec.horizon as f64;
    let (mut proposals, mut accepted) = (0, 0);
    if spec.horizon > 1 {
        let lmax = spec.dominating_rate();
        proposals = poisson(rng, lmax * (h - 1.0));
        for _ in 0..proposals {
            // (1, H]
            let u = h - rng.random::<f64>() * (h - 1.0);
            if rng.random::<f64>() * lmax <= spec.intensity(u) {
                accepted += 1;
                taus.push((u.ceil() as u32).clamp(2, spec.horizon));
            }
        }
    }
    taus.sort_unstable();
    SimulatedStream {
        spec: *spec,
        taus,
        proposals,
        accepted,
    }
}

/// Inhomogeneous Poisson events with intensity `β(1−Ω)τ^{−Ω}`.
pub fn simulate_omori(spec: &OmoriProcessSpec) -> Result<SimulatedStream> {
    spec.validate()?;
    Ok(simulate_with(spec, &mut substream(spec.seed, 0)))
}

/// Marks in `[q_lower, next band's q_lower)`; the top band is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkBand {
    pub q_lower: f64,
    pub process: OmoriProcessSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkedEvent {
    pub tau: u32,
    pub mark: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedStream {
    pub horizon: u32,
    pub side: Side,
    /// Sorted by `tau`.
    pub events: Vec<MarkedEvent>,
    /// Thinning acceptance rate per band.
    pub acceptance: Vec<f64>,
}

impl MarkedStream {
    /// Displaced times of events with mark strictly above `q`.
    pub fn taus_above(&self, q: f64) -> Vec<u32> {
        self.events.iter().filter(|e| e.mark > q).map(|e| e.tau).collect()
    }

    /// Fits the curve of exceedances at each threshold; fits that fail are absent.
    pub fn sweep(&self, q_list: &[f64], range: FitRange) -> Result<Vec<SweepPoint>> {
        if q_list.is_empty() {
            return Err(Error::param("empty threshold list"));
        }
        Ok(q_list
            .iter()
            .map(|&q| {
                let curve = displaced_counts(&self.taus_above(q), self.horizon as usize);
                let fit = fit_omori(&curve, range, 1).ok();
                let (before, after) = match self.side {
                    Side::Before => (fit, None),
                    Side::After => (None, fit),
                };
                SweepPoint { q, before, after }
            })
            .collect())
    }
}

/// Union of per-band Omori processes; band `k`'s event times use the band's
/// own seed, so a single band reproduces [`simulate_omori`].
pub fn simulate_marked_omori(bands: &[MarkBand]) -> Result<MarkedStream> {
    let first = bands
        .first()
        .ok_or_else(|| Error::param("no mark bands"))?;
    for b in bands {
        b.process.validate()?;
        if !b.q_lower.is_finite() {
            return Err(Error::param("band threshold must be finite"));
        }
        if b.process.horizon != first.process.horizon || b.process.side != first.process.side {
            return Err(Error::param("mark bands must share horizon and side"));
        }
    }
    if bands.windows(2).any(|w| w[0].q_lower >= w[1].q_lower) {
        return Err(Error::param(
            "overlapping mark bands: lower thresholds must be strictly ascending",
        ));
    }
    let mut events = Vec::new();
    let mut acceptance = Vec::new();
    for (k, b) in bands.iter().enumerate() {
        let stream = simulate_with(&b.process, &mut substream(b.process.seed, 0));
        acceptance.push(stream.acceptance_rate());
        let mut marks = substream(b.process.seed, 1);
        let upper = bands.get(k + 1).map(|n| n.q_lower);
        for tau in stream.taus {
            let mark = match upper {
                Some(u) => b.q_lower + marks.random::<f64>() * (u - b.q_lower),
                None => b.q_lower + <Exp1 as Distribution<f64>>::sample(&Exp1, &mut marks),
            };
            events.push(MarkedEvent { tau, mark });
        }
    }
    events.sort_by(|a, b| a.tau.cmp(&b.tau).then(a.mark.total_cmp(&b.mark)));
    Ok(MarkedStream {
        horizon: first.process.horizon,
        side: first.process.side,
        events,
        acceptance,
    })
}

/// Sub-threshold marks are half-normal scaled to unit standard deviation
/// and redrawn until they fall below `threshold`; event marks are
/// `event_floor + Exp(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub threshold: f64,
    pub event_floor: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            event_floor: 8.0,
        }
    }
}

impl NoiseModel {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || !(self.event_floor > self.threshold) {
            return Err(Error::param(
                "noise model needs 0 < threshold < event_floor",
            ));
        }
        Ok(())
    }

    fn noise(&self, rng: &mut StreamRng) -> f64 {
        let scale = (1.0 - 2.0 / std::f64::consts::PI).sqrt();
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let x = z.abs() / scale;
            if x < self.threshold {
                return x;
            }
        }
    }

    fn event(&self, rng: &mut StreamRng) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.event_floor + e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketDaySpec {
    pub announce: usize,
    pub before: Option<OmoriProcessSpec>,
    pub after: Option<OmoriProcessSpec>,
    /// Background events per minute over the whole day.
    pub baseline_rate: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl MarketDaySpec {
    /// Pure noise day.
    pub fn quiet(announce: usize, noise: NoiseModel, seed: u64) -> Self {
        Self {
            announce,
            before: None,
            after: None,
            baseline_rate: 0.0,
            noise,
            seed,
        }
    }
}

/// One day of volatility marks on the 390-minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDay {
    pub ticker: String,
    pub date: NaiveDate,
    pub announce: usize,
    /// Slot 0 is unused and left at zero.
    pub v: Vec<f64>,
    /// Minutes carrying an above-threshold mark, strictly increasing.
    pub event_minutes: Vec<u32>,
    /// Planted displaced times, one per distinct minute.
    pub before_taus: Vec<u32>,
    pub after_taus: Vec<u32>,
    /// Simulated events before collapsing repeats within a minute.
    pub before_raw: usize,
    pub after_raw: usize,
    pub spec: MarketDaySpec,
}

impl SyntheticDay {
    pub fn to_series(&self) -> IntradayVolatilitySeries {
        let mut mask = vec![false; MINUTES_PER_DAY];
        mask[0] = true;
        IntradayVolatilitySeries::new(self.ticker.clone(), self.date, self.v.clone(), mask)
            .expect("grid length is fixed")
    }

    /// Price path whose absolute 1-minute log returns are `scale · v(t)`,
    /// with random signs.
    pub fn to_minute_series(&self, scale: f64, open_price: f64, volume: f64) -> Result<MinuteSeries> {
        let mut rng = substream(self.spec.seed, 9);
        let mut prices = Vec::with_capacity(MINUTES_PER_DAY);
        let mut p = open_price;
        prices.push(p);
        for t in 1..MINUTES_PER_DAY {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            p *= (sign * scale * self.v[t]).exp();
            prices.push(p);
        }
        MinuteSeries::from_prices(self.ticker.clone(), self.date, &prices, &[volume; MINUTES_PER_DAY])
    }
}

/// Planted Omori streams on either side of `announce`, background events and
/// sub-threshold noise. An after-side time `τ` lands on minute `T + τ`, a
/// before-side time on `T − τ`.
pub fn simulate_market_day(
    ticker: impl Into<String>,
    date: NaiveDate,
    spec: &MarketDaySpec,
) -> Result<SyntheticDay> {
    let t0 = spec.announce;
    if !(1..=MINUTES_PER_DAY - 2).contains(&t0) {
        return Err(Error::param(format!(
            "announcement minute {t0} outside [1, {}]",
            MINUTES_PER_DAY - 2
        )));
    }
    if !(spec.baseline_rate >= 0.0 && spec.baseline_rate.is_finite()) {
        return Err(Error::param("baseline rate must be non-negative"));
    }
    spec.noise.validate()?;
    let mut planted = BTreeSet::new();
    let mut side = |p: &Option<OmoriProcessSpec>, limit: usize, to_minute: &dyn Fn(u32) -> usize| {
        let Some(p) = p else {
            return Ok((Vec::new(), 0));
        };
        p.validate()?;
        if p.horizon as usize > limit {
            return Err(Error::param(format!(
                "horizon {} does not fit in the day (at most {limit})",
                p.horizon
            )));
        }
        let s = simulate_omori(p)?;
        let distinct = s.distinct();
        for &tau in &distinct {
            planted.insert(to_minute(tau));
        }
        Ok((distinct, s.len()))
    };
    let (before_taus, before_raw) = side(&spec.before, t0 - 1, &|tau| t0 - tau as usize)?;
    let (after_taus, after_raw) = side(&spec.after, MINUTES_PER_DAY - 1 - t0, &|tau| t0 + tau as usize)?;

    if spec.baseline_rate > 0.0 {
        let p = 1.0 - (-spec.baseline_rate).exp();
        let mut rng = substream(spec.seed, 2);
        for t in 1..MINUTES_PER_DAY {
            if rng.random::<f64>() < p {
                planted.insert(t);
            }
        }
    }

    let mut rng = substream(spec.seed, 3);
    let mut v = vec![0.0; MINUTES_PER_DAY];
    for (t, x) in v.iter_mut().enumerate().skip(1) {
        *x = if planted.contains(&t) {
            spec.noise.event(&mut rng)
        } else {
            spec.noise.noise(&mut rng)
        };
    }
    Ok(SyntheticDay {
        ticker: ticker.into(),
        date,
        announce: t0,
        v,
        event_minutes: planted.into_iter().map(|t| t as u32).collect(),
        before_taus,
        after_taus,
        before_raw,
        after_raw,
        spec: *spec,
    })
}

fn is_weekday(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

/// `n` weekdays before `date`, `date` itself, and `m` weekdays after it.
pub fn weekday_calendar(date: NaiveDate, n_before: usize, n_after: usize) -> Vec<NaiveDate> {
    let mut before = Vec::with_capacity(n_before);
    let mut d = date;
    while before.len() < n_before {
        d = d - Days::new(1);
        if is_weekday(d) {
            before.push(d);
        }
    }
    before.reverse();
    let mut dates = before;
    dates.push(date);
    let mut d = date;
    for _ in 0..n_after {
        d = d + Days::new(1);
        while !is_weekday(d) {
            d = d + Days::new(1);
        }
        dates.push(d);
    }
    dates
}

/// Rates around one event whose speculation and surprise equal the targets.
///
/// The spread is `θ` on every day up to and including the event and
/// `θ − Δ·S` afterwards; the 6-month bill sits at `base_rate` and the
/// effective rate at `base_rate · e^δ`.
pub fn simulate_rate_scenario(
    theta: f64,
    delta: f64,
    event: &AnnouncementEvent,
    speculation: &WeightProfile,
    surprise: &WeightProfile,
    base_rate: f64,
) -> Result<RateSeries> {
    if !theta.is_finite() || !delta.is_finite() {
        return Err(Error::param("targets must be finite"));
    }
    if !(base_rate > 0.0) {
        return Err(Error::param("base rate must be positive"));
    }
    let n_before = speculation.horizon.max(surprise.horizon);
    let dates = weekday_calendar(event.date, n_before, surprise.horizon);
    let after = theta - delta * event.rate_sign();
    let spread: Vec<f64> = (0..dates.len())
        .map(|i| if i <= n_before { theta } else { after })
        .collect();
    rates_from_spread(dates, &spread, base_rate)
}

fn rates_from_spread(dates: Vec<NaiveDate>, spread: &[f64], base_rate: f64) -> Result<RateSeries> {
    let n = dates.len();
    RateSeries::new(
        dates,
        vec![base_rate; n],
        spread.iter().map(|d| base_rate * d.exp()).collect(),
        vec![base_rate; n],
    )
}

/// OHLC bars whose high-low range is `ranges[i]`, centred on `close`.
pub fn daily_bars_from_ranges(
    ticker: &str,
    dates: &[NaiveDate],
    ranges: &[f64],
    close: f64,
    volumes: &[f64],
) -> Result<DailyBarSeries> {
    if dates.len() != ranges.len() || dates.len() != volumes.len() {
        return Err(Error::param("dates, ranges and volumes must align"));
    }
    let bars = dates
        .iter()
        .zip(ranges)
        .zip(volumes)
        .map(|((d, r), vol)| DailyBar {
            date: *d,
            open: close,
            high: close * (r / 2.0).exp(),
            low: close * (-r / 2.0).exp(),
            close,
            volume: *vol,
        })
        .collect();
    DailyBarSeries::new(ticker, bars)
}

/// Daily-scale scenario: events with planted speculation `Θ` and an event-day
/// volatility `V = intercept + slope·Θ + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DailyScenarioSpec {
    pub n_stocks: usize,
    pub n_events: usize,
    pub first_event: NaiveDate,
    pub half_width: usize,
    pub lambda: f64,
    pub l1: usize,
    pub lambda2: f64,
    pub l2: usize,
    pub theta_range: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub v_noise: f64,
    /// Log-normal spread of ordinary daily ranges.
    pub range_noise: f64,
    pub seed: u64,
}

impl Default for DailyScenarioSpec {
    fn default() -> Self {
        Self {
            n_stocks: 10,
            n_events: 20,
            first_event: NaiveDate::from_ymd_opt(2001, 3, 20).expect("valid date"),
            half_width: 20,
            lambda: 10.0,
            l1: 15,
            lambda2: 10.0,
            l2: 15,
            theta_range: (-0.3, 0.1),
            slope: 0.5,
            intercept: 1.15,
            v_noise: 0.02,
            range_noise: 0.2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DailyScenario {
    pub rates: RateSeries,
    pub events: Vec<AnnouncementEvent>,
    pub bars: Vec<DailyBarSeries>,
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn simulate_daily_scenario(spec: &DailyScenarioSpec) -> Result<DailyScenario> {
    if spec.n_stocks == 0 || spec.n_events == 0 {
        return Err(Error::param("scenario needs stocks and events"));
    }
    let lb = spec.l1.max(spec.l2);
    let lead = lb.max(spec.half_width) + 2;
    let spacing = (2 * spec.half_width + 1).max(lb + spec.l2 + 1) + 4;
    let n_days = lead + spacing * (spec.n_events - 1) + lead + 1;
    let dates = weekday_calendar(spec.first_event, lead, n_days - lead - 1);
    let event_idx: Vec<usize> = (0..spec.n_events).map(|k| lead + k * spacing).collect();

    let mut rng = substream(spec.seed, 0);
    let (lo, hi) = spec.theta_range;
    let mut theta = Vec::new();
    let mut delta = Vec::new();
    let mut v = Vec::new();
    let mut events = Vec::new();
    let mut spread = vec![0.0; n_days];
    for (k, &i) in event_idx.iter().enumerate() {
        let th = lo + rng.random::<f64>() * (hi - lo);
        let de = (rng.random::<f64>() - 0.5) * 0.2;
        let cut = rng.random::<f64>() < 0.5;
        let delta_r = if k % 5 == 4 { 0.0 } else if cut { -0.25 } else { 0.25 };
        let ev = AnnouncementEvent::scheduled(dates[i], 4.0, delta_r)?;
        let noise: f64 = StandardNormal.sample(&mut rng);
        let target_v = spec.intercept + spec.slope * th + spec.v_noise * noise;
        for (j, s) in spread.iter_mut().enumerate() {
            if j + lb >= i && j <= i {
                *s = th;
            } else if j > i && j <= i + spec.l2 {
                *s = th - de * ev.rate_sign();
            }
        }
        theta.push(th);
        delta.push(de);
        v.push(target_v);
        events.push(ev);
    }

    let w = spec.half_width;
    let width = (2 * w + 1) as f64;
    let mut bars = Vec::new();
    let width_digits = spec.n_stocks.to_string().len().max(3);
    for s in 0..spec.n_stocks {
        let mut rng = substream(spec.seed, 1 + s as u64);
        let base = 0.01 + 0.02 * rng.random::<f64>();
        let mut ranges: Vec<f64> = (0..n_days)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                base * (spec.range_noise * z).exp()
            })
            .collect();
        for (k, &i) in event_idx.iter().enumerate() {
            let others: f64 = (i - w..=i + w).filter(|&j| j != i).map(|j| ranges[j]).sum();
            let target = v[k];
            if !(target > 0.0 && target < width) {
                return Err(Error::param(format!("planted volatility {target} unreachable")));
            }
            ranges[i] = target * others / (width - target);
        }
        let volume = 1e6 * (1.0 + rng.random::<f64>());
        bars.push(daily_bars_from_ranges(
            &format!("D{s:0width_digits$}"),
            &dates,
            &ranges,
            50.0,
            &vec![volume; n_days],
        )?);
    }
    Ok(DailyScenario {
        rates: rates_from_spread(dates, &spread, 3.0)?,
        events,
        bars,
        theta,
        delta,
        v,
    })
}

/// Stock-ensemble intraday scenario written by the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSpec {
    pub n_stocks: usize,
    pub event_date: NaiveDate,
    pub announce_minute: usize,
    /// Quiet days before the event day (pattern estimation).
    pub baseline_days: usize,
    /// Quiet days after the event day (multi-day curves).
    pub days_after: usize,
    pub omega_before: f64,
    pub omega_after: f64,
    /// Cross-sectional spread of the per-stock exponents.
    pub omega_sd: f64,
    pub events_before: f64,
    pub events_after: f64,
    pub baseline_rate: f64,
    pub noise: NoiseModel,
    /// Absolute log return per unit mark.
    pub price_scale: f64,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            n_stocks: 100,
            event_date: NaiveDate::from_ymd_opt(2001, 8, 21).expect("valid date"),
            announce_minute: crate::SCHEDULED_ANNOUNCE_MINUTE as usize,
            baseline_days: 20,
            days_after: 0,
            omega_before: 0.0,
            omega_after: 0.24,
            omega_sd: 0.0,
            events_before: 5.0,
            events_after: 10.0,
            baseline_rate: 0.0,
            noise: NoiseModel::default(),
            price_scale: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockTruth {
    pub ticker: String,
    pub omega_before: f64,
    pub omega_after: f64,
    pub beta_before: f64,
    pub beta_after: f64,
    pub planted_before: usize,
    pub planted_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub spec: EnsembleSpec,
    pub horizon_before: u32,
    pub horizon_after: u32,
    pub stocks: Vec<StockTruth>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub calendar: TradingCalendar,
    pub days: Vec<SyntheticDay>,
    pub events: Vec<AnnouncementEvent>,
    pub truth: GroundTruth,
}

fn clamp_omega(x: f64) -> f64 {
    x.min(0.95)
}

pub fn simulate_ensemble(spec: &EnsembleSpec) -> Result<SyntheticDataset> {
    if spec.n_stocks == 0 {
        return Err(Error::param("ensemble needs at least one stock"));
    }
    let t0 = spec.announce_minute;
    if !(1..=MINUTES_PER_DAY - 2).contains(&t0) {
        return Err(Error::param(format!("announcement minute {t0} outside [1, 388]")));
    }
    if !(spec.price_scale > 0.0) {
        return Err(Error::param("price scale must be positive"));
    }
    for (name, w) in [("omega_before", spec.omega_before), ("omega_after", spec.omega_after)] {
        if !(w < 1.0) || !w.is_finite() {
            return Err(Error::param(format!("{name} must be below 1, got {w}")));
        }
    }
    if !(spec.omega_sd >= 0.0) || !(spec.events_before >= 0.0) || !(spec.events_after >= 0.0) {
        return Err(Error::param("omega_sd and expected event counts must be non-negative"));
    }
    let dates = weekday_calendar(spec.event_date, spec.baseline_days, spec.days_after);
    let h_b = (t0 - 1) as u32;
    let h_a = (MINUTES_PER_DAY - 1 - t0) as u32;
    let width = spec.n_stocks.to_string().len().max(3);
    let mut days = Vec::new();
    let mut stocks = Vec::new();
    for j in 0..spec.n_stocks {
        let ticker = format!("S{j:0width$}");
        let mut rng = substream(spec.seed, j as u64);
        let zb: f64 = StandardNormal.sample(&mut rng);
        let za: f64 = StandardNormal.sample(&mut rng);
        let ob = clamp_omega(spec.omega_before + spec.omega_sd * zb);
        let oa = clamp_omega(spec.omega_after + spec.omega_sd * za);
        let before = (spec.events_before > 0.0)
            .then(|| OmoriProcessSpec::with_expected_count(ob, spec.events_before, h_b, Side::Before, rng.random()))
            .transpose()?;
        let after = (spec.events_after > 0.0)
            .then(|| OmoriProcessSpec::with_expected_count(oa, spec.events_after, h_a, Side::After, rng.random()))
            .transpose()?;
        let mut planted = (0, 0);
        for &date in &dates {
            let day_seed: u64 = rng.random();
            let day_spec = if date == spec.event_date {
                MarketDaySpec {
                    announce: t0,
                    before,
                    after,
                    baseline_rate: spec.baseline_rate,
                    noise: spec.noise,
                    seed: day_seed,
                }
            } else {
                MarketDaySpec::quiet(t0, spec.noise, day_seed)
            };
            let day = simulate_market_day(ticker.clone(), date, &day_spec)?;
            if date == spec.event_date {
                planted = (day.before_taus.len(), day.after_taus.len());
            }
            days.push(day);
        }
        stocks.push(StockTruth {
            ticker,
            omega_before: ob,
            omega_after: oa,
            beta_before: before.map_or(0.0, |p| p.beta),
            beta_after: after.map_or(0.0, |p| p.beta),
            planted_before: planted.0,
            planted_after: planted.1,
        });
    }
    let event = AnnouncementEvent::new(spec.event_date, t0 as u32, 3.5, -0.25, true)?;
    Ok(SyntheticDataset {
        calendar: TradingCalendar::new(dates)?,
        days,
        events: vec![event],
        truth: GroundTruth {
            spec: spec.clone(),
            horizon_before: h_b,
            horizon_after: h_a,
            stocks,
        },
    })
}

impl SyntheticDataset {
    /// `minute/<ticker>.csv`, `events.csv` and `ground_truth.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let scale = self.truth.spec.price_scale;
        let mut by_ticker: std::collections::BTreeMap<&str, Vec<MinuteSeries>> = Default::default();
        for d in &self.days {
            by_ticker
                .entry(d.ticker.as_str())
                .or_default()
                .push(d.to_minute_series(scale, 50.0, 100.0)?);
        }
        for (ticker, series) in &by_ticker {
            let f = create_file(dir.join("minute").join(format!("{ticker}.csv")))?;
            write_minute_bars(f, series.iter())?;
        }
        write_events(create_file(dir.join("events.csv"))?, &self.events)?;
        let mut f = create_file(dir.join("ground_truth.json"))?;
        serde_json::to_writer_pretty(&mut f, &self.truth)?;
        writeln!(f).map_err(|e| Error::io(dir.join("ground_truth.json"), e))?;
        Ok(())
    }
}

impl DailyScenario {
    /// `daily.csv`, `rates.csv` and `events.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let map = self
            .bars
            .iter()
            .map(|s| (s.ticker.clone(), s.clone()))
            .collect();
        write_daily_bars(create_file(dir.join("daily.csv"))?, &map)?;
        write_rates(create_file(dir.join("rates.csv"))?, &self.rates)?;
        write_events(create_file(dir.join("events.csv"))?, &self.events)?;
        Ok(())
    }
}
