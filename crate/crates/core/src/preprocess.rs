//! Volatility observables derived from raw prices.
//!
//! Daily scale: the high-low range `r = ln(high/low)`, normalised by its mean
//! over an event window. Intraday scale: 1-minute absolute log returns,
//! standardised by the whole-period standard deviation and then divided by
//! the average intraday pattern. The order (standardise, then detrend) is
//! fixed; the detrended series is not re-normalised, and thresholds apply to
//! it directly.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::{event_window, DailyBar, DailyBarSeries, DayKey, MinuteSeries, WindowedSeries};
use crate::stats::kahan_sum;
use crate::MINUTES_PER_DAY;

/// `ln(high / low)` for one bar.
pub fn daily_range(bar: &DailyBar) -> Result<f64> {
    if !(bar.high > 0.0 && bar.low > 0.0) {
        return Err(Error::param(format!(
            "non-positive price on {} (high {}, low {})",
            bar.date, bar.high, bar.low
        )));
    }
    if bar.high < bar.low {
        return Err(Error::param(format!("high < low on {}", bar.date)));
    }
    Ok((bar.high / bar.low).ln())
}

/// Normalised daily volatility `v = r / ⟨r⟩` over one event window.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyVolatilityWindow {
    pub ticker: String,
    pub event_date: NaiveDate,
    pub half_width: usize,
    pub v: Vec<f64>,
    pub mean_range: f64,
}

impl DailyVolatilityWindow {
    /// Value at trading-day offset `dt ∈ [-W, W]`.
    pub fn at(&self, dt: i64) -> Option<f64> {
        let i = self.half_width as i64 + dt;
        if i < 0 {
            return None;
        }
        self.v.get(i as usize).copied()
    }
}

/// Divides an odd-length, event-centred window of ranges by its mean.
pub fn normalize_window(
    ticker: impl Into<String>,
    event_date: NaiveDate,
    ranges: &[f64],
) -> Result<DailyVolatilityWindow> {
    if ranges.is_empty() || ranges.len() % 2 == 0 {
        return Err(Error::param(format!(
            "window must have odd length, got {}",
            ranges.len()
        )));
    }
    if ranges.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::param("ranges must be finite and non-negative"));
    }
    let mean_range = kahan_sum(ranges.iter().copied()) / ranges.len() as f64;
    if mean_range <= 0.0 {
        return Err(Error::degenerate("mean range is zero (flat window)"));
    }
    Ok(DailyVolatilityWindow {
        ticker: ticker.into(),
        event_date,
        half_width: ranges.len() / 2,
        v: ranges.iter().map(|r| r / mean_range).collect(),
        mean_range,
    })
}

/// Range-normalised volatility for a windowed daily series.
pub fn volatility_window(window: &WindowedSeries) -> Result<DailyVolatilityWindow> {
    let ranges = window
        .bars
        .iter()
        .map(daily_range)
        .collect::<Result<Vec<_>>>()?;
    normalize_window(window.ticker.clone(), window.event_date, &ranges)
}

/// Per-minute observable on the 390-minute grid.
///
/// Slot `t` holds the value for minute `t`; slot 0 is always masked because
/// there is no intraday return into the opening minute.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayVolatilitySeries {
    pub ticker: String,
    pub date: NaiveDate,
    pub v: Vec<f64>,
    /// `true` where the value is unavailable.
    pub mask: Vec<bool>,
}

impl IntradayVolatilitySeries {
    pub fn new(ticker: impl Into<String>, date: NaiveDate, v: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if v.len() != MINUTES_PER_DAY || mask.len() != MINUTES_PER_DAY {
            return Err(Error::param(format!(
                "intraday series needs {MINUTES_PER_DAY} slots"
            )));
        }
        Ok(Self {
            ticker: ticker.into(),
            date,
            v,
            mask,
        })
    }

    /// Unmasked value at minute `t`.
    pub fn value(&self, t: usize) -> Option<f64> {
        (t < self.v.len() && !self.mask[t]).then(|| self.v[t])
    }

    pub fn unmasked(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.v
            .iter()
            .zip(&self.mask)
            .enumerate()
            .filter(|(_, (_, m))| !**m)
            .map(|(t, (v, _))| (t, *v))
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    fn map_values(&self, f: impl Fn(usize, f64) -> Option<f64>) -> Self {
        let mut out = self.clone();
        for t in 0..out.v.len() {
            if out.mask[t] {
                continue;
            }
            match f(t, out.v[t]) {
                Some(x) => out.v[t] = x,
                None => {
                    out.v[t] = 0.0;
                    out.mask[t] = true;
                }
            }
        }
        out
    }
}

/// Raw absolute 1-minute log returns `|ln(p(t)/p(t−1))|` for `t ∈ [1, 389]`.
///
/// A minute is masked when either it or the previous minute is absent; a
/// zero price move is a genuine zero and stays unmasked.
pub fn minute_volatility(series: &MinuteSeries) -> Result<IntradayVolatilitySeries> {
    if series.missing_count() == MINUTES_PER_DAY {
        return Err(Error::InsufficientData(format!(
            "no minute data for {} on {}",
            series.ticker, series.date
        )));
    }
    let mut v = vec![0.0; MINUTES_PER_DAY];
    let mut mask = vec![true; MINUTES_PER_DAY];
    for t in 1..MINUTES_PER_DAY {
        if let (Some(p0), Some(p1)) = (series.price(t - 1), series.price(t)) {
            v[t] = (p1 / p0).ln().abs();
            mask[t] = false;
        }
    }
    IntradayVolatilitySeries::new(series.ticker.clone(), series.date, v, mask)
}

/// Shares traded per minute on the same `[1, 389]` grid as [`minute_volatility`].
pub fn minute_volume(series: &MinuteSeries) -> Result<IntradayVolatilitySeries> {
    if series.missing_count() == MINUTES_PER_DAY {
        return Err(Error::InsufficientData(format!(
            "no minute data for {} on {}",
            series.ticker, series.date
        )));
    }
    let mut v = vec![0.0; MINUTES_PER_DAY];
    let mut mask = vec![true; MINUTES_PER_DAY];
    for t in 1..MINUTES_PER_DAY {
        if let Some(w) = series.volume(t) {
            v[t] = w;
            mask[t] = false;
        }
    }
    IntradayVolatilitySeries::new(series.ticker.clone(), series.date, v, mask)
}

/// Pooled sample standard deviation over every unmasked minute of `days`.
pub fn pooled_std(days: &[IntradayVolatilitySeries]) -> Result<f64> {
    let values = || days.iter().flat_map(|d| d.unmasked().map(|(_, v)| v));
    let n = values().count();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "standardisation needs at least 2 unmasked minutes, got {n}"
        )));
    }
    let mean = kahan_sum(values()) / n as f64;
    let var = kahan_sum(values().map(|v| (v - mean) * (v - mean))) / (n as f64 - 1.0);
    let sd = var.sqrt();
    if !(sd > 1e-300) || sd <= 1e-12 * mean.abs() {
        return Err(Error::degenerate("zero dispersion in volatility series"));
    }
    Ok(sd)
}

/// Divides every day of one ticker by the ticker's whole-period standard deviation.
pub fn standardize(days: &[IntradayVolatilitySeries]) -> Result<(Vec<IntradayVolatilitySeries>, f64)> {
    let sd = pooled_std(days)?;
    let scaled = days.iter().map(|d| d.map_values(|_, v| Some(v / sd))).collect();
    Ok((scaled, sd))
}

/// Average intraday pattern `A(s)`: mean volatility at each minute of day.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradayPattern {
    /// `a[s]` for `s ∈ [0, 389]`; zero where there were no observations.
    pub a: Vec<f64>,
    pub counts: Vec<usize>,
    pub n_days: usize,
}

impl IntradayPattern {
    /// Estimates the pattern from `days`, which must cover at least
    /// `min_days` distinct dates.
    pub fn estimate(days: &[&IntradayVolatilitySeries], min_days: usize) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::InsufficientData(
                "intraday pattern estimation set is empty".into(),
            ));
        }
        let n_days = days.iter().map(|d| d.date).collect::<BTreeSet<_>>().len();
        if n_days < min_days {
            return Err(Error::InsufficientData(format!(
                "intraday pattern needs {min_days} days, estimation set spans {n_days}"
            )));
        }
        let mut a = vec![0.0; MINUTES_PER_DAY];
        let mut counts = vec![0; MINUTES_PER_DAY];
        for (s, slot) in a.iter_mut().enumerate() {
            let vals = days.iter().filter_map(|d| d.value(s));
            let n = vals.clone().count();
            if n > 0 {
                *slot = kahan_sum(vals) / n as f64;
                counts[s] = n;
            }
        }
        Ok(Self { a, counts, n_days })
    }

    /// `v(t) / A(t)`; minutes with `A = 0` become masked.
    pub fn apply(&self, day: &IntradayVolatilitySeries) -> IntradayVolatilitySeries {
        day.map_values(|t, v| (self.a[t] > 0.0).then(|| v / self.a[t]))
    }

    /// Writes `minute,A` for minutes with observations.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["minute", "A"])?;
        for (s, a) in self.a.iter().enumerate() {
            if self.counts[s] > 0 {
                w.write_record([s.to_string(), a.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<pattern writer>", e))?;
        Ok(())
    }
}

/// Estimates the pattern on the days selected by `in_estimation_set` and
/// divides it out of every day.
pub fn remove_intraday_pattern<F>(
    days: &[IntradayVolatilitySeries],
    in_estimation_set: F,
    min_days: usize,
) -> Result<(Vec<IntradayVolatilitySeries>, IntradayPattern)>
where
    F: Fn(&IntradayVolatilitySeries) -> bool,
{
    let est: Vec<&IntradayVolatilitySeries> = days.iter().filter(|d| in_estimation_set(d)).collect();
    let pattern = IntradayPattern::estimate(&est, min_days)?;
    let out = days.iter().map(|d| pattern.apply(d)).collect();
    Ok((out, pattern))
}

/// Standardised, pattern-free minute volatility for every (ticker, day).
#[derive(Debug, Clone)]
pub struct PreparedIntraday {
    pub days: BTreeMap<DayKey, IntradayVolatilitySeries>,
    pub pattern: IntradayPattern,
    /// Whole-period standard deviation used for each ticker.
    pub scale: BTreeMap<String, f64>,
    /// Days left out, with the reason.
    pub skipped: Vec<(DayKey, String)>,
}

/// Raw returns, then per-ticker standardisation, then division by the
/// intraday pattern pooled over all tickers on days not in `event_dates`.
pub fn prepare_intraday(
    minutes: &BTreeMap<DayKey, MinuteSeries>,
    event_dates: &BTreeSet<NaiveDate>,
    min_days: usize,
) -> Result<PreparedIntraday> {
    let mut by_ticker: BTreeMap<&str, Vec<IntradayVolatilitySeries>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for ((ticker, date), series) in minutes {
        match minute_volatility(series) {
            Ok(v) => by_ticker.entry(ticker.as_str()).or_default().push(v),
            Err(e) => {
                log::warn!("skipping {ticker} {date}: {e}");
                skipped.push(((ticker.clone(), *date), e.to_string()));
            }
        }
    }
    let mut scale = BTreeMap::new();
    let mut standardized = Vec::new();
    for (ticker, days) in by_ticker {
        match standardize(&days) {
            Ok((s, sd)) => {
                scale.insert(ticker.to_string(), sd);
                standardized.extend(s);
            }
            Err(e) => {
                log::warn!("skipping {ticker}: {e}");
                skipped.extend(days.iter().map(|d| ((ticker.to_string(), d.date), e.to_string())));
            }
        }
    }
    let (out, pattern) =
        remove_intraday_pattern(&standardized, |d| !event_dates.contains(&d.date), min_days)?;
    Ok(PreparedIntraday {
        days: out.into_iter().map(|d| ((d.ticker.clone(), d.date), d)).collect(),
        pattern,
        scale,
        skipped,
    })
}

/// Which mean daily volume the event-day volume is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeBaseline {
    /// Mean over the whole loaded series (cross-meeting comparison).
    WholePeriod,
    /// Mean over the `2W+1`-day window centred on the event.
    Window(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeWeight {
    pub ticker: String,
    pub event_date: NaiveDate,
    pub phi: f64,
}

/// `φ = volume(event day) / baseline mean volume`.
pub fn volume_weight(
    bars: &DailyBarSeries,
    event_date: NaiveDate,
    baseline: VolumeBaseline,
) -> Result<VolumeWeight> {
    let event_volume = bars
        .bar_on(event_date)
        .ok_or(Error::NotTradingDay(event_date))?
        .volume;
    let base = match baseline {
        VolumeBaseline::WholePeriod => bars.mean_volume(),
        VolumeBaseline::Window(w) => {
            let win = event_window(bars, event_date, w)?;
            kahan_sum(win.bars.iter().map(|b| b.volume)) / win.bars.len() as f64
        }
    };
    if !(base > 0.0) {
        return Err(Error::degenerate(format!(
            "zero baseline volume for {} around {event_date}",
            bars.ticker
        )));
    }
    Ok(VolumeWeight {
        ticker: bars.ticker.clone(),
        event_date,
        phi: event_volume / base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use chrono::Datelike;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn bar(high: f64, low: f64) -> DailyBar {
        DailyBar {
            date: d("2001-08-21"),
            open: low,
            high,
            low,
            close: high,
            volume: 1.0,
        }
    }

    #[test]
    fn range_identity_and_analytic() {
        assert_eq!(daily_range(&bar(5.0, 5.0)).unwrap(), 0.0);
        assert_relative_eq!(daily_range(&bar(std::f64::consts::E * 3.0, 3.0)).unwrap(), 1.0, max_relative = 1e-15);
        // ln(1.025) to 20 digits: 0.024692612590371489...
        assert_relative_eq!(daily_range(&bar(102.5, 100.0)).unwrap(), 0.024692612590371489, max_relative = 1e-14);
        assert!(daily_range(&bar(5.0, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn range_is_scale_invariant(hi in 1.0f64..1e4, ratio in 0.01f64..1.0, c in 1e-3f64..1e3) {
            let lo = hi * ratio;
            let r1 = daily_range(&bar(hi, lo)).unwrap();
            let r2 = daily_range(&bar(hi * c, lo * c)).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-12 * r1.max(1.0));
        }
    }

    #[test]
    fn normalize_examples() {
        let w = normalize_window("A", d("2001-08-21"), &[0.02; 41]).unwrap();
        assert!(w.v.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let w = normalize_window("A", d("2001-08-21"), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.v, vec![0.5, 1.0, 1.5]);
        assert_eq!(w.at(1), Some(1.5));
        assert!(matches!(
            normalize_window("A", d("2001-08-21"), &[0.0; 5]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn normalize_random_window_has_unit_mean() {
        let mut rng = substream(11, 0);
        for _ in 0..200 {
            let ranges: Vec<f64> = (0..41).map(|_| rng.random_range(0.001..0.1)).collect();
            let w = normalize_window("A", d("2001-08-21"), &ranges).unwrap();
            let mean = w.v.iter().sum::<f64>() / 41.0;
            assert!((mean - 1.0).abs() < 1e-12);
        }
    }

    fn day_from_prices(prices: &[f64]) -> MinuteSeries {
        MinuteSeries::from_prices("A", d("2001-08-21"), prices, &vec![100.0; MINUTES_PER_DAY]).unwrap()
    }

    #[test]
    fn minute_volatility_examples() {
        let v = minute_volatility(&day_from_prices(&vec![50.0; MINUTES_PER_DAY])).unwrap();
        assert!(v.unmasked().all(|(_, x)| x == 0.0));
        assert_eq!(v.masked_count(), 1);

        let prices: Vec<f64> = (0..MINUTES_PER_DAY)
            .map(|m| if m >= 100 { 50.0 * 0.01f64.exp() } else { 50.0 })
            .collect();
        let v = minute_volatility(&day_from_prices(&prices)).unwrap();
        for (t, x) in v.unmasked() {
            let want = if t == 100 { 0.01 } else { 0.0 };
            assert!((x - want).abs() < 1e-15, "t={t} x={x}");
        }
    }

    #[test]
    fn minute_volatility_matches_recomputation() {
        let mut rng = substream(3, 1);
        let mut p = 40.0;
        let prices: Vec<f64> = (0..MINUTES_PER_DAY)
            .map(|_| {
                p *= (rng.random_range(-0.002..0.002f64)).exp();
                p
            })
            .collect();
        let v = minute_volatility(&day_from_prices(&prices)).unwrap();
        for t in 1..MINUTES_PER_DAY {
            let oracle = (prices[t].ln() - prices[t - 1].ln()).abs();
            assert!((v.v[t] - oracle).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_minutes_mask_neighbours() {
        let mut s = MinuteSeries::empty("A", d("2001-08-21"));
        for m in (0..MINUTES_PER_DAY).filter(|m| *m != 200) {
            s.set(m, 10.0, 1.0).unwrap();
        }
        let v = minute_volatility(&s).unwrap();
        assert!(v.mask[200] && v.mask[201]);
        assert!(!v.mask[199] && !v.mask[202]);
        assert!(minute_volatility(&MinuteSeries::empty("A", d("2001-08-21"))).is_err());
    }

    fn noise_day(rng: &mut impl Rng, date: NaiveDate, scale: f64) -> IntradayVolatilitySeries {
        let v: Vec<f64> = (0..MINUTES_PER_DAY).map(|_| scale * rng.random::<f64>()).collect();
        let mut mask = vec![false; MINUTES_PER_DAY];
        mask[0] = true;
        IntradayVolatilitySeries::new("A", date, v, mask).unwrap()
    }

    fn sample_std(days: &[IntradayVolatilitySeries]) -> f64 {
        let vals: Vec<f64> = days.iter().flat_map(|d| d.unmasked().map(|(_, v)| v)).collect();
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn standardize_gives_unit_std_for_any_scale() {
        let mut rng = substream(5, 0);
        for scale in [0.02 * 12f64.sqrt(), 3.0, 1e-4] {
            let days: Vec<_> = (0..5).map(|i| noise_day(&mut rng, d("2001-01-02") + chrono::Days::new(i), scale)).collect();
            let (scaled, _) = standardize(&days).unwrap();
            assert!((sample_std(&scaled) - 1.0).abs() < 1e-9);
            let (twice, _) = standardize(&scaled).unwrap();
            for (a, b) in twice.iter().zip(&scaled) {
                for t in 0..MINUTES_PER_DAY {
                    assert!((a.v[t] - b.v[t]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn standardize_rejects_zero_dispersion() {
        let v = vec![0.3; MINUTES_PER_DAY];
        let day = IntradayVolatilitySeries::new("A", d("2001-01-02"), v, vec![false; MINUTES_PER_DAY]).unwrap();
        assert!(matches!(standardize(&[day]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn masked_sentinels_never_leak() {
        let mut rng = substream(9, 0);
        let days: Vec<_> = (0..20).map(|i| noise_day(&mut rng, d("2001-01-02") + chrono::Days::new(i), 1.0)).collect();
        let mut poisoned = days.clone();
        for day in &mut poisoned {
            for t in (5..MINUTES_PER_DAY).step_by(7) {
                day.mask[t] = true;
                day.v[t] = 1e9;
            }
        }
        let mut clean = poisoned.clone();
        for day in &mut clean {
            for t in 0..MINUTES_PER_DAY {
                if day.mask[t] {
                    day.v[t] = 0.0;
                }
            }
        }
        let (s1, sd1) = standardize(&poisoned).unwrap();
        let (s2, sd2) = standardize(&clean).unwrap();
        assert_eq!(sd1, sd2);
        let (_, p1) = remove_intraday_pattern(&s1, |_| true, 20).unwrap();
        let (_, p2) = remove_intraday_pattern(&s2, |_| true, 20).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn pattern_identity_and_flat() {
        let mut rng = substream(1, 2);
        let template = noise_day(&mut rng, d("2001-01-02"), 2.0);
        let days: Vec<_> = (0..20)
            .map(|i| {
                let mut x = template.clone();
                x.date = d("2001-01-02") + chrono::Days::new(i);
                x
            })
            .collect();
        let (out, _) = remove_intraday_pattern(&days, |_| true, 20).unwrap();
        for day in &out {
            assert!(day.unmasked().all(|(_, v)| (v - 1.0).abs() < 1e-12));
        }

        let flat = IntradayPattern {
            a: vec![2.5; MINUTES_PER_DAY],
            counts: vec![1; MINUTES_PER_DAY],
            n_days: 1,
        };
        let x = flat.apply(&template);
        for (t, v) in x.unmasked() {
            assert!((v - template.v[t] / 2.5).abs() < 1e-15);
        }
    }

    #[test]
    fn pattern_zero_minutes_are_masked() {
        let mut day = IntradayVolatilitySeries::new("A", d("2001-01-02"), vec![1.0; MINUTES_PER_DAY], vec![false; MINUTES_PER_DAY]).unwrap();
        day.v[10] = 0.0;
        let (out, pattern) = remove_intraday_pattern(std::slice::from_ref(&day), |_| true, 1).unwrap();
        assert_eq!(pattern.a[10], 0.0);
        assert!(out[0].mask[10]);
    }

    #[test]
    fn pattern_errors() {
        let mut rng = substream(1, 3);
        let days: Vec<_> = (0..3).map(|i| noise_day(&mut rng, d("2001-01-02") + chrono::Days::new(i), 1.0)).collect();
        assert!(remove_intraday_pattern(&days, |_| false, 1).is_err());
        assert!(remove_intraday_pattern(&days, |_| true, 20).is_err());
    }

    #[test]
    fn pattern_removal_commutes_with_scaling() {
        let mut rng = substream(1, 4);
        let days: Vec<_> = (0..20).map(|i| noise_day(&mut rng, d("2001-01-02") + chrono::Days::new(i), 1.0)).collect();
        let scaled: Vec<_> = days.iter().map(|x| x.map_values(|_, v| Some(7.0 * v))).collect();
        let (a, _) = remove_intraday_pattern(&days, |_| true, 20).unwrap();
        let (b, _) = remove_intraday_pattern(&scaled, |_| true, 20).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for t in 1..MINUTES_PER_DAY {
                assert!((x.v[t] - y.v[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn u_shaped_pattern_is_flattened() {
        // U-shaped seasonality on top of flat noise; after removal the
        // minute-of-day means must be flat within 2%.
        let mut rng = substream(21, 0);
        let shape = |s: usize| {
            let x = (s as f64 - 195.0) / 195.0;
            1.0 + 2.0 * x * x
        };
        let days: Vec<_> = (0..400)
            .map(|i| {
                let mut day = noise_day(&mut rng, d("2000-01-03") + chrono::Days::new(i), 1.0);
                for t in 1..MINUTES_PER_DAY {
                    day.v[t] *= shape(t);
                }
                day
            })
            .collect();
        let est: Vec<_> = days.iter().filter(|x| x.date.ordinal() % 2 == 0).cloned().collect();
        let held_out: Vec<_> = days.iter().filter(|x| x.date.ordinal() % 2 == 1).cloned().collect();
        let (_, pattern) = remove_intraday_pattern(&est, |_| true, 20).unwrap();
        let out: Vec<_> = held_out.iter().map(|x| pattern.apply(x)).collect();
        for t in 1..MINUTES_PER_DAY {
            let m = out.iter().map(|x| x.v[t]).sum::<f64>() / out.len() as f64;
            assert!((m - 1.0).abs() < 0.35, "minute {t}: {m}");
        }
        // Grand means over the morning, midday and afternoon thirds are flat within 2%.
        let third = |lo: usize, hi: usize| {
            let vals: Vec<f64> = out.iter().flat_map(|x| (lo..hi).map(move |t| x.v[t])).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let thirds = [third(1, 130), third(130, 260), third(260, 390)];
        for m in thirds {
            assert!((m - 1.0).abs() < 0.02, "{thirds:?}");
        }
    }

    fn bars_with_volumes(vols: &[f64]) -> DailyBarSeries {
        let start = d("2001-01-01");
        let bars = vols
            .iter()
            .enumerate()
            .map(|(i, v)| DailyBar {
                date: start + chrono::Days::new(i as u64),
                open: 10.0,
                high: 11.0,
                low: 9.0,
                close: 10.0,
                volume: *v,
            })
            .collect();
        DailyBarSeries::new("A", bars).unwrap()
    }

    #[test]
    fn volume_weight_examples() {
        let s = bars_with_volumes(&[100.0; 9]);
        let date = s.bars()[4].date;
        assert_eq!(volume_weight(&s, date, VolumeBaseline::WholePeriod).unwrap().phi, 1.0);
        assert_eq!(volume_weight(&s, date, VolumeBaseline::Window(2)).unwrap().phi, 1.0);

        let mut v = vec![100.0; 9];
        v[4] = 200.0;
        let s = bars_with_volumes(&v);
        // window 3..5: (100 + 200 + 100)/3
        let phi = volume_weight(&s, date, VolumeBaseline::Window(1)).unwrap().phi;
        assert!((phi - 1.5).abs() < 1e-15);

        let s = bars_with_volumes(&[0.0; 5]);
        assert!(volume_weight(&s, s.bars()[2].date, VolumeBaseline::WholePeriod).is_err());
    }

    #[test]
    fn volume_weight_double_baseline() {
        // mean = (900 + 225) / 10 = 112.5, half of 225
        let mut v = vec![100.0; 10];
        v[5] = 225.0;
        let s = bars_with_volumes(&v);
        let phi = volume_weight(&s, s.bars()[5].date, VolumeBaseline::WholePeriod).unwrap().phi;
        assert!((phi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn volume_weight_matches_two_pass() {
        let mut rng = substream(8, 8);
        let vols: Vec<f64> = (0..500).map(|_| rng.random_range(1e3..1e7)).collect();
        let s = bars_with_volumes(&vols);
        for i in [25usize, 100, 333] {
            let date = s.bars()[i].date;
            let whole = vols.iter().sum::<f64>() / vols.len() as f64;
            let win = vols[i - 20..=i + 20].iter().sum::<f64>() / 41.0;
            let a = volume_weight(&s, date, VolumeBaseline::WholePeriod).unwrap().phi;
            let b = volume_weight(&s, date, VolumeBaseline::Window(20)).unwrap().phi;
            assert!((a - vols[i] / whole).abs() < 1e-12);
            assert!((b - vols[i] / win).abs() < 1e-12);
        }
    }
}
