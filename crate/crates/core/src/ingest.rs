//! Input files and the shared trading-day calendar.
//!
//! All inputs are UTF-8 CSV with a mandatory header row and ISO-8601 dates.
//! Dates are the only join key; minutes are exchange-local offsets from the
//! 9:30 open, so no timezone arithmetic happens anywhere in the crate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{MINUTES_PER_DAY, SCHEDULED_ANNOUNCE_MINUTE};

/// Ordered set of trading dates with O(1) date to index lookup.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
    index: HashMap<NaiveDate, usize>,
}

impl TradingCalendar {
    /// Builds a calendar from dates that must already be strictly increasing.
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::param(format!(
                "calendar dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let index = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        Ok(Self { dates, index })
    }

    /// Union of arbitrary dates, sorted and deduplicated.
    pub fn from_dates<I: IntoIterator<Item = NaiveDate>>(dates: I) -> Self {
        let set: BTreeSet<NaiveDate> = dates.into_iter().collect();
        Self::new(set.into_iter().collect()).expect("BTreeSet iteration is sorted")
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.index.get(&date).copied()
    }

    pub fn date_at(&self, index: usize) -> Option<NaiveDate> {
        self.dates.get(index).copied()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.index.contains_key(&date)
    }

    /// The trading date `offset` trading days away from `date`.
    pub fn offset(&self, date: NaiveDate, offset: i64) -> Option<NaiveDate> {
        let i = self.index_of(date)? as i64 + offset;
        if i < 0 {
            return None;
        }
        self.date_at(i as usize)
    }
}

/// One daily OHLCV record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl DailyBar {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, p) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !(p.is_finite() && p > 0.0) {
                return Err(format!("non-positive {name} price {p}"));
            }
        }
        if self.high < self.low {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!(
                "open {} outside [low {}, high {}]",
                self.open, self.low, self.high
            ));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!(
                "close {} outside [low {}, high {}]",
                self.close, self.low, self.high
            ));
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(format!("negative volume {}", self.volume));
        }
        Ok(())
    }
}

/// Daily bars of one ticker, sorted by date.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyBarSeries {
    pub ticker: String,
    bars: Vec<DailyBar>,
}

impl DailyBarSeries {
    /// Sorts the bars; duplicate dates are rejected.
    pub fn new(ticker: impl Into<String>, mut bars: Vec<DailyBar>) -> Result<Self> {
        let ticker = ticker.into();
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::param(format!(
                "duplicate daily bar for {ticker} on {}",
                w[0].date
            )));
        }
        Ok(Self { ticker, bars })
    }

    pub fn bars(&self) -> &[DailyBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.bars.binary_search_by_key(&date, |b| b.date).ok()
    }

    pub fn bar_on(&self, date: NaiveDate) -> Option<&DailyBar> {
        self.position(date).map(|i| &self.bars[i])
    }

    /// Mean daily volume over the whole series.
    pub fn mean_volume(&self) -> f64 {
        if self.bars.is_empty() {
            return 0.0;
        }
        crate::stats::kahan_sum(self.bars.iter().map(|b| b.volume)) / self.bars.len() as f64
    }
}

/// Daily bars for all tickers plus the calendar inferred from them.
#[derive(Debug, Clone)]
pub struct DailyBarSet {
    pub calendar: TradingCalendar,
    pub series: BTreeMap<String, DailyBarSeries>,
}

/// Event-centred slice of a daily series; index `half_width` is the event day.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSeries {
    pub ticker: String,
    pub event_date: NaiveDate,
    pub half_width: usize,
    pub bars: Vec<DailyBar>,
}

impl WindowedSeries {
    /// Bar at trading-day offset `dt` from the event day.
    pub fn at(&self, dt: i64) -> Option<&DailyBar> {
        let i = self.half_width as i64 + dt;
        if i < 0 {
            return None;
        }
        self.bars.get(i as usize)
    }
}

/// Cuts `2·half_width + 1` bars centred on `event_date`.
///
/// Windows that would run past either end of the series are rejected rather
/// than padded, so they never enter an ensemble average.
pub fn event_window(
    series: &DailyBarSeries,
    event_date: NaiveDate,
    half_width: usize,
) -> Result<WindowedSeries> {
    let pos = series
        .position(event_date)
        .ok_or(Error::NotTradingDay(event_date))?;
    if pos < half_width || pos + half_width >= series.len() {
        return Err(Error::EdgeTruncated {
            date: event_date,
            half_width,
        });
    }
    Ok(WindowedSeries {
        ticker: series.ticker.clone(),
        event_date,
        half_width,
        bars: series.bars[pos - half_width..=pos + half_width].to_vec(),
    })
}

/// One minute of trading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinuteBar {
    pub price: f64,
    pub volume: f64,
}

/// Dense 390-slot minute series for one (ticker, date); absent minutes are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteSeries {
    pub ticker: String,
    pub date: NaiveDate,
    slots: Vec<Option<MinuteBar>>,
}

impl MinuteSeries {
    pub fn empty(ticker: impl Into<String>, date: NaiveDate) -> Self {
        Self {
            ticker: ticker.into(),
            date,
            slots: vec![None; MINUTES_PER_DAY],
        }
    }

    /// Full day from 390 prices and volumes.
    pub fn from_prices(
        ticker: impl Into<String>,
        date: NaiveDate,
        prices: &[f64],
        volumes: &[f64],
    ) -> Result<Self> {
        if prices.len() != MINUTES_PER_DAY || volumes.len() != MINUTES_PER_DAY {
            return Err(Error::param(format!(
                "minute series needs exactly {MINUTES_PER_DAY} prices and volumes"
            )));
        }
        let mut s = Self::empty(ticker, date);
        for (m, (&p, &v)) in prices.iter().zip(volumes).enumerate() {
            s.set(m, p, v)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, minute: usize, price: f64, volume: f64) -> Result<()> {
        if minute >= MINUTES_PER_DAY {
            return Err(Error::param(format!("minute {minute} outside [0, 389]")));
        }
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::param(format!("non-positive price {price}")));
        }
        if !(volume.is_finite() && volume >= 0.0) {
            return Err(Error::param(format!("negative volume {volume}")));
        }
        self.slots[minute] = Some(MinuteBar { price, volume });
        Ok(())
    }

    pub fn get(&self, minute: usize) -> Option<MinuteBar> {
        self.slots.get(minute).copied().flatten()
    }

    pub fn price(&self, minute: usize) -> Option<f64> {
        self.get(minute).map(|b| b.price)
    }

    pub fn volume(&self, minute: usize) -> Option<f64> {
        self.get(minute).map(|b| b.volume)
    }

    pub fn is_missing(&self, minute: usize) -> bool {
        self.get(minute).is_none()
    }

    pub fn missing_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }

    pub fn slots(&self) -> &[Option<MinuteBar>] {
        &self.slots
    }
}

/// Key of a minute series.
pub type DayKey = (String, NaiveDate);

/// Daily rate triples in percent, aligned on a trading calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    calendar: TradingCalendar,
    pub target: Vec<f64>,
    pub effective: Vec<f64>,
    pub tbill6m: Vec<f64>,
}

impl RateSeries {
    pub fn new(
        dates: Vec<NaiveDate>,
        target: Vec<f64>,
        effective: Vec<f64>,
        tbill6m: Vec<f64>,
    ) -> Result<Self> {
        let n = dates.len();
        if target.len() != n || effective.len() != n || tbill6m.len() != n {
            return Err(Error::param("rate columns must match the date count"));
        }
        for (i, v) in target.iter().chain(&effective).chain(&tbill6m).enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::param(format!(
                    "non-positive rate {v} on {}",
                    dates[i % n]
                )));
            }
        }
        Ok(Self {
            calendar: TradingCalendar::new(dates)?,
            target,
            effective,
            tbill6m,
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.calendar.dates()
    }

    pub fn len(&self) -> usize {
        self.calendar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calendar.is_empty()
    }
}

/// A forward-filled rate cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateFill {
    pub date: NaiveDate,
    pub column: &'static str,
}

/// Result of [`load_rates`]: the aligned series and an audit of every fill.
#[derive(Debug, Clone)]
pub struct RateLoad {
    pub rates: RateSeries,
    pub fills: Vec<RateFill>,
}

impl RateLoad {
    pub fn fill_count(&self) -> usize {
        self.fills.len()
    }
}

/// One row of the announcement calendar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnouncementEvent {
    pub date: NaiveDate,
    /// Minutes after the open, in `[0, 389]`.
    pub announce_minute: u32,
    pub r_new: f64,
    pub delta_r: f64,
    pub scheduled: bool,
    /// `delta_r / (r_new - delta_r)`.
    pub relative_change: f64,
}

impl AnnouncementEvent {
    pub fn new(
        date: NaiveDate,
        announce_minute: u32,
        r_new: f64,
        delta_r: f64,
        scheduled: bool,
    ) -> Result<Self> {
        if announce_minute as usize >= MINUTES_PER_DAY {
            return Err(Error::param(format!(
                "announce_minute {announce_minute} outside [0, 389]"
            )));
        }
        let relative_change = delta_r / (r_new - delta_r);
        if !relative_change.is_finite() {
            return Err(Error::param(format!(
                "relative change undefined for r_new {r_new}, delta_r {delta_r}"
            )));
        }
        Ok(Self {
            date,
            announce_minute,
            r_new,
            delta_r,
            scheduled,
            relative_change,
        })
    }

    /// Scheduled meeting announced at the standard 2:15 PM minute.
    pub fn scheduled(date: NaiveDate, r_new: f64, delta_r: f64) -> Result<Self> {
        Self::new(date, SCHEDULED_ANNOUNCE_MINUTE, r_new, delta_r, true)
    }

    /// `-1` for a rate cut, `+1` for an increase or no change.
    pub fn rate_sign(&self) -> f64 {
        if self.delta_r < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Ticker to sector label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectorMap {
    map: BTreeMap<String, String>,
}

impl SectorMap {
    pub fn insert(&mut self, ticker: impl Into<String>, sector: impl Into<String>) {
        self.map.insert(ticker.into(), sector.into());
    }

    pub fn sector_of(&self, ticker: &str) -> Option<&str> {
        self.map.get(ticker).map(String::as_str)
    }

    pub fn members(&self, sector: &str) -> Vec<&str> {
        self.map
            .iter()
            .filter(|(_, s)| s.as_str() == sector)
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn sectors(&self) -> BTreeSet<&str> {
        self.map.values().map(String::as_str).collect()
    }

    /// Tickers that have no sector assignment.
    pub fn unmapped<'a, I: IntoIterator<Item = &'a str>>(&self, tickers: I) -> Vec<&'a str> {
        tickers
            .into_iter()
            .filter(|t| !self.map.contains_key(*t))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, path: &Path, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

/// Iterates records as (line number, deserialized row).
fn rows<'a, R: Read, T: serde::de::DeserializeOwned>(
    rdr: &'a mut csv::Reader<R>,
    path: &Path,
) -> impl Iterator<Item = Result<(u64, T)>> + 'a {
    let headers = rdr.headers().cloned().unwrap_or_default();
    let path = path.to_path_buf();
    rdr.records().map(move |rec| {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: path.clone(),
            line,
            message: e.to_string(),
        })?;
        Ok((line, row))
    })
}

fn invalid(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Invalid {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

#[derive(Deserialize)]
struct DailyRow {
    ticker: String,
    date: NaiveDate,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    volume: f64,
}

pub const DAILY_HEADER: [&str; 7] = ["ticker", "date", "open", "high", "low", "close", "volume"];
pub const MINUTE_HEADER: [&str; 5] = ["ticker", "date", "minute", "price", "volume"];
pub const RATES_HEADER: [&str; 4] = ["date", "target", "effective", "tbill6m"];
pub const EVENTS_HEADER: [&str; 5] = ["date", "announce_minute", "r_new", "delta_r", "scheduled"];
pub const SECTORS_HEADER: [&str; 2] = ["ticker", "sector"];

/// Loads `ticker,date,open,high,low,close,volume`.
pub fn load_daily_bars(path: impl AsRef<Path>) -> Result<DailyBarSet> {
    let path = path.as_ref();
    read_daily_bars(open(path)?, path)
}

pub fn read_daily_bars<R: Read>(reader: R, path: &Path) -> Result<DailyBarSet> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, path, &DAILY_HEADER)?;
    let mut grouped: BTreeMap<String, Vec<(u64, DailyBar)>> = BTreeMap::new();
    for row in rows::<_, DailyRow>(&mut rdr, path) {
        let (line, r) = row?;
        let bar = DailyBar {
            date: r.date,
            open: r.open,
            high: r.high,
            low: r.low,
            close: r.close,
            volume: r.volume,
        };
        bar.validate()
            .map_err(|m| invalid(path, line, format!("{} {}: {m}", r.ticker, r.date)))?;
        grouped.entry(r.ticker).or_default().push((line, bar));
    }
    let mut series = BTreeMap::new();
    for (ticker, mut bars) in grouped {
        bars.sort_by_key(|(_, b)| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].1.date == w[1].1.date) {
            return Err(invalid(
                path,
                w[1].0,
                format!("duplicate bar for {ticker} on {}", w[1].1.date),
            ));
        }
        let bars = bars.into_iter().map(|(_, b)| b).collect();
        series.insert(ticker.clone(), DailyBarSeries::new(ticker, bars)?);
    }
    let calendar =
        TradingCalendar::from_dates(series.values().flat_map(|s| s.bars.iter().map(|b| b.date)));
    Ok(DailyBarSet { calendar, series })
}

pub fn write_daily_bars<W: Write>(writer: W, series: &BTreeMap<String, DailyBarSeries>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DAILY_HEADER)?;
    for s in series.values() {
        for b in &s.bars {
            w.write_record([
                s.ticker.clone(),
                b.date.to_string(),
                b.open.to_string(),
                b.high.to_string(),
                b.low.to_string(),
                b.close.to_string(),
                b.volume.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<daily writer>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct MinuteRow {
    ticker: String,
    date: NaiveDate,
    minute: i64,
    price: f64,
    volume: f64,
}

/// Loads `ticker,date,minute,price,volume` into dense per-day series.
pub fn load_minute_bars(path: impl AsRef<Path>) -> Result<BTreeMap<DayKey, MinuteSeries>> {
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    read_minute_bars_into(open(path)?, path, &mut out)?;
    Ok(out)
}

/// Loads several minute-bar files into one map; a (ticker, date, minute)
/// present in two files is a collision.
pub fn load_minute_files<P: AsRef<Path>>(paths: &[P]) -> Result<BTreeMap<DayKey, MinuteSeries>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let p = p.as_ref();
        read_minute_bars_into(open(p)?, p, &mut out)?;
    }
    Ok(out)
}

pub fn read_minute_bars_into<R: Read>(
    reader: R,
    path: &Path,
    out: &mut BTreeMap<DayKey, MinuteSeries>,
) -> Result<()> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, path, &MINUTE_HEADER)?;
    for row in rows::<_, MinuteRow>(&mut rdr, path) {
        let (line, r) = row?;
        if r.minute < 0 || r.minute >= MINUTES_PER_DAY as i64 {
            return Err(invalid(
                path,
                line,
                format!("minute {} outside [0, 389]", r.minute),
            ));
        }
        let minute = r.minute as usize;
        let series = out
            .entry((r.ticker.clone(), r.date))
            .or_insert_with(|| MinuteSeries::empty(r.ticker.clone(), r.date));
        if !series.is_missing(minute) {
            return Err(invalid(
                path,
                line,
                format!("duplicate minute {} for {} on {}", minute, r.ticker, r.date),
            ));
        }
        series
            .set(minute, r.price, r.volume)
            .map_err(|e| invalid(path, line, e.to_string()))?;
    }
    Ok(())
}

pub fn write_minute_bars<'a, W: Write, I: IntoIterator<Item = &'a MinuteSeries>>(
    writer: W,
    series: I,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MINUTE_HEADER)?;
    for s in series {
        let date = s.date.to_string();
        for (m, slot) in s.slots.iter().enumerate() {
            if let Some(bar) = slot {
                w.write_record([
                    s.ticker.as_str(),
                    date.as_str(),
                    &m.to_string(),
                    &bar.price.to_string(),
                    &bar.volume.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<minute writer>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct RateRow {
    date: NaiveDate,
    target: Option<f64>,
    effective: Option<f64>,
    tbill6m: Option<f64>,
}

/// Loads `date,target,effective,tbill6m` and aligns it on `calendar`.
///
/// Empty cells, and calendar dates absent from the file, are forward-filled
/// from the most recent prior value; every fill is recorded. Without a
/// calendar the file's own dates form the grid. With `strict`, any fill is
/// an error.
pub fn load_rates(
    path: impl AsRef<Path>,
    calendar: Option<&TradingCalendar>,
    strict: bool,
) -> Result<RateLoad> {
    let path = path.as_ref();
    read_rates(open(path)?, path, calendar, strict)
}

pub fn read_rates<R: Read>(
    reader: R,
    path: &Path,
    calendar: Option<&TradingCalendar>,
    strict: bool,
) -> Result<RateLoad> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, path, &RATES_HEADER)?;
    let mut by_date: BTreeMap<NaiveDate, [Option<f64>; 3]> = BTreeMap::new();
    for row in rows::<_, RateRow>(&mut rdr, path) {
        let (line, r) = row?;
        let cells = [r.target, r.effective, r.tbill6m];
        for (v, name) in cells.iter().zip(RATE_COLUMNS) {
            if let Some(v) = v {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(invalid(
                        path,
                        line,
                        format!("non-positive {name} rate {v} on {}", r.date),
                    ));
                }
            }
        }
        if by_date.insert(r.date, cells).is_some() {
            return Err(invalid(path, line, format!("duplicate rate row for {}", r.date)));
        }
    }

    let grid: Vec<NaiveDate> = match calendar {
        Some(c) => c.dates().to_vec(),
        None => by_date.keys().copied().collect(),
    };
    let mut last: [Option<f64>; 3] = [None; 3];
    let mut cols: [Vec<f64>; 3] = Default::default();
    let mut fills = Vec::new();
    let mut source = by_date.iter().peekable();
    for &date in &grid {
        // Absorb every file row up to and including `date`, so values on
        // off-calendar dates can still seed a later fill.
        let mut today: [Option<f64>; 3] = [None; 3];
        while let Some((d, cells)) = source.peek() {
            if **d > date {
                break;
            }
            for k in 0..3 {
                if let Some(v) = cells[k] {
                    last[k] = Some(v);
                    if **d == date {
                        today[k] = Some(v);
                    }
                }
            }
            source.next();
        }
        for k in 0..3 {
            let v = match today[k] {
                Some(v) => v,
                None => {
                    let v = last[k].ok_or(Error::LeadingGap {
                        date,
                        column: RATE_COLUMNS[k],
                    })?;
                    fills.push(RateFill {
                        date,
                        column: RATE_COLUMNS[k],
                    });
                    v
                }
            };
            cols[k].push(v);
        }
    }
    for f in &fills {
        log::warn!("{}: forward-filled {} on {}", path.display(), f.column, f.date);
    }
    if strict && !fills.is_empty() {
        return Err(Error::FilledInStrictMode { count: fills.len() });
    }
    let [target, effective, tbill6m] = cols;
    Ok(RateLoad {
        rates: RateSeries::new(grid, target, effective, tbill6m)?,
        fills,
    })
}

const RATE_COLUMNS: [&str; 3] = ["target", "effective", "tbill6m"];

pub fn write_rates<W: Write>(writer: W, rates: &RateSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RATES_HEADER)?;
    for (i, d) in rates.dates().iter().enumerate() {
        w.write_record([
            d.to_string(),
            rates.target[i].to_string(),
            rates.effective[i].to_string(),
            rates.tbill6m[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<rates writer>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct EventRow {
    date: NaiveDate,
    announce_minute: i64,
    r_new: f64,
    delta_r: f64,
    scheduled: String,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Some(true),
        "false" | "0" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Loads `date,announce_minute,r_new,delta_r,scheduled`, sorted by date.
pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<AnnouncementEvent>> {
    let path = path.as_ref();
    read_events(open(path)?, path)
}

pub fn read_events<R: Read>(reader: R, path: &Path) -> Result<Vec<AnnouncementEvent>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, path, &EVENTS_HEADER)?;
    let mut events = Vec::new();
    for row in rows::<_, EventRow>(&mut rdr, path) {
        let (line, r) = row?;
        if r.announce_minute < 0 || r.announce_minute >= MINUTES_PER_DAY as i64 {
            return Err(invalid(
                path,
                line,
                format!("announce_minute {} outside [0, 389]", r.announce_minute),
            ));
        }
        let scheduled = parse_flag(&r.scheduled)
            .ok_or_else(|| invalid(path, line, format!("bad scheduled flag `{}`", r.scheduled)))?;
        let ev = AnnouncementEvent::new(
            r.date,
            r.announce_minute as u32,
            r.r_new,
            r.delta_r,
            scheduled,
        )
        .map_err(|e| invalid(path, line, e.to_string()))?;
        events.push(ev);
    }
    events.sort_by_key(|e| e.date);
    Ok(events)
}

pub fn write_events<W: Write>(writer: W, events: &[AnnouncementEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENTS_HEADER)?;
    for e in events {
        w.write_record([
            e.date.to_string(),
            e.announce_minute.to_string(),
            e.r_new.to_string(),
            e.delta_r.to_string(),
            e.scheduled.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<events writer>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct SectorRow {
    ticker: String,
    sector: String,
}

/// Loads `ticker,sector`.
pub fn load_sectors(path: impl AsRef<Path>) -> Result<SectorMap> {
    let path = path.as_ref();
    let mut rdr = csv_reader(open(path)?);
    check_header(&mut rdr, path, &SECTORS_HEADER)?;
    let mut map = SectorMap::default();
    for row in rows::<_, SectorRow>(&mut rdr, path) {
        let (_, r) = row?;
        map.insert(r.ticker, r.sector);
    }
    Ok(map)
}

/// Creates `path` (and its parents) for whole-file replacement.
pub fn create_file(path: impl AsRef<Path>) -> Result<File> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Every `*.csv` under `dir`, sorted by name.
pub fn csv_files_in(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn daily_bars_grouped_and_sorted() {
        let csv = "ticker,date,open,high,low,close,volume\n\
                   B,2001-01-03,10,11,9,10,100\n\
                   A,2001-01-04,10,11,9,10,100\n\
                   A,2001-01-02,10,11,9,10,100\n\
                   B,2001-01-02,10,11,9,10,100\n\
                   A,2001-01-03,10,11,9,10,100\n\
                   B,2001-01-04,10,11,9,10,100\n";
        let set = read_daily_bars(csv.as_bytes(), p()).unwrap();
        assert_eq!(set.series.len(), 2);
        for s in set.series.values() {
            assert_eq!(s.len(), 3);
            assert!(s.bars().windows(2).all(|w| w[0].date < w[1].date));
        }
        assert_eq!(set.calendar.len(), 3);
    }

    #[test]
    fn daily_bar_low_above_high_names_row() {
        let csv = "ticker,date,open,high,low,close,volume\n\
                   A,2001-01-02,10,11,9,10,100\n\
                   A,2001-01-03,10,9,11,10,100\n";
        let err = read_daily_bars(csv.as_bytes(), p()).unwrap_err();
        match err {
            Error::Invalid { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("high"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn daily_bar_rejects_non_positive_price() {
        let csv = "ticker,date,open,high,low,close,volume\nA,2001-01-02,10,11,0,10,100\n";
        assert!(matches!(
            read_daily_bars(csv.as_bytes(), p()),
            Err(Error::Invalid { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "ticker,date,open,high,low,close,volume\n\
                   A,2001-01-02,10,11,9,10,100\n\
                   A,2001-01-03,ten,11,9,10,100\n";
        assert!(matches!(
            read_daily_bars(csv.as_bytes(), p()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let csv = "ticker,date,open,high,low,close\nA,2001-01-02,10,11,9,10\n";
        assert!(matches!(
            read_daily_bars(csv.as_bytes(), p()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    fn minute_csv(minutes: impl Iterator<Item = usize>) -> String {
        let mut s = String::from("ticker,date,minute,price,volume\n");
        for m in minutes {
            s.push_str(&format!("A,2001-08-21,{m},{},10\n", 100.0 + m as f64 * 0.01));
        }
        s
    }

    #[test]
    fn full_minute_day_has_no_missing() {
        let mut out = BTreeMap::new();
        read_minute_bars_into(minute_csv(0..390).as_bytes(), p(), &mut out).unwrap();
        let s = &out[&("A".to_string(), d("2001-08-21"))];
        assert_eq!(s.missing_count(), 0);
    }

    #[test]
    fn partial_minute_day_flags_missing() {
        let mut out = BTreeMap::new();
        read_minute_bars_into(minute_csv(0..=100).as_bytes(), p(), &mut out).unwrap();
        let s = &out[&("A".to_string(), d("2001-08-21"))];
        assert_eq!(s.missing_count(), 289);
        assert!(s.is_missing(101));
        assert_eq!(s.price(100), Some(101.0));
    }

    #[test]
    fn duplicate_minute_is_a_collision() {
        let mut out = BTreeMap::new();
        let csv = minute_csv([0, 1, 1].into_iter());
        let err = read_minute_bars_into(csv.as_bytes(), p(), &mut out).unwrap_err();
        assert!(err.to_string().contains("duplicate minute 1"), "{err}");
    }

    #[test]
    fn minute_out_of_range() {
        let mut out = BTreeMap::new();
        let csv = minute_csv([0, 390].into_iter());
        assert!(matches!(
            read_minute_bars_into(csv.as_bytes(), p(), &mut out),
            Err(Error::Invalid { line: 3, .. })
        ));
    }

    #[test]
    fn rates_forward_fill_single_gap() {
        let csv = "date,target,effective,tbill6m\n\
                   2001-01-02,6,6.1,5.8\n\
                   2001-01-03,6,,5.8\n\
                   2001-01-04,6,6.2,5.8\n";
        let load = read_rates(csv.as_bytes(), p(), None, false).unwrap();
        assert_eq!(load.fill_count(), 1);
        assert_eq!(load.rates.effective, vec![6.1, 6.1, 6.2]);
        assert_eq!(load.fills[0].column, "effective");
        assert!(matches!(
            read_rates(csv.as_bytes(), p(), None, true),
            Err(Error::FilledInStrictMode { count: 1 })
        ));
    }

    #[test]
    fn rates_fill_calendar_dates_missing_from_file() {
        let csv = "date,target,effective,tbill6m\n\
                   2001-01-02,6,6.1,5.8\n\
                   2001-01-04,6,6.2,5.9\n";
        let cal = TradingCalendar::from_dates([d("2001-01-02"), d("2001-01-03"), d("2001-01-04")]);
        let load = read_rates(csv.as_bytes(), p(), Some(&cal), false).unwrap();
        assert_eq!(load.fill_count(), 3);
        assert_eq!(load.rates.tbill6m, vec![5.8, 5.8, 5.9]);
    }

    #[test]
    fn rates_leading_gap_names_date() {
        let csv = "date,target,effective,tbill6m\n\
                   2001-01-02,6,,5.8\n\
                   2001-01-03,6,6.1,5.8\n";
        match read_rates(csv.as_bytes(), p(), None, false) {
            Err(Error::LeadingGap { date, column }) => {
                assert_eq!(date, d("2001-01-02"));
                assert_eq!(column, "effective");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rates_reject_non_positive() {
        let csv = "date,target,effective,tbill6m\n2001-01-02,6,0,5.8\n";
        assert!(matches!(
            read_rates(csv.as_bytes(), p(), None, false),
            Err(Error::Invalid { line: 2, .. })
        ));
    }

    #[test]
    fn events_from_meeting_table() {
        let csv = "date,announce_minute,r_new,delta_r,scheduled\n\
                   2002-01-30,285,1.75,0,true\n\
                   2001-09-17,0,3.0,-0.5,false\n\
                   2001-08-21,285,3.5,-0.25,true\n";
        let ev = read_events(csv.as_bytes(), p()).unwrap();
        assert_eq!(ev[0].date, d("2001-08-21"));
        assert!((ev[0].relative_change - (-0.25 / 3.75)).abs() < 1e-15);
        assert!((ev[0].relative_change - (-0.067)).abs() < 5e-4);
        assert!(ev[0].scheduled);
        assert_eq!(ev[1].announce_minute, 0);
        assert!(!ev[1].scheduled);
        assert_eq!(ev[2].relative_change, 0.0);
    }

    #[test]
    fn events_reject_minute_out_of_range() {
        let csv = "date,announce_minute,r_new,delta_r,scheduled\n2001-08-21,390,3.5,-0.25,true\n";
        assert!(matches!(
            read_events(csv.as_bytes(), p()),
            Err(Error::Invalid { line: 2, .. })
        ));
    }

    fn series(n: usize) -> DailyBarSeries {
        let start = d("2001-01-01");
        let bars = (0..n)
            .map(|i| DailyBar {
                date: start + chrono::Days::new(i as u64),
                open: 10.0,
                high: 11.0,
                low: 9.0,
                close: 10.0,
                volume: 100.0,
            })
            .collect();
        DailyBarSeries::new("A", bars).unwrap()
    }

    #[test]
    fn window_mid_sample() {
        let s = series(100);
        let date = s.bars()[50].date;
        let w = event_window(&s, date, 20).unwrap();
        assert_eq!(w.bars.len(), 41);
        assert_eq!(w.bars[20].date, date);
        assert_eq!(w.at(0).unwrap().date, date);
        assert_eq!(w.at(-20).unwrap().date, s.bars()[30].date);
    }

    #[test]
    fn window_near_start_is_truncated() {
        let s = series(100);
        assert!(matches!(
            event_window(&s, s.bars()[5].date, 20),
            Err(Error::EdgeTruncated { .. })
        ));
        assert!(matches!(
            event_window(&s, s.bars()[80].date, 20),
            Err(Error::EdgeTruncated { .. })
        ));
    }

    #[test]
    fn window_half_width_zero() {
        let s = series(10);
        let w = event_window(&s, s.bars()[0].date, 0).unwrap();
        assert_eq!(w.bars.len(), 1);
        assert_eq!(w.bars[0].date, s.bars()[0].date);
    }

    #[test]
    fn window_on_non_trading_day() {
        let s = series(10);
        assert!(matches!(
            event_window(&s, d("1999-01-01"), 0),
            Err(Error::NotTradingDay(_))
        ));
    }

    #[test]
    fn calendar_rejects_unsorted() {
        assert!(TradingCalendar::new(vec![d("2001-01-02"), d("2001-01-02")]).is_err());
        let c = TradingCalendar::from_dates([d("2001-01-03"), d("2001-01-02")]);
        assert_eq!(c.index_of(d("2001-01-03")), Some(1));
        assert_eq!(c.offset(d("2001-01-03"), -1), Some(d("2001-01-02")));
        assert_eq!(c.offset(d("2001-01-03"), -2), None);
    }
}
