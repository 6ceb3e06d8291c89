use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{bail, Context as _};
use chrono::NaiveDate;
use clap::ValueEnum;
use omori_core::ingest::{load_events, load_minute_files, load_sectors, AnnouncementEvent, SectorMap, TradingCalendar};
use omori_core::omori::{
    cumulative_curve, detect_events, ensemble_fit, fit_omori, multiday_curve, portfolio_cumulative, portfolio_curve,
    split_displaced, write_displaced_csv, write_fit_rows, CumulativeCurve, DisplacedCurves, EnsembleFit,
    EnsembleMethod, FitRange, FitRow, Side,
};
use omori_core::preprocess::{prepare_intraday, IntradayVolatilitySeries};
use omori_core::report::{write_json, write_tests_json};
use omori_core::rng::substream2;
use omori_core::stats::{center_within_groups, concentration_test, t_test_mean, z_test_shift, DayExceedances, TestResult};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::{files, Context, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Individual,
    Portfolio,
    Partial,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Minute bar CSV files or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    minute: Vec<PathBuf>,
    #[arg(long)]
    events: PathBuf,
    /// Volatility thresholds, in standard deviations.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 4.0, 5.0])]
    q: Vec<f64>,
    /// Ensemble methods to run.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Individual, Method::Portfolio, Method::Partial])]
    method: Vec<Method>,
    /// Stocks per group for the partial method.
    #[arg(long, default_value_t = 5)]
    group_size: usize,
    /// Also fit the after side over N consecutive trading days.
    #[arg(long)]
    multiday: Option<usize>,
    /// Minutes masked at the open of each continuation day in multi-day curves.
    #[arg(long, default_value_t = 60)]
    exclude_open_minutes: usize,
    /// Ticker-to-sector CSV; adds per-sector portfolio fits and the sector z-test.
    #[arg(long)]
    sectors: Option<PathBuf>,
    /// Fewest non-event days the intraday pattern may be estimated from.
    #[arg(long, default_value_t = 20)]
    pattern_min_days: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

const T_TEST_ALPHA: f64 = 0.01;
const SECTOR_Z_ALPHA: f64 = 0.0005;

#[derive(Debug, Serialize)]
struct EnsembleEntry {
    event_date: NaiveDate,
    q: f64,
    side: Side,
    tickers: Vec<String>,
    ensemble: EnsembleFit,
}

/// Work and results for one (event, q).
struct Cell {
    event: AnnouncementEvent,
    q: f64,
    tickers: Vec<String>,
    displaced: Vec<DisplacedCurves>,
    portfolio: DisplacedCurves,
}

fn q_label(q: f64) -> String {
    q.to_string()
}

fn stock_curves(
    days: &BTreeMap<(String, NaiveDate), IntradayVolatilitySeries>,
    tickers: &[String],
    date: NaiveDate,
    q: f64,
    announce: usize,
) -> omori_core::Result<Vec<CumulativeCurve>> {
    tickers
        .par_iter()
        .map(|t| cumulative_curve(&detect_events(&days[&(t.clone(), date)], q), announce))
        .collect()
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<Outcome> {
    if args.q.is_empty() || args.q.iter().any(|q| !(*q > 0.0)) {
        bail!("--q values must be positive");
    }
    if args.group_size == 0 {
        bail!("--group-size must be at least 1");
    }
    if args.multiday == Some(0) {
        bail!("--multiday must be at least 1");
    }
    let mut q_list = args.q.clone();
    q_list.sort_by(f64::total_cmp);
    q_list.dedup();

    let paths = files::expand(&args.minute)?;
    if paths.is_empty() {
        bail!("no minute files found");
    }
    let minutes = load_minute_files(&paths)?;
    let mut events = load_events(&args.events)?;
    events.sort_by_key(|e| e.date);
    if events.is_empty() {
        bail!("{}: no events", args.events.display());
    }
    let sectors: Option<SectorMap> = args.sectors.as_ref().map(load_sectors).transpose()?;
    let event_dates: BTreeSet<NaiveDate> = events.iter().map(|e| e.date).collect();

    let prepared = prepare_intraday(&minutes, &event_dates, args.pattern_min_days)
        .context("estimating the intraday pattern")?;
    for ((t, d), why) in &prepared.skipped {
        println!("skipped {t} {d}: {why}");
    }
    let calendar = TradingCalendar::from_dates(prepared.days.keys().map(|(_, d)| *d));

    // (stock, event) pairs with data on the event day.
    let mut per_event: Vec<(AnnouncementEvent, Vec<String>)> = Vec::new();
    for ev in &events {
        let tickers: Vec<String> = prepared
            .days
            .keys()
            .filter(|(_, d)| *d == ev.date)
            .map(|(t, _)| t.clone())
            .collect();
        if tickers.is_empty() {
            println!("event {}: no minute data, skipped", ev.date);
        } else {
            per_event.push((ev.clone(), tickers));
        }
    }
    if per_event.is_empty() {
        bail!("no (stock, event) pairs with minute data");
    }

    std::fs::create_dir_all(ctx.out.join("curves")).with_context(|| format!("creating {}", ctx.out.display()))?;
    files::write_to(&ctx.out, "pattern.csv", |f| prepared.pattern.write_csv(f))?;

    let mut cells = Vec::new();
    for (ev, tickers) in &per_event {
        let announce = ev.announce_minute as usize;
        for &q in &q_list {
            let curves = stock_curves(&prepared.days, tickers, ev.date, q, announce)?;
            let portfolio = split_displaced(&portfolio_cumulative(&curves)?);
            cells.push(Cell {
                event: ev.clone(),
                q,
                tickers: tickers.clone(),
                displaced: curves.iter().map(split_displaced).collect(),
                portfolio,
            });
        }
    }

    let mut rows: Vec<FitRow> = Vec::new();
    let mut ensembles: Vec<EnsembleEntry> = Vec::new();
    let mut tests: Vec<TestResult> = Vec::new();
    let mut notices: Vec<String> = Vec::new();
    // Individual after-side exponents per q, then per event, keyed by ticker.
    let mut omega_after: BTreeMap<String, Vec<Vec<(String, f64)>>> = BTreeMap::new();

    for (ci, cell) in cells.iter().enumerate() {
        let date = cell.event.date;
        let announce = cell.event.announce_minute as usize;
        let ql = q_label(cell.q);
        files::write_to(&ctx.out.join("curves"), &format!("{date}_{ql}.csv"), |f| {
            write_displaced_csv(f, &cell.portfolio)
        })?;
        let range = FitRange::same_day(announce)?;

        for (si, side) in [Side::Before, Side::After].into_iter().enumerate() {
            if side == Side::Before && cell.portfolio.before_is_empty() {
                notices.push(format!("{date} q={ql}: announcement at the open, before side absent"));
                continue;
            }
            let curves: Vec<Vec<f64>> = cell.displaced.iter().map(|d| d.curve(side).to_vec()).collect();
            let seed: u64 = substream2(ctx.seed, ci as u64, si as u64).random();
            for m in &args.method {
                let method = match m {
                    Method::Individual => EnsembleMethod::Individual,
                    Method::Portfolio => EnsembleMethod::Portfolio,
                    Method::Partial => EnsembleMethod::Partial(args.group_size),
                };
                let label = method.label();
                let fit = match ensemble_fit(&curves, method, range, seed) {
                    Ok(f) => f,
                    Err(e) => {
                        notices.push(format!("{date} q={ql} {} {label}: absent ({e})", side.label()));
                        continue;
                    }
                };
                for (k, (f, members)) in fit.fits.iter().zip(&fit.groups).enumerate() {
                    let who = match method {
                        EnsembleMethod::Individual => cell.tickers[members[0]].clone(),
                        EnsembleMethod::Portfolio => "portfolio".to_string(),
                        EnsembleMethod::Partial(_) => format!("group{k}"),
                    };
                    rows.push(FitRow::new(date, who, side, cell.q, f, label.clone()));
                }
                if method == EnsembleMethod::Individual {
                    let omegas: Vec<f64> = fit.fits.iter().map(|f| f.omega).collect();
                    match side {
                        Side::Before => match t_test_mean(&omegas, 0.0, T_TEST_ALPHA) {
                            Ok(mut t) => {
                                t.name = format!("t_omega_before_{date}_q{ql}");
                                tests.push(t);
                            }
                            Err(e) => notices.push(format!("{date} q={ql}: t-test skipped ({e})")),
                        },
                        Side::After => {
                            let named = fit
                                .groups
                                .iter()
                                .zip(&omegas)
                                .map(|(g, w)| (cell.tickers[g[0]].clone(), *w))
                                .collect();
                            omega_after.entry(ql.clone()).or_default().push(named);
                        }
                    }
                }
                ensembles.push(EnsembleEntry {
                    event_date: date,
                    q: cell.q,
                    side,
                    tickers: cell.tickers.clone(),
                    ensemble: fit,
                });
            }

            if let Some(map) = &sectors {
                for sector in map.sectors() {
                    let idx: Vec<usize> = cell
                        .tickers
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| map.sector_of(t) == Some(sector))
                        .map(|(i, _)| i)
                        .collect();
                    if idx.is_empty() {
                        continue;
                    }
                    let members: Vec<&Vec<f64>> = idx.iter().map(|&i| &curves[i]).collect();
                    let fit = portfolio_curve(&members).and_then(|avg| fit_omori(&avg, range, idx.len()));
                    match fit {
                        Ok(f) => rows.push(FitRow::new(date, format!("sector:{sector}"), side, cell.q, &f, "portfolio")),
                        Err(e) => notices.push(format!("{date} q={ql} {} sector {sector}: absent ({e})", side.label())),
                    }
                }
            }
        }

        if let Some(n) = args.multiday {
            match multiday_fit(&prepared.days, &calendar, cell, n, args.exclude_open_minutes) {
                Ok(f) => rows.push(FitRow::new(date, format!("portfolio_{n}d"), Side::After, cell.q, &f, "portfolio")),
                Err(e) => notices.push(format!("{date} q={ql} {n}-day: absent ({e})")),
            }
        }
    }

    if let Some(map) = &sectors {
        for (ql, per_event) in &omega_after {
            let groups: Vec<Vec<f64>> = per_event.iter().map(|e| e.iter().map(|(_, w)| *w).collect()).collect();
            let centered = center_within_groups(&groups);
            let mut by_sector: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            let mut population = Vec::new();
            for (e, c) in per_event.iter().zip(&centered) {
                for ((t, _), w) in e.iter().zip(c) {
                    population.push(*w);
                    if let Some(s) = map.sector_of(t) {
                        by_sector.entry(s).or_default().push(*w);
                    }
                }
            }
            for (sector, sample) in by_sector {
                match z_test_shift(&sample, &population, SECTOR_Z_ALPHA) {
                    Ok(mut t) => {
                        t.name = format!("z_sector_omega_after_{sector}_q{ql}");
                        tests.push(t);
                    }
                    Err(e) => notices.push(format!("sector {sector} q={ql}: z-test skipped ({e})")),
                }
            }
        }
    }

    for &q in &q_list {
        let days: Vec<DayExceedances> = prepared
            .days
            .values()
            .map(|s| {
                let obs: Vec<f64> = s.unmasked().map(|(_, v)| v).collect();
                DayExceedances {
                    is_announcement: event_dates.contains(&s.date),
                    exceedances: obs.iter().filter(|v| **v > q).count() as u64,
                    minutes: obs.len() as u64,
                }
            })
            .collect();
        match concentration_test(&days, args.alpha) {
            Ok(mut t) => {
                t.name = format!("concentration_q{}", q_label(q));
                tests.push(t);
            }
            Err(e) => notices.push(format!("q={}: concentration test skipped ({e})", q_label(q))),
        }
    }

    files::write_to(&ctx.out, "omori_fits.csv", |f| write_fit_rows(f, &rows))?;
    write_json(ctx.out.join("ensembles.json"), &ensembles)?;
    write_tests_json(ctx.out.join("tests.json"), &tests)?;
    for n in &notices {
        println!("notice: {n}");
    }
    for r in rows.iter().filter(|r| r.ticker_or_portfolio == "portfolio") {
        println!(
            "{} q={} {:<6} Ω = {:.3} ± {:.3}  β = {:.3}",
            r.event_date,
            r.q,
            r.side.label(),
            r.omega,
            r.omega_se,
            r.beta
        );
    }
    println!("{} fit rows, {} tests", rows.len(), tests.len());
    Ok(Outcome::Success)
}

/// Portfolio after-side fit over `n` consecutive trading days from the event.
fn multiday_fit(
    days: &BTreeMap<(String, NaiveDate), IntradayVolatilitySeries>,
    calendar: &TradingCalendar,
    cell: &Cell,
    n: usize,
    exclude_open: usize,
) -> anyhow::Result<omori_core::omori::OmoriFit> {
    let dates: Vec<NaiveDate> = (0..n as i64)
        .map(|k| calendar.offset(cell.event.date, k))
        .collect::<Option<_>>()
        .context("not enough trading days after the event")?;
    let announce = cell.event.announce_minute as usize;
    let curves: Vec<Vec<f64>> = cell
        .tickers
        .par_iter()
        .filter_map(|t| {
            let run: Option<Vec<IntradayVolatilitySeries>> =
                dates.iter().map(|d| days.get(&(t.clone(), *d)).cloned()).collect();
            run.map(|r| multiday_curve(&r, calendar, cell.q, announce, exclude_open))
        })
        .map(|c| c.map(|c| split_displaced(&c).after))
        .collect::<omori_core::Result<_>>()?;
    if curves.is_empty() {
        bail!("no stock has {n} consecutive days of data");
    }
    let g = curves[0].len();
    let range = FitRange::new(1, g)?;
    Ok(fit_omori(&portfolio_curve(&curves)?, range, curves.len())?)
}
