//! Monte Carlo and round-trip oracles over the public API.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use omori_core::calibrate::q_monotonicity;
use omori_core::ingest::{read_daily_bars, read_rates, write_daily_bars, TradingCalendar};
use omori_core::metrics::theta_volatility_regression;
use omori_core::omori::{
    cumulative_curve, detect_events, ensemble_fit, fit_omori, split_displaced, EnsembleMethod, FitRange, Side,
};
use omori_core::rng::substream;
use omori_core::stats::{concentration_test, DayExceedances};
use omori_core::synth::{
    daily_bars_from_ranges, simulate_market_day, simulate_omori, weekday_calendar, MarketDaySpec, NoiseModel,
    OmoriProcessSpec,
};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

#[test]
fn noisy_slope_is_within_three_standard_errors() {
    let seeds = 500;
    let hits = (0..seeds)
        .filter(|&s| {
            let mut rng = substream(s, 0);
            let noise = Normal::new(0.0, 0.05).unwrap();
            let theta: Vec<f64> = (0..66).map(|_| -0.3 + 0.4 * rng.random::<f64>()).collect();
            let v: Vec<f64> = theta.iter().map(|t| 1.15 + 0.5 * t + noise.sample(&mut rng)).collect();
            let r = theta_volatility_regression(&theta, &v, 0.05).unwrap();
            (r.fit.slope - 0.5).abs() <= 3.0 * r.fit.slope_se
        })
        .count();
    assert!(hits as f64 / seeds as f64 >= 0.99, "{hits}/{seeds}");
}

#[test]
fn uniform_exceedances_are_not_concentrated() {
    let seeds = 500;
    let quiet = (0..seeds)
        .filter(|&s| {
            let mut rng = substream(s, 1);
            let b = Binomial::new(389, 0.04).unwrap();
            let days: Vec<DayExceedances> = (0..100)
                .map(|i| DayExceedances {
                    is_announcement: i % 10 == 0,
                    exceedances: b.sample(&mut rng),
                    minutes: 389,
                })
                .collect();
            concentration_test(&days, 0.05).unwrap().p_value > 0.05
        })
        .count();
    assert!(quiet as f64 / seeds as f64 >= 0.90, "{quiet}/{seeds}");
}

#[test]
fn thinned_process_recovers_omega() {
    let range = FitRange::new(1, 285).unwrap();
    let omegas: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let spec = OmoriProcessSpec::with_expected_count(0.4, 500.0, 285, Side::After, s).unwrap();
            fit_omori(&simulate_omori(&spec).unwrap().curve(), range, 1).unwrap().omega
        })
        .collect();
    let mean = omegas.iter().sum::<f64>() / omegas.len() as f64;
    assert!((mean - 0.4).abs() <= 0.05, "{mean}");
}

#[test]
fn individual_mean_tracks_heterogeneous_exponents() {
    let mut rng = substream(24, 0);
    let spread = Normal::new(0.24, 0.08).unwrap();
    let n = 100;
    let truth: Vec<f64> = (0..n).map(|_| spread.sample(&mut rng)).collect();
    let curves: Vec<Vec<f64>> = truth
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let spec = OmoriProcessSpec::with_expected_count(*w, 500.0, 285, Side::After, 100 + k as u64).unwrap();
            simulate_omori(&spec).unwrap().curve()
        })
        .collect();
    let fit = ensemble_fit(&curves, EnsembleMethod::Individual, FitRange::new(1, 285).unwrap(), 0).unwrap();
    let stderr = fit.sigma_omega.unwrap() / (fit.n_units as f64).sqrt();
    assert_eq!(fit.n_units, n);
    assert!((fit.mean_omega - 0.24).abs() <= 2.0 * stderr, "{} ± {stderr}", fit.mean_omega);
}

#[test]
fn higher_mark_band_relaxes_faster() {
    let row = q_monotonicity(&[2.0, 5.0], &[0.2, 0.5], 300.0, 285, 100, 9).unwrap();
    assert!(row.monotone >= 0.95, "{row:?}");
    assert!(row.mean_omega[1] > row.mean_omega[0]);
}

#[test]
fn poisson_day_is_flat_on_both_sides() {
    let t0 = 285;
    let range = FitRange::same_day(t0).unwrap();
    let seeds = 200u64;
    let covered = (0..seeds)
        .into_par_iter()
        .filter(|&s| {
            let spec = MarketDaySpec {
                announce: t0,
                before: Some(OmoriProcessSpec::with_expected_count(0.0, 40.0, (t0 - 1) as u32, Side::Before, s).unwrap()),
                after: Some(OmoriProcessSpec::with_expected_count(0.0, 40.0, (389 - t0) as u32, Side::After, s + 7).unwrap()),
                baseline_rate: 0.0,
                noise: NoiseModel::default(),
                seed: s,
            };
            let day = simulate_market_day("X", date("2001-08-21"), &spec).unwrap();
            let d = split_displaced(&cumulative_curve(&detect_events(&day.to_series(), 3.0), t0).unwrap());
            [Side::Before, Side::After].iter().all(|side| {
                let f = fit_omori(d.curve(*side), range, 1).unwrap();
                f.omega.abs() <= 2.0 * f.omega_se
            })
        })
        .count();
    assert!(covered as f64 / seeds as f64 >= 0.90, "{covered}/{seeds}");
}

#[test]
fn large_daily_panel_round_trips() {
    let dates = weekday_calendar(date("2000-01-03"), 0, 1999);
    let mut rng = substream(61, 0);
    let map: BTreeMap<_, _> = (0..100)
        .map(|k| {
            let ranges: Vec<f64> = (0..2000).map(|_| 0.001 + 0.05 * rng.random::<f64>()).collect();
            let vols: Vec<f64> = (0..2000).map(|_| (1e5 * rng.random::<f64>()).round()).collect();
            let t = format!("T{k:03}");
            let s = daily_bars_from_ranges(&t, &dates, &ranges, 10.0 + 90.0 * rng.random::<f64>(), &vols).unwrap();
            (t, s)
        })
        .collect();
    let mut buf = Vec::new();
    write_daily_bars(&mut buf, &map).unwrap();
    let back = read_daily_bars(buf.as_slice(), Path::new("daily.csv")).unwrap();
    assert_eq!(back.calendar.len(), 2000);
    assert_eq!(back.series, map);
}

#[test]
fn rate_history_with_holiday_gaps_loads_cleanly() {
    // Business days 2000-2008 with a sprinkling of closed days and blank cells.
    let mut text = String::from("date,target,effective,tbill6m\n");
    let mut rows = 0;
    let mut rng = substream(15, 0);
    let mut d = date("2000-01-03");
    while d <= date("2008-12-31") {
        let weekend = matches!(d.weekday(), Weekday::Sat | Weekday::Sun);
        let holiday = (d.month(), d.day()) == (12, 25) || (d.month(), d.day()) == (7, 4);
        if !weekend && !holiday {
            let eff = if rows > 0 && rng.random::<f64>() < 0.01 { String::new() } else { format!("{:.2}", 1.0 + 5.0 * rng.random::<f64>()) };
            text.push_str(&format!("{d},{:.2},{eff},{:.2}\n", 3.0, 0.5 + 5.0 * rng.random::<f64>()));
            rows += 1;
        }
        d = d.succ_opt().unwrap();
    }
    let load = read_rates(text.as_bytes(), Path::new("h15.csv"), None, false).unwrap();
    assert_eq!(load.rates.len(), text.lines().count() - 1);
    assert_eq!(load.rates.len(), rows);
    assert!((2000..2400).contains(&rows), "{rows}");
    let blanks = text.lines().filter(|l| l.contains(",,")).count();
    assert_eq!(load.fill_count(), blanks);
    let cal = TradingCalendar::new(load.rates.dates().to_vec()).unwrap();
    assert_eq!(cal.len(), rows);
}
