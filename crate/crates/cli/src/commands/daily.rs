use std::path::PathBuf;

use anyhow::{bail, Context as _};
use clap::ValueEnum;
use omori_core::ingest::{load_daily_bars, load_events, load_rates};
use omori_core::metrics::{
    compute_daily_metrics, relative_spread, theta_volatility_regression, volatility_profile, write_event_metrics,
    DailyConfig, WeightProfile,
};
use omori_core::report::{write_json, write_tests_json};
use omori_core::stats::{empirical_pdf, z_test_shift};
use serde::Serialize;

use crate::{files, Context, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    All,
    RateChanges,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    daily: PathBuf,
    #[arg(long)]
    rates: PathBuf,
    #[arg(long)]
    events: PathBuf,
    /// Decay constant of the speculation weights, in days.
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    /// Speculation horizon, in days.
    #[arg(long, default_value_t = 15)]
    l1: usize,
    /// Decay constant of the surprise weights, in days.
    #[arg(long, default_value_t = 10.0)]
    lambda2: f64,
    /// Surprise horizon, in days.
    #[arg(long, default_value_t = 15)]
    l2: usize,
    /// Profile half-width, in trading days.
    #[arg(long, default_value_t = 20)]
    window: usize,
    /// Circular-shuffle replicates for the profile band.
    #[arg(long, default_value_t = 200)]
    shuffles: usize,
    /// Events entering the regression.
    #[arg(long, value_enum, default_value_t = Subset::All)]
    subset: Subset,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Histogram bins for the volatility densities.
    #[arg(long, default_value_t = 30)]
    bins: usize,
}

#[derive(Debug, Serialize)]
struct RegressionReport {
    subset: &'static str,
    n_events: usize,
    slope: Option<f64>,
    slope_se: Option<f64>,
    intercept: Option<f64>,
    intercept_se: Option<f64>,
    r2: Option<f64>,
    notice: Option<String>,
    dropped: Vec<(String, String)>,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<Outcome> {
    let config = DailyConfig {
        speculation: WeightProfile::new(args.lambda, args.l1).context("--lambda/--l1")?,
        surprise: WeightProfile::new(args.lambda2, args.l2).context("--lambda2/--l2")?,
        half_width: args.window,
    };
    let bars = load_daily_bars(&args.daily)?;
    let events = load_events(&args.events)?;
    if events.is_empty() {
        bail!("{}: no events", args.events.display());
    }
    let rates = load_rates(&args.rates, Some(&bars.calendar), ctx.strict)?;
    for f in &rates.fills {
        log::warn!("rates: forward-filled {} on {}", f.column, f.date);
    }
    let (first, last) = match (bars.calendar.dates().first(), bars.calendar.dates().last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => bail!("{}: no trading days", args.daily.display()),
    };
    let in_range: Vec<_> = events.into_iter().filter(|e| e.date >= first && e.date <= last).collect();
    if in_range.is_empty() {
        bail!("no events fall within the daily data range {first}..{last}");
    }

    let spread = relative_spread(&rates.rates)?;
    let metrics = compute_daily_metrics(&spread, &in_range, &bars, &config);
    if metrics.events.is_empty() {
        bail!("no event has enough data for metrics ({} dropped)", metrics.dropped.len());
    }
    for d in &metrics.dropped {
        println!("dropped {}: {}", d.date, d.reason);
    }

    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    files::write_to(&ctx.out, "event_metrics.csv", |f| write_event_metrics(f, &metrics.events))?;

    let profile = volatility_profile(&metrics.profile_inputs, args.shuffles, ctx.seed)?;
    files::write_to(&ctx.out, "profile.csv", |f| profile.write_csv(f))?;

    let chosen: Vec<_> = metrics
        .events
        .iter()
        .filter(|e| args.subset == Subset::All || e.rate_change)
        .collect();
    let theta: Vec<f64> = chosen.iter().map(|e| e.theta).collect();
    let v: Vec<f64> = chosen.iter().map(|e| e.v).collect();
    let mut tests = Vec::new();
    let mut report = RegressionReport {
        subset: match args.subset {
            Subset::All => "all",
            Subset::RateChanges => "rate-changes",
        },
        n_events: chosen.len(),
        slope: None,
        slope_se: None,
        intercept: None,
        intercept_se: None,
        r2: None,
        notice: None,
        dropped: metrics.dropped.iter().map(|d| (d.date.to_string(), d.reason.clone())).collect(),
    };
    match theta_volatility_regression(&theta, &v, args.alpha) {
        Ok(reg) => {
            println!(
                "V = {:.4} + {:.4} Θ  (r² {:.3}, F p = {:.3e})",
                reg.fit.intercept, reg.fit.slope, reg.fit.r2, reg.anova.p_value
            );
            report.slope = Some(reg.fit.slope);
            report.slope_se = Some(reg.fit.slope_se);
            report.intercept = Some(reg.fit.intercept);
            report.intercept_se = Some(reg.fit.intercept_se);
            report.r2 = Some(reg.fit.r2);
            tests.push(reg.anova);
        }
        Err(e) => {
            let msg = format!("regression skipped: {e}");
            println!("{msg}");
            report.notice = Some(msg);
        }
    }

    // Event-day values against every value in the windows.
    let hw = profile.half_width;
    let event_day: Vec<f64> = metrics.profile_inputs.iter().map(|p| p.window.v[hw]).collect();
    let all: Vec<f64> = metrics.profile_inputs.iter().flat_map(|p| p.window.v.iter().copied()).collect();
    match z_test_shift(&event_day, &all, args.alpha) {
        Ok(mut t) => {
            t.name = "z_event_day_volatility".into();
            tests.push(t);
        }
        Err(e) => println!("event-day z-test skipped: {e}"),
    }
    write_tests_json(ctx.out.join("tests.json"), &tests)?;
    for (name, values) in [("pdf_event_day.csv", &event_day), ("pdf_all_days.csv", &all)] {
        match empirical_pdf(values, args.bins, true) {
            Ok(pdf) => {
                files::write_to(&ctx.out, name, |f| pdf.write_csv(f))?;
            }
            Err(e) => println!("{name} skipped: {e}"),
        }
    }
    write_json(ctx.out.join("regression.json"), &report)?;
    println!(
        "{} events, {} dropped, profile over {} (stock, event) pairs; peak ⟨v(0)⟩ = {:.4}",
        metrics.events.len(),
        metrics.dropped.len(),
        profile.n_pairs,
        profile.at(0).unwrap_or(f64::NAN)
    );
    Ok(Outcome::Success)
}
