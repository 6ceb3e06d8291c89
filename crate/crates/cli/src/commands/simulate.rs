use std::path::PathBuf;

use anyhow::Context as _;
use clap::ValueEnum;
use omori_core::report::write_json;
use omori_core::synth::{simulate_daily_scenario, simulate_ensemble, DailyScenarioSpec, EnsembleSpec};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Context, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Minute bars for a stock ensemble around one announcement.
    Intraday,
    /// Daily bars, rates and events with planted speculation and volatility.
    Daily,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON scenario; omitted fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::Intraday)]
    kind: Kind,
}

fn read_spec<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{}: invalid spec", p.display()))
        }
    }
}

#[derive(Serialize)]
struct DailyTruth<'a> {
    spec: &'a DailyScenarioSpec,
    event_dates: Vec<String>,
    theta: &'a [f64],
    delta: &'a [f64],
    v: &'a [f64],
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<Outcome> {
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    match args.kind {
        Kind::Intraday => {
            let mut spec: EnsembleSpec = read_spec(args.spec.as_ref())?;
            if ctx.seed_given {
                spec.seed = ctx.seed;
            }
            let data = simulate_ensemble(&spec)?;
            data.write(&ctx.out)?;
            println!(
                "{} stocks over {} days, event {} at minute {}; Ω_b = {}, Ω_a = {}",
                spec.n_stocks,
                data.calendar.len(),
                spec.event_date,
                spec.announce_minute,
                spec.omega_before,
                spec.omega_after
            );
        }
        Kind::Daily => {
            let mut spec: DailyScenarioSpec = read_spec(args.spec.as_ref())?;
            if ctx.seed_given {
                spec.seed = ctx.seed;
            }
            let sc = simulate_daily_scenario(&spec)?;
            sc.write(&ctx.out)?;
            write_json(
                ctx.out.join("ground_truth.json"),
                &DailyTruth {
                    spec: &spec,
                    event_dates: sc.events.iter().map(|e| e.date.to_string()).collect(),
                    theta: &sc.theta,
                    delta: &sc.delta,
                    v: &sc.v,
                },
            )?;
            println!(
                "{} stocks, {} events; planted V = {} + {} Θ",
                spec.n_stocks, spec.n_events, spec.intercept, spec.slope
            );
        }
    }
    println!("wrote {}", ctx.out.display());
    Ok(Outcome::Success)
}
