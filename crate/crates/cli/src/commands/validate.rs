use std::path::PathBuf;

use omori_core::ingest::{load_daily_bars, load_events, load_minute_files, load_rates, load_sectors, TradingCalendar};
use serde::Serialize;

use crate::{files, Context, Outcome};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Daily bars CSV.
    #[arg(long)]
    daily: Option<PathBuf>,
    /// Minute bar CSV files or directories of them.
    #[arg(long, num_args = 1..)]
    minute: Vec<PathBuf>,
    /// Rates CSV.
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Announcement calendar CSV.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Ticker-to-sector CSV.
    #[arg(long)]
    sectors: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FileReport {
    path: PathBuf,
    kind: &'static str,
    ok: bool,
    findings: Vec<String>,
    notes: Vec<String>,
}

impl FileReport {
    fn new(path: PathBuf, kind: &'static str) -> Self {
        Self {
            path,
            kind,
            ok: true,
            findings: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn finding(&mut self, msg: impl Into<String>) {
        self.ok = false;
        self.findings.push(msg.into());
    }
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<Outcome> {
    if args.daily.is_none()
        && args.minute.is_empty()
        && args.rates.is_none()
        && args.events.is_none()
        && args.sectors.is_none()
    {
        anyhow::bail!("nothing to validate: pass at least one of --daily, --minute, --rates, --events, --sectors");
    }
    for p in args.daily.iter().chain(&args.minute).chain(&args.rates).chain(&args.events).chain(&args.sectors) {
        if !p.exists() {
            anyhow::bail!("{}: path not readable", p.display());
        }
    }
    let mut reports = Vec::new();
    let mut calendar: Option<TradingCalendar> = None;

    if let Some(p) = &args.daily {
        let mut r = FileReport::new(p.clone(), "daily");
        match load_daily_bars(p) {
            Ok(set) => {
                r.notes.push(format!("{} tickers, {} trading days", set.series.len(), set.calendar.len()));
                calendar = Some(set.calendar);
            }
            Err(e) => r.finding(e.to_string()),
        }
        reports.push(r);
    }
    for p in files::expand(&args.minute)? {
        let mut r = FileReport::new(p.clone(), "minute");
        match load_minute_files(&[&p]) {
            Ok(days) => {
                let missing: usize = days.values().map(|d| d.missing_count()).sum();
                r.notes.push(format!("{} ticker-days, {missing} missing minutes", days.len()));
            }
            Err(e) => r.finding(e.to_string()),
        }
        reports.push(r);
    }
    if let Some(p) = &args.rates {
        let mut r = FileReport::new(p.clone(), "rates");
        match load_rates(p, calendar.as_ref(), ctx.strict) {
            Ok(load) => {
                r.notes.push(format!("{} days, {} forward fills", load.rates.len(), load.fill_count()));
                for f in &load.fills {
                    r.notes.push(format!("filled {} on {}", f.column, f.date));
                }
            }
            Err(e) => r.finding(e.to_string()),
        }
        reports.push(r);
    }
    if let Some(p) = &args.events {
        let mut r = FileReport::new(p.clone(), "events");
        match load_events(p) {
            Ok(events) => {
                r.notes.push(format!("{} events", events.len()));
                if let Some(cal) = &calendar {
                    for ev in events.iter().filter(|e| !cal.contains(e.date)) {
                        r.finding(format!("event {} is not a trading day in the daily data", ev.date));
                    }
                }
            }
            Err(e) => r.finding(e.to_string()),
        }
        reports.push(r);
    }
    if let Some(p) = &args.sectors {
        let mut r = FileReport::new(p.clone(), "sectors");
        match load_sectors(p) {
            Ok(m) => r.notes.push(format!("{} tickers in {} sectors", m.len(), m.sectors().len())),
            Err(e) => r.finding(e.to_string()),
        }
        reports.push(r);
    }

    let mut total = 0;
    for r in &reports {
        println!("{} [{}]: {}", r.path.display(), r.kind, if r.ok { "ok" } else { "FAILED" });
        for f in &r.findings {
            println!("  error: {f}");
            total += 1;
        }
        for n in &r.notes {
            println!("  {n}");
        }
    }
    omori_core::report::write_json(ctx.out.join("validation.json"), &reports)?;
    println!("{total} finding(s)");
    Ok(if total == 0 { Outcome::Success } else { Outcome::Failed })
}
