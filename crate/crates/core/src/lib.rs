//! Market response to scheduled announcements.
//!
//! The crate is organised along the analysis pipeline:
//!
//! * [`ingest`] parses daily bars, minute bars, rates and the announcement
//!   calendar, and cuts event-centred windows.
//! * [`preprocess`] turns prices into volatility observables (high-low range,
//!   standardised and detrended 1-minute absolute returns, volume weights).
//! * [`metrics`] computes the rate-spread metrics (speculation and surprise)
//!   and the volume-weighted daily volatility response.
//! * [`omori`] detects above-threshold events, builds displaced cumulative
//!   curves and fits the Omori power law on both sides of the announcement.
//! * [`stats`] holds the hypothesis tests and empirical densities.
//! * [`synth`] generates ground-truth data used to validate every estimator.
//! * [`calibrate`] runs the estimator bias/coverage suite.

pub mod calibrate;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod ols;
pub mod omori;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod special;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{
    AnnouncementEvent, DailyBar, DailyBarSeries, MinuteSeries, RateSeries, SectorMap,
    TradingCalendar,
};
pub use omori::{CumulativeCurve, DisplacedCurves, EnsembleFit, EventStream, OmoriFit};

/// Minutes in one regular trading session (9:30 to 16:00).
pub const MINUTES_PER_DAY: usize = 390;

/// Announcement minute of a scheduled meeting (2:15 PM).
pub const SCHEDULED_ANNOUNCE_MINUTE: u32 = 285;
