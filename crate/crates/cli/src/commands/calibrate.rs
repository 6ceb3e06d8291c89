use anyhow::Context as _;
use omori_core::calibrate::{run_calibration, CalibrationConfig};
use omori_core::report::write_json;

use crate::{Context, Outcome};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Seeds per exponent in the recovery grid.
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Seeds in the homogeneous-Poisson coverage check.
    #[arg(long, default_value_t = 200)]
    null_replicates: usize,
    /// Null replicates per statistical test.
    #[arg(long, default_value_t = 1000)]
    test_replicates: usize,
    /// Exponents in the recovery grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.2, 0.0, 0.24, 0.5])]
    omegas: Vec<f64>,
}

pub fn run(ctx: &Context, args: Args) -> anyhow::Result<Outcome> {
    let cfg = CalibrationConfig {
        omegas: args.omegas,
        replicates: args.replicates,
        null_replicates: args.null_replicates,
        test_replicates: args.test_replicates,
        seed: ctx.seed,
        ..CalibrationConfig::default()
    };
    let report = run_calibration(&cfg)?;
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    write_json(ctx.out.join("calibration.json"), &report)?;
    for line in report.summary_lines() {
        println!("{line}");
    }
    Ok(if report.all_pass() { Outcome::Success } else { Outcome::Failed })
}
