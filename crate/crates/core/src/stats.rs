//! Hypothesis tests and empirical densities.
//!
//! p-values come from the exact distribution functions in [`crate::special`].

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special;

/// Compensated (Neumaier) summation.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    kahan_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = kahan_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Population standard deviation (n denominator).
pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = kahan_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / values.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub sample_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
}

impl TestResult {
    fn new(name: &str, statistic: f64, p_value: f64, alpha: f64, sample_sizes: Vec<usize>) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            name: name.to_string(),
            statistic,
            p_value,
            alpha,
            reject: p_value < alpha,
            sample_sizes,
            observed: None,
            expected: None,
        }
    }
}

/// Exceedance tally of one trading day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayExceedances {
    pub is_announcement: bool,
    /// Minutes with `v > q`.
    pub exceedances: u64,
    /// Unmasked minutes observed that day.
    pub minutes: u64,
}

/// Are above-threshold minutes over-represented on announcement days?
///
/// Under the null every exceedance lands on an announcement day with
/// probability equal to the announcement days' share of observed minutes;
/// the count is tested with an exact two-sided binomial test.
pub fn concentration_test(days: &[DayExceedances], alpha: f64) -> Result<TestResult> {
    let (mut k, mut n, mut m_ann, mut m_all) = (0u64, 0u64, 0u64, 0u64);
    let (mut n_ann_days, mut n_other_days) = (0usize, 0usize);
    for d in days {
        n += d.exceedances;
        m_all += d.minutes;
        if d.is_announcement {
            k += d.exceedances;
            m_ann += d.minutes;
            n_ann_days += 1;
        } else {
            n_other_days += 1;
        }
    }
    if n_ann_days == 0 || n_other_days == 0 {
        return Err(Error::InsufficientData(
            "concentration test needs both announcement and other days".into(),
        ));
    }
    if n == 0 {
        return Err(Error::degenerate("no exceedances at this threshold"));
    }
    if m_all == 0 {
        return Err(Error::degenerate("no observed minutes"));
    }
    let expected = m_ann as f64 / m_all as f64;
    let observed = k as f64 / n as f64;
    let p = special::binomial_two_sided(k, n, expected);
    let mut r = TestResult::new(
        "concentration",
        observed / expected,
        p,
        alpha,
        vec![n as usize, n_ann_days, n_other_days],
    );
    r.observed = Some(observed);
    r.expected = Some(expected);
    Ok(r)
}

/// One-sample two-sided Student t test of `mean == mu0`.
pub fn t_test_mean(samples: &[f64], mu0: f64, alpha: f64) -> Result<TestResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::degenerate(format!("t test needs n >= 2, got {n}")));
    }
    let sd = sample_std(samples);
    let m = mean(samples);
    if !(sd > 1e-14 * m.abs().max(mu0.abs()).max(f64::MIN_POSITIVE)) {
        return Err(Error::degenerate("t test sample has zero variance"));
    }
    let t = (m - mu0) / (sd / (n as f64).sqrt());
    let p = special::student_t_two_sided(t, n as f64 - 1.0);
    Ok(TestResult::new("t_test_mean", t, p, alpha, vec![n]))
}

/// One-sided Z test that a subsample's mean exceeds the population mean,
/// `Z = (mean(sub) − mean(pop)) / (σ_pop / √n_sub)`.
pub fn z_test_shift(subsample: &[f64], population: &[f64], alpha: f64) -> Result<TestResult> {
    if subsample.len() < 2 {
        return Err(Error::degenerate(format!(
            "z test needs a subsample of at least 2, got {}",
            subsample.len()
        )));
    }
    if population.len() < 2 {
        return Err(Error::degenerate("z test population too small"));
    }
    let sigma = population_std(population);
    let mu = mean(population);
    if !(sigma > 1e-14 * mu.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::degenerate("population has zero dispersion"));
    }
    let z = (mean(subsample) - mu) / (sigma / (subsample.len() as f64).sqrt());
    let p = special::normal_sf(z);
    Ok(TestResult::new(
        "z_test_shift",
        z,
        p,
        alpha,
        vec![subsample.len(), population.len()],
    ))
}

/// ANOVA F test of zero slope in the simple regression of `y` on `x`.
pub fn anova_f_test(x: &[f64], y: &[f64], alpha: f64) -> Result<TestResult> {
    let fit = crate::ols::fit_line(x, y)?;
    Ok(anova_from_fit(&fit, alpha))
}

pub(crate) fn anova_from_fit(fit: &crate::ols::LineFit, alpha: f64) -> TestResult {
    let df2 = fit.n as f64 - 2.0;
    let mse = fit.sse / df2;
    let f = if mse > 0.0 {
        fit.ssr / mse
    } else if fit.ssr > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let p = special::f_sf(f, 1.0, df2);
    TestResult::new("anova_f", f, p, alpha, vec![fit.n])
}

/// Normalised histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalPdf {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub count: usize,
    pub mean: f64,
}

impl EmpiricalPdf {
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_left", "bin_right", "density"])?;
        for (d, e) in self.density.iter().zip(self.edges.windows(2)) {
            w.write_record([e[0].to_string(), e[1].to_string(), d.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<pdf writer>", e))?;
        Ok(())
    }
}

/// Histogram density of `values` on `n_bins` linear or logarithmic bins
/// spanning the sample range.
pub fn empirical_pdf(values: &[f64], n_bins: usize, log_bins: bool) -> Result<EmpiricalPdf> {
    if values.is_empty() {
        return Err(Error::InsufficientData("empirical pdf of empty input".into()));
    }
    if n_bins < 2 {
        return Err(Error::param("empirical pdf needs at least 2 bins"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("non-finite value in pdf input"));
    }
    if log_bins && values.iter().any(|v| *v <= 0.0) {
        return Err(Error::param("logarithmic bins need positive values"));
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if lo == hi {
        if log_bins {
            lo /= 2.0;
            hi *= 2.0;
        } else {
            let h = if lo != 0.0 { 0.5 * lo.abs() } else { 0.5 };
            lo -= h;
            hi += h;
        }
    }
    let edges: Vec<f64> = if log_bins {
        let (a, b) = (lo.ln(), hi.ln());
        (0..=n_bins)
            .map(|i| (a + (b - a) * i as f64 / n_bins as f64).exp())
            .collect()
    } else {
        (0..=n_bins)
            .map(|i| lo + (hi - lo) * i as f64 / n_bins as f64)
            .collect()
    };
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        // partition_point gives the first edge > v; the last bin is closed.
        let i = edges.partition_point(|e| *e <= v).saturating_sub(1).min(n_bins - 1);
        counts[i] += 1;
    }
    let n = values.len() as f64;
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(c, e)| *c as f64 / (n * (e[1] - e[0])))
        .collect();
    Ok(EmpiricalPdf {
        edges,
        density,
        count: values.len(),
        mean: mean(values),
    })
}

/// Subtracts each group's own mean (per-meeting centring before pooling).
pub fn center_within_groups(groups: &[Vec<f64>]) -> Vec<Vec<f64>> {
    groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                return Vec::new();
            }
            let m = mean(g);
            g.iter().map(|v| v - m).collect()
        })
        .collect()
}
