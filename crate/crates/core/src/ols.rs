//! Simple least-squares line `y = intercept + slope·x`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical OLS standard errors (independent homoscedastic residuals).
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r2: f64,
    pub n: usize,
    /// Regression and residual sums of squares.
    pub ssr: f64,
    pub sse: f64,
    pub x_mean: f64,
    pub sxx: f64,
}

impl LineFit {
    /// Coefficients `c` with `slope = Σ c_k y_k` for the abscissae that were fitted.
    pub fn slope_weights(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|xi| (xi - self.x_mean) / self.sxx).collect()
    }

    /// Coefficients with `intercept = Σ c_k y_k`.
    pub fn intercept_weights(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        x.iter()
            .map(|xi| 1.0 / n - self.x_mean * (xi - self.x_mean) / self.sxx)
            .collect()
    }
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::param("x and y lengths differ"));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "line fit needs at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - x_mean;
        let dy = yi - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let x_sq: f64 = x.iter().map(|v| v * v).sum();
    if !(sxx > 1e-24 * x_sq) {
        return Err(Error::degenerate("abscissa has zero variance"));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - intercept - slope * xi;
            r * r
        })
        .sum();
    let ssr = (syy - sse).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let s2 = sse / (nf - 2.0);
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        r2,
        n,
        ssr,
        sse,
        x_mean,
        sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.36 * v + 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 0.36).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weights_reproduce_coefficients() {
        let x = [0.1, 0.7, 1.3, 2.0, 2.2];
        let y = [1.0, 0.3, 2.0, 2.5, 1.1];
        let f = fit_line(&x, &y).unwrap();
        let s: f64 = f.slope_weights(&x).iter().zip(&y).map(|(c, y)| c * y).sum();
        let i: f64 = f.intercept_weights(&x).iter().zip(&y).map(|(c, y)| c * y).sum();
        assert!((s - f.slope).abs() < 1e-13);
        assert!((i - f.intercept).abs() < 1e-13);
    }

    #[test]
    fn constant_x_is_degenerate() {
        assert!(matches!(
            fit_line(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            fit_line(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
    }
}
