use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard errors; absent with only two points.
    pub slope_std_err: Option<f64>,
    pub intercept_std_err: Option<f64>,
    /// Root-mean-square residual.
    pub residual_rms: f64,
    pub points: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs 2 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite fit data".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 1e-28 * nf * (mx * mx).max(1.0) {
        return Err(Error::DegenerateFit("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let (slope_std_err, intercept_std_err) = if n > 2 {
        let s2 = ssr / (nf - 2.0);
        let se = (s2 / sxx).sqrt();
        (Some(se), Some((s2 * (1.0 / nf + mx * mx / sxx)).sqrt()))
    } else {
        (None, None)
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_std_err,
        intercept_std_err,
        residual_rms: (ssr / nf).sqrt(),
        points: n,
    })
}

/// `y = A x^p` fitted as a line in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub std_err: Option<f64>,
    pub prefactor: f64,
    /// RMS residual of `ln y`.
    pub residual_rms: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "power-law fit needs positive data, got ({x}, {y})"
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: line.slope,
        std_err: line.slope_std_err,
        prefactor: line.intercept.exp(),
        residual_rms: line.residual_rms,
        points: points.to_vec(),
    })
}

/// `z` from `t_min ∝ L^z` over `(L, t_min)` pairs taken at the critical point.
pub fn fit_dynamical_exponent(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "dynamical exponent needs at least 3 sizes, got {}",
            points.len()
        )));
    }
    fit_power_law(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&l: &f64| (l, 2.0 * l.sqrt()))
            .collect();
        let f = fit_dynamical_exponent(&pts).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-13);
        assert!(f.residual_rms < 1e-13);
        assert!((f.prefactor - 2.0).abs() < 1e-11);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            fit_dynamical_exponent(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_dynamical_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(fit_line(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn standard_error_matches_closed_form() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 2.0, 1.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-15);
        // residuals -0.5, 1, -0.5 → SSR 1.5, s² = 1.5, Sxx = 2
        assert!((f.slope_std_err.unwrap() - (0.75f64).sqrt()).abs() < 1e-15);
    }
}
