use serde::{Deserialize, Serialize};

use super::fit::fit_line;
use crate::error::{Error, Result};
use crate::otoc::{normalized_series, OtocSeries};

pub const DEFAULT_EPSILON: f64 = 0.05;
/// Thresholds always reported alongside the chosen one.
pub const SENSITIVITY_EPSILONS: [f64; 3] = [0.02, 0.05, 0.1];

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

/// First time `values` drops below `1 - ε`, linearly interpolated.
pub fn scrambling_time(times: &[f64], values: &[f64], eps: f64) -> Result<f64> {
    check_epsilon(eps)?;
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    let level = 1.0 - eps;
    let i = values
        .iter()
        .position(|&v| v < level)
        .ok_or(Error::NoScrambling(eps))?;
    if i == 0 {
        return Ok(times[0]);
    }
    let (y0, y1) = (values[i - 1], values[i]);
    Ok(times[i - 1] + (times[i] - times[i - 1]) * (y0 - level) / (y0 - y1))
}

/// Scrambling time of `Re F̃`, normalizing the series first if needed.
pub fn extract_scrambling_time(s: &OtocSeries, eps: f64) -> Result<f64> {
    let values = if s.meta.normalized {
        s.real_parts()
    } else {
        normalized_series(s)?.real_parts()
    };
    scrambling_time(&s.times, &values, eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub epsilon: f64,
    pub t_s: Option<f64>,
}

/// `t_s` at each of ε ∈ {0.02, 0.05, 0.1}.
pub fn scrambling_sensitivity(s: &OtocSeries) -> Result<Vec<SensitivityEntry>> {
    SENSITIVITY_EPSILONS
        .iter()
        .map(|&epsilon| match extract_scrambling_time(s, epsilon) {
            Ok(t) => Ok(SensitivityEntry { epsilon, t_s: Some(t) }),
            Err(Error::NoScrambling(_)) => Ok(SensitivityEntry { epsilon, t_s: None }),
            Err(e) => Err(e),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightConeFit {
    /// `(r, t_s)` pairs.
    pub points: Vec<(f64, f64)>,
    pub v_b: f64,
    pub intercept: f64,
    pub v_b_std_err: Option<f64>,
    /// RMS residual of `r`.
    pub residual_rms: f64,
    /// `residual_rms / mean(r)`.
    pub relative_residual: f64,
    pub epsilon: Option<f64>,
}

/// Least-squares light cone `r = v_B t_s + c`.
pub fn fit_butterfly_velocity(cone: &[(f64, f64)]) -> Result<LightConeFit> {
    if cone.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "light-cone fit needs at least 3 distances, got {}",
            cone.len()
        )));
    }
    let r: Vec<f64> = cone.iter().map(|p| p.0).collect();
    let ts: Vec<f64> = cone.iter().map(|p| p.1).collect();
    let line = fit_line(&ts, &r).map_err(|e| match e {
        Error::DegenerateFit(_) => Error::DegenerateFit("all scrambling times are equal".into()),
        other => other,
    })?;
    if !(line.slope > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "light-cone slope {} is not positive",
            line.slope
        )));
    }
    let mean_r = r.iter().sum::<f64>() / r.len() as f64;
    Ok(LightConeFit {
        points: cone.to_vec(),
        v_b: line.slope,
        intercept: line.intercept,
        v_b_std_err: line.slope_std_err,
        residual_rms: line.residual_rms,
        relative_residual: line.residual_rms / mean_r.abs(),
        epsilon: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_never_scrambles() {
        let t = [0.0, 1.0, 2.0];
        assert!(matches!(scrambling_time(&t, &[1.0; 3], 0.05), Err(Error::NoScrambling(_))));
    }

    #[test]
    fn ramp_crossing() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = t.iter().map(|&v| if v < 3.0 { 1.0 } else { 1.0 - (v - 3.0) / 2.0 }).collect();
        assert!((scrambling_time(&t, &y, 0.05).unwrap() - 3.1).abs() < 1e-12);
    }

    #[test]
    fn exact_line() {
        let cone: Vec<(f64, f64)> = (1..=5).map(|k| (k as f64, k as f64 / 2.0)).collect();
        let f = fit_butterfly_velocity(&cone).unwrap();
        assert!((f.v_b - 2.0).abs() < 1e-14);
        assert!(f.intercept.abs() < 1e-14);
        assert!(f.residual_rms < 1e-14);
    }

    #[test]
    fn degenerate_cone() {
        let cone = [(1.0, 2.0), (2.0, 2.0), (3.0, 2.0)];
        assert!(matches!(fit_butterfly_velocity(&cone), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            fit_butterfly_velocity(&cone[..2]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn bad_epsilon() {
        assert!(scrambling_time(&[0.0, 1.0], &[1.0, 0.0], 1.0).is_err());
        assert!(scrambling_time(&[0.0, 1.0], &[1.0, 0.0], 0.0).is_err());
    }
}
