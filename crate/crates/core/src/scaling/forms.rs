use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::fit_line;
use super::ExponentSet;
use crate::error::{Error, Result};

/// A fitted butterfly velocity at one `(T, h, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityPoint {
    pub temperature: f64,
    pub h: f64,
    pub sites: usize,
    pub v_b: f64,
}

/// Log-log slopes implied by the scaling forms (all need `z >= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedSlopes {
    /// `v_B(0, 0, L) ∝ L^{-(z-1)}`.
    pub size: f64,
    /// `v_B(T, 0) ∝ T^{1-1/z}`.
    pub temperature: f64,
    /// `v_B(0, h) ∝ h^{ν(z-1)}`.
    pub field: f64,
}

pub fn predicted_slopes(e: &ExponentSet) -> Result<PredictedSlopes> {
    e.validate()?;
    if e.z < 1.0 {
        return Err(Error::DynamicalExponentBelowOne(e.z));
    }
    Ok(PredictedSlopes {
        size: -(e.z - 1.0),
        temperature: 1.0 - 1.0 / e.z,
        field: e.nu * (e.z - 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormTolerances {
    /// Allowed `|fitted - expected|` log-log slope difference.
    pub slope: f64,
    /// Allowed `max/min - 1` for matched pairs.
    pub pair_ratio: f64,
    /// Relative tolerance for deciding two scaling variables are equal.
    pub match_rel: f64,
}

impl Default for FormTolerances {
    fn default() -> Self {
        Self {
            slope: 0.25,
            pair_ratio: 0.2,
            match_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormCheck {
    /// `"size"`, `"temperature"` or `"field"`.
    pub form: String,
    /// Description of the group (what is held fixed).
    pub held_fixed: String,
    pub expected_slope: f64,
    pub fitted_slope: f64,
    pub std_err: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub points: Vec<VelocityPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub a: VelocityPoint,
    pub b: VelocityPoint,
    /// `v_B T^{1/z - 1}` of each point.
    pub scaled: (f64, f64),
    pub ratio: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormReport {
    pub exponents: ExponentSet,
    pub predicted: PredictedSlopes,
    pub checks: Vec<FormCheck>,
    pub pairs: Vec<PairCheck>,
    pub passed: bool,
}

fn slope_check(
    form: &str,
    held_fixed: String,
    pts: Vec<VelocityPoint>,
    x: impl Fn(&VelocityPoint) -> f64,
    expected: f64,
    tol: f64,
) -> Result<FormCheck> {
    let lx: Vec<f64> = pts.iter().map(|p| x(p).ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.v_b.ln()).collect();
    let line = fit_line(&lx, &ly)?;
    Ok(FormCheck {
        form: form.into(),
        held_fixed,
        expected_slope: expected,
        fitted_slope: line.slope,
        std_err: line.slope_std_err,
        tolerance: tol,
        passed: (line.slope - expected).abs() <= tol,
        points: pts,
    })
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Test every scaling form the data set supports: size, temperature and
/// field slopes in log-log space, plus pairs of points sharing both scaling
/// variables `(h T^{-1/(νz)}, T^{-1/z}/L)`.
pub fn butterfly_form_checks(
    data: &[VelocityPoint],
    e: &ExponentSet,
    tol: &FormTolerances,
) -> Result<FormReport> {
    let predicted = predicted_slopes(e)?;
    if let Some(p) = data
        .iter()
        .find(|p| !(p.v_b > 0.0 && p.temperature >= 0.0 && p.h.is_finite() && p.sites > 0))
    {
        return Err(Error::InvalidArgument(format!("bad velocity point {p:?}")));
    }
    let mut checks = Vec::new();

    let critical_ground: Vec<VelocityPoint> = data
        .iter()
        .copied()
        .filter(|p| p.h == 0.0 && p.temperature == 0.0)
        .collect();
    if distinct(critical_ground.iter().map(|p| p.sites as f64)) >= 2 {
        checks.push(slope_check(
            "size",
            "h = 0, T = 0".into(),
            critical_ground,
            |p| p.sites as f64,
            predicted.size,
            tol.slope,
        )?);
    }

    let mut thermal: BTreeMap<usize, Vec<VelocityPoint>> = BTreeMap::new();
    let mut field: BTreeMap<(usize, bool), Vec<VelocityPoint>> = BTreeMap::new();
    for p in data {
        if p.h == 0.0 && p.temperature > 0.0 {
            thermal.entry(p.sites).or_default().push(*p);
        } else if p.temperature == 0.0 && p.h != 0.0 {
            field.entry((p.sites, p.h > 0.0)).or_default().push(*p);
        }
    }
    for (sites, pts) in thermal {
        if distinct(pts.iter().map(|p| p.temperature)) >= 2 {
            checks.push(slope_check(
                "temperature",
                format!("h = 0, L = {sites}"),
                pts,
                |p| p.temperature,
                predicted.temperature,
                tol.slope,
            )?);
        }
    }
    for ((sites, positive), pts) in field {
        if distinct(pts.iter().map(|p| p.h)) >= 2 {
            checks.push(slope_check(
                "field",
                format!("T = 0, L = {sites}, h {} 0", if positive { ">" } else { "<" }),
                pts,
                |p| p.h.abs(),
                predicted.field,
                tol.slope,
            )?);
        }
    }

    let scaling_vars = |p: &VelocityPoint| {
        (
            p.h * p.temperature.powf(-1.0 / (e.nu * e.z)),
            p.temperature.powf(-1.0 / e.z) / p.sites as f64,
        )
    };
    let mut pairs = Vec::new();
    for (i, a) in data.iter().enumerate() {
        for b in &data[i + 1..] {
            if a.temperature <= 0.0 || b.temperature <= 0.0 {
                continue;
            }
            let (xa, ya) = scaling_vars(a);
            let (xb, yb) = scaling_vars(b);
            let same_point = a.temperature == b.temperature && a.sites == b.sites && a.h == b.h;
            if same_point || !close(xa, xb, tol.match_rel) || !close(ya, yb, tol.match_rel) {
                continue;
            }
            let qa = a.v_b * a.temperature.powf(1.0 / e.z - 1.0);
            let qb = b.v_b * b.temperature.powf(1.0 / e.z - 1.0);
            let ratio = qa.max(qb) / qa.min(qb);
            pairs.push(PairCheck {
                a: *a,
                b: *b,
                scaled: (qa, qb),
                ratio,
                tolerance: tol.pair_ratio,
                passed: ratio - 1.0 <= tol.pair_ratio,
            });
        }
    }

    if checks.is_empty() && pairs.is_empty() {
        return Err(Error::InsufficientData(
            "no scaling form is testable with the given points".into(),
        ));
    }
    let passed = checks.iter().all(|c| c.passed) && pairs.iter().all(|p| p.passed);
    Ok(FormReport {
        exponents: *e,
        predicted,
        checks,
        pairs,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(temperature: f64, h: f64, sites: usize, v_b: f64) -> VelocityPoint {
        VelocityPoint { temperature, h, sites, v_b }
    }

    #[test]
    fn slopes_from_exponents() {
        let s = predicted_slopes(&ExponentSet::ising(0.5)).unwrap();
        assert_eq!((s.size, s.temperature, s.field), (0.0, 0.0, 0.0));
        let s = predicted_slopes(&ExponentSet::new(1.0, 2.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(s.temperature, 0.5);
        assert!(matches!(
            predicted_slopes(&ExponentSet::lmg()),
            Err(Error::DynamicalExponentBelowOne(_))
        ));
    }

    #[test]
    fn synthetic_z_two_temperature_law() {
        let e = ExponentSet::new(1.0, 2.0, 0.0, 0.0).unwrap();
        let data: Vec<VelocityPoint> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&t: &f64| pt(t, 0.0, 64, 3.0 * t.sqrt()))
            .collect();
        let r = butterfly_form_checks(&data, &e, &FormTolerances::default()).unwrap();
        assert_eq!(r.checks.len(), 1);
        assert!((r.checks[0].fitted_slope - 0.5).abs() < 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn matched_pair() {
        let e = ExponentSet::ising(0.45);
        let data = [pt(0.2, 0.0, 10, 1.10), pt(0.25, 0.0, 8, 1.0), pt(0.3, 0.0, 10, 1.3)];
        let r = butterfly_form_checks(&data, &e, &FormTolerances::default()).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert!((r.pairs[0].ratio - 1.1).abs() < 1e-12);
        assert!(r.pairs[0].passed);
    }

    #[test]
    fn nothing_testable() {
        let data = [pt(0.2, 0.0, 10, 1.0)];
        assert!(matches!(
            butterfly_form_checks(&data, &ExponentSet::ising(0.4), &FormTolerances::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
