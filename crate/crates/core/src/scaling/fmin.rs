use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::collapse::{collapse_cost, CollapseOutcome, Curve, DEFAULT_COLLAPSE_POINTS};
use crate::error::{Error, Result};

/// Search interval for `ν`.
pub const NU_BRACKET: (f64, f64) = (0.2, 5.0);

const SCAN_POINTS: usize = 97;
const GOLDEN_TOL: f64 = 1e-6;

/// `F̃_min` at one `(L, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FminPoint {
    pub sites: usize,
    pub h: f64,
    pub f_min: f64,
}

fn group(points: &[FminPoint]) -> Result<BTreeMap<usize, Vec<(f64, f64)>>> {
    let mut by_size: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        if !(p.h.is_finite() && p.f_min.is_finite()) || p.sites == 0 {
            return Err(Error::InvalidArgument(format!("bad F_min point {p:?}")));
        }
        by_size.entry(p.sites).or_default().push((p.h, p.f_min));
    }
    for pts in by_size.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("repeated h at one size".into()));
        }
    }
    Ok(by_size)
}

/// Collapse of `F̃_min` against `L^{1/ν} h`.
pub fn fmin_collapse(points: &[FminPoint], nu: f64) -> Result<CollapseOutcome> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    let by_size = group(points)?;
    let curves: Vec<Curve> = by_size
        .iter()
        .map(|(&l, pts)| {
            let s = (l as f64).powf(1.0 / nu);
            Curve::new(pts.iter().map(|p| s * p.0).collect(), pts.iter().map(|p| p.1).collect())
        })
        .collect();
    collapse_cost(&curves, DEFAULT_COLLAPSE_POINTS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuFit {
    pub nu: f64,
    pub cost: f64,
    /// Coarse `(ν, cost)` scan that seeded the golden-section search.
    pub cost_curve: Vec<(f64, f64)>,
    pub sizes: Vec<usize>,
}

fn cost_at(points: &[FminPoint], nu: f64) -> Result<f64> {
    match fmin_collapse(points, nu) {
        Ok(o) => Ok(o.cost),
        Err(Error::NoOverlap) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Minimize the `F̃_min` collapse cost over `ν ∈ [0.2, 5]`: a uniform scan
/// locates the basin, then golden-section search refines it.
pub fn fit_nu(points: &[FminPoint]) -> Result<NuFit> {
    let sizes: Vec<usize> = group(points)?.keys().copied().collect();
    if sizes.len() < 2 {
        return Err(Error::InsufficientData(
            "nu is unidentifiable from fewer than two sizes".into(),
        ));
    }
    let (lo, hi) = NU_BRACKET;
    let mut cost_curve = Vec::with_capacity(SCAN_POINTS);
    for k in 0..SCAN_POINTS {
        let nu = lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64;
        cost_curve.push((nu, cost_at(points, nu)?));
    }
    let best = (0..SCAN_POINTS)
        .min_by(|&a, &b| cost_curve[a].1.total_cmp(&cost_curve[b].1))
        .expect("scan is non-empty");
    if !cost_curve[best].1.is_finite() {
        return Err(Error::NoOverlap);
    }
    let mut a = cost_curve[best.saturating_sub(1)].0;
    let mut b = cost_curve[(best + 1).min(SCAN_POINTS - 1)].0;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = cost_at(points, c)?;
    let mut fd = cost_at(points, d)?;
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = cost_at(points, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = cost_at(points, d)?;
        }
    }
    let nu_g = 0.5 * (a + b);
    let cost_g = cost_at(points, nu_g)?;
    let (nu, cost) = if cost_g <= cost_curve[best].1 {
        (nu_g, cost_g)
    } else {
        cost_curve[best]
    };
    Ok(NuFit {
        nu,
        cost,
        cost_curve,
        sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(nu: f64) -> Vec<FminPoint> {
        let g = |x: f64| 0.5 + 0.3 * (0.8 * x).tanh() + 0.05 * x;
        let mut pts = Vec::new();
        for l in [200usize, 300, 400] {
            for k in 0..=40 {
                let h = -0.05 + 0.0025 * k as f64;
                pts.push(FminPoint {
                    sites: l,
                    h,
                    f_min: g((l as f64).powf(1.0 / nu) * h),
                });
            }
        }
        pts
    }

    #[test]
    fn recovers_synthetic_nu() {
        let fit = fit_nu(&synthetic(1.5)).unwrap();
        assert!((fit.nu - 1.5).abs() < 0.01, "{}", fit.nu);
        assert!(fit.cost < 1e-6);
    }

    #[test]
    fn single_size() {
        let pts: Vec<FminPoint> = synthetic(1.5).into_iter().filter(|p| p.sites == 200).collect();
        assert_eq!(fmin_collapse(&pts, 1.0).unwrap().cost, 0.0);
        assert!(matches!(fit_nu(&pts), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn disjoint_ranges() {
        let pts = vec![
            FminPoint { sites: 10, h: 0.0, f_min: 0.1 },
            FminPoint { sites: 10, h: 0.1, f_min: 0.2 },
            FminPoint { sites: 20, h: 0.5, f_min: 0.1 },
            FminPoint { sites: 20, h: 0.6, f_min: 0.2 },
        ];
        assert!(matches!(fmin_collapse(&pts, 1.0), Err(Error::NoOverlap)));
    }
}
