use serde::{Deserialize, Serialize};

use super::interp::Pchip;
use crate::error::{Error, Result};

pub const DEFAULT_COLLAPSE_POINTS: usize = 200;

/// A sampled curve with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseOutcome {
    pub cost: f64,
    /// Common abscissae on the intersection of supports.
    pub grid: Vec<f64>,
    /// Pointwise mean of the interpolated curves.
    pub master: Vec<f64>,
}

/// Mean across-curve variance on the common support, divided by the squared
/// range of the pointwise-mean master curve.
pub fn collapse_cost(curves: &[Curve], points: usize) -> Result<CollapseOutcome> {
    if curves.is_empty() {
        return Err(Error::InsufficientData("no curves to collapse".into()));
    }
    if points < 2 {
        return Err(Error::InvalidArgument("collapse grid needs at least two points".into()));
    }
    let interps = curves
        .iter()
        .map(|c| Pchip::new(&c.x, &c.y))
        .collect::<Result<Vec<_>>>()?;
    if interps.len() == 1 {
        return Ok(CollapseOutcome {
            cost: 0.0,
            grid: curves[0].x.clone(),
            master: curves[0].y.clone(),
        });
    }
    let lo = interps.iter().map(|p| p.domain().0).fold(f64::NEG_INFINITY, f64::max);
    let hi = interps.iter().map(|p| p.domain().1).fold(f64::INFINITY, f64::min);
    if !(hi > lo) {
        return Err(Error::NoOverlap);
    }
    let grid: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    let count = interps.len() as f64;
    let mut master = Vec::with_capacity(points);
    let mut var_sum = 0.0;
    for &g in &grid {
        let vals: Vec<f64> = interps.iter().map(|p| p.eval(g)).collect();
        let mean = vals.iter().sum::<f64>() / count;
        var_sum += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        master.push(mean);
    }
    let mean_var = var_sum / points as f64;
    let (mmin, mmax) = master
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range2 = (mmax - mmin).powi(2);
    let cost = if mean_var == 0.0 {
        0.0
    } else if range2 == 0.0 {
        f64::INFINITY
    } else {
        mean_var / range2
    };
    Ok(CollapseOutcome { cost, grid, master })
}
