use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `F̃_min(λ)` at one system size, sampled on a shared λ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCurve {
    pub sites: usize,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    pub sites: (usize, usize),
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    /// Mean of all pairwise crossings.
    pub lambda_c: f64,
    /// `max - min` of the crossings.
    pub uncertainty: f64,
    pub crossings: Vec<PairCrossing>,
}

fn crossings(lambdas: &[f64], d: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..d.len() {
        if d[i] == 0.0 {
            out.push(lambdas[i]);
        } else if i + 1 < d.len() && d[i + 1] != 0.0 && (d[i] < 0.0) != (d[i + 1] < 0.0) {
            out.push(lambdas[i] + (lambdas[i + 1] - lambdas[i]) * d[i] / (d[i] - d[i + 1]));
        }
    }
    out
}

/// λ where `F̃_min` curves of different sizes intersect. Every sign change of
/// every pairwise difference counts, located by linear interpolation; exact
/// zeros on grid points count once.
pub fn locate_critical_point(curves: &[SizeCurve]) -> Result<CriticalEstimate> {
    if curves.len() < 2 {
        return Err(Error::InsufficientData("need at least two sizes".into()));
    }
    let grid = &curves[0].lambdas;
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("λ grid must be strictly increasing with 2+ points".into()));
    }
    for c in curves {
        if &c.lambdas != grid {
            return Err(Error::InvalidGrid("all sizes must share one λ grid".into()));
        }
        if c.values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: c.values.len(),
            });
        }
    }
    let mut found = Vec::new();
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
            for lambda in crossings(grid, &d) {
                found.push(PairCrossing {
                    sites: (a.sites, b.sites),
                    lambda,
                });
            }
        }
    }
    if found.is_empty() {
        return Err(Error::NoCrossing);
    }
    let lambda_c = found.iter().map(|c| c.lambda).sum::<f64>() / found.len() as f64;
    let lo = found.iter().map(|c| c.lambda).fold(f64::INFINITY, f64::min);
    let hi = found.iter().map(|c| c.lambda).fold(f64::NEG_INFINITY, f64::max);
    Ok(CriticalEstimate {
        lambda_c,
        uncertainty: hi - lo,
        crossings: found,
    })
}
