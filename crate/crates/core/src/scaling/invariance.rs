use serde::{Deserialize, Serialize};

use super::collapse::{collapse_cost, Curve, DEFAULT_COLLAPSE_POINTS};
use super::rescale::{partner_config, rescale_series, PartnerConfig, RescaleMode};
use super::ExponentSet;
use crate::engine::{gibbs_state, SpectralSource};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, OperatorSpec};
use crate::otoc::{compute_otoc_series, SeriesMeta, TimeGrid};

/// Base configuration of a scaling-invariance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceConfig {
    pub base: ModelSpec,
    pub temperature: f64,
    pub w: OperatorSpec,
    pub v: OperatorSpec,
    pub grid: TimeGrid,
    pub b_list: Vec<f64>,
    pub exponents: ExponentSet,
    pub mode: RescaleMode,
    #[serde(default = "default_points")]
    pub collapse_points: usize,
}

fn default_points() -> usize {
    DEFAULT_COLLAPSE_POINTS
}

/// One partner series mapped back onto the base coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledCurve {
    pub partner: PartnerConfig,
    pub sites: usize,
    pub w: OperatorSpec,
    pub v: OperatorSpec,
    /// Base-frame times.
    pub times: Vec<f64>,
    /// `Re F` of the partner series times `b^{-Δ_F}` (global/general modes).
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub mode: RescaleMode,
    pub exponents: ExponentSet,
    pub curves: Vec<RescaledCurve>,
    pub cost: f64,
    pub master_times: Vec<f64>,
    pub master_values: Vec<f64>,
}

fn partner_operators(
    cfg: &InvarianceConfig,
    partner: &PartnerConfig,
    sites: usize,
) -> Result<(OperatorSpec, OperatorSpec)> {
    match (cfg.w, cfg.v) {
        (OperatorSpec::LocalPauli { axis: aw, site: jw }, OperatorSpec::LocalPauli { axis: av, .. }) => {
            let r = partner.integral_separation().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "separation does not scale to an integer at b = {}",
                    partner.b
                ))
            })?;
            let w_site = ((jw as f64 / partner.b).round() as usize).max(1);
            let v_site = w_site as i64 + r;
            if v_site < 1 || v_site as usize > sites || w_site > sites {
                return Err(Error::SiteOutOfRange {
                    site: v_site.max(0) as usize,
                    len: sites,
                });
            }
            Ok((
                OperatorSpec::LocalPauli { axis: aw, site: w_site },
                OperatorSpec::LocalPauli {
                    axis: av,
                    site: v_site as usize,
                },
            ))
        }
        (w, v) if !w.is_local() && !v.is_local() => Ok((w, v)),
        _ => Err(Error::InvalidArgument(
            "mixed local/global operator pairs cannot be rescaled".into(),
        )),
    }
}

/// Compute the OTOC at every partner configuration `b`, map each back to
/// the base coordinates and measure how well they collapse (on `Re F`).
pub fn scaling_invariance_check<S: SpectralSource + ?Sized>(
    source: &S,
    cfg: &InvarianceConfig,
) -> Result<CollapseReport> {
    cfg.exponents.validate()?;
    if cfg.b_list.is_empty() {
        return Err(Error::InsufficientData("b_list is empty".into()));
    }
    let e = &cfg.exponents;
    let meta = SeriesMeta::new(cfg.base.clone(), Some(cfg.temperature), Some(e.lambda_c), cfg.w, cfg.v);
    let mut curves = Vec::with_capacity(cfg.b_list.len());
    for &b in &cfg.b_list {
        let partner = partner_config(&meta, e, b, cfg.mode)?;
        let sites = partner.integral_sites().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "L/b = {}/{} is not an integer",
                cfg.base.sites(),
                b
            ))
        })?;
        let (w, v) = partner_operators(cfg, &partner, sites)?;
        let spec = if b == 1.0 {
            cfg.base.clone()
        } else {
            cfg.base.with_sites(sites).with_field(partner.lambda)
        };
        let temperature = partner.temperature.unwrap_or(0.0);
        let sd = source.spectral(&spec)?;
        let state = gibbs_state(&sd, temperature)?;
        let grid = if b == 1.0 {
            cfg.grid.clone()
        } else {
            cfg.grid.scaled(partner.time_factor)?
        };
        let series = compute_otoc_series(&sd, &w, &v, &state, &grid, Some(e.lambda_c))?;
        let back = rescale_series(&series, e, 1.0 / b, cfg.mode)?;
        curves.push(RescaledCurve {
            partner,
            sites,
            w,
            v,
            times: back.times,
            values: back.values.iter().map(|z| z.re).collect(),
        });
    }
    let sampled: Vec<Curve> = curves
        .iter()
        .map(|c| Curve::new(c.times.clone(), c.values.clone()))
        .collect();
    let outcome = collapse_cost(&sampled, cfg.collapse_points)?;
    Ok(CollapseReport {
        mode: cfg.mode,
        exponents: *e,
        curves,
        cost: outcome.cost,
        master_times: outcome.grid,
        master_values: outcome.master,
    })
}
