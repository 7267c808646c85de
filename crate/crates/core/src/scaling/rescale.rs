use faer::c64;
use serde::{Deserialize, Serialize};

use super::ExponentSet;
use crate::error::{Error, Result};
use crate::otoc::{OtocSeries, SeriesMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RescaleMode {
    /// Local unitary operators: no value prefactor, separation rescaled.
    LocalUnitary,
    /// Global operators: value prefactor, no separation.
    Global,
    /// Generic operators: value prefactor and separation.
    General,
}

impl RescaleMode {
    fn has_prefactor(self) -> bool {
        !matches!(self, RescaleMode::LocalUnitary)
    }

    fn has_separation(self) -> bool {
        !matches!(self, RescaleMode::Global)
    }
}

/// Scaling coordinates `(T, 1/L, h, r)` after a transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledCoords {
    pub temperature: Option<f64>,
    pub inv_length: f64,
    pub h: f64,
    pub separation: Option<f64>,
}

/// Physical parameters at which a matching series has to be computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerConfig {
    pub b: f64,
    pub sites: f64,
    pub temperature: Option<f64>,
    pub h: f64,
    pub lambda: f64,
    pub separation: Option<f64>,
    /// Partner times are base times multiplied by this.
    pub time_factor: f64,
    /// Partner values are base values multiplied by this.
    pub value_factor: f64,
}

impl PartnerConfig {
    /// `L/b` when it is an integer (within 1e-9).
    pub fn integral_sites(&self) -> Option<usize> {
        integral(self.sites)
    }

    pub fn integral_separation(&self) -> Option<i64> {
        self.separation.and_then(|r| {
            let k = r.round();
            ((r - k).abs() <= 1e-9).then_some(k as i64)
        })
    }
}

fn integral(x: f64) -> Option<usize> {
    let k = x.round();
    ((x - k).abs() <= 1e-9 && k >= 1.0).then_some(k as usize)
}

/// A series carried to transformed coordinates, remembering the cumulative
/// scale factor so repeated transforms compose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSeries {
    pub times: Vec<f64>,
    pub values: Vec<c64>,
    pub coords: ScaledCoords,
    pub b: f64,
    pub prefactor: f64,
    pub mode: RescaleMode,
    pub exponents: ExponentSet,
    pub source: SeriesMeta,
}

fn signed_h(meta: &SeriesMeta, e: &ExponentSet) -> f64 {
    match meta.lambda_c {
        Some(_) => meta.h,
        None => meta.model.field() - e.lambda_c,
    }
}

fn check_mode(meta: &SeriesMeta, mode: RescaleMode) -> Result<()> {
    let local = meta.w.is_local() || meta.v.is_local();
    match mode {
        RescaleMode::Global if local => Err(Error::InvalidArgument(
            "global rescaling applied to a series with local operators".into(),
        )),
        RescaleMode::LocalUnitary if !(meta.w.is_unitary() && meta.v.is_unitary()) => Err(
            Error::NonUnitary("local-unitary rescaling needs unitary W and V".into()),
        ),
        _ => Ok(()),
    }
}

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("scale factor must be positive, got {b}")))
    }
}

impl ScaledSeries {
    /// The untransformed series (`b = 1`).
    pub fn identity(s: &OtocSeries, e: &ExponentSet, mode: RescaleMode) -> Result<Self> {
        e.validate()?;
        check_mode(&s.meta, mode)?;
        Ok(Self {
            times: s.times.clone(),
            values: s.values.clone(),
            coords: ScaledCoords {
                temperature: s.meta.temperature,
                inv_length: 1.0 / s.meta.model.sites() as f64,
                h: signed_h(&s.meta, e),
                separation: if mode.has_separation() {
                    s.meta.separation.map(|r| r as f64)
                } else {
                    None
                },
            },
            b: 1.0,
            prefactor: 1.0,
            mode,
            exponents: *e,
            source: s.meta.clone(),
        })
    }

    /// `T → b^z T`, `1/L → b/L`, `h → b^{1/ν} h`, `r → r/b`, `t → b^{-z} t`,
    /// values `× b^{Δ_F}` unless the mode is local-unitary.
    pub fn rescale(&self, b: f64) -> Result<Self> {
        check_b(b)?;
        let e = &self.exponents;
        let bz = b.powf(e.z);
        let bt = b.powf(-e.z);
        let pref = if self.mode.has_prefactor() {
            b.powf(e.delta_f)
        } else {
            1.0
        };
        Ok(Self {
            times: self.times.iter().map(|t| t * bt).collect(),
            values: self.values.iter().map(|v| v * pref).collect(),
            coords: ScaledCoords {
                temperature: self.coords.temperature.map(|t| t * bz),
                inv_length: self.coords.inv_length * b,
                h: self.coords.h * b.powf(1.0 / e.nu),
                separation: self.coords.separation.map(|r| r / b),
            },
            b: self.b * b,
            prefactor: self.prefactor * pref,
            mode: self.mode,
            exponents: self.exponents,
            source: self.source.clone(),
        })
    }

    /// Parameters of the configuration this series now stands for.
    pub fn partner(&self) -> PartnerConfig {
        PartnerConfig {
            b: self.b,
            sites: 1.0 / self.coords.inv_length,
            temperature: self.coords.temperature,
            h: self.coords.h,
            lambda: self.exponents.lambda_c + self.coords.h,
            separation: self.coords.separation,
            time_factor: self.b.powf(-self.exponents.z),
            value_factor: self.prefactor,
        }
    }
}

pub fn rescale_series(s: &OtocSeries, e: &ExponentSet, b: f64, mode: RescaleMode) -> Result<ScaledSeries> {
    check_b(b)?;
    ScaledSeries::identity(s, e, mode)?.rescale(b)
}

/// Partner descriptor without transforming any data.
pub fn partner_config(meta: &SeriesMeta, e: &ExponentSet, b: f64, mode: RescaleMode) -> Result<PartnerConfig> {
    check_b(b)?;
    e.validate()?;
    check_mode(meta, mode)?;
    let probe = OtocSeries {
        times: Vec::new(),
        values: Vec::new(),
        meta: meta.clone(),
    };
    Ok(ScaledSeries::identity(&probe, e, mode)?.rescale(b)?.partner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelSpec, OperatorSpec};

    fn series(w: OperatorSpec, v: OperatorSpec, model: ModelSpec) -> OtocSeries {
        OtocSeries {
            times: vec![0.0, 0.5, 1.0],
            values: vec![c64::new(1.0, 0.0), c64::new(0.5, 0.1), c64::new(0.2, -0.1)],
            meta: SeriesMeta::new(model, Some(0.1), Some(1.0), w, v),
        }
    }

    #[test]
    fn unit_scale_is_identity() {
        let s = series(OperatorSpec::local_x(2), OperatorSpec::local_x(4), ModelSpec::annni(8, 1.0));
        for mode in [RescaleMode::LocalUnitary, RescaleMode::General] {
            let r = rescale_series(&s, &ExponentSet::ising(1.0), 1.0, mode).unwrap();
            assert_eq!(r.times, s.times);
            assert_eq!(r.values, s.values);
            assert_eq!(r.coords.temperature, Some(0.1));
            assert_eq!(r.coords.separation, Some(2.0));
        }
    }

    #[test]
    fn local_unitary_z_one() {
        let s = series(OperatorSpec::local_x(2), OperatorSpec::local_x(4), ModelSpec::annni(8, 1.0));
        let r = rescale_series(&s, &ExponentSet::ising(1.0), 2.0, RescaleMode::LocalUnitary).unwrap();
        assert_eq!(r.times, vec![0.0, 0.25, 0.5]);
        assert_eq!(r.coords.temperature, Some(0.2));
        assert_eq!(r.values, s.values);
        let p = r.partner();
        assert_eq!(p.integral_sites(), Some(4));
        assert_eq!(p.integral_separation(), Some(1));
    }

    #[test]
    fn global_lmg_b_two() {
        let mut s = series(OperatorSpec::global_x(), OperatorSpec::global_x(), ModelSpec::lmg(240, 1.005));
        s.meta.h = 0.005;
        let r = rescale_series(&s, &ExponentSet::lmg(), 2.0, RescaleMode::Global).unwrap();
        let pref = 2f64.powf(4.0 / 3.0);
        assert!((r.values[1].re - 0.5 * pref).abs() < 1e-14);
        assert!((r.times[2] - 2f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((r.coords.h - 0.005 * 2f64.powf(2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(r.coords.separation, None);
        assert_eq!(r.partner().integral_sites(), Some(120));
    }

    #[test]
    fn mode_errors() {
        let local = series(OperatorSpec::local_x(1), OperatorSpec::local_x(2), ModelSpec::annni(4, 1.0));
        assert!(rescale_series(&local, &ExponentSet::ising(1.0), 2.0, RescaleMode::Global).is_err());
        assert!(rescale_series(&local, &ExponentSet::ising(1.0), 0.0, RescaleMode::General).is_err());
        let global = series(OperatorSpec::global_x(), OperatorSpec::global_x(), ModelSpec::lmg(4, 1.0));
        assert!(rescale_series(&global, &ExponentSet::lmg(), 2.0, RescaleMode::LocalUnitary).is_err());
    }
}
