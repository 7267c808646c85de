//! Dynamical scaling analysis: rescaling transforms, collapse checks,
//! exponent extraction and light-cone fits.

mod collapse;
mod critical;
mod fit;
mod fmin;
mod forms;
mod interp;
mod invariance;
mod lightcone;
mod minimum;
mod rescale;

pub use collapse::{collapse_cost, CollapseOutcome, Curve, DEFAULT_COLLAPSE_POINTS};
pub use critical::{locate_critical_point, CriticalEstimate, PairCrossing, SizeCurve};
pub use fit::{fit_dynamical_exponent, fit_line, fit_power_law, LineFit, PowerLawFit};
pub use fmin::{fit_nu, fmin_collapse, FminPoint, NuFit, NU_BRACKET};
pub use forms::{
    butterfly_form_checks, predicted_slopes, FormCheck, FormReport, FormTolerances, PairCheck,
    PredictedSlopes, VelocityPoint,
};
pub use interp::Pchip;
pub use invariance::{scaling_invariance_check, CollapseReport, InvarianceConfig, RescaledCurve};
pub use lightcone::{
    extract_scrambling_time, fit_butterfly_velocity, scrambling_sensitivity, scrambling_time,
    LightConeFit, SensitivityEntry, DEFAULT_EPSILON, SENSITIVITY_EPSILONS,
};
pub use minimum::{find_first_minimum, first_minimum, MinimumPoint};
pub use rescale::{partner_config, rescale_series, PartnerConfig, RescaleMode, ScaledCoords, ScaledSeries};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Critical data parameterizing the scaling laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub nu: f64,
    pub z: f64,
    pub delta_f: f64,
    pub lambda_c: f64,
}

impl ExponentSet {
    pub fn new(nu: f64, z: f64, delta_f: f64, lambda_c: f64) -> Result<Self> {
        let e = Self {
            nu,
            z,
            delta_f,
            lambda_c,
        };
        e.validate()?;
        Ok(e)
    }

    /// LMG values: `ν = 3/2`, `z = 1/3`, `Δ_F = 4/3`, `λ_c = 1`.
    pub fn lmg() -> Self {
        Self {
            nu: 1.5,
            z: 1.0 / 3.0,
            delta_f: 4.0 / 3.0,
            lambda_c: 1.0,
        }
    }

    /// Ising universality, `ν = z = 1`, at the given critical point.
    pub fn ising(lambda_c: f64) -> Self {
        Self {
            nu: 1.0,
            z: 1.0,
            delta_f: 0.0,
            lambda_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nu > 0.0
            && self.z > 0.0
            && self.delta_f >= 0.0
            && self.nu.is_finite()
            && self.z.is_finite()
            && self.delta_f.is_finite()
            && self.lambda_c.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "exponents need nu > 0, z > 0, delta_F >= 0: {self:?}"
            )))
        }
    }
}
