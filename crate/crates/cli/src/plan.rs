//! Experiment plans: a TOML file describing one batch of runs.

use std::path::{Path, PathBuf};

use otoc_scaling::scaling::{ExponentSet, RescaleMode};
use otoc_scaling::models::{AnnniParams, LmgParams};
use otoc_scaling::{Axis, Boundary, DenseBudget, ModelSpec, OperatorSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanKind {
    SeriesRun,
    InvarianceCheck,
    FminScan,
    TminScan,
    LightCone,
    ButterflyForms,
    #[serde(rename = "LocateQCP")]
    LocateQcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "ANNNI")]
    Annni,
    #[serde(rename = "LMG")]
    Lmg,
}

/// Model fields shared by every task; `L` and `λ` come from the parameter
/// lists unless fixed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTemplate {
    pub kind: ModelKind,
    #[serde(rename = "J", default = "one")]
    pub coupling: f64,
    #[serde(rename = "L", default)]
    pub sites: Option<usize>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub boundary: Option<Boundary>,
}

fn one() -> f64 {
    1.0
}

impl ModelTemplate {
    pub fn instantiate(&self, sites: usize, lambda: f64) -> ModelSpec {
        match self.kind {
            ModelKind::Annni => ModelSpec::Annni(AnnniParams {
                sites,
                coupling: self.coupling,
                field: lambda,
                delta: self.delta.unwrap_or(otoc_scaling::models::DEFAULT_DELTA),
                boundary: self.boundary.unwrap_or_default(),
            }),
            ModelKind::Lmg => ModelSpec::Lmg(LmgParams {
                sites,
                coupling: self.coupling,
                field: lambda,
                gamma: self.gamma.unwrap_or(otoc_scaling::models::DEFAULT_GAMMA),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "L_list", default)]
    pub l_list: Vec<usize>,
    #[serde(rename = "T_list", default)]
    pub t_list: Vec<f64>,
    #[serde(default)]
    pub lambda_list: Vec<f64>,
    /// Detunings `λ - λ_c`; needs `exponents.lambda_c`.
    #[serde(default)]
    pub h_list: Vec<f64>,
    #[serde(default)]
    pub r_list: Vec<i64>,
    #[serde(default)]
    pub b_list: Vec<f64>,
}

/// Operator section. For local operators `W` sits at `w_site` (default
/// `⌈L/4⌉`) and `V` at `w_site + r` for each `r` in `r_list`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Operators {
    #[serde(default = "default_form")]
    pub form: OperatorForm,
    #[serde(default = "default_axis")]
    pub w_axis: Axis,
    #[serde(default = "default_axis")]
    pub v_axis: Axis,
    #[serde(default)]
    pub w_site: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorForm {
    LocalPauli,
    CollectiveNormalized,
}

fn default_form() -> OperatorForm {
    OperatorForm::LocalPauli
}

fn default_axis() -> Axis {
    Axis::X
}

impl Default for Operators {
    fn default() -> Self {
        Self {
            form: default_form(),
            w_axis: Axis::X,
            v_axis: Axis::X,
            w_site: None,
        }
    }
}

impl Operators {
    /// `(W, V)` at separation `r` (ignored for collective operators).
    pub fn pair(&self, sites: usize, r: Option<i64>) -> Result<(OperatorSpec, OperatorSpec), String> {
        match self.form {
            OperatorForm::CollectiveNormalized => Ok((
                OperatorSpec::CollectiveNormalized { axis: self.w_axis },
                OperatorSpec::CollectiveNormalized { axis: self.v_axis },
            )),
            OperatorForm::LocalPauli => {
                let w = self.w_site.unwrap_or_else(|| otoc_scaling::models::default_w_site(sites));
                let v = w as i64 + r.unwrap_or(0);
                if w == 0 || w > sites || v < 1 || v as usize > sites {
                    return Err(format!(
                        "sites W = {w}, V = {v} do not fit in a chain of {sites}"
                    ));
                }
                Ok((
                    OperatorSpec::LocalPauli { axis: self.w_axis, site: w },
                    OperatorSpec::LocalPauli {
                        axis: self.v_axis,
                        site: v as usize,
                    },
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    /// Omitted: `0.5 / (E_max - E_min)` per model instance.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentPriors {
    pub nu: Option<f64>,
    pub z: Option<f64>,
    #[serde(rename = "delta_F")]
    pub delta_f: Option<f64>,
    pub lambda_c: Option<f64>,
}

impl ExponentPriors {
    pub fn complete(&self) -> Option<ExponentSet> {
        Some(ExponentSet {
            nu: self.nu?,
            z: self.z?,
            delta_f: self.delta_f.unwrap_or(0.0),
            lambda_c: self.lambda_c?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conventions {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_degeneracy")]
    pub degeneracy_tol: f64,
    #[serde(default = "default_cutoff")]
    pub weight_cutoff: f64,
    #[serde(default)]
    pub mode: Option<RescaleMode>,
    #[serde(default = "default_points")]
    pub collapse_points: usize,
    /// Trial ν values whose F_min collapse costs are reported next to the fit.
    #[serde(default)]
    pub nu_contrast: Vec<f64>,
    /// Alternative z whose invariance cost is reported as a contrast.
    #[serde(default)]
    pub control_z: Option<f64>,
    #[serde(default = "default_slope_tol")]
    pub slope_tolerance: f64,
    #[serde(default = "default_pair_tol")]
    pub pair_tolerance: f64,
    #[serde(default = "yes")]
    pub write_series: bool,
}

fn default_epsilon() -> f64 {
    otoc_scaling::scaling::DEFAULT_EPSILON
}
fn default_degeneracy() -> f64 {
    1e-10
}
fn default_cutoff() -> f64 {
    1e-14
}
fn default_points() -> usize {
    otoc_scaling::scaling::DEFAULT_COLLAPSE_POINTS
}
fn default_slope_tol() -> f64 {
    0.25
}
fn default_pair_tol() -> f64 {
    0.2
}
fn yes() -> bool {
    true
}

impl Default for Conventions {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default = "default_chain")]
    pub max_chain_sites: usize,
    #[serde(default = "default_collective")]
    pub max_collective_dim: usize,
    #[serde(default = "default_grid_points")]
    pub max_grid_points: usize,
}

fn default_chain() -> usize {
    DenseBudget::default().max_chain_sites
}
fn default_collective() -> usize {
    DenseBudget::default().max_collective_dim
}
fn default_grid_points() -> usize {
    100_000
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_chain_sites: default_chain(),
            max_collective_dim: default_collective(),
            max_grid_points: default_grid_points(),
        }
    }
}

impl Budgets {
    pub fn dense(&self) -> DenseBudget {
        DenseBudget {
            max_chain_sites: self.max_chain_sites,
            max_collective_dim: self.max_collective_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    #[serde(default)]
    pub name: Option<String>,
    /// Relative paths resolve against the plan file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelTemplate,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub operators: Operators,
    pub grid: GridSpec,
    #[serde(default)]
    pub exponents: ExponentPriors,
    #[serde(default)]
    pub conventions: Conventions,
    #[serde(default)]
    pub budgets: Budgets,
}

/// Parsed plan plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedPlan {
    pub plan: ExperimentPlan,
    pub path: PathBuf,
    pub text: String,
}

impl LoadedPlan {
    pub fn output_dir(&self) -> PathBuf {
        let base = self.path.parent().unwrap_or(Path::new("."));
        match &self.plan.output_dir {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => base.join(p),
            None => base.join(format!("{}-out", self.plan.name())),
        }
    }
}

impl ExperimentPlan {
    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{:?}", self.kind).to_lowercase())
    }

    /// λ values of the sweep: explicit `lambda_list`, else `λ_c + h` for
    /// each `h`, else the template's `lambda`.
    pub fn lambdas(&self) -> Vec<f64> {
        if !self.params.lambda_list.is_empty() {
            self.params.lambda_list.clone()
        } else if !self.params.h_list.is_empty() {
            let c = self.exponents.lambda_c.unwrap_or(0.0);
            self.params.h_list.iter().map(|h| c + h).collect()
        } else {
            self.model.lambda.into_iter().collect()
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        if self.params.l_list.is_empty() {
            self.model.sites.into_iter().collect()
        } else {
            self.params.l_list.clone()
        }
    }

    pub fn temperatures(&self) -> Vec<f64> {
        if self.params.t_list.is_empty() {
            vec![0.0]
        } else {
            self.params.t_list.clone()
        }
    }

    pub fn separations(&self) -> Vec<Option<i64>> {
        match self.operators.form {
            OperatorForm::CollectiveNormalized => vec![None],
            OperatorForm::LocalPauli if self.params.r_list.is_empty() => vec![Some(0)],
            OperatorForm::LocalPauli => self.params.r_list.iter().map(|&r| Some(r)).collect(),
        }
    }
}

/// 1-based line of the first `key =` assignment, if present.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn invalid(text: &str, field: &str, key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.into(),
        line: line_of(text, key),
        message: message.into(),
    }
}

pub fn load_plan(path: &Path) -> Result<LoadedPlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_plan(&text, path)
}

pub fn parse_plan(text: &str, path: &Path) -> Result<LoadedPlan, CliError> {
    let plan: ExperimentPlan = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Validation {
            field: "plan".into(),
            line,
            message: e.message().to_string(),
        }
    })?;
    validate(&plan, text)?;
    Ok(LoadedPlan {
        plan,
        path: path.to_path_buf(),
        text: text.to_string(),
    })
}

fn validate(plan: &ExperimentPlan, text: &str) -> Result<(), CliError> {
    let m = &plan.model;
    match m.kind {
        ModelKind::Annni if m.gamma.is_some() => {
            return Err(invalid(text, "model.gamma", "gamma", "gamma is not an ANNNI parameter"));
        }
        ModelKind::Lmg if m.delta.is_some() => {
            return Err(invalid(text, "model.delta", "delta", "delta is not an LMG parameter"));
        }
        ModelKind::Lmg if m.boundary.is_some() => {
            return Err(invalid(text, "model.boundary", "boundary", "LMG has no boundary condition"));
        }
        _ => {}
    }
    let sizes = plan.sizes();
    if sizes.is_empty() {
        return Err(invalid(text, "params.L_list", "L_list", "no system size given"));
    }
    if let Some(&l) = sizes.iter().find(|&&l| l == 0) {
        return Err(invalid(text, "params.L_list", "L_list", format!("L = {l} is not positive")));
    }
    if plan.lambdas().is_empty() {
        return Err(invalid(text, "params.lambda_list", "lambda_list", "no lambda given"));
    }
    if !plan.params.h_list.is_empty() && !plan.params.lambda_list.is_empty() {
        return Err(invalid(text, "params.h_list", "h_list", "give either h_list or lambda_list"));
    }
    if !plan.params.h_list.is_empty() && plan.exponents.lambda_c.is_none() {
        return Err(invalid(text, "exponents.lambda_c", "h_list", "h_list needs exponents.lambda_c"));
    }
    if let Some(t) = plan.temperatures().iter().find(|t| !(**t >= 0.0)) {
        return Err(invalid(text, "params.T_list", "T_list", format!("temperature {t} is negative")));
    }
    if !(plan.grid.t_max > 0.0) {
        return Err(invalid(text, "grid.t_max", "t_max", "t_max must be positive"));
    }
    if let Some(dt) = plan.grid.dt {
        if !(dt > 0.0) {
            return Err(invalid(text, "grid.dt", "dt", "dt must be positive"));
        }
        let points = (plan.grid.t_max / dt).round() + 1.0;
        if points > plan.budgets.max_grid_points as f64 {
            return Err(invalid(
                text,
                "grid.dt",
                "dt",
                format!("{points} grid points exceed max_grid_points = {}", plan.budgets.max_grid_points),
            ));
        }
    }
    let eps = plan.conventions.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(text, "conventions.epsilon", "epsilon", "epsilon must lie in (0, 1)"));
    }
    let local = plan.operators.form == OperatorForm::LocalPauli;
    if local && m.kind == ModelKind::Lmg {
        return Err(invalid(text, "operators.form", "form", "LMG runs use collective operators"));
    }
    if local {
        for &l in &sizes {
            for r in plan.separations() {
                plan.operators
                    .pair(l, r)
                    .map_err(|msg| invalid(text, "params.r_list", "r_list", msg))?;
            }
        }
    }

    let need = |ok: bool, field: &str, key: &str, msg: &str| -> Result<(), CliError> {
        if ok {
            Ok(())
        } else {
            Err(invalid(text, field, key, msg))
        }
    };
    let e = &plan.exponents;
    match plan.kind {
        PlanKind::SeriesRun => {}
        PlanKind::TminScan => {
            need(sizes.len() >= 3, "params.L_list", "L_list", "TminScan needs at least 3 sizes")?;
            need(plan.lambdas().len() == 1, "params.lambda_list", "lambda_list", "TminScan runs at a single lambda")?;
            need(plan.temperatures().len() == 1, "params.T_list", "T_list", "TminScan runs at a single temperature")?;
        }
        PlanKind::FminScan => {
            need(sizes.len() >= 2, "params.L_list", "L_list", "FminScan needs at least 2 sizes")?;
            need(!plan.params.h_list.is_empty(), "params.h_list", "h_list", "FminScan needs h_list")?;
            need(plan.temperatures().len() == 1, "params.T_list", "T_list", "FminScan runs at a single temperature")?;
        }
        PlanKind::LocateQcp => {
            need(sizes.len() >= 2, "params.L_list", "L_list", "LocateQCP needs at least 2 sizes")?;
            need(plan.lambdas().len() >= 2, "params.lambda_list", "lambda_list", "LocateQCP needs a lambda grid")?;
            need(plan.temperatures().len() == 1, "params.T_list", "T_list", "LocateQCP runs at a single temperature")?;
        }
        PlanKind::InvarianceCheck => {
            need(e.complete().is_some(), "exponents", "nu", "InvarianceCheck needs nu, z and lambda_c")?;
            need(sizes.len() == 1, "params.L_list", "L_list", "InvarianceCheck takes one base size")?;
            need(plan.lambdas().len() == 1, "params.h_list", "h_list", "InvarianceCheck takes one base field")?;
            need(plan.temperatures().len() == 1, "params.T_list", "T_list", "InvarianceCheck takes one base temperature")?;
            need(!plan.params.b_list.is_empty(), "params.b_list", "b_list", "b_list is empty")?;
            need(plan.separations().len() == 1, "params.r_list", "r_list", "InvarianceCheck takes one separation")?;
            for &b in &plan.params.b_list {
                let ratio = sizes[0] as f64 / b;
                need(
                    b > 0.0 && (ratio - ratio.round()).abs() < 1e-9,
                    "params.b_list",
                    "b_list",
                    &format!("L/b = {}/{b} is not an integer", sizes[0]),
                )?;
            }
        }
        PlanKind::LightCone | PlanKind::ButterflyForms => {
            need(local, "operators.form", "form", "light cones need local operators")?;
            need(plan.separations().len() >= 3, "params.r_list", "r_list", "light cones need at least 3 separations")?;
            if plan.kind == PlanKind::ButterflyForms {
                need(e.complete().is_some(), "exponents", "nu", "ButterflyForms needs nu, z and lambda_c")?;
                need(e.z.is_some_and(|z| z >= 1.0), "exponents.z", "z", "scaling forms need z >= 1")?;
            }
        }
    }
    if let Some(ex) = e.complete() {
        ex.validate()
            .map_err(|err| invalid(text, "exponents", "nu", err.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "SeriesRun"

[model]
kind = "LMG"
L = 100
lambda = 1.0

[operators]
form = "CollectiveNormalized"

[grid]
t_max = 5.0
dt = 0.05
"#;

    #[test]
    fn minimal_plan_parses() {
        let p = parse_plan(MINIMAL, Path::new("plan.toml")).unwrap();
        assert_eq!(p.plan.sizes(), vec![100]);
        assert_eq!(p.plan.lambdas(), vec![1.0]);
        assert_eq!(p.plan.temperatures(), vec![0.0]);
        assert_eq!(p.plan.conventions.epsilon, 0.05);
    }

    #[test]
    fn unknown_field_reports_line() {
        let text = MINIMAL.replace("lambda = 1.0", "lambda = 1.0\nbogus = 3");
        match parse_plan(&text, Path::new("p.toml")) {
            Err(CliError::Validation { line, message, .. }) => {
                assert!(message.contains("bogus"), "{message}");
                assert_eq!(line, Some(8));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn foreign_model_field_named() {
        let text = MINIMAL.replace("lambda = 1.0", "lambda = 1.0\ndelta = -0.3");
        match parse_plan(&text, Path::new("p.toml")) {
            Err(CliError::Validation { field, line, .. }) => {
                assert_eq!(field, "model.delta");
                assert_eq!(line, Some(8));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oversized_l_is_left_to_the_runner() {
        let text = MINIMAL.replace("L = 100", "L = 5000");
        assert!(parse_plan(&text, Path::new("p.toml")).is_ok());
    }
}
