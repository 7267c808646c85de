//! Plan execution: expand the sweep into tasks, run them, analyse, and
//! write artifacts plus a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use otoc_scaling::scaling::{
    butterfly_form_checks, extract_scrambling_time, fit_butterfly_velocity, fit_dynamical_exponent,
    fit_nu, find_first_minimum, fmin_collapse, locate_critical_point, scaling_invariance_check,
    scrambling_sensitivity, CollapseReport, CriticalEstimate, ExponentSet, FminPoint, FormReport,
    FormTolerances, InvarianceConfig, LightConeFit, NuFit, PowerLawFit, RescaleMode,
    SensitivityEntry, SizeCurve, VelocityPoint,
};
use otoc_scaling::{
    compute_otoc_series, gibbs_state_with, normalized_series, Error, GibbsOptions, ModelSpec,
    OperatorSpec, OtocSeries, SpectralData, SpectralSource, TimeGrid,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::{default_cache_dir, CacheStats, SpectralCache};
use crate::error::CliError;
use crate::plan::{load_plan, ExperimentPlan, LoadedPlan, PlanKind};

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Execution settings that are not part of the plan itself.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// `None` disables the on-disk cache.
    pub cache_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Overrides the plan's `output_dir`.
    pub output_dir: Option<PathBuf>,
}

impl RunOptions {
    /// Cache under the default directory, thread count from `OTOC_THREADS`.
    pub fn from_env() -> Self {
        Self {
            cache_dir: Some(default_cache_dir()),
            threads: std::env::var("OTOC_THREADS").ok().and_then(|s| s.parse().ok()),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: usize,
    pub sites: usize,
    pub temperature: f64,
    pub lambda: f64,
    pub separation: Option<i64>,
    pub status: TaskStatus,
    pub message: Option<String>,
    pub dt: Option<f64>,
    pub grid_points: Option<usize>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionRecord {
    pub epsilon: f64,
    pub degeneracy_tol: f64,
    pub weight_cutoff: f64,
    pub t_max: f64,
    /// `None`: chosen per model instance from the spectral width.
    pub dt: Option<f64>,
    pub collapse_points: usize,
    pub mode: Option<RescaleMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub enabled: bool,
    pub dir: Option<PathBuf>,
    pub stats: CacheStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    PartialFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub plan_path: PathBuf,
    /// SHA-256 of the plan file contents.
    pub plan_hash: String,
    pub name: String,
    pub kind: PlanKind,
    pub engine_version: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub output_dir: PathBuf,
    pub report: PathBuf,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub conventions: ConventionRecord,
    pub cache: CacheRecord,
    pub tasks: Vec<TaskRecord>,
    pub analysis_errors: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub task: usize,
    pub sites: usize,
    pub temperature: f64,
    pub lambda: f64,
    pub separation: Option<i64>,
    pub w: OperatorSpec,
    pub v: OperatorSpec,
    /// `(Re, Im)` of `F(0)`.
    pub f0: (f64, f64),
    pub max_abs_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TminPoint {
    pub sites: usize,
    pub t_min: f64,
    pub f_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub r: i64,
    pub t_s: Option<f64>,
    pub sensitivity: Vec<SensitivityEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub sites: usize,
    pub temperature: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub points: Vec<ConePoint>,
    /// `t_s` strictly increases with `r`.
    pub monotone: bool,
    pub fit: Option<LightConeFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceResult {
    pub collapse: CollapseReport,
    pub control_z: Option<f64>,
    pub control_cost: Option<f64>,
    /// `control_cost / cost`.
    pub control_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Analysis {
    SeriesRun,
    TminScan {
        points: Vec<TminPoint>,
        fit: Option<PowerLawFit>,
    },
    FminScan {
        points: Vec<FminPoint>,
        fit: Option<NuFit>,
        /// Collapse cost at the prior ν and at each contrast value.
        costs: Vec<(f64, f64)>,
    },
    LocateQcp {
        curves: Vec<SizeCurve>,
        estimate: Option<CriticalEstimate>,
    },
    LightCone {
        cones: Vec<ConeReport>,
    },
    ButterflyForms {
        cones: Vec<ConeReport>,
        forms: Option<FormReport>,
    },
    InvarianceCheck(Box<InvarianceResult>),
}

/// Deterministic results of a run; contains no timings or cache state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub plan_hash: String,
    pub series: Vec<SeriesSummary>,
    pub analysis: Analysis,
    pub errors: Vec<String>,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: Report,
    pub manifest_path: PathBuf,
}

#[derive(Debug, Clone)]
struct Task {
    id: usize,
    sites: usize,
    temperature: f64,
    lambda: f64,
    separation: Option<i64>,
    spec: ModelSpec,
    w: OperatorSpec,
    v: OperatorSpec,
}

struct TaskResult {
    record: TaskRecord,
    series: Option<OtocSeries>,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn expand(plan: &ExperimentPlan) -> Result<Vec<Task>, CliError> {
    let mut tasks = Vec::new();
    for sites in plan.sizes() {
        for temperature in plan.temperatures() {
            for lambda in plan.lambdas() {
                for separation in plan.separations() {
                    let (w, v) = plan.operators.pair(sites, separation).map_err(|message| {
                        CliError::Validation {
                            field: "operators".into(),
                            line: None,
                            message,
                        }
                    })?;
                    tasks.push(Task {
                        id: tasks.len(),
                        sites,
                        temperature,
                        lambda,
                        separation,
                        spec: plan.model.instantiate(sites, lambda),
                        w,
                        v,
                    });
                }
            }
        }
    }
    Ok(tasks)
}

fn grid_for(plan: &ExperimentPlan, sd: &SpectralData) -> otoc_scaling::Result<TimeGrid> {
    match plan.grid.dt {
        Some(dt) => TimeGrid::uniform(plan.grid.t_max, dt),
        None => TimeGrid::default_for(sd, plan.grid.t_max),
    }
}

fn gibbs_options(plan: &ExperimentPlan) -> GibbsOptions {
    GibbsOptions {
        degeneracy_tol: plan.conventions.degeneracy_tol,
        weight_cutoff: plan.conventions.weight_cutoff,
    }
}

fn run_task(task: &Task, plan: &ExperimentPlan, source: &dyn SpectralSource, out: &Path) -> TaskResult {
    let mut record = TaskRecord {
        id: task.id,
        sites: task.sites,
        temperature: task.temperature,
        lambda: task.lambda,
        separation: task.separation,
        status: TaskStatus::Ok,
        message: None,
        dt: plan.grid.dt,
        grid_points: None,
        artifacts: Vec::new(),
    };
    let fail = |record: &mut TaskRecord, status, msg: String| {
        log::warn!("task {}: {msg}", record.id);
        record.status = status;
        record.message = Some(msg);
    };
    let sd = match source.spectral(&task.spec) {
        Ok(sd) => sd,
        Err(e @ Error::BudgetExceeded { .. }) => {
            fail(&mut record, TaskStatus::Skipped, e.to_string());
            return TaskResult { record, series: None };
        }
        Err(e) => {
            fail(&mut record, TaskStatus::Failed, e.to_string());
            return TaskResult { record, series: None };
        }
    };
    let computed = (|| -> Result<Option<OtocSeries>, String> {
        let grid = grid_for(plan, &sd).map_err(|e| e.to_string())?;
        record.grid_points = Some(grid.len());
        if grid.len() > 1 {
            record.dt = Some(grid.times()[1] - grid.times()[0]);
        }
        if grid.len() > plan.budgets.max_grid_points {
            return Ok(None);
        }
        let state = gibbs_state_with(&sd, task.temperature, &gibbs_options(plan)).map_err(|e| e.to_string())?;
        compute_otoc_series(&sd, &task.w, &task.v, &state, &grid, plan.exponents.lambda_c)
            .map(Some)
            .map_err(|e| e.to_string())
    })();
    match computed {
        Ok(None) => {
            let msg = format!(
                "grid of {} points exceeds max_grid_points = {}",
                record.grid_points.unwrap_or(0),
                plan.budgets.max_grid_points
            );
            fail(&mut record, TaskStatus::Skipped, msg);
            TaskResult { record, series: None }
        }
        Err(msg) => {
            fail(&mut record, TaskStatus::Failed, msg);
            TaskResult { record, series: None }
        }
        Ok(Some(series)) => {
            if plan.conventions.write_series {
                let stem = format!(
                    "t{:03}_L{}_T{}_lambda{}{}",
                    task.id,
                    task.sites,
                    fmt_num(task.temperature),
                    fmt_num(task.lambda),
                    task.separation.map(|r| format!("_r{r}")).unwrap_or_default()
                );
                match series.write_with_sidecar(out, &stem) {
                    Ok((csv, meta)) => {
                        for p in [csv, meta] {
                            record
                                .artifacts
                                .push(p.strip_prefix(out).map(Path::to_path_buf).unwrap_or(p));
                        }
                    }
                    Err(e) => {
                        fail(&mut record, TaskStatus::Failed, format!("writing {stem}: {e}"));
                        return TaskResult { record, series: None };
                    }
                }
            }
            TaskResult {
                record,
                series: Some(series),
            }
        }
    }
}

fn summary(task: &Task, s: &OtocSeries) -> SeriesSummary {
    let f0 = s.values[0];
    SeriesSummary {
        task: task.id,
        sites: task.sites,
        temperature: task.temperature,
        lambda: task.lambda,
        separation: task.separation,
        w: task.w,
        v: task.v,
        f0: (f0.re, f0.im),
        max_abs_f: s.values.iter().map(|z| z.norm()).fold(0.0, f64::max),
    }
}

/// First minimum of `Re F̃`.
fn first_min(s: &OtocSeries) -> otoc_scaling::Result<(f64, f64)> {
    let m = find_first_minimum(&normalized_series(s)?)?;
    Ok((m.t_min, m.f_min))
}

fn light_cones(
    tasks: &[Task],
    results: &[TaskResult],
    eps: f64,
    errors: &mut Vec<String>,
) -> Vec<ConeReport> {
    let mut groups: Vec<(usize, f64, f64, Vec<usize>)> = Vec::new();
    for (i, t) in tasks.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| g.0 == t.sites && g.1 == t.temperature && g.2 == t.lambda)
        {
            Some(g) => g.3.push(i),
            None => groups.push((t.sites, t.temperature, t.lambda, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(sites, temperature, lambda, idx)| {
            let mut points = Vec::new();
            let mut error = None;
            for &i in &idx {
                let Some(series) = results[i].series.as_ref() else {
                    error = Some(format!("task {i} produced no series"));
                    continue;
                };
                let r = tasks[i].separation.unwrap_or(0);
                let t_s = match extract_scrambling_time(series, eps) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        error.get_or_insert(format!("r = {r}: {e}"));
                        None
                    }
                };
                let sensitivity = scrambling_sensitivity(series).unwrap_or_default();
                points.push(ConePoint { r, t_s, sensitivity });
            }
            points.sort_by_key(|p| p.r);
            let cone: Vec<(f64, f64)> = points
                .iter()
                .filter_map(|p| p.t_s.map(|t| (p.r as f64, t)))
                .collect();
            let monotone = cone.len() == points.len() && cone.windows(2).all(|w| w[1].1 > w[0].1);
            let fit = match fit_butterfly_velocity(&cone) {
                Ok(mut f) => {
                    f.epsilon = Some(eps);
                    Some(f)
                }
                Err(e) => {
                    error.get_or_insert(e.to_string());
                    None
                }
            };
            if let Some(e) = &error {
                errors.push(format!("light cone L = {sites}, T = {temperature}, lambda = {lambda}: {e}"));
            }
            ConeReport {
                sites,
                temperature,
                lambda,
                epsilon: eps,
                points,
                monotone,
                fit,
                error,
            }
        })
        .collect()
}

fn analyse(plan: &ExperimentPlan, tasks: &[Task], results: &[TaskResult], errors: &mut Vec<String>) -> Analysis {
    let ok = || tasks.iter().zip(results).filter_map(|(t, r)| r.series.as_ref().map(|s| (t, s)));
    let mut note = |context: &str, e: &dyn std::fmt::Display| errors.push(format!("{context}: {e}"));
    match plan.kind {
        PlanKind::SeriesRun | PlanKind::InvarianceCheck => Analysis::SeriesRun,
        PlanKind::TminScan => {
            let mut points = Vec::new();
            for (t, s) in ok() {
                match first_min(s) {
                    Ok((t_min, f_min)) => points.push(TminPoint {
                        sites: t.sites,
                        t_min,
                        f_min,
                    }),
                    Err(e) => note(&format!("first minimum at L = {}", t.sites), &e),
                }
            }
            let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.sites as f64, p.t_min)).collect();
            let fit = fit_dynamical_exponent(&xy).map_err(|e| note("z fit", &e)).ok();
            Analysis::TminScan { points, fit }
        }
        PlanKind::FminScan => {
            let lambda_c = plan.exponents.lambda_c.unwrap_or(0.0);
            let mut points = Vec::new();
            for (t, s) in ok() {
                match first_min(s) {
                    Ok((_, f_min)) => points.push(FminPoint {
                        sites: t.sites,
                        h: t.lambda - lambda_c,
                        f_min,
                    }),
                    Err(e) => note(&format!("first minimum at L = {}, lambda = {}", t.sites, t.lambda), &e),
                }
            }
            let fit = fit_nu(&points).map_err(|e| note("nu fit", &e)).ok();
            let mut costs = Vec::new();
            let contrasts = plan.exponents.nu.into_iter().chain(plan.conventions.nu_contrast.iter().copied());
            for nu in contrasts {
                match fmin_collapse(&points, nu) {
                    Ok(c) => costs.push((nu, c.cost)),
                    Err(e) => note(&format!("collapse at nu = {nu}"), &e),
                }
            }
            Analysis::FminScan { points, fit, costs }
        }
        PlanKind::LocateQcp => {
            let lambdas = plan.lambdas();
            let mut curves = Vec::new();
            for sites in plan.sizes() {
                let mut values = Vec::new();
                for (t, s) in ok().filter(|(t, _)| t.sites == sites) {
                    match first_min(s) {
                        Ok((_, f_min)) => values.push(f_min),
                        Err(e) => note(&format!("first minimum at L = {sites}, lambda = {}", t.lambda), &e),
                    }
                }
                if values.len() == lambdas.len() {
                    curves.push(SizeCurve {
                        sites,
                        lambdas: lambdas.clone(),
                        values,
                    });
                }
            }
            let estimate = locate_critical_point(&curves).map_err(|e| note("critical point", &e)).ok();
            Analysis::LocateQcp { curves, estimate }
        }
        PlanKind::LightCone => Analysis::LightCone {
            cones: light_cones(tasks, results, plan.conventions.epsilon, errors),
        },
        PlanKind::ButterflyForms => {
            let cones = light_cones(tasks, results, plan.conventions.epsilon, errors);
            let e = plan.exponents.complete().expect("validated");
            let data: Vec<VelocityPoint> = cones
                .iter()
                .filter_map(|c| {
                    c.fit.as_ref().map(|f| VelocityPoint {
                        temperature: c.temperature,
                        h: c.lambda - e.lambda_c,
                        sites: c.sites,
                        v_b: f.v_b,
                    })
                })
                .collect();
            let tol = FormTolerances {
                slope: plan.conventions.slope_tolerance,
                pair_ratio: plan.conventions.pair_tolerance,
                ..FormTolerances::default()
            };
            let forms = butterfly_form_checks(&data, &e, &tol)
                .map_err(|err| errors.push(format!("scaling forms: {err}")))
                .ok();
            Analysis::ButterflyForms { cones, forms }
        }
    }
}

fn invariance(
    plan: &ExperimentPlan,
    source: &dyn SpectralSource,
) -> Result<InvarianceResult, String> {
    let sites = plan.sizes()[0];
    let lambda = plan.lambdas()[0];
    let temperature = plan.temperatures()[0];
    let (w, v) = plan.operators.pair(sites, plan.separations()[0])?;
    let base = plan.model.instantiate(sites, lambda);
    let sd = source.spectral(&base).map_err(|e| e.to_string())?;
    let grid = grid_for(plan, &sd).map_err(|e| e.to_string())?;
    if grid.len() > plan.budgets.max_grid_points {
        return Err(format!("grid of {} points exceeds max_grid_points", grid.len()));
    }
    let exponents: ExponentSet = plan.exponents.complete().expect("validated");
    let mode = plan.conventions.mode.unwrap_or(if w.is_local() {
        RescaleMode::LocalUnitary
    } else {
        RescaleMode::Global
    });
    let cfg = InvarianceConfig {
        base,
        temperature,
        w,
        v,
        grid,
        b_list: plan.params.b_list.clone(),
        exponents,
        mode,
        collapse_points: plan.conventions.collapse_points,
    };
    let control_z = plan.conventions.control_z;
    let (main, control) = rayon::join(
        || scaling_invariance_check(source, &cfg),
        || {
            control_z.map(|z| {
                let mut c = cfg.clone();
                c.exponents.z = z;
                scaling_invariance_check(source, &c)
            })
        },
    );
    let collapse = main.map_err(|e| e.to_string())?;
    let control_cost = control.transpose().map_err(|e| format!("control z: {e}"))?.map(|r| r.cost);
    Ok(InvarianceResult {
        control_ratio: control_cost.map(|c| c / collapse.cost),
        control_cost,
        control_z,
        collapse,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Load, validate and execute a plan file.
pub fn execute_plan(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let loaded = load_plan(path)?;
    execute_loaded(&loaded, opts)
}

pub fn execute_loaded(loaded: &LoadedPlan, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let plan = &loaded.plan;
    let out = opts.output_dir.clone().unwrap_or_else(|| loaded.output_dir());
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let plan_hash = sha256_hex(loaded.text.as_bytes());
    let cache = SpectralCache::new(opts.cache_dir.clone(), plan.budgets.dense());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Validation {
            field: "threads".into(),
            line: None,
            message: e.to_string(),
        })?;
    let threads = pool.current_num_threads();

    let mut errors = Vec::new();
    let (tasks, results, analysis) = if plan.kind == PlanKind::InvarianceCheck {
        let analysis = match pool.install(|| invariance(plan, &cache)) {
            Ok(r) => Analysis::InvarianceCheck(Box::new(r)),
            Err(e) => {
                errors.push(format!("invariance check: {e}"));
                Analysis::SeriesRun
            }
        };
        (Vec::new(), Vec::new(), analysis)
    } else {
        let tasks = expand(plan)?;
        let results: Vec<TaskResult> =
            pool.install(|| tasks.par_iter().map(|t| run_task(t, plan, &cache, &out)).collect());
        let analysis = analyse(plan, &tasks, &results, &mut errors);
        (tasks, results, analysis)
    };

    let report = Report {
        name: plan.name(),
        plan_hash: plan_hash.clone(),
        series: tasks
            .iter()
            .zip(&results)
            .filter_map(|(t, r)| r.series.as_ref().map(|s| summary(t, s)))
            .collect(),
        analysis,
        errors: errors.clone(),
    };
    let report_path = out.join(REPORT_FILE);
    write_json(&report_path, &report)?;

    let records: Vec<TaskRecord> = results.into_iter().map(|r| r.record).collect();
    let all_ok = errors.is_empty() && records.iter().all(|r| r.status == TaskStatus::Ok);
    let manifest = RunManifest {
        plan_path: loaded.path.clone(),
        plan_hash,
        name: plan.name(),
        kind: plan.kind,
        engine_version: otoc_scaling::VERSION.to_string(),
        status: if all_ok {
            RunStatus::Success
        } else {
            RunStatus::PartialFailure
        },
        exit_code: if all_ok { 0 } else { 2 },
        output_dir: out.clone(),
        report: PathBuf::from(REPORT_FILE),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        threads,
        conventions: ConventionRecord {
            epsilon: plan.conventions.epsilon,
            degeneracy_tol: plan.conventions.degeneracy_tol,
            weight_cutoff: plan.conventions.weight_cutoff,
            t_max: plan.grid.t_max,
            dt: plan.grid.dt,
            collapse_points: plan.conventions.collapse_points,
            mode: plan.conventions.mode,
        },
        cache: CacheRecord {
            enabled: cache.dir().is_some(),
            dir: cache.dir().map(Path::to_path_buf),
            stats: cache.stats(),
        },
        tasks: records,
        analysis_errors: errors,
        warnings: cache.warnings(),
    };
    let manifest_path = out.join(MANIFEST_FILE);
    write_json(&manifest_path, &manifest)?;
    Ok(RunOutcome {
        manifest,
        report,
        manifest_path,
    })
}

/// Load the report a manifest points to.
pub fn load_report(manifest_path: &Path) -> Result<(RunManifest, Report), CliError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| CliError::io(p, e));
    let manifest: RunManifest = serde_json::from_str(&read(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let report: Report = serde_json::from_str(&read(&dir.join(&manifest.report))?)?;
    Ok((manifest, report))
}
