//! Human-readable rendering of run results.

use std::fmt::Write;

use crate::runner::{Analysis, ConeReport, Report, RunManifest, TaskStatus};

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn cones(out: &mut String, cones: &[ConeReport]) {
    for c in cones {
        let _ = write!(out, "  light cone L={} T={} lambda={}:", c.sites, c.temperature, c.lambda);
        match &c.fit {
            Some(f) => {
                let _ = writeln!(
                    out,
                    " v_B = {:.4} ± {} (rel. residual {:.3}, monotone {})",
                    f.v_b,
                    opt(f.v_b_std_err),
                    f.relative_residual,
                    c.monotone
                );
            }
            None => {
                let _ = writeln!(out, " no fit ({})", c.error.as_deref().unwrap_or("unknown"));
            }
        }
        for p in &c.points {
            let sens: Vec<String> = p.sensitivity.iter().map(|s| format!("eps={}: {}", s.epsilon, opt(s.t_s))).collect();
            let _ = writeln!(out, "    r={:>3}  t_s={}  [{}]", p.r, opt(p.t_s), sens.join(", "));
        }
    }
}

pub fn render(manifest: &RunManifest, report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({:?}), status {:?}", report.name, manifest.kind, manifest.status);
    let counts = |s| manifest.tasks.iter().filter(|t| t.status == s).count();
    let _ = writeln!(
        out,
        "tasks: {} ok, {} skipped, {} failed; cache: {} computed, {} from disk, {} recomputed",
        counts(TaskStatus::Ok),
        counts(TaskStatus::Skipped),
        counts(TaskStatus::Failed),
        manifest.cache.stats.computed,
        manifest.cache.stats.disk_hits,
        manifest.cache.stats.recomputed
    );
    match &report.analysis {
        Analysis::SeriesRun => {
            for s in &report.series {
                let _ = writeln!(
                    out,
                    "  L={} T={} lambda={} r={:?}: F(0) = {:.6}{:+.6}i, max|F| = {:.6}",
                    s.sites, s.temperature, s.lambda, s.separation, s.f0.0, s.f0.1, s.max_abs_f
                );
            }
        }
        Analysis::TminScan { points, fit } => {
            for p in points {
                let _ = writeln!(out, "  L={:>5}  t_min={:.6}  F_min={:.6}", p.sites, p.t_min, p.f_min);
            }
            if let Some(f) = fit {
                let _ = writeln!(out, "  z = {:.4} ± {}", f.exponent, opt(f.std_err));
            }
        }
        Analysis::FminScan { points, fit, costs } => {
            let _ = writeln!(out, "  {} F_min points", points.len());
            if let Some(f) = fit {
                let _ = writeln!(out, "  nu = {:.4} (collapse cost {:.3e}, sizes {:?})", f.nu, f.cost, f.sizes);
            }
            for (nu, c) in costs {
                let _ = writeln!(out, "  cost at nu = {nu}: {c:.3e}");
            }
        }
        Analysis::LocateQcp { curves, estimate } => {
            let sizes: Vec<usize> = curves.iter().map(|c| c.sites).collect();
            let _ = writeln!(out, "  sizes {sizes:?}");
            if let Some(e) = estimate {
                let _ = writeln!(out, "  lambda_c = {:.5} ± {:.5} ({} crossings)", e.lambda_c, e.uncertainty, e.crossings.len());
            }
        }
        Analysis::LightCone { cones: c } => cones(&mut out, c),
        Analysis::ButterflyForms { cones: c, forms } => {
            cones(&mut out, c);
            if let Some(f) = forms {
                for chk in &f.checks {
                    let _ = writeln!(
                        out,
                        "  {} form ({}): slope {:.3}, expected {:.3}, {}",
                        chk.form,
                        chk.held_fixed,
                        chk.fitted_slope,
                        chk.expected_slope,
                        if chk.passed { "ok" } else { "FAILED" }
                    );
                }
                for p in &f.pairs {
                    let _ = writeln!(
                        out,
                        "  pair (T={}, L={}) / (T={}, L={}): ratio {:.3}, {}",
                        p.a.temperature,
                        p.a.sites,
                        p.b.temperature,
                        p.b.sites,
                        p.ratio,
                        if p.passed { "ok" } else { "FAILED" }
                    );
                }
            }
        }
        Analysis::InvarianceCheck(r) => {
            let _ = writeln!(out, "  collapse cost {:.3e} over b = {:?}", r.collapse.cost, r.collapse.curves.iter().map(|c| c.partner.b).collect::<Vec<_>>());
            if let (Some(z), Some(c), Some(q)) = (r.control_z, r.control_cost, r.control_ratio) {
                let _ = writeln!(out, "  control z = {z}: cost {c:.3e} ({q:.1}x)");
            }
        }
    }
    for e in &report.errors {
        let _ = writeln!(out, "  error: {e}");
    }
    for w in &manifest.warnings {
        let _ = writeln!(out, "  warning: {w}");
    }
    out
}
