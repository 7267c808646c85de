//! OTOC time series `F(t) = ⟨W(t)† V† W(t) V⟩` and derived quantities.

use std::path::{Path, PathBuf};

use faer::{c64, Accum, Mat};
use serde::{Deserialize, Serialize};

use crate::engine::{phases, QuantumState, SpectralData};
use crate::error::{Error, Result};
use crate::linalg::{self, gemm};
use crate::models::{build_operator_in_basis, ModelSpec, OperatorMatrix, OperatorSpec};

/// Strictly increasing sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("grid has non-finite times".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    /// `0, dt, 2dt, …` up to `t_max` (rounded to a whole number of steps).
    pub fn uniform(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("t_max must be non-negative, got {t_max}")));
        }
        let steps = (t_max / dt).round() as usize;
        Self::new((0..=steps).map(|k| k as f64 * dt).collect())
    }

    /// Uniform grid whose step keeps the fastest relative phase below 0.5,
    /// i.e. `dt = 0.5 / (E_max - E_min)`.
    pub fn default_for(sd: &SpectralData, t_max: f64) -> Result<Self> {
        let width = sd.spectral_width();
        let dt = if width > 0.0 { 0.5 / width } else { t_max.max(1.0) };
        Self::uniform(t_max, dt)
    }

    /// Every time multiplied by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.times.iter().map(|t| t * factor).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Physical parameters attached to a series; the scaling transforms act on
/// these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub model: ModelSpec,
    /// `None` for pure states.
    pub temperature: Option<f64>,
    /// Signed `λ - λ_c` when `λ_c` is known, else the raw `λ`.
    pub h: f64,
    pub lambda_c: Option<f64>,
    pub w: OperatorSpec,
    pub v: OperatorSpec,
    pub separation: Option<i64>,
    pub normalized: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SeriesMeta {
    pub fn new(
        model: ModelSpec,
        temperature: Option<f64>,
        lambda_c: Option<f64>,
        w: OperatorSpec,
        v: OperatorSpec,
    ) -> Self {
        let h = lambda_c.map_or(model.field(), |c| model.field() - c);
        let mut notes = Vec::new();
        if let ModelSpec::Lmg(p) = &model {
            notes.push(format!(
                "LMG evaluated in the maximal total-spin sector S = {}; lower-spin sectors are excluded{}",
                p.sites as f64 / 2.0,
                match temperature {
                    Some(t) if t > 0.0 => " (thermal weights are restricted to this sector)",
                    _ => "",
                }
            ));
        }
        Self {
            separation: OperatorSpec::separation(&w, &v),
            model,
            temperature,
            h,
            lambda_c,
            w,
            v,
            normalized: false,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    pub values: Vec<c64>,
    pub meta: SeriesMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl OtocSeries {
    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn real_series(&self) -> RealSeries {
        RealSeries {
            times: self.times.clone(),
            values: self.real_parts(),
        }
    }

    /// CSV with columns `t,re_F,im_F` at round-trip precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["t", "re_F", "im_F"])?;
        for (t, f) in self.times.iter().zip(&self.values) {
            wtr.write_record([
                format!("{t:.16e}"),
                format!("{:.16e}", f.re),
                format!("{:.16e}", f.im),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json`; returns both paths.
    pub fn write_with_sidecar(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let meta_path = dir.join(format!("{stem}.meta.json"));
        self.write_csv(&csv_path)?;
        let mut text = serde_json::to_string_pretty(&self.meta)?;
        text.push('\n');
        std::fs::write(&meta_path, text)?;
        Ok((csv_path, meta_path))
    }

    /// Inverse of [`write_with_sidecar`](Self::write_with_sidecar).
    pub fn read_with_sidecar(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta: SeriesMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad CSV field in {}", csv_path.display())))
            };
            times.push(num(0)?);
            values.push(c64::new(num(1)?, num(2)?));
        }
        Ok(Self { times, values, meta })
    }
}

/// Complex matrix stored as two real halves.
struct Cx {
    re: Mat<f64>,
    im: Mat<f64>,
}

impl Cx {
    fn zeros(r: usize, c: usize) -> Self {
        Self {
            re: Mat::zeros(r, c),
            im: Mat::zeros(r, c),
        }
    }
}

/// `dst = a · b` for a split-complex `a` (imaginary part optional).
fn op_times(dst: &mut Cx, a: &OperatorMatrix, b_re: &Mat<f64>, b_im: Option<&Mat<f64>>) {
    gemm(dst.re.as_mut(), Accum::Replace, a.re.as_ref(), b_re.as_ref(), 1.0);
    match b_im {
        Some(bi) => gemm(dst.im.as_mut(), Accum::Replace, a.re.as_ref(), bi.as_ref(), 1.0),
        None => dst.im.fill(0.0),
    }
    if let Some(ai) = &a.im {
        gemm(dst.im.as_mut(), Accum::Add, ai.as_ref(), b_re.as_ref(), 1.0);
        if let Some(bi) = b_im {
            gemm(dst.re.as_mut(), Accum::Add, ai.as_ref(), bi.as_ref(), -1.0);
        }
    }
}

fn check_hermitian(op: &OperatorMatrix) -> Result<()> {
    let err = op.hermiticity_error();
    if err > 1e-12 {
        Err(Error::NotHermitian(err))
    } else {
        Ok(())
    }
}

/// Raw OTOC values for explicit (Hermitian) operator matrices.
///
/// Pure states use the two vectors `W(t)V|ψ⟩` and `V W(t)|ψ⟩`. Thermal
/// states sum over the weighted eigenlevels; when fewer than half the levels
/// carry weight only those columns are propagated, otherwise the full
/// product `W(t)V` is formed.
pub fn otoc_values(
    sd: &SpectralData,
    w: &OperatorMatrix,
    v: &OperatorMatrix,
    state: &QuantumState,
    times: &[f64],
) -> Result<Vec<c64>> {
    let n = sd.dimension();
    for d in [w.dimension(), v.dimension(), state.dimension()] {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, found: d });
        }
    }
    check_hermitian(w)?;
    check_hermitian(v)?;
    let u = sd.eigenvectors.as_ref();
    let a = linalg::to_eigenbasis(u, w);
    let b = linalg::to_eigenbasis(u, v);
    match state {
        QuantumState::Pure(psi) => {
            let nrm = linalg::norm(psi);
            if (nrm - 1.0).abs() > 1e-10 {
                return Err(Error::Unnormalized(nrm));
            }
            let coeffs = linalg::real_matvec(u.transpose(), psi);
            Ok(pure_kernel(sd, &a, &b, &coeffs, times))
        }
        QuantumState::Thermal { weights, .. } => {
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-10 || weights.iter().any(|&p| p < 0.0) {
                return Err(Error::Unnormalized(total));
            }
            let support: Vec<usize> = (0..n).filter(|&k| weights[k] > 0.0).collect();
            if 2 * support.len() > n {
                Ok(full_kernel(sd, &a, &b, weights, times))
            } else {
                Ok(column_kernel(sd, &a, &b, weights, &support, times))
            }
        }
    }
}

fn pure_kernel(sd: &SpectralData, a: &OperatorMatrix, b: &OperatorMatrix, psi: &[c64], times: &[f64]) -> Vec<c64> {
    let b_psi = linalg::op_matvec(b, psi);
    times
        .iter()
        .map(|&t| {
            let (c, s) = phases(&sd.eigenvalues, t);
            // W(t) x = D A D† x with D = diag(e^{iEt})
            let wt = |x: &[c64]| -> Vec<c64> {
                let y: Vec<c64> = x
                    .iter()
                    .enumerate()
                    .map(|(k, z)| z * c64::new(c[k], -s[k]))
                    .collect();
                linalg::op_matvec(a, &y)
                    .into_iter()
                    .enumerate()
                    .map(|(k, z)| z * c64::new(c[k], s[k]))
                    .collect()
            };
            let x = wt(&b_psi);
            let y = linalg::op_matvec(b, &wt(psi));
            linalg::dot(&y, &x)
        })
        .collect()
}

fn column_kernel(
    sd: &SpectralData,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    weights: &[f64],
    support: &[usize],
    times: &[f64],
) -> Vec<c64> {
    let n = sd.dimension();
    let kk = support.len();
    let pick = |m: &Mat<f64>| Mat::from_fn(n, kk, |i, j| m[(i, support[j])]);
    let a_re_k = pick(&a.re);
    let a_im_k = a.im.as_ref().map(pick);
    let b_re_k = pick(&b.re);
    let b_im_k = b.im.as_ref().map(pick);

    let mut p_re = Mat::<f64>::zeros(n, kk);
    let mut p_im = Mat::<f64>::zeros(n, kk);
    let mut x = Cx::zeros(n, kk);
    let mut y = Cx::zeros(n, kk);
    times
        .iter()
        .map(|&t| {
            let (c, s) = phases(&sd.eigenvalues, t);
            // P = D† B[:, K]
            for j in 0..kk {
                for m in 0..n {
                    let br = b_re_k[(m, j)];
                    let bi = b_im_k.as_ref().map_or(0.0, |x| x[(m, j)]);
                    p_re[(m, j)] = br * c[m] + bi * s[m];
                    p_im[(m, j)] = bi * c[m] - br * s[m];
                }
            }
            // X = D A P = (W(t) V)[:, K]
            op_times(&mut x, a, &p_re, Some(&p_im));
            for j in 0..kk {
                for m in 0..n {
                    let (xr, xi) = (x.re[(m, j)], x.im[(m, j)]);
                    x.re[(m, j)] = xr * c[m] - xi * s[m];
                    x.im[(m, j)] = xr * s[m] + xi * c[m];
                }
            }
            // Q = (D A D†)[:, K], Y = B Q = (V W(t))[:, K]
            for j in 0..kk {
                let k = support[j];
                for m in 0..n {
                    let pc = c[m] * c[k] + s[m] * s[k];
                    let ps = s[m] * c[k] - c[m] * s[k];
                    let ar = a_re_k[(m, j)];
                    let ai = a_im_k.as_ref().map_or(0.0, |x| x[(m, j)]);
                    p_re[(m, j)] = ar * pc - ai * ps;
                    p_im[(m, j)] = ar * ps + ai * pc;
                }
            }
            op_times(&mut y, b, &p_re, Some(&p_im));
            // F = Σ_k p_k ⟨Y_k, X_k⟩
            let mut f = c64::new(0.0, 0.0);
            for j in 0..kk {
                let mut acc = c64::new(0.0, 0.0);
                for m in 0..n {
                    acc += c64::new(y.re[(m, j)], -y.im[(m, j)]) * c64::new(x.re[(m, j)], x.im[(m, j)]);
                }
                f += weights[support[j]] * acc;
            }
            f
        })
        .collect()
}

fn full_kernel(
    sd: &SpectralData,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    weights: &[f64],
    times: &[f64],
) -> Vec<c64> {
    let n = sd.dimension();
    let mut cmat = OperatorMatrix {
        re: Mat::zeros(n, n),
        im: Some(Mat::zeros(n, n)),
    };
    let mut m = Cx::zeros(n, n);
    times
        .iter()
        .map(|&t| {
            let (c, s) = phases(&sd.eigenvalues, t);
            let ci = cmat.im.as_mut().expect("allocated");
            for l in 0..n {
                for mm in 0..n {
                    let pc = c[mm] * c[l] + s[mm] * s[l];
                    let ps = s[mm] * c[l] - c[mm] * s[l];
                    let ar = a.re[(mm, l)];
                    let ai = a.im.as_ref().map_or(0.0, |x| x[(mm, l)]);
                    cmat.re[(mm, l)] = ar * pc - ai * ps;
                    ci[(mm, l)] = ar * ps + ai * pc;
                }
            }
            // M = W(t) V in the eigenbasis, F = Σ_k p_k (M M)_kk
            op_times(&mut m, &cmat, &b.re, b.im.as_ref());
            let mut f = c64::new(0.0, 0.0);
            for (k, &p) in weights.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let mut acc = c64::new(0.0, 0.0);
                for j in 0..n {
                    acc += c64::new(m.re[(k, j)], m.im[(k, j)]) * c64::new(m.re[(j, k)], m.im[(j, k)]);
                }
                f += p * acc;
            }
            f
        })
        .collect()
}

/// OTOC series for operator specs realized in the spectral data's basis.
pub fn compute_otoc_series(
    sd: &SpectralData,
    w: &OperatorSpec,
    v: &OperatorSpec,
    state: &QuantumState,
    grid: &TimeGrid,
    lambda_c: Option<f64>,
) -> Result<OtocSeries> {
    let model = sd
        .spec
        .clone()
        .ok_or_else(|| Error::InvalidArgument("spectral data carries no model spec".into()))?;
    let wm = build_operator_in_basis(w, &sd.basis)?;
    let vm = build_operator_in_basis(v, &sd.basis)?;
    let values = otoc_values(sd, &wm, &vm, state, grid.times())?;
    Ok(OtocSeries {
        times: grid.times().to_vec(),
        values,
        meta: SeriesMeta::new(model, state.temperature(), lambda_c, *w, *v),
    })
}

/// `F̃(t) = F(t) / F(0)`; the first value becomes exactly one.
pub fn normalized_series(s: &OtocSeries) -> Result<OtocSeries> {
    let (Some(&t0), Some(&f0)) = (s.times.first(), s.values.first()) else {
        return Err(Error::InvalidGrid("series is empty".into()));
    };
    if t0 != 0.0 {
        return Err(Error::InvalidGrid(format!(
            "normalization needs the grid to start at t = 0, got {t0}"
        )));
    }
    if f0.norm() <= 1e-12 {
        return Err(Error::VanishingNormalization(f0.norm()));
    }
    let mut values: Vec<c64> = s.values.iter().map(|z| z / f0).collect();
    values[0] = c64::new(1.0, 0.0);
    let mut meta = s.meta.clone();
    meta.normalized = true;
    Ok(OtocSeries {
        times: s.times.clone(),
        values,
        meta,
    })
}

/// `C(t) = 2[1 - Re F(t)]`, valid for unitary `W`, `V`.
pub fn squared_commutator_series(s: &OtocSeries) -> Result<RealSeries> {
    for (name, op) in [("W", &s.meta.w), ("V", &s.meta.v)] {
        if !op.is_unitary() {
            return Err(Error::NonUnitary(format!("{name} = {op:?}")));
        }
    }
    Ok(RealSeries {
        times: s.times.clone(),
        values: s.values.iter().map(|z| 2.0 * (1.0 - z.re)).collect(),
    })
}
