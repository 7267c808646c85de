//! Spectral decomposition, thermal states and time evolution.

use std::sync::Arc;

use faer::{c64, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, real_matvec};
use crate::models::{
    build_hamiltonian, max_asymmetry, Basis, DenseBudget, HamiltonianMatrix, ModelSpec,
    OperatorMatrix,
};

/// Absolute Hermiticity tolerance (max-element) accepted by [`eigendecompose`].
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// as columns. Both models are real symmetric, so `U` is real orthogonal.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<f64>,
    pub basis: Basis,
    pub spec: Option<ModelSpec>,
}

impl SpectralData {
    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `E_max - E_min`.
    pub fn spectral_width(&self) -> f64 {
        self.eigenvalues[self.dimension() - 1] - self.eigenvalues[0]
    }

    /// Max-element norm of `U diag(E) Uᵀ - H`.
    pub fn reconstruction_residual(&self, h: MatRef<'_, f64>) -> f64 {
        let u = self.eigenvectors.as_ref();
        let n = self.dimension();
        let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * self.eigenvalues[j]);
        let mut r = linalg::mul(scaled.as_ref(), u.transpose());
        r -= h;
        linalg::max_abs(r.as_ref())
    }

    /// Max-element norm of `UᵀU - 1`.
    pub fn orthogonality_residual(&self) -> f64 {
        let u = self.eigenvectors.as_ref();
        let mut g = linalg::mul(u.transpose(), u);
        for i in 0..self.dimension() {
            g[(i, i)] -= 1.0;
        }
        linalg::max_abs(g.as_ref())
    }
}

/// Diagonalize a model Hamiltonian.
pub fn eigendecompose(h: &HamiltonianMatrix) -> Result<SpectralData> {
    eigendecompose_matrix(h.matrix.as_ref(), h.basis, Some(h.spec.clone()))
}

/// Diagonalize a real symmetric matrix. Each eigenvector is signed so its
/// largest-magnitude component is positive, the earliest index winning ties.
pub fn eigendecompose_matrix(
    h: MatRef<'_, f64>,
    basis: Basis,
    spec: Option<ModelSpec>,
) -> Result<SpectralData> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.ncols(),
        });
    }
    if n != basis.dimension() {
        return Err(Error::DimensionMismatch {
            expected: basis.dimension(),
            found: n,
        });
    }
    let asym = max_asymmetry(h);
    if asym > HERMITICITY_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
    let s = evd.S().column_vector();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| s[k]).collect();
    if eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let mut eigenvectors = Mat::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.col(src);
        let peak = (0..n).map(|i| col[i].abs()).fold(0.0, f64::max);
        let pivot = (0..n)
            .find(|&i| col[i].abs() >= peak * (1.0 - 1e-10))
            .unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[(i, dst)] = sign * col[i];
        }
    }
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        basis,
        spec,
    })
}

/// Knobs for thermal-state preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsOptions {
    /// Levels within this distance of `E_0` form the ground space at `T = 0`.
    pub degeneracy_tol: f64,
    /// Boltzmann weights below this fraction of the largest are dropped.
    pub weight_cutoff: f64,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            degeneracy_tol: 1e-10,
            weight_cutoff: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    /// Normalized vector in the model's computational basis.
    Pure(Vec<c64>),
    /// Density matrix diagonal in the eigenbasis; `weights[n]` belongs to
    /// the `n`-th eigenvalue.
    Thermal { temperature: f64, weights: Vec<f64> },
}

impl QuantumState {
    pub fn pure(v: Vec<c64>) -> Result<Self> {
        let nrm = norm(&v);
        if (nrm - 1.0).abs() > 1e-12 {
            return Err(Error::Unnormalized(nrm));
        }
        Ok(QuantumState::Pure(v))
    }

    pub fn temperature(&self) -> Option<f64> {
        match self {
            QuantumState::Pure(_) => None,
            QuantumState::Thermal { temperature, .. } => Some(*temperature),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Thermal { weights, .. } => weights.len(),
        }
    }

    /// Indices of eigenlevels with non-zero weight (thermal states only).
    pub fn support(&self) -> Vec<usize> {
        match self {
            QuantumState::Pure(_) => Vec::new(),
            QuantumState::Thermal { weights, .. } => (0..weights.len())
                .filter(|&k| weights[k] > 0.0)
                .collect(),
        }
    }
}

pub fn gibbs_state(sd: &SpectralData, temperature: f64) -> Result<QuantumState> {
    gibbs_state_with(sd, temperature, &GibbsOptions::default())
}

/// Boltzmann weights `exp(-(E_n - E_0)/T)/Z`. At `T = 0` the state is the
/// uniform mixture over the (near-)degenerate ground space.
pub fn gibbs_state_with(
    sd: &SpectralData,
    temperature: f64,
    opts: &GibbsOptions,
) -> Result<QuantumState> {
    if temperature.is_nan() || temperature < 0.0 {
        return Err(Error::NegativeTemperature(temperature));
    }
    let e0 = sd.ground_energy();
    let mut weights: Vec<f64> = if temperature == 0.0 {
        sd.eigenvalues
            .iter()
            .map(|&e| if e - e0 <= opts.degeneracy_tol { 1.0 } else { 0.0 })
            .collect()
    } else {
        sd.eigenvalues
            .iter()
            .map(|&e| {
                let w = (-(e - e0) / temperature).exp();
                if w < opts.weight_cutoff {
                    0.0
                } else {
                    w
                }
            })
            .collect()
    };
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(QuantumState::Thermal {
        temperature,
        weights,
    })
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `⟨O⟩` in the given state.
pub fn expectation(sd: &SpectralData, state: &QuantumState, op: &OperatorMatrix) -> Result<c64> {
    check_dim(sd.dimension(), op.dimension())?;
    check_dim(sd.dimension(), state.dimension())?;
    match state {
        QuantumState::Pure(v) => Ok(dot(v, &linalg::op_matvec(op, v))),
        QuantumState::Thermal { weights, .. } => {
            let u = sd.eigenvectors.as_ref();
            let mut acc = c64::new(0.0, 0.0);
            for (k, &p) in weights.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let col: Vec<c64> = (0..sd.dimension()).map(|i| c64::new(u[(i, k)], 0.0)).collect();
                acc += p * dot(&col, &linalg::op_matvec(op, &col));
            }
            Ok(acc)
        }
    }
}

/// `cos(E t)` and `sin(E t)` for every level.
pub(crate) fn phases(eigenvalues: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    eigenvalues.iter().map(|&e| ((e * t).cos(), (e * t).sin())).unzip()
}

/// `D Ã D†` with `D = diag(e^{iE t})`, for an operator already expressed in
/// the eigenbasis. Always returns a matrix with an imaginary part.
pub(crate) fn evolve_in_eigenbasis(a: &OperatorMatrix, eigenvalues: &[f64], t: f64) -> OperatorMatrix {
    let n = a.dimension();
    let (c, s) = phases(eigenvalues, t);
    let mut re = Mat::<f64>::zeros(n, n);
    let mut im = Mat::<f64>::zeros(n, n);
    for l in 0..n {
        for m in 0..n {
            // e^{i(E_m - E_l)t}
            let pc = c[m] * c[l] + s[m] * s[l];
            let ps = s[m] * c[l] - c[m] * s[l];
            let ar = a.re[(m, l)];
            let ai = a.im.as_ref().map_or(0.0, |x| x[(m, l)]);
            re[(m, l)] = ar * pc - ai * ps;
            im[(m, l)] = ar * ps + ai * pc;
        }
    }
    OperatorMatrix { re, im: Some(im) }
}

/// `O(t) = e^{iHt} O e^{-iHt}` in the computational basis.
pub fn heisenberg_operator(sd: &SpectralData, op: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    check_dim(sd.dimension(), op.dimension())?;
    if t == 0.0 {
        return Ok(op.clone());
    }
    let u = sd.eigenvectors.as_ref();
    let a = linalg::to_eigenbasis(u, op);
    Ok(linalg::from_eigenbasis(u, &evolve_in_eigenbasis(&a, &sd.eigenvalues, t)))
}

/// `e^{-iHt} ψ` through the eigenbasis.
pub fn propagate(sd: &SpectralData, psi: &[c64], t: f64) -> Result<Vec<c64>> {
    check_dim(sd.dimension(), psi.len())?;
    let u = sd.eigenvectors.as_ref();
    let mut coeffs = real_matvec(u.transpose(), psi);
    for (x, &e) in coeffs.iter_mut().zip(&sd.eigenvalues) {
        *x *= c64::new((e * t).cos(), -(e * t).sin());
    }
    Ok(real_matvec(u, &coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    /// Bound on the local error estimate accepted per sub-step.
    pub tolerance: f64,
    /// Cap on the number of sub-steps (including rejected halvings).
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_substeps: 10_000,
        }
    }
}

pub fn krylov_propagate(h: &HamiltonianMatrix, v: &[c64], dt: f64, m: usize) -> Result<Vec<c64>> {
    krylov_propagate_with(h.matrix.as_ref(), v, dt, m, &KrylovOptions::default())
}

struct Lanczos {
    basis: Vec<Vec<c64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last vector; zero on breakdown.
    tail: f64,
}

fn lanczos(h: MatRef<'_, f64>, start: &[c64], m: usize) -> Lanczos {
    let n = start.len();
    let depth = m.min(n);
    let nrm = norm(start);
    let mut basis = vec![start.iter().map(|x| x / nrm).collect::<Vec<_>>()];
    let mut alpha = Vec::with_capacity(depth);
    let mut beta = Vec::with_capacity(depth);
    let mut tail = 0.0;
    for j in 0..depth {
        let mut w = real_matvec(h, &basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization, done twice for stability
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        let scale = a.abs() + beta.last().copied().unwrap_or(0.0) + 1.0;
        if b <= 1e-13 * scale {
            tail = 0.0;
            break;
        }
        if j + 1 == depth {
            tail = b;
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Lanczos {
        basis,
        alpha,
        beta,
        tail,
    }
}

/// `exp(-i T τ) e_1` for the Lanczos tridiagonal `T`.
fn tridiagonal_exp(eigs: &[f64], q: MatRef<'_, f64>, tau: f64) -> Vec<c64> {
    let k = eigs.len();
    let mut y = vec![c64::new(0.0, 0.0); k];
    for (j, &theta) in eigs.iter().enumerate() {
        let c = q[(0, j)] * c64::new((theta * tau).cos(), -(theta * tau).sin());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += q[(i, j)] * c;
        }
    }
    y
}

/// `e^{-iH dt} v` by Lanczos with adaptive sub-stepping. Each sub-step is
/// accepted once `β_m |[e^{-iT_m τ} e_1]_m|` falls below the tolerance;
/// otherwise τ is halved against the same Krylov basis.
pub fn krylov_propagate_with(
    h: MatRef<'_, f64>,
    v: &[c64],
    dt: f64,
    m: usize,
    opts: &KrylovOptions,
) -> Result<Vec<c64>> {
    check_dim(h.nrows(), v.len())?;
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "Krylov dimension must be at least 2, got {m}"
        )));
    }
    if !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step {dt} is not finite")));
    }
    let nrm = norm(v);
    if (nrm - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized(nrm));
    }
    let mut w = v.to_vec();
    if dt == 0.0 {
        return Ok(w);
    }
    let mut remaining = dt;
    let mut substeps = 0usize;
    while remaining != 0.0 {
        let lz = lanczos(h, &w, m);
        let k = lz.alpha.len();
        let t = Mat::from_fn(k, k, |i, j| {
            if i == j {
                lz.alpha[i]
            } else if i == j + 1 {
                lz.beta[j]
            } else if j == i + 1 {
                lz.beta[i]
            } else {
                0.0
            }
        });
        let evd = t.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
        let theta: Vec<f64> = (0..k).map(|i| evd.S().column_vector()[i]).collect();
        let q = evd.U();

        let mut tau = remaining;
        let y = loop {
            substeps += 1;
            if substeps > opts.max_substeps {
                return Err(Error::KrylovNonConvergence(opts.max_substeps));
            }
            let y = tridiagonal_exp(&theta, q, tau);
            if lz.tail * y[k - 1].norm() <= opts.tolerance {
                break y;
            }
            tau /= 2.0;
        };
        let scale = norm(&w);
        let mut next = vec![c64::new(0.0, 0.0); w.len()];
        for (qj, &yj) in lz.basis.iter().zip(&y) {
            let c = yj * scale;
            next.iter_mut().zip(qj).for_each(|(x, b)| *x += c * b);
        }
        w = next;
        remaining = if tau == remaining { 0.0 } else { remaining - tau };
    }
    Ok(w)
}

/// Anything that can hand out the spectral decomposition of a model.
pub trait SpectralSource: Sync {
    fn spectral(&self, spec: &ModelSpec) -> Result<Arc<SpectralData>>;
}

/// Builds and diagonalizes on every request.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectSource {
    pub budget: DenseBudget,
}

impl SpectralSource for DirectSource {
    fn spectral(&self, spec: &ModelSpec) -> Result<Arc<SpectralData>> {
        let h = build_hamiltonian(spec, &self.budget)?;
        Ok(Arc::new(eigendecompose(&h)?))
    }
}
