//! Thin wrappers over faer's dense kernels. Everything runs sequentially so
//! results are bit-reproducible regardless of the host.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatMut, MatRef, Par};

use crate::models::OperatorMatrix;

pub(crate) const PAR: Par = Par::Seq;

/// `dst (=|+=) alpha * lhs * rhs`.
pub(crate) fn gemm(
    dst: MatMut<'_, f64>,
    accum: Accum,
    lhs: MatRef<'_, f64>,
    rhs: MatRef<'_, f64>,
    alpha: f64,
) {
    matmul(dst, accum, lhs, rhs, alpha, PAR);
}

pub(crate) fn mul(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(lhs.nrows(), rhs.ncols());
    gemm(out.as_mut(), Accum::Replace, lhs, rhs, 1.0);
    out
}

/// `Uᵀ O U` for a real orthogonal `U`.
pub fn to_eigenbasis(u: MatRef<'_, f64>, op: &OperatorMatrix) -> OperatorMatrix {
    let rotate = |m: &Mat<f64>| mul(u.transpose(), mul(m.as_ref(), u).as_ref());
    OperatorMatrix {
        re: rotate(&op.re),
        im: op.im.as_ref().map(rotate),
    }
}

/// `U O Uᵀ`, the inverse of [`to_eigenbasis`].
pub fn from_eigenbasis(u: MatRef<'_, f64>, op: &OperatorMatrix) -> OperatorMatrix {
    let rotate = |m: &Mat<f64>| mul(u, mul(m.as_ref(), u.transpose()).as_ref());
    OperatorMatrix {
        re: rotate(&op.re),
        im: op.im.as_ref().map(rotate),
    }
}

/// Largest absolute entry.
pub fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].abs());
        }
    }
    worst
}

/// Real matrix times a complex vector.
pub(crate) fn real_matvec(m: MatRef<'_, f64>, v: &[c64]) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); m.nrows()];
    for (j, &x) in v.iter().enumerate() {
        if x.re == 0.0 && x.im == 0.0 {
            continue;
        }
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += x * col[i];
        }
    }
    out
}

/// Split-complex matrix times a complex vector.
pub(crate) fn op_matvec(op: &OperatorMatrix, v: &[c64]) -> Vec<c64> {
    let mut out = real_matvec(op.re.as_ref(), v);
    if let Some(im) = &op.im {
        let i = c64::new(0.0, 1.0);
        for (o, x) in out.iter_mut().zip(real_matvec(im.as_ref(), v)) {
            *o += i * x;
        }
    }
    out
}

pub(crate) fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
