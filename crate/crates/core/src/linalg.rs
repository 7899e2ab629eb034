//! Thin dense linear algebra layer over `faer`.
//!
//! Per-mode matrices are small (at most a few hundred rows), so everything
//! here is dense and allocation-happy.

use faer::linalg::solvers::{DenseSolveCore, PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

/// Pivot ratio below which a factorization is treated as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn matvec(a: &CMat, x: &[C64]) -> Vec<C64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut y = vec![C64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

/// Real matrix (row-major `n x n`) applied to a complex vector.
pub fn real_matvec(a: &[f64], n: usize, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); n];
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        let mut acc = C64::new(0.0, 0.0);
        for (aij, xj) in row.iter().zip(x) {
            acc += xj * *aij;
        }
        *yi = acc;
    }
    y
}

pub struct DenseLu {
    lu: PartialPivLu<C64>,
    n: usize,
}

impl DenseLu {
    /// Factor `a`; `None` when the pivots indicate numerical singularity.
    pub fn factor(a: &CMat) -> Option<Self> {
        let n = a.nrows();
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let mut max_piv = 0.0f64;
        let mut min_piv = f64::INFINITY;
        for i in 0..n {
            let p = u[(i, i)].norm();
            max_piv = max_piv.max(p);
            min_piv = min_piv.min(p);
        }
        if !(max_piv.is_finite() && min_piv.is_finite()) || min_piv <= SINGULAR_PIVOT_RATIO * max_piv {
            return None;
        }
        Some(Self { lu, n })
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn inverse(&self) -> CMat {
        self.lu.inverse()
    }
}

/// Eigen-decomposition `A = V diag(values) V^{-1}` of a general complex matrix.
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMat,
    pub inverse: CMat,
    /// Frobenius-norm condition estimate `|V| |V^{-1}|`.
    pub condition: f64,
}

pub fn eigen(a: &CMat) -> Result<EigenDecomposition> {
    let n = a.nrows();
    let evd = a.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<C64> = (0..n).map(|i| s[i]).collect();
    order.sort_by(|&i, &j| {
        raw[i]
            .re
            .partial_cmp(&raw[j].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(raw[i].im.partial_cmp(&raw[j].im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let values: Vec<C64> = order.iter().map(|&i| raw[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    let lu = DenseLu::factor(&vectors).ok_or_else(|| Error::Eigen("defective eigenvector basis".into()))?;
    let inverse = lu.inverse();
    let condition = frobenius(&vectors) * frobenius(&inverse) / n as f64;
    Ok(EigenDecomposition {
        values,
        vectors,
        inverse,
        condition,
    })
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Solve a small real system `a x = b` (row-major `a`).
pub fn real_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let lu = m.partial_piv_lu();
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}
