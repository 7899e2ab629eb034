//! Per-mode operators on the unit disk.
//!
//! After Fourier transforming in `theta`, the vector Laplacian with the
//! Navier-type conditions splits into a coupled planar block acting on
//! `(v^r, v^theta)` and a scalar Neumann block acting on `v^z`. Both are
//! assembled as dense collocation matrices whose last row per unknown is
//! replaced by the boundary condition at `r = 1`.

use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::mode_gradient;
use crate::error::{Error, Result};
use crate::grid::{Parity, SpectralGrid};
use crate::linalg::{eigen, matvec, CMat, DenseLu, EigenDecomposition, C64};
use crate::norms::mode_norm;
use crate::rng::Stream;
use crate::sampling::random_mode_profiles;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Planar vector Laplacian with `v^r = 0`, `d_r v^theta + v^theta = 0`.
    B1Coupled,
    /// Scalar Laplacian with `d_r w = 0`.
    B2Scalar,
    /// Scalar Neumann Laplacian used for pressure-type potentials; at `m = 0`
    /// and zero shift the solution is pinned to zero mean.
    NeumannPoisson,
}

impl OperatorKind {
    pub fn label(self) -> &'static str {
        match self {
            OperatorKind::B1Coupled => "b1_coupled",
            OperatorKind::B2Scalar => "b2_scalar",
            OperatorKind::NeumannPoisson => "neumann_poisson",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModeOperator {
    kind: OperatorKind,
    m: i64,
    grid: Arc<SpectralGrid>,
    matrix: CMat,
    bc_rows: Vec<usize>,
}

/// Solution of one bordered system.
#[derive(Clone, Debug)]
pub struct ModeSolve {
    pub values: Vec<C64>,
    /// `|M x - b|_2 / |b|_2` of the assembled system.
    pub residual: f64,
}

/// Interior operator with the boundary unknowns eliminated:
/// `u_b = slave * u_I`, `L_red = L_II + L_Ib slave`.
#[derive(Clone, Debug)]
pub struct ReducedOperator {
    pub matrix: CMat,
    pub slave: CMat,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub size: usize,
}

impl ReducedOperator {
    /// Full profile vector from interior values, boundary values slaved.
    pub fn lift(&self, interior_values: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.size];
        for (v, &i) in interior_values.iter().zip(&self.interior) {
            out[i] = *v;
        }
        let b = matvec(&self.slave, interior_values);
        for (v, &i) in b.iter().zip(&self.boundary) {
            out[i] = *v;
        }
        out
    }

    pub fn restrict(&self, full: &[C64]) -> Vec<C64> {
        self.interior.iter().map(|&i| full[i]).collect()
    }
}

fn laplace_block(grid: &SpectralGrid, parity: Parity, m: i64, extra_diag: f64) -> Vec<f64> {
    // -(d_rr + d_r / r - m^2 / r^2) + extra / r^2 on the collocation nodes
    let n = grid.n_r();
    let d1 = grid.diff(parity);
    let d0 = grid.diff(parity.flip());
    let r = grid.radial_nodes();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let mut d2 = 0.0;
            for j in 0..n {
                d2 += d0[i * n + j] * d1[j * n + k];
            }
            a[i * n + k] = -(d2 + d1[i * n + k] / r[i]);
        }
        a[i * n + i] += ((m * m) as f64 + extra_diag) / (r[i] * r[i]);
    }
    a
}

impl ModeOperator {
    pub fn assemble(kind: OperatorKind, m: i64, grid: &Arc<SpectralGrid>) -> Result<Self> {
        let limit = grid.n_theta() as i64 / 2;
        if m.abs() > limit {
            return Err(Error::OutOfBand { m, limit });
        }
        let n = grid.n_r();
        let b = n - 1;
        let (matrix, bc_rows) = match kind {
            OperatorKind::B2Scalar | OperatorKind::NeumannPoisson => {
                let parity = Parity::of(m);
                let lap = laplace_block(grid, parity, m, 0.0);
                let d = grid.diff(parity);
                let mat = Mat::from_fn(n, n, |i, k| {
                    let v = if i == b { d[b * n + k] } else { lap[i * n + k] };
                    C64::new(v, 0.0)
                });
                (mat, vec![b])
            }
            OperatorKind::B1Coupled => {
                let parity = Parity::of(m + 1);
                let lap = laplace_block(grid, parity, m, 1.0);
                let d = grid.diff(parity);
                let r = grid.radial_nodes();
                let mut mat = Mat::<C64>::zeros(2 * n, 2 * n);
                for i in 0..b {
                    for k in 0..n {
                        mat[(i, k)] = C64::new(lap[i * n + k], 0.0);
                        mat[(n + i, n + k)] = C64::new(lap[i * n + k], 0.0);
                    }
                    let c = 2.0 * m as f64 / (r[i] * r[i]);
                    mat[(i, n + i)] = C64::new(0.0, c);
                    mat[(n + i, i)] = C64::new(0.0, -c);
                }
                mat[(b, b)] = C64::new(1.0, 0.0);
                for k in 0..n {
                    mat[(n + b, n + k)] = C64::new(d[b * n + k], 0.0);
                }
                mat[(n + b, n + b)] += C64::new(1.0, 0.0);
                (mat, vec![b, n + b])
            }
        };
        Ok(Self {
            kind,
            m,
            grid: Arc::clone(grid),
            matrix,
            bc_rows,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }
    pub fn m(&self) -> i64 {
        self.m
    }
    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn bc_row_indices(&self) -> &[usize] {
        &self.bc_rows
    }
    pub fn n_unknown_profiles(&self) -> usize {
        self.size() / self.grid.n_r()
    }

    pub fn interior_rows(&self) -> Vec<usize> {
        (0..self.size()).filter(|i| !self.bc_rows.contains(i)).collect()
    }

    /// `mu + L` on interior rows, boundary rows unchanged.
    pub fn shifted(&self, mu: C64) -> CMat {
        let mut a = self.matrix.clone();
        for i in self.interior_rows() {
            a[(i, i)] += mu;
        }
        a
    }

    fn collision(&self, mu: C64) -> Error {
        Error::SpectralCollision {
            m: self.m,
            k: 0,
            mu_re: mu.re,
            mu_im: mu.im,
        }
    }

    /// Solve `(mu + L) x = rhs` with homogeneous boundary rows.
    pub fn resolve(&self, mu: C64, rhs: &[C64]) -> Result<ModeSolve> {
        let zeros = vec![ZERO; self.bc_rows.len()];
        self.resolve_with_boundary(mu, rhs, &zeros)
    }

    /// Solve with boundary rows set to `boundary` (in `bc_row_indices` order).
    pub fn resolve_with_boundary(&self, mu: C64, rhs: &[C64], boundary: &[C64]) -> Result<ModeSolve> {
        let n = self.size();
        if rhs.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        if rhs.iter().chain(boundary).any(|v| !(v.re.is_finite() && v.im.is_finite())) || !(mu.re.is_finite() && mu.im.is_finite()) {
            return Err(Error::NonFinite("mode right-hand side"));
        }
        let mut b = rhs.to_vec();
        for (&i, v) in self.bc_rows.iter().zip(boundary) {
            b[i] = *v;
        }
        if self.kind == OperatorKind::NeumannPoisson && self.m == 0 && mu.norm() == 0.0 {
            return self.pinned_neumann(&b, true);
        }
        let mut a = self.shifted(mu);
        // large shifts: rescale interior rows so the pivot test stays meaningful
        let s = mu.norm().max(1.0);
        if s > 1.0 {
            for i in self.interior_rows() {
                for j in 0..n {
                    a[(i, j)] /= s;
                }
                b[i] /= s;
            }
        }
        let lu = DenseLu::factor(&a).ok_or_else(|| self.collision(mu))?;
        let x = lu.solve(&b);
        let residual = relative_residual(&a, &x, &b);
        if !x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(self.collision(mu));
        }
        Ok(ModeSolve { values: x, residual })
    }

    /// Zero-shift `m = 0` Neumann problem. When `strict`, data violating the
    /// compatibility `int h r dr + g = 0` is rejected; otherwise the
    /// incompatible part is absorbed by the constant Lagrange multiplier.
    pub fn pinned_neumann(&self, b: &[C64], strict: bool) -> Result<ModeSolve> {
        let n = self.grid.n_r();
        let w = self.grid.radial_quad_weights();
        let bc = self.bc_rows[0];
        if strict {
            let mut s = b[bc];
            let mut scale = b[bc].norm();
            for i in 0..n {
                if i != bc {
                    s += b[i] * w[i];
                    scale += b[i].norm() * w[i];
                }
            }
            // the boundary node's interior equation is replaced, so its
            // quadrature share is taken from the neighbouring data
            s += b[bc - 1] * w[bc];
            scale += b[bc - 1].norm() * w[bc];
            let defect = s.norm() / scale.max(f64::MIN_POSITIVE);
            if defect > 1e-8 {
                return Err(Error::ZeroMeanViolated { defect });
            }
        }
        let a = self.pinned_matrix();
        let mut rhs = b.to_vec();
        rhs.push(ZERO);
        let lu = DenseLu::factor(&a).ok_or_else(|| self.collision(ZERO))?;
        let mut x = lu.solve(&rhs);
        let residual = relative_residual(&a, &x, &rhs);
        x.truncate(n);
        Ok(ModeSolve { values: x, residual })
    }

    /// Bordered zero-shift matrix `[L e; w^T 0]`: `e` carries a constant
    /// multiplier on the interior rows, `w^T` pins the weighted mean to zero.
    pub fn pinned_matrix(&self) -> CMat {
        let n = self.grid.n_r();
        let w = self.grid.radial_quad_weights();
        let bc = self.bc_rows[0];
        let mut a = Mat::<C64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for k in 0..n {
                a[(i, k)] = self.matrix[(i, k)];
            }
            if i != bc {
                a[(i, n)] = C64::new(1.0, 0.0);
            }
            a[(n, i)] = C64::new(w[i], 0.0);
        }
        a
    }

    pub fn reduce(&self) -> Result<ReducedOperator> {
        let interior = self.interior_rows();
        let boundary = self.bc_rows.clone();
        let (ni, nb) = (interior.len(), boundary.len());
        let cb = Mat::from_fn(nb, nb, |i, j| self.matrix[(boundary[i], boundary[j])]);
        let lu = DenseLu::factor(&cb).ok_or_else(|| Error::Precondition("boundary rows are singular".into()))?;
        let cb_inv = lu.inverse();
        let ci = Mat::from_fn(nb, ni, |i, j| self.matrix[(boundary[i], interior[j])]);
        let slave = -(&cb_inv * &ci);
        let lii = Mat::from_fn(ni, ni, |i, j| self.matrix[(interior[i], interior[j])]);
        let lib = Mat::from_fn(ni, nb, |i, j| self.matrix[(interior[i], boundary[j])]);
        let matrix = lii + &lib * &slave;
        Ok(ReducedOperator {
            matrix,
            slave,
            interior,
            boundary,
            size: self.size(),
        })
    }

    /// Eigen-decomposition of the reduced operator, eigenvalues sorted by real part.
    pub fn eigen(&self) -> Result<(ReducedOperator, EigenDecomposition)> {
        let red = self.reduce()?;
        let ev = eigen(&red.matrix)?;
        Ok((red, ev))
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        Ok(self.eigen()?.1.values)
    }

    /// Split a stacked solution into component profiles `[v^r, v^theta]` or `[w]`.
    pub fn split<'a>(&self, x: &'a [C64]) -> Vec<&'a [C64]> {
        x.chunks(self.grid.n_r()).collect()
    }
}

pub fn relative_residual(a: &CMat, x: &[C64], b: &[C64]) -> f64 {
    let ax = matvec(a, x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolventSample {
    pub mu_re: f64,
    pub mu_im: f64,
    /// `|v|_p`, `|grad v|_p`, `|grad^2 v|_p`.
    pub norms: [f64; 3],
    pub rhs_norm: f64,
    /// `|mu| |v| / |g|`, `|mu|^{1/2} |grad v| / |g|`, `|grad^2 v| / |g|`.
    pub ratios: [f64; 3],
    pub residual: f64,
}

impl ResolventSample {
    pub fn mu(&self) -> C64 {
        C64::new(self.mu_re, self.mu_im)
    }
}

fn planar_components(op: &ModeOperator, x: &[C64]) -> Vec<Vec<C64>> {
    let n = op.grid.n_r();
    match op.kind {
        OperatorKind::B1Coupled => vec![x[..n].to_vec(), x[n..].to_vec(), vec![ZERO; n]],
        _ => vec![x.to_vec()],
    }
}

/// Solve one resolvent problem and record the three ratios of the disk estimate.
pub fn measure(op: &ModeOperator, mu: C64, rhs: &[C64], p: f64) -> Result<ResolventSample> {
    let sol = op.resolve(mu, rhs)?;
    let grid = &op.grid;
    let rank = usize::from(op.kind == OperatorKind::B1Coupled);
    let v = planar_components(op, &sol.values);
    let refs: Vec<&[C64]> = v.iter().map(|c| c.as_slice()).collect();
    let g1 = mode_gradient(grid, rank, op.m, 0.0, &refs);
    let refs1: Vec<&[C64]> = g1.iter().map(|c| c.as_slice()).collect();
    let g2 = mode_gradient(grid, rank + 1, op.m, 0.0, &refs1);
    let norms = [mode_norm(grid, &v, p), mode_norm(grid, &g1, p), mode_norm(grid, &g2, p)];
    let rhs_norm = mode_norm(grid, &planar_components(op, rhs), p);
    let a = mu.norm();
    let ratios = [a * norms[0] / rhs_norm, a.sqrt() * norms[1] / rhs_norm, norms[2] / rhs_norm];
    Ok(ResolventSample {
        mu_re: mu.re,
        mu_im: mu.im,
        norms,
        rhs_norm,
        ratios,
        residual: sol.residual,
    })
}

/// Sample points `rho exp(i phi)` with `phi` spread over `(-theta, theta)`.
pub fn sector_points(theta: f64, radii: &[f64], n_angles: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(radii.len() * n_angles);
    for &rho in radii {
        for a in 0..n_angles {
            let phi = theta * (2.0 * (a as f64 + 0.5) / n_angles as f64 - 1.0);
            out.push(C64::from_polar(rho, phi));
        }
    }
    out
}

/// `count` log-spaced radii between `10^lo` and `10^hi`.
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..count)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub samples: Vec<ResolventSample>,
    /// Sample points rejected as numerically singular.
    pub collisions: Vec<(f64, f64)>,
    pub sup: [f64; 3],
}

pub fn summarize(samples: Vec<ResolventSample>, collisions: Vec<(f64, f64)>) -> SweepOutcome {
    let mut sup = [0.0f64; 3];
    for s in &samples {
        for (a, b) in sup.iter_mut().zip(&s.ratios) {
            *a = a.max(*b);
        }
    }
    SweepOutcome { samples, collisions, sup }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Sweep2dSpec {
    pub theta: f64,
    pub p: f64,
    pub trials: usize,
    pub seed: u64,
    /// Remove the weighted mean of scalar data at `m = 0` (orthogonal to the kernel).
    pub zero_mean: bool,
    pub radial_terms: usize,
}

/// Resolvent sweep for one mode operator: for each sector point and trial a
/// random pole-regular right-hand side is drawn from stream `(seed, item)`.
pub fn sector_sweep_2d(op: &ModeOperator, radii: &[f64], n_angles: usize, spec: Sweep2dSpec) -> Result<SweepOutcome> {
    if !(spec.theta > std::f64::consts::FRAC_PI_2 && spec.theta < std::f64::consts::PI) {
        return Err(Error::Precondition(format!("theta = {} must lie in (pi/2, pi)", spec.theta)));
    }
    let points = sector_points(spec.theta, radii, n_angles);
    let items: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..spec.trials).map(move |t| (i, t))).collect();
    let results: Vec<std::result::Result<ResolventSample, (f64, f64)>> = items
        .par_iter()
        .map(|&(i, t)| {
            let mu = points[i];
            let mut stream = Stream::new(spec.seed, (i * spec.trials + t) as u64);
            let rhs = random_rhs(op, spec.radial_terms, spec.zero_mean, &mut stream);
            match measure(op, mu, &rhs, spec.p) {
                Ok(s) => Ok(s),
                Err(Error::SpectralCollision { .. }) => Err((mu.re, mu.im)),
                Err(e) => panic!("unexpected sweep failure: {e}"),
            }
        })
        .collect();
    let mut samples = Vec::new();
    let mut collisions = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(c) => collisions.push(c),
        }
    }
    Ok(summarize(samples, collisions))
}

pub fn random_rhs(op: &ModeOperator, terms: usize, zero_mean: bool, stream: &mut Stream) -> Vec<C64> {
    let grid = &op.grid;
    let planar = op.kind == OperatorKind::B1Coupled;
    let parts = random_mode_profiles(grid, planar, op.m, terms, stream);
    let mut rhs: Vec<C64> = parts.concat();
    if zero_mean && !planar && op.m == 0 {
        let w = grid.radial_quad_weights();
        let mean: C64 = rhs.iter().zip(w).map(|(v, wi)| v * wi).sum::<C64>() / w.iter().sum::<f64>();
        for v in rhs.iter_mut() {
            *v -= mean;
        }
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_j, bessel_j_prime_zeros, bessel_j_zeros};

    fn grid(n_r: usize) -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new(n_r, 8, 4, 1.0).unwrap())
    }

    fn real_sorted(v: &[C64]) -> Vec<f64> {
        let mut r: Vec<f64> = v.iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r
    }

    #[test]
    fn scalar_spectrum_matches_bessel_derivative_roots() {
        let g = grid(48);
        for m in 0..3i64 {
            let ev = ModeOperator::assemble(OperatorKind::B2Scalar, m, &g).unwrap().eigenvalues().unwrap();
            assert!(ev.iter().all(|z| z.im.abs() < 1e-8));
            let ev = real_sorted(&ev);
            let mut expect: Vec<f64> = bessel_j_prime_zeros(m, 5).iter().map(|j| j * j).collect();
            if m == 0 {
                expect.insert(0, 0.0);
                expect.truncate(5);
            }
            for (a, b) in ev.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-8 * b.max(1.0), "m={m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn coupled_spectrum_is_union_of_dirichlet_and_neumann_roots() {
        let g = grid(48);
        for m in 0..3i64 {
            let ev = real_sorted(&ModeOperator::assemble(OperatorKind::B1Coupled, m, &g).unwrap().eigenvalues().unwrap());
            assert!(ev[0] > 0.0);
            let mut expect: Vec<f64> = bessel_j_zeros(m, 5).iter().map(|j| j * j).collect();
            expect.extend(bessel_j_prime_zeros(m, 5).iter().map(|j| j * j));
            expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in ev.iter().zip(expect.iter().take(6)) {
                assert!((a - b).abs() < 1e-8 * b, "m={m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn out_of_band_mode_is_rejected() {
        let g = grid(8);
        assert!(matches!(ModeOperator::assemble(OperatorKind::B2Scalar, 5, &g), Err(Error::OutOfBand { .. })));
    }

    #[test]
    fn constants_solve_shifted_scalar_problem() {
        let g = grid(16);
        let op = ModeOperator::assemble(OperatorKind::B2Scalar, 0, &g).unwrap();
        let sol = op.resolve(C64::new(1.0, 0.0), &vec![C64::new(1.0, 0.0); 16]).unwrap();
        let worst = sol.values.iter().fold(0.0f64, |a, v| a.max((v - 1.0).norm()));
        assert!(worst < 1e-12, "{worst}");
        assert!(sol.residual < 1e-10, "{}", sol.residual);
    }

    #[test]
    fn inverse_on_lowest_coupled_eigenvector() {
        let g = grid(32);
        let op = ModeOperator::assemble(OperatorKind::B1Coupled, 1, &g).unwrap();
        let (red, ev) = op.eigen().unwrap();
        let lam = ev.values[0];
        let jp = bessel_j_prime_zeros(1, 1)[0];
        assert!((lam.re - jp * jp).abs() < 1e-8);
        let e = red.lift(&ev.vectors.col(0).iter().copied().collect::<Vec<_>>());
        let mut rhs = e.clone();
        for &b in op.bc_row_indices() {
            rhs[b] = ZERO;
        }
        let sol = op.resolve(ZERO, &rhs).unwrap();
        for (x, y) in sol.values.iter().zip(&e) {
            assert!((x - y / lam).norm() < 1e-10);
        }
    }

    #[test]
    fn neumann_pinning_and_compatibility() {
        let g = grid(32);
        let op = ModeOperator::assemble(OperatorKind::NeumannPoisson, 0, &g).unwrap();
        let j = bessel_j_prime_zeros(0, 1)[0];
        let rhs: Vec<C64> = g.radial_nodes().iter().map(|&r| C64::new(bessel_j(0, j * r), 0.0)).collect();
        let sol = op.resolve(ZERO, &rhs).unwrap();
        let w = g.radial_quad_weights();
        let mean: C64 = sol.values.iter().zip(w).map(|(v, wi)| v * wi).sum();
        assert!(mean.norm() < 1e-13);
        for (x, y) in sol.values.iter().zip(&rhs) {
            assert!((x - y / (j * j)).norm() < 1e-10);
        }
        let ones = vec![C64::new(1.0, 0.0); 32];
        assert!(matches!(op.resolve(ZERO, &ones), Err(Error::ZeroMeanViolated { .. })));
    }

    #[test]
    fn spectral_collision_is_reported() {
        let g = grid(24);
        let op = ModeOperator::assemble(OperatorKind::B2Scalar, 0, &g).unwrap();
        let rhs = vec![C64::new(1.0, 0.0); 24];
        assert!(matches!(op.resolve(ZERO, &rhs), Err(Error::SpectralCollision { .. })));
    }

    #[test]
    fn resolvent_identity() {
        let g = grid(24);
        let op = ModeOperator::assemble(OperatorKind::B1Coupled, 2, &g).unwrap();
        let mut s = Stream::new(3, 0);
        let mut f = random_rhs(&op, 4, false, &mut s);
        for &b in op.bc_row_indices() {
            f[b] = ZERO;
        }
        let (m1, m2) = (C64::new(2.0, 1.0), C64::new(-1.0, 4.0));
        let r1 = op.resolve(m1, &f).unwrap().values;
        let r2 = op.resolve(m2, &f).unwrap().values;
        let mut r2i = r2.clone();
        for &b in op.bc_row_indices() {
            r2i[b] = ZERO;
        }
        let r12 = op.resolve(m1, &r2i).unwrap().values;
        let scale = r1.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        for i in 0..f.len() {
            let lhs = r1[i] - r2[i];
            let rhs = r12[i] * (m2 - m1);
            assert!((lhs - rhs).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn reduced_operator_is_self_adjoint_in_weighted_product() {
        let g = grid(24);
        for kind in [OperatorKind::B1Coupled, OperatorKind::B2Scalar] {
            let ev = ModeOperator::assemble(kind, 1, &g).unwrap().eigenvalues().unwrap();
            assert!(ev.iter().all(|z| z.im.abs() < 1e-8 * z.re.abs().max(1.0)));
        }
    }

    #[test]
    fn sweep_near_negative_eigenvalue_blows_up() {
        let g = grid(32);
        let op = ModeOperator::assemble(OperatorKind::B2Scalar, 1, &g).unwrap();
        let lam = bessel_j_prime_zeros(1, 1)[0].powi(2);
        let mut s = Stream::new(9, 0);
        let rhs = random_rhs(&op, 3, false, &mut s);
        let near = measure(&op, C64::new(-lam + 1e-3, 0.0), &rhs, 2.0).unwrap();
        let nearer = measure(&op, C64::new(-lam + 1e-5, 0.0), &rhs, 2.0).unwrap();
        assert!(nearer.ratios[0] > 50.0 * near.ratios[0]);
    }

    #[test]
    fn sector_sweep_is_bounded_and_deterministic() {
        let g = grid(16);
        let op = ModeOperator::assemble(OperatorKind::B1Coupled, 0, &g).unwrap();
        let spec = Sweep2dSpec {
            theta: 0.75 * std::f64::consts::PI,
            p: 2.0,
            trials: 2,
            seed: 4,
            zero_mean: false,
            radial_terms: 3,
        };
        let radii = log_radii(-2.0, 2.0, 5);
        let a = sector_sweep_2d(&op, &radii, 4, spec).unwrap();
        let b = sector_sweep_2d(&op, &radii, 4, spec).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(a.sup.iter().all(|s| s.is_finite()));
        assert!(a.collisions.is_empty());
    }
}
