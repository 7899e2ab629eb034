//! Mode-wise solution of `(lambda - Laplacian) u = f` on the cylinder.
//!
//! For each Fourier mode `(m, k)` the planar pair solves the coupled disk
//! problem at shift `lambda + xi_k^2` and the axial component solves the
//! scalar Neumann problem at the same shift.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{gradient, laplacian};
use crate::disk::{ModeOperator, OperatorKind};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::grid::{Parity, SpectralGrid};
use crate::linalg::C64;
use crate::norms::{lp_norm, l2_norm};
use crate::sampling::{random_field, BandLimit};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Assembled disk operators for every angular mode of a grid.
#[derive(Clone, Debug)]
pub struct ModeBank {
    grid: Arc<SpectralGrid>,
    planar: Vec<ModeOperator>,
    scalar: Vec<ModeOperator>,
}

impl ModeBank {
    pub fn new(grid: &Arc<SpectralGrid>) -> Result<Self> {
        let ms = grid.m_values();
        let planar = ms
            .par_iter()
            .map(|&m| ModeOperator::assemble(OperatorKind::B1Coupled, m, grid))
            .collect::<Result<Vec<_>>>()?;
        let scalar = ms
            .par_iter()
            .map(|&m| ModeOperator::assemble(OperatorKind::B2Scalar, m, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: Arc::clone(grid),
            planar,
            scalar,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }
    pub fn planar(&self, im: usize) -> &ModeOperator {
        &self.planar[im]
    }
    pub fn scalar(&self, im: usize) -> &ModeOperator {
        &self.scalar[im]
    }
}

fn tag_mode(e: Error, m: i64, k: i64) -> Error {
    match e {
        Error::SpectralCollision { mu_re, mu_im, .. } => Error::SpectralCollision { m, k, mu_re, mu_im },
        other => other,
    }
}

/// Solve the mode systems for one `(im, ik)` with boundary data per profile
/// (`[v^r(1), d_r v^theta + v^theta, d_r v^z]`).
pub(crate) fn solve_mode(
    bank: &ModeBank,
    lambda: C64,
    f: &SpectralField,
    im: usize,
    ik: usize,
    boundary: [C64; 3],
) -> Result<(Vec<C64>, Vec<C64>, f64)> {
    let g = &bank.grid;
    let n = g.n_r();
    let xi = g.xi_of(ik);
    let mu = lambda + xi * xi;
    let (m, k) = (g.m_of(im), g.k_of(ik));
    let mut rhs_h = Vec::with_capacity(2 * n);
    rhs_h.extend_from_slice(f.profile(0, im, ik));
    rhs_h.extend_from_slice(f.profile(1, im, ik));
    let h = bank
        .planar(im)
        .resolve_with_boundary(mu, &rhs_h, &boundary[..2])
        .map_err(|e| tag_mode(e, m, k))?;
    let z = bank
        .scalar(im)
        .resolve_with_boundary(mu, f.profile(2, im, ik), &boundary[2..])
        .map_err(|e| tag_mode(e, m, k))?;
    Ok((h.values, z.values, h.residual.max(z.residual)))
}

#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub u: SpectralField,
    /// Largest relative residual of the per-mode linear systems.
    pub mode_residual: f64,
}

pub fn solve_resolvent(bank: &ModeBank, lambda: C64, f: &SpectralField) -> Result<ResolventSolution> {
    solve_with_boundary(bank, lambda, f, None)
}

/// Resolvent solve with optional per-mode boundary data (a vector field whose
/// `r`, `theta`, `z` profiles at `r = 1` hold the three boundary values).
pub(crate) fn solve_with_boundary(
    bank: &ModeBank,
    lambda: C64,
    f: &SpectralField,
    boundary: Option<&SpectralField>,
) -> Result<ResolventSolution> {
    f.require(FieldKind::Vector3)?;
    f.check_finite("resolvent right-hand side")?;
    let g = Arc::clone(f.grid());
    if *g != **bank.grid() {
        return Err(Error::GridMismatch);
    }
    let n = g.n_r();
    let last = n - 1;
    let modes: Vec<(usize, usize)> = (0..g.n_theta())
        .flat_map(|im| (0..g.n_z()).map(move |ik| (im, ik)))
        .filter(|&(im, ik)| !g.is_nyquist(im, ik))
        .collect();
    let solved = modes
        .par_iter()
        .map(|&(im, ik)| {
            let bc = match boundary {
                Some(b) => [b.profile(0, im, ik)[last], b.profile(1, im, ik)[last], b.profile(2, im, ik)[last]],
                None => [ZERO; 3],
            };
            solve_mode(bank, lambda, f, im, ik, bc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut u = SpectralField::zeros(FieldKind::Vector3, &g);
    let mut mode_residual = 0.0f64;
    for (&(im, ik), (h, z, res)) in modes.iter().zip(solved) {
        u.profile_mut(0, im, ik).copy_from_slice(&h[..n]);
        u.profile_mut(1, im, ik).copy_from_slice(&h[n..]);
        u.profile_mut(2, im, ik).copy_from_slice(&z);
        mode_residual = mode_residual.max(res);
    }
    Ok(ResolventSolution { u, mode_residual })
}

/// Zero the boundary-node samples, which carry boundary data rather than
/// equation values.
pub fn interior_only(field: &SpectralField) -> SpectralField {
    let mut out = field.clone();
    let g = Arc::clone(field.grid());
    let last = g.n_r() - 1;
    for c in 0..out.n_components() {
        for im in 0..g.n_theta() {
            for ik in 0..g.n_z() {
                out.profile_mut(c, im, ik)[last] = ZERO;
            }
        }
    }
    out
}

/// `|(lambda - Laplacian) u - f|_2 / |f|_2` over the interior nodes,
/// computed with the field calculus rather than the mode matrices.
pub fn resolvent_residual(lambda: C64, u: &SpectralField, f: &SpectralField) -> Result<f64> {
    let lap = laplacian(u);
    let mut r = u.map(|v| v * lambda).sub(&lap)?.sub(f)?;
    r = interior_only(&r);
    let denom = l2_norm(&interior_only(f)).max(f64::MIN_POSITIVE);
    Ok(l2_norm(&r) / denom)
}

/// Largest violation of `u^r = 0`, `d_r u^theta + u^theta = 0`, `d_r u^z = 0` at `r = 1`.
pub fn boundary_defect(u: &SpectralField) -> f64 {
    let g = u.grid();
    let n = g.n_r();
    let last = n - 1;
    let mut worst = 0.0f64;
    for im in 0..g.n_theta() {
        let m = g.m_of(im);
        let dp = g.diff(Parity::of(m + 1));
        let ds = g.diff(Parity::of(m));
        for ik in 0..g.n_z() {
            let ur = u.profile(0, im, ik);
            let ut = u.profile(1, im, ik);
            let uz = u.profile(2, im, ik);
            let dut: C64 = (0..n).map(|k| ut[k] * dp[last * n + k]).sum();
            let duz: C64 = (0..n).map(|k| uz[k] * ds[last * n + k]).sum();
            worst = worst.max(ur[last].norm()).max((dut + ut[last]).norm()).max(duz.norm());
        }
    }
    worst
}

/// `|lambda| / |lambda + xi^2|`, checked against `max(1, 1/|sin theta|)`.
pub fn scalar_symbol_bound(lambda: C64, xi: f64, theta: f64) -> Result<f64> {
    if lambda.norm() == 0.0 {
        return Err(Error::Precondition("lambda = 0".into()));
    }
    if lambda.arg().abs() >= theta {
        return Err(Error::Precondition(format!("arg lambda = {} outside the sector", lambda.arg())));
    }
    let ratio = lambda.norm() / (lambda + xi * xi).norm();
    let bound = (1.0f64).max(1.0 / theta.sin().abs());
    if ratio > bound * (1.0 + 1e-15) {
        return Err(Error::Precondition(format!("symbol ratio {ratio} exceeds {bound}")));
    }
    Ok(ratio)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Sweep3dRow {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub trial: usize,
    pub ratios: [f64; 3],
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorSweep {
    pub theta: f64,
    pub p: f64,
    pub rows: Vec<Sweep3dRow>,
    pub collisions: Vec<(f64, f64)>,
    pub sup: [f64; 3],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Sweep3dSpec {
    pub theta: f64,
    pub p: f64,
    pub trials: usize,
    pub seed: u64,
    pub band: BandLimit,
    /// Remove the kernel (constant axial) component from the data.
    pub kernel_free: bool,
}

/// Subtract the weighted mean of `f^z` in the `(0, 0)` mode.
pub fn remove_kernel_component(f: &SpectralField) -> SpectralField {
    let g = Arc::clone(f.grid());
    let mut out = f.clone();
    let (im, ik) = (g.index_of_m(0).unwrap(), g.index_of_k(0).unwrap());
    let w = g.radial_quad_weights();
    let comp = if f.kind() == FieldKind::Scalar { 0 } else { 2 };
    let p = out.profile_mut(comp, im, ik);
    let mean: C64 = p.iter().zip(w).map(|(v, wi)| v * wi).sum::<C64>() / w.iter().sum::<f64>();
    for v in p.iter_mut() {
        *v -= mean;
    }
    out
}

/// Three resolvent ratios for one right-hand side.
pub fn resolvent_ratios(bank: &ModeBank, lambda: C64, f: &SpectralField, p: f64) -> Result<([f64; 3], f64)> {
    let sol = solve_resolvent(bank, lambda, f)?;
    let g1 = gradient(&sol.u);
    let g2 = gradient(&g1);
    let nf = lp_norm(f, p)?;
    let a = lambda.norm();
    let ratios = [
        a * lp_norm(&sol.u, p)? / nf,
        a.sqrt() * lp_norm(&g1, p)? / nf,
        lp_norm(&g2, p)? / nf,
    ];
    Ok((ratios, sol.mode_residual))
}

pub fn sector_sweep_3d(bank: &ModeBank, lambdas: &[C64], spec: Sweep3dSpec) -> Result<SectorSweep> {
    if !(spec.theta > std::f64::consts::FRAC_PI_2 && spec.theta < std::f64::consts::PI) {
        return Err(Error::Precondition(format!("theta = {} must lie in (pi/2, pi)", spec.theta)));
    }
    let g = bank.grid();
    let data: Vec<SpectralField> = (0..spec.trials)
        .map(|t| {
            let f = random_field(FieldKind::Vector3, g, spec.band, spec.seed, t as u64);
            if spec.kernel_free {
                remove_kernel_component(&f)
            } else {
                f
            }
        })
        .collect();
    let items: Vec<(usize, usize)> = (0..lambdas.len()).flat_map(|i| (0..spec.trials).map(move |t| (i, t))).collect();
    let results: Vec<std::result::Result<Sweep3dRow, (f64, f64)>> = items
        .par_iter()
        .map(|&(i, t)| {
            let lambda = lambdas[i];
            match resolvent_ratios(bank, lambda, &data[t], spec.p) {
                Ok((ratios, residual)) => Ok(Sweep3dRow {
                    lambda_re: lambda.re,
                    lambda_im: lambda.im,
                    trial: t,
                    ratios,
                    residual,
                }),
                Err(Error::SpectralCollision { .. }) => Err((lambda.re, lambda.im)),
                Err(e) => panic!("unexpected sweep failure: {e}"),
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut collisions = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(c) => collisions.push(c),
        }
    }
    let mut sup = [0.0f64; 3];
    for row in &rows {
        for (s, v) in sup.iter_mut().zip(&row.ratios) {
            *s = s.max(*v);
        }
    }
    Ok(SectorSweep {
        theta: spec.theta,
        p: spec.p,
        rows,
        collisions,
        sup,
    })
}
