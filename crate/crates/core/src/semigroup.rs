//! Functions of the Laplace operator `B` (with the Navier-type conditions)
//! through per-mode eigendecompositions, and the Stokes semigroup
//! `e^{-tA} = P e^{-tB} P`.
//!
//! For mode `(m, k)` the eigenvalues are `sigma_{m,j} + xi_k^2`, where
//! `sigma_{m,j}` are the eigenvalues of the reduced planar or scalar disk
//! operator, so one decomposition per angular mode serves every axial mode.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{divergence, gradient_power};
use crate::disk::{ModeOperator, OperatorKind, ReducedOperator};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::fit::{fit_power_law, PowerFit};
use crate::grid::SpectralGrid;
use crate::helmholtz::Projector;
use crate::linalg::{eigen, matvec, CMat, C64};
use crate::norms::lp_norm;
use crate::resolvent::ModeBank;
use crate::rng::Stream;

/// Eigenvalues below this modulus are the constant kernel of the scalar block.
pub const KERNEL_TOLERANCE: f64 = 1e-10;

/// Condition number of an eigenvector basis above which a warning is recorded.
pub const CONDITION_WARNING: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct ModeSpectrum {
    pub reduced: ReducedOperator,
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub inverse: CMat,
    pub condition: f64,
}

impl ModeSpectrum {
    fn new(op: &ModeOperator) -> Result<Self> {
        let red = op.reduce()?;
        let ev = eigen(&red.matrix)?;
        let values = ev
            .values
            .iter()
            .map(|z| if z.norm() < KERNEL_TOLERANCE { 0.0 } else { z.re })
            .collect();
        Ok(Self {
            reduced: red,
            values,
            vectors: ev.vectors,
            inverse: ev.inverse,
            condition: ev.condition,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Coordinates of a vector field in the per-mode eigenbases; index
/// `im * n_z + ik`, empty at Nyquist modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Modal {
    pub planar: Vec<Vec<C64>>,
    pub axial: Vec<Vec<C64>>,
}

impl Modal {
    pub fn zeros_like(other: &Modal) -> Self {
        Self {
            planar: other.planar.iter().map(|v| vec![C64::new(0.0, 0.0); v.len()]).collect(),
            axial: other.axial.iter().map(|v| vec![C64::new(0.0, 0.0); v.len()]).collect(),
        }
    }

    pub fn axpy(&mut self, a: C64, x: &Modal) {
        for (u, v) in self.planar.iter_mut().zip(&x.planar).chain(self.axial.iter_mut().zip(&x.axial)) {
            for (p, q) in u.iter_mut().zip(v) {
                *p += a * q;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    /// The Laplace operator on all vector fields.
    B,
    /// The Stokes operator: the Laplace operator composed with `P`.
    A,
}

pub struct SemigroupPlan {
    grid: Arc<SpectralGrid>,
    lambda0: f64,
    planar: Vec<ModeSpectrum>,
    scalar: Vec<ModeSpectrum>,
    projector: Projector,
    bank: ModeBank,
    warnings: Vec<String>,
}

impl SemigroupPlan {
    pub fn new(grid: &Arc<SpectralGrid>, lambda0: f64) -> Result<Self> {
        if !(lambda0 >= 0.0 && lambda0.is_finite()) {
            return Err(Error::Precondition(format!("lambda0 = {lambda0} must be nonnegative")));
        }
        let ms = grid.m_values();
        let build = |kind: OperatorKind| -> Result<Vec<ModeSpectrum>> {
            ms.par_iter()
                .map(|&m| ModeSpectrum::new(&ModeOperator::assemble(kind, m, grid)?))
                .collect()
        };
        let planar = build(OperatorKind::B1Coupled)?;
        let scalar = build(OperatorKind::B2Scalar)?;
        let mut warnings = Vec::new();
        for (label, specs) in [("planar", &planar), ("scalar", &scalar)] {
            for (im, s) in specs.iter().enumerate() {
                if s.condition > CONDITION_WARNING {
                    warnings.push(format!("{label} eigenbasis at m = {} has condition {:.3e}", ms[im], s.condition));
                }
                if s.values.iter().any(|&v| v < -KERNEL_TOLERANCE) {
                    return Err(Error::Eigen(format!("negative eigenvalue in {label} block at m = {}", ms[im])));
                }
            }
        }
        Ok(Self {
            grid: Arc::clone(grid),
            lambda0,
            planar,
            scalar,
            projector: Projector::new(grid)?,
            bank: ModeBank::new(grid)?,
            warnings,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }
    pub fn projector(&self) -> &Projector {
        &self.projector
    }
    pub fn bank(&self) -> &ModeBank {
        &self.bank
    }
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
    pub fn planar_spectrum(&self, im: usize) -> &ModeSpectrum {
        &self.planar[im]
    }
    pub fn scalar_spectrum(&self, im: usize) -> &ModeSpectrum {
        &self.scalar[im]
    }

    /// Eigenvalues of `B` (unshifted) in modal order.
    pub fn eigenvalues(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let g = &self.grid;
        let nz = g.n_z();
        let mut p = Vec::with_capacity(g.n_modes());
        let mut a = Vec::with_capacity(g.n_modes());
        for idx in 0..g.n_modes() {
            let (im, ik) = (idx / nz, idx % nz);
            if g.is_nyquist(im, ik) {
                p.push(Vec::new());
                a.push(Vec::new());
                continue;
            }
            let xi2 = g.xi_of(ik).powi(2);
            p.push(self.planar[im].values.iter().map(|v| v + xi2).collect());
            a.push(self.scalar[im].values.iter().map(|v| v + xi2).collect());
        }
        (p, a)
    }

    pub fn to_modal(&self, f: &SpectralField) -> Result<Modal> {
        f.require(FieldKind::Vector3)?;
        let g = &self.grid;
        let nz = g.n_z();
        let n = g.n_r();
        let parts: Vec<(Vec<C64>, Vec<C64>)> = (0..g.n_modes())
            .into_par_iter()
            .map(|idx| {
                let (im, ik) = (idx / nz, idx % nz);
                if g.is_nyquist(im, ik) {
                    return (Vec::new(), Vec::new());
                }
                let sp = &self.planar[im];
                let mut h = Vec::with_capacity(2 * n);
                h.extend_from_slice(f.profile(0, im, ik));
                h.extend_from_slice(f.profile(1, im, ik));
                let ph = matvec(&sp.inverse, &sp.reduced.restrict(&h));
                let ss = &self.scalar[im];
                let pz = matvec(&ss.inverse, &ss.reduced.restrict(f.profile(2, im, ik)));
                (ph, pz)
            })
            .collect();
        let (planar, axial) = parts.into_iter().unzip();
        Ok(Modal { planar, axial })
    }

    pub fn from_modal(&self, c: &Modal) -> SpectralField {
        let g = &self.grid;
        let nz = g.n_z();
        let n = g.n_r();
        let parts: Vec<Option<(Vec<C64>, Vec<C64>)>> = (0..g.n_modes())
            .into_par_iter()
            .map(|idx| {
                let (im, ik) = (idx / nz, idx % nz);
                if g.is_nyquist(im, ik) {
                    return None;
                }
                let sp = &self.planar[im];
                let h = sp.reduced.lift(&matvec(&sp.vectors, &c.planar[idx]));
                let ss = &self.scalar[im];
                let z = ss.reduced.lift(&matvec(&ss.vectors, &c.axial[idx]));
                Some((h, z))
            })
            .collect();
        let mut out = SpectralField::zeros(FieldKind::Vector3, g);
        for (idx, part) in parts.into_iter().enumerate() {
            if let Some((h, z)) = part {
                let (im, ik) = (idx / nz, idx % nz);
                out.profile_mut(0, im, ik).copy_from_slice(&h[..n]);
                out.profile_mut(1, im, ik).copy_from_slice(&h[n..]);
                out.profile_mut(2, im, ik).copy_from_slice(&z);
            }
        }
        out
    }

    /// Multiply modal coordinates by `phi(Lambda)`, `Lambda` the unshifted eigenvalue.
    pub fn map_modal(&self, c: &Modal, phi: impl Fn(f64) -> C64 + Sync) -> Modal {
        let (lp, la) = self.eigenvalues();
        let apply = |coeffs: &Vec<Vec<C64>>, lam: &Vec<Vec<f64>>| -> Vec<Vec<C64>> {
            coeffs
                .iter()
                .zip(lam)
                .map(|(v, l)| v.iter().zip(l).map(|(x, &y)| x * phi(y)).collect())
                .collect()
        };
        Modal {
            planar: apply(&c.planar, &lp),
            axial: apply(&c.axial, &la),
        }
    }

    /// `phi(B) f` through the eigenbases.
    pub fn apply_function(&self, f: &SpectralField, phi: impl Fn(f64) -> C64 + Sync) -> Result<SpectralField> {
        let c = self.to_modal(f)?;
        Ok(self.from_modal(&self.map_modal(&c, phi)))
    }

    pub fn apply_semigroup(&self, t: f64, f: &SpectralField, which: Generator) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(Error::Precondition(format!("t = {t} must be nonnegative")));
        }
        f.require(FieldKind::Vector3)?;
        match which {
            Generator::B => {
                if t == 0.0 {
                    return Ok(f.clone());
                }
                self.apply_function(f, |lam| C64::new((-t * lam).exp(), 0.0))
            }
            Generator::A => {
                let pf = self.projector.apply(f)?;
                if t == 0.0 {
                    return Ok(pf);
                }
                let e = self.apply_function(&pf, |lam| C64::new((-t * lam).exp(), 0.0))?;
                self.projector.apply(&e)
            }
        }
    }

    /// Random real field in the discrete domain of `B`: a combination of the
    /// lowest `terms` eigenvectors of every mode with `|m| <= max_m`, `|k| <= max_k`.
    pub fn random_domain_field(&self, max_m: i64, max_k: i64, terms: usize, seed: u64, item: u64) -> SpectralField {
        let g = &self.grid;
        let mut s = Stream::new(seed, item);
        let zero = self.to_modal(&SpectralField::zeros(FieldKind::Vector3, g)).expect("vector field");
        let mut c = Modal::zeros_like(&zero);
        let nz = g.n_z();
        for idx in 0..g.n_modes() {
            let (im, ik) = (idx / nz, idx % nz);
            if g.is_nyquist(im, ik) || g.m_of(im).abs() > max_m || g.k_of(ik).abs() > max_k {
                continue;
            }
            for block in [&mut c.planar[idx], &mut c.axial[idx]] {
                for (j, v) in block.iter_mut().take(terms).enumerate() {
                    *v = s.complex_normal() * (-0.3 * j as f64).exp();
                }
            }
        }
        self.from_modal(&c).symmetrize()
    }

    /// Spectrally rough real field on the lowest `fraction` of every mode's
    /// eigenvectors: random phases, and every dyadic eigenvalue shell
    /// `[2^a, 2^{a+1})` carries energy proportional to `2^{-a s}`. At `s = 0`
    /// the data sit at the borderline of square integrability, where the
    /// smoothing rates are sharp.
    pub fn rough_field(&self, s_exp: f64, fraction: f64, solenoidal: bool, seed: u64, item: u64) -> Result<SpectralField> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Precondition(format!("fraction {fraction} outside (0, 1]")));
        }
        let g = &self.grid;
        let mut s = Stream::new(seed, item);
        let (lp, la) = self.eigenvalues();
        let zero = self.to_modal(&SpectralField::zeros(FieldKind::Vector3, g))?;
        let mut c = Modal::zeros_like(&zero);
        let shell = |lam: f64| lam.log2().floor() as i64;
        let mut counts = std::collections::BTreeMap::<i64, usize>::new();
        for lam in lp.iter().chain(&la) {
            let keep = (fraction * lam.len() as f64).floor() as usize;
            for &v in lam.iter().take(keep).filter(|&&v| v > 0.0) {
                *counts.entry(shell(v)).or_default() += 1;
            }
        }
        for idx in 0..g.n_modes() {
            for (block, lam) in [(&mut c.planar[idx], &lp[idx]), (&mut c.axial[idx], &la[idx])] {
                let keep = (fraction * lam.len() as f64).floor() as usize;
                for (j, v) in block.iter_mut().enumerate().take(keep) {
                    let phase = 2.0 * std::f64::consts::PI * s.uniform();
                    if lam[j] > 0.0 {
                        let a = shell(lam[j]);
                        let energy = 2f64.powf(-(a as f64) * s_exp) / counts[&a] as f64;
                        *v = C64::from_polar(energy.sqrt(), phase);
                    }
                }
            }
        }
        let f = self.from_modal(&c).symmetrize();
        if solenoidal {
            self.projector.apply(&f)
        } else {
            Ok(f)
        }
    }

    /// Smallest and largest eigenvalue carrying a non-negligible share of `f`.
    pub fn spectral_extent(&self, f: &SpectralField) -> Result<(f64, f64)> {
        let c = self.to_modal(f)?;
        let (lp, la) = self.eigenvalues();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (coeffs, lams) in [(&c.planar, &lp), (&c.axial, &la)] {
            for (v, l) in coeffs.iter().zip(lams) {
                for (x, &y) in v.iter().zip(l) {
                    pairs.push((y, x.norm()));
                }
            }
        }
        let top = pairs.iter().fold(0.0f64, |a, p| a.max(p.1));
        let sig: Vec<f64> = pairs
            .iter()
            .filter(|p| p.1 > 1e-8 * top && p.0 > KERNEL_TOLERANCE)
            .map(|p| p.0)
            .collect();
        if sig.is_empty() {
            return Err(Error::DegenerateWindow("data has no spectral content off the kernel".into()));
        }
        Ok((
            sig.iter().copied().fold(f64::INFINITY, f64::min),
            sig.iter().copied().fold(0.0, f64::max),
        ))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecaySpec {
    pub t_grid: Vec<f64>,
    /// Fit window `[window_lo / Lambda_max, window_hi / Lambda_min]` of the data.
    pub window_lo: f64,
    pub window_hi: f64,
}

impl DecaySpec {
    /// Window away from both spectral cutoffs of the data, where the
    /// exponential factors bend the power law.
    pub fn standard(t_grid: Vec<f64>) -> Self {
        Self {
            t_grid,
            window_lo: 3.0,
            window_hi: 0.05,
        }
    }

    pub fn window(&self, extent: (f64, f64)) -> (f64, f64) {
        (self.window_lo / extent.1, self.window_hi / extent.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub t_grid: Vec<f64>,
    pub quantity: Vec<f64>,
    pub window: (f64, f64),
    pub fit: PowerFit,
    pub target_exponent: f64,
    /// `sup_t quantity(t) t^{-target}` over the whole grid (`t <= 1`).
    pub sup_scaled: f64,
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && p <= q && q.is_finite() && 3.0 * (1.0 / p - 1.0 / q) <= 1.0 + 1e-12) {
        return Err(Error::Precondition(format!("(p, q) = ({p}, {q}) outside 1 < p <= q < inf, 3(1/p - 1/q) <= 1")));
    }
    Ok(())
}

fn check_t_grid(t: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(Error::Precondition("empty time grid".into()));
    }
    if !t.windows(2).all(|w| w[0] < w[1]) || t[0] <= 0.0 {
        return Err(Error::Precondition("time grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn decay_report(spec: &DecaySpec, extent: (f64, f64), quantity: Vec<f64>, target: f64) -> Result<DecayReport> {
    let window = spec.window(extent);
    let (tw, qw): (Vec<f64>, Vec<f64>) = spec
        .t_grid
        .iter()
        .zip(&quantity)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, q)| (*t, *q))
        .unzip();
    if tw.len() < 3 {
        return Err(Error::DegenerateWindow(format!(
            "{} grid points inside [{:.3e}, {:.3e}]",
            tw.len(),
            window.0,
            window.1
        )));
    }
    let fit = fit_power_law(&tw, &qw)?;
    let sup_scaled = spec
        .t_grid
        .iter()
        .zip(&quantity)
        .filter(|(t, _)| **t <= 1.0)
        .map(|(t, q)| q * t.powf(-target))
        .fold(0.0, f64::max);
    Ok(DecayReport {
        t_grid: spec.t_grid.clone(),
        quantity,
        window,
        fit,
        target_exponent: target,
        sup_scaled,
    })
}

/// `|grad^k e^{-tA} f|_q / |f|_p` against `t`.
pub fn smoothing_report(plan: &SemigroupPlan, f: &SpectralField, p: f64, q: f64, order: usize, spec: &DecaySpec) -> Result<DecayReport> {
    check_pq(p, q)?;
    check_t_grid(&spec.t_grid)?;
    if order > 2 {
        return Err(Error::Precondition(format!("derivative order {order} > 2")));
    }
    let pf = plan.projector().apply(f)?;
    let extent = plan.spectral_extent(&pf)?;
    let nf = lp_norm(f, p)?;
    let quantity = spec
        .t_grid
        .par_iter()
        .map(|&t| {
            let u = plan.apply_semigroup(t, &pf, Generator::B).and_then(|e| plan.projector().apply(&e))?;
            Ok(lp_norm(&gradient_power(&u, order), q)? / nf)
        })
        .collect::<Result<Vec<f64>>>()?;
    let target = -(order as f64) / 2.0 - 1.5 * (1.0 / p - 1.0 / q);
    decay_report(spec, extent, quantity, target)
}

/// `|e^{-tA} P div F|_q / |F|_p` against `t`.
pub fn pdiv_smoothing_report(plan: &SemigroupPlan, tensor: &SpectralField, p: f64, q: f64, spec: &DecaySpec) -> Result<DecayReport> {
    check_pq(p, q)?;
    check_t_grid(&spec.t_grid)?;
    tensor.require(FieldKind::Tensor(2))?;
    let pd = plan.projector().apply(&divergence(tensor)?)?;
    let extent = plan.spectral_extent(&pd)?;
    let nf = lp_norm(tensor, p)?;
    let quantity = spec
        .t_grid
        .par_iter()
        .map(|&t| {
            let u = plan.apply_semigroup(t, &pd, Generator::B).and_then(|e| plan.projector().apply(&e))?;
            Ok(lp_norm(&u, q)? / nf)
        })
        .collect::<Result<Vec<f64>>>()?;
    let target = -0.5 - 1.5 * (1.0 / p - 1.0 / q);
    decay_report(spec, extent, quantity, target)
}

/// Gradient tensor of `B^{-1/2}`-smoothed rough data; its divergence has the
/// same modal weights as the gradient of the rough field itself.
pub fn rough_tensor(plan: &SemigroupPlan, s_exp: f64, fraction: f64, seed: u64, item: u64) -> Result<SpectralField> {
    let f = plan.rough_field(s_exp, fraction, true, seed, item)?;
    let v = plan.apply_function(&f, |lam| if lam > 0.0 { C64::new(lam.powf(-0.5), 0.0) } else { C64::new(0.0, 0.0) })?;
    Ok(crate::calculus::gradient(&v))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderReport {
    pub t: f64,
    pub alpha: f64,
    pub rho_grid: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup: f64,
}

/// `|(e^{-rho A} - 1) e^{-tA} f|_p t^alpha / (rho^alpha |f|_p)` over `rho`.
pub fn holder_report(plan: &SemigroupPlan, f: &SpectralField, t: f64, rho_grid: &[f64], alpha: f64, p: f64) -> Result<HolderReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside (0, 1)")));
    }
    if rho_grid.is_empty() {
        return Err(Error::Precondition("empty rho grid".into()));
    }
    if !(t > 0.0 && t <= 1.0) || rho_grid.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::Precondition("t and rho must lie in (0, 1]".into()));
    }
    let nf = lp_norm(f, p)?;
    let base = plan.apply_semigroup(t, f, Generator::A)?;
    let ratios = rho_grid
        .par_iter()
        .map(|&rho| {
            let moved = plan.apply_semigroup(rho, &base, Generator::A)?;
            let d = moved.sub(&base)?;
            Ok(lp_norm(&d, p)? * t.powf(alpha) / (rho.powf(alpha) * nf))
        })
        .collect::<Result<Vec<f64>>>()?;
    let sup = ratios.iter().copied().fold(0.0, f64::max);
    Ok(HolderReport {
        t,
        alpha,
        rho_grid: rho_grid.to_vec(),
        ratios,
        sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenfields::{Eigenfield, EigenfieldFamily};
    use crate::field::sample_function;
    use crate::fit::log_space;
    use crate::norms::l2_norm;
    use crate::resolvent::{solve_resolvent, ModeBank};
    use crate::sampling::{random_field, BandLimit};
    use std::f64::consts::PI;

    fn plan(n_r: usize, n: usize) -> SemigroupPlan {
        let g = Arc::new(SpectralGrid::new(n_r, n, n, 2.0 * PI).unwrap());
        SemigroupPlan::new(&g, 1.0).unwrap()
    }

    #[test]
    fn single_kernel_eigenvalue() {
        let p = plan(12, 8);
        let (lp, la) = p.eigenvalues();
        let zeros = lp.iter().chain(&la).flatten().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, 1);
        assert!(p.warnings().is_empty());
    }

    #[test]
    fn eigenfield_decays_exponentially() {
        let p = plan(24, 8);
        let e = Eigenfield::new(EigenfieldFamily::Poloidal, 1, 1, 1).build(p.grid()).unwrap();
        for t in [0.01, 0.1, 0.5] {
            let u = p.apply_semigroup(t, &e.field, Generator::A).unwrap();
            let expect = e.field.scale((-e.eigenvalue * t).exp());
            assert!(u.sub(&expect).unwrap().max_abs() < 1e-11 * e.field.max_abs());
        }
    }

    #[test]
    fn kernel_mode_and_zero_time() {
        let p = plan(10, 8);
        let g = Arc::clone(p.grid());
        let ez = sample_function(FieldKind::Vector3, &g, |c, _, _, _| if c == 2 { 1.0 } else { 0.0 });
        let u = p.apply_semigroup(0.7, &ez, Generator::A).unwrap();
        assert!(u.sub(&ez).unwrap().max_abs() < 1e-12);
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 1, 0);
        let u0 = p.apply_semigroup(0.0, &f, Generator::A).unwrap();
        assert!(u0.sub(&p.projector().apply(&f).unwrap()).unwrap().max_abs() < 1e-14);
        assert!(p.apply_semigroup(-1.0, &f, Generator::B).is_err());
    }

    #[test]
    fn semigroup_law_and_projection_commutation() {
        let p = plan(16, 8);
        let g = Arc::clone(p.grid());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 4, 0);
        let (t, s) = (0.13, 0.41);
        let a = p.apply_semigroup(t + s, &f, Generator::B).unwrap();
        let b = p.apply_semigroup(t, &p.apply_semigroup(s, &f, Generator::B).unwrap(), Generator::B).unwrap();
        assert!(l2_norm(&a.sub(&b).unwrap()) < 1e-10 * l2_norm(&f));
        let pe = p.projector().apply(&p.apply_semigroup(t, &f, Generator::B).unwrap()).unwrap();
        let ep = p.apply_semigroup(t, &p.projector().apply(&f).unwrap(), Generator::B).unwrap();
        assert!(l2_norm(&pe.sub(&ep).unwrap()) < 1e-10 * l2_norm(&f));
    }

    #[test]
    fn laplace_transform_of_semigroup_is_resolvent() {
        let p = plan(12, 4);
        let g = Arc::clone(p.grid());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 2, 0);
        let bank = ModeBank::new(&g).unwrap();
        let exact = solve_resolvent(&bank, C64::new(1.0, 0.0), &f).unwrap().u;
        // int_0^inf e^{-t} e^{-tB} dt with t = e^x, trapezoid in x
        let (xa, xb, h) = (-40.0f64, 4.0f64, 0.05);
        let nodes = ((xb - xa) / h) as usize;
        let weights_fn = |lam: f64| {
            let mut acc = 0.0;
            for i in 0..=nodes {
                let t = (xa + h * i as f64).exp();
                let w = if i == 0 || i == nodes { 0.5 } else { 1.0 };
                acc += w * h * t * (-(1.0 + lam) * t).exp();
            }
            C64::new(acc, 0.0)
        };
        let approx = p.apply_function(&f, weights_fn).unwrap();
        let err = l2_norm(&resolvent_interior(&approx.sub(&exact).unwrap()));
        assert!(err < 1e-6 * l2_norm(&f), "{err}");
    }

    fn resolvent_interior(f: &SpectralField) -> SpectralField {
        crate::resolvent::interior_only(f)
    }

    #[test]
    fn decay_is_monotone_off_kernel() {
        let p = plan(12, 8);
        let f = p.rough_field(1.0, 0.5, true, 3, 0).unwrap();
        let mut last = f64::INFINITY;
        for t in log_space(1e-3, 1.0, 12) {
            let n = l2_norm(&p.apply_semigroup(t, &f, Generator::A).unwrap());
            assert!(n <= last * (1.0 + 1e-12));
            last = n;
        }
    }

    #[test]
    fn single_mode_tensor_has_degenerate_window() {
        let p = plan(16, 8);
        let e = Eigenfield::new(EigenfieldFamily::Horizontal, 1, 1, 1).build(p.grid()).unwrap();
        let tensor = crate::calculus::gradient(&e.field);
        let spec = DecaySpec {
            t_grid: log_space(1e-4, 1.0, 20),
            window_lo: 3.0,
            window_hi: 0.3,
        };
        assert!(matches!(pdiv_smoothing_report(&p, &tensor, 2.0, 2.0, &spec), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn borderline_data_give_half_power_rates() {
        let p = plan(16, 12);
        let spec = DecaySpec::standard(log_space(1e-6, 1.0, 49));
        let f = p.rough_field(0.0, 1.0, true, 1, 0).unwrap();
        let rep = smoothing_report(&p, &f, 2.0, 2.0, 1, &spec).unwrap();
        assert!((rep.fit.exponent + 0.5).abs() < 0.1 && rep.fit.decades >= 2.0, "{:?}", rep.fit);
        let t = rough_tensor(&p, 0.0, 1.0, 1, 0).unwrap();
        let rep = pdiv_smoothing_report(&p, &t, 2.0, 2.0, &spec).unwrap();
        assert!((rep.fit.exponent + 0.5).abs() < 0.1 && rep.fit.decades >= 2.0, "{:?}", rep.fit);
    }

    #[test]
    fn holder_ratio_for_kernel_mode_is_zero() {
        let p = plan(10, 8);
        let g = Arc::clone(p.grid());
        let ez = sample_function(FieldKind::Vector3, &g, |c, _, _, _| if c == 2 { 1.0 } else { 0.0 });
        let rep = holder_report(&p, &ez, 0.5, &[0.1, 0.01], 0.5, 2.0).unwrap();
        assert!(rep.sup < 1e-12);
        assert!(holder_report(&p, &ez, 0.5, &[], 0.5, 2.0).is_err());
        assert!(holder_report(&p, &ez, 0.5, &[0.1], 1.5, 2.0).is_err());
    }

    #[test]
    fn holder_ratio_single_eigenfield_closed_form() {
        let p = plan(20, 8);
        let e = Eigenfield::new(EigenfieldFamily::Horizontal, 0, 0, 1).build(p.grid()).unwrap();
        let (t, alpha) = (0.2, 0.5);
        let rho = [0.5, 0.05, 0.005];
        let rep = holder_report(&p, &e.field, t, &rho, alpha, 2.0).unwrap();
        let lam = e.eigenvalue;
        for (r, got) in rho.iter().zip(&rep.ratios) {
            let expect = (1.0 - (-r * lam).exp()) * (-t * lam).exp() * t.powf(alpha) / r.powf(alpha);
            assert!((got - expect).abs() < 1e-9 * expect.max(1e-3));
        }
    }
}

