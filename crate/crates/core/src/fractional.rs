//! Fractional and imaginary powers of `B0 = B + lambda0` and `A0 = A + lambda0`.
//!
//! Negative powers are evaluated by a contour integral over the two rays
//! `z = a + e^x e^{+-i psi}`, trapezoid rule in `x`, one shifted mode solve per
//! node. The eigendecomposition path is the reference for every contour result.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{divergence, gradient};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::linalg::C64;
use crate::norms::{l2_norm, lp_norm};
use crate::semigroup::SemigroupPlan;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// Vertex of the two rays on the positive axis.
    pub a: f64,
    /// Half-angle of the rays.
    pub psi: f64,
    /// Trapezoid step in the logarithmic ray parameter.
    pub step: f64,
    /// Lower end of the ray parameter.
    pub x_min: f64,
    /// Target truncation error of the ray tails.
    pub tail: f64,
    /// Largest allowed change between the step `h` and `2h` rules.
    pub tol: f64,
}

impl ContourSpec {
    pub fn for_shift(lambda0: f64) -> Self {
        Self {
            a: 0.5 * lambda0,
            psi: PI / 4.0,
            step: 0.1,
            x_min: -28.0,
            tail: 1e-12,
            tol: 1e-9,
        }
    }

    fn validate(&self, lambda0: f64) -> Result<()> {
        if !(self.a > 0.0 && self.a < lambda0) {
            return Err(Error::Precondition(format!(
                "contour vertex a = {} must lie in (0, lambda0 = {lambda0})",
                self.a
            )));
        }
        if !(self.psi > 0.0 && self.psi < PI / 2.0) {
            return Err(Error::Precondition(format!("half-angle {} outside (0, pi/2)", self.psi)));
        }
        if !(self.step > 0.0 && self.tail > 0.0 && self.tol > 0.0) {
            return Err(Error::Precondition("contour step, tail and tol must be positive".into()));
        }
        Ok(())
    }

    /// Ray parameter upper limit for an integrand decaying like `e^{-re(beta) x}`.
    pub fn x_max(&self, beta: C64) -> f64 {
        let decay = beta.re;
        ((1.0 / self.tail).ln() + (1.0 / decay).ln().max(0.0) + PI * beta.im.abs()) / decay
    }

    /// Nodes per ray, odd so that every other node forms the `2h` rule.
    pub fn n_quad(&self, beta: C64) -> usize {
        let intervals = ((self.x_max(beta) - self.x_min) / self.step).ceil() as usize;
        intervals + intervals % 2 + 1
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerReport {
    pub exponent: f64,
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    /// Relative deviation of the contour result from the eigendecomposition path.
    pub oracle_error: f64,
}

fn principal_power(z: C64, beta: C64) -> C64 {
    (-beta * z.ln()).exp()
}

/// `B0^{-beta} f` through the contour, `0 < re(beta) <= 1`.
fn contour_power(plan: &SemigroupPlan, beta: C64, f: &SpectralField, spec: &ContourSpec) -> Result<SpectralField> {
    f.require(FieldKind::Vector3)?;
    f.check_finite("power input")?;
    if !(beta.re > 0.0 && beta.re <= 1.0) {
        return Err(Error::Precondition(format!("exponent real part {} outside (0, 1]", beta.re)));
    }
    let lambda0 = plan.lambda0();
    spec.validate(lambda0)?;
    let g = plan.grid();
    let n = g.n_r();
    let nz = g.n_z();
    let nodes = spec.n_quad(beta);
    // upper ray runs inward, lower ray outward: together counterclockwise around the spectrum
    let rays: Vec<(C64, C64)> = (0..nodes)
        .flat_map(|i| {
            let x = spec.x_min + spec.step * i as f64;
            let end = if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
            [1.0, -1.0].map(|side: f64| {
                let dir = C64::from_polar(1.0, side * spec.psi);
                let z = spec.a + x.exp() * dir;
                let w = -side * end * spec.step * x.exp() * dir * principal_power(z, beta) / C64::new(0.0, 2.0 * PI);
                (z, w)
            })
        })
        .collect();
    let bank = plan.bank();
    let solved = (0..g.n_modes())
        .into_par_iter()
        .map(|idx| {
            let (im, ik) = (idx / nz, idx % nz);
            if g.is_nyquist(im, ik) {
                return Ok(None);
            }
            let xi2 = g.xi_of(ik).powi(2);
            let mut rhs_h = Vec::with_capacity(2 * n);
            rhs_h.extend_from_slice(f.profile(0, im, ik));
            rhs_h.extend_from_slice(f.profile(1, im, ik));
            let rhs_z = f.profile(2, im, ik);
            let mut fine = (vec![C64::new(0.0, 0.0); 2 * n], vec![C64::new(0.0, 0.0); n]);
            let mut coarse = fine.clone();
            for (j, &(z, w)) in rays.iter().enumerate() {
                // (z - B0)^{-1} = -(lambda0 - z + B)^{-1}
                let mu = lambda0 - z + xi2;
                let h = bank.planar(im).resolve(mu, &rhs_h)?.values;
                let v = bank.scalar(im).resolve(mu, rhs_z)?.values;
                let i = j / 2;
                let wc = (i % 2 == 0).then_some(w * 2.0);
                for (acc, x) in fine.0.iter_mut().zip(&h).chain(fine.1.iter_mut().zip(&v)) {
                    *acc -= w * x;
                }
                if let Some(wc) = wc {
                    for (acc, x) in coarse.0.iter_mut().zip(&h).chain(coarse.1.iter_mut().zip(&v)) {
                        *acc -= wc * x;
                    }
                }
            }
            Ok(Some((fine, coarse)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SpectralField::zeros(FieldKind::Vector3, g);
    let mut change = 0.0f64;
    for (idx, entry) in solved.into_iter().enumerate() {
        let Some(((h, v), (hc, vc))) = entry else { continue };
        let (im, ik) = (idx / nz, idx % nz);
        for (a, b) in h.iter().zip(&hc).chain(v.iter().zip(&vc)) {
            change = change.max((a - b).norm());
        }
        out.profile_mut(0, im, ik).copy_from_slice(&h[..n]);
        out.profile_mut(1, im, ik).copy_from_slice(&h[n..]);
        out.profile_mut(2, im, ik).copy_from_slice(&v);
    }
    let scale = out.max_abs().max(f.max_abs() * f64::EPSILON);
    if change > spec.tol * scale {
        return Err(Error::QuadratureNotConverged {
            change: change / scale,
            tol: spec.tol,
        });
    }
    Ok(out)
}

/// `B0^{-alpha} f` by the contour integral, `alpha in (0, 1]`.
pub fn apply_neg_power(plan: &SemigroupPlan, alpha: f64, f: &SpectralField, spec: &ContourSpec) -> Result<SpectralField> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside (0, 1]")));
    }
    contour_power(plan, C64::new(alpha, 0.0), f, spec)
}

/// `B0^{-alpha} f` through the eigendecomposition.
pub fn neg_power_oracle(plan: &SemigroupPlan, alpha: f64, f: &SpectralField) -> Result<SpectralField> {
    let l0 = plan.lambda0();
    plan.apply_function(f, |lam| C64::new((lam + l0).powf(-alpha), 0.0))
}

/// `A0^{-alpha} f = P B0^{-alpha} P f` through the eigendecomposition.
pub fn stokes_neg_power_oracle(plan: &SemigroupPlan, alpha: f64, f: &SpectralField) -> Result<SpectralField> {
    let pf = plan.projector().apply(f)?;
    plan.projector().apply(&neg_power_oracle(plan, alpha, &pf)?)
}

fn check_imaginary(s: f64) -> Result<()> {
    if !(s.abs() <= 1.0) {
        return Err(Error::Precondition(format!("imaginary exponent s = {s} outside [-1, 1]")));
    }
    Ok(())
}

/// `B0^{is} f` through the eigendecomposition, `|s| <= 1`.
pub fn apply_imaginary_power(plan: &SemigroupPlan, s: f64, f: &SpectralField) -> Result<SpectralField> {
    check_imaginary(s)?;
    if s == 0.0 {
        f.require(FieldKind::Vector3)?;
        return Ok(f.clone());
    }
    let l0 = plan.lambda0();
    plan.apply_function(f, |lam| C64::new(0.0, s * (lam + l0).ln()).exp())
}

/// Cross-check of the imaginary power on regularized data: the contour value
/// of `B0^{is - 1} f` against the eigendecomposition, relative to `|f|_2`.
pub fn imaginary_power_crosscheck(plan: &SemigroupPlan, s: f64, f: &SpectralField, spec: &ContourSpec) -> Result<f64> {
    check_imaginary(s)?;
    let beta = C64::new(1.0, -s);
    let contour = contour_power(plan, beta, f, spec)?;
    let l0 = plan.lambda0();
    let oracle = plan.apply_function(f, |lam| principal_power(C64::new(lam + l0, 0.0), beta))?;
    Ok(l2_norm(&contour.sub(&oracle)?) / l2_norm(f))
}

/// `|B0^{is} f|_2 / |f|_2` for every `s`, with the sup.
pub fn imaginary_power_report(plan: &SemigroupPlan, samples: &[SpectralField], s_values: &[f64]) -> Result<PowerReport> {
    let mut ratios = Vec::with_capacity(samples.len() * s_values.len());
    for f in samples {
        for &s in s_values {
            ratios.push(l2_norm(&apply_imaginary_power(plan, s, f)?) / l2_norm(f));
        }
    }
    let sup_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let exponent = s_values.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    Ok(PowerReport {
        exponent,
        ratios,
        sup_ratio,
        oracle_error: 0.0,
    })
}

/// `|grad B0^{-1/2} g|_p / |g|_p` over the samples. The first sample is also
/// evaluated through the contour to report the oracle deviation.
pub fn sqrt_embedding_report(plan: &SemigroupPlan, samples: &[SpectralField], p: f64, spec: &ContourSpec) -> Result<PowerReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    let ratios = samples
        .par_iter()
        .map(|g| {
            let u = neg_power_oracle(plan, 0.5, g)?;
            Ok(lp_norm(&gradient(&u), p)? / lp_norm(g, p)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let first = &samples[0];
    let oracle_error =
        l2_norm(&apply_neg_power(plan, 0.5, first, spec)?.sub(&neg_power_oracle(plan, 0.5, first)?)?) / l2_norm(first);
    Ok(PowerReport {
        exponent: 0.5,
        sup_ratio: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
        oracle_error,
    })
}

/// `A0^{-1/2} P div F` for a rank-two tensor `F`.
pub fn pdiv_composite(plan: &SemigroupPlan, tensor: &SpectralField) -> Result<SpectralField> {
    tensor.require(FieldKind::Tensor(2))?;
    stokes_neg_power_oracle(plan, 0.5, &divergence(tensor)?)
}

/// `|A0^{-1/2} P div F|_p / |F|_p` over the samples.
pub fn pdiv_report(plan: &SemigroupPlan, tensors: &[SpectralField], p: f64) -> Result<PowerReport> {
    if tensors.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    let ratios = tensors
        .par_iter()
        .map(|t| Ok(lp_norm(&pdiv_composite(plan, t)?, p)? / lp_norm(t, p)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PowerReport {
        exponent: -0.5,
        sup_ratio: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
        oracle_error: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenfields::{Eigenfield, EigenfieldFamily};
    use crate::grid::SpectralGrid;
    use crate::helmholtz::divergence_defect;
    use crate::resolvent::{interior_only, solve_resolvent};
    use crate::sampling::{random_field, BandLimit};
    use std::sync::Arc;

    fn plan() -> SemigroupPlan {
        let g = Arc::new(SpectralGrid::new(12, 6, 6, 2.0 * PI).unwrap());
        SemigroupPlan::new(&g, 1.0).unwrap()
    }

    fn rel(a: &SpectralField, b: &SpectralField, scale: &SpectralField) -> f64 {
        l2_norm(&interior_only(&a.sub(b).unwrap())) / l2_norm(scale)
    }

    #[test]
    fn contour_matches_eigen_path() {
        let p = plan();
        let g = Arc::clone(p.grid());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 7, 0);
        let spec = ContourSpec::for_shift(1.0);
        for alpha in [0.25, 0.5, 1.0] {
            let c = apply_neg_power(&p, alpha, &f, &spec).unwrap();
            let o = neg_power_oracle(&p, alpha, &f).unwrap();
            assert!(rel(&c, &o, &f) < 1e-9, "alpha {alpha}: {}", rel(&c, &o, &f));
        }
    }

    #[test]
    fn first_power_is_the_inverse() {
        let p = plan();
        let g = Arc::clone(p.grid());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 8, 0);
        let c = apply_neg_power(&p, 1.0, &f, &ContourSpec::for_shift(1.0)).unwrap();
        let inv = solve_resolvent(p.bank(), C64::new(1.0, 0.0), &f).unwrap().u;
        assert!(rel(&c, &inv, &f) < 1e-9);
    }

    #[test]
    fn half_powers_compose() {
        let p = plan();
        let g = Arc::clone(p.grid());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 9, 0);
        let spec = ContourSpec::for_shift(1.0);
        let half = apply_neg_power(&p, 0.5, &f, &spec).unwrap();
        let twice = apply_neg_power(&p, 0.5, &half, &spec).unwrap();
        let inv = solve_resolvent(p.bank(), C64::new(1.0, 0.0), &f).unwrap().u;
        assert!(rel(&twice, &inv, &f) < 1e-8);
    }

    #[test]
    fn eigenfield_scaling_and_unit_modulus() {
        let p = plan();
        let e = Eigenfield::new(EigenfieldFamily::Poloidal, 1, 1, 1).build(p.grid()).unwrap();
        let h = neg_power_oracle(&p, 0.5, &e.field).unwrap();
        let expect = e.field.scale((e.eigenvalue + 1.0).powf(-0.5));
        assert!(h.sub(&expect).unwrap().max_abs() < 1e-10 * e.field.max_abs());
        let u = apply_imaginary_power(&p, 1.0, &e.field).unwrap();
        assert!((l2_norm(&u) / l2_norm(&e.field) - 1.0).abs() < 1e-10);
        assert!(apply_imaginary_power(&p, 1.5, &e.field).is_err());
        let id = apply_imaginary_power(&p, 0.0, &e.field).unwrap();
        assert_eq!(id.coeffs(), e.field.coeffs());
    }

    #[test]
    fn imaginary_contour_crosscheck() {
        let p = plan();
        let g = Arc::clone(p.grid());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 10, 0);
        for s in [-1.0, 0.5] {
            let err = imaginary_power_crosscheck(&p, s, &f, &ContourSpec::for_shift(1.0)).unwrap();
            assert!(err < 1e-9, "{err}");
        }
    }

    #[test]
    fn contour_rejects_vertex_beyond_spectrum() {
        let p = plan();
        let g = Arc::clone(p.grid());
        let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 1, 0);
        let spec = ContourSpec { a: 2.0, ..ContourSpec::for_shift(1.0) };
        assert!(apply_neg_power(&p, 0.5, &f, &spec).is_err());
        assert!(apply_neg_power(&p, 1.5, &f, &ContourSpec::for_shift(1.0)).is_err());
    }

    #[test]
    fn projection_commutes_and_ranges_stay_solenoidal() {
        let g = Arc::new(SpectralGrid::new(16, 8, 8, 2.0 * PI).unwrap());
        let p = SemigroupPlan::new(&g, 1.0).unwrap();
        let f = p.random_domain_field(3, 3, 4, 11, 0);
        let pf = p.projector().apply(&f).unwrap();
        let a = neg_power_oracle(&p, 0.5, &pf).unwrap();
        let b = p.projector().apply(&neg_power_oracle(&p, 0.5, &f).unwrap()).unwrap();
        let d = l2_norm(&a.sub(&b).unwrap()) / l2_norm(&f);
        assert!(d < 1e-9, "{d}");
        let dd = divergence_defect(&stokes_neg_power_oracle(&p, 0.5, &pf).unwrap()).unwrap();
        assert!(dd < 1e-10, "{dd}");
    }

    #[test]
    fn embedding_ratio_below_one() {
        let p = plan();
        let g = Arc::clone(p.grid());
        let samples: Vec<_> = (0..4).map(|i| random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 20, i)).collect();
        let rep = sqrt_embedding_report(&p, &samples, 2.0, &ContourSpec::for_shift(1.0)).unwrap();
        assert!(rep.sup_ratio <= 1.0 + 1e-8, "{}", rep.sup_ratio);
        assert!(rep.oracle_error < 1e-8);
        let e = Eigenfield::new(EigenfieldFamily::Horizontal, 2, 0, 1).build(&g).unwrap();
        let one = sqrt_embedding_report(&p, &[e.field], 2.0, &ContourSpec::for_shift(1.0)).unwrap();
        let expect = (e.eigenvalue / (e.eigenvalue + 1.0)).sqrt();
        assert!(one.sup_ratio <= expect + 1e-9, "{} vs {expect}", one.sup_ratio);
    }

    #[test]
    fn constant_axial_tensor_maps_to_zero() {
        let p = plan();
        let g = Arc::clone(p.grid());
        let mut t = SpectralField::zeros(FieldKind::Tensor(2), &g);
        let (im, ik) = (g.index_of_m(0).unwrap(), g.index_of_k(0).unwrap());
        t.profile_mut(8, im, ik).fill(C64::new(1.0, 0.0));
        assert!(pdiv_composite(&p, &t).unwrap().max_abs() < 1e-13);
    }
}
