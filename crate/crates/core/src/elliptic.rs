//! Manufactured solutions for the shifted Neumann-type problem
//! `lambda u - Laplacian u = f`, `(curl u) x n = g`, `u . n = 0` on `r = 1`,
//! and the higher-regularity ratio
//! `|u|_{W^{m+2,p}} / (|f|_{W^{m,p}} + |g|_{W^{m+1,p}} + |u|_{W^{1,p}})`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{curl, laplacian};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::grid::SpectralGrid;
use crate::linalg::C64;
use crate::norms::{l2_norm, norm, NormRequest};
use crate::resolvent::{solve_with_boundary, ModeBank, ResolventSolution};
use crate::rng::Stream;

/// Polynomial `sum c_j r^{p_j}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RadialPoly {
    pub terms: Vec<(u32, C64)>,
}

impl RadialPoly {
    pub fn eval(&self, r: f64) -> C64 {
        self.terms.iter().map(|&(p, c)| c * r.powi(p as i32)).sum()
    }

    pub fn slope(&self, r: f64) -> C64 {
        self.terms
            .iter()
            .filter(|t| t.0 > 0)
            .map(|&(p, c)| c * (p as f64) * r.powi(p as i32 - 1))
            .sum()
    }

    fn times_one_minus_r2(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(self.terms.iter().map(|&(p, c)| (p + 2, -c)));
        Self { terms }
    }

    fn plus(mut self, other: &Self) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self
    }
}

/// One Fourier mode of a manufactured field, `[u^r, u^theta, u^z]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTerm {
    pub m: i64,
    pub k: i64,
    pub profiles: [RadialPoly; 3],
}

impl ModeTerm {
    /// `u^r(1) = 0` plus the two curl rows `d_r u^theta + u^theta`, `d_r u^z` at `r = 1`.
    pub fn boundary_rows(&self) -> [C64; 3] {
        let [ur, ut, uz] = &self.profiles;
        [ur.eval(1.0), ut.slope(1.0) + ut.eval(1.0), uz.slope(1.0)]
    }

    /// Random pole-regular term with `u^r(1) = 0`; the curl rows vanish when `homogeneous`.
    pub fn random(m: i64, k: i64, homogeneous: bool, stream: &mut Stream) -> Self {
        let ma = m.unsigned_abs() as u32;
        let mut coeffs = |base: u32| RadialPoly {
            terms: (0..2).map(|j| (base + 2 * j, stream.complex_normal())).collect(),
        };
        let wp = coeffs((m + 1).unsigned_abs() as u32);
        let wm = coeffs((m - 1).unsigned_abs() as u32);
        let swirl = coeffs(ma + 1);
        let axial = coeffs(ma);
        let half = C64::new(0.5, 0.0);
        let half_i = C64::new(0.0, -0.5);
        let scaled = |p: &RadialPoly, a: C64| RadialPoly {
            terms: p.terms.iter().map(|&(e, c)| (e, c * a)).collect(),
        };
        let vr = scaled(&wp, half).plus(&scaled(&wm, half));
        let vt = scaled(&wp, half_i).plus(&scaled(&wm, -half_i));
        let ur = vr.times_one_minus_r2();
        let mut ut = vt.times_one_minus_r2().plus(&swirl);
        let mut uz = axial;
        if homogeneous {
            let rows = Self {
                m,
                k,
                profiles: [ur.clone(), ut.clone(), uz.clone()],
            }
            .boundary_rows();
            ut.terms.push((ma + 1, -rows[1] / (ma as f64 + 2.0)));
            uz.terms.push((ma + 2, -rows[2] / (ma as f64 + 2.0)));
        }
        Self {
            m,
            k,
            profiles: [ur, ut, uz],
        }
    }
}

/// Real vector field with the given mode terms and their conjugate mirrors.
pub fn field_from_terms(grid: &Arc<SpectralGrid>, terms: &[ModeTerm]) -> Result<SpectralField> {
    let limit_m = grid.n_theta() as i64 / 2 - 1;
    let limit_k = grid.n_z() as i64 / 2 - 1;
    let mut out = SpectralField::zeros(FieldKind::Vector3, grid);
    for t in terms {
        if t.m.abs() > limit_m {
            return Err(Error::OutOfBand { m: t.m, limit: limit_m });
        }
        if t.k.abs() > limit_k {
            return Err(Error::Precondition(format!("axial index {} outside |k| <= {limit_k}", t.k)));
        }
        let im = grid.index_of_m(t.m).expect("in band");
        let ik = grid.index_of_k(t.k).expect("in band");
        let (jm, jk) = grid.conjugate_mode(im, ik).expect("not Nyquist");
        for (c, poly) in t.profiles.iter().enumerate() {
            let vals: Vec<C64> = grid.radial_nodes().iter().map(|&r| poly.eval(r)).collect();
            if (jm, jk) == (im, ik) {
                for (o, v) in out.profile_mut(c, im, ik).iter_mut().zip(&vals) {
                    *o += C64::new(v.re, 0.0);
                }
            } else {
                for (o, v) in out.profile_mut(c, im, ik).iter_mut().zip(&vals) {
                    *o += v;
                }
                for (o, v) in out.profile_mut(c, jm, jk).iter_mut().zip(&vals) {
                    *o += v.conj();
                }
            }
        }
    }
    Ok(out)
}

/// Smooth extension `(0, r curl_z u, -r curl_theta u)` of the boundary datum
/// `(curl u) x e_r`.
pub fn boundary_extension(u: &SpectralField) -> Result<SpectralField> {
    let w = curl(u)?;
    let g = u.grid();
    let r = g.radial_nodes();
    let mut out = SpectralField::zeros(FieldKind::Vector3, g);
    for im in 0..g.n_theta() {
        for ik in 0..g.n_z() {
            for i in 0..g.n_r() {
                out.profile_mut(1, im, ik)[i] = w.profile(2, im, ik)[i] * r[i];
                out.profile_mut(2, im, ik)[i] = -w.profile(1, im, ik)[i] * r[i];
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub label: String,
    pub lambda: f64,
    pub u_exact: SpectralField,
    pub f: SpectralField,
    pub g: SpectralField,
}

impl ManufacturedCase {
    pub fn new(label: impl Into<String>, lambda: f64, u_exact: SpectralField, homogeneous: bool) -> Result<Self> {
        let f = u_exact.scale(lambda).sub(&laplacian(&u_exact))?;
        let g = if homogeneous {
            SpectralField::zeros(FieldKind::Vector3, u_exact.grid())
        } else {
            boundary_extension(&u_exact)?
        };
        Ok(Self {
            label: label.into(),
            lambda,
            u_exact,
            f,
            g,
        })
    }
}

/// `count` homogeneous then `count` inhomogeneous cases, each a sum of two random modes.
pub fn manufactured_family(grid: &Arc<SpectralGrid>, count: usize, lambda: f64, seed: u64) -> Result<Vec<ManufacturedCase>> {
    (0..2 * count)
        .map(|i| {
            let homogeneous = i < count;
            let mut s = Stream::new(seed, i as u64);
            let mut pick = |span: i64| ((s.uniform() * (2 * span + 1) as f64).floor() as i64 - span).clamp(-span, span);
            let modes = [(pick(2), pick(2)), (pick(2), pick(1))];
            let mut s = Stream::new(seed, (1 << 32) + i as u64);
            let terms: Vec<ModeTerm> = modes.iter().map(|&(m, k)| ModeTerm::random(m, k, homogeneous, &mut s)).collect();
            let u = field_from_terms(grid, &terms)?;
            let label = format!("{}-{i}", if homogeneous { "homogeneous" } else { "inhomogeneous" });
            ManufacturedCase::new(label, lambda, u, homogeneous)
        })
        .collect()
}

/// Solve `lambda u - Laplacian u = f` with `u . n = 0`, `(curl u) x n = g` at `r = 1`.
pub fn solve_inhomogeneous(bank: &ModeBank, f: &SpectralField, g: &SpectralField, lambda: f64) -> Result<ResolventSolution> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::Precondition(format!("shift lambda = {lambda} must be at least 1")));
    }
    g.require(FieldKind::Vector3)?;
    f.same_layout(g)?;
    let grid = g.grid();
    let last = grid.n_r() - 1;
    let mut normal = 0.0f64;
    for im in 0..grid.n_theta() {
        for ik in 0..grid.n_z() {
            normal = normal.max(g.profile(0, im, ik)[last].norm());
        }
    }
    if normal > 1e-12 * g.max_abs().max(1.0) {
        return Err(Error::Precondition(format!("boundary datum has normal component {normal:.3e}")));
    }
    solve_with_boundary(bank, C64::new(lambda, 0.0), f, Some(g))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioRow {
    pub label: String,
    pub order: usize,
    pub p: f64,
    pub ratio: f64,
    /// `|u - u_exact|_2 / |u_exact|_2`.
    pub recovery_error: f64,
    pub residual: f64,
}

pub fn regularity_ratio(bank: &ModeBank, case: &ManufacturedCase, order: usize, p: f64) -> Result<RatioRow> {
    if order > 2 {
        return Err(Error::Precondition(format!("order {order} > 2")));
    }
    if case.f.max_abs() == 0.0 && case.g.max_abs() == 0.0 {
        return Err(Error::Precondition("zero data: ratio is 0/0".into()));
    }
    let sol = solve_inhomogeneous(bank, &case.f, &case.g, case.lambda)?;
    let u = &sol.u;
    let top = norm(u, NormRequest::sobolev(order + 2, p))?;
    let denom = norm(&case.f, NormRequest::sobolev(order, p))?
        + norm(&case.g, NormRequest::sobolev(order + 1, p))?
        + norm(u, NormRequest::sobolev(1, p))?;
    let scale = l2_norm(&case.u_exact);
    Ok(RatioRow {
        label: case.label.clone(),
        order,
        p,
        ratio: top / denom,
        recovery_error: if scale > 0.0 { l2_norm(&u.sub(&case.u_exact)?) / scale } else { l2_norm(u) },
        residual: sol.mode_residual,
    })
}

pub fn family_ratios(bank: &ModeBank, cases: &[ManufacturedCase], order: usize, p: f64) -> Result<Vec<RatioRow>> {
    cases.par_iter().map(|c| regularity_ratio(bank, c, order, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenfields::{Eigenfield, EigenfieldFamily};
    use crate::field::sample_function;
    use crate::resolvent::solve_resolvent;
    use std::f64::consts::PI;

    fn grid(n_r: usize) -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new(n_r, 8, 8, 2.0 * PI).unwrap())
    }

    fn boundary_values(u: &SpectralField) -> f64 {
        let g = boundary_extension(u).unwrap();
        let grid = u.grid();
        let last = grid.n_r() - 1;
        let mut worst = 0.0f64;
        for im in 0..grid.n_theta() {
            for ik in 0..grid.n_z() {
                worst = worst.max(u.profile(0, im, ik)[last].norm());
                worst = worst.max(g.profile(1, im, ik)[last].norm()).max(g.profile(2, im, ik)[last].norm());
            }
        }
        worst
    }

    #[test]
    fn homogeneous_terms_satisfy_all_rows() {
        let g = grid(16);
        let mut s = Stream::new(3, 0);
        for (m, k) in [(0, 0), (1, 1), (-2, 1), (2, -2)] {
            let t = ModeTerm::random(m, k, true, &mut s);
            assert!(t.boundary_rows().iter().all(|v| v.norm() < 1e-13));
            let u = field_from_terms(&g, &[t]).unwrap();
            assert!(boundary_values(&u) < 1e-11 * u.max_abs());
        }
    }

    #[test]
    fn eigenfield_data_recovers_scaled_eigenfield() {
        let g = grid(20);
        let bank = ModeBank::new(&g).unwrap();
        let e = Eigenfield::new(EigenfieldFamily::Poloidal, 1, 1, 1).build(&g).unwrap();
        let zero = SpectralField::zeros(FieldKind::Vector3, &g);
        let u = solve_inhomogeneous(&bank, &e.field, &zero, 1.0).unwrap().u;
        let expect = e.field.scale(1.0 / (1.0 + e.eigenvalue));
        assert!(u.sub(&expect).unwrap().max_abs() < 1e-10 * expect.max_abs());
    }

    #[test]
    fn swirl_profile_recovered_with_boundary_datum() {
        let g = grid(16);
        let bank = ModeBank::new(&g).unwrap();
        let u = sample_function(FieldKind::Vector3, &g, |c, r, _, z| if c == 1 { (1.0 - r * r) * r * z.cos() } else { 0.0 });
        let case = ManufacturedCase::new("swirl", 1.0, u, false).unwrap();
        let sol = solve_inhomogeneous(&bank, &case.f, &case.g, 1.0).unwrap();
        assert!(sol.mode_residual < 1e-9);
        assert!(sol.u.sub(&case.u_exact).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn zero_data_and_bad_inputs() {
        let g = grid(12);
        let bank = ModeBank::new(&g).unwrap();
        let zero = SpectralField::zeros(FieldKind::Vector3, &g);
        let u = solve_inhomogeneous(&bank, &zero, &zero, 1.0).unwrap().u;
        assert_eq!(u.max_abs(), 0.0);
        let case = ManufacturedCase::new("zero", 1.0, zero.clone(), true).unwrap();
        assert!(regularity_ratio(&bank, &case, 0, 2.0).is_err());
        assert!(solve_inhomogeneous(&bank, &zero, &zero, 0.5).is_err());
        let radial = sample_function(FieldKind::Vector3, &g, |c, r, _, _| if c == 0 { r } else { 0.0 });
        assert!(solve_inhomogeneous(&bank, &zero, &radial, 1.0).is_err());
    }

    #[test]
    fn zero_boundary_path_is_the_resolvent() {
        let g = grid(16);
        let bank = ModeBank::new(&g).unwrap();
        let cases = manufactured_family(&g, 2, 1.0, 5).unwrap();
        let zero = SpectralField::zeros(FieldKind::Vector3, &g);
        for c in &cases {
            let a = solve_inhomogeneous(&bank, &c.f, &zero, 1.0).unwrap().u;
            let b = solve_resolvent(&bank, C64::new(1.0, 0.0), &c.f).unwrap().u;
            assert!(a.sub(&b).unwrap().max_abs() <= 1e-11 * b.max_abs());
        }
    }

    #[test]
    fn solver_is_linear_in_data() {
        let g = grid(16);
        let bank = ModeBank::new(&g).unwrap();
        let cases = manufactured_family(&g, 1, 2.0, 9).unwrap();
        let (a, b) = (&cases[0], &cases[1]);
        let sa = solve_inhomogeneous(&bank, &a.f, &a.g, 2.0).unwrap().u;
        let sb = solve_inhomogeneous(&bank, &b.f, &b.g, 2.0).unwrap().u;
        let f = a.f.axpy(-3.0, &b.f).unwrap();
        let gg = a.g.axpy(-3.0, &b.g).unwrap();
        let s = solve_inhomogeneous(&bank, &f, &gg, 2.0).unwrap().u;
        let d = s.sub(&sa.axpy(-3.0, &sb).unwrap()).unwrap().max_abs();
        assert!(d < 1e-11 * s.max_abs());
    }

    #[test]
    fn family_recovered_and_ratio_grid_independent() {
        let mut sups = Vec::new();
        for n_r in [16, 24] {
            let g = grid(n_r);
            let bank = ModeBank::new(&g).unwrap();
            let cases = manufactured_family(&g, 3, 1.0, 1).unwrap();
            let rows = family_ratios(&bank, &cases, 0, 2.0).unwrap();
            for r in &rows {
                assert!(r.recovery_error < 1e-8, "{}: {}", r.label, r.recovery_error);
            }
            sups.push(rows.iter().map(|r| r.ratio).fold(0.0, f64::max));
        }
        assert!((sups[0] - sups[1]).abs() < 1e-6 * sups[1]);
    }
}
