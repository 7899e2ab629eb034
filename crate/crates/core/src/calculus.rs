//! Covariant differential operators in the orthonormal frame `(e_r, e_theta, e_z)`.
//!
//! The gradient of a rank-`R` tensor appends the derivative index last:
//! `(grad T)_{a d} = d_d T_a` plus frame connection terms in the `theta`
//! direction, where `d_theta e_r = e_theta`, `d_theta e_theta = -e_r`.

use std::sync::Arc;

use crate::error::Result;
use crate::field::{FieldKind, SpectralField};
use crate::grid::SpectralGrid;
use crate::linalg::{real_matvec, C64};

const R: usize = 0;
const TH: usize = 1;
const Z: usize = 2;

fn digits(mut c: usize, rank: usize) -> Vec<usize> {
    let mut d = vec![0; rank];
    for s in (0..rank).rev() {
        d[s] = c % 3;
        c /= 3;
    }
    d
}

fn index(d: &[usize]) -> usize {
    d.iter().fold(0, |acc, &x| acc * 3 + x)
}

/// Gradient of a single Fourier mode `exp(i (m theta + xi z))` of a rank-`rank`
/// tensor given by its component profiles; returns `3^(rank+1)` profiles.
pub fn mode_gradient(grid: &SpectralGrid, rank: usize, m: i64, xi: f64, comps: &[&[C64]]) -> Vec<Vec<C64>> {
    let kind = FieldKind::from_rank(rank);
    let n = grid.n_r();
    let r = grid.radial_nodes();
    let mut out = vec![Vec::new(); comps.len() * 3];
    for (a, t) in comps.iter().enumerate() {
        let da = digits(a, rank);
        out[a * 3 + R] = real_matvec(grid.diff(kind.parity(a, m)), n, t);

        let mut dth: Vec<C64> = t.iter().map(|v| v * C64::new(0.0, m as f64)).collect();
        for s in 0..rank {
            let mut d2 = da.clone();
            let sign = match da[s] {
                R => {
                    d2[s] = TH;
                    -1.0
                }
                TH => {
                    d2[s] = R;
                    1.0
                }
                _ => continue,
            };
            for (o, v) in dth.iter_mut().zip(comps[index(&d2)].iter()) {
                *o += v * sign;
            }
        }
        for (o, ri) in dth.iter_mut().zip(r) {
            *o /= *ri;
        }
        out[a * 3 + TH] = dth;
        out[a * 3 + Z] = t.iter().map(|v| v * C64::new(0.0, xi)).collect();
    }
    out
}

pub fn gradient(field: &SpectralField) -> SpectralField {
    let kind = field.kind();
    let rank = kind.rank();
    let g = Arc::clone(field.grid());
    let mut out = SpectralField::zeros(FieldKind::from_rank(rank + 1), &g);
    for im in 0..g.n_theta() {
        for ik in 0..g.n_z() {
            if g.is_nyquist(im, ik) {
                continue;
            }
            let comps: Vec<&[C64]> = (0..kind.components()).map(|a| field.profile(a, im, ik)).collect();
            if comps.iter().all(|t| t.iter().all(|v| *v == C64::new(0.0, 0.0))) {
                continue;
            }
            let grad = mode_gradient(&g, rank, g.m_of(im), g.xi_of(ik), &comps);
            for (c, p) in grad.into_iter().enumerate() {
                out.profile_mut(c, im, ik).copy_from_slice(&p);
            }
        }
    }
    out
}

/// Contract the last tensor index with the derivative.
pub fn divergence(field: &SpectralField) -> Result<SpectralField> {
    let rank = field.kind().rank();
    if rank == 0 {
        return Err(crate::Error::KindMismatch("divergence of a scalar".into()));
    }
    let grad = gradient(field);
    let out_kind = FieldKind::from_rank(rank - 1);
    let g = Arc::clone(field.grid());
    let mut out = SpectralField::zeros(out_kind, &g);
    for b in 0..out_kind.components() {
        for d in 0..3 {
            let src = (b * 3 + d) * 3 + d;
            for im in 0..g.n_theta() {
                for ik in 0..g.n_z() {
                    let s = grad.profile(src, im, ik).to_vec();
                    for (o, v) in out.profile_mut(b, im, ik).iter_mut().zip(&s) {
                        *o += v;
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn curl(field: &SpectralField) -> Result<SpectralField> {
    field.require(FieldKind::Vector3)?;
    let grad = gradient(field);
    let g = Arc::clone(field.grid());
    let mut out = SpectralField::zeros(FieldKind::Vector3, &g);
    // (curl u)_a = eps_{abc} d_b u_c = eps_{abc} grad[c, b]
    let terms = [(R, TH, Z, 1.0), (R, Z, TH, -1.0), (TH, Z, R, 1.0), (TH, R, Z, -1.0), (Z, R, TH, 1.0), (Z, TH, R, -1.0)];
    for (a, b, c, sign) in terms {
        for im in 0..g.n_theta() {
            for ik in 0..g.n_z() {
                let s = grad.profile(c * 3 + b, im, ik).to_vec();
                for (o, v) in out.profile_mut(a, im, ik).iter_mut().zip(&s) {
                    *o += v * sign;
                }
            }
        }
    }
    Ok(out)
}

/// Componentwise covariant Laplacian `div grad`.
pub fn laplacian(field: &SpectralField) -> SpectralField {
    divergence(&gradient(field)).expect("gradient has rank >= 1")
}

/// `grad^j field`.
pub fn gradient_power(field: &SpectralField, order: usize) -> SpectralField {
    let mut f = field.clone();
    for _ in 0..order {
        f = gradient(&f);
    }
    f
}

/// Outer product `u (x) v` of two vector fields evaluated pseudospectrally on
/// the 3/2-padded grid.
pub fn outer_product(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    use crate::field::{from_physical, to_physical, PhysicalField};
    u.require(FieldKind::Vector3)?;
    u.same_layout(v)?;
    let pu = to_physical(u, true);
    let pv = to_physical(v, true);
    let block = pu.m_theta * pu.m_z * pu.n_r;
    let mut values = vec![C64::new(0.0, 0.0); 9 * block];
    for a in 0..3 {
        for b in 0..3 {
            let dst = &mut values[(a * 3 + b) * block..(a * 3 + b + 1) * block];
            let xa = &pu.values[a * block..(a + 1) * block];
            let yb = &pv.values[b * block..(b + 1) * block];
            for ((o, x), y) in dst.iter_mut().zip(xa).zip(yb) {
                *o = C64::new(x.re * y.re, 0.0);
            }
        }
    }
    let phys = PhysicalField {
        kind: FieldKind::Tensor(2),
        n_r: pu.n_r,
        m_theta: pu.m_theta,
        m_z: pu.m_z,
        values,
    };
    from_physical(&phys, u.grid())
}

/// Advective derivative `(u . grad) v` for vector fields, products on the padded grid.
pub fn advection(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    use crate::field::{from_physical, to_physical, PhysicalField};
    u.require(FieldKind::Vector3)?;
    u.same_layout(v)?;
    let pu = to_physical(u, true);
    let pg = to_physical(&gradient(v), true);
    let block = pu.m_theta * pu.m_z * pu.n_r;
    let mut values = vec![C64::new(0.0, 0.0); 3 * block];
    for a in 0..3 {
        for d in 0..3 {
            let gd = &pg.values[(a * 3 + d) * block..(a * 3 + d + 1) * block];
            let ud = &pu.values[d * block..(d + 1) * block];
            for (o, (x, y)) in values[a * block..(a + 1) * block].iter_mut().zip(ud.iter().zip(gd)) {
                *o += C64::new(x.re * y.re, 0.0);
            }
        }
    }
    let phys = PhysicalField {
        kind: FieldKind::Vector3,
        n_r: pu.n_r,
        m_theta: pu.m_theta,
        m_z: pu.m_z,
        values,
    };
    from_physical(&phys, u.grid())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_j, bessel_j_zeros};
    use crate::field::sample_function;
    use std::f64::consts::PI;

    fn grid(n_r: usize, nt: usize, nz: usize) -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new(n_r, nt, nz, 2.0 * PI).unwrap())
    }

    #[test]
    fn gradient_of_quadratic_harmonic_is_curl_free() {
        let g = grid(8, 8, 4);
        // x1^2 - x2^2 = r^2 cos 2 theta
        let phi = sample_function(FieldKind::Scalar, &g, |_, r, t, _| r * r * (2.0 * t).cos());
        let gphi = gradient(&phi);
        assert!(curl(&gphi).unwrap().max_abs() < 1e-12);
        let lap = laplacian(&phi);
        assert!(lap.max_abs() < 1e-11);
        // grad = (2 r cos 2t, -2 r sin 2t, 0)
        let v = gphi.eval_at_node(1, 3, 0.4, 0.0);
        let r3 = g.radial_nodes()[3];
        assert!((v.re + 2.0 * r3 * (0.8f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn axial_unit_field() {
        let g = grid(6, 4, 4);
        let ez = sample_function(FieldKind::Vector3, &g, |c, _, _, _| if c == 2 { 1.0 } else { 0.0 });
        assert!(divergence(&ez).unwrap().max_abs() < 1e-14);
        assert!(curl(&ez).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn cartesian_unit_field_has_zero_gradient() {
        // e_1 = cos t e_r - sin t e_theta
        let g = grid(6, 8, 4);
        let e1 = sample_function(FieldKind::Vector3, &g, |c, _, t, _| match c {
            0 => t.cos(),
            1 => -t.sin(),
            _ => 0.0,
        });
        assert!(gradient(&e1).max_abs() < 1e-12);
    }

    #[test]
    fn perp_gradient_of_bessel_stream_function() {
        let g = grid(32, 4, 4);
        let j = bessel_j_zeros(0, 1)[0];
        // u = grad_perp psi = (d_theta psi / r, -d_r psi) with psi = J0(j r)
        let u = sample_function(FieldKind::Vector3, &g, |c, r, _, _| match c {
            1 => j * bessel_j(1, j * r),
            _ => 0.0,
        });
        assert!(divergence(&u).unwrap().max_abs() < 1e-11);
        let w = curl(&u).unwrap();
        let expect = sample_function(FieldKind::Scalar, &g, |_, r, _, _| j * j * bessel_j(0, j * r));
        let err = w.component(2).unwrap().sub(&expect).unwrap().max_abs();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn vector_identities_on_trig_fields() {
        let g = grid(10, 8, 8);
        let u = sample_function(FieldKind::Vector3, &g, |c, r, t, z| {
            let x = r * t.cos();
            let y = r * t.sin();
            // Cartesian field (y z, x^2, x y) expressed in cylindrical components
            let (ux, uy, uz) = (y * z.sin(), x * x + z.cos(), x * y);
            match c {
                0 => ux * t.cos() + uy * t.sin(),
                1 => -ux * t.sin() + uy * t.cos(),
                _ => uz,
            }
        });
        let dc = divergence(&curl(&u).unwrap()).unwrap();
        assert!(dc.max_abs() < 1e-11);
        let phi = sample_function(FieldKind::Scalar, &g, |_, r, t, z| r.powi(3) * (3.0 * t).sin() * z.cos());
        assert!(curl(&gradient(&phi)).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn tensor_divergence_matches_advective_form() {
        let g = grid(10, 8, 8);
        let u = sample_function(FieldKind::Vector3, &g, |c, r, t, z| {
            let x = r * t.cos();
            let y = r * t.sin();
            let (ux, uy, uz) = (0.3 + y, x * z.cos(), x);
            match c {
                0 => ux * t.cos() + uy * t.sin(),
                1 => -ux * t.sin() + uy * t.cos(),
                _ => uz,
            }
        });
        let lhs = divergence(&outer_product(&u, &u).unwrap()).unwrap();
        let divu = divergence(&u).unwrap();
        assert!(divu.max_abs() < 1e-12);
        let rhs = advection(&u, &u).unwrap();
        let err = lhs.sub(&rhs).unwrap().max_abs();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn divergence_of_scalar_is_rejected() {
        let g = grid(6, 4, 4);
        let s = SpectralField::zeros(FieldKind::Scalar, &g);
        assert!(divergence(&s).is_err());
        assert!(curl(&s).is_err());
    }
}
