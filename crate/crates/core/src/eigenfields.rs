//! Closed-form eigenfields of the Laplacian with the Navier-type conditions,
//! built from Bessel functions. They serve as oracles for every layer above
//! the disk operators.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j, bessel_j_prime, bessel_j_prime_zeros, bessel_j_zeros};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::grid::SpectralGrid;
use crate::linalg::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenfieldFamily {
    /// `grad_perp psi` with `psi = J_m(j_{m,n} r) e^{i m theta} e^{i xi z}`; eigenvalue `j^2 + xi^2`.
    Horizontal,
    /// `J_m(j'_{m,n} r) e^{i m theta} e_z`, axially constant; eigenvalue `j'^2`.
    Axial,
    /// `curl curl (chi e_z)` with `chi = J_m(j'_{m,n} r) e^{i m theta} e^{i xi z}`; eigenvalue `j'^2 + xi^2`.
    Poloidal,
    /// `grad phi` with `phi = J_m(j'_{m,n} r) e^{i m theta} e^{i xi z}`; a gradient, not solenoidal.
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eigenfield {
    pub family: EigenfieldFamily,
    pub m: i64,
    /// Axial wavenumber index (`xi = 2 pi k / L`).
    pub k: i64,
    /// Root index, starting at 1 (excluding the trivial root `j'_{0,0} = 0`).
    pub n: usize,
}

pub struct BuiltEigenfield {
    pub field: SpectralField,
    pub eigenvalue: f64,
}

impl Eigenfield {
    pub fn new(family: EigenfieldFamily, m: i64, k: i64, n: usize) -> Self {
        Self { family, m, k, n }
    }

    pub fn radial_root(&self) -> f64 {
        let n = self.n.max(1);
        match self.family {
            EigenfieldFamily::Horizontal => bessel_j_zeros(self.m, n)[n - 1],
            _ => bessel_j_prime_zeros(self.m, n)[n - 1],
        }
    }

    /// Complex profiles `[u^r, u^theta, u^z]` of the `(m, k)` mode.
    pub fn mode_profiles(&self, grid: &SpectralGrid) -> [Vec<C64>; 3] {
        let j = self.radial_root();
        let xi = 2.0 * std::f64::consts::PI * self.k as f64 / grid.period_l();
        let m = self.m;
        let mf = m as f64;
        let r = grid.radial_nodes();
        let f = |x: f64| bessel_j(m, j * x);
        let fp = |x: f64| j * bessel_j_prime(m, j * x);
        let i = C64::new(0.0, 1.0);
        let (ur, ut, uz): (Vec<C64>, Vec<C64>, Vec<C64>) = match self.family {
            EigenfieldFamily::Horizontal => (
                r.iter().map(|&x| i * mf * f(x) / x).collect(),
                r.iter().map(|&x| C64::new(-fp(x), 0.0)).collect(),
                vec![C64::new(0.0, 0.0); r.len()],
            ),
            EigenfieldFamily::Axial => (
                vec![C64::new(0.0, 0.0); r.len()],
                vec![C64::new(0.0, 0.0); r.len()],
                r.iter().map(|&x| C64::new(f(x), 0.0)).collect(),
            ),
            EigenfieldFamily::Poloidal => (
                r.iter().map(|&x| i * xi * fp(x)).collect(),
                r.iter().map(|&x| C64::new(-xi * mf * f(x) / x, 0.0)).collect(),
                r.iter().map(|&x| C64::new(j * j * f(x), 0.0)).collect(),
            ),
            EigenfieldFamily::Gradient => (
                r.iter().map(|&x| C64::new(fp(x), 0.0)).collect(),
                r.iter().map(|&x| i * mf * f(x) / x).collect(),
                r.iter().map(|&x| i * xi * f(x)).collect(),
            ),
        };
        [ur, ut, uz]
    }

    pub fn eigenvalue(&self, grid: &SpectralGrid) -> f64 {
        let j = self.radial_root();
        let xi = 2.0 * std::f64::consts::PI * self.k as f64 / grid.period_l();
        match self.family {
            EigenfieldFamily::Axial => j * j,
            _ => j * j + xi * xi,
        }
    }

    /// Real field `2 Re(mode)` (or the mode itself when it is self-conjugate).
    pub fn build(&self, grid: &Arc<SpectralGrid>) -> Result<BuiltEigenfield> {
        let k = if self.family == EigenfieldFamily::Axial { 0 } else { self.k };
        let me = Self { k, ..*self };
        let limit_m = grid.n_theta() as i64 / 2 - 1;
        let limit_k = grid.n_z() as i64 / 2 - 1;
        if self.m.abs() > limit_m {
            return Err(Error::OutOfBand { m: self.m, limit: limit_m });
        }
        if k.abs() > limit_k {
            return Err(Error::Precondition(format!("axial index {k} outside |k| <= {limit_k}")));
        }
        if self.n == 0 {
            return Err(Error::Precondition("root index starts at 1".into()));
        }
        let im = grid.index_of_m(self.m).unwrap();
        let ik = grid.index_of_k(k).unwrap();
        let profiles = me.mode_profiles(grid);
        let mut field = SpectralField::zeros(FieldKind::Vector3, grid);
        let (jm, jk) = grid.conjugate_mode(im, ik).unwrap();
        for (c, p) in profiles.iter().enumerate() {
            if (jm, jk) == (im, ik) {
                let real: Vec<C64> = p.iter().map(|v| C64::new(v.re, 0.0)).collect();
                field.profile_mut(c, im, ik).copy_from_slice(&real);
            } else {
                field.profile_mut(c, im, ik).copy_from_slice(p);
                let conj: Vec<C64> = p.iter().map(|v| v.conj()).collect();
                field.profile_mut(c, jm, jk).copy_from_slice(&conj);
            }
        }
        Ok(BuiltEigenfield {
            field,
            eigenvalue: me.eigenvalue(grid),
        })
    }
}
