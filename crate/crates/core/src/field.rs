//! Spectral fields and the angular/axial transforms.
//!
//! Coefficients are radial nodal values per Fourier mode, laid out as
//! `((component * n_theta + im) * n_z + ik) * n_r + ir`, so that
//! `f(r_i, theta, z) = sum_{m,k} c[m,k,i] exp(i (m theta + xi_k z))`.
//! Tensor components use cylindrical indices `0 = r`, `1 = theta`, `2 = z`,
//! combined in base 3 with the first slot most significant.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Parity, SpectralGrid};
use crate::linalg::C64;

const ZERO: C64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Scalar,
    Vector3,
    /// Tensor of the given rank (at least 2).
    Tensor(usize),
}

impl FieldKind {
    pub fn from_rank(rank: usize) -> Self {
        match rank {
            0 => FieldKind::Scalar,
            1 => FieldKind::Vector3,
            r => FieldKind::Tensor(r),
        }
    }

    pub fn rank(self) -> usize {
        match self {
            FieldKind::Scalar => 0,
            FieldKind::Vector3 => 1,
            FieldKind::Tensor(r) => r,
        }
    }

    pub fn components(self) -> usize {
        3usize.pow(self.rank() as u32)
    }

    /// Number of `r`/`theta` slots in component `c`; a component at angular
    /// mode `m` has radial parity `m + planar_slots(c)`.
    pub fn planar_slots(self, c: usize) -> usize {
        let mut c = c;
        let mut q = 0;
        for _ in 0..self.rank() {
            if c % 3 != 2 {
                q += 1;
            }
            c /= 3;
        }
        q
    }

    pub fn parity(self, c: usize, m: i64) -> Parity {
        Parity::of(m + self.planar_slots(c) as i64)
    }
}

#[derive(Clone, Debug)]
pub struct SpectralField {
    kind: FieldKind,
    grid: Arc<SpectralGrid>,
    coeffs: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(kind: FieldKind, grid: &Arc<SpectralGrid>) -> Self {
        let len = kind.components() * grid.n_modes() * grid.n_r();
        Self {
            kind,
            grid: Arc::clone(grid),
            coeffs: vec![ZERO; len],
        }
    }

    pub fn from_coeffs(kind: FieldKind, grid: &Arc<SpectralGrid>, coeffs: Vec<C64>) -> Result<Self> {
        let expected = kind.components() * grid.n_modes() * grid.n_r();
        if coeffs.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self {
            kind,
            grid: Arc::clone(grid),
            coeffs,
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }
    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }
    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn n_components(&self) -> usize {
        self.kind.components()
    }

    fn offset(&self, c: usize, im: usize, ik: usize) -> usize {
        let g = &self.grid;
        ((c * g.n_theta() + im) * g.n_z() + ik) * g.n_r()
    }

    /// Radial profile of component `c` at mode index `(im, ik)`.
    pub fn profile(&self, c: usize, im: usize, ik: usize) -> &[C64] {
        let o = self.offset(c, im, ik);
        &self.coeffs[o..o + self.grid.n_r()]
    }

    pub fn profile_mut(&mut self, c: usize, im: usize, ik: usize) -> &mut [C64] {
        let o = self.offset(c, im, ik);
        let n = self.grid.n_r();
        &mut self.coeffs[o..o + n]
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn same_layout(&self, other: &SpectralField) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::KindMismatch(format!("{:?} vs {:?}", self.kind, other.kind)));
        }
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn require(&self, kind: FieldKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch(format!("expected {kind:?}, found {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|c| c * a)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            kind: self.kind,
            grid: Arc::clone(&self.grid),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self {
            kind: self.kind,
            grid: Arc::clone(&self.grid),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + y * a).collect(),
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest violation of `c(m,k) = conj(c(-m,-k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let mut worst = 0.0f64;
        for c in 0..self.n_components() {
            for im in 0..g.n_theta() {
                for ik in 0..g.n_z() {
                    let a = self.profile(c, im, ik);
                    match g.conjugate_mode(im, ik) {
                        Some((jm, jk)) => {
                            let b = self.profile(c, jm, jk);
                            for (x, y) in a.iter().zip(b) {
                                worst = worst.max((x - y.conj()).norm());
                            }
                        }
                        None => {
                            for x in a {
                                worst = worst.max(x.norm());
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    /// Zero the Nyquist modes, which cannot carry real band-limited content.
    pub fn drop_nyquist(&mut self) {
        let (nt, nz) = (self.grid.n_theta(), self.grid.n_z());
        for c in 0..self.n_components() {
            for im in 0..nt {
                for ik in 0..nz {
                    if self.grid.is_nyquist(im, ik) {
                        self.profile_mut(c, im, ik).fill(ZERO);
                    }
                }
            }
        }
    }

    /// Replace the field by its Hermitian-symmetric part, `(c + conj(c~))/2`.
    pub fn symmetrize(&self) -> Self {
        let g = Arc::clone(&self.grid);
        let mut out = Self::zeros(self.kind, &g);
        for c in 0..self.n_components() {
            for im in 0..g.n_theta() {
                for ik in 0..g.n_z() {
                    if let Some((jm, jk)) = g.conjugate_mode(im, ik) {
                        let a = self.profile(c, im, ik).to_vec();
                        let b = self.profile(c, jm, jk).to_vec();
                        for (o, (x, y)) in out.profile_mut(c, im, ik).iter_mut().zip(a.iter().zip(&b)) {
                            *o = (x + y.conj()) * 0.5;
                        }
                    }
                }
            }
        }
        out
    }

    /// Component `c` as a scalar field.
    pub fn component(&self, c: usize) -> Result<Self> {
        if c >= self.n_components() {
            return Err(Error::KindMismatch(format!("component {c} of {:?}", self.kind)));
        }
        let block = self.grid.n_modes() * self.grid.n_r();
        Ok(Self {
            kind: FieldKind::Scalar,
            grid: Arc::clone(&self.grid),
            coeffs: self.coeffs[c * block..(c + 1) * block].to_vec(),
        })
    }

    /// Stack scalar fields into a field of the given kind.
    pub fn from_components(kind: FieldKind, parts: &[SpectralField]) -> Result<Self> {
        if parts.len() != kind.components() {
            return Err(Error::SizeMismatch {
                expected: kind.components(),
                found: parts.len(),
            });
        }
        let grid = Arc::clone(&parts[0].grid);
        let mut coeffs = Vec::with_capacity(parts.len() * grid.n_modes() * grid.n_r());
        for p in parts {
            p.require(FieldKind::Scalar)?;
            if *p.grid != *grid {
                return Err(Error::GridMismatch);
            }
            coeffs.extend_from_slice(&p.coeffs);
        }
        Ok(Self { kind, grid, coeffs })
    }

    /// Phase twist `c(m,k) -> c(m,k) exp(-i xi_k z0)`, i.e. `f(z) -> f(z - z0)`.
    pub fn shift_axial(&self, z0: f64) -> Self {
        let g = Arc::clone(&self.grid);
        let mut out = self.clone();
        for c in 0..self.n_components() {
            for im in 0..g.n_theta() {
                for ik in 0..g.n_z() {
                    let ph = C64::from_polar(1.0, -g.xi_of(ik) * z0);
                    for v in out.profile_mut(c, im, ik) {
                        *v *= ph;
                    }
                }
            }
        }
        out
    }

    /// Pointwise value at `(r_i, theta, z)` by direct summation.
    pub fn eval_at_node(&self, c: usize, ir: usize, theta: f64, z: f64) -> C64 {
        let g = &self.grid;
        let mut acc = ZERO;
        for im in 0..g.n_theta() {
            for ik in 0..g.n_z() {
                let v = self.profile(c, im, ik)[ir];
                if v != ZERO {
                    acc += v * C64::from_polar(1.0, g.m_of(im) as f64 * theta + g.xi_of(ik) * z);
                }
            }
        }
        acc
    }
}

/// Samples of a field on a tensor-product physical grid
/// `(r_i, theta_j = 2 pi j / m_theta, z_l = L l / m_z)`, laid out as
/// `((component * m_theta + j) * m_z + l) * n_r + i`.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    pub kind: FieldKind,
    pub n_r: usize,
    pub m_theta: usize,
    pub m_z: usize,
    pub values: Vec<C64>,
}

impl PhysicalField {
    pub fn index(&self, c: usize, j: usize, l: usize, i: usize) -> usize {
        ((c * self.m_theta + j) * self.m_z + l) * self.n_r + i
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn n_components(&self) -> usize {
        self.kind.components()
    }
}

/// Physical grid sizes: unpadded or with the 3/2 dealiasing rule.
pub fn physical_sizes(grid: &SpectralGrid, padded: bool) -> (usize, usize) {
    if padded {
        (3 * grid.n_theta() / 2, 3 * grid.n_z() / 2)
    } else {
        (grid.n_theta(), grid.n_z())
    }
}

struct Plans {
    theta: Arc<dyn Fft<f64>>,
    z: Arc<dyn Fft<f64>>,
}

fn plans(m_theta: usize, m_z: usize, inverse: bool) -> Plans {
    let mut planner = FftPlanner::<f64>::new();
    if inverse {
        Plans {
            theta: planner.plan_fft_inverse(m_theta),
            z: planner.plan_fft_inverse(m_z),
        }
    } else {
        Plans {
            theta: planner.plan_fft_forward(m_theta),
            z: planner.plan_fft_forward(m_z),
        }
    }
}

/// 2D transform of a `m_theta x m_z` row-major block in place.
fn transform_2d(p: &Plans, block: &mut [C64], m_theta: usize, m_z: usize) {
    for row in block.chunks_mut(m_z) {
        p.z.process(row);
    }
    let mut col = vec![ZERO; m_theta];
    for l in 0..m_z {
        for j in 0..m_theta {
            col[j] = block[j * m_z + l];
        }
        p.theta.process(&mut col);
        for j in 0..m_theta {
            block[j * m_z + l] = col[j];
        }
    }
}

pub fn to_physical(field: &SpectralField, padded: bool) -> PhysicalField {
    let g = field.grid();
    let (mt, mz) = physical_sizes(g, padded);
    let n_r = g.n_r();
    let nc = field.n_components();
    let p = plans(mt, mz, true);
    let blocks: Vec<Vec<C64>> = (0..nc * n_r)
        .into_par_iter()
        .map(|item| {
            let (c, ir) = (item / n_r, item % n_r);
            let mut block = vec![ZERO; mt * mz];
            for im in 0..g.n_theta() {
                let jm = g.m_of(im).rem_euclid(mt as i64) as usize;
                for ik in 0..g.n_z() {
                    if g.is_nyquist(im, ik) {
                        continue;
                    }
                    let jk = g.k_of(ik).rem_euclid(mz as i64) as usize;
                    block[jm * mz + jk] = field.profile(c, im, ik)[ir];
                }
            }
            transform_2d(&p, &mut block, mt, mz);
            block
        })
        .collect();
    let mut out = PhysicalField {
        kind: field.kind(),
        n_r,
        m_theta: mt,
        m_z: mz,
        values: vec![ZERO; nc * mt * mz * n_r],
    };
    for (item, block) in blocks.into_iter().enumerate() {
        let (c, ir) = (item / n_r, item % n_r);
        for j in 0..mt {
            for l in 0..mz {
                let idx = out.index(c, j, l, ir);
                out.values[idx] = block[j * mz + l];
            }
        }
    }
    out
}

/// Inverse of [`to_physical`] on band-limited content; Nyquist modes are dropped.
pub fn from_physical(samples: &PhysicalField, grid: &Arc<SpectralGrid>) -> Result<SpectralField> {
    let n_r = grid.n_r();
    if samples.n_r != n_r {
        return Err(Error::SizeMismatch {
            expected: n_r,
            found: samples.n_r,
        });
    }
    let (mt, mz) = (samples.m_theta, samples.m_z);
    if mt < grid.n_theta() || mz < grid.n_z() {
        return Err(Error::SizeMismatch {
            expected: grid.n_theta() * grid.n_z(),
            found: mt * mz,
        });
    }
    let nc = samples.n_components();
    if samples.values.len() != nc * mt * mz * n_r {
        return Err(Error::SizeMismatch {
            expected: nc * mt * mz * n_r,
            found: samples.values.len(),
        });
    }
    let p = plans(mt, mz, false);
    let norm = 1.0 / (mt * mz) as f64;
    let blocks: Vec<Vec<C64>> = (0..nc * n_r)
        .into_par_iter()
        .map(|item| {
            let (c, ir) = (item / n_r, item % n_r);
            let mut block = vec![ZERO; mt * mz];
            for j in 0..mt {
                for l in 0..mz {
                    block[j * mz + l] = samples.values[samples.index(c, j, l, ir)];
                }
            }
            transform_2d(&p, &mut block, mt, mz);
            block
        })
        .collect();
    let mut out = SpectralField::zeros(samples.kind, grid);
    for (item, block) in blocks.into_iter().enumerate() {
        let (c, ir) = (item / n_r, item % n_r);
        for im in 0..grid.n_theta() {
            let jm = grid.m_of(im).rem_euclid(mt as i64) as usize;
            for ik in 0..grid.n_z() {
                if grid.is_nyquist(im, ik) {
                    continue;
                }
                let jk = grid.k_of(ik).rem_euclid(mz as i64) as usize;
                out.profile_mut(c, im, ik)[ir] = block[jm * mz + jk] * norm;
            }
        }
    }
    Ok(out)
}

/// Fill a field from a pointwise function of `(component, r, theta, z)`
/// sampled on the unpadded grid.
pub fn sample_function(
    kind: FieldKind,
    grid: &Arc<SpectralGrid>,
    f: impl Fn(usize, f64, f64, f64) -> f64 + Sync,
) -> SpectralField {
    let (mt, mz) = physical_sizes(grid, false);
    let n_r = grid.n_r();
    let nc = kind.components();
    let mut values = vec![ZERO; nc * mt * mz * n_r];
    let period = grid.period_l();
    values.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let i = idx % n_r;
        let l = (idx / n_r) % mz;
        let j = (idx / (n_r * mz)) % mt;
        let c = idx / (n_r * mz * mt);
        let theta = 2.0 * std::f64::consts::PI * j as f64 / mt as f64;
        let z = period * l as f64 / mz as f64;
        *v = C64::new(f(c, grid.radial_nodes()[i], theta, z), 0.0);
    });
    let phys = PhysicalField {
        kind,
        n_r,
        m_theta: mt,
        m_z: mz,
        values,
    };
    from_physical(&phys, grid).expect("sizes built from grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n_r: usize, nt: usize, nz: usize, l: f64) -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new(n_r, nt, nz, l).unwrap())
    }

    #[test]
    fn parity_counts_planar_slots() {
        let k = FieldKind::Tensor(2);
        assert_eq!(k.planar_slots(0), 2);
        assert_eq!(k.planar_slots(2), 1);
        assert_eq!(k.planar_slots(8), 0);
        assert_eq!(FieldKind::Vector3.parity(0, 2), Parity::Odd);
        assert_eq!(FieldKind::Vector3.parity(2, 2), Parity::Even);
    }

    #[test]
    fn constant_has_single_mode() {
        let g = grid(6, 8, 8, 2.0 * PI);
        let f = sample_function(FieldKind::Scalar, &g, |_, _, _, _| 1.0);
        let (i0, k0) = (g.index_of_m(0).unwrap(), g.index_of_k(0).unwrap());
        for im in 0..8 {
            for ik in 0..8 {
                for v in f.profile(0, im, ik) {
                    let expect = if (im, ik) == (i0, k0) { 1.0 } else { 0.0 };
                    assert!((v - expect).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn cos_cos_has_four_modes() {
        let l = 3.0;
        let g = grid(6, 8, 8, l);
        let f = sample_function(FieldKind::Scalar, &g, |_, r, t, z| r * t.cos() * (2.0 * PI * z / l).cos());
        let mut nonzero = Vec::new();
        for im in 0..8 {
            for ik in 0..8 {
                if f.profile(0, im, ik).iter().any(|v| v.norm() > 1e-12) {
                    nonzero.push((g.m_of(im), g.k_of(ik)));
                }
            }
        }
        nonzero.sort();
        assert_eq!(nonzero, vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]);
    }

    #[test]
    fn round_trip_padded_and_plain() {
        let g = grid(7, 8, 6, 2.5);
        let f = sample_function(FieldKind::Vector3, &g, |c, r, t, z| {
            (c as f64 + 1.0) * r * (t + 0.3).sin() + (r * r) * (2.0 * PI * z / 2.5).cos()
        });
        for padded in [false, true] {
            let p = to_physical(&f, padded);
            assert!(p.max_imag() < 1e-13);
            let back = from_physical(&p, &g).unwrap();
            let err = back.sub(&f).unwrap().max_abs();
            assert!(err < 1e-13 * f.max_abs().max(1.0));
        }
        assert!(f.hermitian_defect() < 1e-14);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g = grid(6, 8, 8, 1.0);
        let bad = PhysicalField {
            kind: FieldKind::Scalar,
            n_r: 6,
            m_theta: 8,
            m_z: 8,
            values: vec![ZERO; 10],
        };
        assert!(matches!(from_physical(&bad, &g), Err(Error::SizeMismatch { .. })));
        assert!(SpectralField::from_coeffs(FieldKind::Scalar, &g, vec![ZERO; 3]).is_err());
    }

    #[test]
    fn axial_shift_moves_samples() {
        let l = 2.0;
        let g = grid(5, 4, 8, l);
        let f = sample_function(FieldKind::Scalar, &g, |_, r, _, z| r * r * (2.0 * PI * z / l).sin());
        let s = f.shift_axial(0.25);
        let v = s.eval_at_node(0, 2, 0.0, 0.7);
        let expect = f.eval_at_node(0, 2, 0.0, 0.45);
        assert!((v - expect).norm() < 1e-13);
    }
}
