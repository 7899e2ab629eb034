//! Random band-limited fields with regular behaviour at the pole.
//!
//! Profiles at angular mode `m` are `r^{|m|}` times an even polynomial for
//! scalar and axial components; the planar pair is drawn through
//! `u^r + i u^theta ~ r^{|m+1|}` and `u^r - i u^theta ~ r^{|m-1|}`, which is
//! the condition for the Cartesian components to be smooth at `r = 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::{FieldKind, SpectralField};
use crate::grid::SpectralGrid;
use crate::linalg::C64;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandLimit {
    /// Largest `|m|` populated.
    pub max_m: i64,
    /// Largest `|k|` populated.
    pub max_k: i64,
    /// Number of even-polynomial terms per profile.
    pub radial_terms: usize,
    /// Amplitude decay `exp(-decay (|m| + |k| + j))` for term `j`.
    pub decay: f64,
}

impl BandLimit {
    pub fn smooth(grid: &SpectralGrid) -> Self {
        Self {
            max_m: (grid.n_theta() as i64 / 2 - 1).min(3),
            max_k: (grid.n_z() as i64 / 2 - 1).min(3),
            radial_terms: (grid.n_r() / 3).clamp(2, 6),
            decay: 0.5,
        }
    }

    /// Largest radial polynomial degree this limit produces.
    pub fn max_degree(&self) -> usize {
        self.max_m as usize + 1 + 2 * (self.radial_terms - 1)
    }
}

fn poly_profile(r: &[f64], power: i64, coef: &[C64]) -> Vec<C64> {
    r.iter()
        .map(|&x| {
            let s = x * x;
            let mut acc = C64::new(0.0, 0.0);
            for c in coef.iter().rev() {
                acc = acc * s + c;
            }
            acc * x.powi(power.unsigned_abs() as i32)
        })
        .collect()
}

/// Random real field with the given band limit, drawn from `(seed, item)`.
pub fn random_field(kind: FieldKind, grid: &Arc<SpectralGrid>, band: BandLimit, seed: u64, item: u64) -> SpectralField {
    assert!(kind.rank() <= 1, "random fields are scalar or vector");
    let mut s = Stream::new(seed, item);
    let mut out = SpectralField::zeros(kind, grid);
    let r = grid.radial_nodes();
    let nt = grid.n_theta();
    let nz = grid.n_z();
    for im in 0..nt {
        for ik in 0..nz {
            let (m, k) = (grid.m_of(im), grid.k_of(ik));
            if grid.is_nyquist(im, ik) || m.abs() > band.max_m || k.abs() > band.max_k {
                continue;
            }
            // draw each conjugate pair once, from the member with (m, k) > (-m, -k)
            if (m, k) < (-m, -k) {
                continue;
            }
            let self_conj = m == 0 && k == 0;
            let draw = |s: &mut Stream| -> Vec<C64> {
                (0..band.radial_terms)
                    .map(|j| {
                        let amp = (-band.decay * (m.abs() + k.abs() + j as i64) as f64).exp();
                        let z = s.complex_normal() * amp;
                        if self_conj {
                            C64::new(z.re, 0.0)
                        } else {
                            z
                        }
                    })
                    .collect()
            };
            let profiles: Vec<Vec<C64>> = match kind {
                FieldKind::Scalar => vec![poly_profile(r, m, &draw(&mut s))],
                _ => {
                    let plus = poly_profile(r, m + 1, &draw(&mut s));
                    let minus = if self_conj {
                        plus.iter().map(|v| v.conj()).collect()
                    } else {
                        poly_profile(r, m - 1, &draw(&mut s))
                    };
                    let ur: Vec<C64> = plus.iter().zip(&minus).map(|(p, q)| (p + q) * 0.5).collect();
                    let ut: Vec<C64> = plus.iter().zip(&minus).map(|(p, q)| (p - q) * C64::new(0.0, -0.5)).collect();
                    let uz = poly_profile(r, m, &draw(&mut s));
                    vec![ur, ut, uz]
                }
            };
            let mirror = grid.conjugate_mode(im, ik).expect("non-Nyquist");
            for (c, p) in profiles.iter().enumerate() {
                out.profile_mut(c, im, ik).copy_from_slice(p);
                if !self_conj {
                    let conj: Vec<C64> = p.iter().map(|v| v.conj()).collect();
                    out.profile_mut(c, mirror.0, mirror.1).copy_from_slice(&conj);
                }
            }
        }
    }
    out
}

/// Random pole-regular profiles for one planar mode `m`: one profile for a
/// scalar, `[v^r, v^theta]` for a planar vector.
pub fn random_mode_profiles(grid: &SpectralGrid, planar_vector: bool, m: i64, terms: usize, stream: &mut Stream) -> Vec<Vec<C64>> {
    let r = grid.radial_nodes();
    let mut draw = || -> Vec<C64> { (0..terms).map(|j| stream.complex_normal() * (-0.5 * j as f64).exp()).collect() };
    if planar_vector {
        let plus = poly_profile(r, m + 1, &draw());
        let minus = poly_profile(r, m - 1, &draw());
        vec![
            plus.iter().zip(&minus).map(|(p, q)| (p + q) * 0.5).collect(),
            plus.iter().zip(&minus).map(|(p, q)| (p - q) * C64::new(0.0, -0.5)).collect(),
        ]
    } else {
        vec![poly_profile(r, m, &draw())]
    }
}

/// Random rank-2 tensor field; each row is an independent random vector field.
pub fn random_tensor(grid: &Arc<SpectralGrid>, band: BandLimit, seed: u64, item: u64) -> SpectralField {
    let rows: Vec<SpectralField> = (0..3)
        .map(|a| random_field(FieldKind::Vector3, grid, band, seed, item.wrapping_mul(3).wrapping_add(a)))
        .collect();
    let block = grid.n_modes() * grid.n_r();
    let mut out = SpectralField::zeros(FieldKind::Tensor(2), grid);
    for a in 0..3 {
        for b in 0..3 {
            let src = &rows[a].coeffs()[b * block..(b + 1) * block];
            out.coeffs_mut()[(a * 3 + b) * block..(a * 3 + b + 1) * block].copy_from_slice(src);
        }
    }
    out
}

/// Remove the axially and angularly constant part (the `(0, 0)` mode).
pub fn without_mean_mode(field: &SpectralField) -> SpectralField {
    let g = Arc::clone(field.grid());
    let mut out = field.clone();
    let (im, ik) = (g.index_of_m(0).unwrap(), g.index_of_k(0).unwrap());
    for c in 0..out.n_components() {
        out.profile_mut(c, im, ik).fill(C64::new(0.0, 0.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{curl, divergence, gradient};
    use crate::field::{from_physical, to_physical};
    use proptest::prelude::*;

    fn grid() -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new(12, 8, 8, 3.0).unwrap())
    }

    #[test]
    fn fields_are_real_and_reproducible() {
        let g = grid();
        let band = BandLimit::smooth(&g);
        let a = random_field(FieldKind::Vector3, &g, band, 11, 2);
        let b = random_field(FieldKind::Vector3, &g, band, 11, 2);
        assert_eq!(a.coeffs(), b.coeffs());
        assert!(a.hermitian_defect() < 1e-15);
        assert!(to_physical(&a, true).max_imag() < 1e-12);
    }

    #[test]
    fn cartesian_components_are_smooth_at_pole() {
        // u_x = u_r cos t - u_t sin t must not depend on t as r -> 0 beyond O(r)
        let g = Arc::new(SpectralGrid::new(16, 8, 4, 1.0).unwrap());
        let u = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), 5, 0);
        let p = to_physical(&u, false);
        let r0 = g.radial_nodes()[0];
        let ux: Vec<f64> = (0..p.m_theta)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / p.m_theta as f64;
                p.values[p.index(0, j, 0, 0)].re * t.cos() - p.values[p.index(1, j, 0, 0)].re * t.sin()
            })
            .collect();
        let spread = ux.iter().cloned().fold(f64::MIN, f64::max) - ux.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 10.0 * r0, "{spread} vs r0 {r0}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn differential_identities_hold(seed in any::<u64>()) {
            let g = grid();
            let band = BandLimit::smooth(&g);
            let u = random_field(FieldKind::Vector3, &g, band, seed, 0);
            let phi = random_field(FieldKind::Scalar, &g, band, seed, 1);
            let scale = u.max_abs().max(1.0);
            prop_assert!(divergence(&curl(&u).unwrap()).unwrap().max_abs() < 1e-11 * scale * 100.0);
            prop_assert!(curl(&gradient(&phi)).unwrap().max_abs() < 1e-11 * phi.max_abs().max(1.0) * 100.0);
        }

        #[test]
        fn transform_round_trip(seed in any::<u64>(), padded in any::<bool>()) {
            let g = grid();
            let u = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), seed, 3);
            let back = from_physical(&to_physical(&u, padded), &g).unwrap();
            prop_assert!(back.sub(&u).unwrap().max_abs() <= 1e-12 * u.max_abs());
        }
    }
}
