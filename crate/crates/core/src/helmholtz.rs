//! Helmholtz projection `P f = f - grad phi`, where `phi` solves the Neumann
//! problem `Laplacian phi = div f`, `d_r phi = f^r` at `r = 1`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{divergence, laplacian, mode_gradient};
use crate::disk::{ModeOperator, OperatorKind};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::grid::SpectralGrid;
use crate::linalg::{DenseLu, C64};
use crate::norms::l2_norm;
use crate::resolvent::{interior_only, solve_resolvent, ModeBank};

#[derive(Clone, Debug)]
pub struct HelmholtzResult {
    pub solenoidal_part: SpectralField,
    pub gradient_part: SpectralField,
    pub potential: SpectralField,
}

/// Factored Neumann systems for every Fourier mode, reused across projections.
pub struct Projector {
    grid: Arc<SpectralGrid>,
    factors: Vec<Option<DenseLu>>,
}

impl std::fmt::Debug for Projector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Projector").field("grid", &self.grid).finish()
    }
}

impl Projector {
    pub fn new(grid: &Arc<SpectralGrid>) -> Result<Self> {
        let ops = grid
            .m_values()
            .iter()
            .map(|&m| ModeOperator::assemble(OperatorKind::NeumannPoisson, m, grid))
            .collect::<Result<Vec<_>>>()?;
        let nz = grid.n_z();
        let factors = (0..grid.n_modes())
            .into_par_iter()
            .map(|idx| {
                let (im, ik) = (idx / nz, idx % nz);
                if grid.is_nyquist(im, ik) {
                    return Ok(None);
                }
                let op = &ops[im];
                let a = if grid.m_of(im) == 0 && grid.k_of(ik) == 0 {
                    op.pinned_matrix()
                } else {
                    op.shifted(C64::new(grid.xi_of(ik).powi(2), 0.0))
                };
                DenseLu::factor(&a).map(Some).ok_or(Error::SpectralCollision {
                    m: grid.m_of(im),
                    k: grid.k_of(ik),
                    mu_re: grid.xi_of(ik).powi(2),
                    mu_im: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: Arc::clone(grid),
            factors,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn project(&self, f: &SpectralField) -> Result<HelmholtzResult> {
        f.require(FieldKind::Vector3)?;
        f.check_finite("projection input")?;
        if **f.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let g = &self.grid;
        let n = g.n_r();
        let nz = g.n_z();
        let div = divergence(f)?;
        let solved: Vec<Option<(Vec<C64>, Vec<Vec<C64>>)>> = (0..g.n_modes())
            .into_par_iter()
            .map(|idx| {
                let (im, ik) = (idx / nz, idx % nz);
                let lu = self.factors[idx].as_ref()?;
                let mut b: Vec<C64> = div.profile(0, im, ik).iter().map(|v| -v).collect();
                b[n - 1] = f.profile(0, im, ik)[n - 1];
                if b.len() + 1 == lu_size(g, im, ik) {
                    b.push(C64::new(0.0, 0.0));
                }
                let mut phi = lu.solve(&b);
                phi.truncate(n);
                let grad = mode_gradient(g, 0, g.m_of(im), g.xi_of(ik), &[phi.as_slice()]);
                Some((phi, grad))
            })
            .collect();
        let mut potential = SpectralField::zeros(FieldKind::Scalar, g);
        let mut gradient_part = SpectralField::zeros(FieldKind::Vector3, g);
        for (idx, entry) in solved.into_iter().enumerate() {
            let Some((phi, grad)) = entry else { continue };
            let (im, ik) = (idx / nz, idx % nz);
            potential.profile_mut(0, im, ik).copy_from_slice(&phi);
            for (c, p) in grad.iter().enumerate() {
                gradient_part.profile_mut(c, im, ik).copy_from_slice(p);
            }
        }
        let solenoidal_part = f.sub(&gradient_part)?;
        Ok(HelmholtzResult {
            solenoidal_part,
            gradient_part,
            potential,
        })
    }

    pub fn apply(&self, f: &SpectralField) -> Result<SpectralField> {
        Ok(self.project(f)?.solenoidal_part)
    }
}

fn lu_size(g: &SpectralGrid, im: usize, ik: usize) -> usize {
    if g.m_of(im) == 0 && g.k_of(ik) == 0 {
        g.n_r() + 1
    } else {
        g.n_r()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutationReport {
    /// `|P B u - B P u|_2 / |u|_2` per sample (interior nodes).
    pub operator_commutator: Vec<f64>,
    /// `|P (lambda + B)^{-1} f - (lambda + B)^{-1} P f|_2 / |f|_2` per `(sample, lambda)`.
    pub resolvent_commutator: Vec<f64>,
    pub max_operator: f64,
    pub max_resolvent: f64,
}

/// `B u = -Laplacian u` for `u` in the discrete domain.
pub fn apply_laplace_operator(u: &SpectralField) -> SpectralField {
    laplacian(u).scale(-1.0)
}

pub fn commutation_check(
    projector: &Projector,
    bank: &ModeBank,
    domain_samples: &[SpectralField],
    data_samples: &[SpectralField],
    lambdas: &[C64],
) -> Result<CommutationReport> {
    let operator_commutator = domain_samples
        .par_iter()
        .map(|u| {
            let pbu = projector.apply(&apply_laplace_operator(u))?;
            let bpu = apply_laplace_operator(&projector.apply(u)?);
            Ok(l2_norm(&interior_only(&pbu.sub(&bpu)?)) / l2_norm(&apply_laplace_operator(u)).max(l2_norm(u)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let pairs: Vec<(usize, usize)> = (0..data_samples.len()).flat_map(|i| (0..lambdas.len()).map(move |j| (i, j))).collect();
    let resolvent_commutator = pairs
        .par_iter()
        .map(|&(i, j)| {
            let f = &data_samples[i];
            let lhs = projector.apply(&solve_resolvent(bank, lambdas[j], f)?.u)?;
            let rhs = solve_resolvent(bank, lambdas[j], &projector.apply(f)?)?.u;
            Ok(l2_norm(&lhs.sub(&rhs)?) / l2_norm(f))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_operator = operator_commutator.iter().copied().fold(0.0, f64::max);
    let max_resolvent = resolvent_commutator.iter().copied().fold(0.0, f64::max);
    Ok(CommutationReport {
        operator_commutator,
        resolvent_commutator,
        max_operator,
        max_resolvent,
    })
}

/// Relative divergence of a field over the interior nodes.
pub fn divergence_defect(u: &SpectralField) -> Result<f64> {
    let d = interior_only(&divergence(u)?);
    Ok(l2_norm(&d) / l2_norm(u).max(f64::MIN_POSITIVE))
}

/// Largest `|u^r(1)|` over all modes.
pub fn normal_trace(u: &SpectralField) -> f64 {
    let g = u.grid();
    let last = g.n_r() - 1;
    let mut worst = 0.0f64;
    for im in 0..g.n_theta() {
        for ik in 0..g.n_z() {
            worst = worst.max(u.profile(0, im, ik)[last].norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenfields::{Eigenfield, EigenfieldFamily};
    use crate::field::sample_function;
    use crate::norms::inner;
    use crate::sampling::{random_field, BandLimit};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid() -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new(16, 8, 8, 2.0 * PI).unwrap())
    }

    #[test]
    fn gradient_is_annihilated() {
        let g = grid();
        let p = Projector::new(&g).unwrap();
        // grad(x1^2 - x2^2) = (2 r cos 2t, -2 r sin 2t, 0)
        let f = sample_function(FieldKind::Vector3, &g, |c, r, t, _| match c {
            0 => 2.0 * r * (2.0 * t).cos(),
            1 => -2.0 * r * (2.0 * t).sin(),
            _ => 0.0,
        });
        let res = p.project(&f).unwrap();
        assert!(res.solenoidal_part.max_abs() < 1e-12);
    }

    #[test]
    fn solenoidal_fields_are_fixed() {
        let g = grid();
        let p = Projector::new(&g).unwrap();
        let e = Eigenfield::new(EigenfieldFamily::Horizontal, 1, 1, 1).build(&g).unwrap();
        let res = p.project(&e.field).unwrap();
        assert!(res.solenoidal_part.sub(&e.field).unwrap().max_abs() < 1e-11 * e.field.max_abs());
    }

    #[test]
    fn radial_field_decomposes() {
        let g = grid();
        let p = Projector::new(&g).unwrap();
        let f = sample_function(FieldKind::Vector3, &g, |c, r, t, z| if c == 0 { r * (1.0 + 0.3 * r * t.cos() * z.sin()) } else { 0.0 });
        let res = p.project(&f).unwrap();
        let u = &res.solenoidal_part;
        assert!(divergence_defect(u).unwrap() < 1e-10);
        assert!(normal_trace(u) < 1e-13);
        let sum = u.add(&res.gradient_part).unwrap();
        assert!(sum.sub(&f).unwrap().max_abs() < 1e-11 * f.max_abs());
        let ortho = inner(u, &res.gradient_part).norm();
        assert!(ortho < 1e-11 * l2_norm(&f).powi(2), "{}", ortho / l2_norm(&f).powi(2));
    }

    #[test]
    fn gradient_with_neumann_potential_stays_gradient_under_resolvent() {
        let g = grid();
        let p = Projector::new(&g).unwrap();
        let bank = ModeBank::new(&g).unwrap();
        let e = Eigenfield::new(EigenfieldFamily::Gradient, 2, 1, 1).build(&g).unwrap();
        let u = solve_resolvent(&bank, C64::new(1.0, 0.0), &e.field).unwrap().u;
        assert!(l2_norm(&p.apply(&u).unwrap()) < 1e-9 * l2_norm(&e.field));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn idempotent_and_orthogonal(seed in any::<u64>()) {
            let g = grid();
            let p = Projector::new(&g).unwrap();
            let f = random_field(FieldKind::Vector3, &g, BandLimit::smooth(&g), seed, 0);
            let res = p.project(&f).unwrap();
            let pp = p.apply(&res.solenoidal_part).unwrap();
            let nf = l2_norm(&f);
            prop_assert!(l2_norm(&pp.sub(&res.solenoidal_part).unwrap()) < 1e-11 * nf);
            prop_assert!(inner(&res.solenoidal_part, &res.gradient_part).norm() < 1e-11 * nf * nf);
            prop_assert!(divergence_defect(&res.solenoidal_part).unwrap() < 1e-10);
        }
    }
}
