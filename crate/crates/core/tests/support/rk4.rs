//! Independent time-stepping oracle for mild solutions, shared with the
//! workspace acceptance suite.

use cylstokes_core::mild::nonlinear_term;
use cylstokes_core::norms::l2_norm;
use cylstokes_core::semigroup::{Modal, SemigroupPlan};
use cylstokes_core::{SpectralField, C64};

/// Classical RK4 on the modal Galerkin system `c' = -Lambda c - P div(u (x) u)`.
pub fn rk4_path(plan: &SemigroupPlan, u0: &SpectralField, t_final: f64, intervals: usize, sub: usize) -> Vec<SpectralField> {
    let (lp, la) = plan.eigenvalues();
    let rhs = |c: &Modal| -> Modal {
        let u = plan.from_modal(c);
        let f = plan.to_modal(&nonlinear_term(plan, &u).unwrap()).unwrap();
        let mut out = Modal::zeros_like(c);
        for (blocks, (src, (lam, frc))) in [
            (&mut out.planar, (&c.planar, (&lp, &f.planar))),
            (&mut out.axial, (&c.axial, (&la, &f.axial))),
        ] {
            for (o, (x, (l, g))) in blocks.iter_mut().zip(src.iter().zip(lam.iter().zip(frc))) {
                for (oj, (xj, (lj, gj))) in o.iter_mut().zip(x.iter().zip(l.iter().zip(g))) {
                    *oj = -*lj * xj - gj;
                }
            }
        }
        out
    };
    let h = t_final / (intervals * sub) as f64;
    let mut c = plan.to_modal(&plan.projector().apply(u0).unwrap()).unwrap();
    let mut path = vec![plan.from_modal(&c)];
    for _ in 0..intervals {
        for _ in 0..sub {
            let k1 = rhs(&c);
            let mut y = c.clone();
            y.axpy(C64::new(0.5 * h, 0.0), &k1);
            let k2 = rhs(&y);
            let mut y = c.clone();
            y.axpy(C64::new(0.5 * h, 0.0), &k2);
            let k3 = rhs(&y);
            let mut y = c.clone();
            y.axpy(C64::new(h, 0.0), &k3);
            let k4 = rhs(&y);
            for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
                c.axpy(C64::new(h * w / 6.0, 0.0), k);
            }
        }
        path.push(plan.from_modal(&c));
    }
    path
}

pub fn sup_gap(a: &[SpectralField], b: &[SpectralField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| l2_norm(&x.sub(y).unwrap())).fold(0.0, f64::max)
}

/// RK4 path on `intervals` output steps, with substeps doubled from the
/// stability limit until successive paths agree to `tol`.
pub fn converged_rk4_path(plan: &SemigroupPlan, u0: &SpectralField, t_final: f64, intervals: usize, tol: f64) -> Vec<SpectralField> {
    let (lp, la) = plan.eigenvalues();
    let top = lp.iter().chain(&la).flatten().fold(0.0f64, |a, &b| a.max(b));
    let mut sub = ((t_final / intervals as f64) * top / 2.0).ceil().max(1.0) as usize;
    let mut path = rk4_path(plan, u0, t_final, intervals, sub);
    loop {
        sub *= 2;
        let finer = rk4_path(plan, u0, t_final, intervals, sub);
        let d = sup_gap(&path, &finer);
        path = finer;
        if d < tol {
            return path;
        }
    }
}
