mod support;

use std::f64::consts::PI;
use std::sync::Arc;

use cylstokes_core::eigenfields::{Eigenfield, EigenfieldFamily};
use cylstokes_core::mild::{picard_solve, PicardConfig};
use cylstokes_core::norms::l2_norm;
use cylstokes_core::semigroup::SemigroupPlan;
use cylstokes_core::SpectralGrid;

use support::rk4::{converged_rk4_path, sup_gap};

#[test]
fn picard_matches_rk4_galerkin_oracle() {
    let g = Arc::new(SpectralGrid::new(12, 12, 12, 2.0 * PI).unwrap());
    let plan = SemigroupPlan::new(&g, 1.0).unwrap();
    let e = Eigenfield::new(EigenfieldFamily::Poloidal, 1, 1, 1).build(&g).unwrap();
    let u0 = e.field.scale(1.0 / e.field.max_abs());
    let (t_final, intervals) = (0.1, 100);
    let oracle = converged_rk4_path(&plan, &u0, t_final, intervals, 1e-9);
    let cfg = PicardConfig {
        t_final,
        n_time: intervals,
        ..PicardConfig::default()
    };
    let sol = picard_solve(&plan, &u0, &cfg).unwrap();
    assert!(sol.converged);
    let gap = sup_gap(&sol.states, &oracle);
    eprintln!("gap {gap:.3e}, |u0| {:.3e}", l2_norm(&u0));
    assert!(gap < 1e-6);
}
