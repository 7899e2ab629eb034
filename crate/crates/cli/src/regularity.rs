//! Elliptic regularity ratios on manufactured solutions.

use cylstokes_core::elliptic::{family_ratios, manufactured_family, solve_inhomogeneous};
use cylstokes_core::norms::l2_norm;
use cylstokes_core::resolvent::{solve_resolvent, ModeBank};
use cylstokes_core::C64;
use rayon::prelude::*;

use crate::artifacts::{num, Artifacts, Report};
use crate::config::RegularityConfig;
use crate::error::CliError;

pub fn regularity(cfg: &RegularityConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let bank = ModeBank::new(&grid)?;
    let cases = manufactured_family(&grid, cfg.cases, cfg.lambda, cfg.seed)?;
    let mut rows = Vec::new();
    let mut report = Report::default();
    let mut worst_recovery = 0.0f64;
    for &order in &cfg.orders {
        let ratios = family_ratios(&bank, &cases, order, cfg.p)?;
        let sup = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
        report.metric(&format!("sup_ratio.order{order}"), sup);
        for r in ratios {
            worst_recovery = worst_recovery.max(r.recovery_error);
            rows.push(vec![r.label, order.to_string(), num(r.p), num(r.ratio), num(r.recovery_error), num(r.residual)]);
        }
    }
    out.csv("ratios.csv", &["case", "order", "p", "ratio", "recovery_error", "residual"], &rows)?;

    // homogeneous cases: the boundary-data path with g = 0 against the resolvent
    let lambda = C64::new(cfg.lambda, 0.0);
    let gaps = cases
        .par_iter()
        .filter(|c| c.g.max_abs() == 0.0)
        .map(|c| {
            let a = solve_inhomogeneous(&bank, &c.f, &c.g, cfg.lambda)?.u;
            let b = solve_resolvent(&bank, lambda, &c.f)?.u;
            Ok(l2_norm(&a.sub(&b)?) / l2_norm(&b))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    report.metric("cases", cases.len());
    report.at_most("max_recovery_error", worst_recovery, cfg.recovery_tolerance);
    report.at_most("zero_boundary_gap", gaps.into_iter().fold(0.0, f64::max), cfg.consistency_tolerance);
    Ok(report)
}
