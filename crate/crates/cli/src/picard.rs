//! Mild solutions by Picard iteration.

use std::sync::Arc;

use cylstokes_core::eigenfields::Eigenfield;
use cylstokes_core::mild::{picard_solve, regularity_probe, PicardConfig};
use cylstokes_core::semigroup::SemigroupPlan;
use cylstokes_core::{FieldKind, SpectralField, SpectralGrid};
use serde_json::json;

use crate::artifacts::{num, Artifacts, Report};
use crate::config::{InitialData, PicardExperiment};
use crate::error::CliError;

fn missing(key: &str, kind: &str) -> CliError {
    CliError::Usage(format!("u0 = {kind} requires the key {key}"))
}

fn initial_data(cfg: &PicardExperiment, grid: &Arc<SpectralGrid>) -> Result<SpectralField, CliError> {
    let eigen_keys = cfg.family.is_some() || cfg.m.is_some() || cfg.k.is_some() || cfg.n.is_some() || cfg.amplitude.is_some();
    match cfg.u0 {
        InitialData::Zero => {
            if eigen_keys || cfg.u0_path.is_some() {
                return Err(CliError::Usage("u0 = zero takes no further u0 keys".into()));
            }
            Ok(SpectralField::zeros(FieldKind::Vector3, grid))
        }
        InitialData::Eigenfield => {
            if cfg.u0_path.is_some() {
                return Err(CliError::Usage("u0 = eigenfield does not take u0_path".into()));
            }
            let family = cfg.family.ok_or_else(|| missing("family", "eigenfield"))?;
            let m = cfg.m.ok_or_else(|| missing("m", "eigenfield"))?;
            let k = cfg.k.ok_or_else(|| missing("k", "eigenfield"))?;
            let n = cfg.n.ok_or_else(|| missing("n", "eigenfield"))?;
            let amplitude = cfg.amplitude.ok_or_else(|| missing("amplitude", "eigenfield"))?;
            let e = Eigenfield::new(family, m, k, n).build(grid)?.field;
            Ok(e.scale(amplitude / e.max_abs()))
        }
        InitialData::File => {
            if eigen_keys {
                return Err(CliError::Usage("u0 = file takes only u0_path".into()));
            }
            let path = cfg.u0_path.as_ref().ok_or_else(|| missing("u0_path", "file"))?;
            let u0 = cylstokes_core::io::read_field(path)?;
            if **u0.grid() != **grid {
                return Err(CliError::Usage(format!("{} was written on a different grid", path.display())));
            }
            Ok(SpectralField::from_coeffs(u0.kind(), grid, u0.into_coeffs())?)
        }
    }
}

pub fn picard(cfg: &PicardExperiment, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let u0 = initial_data(cfg, &grid)?;
    let plan = SemigroupPlan::new(&grid, cfg.lambda0)?;
    let pc = PicardConfig {
        t_final: cfg.t_final,
        n_time: cfg.n_time,
        start_levels: cfg.start_levels,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        q: cfg.q,
        shifted: cfg.shifted,
    };
    let sol = picard_solve(&plan, &u0, &pc)?;
    out.fields("solution.bin", &sol.states, &sol.time_grid)?;

    let k_rows: Vec<Vec<String>> = sol
        .k_history
        .iter()
        .enumerate()
        .map(|(j, k)| {
            let inc = if j == 0 { String::new() } else { sol.increments.get(j - 1).map(|v| num(*v)).unwrap_or_default() };
            vec![(j + 1).to_string(), num(*k), inc]
        })
        .collect();
    out.csv("k_history.csv", &["iteration", "k", "increment"], &k_rows)?;
    let e_rows: Vec<Vec<String>> = sol.time_grid.iter().zip(&sol.energy.balance).map(|(t, b)| vec![num(*t), num(*b)]).collect();
    out.csv("energy.csv", &["t", "balance"], &e_rows)?;

    let mut report = Report::default();
    if u0.max_abs() > 0.0 {
        let probe = regularity_probe(&sol, cfg.holder_mu, cfg.s_norm, cfg.t_min)?;
        let rows: Vec<Vec<String>> = probe.rows.iter().map(|r| vec![r.order.to_string(), num(r.sup), r.pairs.to_string()]).collect();
        out.csv("holder.csv", &["order", "sup", "pairs"], &rows)?;
        let g: Vec<Vec<String>> = probe.sqrt_t_gradient.iter().map(|(t, v)| vec![num(*t), num(*v)]).collect();
        out.csv("gradient.csv", &["t", "sqrt_t_gradient"], &g)?;
        report.holds("holder_bounded", probe.bounded);
    }
    report.metric("iterations", sol.iterations);
    report.metric("residual", sol.residual);
    report.metric("k_history", &sol.k_history);
    report.metric("increments", &sol.increments);
    report.metric("weighted_start", sol.weighted_start);
    report.metric("energy_initial", sol.energy.initial);
    report.metric("audit", sol.audit.as_ref().map(|a| json!(a)));
    report.holds("converged", sol.converged);
    report.at_most("energy_excess", sol.energy.excess, cfg.energy_tolerance);
    report.at_most("max_divergence", sol.max_divergence, cfg.divergence_tolerance);
    if let Some(a) = sol.audit.as_ref().filter(|a| !a.beyond_threshold) {
        report.at_most("k_audit_ratio", a.worst_ratio, 1.0 + cfg.audit_slack);
    }
    Ok(report)
}
