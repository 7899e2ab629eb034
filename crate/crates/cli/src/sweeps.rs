//! Sector sweeps of the disk and cylinder resolvents.

use cylstokes_core::disk::{log_radii, sector_points, sector_sweep_2d, ModeOperator, Sweep2dSpec};
use cylstokes_core::resolvent::{sector_sweep_3d, ModeBank, Sweep3dSpec};
use cylstokes_core::rng::Stream;
use cylstokes_core::sampling::BandLimit;
use cylstokes_core::C64;
use rayon::prelude::*;

use crate::artifacts::{num, Artifacts, Report};
use crate::config::{Sweep2dConfig, Sweep3dConfig};
use crate::error::CliError;

/// Sweeps stay outside `|lambda| < 1e-4`, where the axial-constant mode
/// makes the truncated problem singular.
const EXCLUDED_RADIUS: f64 = 1e-4;
const SYMBOL_CHUNK: usize = 50_000;
const SYMBOL_STREAM: u64 = 1 << 40;

fn radii(decades: [f64; 2], per_decade: usize) -> Result<Vec<f64>, CliError> {
    let [lo, hi] = decades;
    if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(CliError::Usage(format!("lambda_decades [{lo}, {hi}] must be increasing")));
    }
    if 10f64.powf(lo) < EXCLUDED_RADIUS {
        return Err(CliError::Usage(format!("lambda_decades start 1e{lo} inside the excluded disk |lambda| < 1e-4")));
    }
    if per_decade == 0 {
        return Err(CliError::Usage("radii_per_decade must be positive".into()));
    }
    let count = ((hi - lo) * per_decade as f64).round() as usize + 1;
    Ok(log_radii(lo, hi, count))
}

const RATIO_HEADER: [&str; 4] = ["ratio0", "ratio_half", "ratio_two", "residual"];

fn ratio_cells(ratios: &[f64; 3], residual: f64) -> Vec<String> {
    vec![num(ratios[0]), num(ratios[1]), num(ratios[2]), num(residual)]
}

pub fn resolvent_sweep_2d(cfg: &Sweep2dConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let radii = radii(cfg.lambda_decades, cfg.radii_per_decade)?;
    let spec = Sweep2dSpec {
        theta: cfg.theta,
        p: cfg.p,
        trials: cfg.trials,
        seed: cfg.seed,
        zero_mean: true,
        radial_terms: cfg.radial_terms,
    };
    let mut report = Report::default();
    let mut rows = Vec::new();
    let mut worst_residual = 0.0f64;
    let mut nonfinite = 0usize;
    let mut collisions = 0usize;
    for &kind in &cfg.operators {
        for &m in &cfg.m_values {
            let op = ModeOperator::assemble(kind, m, &grid)?;
            let outcome = sector_sweep_2d(&op, &radii, cfg.angles_per_decade, spec)?;
            for s in &outcome.samples {
                let mut row = vec![kind.label().to_string(), m.to_string(), num(cfg.p), num(s.mu_re), num(s.mu_im)];
                row.extend(ratio_cells(&s.ratios, s.residual));
                rows.push(row);
                worst_residual = worst_residual.max(s.residual);
                nonfinite += s.ratios.iter().filter(|r| !r.is_finite()).count();
            }
            collisions += outcome.collisions.len();
            report.metric(&format!("sup.{}.m{m}", kind.label()), outcome.sup);
        }
    }
    let mut header = vec!["kind", "m", "p", "re_mu", "im_mu"];
    header.extend(RATIO_HEADER);
    out.csv("resolvent_2d.csv", &header, &rows)?;
    report.metric("samples", rows.len());
    report.metric("collisions", collisions);
    report.at_most("nonfinite_ratios", nonfinite as f64, 0.0);
    report.at_most("max_residual", worst_residual, cfg.residual_tolerance);
    Ok(report)
}

/// Largest `|lambda| / |lambda + xi^2|` over random `(lambda, xi)` in the sector.
fn symbol_sup(theta: f64, decades: [f64; 2], xi_max: f64, samples: usize, seed: u64) -> f64 {
    let chunks = samples.div_ceil(SYMBOL_CHUNK);
    let sups: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = Stream::new(seed, SYMBOL_STREAM + c as u64);
            let count = SYMBOL_CHUNK.min(samples - c * SYMBOL_CHUNK);
            let mut sup = 0.0f64;
            for _ in 0..count {
                let rho = 10f64.powf(s.uniform_in(decades[0], decades[1]));
                let phi = s.uniform_in(-theta, theta);
                let xi = s.uniform_in(0.0, xi_max);
                let lambda = C64::from_polar(rho, phi);
                sup = sup.max(lambda.norm() / (lambda + xi * xi).norm());
            }
            sup
        })
        .collect();
    sups.into_iter().fold(0.0, f64::max)
}

pub fn resolvent_sweep_3d(cfg: &Sweep3dConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let radii = radii(cfg.lambda_decades, cfg.radii_per_decade)?;
    let bank = ModeBank::new(&grid)?;
    let lambdas = sector_points(cfg.theta, &radii, cfg.angles_per_decade);
    let spec = Sweep3dSpec {
        theta: cfg.theta,
        p: cfg.p,
        trials: cfg.trials,
        seed: cfg.seed,
        band: BandLimit::smooth(&grid),
        kernel_free: cfg.kernel_free,
    };
    let sweep = sector_sweep_3d(&bank, &lambdas, spec)?;
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![num(r.lambda_re), num(r.lambda_im), r.trial.to_string()];
            row.extend(ratio_cells(&r.ratios, r.residual));
            row
        })
        .collect();
    let mut header = vec!["re_lambda", "im_lambda", "trial"];
    header.extend(RATIO_HEADER);
    out.csv("resolvent_3d.csv", &header, &rows)?;

    let mut report = Report::default();
    report.metric("samples", rows.len());
    report.metric("collisions", sweep.collisions.len());
    report.metric("sup", sweep.sup);
    let nonfinite = sweep.rows.iter().flat_map(|r| r.ratios).filter(|r| !r.is_finite()).count();
    report.at_most("nonfinite_ratios", nonfinite as f64, 0.0);
    let worst = sweep.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    report.at_most("max_residual", worst, cfg.residual_tolerance);
    if cfg.symbol_samples > 0 {
        let xi_max = 2.0 * std::f64::consts::PI * (cfg.n_z / 2) as f64 / cfg.period_l;
        let sup = symbol_sup(cfg.theta, cfg.lambda_decades, xi_max, cfg.symbol_samples, cfg.seed);
        report.metric("symbol_samples", cfg.symbol_samples);
        report.at_most("symbol_sup", sup, 1f64.max(1.0 / cfg.theta.sin().abs()));
    }
    Ok(report)
}
