//! Projection, semigroup and fractional-power experiments.

use cylstokes_core::calculus::gradient;
use cylstokes_core::fit::log_space;
use cylstokes_core::fractional::{
    apply_neg_power, imaginary_power_crosscheck, imaginary_power_report, neg_power_oracle, pdiv_report, sqrt_embedding_report,
    ContourSpec,
};
use cylstokes_core::helmholtz::{commutation_check, divergence_defect, normal_trace, Projector};
use cylstokes_core::norms::{inner, l2_norm};
use cylstokes_core::resolvent::{solve_resolvent, ModeBank};
use cylstokes_core::sampling::{random_field, random_tensor, BandLimit};
use cylstokes_core::semigroup::{
    holder_report, pdiv_smoothing_report, rough_tensor, smoothing_report, DecaySpec, Generator, SemigroupPlan,
};
use cylstokes_core::{FieldKind, SpectralField, C64};
use rayon::prelude::*;
use serde_json::json;

use crate::artifacts::{num, Artifacts, Report};
use crate::config::{DecayConfig, DecayData, EmbeddingConfig, FracPowerConfig, HelmholtzConfig, HolderConfig};
use crate::error::CliError;

/// Stream items of the second sample family (tensors, scalar potentials).
const SECOND_FAMILY: u64 = 1 << 32;

fn rel(a: &SpectralField, b: &SpectralField, scale: f64) -> Result<f64, CliError> {
    Ok(l2_norm(&a.sub(b)?) / scale)
}

fn vector_samples(grid: &std::sync::Arc<cylstokes_core::SpectralGrid>, count: usize, seed: u64) -> Vec<SpectralField> {
    let band = BandLimit::smooth(grid);
    (0..count as u64).map(|i| random_field(FieldKind::Vector3, grid, band, seed, i)).collect()
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

pub fn helmholtz_check(cfg: &HelmholtzConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let projector = Projector::new(&grid)?;
    let bank = ModeBank::new(&grid)?;
    let band = BandLimit::smooth(&grid);
    let data = vector_samples(&grid, cfg.samples, cfg.seed);
    // (1 + B)^{-1} f lies in the discrete domain of B.
    let domain = data
        .par_iter()
        .map(|f| Ok(solve_resolvent(&bank, C64::new(1.0, 0.0), f)?.u))
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = data
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let nf = l2_norm(f);
            let res = projector.project(f)?;
            let pf = &res.solenoidal_part;
            let idempotence = rel(&projector.apply(pf)?, pf, nf)?;
            let orthogonality = inner(pf, &res.gradient_part).norm() / (nf * nf);
            let phi = random_field(FieldKind::Scalar, &grid, band, cfg.seed, SECOND_FAMILY + i as u64);
            let grad = gradient(&phi);
            let annihilation = l2_norm(&projector.apply(&grad)?) / l2_norm(&grad);
            Ok([idempotence, annihilation, divergence_defect(pf)?, normal_trace(pf) / pf.max_abs(), orthogonality])
        })
        .collect::<Result<Vec<[f64; 5]>, CliError>>()?;
    let lambdas: Vec<C64> = cfg.lambdas.iter().map(|l| C64::new(l[0], l[1])).collect();
    let comm = commutation_check(&projector, &bank, &domain, &data, &lambdas)?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .zip(&comm.operator_commutator)
        .enumerate()
        .map(|(i, (r, c))| {
            let mut row = vec![i.to_string()];
            row.extend(r.iter().map(|v| num(*v)));
            row.push(num(*c));
            row
        })
        .collect();
    out.csv(
        "helmholtz.csv",
        &["sample", "idempotence", "gradient_residual", "divergence", "normal_trace", "orthogonality", "operator_commutator"],
        &table,
    )?;
    let comm_rows: Vec<Vec<String>> = comm
        .resolvent_commutator
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let l = lambdas[j % lambdas.len()];
            vec![(j / lambdas.len()).to_string(), num(l.re), num(l.im), num(*v)]
        })
        .collect();
    out.csv("commutators.csv", &["sample", "re_lambda", "im_lambda", "resolvent_commutator"], &comm_rows)?;

    let mut report = Report::default();
    report.metric("samples", cfg.samples);
    let names = ["idempotence", "gradient_residual", "divergence", "normal_trace", "orthogonality"];
    for (c, name) in names.iter().enumerate() {
        report.at_most(&format!("max_{name}"), max_of(rows.iter().map(|r| r[c])), cfg.tolerance);
    }
    report.at_most("max_operator_commutator", comm.max_operator, cfg.commutator_tolerance);
    report.at_most("max_resolvent_commutator", comm.max_resolvent, cfg.commutator_tolerance);
    Ok(report)
}

pub fn semigroup_decay(cfg: &DecayConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let plan = SemigroupPlan::new(&grid, cfg.lambda0)?;
    if cfg.t_points < 3 || !(cfg.t_min > 0.0 && cfg.t_min < cfg.t_max) {
        return Err(CliError::Usage("time grid needs t_points >= 3 and 0 < t_min < t_max".into()));
    }
    let spec = DecaySpec {
        t_grid: log_space(cfg.t_min, cfg.t_max, cfg.t_points),
        window_lo: cfg.window_lo,
        window_hi: cfg.window_hi,
    };
    let f = plan.rough_field(cfg.s_exp, cfg.fraction, true, cfg.seed, 0)?;
    let decay = match cfg.data {
        DecayData::Rough => smoothing_report(&plan, &f, cfg.p, cfg.q, cfg.order, &spec)?,
        DecayData::Pdiv => {
            let tensor = rough_tensor(&plan, cfg.s_exp, cfg.fraction, cfg.seed, 1)?;
            pdiv_smoothing_report(&plan, &tensor, cfg.p, cfg.q, &spec)?
        }
    };
    let rows: Vec<Vec<String>> = decay
        .t_grid
        .iter()
        .zip(&decay.quantity)
        .map(|(t, q)| {
            let inside = *t >= decay.window.0 && *t <= decay.window.1;
            vec![num(*t), num(*q), u8::from(inside).to_string()]
        })
        .collect();
    out.csv("decay.csv", &["t", "quantity", "in_window"], &rows)?;

    // the modal semigroup at early times; the Stokes semigroup once the
    // unresolved top modes are damped (end of the fit window)
    let law = |t: f64, s: f64, which: Generator| -> Result<f64, CliError> {
        let joint = plan.apply_semigroup(t + s, &f, which)?;
        let split = plan.apply_semigroup(t, &plan.apply_semigroup(s, &f, which)?, which)?;
        rel(&joint, &split, l2_norm(&f))
    };
    let law_b = law(spec.t_grid[cfg.t_points / 3], spec.t_grid[cfg.t_points / 2], Generator::B)?;
    let late = spec.t_grid.iter().copied().rfind(|t| *t <= 0.5 * decay.window.1).unwrap_or(spec.t_grid[0]);
    let law_a = law(late, late, Generator::A)?;

    let mut report = Report::default();
    report.metric("fit", decay.fit);
    report.metric("window", decay.window);
    report.metric("target_exponent", decay.target_exponent);
    report.metric("sup_scaled", decay.sup_scaled);
    report.metric("spectral_extent", plan.spectral_extent(&f)?);
    report.at_most("exponent_deviation", (decay.fit.exponent - decay.target_exponent).abs(), cfg.exponent_tolerance);
    report.at_least("fit_decades", decay.fit.decades, cfg.min_decades);
    report.metric("stokes_law_time", late);
    report.at_most("modal_law_defect", law_b, cfg.law_tolerance);
    report.at_most("stokes_law_defect", law_a, cfg.law_tolerance);
    Ok(report)
}

pub fn holder(cfg: &HolderConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let plan = SemigroupPlan::new(&grid, cfg.lambda0)?;
    let f = plan.rough_field(cfg.s_exp, cfg.fraction, true, cfg.seed, 0)?;
    let rho = log_space(cfg.rho_min, cfg.rho_max, cfg.rho_points);
    let h = holder_report(&plan, &f, cfg.t, &rho, cfg.alpha, cfg.p)?;
    let rows: Vec<Vec<String>> = h.rho_grid.iter().zip(&h.ratios).map(|(r, q)| vec![num(*r), num(*q)]).collect();
    out.csv("holder.csv", &["rho", "ratio"], &rows)?;
    let mut report = Report::default();
    report.metric("t", h.t);
    report.metric("alpha", h.alpha);
    report.at_most("sup_ratio", h.sup, cfg.ratio_limit);
    Ok(report)
}

pub fn frac_power(cfg: &FracPowerConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let plan = SemigroupPlan::new(&grid, cfg.lambda0)?;
    let contour = ContourSpec::for_shift(cfg.lambda0);
    let samples = vector_samples(&grid, cfg.samples, cfg.seed);
    let rows = samples
        .iter()
        .map(|f| {
            let nf = l2_norm(f);
            let oracle = neg_power_oracle(&plan, cfg.alpha, f)?;
            let quad = apply_neg_power(&plan, cfg.alpha, f, &contour)?;
            let oracle_error = rel(&quad, &oracle, l2_norm(&oracle))?;
            let half = apply_neg_power(&plan, 0.5, f, &contour)?;
            let twice = apply_neg_power(&plan, 0.5, &half, &contour)?;
            let inverse = solve_resolvent(plan.bank(), C64::new(cfg.lambda0, 0.0), f)?.u;
            let composition = rel(&twice, &inverse, l2_norm(&inverse))?;
            Ok([l2_norm(&oracle) / nf, oracle_error, composition])
        })
        .collect::<Result<Vec<[f64; 3]>, CliError>>()?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), num(r[0]), num(r[1]), num(r[2])])
        .collect();
    out.csv("frac_power.csv", &["sample", "ratio", "oracle_error", "composition_defect"], &table)?;

    let imag = imaginary_power_report(&plan, &samples, &cfg.s_values)?;
    let mut imag_rows = Vec::new();
    let mut cross = 0.0f64;
    for (i, f) in samples.iter().enumerate() {
        for (j, &s) in cfg.s_values.iter().enumerate() {
            let c = imaginary_power_crosscheck(&plan, s, f, &contour)?;
            cross = cross.max(c);
            imag_rows.push(vec![i.to_string(), num(s), num(imag.ratios[i * cfg.s_values.len() + j]), num(c)]);
        }
    }
    out.csv("imaginary.csv", &["sample", "s", "ratio", "crosscheck"], &imag_rows)?;

    let sup_ratio = max_of(rows.iter().map(|r| r[0]));
    let oracle_error = max_of(rows.iter().map(|r| r[1]));
    out.json(
        "power_report.json",
        &json!({
            "exponent": cfg.alpha,
            "sup_ratio": sup_ratio,
            "oracle_error": oracle_error,
            "grid": { "n_r": cfg.n_r, "n_theta": cfg.n_theta, "n_z": cfg.n_z, "period_l": cfg.period_l },
            "contour": contour,
        }),
    )?;
    let mut report = Report::default();
    report.metric("sup_ratio", sup_ratio);
    report.metric("imaginary_sup", imag.sup_ratio);
    report.at_most("oracle_error", oracle_error, cfg.oracle_tolerance);
    report.at_most("composition_defect", max_of(rows.iter().map(|r| r[2])), cfg.composition_tolerance);
    report.at_most("imaginary_crosscheck", cross, cfg.oracle_tolerance);
    report.at_most("imaginary_excess", imag.sup_ratio - 1.0, cfg.imaginary_tolerance);
    Ok(report)
}

pub fn embedding(cfg: &EmbeddingConfig, out: &mut Artifacts) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let plan = SemigroupPlan::new(&grid, cfg.lambda0)?;
    let contour = ContourSpec::for_shift(cfg.lambda0);
    let samples = vector_samples(&grid, cfg.samples, cfg.seed);
    let band = BandLimit::smooth(&grid);
    let tensors: Vec<SpectralField> =
        (0..cfg.samples as u64).map(|i| random_tensor(&grid, band, cfg.seed, SECOND_FAMILY + i)).collect();
    let emb = sqrt_embedding_report(&plan, &samples, cfg.p, &contour)?;
    let pdiv = pdiv_report(&plan, &tensors, cfg.p)?;
    let mut rows = Vec::new();
    for (kind, r) in [("sqrt_embedding", &emb), ("pdiv", &pdiv)] {
        rows.extend(r.ratios.iter().enumerate().map(|(i, v)| vec![kind.to_string(), i.to_string(), num(*v)]));
    }
    out.csv("embedding.csv", &["kind", "sample", "ratio"], &rows)?;
    let mut report = Report::default();
    report.metric("embedding_sup", emb.sup_ratio);
    report.metric("pdiv_sup", pdiv.sup_ratio);
    report.at_most("oracle_error", emb.oracle_error, cfg.oracle_tolerance);
    report.holds("pdiv_finite", pdiv.sup_ratio.is_finite());
    if cfg.p == 2.0 {
        report.at_most("embedding_excess", emb.sup_ratio - 1.0, cfg.tolerance);
    }
    Ok(report)
}
