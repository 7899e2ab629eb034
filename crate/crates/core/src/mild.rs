//! Mild solutions of the Navier-Stokes system by Picard iteration on the
//! Duhamel formula `u = e^{-tA} u0 - int_0^t e^{-(t-s)A} P div(u (x) u)(s) ds`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{divergence, gradient_power, outer_product};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpectralField};
use crate::helmholtz::{divergence_defect, normal_trace};
use crate::linalg::C64;
use crate::norms::{l2_norm, lp_norm};
use crate::semigroup::{Generator, Modal, SemigroupPlan};

/// Inputs with relative divergence above this are rejected by the nonlinear term.
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub t_final: f64,
    /// Uniform intervals on `[0, t_final]`.
    pub n_time: usize,
    /// Geometric refinement levels (ratio 2) inside the first interval.
    pub start_levels: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Auxiliary exponent of the weighted norm `sup_t t^gamma |u|_q`.
    pub q: f64,
    /// Solve for `v = e^{-lambda0 t} u` with the shifted generator when set.
    pub shifted: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            t_final: 0.1,
            n_time: 40,
            start_levels: 0,
            max_iters: 30,
            tol: 1e-10,
            q: 6.0,
            shifted: false,
        }
    }
}

impl PicardConfig {
    pub fn gamma(&self) -> f64 {
        1.5 * (1.0 / 3.0 - 1.0 / self.q)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Precondition(format!("T = {} must be positive", self.t_final)));
        }
        if self.n_time == 0 || self.max_iters == 0 {
            return Err(Error::Precondition("n_time and max_iters must be positive".into()));
        }
        if !(self.q > 3.0 && self.q.is_finite()) {
            return Err(Error::Precondition(format!("q = {} must exceed 3", self.q)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Precondition("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Vec<f64> {
        let h = self.t_final / self.n_time as f64;
        let mut t = vec![0.0];
        for l in (1..=self.start_levels).rev() {
            t.push(h * 0.5f64.powi(l as i32));
        }
        t.extend((1..=self.n_time).map(|i| h * i as f64));
        t
    }
}

/// `P div(u (x) u)`, with the product formed on the padded grid.
pub fn nonlinear_term(plan: &SemigroupPlan, u: &SpectralField) -> Result<SpectralField> {
    u.require(FieldKind::Vector3)?;
    if u.max_abs() == 0.0 {
        return Ok(SpectralField::zeros(FieldKind::Vector3, u.grid()));
    }
    let defect = divergence_defect(u)?;
    if defect > SOLENOIDAL_TOLERANCE {
        return Err(Error::Precondition(format!("nonlinear term needs a solenoidal field (divergence {defect:.3e})")));
    }
    plan.projector().apply(&divergence(&outer_product(u, u)?)?)
}

/// `phi_1(z) = (1 - e^{-z}) / z` and `phi_2(z) = (z - 1 + e^{-z}) / z^2`.
fn phi_weights(z: f64) -> (f64, f64) {
    if z.abs() < 1e-4 {
        let p1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        let p2 = 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0;
        (p1, p2)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (z - 1.0 + e) / (z * z))
    }
}

fn flatten(c: &Modal) -> Vec<C64> {
    c.planar.iter().chain(&c.axial).flatten().copied().collect()
}

fn unflatten(flat: &[C64], like: &Modal) -> Modal {
    let mut it = flat.iter().copied();
    let mut take = |v: &Vec<Vec<C64>>| -> Vec<Vec<C64>> { v.iter().map(|b| it.by_ref().take(b.len()).collect()).collect() };
    let planar = take(&like.planar);
    let axial = take(&like.axial);
    Modal { planar, axial }
}

/// Decay rates of every modal coordinate, flattened like [`Modal`].
fn flat_rates(plan: &SemigroupPlan, shift: f64) -> Vec<f64> {
    let (lp, la) = plan.eigenvalues();
    lp.iter().chain(&la).flatten().map(|v| v + shift).collect()
}

/// `int_0^{t_n} e^{-(t_n - s)(B + shift)} F(s) ds` for every grid time, with
/// `F` interpolated linearly between grid times.
pub fn duhamel_path(plan: &SemigroupPlan, times: &[f64], forcing: &[SpectralField], shift: f64) -> Result<Vec<SpectralField>> {
    if times.len() != forcing.len() || times.is_empty() {
        return Err(Error::SizeMismatch {
            expected: times.len(),
            found: forcing.len(),
        });
    }
    if !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Precondition("time grid must be strictly increasing".into()));
    }
    let modal = forcing.par_iter().map(|f| plan.to_modal(f)).collect::<Result<Vec<_>>>()?;
    let like = &modal[0];
    let flat: Vec<Vec<C64>> = modal.iter().map(flatten).collect();
    let rates = flat_rates(plan, shift);
    let n = rates.len();
    let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    // per coordinate: sequential in time, independent across coordinates
    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let lam = rates[j];
            let mut w = C64::new(0.0, 0.0);
            let mut col = Vec::with_capacity(times.len());
            col.push(w);
            for (i, &h) in steps.iter().enumerate() {
                let (p1, p2) = phi_weights(lam * h);
                w = w * (-lam * h).exp() + (flat[i][j] * (p1 - p2) + flat[i + 1][j] * p2) * h;
                col.push(w);
            }
            col
        })
        .collect();
    (0..times.len())
        .into_par_iter()
        .map(|i| {
            let v: Vec<C64> = columns.iter().map(|c| c[i]).collect();
            Ok(plan.from_modal(&unflatten(&v, like)))
        })
        .collect()
}

/// The Duhamel integral at a grid time `t`.
pub fn duhamel(plan: &SemigroupPlan, times: &[f64], forcing: &[SpectralField], t: f64) -> Result<SpectralField> {
    let idx = times
        .iter()
        .position(|&s| s == t)
        .ok_or_else(|| Error::Precondition(format!("t = {t} is not a grid time")))?;
    let path = duhamel_path(plan, &times[..=idx], &forcing[..=idx], 0.0)?;
    Ok(path.into_iter().last().expect("nonempty path"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KAudit {
    /// `sup_t t^gamma |u_2 - u_1|_q / K_1^2`.
    pub c0_measured: f64,
    /// Largest `K_{j+1} / (K_1 + C0 K_j^2)` over `j >= 2`.
    pub worst_ratio: f64,
    pub holds: bool,
    /// `K_1 > 1 / (4 C0)`: the contraction argument does not apply.
    pub beyond_threshold: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub initial: f64,
    /// `|u(t)|_2^2 + 2 int_0^t |grad u|_2^2 ds` per grid time.
    pub balance: Vec<f64>,
    /// `max_t balance(t) / initial - 1`.
    pub excess: f64,
}

#[derive(Clone, Debug)]
pub struct MildSolution {
    pub time_grid: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub k_history: Vec<f64>,
    /// `sup_t t^gamma |u_{j+1} - u_j|_q` per iteration, relative to `K_1`.
    pub increments: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Defect of the integral equation for the returned states, relative to `K_1`.
    pub residual: f64,
    pub audit: Option<KAudit>,
    pub energy: EnergyLedger,
    /// `t_1^gamma |u(t_1)|_q` at the first positive grid time.
    pub weighted_start: f64,
    pub max_divergence: f64,
    pub max_normal_trace: f64,
}

struct Iteration<'a> {
    plan: &'a SemigroupPlan,
    times: Vec<f64>,
    shift: f64,
    gamma: f64,
    q: f64,
    linear: Vec<SpectralField>,
}

impl Iteration<'_> {
    fn forcing(&self, states: &[SpectralField]) -> Result<Vec<SpectralField>> {
        states
            .par_iter()
            .zip(&self.times)
            .map(|(u, &t)| {
                let f = nonlinear_term(self.plan, u)?;
                Ok(if self.shift == 0.0 { f } else { f.scale((self.shift * t).exp()) })
            })
            .collect()
    }

    /// One Picard map `u -> linear - Duhamel(F(u))`.
    fn map(&self, states: &[SpectralField]) -> Result<Vec<SpectralField>> {
        let integral = duhamel_path(self.plan, &self.times, &self.forcing(states)?, self.shift)?;
        self.linear
            .par_iter()
            .zip(&integral)
            .map(|(l, w)| self.plan.projector().apply(&l.sub(w)?))
            .collect()
    }

    /// `sup_t t^gamma |u(t)|_q`, with `u` mapped back to the unshifted variable.
    fn weighted(&self, states: &[SpectralField]) -> Result<f64> {
        let v = states
            .par_iter()
            .zip(&self.times)
            .map(|(u, &t)| {
                if t == 0.0 && self.gamma > 0.0 {
                    return Ok(0.0);
                }
                Ok(t.powf(self.gamma) * (self.shift * t).exp() * lp_norm(u, self.q)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(v.into_iter().fold(0.0, f64::max))
    }

    fn difference(&self, a: &[SpectralField], b: &[SpectralField]) -> Result<Vec<SpectralField>> {
        a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
    }
}

pub fn picard_solve(plan: &SemigroupPlan, u0: &SpectralField, config: &PicardConfig) -> Result<MildSolution> {
    config.validate()?;
    u0.require(FieldKind::Vector3)?;
    u0.check_finite("initial data")?;
    let scale = l2_norm(u0);
    if scale > 0.0 {
        let d = divergence_defect(u0)?;
        if d > SOLENOIDAL_TOLERANCE {
            return Err(Error::Precondition(format!("initial data not solenoidal (divergence {d:.3e})")));
        }
        if normal_trace(u0) > 1e-10 * u0.max_abs() {
            return Err(Error::Precondition("initial data not tangential at r = 1".into()));
        }
    }
    let times = config.time_grid();
    let shift = if config.shifted { plan.lambda0() } else { 0.0 };
    let linear = times
        .par_iter()
        .map(|&t| {
            let u = plan.apply_semigroup(t, u0, Generator::A)?;
            Ok(if shift == 0.0 { u } else { u.scale((-shift * t).exp()) })
        })
        .collect::<Result<Vec<_>>>()?;
    let it = Iteration {
        plan,
        times: times.clone(),
        shift,
        gamma: config.gamma(),
        q: config.q,
        linear: linear.clone(),
    };
    let k1 = it.weighted(&linear)?;
    let mut k_history = vec![k1];
    let mut increments = Vec::new();
    let mut states = linear.clone();
    let mut converged = false;
    let mut c0 = None;
    let mut iterations = 1;
    while k1 > 0.0 && iterations < config.max_iters {
        let next = it.map(&states)?;
        let inc = it.weighted(&it.difference(&next, &states)?)?;
        if c0.is_none() && k1 > 0.0 {
            c0 = Some(it.weighted(&it.difference(&next, &linear)?)? / (k1 * k1));
        }
        states = next;
        iterations += 1;
        k_history.push(it.weighted(&states)?);
        let rel = if k1 > 0.0 { inc / k1 } else { inc };
        increments.push(rel);
        if !rel.is_finite() {
            break;
        }
        if rel < config.tol {
            converged = true;
            break;
        }
    }
    if k1 == 0.0 {
        converged = true;
    }
    let residual = {
        let again = it.map(&states)?;
        let d = it.weighted(&it.difference(&again, &states)?)?;
        if k1 > 0.0 {
            d / k1
        } else {
            d
        }
    };
    let audit = c0.map(|c0| {
        let worst_ratio = k_history
            .windows(2)
            .skip(1)
            .map(|w| w[1] / (k1 + c0 * w[0] * w[0]))
            .fold(0.0, f64::max);
        KAudit {
            c0_measured: c0,
            worst_ratio,
            holds: worst_ratio <= 1.05,
            beyond_threshold: k1 > 1.0 / (4.0 * c0),
        }
    });
    let states: Vec<SpectralField> = if shift == 0.0 {
        states
    } else {
        states.iter().zip(&times).map(|(v, &t)| v.scale((shift * t).exp())).collect()
    };
    let energy = energy_ledger(&times, &states, u0);
    let weighted_start = match times.get(1) {
        Some(&t) => t.powf(config.gamma()) * lp_norm(&states[1], config.q)?,
        None => 0.0,
    };
    let mut max_divergence = 0.0f64;
    let mut max_normal_trace = 0.0f64;
    for u in &states {
        if u.max_abs() > 0.0 {
            max_divergence = max_divergence.max(divergence_defect(u)?);
        }
        max_normal_trace = max_normal_trace.max(normal_trace(u));
    }
    Ok(MildSolution {
        time_grid: times,
        states,
        k_history,
        increments,
        converged,
        iterations,
        residual,
        audit,
        energy,
        weighted_start,
        max_divergence,
        max_normal_trace,
    })
}

fn energy_ledger(times: &[f64], states: &[SpectralField], u0: &SpectralField) -> EnergyLedger {
    let initial = l2_norm(u0).powi(2);
    let dissipation: Vec<f64> = states.par_iter().map(|u| l2_norm(&gradient_power(u, 1)).powi(2)).collect();
    let mut integral = 0.0;
    let mut balance = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if i > 0 {
            integral += 0.5 * (times[i] - times[i - 1]) * (dissipation[i] + dissipation[i - 1]);
        }
        balance.push(l2_norm(&states[i]).powi(2) + 2.0 * integral);
    }
    let excess = if initial > 0.0 {
        balance.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b / initial - 1.0))
    } else {
        0.0
    };
    EnergyLedger { initial, balance, excess }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderRow {
    pub order: usize,
    pub sup: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityReport {
    pub mu: f64,
    pub s_norm: f64,
    pub t_min: f64,
    pub rows: Vec<HolderRow>,
    /// `(t, t^{1/2} |grad u(t)|_s)` for every positive grid time.
    pub sqrt_t_gradient: Vec<(f64, f64)>,
    pub bounded: bool,
}

/// Time-Holder quotients `|D^j u(t) - D^j u(tau)|_s / |t - tau|^mu` for
/// `j <= 2` over grid pairs with `t, tau >= t_min`.
pub fn regularity_probe(solution: &MildSolution, mu: f64, s_norm: f64, t_min: f64) -> Result<RegularityReport> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Precondition(format!("mu = {mu} outside (0, 1)")));
    }
    let idx: Vec<usize> = (0..solution.time_grid.len()).filter(|&i| solution.time_grid[i] >= t_min).collect();
    if idx.len() < 2 {
        return Err(Error::Precondition(format!("fewer than two grid times at or after {t_min}")));
    }
    let pairs: Vec<(usize, usize)> = idx.iter().flat_map(|&a| idx.iter().filter(move |&&b| b > a).map(move |&b| (a, b))).collect();
    let mut rows = Vec::with_capacity(3);
    for order in 0..=2 {
        let derivs: Vec<SpectralField> = idx.par_iter().map(|&i| gradient_power(&solution.states[i], order)).collect();
        let pos = |i: usize| idx.iter().position(|&j| j == i).expect("index in window");
        let sup = pairs
            .par_iter()
            .map(|&(a, b)| {
                let d = derivs[pos(b)].sub(&derivs[pos(a)])?;
                let dt = solution.time_grid[b] - solution.time_grid[a];
                Ok(lp_norm(&d, s_norm)? / dt.powf(mu))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(HolderRow {
            order,
            sup,
            pairs: pairs.len(),
        });
    }
    let sqrt_t_gradient = solution
        .time_grid
        .par_iter()
        .zip(&solution.states)
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, u)| Ok((t, t.sqrt() * lp_norm(&gradient_power(u, 1), s_norm)?)))
        .collect::<Result<Vec<_>>>()?;
    let bounded = rows.iter().all(|r| r.sup.is_finite()) && sqrt_t_gradient.iter().all(|v| v.1.is_finite());
    Ok(RegularityReport {
        mu,
        s_norm,
        t_min,
        rows,
        sqrt_t_gradient,
        bounded,
    })
}
