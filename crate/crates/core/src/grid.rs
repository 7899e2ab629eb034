//! Discretization of the periodized cylinder `D x [0, L)`.
//!
//! Radially we collocate on the positive half of an odd-order
//! Chebyshev-Gauss-Lobatto grid on `[-1, 1]`, so the pole is never a node
//! and `r = 1` is the last node. Differentiation is done with the full
//! Chebyshev matrix folded by the parity of the function being
//! differentiated; for angular mode `m` a scalar profile has parity `m`, and
//! each `r`/`theta` tensor index flips it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::real_solve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(k: i64) -> Self {
        if k.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralGrid {
    n_r: usize,
    n_theta: usize,
    n_z: usize,
    period_l: f64,
    radial_nodes: Vec<f64>,
    radial_quad_weights: Vec<f64>,
    diff_even: Vec<f64>,
    diff_odd: Vec<f64>,
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_r == other.n_r
            && self.n_theta == other.n_theta
            && self.n_z == other.n_z
            && self.period_l.to_bits() == other.period_l.to_bits()
    }
}

impl SpectralGrid {
    pub fn new(n_r: usize, n_theta: usize, n_z: usize, period_l: f64) -> Result<Self> {
        if n_r < 4 {
            return Err(Error::InvalidGrid(format!("n_r = {n_r} must be at least 4")));
        }
        for (name, n) in [("n_theta", n_theta), ("n_z", n_z)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be even and at least 4")));
            }
        }
        if !(period_l.is_finite() && period_l > 0.0) {
            return Err(Error::InvalidGrid(format!("period_L = {period_l} must be positive")));
        }

        let order = 2 * n_r - 1;
        let full = chebyshev_matrix(order);
        // node j of the full grid is cos(pi j / order); radial index i maps to j = n_r - 1 - i
        let radial_nodes: Vec<f64> = (0..n_r)
            .map(|i| (PI * (n_r - 1 - i) as f64 / order as f64).cos())
            .collect();
        let fold = |parity: Parity| {
            let s = parity.sign();
            let mut d = vec![0.0; n_r * n_r];
            for i in 0..n_r {
                let ji = n_r - 1 - i;
                for k in 0..n_r {
                    let jk = n_r - 1 - k;
                    d[i * n_r + k] = full[ji * (order + 1) + jk] + s * full[ji * (order + 1) + (order - jk)];
                }
            }
            d
        };
        let diff_even = fold(Parity::Even);
        let diff_odd = fold(Parity::Odd);
        let radial_quad_weights = radial_weights(n_r, order)?;

        Ok(Self {
            n_r,
            n_theta,
            n_z,
            period_l,
            radial_nodes,
            radial_quad_weights,
            diff_even,
            diff_odd,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn n_z(&self) -> usize {
        self.n_z
    }
    pub fn period_l(&self) -> f64 {
        self.period_l
    }
    pub fn radial_nodes(&self) -> &[f64] {
        &self.radial_nodes
    }
    /// Weights for `int_0^1 f(r) r dr`.
    pub fn radial_quad_weights(&self) -> &[f64] {
        &self.radial_quad_weights
    }

    /// Folded first-derivative matrix (row-major) for profiles of the given parity.
    pub fn diff(&self, parity: Parity) -> &[f64] {
        match parity {
            Parity::Even => &self.diff_even,
            Parity::Odd => &self.diff_odd,
        }
    }

    pub fn boundary_index(&self) -> usize {
        self.n_r - 1
    }

    /// Angular wavenumber stored at index `im`.
    pub fn m_of(&self, im: usize) -> i64 {
        im as i64 - self.n_theta as i64 / 2 + 1
    }

    pub fn k_of(&self, ik: usize) -> i64 {
        ik as i64 - self.n_z as i64 / 2 + 1
    }

    pub fn xi_of(&self, ik: usize) -> f64 {
        2.0 * PI * self.k_of(ik) as f64 / self.period_l
    }

    pub fn index_of_m(&self, m: i64) -> Option<usize> {
        let im = m + self.n_theta as i64 / 2 - 1;
        (0..self.n_theta as i64).contains(&im).then_some(im as usize)
    }

    pub fn index_of_k(&self, k: i64) -> Option<usize> {
        let ik = k + self.n_z as i64 / 2 - 1;
        (0..self.n_z as i64).contains(&ik).then_some(ik as usize)
    }

    pub fn m_values(&self) -> Vec<i64> {
        (0..self.n_theta).map(|im| self.m_of(im)).collect()
    }

    pub fn xi_values(&self) -> Vec<f64> {
        (0..self.n_z).map(|ik| self.xi_of(ik)).collect()
    }

    /// Nyquist modes carry no information in real fields and are kept at zero.
    pub fn is_nyquist(&self, im: usize, ik: usize) -> bool {
        im == self.n_theta - 1 || ik == self.n_z - 1
    }

    /// Mirror `(m, k) -> (-m, -k)` for non-Nyquist modes.
    pub fn conjugate_mode(&self, im: usize, ik: usize) -> Option<(usize, usize)> {
        if self.is_nyquist(im, ik) {
            return None;
        }
        Some((self.index_of_m(-self.m_of(im))?, self.index_of_k(-self.k_of(ik))?))
    }

    pub fn n_modes(&self) -> usize {
        self.n_theta * self.n_z
    }

    pub fn volume(&self) -> f64 {
        PI * self.period_l
    }
}

/// Chebyshev-Gauss-Lobatto differentiation matrix of order `n` (size `n+1`,
/// row-major), nodes `cos(pi j / n)`.
fn chebyshev_matrix(n: usize) -> Vec<f64> {
    let size = n + 1;
    let c = |j: usize| {
        let base = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            base
        } else {
            -base
        }
    };
    let mut d = vec![0.0; size * size];
    let half = PI / (2.0 * n as f64);
    for i in 0..size {
        let mut row_sum = 0.0;
        for j in 0..size {
            if i == j {
                continue;
            }
            // x_i - x_j without cancellation
            let dx = -2.0 * (half * (i + j) as f64).sin() * (half * (i as f64 - j as f64)).sin();
            let v = c(i) / c(j) / dx;
            d[i * size + j] = v;
            row_sum += v;
        }
        d[i * size + i] = -row_sum;
    }
    d
}

/// Interpolatory weights in `s = r^2` on the positive Chebyshev nodes,
/// exact for `int_0^1 r^{2j} r dr`, `j < n_r`.
fn radial_weights(n_r: usize, order: usize) -> Result<Vec<f64>> {
    // rows: T_k(2 r_i^2 - 1) = cos(2 k phi_i), phi_i = pi j_i / order
    let mut a = vec![0.0; n_r * n_r];
    let mut b = vec![0.0; n_r];
    for k in 0..n_r {
        for i in 0..n_r {
            let phi = PI * (n_r - 1 - i) as f64 / order as f64;
            a[k * n_r + i] = (2.0 * k as f64 * phi).cos();
        }
        b[k] = if k % 2 == 0 {
            0.5 / (1.0 - (k * k) as f64)
        } else {
            0.0
        };
    }
    real_solve(&a, n_r, &b).ok_or_else(|| Error::InvalidGrid("radial quadrature system is singular".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpectralGrid::new(8, 7, 8, 1.0).is_err());
        assert!(SpectralGrid::new(8, 8, 6, 0.0).is_err());
        assert!(SpectralGrid::new(3, 8, 8, 1.0).is_err());
        assert!(SpectralGrid::new(8, 8, 8, -2.0).is_err());
    }

    #[test]
    fn wavenumbers() {
        let g = SpectralGrid::new(8, 8, 8, 2.0 * PI).unwrap();
        let xi = g.xi_values();
        let ints: Vec<i64> = xi.iter().map(|x| x.round() as i64).collect();
        assert_eq!(ints, vec![-3, -2, -1, 0, 1, 2, 3, 4]);
        for x in &xi {
            assert!((x - x.round()).abs() < 1e-14);
        }
        let g = SpectralGrid::new(16, 16, 16, 4.0 * PI).unwrap();
        assert!((g.xi_of(g.index_of_k(1).unwrap()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nodes_exclude_pole() {
        let g = SpectralGrid::new(12, 8, 8, 1.0).unwrap();
        let r = g.radial_nodes();
        assert!(r[0] > 0.0);
        assert_eq!(*r.last().unwrap(), 1.0);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn quadrature_exact_on_monomials() {
        for n_r in [4, 9, 16, 32, 48, 64] {
            let g = SpectralGrid::new(n_r, 4, 4, 1.0).unwrap();
            assert!(g.radial_quad_weights().iter().all(|&w| w > 0.0));
            for j in 0..n_r {
                let exact = 1.0 / (2 * j + 2) as f64;
                let q: f64 = g
                    .radial_nodes()
                    .iter()
                    .zip(g.radial_quad_weights())
                    .map(|(r, w)| w * r.powi(2 * j as i32))
                    .sum();
                assert!(((q - exact) / exact).abs() < 1e-12, "n_r={n_r} j={j}");
            }
        }
    }

    #[test]
    fn r4_moment() {
        let g = SpectralGrid::new(32, 32, 32, 2.0 * PI).unwrap();
        let q: f64 = g
            .radial_nodes()
            .iter()
            .zip(g.radial_quad_weights())
            .map(|(r, w)| w * r.powi(3))
            .sum();
        // odd integrands are outside the exactness class; convergence is algebraic in n_r
        assert!((q - 0.2).abs() < 1e-8);
    }

    #[test]
    fn folded_derivative_is_exact_on_parity_polynomials() {
        let g = SpectralGrid::new(10, 4, 4, 1.0).unwrap();
        let n = g.n_r();
        let r = g.radial_nodes();
        // even: r^6 + 2 r^2, odd: r^5 - r
        let even: Vec<f64> = r.iter().map(|x| x.powi(6) + 2.0 * x * x).collect();
        let odd: Vec<f64> = r.iter().map(|x| x.powi(5) - x).collect();
        for i in 0..n {
            let de: f64 = (0..n).map(|k| g.diff(Parity::Even)[i * n + k] * even[k]).sum();
            let dodd: f64 = (0..n).map(|k| g.diff(Parity::Odd)[i * n + k] * odd[k]).sum();
            assert!((de - (6.0 * r[i].powi(5) + 4.0 * r[i])).abs() < 1e-11);
            assert!((dodd - (5.0 * r[i].powi(4) - 1.0)).abs() < 1e-11);
        }
    }
}
