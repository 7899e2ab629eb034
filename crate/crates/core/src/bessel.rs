//! Bessel functions of the first kind for integer order, and their zeros.
//!
//! `J_n` is evaluated from Bessel's integral
//! `J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt` with the periodic
//! trapezoidal rule, which converges faster than any power once the node
//! count exceeds `|x| + |n|`. Used for analytic eigenfields and as the
//! eigenvalue oracle for the disk operators.

use std::f64::consts::PI;

pub fn bessel_j(n: i64, x: f64) -> f64 {
    let nodes = 2 * ((x.abs() + n.unsigned_abs() as f64).ceil() as usize + 48);
    let h = 2.0 * PI / nodes as f64;
    let nf = n as f64;
    let mut acc = 0.0;
    for i in 0..nodes {
        let t = i as f64 * h;
        acc += (nf * t - x * t.sin()).cos();
    }
    acc / nodes as f64
}

pub fn bessel_j_prime(n: i64, x: f64) -> f64 {
    0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
}

/// Second derivative from Bessel's equation; requires `x != 0`.
pub fn bessel_j_second(n: i64, x: f64) -> f64 {
    let nf = n as f64;
    -bessel_j_prime(n, x) / x - (1.0 - nf * nf / (x * x)) * bessel_j(n, x)
}

/// First `count` positive zeros of `J_n`.
pub fn bessel_j_zeros(n: i64, count: usize) -> Vec<f64> {
    find_zeros(|x| bessel_j(n, x), count)
}

/// First `count` positive zeros of `J_n'` (the zero at the origin excluded).
pub fn bessel_j_prime_zeros(n: i64, count: usize) -> Vec<f64> {
    find_zeros(|x| bessel_j_prime(n, x), count)
}

fn find_zeros(f: impl Fn(f64) -> f64, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let step = 0.05;
    let mut a = 1e-3;
    let mut fa = f(a);
    while zeros.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(&f, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    zeros
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 2.5) - 0.497_094_102_464_274_4).abs() < 1e-15);
        assert!((bessel_j(5, 10.0) - (-0.234_061_528_186_793_6)).abs() < 1e-14);
        assert!((bessel_j(-3, 2.0) + bessel_j(3, 2.0)).abs() < 1e-16);
    }

    #[test]
    fn tabulated_zeros() {
        let j0 = bessel_j_zeros(0, 3);
        assert!((j0[0] - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((j0[2] - 8.653_727_912_911_013).abs() < 1e-12);
        let jp0 = bessel_j_prime_zeros(0, 2);
        assert!((jp0[0] - 3.831_705_970_207_512).abs() < 1e-12);
        assert!((jp0[1] - 7.015_586_669_815_619).abs() < 1e-12);
        let jp1 = bessel_j_prime_zeros(1, 1);
        assert!((jp1[0] - 1.841_183_781_340_659).abs() < 1e-12);
        let jp2 = bessel_j_prime_zeros(2, 1);
        assert!((jp2[0] - 3.054_236_928_227_140).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_matches_difference() {
        let (n, x, h) = (2, 3.3, 1e-4);
        let fd = (bessel_j_prime(n, x + h) - bessel_j_prime(n, x - h)) / (2.0 * h);
        assert!((fd - bessel_j_second(n, x)).abs() < 1e-8);
    }
}
