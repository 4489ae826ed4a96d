//! Root finders shared by the queueing solvers.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{numeric, Result};

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 100_000;
/// Zeros closer than this are treated as a repeated zero.
pub const DUPLICATE_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Root in `(0, 1)` of a convex `g` with `g(0) > 0`, `g(1) = 0` and
/// `g'(1) > 0`. Finds a point just below one where `g < 0`, then bisects.
pub fn convex_root(g: impl Fn(f64) -> f64) -> Result<f64> {
    if !(g(0.0) > 0.0) {
        return Err(numeric("residual at zero is not positive"));
    }
    let hi = (1..=60)
        .map(|k| 1.0 - 10f64.powf(-(k as f64) / 4.0))
        .find(|&r| g(r) < 0.0)
        .ok_or_else(|| numeric("no sign change below one: root not found in (0,1)"))?;
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The `c` zeros of `z^c - A(z)` in the closed unit disk, the last one being
/// `z = 1`. Each non-unit zero is the fixed point of `z ← ω_j A(z)^{1/c}`
/// started from the `j`-th root of unity, then polished by Newton steps.
pub fn unit_disk_zeros(
    c: usize,
    a: impl Fn(Complex64) -> Complex64,
    da: impl Fn(Complex64) -> Complex64,
) -> Result<Vec<Complex64>> {
    let cf = c as f64;
    let f = |z: Complex64| z.powu(c as u32) - a(z);
    let df = |z: Complex64| cf * z.powu(c as u32 - 1) - da(z);
    let mut zeros = Vec::with_capacity(c);
    for j in 1..c {
        let omega = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / cf);
        let mut z = omega;
        let mut converged = false;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let next = omega * (a(z).ln() / cf).exp();
            let step = (next - z).norm();
            z = next;
            if step < FIXED_POINT_TOL {
                converged = true;
                break;
            }
        }
        for _ in 0..8 {
            let d = df(z);
            if d.norm() == 0.0 {
                break;
            }
            let cand = z - f(z) / d;
            if f(cand).norm() < f(z).norm() {
                z = cand;
            } else {
                break;
            }
        }
        let residual = f(z).norm();
        if !converged && residual >= RESIDUAL_TOL {
            return Err(numeric(format!("zero {j} of {c} did not converge (residual {residual:e})")));
        }
        if residual >= RESIDUAL_TOL || z.norm() > 1.0 + 1e-9 {
            return Err(numeric(format!(
                "zero {j} of {c} rejected: residual {residual:e}, modulus {}",
                z.norm()
            )));
        }
        zeros.push(z);
    }
    zeros.push(Complex64::new(1.0, 0.0));
    for (p, x) in zeros.iter().enumerate() {
        for y in &zeros[p + 1..] {
            if (x - y).norm() < DUPLICATE_TOL {
                return Err(numeric(format!("repeated zero near {x}")));
            }
        }
    }
    Ok(zeros)
}

/// Number of zeros of `f` inside the circle `|z| = radius`, from the winding
/// number of `f` along the circle with adaptive angular refinement.
pub fn count_zeros_inside(f: impl Fn(Complex64) -> Complex64, radius: f64) -> usize {
    fn walk(
        f: &impl Fn(Complex64) -> Complex64,
        radius: f64,
        t0: f64,
        t1: f64,
        f0: Complex64,
        f1: Complex64,
        depth: u32,
    ) -> f64 {
        let turn = (f1 / f0).arg();
        if turn.abs() < PI / 8.0 || depth > 40 {
            return turn;
        }
        let tm = 0.5 * (t0 + t1);
        let fm = f(Complex64::from_polar(radius, tm));
        walk(f, radius, t0, tm, f0, fm, depth + 1) + walk(f, radius, tm, t1, fm, f1, depth + 1)
    }
    let pieces = 256;
    let mut total = 0.0;
    let mut prev = f(Complex64::new(radius, 0.0));
    for k in 1..=pieces {
        let t0 = 2.0 * PI * (k - 1) as f64 / pieces as f64;
        let t1 = 2.0 * PI * k as f64 / pieces as f64;
        let cur = f(Complex64::from_polar(radius, t1));
        total += walk(&f, radius, t0, t1, prev, cur, 0);
        prev = cur;
    }
    (total / (2.0 * PI)).round().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_root_quadratic() {
        // r^2 - 1.5 r + 0.5 = (r - 0.5)(r - 1)
        let r = convex_root(|r| r * r - 1.5 * r + 0.5).unwrap();
        assert!((r - 0.5).abs() < 1e-13);
        assert!(convex_root(|r| r - 1.0).is_err());
    }

    #[test]
    fn zeros_of_exponential_c2() {
        // z^2 = 1/(2 - z): (z - 1)(z^2 - z - 1) = 0 in the unit disk
        let a = |z: Complex64| 1.0 / (2.0 - z);
        let da = |z: Complex64| 1.0 / ((2.0 - z) * (2.0 - z));
        let zs = unit_disk_zeros(2, a, da).unwrap();
        let expected = (1.0 - 5f64.sqrt()) / 2.0;
        assert!((zs[0] - expected).norm() < 1e-12);
        assert_eq!(zs[1], Complex64::new(1.0, 0.0));
        assert_eq!(count_zeros_inside(|z| z * z - a(z), 1.0 + 1e-6), 2);
    }

    #[test]
    fn winding_of_polynomial() {
        let f = |z: Complex64| (z - 0.5) * (z + Complex64::new(0.0, 0.9)) * (z - 3.0);
        assert_eq!(count_zeros_inside(f, 1.0), 2);
        assert_eq!(count_zeros_inside(f, 0.6), 1);
    }
}
