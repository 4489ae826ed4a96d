//! Poisson requests with renewal servers: the batch queue whose first batch
//! in a busy period has an exceptional service law.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::roots::{count_zeros_inside, unit_disk_zeros};
use crate::distributions::{exceptional_dist, DistributionSpec, ExceptionalDist};
use crate::error::{invalid, numeric, Error, Result};

/// Which law the first batch of a busy period is served with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstService {
    /// The exceptional law `Z` induced by the spatial model.
    #[default]
    Exceptional,
    /// Same law as every other batch (classical bulk queue).
    Ordinary,
}

#[derive(Debug, Clone)]
enum FirstLaw {
    Exceptional(ExceptionalDist),
    Ordinary(DistributionSpec),
}

impl FirstLaw {
    fn lst(&self, s: Complex64) -> Complex64 {
        match self {
            FirstLaw::Exceptional(z) => z.lst(s),
            FirstLaw::Ordinary(x) => x.lst(s),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            FirstLaw::Exceptional(z) => z.mean(),
            FirstLaw::Ordinary(x) => x.mean(),
        }
    }

    fn second_moment(&self) -> f64 {
        match self {
            FirstLaw::Exceptional(z) => z.second_moment(),
            FirstLaw::Ordinary(x) => x.second_moment(),
        }
    }
}

/// Solution of the exceptional-service accessible-batch queue.
#[derive(Debug, Clone)]
pub struct EsabqSolution {
    pub lambda: f64,
    pub server_law: DistributionSpec,
    pub c: usize,
    /// Zeros of `z^c - F*_X(λ(1-z))` in the closed unit disk; the last is 1.
    pub zeros: Vec<Complex64>,
    /// Boundary coefficients `a_1..a_c`.
    pub coefficients: Vec<f64>,
    pub mean_queue: f64,
    pub expected_distance: f64,
    pub rho: f64,
    pub rho_z: f64,
    first: FirstLaw,
}

impl EsabqSolution {
    fn theta(&self, z: Complex64) -> Complex64 {
        self.lambda * (1.0 - z)
    }

    /// Queue-length generating function `N(z)` for `|z| <= 1`, `z != 1`.
    /// At `z = 1` returns the value given by the normalising condition.
    pub fn n_at(&self, z: Complex64) -> Complex64 {
        if (z - 1.0).norm() == 0.0 {
            return Complex64::new(self.normalization(), 0.0);
        }
        let c = self.c as u32;
        let th = self.theta(z);
        let fx = self.server_law.lst(th);
        let fz = self.first.lst(th);
        let zc = z.powu(c);
        let num: Complex64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let zk = z.powu(k as u32 + 1);
                a * (zc - zk + z * (1.0 - zc) * fz - (1.0 - zk) * fx)
            })
            .sum();
        num / (th * (zc - fx))
    }

    /// `lim_{z→1} N(z)`, equal to one when the boundary system is solved.
    pub fn normalization(&self) -> f64 {
        let c = self.c as f64;
        let s: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, &a)| a * (c * (1.0 + self.rho_z) - self.rho * (k + 1) as f64))
            .sum();
        s / (self.lambda * (c - self.rho))
    }

    /// First `count` power-series coefficients of `N(z)` (queue-length
    /// probabilities), by a discrete Fourier transform on a circle that keeps
    /// clear of the interior zeros.
    pub fn pgf_coefficients(&self, count: usize) -> Vec<f64> {
        let radius = [0.9, 0.85, 0.93, 0.8, 0.95, 0.75, 0.7]
            .into_iter()
            .max_by(|a, b| {
                self.zero_clearance(*a).total_cmp(&self.zero_clearance(*b))
            })
            .unwrap();
        let m = 256.max(4 * count);
        let values: Vec<Complex64> = (0..m)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                self.n_at(Complex64::from_polar(radius, phi))
            })
            .collect();
        (0..count)
            .map(|n| {
                let s: Complex64 = values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| {
                        let phi = 2.0 * std::f64::consts::PI * (k * n % m) as f64 / m as f64;
                        v * Complex64::from_polar(1.0, -phi)
                    })
                    .sum();
                s.re / (m as f64 * radius.powi(n as i32))
            })
            .collect()
    }

    fn zero_clearance(&self, r: f64) -> f64 {
        self.zeros[..self.c - 1]
            .iter()
            .map(|z| (z.norm() - r).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Argument-principle count of zeros of `z^c - F*_X(λ(1-z))` inside
    /// `|z| = 1 + 1e-6`.
    pub fn zero_count(&self) -> usize {
        let c = self.c as u32;
        count_zeros_inside(|z| z.powu(c) - self.server_law.lst(self.theta(z)), 1.0 + 1e-6)
    }
}

fn check_stable(lambda: f64, server_law: &DistributionSpec, c: usize) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) || c == 0 {
        return Err(invalid("need lambda > 0 and c >= 1"));
    }
    let rho = lambda * server_law.mean();
    if rho >= c as f64 {
        return Err(Error::Unstable { load: rho, capacity: c as f64 });
    }
    Ok(rho)
}

/// Zeros of `z^c - F*_X(λ(1-z))` in the closed unit disk (last one is 1).
pub fn prgs_zeros(lambda: f64, server_law: &DistributionSpec, c: usize) -> Result<Vec<Complex64>> {
    check_stable(lambda, server_law, c)?;
    unit_disk_zeros(
        c,
        |z| server_law.lst(lambda * (1.0 - z)),
        |z| -lambda * server_law.lst_derivative(lambda * (1.0 - z)),
    )
}

/// Expected request distance with Poisson users (rate `λ`) and renewal
/// servers of capacity `c`.
pub fn prgs_expected_distance(
    lambda: f64,
    server_law: &DistributionSpec,
    c: usize,
) -> Result<EsabqSolution> {
    prgs_solve(lambda, server_law, c, FirstService::Exceptional)
}

/// As [`prgs_expected_distance`], choosing the first-batch service law.
pub fn prgs_solve(
    lambda: f64,
    server_law: &DistributionSpec,
    c: usize,
    first: FirstService,
) -> Result<EsabqSolution> {
    let rho = check_stable(lambda, server_law, c)?;
    let zeros = prgs_zeros(lambda, server_law, c)?;
    let first = match first {
        FirstService::Exceptional => FirstLaw::Exceptional(exceptional_dist(server_law, lambda)?),
        FirstService::Ordinary => FirstLaw::Ordinary(*server_law),
    };
    let rho_z = lambda * first.mean();
    let cf = c as f64;

    let mut m = DMatrix::<Complex64>::zeros(c, c);
    let mut rhs = DVector::<Complex64>::zeros(c);
    for (i, &xi) in zeros[..c - 1].iter().enumerate() {
        let th = lambda * (1.0 - xi);
        let u = first.lst(th) / server_law.lst(th);
        for k in 1..=c {
            m[(i, k - 1)] = u - xi.powi(k as i32 - c as i32 - 1);
        }
    }
    for k in 1..=c {
        m[(c - 1, k - 1)] = Complex64::new(cf * (1.0 + rho_z) - rho * k as f64, 0.0);
    }
    rhs[c - 1] = Complex64::new(lambda * (cf - rho), 0.0);
    let a = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("boundary coefficient system".into()))?;
    let scale = a.iter().map(|x| x.norm()).fold(1.0, f64::max);
    if let Some(bad) = a.iter().find(|x| x.im.abs() > 1e-8 * scale) {
        return Err(numeric(format!("boundary coefficient has imaginary part {:e}", bad.im)));
    }
    let coefficients: Vec<f64> = a.iter().map(|x| x.re).collect();

    let m2z = first.second_moment();
    let m2x = server_law.second_moment();
    let l2 = lambda * lambda;
    let sum: f64 = coefficients
        .iter()
        .enumerate()
        .map(|(idx, &ak)| {
            let k = (idx + 1) as f64;
            ak * (l2 * m2z * cf * (cf - rho)
                + l2 * m2x * cf * (1.0 + rho_z - k)
                + (cf * k * (cf - k) + k * (k - 1.0) * rho - cf * (cf - 1.0)) * rho
                + 2.0 * cf * cf * rho_z
                - cf * (cf + 1.0) * rho_z * rho)
        })
        .sum();
    let mean_queue = sum / (2.0 * lambda * (cf - rho).powi(2));
    Ok(EsabqSolution {
        lambda,
        server_law: *server_law,
        c,
        zeros,
        coefficients,
        mean_queue,
        expected_distance: mean_queue / lambda,
        rho,
        rho_z,
        first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::mm1_bulk;

    #[test]
    fn single_zero_for_c1() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        assert_eq!(prgs_zeros(0.5, &e, 1).unwrap(), vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn exponential_servers_reduce_to_bulk_queue() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        for (lam, c) in [(0.5, 1), (1.0, 2), (0.8, 2), (2.0, 3), (4.0, 5)] {
            let s = prgs_expected_distance(lam, &e, c).unwrap();
            let b = mm1_bulk(lam, 1.0, c as u32).unwrap();
            assert!((s.expected_distance - b.expected_distance).abs() < 1e-8, "{lam} {c}");
        }
    }

    #[test]
    fn md1_pollaczek_khinchin() {
        let d = DistributionSpec::deterministic(1.0).unwrap();
        let s = prgs_solve(0.5, &d, 1, FirstService::Ordinary).unwrap();
        assert!((s.expected_distance - 1.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic_c2_residuals() {
        let d = DistributionSpec::deterministic(1.0).unwrap();
        let zs = prgs_zeros(0.8, &d, 2).unwrap();
        for z in zs {
            assert!(z.norm() <= 1.0 + 1e-12);
            assert!((z * z - d.lst(0.8 * (1.0 - z))).norm() < 1e-9);
        }
    }

    #[test]
    fn normalised_and_probabilities_nonnegative() {
        let laws = [
            DistributionSpec::deterministic(1.0).unwrap(),
            DistributionSpec::uniform(2.0).unwrap(),
        ];
        for law in laws {
            let s = prgs_expected_distance(1.6, &law, 2).unwrap();
            assert!((s.normalization() - 1.0).abs() < 1e-8);
            let h = 1e-5;
            let near = s.n_at(Complex64::new(1.0 - h, 0.0)).re;
            assert!((near - (1.0 - h * s.mean_queue)).abs() < 1e-7);
            let p = s.pgf_coefficients(50);
            assert!(p.iter().all(|&x| x > -1e-8), "{p:?}");
            assert_eq!(s.zero_count(), 2);
        }
    }

    #[test]
    fn unstable_rejected() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        assert!(matches!(prgs_expected_distance(2.0, &e, 2), Err(Error::Unstable { .. })));
    }
}
