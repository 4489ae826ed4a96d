//! Expected request distance of the unidirectional policies, from their
//! mapping onto batch-service queues.
//!
//! * Poisson users and servers: bulk-service M/M/1 ([`mm1_bulk`]).
//! * Renewal users, Poisson servers: accessible-batch G/M/1 ([`grps_expected_distance`]).
//! * Poisson users, renewal servers: exceptional first service
//!   ([`prgs_expected_distance`]).

mod esabq;
pub mod roots;

pub use esabq::{prgs_expected_distance, prgs_solve, prgs_zeros, EsabqSolution, FirstService};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::distributions::{exceptional_dist, factorial, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::quad;
use roots::convex_root;

fn check_rates(lambda: f64, mu: f64, capacity: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0 && mu.is_finite() && mu > 0.0) {
        return Err(invalid(format!("rates must be positive, got λ={lambda}, μ={mu}")));
    }
    if lambda >= capacity * mu {
        return Err(Error::Unstable { load: lambda / mu, capacity });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkMM1Result {
    pub r0: f64,
    pub expected_distance: f64,
}

/// Bulk-service M/M/1: `r0` is the root in `(0,1)` of
/// `μ r^{c+1} - (λ+μ) r + λ = 0` and `E[D] = r0 / (λ(1 - r0))`.
pub fn mm1_bulk(lambda: f64, mu: f64, c: u32) -> Result<BulkMM1Result> {
    if c == 0 {
        return Err(invalid("capacity must be at least 1"));
    }
    check_rates(lambda, mu, c as f64)?;
    let r0 = convex_root(|r| mu * r.powi(c as i32 + 1) - (lambda + mu) * r + lambda)?;
    Ok(BulkMM1Result { r0, expected_distance: r0 / (lambda * (1.0 - r0)) })
}

/// `I₁(y)` in log space, from its power series.
fn ln_bessel_i1(y: f64) -> f64 {
    let half = 0.5 * y;
    let ln_half = half.ln();
    // log-sum-exp over terms (y/2)^{2k+1} / (k!(k+1)!)
    let mut ln_term = ln_half;
    let mut ln_sum = ln_term;
    let mut k = 0u64;
    loop {
        let kf = k as f64;
        ln_term += 2.0 * ln_half - ((kf + 1.0) * (kf + 2.0)).ln();
        k += 1;
        let hi = ln_sum.max(ln_term);
        ln_sum = hi + ((ln_sum - hi).exp() + (ln_term - hi).exp()).ln();
        if k as f64 > half && ln_term - ln_sum < (1e-15f64).ln() {
            break;
        }
    }
    ln_sum
}

/// Density of the UGS request distance with Poisson users and servers and
/// unit capacity: `(1/(x√ρ)) e^{-(λ+μ)x} I₁(2x√(λμ))`.
pub fn ugs_distance_density(lambda: f64, mu: f64, x: f64) -> Result<f64> {
    check_rates(lambda, mu, 1.0)?;
    if !(x >= 0.0) {
        return Err(invalid("distance must be nonnegative"));
    }
    if x == 0.0 {
        return Ok(mu);
    }
    let rho = lambda / mu;
    let y = 2.0 * x * (lambda * mu).sqrt();
    Ok((ln_bessel_i1(y) - (lambda + mu) * x - (x * rho.sqrt()).ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpsResult {
    pub r0: f64,
    /// `1 / F*_Y(μ)`.
    pub omega: f64,
    /// Normalisation constant of the waiting-buffer probabilities.
    pub normalization: f64,
    pub mean_queue: f64,
    pub expected_distance: f64,
}

/// Renewal users, Poisson servers (rate `μ`), capacity `c`.
///
/// The buffer seen by arrivals is geometric in `r0`, the root in `(0,1)` of
/// `r = F*_Y(μ - μ r^c)`, which fixes the normalisation constant at
/// `C = λ r0^c (1 - r0)`. Then `E[N_q] = C/(μ(1-r0^c)(1-r0))` and
/// `E[D] = E[N_q]/λ + 1/μ`.
pub fn grps_expected_distance(user_law: &DistributionSpec, mu: f64, c: u32) -> Result<GrpsResult> {
    if c == 0 {
        return Err(invalid("capacity must be at least 1"));
    }
    let lambda = user_law.rate();
    check_rates(lambda, mu, c as f64)?;
    let r0 = convex_root(|r| user_law.lst_real(mu - mu * r.powi(c as i32)) - r)?;
    let rc = r0.powi(c as i32);
    let normalization = lambda * rc * (1.0 - r0);
    let mean_queue = normalization / (mu * (1.0 - rc) * (1.0 - r0));
    Ok(GrpsResult {
        r0,
        omega: 1.0 / user_law.lst_real(mu),
        normalization,
        mean_queue,
        expected_distance: mean_queue / lambda + 1.0 / mu,
    })
}

/// Heavy-traffic approximation for general users and servers, unit capacity:
/// `α_X + (σ_X² + σ_Y²) / (2 α_Y (1 - ρ))`. An approximation, not an identity.
pub fn heavy_traffic_distance(user_law: &DistributionSpec, server_law: &DistributionSpec) -> Result<f64> {
    let ax = server_law.mean();
    let ay = user_law.mean();
    let rho = ax / ay;
    if rho >= 1.0 {
        return Err(Error::Unstable { load: rho, capacity: 1.0 });
    }
    Ok(ax + (server_law.variance() + user_law.variance()) / (2.0 * ay * (1.0 - rho)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnidirModel {
    Grps,
    Prgs,
}

/// Limit of the expected distance as capacity grows without bound: the mean
/// gap to the next server, `1/μ` for Poisson servers and
/// `(μ/2)(σ_X² + 1/μ²)` (the residual gap) for renewal servers.
pub fn uncapacitated_distance(model: UnidirModel, server_law: &DistributionSpec) -> f64 {
    match model {
        UnidirModel::Grps => server_law.mean(),
        UnidirModel::Prgs => server_law.second_moment() / (2.0 * server_law.mean()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostResult {
    pub beta: f64,
    pub t0: f64,
    pub expected_cost: f64,
}

/// Expected cost `t0·E[D^β]` with renewal users and Poisson servers, unit
/// capacity. The distance is exponential with rate `μ(1 - r0)`.
pub fn cost_grps(user_law: &DistributionSpec, mu: f64, beta: f64, t0: f64) -> Result<CostResult> {
    if !(beta >= 0.0) {
        return Err(invalid("path-loss exponent must be nonnegative"));
    }
    let g = grps_expected_distance(user_law, mu, 1)?;
    let rate = mu * (1.0 - g.r0);
    let expected_cost = t0 * gamma(beta + 1.0) / rate.powf(beta);
    Ok(CostResult { beta, t0, expected_cost })
}

/// Expected cost `t0·E[D^β]` with Poisson users and renewal servers, unit
/// capacity, integer `β`. The distance transform of the exceptional-service
/// M/G/1 queue is
/// `W*(s) = (1-ρ)[λ(F*_Z(s) - F*_X(s)) - s F*_Z(s)] / ((1-ρ+ρ_Z)(λ - s - λF*_X(s)))`,
/// and both sides are expanded in exact moments before dividing.
pub fn cost_prgs(lambda: f64, server_law: &DistributionSpec, beta: u32, t0: f64) -> Result<CostResult> {
    if beta == 0 {
        return Ok(CostResult { beta: 0.0, t0, expected_cost: t0 });
    }
    check_rates(lambda, server_law.rate(), 1.0)?;
    let z = exceptional_dist(server_law, lambda)?;
    let order = beta as usize + 1;
    // Taylor coefficients of the transforms: (-1)^n m_n / n!
    let taylor = |m: &dyn Fn(u32) -> f64| -> Result<Vec<f64>> {
        (0..=order as u32)
            .map(|n| {
                let v = m(n);
                if !v.is_finite() {
                    return Err(invalid(format!("moment {n} is not finite")));
                }
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                Ok(sign * v / factorial(n))
            })
            .collect()
    };
    let x = taylor(&|n| server_law.moment(n))?;
    let zc = taylor(&|n| match n {
        0 => 1.0,
        1 => z.mean(),
        2 => z.second_moment(),
        _ => z.moment(n),
    })?;
    let rho = lambda * server_law.mean();
    let rho_z = z.load();
    // both sides vanish at s = 0: drop the constant terms and shift
    let num: Vec<f64> = (1..=order)
        .map(|n| (1.0 - rho) * (lambda * (zc[n] - x[n]) - zc[n - 1]))
        .collect();
    let den: Vec<f64> = (1..=order)
        .map(|n| {
            let d = if n == 1 { -(1.0 - rho) } else { -lambda * x[n] };
            d * (1.0 - rho + rho_z)
        })
        .collect();
    let mut w = vec![0.0; order];
    for k in 0..order {
        let acc: f64 = (1..=k).map(|j| den[j] * w[k - j]).sum();
        w[k] = (num[k] - acc) / den[0];
    }
    let sign = if beta % 2 == 0 { 1.0 } else { -1.0 };
    let expected_cost = t0 * sign * factorial(beta) * w[beta as usize];
    Ok(CostResult { beta: beta as f64, t0, expected_cost })
}

/// Two-resource fork-join approximation with Poisson users and servers:
/// `E[D_max] = (12μ - λ) / (8μ(μ - λ))`.
pub fn forkjoin_expected_max(lambda: f64, mu: f64) -> Result<f64> {
    check_rates(lambda, mu, 1.0)?;
    Ok((12.0 * mu - lambda) / (8.0 * mu * (mu - lambda)))
}

/// `∫₀^∞ f`, integrating on doubling panels until they become negligible.
pub fn integrate_half_line(f: impl Fn(f64) -> f64, scale: f64, tol: f64) -> f64 {
    let mut total = quad::integrate(&f, 0.0, scale, tol);
    let mut lo = scale;
    for _ in 0..60 {
        let piece = quad::integrate(&f, lo, 2.0 * lo, tol);
        total += piece;
        lo *= 2.0;
        if piece.abs() < tol * 1e-3 {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bulk_reference_values() {
        let r = mm1_bulk(0.5, 1.0, 1).unwrap();
        assert!((r.expected_distance - 2.0).abs() < 1e-10);
        let r = mm1_bulk(1.0, 1.0, 2).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((r.r0 - golden).abs() < 1e-12);
        assert!((r.expected_distance - golden / (1.0 - golden)).abs() < 1e-10);
        assert!(mm1_bulk(2.0, 1.0, 2).is_err());
    }

    #[test]
    fn bulk_root_satisfies_polynomial() {
        for (lam, c) in [(0.3, 1), (1.7, 2), (2.9, 3), (4.5, 5)] {
            let r = mm1_bulk(lam, 1.0, c).unwrap().r0;
            let res = r.powi(c as i32 + 1) - (lam + 1.0) * r + lam;
            assert!(res.abs() < 1e-12, "{res}");
        }
    }

    #[test]
    fn ugs_density_normalised_with_mean() {
        let f = |x: f64| ugs_distance_density(0.5, 1.0, x).unwrap();
        let mass = integrate_half_line(f, 10.0, 1e-12);
        let mean = integrate_half_line(|x| x * f(x), 10.0, 1e-12);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        assert!((mean - 2.0).abs() < 1e-4, "{mean}");
        // light traffic: the distance is the gap to the next server
        let g = |x: f64| ugs_distance_density(1e-6, 1.0, x).unwrap();
        let m = integrate_half_line(|x| x * g(x), 10.0, 1e-12);
        assert!((m - 1.0).abs() < 1e-4);
    }

    #[test]
    fn bessel_series_small_and_large() {
        // I1(1) = 0.565159103992485...
        assert!((ln_bessel_i1(1.0).exp() - 0.565_159_103_992_485).abs() < 1e-14);
        // I1(50) ≈ 2.90267e20
        let v = ln_bessel_i1(50.0).exp();
        assert!((v / 2.903_078_590_103_556e20 - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn grps_reference_values() {
        let e = DistributionSpec::exponential(0.5).unwrap();
        let g = grps_expected_distance(&e, 1.0, 1).unwrap();
        assert!((g.r0 - 0.5).abs() < 1e-12);
        assert!((g.expected_distance - 2.0).abs() < 1e-10);
        let d = DistributionSpec::deterministic(2.0).unwrap();
        let g = grps_expected_distance(&d, 1.0, 1).unwrap();
        assert!((g.r0 - 0.20319).abs() < 1e-5);
        assert!((g.expected_distance - g.r0 / (1.0 - g.r0) - 1.0).abs() < 1e-12);
        assert!((g.expected_distance - 1.25500).abs() < 1e-5);
        assert!((g.omega - 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn heavy_traffic_plug_in() {
        let d1 = DistributionSpec::deterministic(1.0).unwrap();
        let d2 = DistributionSpec::deterministic(2.0).unwrap();
        assert_eq!(heavy_traffic_distance(&d2, &d1).unwrap(), 1.0);
        let y = DistributionSpec::exponential(0.9).unwrap();
        let x = DistributionSpec::exponential(1.0).unwrap();
        let v = heavy_traffic_distance(&y, &x).unwrap();
        let expected = 1.0 + (1.0 + 1.0 / 0.81) / (2.0 / 0.9 * 0.1);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 11.0556).abs() < 1e-4);
        assert!(heavy_traffic_distance(&x, &y).is_err());
    }

    #[test]
    fn uncapacitated_limits() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        assert_eq!(uncapacitated_distance(UnidirModel::Grps, &e), 1.0);
        assert_eq!(uncapacitated_distance(UnidirModel::Prgs, &e), 1.0);
        let d = DistributionSpec::deterministic(1.0).unwrap();
        assert_eq!(uncapacitated_distance(UnidirModel::Prgs, &d), 0.5);
    }

    #[test]
    fn grps_cost_reference() {
        let e = DistributionSpec::exponential(0.5).unwrap();
        assert!((cost_grps(&e, 1.0, 0.0, 3.0).unwrap().expected_cost - 3.0).abs() < 1e-12);
        assert!((cost_grps(&e, 1.0, 2.0, 1.0).unwrap().expected_cost - 8.0).abs() < 1e-9);
        let d = DistributionSpec::deterministic(2.0).unwrap();
        let g = grps_expected_distance(&d, 1.0, 1).unwrap();
        let c = cost_grps(&d, 1.0, 1.0, 2.0).unwrap();
        assert!((c.expected_cost - 2.0 * g.expected_distance).abs() < 1e-10);
    }

    #[test]
    fn prgs_cost_reference() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        let c1 = cost_prgs(0.5, &e, 1, 1.0).unwrap();
        assert!((c1.expected_cost - 2.0).abs() < 1e-10);
        let c2 = cost_prgs(0.5, &e, 2, 1.0).unwrap();
        assert!((c2.expected_cost - 8.0).abs() < 1e-9);
        // third moment of Exp(0.5): 6 / 0.125
        let c3 = cost_prgs(0.5, &e, 3, 1.0).unwrap();
        assert!((c3.expected_cost - 48.0).abs() < 1e-7);
        let d = DistributionSpec::deterministic(1.0).unwrap();
        let c = cost_prgs(0.5, &d, 1, 1.0).unwrap();
        let s = prgs_expected_distance(0.5, &d, 1).unwrap();
        assert!((c.expected_cost - s.expected_distance).abs() < 1e-8);
        assert_eq!(cost_prgs(0.5, &d, 0, 2.5).unwrap().expected_cost, 2.5);
    }

    #[test]
    fn forkjoin_formula() {
        assert!((forkjoin_expected_max(0.5, 1.0).unwrap() - 2.875).abs() < 1e-12);
        assert!((forkjoin_expected_max(1e-9, 1.0).unwrap() - 1.5).abs() < 1e-8);
        for lam in [0.1, 0.5, 0.9] {
            assert!(forkjoin_expected_max(lam, 1.0).unwrap() > 1.0 / (1.0 - lam));
        }
    }
}
