//! Inter-point distance laws.
//!
//! A [`DistributionSpec`] describes the gap between consecutive users or
//! consecutive servers on the line. Besides sampling it exposes exact
//! moments and the Laplace–Stieltjes transform `F*(s) = E[e^{-sX}]`, which
//! drive the queueing formulas in [`crate::analytic`] and [`crate::hetcap`].
//!
//! [`ExceptionalDist`] is the law of the first service of a busy period when
//! requests are Poisson: the distance `Z = X - Y` from a request to the next
//! server, conditioned on the request falling before that server.
//!
//! | Law | Parameters | Mean | Variance |
//! |---|---|---|---|
//! | Exponential | rate μ | 1/μ | 1/μ² |
//! | Deterministic | value d | d | 0 |
//! | Uniform | max b | b/2 | b²/12 |
//! | HyperExp2 | p₁, p₂, μ₁, μ₂ | Σ pⱼ/μⱼ | 2Σ pⱼ/μⱼ² − mean² |

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad;

/// Absolute tolerance used for transforms and moments computed by quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// Tail mass below which infinite supports are truncated.
const TAIL_MASS: f64 = 1e-12;

/// A positive inter-point distance law. Immutable once constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { max: f64 },
    HyperExp2 { p1: f64, p2: f64, rate1: f64, rate2: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawDistribution {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { max: f64 },
    HyperExp2 { p1: f64, p2: f64, rate1: f64, rate2: f64 },
    /// Balanced-means H2 given by its squared coefficient of variation.
    HyperExp2Cv2 { cv2: f64, mean: f64 },
}

impl TryFrom<RawDistribution> for DistributionSpec {
    type Error = crate::Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw {
            RawDistribution::Exponential { rate } => Self::exponential(rate),
            RawDistribution::Deterministic { value } => Self::deterministic(value),
            RawDistribution::Uniform { max } => Self::uniform(max),
            RawDistribution::HyperExp2 { p1, p2, rate1, rate2 } => {
                Self::hyper_exp2(p1, p2, rate1, rate2)
            }
            RawDistribution::HyperExp2Cv2 { cv2, mean } => h2_from_cv2(cv2, mean),
        }
    }
}

impl From<DistributionSpec> for RawDistribution {
    fn from(law: DistributionSpec) -> Self {
        match law {
            DistributionSpec::Exponential { rate } => RawDistribution::Exponential { rate },
            DistributionSpec::Deterministic { value } => RawDistribution::Deterministic { value },
            DistributionSpec::Uniform { max } => RawDistribution::Uniform { max },
            DistributionSpec::HyperExp2 { p1, p2, rate1, rate2 } => {
                RawDistribution::HyperExp2 { p1, p2, rate1, rate2 }
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Self::Exponential { rate: positive("rate", rate)? })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Ok(Self::Deterministic { value: positive("value", value)? })
    }

    pub fn uniform(max: f64) -> Result<Self> {
        Ok(Self::Uniform { max: positive("max", max)? })
    }

    pub fn hyper_exp2(p1: f64, p2: f64, rate1: f64, rate2: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0) || (p1 + p2 - 1.0).abs() > 1e-12 {
            return Err(invalid(format!(
                "phase probabilities must lie in (0,1) and sum to 1, got {p1} and {p2}"
            )));
        }
        Ok(Self::HyperExp2 {
            p1,
            p2,
            rate1: positive("rate1", rate1)?,
            rate2: positive("rate2", rate2)?,
        })
    }

    /// Law with the given mean, matching the kind of `self` (used for sweeps
    /// that rescale a template law to a target load).
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        let scale = positive("mean", mean)? / self.mean();
        match *self {
            Self::Exponential { rate } => Self::exponential(rate / scale),
            Self::Deterministic { value } => Self::deterministic(value * scale),
            Self::Uniform { max } => Self::uniform(max * scale),
            Self::HyperExp2 { p1, p2, rate1, rate2 } => {
                Self::hyper_exp2(p1, p2, rate1 / scale, rate2 / scale)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Deterministic { .. } => "deterministic",
            Self::Uniform { .. } => "uniform",
            Self::HyperExp2 { .. } => "hyper_exp2",
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Reciprocal of the mean: λ for users, μ for servers.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Deterministic { .. } => 0.0,
            Self::Uniform { max } => max * max / 12.0,
            _ => {
                let m = self.mean();
                self.second_moment() - m * m
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.moment(2)
    }

    pub fn squared_cv(&self) -> f64 {
        let m = self.mean();
        self.variance() / (m * m)
    }

    /// Exact raw moment `E[X^n]`.
    pub fn moment(&self, n: u32) -> f64 {
        let nf = factorial(n);
        match *self {
            Self::Exponential { rate } => nf / rate.powi(n as i32),
            Self::Deterministic { value } => value.powi(n as i32),
            Self::Uniform { max } => max.powi(n as i32) / (n as f64 + 1.0),
            Self::HyperExp2 { p1, p2, rate1, rate2 } => {
                nf * (p1 / rate1.powi(n as i32) + p2 / rate2.powi(n as i32))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::Deterministic { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform { max } => (x / max).min(1.0),
            Self::HyperExp2 { p1, p2, rate1, rate2 } => {
                1.0 - p1 * (-rate1 * x).exp() - p2 * (-rate2 * x).exp()
            }
        }
    }

    /// Largest value in the support (`+∞` for the exponential families).
    pub fn support_upper(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Uniform { max } => max,
            _ => f64::INFINITY,
        }
    }

    /// Laplace–Stieltjes transform at a complex point with `Re(s) >= 0`.
    pub fn lst(&self, s: Complex64) -> Complex64 {
        match *self {
            Self::Exponential { rate } => rate / (s + rate),
            Self::Deterministic { value } => (-s * value).exp(),
            Self::Uniform { max } => one_minus_exp_over(s * max),
            Self::HyperExp2 { p1, p2, rate1, rate2 } => {
                p1 * rate1 / (s + rate1) + p2 * rate2 / (s + rate2)
            }
        }
    }

    /// Laplace transform of the survival function, `(1 - F*(s)) / s`,
    /// evaluated without cancellation near `s = 0` (where it equals the mean).
    pub fn survival_transform(&self, s: Complex64) -> Complex64 {
        match *self {
            Self::Exponential { rate } => 1.0 / (s + rate),
            Self::Deterministic { value } => value * one_minus_exp_over(s * value),
            Self::Uniform { max } => max * uniform_survival_kernel(s * max),
            Self::HyperExp2 { p1, p2, rate1, rate2 } => p1 / (s + rate1) + p2 / (s + rate2),
        }
    }

    pub fn lst_real(&self, s: f64) -> f64 {
        self.lst(Complex64::new(s, 0.0)).re
    }

    /// `d/ds F*(s)`.
    pub fn lst_derivative(&self, s: Complex64) -> Complex64 {
        match *self {
            Self::Exponential { rate } => -rate / ((s + rate) * (s + rate)),
            Self::Deterministic { value } => -value * (-s * value).exp(),
            Self::Uniform { max } => max * one_minus_exp_over_derivative(s * max),
            Self::HyperExp2 { p1, p2, rate1, rate2 } => {
                -p1 * rate1 / ((s + rate1) * (s + rate1)) - p2 * rate2 / ((s + rate2) * (s + rate2))
            }
        }
    }

    /// Draws one gap. Always strictly positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => positive_draw(rng, rate),
            Self::Deterministic { value } => value,
            Self::Uniform { max } => max * (1.0 - rng.random::<f64>()),
            Self::HyperExp2 { p1, rate1, rate2, .. } => {
                let rate = if rng.random::<f64>() < p1 { rate1 } else { rate2 };
                positive_draw(rng, rate)
            }
        }
    }
}

fn positive_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let exp = Exp::new(rate).expect("rate validated at construction");
    loop {
        let v: f64 = exp.sample(rng);
        if v > 0.0 {
            return v;
        }
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `(1 - e^{-x}) / x` with the removable singularity at zero.
fn one_minus_exp_over(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        // Σ (-x)^n / (n+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..20 {
            term = term * (-x) / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (1.0 - (-x).exp()) / x
    }
}

/// `(x - 1 + e^{-x}) / x²`.
fn uniform_survival_kernel(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        // Σ (-x)^n / (n+2)!
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for n in 1..20 {
            term = term * (-x) / (n as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        (x - 1.0 + (-x).exp()) / (x * x)
    }
}

/// Derivative of [`one_minus_exp_over`] with respect to its argument.
fn one_minus_exp_over_derivative(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        // Σ_{n≥1} (-1)^n n x^{n-1} / (n+1)!
        let mut sum = Complex64::new(0.0, 0.0);
        let mut power = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for n in 1..20u32 {
            fact *= n as f64 + 1.0;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * n as f64 * power / fact;
            power *= x;
        }
        sum
    } else {
        let e = (-x).exp();
        (x * e - (1.0 - e)) / (x * x)
    }
}

/// Balanced-means hyperexponential with squared coefficient of variation `cv2`.
///
/// `p1 = (1 + sqrt((cv2 - 1)/(cv2 + 1))) / 2`, `μⱼ = 2pⱼ/mean`, so that
/// `p1/μ1 = p2/μ2`. At `cv2 = 1` both phases coincide with an exponential.
pub fn h2_from_cv2(cv2: f64, mean: f64) -> Result<DistributionSpec> {
    if !(cv2.is_finite() && cv2 >= 1.0) {
        return Err(invalid(format!("squared coefficient of variation must be >= 1, got {cv2}")));
    }
    let mean = positive("mean", mean)?;
    let p1 = 0.5 * (1.0 + ((cv2 - 1.0) / (cv2 + 1.0)).sqrt());
    let p2 = 1.0 - p1;
    Ok(DistributionSpec::HyperExp2 {
        p1,
        p2,
        rate1: 2.0 * p1 / mean,
        rate2: 2.0 * p2 / mean,
    })
}

/// Law of the exceptional (first) service in a busy period when requests are
/// Poisson with rate `λ`: `Z = X - Y` given `Y < X`, with `Y ~ Exp(λ)`.
///
/// Density: `f_Z(x) = λ e^{λx} ∫_x^∞ e^{-λν} dF_X(ν) / (1 - F*_X(λ))`.
#[derive(Debug, Clone)]
pub struct ExceptionalDist {
    base: DistributionSpec,
    lambda: f64,
    /// `1 - F*_X(λ)`: probability that a request lands before the next server.
    escape: f64,
    mean: f64,
    variance: f64,
    upper: f64,
}

impl ExceptionalDist {
    pub fn base(&self) -> &DistributionSpec {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `μ_Z = 1/α_Z`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }

    /// `ρ_z = λ α_Z`.
    pub fn load(&self) -> f64 {
        self.lambda * self.mean
    }

    /// Upper end of the support, `+∞` when the base law is unbounded.
    pub fn support_upper(&self) -> f64 {
        self.upper
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let lam = self.lambda;
        match self.base {
            DistributionSpec::Exponential { .. } => self.base.cdf(x),
            DistributionSpec::Deterministic { value } => {
                if x >= value {
                    1.0
                } else {
                    ((-lam * (value - x)).exp() - (-lam * value).exp()) / self.escape
                }
            }
            DistributionSpec::Uniform { max } => {
                if x >= max {
                    1.0
                } else {
                    // k_λ [λx + e^{-λb}(1 - e^{λx})] with k_λ = 1/(bλ(1 - F*(λ)))
                    (lam * x - (-lam * max).exp() * (lam * x).exp_m1()) / (max * lam * self.escape)
                }
            }
            DistributionSpec::HyperExp2 { .. } => {
                let [(q1, r1), (q2, r2)] = self.h2_phases();
                1.0 - q1 * (-r1 * x).exp() - q2 * (-r2 * x).exp()
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.upper {
            return 0.0;
        }
        let lam = self.lambda;
        match self.base {
            DistributionSpec::Exponential { rate } => rate * (-rate * x).exp(),
            DistributionSpec::Deterministic { value } => {
                lam * (-lam * (value - x)).exp() / self.escape
            }
            DistributionSpec::Uniform { max } => {
                -(-lam * (max - x)).exp_m1() / (max * self.escape)
            }
            DistributionSpec::HyperExp2 { .. } => {
                let [(q1, r1), (q2, r2)] = self.h2_phases();
                q1 * r1 * (-r1 * x).exp() + q2 * r2 * (-r2 * x).exp()
            }
        }
    }

    /// Raw moment `E[Z^n]`; exact for an exponential base, quadrature otherwise.
    pub fn moment(&self, n: u32) -> f64 {
        match self.base {
            DistributionSpec::Exponential { .. } => self.base.moment(n),
            _ => self.integrate(|x| x.powi(n as i32) * self.pdf(x)),
        }
    }

    /// `F*_Z(s)` for `Re(s) >= 0`, by adaptive quadrature of `e^{-sx} f_Z(x)`
    /// (closed form when the base law is exponential, where `Z` equals `X`).
    pub fn lst(&self, s: Complex64) -> Complex64 {
        match self.base {
            DistributionSpec::Exponential { .. } => self.base.lst(s),
            _ => self.integrate(|x| (-s * x).exp() * self.pdf(x)),
        }
    }

    fn integrate<T: quad::Integrand>(&self, f: impl Fn(f64) -> T) -> T {
        if self.upper.is_finite() {
            return quad::integrate(f, 0.0, self.upper, QUAD_TOL);
        }
        integrate_tail(f, self.tail_scale(), QUAD_TOL)
    }

    fn tail_scale(&self) -> f64 {
        match self.base {
            DistributionSpec::HyperExp2 { rate1, rate2, .. } => 1.0 / rate1.min(rate2),
            _ => self.base.mean(),
        }
    }

    /// Mixture weights and rates of `Z` when the base law is H2: `Z` is again
    /// hyperexponential with weights `∝ pⱼ λ/(λ+μⱼ)` and unchanged rates.
    fn h2_phases(&self) -> [(f64, f64); 2] {
        match self.base {
            DistributionSpec::HyperExp2 { p1, p2, rate1, rate2 } => {
                let lam = self.lambda;
                [
                    (p1 * lam / (lam + rate1) / self.escape, rate1),
                    (p2 * lam / (lam + rate2) / self.escape, rate2),
                ]
            }
            _ => unreachable!("h2_phases called on non-H2 base"),
        }
    }
}

/// Integrates over `[0, ∞)` on doubling panels until a panel is negligible.
fn integrate_tail<T: quad::Integrand>(f: impl Fn(f64) -> T, scale: f64, tol: f64) -> T {
    let mut total = quad::integrate(&f, 0.0, 8.0 * scale, tol);
    let mut lo = 8.0 * scale;
    for _ in 0..40 {
        let hi = 2.0 * lo;
        let piece = quad::integrate(&f, lo, hi, tol);
        total = total + piece;
        lo = hi;
        if piece.magnitude() < TAIL_MASS * 1e-2 {
            break;
        }
    }
    total
}

/// Builds the exceptional first-service law for base law `server_law` and
/// Poisson request rate `lambda`.
pub fn exceptional_dist(server_law: &DistributionSpec, lambda: f64) -> Result<ExceptionalDist> {
    let lambda = positive("lambda", lambda)?;
    let escape = 1.0 - server_law.lst_real(lambda);
    let mut z = ExceptionalDist {
        base: *server_law,
        lambda,
        escape,
        mean: f64::NAN,
        variance: f64::NAN,
        upper: server_law.support_upper(),
    };
    let (mean, variance) = match *server_law {
        DistributionSpec::Exponential { .. } => (server_law.mean(), server_law.variance()),
        DistributionSpec::Deterministic { value: d0 } => {
            let c = 1.0 / escape;
            let mean = c * (d0 * lambda + (-lambda * d0).exp() - 1.0) / lambda;
            let second = c / lambda * (d0 * (d0 * lambda - 2.0) + 2.0 / lambda * escape);
            (mean, second - mean * mean)
        }
        DistributionSpec::Uniform { max: b } => {
            let k = 1.0 / (b * lambda + (-lambda * b).exp() - 1.0);
            let mean = b * b * lambda / 2.0 * k - 1.0 / lambda;
            let second = b.powi(3) * lambda / 3.0 * k
                - k / lambda * (b * (b * lambda - 2.0) - 2.0 / lambda * (-lambda * b).exp_m1());
            (mean, second - mean * mean)
        }
        DistributionSpec::HyperExp2 { .. } => {
            let m1 = z.moment(1);
            let m2 = z.moment(2);
            (m1, m2 - m1 * m1)
        }
    };
    z.mean = mean;
    z.variance = variance;
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_laws() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::exponential(1.3).unwrap(),
            DistributionSpec::deterministic(1.0).unwrap(),
            DistributionSpec::uniform(2.0).unwrap(),
            h2_from_cv2(4.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn deterministic_sample_is_point_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = DistributionSpec::deterministic(1.0).unwrap();
        assert!((0..100).all(|_| d.sample(&mut rng) == 1.0));
    }

    #[test]
    fn uniform_sample_in_half_open_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = DistributionSpec::uniform(2.0).unwrap();
        for _ in 0..10_000 {
            let v = u.sample(&mut rng);
            assert!(v > 0.0 && v <= 2.0);
        }
    }

    #[test]
    fn exponential_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = DistributionSpec::exponential(1.0).unwrap();
        let n = 1_000_000;
        let mean = (0..n).map(|_| e.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn lst_reference_values() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        assert!((e.lst_real(1.0) - 0.5).abs() < 1e-15);
        let d = DistributionSpec::deterministic(1.0).unwrap();
        assert!((d.lst_real(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        for law in all_laws() {
            assert!((law.lst_real(0.0) - 1.0).abs() < 1e-15, "{law:?}");
        }
    }

    #[test]
    fn lst_slope_at_origin_is_mean() {
        let h = 1e-6;
        for law in all_laws() {
            let slope = -(law.lst_real(h) - law.lst_real(-h)) / (2.0 * h);
            assert!((slope - law.mean()).abs() < 1e-4, "{law:?}: {slope}");
        }
    }

    #[test]
    fn lst_derivative_matches_difference() {
        let s = Complex64::new(0.4, 0.3);
        let h = 1e-6;
        for law in all_laws() {
            let fd = (law.lst(s + h) - law.lst(s - h)) / (2.0 * h);
            assert!((fd - law.lst_derivative(s)).norm() < 1e-8, "{law:?}");
        }
        // series branch of the uniform law
        let u = DistributionSpec::uniform(0.01).unwrap();
        let s = Complex64::new(0.2, 0.1);
        let fd = (u.lst(s + h) - u.lst(s - h)) / (2.0 * h);
        assert!((fd - u.lst_derivative(s)).norm() < 1e-9);
    }

    #[test]
    fn survival_transform_consistent() {
        for law in all_laws() {
            assert!((law.survival_transform(Complex64::new(0.0, 0.0)).re - law.mean()).abs() < 1e-14);
            for s in [Complex64::new(0.05, 0.01), Complex64::new(0.7, -0.4), Complex64::new(3.0, 1.0)] {
                let direct = (1.0 - law.lst(s)) / s;
                assert!((law.survival_transform(s) - direct).norm() < 1e-12, "{law:?} {s}");
            }
        }
    }

    #[test]
    fn h2_builder() {
        let h = h2_from_cv2(1.0, 1.0).unwrap();
        match h {
            DistributionSpec::HyperExp2 { p1, p2, rate1, rate2 } => {
                assert_eq!((p1, p2, rate1, rate2), (0.5, 0.5, 1.0, 1.0));
            }
            _ => unreachable!(),
        }
        let h = h2_from_cv2(4.0, 1.0).unwrap();
        if let DistributionSpec::HyperExp2 { p1, .. } = h {
            assert!((p1 - 0.5 * (1.0 + (0.6f64).sqrt())).abs() < 1e-15);
            assert!((p1 - 0.8873).abs() < 1e-4);
        }
        let h = h2_from_cv2(4.0, 2.0).unwrap();
        assert!((h.mean() - 2.0).abs() < 1e-12);
        assert!((h.squared_cv() - 4.0).abs() < 1e-10);
        assert!(h2_from_cv2(0.5, 1.0).is_err());
    }

    #[test]
    fn variance_identities() {
        assert_eq!(DistributionSpec::deterministic(3.0).unwrap().variance(), 0.0);
        assert_eq!(DistributionSpec::uniform(3.0).unwrap().variance(), 9.0 / 12.0);
        for law in all_laws() {
            let m = law.mean();
            assert!((law.second_moment() - (law.variance() + m * m)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DistributionSpec::exponential(0.0).is_err());
        assert!(DistributionSpec::deterministic(-1.0).is_err());
        assert!(DistributionSpec::uniform(f64::NAN).is_err());
        assert!(DistributionSpec::hyper_exp2(0.3, 0.6, 1.0, 1.0).is_err());
        assert!(DistributionSpec::hyper_exp2(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(exceptional_dist(&all_laws()[0], 0.0).is_err());
    }

    #[test]
    fn json_round_trip_and_cv2_form() {
        let json = r#"{"kind":"hyper_exp2_cv2","cv2":4.0,"mean":1.0}"#;
        let h: DistributionSpec = serde_json::from_str(json).unwrap();
        assert_eq!(h, h2_from_cv2(4.0, 1.0).unwrap());
        for law in all_laws() {
            let text = serde_json::to_string(&law).unwrap();
            let back: DistributionSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, law);
        }
        let bad = r#"{"kind":"uniform","max":-1}"#;
        assert!(serde_json::from_str::<DistributionSpec>(bad).is_err());
    }

    #[test]
    fn exceptional_of_exponential_is_identity() {
        let x = DistributionSpec::exponential(1.7).unwrap();
        let z = exceptional_dist(&x, 0.6).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.05;
            assert_eq!(z.cdf(t), x.cdf(t));
        }
    }

    #[test]
    fn exceptional_deterministic_reference() {
        let d = DistributionSpec::deterministic(1.0).unwrap();
        let z = exceptional_dist(&d, 1.0).unwrap();
        assert!((z.cdf(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(z.cdf(0.0), 0.0);
        let e = std::f64::consts::E;
        assert!((z.mean() - 1.0 / (e - 1.0)).abs() < 1e-12);
        assert!((z.mean() - 0.581977).abs() < 1e-6);
    }

    #[test]
    fn exceptional_normalised_and_consistent() {
        for law in all_laws() {
            for lam in [0.2, 0.5, 0.9] {
                let z = exceptional_dist(&law, lam).unwrap();
                assert!((z.lst(Complex64::new(0.0, 0.0)).re - 1.0).abs() < 1e-9, "{law:?} {lam}");
                let mass = z.moment(0);
                assert!((mass - 1.0).abs() < 1e-9);
                assert!((z.moment(1) - z.mean()).abs() < 1e-8);
                let top = z.support_upper();
                if top.is_finite() {
                    assert!((z.cdf(top) - 1.0).abs() < 1e-9);
                }
                let mut prev = 0.0;
                for k in 0..200 {
                    let v = z.cdf(k as f64 * 0.05);
                    assert!(v + 1e-15 >= prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn closed_form_moments_match_quadrature() {
        for law in [DistributionSpec::deterministic(1.0).unwrap(), DistributionSpec::uniform(2.0).unwrap()] {
            for lam in [0.2, 0.5, 0.9, 1.6] {
                let z = exceptional_dist(&law, lam).unwrap();
                let m1 = quad::integrate(|x| x * z.pdf(x), 0.0, z.support_upper(), 1e-13);
                let m2 = quad::integrate(|x| x * x * z.pdf(x), 0.0, z.support_upper(), 1e-13);
                assert!((m1 - z.mean()).abs() < 1e-7);
                assert!((m2 - m1 * m1 - z.variance()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn exceptional_lst_matches_difference_formula() {
        // F*_Z(s) = λ [F*_X(s) - F*_X(λ)] / ((λ - s)(1 - F*_X(λ)))
        let s_points = [Complex64::new(0.3, 0.0), Complex64::new(0.7, -1.2), Complex64::new(2.0, 0.5)];
        for law in all_laws() {
            let lam = 0.8;
            let z = exceptional_dist(&law, lam).unwrap();
            let fl = law.lst_real(lam);
            for &s in &s_points {
                let expected = lam * (law.lst(s) - fl) / ((lam - s) * (1.0 - fl));
                assert!((z.lst(s) - expected).norm() < 1e-9, "{law:?} {s}");
            }
        }
    }
}
