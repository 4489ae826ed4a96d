//! Poisson requests, renewal servers, random server capacities.
//!
//! Let `H` be the number of requests still waiting just after a server and
//! `V` the number arriving before the next one. With capacity `C` drawn
//! independently per server, `H' = max(H + V - C, 0)`. Writing
//! `q_w = P(H + V = w)` for `w < c`, the generating function of `H` is
//!
//! ```text
//! N(z) = Σ_w q_w Σ_{j>w} p_j (z^c - z^{c-j+w}) / (z^c - K(z) Σ_j p_j z^{c-j})
//! ```
//!
//! with `K(z) = F*_X(λ(1-z))`. The numerator must vanish at the `c - 1`
//! non-unit zeros of the denominator in the unit disk, and `N(1) = 1`
//! gives the last equation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::analytic::roots::{count_zeros_inside, unit_disk_zeros};
use crate::distributions::DistributionSpec;
use crate::error::{invalid, numeric, Error, Result};

/// Largest condition number accepted for the boundary system.
pub const MAX_CONDITION: f64 = 1e12;
const BATCH_TAIL: f64 = 1e-12;

/// Law of the server capacity on `{1, ..., c}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CapacityDist {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for CapacityDist {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        CapacityDist::new(p)
    }
}

impl From<CapacityDist> for Vec<f64> {
    fn from(c: CapacityDist) -> Self {
        c.probs
    }
}

impl CapacityDist {
    /// `probs[j]` is the probability of capacity `j + 1`. Trailing zeros are
    /// dropped so that the largest capacity has positive mass.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(invalid("capacity probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("capacity probabilities sum to {total}, not 1")));
        }
        while probs.last() == Some(&0.0) {
            probs.pop();
        }
        Ok(Self { probs })
    }

    pub fn degenerate(c: usize) -> Result<Self> {
        if c == 0 {
            return Err(invalid("capacity must be at least 1"));
        }
        let mut p = vec![0.0; c];
        p[c - 1] = 1.0;
        Self::new(p)
    }

    /// Uniform over `{lo, ..., hi}`.
    pub fn uniform(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(invalid(format!("bad capacity range {lo}..={hi}")));
        }
        let w = 1.0 / (hi - lo + 1) as f64;
        Self::new((1..=hi).map(|j| if j >= lo { w } else { 0.0 }).collect())
    }

    /// Largest capacity with positive probability.
    pub fn max(&self) -> usize {
        self.probs.len()
    }

    /// `P(C = j)`.
    pub fn prob(&self, j: usize) -> f64 {
        if j == 0 || j > self.probs.len() {
            0.0
        } else {
            self.probs[j - 1]
        }
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(j, p)| (j + 1) as f64 * p).sum()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `Σ_j p_j z^{c-j}`.
    fn shifted_pgf(&self, z: Complex64) -> Complex64 {
        let c = self.max();
        (1..=c).map(|j| self.prob(j) * z.powu((c - j) as u32)).sum()
    }

    fn shifted_pgf_derivative(&self, z: Complex64) -> Complex64 {
        let c = self.max();
        (1..c).map(|j| self.prob(j) * (c - j) as f64 * z.powu((c - j - 1) as u32)).sum()
    }

    /// Capacity law on the sample scale used by the simulator.
    pub fn to_capacity_law(&self) -> crate::spatial::CapacityLaw {
        crate::spatial::CapacityLaw::Discrete(self.probs.clone())
    }
}

fn ln_poisson_pmf(v: usize, m: f64) -> f64 {
    -m + v as f64 * m.ln() - ln_gamma(v as f64 + 1.0)
}

/// `k_v = P(v Poisson(λ) arrivals during one server gap)`, truncated once the
/// remaining mass drops below `1e-12` or at `v_max`.
pub fn arrival_batch_probs(lambda: f64, server_law: &DistributionSpec, v_max: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda must be positive"));
    }
    let geometric = |mu: f64, v: usize| {
        let p = mu / (lambda + mu);
        p * (1.0 - p).powi(v as i32)
    };
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut poisson_cdf = 0.0;
    for v in 0..=v_max {
        let k = match *server_law {
            DistributionSpec::Exponential { rate } => geometric(rate, v),
            DistributionSpec::HyperExp2 { p1, p2, rate1, rate2 } => {
                p1 * geometric(rate1, v) + p2 * geometric(rate2, v)
            }
            DistributionSpec::Deterministic { value } => ln_poisson_pmf(v, lambda * value).exp(),
            DistributionSpec::Uniform { max } => {
                // (1/(λb)) P(Poisson(λb) > v)
                let m = lambda * max;
                poisson_cdf += ln_poisson_pmf(v, m).exp();
                (1.0 - poisson_cdf).max(0.0) / m
            }
        };
        out.push(k);
        acc += k;
        if 1.0 - acc < BATCH_TAIL && v > 0 {
            break;
        }
    }
    Ok(out)
}

/// Solution of the heterogeneous-capacity chain.
#[derive(Debug, Clone)]
pub struct HetCapSolution {
    pub lambda: f64,
    pub server_law: DistributionSpec,
    pub capacity: CapacityDist,
    pub batch_probs: Vec<f64>,
    /// Zeros of `z^c - K(z) Σ p_j z^{c-j}` in the closed unit disk; last is 1.
    pub zeros: Vec<Complex64>,
    /// `P(H = m)` for `m < c`.
    pub pi: Vec<f64>,
    /// `P(H + V = w)` for `w < c`.
    pub boundary: Vec<f64>,
    /// Mean number waiting just after a server.
    pub h_bar: f64,
    pub expected_distance: f64,
    pub rho: f64,
    pub condition: f64,
}

/// `1 + z + ... + z^{n-1}`.
fn geometric_sum(n: usize, z: Complex64) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    let mut p = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        s += p;
        p *= z;
    }
    s
}

// Numerator and denominator of N(z) both carry a factor (z - 1); the
// reduced forms below divide it out analytically so that N can be
// evaluated accurately at and near z = 1.
impl HetCapSolution {
    fn reduced_numerator(&self, z: Complex64) -> Complex64 {
        let c = self.capacity.max();
        let mut s = Complex64::new(0.0, 0.0);
        for (w, &q) in self.boundary.iter().enumerate() {
            for j in (w + 1)..=c {
                s += q * self.capacity.prob(j) * z.powu((c - j + w) as u32) * geometric_sum(j - w, z);
            }
        }
        s
    }

    fn reduced_denominator(&self, z: Complex64) -> Complex64 {
        let c = self.capacity.max();
        let tail = self.lambda * self.server_law.survival_transform(self.lambda * (1.0 - z));
        let shifted: Complex64 = (1..=c)
            .map(|j| self.capacity.prob(j) * geometric_sum(c - j, z))
            .sum();
        geometric_sum(c, z) - tail * self.capacity.shifted_pgf(z) - shifted
    }

    fn denominator(&self, z: Complex64) -> Complex64 {
        let c = self.capacity.max() as u32;
        z.powu(c) - self.server_law.lst(self.lambda * (1.0 - z)) * self.capacity.shifted_pgf(z)
    }

    /// `N(z)`, the generating function of `H`.
    pub fn n_at(&self, z: Complex64) -> Complex64 {
        self.reduced_numerator(z) / self.reduced_denominator(z)
    }

    /// `lim_{z→1} N(z)`.
    pub fn normalization(&self) -> f64 {
        let c = self.capacity.max();
        let mut s = 0.0;
        for (w, &q) in self.boundary.iter().enumerate() {
            for j in (w + 1)..=c {
                s += q * self.capacity.prob(j) * (j - w) as f64;
            }
        }
        s / (self.capacity.mean() - self.rho)
    }

    /// Argument-principle count of denominator zeros inside `|z| = 1 + 1e-6`.
    pub fn zero_count(&self) -> usize {
        count_zeros_inside(|z| self.denominator(z), 1.0 + 1e-6)
    }
}

fn richardson_derivative_at_one(n: impl Fn(f64) -> f64) -> f64 {
    let h = 1e-4;
    let d = |h: f64| (1.0 - n(1.0 - h)) / h;
    let (d0, d1, d2) = (d(h), d(h / 2.0), d(h / 4.0));
    let (r0, r1) = (2.0 * d1 - d0, 2.0 * d2 - d1);
    (4.0 * r1 - r0) / 3.0
}

/// Solves for the boundary probabilities and the mean backlog `H̄`.
pub fn hetcap_solve(lambda: f64, server_law: &DistributionSpec, capacity: &CapacityDist) -> Result<HetCapSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda must be positive"));
    }
    let c = capacity.max();
    let rho = lambda * server_law.mean();
    let cbar = capacity.mean();
    if rho >= cbar {
        return Err(Error::Unstable { load: rho, capacity: cbar });
    }
    let k_of = |z: Complex64| server_law.lst(lambda * (1.0 - z));
    let zeros = unit_disk_zeros(
        c,
        |z| k_of(z) * capacity.shifted_pgf(z),
        |z| {
            -lambda * server_law.lst_derivative(lambda * (1.0 - z)) * capacity.shifted_pgf(z)
                + k_of(z) * capacity.shifted_pgf_derivative(z)
        },
    )?;

    let mut m = DMatrix::<Complex64>::zeros(c, c);
    let mut rhs = DVector::<Complex64>::zeros(c);
    for (i, &xi) in zeros[..c - 1].iter().enumerate() {
        let xc = xi.powu(c as u32);
        for w in 0..c {
            m[(i, w)] = ((w + 1)..=c)
                .map(|j| capacity.prob(j) * (xc - xi.powu((c - j + w) as u32)))
                .sum();
        }
    }
    for w in 0..c {
        let v: f64 = ((w + 1)..=c).map(|j| capacity.prob(j) * (j - w) as f64).sum();
        m[(c - 1, w)] = Complex64::new(v, 0.0);
    }
    rhs[c - 1] = Complex64::new(cbar - rho, 0.0);

    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::Singular(format!("boundary system condition number {condition:e}")));
    }
    let q = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("boundary system".into()))?;
    if let Some(bad) = q.iter().find(|x| x.im.abs() > 1e-8) {
        return Err(numeric(format!("boundary probability has imaginary part {:e}", bad.im)));
    }
    let boundary: Vec<f64> = q.iter().map(|x| x.re).collect();

    let batch_probs = arrival_batch_probs(lambda, server_law, 100_000)?;
    let k = |v: usize| batch_probs.get(v).copied().unwrap_or(0.0);
    let mut pi = vec![0.0; c];
    for w in 0..c {
        let known: f64 = (0..w).map(|mm| pi[mm] * k(w - mm)).sum();
        pi[w] = (boundary[w] - known) / k(0);
    }
    if let Some(p) = pi.iter().find(|&&p| p < -1e-8) {
        return Err(numeric(format!("negative boundary probability {p:e}")));
    }

    let mut sol = HetCapSolution {
        lambda,
        server_law: *server_law,
        capacity: capacity.clone(),
        batch_probs,
        zeros,
        pi,
        boundary,
        h_bar: f64::NAN,
        expected_distance: f64::NAN,
        rho,
        condition,
    };
    let norm = sol.normalization();
    if (norm - 1.0).abs() >= 1e-8 {
        return Err(numeric(format!("N(1) = {norm}, not 1")));
    }
    sol.h_bar = richardson_derivative_at_one(|x| sol.n_at(Complex64::new(x, 0.0)).re);
    sol.expected_distance = hetcap_expected_distance(&sol, lambda, server_law);
    Ok(sol)
}

/// `E[D] = (1/ρ)[H̄/μ + (λ/2)(σ_X² + 1/μ²)]`: per server gap, the `H̄`
/// waiting requests cross the whole gap and fresh arrivals cross half of it
/// on average (size-biased).
pub fn hetcap_expected_distance(solution: &HetCapSolution, lambda: f64, server_law: &DistributionSpec) -> f64 {
    let rho = lambda * server_law.mean();
    (solution.h_bar * server_law.mean() + 0.5 * lambda * server_law.second_moment()) / rho
}
