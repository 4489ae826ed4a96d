use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{invalid, Result};

/// Per-server capacity law used at generation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityLaw {
    /// Every server has the same capacity.
    Constant(u32),
    /// Capacity uniform over `{lo, ..., hi}`.
    UniformRange { lo: u32, hi: u32 },
    /// `probs[j]` is the probability of capacity `j + 1`.
    Discrete(Vec<f64>),
}

impl CapacityLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            CapacityLaw::Constant(c) if *c == 0 => Err(invalid("capacity must be at least 1")),
            CapacityLaw::UniformRange { lo, hi } if *lo == 0 || lo > hi => {
                Err(invalid(format!("bad capacity range {lo}..={hi}")))
            }
            CapacityLaw::Discrete(p) => {
                let total: f64 = p.iter().sum();
                if p.is_empty() || p.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    Err(invalid("capacity probabilities must be nonnegative and sum to 1"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CapacityLaw::Constant(c) => *c as f64,
            CapacityLaw::UniformRange { lo, hi } => 0.5 * (*lo as f64 + *hi as f64),
            CapacityLaw::Discrete(p) => p.iter().enumerate().map(|(j, q)| (j + 1) as f64 * q).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            CapacityLaw::Constant(c) => *c,
            CapacityLaw::UniformRange { lo, hi } => rng.random_range(*lo..=*hi),
            CapacityLaw::Discrete(p) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (j, q) in p.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        return j as u32 + 1;
                    }
                }
                p.iter().rposition(|&q| q > 0.0).unwrap_or(0) as u32 + 1
            }
        }
    }
}

impl From<u32> for CapacityLaw {
    fn from(c: u32) -> Self {
        CapacityLaw::Constant(c)
    }
}

/// Users and servers on the half line, both sorted, with per-server capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialInstance {
    users: Vec<f64>,
    servers: Vec<f64>,
    capacities: Vec<u32>,
}

fn check_sorted(name: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid(format!("{name} locations must be finite and nonnegative")));
    }
    if xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid(format!("{name} locations must be sorted")));
    }
    Ok(())
}

impl SpatialInstance {
    pub fn new(users: Vec<f64>, servers: Vec<f64>, capacities: Vec<u32>) -> Result<Self> {
        check_sorted("user", &users)?;
        check_sorted("server", &servers)?;
        if capacities.len() != servers.len() {
            return Err(invalid("one capacity per server is required"));
        }
        if capacities.contains(&0) {
            return Err(invalid("capacities must be at least 1"));
        }
        Ok(Self { users, servers, capacities })
    }

    /// Instance where every server has capacity `c`.
    pub fn uniform_capacity(users: Vec<f64>, servers: Vec<f64>, c: u32) -> Result<Self> {
        let caps = vec![c; servers.len()];
        Self::new(users, servers, caps)
    }

    pub fn users(&self) -> &[f64] {
        &self.users
    }

    pub fn servers(&self) -> &[f64] {
        &self.servers
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn total_capacity(&self) -> u64 {
        self.capacities.iter().map(|&c| c as u64).sum()
    }

    /// Rightmost point of the instance.
    pub fn horizon(&self) -> f64 {
        let u = self.users.last().copied().unwrap_or(0.0);
        let s = self.servers.last().copied().unwrap_or(0.0);
        u.max(s)
    }

    /// Sub-instance keeping only the listed users (indices must be increasing).
    pub fn with_users(&self, keep: &[usize]) -> Self {
        Self {
            users: keep.iter().map(|&i| self.users[i]).collect(),
            servers: self.servers.clone(),
            capacities: self.capacities.clone(),
        }
    }
}

fn cumulative<R: Rng + ?Sized>(law: &DistributionSpec, n: usize, rng: &mut R) -> Vec<f64> {
    let mut pos = 0.0;
    (0..n)
        .map(|_| {
            pos += law.sample(rng);
            pos
        })
        .collect()
}

/// Draws an instance whose locations are cumulative sums of iid gaps.
///
/// Users, servers and capacities come from independent streams of one
/// ChaCha8 generator, so an instance is a pure function of `seed`.
pub fn generate_instance(
    user_law: &DistributionSpec,
    server_law: &DistributionSpec,
    n_users: usize,
    n_servers: usize,
    capacity: &CapacityLaw,
    seed: u64,
) -> Result<SpatialInstance> {
    if n_users == 0 || n_servers == 0 {
        return Err(invalid("instance needs at least one user and one server"));
    }
    capacity.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let users = cumulative(user_law, n_users, &mut rng);
    rng.set_stream(2);
    rng.set_word_pos(0);
    let servers = cumulative(server_law, n_servers, &mut rng);
    rng.set_stream(3);
    rng.set_word_pos(0);
    let capacities = (0..n_servers).map(|_| capacity.sample(&mut rng)).collect();
    Ok(SpatialInstance { users, servers, capacities })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_cumulative_sums() {
        let d = DistributionSpec::deterministic(1.0).unwrap();
        let inst = generate_instance(&d, &d, 3, 3, &CapacityLaw::Constant(1), 0).unwrap();
        assert_eq!(inst.users(), &[1.0, 2.0, 3.0]);
        assert_eq!(inst.servers(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn same_seed_same_instance() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        let law = CapacityLaw::UniformRange { lo: 1, hi: 4 };
        let a = generate_instance(&e, &e, 50, 40, &law, 17).unwrap();
        let b = generate_instance(&e, &e, 50, 40, &law, 17).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(&e, &e, 50, 40, &law, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn server_gap_mean() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        let inst = generate_instance(&e, &e, 1, 100_000, &CapacityLaw::Constant(1), 5).unwrap();
        let mean = inst.servers().last().unwrap() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn capacity_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let law = CapacityLaw::Discrete(vec![0.0, 0.5, 0.5]);
        law.validate().unwrap();
        assert_eq!(law.mean(), 2.5);
        for _ in 0..1000 {
            let c = law.sample(&mut rng);
            assert!(c == 2 || c == 3);
        }
        assert!(CapacityLaw::Constant(0).validate().is_err());
        assert!(CapacityLaw::UniformRange { lo: 3, hi: 2 }.validate().is_err());
        assert!(CapacityLaw::Discrete(vec![0.3, 0.3]).validate().is_err());
    }

    #[test]
    fn rejects_unsorted() {
        assert!(SpatialInstance::uniform_capacity(vec![2.0, 1.0], vec![3.0], 1).is_err());
        assert!(SpatialInstance::new(vec![1.0], vec![3.0], vec![0]).is_err());
        assert!(SpatialInstance::new(vec![-1.0], vec![3.0], vec![1]).is_err());
    }
}
