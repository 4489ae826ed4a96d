//! Instances on the line and the allocation policies run on them.

mod instance;
mod policies;
mod profile;

pub use instance::{generate_instance, CapacityLaw, SpatialInstance};
pub use policies::{allocate_gs, allocate_mtr, allocate_nn, allocate_ugs, AssignmentResult};
pub use profile::QueueProfile;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{invalid, Result};

/// Fraction of matched users dropped from the front of a run before
/// estimating steady-state statistics.
pub const WARM_UP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
    pub count: usize,
}

/// Mean, unbiased variance and maximum of a set of distances.
pub fn distance_stats(distances: &[f64]) -> Result<DistanceStats> {
    let count = distances.len();
    if count == 0 {
        return Err(invalid("no matched users"));
    }
    let mean = distances.iter().sum::<f64>() / count as f64;
    let variance = if count > 1 {
        distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (count - 1) as f64
    } else {
        0.0
    };
    let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DistanceStats { mean, variance, max, count })
}

/// Statistics after discarding the first [`WARM_UP`] fraction of matches.
pub fn steady_state_stats(result: &AssignmentResult) -> Result<DistanceStats> {
    let skip = (result.distances.len() as f64 * WARM_UP).floor() as usize;
    distance_stats(&result.distances[skip..])
}

/// Average number of requests still waiting just after a server, i.e. the
/// state of the chain embedded at server locations. Skips the warm-up
/// fraction of servers and stops once no users remain to the right.
pub fn mean_left_behind(instance: &SpatialInstance) -> f64 {
    let users = instance.users();
    let servers = instance.servers();
    let caps = instance.capacities();
    let mut waiting: u64 = 0;
    let mut i = 0;
    let skip = (servers.len() as f64 * WARM_UP) as usize;
    let mut acc = 0.0;
    let mut n = 0usize;
    for (j, &s) in servers.iter().enumerate() {
        while i < users.len() && users[i] <= s {
            waiting += 1;
            i += 1;
        }
        waiting = waiting.saturating_sub(caps[j] as u64);
        if i == users.len() {
            break;
        }
        if j >= skip {
            acc += waiting as f64;
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        acc / n as f64
    }
}

/// Number of servers whose expected span covers `n_users` users, with a 5%
/// margin so that the tail of the user sequence still sees servers.
pub fn covering_servers(user_law: &DistributionSpec, server_law: &DistributionSpec, n_users: usize) -> usize {
    (n_users as f64 * user_law.mean() / server_law.mean() * 1.05).ceil() as usize + 10
}

/// Two-resource network: every user needs one server from each of two
/// independent server lines and waits for the slower one. Both resources are
/// allocated by MTR; returns `max(D_a, D_b)` for users matched on both.
pub fn forkjoin_distances(
    line_a: &SpatialInstance,
    line_b: &SpatialInstance,
) -> Result<Vec<f64>> {
    if line_a.users() != line_b.users() {
        return Err(invalid("both resource lines must share the same users"));
    }
    let (a, _) = allocate_mtr(line_a);
    let (b, _) = allocate_mtr(line_b);
    let users = line_a.users();
    Ok(a.assignment
        .iter()
        .zip(&b.assignment)
        .enumerate()
        .filter_map(|(i, (sa, sb))| {
            let (sa, sb) = ((*sa)?, (*sb)?);
            let da = line_a.servers()[sa] - users[i];
            let db = line_b.servers()[sb] - users[i];
            Some(da.max(db))
        })
        .collect())
}

/// Simulates the two-resource network with users from `user_law` and two
/// independent server lines drawn from `server_law` (unit capacity).
/// Returns the steady-state mean of `max(D_a, D_b)`.
pub fn simulate_forkjoin(
    user_law: &DistributionSpec,
    server_law: &DistributionSpec,
    n_users: usize,
    seed: u64,
) -> Result<f64> {
    let n_servers = covering_servers(user_law, server_law, n_users);
    let base = generate_instance(user_law, server_law, n_users, n_servers, &CapacityLaw::Constant(1), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut pos = 0.0;
    let other: Vec<f64> = (0..n_servers)
        .map(|_| {
            pos += server_law.sample(&mut rng);
            pos
        })
        .collect();
    let line_b = SpatialInstance::uniform_capacity(base.users().to_vec(), other, 1)?;
    let d = forkjoin_distances(&base, &line_b)?;
    let skip = (d.len() as f64 * WARM_UP) as usize;
    Ok(distance_stats(&d[skip..])?.mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_reference() {
        let s = distance_stats(&[1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 0.0));
        let s = distance_stats(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.max, s.count), (1.0, 2.0, 2.0, 2));
        assert!(distance_stats(&[]).is_err());
    }

    #[test]
    fn mtr_exponential_mean() {
        let u = DistributionSpec::exponential(0.5).unwrap();
        let s = DistributionSpec::exponential(1.0).unwrap();
        let inst = generate_instance(&u, &s, 100_000, 210_000, &CapacityLaw::Constant(1), 7).unwrap();
        let (r, _) = allocate_mtr(&inst);
        let st = steady_state_stats(&r).unwrap();
        assert!((st.mean - 2.0).abs() < 0.06, "{}", st.mean);
    }

    #[test]
    fn forkjoin_requires_shared_users() {
        let a = SpatialInstance::uniform_capacity(vec![1.0], vec![2.0], 1).unwrap();
        let b = SpatialInstance::uniform_capacity(vec![1.5], vec![2.0], 1).unwrap();
        assert!(forkjoin_distances(&a, &b).is_err());
        let c = SpatialInstance::uniform_capacity(vec![1.0], vec![4.0], 1).unwrap();
        assert_eq!(forkjoin_distances(&a, &c).unwrap(), vec![3.0]);
    }
}
