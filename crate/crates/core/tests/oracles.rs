//! Cross-checks between independent solvers.

use linenet::analytic::{grps_expected_distance, mm1_bulk, prgs_expected_distance};
use linenet::assign::{brute_force_oracle, opt_dp};
use linenet::hetcap::{hetcap_solve, CapacityDist};
use linenet::hungarian::min_cost_matching_oracle;
use linenet::{h2_from_cv2, DistributionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sorted(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * scale).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Exhaustive search over every injection of users into servers.
fn permutations_min(cost: &[Vec<f64>]) -> f64 {
    fn go(i: usize, cost: &[Vec<f64>], used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if i == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, cost, used, acc + cost[i][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, cost, &mut vec![false; cost[0].len()], 0.0, &mut best);
    best
}

#[test]
fn hungarian_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(n..=8);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random::<f64>() * 10.0).collect()).collect();
        let (a, total) = min_cost_matching_oracle(&cost).unwrap();
        let mut seen = a.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), n);
        assert!((total - permutations_min(&cost)).abs() < 1e-9);
    }
}

#[test]
fn dp_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let c = rng.random_range(1..=2u32);
        let m = rng.random_range(1..=9usize);
        let n = rng.random_range(1..=6usize.min(c as usize * m));
        let u = sorted(&mut rng, n, 10.0);
        let s = sorted(&mut rng, m, 10.0);
        let dp = opt_dp(&u, &s, c).unwrap();
        let bf = brute_force_oracle(&u, &s, c).unwrap();
        assert!((dp.total_cost - bf.total_cost).abs() < 1e-9, "{u:?} {s:?} c={c}");
    }
}

#[test]
fn dp_matches_hungarian_up_to_fifty_users() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=50 {
        let m = n + rng.random_range(0..=n);
        let u = sorted(&mut rng, n, 40.0);
        let s = sorted(&mut rng, m, 40.0);
        let cost: Vec<Vec<f64>> = u.iter().map(|a| s.iter().map(|b| (a - b).abs()).collect()).collect();
        let (_, h) = min_cost_matching_oracle(&cost).unwrap();
        let dp = opt_dp(&u, &s, 1).unwrap();
        assert!((dp.total_cost - h).abs() < 1e-9 * h.max(1.0), "n={n}: {} vs {h}", dp.total_cost);
        assert!(dp.is_non_crossing());
    }
}

#[test]
fn three_closed_forms_agree_on_poisson_poisson() {
    for c in 1..=4u32 {
        for rho in [0.2, 0.5, 0.9] {
            let lambda = rho * c as f64;
            let bulk = mm1_bulk(lambda, 1.0, c).unwrap().expected_distance;
            let exp = DistributionSpec::exponential(lambda).unwrap();
            let grps = grps_expected_distance(&exp, 1.0, c).unwrap().expected_distance;
            let prgs = prgs_expected_distance(lambda, &DistributionSpec::exponential(1.0).unwrap(), c as usize)
                .unwrap()
                .expected_distance;
            assert!((bulk - grps).abs() < 1e-8, "c={c} ρ={rho}");
            assert!((bulk - prgs).abs() < 1e-8, "c={c} ρ={rho}");
        }
    }
}

#[test]
fn degenerate_hetcap_is_prgs() {
    let laws = [
        DistributionSpec::deterministic(1.0).unwrap(),
        DistributionSpec::uniform(2.0).unwrap(),
        h2_from_cv2(3.0, 1.0).unwrap(),
    ];
    for law in laws {
        for c in 1..=3usize {
            let lambda = 0.6 * c as f64;
            let h = hetcap_solve(lambda, &law, &CapacityDist::degenerate(c).unwrap()).unwrap();
            let p = prgs_expected_distance(lambda, &law, c).unwrap();
            assert!((h.expected_distance - p.expected_distance).abs() < 1e-6 * p.expected_distance, "{law:?} c={c}");
        }
    }
}
