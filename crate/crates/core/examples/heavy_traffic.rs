//! The heavy-traffic approximation next to simulation (and the exact value
//! when users are Poisson). The approximation overshoots at ρ = 0.95.

use linenet::analytic::{heavy_traffic_distance, prgs_expected_distance};
use linenet::spatial::{allocate_mtr, covering_servers, generate_instance, steady_state_stats, CapacityLaw};
use linenet::DistributionSpec;

fn main() -> linenet::Result<()> {
    let cases = [
        (DistributionSpec::uniform(2.0)?, DistributionSpec::uniform(1.9)?),
        (DistributionSpec::exponential(1.0)?, DistributionSpec::deterministic(0.95)?),
        (DistributionSpec::exponential(1.0)?, DistributionSpec::exponential(1.0 / 0.95)?),
    ];
    for (u, s) in cases {
        let approx = heavy_traffic_distance(&u, &s)?;
        let mut total = 0.0;
        let trials = 10;
        for seed in 0..trials {
            let inst = generate_instance(&u, &s, 100_000, covering_servers(&u, &s, 100_000), &CapacityLaw::Constant(1), seed)?;
            total += steady_state_stats(&allocate_mtr(&inst).0)?.mean;
        }
        let sim = total / trials as f64;
        let exact = match u {
            DistributionSpec::Exponential { rate } => format!("{:.4}", prgs_expected_distance(rate, &s, 1)?.expected_distance),
            _ => "-".into(),
        };
        println!("{}/{}: approximation {approx:.4} simulated {sim:.4} exact {exact}", u.name(), s.name());
    }
    Ok(())
}
