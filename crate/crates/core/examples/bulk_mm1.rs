//! Poisson users and servers: the bulk-service M/M/1 value against simulation,
//! plus a few points of the UGS distance density.

use linenet::analytic::{mm1_bulk, ugs_distance_density};
use linenet::spatial::{allocate_mtr, generate_instance, steady_state_stats, CapacityLaw};
use linenet::DistributionSpec;

fn main() -> linenet::Result<()> {
    for (lambda, mu, c) in [(0.5, 1.0, 1), (1.0, 1.0, 2), (0.8, 1.0, 2), (2.5, 1.0, 4)] {
        let r = mm1_bulk(lambda, mu, c)?;
        let inst = generate_instance(
            &DistributionSpec::exponential(lambda)?,
            &DistributionSpec::exponential(mu)?,
            100_000,
            (100_000.0 * mu / lambda * 1.05) as usize + 10,
            &CapacityLaw::Constant(c),
            7,
        )?;
        let sim = steady_state_stats(&allocate_mtr(&inst).0)?;
        println!("λ={lambda} μ={mu} c={c}: r0={:.5} E[D]={:.5} simulated {:.5}", r.r0, r.expected_distance, sim.mean);
    }
    println!("UGS density, λ=0.5 μ=1:");
    for x in [0.1, 0.5, 1.0, 2.0, 4.0] {
        println!("  f({x}) = {:.5}", ugs_distance_density(0.5, 1.0, x)?);
    }
    Ok(())
}
