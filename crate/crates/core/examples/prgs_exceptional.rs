//! Poisson users, general servers. The first batch of every busy period has
//! its own service law; compare it with the ordinary bulk queue and list the
//! unit-disk zeros the solution is built on.

use linenet::analytic::{prgs_solve, FirstService};
use linenet::{exceptional_dist, h2_from_cv2, DistributionSpec};

fn main() -> linenet::Result<()> {
    let lambda = 1.6;
    for law in [DistributionSpec::deterministic(1.0)?, DistributionSpec::uniform(2.0)?, h2_from_cv2(4.0, 1.0)?] {
        let z = exceptional_dist(&law, lambda)?;
        let spatial = prgs_solve(lambda, &law, 2, FirstService::Exceptional)?;
        let ordinary = prgs_solve(lambda, &law, 2, FirstService::Ordinary)?;
        println!(
            "{:<13} E[Z]={:.4} E[D]={:.5} ordinary first service {:.5}",
            law.name(),
            z.mean(),
            spatial.expected_distance,
            ordinary.expected_distance
        );
        for root in &spatial.zeros {
            println!("    zero {:.6}{:+.6}i", root.re, root.im);
        }
        println!("    argument-principle count {}", spatial.zero_count());
    }
    Ok(())
}
