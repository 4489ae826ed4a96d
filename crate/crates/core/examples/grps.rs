//! General users, Poisson servers: the accessible-batch G/M/c value for each
//! user law at the same load.

use linenet::analytic::grps_expected_distance;
use linenet::{h2_from_cv2, DistributionSpec};

fn main() -> linenet::Result<()> {
    let mean_gap = 2.0;
    let laws = [
        DistributionSpec::deterministic(mean_gap)?,
        DistributionSpec::uniform(2.0 * mean_gap)?,
        DistributionSpec::exponential(1.0 / mean_gap)?,
        h2_from_cv2(4.0, mean_gap)?,
    ];
    for c in [1, 2, 4] {
        for law in &laws {
            let r = grps_expected_distance(law, 1.0, c)?;
            println!("c={c} users {:<13} E[D]={:.5} (r0={:.5})", law.name(), r.expected_distance, r.r0);
        }
    }
    Ok(())
}
