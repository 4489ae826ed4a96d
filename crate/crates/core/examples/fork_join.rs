//! Two resources on independent server lines; a user waits for both.

use linenet::analytic::{forkjoin_expected_max, mm1_bulk};
use linenet::spatial::simulate_forkjoin;
use linenet::DistributionSpec;

fn main() -> linenet::Result<()> {
    let servers = DistributionSpec::exponential(1.0)?;
    for lambda in [0.2, 0.5, 0.8] {
        let users = DistributionSpec::exponential(lambda)?;
        let sim: f64 = (0..10).map(|s| simulate_forkjoin(&users, &servers, 100_000, s)).sum::<linenet::Result<f64>>()? / 10.0;
        println!(
            "λ={lambda}: single {:.4} max-of-two approx {:.4} simulated {:.4}",
            mm1_bulk(lambda, 1.0, 1)?.expected_distance,
            forkjoin_expected_max(lambda, 1.0)?,
            sim
        );
    }
    Ok(())
}
