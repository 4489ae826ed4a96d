//! Mean cost `t0 · D^β` under unit capacity.

use linenet::analytic::{cost_grps, cost_prgs};
use linenet::DistributionSpec;

fn main() -> linenet::Result<()> {
    let users = DistributionSpec::exponential(0.5)?;
    for beta in [0.5, 1.0, 2.0, 3.0] {
        println!("Poisson servers, β={beta}: {:.4}", cost_grps(&users, 1.0, beta, 1.0)?.expected_cost);
    }
    let servers = DistributionSpec::deterministic(1.0)?;
    for beta in [1, 2, 3] {
        println!("deterministic servers, β={beta}: {:.4}", cost_prgs(0.5, &servers, beta, 1.0)?.expected_cost);
    }
    Ok(())
}
