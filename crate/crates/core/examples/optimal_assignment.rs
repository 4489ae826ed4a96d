//! Minimum total distance assignment on the line, checked against the
//! general matching solver.

use linenet::assign::opt_dp;
use linenet::hungarian::min_cost_matching_oracle;

fn main() -> linenet::Result<()> {
    let users = [0.3, 1.1, 1.2, 2.9, 4.0, 4.2];
    let servers = [0.0, 1.0, 1.5, 2.0, 3.0, 3.5, 4.1, 5.0];

    let opt = opt_dp(&users, &servers, 1)?;
    println!("assignment {:?}", opt.assignment);
    println!("total {:.3} mean {:.4} non-crossing {}", opt.total_cost, opt.mean, opt.is_non_crossing());

    let cost: Vec<Vec<f64>> = users.iter().map(|u| servers.iter().map(|s| (u - s).abs()).collect()).collect();
    let (_, check) = min_cost_matching_oracle(&cost)?;
    println!("general matching total {check:.3}");

    let two = opt_dp(&users, &servers[..3], 2)?;
    println!("three servers of capacity 2: {:?} total {:.3}", two.assignment, two.total_cost);
    Ok(())
}
