//! Four allocation policies on one random line instance.
//!
//! MTR and UGS differ per user but leave identical queue profiles, so their
//! totals (counting unserved users up to the horizon) coincide.

use linenet::spatial::{
    allocate_gs, allocate_mtr, allocate_nn, allocate_ugs, covering_servers, generate_instance, CapacityLaw,
};
use linenet::DistributionSpec;

fn main() -> linenet::Result<()> {
    let users = DistributionSpec::exponential(0.5)?;
    let servers = DistributionSpec::exponential(1.0)?;
    let inst = generate_instance(&users, &servers, 20_000, covering_servers(&users, &servers, 20_000), &CapacityLaw::Constant(1), 42)?;

    let (mtr, p_mtr) = allocate_mtr(&inst);
    let (ugs, p_ugs) = allocate_ugs(&inst);
    println!("profiles identical: {}", p_mtr == p_ugs);
    println!("horizon totals: mtr {:.3} ugs {:.3}", mtr.horizon_total(&inst), ugs.horizon_total(&inst));
    println!("variance: mtr {:.3} ugs {:.3}", mtr.variance, ugs.variance);

    // bidirectional policies on the users MTR could serve
    let kept = inst.with_users(&mtr.matched_users());
    let nn = allocate_nn(&kept);
    let gs = allocate_gs(&kept);
    for (name, r) in [("mtr", &mtr), ("nn", &nn), ("gs", &gs)] {
        println!("{name:>3}: matched {:>6} mean {:.4}", r.matched, r.mean);
    }
    Ok(())
}
