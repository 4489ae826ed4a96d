//! Instances on which Gale-Shapley (closest pair first) drifts away from the
//! optimum: the GS/OPT ratio grows with every level.

use linenet::assign::{gs_worst_case_instance, opt_dp};
use linenet::spatial::{allocate_gs, SpatialInstance};

fn main() -> linenet::Result<()> {
    for t in 1..=8 {
        let (users, servers) = gs_worst_case_instance(t)?;
        let inst = SpatialInstance::uniform_capacity(users.clone(), servers.clone(), 1)?;
        let gs = allocate_gs(&inst).total;
        let opt = opt_dp(&users, &servers, 1)?.total_cost;
        println!("t={t}: {:>4} pairs, GS {gs:>10.2} OPT {opt:>6.1} ratio {:.3}", users.len(), gs / opt);
    }
    Ok(())
}
