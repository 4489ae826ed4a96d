//! CSV in, assignment CSV out.

use linenet::assign::opt_assign_instance;
use linenet::io::{read_instance, write_assignment};

const INSTANCE: &str = "role,location,capacity
user,0.2,
user,0.9,
user,1.4,
server,0.5,2
server,2.0,1
";

fn main() -> linenet::Result<()> {
    let inst = read_instance(INSTANCE.as_bytes(), 1)?;
    let opt = opt_assign_instance(&inst)?;
    let servers: Vec<Option<usize>> = opt.assignment.iter().map(|&j| Some(j)).collect();
    let dist: Vec<Option<f64>> = opt
        .assignment
        .iter()
        .zip(inst.users())
        .map(|(&j, u)| Some((u - inst.servers()[j]).abs()))
        .collect();
    write_assignment(std::io::stdout(), &servers, &dist)
}
