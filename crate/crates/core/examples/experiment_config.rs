//! Experiments are described in JSON. This one sweeps load and server-gap
//! variability for MTR and prints grand means next to the closed form.

use linenet::experiment::{grand_means, sweep, ExperimentConfig};

const CONFIG: &str = r#"{
    "scenario": "sweep",
    "user_law": {"kind": "exponential", "rate": 1.0},
    "server_law": {"kind": "exponential", "rate": 1.0},
    "capacity": 2,
    "policies": ["mtr"],
    "trials": 8,
    "n_users": 40000,
    "seed": 11,
    "sweep": {"of": "simulate", "rho": [0.3, 0.6, 0.9], "cv2": [0.0, 1.0, 4.0]}
}"#;

fn main() -> linenet::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let report = sweep(&cfg)?;
    let analytic = grand_means(&report, "analytic");
    for (cell, policy, mean) in grand_means(&report, "mean") {
        let row = report.rows.iter().find(|r| r[2] == cell.to_string()).expect("cell row");
        let num = |name: &str| report.get(row, name).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
        let (rho, cv2) = (num("rho"), num("cv2"));
        let a = analytic.iter().find(|x| x.0 == cell).map(|x| x.2).unwrap_or(f64::NAN);
        println!("ρ={rho:.2} cv²={cv2:<3} {policy}: simulated {mean:.4} analytic {a:.4}");
    }
    Ok(())
}
