// A seeded (x_cen, rho) sweep through the experiment harness, written as CSV.

use multirc::harness::{run_experiment, ExperimentConfig, ExperimentKind};

const CONFIG: &str = r#"
[net]
n = 60
p = 0.1
seed = 2

[params]
t_listen = 50.0
t_train = 100.0

[task]
x_cen_grid = [-5.5, 0.0]
rho_grid = [0.6, 1.2]

[experiment]
kind = "sweep"
t_predict = 100.0
"#;

pub fn run_example() -> multirc::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let dir = std::env::temp_dir().join("multirc_parameter_sweep");
    run_experiment(&cfg, ExperimentKind::Sweep, &dir, false)?;
    print!("{}", std::fs::read_to_string(dir.join("sweep.csv"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
