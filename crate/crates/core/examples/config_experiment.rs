// Every experiment kind driven from TOML, as the command-line tool does.
// Each run writes its CSVs, a config echo and a manifest.

use multirc::harness::{run_experiment, ExperimentConfig, ExperimentKind};

const BASE: &str = r#"
[net]
n = 40
p = 0.15

[params]
t_listen = 40.0
t_train = 80.0

[task]
x_cen = -5.5
rho = 1.0
"#;

fn extra(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Sweep => "t_predict = 100.0\n",
        ExperimentKind::Basin => "nx = 5\nny = 5\nt_predict = 100.0\n",
        ExperimentKind::Track => "path = [1.0, 0.9, -0.05]\nsettle = 20.0\n",
        ExperimentKind::Floquet => "cycle_transient = 80.0\n",
        ExperimentKind::Lyapunov => "lyapunov = true\nlyapunov_span = 50.0\nt_predict = 100.0\n",
        ExperimentKind::Symmetry => "mirror_span = 20.0\n",
        ExperimentKind::Itinerancy => "span = 50.0\n",
        ExperimentKind::Neuron => "span = 5.0\nneurons = [1, 20, 40]\n",
    }
}

pub fn run_example() -> multirc::Result<()> {
    for kind in ExperimentKind::ALL {
        let text = format!("{BASE}\n[experiment]\nkind = \"{}\"\n{}", kind.as_str(), extra(kind));
        let cfg = ExperimentConfig::from_toml(&text)?;
        let dir = std::env::temp_dir().join(format!("multirc_config_{}", kind.as_str()));
        let files = run_experiment(&cfg, kind, &dir, false)?;
        println!("{:<10} -> {}", kind.as_str(), files.join(", "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> multirc::Result<()> {
    run_example()
}
