use std::path::Path;

use multirc::harness::{ExperimentConfig, ExperimentKind};

#[test]
fn shipped_configs_load_and_name_their_kind() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for kind in ExperimentKind::ALL {
        let path = dir.join(format!("{}.toml", kind.as_str()));
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(cfg.experiment.kind, Some(kind), "{}", path.display());
        assert!(cfg.rho_values().is_ok() && cfg.x_cen_values().is_ok());
    }
}
