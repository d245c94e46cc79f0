//! Runs every example through its `run_example` entry point.

mod basin_map {
    #![allow(dead_code)]
    include!("../examples/basin_map.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod branch_tracking {
    #![allow(dead_code)]
    include!("../examples/branch_tracking.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod closed_loop_prediction {
    #![allow(dead_code)]
    include!("../examples/closed_loop_prediction.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod config_experiment {
    #![allow(dead_code)]
    include!("../examples/config_experiment.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod floquet_multipliers {
    #![allow(dead_code)]
    include!("../examples/floquet_multipliers.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod itinerancy {
    #![allow(dead_code)]
    include!("../examples/itinerancy.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod lyapunov_exponent {
    #![allow(dead_code)]
    include!("../examples/lyapunov_exponent.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod neuron_diagnostics {
    #![allow(dead_code)]
    include!("../examples/neuron_diagnostics.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod parameter_sweep {
    #![allow(dead_code)]
    include!("../examples/parameter_sweep.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod period_doubling {
    #![allow(dead_code)]
    include!("../examples/period_doubling.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod ridge_readout {
    #![allow(dead_code)]
    include!("../examples/ridge_readout.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod spectral_radius {
    #![allow(dead_code)]
    include!("../examples/spectral_radius.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod symmetry_checks {
    #![allow(dead_code)]
    include!("../examples/symmetry_checks.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}
