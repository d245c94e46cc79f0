//! Experiment configuration: a sectioned TOML file whose omitted keys fall
//! back to the reference design and training parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{LyapunovMethod, LyapunovOptions, Target};
use crate::basins::{BasinOptions, Region};
use crate::continuation::BranchParameter;
use crate::dynamics::SettleCheck;
use crate::error::{Error, Result};
use crate::netgen::NetParams;
use crate::taskgen::RotationMode;
use crate::training::TrainingParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sweep,
    Basin,
    Track,
    Floquet,
    Lyapunov,
    Symmetry,
    Itinerancy,
    Neuron,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Sweep,
        ExperimentKind::Basin,
        ExperimentKind::Track,
        ExperimentKind::Floquet,
        ExperimentKind::Lyapunov,
        ExperimentKind::Symmetry,
        ExperimentKind::Itinerancy,
        ExperimentKind::Neuron,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Basin => "basin",
            ExperimentKind::Track => "track",
            ExperimentKind::Floquet => "floquet",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Symmetry => "symmetry",
            ExperimentKind::Itinerancy => "itinerancy",
            ExperimentKind::Neuron => "neuron",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSection {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

impl Default for NetSection {
    fn default() -> Self {
        let d = NetParams::default();
        Self { n: d.n, p: d.p, seed: d.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub sigma: f64,
    pub gamma: f64,
    pub tau: f64,
    pub beta: f64,
    pub t_listen: f64,
    pub t_train: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let n = NetParams::default();
        let t = TrainingParams::default();
        Self { sigma: n.sigma, gamma: n.gamma, tau: n.tau, beta: t.beta, t_listen: t.t_listen, t_train: t.t_train }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSection {
    pub b: f64,
    pub x_cen: f64,
    /// Explicit `x_cen` values for sweeps.
    pub x_cen_grid: Option<Vec<f64>>,
    /// `[start, stop, step]` alternative to `x_cen_grid`.
    pub x_cen_range: Option<[f64; 3]>,
    pub mode: String,
    pub rho: f64,
    pub rho_grid: Option<Vec<f64>>,
    pub rho_range: Option<[f64; 3]>,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self { b: 5.0, x_cen: 0.0, x_cen_grid: None, x_cen_range: None, mode: "opposite".into(), rho: 1.25, rho_grid: None, rho_range: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: Option<ExperimentKind>,
    pub t_predict: f64,
    pub assess_window: f64,
    /// Adds largest Lyapunov exponents to sweep rows.
    pub lyapunov: bool,
    pub lyapunov_transient: f64,
    pub lyapunov_span: f64,
    pub lyapunov_renorm: f64,
    pub lyapunov_method: String,
    /// `[x_min, x_max, y_min, y_max]`.
    pub region: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub listen_tol: f64,
    pub settle_every: usize,
    pub settle_tol: f64,
    pub parameter: String,
    /// `[start, stop, step]` of the tracked parameter.
    pub path: [f64; 3],
    pub targets: Vec<String>,
    pub settle: f64,
    pub block_width: usize,
    pub top_k: usize,
    pub cycle_transient: f64,
    pub mirror_span: f64,
    pub phase_zero_pair: bool,
    pub threshold_range: Option<[f64; 2]>,
    pub threshold_tol: f64,
    pub span: f64,
    pub residence_window: f64,
    pub output_stride: usize,
    pub neurons: Vec<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let b = BasinOptions::default();
        let l = LyapunovOptions::default();
        let s = b.settle.expect("default settle");
        Self {
            kind: None,
            t_predict: 600.0,
            assess_window: 40.0,
            lyapunov: false,
            lyapunov_transient: l.transient,
            lyapunov_span: l.span,
            lyapunov_renorm: l.renorm_interval,
            lyapunov_method: "variational".into(),
            region: [b.region.x_min, b.region.x_max, b.region.y_min, b.region.y_max],
            nx: b.nx,
            ny: b.ny,
            listen_tol: b.listen_tol.expect("default listen tolerance"),
            settle_every: s.every,
            settle_tol: s.tol,
            parameter: "rho".into(),
            path: [1.25, 1.0, -0.01],
            targets: vec!["A".into(), "B".into()],
            settle: 100.0,
            block_width: 64,
            top_k: 5,
            cycle_transient: 200.0,
            mirror_span: 100.0,
            phase_zero_pair: false,
            threshold_range: None,
            threshold_tol: 1e-3,
            span: 100.0,
            residence_window: 10.0,
            output_stride: 10,
            neurons: vec![9, 25, 50, 88, 103, 250, 400, 650],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), plots: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub net: NetSection,
    pub params: ParamsSection,
    pub task: TaskSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn expand(grid: &Option<Vec<f64>>, range: &Option<[f64; 3]>, fallback: f64, name: &str) -> Result<Vec<f64>> {
    match (grid, range) {
        (Some(_), Some(_)) => Err(Error::Config(format!("give either {name}_grid or {name}_range, not both"))),
        (Some(g), None) if g.is_empty() => Err(Error::Config(format!("{name}_grid is empty"))),
        (Some(g), None) => Ok(g.clone()),
        (None, Some(r)) => range_values(*r, name),
        (None, None) => Ok(vec![fallback]),
    }
}

/// Inclusive `[start, stop, step]` grid; values are `start + k * step`.
pub fn range_values([start, stop, step]: [f64; 3], name: &str) -> Result<Vec<f64>> {
    if !(step != 0.0 && step.is_finite()) || (stop - start) * step < 0.0 {
        return Err(Error::Config(format!("{name} range [{start}, {stop}, {step}] does not advance toward its end")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.net_params().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.training_params().validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.task.b > 0.0) {
            return bad(format!("task.b must be positive, got {}", self.task.b));
        }
        self.mode()?;
        for r in self.rho_values()? {
            if !(r >= 0.0) {
                return bad(format!("rho must be non-negative, got {r}"));
            }
        }
        self.x_cen_values()?;
        let e = &self.experiment;
        if !(e.t_predict > e.assess_window && e.assess_window > 0.0) {
            return bad(format!("need 0 < assess_window < t_predict, got {} and {}", e.assess_window, e.t_predict));
        }
        if e.nx < 2 || e.ny < 2 {
            return bad(format!("basin resolution must be at least 2x2, got {}x{}", e.nx, e.ny));
        }
        if !(e.region[0] < e.region[1] && e.region[2] < e.region[3]) {
            return bad(format!("region {:?} is empty", e.region));
        }
        self.lyapunov_method()?;
        self.branch_parameter()?;
        self.targets()?;
        range_values(e.path, "path")?;
        if e.block_width == 0 || e.top_k == 0 || e.output_stride == 0 || e.settle_every == 0 {
            return bad("block_width, top_k, output_stride and settle_every must be positive".into());
        }
        if !(e.span > 0.0 && e.residence_window > 0.0 && e.mirror_span > 0.0 && e.settle >= 0.0) {
            return bad("span, residence_window and mirror_span must be positive".into());
        }
        Ok(())
    }

    pub fn net_params(&self) -> NetParams {
        NetParams {
            n: self.net.n,
            d: 2,
            p: self.net.p,
            sigma: self.params.sigma,
            gamma: self.params.gamma,
            tau: self.params.tau,
            seed: self.net.seed,
        }
    }

    pub fn training_params(&self) -> TrainingParams {
        TrainingParams { t_listen: self.params.t_listen, t_train: self.params.t_train, beta: self.params.beta, tau: self.params.tau }
    }

    pub fn mode(&self) -> Result<RotationMode> {
        RotationMode::parse(&self.task.mode).ok_or_else(|| Error::Config(format!("unknown rotation mode '{}'", self.task.mode)))
    }

    pub fn rho_values(&self) -> Result<Vec<f64>> {
        expand(&self.task.rho_grid, &self.task.rho_range, self.task.rho, "rho")
    }

    pub fn x_cen_values(&self) -> Result<Vec<f64>> {
        expand(&self.task.x_cen_grid, &self.task.x_cen_range, self.task.x_cen, "x_cen")
    }

    pub fn lyapunov_options(&self) -> Result<LyapunovOptions> {
        let e = &self.experiment;
        Ok(LyapunovOptions {
            transient: e.lyapunov_transient,
            renorm_interval: e.lyapunov_renorm,
            span: e.lyapunov_span,
            method: self.lyapunov_method()?,
            seed: self.net.seed,
            ..Default::default()
        })
    }

    fn lyapunov_method(&self) -> Result<LyapunovMethod> {
        match self.experiment.lyapunov_method.as_str() {
            "variational" => Ok(LyapunovMethod::Variational),
            "two_trajectory" => Ok(LyapunovMethod::TwoTrajectory),
            m => Err(Error::Config(format!("unknown lyapunov_method '{m}'"))),
        }
    }

    pub fn basin_options(&self) -> BasinOptions {
        let e = &self.experiment;
        BasinOptions {
            region: Region { x_min: e.region[0], x_max: e.region[1], y_min: e.region[2], y_max: e.region[3] },
            nx: e.nx,
            ny: e.ny,
            t_listen: self.params.t_listen,
            t_predict: e.t_predict,
            assess_window: e.assess_window,
            listen_tol: (e.listen_tol > 0.0).then_some(e.listen_tol),
            settle: (e.settle_tol > 0.0).then_some(SettleCheck { every: e.settle_every, tol: e.settle_tol }),
        }
    }

    pub fn branch_parameter(&self) -> Result<BranchParameter> {
        BranchParameter::parse(&self.experiment.parameter)
            .ok_or_else(|| Error::Config(format!("unknown tracking parameter '{}'", self.experiment.parameter)))
    }

    pub fn targets(&self) -> Result<Vec<Target>> {
        self.experiment
            .targets
            .iter()
            .map(|t| match t.as_str() {
                "A" => Ok(Target::A),
                "B" => Ok(Target::B),
                o => Err(Error::Config(format!("unknown target '{o}'"))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_reference_defaults() {
        let c = ExperimentConfig::from_toml("[experiment]\nkind = \"sweep\"\n").unwrap();
        assert_eq!(c.experiment.kind, Some(ExperimentKind::Sweep));
        assert_eq!((c.net.n, c.net.p), (1000, 0.04));
        assert_eq!((c.params.sigma, c.params.gamma, c.params.beta), (0.2, 5.0, 1e-2));
        assert_eq!((c.params.t_listen, c.params.t_train, c.params.tau), (200.0, 400.0, 0.01));
        let echo = c.to_toml();
        assert!(echo.contains("tau = 0.01") && echo.contains("gamma = 5.0"));
        assert_eq!(ExperimentConfig::from_toml(&echo).unwrap(), c);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("[params]\ngamma = -1.0\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("[task]\nmode = \"sideways\"\n"), Err(Error::Config(_))));
        match ExperimentConfig::from_toml("[net]\nn = 10\n\n[params]\nbogus = 1\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("bogus"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(ExperimentConfig::from_toml("[net]\nn = \"many\"\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn grids() {
        let c = ExperimentConfig::from_toml("[task]\nrho_range = [0.9, 1.6, 0.05]\nx_cen_grid = [-5.5, 0.0]\n").unwrap();
        let r = c.rho_values().unwrap();
        assert_eq!(r.len(), 15);
        assert!((r[14] - 1.6).abs() < 1e-12);
        assert_eq!(c.x_cen_values().unwrap(), vec![-5.5, 0.0]);
        assert_eq!(range_values([1.0, 0.5, -0.25], "p").unwrap(), vec![1.0, 0.75, 0.5]);
        assert!(range_values([1.0, 2.0, -0.1], "p").is_err());
    }
}
