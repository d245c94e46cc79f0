//! Experiment recipes behind the command-line front end. Each recipe reads an
//! [`ExperimentConfig`], writes its CSV files into an output directory and
//! finishes with a manifest that is enough to rerun it.

pub mod config;
pub mod plots;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    classify_prediction, largest_lyapunov, AttractorKind, AttractorLabel, ResidenceTracker, Target, Thresholds,
    write_residence_csv,
};
use crate::basins::{map_basins, mirror_consistency, write_catalog_csv, write_grid_csv};
use crate::continuation::{detect_period_doubling, track_branch, write_branch_csv, BranchSetup, TrackOptions};
use crate::dynamics::{drive_open_loop, run_closed_loop, visit_closed_loop, ClosedLoop, ClosedLoopRun, RunOptions, StateTrajectory, TrainedReadout};
use crate::error::{Error, Result};
use crate::floquet::{find_cycle, monodromy, multiplier_crossings, write_multiplier_csv, FloquetOptions};
use crate::netgen::{Reservoir, ReservoirNet};
use crate::neuron::{neuron_traces, paired_run_difference, spearman, write_difference_csv, write_traces_csv};
use crate::rng::GENERATOR;
use crate::symmetry::{
    check_b9_pair, half_period_antisymmetry, mirror_trajectory_residual, square_readout_ratio, symmetry_breaking_threshold,
    train_b9_pair, train_b9_pair_phase_zero, write_w2_elements, SymmetryReport,
};
use crate::taskgen::{generate_orbit, seeing_double_pair, OrbitSpec};
use crate::training::train_on;

pub use config::{range_values, ExperimentConfig, ExperimentKind};

/// A readout trained at one `(x_cen, rho)` with its targets and the training
/// runs' final states in target order.
pub struct Trained<'a> {
    pub res: Reservoir<'a>,
    pub readout: TrainedReadout,
    pub targets: (OrbitSpec, OrbitSpec),
    pub finals: [Vec<f64>; 2],
}

impl Trained<'_> {
    pub fn start(&self, which: Target) -> &[f64] {
        &self.finals[which as usize]
    }
}

pub fn train_cell<'a>(net: &'a ReservoirNet, cfg: &ExperimentConfig, x_cen: f64, rho: f64) -> Result<Trained<'a>> {
    let targets = seeing_double_pair(x_cen, cfg.task.b, cfg.mode()?, cfg.params.tau)?;
    let res = net.at_rho(rho)?;
    let (readout, mut finals) = train_on(&res, &[targets.0, targets.1], &cfg.training_params())?;
    let b = finals.pop().expect("two orbits");
    let a = finals.pop().expect("two orbits");
    Ok(Trained { res, readout, targets, finals: [a, b] })
}

/// Closed-loop prediction from `r0` over `t_predict`, classified on its closing `window`.
pub fn predict(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    r0: &[f64],
    targets: (&OrbitSpec, &OrbitSpec),
    which: Target,
    t_predict: f64,
    window: f64,
) -> Result<(AttractorLabel, ClosedLoopRun)> {
    let steps = (t_predict / res.tau()).round() as usize;
    let keep = (window / res.tau()).round() as usize;
    let run = run_closed_loop(res, readout, r0, steps, &RunOptions { record_from: steps.saturating_sub(keep), ..Default::default() })?;
    let th = Thresholds::for_radius(targets.0.radius());
    Ok((classify_prediction(&run.projected, targets, which, window, &th), run))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x_cen: f64,
    pub rho: f64,
    pub class_a: String,
    pub class_b: String,
    pub delta_rel_max: Option<f64>,
    pub lambda_a: Option<f64>,
    pub lambda_b: Option<f64>,
    pub multifunctional: bool,
}

pub const SWEEP_HEADER: &str = "x_cen,rho,class_A,class_B,delta_rel_max,lambda_A,lambda_B,multifunctional";

/// One `(x_cen, rho)` cell: train, predict both targets, classify.
pub fn sweep_cell(net: &ReservoirNet, cfg: &ExperimentConfig, x_cen: f64, rho: f64) -> SweepRow {
    let mut row = SweepRow {
        x_cen,
        rho,
        class_a: "error".into(),
        class_b: "error".into(),
        delta_rel_max: None,
        lambda_a: None,
        lambda_b: None,
        multifunctional: false,
    };
    let t = match train_cell(net, cfg, x_cen, rho) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("training failed at x_cen={x_cen}, rho={rho}: {e}");
            return row;
        }
    };
    let e = &cfg.experiment;
    let mut labels = Vec::new();
    for which in [Target::A, Target::B] {
        let out = predict(&t.res, &t.readout, t.start(which), (&t.targets.0, &t.targets.1), which, e.t_predict, e.assess_window);
        let (label, lambda) = match out {
            Ok((label, run)) => {
                let lambda = if e.lyapunov && label.kind != AttractorKind::Diverged {
                    cfg.lyapunov_options().and_then(|o| largest_lyapunov(&t.res, &t.readout, &run.final_state, &o)).map(|l| l.lambda_max).ok()
                } else {
                    None
                };
                (label, lambda)
            }
            Err(_) => (AttractorLabel::diverged(), None),
        };
        match which {
            Target::A => {
                row.class_a = label.kind.as_str().into();
                row.lambda_a = lambda;
            }
            Target::B => {
                row.class_b = label.kind.as_str().into();
                row.lambda_b = lambda;
            }
        }
        labels.push(label);
    }
    if let (Some(da), Some(db)) = (labels[0].delta_rel, labels[1].delta_rel) {
        row.delta_rel_max = Some(da.max(db));
    }
    row.multifunctional = labels.iter().all(|l| l.kind == AttractorKind::CorrectCycle)
        && row.delta_rel_max.is_some_and(|d| d < cfg.task_thresholds().delta_rel_max);
    row
}

impl ExperimentConfig {
    fn task_thresholds(&self) -> Thresholds {
        Thresholds::for_radius(self.task.b)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.x_cen,
            r.rho,
            r.class_a,
            r.class_b,
            opt(r.delta_rel_max),
            opt(r.lambda_a),
            opt(r.lambda_b),
            r.multifunctional
        )?;
    }
    Ok(())
}

/// Rows in row-major order: `x_cen` outer, `rho` inner.
pub fn run_sweep(net: &ReservoirNet, cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let cells: Vec<(f64, f64)> =
        cfg.x_cen_values()?.into_iter().flat_map(|x| cfg.rho_values().unwrap_or_default().into_iter().map(move |r| (x, r))).collect();
    Ok(cells.par_iter().map(|&(x, r)| sweep_cell(net, cfg, x, r)).collect())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    kind: &'a str,
    seed: u64,
    version: &'a str,
    generator: &'a str,
    wall_time_s: f64,
    files: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Collects the files an experiment writes.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: vec![] })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Runs `kind` and writes its outputs, the effective config and the manifest
/// into `out`. Returns the list of files written.
pub fn run_experiment(cfg: &ExperimentConfig, kind: ExperimentKind, out: &Path, plots: bool) -> Result<Vec<String>> {
    if let Some(k) = cfg.experiment.kind {
        if k != kind {
            return Err(Error::Config(format!("config is for '{}' but '{}' was requested", k.as_str(), kind.as_str())));
        }
    }
    let started = Instant::now();
    let mut o = Outputs::new(out)?;
    let mut effective = cfg.clone();
    effective.experiment.kind = Some(kind);
    o.write("config.toml", |w| Ok(w.write_all(effective.to_toml().as_bytes())?))?;
    let net = ReservoirNet::build(cfg.net_params())?;
    match kind {
        ExperimentKind::Sweep => sweep(&net, cfg, &mut o, plots)?,
        ExperimentKind::Basin => basin(&net, cfg, &mut o, plots)?,
        ExperimentKind::Track => track(&net, cfg, &mut o, plots)?,
        ExperimentKind::Floquet => floquet(&net, cfg, &mut o)?,
        ExperimentKind::Lyapunov => lyapunov(&net, cfg, &mut o)?,
        ExperimentKind::Symmetry => symmetry(&net, cfg, &mut o)?,
        ExperimentKind::Itinerancy => itinerancy(&net, cfg, &mut o)?,
        ExperimentKind::Neuron => neuron(&net, cfg, &mut o)?,
    }
    let mut files = o.files().to_vec();
    files.push("manifest.toml".into());
    let manifest = Manifest {
        kind: kind.as_str(),
        seed: cfg.net.seed,
        version: env!("CARGO_PKG_VERSION"),
        generator: GENERATOR,
        wall_time_s: started.elapsed().as_secs_f64(),
        files: files.clone(),
        config: &effective,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join("manifest.toml"), text)?;
    Ok(files)
}

fn sweep(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs, plots: bool) -> Result<()> {
    let rows = run_sweep(net, cfg)?;
    o.write("sweep.csv", |w| write_sweep_csv(&rows, w))?;
    if plots {
        plots::sweep_png(&rows, &o.dir().join("sweep.png"))?;
    }
    Ok(())
}

fn single_point(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    Ok((cfg.x_cen_values()?[0], cfg.rho_values()?[0]))
}

fn basin(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs, plots: bool) -> Result<()> {
    let (x_cen, rho) = single_point(cfg)?;
    let t = train_cell(net, cfg, x_cen, rho)?;
    let grid = map_basins(&t.res, &t.readout, (&t.targets.0, &t.targets.1), &cfg.basin_options())?;
    o.write("basin_grid.csv", |w| write_grid_csv(&grid, w))?;
    o.write("basin_catalog.csv", |w| write_catalog_csv(&grid, w))?;
    let mirror = mirror_consistency(&grid, cfg.task.b);
    let ratio = square_readout_ratio(&t.readout).ok();
    o.write("basin_mirror.csv", |w| {
        writeln!(w, "checked,consistent,fraction,w2_ratio")?;
        writeln!(w, "{},{},{},{}", mirror.checked, mirror.consistent, mirror.fraction(), opt(ratio))?;
        Ok(())
    })?;
    if plots {
        plots::basin_png(&grid, &o.dir().join("basin.png"))?;
    }
    Ok(())
}

fn track(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs, plots: bool) -> Result<()> {
    let path = range_values(cfg.experiment.path, "path")?;
    let parameter = cfg.branch_parameter()?;
    let opts = TrackOptions { settle: cfg.experiment.settle, assess: cfg.experiment.assess_window, ..Default::default() };
    let targets = cfg.targets()?;
    let branches: Vec<Result<_>> = targets
        .par_iter()
        .map(|&which| {
            let setup = BranchSetup {
                net,
                parameter,
                rho: cfg.task.rho,
                x_cen: cfg.task.x_cen,
                b: cfg.task.b,
                mode: cfg.mode()?,
                training: cfg.training_params(),
                which,
            };
            track_branch(&setup, &path, None, &opts)
        })
        .collect();
    let mut summary = Vec::new();
    for (which, branch) in targets.iter().zip(branches) {
        let branch = branch?;
        let tag = which.as_str();
        o.write(&format!("branch_{tag}.csv"), |w| write_branch_csv(&branch, w))?;
        let events = detect_period_doubling(&branch.points);
        o.write(&format!("period_doubling_{tag}.csv"), |w| {
            writeln!(w, "param_lo,param_hi,period_ratio")?;
            for e in &events {
                writeln!(w, "{},{},{}", e.param_interval.0, e.param_interval.1, e.period_ratio)?;
            }
            Ok(())
        })?;
        if plots {
            plots::branch_png(&branch, &o.dir().join(format!("branch_{tag}.png")))?;
        }
        summary.push((tag, branch));
    }
    o.write("branches.csv", |w| {
        writeln!(w, "target,points,termination,param")?;
        for (tag, b) in &summary {
            let at = match b.termination {
                crate::continuation::Termination::EndOfRange => b.points.last().map(|p| p.param),
                crate::continuation::Termination::LostTrack { param } | crate::continuation::Termination::Diverged { param } => Some(param),
            };
            writeln!(w, "{tag},{},{},{}", b.points.len(), b.termination.as_str(), opt(at))?;
        }
        Ok(())
    })
}

fn floquet(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs) -> Result<()> {
    let x_cen = cfg.x_cen_values()?[0];
    let fopts = FloquetOptions { block_width: cfg.experiment.block_width, eps_ret: None, top_k: cfg.experiment.top_k };
    let targets = cfg.targets()?;
    let mut rows = Vec::new();
    let mut tables: Vec<Vec<(f64, Vec<nalgebra::Complex<f64>>)>> = vec![Vec::new(); targets.len()];
    for rho in cfg.rho_values()? {
        let t = train_cell(net, cfg, x_cen, rho)?;
        for (k, &which) in targets.iter().enumerate() {
            let outcome = find_cycle(&t.res, &t.readout, t.start(which), cfg.experiment.cycle_transient, cfg.task.b, &fopts)
                .and_then(|fix| monodromy(&t.res, &t.readout, &fix.state, fix.period, &fopts));
            match outcome {
                Ok(m) => {
                    let (log_det, _) = m.log_det();
                    rows.push(format!("{rho},{},ok,{},{},{},{log_det}", which.as_str(), m.period, m.return_residual, m.trace_integral));
                    tables[k].push((rho, m.multipliers.iter().take(fopts.top_k).copied().collect()));
                }
                Err(e) => {
                    log::warn!("no cycle at rho={rho} for {}: {e}", which.as_str());
                    rows.push(format!("{rho},{},{},,,,", which.as_str(), status_of(&e)));
                }
            }
        }
    }
    o.write("floquet_cycles.csv", |w| {
        writeln!(w, "rho,target,status,period,return_residual,trace_integral,log_det")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))?;
        Ok(())
    })?;
    for (k, which) in targets.iter().enumerate() {
        let tag = which.as_str();
        o.write(&format!("multipliers_{tag}.csv"), |w| write_multiplier_csv(&tables[k], w))?;
        let crossings = multiplier_crossings(&tables[k]);
        o.write(&format!("crossings_{tag}.csv"), |w| {
            writeln!(w, "rho_lo,rho_hi,kind")?;
            for c in &crossings {
                writeln!(w, "{},{},{}", c.between.0, c.between.1, c.kind.as_str())?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::NotOnCycle { .. } => "not_on_cycle",
        Error::Diverged { .. } => "diverged",
        _ => "error",
    }
}

fn lyapunov(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs) -> Result<()> {
    let lopts = cfg.lyapunov_options()?;
    let targets = cfg.targets()?;
    let cells: Vec<(f64, f64)> = cfg.x_cen_values()?.into_iter().flat_map(|x| cfg.rho_values().unwrap_or_default().into_iter().map(move |r| (x, r))).collect();
    let rows: Vec<Vec<String>> = cells
        .par_iter()
        .map(|&(x_cen, rho)| {
            let Ok(t) = train_cell(net, cfg, x_cen, rho) else {
                return targets.iter().map(|w| format!("{x_cen},{rho},{},error,", w.as_str())).collect();
            };
            targets
                .iter()
                .map(|&which| {
                    let e = &cfg.experiment;
                    match predict(&t.res, &t.readout, t.start(which), (&t.targets.0, &t.targets.1), which, e.t_predict, e.assess_window) {
                        Ok((label, run)) => {
                            let lambda = largest_lyapunov(&t.res, &t.readout, &run.final_state, &lopts).map(|l| l.lambda_max).ok();
                            format!("{x_cen},{rho},{},{},{}", which.as_str(), label.kind.as_str(), opt(lambda))
                        }
                        Err(_) => format!("{x_cen},{rho},{},diverged,", which.as_str()),
                    }
                })
                .collect()
        })
        .collect();
    o.write("lyapunov.csv", |w| {
        writeln!(w, "x_cen,rho,target,label,lambda_max")?;
        rows.iter().flatten().try_for_each(|r| writeln!(w, "{r}"))?;
        Ok(())
    })
}

fn symmetry(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs) -> Result<()> {
    let (x_cen, rho) = single_point(cfg)?;
    let (mode, b, params) = (cfg.mode()?, cfg.task.b, cfg.training_params());
    let (plus, minus) = train_b9_pair(net, rho, x_cen, b, mode, &params)?;
    let b9 = check_b9_pair(&plus, &minus)?;
    let res = net.at_rho(rho)?;
    let (a, _) = seeing_double_pair(x_cen, b, mode, cfg.params.tau)?;
    let (states, r_listen) = response_after_listening(&res, &a, cfg.params.t_listen, 2.0 * std::f64::consts::TAU)?;
    let report = SymmetryReport {
        w2_ratio: square_readout_ratio(&plus)?,
        b2_residual: half_period_antisymmetry(&states, std::f64::consts::TAU)?,
        b9_linear_residual: b9.linear,
        b9_square_residual: b9.square,
        mirror_residual: mirror_trajectory_residual(&res, &plus, &r_listen, cfg.experiment.mirror_span)?,
    };
    o.write("symmetry.csv", |w| report.write_csv(w))?;
    o.write("w2_elements.csv", |w| write_w2_elements(&plus, w))?;
    if cfg.experiment.phase_zero_pair {
        let (p0, m0) = train_b9_pair_phase_zero(net, rho, x_cen, b, mode, &params)?;
        let r = check_b9_pair(&p0, &m0)?;
        o.write("b9_phase_zero.csv", |w| {
            writeln!(w, "b9_linear_residual,b9_square_residual")?;
            writeln!(w, "{},{}", r.linear, r.square)?;
            Ok(())
        })?;
    }
    if let Some([lo, hi]) = cfg.experiment.threshold_range {
        let targets = seeing_double_pair(x_cen, b, mode, cfg.params.tau)?;
        let ratio_at = |rho: f64| -> Result<f64> {
            let res = net.at_rho(rho)?;
            square_readout_ratio(&train_on(&res, &[targets.0, targets.1], &params)?.0)
        };
        let floor = ratio_at(lo)?;
        let threshold = symmetry_breaking_threshold(ratio_at, lo, hi, floor, cfg.experiment.threshold_tol)?;
        o.write("symmetry_threshold.csv", |w| {
            writeln!(w, "rho_threshold,floor")?;
            writeln!(w, "{threshold},{floor}")?;
            Ok(())
        })?;
    }
    Ok(())
}

/// Open-loop response to `spec` over `extra` time units after the listening
/// stage, and the state at the end of listening.
pub fn response_after_listening(res: &Reservoir<'_>, spec: &OrbitSpec, t_listen: f64, extra: f64) -> Result<(StateTrajectory, Vec<f64>)> {
    let l = (t_listen / res.tau()).round() as usize;
    let e = (extra / res.tau()).round() as usize;
    let u = generate_orbit(spec, l + e)?;
    let mut kept = Vec::with_capacity((e + 1) * res.n());
    let mut at_listen = Vec::new();
    drive_open_loop(res, &u, &vec![0.0; res.n()], |i, r| {
        if i == l {
            at_listen = r.to_vec();
        }
        if i >= l {
            kept.extend_from_slice(r);
        }
    })?;
    Ok((StateTrajectory::new(crate::taskgen::Trajectory::new(res.n(), res.tau(), kept)?), at_listen))
}

fn itinerancy(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs) -> Result<()> {
    let (x_cen, rho) = single_point(cfg)?;
    let t = train_cell(net, cfg, x_cen, rho)?;
    let e = &cfg.experiment;
    let steps = (e.span / t.res.tau()).round() as usize;
    let cl = ClosedLoop::new(&t.res, &t.readout)?;
    let mut tracker = ResidenceTracker::new((&t.targets.0, &t.targets.1), e.residence_window, t.res.tau());
    let mut traj = o.create("itinerancy_trajectory.csv")?;
    writeln!(traj, "t,x,y")?;
    let mut io_err = None;
    let stride = e.output_stride;
    let h = t.res.tau();
    visit_closed_loop(&cl, &t.readout, t.start(Target::A), steps, h, None, |i, _, u| {
        tracker.push(u);
        if i % stride == 0 && io_err.is_none() {
            if let Err(err) = writeln!(traj, "{},{},{}", i as f64 * h, u[0], u[1]) {
                io_err = Some(err);
            }
        }
    })?;
    if let Some(err) = io_err {
        return Err(err.into());
    }
    traj.flush()?;
    let rec = tracker.record();
    o.write("residence.csv", |w| write_residence_csv(&rec, w))?;
    let mean = |l: Target| {
        let d: Vec<f64> = rec.intervals.iter().filter(|i| i.0 == l).map(|i| i.1).collect();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    };
    o.write("itinerancy_summary.csv", |w| {
        writeln!(w, "span,switch_count,mean_residence_A,mean_residence_B")?;
        writeln!(w, "{},{},{},{}", e.span, rec.switch_count, opt(mean(Target::A)), opt(mean(Target::B)))?;
        Ok(())
    })
}

fn neuron(net: &ReservoirNet, cfg: &ExperimentConfig, o: &mut Outputs) -> Result<()> {
    let (x_cen, rho) = single_point(cfg)?;
    let t = train_cell(net, cfg, x_cen, rho)?;
    let e = &cfg.experiment;
    let stream = paired_run_difference(&t.res, &t.readout, t.start(Target::A), t.start(Target::B), e.span, e.output_stride)?;
    o.write("difference.csv", |w| write_difference_csv(&stream, w))?;
    let indices: Vec<usize> = e
        .neurons
        .iter()
        .map(|&i| if i >= 1 && i <= net.n() { Ok(i - 1) } else { Err(Error::Config(format!("neuron {i} outside 1..={}", net.n()))) })
        .collect::<Result<_>>()?;
    let steps = (e.span / t.res.tau()).round() as usize;
    for which in [Target::A, Target::B] {
        let run = run_closed_loop(&t.res, &t.readout, t.start(which), steps, &RunOptions { state_stride: Some(e.output_stride), ..Default::default() })?;
        let states = run.states.expect("states requested");
        let traces = neuron_traces(&states, &indices)?;
        o.write(&format!("traces_{}.csv", which.as_str()), |w| write_traces_csv(states.step(), &indices, &traces, w))?;
    }
    let gaps: Vec<f64> = stream.x_gap.iter().map(|g| g.abs()).collect();
    let rho_s = spearman(&stream.spread, &gaps);
    o.write("neuron_summary.csv", |w| {
        writeln!(w, "spearman_spread_gap")?;
        writeln!(w, "{}", opt(rho_s))?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "[net]\nn = 24\np = 0.2\n[params]\nt_listen = 20.0\nt_train = 40.0\n[experiment]\nkind = \"{kind}\"\nt_predict = 30.0\nassess_window = 10.0\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn sweep_rows_and_determinism() {
        let cfg = ExperimentConfig::from_toml(
            "[net]\nn = 24\np = 0.2\n[params]\nt_listen = 20.0\nt_train = 40.0\n[task]\nrho_grid = [0.5, 1.0]\nx_cen_grid = [-5.5, 0.0]\n[experiment]\nkind = \"sweep\"\nt_predict = 30.0\nassess_window = 10.0\n",
        )
        .unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_experiment(&cfg, ExperimentKind::Sweep, d1.path(), false).unwrap();
        run_experiment(&cfg, ExperimentKind::Sweep, d2.path(), false).unwrap();
        let a = fs::read_to_string(d1.path().join("sweep.csv")).unwrap();
        assert_eq!(a, fs::read_to_string(d2.path().join("sweep.csv")).unwrap());
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("-5.5,0.5,"));
        assert!(lines[4].starts_with("0,1,"));
        let manifest = fs::read_to_string(d1.path().join("manifest.toml")).unwrap();
        assert!(manifest.contains("kind = \"sweep\"") && manifest.contains("[config.net]"));
        let echo = ExperimentConfig::load(&d1.path().join("config.toml")).unwrap();
        assert_eq!(echo.rho_values().unwrap(), vec![0.5, 1.0]);
    }

    #[test]
    fn kind_mismatch_is_a_config_error() {
        let d = tempfile::tempdir().unwrap();
        let e = run_experiment(&tiny("sweep", ""), ExperimentKind::Basin, d.path(), false).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn basin_writes_grid_and_catalog() {
        let d = tempfile::tempdir().unwrap();
        let cfg = tiny("basin", "nx = 3\nny = 3\n");
        let files = run_experiment(&cfg, ExperimentKind::Basin, d.path(), false).unwrap();
        for f in ["basin_grid.csv", "basin_catalog.csv", "basin_mirror.csv", "manifest.toml", "config.toml"] {
            assert!(files.iter().any(|x| x == f), "{f}");
            assert!(d.path().join(f).exists());
        }
        assert_eq!(fs::read_to_string(d.path().join("basin_grid.csv")).unwrap().lines().count(), 10);
    }

    #[test]
    fn remaining_recipes_run_on_a_tiny_net() {
        let cases = [
            ("track", "path = [0.5, 0.6, 0.05]\nsettle = 5.0\n", vec!["branch_A.csv", "branch_B.csv", "branches.csv"]),
            ("lyapunov", "lyapunov_transient = 1.0\nlyapunov_span = 20.0\n", vec!["lyapunov.csv"]),
            ("symmetry", "mirror_span = 5.0\n", vec!["symmetry.csv", "w2_elements.csv"]),
            ("itinerancy", "span = 20.0\nresidence_window = 2.0\n", vec!["residence.csv", "itinerancy_summary.csv", "itinerancy_trajectory.csv"]),
            ("neuron", "span = 2.0\nneurons = [1, 5, 24]\n", vec!["difference.csv", "traces_A.csv", "traces_B.csv", "neuron_summary.csv"]),
            ("floquet", "cycle_transient = 20.0\n", vec!["floquet_cycles.csv", "multipliers_A.csv", "crossings_B.csv"]),
        ];
        for (kind, extra, expect) in cases {
            let d = tempfile::tempdir().unwrap();
            let k = ExperimentKind::parse(kind).unwrap();
            run_experiment(&tiny(kind, extra), k, d.path(), false).unwrap_or_else(|e| panic!("{kind}: {e}"));
            for f in expect {
                assert!(d.path().join(f).exists(), "{kind}: {f}");
            }
        }
    }

    #[test]
    fn out_of_range_neuron_is_rejected() {
        let d = tempfile::tempdir().unwrap();
        let e = run_experiment(&tiny("neuron", "span = 1.0\nneurons = [25]\n"), ExperimentKind::Neuron, d.path(), false).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
