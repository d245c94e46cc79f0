//! Monodromy matrices and Floquet multipliers of closed-loop limit cycles.
//!
//! The monodromy matrix solves `Q' = J(x(t)) Q`, `Q(0) = I`, over exactly one
//! period. It is integrated with the same RK4 scheme as the flow, split into
//! column blocks that run in parallel against a shared reference orbit.

use std::io::Write;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

use crate::analysis::{estimate_period, Thresholds};
use crate::dynamics::{check_state, run_closed_loop, ClosedLoop, Rk4, RunOptions, TrainedReadout, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, sort_canonical};
use crate::netgen::Reservoir;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetOptions {
    /// Columns of `Q` integrated together.
    pub block_width: usize,
    /// Return tolerance; `None` means `1e-6 * sqrt(N)`.
    pub eps_ret: Option<f64>,
    /// Multipliers reported.
    pub top_k: usize,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self { block_width: 64, eps_ret: None, top_k: 5 }
    }
}

impl FloquetOptions {
    pub fn eps_ret(&self, n: usize) -> f64 {
        self.eps_ret.unwrap_or(1e-6 * (n as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct MonodromyResult {
    pub q: DMatrix<f64>,
    pub period: f64,
    /// All eigenvalues of `q`, by descending magnitude.
    pub multipliers: Vec<Complex<f64>>,
    /// `|x(T) - x(0)|` of the reference orbit.
    pub return_residual: f64,
    /// `integral_0^T tr J dt`, which equals `ln det Q` for the exact flow.
    pub trace_integral: f64,
}

impl MonodromyResult {
    /// `ln |det Q|` and the sign of `det Q`.
    pub fn log_det(&self) -> (f64, f64) {
        let lu = self.q.clone().lu();
        let u = lu.u();
        let mut log = 0.0;
        let mut sign = if lu.p().determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for i in 0..u.nrows() {
            let d = u[(i, i)];
            log += d.abs().ln();
            if d < 0.0 {
                sign = -sign;
            }
        }
        (log, sign)
    }
}

/// The step sizes that cover `[0, period]`: full steps then one partial step.
fn step_plan(period: f64, h: f64) -> Vec<f64> {
    let full = (period / h + 1e-9).floor() as usize;
    let mut plan = vec![h; full];
    let rest = period - full as f64 * h;
    if rest > 1e-12 * h {
        plan.push(rest);
    }
    plan
}

/// Monodromy matrix over one period from `x0`, for any vector field.
pub fn monodromy_field<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    period: f64,
    h: f64,
    opts: &FloquetOptions,
) -> Result<MonodromyResult> {
    let n = field.dim();
    if x0.len() != n {
        return Err(Error::Dimension("cycle state length differs from the field dimension".into()));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    let plan = step_plan(period, h);
    // Reference orbit: the state at the start of each step, plus tr J by RK4.
    let mut ws = Rk4::new(n);
    let mut starts = Vec::with_capacity(plan.len());
    let mut x = x0.to_vec();
    let mut trace_integral = 0.0;
    let mut stage = vec![vec![0.0; n]; 4];
    for (k, &dt) in plan.iter().enumerate() {
        starts.push(x.clone());
        stage_states(field, &x, dt, &mut stage);
        let tr: Vec<f64> = stage.iter().map(|s| field.jacobian_trace(s)).collect();
        trace_integral += dt / 6.0 * (tr[0] + 2.0 * tr[1] + 2.0 * tr[2] + tr[3]);
        ws.step(field, &mut x, dt);
        check_state(&x, k + 1)?;
    }
    let residual = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let eps = opts.eps_ret(n);
    if residual > eps {
        return Err(Error::NotOnCycle { residual, tolerance: eps });
    }
    let width = opts.block_width.clamp(1, n);
    let blocks: Vec<(usize, usize)> = (0..n).step_by(width).map(|c| (c, width.min(n - c))).collect();
    let parts: Vec<DMatrix<f64>> = blocks
        .par_iter()
        .map(|&(c0, w)| {
            let mut q = DMatrix::zeros(n, w);
            for j in 0..w {
                q[(c0 + j, j)] = 1.0;
            }
            let mut stage = vec![vec![0.0; n]; 4];
            let mut k = [(); 4].map(|_| DMatrix::zeros(n, w));
            let mut tmp = DMatrix::zeros(n, w);
            for (xs, &dt) in starts.iter().zip(&plan) {
                stage_states(field, xs, dt, &mut stage);
                field.jacobian_mat(&stage[0], &q, &mut k[0]);
                combine_into(&mut tmp, &q, 0.5 * dt, &k[0]);
                field.jacobian_mat(&stage[1], &tmp, &mut k[1]);
                combine_into(&mut tmp, &q, 0.5 * dt, &k[1]);
                field.jacobian_mat(&stage[2], &tmp, &mut k[2]);
                combine_into(&mut tmp, &q, dt, &k[2]);
                field.jacobian_mat(&stage[3], &tmp, &mut k[3]);
                let h6 = dt / 6.0;
                let (k1, k2, k3, k4) = (k[0].as_slice(), k[1].as_slice(), k[2].as_slice(), k[3].as_slice());
                for (i, v) in q.as_mut_slice().iter_mut().enumerate() {
                    *v += h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            q
        })
        .collect();
    let mut q = DMatrix::zeros(n, n);
    for (&(c0, w), part) in blocks.iter().zip(parts) {
        q.columns_mut(c0, w).copy_from(&part);
    }
    let mut multipliers = eigenvalues(&q)?;
    sort_canonical(&mut multipliers);
    Ok(MonodromyResult { q, period, multipliers, return_residual: residual, trace_integral })
}

/// `out = a + c * k`.
fn combine_into(out: &mut DMatrix<f64>, a: &DMatrix<f64>, c: f64, k: &DMatrix<f64>) {
    for ((o, x), y) in out.as_mut_slice().iter_mut().zip(a.as_slice()).zip(k.as_slice()) {
        *o = x + c * y;
    }
}

/// The four RK4 stage states of one step from `x`.
fn stage_states<F: VectorField + ?Sized>(field: &F, x: &[f64], h: f64, out: &mut [Vec<f64>]) {
    let n = x.len();
    let mut k = vec![0.0; n];
    out[0].copy_from_slice(x);
    for (s, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
        let (done, rest) = out.split_at_mut(s);
        field.eval(&done[s - 1], &mut k);
        for i in 0..n {
            rest[0][i] = x[i] + c * h * k[i];
        }
    }
}

/// Monodromy of the closed loop along the cycle through `cycle_state`.
pub fn monodromy(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    cycle_state: &[f64],
    period: f64,
    opts: &FloquetOptions,
) -> Result<MonodromyResult> {
    let cl = ClosedLoop::new(res, readout)?;
    monodromy_field(&cl, cycle_state, period, res.tau(), opts)
}

/// The `k` largest multipliers of `q` in canonical order.
pub fn floquet_multipliers(q: &DMatrix<f64>, k: usize) -> Result<Vec<Complex<f64>>> {
    let mut ev = eigenvalues(q)?;
    sort_canonical(&mut ev);
    ev.truncate(k);
    Ok(ev)
}

/// A point on a periodic orbit with its period.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleFix {
    pub state: Vec<f64>,
    pub period: f64,
    pub residual: f64,
}

/// Refines a period guess by first returns to the hyperplane through `x0`
/// normal to the flow. Each pass restarts from the previous return point, so
/// the point also converges onto an attracting cycle. Stops once the return
/// misses by at most `eps`, or fails after `max_passes`.
pub fn refine_period<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    guess: f64,
    h: f64,
    eps: f64,
    max_passes: usize,
) -> Result<CycleFix> {
    let n = field.dim();
    let mut ws = Rk4::new(n);
    let mut start = x0.to_vec();
    let mut last = f64::INFINITY;
    let mut f0 = vec![0.0; n];
    for _ in 0..max_passes {
        field.eval(&start, &mut f0);
        let side = |x: &[f64]| -> f64 { x.iter().zip(&start).zip(&f0).map(|((a, b), f)| (a - b) * f).sum() };
        let mut x = start.clone();
        let mut t = 0.0;
        let mut steps = 0usize;
        let limit = (3.0 * guess / h).ceil() as usize;
        let crossing = loop {
            let prev = x.clone();
            let s_prev = side(&prev);
            ws.step(field, &mut x, h);
            steps += 1;
            check_state(&x, steps)?;
            if t + h > 0.5 * guess && s_prev < 0.0 && side(&x) >= 0.0 {
                // Bisect on the length of the final step.
                let (mut lo, mut hi) = (0.0, h);
                let mut y = prev.clone();
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    y.copy_from_slice(&prev);
                    ws.step(field, &mut y, mid);
                    if side(&y) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                y.copy_from_slice(&prev);
                ws.step(field, &mut y, hi);
                break Some((t + hi, y));
            }
            t += h;
            if steps > limit {
                break None;
            }
        };
        let Some((period, y)) = crossing else {
            return Err(Error::NotOnCycle { residual: f64::INFINITY, tolerance: eps });
        };
        let residual = y.iter().zip(&start).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if residual <= eps {
            return Ok(CycleFix { state: start, period, residual });
        }
        last = residual;
        start = y;
    }
    Err(Error::NotOnCycle { residual: last, tolerance: eps })
}

/// Runs the closed loop from `r0` for `transient` time units, estimates the
/// period of the projected orbit and refines it to the return tolerance.
pub fn find_cycle(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    r0: &[f64],
    transient: f64,
    b: f64,
    opts: &FloquetOptions,
) -> Result<CycleFix> {
    let steps = (transient / res.tau()).round() as usize;
    let window = (40.0 / res.tau()).round() as usize;
    let run = run_closed_loop(res, readout, r0, steps, &RunOptions { record_from: steps.saturating_sub(window), ..Default::default() })?;
    let est = estimate_period(&run.projected, Thresholds::for_radius(b).eps_amp)
        .ok_or_else(|| Error::NotOnCycle { residual: f64::INFINITY, tolerance: opts.eps_ret(res.n()) })?;
    let cl = ClosedLoop::new(res, readout)?;
    refine_period(&cl, &run.final_state, est.period, res.tau(), opts.eps_ret(res.n()), 400)
}

/// Kind of multiplier leaving the unit circle between two parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// Real multiplier through +1.
    PlusOne,
    /// Real multiplier through -1.
    MinusOne,
    /// Complex-conjugate pair through the unit circle.
    ComplexPair,
}

impl CrossingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CrossingKind::PlusOne => "plus_one",
            CrossingKind::MinusOne => "minus_one",
            CrossingKind::ComplexPair => "complex_pair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub between: (f64, f64),
    pub kind: CrossingKind,
    /// Magnitudes before and after of the offending multiplier.
    pub magnitudes: (f64, f64),
}

/// Drops the trivial multiplier (the one nearest `1 + 0i`).
fn nontrivial(mults: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let trivial = mults
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - Complex::new(1.0, 0.0)).norm().total_cmp(&(b.1 - Complex::new(1.0, 0.0)).norm()))
        .map(|(i, _)| i);
    mults.iter().enumerate().filter(|(i, _)| Some(*i) != trivial).map(|(_, m)| *m).collect()
}

/// Scans a multiplier-versus-parameter table for nontrivial multipliers that
/// cross the unit circle between consecutive rows.
pub fn multiplier_crossings(table: &[(f64, Vec<Complex<f64>>)]) -> Vec<CrossingEvent> {
    let mut events = Vec::new();
    for pair in table.windows(2) {
        let (p0, m0) = (&pair[0].0, nontrivial(&pair[0].1));
        let (p1, m1) = (&pair[1].0, nontrivial(&pair[1].1));
        let top = |m: &[Complex<f64>]| m.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()));
        let (Some(a), Some(b)) = (top(&m0), top(&m1)) else { continue };
        if (a.norm() < 1.0) == (b.norm() < 1.0) {
            continue;
        }
        let z = if a.norm() >= 1.0 { a } else { b };
        let kind = if z.im.abs() > 1e-6 * z.norm() {
            CrossingKind::ComplexPair
        } else if z.re > 0.0 {
            CrossingKind::PlusOne
        } else {
            CrossingKind::MinusOne
        };
        events.push(CrossingEvent { between: (*p0, *p1), kind, magnitudes: (a.norm(), b.norm()) });
    }
    events
}

/// CSV `rho,i,re_mu,im_mu,abs_mu`, index `i` from 1.
pub fn write_multiplier_csv<W: Write>(table: &[(f64, Vec<Complex<f64>>)], mut w: W) -> Result<()> {
    writeln!(w, "rho,i,re_mu,im_mu,abs_mu")?;
    for (rho, mults) in table {
        for (i, m) in mults.iter().enumerate() {
            writeln!(w, "{rho},{},{},{},{}", i + 1, m.re, m.im, m.norm())?;
        }
    }
    Ok(())
}
