//! Listening/training split, the quadratic feature map, and ridge regression
//! for one or several target orbits.
//!
//! Training never keeps the full `2N x K` response matrix. States are fed into
//! [`NormalEquations`], which accumulates `G = X X^T` and `C = Y X^T` block by
//! block. Multifunctional training sums the per-orbit `(G, C)` pairs, which is
//! what concatenating `X_C = [X_A1, X_A2, ...]` amounts to.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;

use crate::dynamics::{drive_open_loop, Provenance, StateTrajectory, TrainedReadout};
use crate::error::{Error, Result};
use crate::netgen::{Reservoir, ReservoirNet};
use crate::taskgen::{generate_orbit, OrbitSpec, RotationMode, Trajectory};

/// Columns buffered before each rank-`k` update of the Gram matrix.
const BLOCK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingParams {
    pub t_listen: f64,
    pub t_train: f64,
    pub beta: f64,
    pub tau: f64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self { t_listen: 200.0, t_train: 400.0, beta: 1e-2, tau: 0.01 }
    }
}

fn steps_of(t: f64, tau: f64, what: &str) -> Result<usize> {
    let k = t / tau;
    if (k - k.round()).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("{what} = {t} is not a multiple of tau = {tau}")));
    }
    Ok(k.round() as usize)
}

impl TrainingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_listen > 0.0 && self.t_listen < self.t_train && self.t_train.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < t_listen < t_train, got {} and {}",
                self.t_listen, self.t_train
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be non-negative, got {}", self.beta)));
        }
        steps_of(self.t_listen, self.tau, "t_listen")?;
        steps_of(self.t_train, self.tau, "t_train")?;
        Ok(())
    }

    /// Index of the first training column, `t_listen / tau`.
    pub fn l_star(&self) -> usize {
        (self.t_listen / self.tau).round() as usize
    }

    /// Index of the last training column, `t_train / tau`.
    pub fn t_star(&self) -> usize {
        (self.t_train / self.tau).round() as usize
    }

    /// Columns per orbit.
    pub fn columns(&self) -> usize {
        self.t_star() - self.l_star() + 1
    }
}

/// `q(r) = (r, r∘r)`.
pub fn feature_map(r: &[f64]) -> Vec<f64> {
    let mut q = Vec::with_capacity(2 * r.len());
    q.extend_from_slice(r);
    q.extend(r.iter().map(|v| v * v));
    q
}

/// Explicit response and input matrices for one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl DataMatrices {
    pub fn k(&self) -> usize {
        self.x.ncols()
    }
}

/// Columns `l*..=t*` of `q(r)` and `u`.
pub fn assemble_data_matrices(states: &StateTrajectory, inputs: &Trajectory, params: &TrainingParams) -> Result<DataMatrices> {
    params.validate()?;
    let (lo, hi) = (params.l_star(), params.t_star());
    let have = states.len().min(inputs.len());
    if have <= hi {
        return Err(Error::TooShort { needed: hi + 1, have });
    }
    let n = states.dim();
    let k = hi - lo + 1;
    let mut x = DMatrix::zeros(2 * n, k);
    let mut y = DMatrix::zeros(inputs.dim(), k);
    for (c, i) in (lo..=hi).enumerate() {
        x.column_mut(c).copy_from_slice(&feature_map(states.sample(i)));
        y.column_mut(c).copy_from_slice(inputs.sample(i));
    }
    Ok(DataMatrices { x, y })
}

/// Streaming accumulator for `G = X X^T` and `C = Y X^T`.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    g: DMatrix<f64>,
    c: DMatrix<f64>,
    columns: usize,
    // Pending columns.
    xb: DMatrix<f64>,
    yb: DMatrix<f64>,
    filled: usize,
}

impl NormalEquations {
    pub fn new(features: usize, outputs: usize) -> Self {
        Self {
            g: DMatrix::zeros(features, features),
            c: DMatrix::zeros(outputs, features),
            columns: 0,
            xb: DMatrix::zeros(features, BLOCK),
            yb: DMatrix::zeros(outputs, BLOCK),
            filled: 0,
        }
    }

    /// Adds the column `q(r)` with target `u`.
    pub fn push_state(&mut self, r: &[f64], u: &[f64]) {
        let n = r.len();
        let mut col = self.xb.column_mut(self.filled);
        for (j, &v) in r.iter().enumerate() {
            col[j] = v;
            col[n + j] = v * v;
        }
        self.yb.column_mut(self.filled).copy_from_slice(u);
        self.filled += 1;
        self.columns += 1;
        if self.filled == BLOCK {
            self.flush();
        }
    }

    /// Adds every column of explicit data matrices.
    pub fn push_matrices(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) {
        self.flush();
        self.g.gemm(1.0, x, &x.transpose(), 1.0);
        self.c.gemm(1.0, y, &x.transpose(), 1.0);
        self.columns += x.ncols();
    }

    fn flush(&mut self) {
        if self.filled == 0 {
            return;
        }
        let xb = self.xb.columns(0, self.filled);
        let yb = self.yb.columns(0, self.filled);
        // gemm against an explicit transpose is far faster than gemm_tr here.
        let xt = xb.transpose();
        self.g.gemm(1.0, &xb, &xt, 1.0);
        self.c.gemm(1.0, &yb, &xt, 1.0);
        self.filled = 0;
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    /// Adds another accumulator's sums into this one.
    pub fn absorb(&mut self, mut other: NormalEquations) {
        self.flush();
        other.flush();
        self.g += &other.g;
        self.c += &other.c;
        self.columns += other.columns;
    }

    pub fn gram(&mut self) -> &DMatrix<f64> {
        self.flush();
        &self.g
    }

    pub fn cross(&mut self) -> &DMatrix<f64> {
        self.flush();
        &self.c
    }

    /// `W = C (G + beta I)^{-1}` by Cholesky factorization.
    pub fn solve(&mut self, beta: f64) -> Result<DMatrix<f64>> {
        self.flush();
        solve_normal(&self.g, &self.c, beta)
    }
}

fn solve_normal(g: &DMatrix<f64>, c: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be non-negative, got {beta}")));
    }
    let p = g.nrows();
    let mut a = g.clone();
    for i in 0..p {
        a[(i, i)] += beta;
    }
    let chol = Cholesky::new(a).ok_or_else(|| {
        let rank = numerical_rank(g);
        Error::Singular(format!("normal matrix is not positive definite: rank {rank} of {p} at beta = {beta}"))
    })?;
    let l = chol.l_dirty();
    let (lo, hi) = (0..p).map(|i| l[(i, i)]).fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo <= 0.0 || !(hi / lo).is_finite() {
        return Err(Error::Singular(format!("normal matrix is numerically singular at beta = {beta}")));
    }
    log::debug!("ridge solve: p = {p}, Cholesky condition estimate {:.3e}", (hi / lo).powi(2));
    // A is symmetric, so W A = C is A W^T = C^T.
    let wt = chol.solve(&c.transpose());
    if wt.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(format!("ridge solution is not finite at beta = {beta}")));
    }
    Ok(wt.transpose())
}

fn numerical_rank(g: &DMatrix<f64>) -> usize {
    let ev = g.clone().symmetric_eigenvalues();
    let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = top * g.nrows() as f64 * f64::EPSILON;
    ev.iter().filter(|v| v.abs() > tol).count()
}

/// `Y X^T (X X^T + beta I)^{-1}`.
pub fn ridge_solve(x_c: &DMatrix<f64>, y_c: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    if x_c.ncols() != y_c.ncols() {
        return Err(Error::Dimension(format!("X has {} columns, Y has {}", x_c.ncols(), y_c.ncols())));
    }
    let mut ne = NormalEquations::new(x_c.nrows(), y_c.nrows());
    ne.push_matrices(x_c, y_c);
    ne.solve(beta)
}

/// Normal equations and end state of one driven orbit.
#[derive(Debug, Clone)]
pub struct OrbitFit {
    pub normal: NormalEquations,
    /// `r(t_train)`, the closed-loop starting point for this orbit.
    pub final_state: Vec<f64>,
}

/// Drives the open loop from `r(0) = 0` with the orbit and accumulates columns
/// `l*..=t*`.
pub fn fit_orbit(res: &Reservoir<'_>, spec: &OrbitSpec, params: &TrainingParams) -> Result<OrbitFit> {
    params.validate()?;
    if (spec.tau - params.tau).abs() > 1e-12 * params.tau || (res.tau() - params.tau).abs() > 1e-12 * params.tau {
        return Err(Error::InvalidParameter("orbit, net and training steps differ".into()));
    }
    let u = generate_orbit(spec, params.t_star())?;
    let lo = params.l_star();
    let mut normal = NormalEquations::new(2 * res.n(), u.dim());
    let final_state = drive_open_loop(res, &u, &vec![0.0; res.n()], |i, r| {
        if i >= lo {
            normal.push_state(r, u.sample(i));
        }
    })?;
    Ok(OrbitFit { normal, final_state })
}

/// Trains one readout on all orbits at once. Returns the readout and each
/// orbit's `r(t_train)` in input order.
pub fn train_multifunctional(
    net: &ReservoirNet,
    rho: f64,
    orbits: &[OrbitSpec],
    params: &TrainingParams,
) -> Result<(TrainedReadout, Vec<Vec<f64>>)> {
    if orbits.is_empty() {
        return Err(Error::InvalidParameter("no orbits to train on".into()));
    }
    let res = net.at_rho(rho)?;
    train_on(&res, orbits, params)
}

/// As [`train_multifunctional`] for an already scaled reservoir.
pub fn train_on(res: &Reservoir<'_>, orbits: &[OrbitSpec], params: &TrainingParams) -> Result<(TrainedReadout, Vec<Vec<f64>>)> {
    let fits: Vec<OrbitFit> = orbits.par_iter().map(|o| fit_orbit(res, o, params)).collect::<Result<_>>()?;
    let mut finals = Vec::with_capacity(fits.len());
    let mut total: Option<NormalEquations> = None;
    for fit in fits {
        finals.push(fit.final_state);
        match total.as_mut() {
            None => total = Some(fit.normal),
            Some(t) => t.absorb(fit.normal),
        }
    }
    let w = total.expect("at least one orbit").solve(params.beta)?;
    let readout = TrainedReadout::new(w, provenance_for(res, orbits, params))?;
    Ok((readout, finals))
}

fn provenance_for(res: &Reservoir<'_>, orbits: &[OrbitSpec], params: &TrainingParams) -> Provenance {
    let mode = match orbits {
        [a, b] => Some(if a.winding() == b.winding() { RotationMode::Same } else { RotationMode::Opposite }),
        _ => None,
    };
    Provenance {
        rho: res.rho,
        x_cen: orbits[0].x_cen.abs(),
        mode,
        net_seed: res.net.params.seed,
        beta: params.beta,
        orbits: orbits.to_vec(),
    }
}

/// `|r(t_listen) - r'(t_listen)|` for two random starting states driven by the
/// same orbit, a check that the listening stage washes out initial conditions.
pub fn washout_gap(res: &Reservoir<'_>, spec: &OrbitSpec, params: &TrainingParams, seed: u64) -> Result<f64> {
    use crate::rng::{open_unit, stream, Stream};
    params.validate()?;
    let u = generate_orbit(spec, params.l_star())?;
    let mut rng = stream(seed, Stream::States);
    let mut starts = Vec::new();
    for _ in 0..2 {
        starts.push((0..res.n()).map(|_| open_unit(&mut rng)).collect::<Vec<f64>>());
    }
    let a = drive_open_loop(res, &u, &starts[0], |_, _| {})?;
    let b = drive_open_loop(res, &u, &starts[1], |_, _| {})?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}
