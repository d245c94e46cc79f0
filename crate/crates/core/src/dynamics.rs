//! Fixed-step RK4 integration of the open-loop (input-driven) and closed-loop
//! (autonomous) reservoir flows, the quadratic readout, and the closed-loop
//! Jacobian.
//!
//! Open loop: `r' = gamma * (-r + tanh(M r + sigma W_in u(t)))`.
//! Closed loop: `r' = gamma * (-r + tanh(M r + sigma W_in W_out q(r)))` with
//! `q(r) = (r, r∘r)`.

use std::io::{BufRead, Write};
use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::netgen::Reservoir;
use crate::taskgen::{OrbitSpec, RotationMode, Trajectory};

/// States beyond this magnitude abort an integration.
pub const DIVERGENCE_BOUND: f64 = 10.0;

/// An autonomous vector field with its derivative, integrable by [`Rk4`].
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]);

    /// Jacobian-vector product `J(x) v`.
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]);

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;

    /// `f(x)` and `J(x) v` together; override when they share work.
    fn eval_with_jvp(&self, x: &[f64], v: &[f64], f_out: &mut [f64], jv_out: &mut [f64]) {
        self.eval(x, f_out);
        self.jvp(x, v, jv_out);
    }

    /// Trace of the Jacobian.
    fn jacobian_trace(&self, x: &[f64]) -> f64 {
        self.jacobian(x).trace()
    }

    /// `out = J(x) q` for a block of tangent vectors.
    fn jacobian_mat(&self, x: &[f64], q: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        out.gemm(1.0, &self.jacobian(x), q, 0.0);
    }
}

/// Linear test system `x' = A x`.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub a: DMatrix<f64>,
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.jvp(x, x, out);
    }

    fn jvp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|j| self.a[(i, j)] * v[j]).sum();
        }
    }

    fn jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// Classic fourth-order Runge–Kutta stepper with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k: [Vec<f64>; 4],
    l: [Vec<f64>; 4],
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self { k: [z(), z(), z(), z()], l: [z(), z(), z(), z()], xs: z(), vs: z() }
    }

    pub fn step<F: VectorField + ?Sized>(&mut self, f: &F, x: &mut [f64], h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        let xs = &mut self.xs;
        f.eval(x, k1);
        axpy_into(xs, x, 0.5 * h, k1);
        f.eval(xs, k2);
        axpy_into(xs, x, 0.5 * h, k2);
        f.eval(xs, k3);
        axpy_into(xs, x, h, k3);
        f.eval(xs, k4);
        combine(x, h, k1, k2, k3, k4);
    }

    /// One step of the flow and its variational equation `v' = J(x(t)) v`.
    pub fn step_with_tangent<F: VectorField + ?Sized>(&mut self, f: &F, x: &mut [f64], v: &mut [f64], h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        let [l1, l2, l3, l4] = &mut self.l;
        let (xs, vs) = (&mut self.xs, &mut self.vs);
        f.eval_with_jvp(x, v, k1, l1);
        axpy_into(xs, x, 0.5 * h, k1);
        axpy_into(vs, v, 0.5 * h, l1);
        f.eval_with_jvp(xs, vs, k2, l2);
        axpy_into(xs, x, 0.5 * h, k2);
        axpy_into(vs, v, 0.5 * h, l2);
        f.eval_with_jvp(xs, vs, k3, l3);
        axpy_into(xs, x, h, k3);
        axpy_into(vs, v, h, l3);
        f.eval_with_jvp(xs, vs, k4, l4);
        combine(x, h, k1, k2, k3, k4);
        combine(v, h, l1, l2, l3, l4);
    }
}

#[inline]
fn axpy_into(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

#[inline]
fn combine(x: &mut [f64], h: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) {
    let h6 = h / 6.0;
    for i in 0..x.len() {
        x[i] += h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

pub(crate) fn check_state(r: &[f64], step: usize) -> Result<()> {
    if r.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(Error::Diverged { step })
    }
}

/// Reservoir state trajectory in `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory(Trajectory);

impl StateTrajectory {
    pub fn new(inner: Trajectory) -> Self {
        Self(inner)
    }

    pub fn into_inner(self) -> Trajectory {
        self.0
    }
}

impl Deref for StateTrajectory {
    type Target = Trajectory;

    fn deref(&self) -> &Trajectory {
        &self.0
    }
}

/// Where a readout came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub rho: f64,
    pub x_cen: f64,
    pub mode: Option<RotationMode>,
    pub net_seed: u64,
    pub beta: f64,
    pub orbits: Vec<OrbitSpec>,
}

/// `D x 2N` readout `W_out = [W1 | W2]` acting on `q(r) = (r, r∘r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedReadout {
    w_out: DMatrix<f64>,
    pub provenance: Provenance,
}

impl TrainedReadout {
    pub fn new(w_out: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if w_out.ncols() % 2 != 0 || w_out.ncols() == 0 {
            return Err(Error::Dimension(format!("readout needs an even column count, got {}", w_out.ncols())));
        }
        Ok(Self { w_out, provenance })
    }

    /// A readout with no provenance, for synthetic experiments.
    pub fn from_matrix(w_out: DMatrix<f64>) -> Result<Self> {
        let provenance = Provenance { rho: f64::NAN, x_cen: f64::NAN, mode: None, net_seed: 0, beta: f64::NAN, orbits: vec![] };
        Self::new(w_out, provenance)
    }

    pub fn w_out(&self) -> &DMatrix<f64> {
        &self.w_out
    }

    pub fn n(&self) -> usize {
        self.w_out.ncols() / 2
    }

    pub fn d(&self) -> usize {
        self.w_out.nrows()
    }

    /// Linear part, the first N columns.
    pub fn w1(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.w_out.columns(0, self.n())
    }

    /// Square part, the last N columns.
    pub fn w2(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.w_out.columns(self.n(), self.n())
    }

    /// The same readout with the square part set to zero.
    pub fn without_square(&self) -> Self {
        let mut w = self.w_out.clone();
        let n = self.n();
        w.columns_mut(n, n).fill(0.0);
        Self { w_out: w, provenance: self.provenance.clone() }
    }

    /// `out = W1 r + W2 r∘r`.
    pub fn apply_into(&self, r: &[f64], out: &mut [f64]) {
        let d = self.d();
        let n = self.n();
        let w = self.w_out.as_slice();
        out[..d].fill(0.0);
        for (j, &rj) in r.iter().enumerate().take(n) {
            let sq = rj * rj;
            let lin = &w[j * d..(j + 1) * d];
            let quad = &w[(n + j) * d..(n + j + 1) * d];
            for k in 0..d {
                out[k] += lin[k] * rj + quad[k] * sq;
            }
        }
    }

    /// Text format: `#`-prefixed provenance header, a `shape D 2N` line, then
    /// one row of `W_out` per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.provenance;
        writeln!(w, "# multirc readout v1")?;
        writeln!(w, "# rho {}", p.rho)?;
        writeln!(w, "# x_cen {}", p.x_cen)?;
        writeln!(w, "# mode {}", p.mode.map(|m| m.as_str()).unwrap_or("none"))?;
        writeln!(w, "# seed {}", p.net_seed)?;
        writeln!(w, "# beta {}", p.beta)?;
        for o in &p.orbits {
            writeln!(w, "# orbit {} {} {} {} {}", o.b_x, o.b_y, o.x_cen, o.y_cen, o.tau)?;
        }
        writeln!(w, "shape {} {}", self.w_out.nrows(), self.w_out.ncols())?;
        for i in 0..self.w_out.nrows() {
            let row: Vec<String> = self.w_out.row(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut prov = Provenance { rho: f64::NAN, x_cen: f64::NAN, mode: None, net_seed: 0, beta: f64::NAN, orbits: vec![] };
        let mut shape: Option<(usize, usize)> = None;
        let mut values = Vec::new();
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let ln = k + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(h) = t.strip_prefix('#') {
                let parts: Vec<&str> = h.split_whitespace().collect();
                let num = |i: usize| -> Result<f64> {
                    parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, format!("bad header `{t}`")))
                };
                match parts.first().copied() {
                    Some("rho") => prov.rho = num(1)?,
                    Some("x_cen") => prov.x_cen = num(1)?,
                    Some("beta") => prov.beta = num(1)?,
                    Some("seed") => {
                        prov.net_seed = parts.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, "bad seed".into()))?
                    }
                    Some("mode") => prov.mode = parts.get(1).and_then(|s| RotationMode::parse(s)),
                    Some("orbit") => prov.orbits.push(OrbitSpec {
                        b_x: num(1)?,
                        b_y: num(2)?,
                        x_cen: num(3)?,
                        y_cen: num(4)?,
                        tau: num(5)?,
                    }),
                    _ => {}
                }
                continue;
            }
            if let Some(s) = t.strip_prefix("shape") {
                let dims: Vec<usize> = s.split_whitespace().filter_map(|v| v.parse().ok()).collect();
                if dims.len() != 2 {
                    return Err(perr(ln, format!("bad shape line `{t}`")));
                }
                shape = Some((dims[0], dims[1]));
                continue;
            }
            let (_, cols) = shape.ok_or_else(|| perr(ln, "values before shape line".into()))?;
            let row: Vec<f64> = t
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| perr(ln, format!("bad number `{v}`"))))
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(perr(ln, format!("expected {cols} values, got {}", row.len())));
            }
            values.extend(row);
        }
        let (rows, cols) = shape.ok_or_else(|| perr(0, "missing shape line".into()))?;
        if values.len() != rows * cols {
            return Err(perr(0, format!("expected {rows} rows of values")));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, &values), prov)
    }
}

/// `W1 r + W2 r∘r`.
pub fn readout_apply(readout: &TrainedReadout, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; readout.d()];
    readout.apply_into(r, &mut out);
    out
}

/// Input-driven reservoir flow.
#[derive(Debug, Clone, Copy)]
pub struct OpenLoop<'r, 'a> {
    pub res: &'r Reservoir<'a>,
}

impl OpenLoop<'_, '_> {
    /// `out = f(r, u)`.
    pub fn eval(&self, r: &[f64], u: &[f64], out: &mut [f64]) {
        let gamma = self.res.gamma();
        let sigma = self.res.sigma();
        let w_in = self.res.net.w_in();
        self.res.adjacency().mul_vec(r, out);
        for i in 0..out.len() {
            let (c, w) = w_in.entry(i);
            out[i] = gamma * (-r[i] + (out[i] + sigma * w * u[c]).tanh());
        }
    }

    /// One RK4 step with stage inputs `u0`, `(u0 + u1) / 2`, `u1`.
    pub fn step(&self, ws: &mut Rk4, r: &mut [f64], u0: &[f64], u1: &[f64], h: f64) {
        let mid: Vec<f64> = u0.iter().zip(u1).map(|(a, b)| (a + b) / 2.0).collect();
        let [k1, k2, k3, k4] = &mut ws.k;
        let xs = &mut ws.xs;
        self.eval(r, u0, k1);
        axpy_into(xs, r, 0.5 * h, k1);
        self.eval(xs, &mid, k2);
        axpy_into(xs, r, 0.5 * h, k2);
        self.eval(xs, &mid, k3);
        axpy_into(xs, r, h, k3);
        self.eval(xs, u1, k4);
        combine(r, h, k1, k2, k3, k4);
    }
}

fn check_open_loop_input(res: &Reservoir<'_>, input: &Trajectory, r0: &[f64]) -> Result<()> {
    if input.dim() != res.d() {
        return Err(Error::Dimension(format!("input dimension {} differs from net D = {}", input.dim(), res.d())));
    }
    if r0.len() != res.n() {
        return Err(Error::Dimension(format!("initial state has length {}, expected {}", r0.len(), res.n())));
    }
    if (input.step() - res.tau()).abs() > 1e-12 * res.tau() {
        return Err(Error::InvalidParameter(format!(
            "input step {} differs from integration step {}",
            input.step(),
            res.tau()
        )));
    }
    if r0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial state is not finite".into()));
    }
    Ok(())
}

/// Drives the open loop with `input`, calling `visit(i, r[i])` for every sample
/// including `i = 0`. Returns the final state.
pub fn drive_open_loop(
    res: &Reservoir<'_>,
    input: &Trajectory,
    r0: &[f64],
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    check_open_loop_input(res, input, r0)?;
    let ol = OpenLoop { res };
    let mut ws = Rk4::new(res.n());
    let mut r = r0.to_vec();
    visit(0, &r);
    for i in 1..input.len() {
        ol.step(&mut ws, &mut r, input.sample(i - 1), input.sample(i), res.tau());
        check_state(&r, i)?;
        visit(i, &r);
    }
    Ok(r)
}

/// Open-loop response to `input`, one state per input sample.
pub fn integrate_open_loop(res: &Reservoir<'_>, input: &Trajectory, r0: &[f64]) -> Result<StateTrajectory> {
    let mut states = Trajectory::with_capacity(res.n(), res.tau(), input.len());
    drive_open_loop(res, input, r0, |_, r| states.push(r))?;
    Ok(StateTrajectory(states))
}

/// Drives the open loop with a constant input for `n_steps`. With
/// `stationary_tol`, stops early once a step changes no component by more than
/// the tolerance. Returns the final state and the number of steps taken.
pub fn drive_constant(
    res: &Reservoir<'_>,
    u: &[f64],
    r0: &[f64],
    n_steps: usize,
    stationary_tol: Option<f64>,
) -> Result<(Vec<f64>, usize)> {
    let ol = OpenLoop { res };
    let mut ws = Rk4::new(res.n());
    let mut r = r0.to_vec();
    let mut prev = r.clone();
    for i in 1..=n_steps {
        ol.step(&mut ws, &mut r, u, u, res.tau());
        check_state(&r, i)?;
        if let Some(tol) = stationary_tol {
            let moved = r.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved <= tol {
                return Ok((r, i));
            }
            prev.copy_from_slice(&r);
        }
    }
    Ok((r, n_steps))
}

/// Autonomous closed-loop flow with the readout fed back as input.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoop<'r, 'a> {
    pub res: &'r Reservoir<'a>,
    pub readout: &'r TrainedReadout,
}

impl<'r, 'a> ClosedLoop<'r, 'a> {
    pub fn new(res: &'r Reservoir<'a>, readout: &'r TrainedReadout) -> Result<Self> {
        if readout.n() != res.n() || readout.d() != res.d() {
            return Err(Error::Dimension(format!(
                "readout is {}x{}, net needs {}x{}",
                readout.d(),
                2 * readout.n(),
                res.d(),
                2 * res.n()
            )));
        }
        Ok(Self { res, readout })
    }

    /// Pre-activation `a = M r + sigma W_in W_out q(r)` written into `out`.
    fn activation(&self, r: &[f64], out: &mut [f64]) {
        let d = self.res.d();
        let mut ybuf = [0.0f64; 8];
        let mut yvec;
        let y: &mut [f64] = if d <= 8 {
            &mut ybuf[..d]
        } else {
            yvec = vec![0.0; d];
            &mut yvec
        };
        self.readout.apply_into(r, y);
        self.res.adjacency().mul_vec(r, out);
        let sigma = self.res.sigma();
        let w_in = self.res.net.w_in();
        for (i, o) in out.iter_mut().enumerate() {
            let (c, w) = w_in.entry(i);
            *o += sigma * w * y[c];
        }
    }

    /// `J(r) v` given precomputed `1 - tanh^2(a)`.
    fn jvp_with_slope(&self, r: &[f64], slope: &[f64], v: &[f64], out: &mut [f64]) {
        let d = self.res.d();
        let n = self.res.n();
        let w = self.readout.w_out.as_slice();
        let mut z = vec![0.0; d];
        for j in 0..n {
            let lin = &w[j * d..(j + 1) * d];
            let quad = &w[(n + j) * d..(n + j + 1) * d];
            let vj = v[j];
            let rv = 2.0 * r[j] * vj;
            for k in 0..d {
                z[k] += lin[k] * vj + quad[k] * rv;
            }
        }
        self.res.adjacency().mul_vec(v, out);
        let gamma = self.res.gamma();
        let sigma = self.res.sigma();
        let w_in = self.res.net.w_in();
        for i in 0..n {
            let (c, wi) = w_in.entry(i);
            out[i] = gamma * (-v[i] + slope[i] * (out[i] + sigma * wi * z[c]));
        }
    }
}

impl VectorField for ClosedLoop<'_, '_> {
    fn dim(&self) -> usize {
        self.res.n()
    }

    fn eval(&self, r: &[f64], out: &mut [f64]) {
        self.activation(r, out);
        let gamma = self.res.gamma();
        for (o, &ri) in out.iter_mut().zip(r) {
            *o = gamma * (-ri + o.tanh());
        }
    }

    fn jvp(&self, r: &[f64], v: &[f64], out: &mut [f64]) {
        let mut f = vec![0.0; r.len()];
        self.eval_with_jvp(r, v, &mut f, out);
    }

    fn eval_with_jvp(&self, r: &[f64], v: &[f64], f_out: &mut [f64], jv_out: &mut [f64]) {
        self.activation(r, f_out);
        let gamma = self.res.gamma();
        let mut slope = vec![0.0; r.len()];
        for i in 0..r.len() {
            let t = f_out[i].tanh();
            slope[i] = 1.0 - t * t;
            f_out[i] = gamma * (-r[i] + t);
        }
        self.jvp_with_slope(r, &slope, v, jv_out);
    }

    fn jacobian(&self, r: &[f64]) -> DMatrix<f64> {
        let n = self.res.n();
        let d = self.res.d();
        let mut a = vec![0.0; n];
        self.activation(r, &mut a);
        let gamma = self.res.gamma();
        let sigma = self.res.sigma();
        let w_in = self.res.net.w_in();
        let w = &self.readout.w_out;
        // feedback[(k, j)] = W1[k, j] + 2 W2[k, j] r_j
        let mut feedback = DMatrix::zeros(d, n);
        for j in 0..n {
            for k in 0..d {
                feedback[(k, j)] = w[(k, j)] + 2.0 * w[(k, n + j)] * r[j];
            }
        }
        let mut jac = self.res.adjacency().to_dense();
        for i in 0..n {
            let (c, wi) = w_in.entry(i);
            let t = a[i].tanh();
            let s = 1.0 - t * t;
            for j in 0..n {
                let e = jac[(i, j)] + sigma * wi * feedback[(c, j)];
                jac[(i, j)] = gamma * s * e;
            }
            jac[(i, i)] -= gamma;
        }
        jac
    }

    fn jacobian_trace(&self, r: &[f64]) -> f64 {
        let n = self.res.n();
        let mut a = vec![0.0; n];
        self.activation(r, &mut a);
        let diag = self.res.adjacency().diagonal();
        let (gamma, sigma) = (self.res.gamma(), self.res.sigma());
        let w_in = self.res.net.w_in();
        let w = &self.readout.w_out;
        (0..n)
            .map(|i| {
                let (c, wi) = w_in.entry(i);
                let t = a[i].tanh();
                let fb = w[(c, i)] + 2.0 * w[(c, n + i)] * r[i];
                gamma * (-1.0 + (1.0 - t * t) * (diag[i] + sigma * wi * fb))
            })
            .sum()
    }

    fn jacobian_mat(&self, r: &[f64], q: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let n = self.res.n();
        let d = self.res.d();
        let mut a = vec![0.0; n];
        self.activation(r, &mut a);
        let w = &self.readout.w_out;
        let feedback = DMatrix::from_fn(d, n, |k, j| w[(k, j)] + 2.0 * w[(k, n + j)] * r[j]);
        let fq = &feedback * q;
        let (gamma, sigma) = (self.res.gamma(), self.res.sigma());
        let w_in = self.res.net.w_in();
        let m = self.res.adjacency();
        for c in 0..q.ncols() {
            let mut col = out.column_mut(c);
            m.mul_vec(q.column(c).as_slice(), col.as_mut_slice());
            for i in 0..n {
                let (k, wi) = w_in.entry(i);
                let t = a[i].tanh();
                col[i] = gamma * (-q[(i, c)] + (1.0 - t * t) * (col[i] + sigma * wi * fq[(k, c)]));
            }
        }
    }
}

/// Dense closed-loop Jacobian
/// `gamma * (-I + diag(1 - tanh^2 a) (M + sigma W_in (W1 + 2 W2 diag r)))`.
pub fn closed_loop_jacobian(res: &Reservoir<'_>, readout: &TrainedReadout, r: &[f64]) -> Result<DMatrix<f64>> {
    let cl = ClosedLoop::new(res, readout)?;
    if r.len() != res.n() {
        return Err(Error::Dimension("state length differs from N".into()));
    }
    Ok(cl.jacobian(r))
}

/// Early termination once the closed loop has come to rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleCheck {
    /// Steps between comparisons.
    pub every: usize,
    /// Largest component change over `every` steps that counts as at rest. The
    /// change must also be at most half the previous interval's, so a slow
    /// passage that is speeding up never counts.
    pub tol: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep every `k`-th state (and the last one).
    pub state_stride: Option<usize>,
    /// First step whose projection is recorded.
    pub record_from: usize,
    pub settle: Option<SettleCheck>,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub final_state: Vec<f64>,
    /// Projected samples for steps `record_from..=steps`.
    pub projected: Trajectory,
    pub states: Option<StateTrajectory>,
    /// Steps actually integrated.
    pub steps: usize,
    /// Stopped early by the settle check.
    pub settled: bool,
}

/// Integrates the closed loop, calling `visit(i, r[i], u_hat[i])` for every step
/// `i = 0..=n`. Stops early when the settle check fires. Returns the final state,
/// the number of steps taken and whether it settled.
pub fn visit_closed_loop<F: VectorField + ?Sized>(
    field: &F,
    readout: &TrainedReadout,
    r0: &[f64],
    n_steps: usize,
    h: f64,
    settle: Option<SettleCheck>,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> Result<(Vec<f64>, usize, bool)> {
    if r0.len() != field.dim() {
        return Err(Error::Dimension(format!("initial state has length {}, expected {}", r0.len(), field.dim())));
    }
    check_state(r0, 0)?;
    let mut ws = Rk4::new(field.dim());
    let mut r = r0.to_vec();
    let mut u = vec![0.0; readout.d()];
    readout.apply_into(&r, &mut u);
    visit(0, &r, &u);
    let mut anchor = r.clone();
    let mut last_moved = f64::INFINITY;
    for i in 1..=n_steps {
        ws.step(field, &mut r, h);
        check_state(&r, i)?;
        readout.apply_into(&r, &mut u);
        visit(i, &r, &u);
        if let Some(s) = settle {
            if i % s.every == 0 {
                let moved = r.iter().zip(&anchor).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if moved <= s.tol && moved <= 0.5 * last_moved {
                    return Ok((r, i, true));
                }
                last_moved = moved;
                anchor.copy_from_slice(&r);
            }
        }
    }
    Ok((r, n_steps, false))
}

pub fn run_closed_loop(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    r0: &[f64],
    n_steps: usize,
    opts: &RunOptions,
) -> Result<ClosedLoopRun> {
    let cl = ClosedLoop::new(res, readout)?;
    let d = res.d();
    let record_from = opts.record_from.min(n_steps);
    let mut projected = Trajectory::with_capacity(d, res.tau(), n_steps + 1 - record_from);
    let mut states = opts.state_stride.map(|_| Trajectory::with_capacity(res.n(), res.tau(), 0));
    if let (Some(s), Some(st)) = (opts.state_stride, states.as_mut()) {
        if s != 1 {
            *st = Trajectory::with_capacity(res.n(), res.tau() * s as f64, 0);
        }
    }
    let stride = opts.state_stride.unwrap_or(1).max(1);
    let (final_state, steps, settled) = visit_closed_loop(&cl, readout, r0, n_steps, res.tau(), opts.settle, |i, r, u| {
        if i >= record_from {
            projected.push(u);
        }
        if let Some(st) = states.as_mut() {
            if i % stride == 0 {
                st.push(r);
            }
        }
    })?;
    Ok(ClosedLoopRun { final_state, projected, states: states.map(StateTrajectory), steps, settled })
}

/// Full closed-loop run: every state and its projection.
pub fn integrate_closed_loop(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    r0: &[f64],
    n_steps: usize,
) -> Result<(StateTrajectory, Trajectory)> {
    let run = run_closed_loop(res, readout, r0, n_steps, &RunOptions { state_stride: Some(1), ..Default::default() })?;
    Ok((run.states.expect("states requested"), run.projected))
}

fn axis_names(d: usize) -> Vec<String> {
    match d {
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (1..=d).map(|k| format!("u_{k}")).collect(),
    }
}

/// CSV with header `t,x,y` (or `t,u_1..u_D` for other dimensions).
pub fn write_projected_csv<W: Write>(traj: &Trajectory, t0: f64, mut w: W) -> Result<()> {
    writeln!(w, "t,{}", axis_names(traj.dim()).join(","))?;
    write_rows(traj, t0, &mut w)
}

/// CSV with header `t,r_1..r_N`.
pub fn write_state_csv<W: Write>(states: &StateTrajectory, t0: f64, mut w: W) -> Result<()> {
    let names: Vec<String> = (1..=states.dim()).map(|k| format!("r_{k}")).collect();
    writeln!(w, "t,{}", names.join(","))?;
    write_rows(states, t0, &mut w)
}

fn write_rows<W: Write>(traj: &Trajectory, t0: f64, w: &mut W) -> Result<()> {
    for (i, s) in traj.samples().enumerate() {
        write!(w, "{}", t0 + i as f64 * traj.step())?;
        for v in s {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{NetParams, ReservoirNet};
    use crate::taskgen::generate_orbit;

    fn small_net(n: usize) -> ReservoirNet {
        ReservoirNet::build(NetParams { n, p: 0.2, seed: 11, ..Default::default() }).unwrap()
    }

    fn random_readout(n: usize, seed: u64, scale: f64) -> TrainedReadout {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, crate::rng::Stream::States);
        TrainedReadout::from_matrix(DMatrix::from_fn(2, 2 * n, |_, _| scale * rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn zero_input_from_rest_stays_at_rest() {
        let net = small_net(30);
        let res = net.at_rho(1.2).unwrap();
        let input = Trajectory::new(2, 0.01, vec![0.0; 2 * 200]).unwrap();
        let states = integrate_open_loop(&res, &input, &[0.0; 30]).unwrap();
        assert!(states.as_flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negated_drive_gives_negated_response() {
        let net = small_net(40);
        let res = net.at_rho(1.1).unwrap();
        let spec = OrbitSpec { b_x: 5.0, b_y: 5.0, x_cen: 2.0, y_cen: 0.0, tau: 0.01 };
        let u = generate_orbit(&spec, 3000).unwrap();
        let a = integrate_open_loop(&res, &u, &[0.0; 40]).unwrap();
        let b = integrate_open_loop(&res, &generate_orbit(&spec.negated(), 3000).unwrap(), &[0.0; 40]).unwrap();
        for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn hand_evaluated_readout() {
        let r = TrainedReadout::from_matrix(DMatrix::from_row_slice(1, 2, &[2.0, 1.0])).unwrap();
        assert_eq!(readout_apply(&r, &[0.5]), vec![1.25]);
        let z = TrainedReadout::from_matrix(DMatrix::zeros(2, 6)).unwrap();
        assert_eq!(readout_apply(&z, &[0.3, -0.2, 0.9]), vec![0.0, 0.0]);
        let q = random_readout(3, 1, 1.0);
        assert_eq!(readout_apply(&q, &[0.0; 3]), vec![0.0, 0.0]);
    }

    #[test]
    fn origin_is_a_closed_loop_equilibrium() {
        let net = small_net(30);
        let res = net.at_rho(1.3).unwrap();
        let ro = random_readout(30, 2, 0.5);
        let (states, proj) = integrate_closed_loop(&res, &ro, &[0.0; 30], 500).unwrap();
        assert!(states.as_flat().iter().all(|v| *v == 0.0));
        assert!(proj.as_flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_jacobian_by_hand() {
        let params = NetParams { n: 2, d: 1, p: 1.0, ..Default::default() };
        // One live neuron: n = 2 is the smallest admissible size, so neuron 1 is decoupled.
        let m = crate::linalg::Adjacency::from_dense(DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, 0.0])).unwrap();
        let w_in = crate::netgen::InputMatrix::from_entries(1, vec![0, 0], vec![0.4, 0.0]).unwrap();
        let net = ReservoirNet::from_parts(params, m.clone(), w_in).unwrap();
        let res = net.at_rho(1.0).unwrap();
        let (w1, w2) = (1.5, -0.8);
        let ro = TrainedReadout::from_matrix(DMatrix::from_row_slice(1, 4, &[w1, 0.0, w2, 0.0])).unwrap();
        let r = 0.3;
        let jac = closed_loop_jacobian(&res, &ro, &[r, 0.0]).unwrap();
        let (gamma, sigma, mm, win) = (5.0, 0.2, 0.7, 0.4);
        let a: f64 = mm * r + sigma * win * (w1 * r + w2 * r * r);
        let expected = gamma * (-1.0 + (1.0 - a.tanh().powi(2)) * (mm + sigma * win * (w1 + 2.0 * w2 * r)));
        assert!((jac[(0, 0)] - expected).abs() < 1e-14);
        assert!((jac[(1, 1)] + gamma).abs() < 1e-14);
    }

    #[test]
    fn trivial_jacobian_is_pure_decay() {
        let params = NetParams { n: 5, ..Default::default() };
        let net = ReservoirNet::from_parts(
            params,
            crate::linalg::Adjacency::from_dense(DMatrix::zeros(5, 5)).unwrap(),
            crate::netgen::InputMatrix::from_entries(2, vec![0; 5], vec![0.5; 5]).unwrap(),
        )
        .unwrap();
        let res = net.at_rho(1.0).unwrap();
        let ro = TrainedReadout::from_matrix(DMatrix::zeros(2, 10)).unwrap();
        let jac = closed_loop_jacobian(&res, &ro, &[0.1, -0.2, 0.3, 0.0, 0.5]).unwrap();
        assert_eq!(jac, DMatrix::identity(5, 5) * -5.0);
    }

    #[test]
    fn jvp_and_trace_agree_with_dense_jacobian() {
        let net = small_net(25);
        let res = net.at_rho(1.4).unwrap();
        let ro = random_readout(25, 3, 0.3);
        let cl = ClosedLoop::new(&res, &ro).unwrap();
        let r: Vec<f64> = (0..25).map(|i| ((i as f64) * 0.37).sin() * 0.8).collect();
        let v: Vec<f64> = (0..25).map(|i| ((i as f64) * 1.1).cos()).collect();
        let jac = cl.jacobian(&r);
        let mut jv = vec![0.0; 25];
        cl.jvp(&r, &v, &mut jv);
        let dense = &jac * nalgebra::DVector::from_column_slice(&v);
        for i in 0..25 {
            assert!((jv[i] - dense[i]).abs() < 1e-12);
        }
        assert!((cl.jacobian_trace(&r) - jac.trace()).abs() < 1e-12);
        let q = DMatrix::from_fn(25, 3, |i, j| ((i * 3 + j) as f64).sin());
        let mut jq = DMatrix::zeros(25, 3);
        cl.jacobian_mat(&r, &q, &mut jq);
        assert!((&jq - &jac * &q).amax() < 1e-12);
    }

    #[test]
    fn divergence_is_reported_with_its_step() {
        let net = small_net(20);
        let res = net.at_rho(1.0).unwrap();
        let ro = random_readout(20, 4, 1e6);
        let r0 = vec![0.5; 20];
        match integrate_closed_loop(&res, &ro, &r0, 1000) {
            Err(Error::Diverged { step }) => assert!(step >= 1),
            // A huge readout saturates tanh, which bounds the flow; this is also admissible.
            Ok((s, _)) => assert!(s.as_flat().iter().all(|v| v.abs() <= 1.0 + 1e-12)),
            Err(e) => panic!("{e}"),
        }
        let blowup = LinearField { a: DMatrix::identity(2, 2) * 50.0 };
        let z = TrainedReadout::from_matrix(DMatrix::zeros(1, 4)).unwrap();
        assert!(matches!(visit_closed_loop(&blowup, &z, &[1.0, 1.0], 100, 0.01, None, |_, _, _| {}), Err(Error::Diverged { .. })));
    }

    #[test]
    fn settle_check_stops_on_equilibria() {
        let net = small_net(20);
        let res = net.at_rho(0.3).unwrap();
        let ro = TrainedReadout::from_matrix(DMatrix::zeros(2, 40)).unwrap();
        let opts = RunOptions { settle: Some(SettleCheck { every: 100, tol: 1e-12 }), ..Default::default() };
        let run = run_closed_loop(&res, &ro, &vec![0.5; 20], 100_000, &opts).unwrap();
        assert!(run.settled);
        assert!(run.steps < 100_000);
        assert!(run.final_state.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn readout_text_round_trips() {
        let mut ro = random_readout(4, 9, 1.0);
        ro.provenance.rho = 1.25;
        ro.provenance.x_cen = -3.0;
        ro.provenance.mode = Some(RotationMode::Opposite);
        ro.provenance.beta = 0.01;
        ro.provenance.orbits = vec![OrbitSpec { b_x: 5.0, b_y: 5.0, x_cen: -3.0, y_cen: 0.0, tau: 0.01 }];
        let mut buf = Vec::new();
        ro.write_text(&mut buf).unwrap();
        let back = TrainedReadout::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, ro);
        assert!(TrainedReadout::read_text(std::io::Cursor::new("shape 1 2\n1.0\n")).is_err());
    }

    #[test]
    fn csv_headers() {
        let t = Trajectory::new(2, 0.5, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_projected_csv(&t, 0.0, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,y\n0,1,2\n0.5,3,4\n");
        let s = StateTrajectory::new(Trajectory::new(3, 1.0, vec![0.0; 3]).unwrap());
        let mut buf = Vec::new();
        write_state_csv(&s, 0.0, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,r_1,r_2,r_3\n"));
    }
}
