//! Consequences of the odd vector field: vanishing square readout, half-period
//! antisymmetry of the driven response, the `+-x_cen` readout relations and
//! mirror trajectories.

use std::io::Write;

use nalgebra::DMatrixView;

use crate::dynamics::{run_closed_loop, RunOptions, StateTrajectory, TrainedReadout};
use crate::error::{Error, Result};
use crate::netgen::{Reservoir, ReservoirNet};
use crate::taskgen::{seeing_double_pair, RotationMode};
use crate::training::{train_on, TrainingParams};

/// `|W2|_F / |W1|_F`.
pub fn square_readout_ratio(readout: &TrainedReadout) -> Result<f64> {
    let w1 = readout.w1().norm();
    if w1 == 0.0 {
        return Err(Error::Numeric("linear readout is zero; the square ratio is undefined".into()));
    }
    Ok(readout.w2().norm() / w1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct B9Residuals {
    /// `|W1+ - W1-|_F` relative to the mean full readout norm.
    pub linear: f64,
    /// `|W2+ + W2-|_F` relative to the mean full readout norm.
    pub square: f64,
}

/// Readouts trained at `+x_cen` and `-x_cen` should share `W1` and have opposite `W2`.
pub fn check_b9_pair(plus: &TrainedReadout, minus: &TrainedReadout) -> Result<B9Residuals> {
    if plus.w_out().shape() != minus.w_out().shape() {
        return Err(Error::Dimension(format!("readout shapes {:?} and {:?} differ", plus.w_out().shape(), minus.w_out().shape())));
    }
    let scale = 0.5 * (plus.w_out().norm() + minus.w_out().norm());
    if scale == 0.0 {
        return Err(Error::Numeric("both readouts are zero".into()));
    }
    let diff = |a: DMatrixView<'_, f64>, b: DMatrixView<'_, f64>, sign: f64| (a.into_owned() + b.into_owned() * sign).norm();
    Ok(B9Residuals { linear: diff(plus.w1(), minus.w1(), -1.0) / scale, square: diff(plus.w2(), minus.w2(), 1.0) / scale })
}

/// Trains the `+x_cen` readout and its mirror. The mirror is trained on the
/// exact negations of the `+x_cen` orbits: the same circles as the `-x_cen`
/// pair, started half a turn later, so both runs see negated samples.
pub fn train_b9_pair(
    net: &ReservoirNet,
    rho: f64,
    x_cen: f64,
    b: f64,
    mode: RotationMode,
    params: &TrainingParams,
) -> Result<(TrainedReadout, TrainedReadout)> {
    let res = net.at_rho(rho)?;
    let (a, c) = seeing_double_pair(x_cen, b, mode, net.params.tau)?;
    let (plus, minus) = rayon::join(|| train_on(&res, &[a, c], params), || train_on(&res, &[a.negated(), c.negated()], params));
    Ok((plus?.0, minus?.0))
}

/// As [`train_b9_pair`] but with the `-x_cen` orbits started at phase zero.
/// The half-turn offset is not a whole number of steps, so the relations only
/// hold to the sampling resolution of the training window.
pub fn train_b9_pair_phase_zero(
    net: &ReservoirNet,
    rho: f64,
    x_cen: f64,
    b: f64,
    mode: RotationMode,
    params: &TrainingParams,
) -> Result<(TrainedReadout, TrainedReadout)> {
    let res = net.at_rho(rho)?;
    let (a, c) = seeing_double_pair(x_cen, b, mode, net.params.tau)?;
    let (am, cm) = seeing_double_pair(-x_cen, b, mode, net.params.tau)?;
    let (plus, minus) = rayon::join(|| train_on(&res, &[a, c], params), || train_on(&res, &[am, cm], params));
    Ok((plus?.0, minus?.0))
}

/// Degree-5 Lagrange interpolation of component `k` at fractional index `s`.
fn interp5(states: &StateTrajectory, k: usize, s: f64) -> f64 {
    let base = (s.floor() as usize).saturating_sub(2).min(states.len() - 6);
    let mut acc = 0.0;
    for a in 0..6 {
        let mut w = 1.0;
        for c in 0..6 {
            if c != a {
                w *= (s - (base + c) as f64) / (a as f64 - c as f64);
            }
        }
        acc += w * states.sample(base + a)[k];
    }
    acc
}

/// `max_t |r(t) + r(t + T/2)| / max_t |r(t)|` over the samples whose shifted
/// time still falls inside the record.
pub fn half_period_antisymmetry(states: &StateTrajectory, period: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    let h = states.step();
    if states.duration() < 1.5 * period || states.len() < 6 {
        return Err(Error::TooShort { needed: (1.5 * period / h).ceil() as usize + 1, have: states.len() });
    }
    let shift = 0.5 * period / h;
    let last = states.len() as f64 - 3.0;
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for i in 0..states.len() {
        let s = i as f64 + shift;
        if s > last {
            break;
        }
        let r = states.sample(i);
        let (mut sum, mut norm) = (0.0, 0.0);
        for (k, rk) in r.iter().enumerate() {
            sum += (rk + interp5(states, k, s)).powi(2);
            norm += rk * rk;
        }
        worst = worst.max(sum.sqrt());
        scale = scale.max(norm.sqrt());
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(worst / scale)
}

/// `max_t |u+(t) + u-(t)|` for closed-loop runs from `r0` and `-r0`.
pub fn mirror_trajectory_residual(res: &Reservoir<'_>, readout: &TrainedReadout, r0: &[f64], span: f64) -> Result<f64> {
    let steps = (span / res.tau()).round() as usize;
    let neg: Vec<f64> = r0.iter().map(|v| -v).collect();
    let opts = RunOptions::default();
    let (p, m) = rayon::join(|| run_closed_loop(res, readout, r0, steps, &opts), || run_closed_loop(res, readout, &neg, steps, &opts));
    let (p, m) = (p?, m?);
    Ok(p.projected
        .samples()
        .zip(m.projected.samples())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// Bisects for the `rho` where `ratio_at(rho)` first exceeds `10 * floor`,
/// assuming it lies below at `lo` and above at `hi`.
pub fn symmetry_breaking_threshold(
    mut ratio_at: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    floor: f64,
    tol: f64,
) -> Result<f64> {
    let level = 10.0 * floor;
    let (mut lo, mut hi) = (lo, hi);
    if ratio_at(lo)? >= level || ratio_at(hi)? < level {
        return Err(Error::InvalidParameter(format!("ratio does not cross {level:e} on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ratio_at(mid)? < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymmetryReport {
    pub w2_ratio: f64,
    pub b2_residual: f64,
    pub b9_linear_residual: f64,
    pub b9_square_residual: f64,
    pub mirror_residual: f64,
}

impl SymmetryReport {
    pub const HEADER: &'static str = "w2_ratio,b2_residual,b9_linear_residual,b9_square_residual,mirror_residual";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        writeln!(
            w,
            "{},{},{},{},{}",
            self.w2_ratio, self.b2_residual, self.b9_linear_residual, self.b9_square_residual, self.mirror_residual
        )?;
        Ok(())
    }
}

/// One-column CSV of the square readout's elements, row-major.
pub fn write_w2_elements<W: Write>(readout: &TrainedReadout, mut w: W) -> Result<()> {
    writeln!(w, "w2")?;
    let w2 = readout.w2();
    for i in 0..w2.nrows() {
        for j in 0..w2.ncols() {
            writeln!(w, "{}", w2[(i, j)])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_open_loop;
    use crate::netgen::NetParams;
    use crate::taskgen::{generate_orbit, OrbitSpec};
    use nalgebra::DMatrix;
    use std::f64::consts::TAU;

    fn small_net() -> ReservoirNet {
        ReservoirNet::build(NetParams { n: 40, p: 0.15, seed: 3, ..Default::default() }).unwrap()
    }

    fn orbit_states(spec: &OrbitSpec, steps: usize) -> StateTrajectory {
        StateTrajectory::new(generate_orbit(spec, steps).unwrap())
    }

    #[test]
    fn ratio_needs_a_linear_part() {
        assert!(square_readout_ratio(&TrainedReadout::from_matrix(DMatrix::zeros(2, 8)).unwrap()).is_err());
        let mut w = DMatrix::zeros(2, 8);
        w[(0, 0)] = 3.0;
        w[(1, 5)] = 4.0;
        assert_eq!(square_readout_ratio(&TrainedReadout::from_matrix(w).unwrap()).unwrap(), 4.0 / 3.0);
    }

    #[test]
    fn b9_self_pair_and_unrelated_pair() {
        let w = DMatrix::from_fn(2, 10, |i, j| ((i * 10 + j) as f64 * 0.37).sin());
        let r = TrainedReadout::from_matrix(w.clone()).unwrap();
        let self_pair = check_b9_pair(&r, &r).unwrap();
        assert_eq!(self_pair.linear, 0.0);
        assert!((self_pair.square - 2.0 * r.w2().norm() / w.norm()).abs() < 1e-15);
        let other = TrainedReadout::from_matrix(DMatrix::from_fn(2, 10, |i, j| ((i * 10 + j) as f64 * 1.91).cos())).unwrap();
        let un = check_b9_pair(&r, &other).unwrap();
        assert!(un.linear > 0.1 && un.square > 0.1);
        assert!(check_b9_pair(&r, &TrainedReadout::from_matrix(DMatrix::zeros(2, 12)).unwrap()).is_err());
    }

    #[test]
    fn b9_relations_hold_for_the_negated_pair() {
        let net = small_net();
        let params = TrainingParams::default();
        let (p, m) = train_b9_pair(&net, 1.2, 3.0, 5.0, RotationMode::Opposite, &params).unwrap();
        let r = check_b9_pair(&p, &m).unwrap();
        assert!(r.linear < 1e-9 && r.square < 1e-9, "{r:?}");
    }

    #[test]
    fn half_period_examples() {
        let (a, _) = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        assert!(half_period_antisymmetry(&orbit_states(&a, 1200), TAU).unwrap() < 1e-12);
        let (a2, _) = seeing_double_pair(2.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        assert!(half_period_antisymmetry(&orbit_states(&a2, 1200), TAU).unwrap() > 0.1);
        assert!(matches!(half_period_antisymmetry(&orbit_states(&a, 800), TAU), Err(Error::TooShort { .. })));
    }

    #[test]
    fn driven_response_is_half_period_antisymmetric() {
        let net = small_net();
        let res = net.at_rho(1.0).unwrap();
        let (a, _) = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        let u = generate_orbit(&a, 21200).unwrap();
        let states = integrate_open_loop(&res, &u, &vec![0.0; 40]).unwrap().into_inner();
        let window = StateTrajectory::new(states.slice(20000, states.len()));
        let r = half_period_antisymmetry(&window, TAU).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn zeroed_square_gives_a_mirror_trajectory() {
        let net = small_net();
        let res = net.at_rho(1.1).unwrap();
        let w = DMatrix::from_fn(2, 80, |i, j| 0.2 * ((i * 80 + j) as f64 * 0.77).sin());
        let full = TrainedReadout::from_matrix(w).unwrap();
        let r0: Vec<f64> = (0..40).map(|k| 0.3 * (k as f64).cos()).collect();
        let odd = full.without_square();
        assert!(mirror_trajectory_residual(&res, &odd, &r0, 100.0).unwrap() < 1e-10);
        assert!(mirror_trajectory_residual(&res, &full, &r0, 100.0).unwrap() > 1e-3);
    }

    #[test]
    fn threshold_bisection_on_a_step() {
        let t = symmetry_breaking_threshold(|rho| Ok(if rho < 1.445 { 1e-5 } else { 1e-2 }), 1.0, 2.0, 1e-5, 1e-4).unwrap();
        assert!((t - 1.445).abs() < 1e-4);
        assert!(symmetry_breaking_threshold(|_| Ok(1e-5), 1.0, 2.0, 1e-5, 1e-4).is_err());
    }

    #[test]
    fn report_and_dump_formats() {
        let mut buf = Vec::new();
        SymmetryReport { w2_ratio: 0.5, ..Default::default() }.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n0.5,0,0,0,0\n", SymmetryReport::HEADER));
        let r = TrainedReadout::from_matrix(DMatrix::from_fn(2, 4, |i, j| (i * 4 + j) as f64)).unwrap();
        let mut buf = Vec::new();
        write_w2_elements(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "w2\n2\n3\n6\n7\n");
    }
}
