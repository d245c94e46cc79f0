//! Largest Lyapunov exponent of the closed loop.

use crate::dynamics::{check_state, ClosedLoop, Rk4, TrainedReadout, VectorField};
use crate::error::{Error, Result};
use crate::netgen::Reservoir;
use crate::rng::{stream, unit_vector, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovMethod {
    /// Tangent vector along the variational equation.
    Variational,
    /// A second trajectory at small separation, rescaled at each renormalization.
    TwoTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    pub transient: f64,
    pub renorm_interval: f64,
    pub span: f64,
    pub method: LyapunovMethod,
    /// Initial separation for [`LyapunovMethod::TwoTrajectory`].
    pub separation: f64,
    /// Seed of the random initial tangent direction.
    pub seed: u64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            transient: 100.0,
            renorm_interval: 1.0,
            span: 400.0,
            method: LyapunovMethod::Variational,
            separation: 1e-8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    pub window: f64,
    pub renorm_interval: f64,
}

/// Largest Lyapunov exponent of the closed loop started at `r0`.
pub fn largest_lyapunov(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    r0: &[f64],
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    let cl = ClosedLoop::new(res, readout)?;
    largest_lyapunov_field(&cl, r0, res.tau(), opts)
}

/// As [`largest_lyapunov`] for any vector field.
pub fn largest_lyapunov_field<F: VectorField + ?Sized>(
    field: &F,
    r0: &[f64],
    h: f64,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    let steps = |t: f64| (t / h).round() as usize;
    let per = steps(opts.renorm_interval).max(1);
    let blocks = steps(opts.span) / per;
    if blocks < 10 {
        return Err(Error::InvalidParameter(format!(
            "span {} must cover at least 10 renormalization intervals of {}",
            opts.span, opts.renorm_interval
        )));
    }
    if r0.len() != field.dim() {
        return Err(Error::Dimension("initial state length differs from the field dimension".into()));
    }
    let n = field.dim();
    let mut ws = Rk4::new(n);
    let mut x = r0.to_vec();
    let mut step = 0usize;
    for _ in 0..steps(opts.transient) {
        ws.step(field, &mut x, h);
        step += 1;
        check_state(&x, step)?;
    }
    let mut v = unit_vector(&mut stream(opts.seed, Stream::Tangent), n);
    let mut sum = 0.0;
    match opts.method {
        LyapunovMethod::Variational => {
            for _ in 0..blocks {
                for _ in 0..per {
                    ws.step_with_tangent(field, &mut x, &mut v, h);
                    step += 1;
                    check_state(&x, step)?;
                }
                sum += renormalize(&mut v, 1.0)?;
            }
        }
        LyapunovMethod::TwoTrajectory => {
            let d0 = opts.separation;
            let mut y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + d0 * b).collect();
            let mut ws2 = Rk4::new(n);
            for _ in 0..blocks {
                for _ in 0..per {
                    ws.step(field, &mut x, h);
                    ws2.step(field, &mut y, h);
                    step += 1;
                    check_state(&x, step)?;
                }
                let mut diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                sum += renormalize(&mut diff, d0)?;
                for i in 0..n {
                    y[i] = x[i] + d0 * diff[i];
                }
            }
        }
    }
    let window = (blocks * per) as f64 * h;
    Ok(LyapunovEstimate { lambda_max: sum / window, window, renorm_interval: per as f64 * h })
}

/// Rescales `v` to unit norm and returns `ln(|v| / reference)`.
fn renormalize(v: &mut [f64], reference: f64) -> Result<f64> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numeric(format!("tangent norm became {norm}")));
    }
    v.iter_mut().for_each(|a| *a /= norm);
    Ok((norm / reference).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LinearField;
    use nalgebra::DMatrix;

    #[test]
    fn pure_decay_rate() {
        let f = LinearField { a: DMatrix::identity(6, 6) * -5.0 };
        let est = largest_lyapunov_field(&f, &[0.3; 6], 0.01, &LyapunovOptions::default()).unwrap();
        assert!((est.lambda_max + 5.0).abs() < 0.05, "{}", est.lambda_max);
        assert_eq!(est.window, 400.0);
    }

    #[test]
    fn reversed_decay_rate() {
        let f = LinearField { a: DMatrix::identity(6, 6) * 5.0 };
        let est = largest_lyapunov_field(&f, &[0.0; 6], 0.01, &LyapunovOptions::default()).unwrap();
        assert!((est.lambda_max - 5.0).abs() < 0.05, "{}", est.lambda_max);
    }

    #[test]
    fn picks_the_dominant_rate() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -0.3, -4.0]));
        let f = LinearField { a };
        let opts = LyapunovOptions { transient: 0.0, span: 200.0, ..Default::default() };
        let est = largest_lyapunov_field(&f, &[0.0; 3], 0.01, &opts).unwrap();
        assert!((est.lambda_max + 0.3).abs() < 0.02, "{}", est.lambda_max);
    }

    #[test]
    fn two_trajectory_agrees_on_linear_decay() {
        let f = LinearField { a: DMatrix::identity(4, 4) * -2.0 };
        let opts = LyapunovOptions { method: LyapunovMethod::TwoTrajectory, ..Default::default() };
        let est = largest_lyapunov_field(&f, &[0.1; 4], 0.01, &opts).unwrap();
        assert!((est.lambda_max + 2.0).abs() < 0.02, "{}", est.lambda_max);
    }

    #[test]
    fn short_span_is_rejected() {
        let f = LinearField { a: DMatrix::identity(2, 2) };
        let opts = LyapunovOptions { span: 5.0, ..Default::default() };
        assert!(largest_lyapunov_field(&f, &[0.0; 2], 0.01, &opts).is_err());
    }
}
