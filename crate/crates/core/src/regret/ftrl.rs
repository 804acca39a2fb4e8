//! Optimistic FTRL over the simplex with the log-barrier regularizer
//! `R(x) = -sum_r log x[r]` and step sizes `eta_t = eta / w_t`.

use crate::error::{Error, Result};
use crate::schedule::WeightSchedule;

const BISECTION_ITERS: usize = 200;
const SUM_TOLERANCE: f64 = 1e-12;
/// Slack on `||u||_inf <= 1` for incoming utilities.
pub const UTILITY_NORM_SLACK: f64 = 1e-9;

/// Solution of `max_x <x, z> + sum_r log x[r]` over the simplex, with its
/// Lagrange multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub point: Vec<f64>,
    pub multiplier: f64,
}

/// Solves the log-barrier FTRL step.
///
/// Stationarity gives `x[r] = 1 / (lambda - z[r])` with `lambda` the unique
/// root of `sum_r 1 / (lambda - z[r]) = 1` in `[max z + 1, max z + d]`.
/// The residual is monotone in `lambda`, so plain bisection always converges.
pub fn ftrl_solve(z: &[f64]) -> Result<BarrierSolution> {
    let d = z.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty utility vector".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if d == 1 {
        return Ok(BarrierSolution {
            point: vec![1.0],
            multiplier: z[0] + 1.0,
        });
    }
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass = |lambda: f64| z.iter().map(|&zr| 1.0 / (lambda - zr)).sum::<f64>();

    let mut lo = zmax + 1.0;
    let mut hi = zmax + d as f64;
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..BISECTION_ITERS {
        lambda = 0.5 * (lo + hi);
        let total = mass(lambda);
        if (total - 1.0).abs() <= SUM_TOLERANCE || lambda <= lo || lambda >= hi {
            break;
        }
        if total > 1.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let mut point: Vec<f64> = z.iter().map(|&zr| 1.0 / (lambda - zr)).collect();
    let total: f64 = point.iter().sum();
    point.iter_mut().for_each(|x| *x /= total);
    Ok(BarrierSolution {
        point,
        multiplier: lambda,
    })
}

/// `|| z + 1/x - lambda 1 ||_inf`, the stationarity residual of a solution.
pub fn kkt_residual(z: &[f64], solution: &BarrierSolution) -> f64 {
    z.iter()
        .zip(&solution.point)
        .map(|(zr, xr)| (zr + 1.0 / xr - solution.multiplier).abs())
        .fold(0.0, f64::max)
}

/// One OFTRL-LogBar learner over a `d`-simplex.
///
/// The learner has played `x^0, ..., x^t`. On receiving `u_hat^t` it adds
/// `w_t u_hat^t` to the accumulator (for `t >= 1`; `u_hat^0` only ever serves
/// as a prediction) and plays
/// `x^{t+1} = argmax (eta / w_{t+1}) <x, w_{t+1} u_hat^t + accum> - R(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBarFtrl {
    accum: Vec<f64>,
    prediction: Vec<f64>,
    t: usize,
    iterate: Vec<f64>,
}

impl LogBarFtrl {
    pub fn new(d: usize) -> Self {
        Self {
            accum: vec![0.0; d],
            prediction: vec![0.0; d],
            t: 0,
            iterate: vec![1.0 / d as f64; d],
        }
    }

    /// Rebuilds a learner from a persisted accumulator and prediction.
    pub fn from_parts(accum: Vec<f64>, prediction: Vec<f64>, t: usize, eta: f64, w_t: f64) -> Result<Self> {
        if accum.len() != prediction.len() {
            return Err(Error::Dimension {
                expected: accum.len(),
                got: prediction.len(),
            });
        }
        let iterate = if t == 0 {
            vec![1.0 / accum.len() as f64; accum.len()]
        } else {
            let z: Vec<f64> = accum
                .iter()
                .zip(&prediction)
                .map(|(s, m)| eta / w_t * (w_t * m + s))
                .collect();
            ftrl_solve(&z)?.point
        };
        Ok(Self {
            accum,
            prediction,
            t,
            iterate,
        })
    }

    pub fn dim(&self) -> usize {
        self.iterate.len()
    }

    /// Index of the current iterate.
    pub fn episode(&self) -> usize {
        self.t
    }

    pub fn iterate(&self) -> &[f64] {
        &self.iterate
    }

    /// `sum_{tau=1}^{t} w_tau u_hat^tau`.
    pub fn accumulated(&self) -> &[f64] {
        &self.accum
    }

    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    /// Feeds `u_hat^t` and returns `x^{t+1}`. The schedule must reach `t + 1`.
    pub fn receive(&mut self, utility: &[f64], schedule: &WeightSchedule) -> Result<&[f64]> {
        if utility.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: utility.len(),
            });
        }
        let norm = utility.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        if !(norm <= 1.0 + UTILITY_NORM_SLACK) {
            return Err(Error::UtilityNorm { norm });
        }
        if self.t >= 1 {
            let w = schedule.w(self.t);
            self.accum
                .iter_mut()
                .zip(utility)
                .for_each(|(s, u)| *s += w * u);
        }
        self.prediction.copy_from_slice(utility);
        self.t += 1;
        let w_next = schedule.w(self.t);
        let step = schedule.eta() / w_next;
        let z: Vec<f64> = self
            .accum
            .iter()
            .zip(utility)
            .map(|(s, u)| step * (w_next * u + s))
            .collect();
        self.iterate = ftrl_solve(&z)?.point;
        Ok(&self.iterate)
    }
}
