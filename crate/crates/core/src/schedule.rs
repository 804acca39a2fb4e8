//! Smooth value-update rates `alpha_t`, mixture weights `alpha_t^j` and the
//! per-episode weights `w_t` that scale utilities and step sizes.
//!
//! `w_t` grows like `t^H / H!`, and `alpha_t^j = alpha_t^1 * w_j`, so mixture
//! weights are never computed as long products on the hot path.

use crate::error::{Error, Result};

/// Largest admissible `w_t`.
pub const WEIGHT_GUARD: f64 = 1e250;

/// `alpha_t = (H + 1) / (H + t)` for `t >= 1`.
#[inline]
pub fn alpha(t: usize, horizon: usize) -> f64 {
    debug_assert!(t >= 1 && horizon >= 1);
    (horizon as f64 + 1.0) / (horizon as f64 + t as f64)
}

/// Incrementally computed weights for one run. Index 0 holds `w_0 = w_1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    horizon: usize,
    eta: f64,
    weights: Vec<f64>,
    // prefix[t] = w_1 + ... + w_t
    prefix: Vec<f64>,
}

impl WeightSchedule {
    pub fn new(horizon: usize, eta: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument("step size must be positive".into()));
        }
        Ok(Self {
            horizon,
            eta,
            weights: vec![1.0, 1.0],
            prefix: vec![0.0, 1.0],
        })
    }

    /// A schedule already advanced through episode `t`.
    pub fn through(horizon: usize, eta: f64, t: usize) -> Result<Self> {
        let mut sched = Self::new(horizon, eta)?;
        sched.extend_to(t)?;
        Ok(sched)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Last episode whose weight is available.
    pub fn current(&self) -> usize {
        self.weights.len() - 1
    }

    /// Computes `w_{t+1}` from `w_t` and returns it.
    ///
    /// `w_t = w_{t-1} alpha_t / (alpha_{t-1} (1 - alpha_t))`, which reduces to
    /// `w_{t-1} (H + t - 1) / (t - 1)`; the reduced form is exact on integers.
    pub fn advance(&mut self) -> Result<f64> {
        let t = self.weights.len();
        let prev = self.weights[t - 1];
        let ratio = (self.horizon + t - 1) as f64 / (t - 1) as f64;
        let w = prev * ratio;
        if !(w <= WEIGHT_GUARD) {
            return Err(Error::WeightOverflow { t });
        }
        self.weights.push(w);
        let sum = self.prefix[t - 1] + w;
        self.prefix.push(sum);
        Ok(w)
    }

    pub fn extend_to(&mut self, t: usize) -> Result<()> {
        while self.current() < t {
            self.advance()?;
        }
        Ok(())
    }

    /// `w_t`; panics if the schedule has not reached `t`.
    #[inline]
    pub fn w(&self, t: usize) -> f64 {
        self.weights[t]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w_1 + ... + w_t`.
    #[inline]
    pub fn weight_sum(&self, t: usize) -> f64 {
        self.prefix[t]
    }

    #[inline]
    pub fn alpha(&self, t: usize) -> f64 {
        alpha(t, self.horizon)
    }

    /// `eta_t = eta / w_t`.
    #[inline]
    pub fn step_size(&self, t: usize) -> f64 {
        self.eta / self.weights[t]
    }

    /// `alpha_t^1 = alpha_t / w_t`.
    #[inline]
    pub fn first_mixture_weight(&self, t: usize) -> f64 {
        self.alpha(t) / self.weights[t]
    }

    /// `alpha_t^j = alpha_t^1 w_j` for `1 <= j <= t`.
    #[inline]
    pub fn mixture_weight(&self, t: usize, j: usize) -> f64 {
        debug_assert!(1 <= j && j <= t);
        self.first_mixture_weight(t) * self.weights[j]
    }

    /// `(alpha_t^1, ..., alpha_t^t)`.
    pub fn mixture_weights(&self, t: usize) -> Vec<f64> {
        let first = self.first_mixture_weight(t);
        (1..=t).map(|j| first * self.weights[j]).collect()
    }
}

/// `(alpha_t^1, ..., alpha_t^t)` for the given horizon.
pub fn mixture_weights(t: usize, horizon: usize) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    // eta is irrelevant for mixture weights
    Ok(WeightSchedule::through(horizon, 1.0, t)?.mixture_weights(t))
}
