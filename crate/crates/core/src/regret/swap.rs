//! Blum–Mansour reduction from swap regret to external regret: one
//! log-barrier learner per action, played through the stationary
//! distribution of the row-stochastic matrix of their iterates.

use crate::error::{Error, Result};
use crate::regret::ftrl::LogBarFtrl;
use crate::schedule::WeightSchedule;

/// Above this size the stationary distribution is found by power iteration.
pub const DENSE_SOLVE_LIMIT: usize = 64;
const POWER_TOLERANCE: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

/// Stationary distribution `x` of a strictly positive row-stochastic matrix,
/// i.e. `sum_a x[a] M[a][b] = x[b]`. Rows are given as slices.
pub fn stationary_distribution<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<f64>> {
    let d = rows.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    for (a, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: row.len(),
            });
        }
        if let Some(b) = row.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::NonPositiveEntry { row: a, col: b });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("row {a} sums to {sum}")));
        }
    }
    if d <= DENSE_SOLVE_LIMIT {
        Ok(dense_stationary(rows))
    } else {
        Ok(power_stationary(rows))
    }
}

/// Direct elimination on `(M^T - I) x = 0`, `sum x = 1`, in the
/// subtraction-free (Grassmann–Taksar–Heyman) ordering: diagonal pivots are
/// taken as off-diagonal row sums, which keeps every quantity positive.
fn dense_stationary<R: AsRef<[f64]>>(rows: &[R]) -> Vec<f64> {
    let d = rows.len();
    let mut m: Vec<Vec<f64>> = rows.iter().map(|r| r.as_ref().to_vec()).collect();
    for k in (1..d).rev() {
        let pivot: f64 = m[k][..k].iter().sum();
        for i in 0..k {
            m[i][k] /= pivot;
        }
        for i in 0..k {
            let factor = m[i][k];
            for j in 0..k {
                m[i][j] += factor * m[k][j];
            }
        }
    }
    let mut x = vec![0.0; d];
    x[0] = 1.0;
    for k in 1..d {
        x[k] = (0..k).map(|i| x[i] * m[i][k]).sum();
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}

fn power_stationary<R: AsRef<[f64]>>(rows: &[R]) -> Vec<f64> {
    let d = rows.len();
    let mut x = vec![1.0 / d as f64; d];
    let mut next = vec![0.0; d];
    for _ in 0..POWER_MAX_ITERS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (a, row) in rows.iter().enumerate() {
            for (b, p) in row.as_ref().iter().enumerate() {
                next[b] += x[a] * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change <= POWER_TOLERANCE {
            break;
        }
    }
    x
}

/// `|| x^T M - x ||_1`.
pub fn stationarity_residual<R: AsRef<[f64]>>(rows: &[R], x: &[f64]) -> f64 {
    let d = x.len();
    let mut out = vec![0.0; d];
    for (a, row) in rows.iter().enumerate() {
        for (b, p) in row.as_ref().iter().enumerate() {
            out[b] += x[a] * p;
        }
    }
    out.iter().zip(x).map(|(y, v)| (y - v).abs()).sum()
}

/// BM-OFTRL-LogBar: a swap-regret minimizer over `|A|` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapMinimizer {
    learners: Vec<LogBarFtrl>,
    strategy: Vec<f64>,
}

impl SwapMinimizer {
    pub fn new(actions: usize) -> Self {
        Self {
            learners: (0..actions).map(|_| LogBarFtrl::new(actions)).collect(),
            strategy: vec![1.0 / actions as f64; actions],
        }
    }

    /// Rebuilds from persisted learners; the strategy is recomputed.
    pub fn from_learners(learners: Vec<LogBarFtrl>) -> Result<Self> {
        let d = learners.len();
        if learners.iter().any(|l| l.dim() != d) {
            return Err(Error::Shape("learner dimension must equal action count".into()));
        }
        let rows: Vec<&[f64]> = learners.iter().map(|l| l.iterate()).collect();
        let strategy = stationary_distribution(&rows)?;
        Ok(Self { learners, strategy })
    }

    pub fn actions(&self) -> usize {
        self.learners.len()
    }

    /// Current strategy `x^t`.
    pub fn strategy(&self) -> &[f64] {
        &self.strategy
    }

    pub fn learners(&self) -> &[LogBarFtrl] {
        &self.learners
    }

    /// Row `a` of `M^t`.
    pub fn row(&self, a: usize) -> &[f64] {
        self.learners[a].iterate()
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.learners.iter().map(|l| l.iterate()).collect()
    }

    /// Feeds the unweighted utility `u_hat^t` for the current strategy and
    /// returns `x^{t+1}`. Learner `a` sees `x^t[a] * u_hat^t`.
    pub fn receive(&mut self, utility: &[f64], schedule: &WeightSchedule) -> Result<&[f64]> {
        if utility.len() != self.actions() {
            return Err(Error::Dimension {
                expected: self.actions(),
                got: utility.len(),
            });
        }
        let mut scaled = vec![0.0; utility.len()];
        for (a, learner) in self.learners.iter_mut().enumerate() {
            let share = self.strategy[a];
            scaled
                .iter_mut()
                .zip(utility)
                .for_each(|(s, u)| *s = share * u);
            learner.receive(&scaled, schedule)?;
        }
        let rows: Vec<&[f64]> = self.learners.iter().map(|l| l.iterate()).collect();
        self.strategy = stationary_distribution(&rows)?;
        Ok(&self.strategy)
    }
}
