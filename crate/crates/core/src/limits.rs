//! Strong limits as plateau detection on a checkpoint schedule.
//!
//! A family `F(t)` is sampled on increasing checkpoints. Consecutive Cauchy
//! residuals `‖F(t_{k+1}) − F(t_k)‖` below `tol` for at least three checkpoints
//! in a row form a plateau; the limit value is the plateau mean. A residual
//! above `tol` after the plateau marks a recurrence (finite-lattice revival).
//!
//! Only the current window of checkpoint values is kept in memory: at most
//! `PLATEAU_RUN + 1` matrices plus running plateau sums.

use crate::linalg::{frobenius, op_exp, op_norm, trace_norm, CMat, LinalgError};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Consecutive small residuals required for a plateau.
pub const PLATEAU_RUN: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule needs at least {min} checkpoints, got {got}")]
    TooFew { min: usize, got: usize },
    #[error("checkpoints must be positive and strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("checkpoint {t} exceeds t_max {t_max}")]
    BeyondTMax { t: f64, t_max: f64 },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_max: f64,
    pub checkpoints: Vec<f64>,
    pub tol: f64,
    pub recurrence_guard: bool,
}

impl Schedule {
    /// `count` equispaced checkpoints ending at `t_max`.
    pub fn linear(t_max: f64, count: usize, tol: f64) -> Self {
        let count = count.max(1);
        let checkpoints = (1..=count).map(|k| t_max * k as f64 / count as f64).collect();
        Self { t_max, checkpoints, tol, recurrence_guard: true }
    }

    /// `count` checkpoints in geometric progression from `t0` to `t_max`.
    pub fn geometric(t0: f64, t_max: f64, count: usize, tol: f64) -> Self {
        let count = count.max(2);
        let r = (t_max / t0).powf(1.0 / (count - 1) as f64);
        let mut checkpoints: Vec<f64> = (0..count).map(|k| t0 * r.powi(k as i32)).collect();
        checkpoints[count - 1] = t_max;
        Self { t_max, checkpoints, tol, recurrence_guard: true }
    }

    /// Pre-recurrence window `0.6·n·h` (the lattice Laplacian's top group
    /// velocity is `2/h`) with 24 linear checkpoints.
    pub fn for_lattice(sites: usize, spacing: f64, tol: f64) -> Self {
        Self::linear(0.6 * sites as f64 * spacing, 24, tol)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let min = PLATEAU_RUN + 1;
        if self.checkpoints.len() < min {
            return Err(ScheduleError::TooFew { min, got: self.checkpoints.len() });
        }
        if !(self.tol > 0.0) {
            return Err(ScheduleError::Tolerance(self.tol));
        }
        let mut prev = 0.0;
        for (k, &t) in self.checkpoints.iter().enumerate() {
            if !(t > prev) {
                return Err(ScheduleError::NotIncreasing(k));
            }
            if t > self.t_max * (1.0 + 1e-12) {
                return Err(ScheduleError::BeyondTMax { t, t_max: self.t_max });
            }
            prev = t;
        }
        Ok(())
    }
}

/// Norm used for Cauchy residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Operator norm on the Hilbert space.
    Operator,
    /// Superoperator norm induced by the trace norm, probed on the matrix units `E_jk`.
    InducedTrace,
}

impl Metric {
    pub fn norm(self, m: &CMat) -> f64 {
        match self {
            Metric::Operator => op_norm(m),
            Metric::InducedTrace => induced_trace_norm(m),
        }
    }
}

/// `max_{j,k} ‖S(E_jk)‖₁`; for a stacked superoperator the image of `E_jk` is one column.
pub fn induced_trace_norm(s: &CMat) -> f64 {
    let d = crate::linalg::super_dim(s);
    let mut best: f64 = 0.0;
    for col in 0..s.ncols() {
        let x = CMat::from_fn(d, d, |i, k| s[(i * d + k, col)]);
        if frobenius(&x) * (d as f64).sqrt() <= best {
            // ‖X‖₁ ≤ √d·‖X‖₂ cannot beat the current maximum.
            continue;
        }
        best = best.max(trace_norm(&x));
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    /// `‖F(t_k) − F(t_{k−1})‖`; the first checkpoint compares against `F(0)`.
    pub residual: f64,
    /// `‖F(t_k)‖` in the same metric.
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitResult {
    #[serde(skip)]
    pub value: CMat,
    pub checkpoints: Vec<Checkpoint>,
    pub plateau: Option<(f64, f64)>,
    /// Root-mean-square Frobenius deviation of the plateau samples from their mean.
    pub plateau_std: Option<f64>,
    pub recurrence_detected: bool,
    pub converged: bool,
    pub tol: f64,
    pub metric: Metric,
    /// Why sampling stopped early, if it did for a reason other than recurrence.
    pub aborted: Option<String>,
}

impl LimitResult {
    pub fn residuals(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.residual).collect()
    }

    pub fn last_residual(&self) -> f64 {
        self.checkpoints.last().map_or(f64::INFINITY, |c| c.residual)
    }

    /// Smallest residual over the schedule.
    pub fn best_residual(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min)
    }

    /// Human-readable reason when the limit did not converge.
    pub fn failure(&self) -> Option<String> {
        if self.converged {
            None
        } else if let Some(reason) = &self.aborted {
            Some(format!("aborted: {reason}"))
        } else if self.recurrence_detected {
            Some("recurrence: residual rebounded after the plateau".into())
        } else {
            Some(format!(
                "not converged: no plateau of {PLATEAU_RUN} residuals <= {:.1e} before t_max (smallest residual {:.3e})",
                self.tol,
                self.best_residual()
            ))
        }
    }
}

struct PlateauSums {
    start: usize,
    end: usize,
    sum: CMat,
    sum_sq: f64,
    count: usize,
}

impl PlateauSums {
    fn add(&mut self, m: &CMat) {
        self.sum += m;
        self.sum_sq += frobenius(m).powi(2);
        self.count += 1;
    }
}

/// Incremental plateau detector; lets one pass over a schedule feed several families.
pub struct PlateauTracker {
    checkpoints_t: Vec<f64>,
    tol: f64,
    guard: bool,
    metric: Metric,
    window: VecDeque<CMat>,
    checkpoints: Vec<Checkpoint>,
    run: usize,
    plateau: Option<PlateauSums>,
    plateau_closed: bool,
    recurrence: bool,
    done: bool,
    aborted: Option<String>,
}

impl PlateauTracker {
    /// `initial` is `F(0)`, used for the first residual.
    pub fn new(schedule: &Schedule, metric: Metric, initial: CMat) -> Result<Self, ScheduleError> {
        schedule.validate()?;
        let mut window = VecDeque::with_capacity(PLATEAU_RUN + 2);
        window.push_back(initial);
        Ok(Self {
            checkpoints_t: schedule.checkpoints.clone(),
            tol: schedule.tol,
            guard: schedule.recurrence_guard,
            metric,
            window,
            checkpoints: Vec::with_capacity(schedule.checkpoints.len()),
            run: 0,
            plateau: None,
            plateau_closed: false,
            recurrence: false,
            done: false,
            aborted: None,
        })
    }

    /// True once further samples cannot change the result.
    pub fn done(&self) -> bool {
        self.done
    }

    /// Record `F(t_k)` for the next checkpoint in order.
    pub fn push(&mut self, f: CMat) {
        if self.done {
            return;
        }
        let k = self.checkpoints.len();
        let t = self.checkpoints_t[k];
        let prev = self.window.back().expect("window holds the previous value");
        let residual = self.metric.norm(&(&f - prev));
        self.checkpoints.push(Checkpoint { t, residual, norm: self.metric.norm(&f) });
        let small = residual <= self.tol;
        self.window.push_back(f);
        if self.window.len() > PLATEAU_RUN + 1 {
            self.window.pop_front();
        }
        let f = self.window.back().expect("just pushed");
        match (&mut self.plateau, small) {
            (None, true) => {
                self.run += 1;
                if self.run == PLATEAU_RUN {
                    // Samples t_{k−3}, …, t_k bracket the three small residuals.
                    let mut sums =
                        PlateauSums { start: k + 1 - PLATEAU_RUN, end: k, sum: CMat::zeros(f.nrows(), f.ncols()), sum_sq: 0.0, count: 0 };
                    for m in &self.window {
                        sums.add(m);
                    }
                    self.plateau = Some(sums);
                }
            }
            (None, false) => self.run = 0,
            (Some(sums), true) if !self.plateau_closed => {
                sums.add(f);
                sums.end = k;
            }
            (Some(_), false) => {
                self.plateau_closed = true;
                if self.guard {
                    self.recurrence = true;
                    self.done = true;
                }
            }
            (Some(_), true) => {}
        }
        if (self.plateau.is_some() && !self.guard) || self.checkpoints.len() == self.checkpoints_t.len() {
            self.done = true;
        }
    }

    /// Stop sampling; the result is reported as not converged.
    pub fn abort(&mut self, reason: impl Into<String>) {
        self.aborted = Some(reason.into());
        self.done = true;
    }

    pub fn finish(mut self) -> LimitResult {
        let converged = self.aborted.is_none()
            && self.plateau.is_some()
            && !self.recurrence
            && self.checkpoints.last().is_some_and(|c| c.residual <= self.tol);
        let last = self.window.pop_back().expect("window is never empty");
        let (value, span, std) = match self.plateau {
            Some(s) => {
                let mean = s.sum.map(|z| z / s.count as f64);
                let var = (s.sum_sq / s.count as f64 - frobenius(&mean).powi(2)).max(0.0);
                let t_start = if s.start == 0 { 0.0 } else { self.checkpoints_t[s.start - 1] };
                (mean, Some((t_start, self.checkpoints_t[s.end])), Some(var.sqrt()))
            }
            None => (last, None, None),
        };
        LimitResult {
            value,
            checkpoints: self.checkpoints,
            plateau: span,
            plateau_std: std,
            recurrence_detected: self.recurrence,
            converged,
            tol: self.tol,
            metric: self.metric,
            aborted: self.aborted,
        }
    }
}

/// Sample `eval` on the schedule and detect the plateau.
///
/// `initial` is `F(0)`, used for the first residual.
pub fn plateau_limit<F>(schedule: &Schedule, metric: Metric, initial: CMat, mut eval: F) -> Result<LimitResult, LimitError>
where
    F: FnMut(f64) -> Result<CMat, LinalgError>,
{
    let mut tracker = PlateauTracker::new(schedule, metric, initial)?;
    for &t in &schedule.checkpoints {
        if tracker.done() {
            break;
        }
        tracker.push(eval(t)?);
    }
    Ok(tracker.finish())
}

/// `e^{−itA}` along increasing `t`, reusing the last step propagator when the increment repeats.
pub struct PropagatorWalk<'a> {
    a: &'a CMat,
    t: f64,
    current: CMat,
    step: Option<(f64, CMat)>,
    exp: fn(&CMat, f64) -> Result<CMat, LinalgError>,
}

impl<'a> PropagatorWalk<'a> {
    /// Walk of `e^{−itA}` via `op_exp`.
    pub fn new(a: &'a CMat) -> Self {
        Self::with_exp(a, op_exp)
    }

    /// Walk of an arbitrary one-parameter group `t ↦ exp(a, t)`.
    pub fn with_exp(a: &'a CMat, exp: fn(&CMat, f64) -> Result<CMat, LinalgError>) -> Self {
        let d = a.nrows();
        Self { a, t: 0.0, current: CMat::identity(d, d), step: None, exp }
    }

    pub fn at(&mut self, t: f64) -> Result<&CMat, LinalgError> {
        let dt = t - self.t;
        if dt != 0.0 {
            let reuse = matches!(&self.step, Some((s, _)) if (s - dt).abs() <= 1e-12 * t.abs().max(1.0));
            if !reuse {
                self.step = Some((dt, (self.exp)(self.a, dt)?));
            }
            let step = &self.step.as_ref().expect("step set above").1;
            self.current = crate::linalg::matmul(step, &self.current);
            self.t = t;
        }
        Ok(&self.current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity};

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, c(x, 0.0))
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::linear(10.0, 8, 1e-6).validate().is_ok());
        assert!(Schedule::geometric(0.1, 10.0, 8, 1e-6).validate().is_ok());
        assert!(Schedule::linear(10.0, 2, 1e-6).validate().is_err());
        let mut s = Schedule::linear(10.0, 8, 1e-6);
        s.checkpoints.swap(2, 3);
        assert_eq!(s.validate(), Err(ScheduleError::NotIncreasing(3)));
        s = Schedule::linear(10.0, 8, -1.0);
        assert_eq!(s.validate(), Err(ScheduleError::Tolerance(-1.0)));
        let g = Schedule::geometric(0.1, 10.0, 5, 1e-6);
        assert!((g.checkpoints[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_family_converges_immediately() {
        let s = Schedule::linear(4.0, 6, 1e-10);
        let r = plateau_limit(&s, Metric::Operator, identity(2), |_| Ok(identity(2))).unwrap();
        assert!(r.converged);
        assert_eq!(r.plateau, Some((0.0, 4.0)));
        assert_eq!(r.value, identity(2));
        assert_eq!(r.plateau_std, Some(0.0));
    }

    #[test]
    fn exponential_approach_is_averaged() {
        let s = Schedule::linear(20.0, 20, 1e-6);
        let r = plateau_limit(&s, Metric::Operator, scalar(0.0), |t| Ok(scalar(1.0 - (-t).exp()))).unwrap();
        assert!(r.converged);
        let (t0, _) = r.plateau.unwrap();
        // First residual below 1e-6 is e^{−t}(e − 1) ≤ 1e−6, i.e. t ≥ 14.4.
        assert!((14.0..=16.0).contains(&t0), "{t0}");
        assert!((r.value[(0, 0)].re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rebound_is_a_recurrence() {
        let s = Schedule::linear(10.0, 10, 1e-3);
        let r = plateau_limit(&s, Metric::Operator, scalar(0.0), |t| Ok(scalar(if t > 8.5 { 1.0 } else { 0.5 }))).unwrap();
        assert!(r.recurrence_detected);
        assert!(!r.converged);
        assert!(r.failure().unwrap().contains("recurrence"));
        let mut guarded = s.clone();
        guarded.recurrence_guard = false;
        let r = plateau_limit(&guarded, Metric::Operator, scalar(0.0), |t| Ok(scalar(if t > 8.5 { 1.0 } else { 0.5 }))).unwrap();
        assert!(r.converged);
    }

    #[test]
    fn oscillation_never_converges() {
        let s = Schedule::linear(10.0, 12, 1e-6);
        let r = plateau_limit(&s, Metric::Operator, scalar(1.0), |t| Ok(scalar(t.cos()))).unwrap();
        assert!(!r.converged);
        assert!(r.plateau.is_none());
        assert!(r.failure().unwrap().contains("not converged"));
    }

    #[test]
    fn induced_trace_norm_of_identity_and_transpose() {
        let d = 3;
        let id = identity(d * d);
        assert!((induced_trace_norm(&id) - 1.0).abs() < 1e-12);
        // Transposition maps E_jk to E_kj: every matrix unit keeps trace norm 1.
        let t = CMat::from_fn(d * d, d * d, |r, q| if r == (q % d) * d + q / d { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!((induced_trace_norm(&t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn walk_matches_direct_exponential() {
        let mut rng = crate::random::rng(9);
        let h = crate::random::hermitian(4, 1.0, &mut rng);
        let mut w = PropagatorWalk::new(&h);
        for k in 1..=10 {
            let t = 0.3 * k as f64;
            let a = w.at(t).unwrap().clone();
            assert!(frobenius(&(a - op_exp(&h, t).unwrap())) < 1e-12);
        }
        let a = w.at(3.75).unwrap().clone();
        assert!(frobenius(&(a - op_exp(&h, 3.75).unwrap())) < 1e-12);
    }
}
