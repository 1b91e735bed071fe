//! Delayed replicator dynamics over population shares of AIMD protocols.
//!
//! A strategy's share grows in proportion to its fitness advantage over the population,
//! with fitness read from the shares `delay` time units in the past:
//!
//! ```text
//! dx_i/dt = x_i(t) K ( f_i(X(t - tau)) - sum_j x_j(t - tau) f_j(X(t - tau)) )
//! ```
//!
//! Fitness comes from pairwise matches (`f_i = sum_j J(i, j) x_j`) or from three-player
//! interactions (`f_i = sum_p sum_q x_p x_q J(i; p, q)`). Sums include the diagonal.
//!
//! With `tau > 0` the right-hand side does not conserve `sum_i x_i`; shares are kept on
//! the simplex by removing the normal component, `x_i * sum_j dx_j/dt`, from the field.
//! This is the limit of renormalizing after every step and keeps the integrator at full
//! order. History on `[-tau, 0]` is constant and equal to the initial shares.

use thiserror::Error;

use crate::game::{GameConfig, GameError, PayoffMatrix, PayoffTensor, Strategy};

/// Negative shares beyond this are reported rather than clipped.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-9;
/// A share above `1 - FIXATION_THRESHOLD` counts as fixation.
pub const FIXATION_THRESHOLD: f64 = 1e-3;
/// Maximum sup-norm movement over the last tenth of the horizon for an interior rest.
pub const REST_TOLERANCE: f64 = 1e-6;
/// Initial shares must sum to one within this.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplicatorError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("expected {expected} initial shares, got {got}")]
    ShareCount { expected: usize, got: usize },
    #[error("initial share {index} is {value}, shares must be nonnegative")]
    NegativeInitialShare { index: usize, value: f64 },
    #[error("initial shares sum to {0}, expected 1")]
    NotOnSimplex(f64),
    #[error("gain {0} must be positive and finite")]
    Gain(f64),
    #[error("delay {0} must be nonnegative and finite")]
    Delay(f64),
    #[error("horizon {0} must be positive and finite")]
    Horizon(f64),
    #[error("step {0} must be positive and finite")]
    Step(f64),
    #[error("delay {delay} is not an integer multiple of step {step}")]
    StepDoesNotDivideDelay { delay: f64, step: f64 },
    #[error("{mode:?} fitness needs a {expected} of payoffs")]
    PayoffShape {
        mode: InteractionMode,
        expected: &'static str,
    },
    #[error("expected {expected} shares, got {got}")]
    Length { expected: usize, got: usize },
    #[error("share {index} fell to {value} at t = {time}; reduce the integration step")]
    NegativeShare { index: usize, value: f64, time: f64 },
    #[error("integration diverged at t = {0}")]
    Divergence(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionMode {
    Pairwise,
    Triple,
}

/// Payoffs feeding the fitness function.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoffs {
    Matrix(PayoffMatrix),
    Tensor(PayoffTensor),
}

impl Payoffs {
    fn len(&self) -> usize {
        match self {
            Self::Matrix(m) => m.len(),
            Self::Tensor(t) => t.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatorConfig {
    pub strategies: Vec<Strategy>,
    pub capacity: f64,
    pub lambda: f64,
    pub gain: f64,
    pub delay: f64,
    pub mode: InteractionMode,
    pub initial_shares: Vec<f64>,
    /// Integration step; `None` picks `min(delay / 10, horizon / 100)` adjusted to
    /// divide the delay.
    pub step: Option<f64>,
    pub horizon: f64,
}

impl ReplicatorConfig {
    /// Uniform initial shares and default step.
    pub fn new(
        strategies: Vec<Strategy>,
        capacity: f64,
        lambda: f64,
        gain: f64,
        delay: f64,
        mode: InteractionMode,
        horizon: f64,
    ) -> Self {
        let n = strategies.len();
        Self {
            strategies,
            capacity,
            lambda,
            gain,
            delay,
            mode,
            initial_shares: vec![1.0 / n as f64; n],
            step: None,
            horizon,
        }
    }

    pub fn game(&self) -> Result<GameConfig, ReplicatorError> {
        Ok(GameConfig::new(
            self.strategies.clone(),
            self.capacity,
            self.lambda,
        )?)
    }

    pub fn payoffs(&self) -> Result<Payoffs, ReplicatorError> {
        let game = self.game()?;
        Ok(match self.mode {
            InteractionMode::Pairwise => Payoffs::Matrix(game.payoff_matrix()),
            InteractionMode::Triple => Payoffs::Tensor(game.payoff_tensor()),
        })
    }

    /// Integration step, validated against the delay.
    pub fn step_size(&self) -> Result<f64, ReplicatorError> {
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(ReplicatorError::Delay(self.delay));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ReplicatorError::Horizon(self.horizon));
        }
        let step = match self.step {
            Some(step) => step,
            None if self.delay == 0.0 => 0.01 * self.horizon,
            None => {
                let target = (self.delay / 10.0).min(0.01 * self.horizon);
                self.delay / (self.delay / target).ceil()
            }
        };
        if !(step > 0.0 && step.is_finite()) {
            return Err(ReplicatorError::Step(step));
        }
        let ratio = self.delay / step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(ReplicatorError::StepDoesNotDivideDelay {
                delay: self.delay,
                step,
            });
        }
        Ok(step)
    }

    fn validate_shares(&self) -> Result<(), ReplicatorError> {
        let n = self.strategies.len();
        if self.initial_shares.len() != n {
            return Err(ReplicatorError::ShareCount {
                expected: n,
                got: self.initial_shares.len(),
            });
        }
        for (index, &value) in self.initial_shares.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ReplicatorError::NegativeInitialShare { index, value });
            }
        }
        let sum: f64 = self.initial_shares.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(ReplicatorError::NotOnSimplex(sum));
        }
        Ok(())
    }
}

/// Where the population ended up at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// One strategy holds more than `1 - FIXATION_THRESHOLD` of the population.
    Fixation(usize),
    /// Shares settled at an interior point.
    Interior(Vec<f64>),
    Undecided,
}

impl Outcome {
    pub fn describe(&self) -> String {
        match self {
            Self::Fixation(i) => format!("fixation of strategy {}", i + 1),
            Self::Interior(x) => format!(
                "interior rest at ({})",
                x.iter()
                    .map(|v| format!("{v:.6}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            Self::Undecided => "undecided (still moving at horizon)".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareTrajectory {
    pub times: Vec<f64>,
    pub shares: Vec<Vec<f64>>,
    pub outcome: Outcome,
}

impl ShareTrajectory {
    pub fn final_shares(&self) -> &[f64] {
        self.shares
            .last()
            .expect("trajectory holds the initial state")
    }
}

/// Fitness of each strategy in a population with the given shares.
pub fn fitness(
    shares: &[f64],
    payoffs: &Payoffs,
    mode: InteractionMode,
) -> Result<Vec<f64>, ReplicatorError> {
    let n = payoffs.len();
    if shares.len() != n {
        return Err(ReplicatorError::Length {
            expected: n,
            got: shares.len(),
        });
    }
    match (mode, payoffs) {
        (InteractionMode::Pairwise, Payoffs::Matrix(m)) => Ok((0..n)
            .map(|i| (0..n).map(|j| m.get(i, j) * shares[j]).sum())
            .collect()),
        (InteractionMode::Triple, Payoffs::Tensor(t)) => Ok((0..n)
            .map(|i| {
                (0..n)
                    .flat_map(|p| (0..n).map(move |q| (p, q)))
                    .map(|(p, q)| shares[p] * shares[q] * t.get(i, p, q))
                    .sum()
            })
            .collect()),
        (InteractionMode::Pairwise, _) => Err(ReplicatorError::PayoffShape {
            mode,
            expected: "matrix",
        }),
        (InteractionMode::Triple, _) => Err(ReplicatorError::PayoffShape {
            mode,
            expected: "tensor",
        }),
    }
}

fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

struct Field<'a> {
    payoffs: &'a Payoffs,
    mode: InteractionMode,
    gain: f64,
}

impl Field<'_> {
    /// Simplex-tangent replicator field at `state` with fitness taken from `delayed`.
    fn eval(&self, state: &[f64], delayed: &[f64]) -> Vec<f64> {
        let f = fitness(delayed, self.payoffs, self.mode).expect("shape checked");
        let mean = weighted_sum(delayed, &f);
        let raw: Vec<f64> = state
            .iter()
            .zip(&f)
            .map(|(x, fi)| x * self.gain * (fi - mean))
            .collect();
        let drift: f64 = raw.iter().sum();
        raw.iter().zip(state).map(|(r, x)| r - x * drift).collect()
    }
}

fn axpy(base: &[f64], scale: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + scale * d).collect()
}

/// Fixed-step classical Runge-Kutta integration of the delayed replicator equation.
pub fn integrate(config: &ReplicatorConfig) -> Result<ShareTrajectory, ReplicatorError> {
    let payoffs = config.payoffs()?;
    config.validate_shares()?;
    if !(config.gain > 0.0 && config.gain.is_finite()) {
        return Err(ReplicatorError::Gain(config.gain));
    }
    let h = config.step_size()?;
    let lag = (config.delay / h).round() as usize;
    let steps = ((config.horizon / h) - 1e-9).ceil().max(1.0) as usize;
    let field = Field {
        payoffs: &payoffs,
        mode: config.mode,
        gain: config.gain,
    };
    let x0 = config.initial_shares.clone();

    let mut shares: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    shares.push(x0.clone());
    slopes.push(field.eval(&x0, &x0));

    // state at grid index k - lag, constant history before 0
    let grid = |shares: &[Vec<f64>], k: usize| -> Vec<f64> {
        if k < lag {
            x0.clone()
        } else {
            shares[k - lag].clone()
        }
    };
    // state half a step after grid index k - lag, by cubic Hermite interpolation
    let half = |shares: &[Vec<f64>], slopes: &[Vec<f64>], k: usize| -> Vec<f64> {
        if k < lag {
            return x0.clone();
        }
        let (y0, y1) = (&shares[k - lag], &shares[k - lag + 1]);
        let (d0, d1) = (&slopes[k - lag], &slopes[k - lag + 1]);
        (0..y0.len())
            .map(|i| 0.5 * (y0[i] + y1[i]) + h * (d0[i] - d1[i]) / 8.0)
            .collect()
    };

    for n in 0..steps {
        let y = &shares[n];
        let (k1, k2, k3, k4);
        if lag == 0 {
            k1 = field.eval(y, y);
            let y2 = axpy(y, 0.5 * h, &k1);
            k2 = field.eval(&y2, &y2);
            let y3 = axpy(y, 0.5 * h, &k2);
            k3 = field.eval(&y3, &y3);
            let y4 = axpy(y, h, &k3);
            k4 = field.eval(&y4, &y4);
        } else {
            let d_now = grid(&shares, n);
            let d_half = half(&shares, &slopes, n);
            let d_next = grid(&shares, n + 1);
            k1 = field.eval(y, &d_now);
            k2 = field.eval(&axpy(y, 0.5 * h, &k1), &d_half);
            k3 = field.eval(&axpy(y, 0.5 * h, &k2), &d_half);
            k4 = field.eval(&axpy(y, h, &k3), &d_next);
        }
        let time = (n + 1) as f64 * h;
        let mut next: Vec<f64> = (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(ReplicatorError::Divergence(time));
        }
        if let Some((index, &value)) = next
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -NEGATIVITY_TOLERANCE)
        {
            return Err(ReplicatorError::NegativeShare { index, value, time });
        }
        next.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = next.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(ReplicatorError::Divergence(time));
        }
        next.iter_mut().for_each(|v| *v /= total);

        let delayed = if lag == 0 {
            next.clone()
        } else {
            grid(&shares, n + 1)
        };
        slopes.push(field.eval(&next, &delayed));
        shares.push(next);
    }

    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let outcome = classify_outcome(&times, &shares);
    Ok(ShareTrajectory {
        times,
        shares,
        outcome,
    })
}

fn classify_outcome(times: &[f64], shares: &[Vec<f64>]) -> Outcome {
    let last = shares.last().expect("nonempty");
    if let Some(i) = last.iter().position(|&x| x > 1.0 - FIXATION_THRESHOLD) {
        return Outcome::Fixation(i);
    }
    let end = *times.last().expect("nonempty");
    let window_start = end - 0.1 * end;
    let movement = times
        .iter()
        .zip(shares)
        .filter(|(t, _)| **t >= window_start)
        .map(|(_, x)| crate::dynamics::sup_distance(x, last))
        .fold(0.0, f64::max);
    if movement < REST_TOLERANCE {
        Outcome::Interior(last.clone())
    } else {
        Outcome::Undecided
    }
}

/// How far a constant population state is from being a rest point.
#[derive(Debug, Clone, PartialEq)]
pub struct RestPointReport {
    /// Largest `|f_i - mean fitness|` over strategies present in the population.
    pub residual: f64,
    /// Largest `|x_i (f_i - mean fitness)|`: zero at every rest point of the dynamics,
    /// including pure populations.
    pub dynamic_residual: f64,
}

pub fn rest_point_check(
    config: &ReplicatorConfig,
    shares: &[f64],
) -> Result<RestPointReport, ReplicatorError> {
    let payoffs = config.payoffs()?;
    let f = fitness(shares, &payoffs, config.mode)?;
    let mean = weighted_sum(shares, &f);
    let mut residual: f64 = 0.0;
    let mut dynamic_residual: f64 = 0.0;
    for (x, fi) in shares.iter().zip(&f) {
        if *x > 0.0 {
            residual = residual.max((fi - mean).abs());
        }
        dynamic_residual = dynamic_residual.max((x * (fi - mean)).abs());
    }
    Ok(RestPointReport {
        residual,
        dynamic_residual,
    })
}
