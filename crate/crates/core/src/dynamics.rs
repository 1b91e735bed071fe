//! Impulsive AIMD rate dynamics on a fluid network.
//!
//! Between losses every rate grows linearly, `x(t) = x(t_prev) + alpha (t - t_prev)`. The
//! first instant some node constraint `[Xi x]_j` reaches one is a loss event and all
//! connections multiply their rate by `beta` at once (synchronized losses). Because the
//! flow is affine, each event time is found exactly; no root search is involved.
//!
//! Every trajectory converges to the sawtooth with period `T = 1 / max_j [Xi gamma]_j`
//! and peak rates `x* = gamma T`, where `gamma_i = alpha_i / (1 - beta_i)`.

use thiserror::Error;

use crate::net_model::LoadMatrix;

/// Tolerance for "on the overload boundary" and for admissibility of a state.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;
/// Margin by which a post-drop state must stay inside the admissible set.
pub const INTERIOR_MARGIN: f64 = 1e-12;
/// Hitting times this close to the minimum are reported as simultaneous.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Stop threshold for drop-map iteration on successive peaks.
pub const ITERATION_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("profile has {alpha} increase rates but {beta} decrease factors")]
    ProfileLength { alpha: usize, beta: usize },
    #[error("profile is empty")]
    EmptyProfile,
    #[error("increase rate alpha[{index}] = {value} must be nonnegative and finite")]
    Alpha { index: usize, value: f64 },
    #[error("decrease factor beta[{index}] = {value} must lie in [0, 1)")]
    Beta { index: usize, value: f64 },
    #[error("expected {expected} rates or users, got {got}")]
    Length { expected: usize, got: usize },
    #[error("rate {index} is {value}, rates must be nonnegative and finite")]
    NegativeRate { index: usize, value: f64 },
    #[error(
        "state is outside the admissible set: utilization {utilization} of row {row} exceeds 1"
    )]
    OutsideAdmissible { row: usize, utilization: f64 },
    #[error("peak is not on the overload boundary: max utilization is {max_utilization}")]
    NotOnBoundary { max_utilization: f64 },
    #[error(
        "post-drop state is not strictly admissible at time {time}: \
         utilization {utilization} of row {row}"
    )]
    DecreaseNotInterior {
        time: f64,
        row: usize,
        utilization: f64,
    },
    #[error("no constraint ever binds: rates never overload the network")]
    NeverOverloads,
    #[error("trajectory has {0} drops, at least 3 are needed")]
    TooFewDrops(usize),
    #[error("drop-map iteration did not settle within {0} iterations")]
    NoConvergence(usize),
}

/// Per-connection AIMD parameters with the cached ratio `gamma_i = alpha_i / (1 - beta_i)`.
///
/// `alpha_i = 0` is accepted and models a connection whose rate is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
}

impl StrategyProfile {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self, DynamicsError> {
        if alpha.len() != beta.len() {
            return Err(DynamicsError::ProfileLength {
                alpha: alpha.len(),
                beta: beta.len(),
            });
        }
        if alpha.is_empty() {
            return Err(DynamicsError::EmptyProfile);
        }
        for (index, &value) in alpha.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(DynamicsError::Alpha { index, value });
            }
        }
        for (index, &value) in beta.iter().enumerate() {
            if !(0.0..1.0).contains(&value) {
                return Err(DynamicsError::Beta { index, value });
            }
        }
        let gamma = alpha
            .iter()
            .zip(&beta)
            .map(|(a, b)| a / (1.0 - b))
            .collect();
        Ok(Self { alpha, beta, gamma })
    }

    /// Builds a profile from `(alpha, beta)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, DynamicsError> {
        let (alpha, beta) = pairs.iter().copied().unzip();
        Self::new(alpha, beta)
    }

    /// `n` copies of the same `(alpha, beta)`.
    pub fn uniform(n: usize, alpha: f64, beta: f64) -> Result<Self, DynamicsError> {
        Self::new(vec![alpha; n], vec![beta; n])
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Componentwise `beta * rates`.
    pub fn decrease(&self, rates: &[f64]) -> Vec<f64> {
        rates.iter().zip(&self.beta).map(|(x, b)| b * x).collect()
    }

    /// `rates + alpha * dt`.
    pub fn advance(&self, rates: &[f64], dt: f64) -> Vec<f64> {
        rates
            .iter()
            .zip(&self.alpha)
            .map(|(x, a)| x + a * dt)
            .collect()
    }
}

/// First constraint hit from a given state.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    /// Time elapsed from the starting state.
    pub time: f64,
    pub pre_rates: Vec<f64>,
    pub binding_rows: Vec<usize>,
}

/// A synchronized loss: all rates drop from `pre_rates` to `beta * pre_rates`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropEvent {
    pub time: f64,
    pub pre_rates: Vec<f64>,
    pub post_rates: Vec<f64>,
    pub binding_rows: Vec<usize>,
}

/// Exact piecewise-affine solution of the impulsive dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial_rates: Vec<f64>,
    pub alpha: Vec<f64>,
    pub events: Vec<DropEvent>,
    pub horizon: f64,
}

impl Trajectory {
    /// Rate vector at time `t` in `[0, horizon]`. At an event time the post-drop rate is
    /// returned.
    pub fn rate_at(&self, t: f64) -> Vec<f64> {
        let idx = self.events.partition_point(|e| e.time <= t);
        let (base, t0) = match idx {
            0 => (&self.initial_rates, 0.0),
            i => (&self.events[i - 1].post_rates, self.events[i - 1].time),
        };
        base.iter()
            .zip(&self.alpha)
            .map(|(x, a)| x + a * (t - t0))
            .collect()
    }

    pub fn peaks(&self) -> impl Iterator<Item = &[f64]> {
        self.events.iter().map(|e| e.pre_rates.as_slice())
    }

    /// Gaps between consecutive drop events.
    pub fn intervals(&self) -> Vec<f64> {
        self.events
            .windows(2)
            .map(|w| w[1].time - w[0].time)
            .collect()
    }
}

/// When to stop a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    MaxTime(f64),
    MaxDrops(usize),
}

/// The unique limit cycle: period and peak rates.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub period: f64,
    pub peak_rates: Vec<f64>,
    pub binding_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// `||peak_n - x*||_inf` for every drop.
    pub distances: Vec<f64>,
    /// `|interval_n - T|` for every gap between drops.
    pub interval_errors: Vec<f64>,
    /// First index from which `distances` never increases (up to rounding).
    pub monotone_from: usize,
    /// `monotone_from` lies in the first half of the sequence.
    pub eventually_monotone: bool,
    /// At least 50 drops and the final distance exceeds the first (beyond rounding).
    pub diverging: bool,
}

impl ConvergenceReport {
    pub fn final_distance(&self) -> f64 {
        *self
            .distances
            .last()
            .expect("report holds at least 3 drops")
    }

    pub fn final_interval_error(&self) -> f64 {
        self.interval_errors.last().copied().unwrap_or(f64::NAN)
    }
}

fn check_rates(rates: &[f64], expected: usize) -> Result<(), DynamicsError> {
    if rates.len() != expected {
        return Err(DynamicsError::Length {
            expected,
            got: rates.len(),
        });
    }
    if let Some((index, &value)) = rates
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(DynamicsError::NegativeRate { index, value });
    }
    Ok(())
}

fn check_profile(profile: &StrategyProfile, load: &LoadMatrix) -> Result<(), DynamicsError> {
    if profile.len() != load.num_users() {
        return Err(DynamicsError::Length {
            expected: load.num_users(),
            got: profile.len(),
        });
    }
    Ok(())
}

fn max_row(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
}

/// First time a constraint binds, starting from `rates` inside the admissible set.
pub fn next_drop(
    rates: &[f64],
    profile: &StrategyProfile,
    load: &LoadMatrix,
) -> Result<Hit, DynamicsError> {
    check_profile(profile, load)?;
    check_rates(rates, load.num_users())?;
    let utilization = load.apply(rates);
    let (row, worst) = max_row(&utilization);
    if worst > 1.0 + BOUNDARY_TOLERANCE {
        return Err(DynamicsError::OutsideAdmissible {
            row,
            utilization: worst,
        });
    }
    let growth = load.apply(profile.alpha());

    let times: Vec<Option<f64>> = utilization
        .iter()
        .zip(&growth)
        .map(|(&u, &g)| (g > 0.0).then(|| ((1.0 - u) / g).max(0.0)))
        .collect();
    let time = times
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !time.is_finite() {
        return Err(DynamicsError::NeverOverloads);
    }
    let tie = TIE_TOLERANCE * time.max(1.0);
    let binding_rows = times
        .iter()
        .enumerate()
        .filter_map(|(j, t)| t.filter(|&t| t - time <= tie).map(|_| j))
        .collect();
    Ok(Hit {
        time,
        pre_rates: profile.advance(rates, time),
        binding_rows,
    })
}

/// Checks that the decreased state `post` is strictly inside the admissible set.
fn check_decrease(post: &[f64], load: &LoadMatrix, time: f64) -> Result<(), DynamicsError> {
    let (row, utilization) = max_row(&load.apply(post));
    if utilization >= 1.0 - INTERIOR_MARGIN {
        return Err(DynamicsError::DecreaseNotInterior {
            time,
            row,
            utilization,
        });
    }
    Ok(())
}

/// Maps a peak on the overload boundary to the next peak: decrease by `beta`, then
/// grow by `alpha` until the first constraint binds.
pub fn drop_map(
    peak: &[f64],
    profile: &StrategyProfile,
    load: &LoadMatrix,
) -> Result<Vec<f64>, DynamicsError> {
    check_profile(profile, load)?;
    check_rates(peak, load.num_users())?;
    let (_, max_utilization) = max_row(&load.apply(peak));
    if (max_utilization - 1.0).abs() > BOUNDARY_TOLERANCE {
        return Err(DynamicsError::NotOnBoundary { max_utilization });
    }
    let post = profile.decrease(peak);
    check_decrease(&post, load, 0.0)?;
    Ok(next_drop(&post, profile, load)?.pre_rates)
}

/// Iterates [`drop_map`] from `peak` until successive peaks differ by less than
/// [`ITERATION_TOLERANCE`] in the sup norm. Returns the last peak and the number of
/// iterations used.
pub fn iterate_drop_map(
    peak: &[f64],
    profile: &StrategyProfile,
    load: &LoadMatrix,
) -> Result<(Vec<f64>, usize), DynamicsError> {
    let mut current = peak.to_vec();
    for iteration in 1..=MAX_ITERATIONS {
        let next = drop_map(&current, profile, load)?;
        let step = sup_distance(&next, &current);
        current = next;
        if step < ITERATION_TOLERANCE {
            return Ok((current, iteration));
        }
    }
    Err(DynamicsError::NoConvergence(MAX_ITERATIONS))
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Event-driven simulation from `initial_rates` until `stop`.
///
/// With [`Stop::MaxTime`], a state that never overloads (all `alpha = 0`) simply runs to
/// the horizon without events; with [`Stop::MaxDrops`] it is an error.
pub fn simulate(
    load: &LoadMatrix,
    profile: &StrategyProfile,
    initial_rates: &[f64],
    stop: Stop,
) -> Result<Trajectory, DynamicsError> {
    check_profile(profile, load)?;
    check_rates(initial_rates, load.num_users())?;
    let (row, utilization) = max_row(&load.apply(initial_rates));
    if utilization > 1.0 + BOUNDARY_TOLERANCE {
        return Err(DynamicsError::OutsideAdmissible { row, utilization });
    }

    let mut events: Vec<DropEvent> = Vec::new();
    let mut state = initial_rates.to_vec();
    let mut now = 0.0;
    let horizon = loop {
        match stop {
            Stop::MaxDrops(n) if events.len() >= n => break now,
            _ => {}
        }
        let hit = match next_drop(&state, profile, load) {
            Ok(hit) => hit,
            Err(DynamicsError::NeverOverloads) => match stop {
                Stop::MaxTime(t) => break t,
                Stop::MaxDrops(_) => return Err(DynamicsError::NeverOverloads),
            },
            Err(e) => return Err(e),
        };
        let time = now + hit.time;
        if let Stop::MaxTime(t) = stop {
            if time > t {
                break t;
            }
        }
        let post_rates = profile.decrease(&hit.pre_rates);
        check_decrease(&post_rates, load, time)?;
        state = post_rates.clone();
        now = time;
        events.push(DropEvent {
            time,
            pre_rates: hit.pre_rates,
            post_rates,
            binding_rows: hit.binding_rows,
        });
    };

    Ok(Trajectory {
        initial_rates: initial_rates.to_vec(),
        alpha: profile.alpha().to_vec(),
        events,
        horizon,
    })
}

/// Closed-form limit cycle: `T = 1 / max_j [Xi gamma]_j`, `x* = gamma T`.
pub fn fixed_point(
    load: &LoadMatrix,
    profile: &StrategyProfile,
) -> Result<FixedPoint, DynamicsError> {
    check_profile(profile, load)?;
    let rows = load.apply(profile.gamma());
    let (_, max) = max_row(&rows);
    if max <= 0.0 {
        return Err(DynamicsError::NeverOverloads);
    }
    let period = 1.0 / max;
    let binding_rows = rows
        .iter()
        .enumerate()
        .filter(|(_, &r)| r >= max * (1.0 - TIE_TOLERANCE))
        .map(|(j, _)| j)
        .collect();
    Ok(FixedPoint {
        period,
        peak_rates: profile.gamma().iter().map(|g| g * period).collect(),
        binding_rows,
    })
}

/// Mean rate of each connection over the limit cycle, `0.5 (1 + beta_i) x*_i`.
pub fn average_throughput(fixed_point: &FixedPoint, profile: &StrategyProfile) -> Vec<f64> {
    fixed_point
        .peak_rates
        .iter()
        .zip(profile.beta())
        .map(|(x, b)| 0.5 * (1.0 + b) * x)
        .collect()
}

/// Distance of every simulated peak (and inter-drop gap) from the limit cycle.
pub fn verify_convergence(
    trajectory: &Trajectory,
    fixed_point: &FixedPoint,
) -> Result<ConvergenceReport, DynamicsError> {
    let n = trajectory.events.len();
    if n < 3 {
        return Err(DynamicsError::TooFewDrops(n));
    }
    let distances: Vec<f64> = trajectory
        .peaks()
        .map(|p| sup_distance(p, &fixed_point.peak_rates))
        .collect();
    let interval_errors = trajectory
        .intervals()
        .into_iter()
        .map(|dt| (dt - fixed_point.period).abs())
        .collect();

    let scale = fixed_point
        .peak_rates
        .iter()
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let slack = 1e-12 * scale;
    let mut monotone_from = n - 1;
    while monotone_from > 0 && distances[monotone_from] <= distances[monotone_from - 1] + slack {
        monotone_from -= 1;
    }
    let diverging = n >= 50 && distances[n - 1] > distances[0] + slack;

    Ok(ConvergenceReport {
        distances,
        interval_errors,
        monotone_from,
        eventually_monotone: monotone_from <= n / 2,
        diverging,
    })
}
