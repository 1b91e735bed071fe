//! Protocol-selection game on a shared bottleneck of capacity `c`.
//!
//! Each player picks an AIMD strategy `(alpha, beta)`. The chosen profile settles on the
//! single-link limit cycle `T = c / sum_k gamma_k`, `x*_i = gamma_i T`, and player `i`
//! receives `J_i = 0.5 (1 + beta_i) x*_i - lambda / T`: mean throughput minus `lambda`
//! times the loss-event rate.
//!
//! For two strategies the differences
//!
//! ```text
//! D1(lambda) = J(s1, s2) - J(s2, s2)      D2(lambda) = J(s2, s1) - J(s1, s1)
//! ```
//!
//! are affine in `lambda` and their sum does not depend on it (the loss terms cancel).
//! Every regime boundary is therefore an exact affine root.

use nalgebra::DMatrix;
use thiserror::Error;

/// Sign tests and best-response ties use this tolerance.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("strategy {index}: increase rate {value} must be positive and finite")]
    Alpha { index: usize, value: f64 },
    #[error("strategy {index}: decrease factor {value} must lie in [0, 1)")]
    Beta { index: usize, value: f64 },
    #[error("capacity {0} must be positive and finite")]
    Capacity(f64),
    #[error("lambda {0} must be nonnegative and finite")]
    Lambda(f64),
    #[error("game needs at least {needed} strategies, got {got}")]
    TooFewStrategies { needed: usize, got: usize },
    #[error("strategies {0} and {1} have identical parameters")]
    DuplicateStrategy(usize, usize),
    #[error("payoff profile is empty")]
    EmptyProfile,
    #[error("strategies are not ordered by aggressiveness (alpha and beta non-increasing)")]
    NotOrdered,
    #[error("the most aggressive strategy is not dominant for any lambda >= 0")]
    NeverDominant,
    #[error("payoff differences sum to zero: the strategies are payoff-equivalent")]
    Degenerate,
    #[error("payoff differences do not depend on lambda")]
    LambdaIndependent,
    #[error("opponent profile {0} is empty")]
    EmptyOpponents(usize),
}

/// An AIMD protocol choice.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub alpha: f64,
    pub beta: f64,
    pub label: String,
}

impl Strategy {
    pub fn new(alpha: f64, beta: f64, label: impl Into<String>) -> Result<Self, GameError> {
        let s = Self {
            alpha,
            beta,
            label: label.into(),
        };
        s.validate(0)?;
        Ok(s)
    }

    fn validate(&self, index: usize) -> Result<(), GameError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(GameError::Alpha {
                index,
                value: self.alpha,
            });
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(GameError::Beta {
                index,
                value: self.beta,
            });
        }
        Ok(())
    }

    /// `alpha / (1 - beta)`: the strategy's weight in the shared limit cycle.
    pub fn gamma(&self) -> f64 {
        self.alpha / (1.0 - self.beta)
    }
}

fn check_capacity(capacity: f64) -> Result<(), GameError> {
    if capacity > 0.0 && capacity.is_finite() {
        Ok(())
    } else {
        Err(GameError::Capacity(capacity))
    }
}

fn check_lambda(lambda: f64) -> Result<(), GameError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(GameError::Lambda(lambda))
    }
}

/// Payoff of every player when the players use `chosen` on a link of `capacity`.
pub fn profile_payoffs(
    chosen: &[&Strategy],
    capacity: f64,
    lambda: f64,
) -> Result<Vec<f64>, GameError> {
    if chosen.is_empty() {
        return Err(GameError::EmptyProfile);
    }
    check_capacity(capacity)?;
    for (index, s) in chosen.iter().enumerate() {
        s.validate(index)?;
    }
    let total: f64 = chosen.iter().map(|s| s.gamma()).sum();
    let period = capacity / total;
    let loss = lambda / period;
    Ok(chosen
        .iter()
        .map(|s| 0.5 * (1.0 + s.beta) * s.gamma() * period - loss)
        .collect())
}

/// Payoff to the first player, who uses `own` against `opponents`.
fn own_payoff(own: &Strategy, opponents: &[&Strategy], capacity: f64, lambda: f64) -> f64 {
    let mut chosen = Vec::with_capacity(opponents.len() + 1);
    chosen.push(own);
    chosen.extend_from_slice(opponents);
    profile_payoffs(&chosen, capacity, lambda).expect("inputs validated by caller")[0]
}

/// Strategy set, link capacity and loss sensitivity.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    strategies: Vec<Strategy>,
    capacity: f64,
    lambda: f64,
}

impl GameConfig {
    pub fn new(strategies: Vec<Strategy>, capacity: f64, lambda: f64) -> Result<Self, GameError> {
        if strategies.len() < 2 {
            return Err(GameError::TooFewStrategies {
                needed: 2,
                got: strategies.len(),
            });
        }
        for (i, s) in strategies.iter().enumerate() {
            s.validate(i)?;
            for (j, t) in strategies[..i].iter().enumerate() {
                if s.alpha == t.alpha && s.beta == t.beta {
                    return Err(GameError::DuplicateStrategy(j, i));
                }
            }
        }
        check_capacity(capacity)?;
        check_lambda(lambda)?;
        Ok(Self {
            strategies,
            capacity,
            lambda,
        })
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same strategies and capacity, different `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self, GameError> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    /// `values[(i, j)]`: payoff of `s_i` against one opponent playing `s_j`.
    pub fn payoff_matrix(&self) -> PayoffMatrix {
        let n = self.strategies.len();
        let values = DMatrix::from_fn(n, n, |i, j| {
            own_payoff(
                &self.strategies[i],
                &[&self.strategies[j]],
                self.capacity,
                self.lambda,
            )
        });
        PayoffMatrix { values }
    }

    /// `J(a; p, q)`: payoff of `s_a` against two opponents playing `s_p` and `s_q`.
    pub fn payoff_tensor(&self) -> PayoffTensor {
        let n = self.strategies.len();
        let s = &self.strategies;
        let mut values = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for p in 0..n {
                for q in 0..n {
                    values.push(own_payoff(
                        &s[a],
                        &[&s[p], &s[q]],
                        self.capacity,
                        self.lambda,
                    ));
                }
            }
        }
        PayoffTensor { n, values }
    }
}

/// Symmetric two-player payoff table, row player's view.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    pub values: DMatrix<f64>,
}

impl PayoffMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn get(&self, own: usize, opponent: usize) -> f64 {
        self.values[(own, opponent)]
    }
}

/// Three-player payoffs `J(a; p, q)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTensor {
    n: usize,
    values: Vec<f64>,
}

impl PayoffTensor {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, own: usize, p: usize, q: usize) -> f64 {
        self.values[(own * self.n + p) * self.n + q]
    }
}

/// An affine function `intercept + slope * lambda`, recovered from two evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    intercept: f64,
    slope: f64,
}

impl Affine {
    fn sample(f: impl Fn(f64) -> f64) -> Self {
        let intercept = f(0.0);
        Self {
            intercept,
            slope: f(1.0) - intercept,
        }
    }

    fn root(&self) -> Option<f64> {
        (self.slope != 0.0).then(|| -self.intercept / self.slope)
    }
}

/// `D1 = J(s1, s2) - J(s2, s2)` and `D2 = J(s2, s1) - J(s1, s1)` at `lambda`.
fn differences(s1: &Strategy, s2: &Strategy, capacity: f64, lambda: f64) -> (f64, f64) {
    let j = |own: &Strategy, opp: &Strategy| own_payoff(own, &[opp], capacity, lambda);
    (j(s1, s2) - j(s2, s2), j(s2, s1) - j(s1, s1))
}

fn validate_pair(s1: &Strategy, s2: &Strategy, capacity: f64) -> Result<(), GameError> {
    s1.validate(0)?;
    s2.validate(1)?;
    check_capacity(capacity)
}

/// Largest `lambda*` such that, for every `lambda < lambda*`, the first (most aggressive)
/// strategy is the strict best response to every two-player opponent in the set.
pub fn dominance_threshold(config: &GameConfig) -> Result<f64, GameError> {
    let opponents: Vec<Vec<Strategy>> = config.strategies.iter().map(|s| vec![s.clone()]).collect();
    dominance_threshold_against(config, &opponents)
}

/// As [`dominance_threshold`], for arbitrary opponent profiles (one entry per profile of
/// the other `N - 1` players).
pub fn dominance_threshold_against(
    config: &GameConfig,
    opponent_profiles: &[Vec<Strategy>],
) -> Result<f64, GameError> {
    let s = &config.strategies;
    let ordered = s
        .windows(2)
        .all(|w| w[0].alpha >= w[1].alpha && w[0].beta >= w[1].beta);
    if !ordered {
        return Err(GameError::NotOrdered);
    }
    let mut threshold = f64::INFINITY;
    for (k, profile) in opponent_profiles.iter().enumerate() {
        if profile.is_empty() {
            return Err(GameError::EmptyOpponents(k));
        }
        for (i, o) in profile.iter().enumerate() {
            o.validate(i)?;
        }
        let opponents: Vec<&Strategy> = profile.iter().collect();
        for alt in &s[1..] {
            let gap = Affine::sample(|lambda| {
                own_payoff(&s[0], &opponents, config.capacity, lambda)
                    - own_payoff(alt, &opponents, config.capacity, lambda)
            });
            if gap.intercept <= TIE_TOLERANCE {
                return Err(GameError::NeverDominant);
            }
            if gap.slope < 0.0 {
                threshold = threshold.min(-gap.intercept / gap.slope);
            }
        }
    }
    Ok(threshold)
}

/// Probability of playing `s1` that leaves the opponent indifferent. Not clamped: values
/// outside `(0, 1)` signal a pure regime.
pub fn mixed_probability(
    s1: &Strategy,
    s2: &Strategy,
    capacity: f64,
    lambda: f64,
) -> Result<f64, GameError> {
    validate_pair(s1, s2, capacity)?;
    let (d1, d2) = differences(s1, s2, capacity, lambda);
    let denominator = d1 + d2;
    if denominator.abs() < TIE_TOLERANCE {
        return Err(GameError::Degenerate);
    }
    Ok(d1 / denominator)
}

/// Regime boundaries of the two-strategy game in `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaBounds {
    /// Root of `D2`, where the mixed probability equals one.
    pub p_one_root: f64,
    /// Root of `D1`, where the mixed probability equals zero.
    pub p_zero_root: f64,
    /// Open interval (restricted to `lambda >= 0`) on which `0 < p < 1`; `None` when the
    /// game has no mixed regime for any admissible `lambda`.
    pub mixed: Option<(f64, f64)>,
    /// `D1 + D2 > 0`: the mixed regime is hawk-dove like (the mixed equilibrium is an
    /// ESS); otherwise it is a coordination game.
    pub hawk_dove: bool,
    /// `alpha_2 (1 - beta_1) - alpha_1 (1 - beta_2)` when `alpha_1 <= alpha_2` and
    /// `beta_1 >= beta_2`; a mixed regime of that ordering needs it negative.
    pub side_condition: Option<f64>,
}

impl LambdaBounds {
    pub fn side_condition_holds(&self) -> Option<bool> {
        self.side_condition.map(|v| v < 0.0)
    }
}

pub fn lambda_bounds(
    s1: &Strategy,
    s2: &Strategy,
    capacity: f64,
) -> Result<LambdaBounds, GameError> {
    validate_pair(s1, s2, capacity)?;
    let d1 = Affine::sample(|l| differences(s1, s2, capacity, l).0);
    let d2 = Affine::sample(|l| differences(s1, s2, capacity, l).1);
    let sum = d1.intercept + d2.intercept;
    if sum.abs() < TIE_TOLERANCE {
        return Err(GameError::Degenerate);
    }
    let (Some(p_zero_root), Some(p_one_root)) = (d1.root(), d2.root()) else {
        return Err(GameError::LambdaIndependent);
    };
    let lo = p_zero_root.min(p_one_root).max(0.0);
    let hi = p_zero_root.max(p_one_root);
    let mixed = (hi > lo).then_some((lo, hi));
    let side_condition = (s1.alpha <= s2.alpha && s1.beta >= s2.beta)
        .then_some(s2.alpha * (1.0 - s1.beta) - s1.alpha * (1.0 - s2.beta));
    Ok(LambdaBounds {
        p_one_root,
        p_zero_root,
        mixed,
        hawk_dove: sum > 0.0,
        side_condition,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquilibriumKind {
    /// The strategy with this index strictly dominates the other.
    DominantPure(usize),
    /// Coordination game: both pure profiles are strict equilibria.
    Pure(Vec<usize>),
    /// Interior equilibrium with probability `p` of playing the first strategy.
    Mixed(f64),
    /// A payoff difference vanishes; the classification is not decided.
    Degenerate,
}

impl EquilibriumKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DominantPure(0) => "dominant_s1",
            Self::DominantPure(_) => "dominant_s2",
            Self::Pure(_) => "pure_coordination",
            Self::Mixed(_) => "mixed",
            Self::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    /// Interval of `lambda` on which the game has a mixed equilibrium, if any.
    pub lambda_interval: Option<(f64, f64)>,
    pub ess: bool,
    pub d1: f64,
    pub d2: f64,
}

impl EquilibriumResult {
    pub fn mixing_probability(&self) -> Option<f64> {
        match self.kind {
            EquilibriumKind::Mixed(p) => Some(p),
            _ => None,
        }
    }
}

/// Classifies the symmetric two-strategy game at `lambda` from the signs of `D1`, `D2`.
pub fn classify_equilibrium(
    s1: &Strategy,
    s2: &Strategy,
    capacity: f64,
    lambda: f64,
) -> Result<EquilibriumResult, GameError> {
    validate_pair(s1, s2, capacity)?;
    check_lambda(lambda)?;
    let (d1, d2) = differences(s1, s2, capacity, lambda);
    let lambda_interval = lambda_bounds(s1, s2, capacity).ok().and_then(|b| b.mixed);
    let positive = |d: f64| d > TIE_TOLERANCE;
    let negative = |d: f64| d < -TIE_TOLERANCE;
    let (kind, ess) = if positive(d1) && negative(d2) {
        (EquilibriumKind::DominantPure(0), true)
    } else if negative(d1) && positive(d2) {
        (EquilibriumKind::DominantPure(1), true)
    } else if positive(d1) && positive(d2) {
        (EquilibriumKind::Mixed(d1 / (d1 + d2)), true)
    } else if negative(d1) && negative(d2) {
        // each pure profile is a strict equilibrium, hence evolutionarily stable
        (EquilibriumKind::Pure(vec![0, 1]), true)
    } else {
        (EquilibriumKind::Degenerate, false)
    };
    Ok(EquilibriumResult {
        kind,
        lambda_interval,
        ess,
        d1,
        d2,
    })
}

/// Indices of the strategies in `set` maximizing the payoff against `opponents`.
pub fn best_response(
    set: &[Strategy],
    opponents: &[Strategy],
    capacity: f64,
    lambda: f64,
) -> Result<Vec<usize>, GameError> {
    if set.is_empty() {
        return Err(GameError::TooFewStrategies { needed: 1, got: 0 });
    }
    check_capacity(capacity)?;
    for (i, s) in set.iter().chain(opponents).enumerate() {
        s.validate(i)?;
    }
    let opponents: Vec<&Strategy> = opponents.iter().collect();
    let payoffs: Vec<f64> = set
        .iter()
        .map(|s| own_payoff(s, &opponents, capacity, lambda))
        .collect();
    let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(payoffs
        .iter()
        .enumerate()
        .filter(|(_, &v)| best - v <= TIE_TOLERANCE)
        .map(|(i, _)| i)
        .collect())
}
