//! Dispatch from a validated config to the core modules.

use aimd_core::{
    average_throughput, classify_equilibrium, dominance_threshold, fixed_point, integrate,
    lambda_bounds, simulate, verify_convergence, EquilibriumKind, EquilibriumResult, LoadMatrix,
    Outcome, ReplicatorConfig, Stop,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig, SweepParameter};
use crate::error::{dynamics_error, game_error, replicator_error, topology_error, CliError};

/// CSV payload: a header and rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    /// Human-readable lines for standard output.
    pub summary: Vec<String>,
    pub table: Table,
}

/// Shortest decimal string that parses back to the same `f64`; exponent form for very
/// small or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn tuple(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| num(x)).collect();
    format!("({})", parts.join(","))
}

fn one_based(indices: &[usize]) -> String {
    let parts: Vec<String> = indices.iter().map(|i| (i + 1).to_string()).collect();
    parts.join(" ")
}

pub fn execute(config: &ExperimentConfig) -> Result<Report, CliError> {
    match config.command {
        Command::Simulate => run_simulate(config),
        Command::FixedPoint => run_fixed_point(config),
        Command::Stability => run_stability(config),
        Command::PayoffMatrix => run_payoff_matrix(config, config.lambda()?),
        Command::Equilibrium => run_equilibrium(config, config.lambda()?),
        Command::Dominance => run_dominance(config),
        Command::Replicator => {
            let rep = replicator_config(config, None, None)?;
            run_replicator(&rep)
        }
    }
}

fn run_simulate(config: &ExperimentConfig) -> Result<Report, CliError> {
    let load = config.topology()?.load_matrix();
    let profile = config.profile()?;
    if profile.len() != load.num_users() {
        return Err(CliError::invalid(
            "strategies",
            format!(
                "{} strategies for a topology with {} users",
                profile.len(),
                load.num_users()
            ),
        ));
    }
    let sim = config
        .simulation
        .as_ref()
        .ok_or_else(|| CliError::invalid("simulation", "missing"))?;
    let initial = match (&sim.initial_rates, config.seed) {
        (Some(rates), _) => {
            if rates.len() != load.num_users() {
                return Err(CliError::invalid(
                    "simulation.initial_rates",
                    format!("expected {} rates, got {}", load.num_users(), rates.len()),
                ));
            }
            rates.clone()
        }
        (None, Some(seed)) => random_start(&load, seed),
        (None, None) => vec![0.0; load.num_users()],
    };
    let stop = match (sim.max_drops, sim.max_time) {
        (Some(n), _) => Stop::MaxDrops(n),
        (None, Some(t)) if t > 0.0 && t.is_finite() => Stop::MaxTime(t),
        (None, Some(t)) => {
            return Err(CliError::invalid(
                "simulation.max_time",
                format!("{t} must be positive and finite"),
            ))
        }
        (None, None) => return Err(CliError::invalid("simulation.max_drops", "missing")),
    };
    let trajectory = simulate(&load, &profile, &initial, stop).map_err(dynamics_error)?;

    let mut table = Table::new(["time", "event_index", "user_index", "pre_rate", "post_rate"]);
    for (k, event) in trajectory.events.iter().enumerate() {
        for (i, (pre, post)) in event.pre_rates.iter().zip(&event.post_rates).enumerate() {
            table.rows.push(vec![
                num(event.time),
                (k + 1).to_string(),
                (i + 1).to_string(),
                num(*pre),
                num(*post),
            ]);
        }
    }

    let mut summary = vec![
        format!("initial rates: {}", tuple(&initial)),
        format!("drops: {}", trajectory.events.len()),
        format!("horizon: {}", num(trajectory.horizon)),
    ];
    if let Some(last) = trajectory.events.last() {
        summary.push(format!("last peak: {}", tuple(&last.pre_rates)));
    }
    // all-frozen profiles have no limit cycle
    if let Ok(fp) = fixed_point(&load, &profile) {
        summary.push(format!(
            "limit cycle: T={} x*={}",
            num(fp.period),
            tuple(&fp.peak_rates)
        ));
        if let Ok(report) = verify_convergence(&trajectory, &fp) {
            summary.push(format!(
                "distance to limit cycle: {}",
                num(report.final_distance())
            ));
        }
    }
    Ok(Report { summary, table })
}

/// Random rates strictly inside the admissible set.
fn random_start(load: &LoadMatrix, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction: Vec<f64> = (0..load.num_users()).map(|_| rng.random::<f64>()).collect();
    let level: f64 = rng.random();
    let worst = load.apply(&direction).into_iter().fold(0.0, f64::max);
    if worst <= 0.0 {
        return vec![0.0; load.num_users()];
    }
    direction.iter().map(|x| x * level / worst).collect()
}

fn run_fixed_point(config: &ExperimentConfig) -> Result<Report, CliError> {
    let load = config.topology()?.load_matrix();
    let profile = config.profile()?;
    let fp = fixed_point(&load, &profile).map_err(dynamics_error)?;
    let throughput = average_throughput(&fp, &profile);

    let mut table = Table::new(["user_index", "period", "peak_rate", "throughput"]);
    for (i, (x, thp)) in fp.peak_rates.iter().zip(&throughput).enumerate() {
        table.rows.push(vec![
            (i + 1).to_string(),
            num(fp.period),
            num(*x),
            num(*thp),
        ]);
    }
    let summary = vec![
        format!("T={}", num(fp.period)),
        format!("x*={}", tuple(&fp.peak_rates)),
        format!("Thp={}", tuple(&throughput)),
        format!("binding rows: {}", one_based(&fp.binding_rows)),
    ];
    Ok(Report { summary, table })
}

fn run_stability(config: &ExperimentConfig) -> Result<Report, CliError> {
    let load = config.topology()?.load_matrix();
    let rates = config
        .rates
        .as_ref()
        .ok_or_else(|| CliError::invalid("rates", "missing"))?;
    let report = load.check_stability(rates).map_err(topology_error)?;

    let mut table = Table::new(["row", "utilization", "binding"]);
    for (j, u) in report.utilizations.iter().enumerate() {
        let binding = report.binding_rows.contains(&j);
        table
            .rows
            .push(vec![(j + 1).to_string(), num(*u), binding.to_string()]);
    }
    let worst = report.utilizations.iter().copied().fold(0.0, f64::max);
    let summary = vec![
        format!("stable: {}", report.stable),
        format!("max utilization: {}", num(worst)),
        format!("binding rows: {}", one_based(&report.binding_rows)),
    ];
    Ok(Report { summary, table })
}

fn payoff_rows(config: &ExperimentConfig, lambda: f64) -> Result<Vec<Vec<f64>>, CliError> {
    let matrix = config.game(lambda)?.payoff_matrix();
    Ok(matrix
        .values
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect())
}

fn run_payoff_matrix(config: &ExperimentConfig, lambda: f64) -> Result<Report, CliError> {
    let rows = payoff_rows(config, lambda)?;
    let mut table = Table::new(["i", "j", "payoff"]);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            table
                .rows
                .push(vec![(i + 1).to_string(), (j + 1).to_string(), num(*v)]);
        }
    }
    let labels = config.labels();
    let mut summary = vec![format!(
        "payoffs at lambda={} (row player vs column)",
        num(lambda)
    )];
    summary.push(format!("  {}", labels.join("  ")));
    for (label, row) in labels.iter().zip(&rows) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        summary.push(format!("{label}: {}", cells.join("  ")));
    }
    Ok(Report { summary, table })
}

/// Probability of the first strategy in the reported equilibrium; for a coordination
/// game, the interior (unstable) one.
fn equilibrium_p(result: &EquilibriumResult) -> String {
    match result.kind {
        EquilibriumKind::DominantPure(0) => "1".to_string(),
        EquilibriumKind::DominantPure(_) => "0".to_string(),
        EquilibriumKind::Mixed(p) => num(p),
        EquilibriumKind::Pure(_) => num(result.d1 / (result.d1 + result.d2)),
        EquilibriumKind::Degenerate => String::new(),
    }
}

fn two_strategies(config: &ExperimentConfig) -> Result<[aimd_core::Strategy; 2], CliError> {
    let strategies = config.game_strategies();
    <[_; 2]>::try_from(strategies).map_err(|s: Vec<_>| {
        CliError::invalid(
            "strategies",
            format!(
                "the two-player game needs exactly 2 strategies, got {}",
                s.len()
            ),
        )
    })
}

fn classify(config: &ExperimentConfig, lambda: f64) -> Result<EquilibriumResult, CliError> {
    // validates the strategy set as a whole, with field names
    config.game(lambda)?;
    let [s1, s2] = two_strategies(config)?;
    classify_equilibrium(&s1, &s2, config.capacity()?, lambda).map_err(game_error)
}

fn run_equilibrium(config: &ExperimentConfig, lambda: f64) -> Result<Report, CliError> {
    let result = classify(config, lambda)?;
    let [s1, s2] = two_strategies(config)?;
    let capacity = config.capacity()?;
    let bounds = lambda_bounds(&s1, &s2, capacity).ok();

    let mut summary = vec![format!(
        "lambda={}: {} p={} ess={}",
        num(lambda),
        result.kind.name(),
        equilibrium_p(&result),
        result.ess
    )];
    summary.push(format!("D1={} D2={}", num(result.d1), num(result.d2)));
    match result.lambda_interval {
        Some((lo, hi)) => summary.push(format!(
            "mixed regime for lambda in ({}, {})",
            num(lo),
            num(hi)
        )),
        None => summary.push("no mixed regime for lambda >= 0".to_string()),
    }
    if let Some(b) = &bounds {
        if let Some(holds) = b.side_condition_holds() {
            summary.push(format!(
                "side condition alpha2(1-beta1) - alpha1(1-beta2) = {} ({})",
                num(b.side_condition.unwrap_or(f64::NAN)),
                if holds { "holds" } else { "fails" }
            ));
        }
    }

    // regimes change only where D1 or D2 changes sign
    let mut cuts: Vec<f64> = bounds
        .iter()
        .flat_map(|b| [b.p_zero_root, b.p_one_root])
        .filter(|r| r.is_finite() && *r > 0.0)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![0.0];
    edges.extend(&cuts);
    let mut table = Table::new(["lambda_lo", "lambda_hi", "p_at_midpoint", "regime"]);
    for (k, &lo) in edges.iter().enumerate() {
        let (hi, probe) = match edges.get(k + 1) {
            Some(&hi) => (num(hi), 0.5 * (lo + hi)),
            None => ("inf".to_string(), lo + lo.max(1.0)),
        };
        let at = classify_equilibrium(&s1, &s2, capacity, probe).map_err(game_error)?;
        table.rows.push(vec![
            num(lo),
            hi,
            equilibrium_p(&at),
            at.kind.name().to_string(),
        ]);
    }
    Ok(Report { summary, table })
}

fn run_dominance(config: &ExperimentConfig) -> Result<Report, CliError> {
    let game = config.game(0.0)?;
    let threshold = dominance_threshold(&game).map_err(game_error)?;
    let labels = config.labels();
    let line = if threshold.is_finite() {
        format!("{} is dominant for lambda < {}", labels[0], num(threshold))
    } else {
        format!("{} is dominant for every lambda >= 0", labels[0])
    };
    let mut table = Table::new(["lambda_star"]);
    table.rows.push(vec![num(threshold)]);
    Ok(Report {
        summary: vec![format!("lambda*={}", num(threshold)), line],
        table,
    })
}

fn replicator_config(
    config: &ExperimentConfig,
    lambda: Option<f64>,
    delay: Option<f64>,
) -> Result<ReplicatorConfig, CliError> {
    let block = config
        .replicator
        .as_ref()
        .ok_or_else(|| CliError::invalid("replicator", "missing"))?;
    let lambda = match lambda {
        Some(l) => l,
        None => config.lambda()?,
    };
    let delay = delay
        .or(block.delay)
        .ok_or_else(|| CliError::invalid("replicator.delay", "missing"))?;
    let mut rep = ReplicatorConfig::new(
        config.game_strategies(),
        config.capacity()?,
        lambda,
        block.gain,
        delay,
        block.mode.into(),
        block.horizon,
    );
    if let Some(shares) = &block.initial_shares {
        rep.initial_shares = shares.clone();
    }
    rep.step = block.step;
    Ok(rep)
}

fn outcome_label(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Fixation(i) => format!("fixation_{}", i + 1),
        Outcome::Interior(_) => "interior".to_string(),
        Outcome::Undecided => "undecided".to_string(),
    }
}

fn share_header(first: &str, n: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=n).map(|i| format!("share_{i}")))
        .collect()
}

fn run_replicator(rep: &ReplicatorConfig) -> Result<Report, CliError> {
    let step = rep.step_size().map_err(replicator_error)?;
    let trajectory = integrate(rep).map_err(replicator_error)?;
    let mut table = Table::new(share_header("time", rep.strategies.len()));
    for (t, x) in trajectory.times.iter().zip(&trajectory.shares) {
        table.rows.push(
            std::iter::once(*t)
                .chain(x.iter().copied())
                .map(num)
                .collect(),
        );
    }
    let summary = vec![
        format!(
            "steps: {} of size {}",
            trajectory.times.len() - 1,
            num(step)
        ),
        format!("outcome: {}", trajectory.outcome.describe()),
        format!("final shares: {}", tuple(trajectory.final_shares())),
    ];
    Ok(Report { summary, table })
}

/// Runs the base command at every grid point of the `sweep` block, in parallel, and
/// reports the rows in grid order.
pub fn sweep(config: &ExperimentConfig) -> Result<Report, CliError> {
    let block = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::invalid("sweep", "missing"))?;
    let parameter = config.sweep_parameter(block)?;
    let grid = block.grid()?;
    let name = parameter.name();

    let header: Vec<String> = match config.command {
        Command::Equilibrium => vec![name.into(), "regime".into(), "p".into()],
        Command::PayoffMatrix => vec![name.into(), "i".into(), "j".into(), "payoff".into()],
        Command::Replicator => {
            let mut h = share_header(name, config.game_strategies().len());
            h.insert(1, "outcome".into());
            h
        }
        other => {
            return Err(CliError::invalid(
                "command",
                format!("`{}` cannot be swept", other.name()),
            ))
        }
    };

    let point = |value: f64| -> Result<Vec<Vec<String>>, CliError> {
        match config.command {
            Command::Equilibrium => {
                let r = classify(config, value)?;
                Ok(vec![vec![
                    num(value),
                    r.kind.name().into(),
                    equilibrium_p(&r),
                ]])
            }
            Command::PayoffMatrix => Ok(payoff_rows(config, value)?
                .iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    row.iter().enumerate().map(move |(j, v)| {
                        vec![
                            num(value),
                            (i + 1).to_string(),
                            (j + 1).to_string(),
                            num(*v),
                        ]
                    })
                })
                .collect()),
            _ => {
                let rep = match parameter {
                    SweepParameter::Lambda => replicator_config(config, Some(value), None)?,
                    SweepParameter::Tau => replicator_config(config, None, Some(value))?,
                };
                let trajectory = integrate(&rep).map_err(replicator_error)?;
                let mut row = vec![num(value), outcome_label(&trajectory.outcome)];
                row.extend(trajectory.final_shares().iter().map(|&x| num(x)));
                Ok(vec![row])
            }
        }
    };
    let results: Vec<Result<Vec<Vec<String>>, CliError>> =
        grid.par_iter().map(|&v| point(v)).collect();
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for result in results {
        table.rows.extend(result?);
    }

    let mut summary = vec![format!(
        "{} sweep over {} from {} to {}: {} points",
        config.command.name(),
        name,
        num(block.from),
        num(block.to),
        grid.len()
    )];
    if config.command != Command::PayoffMatrix {
        for pair in table.rows.windows(2) {
            if pair[0][1] != pair[1][1] {
                summary.push(format!(
                    "{} -> {} between {}={} and {}={}",
                    pair[0][1], pair[1][1], name, pair[0][0], name, pair[1][0]
                ));
            }
        }
    }
    Ok(Report { summary, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [
            0.0,
            25.0,
            12.5,
            0.1,
            1.0 / 3.0,
            -2.5e-28,
            6.02e23,
            1e-5,
            9.99e-6,
            1e16,
            f64::MAX,
            f64::MIN_POSITIVE,
        ] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(num(25.0), "25");
        assert_eq!(num(2.5e-28), "2.5e-28");
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn tuples_and_indices() {
        assert_eq!(tuple(&[25.0, 25.0]), "(25,25)");
        assert_eq!(one_based(&[0, 2]), "1 3");
    }
}
