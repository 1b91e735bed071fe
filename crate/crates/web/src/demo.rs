//! Plain-Rust computations behind the browser demo. Every result is a flat `Vec<f64>`
//! so it crosses the wasm boundary as a `Float64Array`.

use aimd_core::{
    classify_equilibrium, fixed_point, integrate, lambda_bounds, simulate, EquilibriumKind,
    InteractionMode, NetworkTopology, Outcome, ReplicatorConfig, Stop, Strategy, StrategyProfile,
};

/// Upper bound on points sent to the page per series.
pub const MAX_POINTS: usize = 1500;

/// Two connections on one server of the given capacity, started from zero rates.
///
/// Returns `[T, x1*, x2*]` followed by the vertices `(t, x1, x2)` of the piecewise-linear
/// rate path: the start, then the pre- and post-drop states of every loss.
pub fn sawtooth(
    capacity: f64,
    first: (f64, f64),
    second: (f64, f64),
    drops: usize,
) -> Result<Vec<f64>, String> {
    let load = NetworkTopology::single_server(capacity, 2)
        .map_err(|e| e.to_string())?
        .load_matrix();
    let profile = StrategyProfile::from_pairs(&[first, second]).map_err(|e| e.to_string())?;
    let fp = fixed_point(&load, &profile).map_err(|e| e.to_string())?;
    let trajectory = simulate(
        &load,
        &profile,
        &[0.0, 0.0],
        Stop::MaxDrops(drops.min(MAX_POINTS / 2)),
    )
    .map_err(|e| e.to_string())?;

    let mut out = vec![fp.period, fp.peak_rates[0], fp.peak_rates[1], 0.0, 0.0, 0.0];
    for e in &trajectory.events {
        out.extend([e.time, e.pre_rates[0], e.pre_rates[1]]);
        out.extend([e.time, e.post_rates[0], e.post_rates[1]]);
    }
    Ok(out)
}

/// Regime code used by the page: 1 first strategy dominant, 2 mixed, 3 second strategy
/// dominant, 4 coordination, 0 degenerate.
fn regime_code(kind: &EquilibriumKind) -> f64 {
    match kind {
        EquilibriumKind::DominantPure(0) => 1.0,
        EquilibriumKind::Mixed(_) => 2.0,
        EquilibriumKind::DominantPure(_) => 3.0,
        EquilibriumKind::Pure(_) => 4.0,
        EquilibriumKind::Degenerate => 0.0,
    }
}

/// Equilibrium probability of the first strategy across `lambda` in `[0, lambda_max]`.
///
/// Returns `[lo, hi]` of the mixed regime (`NaN, NaN` when there is none) followed by
/// `(lambda, p, regime)` for `points` evenly spaced values.
pub fn regime_curve(
    capacity: f64,
    first: (f64, f64),
    second: (f64, f64),
    lambda_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(format!("lambda range {lambda_max} must be positive"));
    }
    let points = points.clamp(2, MAX_POINTS);
    let s1 = Strategy::new(first.0, first.1, "s1").map_err(|e| e.to_string())?;
    let s2 = Strategy::new(second.0, second.1, "s2").map_err(|e| e.to_string())?;
    let mixed = lambda_bounds(&s1, &s2, capacity).ok().and_then(|b| b.mixed);
    let (lo, hi) = mixed.unwrap_or((f64::NAN, f64::NAN));

    let mut out = vec![lo, hi];
    for k in 0..points {
        let lambda = lambda_max * k as f64 / (points - 1) as f64;
        let r = classify_equilibrium(&s1, &s2, capacity, lambda).map_err(|e| e.to_string())?;
        let p = match r.kind {
            EquilibriumKind::DominantPure(0) => 1.0,
            EquilibriumKind::DominantPure(_) => 0.0,
            EquilibriumKind::Mixed(p) => p,
            EquilibriumKind::Pure(_) => r.d1 / (r.d1 + r.d2),
            EquilibriumKind::Degenerate => f64::NAN,
        };
        out.extend([lambda, p, regime_code(&r.kind)]);
    }
    Ok(out)
}

/// The three-protocol population used throughout the demo, on capacity 50.
pub fn demo_strategies() -> Vec<Strategy> {
    [
        (1.5, 0.75, "aggressive"),
        (1.25, 0.5, "moderate"),
        (1.0, 0.25, "gentle"),
    ]
    .into_iter()
    .map(|(a, b, label)| Strategy {
        alpha: a,
        beta: b,
        label: label.to_string(),
    })
    .collect()
}

/// Delayed replicator run of the demo population from `initial` shares.
///
/// Returns an outcome code (`-1` undecided, `0` interior, `i + 1` fixation of strategy
/// `i`) followed by `(t, x1, x2, x3)` rows, thinned to at most [`MAX_POINTS`].
pub fn replicator_shares(
    lambda: f64,
    gain: f64,
    delay: f64,
    triple: bool,
    horizon: f64,
    initial: [f64; 3],
) -> Result<Vec<f64>, String> {
    let mode = if triple {
        InteractionMode::Triple
    } else {
        InteractionMode::Pairwise
    };
    let mut config =
        ReplicatorConfig::new(demo_strategies(), 50.0, lambda, gain, delay, mode, horizon);
    let sum: f64 = initial.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err("initial shares must have a positive, finite sum".to_string());
    }
    config.initial_shares = initial.iter().map(|x| x / sum).collect();
    let trajectory = integrate(&config).map_err(|e| e.to_string())?;

    let code = match trajectory.outcome {
        Outcome::Fixation(i) => (i + 1) as f64,
        Outcome::Interior(_) => 0.0,
        Outcome::Undecided => -1.0,
    };
    let n = trajectory.times.len();
    let stride = n.div_ceil(MAX_POINTS).max(1);
    let mut keep: Vec<usize> = (0..n).step_by(stride).collect();
    if keep.last() != Some(&(n - 1)) {
        keep.push(n - 1);
    }
    let mut out = vec![code];
    for k in keep {
        out.push(trajectory.times[k]);
        out.extend(&trajectory.shares[k]);
    }
    Ok(out)
}
