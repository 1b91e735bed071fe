//! Experiment configuration: strict JSON schema and per-command field rules.

use std::path::{Path, PathBuf};

use aimd_core::{GameConfig, InteractionMode, NetworkTopology, Strategy, StrategyProfile};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dynamics_error, game_error, topology_error, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    FixedPoint,
    Stability,
    PayoffMatrix,
    Equilibrium,
    Dominance,
    Replicator,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::FixedPoint => "fixed-point",
            Self::Stability => "stability",
            Self::PayoffMatrix => "payoff-matrix",
            Self::Equilibrium => "equilibrium",
            Self::Dominance => "dominance",
            Self::Replicator => "replicator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<StrategyDef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Rate vector for the stability check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicator: Option<ReplicatorBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyDef {
    SingleServer {
        capacity: f64,
        users: usize,
    },
    Klimov {
        capacities: Vec<f64>,
    },
    Reentrant {
        p1: f64,
        p2: f64,
        p3: f64,
        users: usize,
    },
    /// Raw matrices, rows listed first: `constituency` is nodes x links, `routing` is
    /// links x links, `input` is links x users.
    Explicit {
        constituency: Vec<Vec<f64>>,
        capacities: Vec<f64>,
        routing: Vec<Vec<f64>>,
        input: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDef {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    /// Starting rates; zero when absent, random when a top-level `seed` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_drops: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Pairwise,
    Triple,
}

impl From<ModeName> for InteractionMode {
    fn from(mode: ModeName) -> Self {
        match mode {
            ModeName::Pairwise => InteractionMode::Pairwise,
            ModeName::Triple => InteractionMode::Triple,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicatorBlock {
    pub gain: f64,
    /// Required unless the sweep varies `tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    pub mode: ModeName,
    /// Uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_shares: Option<Vec<f64>>,
    /// Picked from the delay and horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Lambda,
    Tau,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::Tau => "tau",
        }
    }
}

/// Whether a command needs a field or must not see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Required,
    Forbidden,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "config".to_string()
            } else {
                path
            };
            CliError::invalid(field, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that exactly the fields required by `command` are present. `sweeping` is
    /// true when the config is run through the sweep entry point.
    pub fn check_fields(&self, sweeping: bool) -> Result<(), CliError> {
        use Rule::*;
        let sweep_parameter = match (&self.sweep, sweeping) {
            (Some(sweep), true) => Some(self.sweep_parameter(sweep)?),
            (None, true) => {
                return Err(CliError::invalid("sweep", "a sweep needs a `sweep` block"))
            }
            (Some(_), false) => {
                return Err(CliError::invalid(
                    "sweep",
                    "only allowed with the `sweep` entry point",
                ))
            }
            (None, false) => None,
        };
        let lambda = if sweep_parameter == Some(SweepParameter::Lambda) {
            Forbidden
        } else {
            Required
        };
        // topology, strategies, capacity, lambda, rates, simulation, replicator
        let rules = match self.command {
            Command::Simulate => [
                Required, Required, Forbidden, Forbidden, Forbidden, Required, Forbidden,
            ],
            Command::FixedPoint => [
                Required, Required, Forbidden, Forbidden, Forbidden, Forbidden, Forbidden,
            ],
            Command::Stability => [
                Required, Forbidden, Forbidden, Forbidden, Required, Forbidden, Forbidden,
            ],
            Command::PayoffMatrix => [
                Forbidden, Required, Required, lambda, Forbidden, Forbidden, Forbidden,
            ],
            Command::Equilibrium => [
                Forbidden, Required, Required, lambda, Forbidden, Forbidden, Forbidden,
            ],
            Command::Dominance => [
                Forbidden, Required, Required, Forbidden, Forbidden, Forbidden, Forbidden,
            ],
            Command::Replicator => [
                Forbidden, Required, Required, lambda, Forbidden, Forbidden, Required,
            ],
        };
        let present = [
            ("topology", self.topology.is_some()),
            ("strategies", self.strategies.is_some()),
            ("capacity", self.capacity.is_some()),
            ("lambda", self.lambda.is_some()),
            ("rates", self.rates.is_some()),
            ("simulation", self.simulation.is_some()),
            ("replicator", self.replicator.is_some()),
        ];
        for ((field, is_present), rule) in present.into_iter().zip(rules) {
            match (rule, is_present) {
                (Required, false) => {
                    return Err(CliError::invalid(
                        field,
                        format!("required by the `{}` command", self.command.name()),
                    ))
                }
                (Forbidden, true) => {
                    return Err(CliError::invalid(
                        field,
                        format!("not used by the `{}` command", self.command.name()),
                    ))
                }
                _ => {}
            }
        }
        if let Some(sim) = &self.simulation {
            match (sim.max_drops, sim.max_time) {
                (Some(_), Some(_)) => {
                    return Err(CliError::invalid(
                        "simulation.max_time",
                        "give either `max_drops` or `max_time`, not both",
                    ))
                }
                (None, None) => {
                    return Err(CliError::invalid(
                        "simulation.max_drops",
                        "one of `max_drops` or `max_time` is required",
                    ))
                }
                _ => {}
            }
            if sim.initial_rates.is_some() && self.seed.is_some() {
                return Err(CliError::invalid(
                    "seed",
                    "a random start conflicts with explicit `simulation.initial_rates`",
                ));
            }
        }
        if let Some(rep) = &self.replicator {
            let tau_swept = sweep_parameter == Some(SweepParameter::Tau);
            match (rep.delay.is_some(), tau_swept) {
                (false, false) => return Err(CliError::invalid("replicator.delay", "required")),
                (true, true) => {
                    return Err(CliError::invalid(
                        "replicator.delay",
                        "not used when the sweep varies `tau`",
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The swept parameter, checked against the command.
    pub fn sweep_parameter(&self, sweep: &SweepBlock) -> Result<SweepParameter, CliError> {
        let parameter = match sweep.parameter.as_str() {
            "lambda" => SweepParameter::Lambda,
            "tau" => SweepParameter::Tau,
            other => {
                return Err(CliError::invalid(
                    "sweep.parameter",
                    format!("`{other}` cannot be swept; use `lambda` or `tau`"),
                ))
            }
        };
        let allowed = match parameter {
            SweepParameter::Lambda => matches!(
                self.command,
                Command::Equilibrium | Command::PayoffMatrix | Command::Replicator
            ),
            SweepParameter::Tau => self.command == Command::Replicator,
        };
        if !allowed {
            return Err(CliError::invalid(
                "sweep.parameter",
                format!(
                    "`{}` cannot be swept for the `{}` command",
                    parameter.name(),
                    self.command.name()
                ),
            ));
        }
        Ok(parameter)
    }

    pub fn topology(&self) -> Result<NetworkTopology, CliError> {
        let block = self
            .topology
            .as_ref()
            .ok_or_else(|| CliError::invalid("topology", "missing"))?;
        block.build()
    }

    /// Strategies as protocol-game values; validated when a game is built from them.
    pub fn game_strategies(&self) -> Vec<Strategy> {
        self.strategies
            .iter()
            .flatten()
            .zip(self.labels())
            .map(|(s, label)| Strategy {
                alpha: s.alpha,
                beta: s.beta,
                label,
            })
            .collect()
    }

    /// The game at the configured capacity and the given `lambda`.
    pub fn game(&self, lambda: f64) -> Result<GameConfig, CliError> {
        GameConfig::new(self.game_strategies(), self.capacity()?, lambda).map_err(game_error)
    }

    /// Strategies as a per-connection AIMD profile (`alpha = 0` allowed).
    pub fn profile(&self) -> Result<StrategyProfile, CliError> {
        let entries = self
            .strategies
            .as_ref()
            .ok_or_else(|| CliError::invalid("strategies", "missing"))?;
        let alpha = entries.iter().map(|s| s.alpha).collect();
        let beta = entries.iter().map(|s| s.beta).collect();
        StrategyProfile::new(alpha, beta).map_err(dynamics_error)
    }

    /// Labels in order, defaulting to `s1`, `s2`, ...
    pub fn labels(&self) -> Vec<String> {
        self.strategies
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, s)| s.label.clone().unwrap_or_else(|| format!("s{}", i + 1)))
            .collect()
    }

    pub fn capacity(&self) -> Result<f64, CliError> {
        self.capacity
            .ok_or_else(|| CliError::invalid("capacity", "missing"))
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        let lambda = self
            .lambda
            .ok_or_else(|| CliError::invalid("lambda", "missing"))?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(CliError::invalid(
                "lambda",
                format!("{lambda} must be nonnegative and finite"),
            ));
        }
        Ok(lambda)
    }
}

impl SweepBlock {
    /// Evenly spaced grid from `from` to `to` inclusive.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if !(self.from.is_finite() && self.to.is_finite()) {
            return Err(CliError::invalid("sweep.to", "range bounds must be finite"));
        }
        if self.count == 0 {
            return Err(CliError::invalid("sweep.count", "empty range: count is 0"));
        }
        if self.to < self.from {
            return Err(CliError::invalid(
                "sweep.to",
                format!("empty range: {} < {}", self.to, self.from),
            ));
        }
        if self.count == 1 {
            return Ok(vec![self.from]);
        }
        let width = self.to - self.from;
        let last = (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| self.from + width * i as f64 / last)
            .collect())
    }
}

impl TopologyDef {
    pub fn build(&self) -> Result<NetworkTopology, CliError> {
        match self {
            Self::SingleServer { capacity, users } => {
                NetworkTopology::single_server(*capacity, *users)
            }
            Self::Klimov { capacities } => NetworkTopology::klimov(capacities),
            Self::Reentrant { p1, p2, p3, users } => {
                NetworkTopology::reentrant(*p1, *p2, *p3, *users)
            }
            Self::Explicit {
                constituency,
                capacities,
                routing,
                input,
            } => {
                let c = matrix("topology.constituency", constituency)?;
                let r = matrix("topology.routing", routing)?;
                let a = matrix("topology.input", input)?;
                NetworkTopology::new(c.nrows(), c.ncols(), a.ncols(), c, capacities.clone(), r, a)
            }
        }
        .map_err(topology_error)
    }

    /// The explicit form of any topology.
    pub fn explicit(topology: &NetworkTopology) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        Self::Explicit {
            constituency: rows(topology.constituency()),
            capacities: topology.capacities().iter().copied().collect(),
            routing: rows(topology.routing()),
            input: rows(topology.input()),
        }
    }
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(CliError::invalid(
            field,
            format!("row {i} has {} entries, expected {ncols}", rows[i].len()),
        ));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_json(text)
    }

    fn field_of(e: CliError) -> String {
        match e {
            CliError::Validation { field, .. } => field,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    const GAME: &str =
        r#""strategies":[{"alpha":1.5,"beta":0.75},{"alpha":1,"beta":0.25}],"capacity":50"#;

    #[test]
    fn grid_is_inclusive_and_even() {
        let sweep = SweepBlock {
            parameter: "lambda".into(),
            from: 0.0,
            to: 250.0,
            count: 51,
        };
        let grid = sweep.grid().unwrap();
        assert_eq!(grid.len(), 51);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[50], 250.0);
        assert_eq!(grid[10], 50.0);
        let single = SweepBlock {
            count: 1,
            ..sweep.clone()
        };
        assert_eq!(single.grid().unwrap(), vec![0.0]);
    }

    #[test]
    fn empty_ranges_are_rejected() {
        let empty = SweepBlock {
            parameter: "lambda".into(),
            from: 0.0,
            to: 1.0,
            count: 0,
        };
        assert_eq!(field_of(empty.grid().unwrap_err()), "sweep.count");
        let reversed = SweepBlock {
            from: 2.0,
            count: 5,
            ..empty
        };
        assert_eq!(field_of(reversed.grid().unwrap_err()), "sweep.to");
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse(&format!(r#"{{"command":"dominance",{GAME},"colour":1}}"#)).unwrap_err();
        assert_eq!(field_of(e), "colour");
        let e = parse(r#"{"command":"dominance","strategies":[{"alpha":1,"beta":0.5,"gamma":2}]}"#)
            .unwrap_err();
        assert_eq!(field_of(e), "strategies[0].gamma");
        let e = parse(r#"{"command":"simulate","simulation":{"max_drops":3,"horizon":1}}"#)
            .unwrap_err();
        assert_eq!(field_of(e), "simulation.horizon");
    }

    #[test]
    fn commands_require_exactly_their_fields() {
        let missing = parse(&format!(r#"{{"command":"equilibrium",{GAME}}}"#)).unwrap();
        assert_eq!(field_of(missing.check_fields(false).unwrap_err()), "lambda");

        let extra = parse(&format!(r#"{{"command":"dominance",{GAME},"lambda":3}}"#)).unwrap();
        assert_eq!(field_of(extra.check_fields(false).unwrap_err()), "lambda");

        let ok = parse(&format!(r#"{{"command":"dominance",{GAME},"seed":4}}"#)).unwrap();
        ok.check_fields(false).unwrap();
    }

    #[test]
    fn sweep_rules() {
        let sweep = r#""sweep":{"parameter":"lambda","from":0,"to":1,"count":2}"#;
        let cfg = parse(&format!(r#"{{"command":"equilibrium",{GAME},{sweep}}}"#)).unwrap();
        cfg.check_fields(true).unwrap();
        assert_eq!(field_of(cfg.check_fields(false).unwrap_err()), "sweep");

        let with_lambda = parse(&format!(
            r#"{{"command":"equilibrium",{GAME},"lambda":1,{sweep}}}"#
        ))
        .unwrap();
        assert_eq!(
            field_of(with_lambda.check_fields(true).unwrap_err()),
            "lambda"
        );

        let capacity = r#""sweep":{"parameter":"capacity","from":0,"to":1,"count":2}"#;
        let cfg = parse(&format!(r#"{{"command":"equilibrium",{GAME},{capacity}}}"#)).unwrap();
        assert_eq!(
            field_of(cfg.check_fields(true).unwrap_err()),
            "sweep.parameter"
        );

        let tau = r#""sweep":{"parameter":"tau","from":0,"to":1,"count":2}"#;
        let cfg = parse(&format!(r#"{{"command":"equilibrium",{GAME},{tau}}}"#)).unwrap();
        assert_eq!(
            field_of(cfg.check_fields(true).unwrap_err()),
            "sweep.parameter"
        );
    }

    #[test]
    fn simulation_needs_one_stop_rule() {
        let base = r#""topology":{"kind":"single_server","capacity":10,"users":1},"strategies":[{"alpha":1,"beta":0.5}]"#;
        let both = parse(&format!(
            r#"{{"command":"simulate",{base},"simulation":{{"max_drops":3,"max_time":2}}}}"#
        ))
        .unwrap();
        assert_eq!(
            field_of(both.check_fields(false).unwrap_err()),
            "simulation.max_time"
        );
        let seeded = parse(&format!(
            r#"{{"command":"simulate",{base},"seed":1,"simulation":{{"max_drops":3,"initial_rates":[0]}}}}"#
        ))
        .unwrap();
        assert_eq!(field_of(seeded.check_fields(false).unwrap_err()), "seed");
    }

    #[test]
    fn ragged_matrices_are_rejected() {
        let block = TopologyDef::Explicit {
            constituency: vec![vec![1.0, 1.0], vec![1.0]],
            capacities: vec![1.0, 1.0],
            routing: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            input: vec![vec![1.0], vec![0.0]],
        };
        assert_eq!(
            field_of(block.build().unwrap_err()),
            "topology.constituency"
        );
    }

    #[test]
    fn explicit_form_reproduces_builtins() {
        let builtin = NetworkTopology::reentrant(10.0, 5.0, 20.0, 3).unwrap();
        let rebuilt = TopologyDef::explicit(&builtin).build().unwrap();
        assert_eq!(
            rebuilt.load_matrix().matrix(),
            builtin.load_matrix().matrix()
        );
    }
}
