//! Network topology algebra.
//!
//! A network has `M` nodes, `L` service links and `N` users. Four matrices describe it:
//!
//! * constituency `C` (`M x L`): `C[n][l] = 1` iff link `l` belongs to node `n`,
//! * capacities `P = diag(p_1..p_L)`, one per link,
//! * routing `R` (`L x L`): `R[i][j] = 1` iff the output of link `i` feeds link `j`,
//! * input `A` (`L x N`): `A[l][u] = 1` iff user `u` enters the network at link `l`.
//!
//! The load matrix `Xi = C P^-1 (I - R^T)^-1 A` maps user rates to normalized node
//! utilizations; a rate vector is lossless iff every utilization is strictly below one.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Utilizations at or above `1 - BINDING_TOLERANCE` count as binding.
pub const BINDING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("{matrix} matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Dimension {
        matrix: &'static str,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("expected {expected} capacities, got {got}")]
    CapacityCount { expected: usize, got: usize },
    #[error("{matrix} matrix entry ({row}, {col}) = {value} is not 0 or 1")]
    NonBinary {
        matrix: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("link {link} belongs to {count} nodes, expected exactly one")]
    LinkMembership { link: usize, count: usize },
    #[error("user {user} enters at {count} links, expected exactly one")]
    UserEntry { user: usize, count: usize },
    #[error("link {link} routes to {count} links, routing must be deterministic")]
    RoutingFanOut { link: usize, count: usize },
    #[error("routing matrix is cyclic (not nilpotent)")]
    CyclicRouting,
    #[error("capacity of link {link} is {value}, must be positive and finite")]
    Capacity { link: usize, value: f64 },
    #[error("topology needs at least one {0}")]
    Empty(&'static str),
    #[error("load matrix entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeLoad { row: usize, col: usize, value: f64 },
    #[error("user {0} loads no node")]
    UnloadedUser(usize),
    #[error("rate vector has length {got}, expected {expected}")]
    RateLength { expected: usize, got: usize },
    #[error("rate {index} is {value}, rates must be nonnegative and finite")]
    NegativeRate { index: usize, value: f64 },
}

/// A validated network: acyclic deterministic routing, one node per link, one entry
/// link per user and positive capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    constituency: DMatrix<f64>,
    capacities: DVector<f64>,
    routing: DMatrix<f64>,
    input: DMatrix<f64>,
}

fn check_shape(
    matrix: &'static str,
    m: &DMatrix<f64>,
    rows: usize,
    cols: usize,
) -> Result<(), TopologyError> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(TopologyError::Dimension {
            matrix,
            rows: m.nrows(),
            cols: m.ncols(),
            expected_rows: rows,
            expected_cols: cols,
        });
    }
    Ok(())
}

fn check_binary(matrix: &'static str, m: &DMatrix<f64>) -> Result<(), TopologyError> {
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let value = m[(row, col)];
            if value != 0.0 && value != 1.0 {
                return Err(TopologyError::NonBinary {
                    matrix,
                    row,
                    col,
                    value,
                });
            }
        }
    }
    Ok(())
}

fn count_ones(values: impl Iterator<Item = f64>) -> usize {
    values.filter(|&v| v == 1.0).count()
}

/// `true` iff some power `R^k` with `k <= L` vanishes.
fn is_nilpotent(routing: &DMatrix<f64>) -> bool {
    let links = routing.nrows();
    let mut power = DMatrix::<f64>::identity(links, links);
    for _ in 0..links {
        power = &power * routing;
        if power.iter().all(|&v| v == 0.0) {
            return true;
        }
    }
    links == 0
}

/// Finite Neumann series `sum_{k=0}^{L-1} (R^T)^k`, the inverse of `I - R^T` for
/// nilpotent `R`.
pub fn neumann_series(routing: &DMatrix<f64>) -> DMatrix<f64> {
    let links = routing.nrows();
    let transposed = routing.transpose();
    let mut term = DMatrix::<f64>::identity(links, links);
    let mut sum = term.clone();
    for _ in 1..links {
        term = &term * &transposed;
        sum += &term;
    }
    sum
}

impl NetworkTopology {
    /// Validates and builds a topology from its raw matrices.
    pub fn new(
        num_nodes: usize,
        num_links: usize,
        num_users: usize,
        constituency: DMatrix<f64>,
        capacities: Vec<f64>,
        routing: DMatrix<f64>,
        input: DMatrix<f64>,
    ) -> Result<Self, TopologyError> {
        if num_nodes == 0 {
            return Err(TopologyError::Empty("node"));
        }
        if num_links == 0 {
            return Err(TopologyError::Empty("link"));
        }
        if num_users == 0 {
            return Err(TopologyError::Empty("user"));
        }
        check_shape("constituency", &constituency, num_nodes, num_links)?;
        check_shape("routing", &routing, num_links, num_links)?;
        check_shape("input", &input, num_links, num_users)?;
        if capacities.len() != num_links {
            return Err(TopologyError::CapacityCount {
                expected: num_links,
                got: capacities.len(),
            });
        }
        check_binary("constituency", &constituency)?;
        check_binary("routing", &routing)?;
        check_binary("input", &input)?;

        for link in 0..num_links {
            let count = count_ones(constituency.column(link).iter().copied());
            if count != 1 {
                return Err(TopologyError::LinkMembership { link, count });
            }
        }
        for user in 0..num_users {
            let count = count_ones(input.column(user).iter().copied());
            if count != 1 {
                return Err(TopologyError::UserEntry { user, count });
            }
        }
        for link in 0..num_links {
            let count = count_ones(routing.row(link).iter().copied());
            if count > 1 {
                return Err(TopologyError::RoutingFanOut { link, count });
            }
        }
        if !is_nilpotent(&routing) {
            return Err(TopologyError::CyclicRouting);
        }
        for (link, &value) in capacities.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TopologyError::Capacity { link, value });
            }
        }

        Ok(Self {
            constituency,
            capacities: DVector::from_vec(capacities),
            routing,
            input,
        })
    }

    /// One node with a single link of capacity `capacity` shared by `users` users.
    pub fn single_server(capacity: f64, users: usize) -> Result<Self, TopologyError> {
        Self::new(
            1,
            1,
            users,
            DMatrix::from_element(1, 1, 1.0),
            vec![capacity],
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, users, 1.0),
        )
    }

    /// One node with a private link per user; link `i` has capacity `capacities[i]`.
    pub fn klimov(capacities: &[f64]) -> Result<Self, TopologyError> {
        let n = capacities.len();
        Self::new(
            1,
            n,
            n,
            DMatrix::from_element(1, n, 1.0),
            capacities.to_vec(),
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
        )
    }

    /// Re-entrant line: all users enter link 1 of node 1, continue to link 2 on node 2
    /// and come back through link 3 on node 1 before leaving.
    pub fn reentrant(p1: f64, p2: f64, p3: f64, users: usize) -> Result<Self, TopologyError> {
        #[rustfmt::skip]
        let constituency = DMatrix::from_row_slice(2, 3, &[
            1.0, 0.0, 1.0,
            0.0, 1.0, 0.0,
        ]);
        #[rustfmt::skip]
        let routing = DMatrix::from_row_slice(3, 3, &[
            0.0, 1.0, 0.0,
            0.0, 0.0, 1.0,
            0.0, 0.0, 0.0,
        ]);
        let mut input = DMatrix::zeros(3, users);
        input.row_mut(0).fill(1.0);
        Self::new(2, 3, users, constituency, vec![p1, p2, p3], routing, input)
    }

    pub fn num_nodes(&self) -> usize {
        self.constituency.nrows()
    }

    pub fn num_links(&self) -> usize {
        self.constituency.ncols()
    }

    pub fn num_users(&self) -> usize {
        self.input.ncols()
    }

    pub fn constituency(&self) -> &DMatrix<f64> {
        &self.constituency
    }

    pub fn capacities(&self) -> &DVector<f64> {
        &self.capacities
    }

    pub fn routing(&self) -> &DMatrix<f64> {
        &self.routing
    }

    pub fn input(&self) -> &DMatrix<f64> {
        &self.input
    }

    /// `Xi = C P^-1 (sum_{k<L} (R^T)^k) A`.
    pub fn load_matrix(&self) -> LoadMatrix {
        let inv_capacity = DMatrix::from_diagonal(&self.capacities.map(|p| 1.0 / p));
        let xi = &self.constituency * inv_capacity * neumann_series(&self.routing) * &self.input;
        LoadMatrix::new(xi).expect("validated topology always yields a valid load matrix")
    }
}

/// Per-node normalized load of each user, `M x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadMatrix {
    xi: DMatrix<f64>,
}

/// Result of testing a rate vector against every node constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub utilizations: Vec<f64>,
    pub binding_rows: Vec<usize>,
}

impl LoadMatrix {
    pub fn new(xi: DMatrix<f64>) -> Result<Self, TopologyError> {
        if xi.nrows() == 0 {
            return Err(TopologyError::Empty("node"));
        }
        if xi.ncols() == 0 {
            return Err(TopologyError::Empty("user"));
        }
        for row in 0..xi.nrows() {
            for col in 0..xi.ncols() {
                let value = xi[(row, col)];
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(TopologyError::NegativeLoad { row, col, value });
                }
            }
        }
        for user in 0..xi.ncols() {
            if xi.column(user).iter().all(|&v| v == 0.0) {
                return Err(TopologyError::UnloadedUser(user));
            }
        }
        Ok(Self { xi })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.xi
    }

    /// Number of node constraints (rows).
    pub fn num_rows(&self) -> usize {
        self.xi.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.xi.ncols()
    }

    /// `Xi * rates`, one value per node constraint. Panics on length mismatch.
    pub fn apply(&self, rates: &[f64]) -> Vec<f64> {
        assert_eq!(rates.len(), self.num_users(), "rate vector length");
        (0..self.num_rows())
            .map(|row| {
                self.xi
                    .row(row)
                    .iter()
                    .zip(rates)
                    .map(|(xi, x)| xi * x)
                    .sum()
            })
            .collect()
    }

    pub fn check_stability(&self, rates: &[f64]) -> Result<StabilityReport, TopologyError> {
        if rates.len() != self.num_users() {
            return Err(TopologyError::RateLength {
                expected: self.num_users(),
                got: rates.len(),
            });
        }
        if let Some((index, &value)) = rates
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(TopologyError::NegativeRate { index, value });
        }
        let utilizations = self.apply(rates);
        let binding_rows: Vec<usize> = utilizations
            .iter()
            .enumerate()
            .filter(|(_, &u)| u >= 1.0 - BINDING_TOLERANCE)
            .map(|(row, _)| row)
            .collect();
        Ok(StabilityReport {
            stable: binding_rows.is_empty(),
            utilizations,
            binding_rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn xi_rows(topology: &NetworkTopology) -> Vec<Vec<f64>> {
        let xi = topology.load_matrix();
        (0..xi.num_rows())
            .map(|r| xi.matrix().row(r).iter().copied().collect())
            .collect()
    }

    #[test]
    fn single_server_load_is_inverse_capacity() {
        let t = NetworkTopology::single_server(50.0, 3).unwrap();
        assert_eq!((t.num_nodes(), t.num_links(), t.num_users()), (1, 1, 3));
        assert_eq!(xi_rows(&t), vec![vec![0.02, 0.02, 0.02]]);
    }

    #[test]
    fn klimov_load() {
        let t = NetworkTopology::klimov(&[10.0, 20.0]).unwrap();
        assert_eq!(xi_rows(&t), vec![vec![0.1, 0.05]]);
    }

    #[test]
    fn reentrant_load() {
        let t = NetworkTopology::reentrant(4.0, 2.0, 4.0, 1).unwrap();
        assert_eq!(xi_rows(&t), vec![vec![0.5], vec![0.5]]);

        let t = NetworkTopology::reentrant(3.0, 7.0, 11.0, 2).unwrap();
        let rows = xi_rows(&t);
        for u in 0..2 {
            assert_relative_eq!(rows[0][u], 1.0 / 3.0 + 1.0 / 11.0, max_relative = 1e-14);
            assert_relative_eq!(rows[1][u], 1.0 / 7.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn reentrant_neumann_series_includes_second_power() {
        let t = NetworkTopology::reentrant(1.0, 1.0, 1.0, 1).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(3, 3, &[
            1.0, 0.0, 0.0,
            1.0, 1.0, 0.0,
            1.0, 1.0, 1.0,
        ]);
        assert_eq!(neumann_series(t.routing()), expected);
    }

    #[test]
    fn self_loop_is_cyclic() {
        let err = NetworkTopology::new(
            1,
            1,
            1,
            DMatrix::from_element(1, 1, 1.0),
            vec![1.0],
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap_err();
        assert_eq!(err, TopologyError::CyclicRouting);
    }

    #[test]
    fn two_cycle_is_cyclic() {
        let err = NetworkTopology::new(
            1,
            2,
            1,
            DMatrix::from_element(1, 2, 1.0),
            vec![1.0, 1.0],
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap_err();
        assert_eq!(err, TopologyError::CyclicRouting);
    }

    #[test]
    fn construction_errors() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let zero = DMatrix::zeros(1, 1);
        assert!(matches!(
            NetworkTopology::new(1, 1, 2, one.clone(), vec![1.0], zero.clone(), one.clone()),
            Err(TopologyError::Dimension {
                matrix: "input",
                ..
            })
        ));
        assert!(matches!(
            NetworkTopology::new(1, 1, 1, one.clone(), vec![0.0], zero.clone(), one.clone()),
            Err(TopologyError::Capacity { link: 0, .. })
        ));
        assert!(matches!(
            NetworkTopology::new(1, 1, 1, one.clone(), vec![-3.0], zero.clone(), one.clone()),
            Err(TopologyError::Capacity { .. })
        ));
        assert!(matches!(
            NetworkTopology::new(
                1,
                1,
                1,
                DMatrix::from_element(1, 1, 0.5),
                vec![1.0],
                zero.clone(),
                one.clone()
            ),
            Err(TopologyError::NonBinary {
                matrix: "constituency",
                ..
            })
        ));
        // link in two nodes
        assert!(matches!(
            NetworkTopology::new(
                2,
                1,
                1,
                DMatrix::from_element(2, 1, 1.0),
                vec![1.0],
                zero.clone(),
                one.clone()
            ),
            Err(TopologyError::LinkMembership { link: 0, count: 2 })
        ));
        // link in no node
        assert!(matches!(
            NetworkTopology::new(1, 1, 1, zero.clone(), vec![1.0], zero.clone(), one.clone()),
            Err(TopologyError::LinkMembership { link: 0, count: 0 })
        ));
        // user with no entry link
        assert!(matches!(
            NetworkTopology::new(1, 1, 1, one.clone(), vec![1.0], zero.clone(), zero.clone()),
            Err(TopologyError::UserEntry { user: 0, count: 0 })
        ));
        assert!(matches!(
            NetworkTopology::klimov(&[1.0, 0.0]),
            Err(TopologyError::Capacity { link: 1, .. })
        ));
        assert!(matches!(
            NetworkTopology::single_server(50.0, 0),
            Err(TopologyError::Empty("user"))
        ));
    }

    #[test]
    fn stability_examples() {
        let xi = NetworkTopology::single_server(50.0, 2)
            .unwrap()
            .load_matrix();
        let r = xi.check_stability(&[20.0, 20.0]).unwrap();
        assert!(r.stable);
        assert_relative_eq!(r.utilizations[0], 0.8, max_relative = 1e-15);
        assert!(r.binding_rows.is_empty());

        let r = xi.check_stability(&[30.0, 30.0]).unwrap();
        assert!(!r.stable);
        assert_relative_eq!(r.utilizations[0], 1.2, max_relative = 1e-15);
        assert_eq!(r.binding_rows, vec![0]);

        let xi = NetworkTopology::reentrant(4.0, 2.0, 4.0, 1)
            .unwrap()
            .load_matrix();
        let r = xi.check_stability(&[2.0]).unwrap();
        assert!(!r.stable);
        assert_eq!(r.utilizations, vec![1.0, 1.0]);
        assert_eq!(r.binding_rows, vec![0, 1]);

        assert_eq!(
            xi.check_stability(&[1.0, 1.0]).unwrap_err(),
            TopologyError::RateLength {
                expected: 1,
                got: 2
            }
        );
        assert!(matches!(
            xi.check_stability(&[-1.0]),
            Err(TopologyError::NegativeRate { index: 0, .. })
        ));
    }

    #[test]
    fn utilization_just_below_one_is_binding() {
        let xi = NetworkTopology::single_server(1.0, 1)
            .unwrap()
            .load_matrix();
        assert!(!xi.check_stability(&[1.0 - 1e-13]).unwrap().stable);
        assert!(xi.check_stability(&[1.0 - 1e-9]).unwrap().stable);
    }

    /// Random acyclic deterministic routing: in a random relabeling of the links, each
    /// link feeds at most one strictly later link.
    fn acyclic_routing() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..8)
            .prop_flat_map(|links| {
                (
                    Just((0..links).collect::<Vec<_>>()).prop_shuffle(),
                    proptest::collection::vec(
                        proptest::option::of(any::<prop::sample::Index>()),
                        links,
                    ),
                )
            })
            .prop_map(|(perm, targets)| {
                let links = perm.len();
                let mut r = DMatrix::zeros(links, links);
                for (pos, target) in targets.into_iter().enumerate() {
                    let later = links - pos - 1;
                    if let (Some(idx), true) = (target, later > 0) {
                        r[(perm[pos], perm[pos + 1 + idx.index(later)])] = 1.0;
                    }
                }
                r
            })
    }

    proptest! {
        #[test]
        fn neumann_series_inverts_identity_minus_transpose(r in acyclic_routing()) {
            let links = r.nrows();
            prop_assert!(is_nilpotent(&r));
            let s = neumann_series(&r);
            let product = (DMatrix::<f64>::identity(links, links) - r.transpose()) * s;
            prop_assert_eq!(product, DMatrix::<f64>::identity(links, links));
        }

        #[test]
        fn capacity_scaling_scales_load(
            caps in proptest::collection::vec(0.1f64..100.0, 1..6),
            kappa in 0.01f64..100.0,
        ) {
            let base = NetworkTopology::klimov(&caps).unwrap().load_matrix();
            let scaled: Vec<f64> = caps.iter().map(|p| p * kappa).collect();
            let scaled = NetworkTopology::klimov(&scaled).unwrap().load_matrix();
            for (a, b) in base.matrix().iter().zip(scaled.matrix().iter()) {
                prop_assert!((a / kappa - b).abs() <= 1e-12 * b.abs());
            }
        }

        #[test]
        fn stability_is_monotone(
            caps in (0.5f64..10.0, 0.5f64..10.0, 0.5f64..10.0),
            y in proptest::collection::vec(0.0f64..2.0, 3),
            shrink in proptest::collection::vec(0.0f64..=1.0, 3),
        ) {
            let xi = NetworkTopology::reentrant(caps.0, caps.1, caps.2, 3).unwrap().load_matrix();
            let x: Vec<f64> = y.iter().zip(&shrink).map(|(a, s)| a * s).collect();
            if xi.check_stability(&y).unwrap().stable {
                prop_assert!(xi.check_stability(&x).unwrap().stable);
            }
        }
    }
}
