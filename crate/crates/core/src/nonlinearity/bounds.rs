//! Two-phase checks for inequalities that hold only up to a constant:
//! fit the constant on one grid, then assert it (with slack) on another.

use serde::Serialize;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FittedBound {
    /// Largest training ratio `lhs/rhs`.
    pub constant: f64,
    pub slack: f64,
    /// Largest ratio on the assertion grid.
    pub assert_max: f64,
    pub holds: bool,
}

/// `ratio` is `lhs/rhs` of an inequality `lhs ≤ C·rhs`.
pub fn fit_and_assert(ratio: impl Fn(f64) -> f64, train: &[f64], assert_on: &[f64], slack: f64) -> FittedBound {
    let constant = train.iter().map(|&s| ratio(s)).fold(f64::MIN, f64::max);
    let assert_max = assert_on.iter().map(|&s| ratio(s)).fold(f64::MIN, f64::max);
    FittedBound { constant, slack, assert_max, holds: assert_max <= constant * (1.0 + slack) }
}

/// A training grid and a disjoint assertion grid ten times denser, both
/// geometric over `[a, b]`.
pub fn disjoint_log_grids(a: f64, b: f64, n_train: usize) -> (Vec<f64>, Vec<f64>) {
    let train = crate::numerics::log_grid(a, b, n_train);
    let dense = crate::numerics::log_grid(a, b, 10 * n_train + 3);
    let assert_on = dense.into_iter().filter(|s| train.iter().all(|t| ((s - t) / t).abs() > 1e-9)).collect();
    (train, assert_on)
}
