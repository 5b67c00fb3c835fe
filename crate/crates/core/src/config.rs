//! Numerical tolerances and size caps shared by every module.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Convergence tolerance of the Metzler power iteration.
    pub power_tol: f64,
    pub power_max_iter: usize,
    /// Largest matrix handed to the dense Hessenberg/QR eigensolver.
    pub dense_eigen_max_dim: usize,
    /// Series truncation tolerance for matrix exponential actions.
    pub expm_tol: f64,
    /// Minimum reciprocal condition number accepted for a subgenerator.
    pub min_rcond: f64,
    /// Tolerance on the initial distribution summing to one.
    pub prob_sum_tol: f64,
    /// Row cap for the bound matrix (n p q).
    pub bound_max_dim: usize,
    /// Cap on the exact chain's state count for enumeration.
    pub exact_max_states: usize,
    /// Cap on the exact chain's state count for the dense eigensolve.
    pub exact_eigen_max_states: usize,
    /// Event cap for runs without a horizon.
    pub sim_max_events: u64,
    /// Events between full recomputations of the total event rate.
    pub rate_audit_interval: u64,
    pub rate_drift_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            power_tol: 1e-10,
            power_max_iter: 10_000,
            dense_eigen_max_dim: 2000,
            expm_tol: 1e-12,
            min_rcond: 1e-14,
            prob_sum_tol: 1e-12,
            bound_max_dim: 4096,
            exact_max_states: 20_000,
            exact_eigen_max_states: 2000,
            sim_max_events: 10_000_000,
            rate_audit_interval: 1000,
            rate_drift_tol: 1e-9,
        }
    }
}
