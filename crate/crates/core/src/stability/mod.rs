//! Exponential mean stability of the infection-free state.
//!
//! Two routes are offered. The bound matrix
//! `𝓐 = Iₙ ⊗ (Tᵀ ⊕ Rᵀ + (φbᵀ) ⊗ I_q) + A ⊗ (φbᵀ) ⊗ (ψ 1ᵀ)` of size `npq`
//! certifies any decay rate up to `-η(𝓐)`. The exact chain over all phase
//! configurations gives the exact rate `-r`, `r` being the spectral
//! abscissa of its transient block, but its size grows like
//! `∏ᵢ (1 + p^{deg i} q)`.
//!
//! The bound is first order: the nonnegative second-order term dropped
//! when closing the moment equations is not modelled.

pub mod exact;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matrix::{dense_spectral_abscissa, kron, kron_sum, spectral_abscissa_with, Matrix, Vector};
use crate::model::GenesisModel;

pub use exact::{build_exact_generator, predicted_state_count, ExactChain, ExactStates, LocalState};

fn bound_dim(model: &GenesisModel) -> u128 {
    model.network().node_count() as u128
        * model.transmission().order() as u128
        * model.recovery().order() as u128
}

/// Diagonal block `Tᵀ ⊕ Rᵀ + (φbᵀ) ⊗ I_q` and coupling block
/// `(φbᵀ) ⊗ (ψ 1ᵀ)` of the bound matrix.
pub fn bound_blocks(model: &GenesisModel) -> Result<(Matrix, Matrix)> {
    let trans = model.transmission();
    let rec = model.recovery();
    let q = rec.order();
    let phi_b = trans.initial() * trans.exit().transpose();
    let psi_one = rec.initial() * Vector::from_element(q, 1.0).transpose();
    let local = kron_sum(&trans.subgenerator().transpose(), &rec.subgenerator().transpose())?
        + kron(&phi_b, &Matrix::identity(q, q));
    let coupling = kron(&phi_b, &psi_one);
    Ok((local, coupling))
}

/// Assembles the `npq × npq` bound matrix.
pub fn build_bound_matrix(model: &GenesisModel, tol: &Tolerances) -> Result<Matrix> {
    let dim = bound_dim(model);
    if dim > tol.bound_max_dim as u128 {
        return Err(Error::TooLarge {
            what: "bound matrix dimension n p q",
            size: dim,
            cap: tol.bound_max_dim as u128,
        });
    }
    let (local, coupling) = bound_blocks(model)?;
    let n = model.network().node_count();
    Ok(kron(&Matrix::identity(n, n), &local) + kron(&model.network().adjacency(), &coupling))
}

/// `η(𝓐)`, the spectral abscissa of the bound matrix.
pub fn bound_abscissa(model: &GenesisModel, tol: &Tolerances) -> Result<f64> {
    spectral_abscissa_with(&build_bound_matrix(model, tol)?, tol)
}

/// `-η(𝓐)`. A positive value certifies exponential mean stability with
/// that decay rate; a nonpositive value certifies nothing.
pub fn decay_rate_bound(model: &GenesisModel, tol: &Tolerances) -> Result<f64> {
    Ok(-bound_abscissa(model, tol)?)
}

/// `-η(𝓐)` through the block structure: with `A = U Λ Uᵀ`, the bound
/// matrix is similar to `⊕ₖ (local + λₖ coupling)`, and since `coupling`
/// is nonnegative the largest abscissa is reached at `λ_max(A)`. Only a
/// `pq × pq` eigenproblem is solved.
pub fn decay_rate_bound_reduced(model: &GenesisModel) -> Result<f64> {
    let (local, coupling) = bound_blocks(model)?;
    let rho = model.network().spectral_radius();
    Ok(-dense_spectral_abscissa(&(local + coupling * rho))?)
}

/// `r`, the spectral abscissa of the exact generator's transient block.
pub fn exact_abscissa(model: &GenesisModel, tol: &Tolerances) -> Result<f64> {
    let predicted = predicted_state_count(model);
    if predicted > tol.exact_eigen_max_states as u128 {
        return Err(Error::TooLarge {
            what: "exact state space for eigensolve prod_i (1 + p^deg_i q)",
            size: predicted,
            cap: tol.exact_eigen_max_states as u128,
        });
    }
    let chain = build_exact_generator(model, tol)?;
    dense_spectral_abscissa(&chain.transient_block())
}

/// `-r`: the model is exponentially mean stable with rate `λ` iff `λ ≤ -r`.
pub fn exact_decay_rate(model: &GenesisModel, tol: &Tolerances) -> Result<f64> {
    Ok(-exact_abscissa(model, tol)?)
}

/// Expected time to reach the all-susceptible state from every transient
/// state, `(-Q_TT)⁻¹ 1`, indexed like the transient block.
pub fn mean_absorption_times(chain: &ExactChain) -> Result<Vector> {
    let q = -chain.transient_block();
    let ones = Vector::from_element(q.nrows(), 1.0);
    q.lu()
        .solve(&ones)
        .ok_or_else(|| Error::InvalidModel("transient block is singular".into()))
}

/// Expected extinction time from the model's initial condition.
pub fn mean_extinction_time(model: &GenesisModel, tol: &Tolerances) -> Result<f64> {
    let predicted = predicted_state_count(model);
    if predicted > tol.exact_eigen_max_states as u128 {
        return Err(Error::TooLarge {
            what: "exact state space for linear solve prod_i (1 + p^deg_i q)",
            size: predicted,
            cap: tol.exact_eigen_max_states as u128,
        });
    }
    let chain = build_exact_generator(model, tol)?;
    let times = mean_absorption_times(&chain)?;
    Ok(chain
        .initial_distribution(model)
        .iter()
        .map(|&(s, w)| if s == 0 { 0.0 } else { w * times[s - 1] })
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `λ ≤ -η(𝓐)`.
    BoundCertified,
    /// The bound fails but `λ ≤ -r`.
    ExactCertified,
    /// `λ > -r`: not stable at this rate.
    ExactRefuted,
    /// The bound fails and the exact chain is too large.
    Undetermined,
}

/// Rates computed once per model, reused across queried `λ`.
#[derive(Clone, Debug)]
struct Rates {
    bound: Option<f64>,
    exact: Option<f64>,
}

impl Rates {
    fn compute(model: &GenesisModel, tol: &Tolerances) -> Rates {
        Rates {
            bound: decay_rate_bound(model, tol).ok(),
            exact: exact_decay_rate(model, tol).ok(),
        }
    }

    fn verdict(&self, lambda: f64) -> Verdict {
        match (self.bound, self.exact) {
            (Some(b), _) if lambda <= b => Verdict::BoundCertified,
            (_, Some(r)) if lambda <= r => Verdict::ExactCertified,
            (_, Some(_)) => Verdict::ExactRefuted,
            (_, None) => Verdict::Undetermined,
        }
    }
}

/// Classifies the decay rate `lambda > 0`.
pub fn certify_stability(model: &GenesisModel, lambda: f64, tol: &Tolerances) -> Result<Verdict> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "decay rate must be positive, got {lambda}"
        )));
    }
    Ok(Rates::compute(model, tol).verdict(lambda))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub lambda: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub bound_dim: u128,
    /// `η(𝓐)`, absent when the bound matrix exceeds its cap.
    pub eta_a: Option<f64>,
    /// `-η(𝓐)`.
    pub bound_rate: Option<f64>,
    /// `r`, absent when the exact chain exceeds its cap.
    pub exact_r: Option<f64>,
    pub exact_rate: Option<f64>,
    pub exact_state_count: Option<u128>,
    pub predicted_state_count: u128,
    pub verdicts: Vec<VerdictEntry>,
    pub bound_order: String,
    pub graph_hash: String,
    pub node_count: usize,
    pub edges: String,
    pub transmission_digest: String,
    pub recovery_digest: String,
    pub tolerances: Tolerances,
    pub version: String,
}

impl StabilityReport {
    pub fn compute(model: &GenesisModel, lambdas: &[f64], tol: &Tolerances) -> Result<Self> {
        if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "decay rate must be positive, got {bad}"
            )));
        }
        let rates = Rates::compute(model, tol);
        let predicted = predicted_state_count(model);
        Ok(StabilityReport {
            bound_dim: bound_dim(model),
            eta_a: rates.bound.map(|b| -b),
            bound_rate: rates.bound,
            exact_r: rates.exact.map(|r| -r),
            exact_rate: rates.exact,
            exact_state_count: rates.exact.map(|_| predicted),
            predicted_state_count: predicted,
            verdicts: lambdas
                .iter()
                .map(|&lambda| VerdictEntry {
                    lambda,
                    verdict: rates.verdict(lambda),
                })
                .collect(),
            bound_order: "first-order".into(),
            graph_hash: model.network().hash(),
            node_count: model.network().node_count(),
            edges: model.network().canonical_edge_list(),
            transmission_digest: model.transmission().digest(),
            recovery_digest: model.recovery().digest(),
            tolerances: tol.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::is_metzler;
    use crate::network::{Network, NetworkKind};
    use crate::phase_type::PhaseType;
    use nalgebra::dmatrix;

    fn exp_model(kind: NetworkKind, beta: f64, delta: f64) -> GenesisModel {
        GenesisModel::new(
            Network::generate(&kind).unwrap(),
            PhaseType::exponential(beta).unwrap(),
            PhaseType::exponential(delta).unwrap(),
            [0],
        )
        .unwrap()
    }

    #[test]
    fn bound_matrix_collapses_for_exponential_laws() {
        let m = exp_model(NetworkKind::Path { n: 2 }, 0.5, 1.5);
        let a = build_bound_matrix(&m, &Tolerances::default()).unwrap();
        assert_eq!(a, dmatrix![-1.5, 0.5; 0.5, -1.5]);
    }

    #[test]
    fn bound_matrix_dims() {
        let e10 = PhaseType::erlang(10, 1.0).unwrap();
        let m = GenesisModel::new(
            Network::generate(&NetworkKind::Path { n: 3 }).unwrap(),
            e10.clone(),
            e10,
            [1],
        )
        .unwrap();
        let a = build_bound_matrix(&m, &Tolerances::default()).unwrap();
        assert_eq!(a.shape(), (300, 300));
        assert!(is_metzler(&a));
    }

    #[test]
    fn bound_matrix_cap() {
        let e10 = PhaseType::erlang(10, 1.0).unwrap();
        let m = GenesisModel::new(
            Network::generate(&NetworkKind::Cycle { n: 41 }).unwrap(),
            e10.clone(),
            e10,
            [1],
        )
        .unwrap();
        let err = build_bound_matrix(&m, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::TooLarge { size: 4100, cap: 4096, .. }));
    }

    #[test]
    fn decay_rate_bound_examples() {
        let tol = Tolerances::default();
        let m = exp_model(NetworkKind::Path { n: 2 }, 0.5, 1.5);
        assert!((decay_rate_bound(&m, &tol).unwrap() - 1.0).abs() < 1e-12);
        let m = exp_model(NetworkKind::Complete { n: 3 }, 1.0, 1.0);
        assert!((decay_rate_bound(&m, &tol).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_scales_with_time() {
        let tol = Tolerances::default();
        let g = Network::generate(&NetworkKind::Path { n: 4 }).unwrap();
        let t = PhaseType::hyper_erlang(&[0.3, 0.7], &[2, 1], &[3.0, 0.8]).unwrap();
        let r = PhaseType::erlang(2, 1.7).unwrap();
        let m = GenesisModel::new(g.clone(), t.clone(), r.clone(), [0]).unwrap();
        // T, R multiplied by 2 = times divided by 2
        let fast = GenesisModel::new(g, t.scaled(0.5).unwrap(), r.scaled(0.5).unwrap(), [0]).unwrap();
        let base = decay_rate_bound(&m, &tol).unwrap();
        let scaled = decay_rate_bound(&fast, &tol).unwrap();
        assert!((scaled - 2.0 * base).abs() < 1e-9, "{base} {scaled}");
    }

    #[test]
    fn reduced_route_matches_full_assembly() {
        let tol = Tolerances::default();
        let g = Network::generate(&NetworkKind::ErdosRenyi { n: 12, prob: 0.3, seed: 5 }).unwrap();
        let t = PhaseType::hyper_erlang(&[0.3, 0.7], &[2, 1], &[3.0, 0.8]).unwrap();
        let r = PhaseType::hyper_erlang(&[0.6, 0.4], &[1, 2], &[0.5, 4.0]).unwrap();
        let m = GenesisModel::new(g, t, r, [0]).unwrap();
        let full = decay_rate_bound(&m, &tol).unwrap();
        let reduced = decay_rate_bound_reduced(&m).unwrap();
        assert!((full - reduced).abs() < 1e-9, "{full} vs {reduced}");
    }

    #[test]
    fn verdict_examples() {
        let tol = Tolerances::default();
        let m = exp_model(NetworkKind::Path { n: 2 }, 0.5, 1.5);
        assert_eq!(certify_stability(&m, 0.9, &tol).unwrap(), Verdict::BoundCertified);
        let exact = exact_decay_rate(&m, &tol).unwrap();
        assert_eq!(
            certify_stability(&m, exact + 0.01, &tol).unwrap(),
            Verdict::ExactRefuted
        );
        // bound fails on the triangle, exact rate is positive
        let m = exp_model(NetworkKind::Complete { n: 3 }, 1.0, 1.0);
        assert!(exact_decay_rate(&m, &tol).unwrap() > 0.0);
        assert_eq!(certify_stability(&m, 1e-9, &tol).unwrap(), Verdict::ExactCertified);
        assert!(certify_stability(&m, 0.0, &tol).is_err());
    }

    #[test]
    fn verdict_undetermined_when_exact_is_infeasible() {
        let tol = Tolerances {
            exact_eigen_max_states: 3,
            ..Tolerances::default()
        };
        let m = exp_model(NetworkKind::Complete { n: 3 }, 1.0, 1.0);
        assert_eq!(certify_stability(&m, 0.5, &tol).unwrap(), Verdict::Undetermined);
    }

    #[test]
    fn exact_rate_grows_with_recovery_rate() {
        let tol = Tolerances::default();
        let rates: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&delta| exact_decay_rate(&exp_model(NetworkKind::Path { n: 3 }, 0.7, delta), &tol).unwrap())
            .collect();
        assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
    }

    #[test]
    fn report_serializes() {
        let m = exp_model(NetworkKind::Path { n: 2 }, 0.5, 1.5);
        let report = StabilityReport::compute(&m, &[0.5, 1.5], &Tolerances::default()).unwrap();
        assert_eq!(report.bound_dim, 2);
        assert_eq!(report.exact_state_count, Some(4));
        assert!(report.eta_a.unwrap() >= report.exact_r.unwrap() - 1e-12);
        let json = report.to_json();
        let back: StabilityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(json.contains("\"bound-certified\""));
    }
}
