//! Estimators θ̂_C (maximum likelihood) and θ̂_Q (shadow cross entropy).

mod bfgs;
mod loss;

use serde::{Deserialize, Serialize};

pub use bfgs::{minimize_from, optimize, optimize_from_starts, FitResult, OptimizerConfig};
pub use loss::{log_likelihood, loss_ll, loss_ll_prepared, loss_shadow, PreparedOutcomes, SUPPORT_FLOOR};

use crate::error::Result;
use crate::linalg::HermMatrix;
use crate::povm::OutcomeCounts;
use crate::qhbm::StateFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "LL")]
    Likelihood,
    #[serde(rename = "shadow")]
    Shadow,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Likelihood => "LL",
            EstimatorKind::Shadow => "shadow",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// θ̂_C: minimizes `−ℓ_LL/n` over the model.
pub fn fit_ll(model: &dyn StateFamily, counts: &OutcomeCounts, cfg: &OptimizerConfig, seed: u64) -> Result<FitResult> {
    let data = PreparedOutcomes::new(counts)?;
    optimize(|t: &[f64]| loss_ll_prepared(model, t, &data), model.num_params(), cfg, seed)
}

/// θ̂_Q: minimizes `−Tr(ρ̄ log σ(θ))` over the model.
pub fn fit_shadow(model: &dyn StateFamily, rho_bar: &HermMatrix, cfg: &OptimizerConfig, seed: u64) -> Result<FitResult> {
    optimize(|t: &[f64]| loss_shadow(model, t, rho_bar), model.num_params(), cfg, seed)
}

/// One persisted fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub trial: usize,
    pub model: String,
    pub estimator_kind: EstimatorKind,
    pub theta_hat: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitRecord {
    pub fn new(trial: usize, model: &str, kind: EstimatorKind, fit: &FitResult) -> Self {
        Self {
            trial,
            model: model.to_string(),
            estimator_kind: kind,
            theta_hat: fit.theta_hat.clone(),
            loss: fit.loss,
            grad_norm: fit.grad_norm,
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::enumerate_pmf;
    use crate::qhbm::{Order, QhbmModel};

    #[test]
    fn exact_pmf_fit_recovers_state() {
        let m = QhbmModel::m1();
        let theta0 = [0.5, -0.3, 0.2, 0.4, -0.6, 0.1, 0.7, -0.4, 0.3];
        let rho = m.model_state(&theta0).unwrap();
        // cross-entropy against the exact pmf, written as weighted counts
        let pmf = enumerate_pmf(&rho).unwrap();
        let loss = |t: &[f64]| {
            let ev = m.evaluate(t, Order::Gradient)?;
            let h = crate::povm::povm_traces(ev.state.as_mat(), 3);
            let mut l = 0.0;
            let mut g = vec![0.0; 9];
            for (k, ds) in ev.grad_state.iter().enumerate() {
                let dh = crate::povm::povm_traces(ds.as_mat(), 3);
                g[k] = -pmf.probabilities.iter().zip(&dh).zip(&h).map(|((p, d), q)| p * d / q).sum::<f64>();
            }
            for (p, q) in pmf.probabilities.iter().zip(&h) {
                l -= p * q.ln();
            }
            Ok((l, g))
        };
        let r = optimize(loss, 9, &OptimizerConfig::default(), 3).unwrap();
        let log_sigma = m.log_model(&r.theta_hat).unwrap();
        assert!(rho.relative_entropy_to(&log_sigma) < 1e-6);
    }

    #[test]
    fn shadow_fit_of_exact_state_is_stationary() {
        let m = QhbmModel::m1();
        let theta0 = [0.3, 0.2, -0.4, 0.1, 0.5, -0.2, 0.6, 0.3, -0.5];
        let rho = m.model_state(&theta0).unwrap();
        let r = fit_shadow(&m, rho.matrix(), &OptimizerConfig::default(), 1).unwrap();
        assert!(r.grad_norm < 1e-6);
        let log_sigma = m.log_model(&r.theta_hat).unwrap();
        assert!(rho.relative_entropy_to(&log_sigma) < 1e-8);
    }

    #[test]
    fn estimator_kind_serde() {
        assert_eq!(serde_json::to_string(&EstimatorKind::Likelihood).unwrap(), "\"LL\"");
        assert_eq!(serde_json::to_string(&EstimatorKind::Shadow).unwrap(), "\"shadow\"");
    }
}
