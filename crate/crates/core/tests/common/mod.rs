//! Measurements shared by the property tests and the acceptance report.
#![allow(dead_code)]

use std::path::PathBuf;

use qic_core::criteria::{pinv, qaic_ll};
use qic_core::fisher::{bkm_integral_oracle, bkm_j_model, bkm_quadrature, classical_i_model, InfoKind, InfoMatrix};
use qic_core::fit::{fit_ll, OptimizerConfig};
use qic_core::linalg::{frobenius, CMat};
use qic_core::povm::{sample_outcomes, Sampler};
use qic_core::rng::{derive_seed, rng_from_seed, uniform_range, Rng};
use qic_core::shadow::{mean_snapshot, Snapshot};
use qic_core::{DensityMatrix, ExperimentConfig, QhbmModel, StateFamily};

pub fn standard_config() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/standard.json");
    ExperimentConfig::load(&path).expect("configs/standard.json")
}

pub fn random_theta(rng: &mut Rng, p: usize, r: f64) -> Vec<f64> {
    (0..p).map(|_| uniform_range(rng, -r, r)).collect()
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub struct ShadowError {
    pub qubits: usize,
    /// Worst `‖ρ̄ − ρ‖_F` over the sampled states.
    pub worst: f64,
    /// Largest `√((5^q − Tr ρ²)/n)`, the root-mean-square error of a mean of `n` snapshots.
    pub expected_rms: f64,
}

/// Frobenius error of the mean of `shots` snapshots, over `states` random states per qubit count.
pub fn shadow_mean_error(qubits: &[usize], states: usize, shots: usize, seed: u64) -> Vec<ShadowError> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    for &q in qubits {
        let mut e = ShadowError { qubits: q, worst: 0.0, expected_rms: 0.0 };
        for k in 0..states {
            let rho = DensityMatrix::random(q, &mut rng);
            let outcomes = sample_outcomes(&rho, shots, derive_seed(seed, (q * 100 + k) as u64)).unwrap();
            let snaps: Vec<Snapshot> = outcomes.into_iter().map(Snapshot::new).collect();
            let bar = mean_snapshot(&snaps).unwrap();
            e.worst = e.worst.max(frobenius(&(bar.as_mat() - rho.matrix().as_mat())));
            let purity = frobenius(rho.matrix().as_mat()).powi(2);
            e.expected_rms = e.expected_rms.max(((5f64.powi(q as i32) - purity) / shots as f64).sqrt());
        }
        out.push(e);
    }
    out
}

/// Largest entry errors of the analytic gradient and Hessian of log σ against central differences.
pub fn log_derivative_errors(model: &QhbmModel, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_from_seed(seed);
    let p = model.num_params();
    let (mut g_err, mut h_err) = (0.0f64, 0.0f64);
    let log = |t: &[f64]| model.log_model(t).unwrap().into_mat();
    for _ in 0..draws {
        let t = random_theta(&mut rng, p, 1.5);
        let grad = model.grad_log_model(&t).unwrap();
        let hess = model.hess_log_model(&t).unwrap();
        let h = 1e-5;
        for i in 0..p {
            let mut up = t.clone();
            let mut dn = t.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (log(&up) - log(&dn)) / num_complex::Complex64::from(2.0 * h);
            g_err = g_err.max(max_abs(&(fd - grad[i].as_mat())));
        }
        let h = 1e-4;
        for i in 0..p {
            for j in i..p {
                let shifted = |si: f64, sj: f64| {
                    let mut x = t.clone();
                    x[i] += si * h;
                    x[j] += sj * h;
                    log(&x)
                };
                let fd = (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0) + shifted(-1.0, -1.0))
                    / num_complex::Complex64::from(4.0 * h * h);
                h_err = h_err.max(max_abs(&(fd - hess[i][j].as_mat())));
            }
        }
    }
    (g_err, h_err)
}

/// Entrywise gaps of the closed-form BKM metric to the integral oracle and to midpoint quadrature.
pub fn bkm_errors(instances: usize, seed: u64) -> (f64, f64) {
    let m = QhbmModel::m1();
    let mut rng = rng_from_seed(seed);
    let (mut oracle, mut quad) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let t = random_theta(&mut rng, 9, 1.0);
        let j = bkm_j_model(&m, &t).unwrap();
        let o = bkm_integral_oracle(&m, &t).unwrap();
        let q = bkm_quadrature(&m, &t, 4000).unwrap();
        oracle = oracle.max((&j.entries - &o.entries).amax());
        quad = quad.max((&j.entries - &q.entries).amax());
    }
    (oracle, quad)
}

pub struct DominanceCheck {
    pub min_eigenvalue: f64,
    /// Smallest `penalty − 2p` among instances with full-rank `Î_C`.
    pub min_penalty_margin: f64,
    pub full_rank_instances: usize,
}

/// `Ĵ_Q − Î_C` at likelihood fits of M1 and M2 to data from random M1 states.
pub fn fisher_dominance(instances: usize, seed: u64) -> DominanceCheck {
    let truth = QhbmModel::m1();
    let models = [QhbmModel::m1(), QhbmModel::m2()];
    let mut rng = rng_from_seed(seed);
    let cfg = OptimizerConfig {
        restarts: 2,
        ..OptimizerConfig::default()
    };
    let mut out = DominanceCheck {
        min_eigenvalue: f64::INFINITY,
        min_penalty_margin: f64::INFINITY,
        full_rank_instances: 0,
    };
    for k in 0..instances {
        let rho = truth.model_state(&random_theta(&mut rng, 9, 1.0)).unwrap();
        let counts = Sampler::new(&rho).sample_counts(1000, &mut rng);
        let model = &models[k % 2];
        let fit = fit_ll(model, &counts, &cfg, derive_seed(seed, k as u64)).unwrap();
        let t = &fit.theta_hat;
        let jq = bkm_j_model(model, t).unwrap();
        let ic = classical_i_model(model, t).unwrap();
        let diff = InfoMatrix::new(InfoKind::QuantumJBkm, &jq.entries - &ic.entries).unwrap();
        out.min_eigenvalue = out.min_eigenvalue.min(diff.min_eigenvalue());
        let (_, rank) = pinv(&ic.entries, 1e-10);
        if rank == model.num_params() {
            out.full_rank_instances += 1;
            let r = qaic_ll(model, t, &counts, 1e-10).unwrap();
            out.min_penalty_margin = out.min_penalty_margin.min(r.penalty_term - 2.0 * model.num_params() as f64);
        }
    }
    out
}
