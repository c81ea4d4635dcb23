//! Fast invariant suite behind the `selfcheck` command.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::{run_trial, ExperimentContext};
use crate::criteria::{aic, qce_true, tic};
use crate::error::Result;
use crate::fisher::{bkm_integral_oracle, bkm_j_model, classical_i_model, score_identity, InfoKind, InfoMatrix};
use crate::linalg::{herm_eig, herm_exp, hermitian_deviation, CMat, DensityMatrix, HermMatrix};
use crate::povm::{enumerate_pmf, outcome_count, povm_element, MeasurementOutcome};
use crate::qhbm::{Order, QhbmModel, StateFamily};
use crate::rng::{rng_from_seed, uniform_range, Rng};
use crate::shadow::{snapshot_materialize, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation, or a short note.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfcheckReport {
    pub checks: Vec<Check>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn below(name: &str, worst: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        passed: worst.is_finite() && worst < tol,
        detail: format!("max deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn random_theta(rng: &mut Rng, p: usize, r: f64) -> Vec<f64> {
    (0..p).map(|_| uniform_range(rng, -r, r)).collect()
}

fn linear_algebra(rng: &mut Rng) -> Vec<Check> {
    let mut herm = 0.0f64;
    let mut unitary = 0.0f64;
    let mut spectral = 0.0f64;
    for _ in 0..5 {
        let h = HermMatrix::random(8, rng);
        let e = herm_eig(&h);
        let vv = e.vectors.adjoint() * &e.vectors - CMat::identity(8, 8);
        unitary = unitary.max(vv.norm());
        let x = herm_exp(&h).expect("bounded spectrum");
        herm = herm.max(hermitian_deviation(x.as_mat()));
        let (lo, hi) = (e.values[0], e.values[7]);
        let t = x.trace();
        spectral = spectral.max((8.0 * lo.exp() - t).max(t - 8.0 * hi.exp()).max(0.0));
    }
    vec![
        below("eigenvectors are unitary", unitary, 1e-10),
        below("matrix exponential is Hermitian", herm, 1e-10),
        below("exponential trace within spectral bounds", spectral, 1e-9),
    ]
}

fn measurement(rng: &mut Rng) -> Vec<Check> {
    let mut completeness = 0.0f64;
    let mut unbiased = 0.0f64;
    for q in 1..=3 {
        let dim = 1 << q;
        let mut sum = CMat::zeros(dim, dim);
        for x in 0..outcome_count(q) {
            sum += povm_element(&MeasurementOutcome::from_index(x, q)).as_mat();
        }
        completeness = completeness.max(max_abs(&(sum - CMat::identity(dim, dim))));

        let rho = DensityMatrix::random(q, rng);
        let pmf = enumerate_pmf(&rho).expect("small register");
        let mut mean = CMat::zeros(dim, dim);
        for (x, p) in pmf.probabilities.iter().enumerate() {
            let s = snapshot_materialize(&Snapshot::new(MeasurementOutcome::from_index(x, q)));
            mean += s.as_mat() * num_complex::Complex64::from(*p);
        }
        unbiased = unbiased.max(max_abs(&(mean - rho.matrix().as_mat())));
    }
    vec![
        below("POVM elements sum to identity", completeness, 1e-12),
        below("snapshot expectation equals the state", unbiased, 1e-12),
    ]
}

fn models(rng: &mut Rng) -> Vec<Check> {
    let (mut trace, mut score, mut nest, mut grad) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (m1, m2) = (QhbmModel::m1(), QhbmModel::m2());
    for _ in 0..3 {
        let t1 = random_theta(rng, 9, 2.0);
        let mut t2 = t1.clone();
        t2.extend([0.0; 6]);
        let a = m1.model_state(&t1).expect("finite");
        let b = m2.model_state(&t2).expect("finite");
        nest = nest.max(a.matrix().sub(b.matrix()).frobenius());
        for (m, t) in [(&m1, &t1), (&m2, &t2)] {
            let ev = m.evaluate(t, Order::Gradient).expect("finite");
            trace = trace.max((ev.state.trace() - 1.0).abs());
            score = score.max(score_identity(m, t).expect("finite").iter().fold(0.0, |a, v| a.max(v.abs())));
            let h = 1e-5;
            for k in 0..m.num_params() {
                let (mut up, mut dn) = (t.clone(), t.clone());
                up[k] += h;
                dn[k] -= h;
                let fd = m.log_model(&up).expect("finite").sub(&m.log_model(&dn).expect("finite")).scale(0.5 / h);
                grad = grad.max(max_abs(&(fd.as_mat() - ev.grad_log[k].as_mat())));
            }
        }
    }
    vec![
        below("model states have unit trace", trace, 1e-10),
        below("score identity Tr(σ ∂ log σ) = 0", score, 1e-9),
        below("M1 embeds in M2", nest, 1e-12),
        below("log-state gradient matches finite differences", grad, 1e-6),
    ]
}

fn information(rng: &mut Rng) -> Result<Vec<Check>> {
    let m = QhbmModel::m1();
    let (mut oracle, mut gap) = (0.0f64, f64::INFINITY);
    for _ in 0..3 {
        let t = random_theta(rng, 9, 1.0);
        let j = bkm_j_model(&m, &t)?;
        let o = bkm_integral_oracle(&m, &t)?;
        oracle = oracle.max((&j.entries - &o.entries).amax());
        let ic = classical_i_model(&m, &t)?;
        let d = InfoMatrix::new(InfoKind::QuantumJBkm, &j.entries - &ic.entries)?;
        gap = gap.min(d.min_eigenvalue());
    }
    let id = InfoMatrix::new(InfoKind::ClassicalIEmp, nalgebra::DMatrix::identity(4, 4))?;
    let collapse = (tic(-500.0, &id, &id, 1e-10)?.value - aic(-500.0, 4).value).abs();
    let rho = DensityMatrix::random(3, rng);
    let t = random_theta(rng, 9, 1.0);
    let qce = qce_true(&rho, &m, &t)?.value - rho.von_neumann_entropy();
    Ok(vec![
        below("BKM closed form matches integral oracle", oracle, 1e-7),
        Check {
            name: "quantum Fisher dominates classical".into(),
            passed: gap >= -1e-8,
            detail: format!("min eigenvalue of J_Q − I_C {gap:.3e}"),
        },
        below("TIC with I = J collapses to AIC", collapse, 1e-9),
        Check {
            name: "QCE_true is at least the von Neumann entropy".into(),
            passed: qce >= -1e-9,
            detail: format!("QCE − S = {qce:.3e}"),
        },
    ])
}

fn pipeline() -> Result<Check> {
    let mut cfg = ExperimentConfig::standard(7);
    cfg.n_shots = 200;
    cfg.trials = 1;
    cfg.restarts = 1;
    cfg.max_iter = 40;
    let ctx = ExperimentContext::new(cfg)?;
    let a = serde_json::to_string(&run_trial(&ctx, 0))?;
    let b = serde_json::to_string(&run_trial(&ctx, 0))?;
    Ok(Check {
        name: "trial records are reproducible".into(),
        passed: a == b,
        detail: format!("{} bytes", a.len()),
    })
}

pub fn selfcheck(seed: u64) -> Result<SelfcheckReport> {
    let mut rng = rng_from_seed(seed);
    let mut checks = linear_algebra(&mut rng);
    checks.extend(measurement(&mut rng));
    checks.extend(models(&mut rng));
    checks.extend(information(&mut rng)?);
    checks.push(pipeline()?);
    Ok(SelfcheckReport { checks })
}
