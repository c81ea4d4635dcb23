//! Monte-Carlo checks of the asymptotic results: shadow bias, normality and consistency.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::criteria::pinv;
use crate::error::{Error, Result};
use crate::fisher::{bkm_j_model, classical_i_model, shadow_i_model};
use crate::fit::{fit_ll, fit_shadow, OptimizerConfig};
use crate::linalg::DensityMatrix;
use crate::povm::{OutcomeCounts, Sampler};
use crate::qhbm::{FrozenModel, Order, QhbmModel, StateFamily};
use crate::rng::{derive_seed, rng_from_seed};
use crate::shadow::mean_snapshot_from_counts;

const BIAS_STREAM: u64 = u64::MAX - 1;
const NORMALITY_STREAM: u64 = u64::MAX - 2;
const CONSISTENCY_STREAM: u64 = u64::MAX - 3;

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl MeanEstimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            f64::NAN
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// |mean − target| in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error
    }
}

struct Realizable {
    truth: QhbmModel,
    theta0: Vec<f64>,
    rho: DensityMatrix,
    frozen: FrozenModel,
    sampler: Sampler,
    optimizer: OptimizerConfig,
}

impl Realizable {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let truth = config.true_model()?;
        let theta0 = config.true_params()?;
        let rho = truth.model_state(&theta0)?;
        let frozen = FrozenModel::new(truth.clone(), theta0.clone(), config.validation.free_params.clone())?;
        let sampler = Sampler::new(&rho);
        Ok(Self {
            truth,
            theta0,
            rho,
            frozen,
            sampler,
            optimizer: config.optimizer(),
        })
    }

    fn counts(&self, n: usize, seed: u64) -> OutcomeCounts {
        let mut rng = rng_from_seed(seed);
        self.sampler.sample_counts(n, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub n: usize,
    pub replications: usize,
    pub failed: usize,
    /// `n·Tr((ρ̄ − ρ) log σ(θ̂_Q))` averaged over replications.
    pub raw: MeanEstimate,
    /// Same expectation with the zero-mean term `n·Tr((ρ̄ − ρ) log σ(θ0))` subtracted.
    pub control_variate: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub model: String,
    pub free_params: Vec<usize>,
    pub theta0: Vec<f64>,
    /// `Tr(I_Q J_Q⁻¹)` at θ0.
    pub formula: f64,
    pub points: Vec<BiasPoint>,
}

/// Shadow-estimator bias `E[ℓ_shadow(θ̂_Q) − n·Tr(ρ log σ(θ̂_Q))]` against `Tr(I_Q J_Q⁻¹)`.
pub fn validate_bias(config: &ExperimentConfig) -> Result<BiasReport> {
    let setup = Realizable::new(config)?;
    let v = &config.validation;
    let model = &setup.frozen;
    let t0 = model.anchor_free();
    let iq = shadow_i_model(model, &t0)?;
    let jq = bkm_j_model(model, &t0)?;
    let (jinv, _) = pinv(&jq.entries, config.rcond);
    let formula = (&iq.entries * jinv).trace();
    let log0 = setup.truth.log_model(&setup.theta0)?;

    let mut sizes = vec![v.n_shots];
    sizes.extend(v.bias_sweep.iter().copied().filter(|&n| n != v.n_shots));
    let mut points = Vec::new();
    for (si, &n) in sizes.iter().enumerate() {
        let stream = derive_seed(derive_seed(config.master_seed, BIAS_STREAM), si as u64);
        let (mut raw, mut cv, mut failed) = (Vec::new(), Vec::new(), 0);
        for r in 0..v.replications {
            let seed = derive_seed(stream, r as u64);
            let counts = setup.counts(n, derive_seed(seed, 0));
            let rho_bar = mean_snapshot_from_counts(&counts)?;
            let fit = match fit_shadow(model, &rho_bar, &setup.optimizer, derive_seed(seed, 1)) {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("bias replication {r} at n={n} failed: {e}");
                    failed += 1;
                    continue;
                }
            };
            let diff = rho_bar.sub(setup.rho.matrix());
            let log_hat = model.evaluate(&fit.theta_hat, Order::Value)?.log_state;
            let b = n as f64 * diff.trace_with(&log_hat);
            raw.push(b);
            cv.push(b - n as f64 * diff.trace_with(&log0));
        }
        if raw.len() < 2 {
            return Err(Error::Optimization(format!("bias study at n={n}: too few successful fits")));
        }
        log::info!("bias n={n}: {:.4} vs formula {:.4}", MeanEstimate::of(&cv).mean, formula);
        points.push(BiasPoint {
            n,
            replications: v.replications,
            failed,
            raw: MeanEstimate::of(&raw),
            control_variate: MeanEstimate::of(&cv),
        });
    }
    Ok(BiasReport {
        model: model.name().to_string(),
        free_params: model.free().to_vec(),
        theta0: t0,
        formula,
        points,
    })
}

/// Empirical versus predicted covariance of `√n(θ̂ − θ0)` for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityEstimate {
    pub estimator: String,
    pub successful: usize,
    pub predicted_cov: Vec<Vec<f64>>,
    pub empirical_cov: Vec<Vec<f64>>,
    /// Entrywise empirical / predicted.
    pub ratio: Vec<Vec<f64>>,
    /// Mean of `θ̂ − θ0` per free parameter.
    pub mean_error: Vec<MeanEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub model: String,
    pub free_params: Vec<usize>,
    pub theta0: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub shadow: NormalityEstimate,
    pub likelihood: NormalityEstimate,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn normality_estimate(name: &str, samples: &[Vec<f64>], t0: &[f64], n: usize, predicted: DMatrix<f64>) -> NormalityEstimate {
    let p = t0.len();
    let r = samples.len() as f64;
    let mean: Vec<f64> = (0..p).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / r).collect();
    let mut cov = DMatrix::zeros(p, p);
    for s in samples {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    cov *= n as f64 / (r - 1.0);
    let ratio = cov.component_div(&predicted);
    let mean_error = (0..p)
        .map(|i| MeanEstimate::of(&samples.iter().map(|s| s[i] - t0[i]).collect::<Vec<_>>()))
        .collect();
    NormalityEstimate {
        estimator: name.to_string(),
        successful: samples.len(),
        predicted_cov: to_rows(&predicted),
        empirical_cov: to_rows(&cov),
        ratio: to_rows(&ratio),
        mean_error,
    }
}

/// Replicated fits of both estimators on a realizable frozen model.
pub fn validate_normality(config: &ExperimentConfig) -> Result<NormalityReport> {
    let setup = Realizable::new(config)?;
    let v = &config.validation;
    let model = &setup.frozen;
    let t0 = model.anchor_free();
    let n = v.n_shots;

    let iq = shadow_i_model(model, &t0)?;
    let jq = bkm_j_model(model, &t0)?;
    let (jq_inv, _) = pinv(&jq.entries, config.rcond);
    let vq = &jq_inv * &iq.entries * &jq_inv;
    let ic = classical_i_model(model, &t0)?;
    let (vc, _) = pinv(&ic.entries, config.rcond);

    let stream = derive_seed(config.master_seed, NORMALITY_STREAM);
    let (mut q, mut c) = (Vec::new(), Vec::new());
    for r in 0..v.replications {
        let seed = derive_seed(stream, r as u64);
        let counts = setup.counts(n, derive_seed(seed, 0));
        let rho_bar = mean_snapshot_from_counts(&counts)?;
        match fit_shadow(model, &rho_bar, &setup.optimizer, derive_seed(seed, 1)) {
            Ok(f) => q.push(f.theta_hat),
            Err(e) => log::warn!("normality shadow fit {r} failed: {e}"),
        }
        match fit_ll(model, &counts, &setup.optimizer, derive_seed(seed, 2)) {
            Ok(f) => c.push(f.theta_hat),
            Err(e) => log::warn!("normality likelihood fit {r} failed: {e}"),
        }
    }
    if q.len() < 2 || c.len() < 2 {
        return Err(Error::Optimization("normality study: too few successful fits".into()));
    }
    Ok(NormalityReport {
        model: model.name().to_string(),
        free_params: model.free().to_vec(),
        theta0: t0.clone(),
        n,
        replications: v.replications,
        shadow: normality_estimate("shadow", &q, &t0, n, vq),
        likelihood: normality_estimate("LL", &c, &t0, n, vc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub n: usize,
    /// Relative entropies `D(ρ‖σ(θ̂))`, one per seed.
    pub shadow: Vec<f64>,
    pub likelihood: Vec<f64>,
    pub shadow_median: f64,
    pub likelihood_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub model: String,
    pub theta0: Vec<f64>,
    pub points: Vec<ConsistencyPoint>,
}

impl ConsistencyReport {
    fn decreasing(&self, f: impl Fn(&ConsistencyPoint) -> f64) -> bool {
        self.points.windows(2).all(|w| f(&w[1]) < f(&w[0]))
    }

    pub fn shadow_decreasing(&self) -> bool {
        self.decreasing(|p| p.shadow_median)
    }

    pub fn likelihood_decreasing(&self) -> bool {
        self.decreasing(|p| p.likelihood_median)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Median relative entropy of the fitted full model across seeds and sample sizes.
pub fn validate_consistency(config: &ExperimentConfig) -> Result<ConsistencyReport> {
    let setup = Realizable::new(config)?;
    let v = &config.validation;
    let model = &setup.truth;
    let stream = derive_seed(config.master_seed, CONSISTENCY_STREAM);
    let mut points = Vec::new();
    for (ni, &n) in v.consistency_shots.iter().enumerate() {
        let (mut dq, mut dc) = (Vec::new(), Vec::new());
        for s in 0..v.consistency_seeds {
            let seed = derive_seed(derive_seed(stream, ni as u64), s as u64);
            let counts = setup.counts(n, derive_seed(seed, 0));
            let rho_bar = mean_snapshot_from_counts(&counts)?;
            let dist = |theta: &[f64]| -> Result<f64> { Ok(setup.rho.relative_entropy_to(&model.log_model(theta)?)) };
            let fq = fit_shadow(model, &rho_bar, &setup.optimizer, derive_seed(seed, 1))?;
            dq.push(dist(&fq.theta_hat)?);
            let fc = fit_ll(model, &counts, &setup.optimizer, derive_seed(seed, 2))?;
            dc.push(dist(&fc.theta_hat)?);
        }
        points.push(ConsistencyPoint {
            n,
            shadow_median: median(&dq),
            likelihood_median: median(&dc),
            shadow: dq,
            likelihood: dc,
        });
    }
    Ok(ConsistencyReport {
        model: model.name().to_string(),
        theta0: setup.theta0,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::standard(3);
        cfg.restarts = 2;
        cfg.validation.replications = 40;
        cfg.validation.n_shots = 2000;
        cfg.validation.bias_sweep = vec![500];
        cfg.validation.consistency_shots = vec![200, 20_000];
        cfg.validation.consistency_seeds = 3;
        cfg
    }

    #[test]
    fn mean_estimate_basics() {
        let m = MeanEstimate::of(&[1.0, 2.0, 3.0]);
        assert!((m.mean - 2.0).abs() < 1e-15);
        assert!((m.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((m.z_score(3.0) - 3.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn one_parameter_formula_is_scalar_ratio() {
        let cfg = quick();
        let setup = Realizable::new(&cfg).unwrap();
        let t0 = setup.frozen.anchor_free();
        let iq = shadow_i_model(&setup.frozen, &t0).unwrap();
        let jq = bkm_j_model(&setup.frozen, &t0).unwrap();
        let mut c = cfg.clone();
        c.validation.replications = 2;
        c.validation.bias_sweep.clear();
        let report = validate_bias(&c).unwrap();
        assert!((report.formula - iq.entries[(0, 0)] / jq.entries[(0, 0)]).abs() < 1e-12);
        assert_eq!(report.points.len(), 1);
    }

    #[test]
    fn bias_study_is_deterministic_and_sized() {
        let cfg = quick();
        let a = validate_bias(&cfg).unwrap();
        assert_eq!(a, validate_bias(&cfg).unwrap());
        assert_eq!(a.points.iter().map(|p| p.n).collect::<Vec<_>>(), vec![2000, 500]);
        assert!(a.points.iter().all(|p| p.control_variate.std_error <= p.raw.std_error));
    }

    #[test]
    fn normality_predictions_are_positive() {
        let r = validate_normality(&quick()).unwrap();
        assert!(r.shadow.predicted_cov[0][0] > 0.0 && r.likelihood.predicted_cov[0][0] > 0.0);
        assert_eq!(r.shadow.successful, 40);
        assert!(r.shadow.ratio[0][0].is_finite());
    }

    #[test]
    fn consistency_points_follow_config() {
        let r = validate_consistency(&quick()).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.points.iter().all(|p| p.shadow.len() == 3 && p.likelihood.iter().all(|d| *d >= -1e-9)));
        assert!(r.likelihood_decreasing());
    }
}
