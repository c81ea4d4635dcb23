//! One repetition of the measure → fit → score → select pipeline.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::criteria::{
    aic, ce_true, qaic_ll, qaic_shadow, qce_true, qtic_shadow, select_by, tic, CriterionKind, CriterionReport,
};
use crate::error::{Error, Result};
use crate::fisher::{classical_i_emp, classical_j_emp};
use crate::fit::{fit_ll, fit_shadow, log_likelihood, EstimatorKind, FitRecord, FitResult};
use crate::linalg::{DensityMatrix, HermMatrix};
use crate::povm::{OutcomeCounts, Sampler};
use crate::qhbm::{QhbmModel, StateFamily};
use crate::rng::{derive_seed, rng_from_seed};
use crate::shadow::mean_snapshot_from_counts;

/// Everything shared by the trials of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub config: ExperimentConfig,
    pub truth: QhbmModel,
    pub true_params: Vec<f64>,
    pub rho: DensityMatrix,
    pub candidates: Vec<QhbmModel>,
    sampler: Sampler,
}

impl ExperimentContext {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let truth = config.true_model()?;
        let true_params = config.true_params()?;
        let rho = truth.model_state(&true_params)?;
        let candidates = config.candidates()?;
        let sampler = Sampler::new(&rho);
        Ok(Self {
            config,
            truth,
            true_params,
            rho,
            candidates,
            sampler,
        })
    }

    pub fn trial_seed(&self, trial_index: usize) -> u64 {
        derive_seed(self.config.master_seed, trial_index as u64)
    }

    /// Canonical outcome indices of the trial's shot record, in shot order.
    pub fn trial_outcomes(&self, trial_index: usize) -> Vec<usize> {
        let mut rng = rng_from_seed(derive_seed(self.trial_seed(trial_index), 0));
        (0..self.config.n_shots).map(|_| self.sampler.sample_index(&mut rng)).collect()
    }
}

/// Which model a criterion picked. Names ending in `_1st` rank by the first term only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub seed: u64,
    pub outcomes_digest: String,
    /// Set when a fit or criterion failed; the trial is then left out of tallies.
    pub failure: Option<String>,
    pub fits: Vec<FitRecord>,
    pub reports: Vec<CriterionReport>,
    pub selections: Vec<Selection>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn report(&self, model: &str, kind: CriterionKind) -> Option<&CriterionReport> {
        self.reports.iter().find(|r| r.model == model && r.kind == kind)
    }

    pub fn selected(&self, criterion: &str) -> Option<&str> {
        self.selections
            .iter()
            .find(|s| s.criterion == criterion)
            .map(|s| s.model.as_str())
    }
}

/// SHA-256 over the outcome indices as little-endian u64 words.
pub fn outcomes_digest(indices: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in indices {
        h.update((i as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn first_term_label(kind: CriterionKind) -> String {
    format!("{}_1st", kind.as_str())
}

struct ModelFits {
    shadow: FitResult,
    ll: Option<FitResult>,
}

fn fit_model(
    ctx: &ExperimentContext,
    model: &QhbmModel,
    k: usize,
    seed: u64,
    counts: &OutcomeCounts,
    rho_bar: &HermMatrix,
) -> Result<ModelFits> {
    let opt = ctx.config.optimizer();
    let shadow = fit_shadow(model, rho_bar, &opt, derive_seed(seed, 1 + 2 * k as u64))?;
    let ll = if ctx.config.needs_likelihood_fit() {
        Some(fit_ll(model, counts, &opt, derive_seed(seed, 2 + 2 * k as u64))?)
    } else {
        None
    };
    Ok(ModelFits { shadow, ll })
}

/// Fitted parameters of one candidate, as consumed by the criteria.
#[derive(Debug, Clone, Copy)]
pub struct FittedParams<'a> {
    /// θ̂_Q
    pub shadow: Option<&'a [f64]>,
    /// θ̂_C
    pub likelihood: Option<&'a [f64]>,
}

fn need<'a>(theta: Option<&'a [f64]>, kind: CriterionKind, what: &str) -> Result<&'a [f64]> {
    theta.ok_or_else(|| Error::MissingInput(format!("{kind} needs the {what} fit")))
}

/// Scores one fitted model under each requested criterion.
///
/// Reference criteria need the true state `rho`; they fail when it is absent.
pub fn score_model(
    model: &QhbmModel,
    fits: FittedParams<'_>,
    counts: &OutcomeCounts,
    rho: Option<&DensityMatrix>,
    criteria: &[CriterionKind],
    rcond: f64,
) -> Result<Vec<CriterionReport>> {
    let (n, p, name) = (counts.total, model.num_params(), model.name());
    let truth = |kind| rho.ok_or_else(|| Error::MissingInput(format!("{kind} needs the true state")));
    let mut out = Vec::new();
    for &kind in criteria {
        let tq = || need(fits.shadow, kind, "shadow");
        let tc = || need(fits.likelihood, kind, "likelihood");
        let r = match kind {
            CriterionKind::Aic => aic(log_likelihood(model, tc()?, counts)?, p).for_model(name, p, n),
            CriterionKind::Tic => {
                let t = tc()?;
                let i = classical_i_emp(model, t, counts)?;
                let j = classical_j_emp(model, t, counts)?;
                tic(log_likelihood(model, t, counts)?, &i, &j, rcond)?.for_model(name, p, n)
            }
            CriterionKind::QaicLl => qaic_ll(model, tc()?, counts, rcond)?,
            CriterionKind::QticShadow => qtic_shadow(model, tq()?, counts, rcond)?,
            CriterionKind::QaicShadow => qaic_shadow(model, tq()?, counts, rcond)?,
            CriterionKind::QceTrue => qce_true(truth(kind)?, model, tq()?)?,
            CriterionKind::CeTrue => ce_true(truth(kind)?, model, tc()?)?,
        };
        out.push(r);
    }
    Ok(out)
}

/// Per-criterion selections, each followed by its first-term ranking.
pub fn selections(criteria: &[CriterionKind], reports: &[CriterionReport]) -> Result<Vec<Selection>> {
    let mut out = Vec::new();
    for &kind in criteria {
        let group: Vec<CriterionReport> = reports.iter().filter(|r| r.kind == kind).cloned().collect();
        out.push(Selection {
            criterion: kind.as_str().to_string(),
            model: select_by(&group, |r| r.value)?,
        });
        if !kind.is_reference() {
            out.push(Selection {
                criterion: first_term_label(kind),
                model: select_by(&group, |r| r.first_term)?,
            });
        }
    }
    Ok(out)
}

/// Runs trial `trial_index`; fully determined by the config and the index.
pub fn run_trial(ctx: &ExperimentContext, trial_index: usize) -> TrialRecord {
    let seed = ctx.trial_seed(trial_index);
    let indices = ctx.trial_outcomes(trial_index);
    let mut record = TrialRecord {
        trial_index,
        seed,
        outcomes_digest: outcomes_digest(&indices),
        failure: None,
        fits: Vec::new(),
        reports: Vec::new(),
        selections: Vec::new(),
    };
    let counts = OutcomeCounts::from_indices(ctx.config.qubits, &indices);
    let result = (|| -> Result<()> {
        let rho_bar = mean_snapshot_from_counts(&counts)?;
        let mut reports = Vec::new();
        for (k, model) in ctx.candidates.iter().enumerate() {
            let fits = fit_model(ctx, model, k, seed, &counts, &rho_bar)
                .map_err(|e| Error::Optimization(format!("{}: {e}", model.name())))?;
            record.fits.push(FitRecord::new(trial_index, model.name(), EstimatorKind::Shadow, &fits.shadow));
            if let Some(ll) = &fits.ll {
                record.fits.push(FitRecord::new(trial_index, model.name(), EstimatorKind::Likelihood, ll));
            }
            let fitted = FittedParams {
                shadow: Some(&fits.shadow.theta_hat),
                likelihood: fits.ll.as_ref().map(|f| f.theta_hat.as_slice()),
            };
            let cfg = &ctx.config;
            reports.extend(score_model(model, fitted, &counts, Some(&ctx.rho), &cfg.criteria, cfg.rcond)?);
        }
        record.selections = selections(&ctx.config.criteria, &reports)?;
        record.reports = reports;
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("trial {trial_index} failed: {e}");
        record.failure = Some(e.to_string());
        record.selections.clear();
    }
    record
}
