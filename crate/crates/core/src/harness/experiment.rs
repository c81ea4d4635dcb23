//! Repeated trials, selection tallies and the output files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::{first_term_label, run_trial, ExperimentContext, TrialRecord};
use crate::criteria::{CriterionKind, CriterionRow};
use crate::error::Result;
use crate::fit::FitRecord;
use crate::povm::{append_outcome_rows, MeasurementOutcome};
use crate::qhbm::StateFamily;
use crate::rng::RNG_ALGORITHM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionTally {
    pub criterion: String,
    /// Every candidate appears, including those never selected.
    pub counts: BTreeMap<String, usize>,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub true_params: Vec<f64>,
    pub rng_algorithm: String,
    pub trials: usize,
    pub failed_trials: usize,
    pub failures: Vec<TrialFailure>,
    pub tallies: Vec<CriterionTally>,
    pub runtime_seconds: f64,
}

impl ExperimentSummary {
    pub fn count(&self, criterion: &str, model: &str) -> Option<usize> {
        self.tallies
            .iter()
            .find(|t| t.criterion == criterion)
            .and_then(|t| t.counts.get(model).copied())
    }
}

/// Errors of the normalized QTIC and of its first term alone against QCE_true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub trial: usize,
    pub model: String,
    pub qtic_err: f64,
    pub first_term_err: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub context: ExperimentContext,
    pub records: Vec<TrialRecord>,
    pub summary: ExperimentSummary,
}

/// Selection labels in output order: each criterion, followed by its first-term ranking.
pub fn selection_labels(criteria: &[CriterionKind]) -> Vec<String> {
    let mut out = Vec::new();
    for &k in criteria {
        out.push(k.as_str().to_string());
        if !k.is_reference() {
            out.push(first_term_label(k));
        }
    }
    out
}

pub fn tally(ctx: &ExperimentContext, records: &[TrialRecord]) -> Vec<CriterionTally> {
    selection_labels(&ctx.config.criteria)
        .into_iter()
        .map(|label| {
            let mut counts: BTreeMap<String, usize> =
                ctx.candidates.iter().map(|m| (m.name().to_string(), 0)).collect();
            let mut failed = 0;
            for r in records {
                match r.selected(&label) {
                    Some(m) => *counts.entry(m.to_string()).or_default() += 1,
                    None => failed += 1,
                }
            }
            CriterionTally {
                criterion: label,
                counts,
                failed,
            }
        })
        .collect()
}

pub fn histogram_rows(records: &[TrialRecord]) -> Vec<HistogramRow> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| !r.failed()) {
        for q in r.reports.iter().filter(|q| q.kind == CriterionKind::QticShadow) {
            if let Some(truth) = r.report(&q.model, CriterionKind::QceTrue) {
                out.push(HistogramRow {
                    trial: r.trial_index,
                    model: q.model.clone(),
                    qtic_err: (q.normalized_value - truth.value).abs(),
                    first_term_err: (q.normalized_first_term() - truth.value).abs(),
                });
            }
        }
    }
    out
}

pub fn criterion_rows(records: &[TrialRecord]) -> Vec<CriterionRow> {
    records
        .iter()
        .flat_map(|r| r.reports.iter().map(move |q| CriterionRow::new(r.trial_index, q)))
        .collect()
}

pub fn fit_records(records: &[TrialRecord]) -> Vec<FitRecord> {
    records.iter().flat_map(|r| r.fits.iter().cloned()).collect()
}

/// Runs every trial in index order.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let ctx = ExperimentContext::new(config)?;
    let mut records = Vec::with_capacity(ctx.config.trials);
    for k in 0..ctx.config.trials {
        let r = run_trial(&ctx, k);
        log::info!("trial {}/{} done{}", k + 1, ctx.config.trials, if r.failed() { " (failed)" } else { "" });
        records.push(r);
    }
    let failures: Vec<TrialFailure> = records
        .iter()
        .filter_map(|r| {
            r.failure.as_ref().map(|m| TrialFailure {
                trial: r.trial_index,
                message: m.clone(),
            })
        })
        .collect();
    let summary = ExperimentSummary {
        config: ctx.config.clone(),
        true_params: ctx.true_params.clone(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        trials: records.len(),
        failed_trials: failures.len(),
        failures,
        tallies: tally(&ctx, &records),
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput {
        context: ctx,
        records,
        summary,
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

/// Paths written by [`ExperimentOutput::write`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub summary: PathBuf,
    pub trials: PathBuf,
    pub histogram: PathBuf,
    pub fits: PathBuf,
    pub outcomes: PathBuf,
}

impl OutputFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            summary: dir.join("summary.json"),
            trials: dir.join("trials.csv"),
            histogram: dir.join("histogram.csv"),
            fits: dir.join("fits.json"),
            outcomes: dir.join("outcomes.csv"),
        }
    }
}

impl ExperimentOutput {
    pub fn histogram(&self) -> Vec<HistogramRow> {
        histogram_rows(&self.records)
    }

    pub fn write(&self, dir: &Path) -> Result<OutputFiles> {
        fs::create_dir_all(dir)?;
        let files = OutputFiles::in_dir(dir);
        write_json(&files.summary, &self.summary)?;
        write_csv(&files.trials, &criterion_rows(&self.records))?;
        write_csv(&files.histogram, &self.histogram())?;
        write_json(&files.fits, &fit_records(&self.records))?;
        let mut w = csv::Writer::from_path(&files.outcomes)?;
        let q = self.context.config.qubits;
        for r in &self.records {
            let shots: Vec<MeasurementOutcome> = self
                .context
                .trial_outcomes(r.trial_index)
                .into_iter()
                .map(|i| MeasurementOutcome::from_index(i, q))
                .collect();
            append_outcome_rows(&mut w, r.trial_index, &shots)?;
        }
        w.flush()?;
        Ok(files)
    }
}
