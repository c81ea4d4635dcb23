//! Re-scoring persisted fits against persisted shot records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trial::{score_model, selections, FittedParams, Selection};
use crate::criteria::{CriterionKind, CriterionReport};
use crate::error::{Error, Result};
use crate::fit::{EstimatorKind, FitRecord};
use crate::linalg::DensityMatrix;
use crate::povm::{read_outcomes_csv, MeasurementOutcome, OutcomeCounts};
use crate::qhbm::{QhbmModel, StateFamily};

pub fn read_fit_records(path: &Path) -> Result<Vec<FitRecord>> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn read_outcomes_file(path: &Path) -> Result<Vec<(usize, MeasurementOutcome)>> {
    read_outcomes_csv(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescoredTrial {
    pub trial: usize,
    pub reports: Vec<CriterionReport>,
    pub selections: Vec<Selection>,
}

/// Recomputes criteria for every trial that has fits, in trial order.
///
/// Each fitted model must appear in `models`. Reference criteria need `rho`.
pub fn recompute_criteria(
    models: &[QhbmModel],
    rho: Option<&DensityMatrix>,
    criteria: &[CriterionKind],
    rcond: f64,
    fits: &[FitRecord],
    outcomes: &[(usize, MeasurementOutcome)],
) -> Result<Vec<RescoredTrial>> {
    let mut shots: BTreeMap<usize, Vec<MeasurementOutcome>> = BTreeMap::new();
    for (t, o) in outcomes {
        shots.entry(*t).or_default().push(o.clone());
    }
    let trials: BTreeSet<usize> = fits.iter().map(|f| f.trial).collect();
    let mut out = Vec::new();
    for trial in trials {
        let record = shots
            .get(&trial)
            .ok_or_else(|| Error::MissingInput(format!("no outcomes for trial {trial}")))?;
        let counts = OutcomeCounts::from_outcomes(record)?;
        let find = |model: &str, kind| {
            fits.iter()
                .find(|f| f.trial == trial && f.model == model && f.estimator_kind == kind)
                .map(|f| f.theta_hat.as_slice())
        };
        let mut reports = Vec::new();
        for f in fits.iter().filter(|f| f.trial == trial) {
            if !models.iter().any(|m| m.name() == f.model) {
                return Err(Error::MissingInput(format!("fit for unknown model {}", f.model)));
            }
        }
        for model in models {
            let fitted = FittedParams {
                shadow: find(model.name(), EstimatorKind::Shadow),
                likelihood: find(model.name(), EstimatorKind::Likelihood),
            };
            if fitted.shadow.is_none() && fitted.likelihood.is_none() {
                continue;
            }
            reports.extend(score_model(model, fitted, &counts, rho, criteria, rcond)?);
        }
        out.push(RescoredTrial {
            trial,
            selections: selections(criteria, &reports)?,
            reports,
        });
    }
    Ok(out)
}
