//! Information criteria, ground-truth cross entropies and model ranking.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{bkm_j_model, classical_i_model, shadow_i_emp, shadow_i_model, shadow_j_emp, InfoMatrix};
use crate::fit::{log_likelihood, loss_shadow};
use crate::linalg::DensityMatrix;
use crate::povm::{enumerate_pmf, OutcomeCounts};
use crate::qhbm::{Order, StateFamily};
use crate::shadow::mean_snapshot_from_counts;

pub const DEFAULT_RCOND: f64 = 1e-10;
/// Values closer than this count as tied in [`select_model`].
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionKind {
    #[serde(rename = "AIC")]
    Aic,
    #[serde(rename = "TIC")]
    Tic,
    #[serde(rename = "QAIC_LL")]
    QaicLl,
    #[serde(rename = "QTIC_shadow")]
    QticShadow,
    #[serde(rename = "QAIC_shadow")]
    QaicShadow,
    #[serde(rename = "QCE_TRUE")]
    QceTrue,
    #[serde(rename = "CE_TRUE")]
    CeTrue,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 7] = [
        CriterionKind::Aic,
        CriterionKind::Tic,
        CriterionKind::QaicLl,
        CriterionKind::QticShadow,
        CriterionKind::QaicShadow,
        CriterionKind::QceTrue,
        CriterionKind::CeTrue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::Aic => "AIC",
            CriterionKind::Tic => "TIC",
            CriterionKind::QaicLl => "QAIC_LL",
            CriterionKind::QticShadow => "QTIC_shadow",
            CriterionKind::QaicShadow => "QAIC_shadow",
            CriterionKind::QceTrue => "QCE_TRUE",
            CriterionKind::CeTrue => "CE_TRUE",
        }
    }

    /// Needs the maximum-likelihood fit θ̂_C.
    pub fn uses_likelihood_fit(self) -> bool {
        matches!(
            self,
            CriterionKind::Aic | CriterionKind::Tic | CriterionKind::QaicLl | CriterionKind::CeTrue
        )
    }

    /// References computed from the true state rather than the data.
    pub fn is_reference(self) -> bool {
        matches!(self, CriterionKind::QceTrue | CriterionKind::CeTrue)
    }
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown criterion `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub model: String,
    pub num_params: usize,
    pub n: usize,
    pub value: f64,
    pub first_term: f64,
    pub penalty_term: f64,
    /// `value/(2n)` for data criteria; the value itself for the per-shot references.
    pub normalized_value: f64,
    pub pinv_rank: Option<usize>,
    pub pinv_rcond: Option<f64>,
    /// QAIC_LL drops a model-independent constant.
    pub omits_constant: bool,
}

impl CriterionReport {
    fn new(kind: CriterionKind, first_term: f64, penalty_term: f64) -> Self {
        Self {
            kind,
            model: String::new(),
            num_params: 0,
            n: 0,
            value: first_term + penalty_term,
            first_term,
            penalty_term,
            normalized_value: first_term + penalty_term,
            pinv_rank: None,
            pinv_rcond: None,
            omits_constant: kind == CriterionKind::QaicLl,
        }
    }

    fn with_pinv(mut self, rank: usize, rcond: f64) -> Self {
        self.pinv_rank = Some(rank);
        self.pinv_rcond = Some(rcond);
        self
    }

    /// Attaches the model identity and sample size and fills `normalized_value`.
    pub fn for_model(mut self, model: &str, num_params: usize, n: usize) -> Self {
        self.model = model.to_string();
        self.num_params = num_params;
        self.n = n;
        self.normalized_value = if self.kind.is_reference() || n == 0 {
            self.value
        } else {
            self.value / (2.0 * n as f64)
        };
        self
    }

    /// `first_term/(2n)`, the normalized uncorrected criterion.
    pub fn normalized_first_term(&self) -> f64 {
        if self.kind.is_reference() || self.n == 0 {
            self.first_term
        } else {
            self.first_term / (2.0 * self.n as f64)
        }
    }
}

/// SVD pseudo-inverse dropping singular values below `rcond · s_max`.
pub fn pinv(m: &DMatrix<f64>, rcond: f64) -> (DMatrix<f64>, usize) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rcond * smax;
    let mut out = DMatrix::zeros(c, r);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            out += vt.row(k).transpose() * u.column(k).transpose() * (1.0 / s);
        }
    }
    (out, rank)
}

/// `Tr(A · B⁺)` and the retained rank of B.
pub fn trace_with_pinv(a: &InfoMatrix, b: &InfoMatrix, rcond: f64) -> Result<(f64, usize)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (bp, rank) = pinv(&b.entries, rcond);
    Ok(((&a.entries * bp).trace(), rank))
}

/// `−2ℓ + 2p`
pub fn aic(ll: f64, p: usize) -> CriterionReport {
    CriterionReport::new(CriterionKind::Aic, -2.0 * ll, 2.0 * p as f64)
}

/// `−2ℓ + 2 Tr(I J⁺)`
pub fn tic(ll: f64, i: &InfoMatrix, j: &InfoMatrix, rcond: f64) -> Result<CriterionReport> {
    let (tr, rank) = trace_with_pinv(i, j, rcond)?;
    Ok(CriterionReport::new(CriterionKind::Tic, -2.0 * ll, 2.0 * tr).with_pinv(rank, rcond))
}

/// `−2ℓ_LL(θ̂_C) + p + Tr(Ĵ_Q Î_C⁺)`, both matrices at θ̂_C.
pub fn qaic_ll(model: &dyn StateFamily, theta_c: &[f64], counts: &OutcomeCounts, rcond: f64) -> Result<CriterionReport> {
    let ll = log_likelihood(model, theta_c, counts)?;
    let jq = bkm_j_model(model, theta_c)?;
    let ic = classical_i_model(model, theta_c)?;
    qaic_ll_from_parts(ll, &jq, &ic, rcond).map(|r| r.for_model(model.name(), model.num_params(), counts.total))
}

pub fn qaic_ll_from_parts(ll: f64, jq: &InfoMatrix, ic: &InfoMatrix, rcond: f64) -> Result<CriterionReport> {
    let (tr, rank) = trace_with_pinv(jq, ic, rcond)?;
    let p = jq.dim() as f64;
    Ok(CriterionReport::new(CriterionKind::QaicLl, -2.0 * ll, p + tr).with_pinv(rank, rcond))
}

/// `−2ℓ_shadow(θ̂_Q) + 2 Tr(Î_Q^emp (Ĵ_Q^emp)⁺)`
pub fn qtic_shadow(model: &dyn StateFamily, theta_q: &[f64], counts: &OutcomeCounts, rcond: f64) -> Result<CriterionReport> {
    let rho_bar = mean_snapshot_from_counts(counts)?;
    let (loss, _) = loss_shadow(model, theta_q, &rho_bar)?;
    let i = shadow_i_emp(model, theta_q, counts)?;
    let j = shadow_j_emp(model, theta_q, &rho_bar)?;
    let (tr, rank) = trace_with_pinv(&i, &j, rcond)?;
    let n = counts.total;
    Ok(CriterionReport::new(CriterionKind::QticShadow, 2.0 * n as f64 * loss, 2.0 * tr)
        .with_pinv(rank, rcond)
        .for_model(model.name(), model.num_params(), n))
}

/// `−2ℓ_shadow(θ̂_Q) + 2 Tr(Î_Q Ĵ_Q⁺)` with model-expectation matrices at θ̂_Q.
pub fn qaic_shadow(model: &dyn StateFamily, theta_q: &[f64], counts: &OutcomeCounts, rcond: f64) -> Result<CriterionReport> {
    let rho_bar = mean_snapshot_from_counts(counts)?;
    let (loss, _) = loss_shadow(model, theta_q, &rho_bar)?;
    let i = shadow_i_model(model, theta_q)?;
    let j = bkm_j_model(model, theta_q)?;
    let (tr, rank) = trace_with_pinv(&i, &j, rcond)?;
    let n = counts.total;
    Ok(CriterionReport::new(CriterionKind::QaicShadow, 2.0 * n as f64 * loss, 2.0 * tr)
        .with_pinv(rank, rcond)
        .for_model(model.name(), model.num_params(), n))
}

/// `−Tr(ρ log σ(θ̂))`
pub fn qce_true(rho: &DensityMatrix, model: &dyn StateFamily, theta: &[f64]) -> Result<CriterionReport> {
    if rho.qubits() != model.qubits() {
        return Err(Error::DimensionMismatch {
            expected: model.qubits(),
            found: rho.qubits(),
        });
    }
    let log_sigma = model.evaluate(theta, Order::Value)?.log_state;
    let v = -rho.matrix().trace_with(&log_sigma);
    Ok(CriterionReport::new(CriterionKind::QceTrue, v, 0.0).for_model(model.name(), model.num_params(), 0))
}

/// `−Σ_x g(x) log h(x)` over the Pauli-6 outcomes of ρ (g) and σ(θ̂) (h).
pub fn ce_true(rho: &DensityMatrix, model: &dyn StateFamily, theta: &[f64]) -> Result<CriterionReport> {
    let g = enumerate_pmf(rho)?;
    let sigma = DensityMatrix::from_trusted(model.evaluate(theta, Order::Value)?.state);
    let h = enumerate_pmf(&sigma)?;
    let mut v = 0.0;
    for (x, (&gx, &hx)) in g.probabilities.iter().zip(&h.probabilities).enumerate() {
        if gx <= 0.0 {
            continue;
        }
        if hx.is_nan() || hx <= 0.0 {
            return Err(Error::SupportViolation {
                outcome: crate::povm::MeasurementOutcome::from_index(x, g.qubits).to_string(),
                probability: hx,
            });
        }
        v -= gx * hx.ln();
    }
    Ok(CriterionReport::new(CriterionKind::CeTrue, v, 0.0).for_model(model.name(), model.num_params(), 0))
}

/// Name of the model with the smallest value.
///
/// Values within [`TIE_TOL`] tie; ties go to fewer parameters, then the
/// lexicographically smaller name.
pub fn select_model(reports: &[CriterionReport]) -> Result<String> {
    select_by(reports, |r| r.value)
}

/// [`select_model`] applied to an arbitrary per-report score.
pub fn select_by(reports: &[CriterionReport], score: impl Fn(&CriterionReport) -> f64) -> Result<String> {
    let first = reports.first().ok_or(Error::Empty("criterion reports"))?;
    for r in reports {
        if r.kind != first.kind {
            return Err(Error::IncomparableReports(format!("{} vs {}", first.kind, r.kind)));
        }
        if r.n != first.n {
            return Err(Error::IncomparableReports(format!("n = {} vs n = {}", first.n, r.n)));
        }
    }
    let mut best = first;
    for r in &reports[1..] {
        let (a, b) = (score(r), score(best));
        if !a.is_finite() {
            continue;
        }
        let better = if !b.is_finite() || a < b - TIE_TOL {
            true
        } else if (a - b).abs() <= TIE_TOL {
            (r.num_params, &r.model) < (best.num_params, &best.model)
        } else {
            false
        };
        if better {
            best = r;
        }
    }
    Ok(best.model.clone())
}

/// One criterion row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub trial: usize,
    pub model: String,
    pub kind: CriterionKind,
    pub value: f64,
    pub first_term: f64,
    pub penalty_term: f64,
    pub normalized_value: f64,
    pub pinv_rank: Option<usize>,
}

impl CriterionRow {
    pub fn new(trial: usize, r: &CriterionReport) -> Self {
        Self {
            trial,
            model: r.model.clone(),
            kind: r.kind,
            value: r.value,
            first_term: r.first_term,
            penalty_term: r.penalty_term,
            normalized_value: r.normalized_value,
            pinv_rank: r.pinv_rank,
        }
    }
}
