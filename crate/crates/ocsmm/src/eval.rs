//! Detection metrics (ROC/AUC, average precision), the nu sweep used for
//! model selection, and integrated squared error for density estimates.

use serde::Serialize;

use crate::data::GroupDataset;
use crate::density::{DensityModel, GridSpec};
use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, GroupKernelSpec};
use crate::model::FitConfig;
use crate::solver::{gram_scores, solve_dual, DualProblem};

/// The nu grid used when nothing else is requested.
pub const DEFAULT_NU_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// ROC curve with its area and the average precision.
#[derive(Debug, Clone)]
pub struct RocResult {
    /// Score thresholds per curve point, starting at infinity.
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    /// Trapezoidal area of the stored curve; equals the Mann-Whitney
    /// statistic with ties counted 0.5.
    pub auc: f64,
    /// Precision averaged at each positive hit in score-descending order,
    /// ties broken by input order.
    pub ap: f64,
}

/// ROC curve, AUC and AP for anomaly scores (higher = more anomalous)
/// against boolean labels (`true` = anomalous).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("labels must contain both classes"));
    }

    // Descending by score, ties by input order.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let (np, nn) = (positives as f64, negatives as f64);
    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut ap_sum = 0.0;
    let mut idx = 0;
    while idx < order.len() {
        let value = scores[order[idx]];
        // Consume the whole tie block before emitting a curve point; AP uses
        // the per-item order inside the block.
        while idx < order.len() && scores[order[idx]] == value {
            if labels[order[idx]] {
                tp += 1;
                ap_sum += tp as f64 / (tp + fp) as f64;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        thresholds.push(value);
        tpr.push(tp as f64 / np);
        fpr.push(fp as f64 / nn);
    }

    let mut auc = 0.0;
    for k in 1..tpr.len() {
        auc += (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]) / 2.0;
    }
    Ok(RocResult { thresholds, tpr, fpr, auc, ap: ap_sum / np })
}

/// One row of a nu sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub nu: f64,
    pub auc: f64,
    pub ap: f64,
    pub outlier_fraction: f64,
    pub sv_fraction: f64,
    pub converged: bool,
}

/// Fits one detector per nu on the full dataset (the one-class protocol:
/// train on everything, score everything against the hidden labels) and
/// reports ranking metrics plus the nu-property fractions. The Gram matrix
/// is assembled once and shared; training decisions come from it directly.
pub fn nu_sweep(
    dataset: &GroupDataset,
    spec: &GroupKernelSpec,
    nus: &[f64],
    config: &FitConfig,
) -> Result<Vec<SweepRow>> {
    if nus.is_empty() {
        return Err(Error::invalid("empty nu grid"));
    }
    let labels = dataset.labels_or_normal();
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::invalid("nu sweep needs a labeled dataset with both classes"));
    }
    let mut gram = gram_matrix(dataset.groups(), spec)?;
    gram.ensure_psd()?;
    let l = dataset.len() as f64;
    let mut rows = Vec::with_capacity(nus.len());
    for &nu in nus {
        let problem = DualProblem::new(&gram, nu)
            .with_tol(config.tol)
            .with_max_iter(config.max_iter);
        let solution = solve_dual(&problem)?;
        let decisions: Vec<f64> = gram_scores(&gram, &solution.alpha)
            .into_iter()
            .map(|f| f - solution.rho)
            .collect();
        let anomaly_scores: Vec<f64> = decisions.iter().map(|d| -d).collect();
        let roc = roc_auc(&anomaly_scores, &labels)?;
        let outliers = decisions.iter().filter(|&&d| d < -config.tol).count();
        rows.push(SweepRow {
            nu,
            auc: roc.auc,
            ap: roc.ap,
            outlier_fraction: outliers as f64 / l,
            sv_fraction: solution.sv_index.len() as f64 / l,
            converged: solution.converged,
        });
    }
    Ok(rows)
}

/// Trapezoidal integral of `(estimate - truth)^2` over the grid.
pub fn density_ise(
    estimate: &DensityModel,
    truth: impl Fn(&[f64]) -> f64,
    grid: &GridSpec,
) -> Result<f64> {
    if grid.dim() > 2 {
        return Err(Error::invalid("ISE grids are supported for d <= 2"));
    }
    if grid.dim() != estimate.dim() {
        return Err(Error::invalid(format!(
            "grid dimension {} does not match estimate dimension {}",
            grid.dim(),
            estimate.dim()
        )));
    }
    grid.try_integrate(|y| {
        let e = estimate.eval(y)?;
        let t = truth(y);
        Ok((e - t) * (e - t))
    })
}
