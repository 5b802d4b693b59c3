//! Positioning and RSS-estimation metrics.

use std::fmt::Write as _;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::baselines::{KnnConfig, KnnPositioner};
use crate::data::{MinMaxScaler, RadioMap, TestSet};
use crate::{Error, Result};

/// Per-row Euclidean distance between predicted and true coordinates.
pub fn positioning_errors(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if pred.dim() != truth.dim() {
        return Err(Error::invalid(format!(
            "prediction shape {:?} does not match truth {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    Ok(pred
        .rows()
        .into_iter()
        .zip(truth.rows())
        .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect())
}

/// `√(mean e²)`; 0 for an empty list.
pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// RMSE pooled over every run's errors, and the 95% half-width
/// `1.96 · s / √n` where `s` is the sample std of the per-run RMSEs
/// (0 with a single run).
pub fn rmse_ci(runs: &[Vec<f64>]) -> Result<(f64, f64)> {
    if runs.is_empty() || runs.iter().any(|r| r.is_empty()) {
        return Err(Error::invalid("rmse_ci needs at least one non-empty run"));
    }
    let pooled: Vec<f64> = runs.iter().flatten().copied().collect();
    let n = runs.len();
    if n < 2 {
        return Ok((rmse(&pooled), 0.0));
    }
    let per_run: Vec<f64> = runs.iter().map(|r| rmse(r)).collect();
    let mean = per_run.iter().sum::<f64>() / n as f64;
    let var = per_run.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((rmse(&pooled), 1.96 * var.sqrt() / (n as f64).sqrt()))
}

/// Thresholds `0, 0.25, …, 10` m.
pub fn default_thresholds() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.25).collect()
}

/// Cumulative positioning accuracy: fraction of errors `≤ t` per threshold.
pub fn cpa_curve(errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("thresholds must be sorted ascending"));
    }
    if errors.is_empty() {
        return Err(Error::invalid("cannot build a CPA curve from no errors"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| (t, sorted.partition_point(|&e| e <= t) as f64 / n))
        .collect())
}

/// `√(‖x − x̂‖² / N_AP)` in dB.
pub fn rss_error(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() || x.is_empty() {
        return Err(Error::invalid("fingerprints must have equal, non-zero length"));
    }
    let sq: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / x.len() as f64).sqrt())
}

/// Mean and RMSE of the per-row RSS error.
pub fn rss_error_summary(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>) -> Result<(f64, f64)> {
    if x.dim() != x_hat.dim() || x.nrows() == 0 {
        return Err(Error::invalid("fingerprint matrices must have equal, non-empty shapes"));
    }
    let errs: Vec<f64> = x
        .rows()
        .into_iter()
        .zip(x_hat.rows())
        .map(|(a, b)| rss_error(&a.to_vec(), &b.to_vec()))
        .collect::<Result<_>>()?;
    Ok((errs.iter().sum::<f64>() / errs.len() as f64, rmse(&errs)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Pooled per-TP errors of all runs.
    pub errors: Vec<f64>,
    pub run_rmse: Vec<f64>,
    pub rmse: f64,
    pub ci95: f64,
    pub cpa: Vec<(f64, f64)>,
    pub rss_error_mean: Option<f64>,
    pub rss_error_rmse: Option<f64>,
}

impl EvalReport {
    pub fn from_runs(runs: &[Vec<f64>], thresholds: &[f64]) -> Result<Self> {
        let (rmse_all, ci95) = rmse_ci(runs)?;
        let errors: Vec<f64> = runs.iter().flatten().copied().collect();
        Ok(Self {
            cpa: cpa_curve(&errors, thresholds)?,
            run_rmse: runs.iter().map(|r| rmse(r)).collect(),
            errors,
            rmse: rmse_all,
            ci95,
            rss_error_mean: None,
            rss_error_rmse: None,
        })
    }

    pub fn mean_error(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    /// `section,key,value` rows: per-run RMSEs, the summary and the CPA curve.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        for (i, r) in self.run_rmse.iter().enumerate() {
            let _ = writeln!(out, "run,{i},{r}");
        }
        let _ = writeln!(out, "summary,rmse,{}", self.rmse);
        let _ = writeln!(out, "summary,ci95,{}", self.ci95);
        let _ = writeln!(out, "summary,mean_error,{}", self.mean_error());
        if let (Some(m), Some(r)) = (self.rss_error_mean, self.rss_error_rmse) {
            let _ = writeln!(out, "summary,rss_error_mean,{m}");
            let _ = writeln!(out, "summary,rss_error_rmse,{r}");
        }
        for (t, f) in &self.cpa {
            let _ = writeln!(out, "cpa,{t},{f}");
        }
        out
    }
}

/// kNN positioning on one test set against an original and a generated map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmComparison {
    pub original: EvalReport,
    pub generated: EvalReport,
    /// Largest pointwise CPA difference over all thresholds.
    pub max_gap: f64,
}

impl RmComparison {
    /// Largest CPA gap restricted to thresholds `≤ limit`.
    pub fn max_gap_up_to(&self, limit: f64) -> f64 {
        self.original
            .cpa
            .iter()
            .zip(&self.generated.cpa)
            .filter(|((t, _), _)| *t <= limit)
            .map(|((_, a), (_, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `threshold,cpa_original,cpa_generated,gap` plus summary lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,cpa_original,cpa_generated,gap\n");
        for ((t, a), (_, b)) in self.original.cpa.iter().zip(&self.generated.cpa) {
            let _ = writeln!(out, "{t},{a},{b},{}", (a - b).abs());
        }
        let _ = writeln!(out, "# rmse_original={},rmse_generated={},max_gap={}", self.original.rmse, self.generated.rmse, self.max_gap);
        out
    }
}

/// Run kNN with the same configuration against `original` and `generated`
/// on `test`. Both maps are normalized with the scaler fitted on `original`.
pub fn compare_rm(
    original: &RadioMap,
    generated: &RadioMap,
    test: &TestSet,
    config: KnnConfig,
    thresholds: &[f64],
) -> Result<RmComparison> {
    if original.ap_ids() != generated.ap_ids() || original.ap_ids() != test.ap_ids() {
        return Err(Error::invalid("radio maps and test set must share the AP ordering"));
    }
    let scaler = MinMaxScaler::fit(original.rss().view())?;
    let report = |rm: &RadioMap| -> Result<EvalReport> {
        let knn = KnnPositioner::with_scaler(rm, config, scaler.clone())?;
        let pred = knn.predict_batch(test.rss())?;
        let errors = positioning_errors(pred.view(), test.coords().view())?;
        EvalReport::from_runs(&[errors], thresholds)
    };
    let original = report(original)?;
    let generated = report(generated)?;
    let max_gap = original
        .cpa
        .iter()
        .zip(&generated.cpa)
        .map(|((_, a), (_, b))| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(RmComparison {
        original,
        generated,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn pythagoras() {
        let e = positioning_errors(arr2(&[[3.0, 4.0], [1.0, 1.0]]).view(), arr2(&[[0.0, 0.0], [1.0, 1.0]]).view()).unwrap();
        assert_eq!(e, vec![5.0, 0.0]);
    }

    #[test]
    fn rmse_of_three_four() {
        let (r, ci) = rmse_ci(&[vec![3.0, 4.0]]).unwrap();
        assert!((r - 3.5355).abs() < 1e-4);
        assert_eq!(ci, 0.0);
    }

    #[test]
    fn ci_uses_sample_std_of_run_rmses() {
        let runs: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0]];
        let (_, ci2) = rmse_ci(&runs).unwrap();
        let runs8: Vec<Vec<f64>> = runs.iter().cycle().take(8).cloned().collect();
        let (_, ci8) = rmse_ci(&runs8).unwrap();
        // Sample std changes slightly with n; compare against the exact ratio.
        let s2 = (0.5f64).sqrt();
        let s8 = (2.0f64 / 7.0).sqrt();
        assert!((ci2 - 1.96 * s2 / 2f64.sqrt()).abs() < 1e-12);
        assert!((ci8 - 1.96 * s8 / 8f64.sqrt()).abs() < 1e-12);
        let (_, same) = rmse_ci(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn ci_halves_with_four_times_the_runs_at_equal_spread() {
        // Both sets of per-run RMSEs have sample std √2.
        let two = vec![vec![1.0], vec![3.0]];
        let a = 1.75f64.sqrt();
        let eight: Vec<Vec<f64>> = (0..8).map(|i| vec![if i % 2 == 0 { 2.0 + a } else { 2.0 - a }]).collect();
        let (_, ci2) = rmse_ci(&two).unwrap();
        let (_, ci8) = rmse_ci(&eight).unwrap();
        assert!((ci8 / ci2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cpa_counts() {
        let e = [1.0, 2.0, 3.0, 4.0];
        let c = cpa_curve(&e, &[0.5, 2.5, 4.0]).unwrap();
        assert_eq!(c, vec![(0.5, 0.0), (2.5, 0.5), (4.0, 1.0)]);
        assert!(cpa_curve(&e, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn rss_error_example() {
        assert!((rss_error(&[-50.0, -60.0], &[-52.0, -58.0]).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(rss_error(&[1.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn identical_maps_have_no_gap() {
        let rm = RadioMap::new(
            arr2(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            arr2(&[[-40.0, -70.0], [-60.0, -50.0], [-55.0, -65.0]]),
            RadioMap::default_ap_ids(2),
        )
        .unwrap();
        let cmp = compare_rm(&rm, &rm, &rm, KnnConfig::default(), &default_thresholds()).unwrap();
        assert_eq!(cmp.max_gap, 0.0);
        assert_eq!(cmp.original.cpa.len(), cmp.generated.cpa.len());
    }
}
