//! Error metrics for model regression: mean relative error as written
//! (per-record entry average, then averaged over records), a restricted
//! variant that drops near-zero denominators, mean absolute error, and
//! per-actual-value bins.

use crate::dataset::Record;
use crate::error::{CoreError, Result};

/// Ground-truth entries below this bound (MHz) are excluded from the
/// restricted relative-error variant.
pub const RESTRICTED_THRESHOLD: f64 = 0.1;
/// Number of uniform actual-value bins in a report.
pub const REPORT_BINS: usize = 10;

/// Mean absolute error.
pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(CoreError::invalid(format!(
            "mae length mismatch: {} vs {}",
            pred.len(),
            actual.len()
        )));
    }
    if pred.is_empty() {
        return Err(CoreError::invalid("mae of empty input"));
    }
    Ok(pred
        .iter()
        .zip(actual.iter())
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Mean relative error over one set of entries. Zero actual entries are
/// excluded; the second return value counts them so callers can surface a
/// warning.
pub fn mre_counting(pred: &[f64], actual: &[f64]) -> Result<(f64, usize)> {
    if pred.len() != actual.len() {
        return Err(CoreError::invalid(format!(
            "mre length mismatch: {} vs {}",
            pred.len(),
            actual.len()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (p, a) in pred.iter().zip(actual.iter()) {
        if *a == 0.0 {
            excluded += 1;
            continue;
        }
        sum += (p - a).abs() / a;
        used += 1;
    }
    if used == 0 {
        return Err(CoreError::invalid("mre has no nonzero actual entries"));
    }
    Ok((sum / used as f64, excluded))
}

/// Mean relative error; errors out if no entry has a nonzero denominator.
pub fn mre(pred: &[f64], actual: &[f64]) -> Result<f64> {
    mre_counting(pred, actual).map(|(v, _)| v)
}

/// Per-record prediction of all regression targets, raw units.
#[derive(Debug, Clone)]
pub struct RecordPrediction {
    /// Row-major N*N Hamiltonian prediction, MHz.
    pub h_pred: Vec<f64>,
    /// N dephasing-rate predictions, MHz.
    pub gamma_pred: Vec<f64>,
}

/// Statistics of one actual-value bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mre: f64,
    pub mae: f64,
}

/// Full error report over a test set.
#[derive(Debug, Clone)]
pub struct RegressionReport {
    pub record_count: usize,
    /// As-written relative errors (per-record average over all entries with
    /// nonzero actual value, then averaged over records).
    pub mre_h: f64,
    pub mre_gamma: f64,
    /// Restricted variant: entries with actual >= RESTRICTED_THRESHOLD only.
    pub restricted_mre_h: f64,
    pub restricted_mre_gamma: f64,
    /// Pooled mean absolute errors, MHz.
    pub mae_h: f64,
    pub mae_gamma: f64,
    /// Uniform actual-value bins over [0, h_bin_max] / [0, gamma_bin_max].
    pub binned_h: Vec<BinStat>,
    pub binned_gamma: Vec<BinStat>,
    /// Entries skipped because the actual value was exactly zero.
    pub zero_actual_excluded: usize,
    /// Records with no entry above the restricted threshold.
    pub restricted_skipped_h: usize,
    pub restricted_skipped_gamma: usize,
}

struct BinAccumulator {
    edges: Vec<f64>,
    count: Vec<usize>,
    rel_sum: Vec<f64>,
    rel_count: Vec<usize>,
    abs_sum: Vec<f64>,
}

impl BinAccumulator {
    fn new(max_value: f64) -> Self {
        let edges = (0..=REPORT_BINS)
            .map(|i| max_value * i as f64 / REPORT_BINS as f64)
            .collect();
        BinAccumulator {
            edges,
            count: vec![0; REPORT_BINS],
            rel_sum: vec![0.0; REPORT_BINS],
            rel_count: vec![0; REPORT_BINS],
            abs_sum: vec![0.0; REPORT_BINS],
        }
    }

    fn add(&mut self, pred: f64, actual: f64) {
        let max = self.edges[REPORT_BINS];
        let mut bin = if max > 0.0 {
            ((actual / max) * REPORT_BINS as f64).floor() as usize
        } else {
            0
        };
        if bin >= REPORT_BINS {
            bin = REPORT_BINS - 1;
        }
        self.count[bin] += 1;
        self.abs_sum[bin] += (pred - actual).abs();
        if actual != 0.0 {
            self.rel_sum[bin] += (pred - actual).abs() / actual;
            self.rel_count[bin] += 1;
        }
    }

    fn finish(self) -> Vec<BinStat> {
        (0..REPORT_BINS)
            .map(|i| BinStat {
                lo: self.edges[i],
                hi: self.edges[i + 1],
                count: self.count[i],
                mre: if self.rel_count[i] > 0 {
                    self.rel_sum[i] / self.rel_count[i] as f64
                } else {
                    0.0
                },
                mae: if self.count[i] > 0 { self.abs_sum[i] / self.count[i] as f64 } else { 0.0 },
            })
            .collect()
    }
}

struct FamilyAccumulator {
    mre_sum: f64,
    mre_records: usize,
    restricted_sum: f64,
    restricted_records: usize,
    restricted_skipped: usize,
    abs_sum: f64,
    entry_count: usize,
    zero_excluded: usize,
    bins: BinAccumulator,
}

impl FamilyAccumulator {
    fn new(bin_max: f64) -> Self {
        FamilyAccumulator {
            mre_sum: 0.0,
            mre_records: 0,
            restricted_sum: 0.0,
            restricted_records: 0,
            restricted_skipped: 0,
            abs_sum: 0.0,
            entry_count: 0,
            zero_excluded: 0,
            bins: BinAccumulator::new(bin_max),
        }
    }

    fn add_record(&mut self, pred: &[f64], actual: &[f64]) {
        let mut rel_sum = 0.0;
        let mut rel_n = 0usize;
        let mut res_sum = 0.0;
        let mut res_n = 0usize;
        for (p, a) in pred.iter().zip(actual.iter()) {
            self.abs_sum += (p - a).abs();
            self.entry_count += 1;
            self.bins.add(*p, *a);
            if *a == 0.0 {
                self.zero_excluded += 1;
                continue;
            }
            let rel = (p - a).abs() / a;
            rel_sum += rel;
            rel_n += 1;
            if *a >= RESTRICTED_THRESHOLD {
                res_sum += rel;
                res_n += 1;
            }
        }
        if rel_n > 0 {
            self.mre_sum += rel_sum / rel_n as f64;
            self.mre_records += 1;
        }
        if res_n > 0 {
            self.restricted_sum += res_sum / res_n as f64;
            self.restricted_records += 1;
        } else {
            self.restricted_skipped += 1;
        }
    }
}

/// Build the full report for a test set and its predictions.
///
/// `h_bin_max` / `gamma_bin_max` set the upper edge of the actual-value
/// bins (the sampling bounds of the labels).
pub fn build_regression_report(
    records: &[Record],
    predictions: &[RecordPrediction],
    h_bin_max: f64,
    gamma_bin_max: f64,
) -> Result<RegressionReport> {
    if records.is_empty() {
        return Err(CoreError::invalid("cannot report on an empty test set"));
    }
    if records.len() != predictions.len() {
        return Err(CoreError::invalid(format!(
            "{} predictions for {} records",
            predictions.len(),
            records.len()
        )));
    }
    let mut h_acc = FamilyAccumulator::new(h_bin_max);
    let mut g_acc = FamilyAccumulator::new(gamma_bin_max);
    for (record, pred) in records.iter().zip(predictions.iter()) {
        if pred.h_pred.len() != record.label_h.len()
            || pred.gamma_pred.len() != record.label_gamma.len()
        {
            return Err(CoreError::invalid(format!(
                "prediction shape mismatch at record {}",
                record.record_id
            )));
        }
        h_acc.add_record(&pred.h_pred, &record.label_h);
        g_acc.add_record(&pred.gamma_pred, &record.label_gamma);
    }

    let mean = |sum: f64, n: usize| if n > 0 { sum / n as f64 } else { f64::NAN };
    Ok(RegressionReport {
        record_count: records.len(),
        mre_h: mean(h_acc.mre_sum, h_acc.mre_records),
        mre_gamma: mean(g_acc.mre_sum, g_acc.mre_records),
        restricted_mre_h: mean(h_acc.restricted_sum, h_acc.restricted_records),
        restricted_mre_gamma: mean(g_acc.restricted_sum, g_acc.restricted_records),
        mae_h: h_acc.abs_sum / h_acc.entry_count as f64,
        mae_gamma: g_acc.abs_sum / g_acc.entry_count as f64,
        binned_h: h_acc.bins.finish(),
        binned_gamma: g_acc.bins.finish(),
        zero_actual_excluded: h_acc.zero_excluded + g_acc.zero_excluded,
        restricted_skipped_h: h_acc.restricted_skipped,
        restricted_skipped_gamma: g_acc.restricted_skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_inputs_have_zero_error() {
        let v = [0.3, 0.7, 0.1];
        assert_eq!(mre(&v, &v).unwrap(), 0.0);
        assert_eq!(mae(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn single_entry_relative_error() {
        assert_abs_diff_eq!(mre(&[0.9], &[1.0]).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_case_matches_hand_evaluation() {
        let pred = [1.0, 0.5, 0.5, 0.2];
        let actual = [0.8, 0.5, 0.5, 0.4];
        assert_abs_diff_eq!(mre(&pred, &actual).unwrap(), 0.1875, epsilon = 1e-15);
    }

    #[test]
    fn constant_offset_mae() {
        let actual = [0.1, 0.4, 0.9];
        let pred: Vec<f64> = actual.iter().map(|a| a + 0.1).collect();
        assert_abs_diff_eq!(mae(&pred, &actual).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn mae_is_symmetric() {
        let a = [0.3, 0.9];
        let b = [0.5, 0.2];
        assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
    }

    #[test]
    fn mre_is_scale_invariant() {
        let pred = [1.2, 0.4];
        let actual = [1.0, 0.5];
        let scaled_pred: Vec<f64> = pred.iter().map(|v| v * 7.5).collect();
        let scaled_actual: Vec<f64> = actual.iter().map(|v| v * 7.5).collect();
        assert_abs_diff_eq!(
            mre(&pred, &actual).unwrap(),
            mre(&scaled_pred, &scaled_actual).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_denominators_are_counted_not_fatal() {
        let (value, excluded) = mre_counting(&[0.5, 0.9], &[0.0, 1.0]).unwrap();
        assert_eq!(excluded, 1);
        assert_abs_diff_eq!(value, 0.1, epsilon = 1e-15);
        assert!(mre(&[0.5], &[0.0]).is_err());
    }

    fn record_with(h: Vec<f64>, gamma: Vec<f64>) -> Record {
        Record {
            record_id: 0,
            coupling_case_id: 3,
            label_h: h,
            label_gamma: gamma,
            features: vec![],
        }
    }

    #[test]
    fn report_counts_cover_every_entry() {
        let records = vec![
            record_with(vec![0.05, 0.2, 0.2, 0.95], vec![0.5, 0.01]),
            record_with(vec![0.45, 0.8, 0.8, 0.15], vec![0.99, 0.3]),
        ];
        let predictions: Vec<RecordPrediction> = records
            .iter()
            .map(|r| RecordPrediction {
                h_pred: r.label_h.iter().map(|v| v + 0.02).collect(),
                gamma_pred: r.label_gamma.iter().map(|v| v - 0.01).collect(),
            })
            .collect();
        let report = build_regression_report(&records, &predictions, 1.0, 1.0).unwrap();
        let h_total: usize = report.binned_h.iter().map(|b| b.count).sum();
        let g_total: usize = report.binned_gamma.iter().map(|b| b.count).sum();
        assert_eq!(h_total, 8);
        assert_eq!(g_total, 4);
        assert_abs_diff_eq!(report.mae_h, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(report.mae_gamma, 0.01, epsilon = 1e-15);
        // Small denominators inflate the as-written variant beyond the
        // restricted one.
        assert!(report.restricted_mre_h <= report.mre_h);
        assert!(report.restricted_mre_gamma <= report.mre_gamma);
    }

    #[test]
    fn report_rejects_shape_mismatch() {
        let records = vec![record_with(vec![0.5], vec![0.5])];
        let predictions = vec![RecordPrediction { h_pred: vec![0.5, 0.1], gamma_pred: vec![0.5] }];
        assert!(build_regression_report(&records, &predictions, 1.0, 1.0).is_err());
    }
}
