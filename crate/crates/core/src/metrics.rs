//! Retrieval quality, minimum detectable distance, and delay separation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::camarray::ArrayConfig;
use crate::error::{Error, Result};
use crate::stats::{linear_fit, LinearFit};
use crate::techmodel::TechProfile;

/// Precision and recall in percent; `f_score` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Harmonic mean of two fractions, 0 when both are 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Scores a retrieved id set against the relevant set.
///
/// An empty retrieval has precision 100% (nothing wrong was returned) and an
/// empty relevant set has recall 100% (nothing was missed).
pub fn retrieval_metrics(
    retrieved: &BTreeSet<usize>,
    relevant: &BTreeSet<usize>,
) -> RetrievalMetrics {
    let tp = retrieved.intersection(relevant).count();
    let fp = retrieved.len() - tp;
    let fn_ = relevant.len() - tp;
    let precision = if retrieved.is_empty() {
        1.0
    } else {
        tp as f64 / retrieved.len() as f64
    };
    let recall = if relevant.is_empty() {
        1.0
    } else {
        tp as f64 / relevant.len() as f64
    };
    RetrievalMetrics {
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f_score: harmonic_mean(precision, recall),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    }
}

/// Smallest `d >= 1` such that `h + d` mismatches discharge faster at every
/// row than `h` mismatches at any row. `None` if no `d <= h_max - h` works.
pub fn mdd(config: &ArrayConfig, h: usize, h_max: usize) -> Result<Option<usize>> {
    if h == 0 || h >= h_max || h_max > config.cols {
        return Err(Error::Precondition(format!(
            "mdd needs 1 <= h < h_max <= cols, got h={h}, h_max={h_max}, cols={}",
            config.cols
        )));
    }
    let rows = 0..config.rows;
    let slowest_at_h = rows
        .clone()
        .map(|r| config.nominal_row_delay(h, r))
        .fold(f64::INFINITY, f64::min);
    Ok((1..=h_max - h).find(|&d| {
        let slowest = rows
            .clone()
            .map(|r| config.nominal_row_delay(h + d, r))
            .fold(f64::NEG_INFINITY, f64::max);
        slowest < slowest_at_h
    }))
}

/// Minimum detectable distance for `h = 1..h_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MddTable {
    pub profile: String,
    pub rows: usize,
    pub cols: usize,
    pub mitigation: String,
    /// `(h, d_min)`; `None` when no gap within the column range separates `h`.
    pub entries: Vec<(usize, Option<usize>)>,
}

impl MddTable {
    pub fn compute(config: &ArrayConfig, h_max: usize) -> Result<Self> {
        let entries = (1..h_max)
            .map(|h| Ok((h, mdd(config, h, h_max)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MddTable {
            profile: config.profile.label.clone(),
            rows: config.rows,
            cols: config.cols,
            mitigation: config.mitigation.kind.as_str().to_string(),
            entries,
        })
    }

    /// `h,d_min` lines; undefined entries are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,d_min\n");
        for (h, d) in &self.entries {
            match d {
                Some(d) => {
                    let _ = writeln!(out, "{h},{d}");
                }
                None => {
                    let _ = writeln!(out, "{h},");
                }
            }
        }
        out
    }
}

/// Points `(1/(n(n-1)), t(n-1) - t(n))` for `n = 2..=n_max` of the ideal
/// delay law.
pub fn separation_curve(
    profile: &TechProfile,
    cols: usize,
    n_max: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_max < 2 {
        return Err(Error::Precondition(
            "separation curve needs n_max >= 2".into(),
        ));
    }
    Ok((2..=n_max)
        .map(|n| {
            let x = 1.0 / (n as f64 * (n - 1) as f64);
            let dt =
                profile.ideal_discharge_delay(cols, n - 1) - profile.ideal_discharge_delay(cols, n);
            (x, dt)
        })
        .collect())
}

/// Regression of a separation curve; the slope estimates `C·ΔV/I_sat`.
pub fn fit_separation_curve(points: &[(f64, f64)]) -> Option<LinearFit> {
    linear_fit(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::techmodel::MitigationConfig;
    use approx::assert_relative_eq;

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn counting_example() {
        let m = retrieval_metrics(&set(&[1, 2, 3]), &set(&[2, 3, 4]));
        assert_relative_eq!(m.precision, 200.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(m.recall, 200.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(m.f_score, 2.0 / 3.0, max_relative = 1e-12);
        assert_eq!(
            (m.true_positives, m.false_positives, m.false_negatives),
            (2, 1, 1)
        );
    }

    #[test]
    fn identical_sets_score_one() {
        let m = retrieval_metrics(&set(&[5, 9]), &set(&[5, 9]));
        assert_eq!((m.precision, m.recall, m.f_score), (100.0, 100.0, 1.0));
    }

    #[test]
    fn empty_set_conventions() {
        let m = retrieval_metrics(&set(&[]), &set(&[1, 2]));
        assert_eq!((m.precision, m.recall, m.f_score), (100.0, 0.0, 0.0));
        let m = retrieval_metrics(&set(&[1]), &set(&[]));
        assert_eq!((m.precision, m.recall, m.f_score), (0.0, 100.0, 0.0));
        let m = retrieval_metrics(&set(&[]), &set(&[]));
        assert_eq!(m.f_score, 1.0);
    }

    fn flat(rows: usize) -> ArrayConfig {
        let mut p = TechProfile::builtin("sot").unwrap();
        p.r_sl_row = 0.0;
        p.ir_gamma = 0.0;
        ArrayConfig::new(rows, 128, p, MitigationConfig::baseline()).unwrap()
    }

    #[test]
    fn zero_skew_mdd_is_one() {
        let config = flat(256);
        for h in 1..60 {
            assert_eq!(mdd(&config, h, 60).unwrap(), Some(1));
        }
    }

    #[test]
    fn skew_wider_than_separation_needs_larger_gap() {
        let mut config = flat(2);
        // Far row: +33% from current loss; t(10)/t(11) is only +10%.
        config.profile.ir_gamma = 0.25;
        config.profile.ir_ref_rows = 2;
        let d = mdd(&config, 10, 128).unwrap().unwrap();
        assert!(d >= 2);
        // 1/(0.75·(10+d)) < 1/10  ⇔  d > 3.33.
        assert_eq!(d, 4);
    }

    #[test]
    fn mdd_preconditions() {
        let config = flat(4);
        assert!(mdd(&config, 0, 10).is_err());
        assert!(mdd(&config, 10, 10).is_err());
        assert!(mdd(&config, 1, 129).is_err());
    }

    #[test]
    fn undefined_mdd_is_reported() {
        let mut config = flat(256);
        config.profile.r_sl_row = 1e6;
        config.profile.c_sl_row = 1e-15;
        assert_eq!(mdd(&config, 100, 128).unwrap(), None);
        let table = MddTable::compute(&config, 128).unwrap();
        assert!(table.to_csv().contains("\n100,\n"));
    }

    #[test]
    fn separation_curve_first_point() {
        let mut p = TechProfile::builtin("sot").unwrap();
        p.c_cell = 0.0;
        p.c_fixed = 1.0;
        p.v_ml = 1.5;
        p.v_sa_threshold = 0.5;
        p.i_sat0 = 1.0;
        let pts = separation_curve(&p, 128, 50).unwrap();
        assert_eq!(pts[0], (0.5, 0.5));
        assert_eq!(pts.len(), 49);
        assert!(separation_curve(&p, 128, 1).is_err());
    }
}
