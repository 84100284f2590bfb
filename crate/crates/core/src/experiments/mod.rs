//! End-to-end studies: fixed-radius sweeps, Monte Carlo variation,
//! categorical-dataset search, recommendation candidate generation, and the
//! parameter fitters behind the built-in profiles.
//!
//! Queries, instances and trials run in parallel; results are gathered in
//! input order and reduced with [`crate::stats::pairwise_sum`], so reports
//! do not depend on the thread count.

mod calibrate;
mod fixed_radius;
mod recsys;
mod workload;

use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate_energy, calibrate_skew, EnergyFit, SkewCalibration, SkewMechanism};
pub use fixed_radius::{
    dataset_search_experiment, fixed_radius_experiment, variation_experiment, DatasetReport,
    DatasetSource, ExperimentSpec, MetricsReport,
};
pub use recsys::{
    covering_limit, cycle_speedup, rank_by_dot, ranking_comparisons, recsys_experiment,
    synthesize_embeddings, CycleSpeedup, EmbeddingSynth, RecsysReport, RecsysSpec, TestInstance,
    CANDIDATES_PER_INSTANCE,
};
pub use workload::{anchored_workload, synthesize_housing_csv, AnchoredWorkload};

use crate::camarray::{ArrayConfig, ClockKind};
use crate::error::{Error, Result};
use crate::techmodel::{MitigationConfig, MitigationKind, TechProfile};

/// One column of a comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepColumn {
    pub rows: usize,
    pub mitigation: MitigationKind,
    /// Interconnect-free array with the ideal clock.
    pub ideal: bool,
}

impl SweepColumn {
    pub fn label(&self) -> String {
        if self.ideal {
            "Ideal".to_string()
        } else {
            self.rows.to_string()
        }
    }

    pub fn group(&self) -> &'static str {
        match (self.ideal, self.mitigation) {
            (true, _) => "",
            (false, MitigationKind::Baseline) => "Baseline",
            (false, MitigationKind::S2x) => "S2x",
            (false, MitigationKind::ClkMatch) => "Clk match",
        }
    }

    pub fn clock_kind(&self) -> ClockKind {
        match (self.ideal, self.mitigation) {
            (true, _) => ClockKind::Ideal,
            (false, MitigationKind::ClkMatch) => ClockKind::Matched,
            _ => ClockKind::Fixed,
        }
    }

    pub fn array_config(&self, profile: &TechProfile, cols: usize) -> Result<ArrayConfig> {
        let profile = if self.ideal {
            profile.without_interconnect()
        } else {
            profile.clone()
        };
        let mitigation = MitigationConfig::for_profile(self.mitigation, &profile);
        ArrayConfig::new(self.rows, cols, profile, mitigation)
    }
}

/// The usual table layout: an ideal column, baseline at every row count, and
/// each mitigation at the largest row count.
pub fn sweep_columns(rows: &[usize], mitigations: &[MitigationKind]) -> Result<Vec<SweepColumn>> {
    let max = *rows
        .iter()
        .max()
        .ok_or_else(|| Error::config("sweep.rows", "needs at least one row count"))?;
    let mut columns = vec![SweepColumn {
        rows: max,
        mitigation: MitigationKind::Baseline,
        ideal: true,
    }];
    columns.extend(rows.iter().map(|&r| SweepColumn {
        rows: r,
        mitigation: MitigationKind::Baseline,
        ideal: false,
    }));
    columns.extend(
        mitigations
            .iter()
            .filter(|&&m| m != MitigationKind::Baseline)
            .map(|&m| SweepColumn {
                rows: max,
                mitigation: m,
                ideal: false,
            }),
    );
    Ok(columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let cols = sweep_columns(
            &[64, 128, 256],
            &[
                MitigationKind::Baseline,
                MitigationKind::S2x,
                MitigationKind::ClkMatch,
            ],
        )
        .unwrap();
        let labels: Vec<_> = cols.iter().map(|c| (c.group(), c.label())).collect();
        assert_eq!(
            labels,
            vec![
                ("", "Ideal".to_string()),
                ("Baseline", "64".to_string()),
                ("Baseline", "128".to_string()),
                ("Baseline", "256".to_string()),
                ("S2x", "256".to_string()),
                ("Clk match", "256".to_string()),
            ]
        );
        assert_eq!(cols[5].clock_kind(), ClockKind::Matched);
        assert!(sweep_columns(&[], &[]).is_err());
    }
}
