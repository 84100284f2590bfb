//! Run configuration: a TOML document plus dotted `key=value` overrides.
//!
//! Unknown keys are rejected. The resolved configuration serializes back to
//! TOML that reproduces the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camarray::{ArrayConfig, ClockKind, ClockPolicy};
use crate::error::{Error, Result};
use crate::experiments::{EmbeddingSynth, SkewMechanism};
use crate::techmodel::{
    load_profile, MitigationConfig, MitigationKind, TechProfile, VariationConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in profile name or path to a profile file.
    pub profile: String,
    pub seed: u64,
    pub array: ArraySection,
    pub search: SearchSection,
    pub variation: VariationSection,
    pub sweep: SweepSection,
    pub dataset: DatasetSection,
    pub recsys: RecsysSection,
    pub calibrate: CalibrateSection,
    pub mdd: MddSection,
    pub curve: CurveSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: "sot".into(),
            seed: 0,
            array: ArraySection::default(),
            search: SearchSection::default(),
            variation: VariationSection::default(),
            sweep: SweepSection::default(),
            dataset: DatasetSection::default(),
            recsys: RecsysSection::default(),
            calibrate: CalibrateSection::default(),
            mdd: MddSection::default(),
            curve: CurveSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub rows: usize,
    pub cols: usize,
    pub mitigation: MitigationKind,
    /// Overrides of the profile's mitigation constants.
    pub s2x_skew_reduction: Option<f64>,
    pub s2x_energy_overhead: Option<f64>,
    pub clk_match_gain: Option<f64>,
    pub clk_match_energy_overhead: Option<f64>,
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection {
            rows: 128,
            cols: 128,
            mitigation: MitigationKind::Baseline,
            s2x_skew_reduction: None,
            s2x_energy_overhead: None,
            clk_match_gain: None,
            clk_match_energy_overhead: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub limit: usize,
    pub clock: ClockKind,
    pub guard: f64,
    pub queries: usize,
    /// Items per synthetic workload.
    pub items: usize,
    /// Stored vectors file; synthetic workloads when unset.
    pub data: Option<PathBuf>,
    /// Query vectors file, required with `data`.
    pub queries_file: Option<PathBuf>,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            limit: 20,
            clock: ClockKind::Fixed,
            guard: 0.0,
            queries: 10,
            items: 10_000,
            data: None,
            queries_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationSection {
    /// Relative 1σ of cell currents. When unset, single-trial runs are
    /// variation-free and Monte Carlo runs use the profile default.
    pub sigma: Option<f64>,
    pub trials: usize,
}

impl Default for VariationSection {
    fn default() -> Self {
        VariationSection {
            sigma: None,
            trials: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub rows: Vec<usize>,
    pub mitigations: Vec<MitigationKind>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            rows: vec![64, 128, 256],
            mitigations: vec![
                MitigationKind::Baseline,
                MitigationKind::S2x,
                MitigationKind::ClkMatch,
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// CSV file; a synthetic housing table when unset.
    pub path: Option<PathBuf>,
    pub max_distinct: usize,
    pub features: usize,
    pub bits_per_feature: usize,
    pub limit: usize,
    pub queries: usize,
    /// Rows of the synthetic table.
    pub synthetic_items: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            path: None,
            max_distinct: 8,
            features: 16,
            bits_per_feature: 8,
            limit: 8,
            queries: 100,
            synthetic_items: 1460,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecsysSection {
    pub k: usize,
    pub limit: usize,
    pub lsh_seed: u64,
    /// Embeddings and instance files; synthetic data when unset.
    pub embeddings: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub items: usize,
    pub dim: usize,
    pub clusters: usize,
    pub count: usize,
    pub spread: f64,
    pub noise: f64,
}

impl Default for RecsysSection {
    fn default() -> Self {
        let s = EmbeddingSynth::default();
        RecsysSection {
            k: 10,
            limit: 30,
            lsh_seed: 0,
            embeddings: None,
            instances: None,
            items: s.items,
            dim: s.dim,
            clusters: s.clusters,
            count: s.instances,
            spread: s.spread,
            noise: s.noise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub target_percent: f64,
    pub hdist: usize,
    pub mechanism: Option<SkewMechanism>,
    /// `(rows, eps_pj)` points of the energy fit.
    pub energy_points: Vec<(f64, f64)>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection {
            target_percent: 200.0,
            hdist: 40,
            mechanism: None,
            energy_points: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MddSection {
    pub hmax: usize,
}

impl Default for MddSection {
    fn default() -> Self {
        MddSection { hmax: 60 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub nmax: usize,
    /// Hamming distance of the skew-versus-rows curve.
    pub hdist: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection {
            nmax: 50,
            hdist: 40,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `key` (dotted) in `table` from `raw`, which is read as a TOML value
/// and falls back to a bare string.
fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "malformed key"));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

impl RunConfig {
    /// Parses TOML text and applies `key=value` overrides in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, "override must look like key=value"))?;
            apply_override(&mut table, key.trim(), value.trim())?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.search.guard) {
            return Err(Error::config("search.guard", "must lie in [0, 1]"));
        }
        if self.search.limit == 0 || self.search.limit > self.array.cols {
            return Err(Error::config(
                "search.limit",
                format!("must lie in 1..={}", self.array.cols),
            ));
        }
        if self.search.data.is_some() != self.search.queries_file.is_some() {
            return Err(Error::config(
                "search.queries_file",
                "stored data and query files must be given together",
            ));
        }
        if self.variation.trials == 0 {
            return Err(Error::config("variation.trials", "must be >= 1"));
        }
        if let Some(s) = self.variation.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::config("variation.sigma", "must be finite and >= 0"));
            }
        }
        if self.sweep.rows.is_empty() || self.sweep.rows.contains(&0) {
            return Err(Error::config("sweep.rows", "needs positive row counts"));
        }
        if self.recsys.embeddings.is_some() != self.recsys.instances.is_some() {
            return Err(Error::config(
                "recsys.instances",
                "embedding and instance files must be given together",
            ));
        }
        Ok(())
    }

    pub fn load_profile(&self) -> Result<TechProfile> {
        load_profile(&self.profile)
    }

    pub fn mitigation(&self, kind: MitigationKind, profile: &TechProfile) -> MitigationConfig {
        let mut m = MitigationConfig::for_profile(kind, profile);
        let a = &self.array;
        m.s2x_skew_reduction = a.s2x_skew_reduction.unwrap_or(m.s2x_skew_reduction);
        m.s2x_energy_overhead = a.s2x_energy_overhead.unwrap_or(m.s2x_energy_overhead);
        m.clk_match_gain = a.clk_match_gain.unwrap_or(m.clk_match_gain);
        m.clk_match_energy_overhead = a
            .clk_match_energy_overhead
            .unwrap_or(m.clk_match_energy_overhead);
        m
    }

    pub fn array_config(&self, profile: &TechProfile) -> Result<ArrayConfig> {
        ArrayConfig::new(
            self.array.rows,
            self.array.cols,
            profile.clone(),
            self.mitigation(self.array.mitigation, profile),
        )
    }

    pub fn clock_policy(&self) -> ClockPolicy {
        ClockPolicy {
            kind: self.search.clock,
            hdist_limit: self.search.limit,
            guard: self.search.guard,
        }
    }

    pub fn variation(&self, profile: &TechProfile) -> Result<VariationConfig> {
        let default = if self.variation.trials > 1 {
            profile.sigma_isat_rel
        } else {
            0.0
        };
        VariationConfig::new(
            self.variation.sigma.unwrap_or(default),
            self.seed,
            self.variation.trials,
        )
    }

    pub fn embedding_synth(&self) -> EmbeddingSynth {
        let r = &self.recsys;
        EmbeddingSynth {
            items: r.items,
            dim: r.dim,
            clusters: r.clusters,
            instances: r.count,
            spread: r.spread,
            noise: r.noise,
            seed: self.seed,
        }
    }
}
