//! Analog matchline timing, searchline skew and energy models.
//!
//! A mismatching cell sinks a constant saturation current from a lumped
//! matchline capacitance, so a row with `n` mismatches crosses the sense
//! threshold after `C·ΔV / (n·I)`. Interconnect enters in two ways: the
//! searchline drive reaches row `r` after a distributed-RC (Elmore) delay,
//! and resistive searchlines lower the discharge current of rows far from
//! the driver (IR drop, dominant in SOT arrays).

mod profile;
mod variation;

use serde::{Deserialize, Serialize};

pub use profile::{builtin_profile_text, load_profile, TechProfile, Technology, BUILTIN_PROFILES};
pub use variation::{
    sample_bank_currents, sample_cell_currents, sample_row_currents, CurrentMatrix,
    VariationConfig, CURRENT_FLOOR,
};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationKind {
    #[default]
    Baseline,
    /// Searchlines moved to an upper metal layer and widened.
    S2x,
    /// Latch clock routed to track searchline arrival.
    #[serde(rename = "clkmatch", alias = "clk_match")]
    ClkMatch,
}

impl MitigationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MitigationKind::Baseline => "baseline",
            MitigationKind::S2x => "s2x",
            MitigationKind::ClkMatch => "clkmatch",
        }
    }
}

impl std::str::FromStr for MitigationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "baseline" | "none" => Ok(MitigationKind::Baseline),
            "s2x" => Ok(MitigationKind::S2x),
            "clkmatch" => Ok(MitigationKind::ClkMatch),
            other => Err(Error::config(
                "mitigation",
                format!("unknown mitigation `{other}` (baseline, s2x, clkmatch)"),
            )),
        }
    }
}

/// Interconnect mitigation. Only the fields of the active kind are read.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationConfig {
    pub kind: MitigationKind,
    pub s2x_skew_reduction: f64,
    pub s2x_energy_overhead: f64,
    pub clk_match_gain: f64,
    pub clk_match_energy_overhead: f64,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self::baseline()
    }
}

impl MitigationConfig {
    pub fn baseline() -> Self {
        MitigationConfig {
            kind: MitigationKind::Baseline,
            s2x_skew_reduction: 1.0,
            s2x_energy_overhead: 0.0,
            clk_match_gain: 1.0,
            clk_match_energy_overhead: 0.0,
        }
    }

    pub fn s2x(skew_reduction: f64, energy_overhead: f64) -> Self {
        MitigationConfig {
            kind: MitigationKind::S2x,
            s2x_skew_reduction: skew_reduction,
            s2x_energy_overhead: energy_overhead,
            ..Self::baseline()
        }
    }

    pub fn clk_match(gain: f64, energy_overhead: f64) -> Self {
        MitigationConfig {
            kind: MitigationKind::ClkMatch,
            clk_match_gain: gain,
            clk_match_energy_overhead: energy_overhead,
            ..Self::baseline()
        }
    }

    /// The mitigation of `kind` with the profile's default parameters.
    pub fn for_profile(kind: MitigationKind, profile: &TechProfile) -> Self {
        match kind {
            MitigationKind::Baseline => Self::baseline(),
            MitigationKind::S2x => {
                Self::s2x(profile.s2x_skew_reduction, profile.s2x_energy_overhead)
            }
            MitigationKind::ClkMatch => {
                Self::clk_match(profile.clk_match_gain, profile.clk_match_energy_overhead)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            MitigationKind::Baseline => Ok(()),
            MitigationKind::S2x => {
                if !(self.s2x_skew_reduction >= 1.0) {
                    return Err(Error::config(
                        "mitigation.s2x_skew_reduction",
                        "must be >= 1",
                    ));
                }
                if !(self.s2x_energy_overhead >= 0.0) {
                    return Err(Error::config(
                        "mitigation.s2x_energy_overhead",
                        "must be >= 0",
                    ));
                }
                Ok(())
            }
            MitigationKind::ClkMatch => {
                if !(0.0..=2.0).contains(&self.clk_match_gain) {
                    return Err(Error::config(
                        "mitigation.clk_match_gain",
                        "must lie in [0, 2]",
                    ));
                }
                if !(self.clk_match_energy_overhead >= 0.0) {
                    return Err(Error::config(
                        "mitigation.clk_match_energy_overhead",
                        "must be >= 0",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Divisor applied to searchline RC and IR skew.
    pub fn skew_divisor(&self) -> f64 {
        match self.kind {
            MitigationKind::S2x => self.s2x_skew_reduction,
            _ => 1.0,
        }
    }

    pub fn energy_overhead(&self) -> f64 {
        match self.kind {
            MitigationKind::Baseline => 0.0,
            MitigationKind::S2x => self.s2x_energy_overhead,
            MitigationKind::ClkMatch => self.clk_match_energy_overhead,
        }
    }
}

impl TechProfile {
    /// Copy with ideal searchlines: no RC delay and no IR drop.
    pub fn without_interconnect(&self) -> TechProfile {
        TechProfile {
            r_sl_row: 0.0,
            c_sl_row: 0.0,
            ir_gamma: 0.0,
            ..self.clone()
        }
    }

    /// Voltage swing the matchline must traverse before the sense amplifier trips.
    #[inline]
    pub fn sense_swing(&self) -> f64 {
        self.v_ml - self.v_sa_threshold
    }

    #[inline]
    pub fn ml_capacitance(&self, cols: usize) -> f64 {
        self.c_fixed + self.c_cell * cols as f64
    }

    /// `C·ΔV / I_sat`: the discharge time of a row with a single mismatch.
    #[inline]
    pub fn unit_discharge_time(&self, cols: usize) -> f64 {
        self.ml_capacitance(cols) * self.sense_swing() / self.i_sat0
    }

    /// Ideal (interconnect-free) discharge delay for `n` mismatches.
    /// Returns `f64::INFINITY` for `n = 0`: the matchline never discharges.
    pub fn ideal_discharge_delay(&self, cols: usize, n: usize) -> f64 {
        if n == 0 {
            f64::INFINITY
        } else {
            self.unit_discharge_time(cols) / n as f64
        }
    }

    /// Elmore arrival time of the searchline drive at `row`.
    pub fn searchline_arrival(&self, mitigation: &MitigationConfig, row: usize) -> f64 {
        let r = row as f64;
        0.5 * self.r_sl_row * self.c_sl_row * r * (r + 1.0) / mitigation.skew_divisor()
    }

    /// Fraction of the nominal discharge current available at `row`.
    ///
    /// The loss grows linearly with row index and reaches `ir_gamma` at row
    /// `ir_ref_rows - 1`, so an array's skew depends only on how far its rows
    /// reach from the driver. It is floored at [`CURRENT_FLOOR`] for arrays much
    /// taller than the reference.
    pub fn ir_current_factor(&self, mitigation: &MitigationConfig, row: usize) -> f64 {
        if self.ir_gamma == 0.0 || row == 0 {
            return 1.0;
        }
        let gamma = self.ir_gamma / mitigation.skew_divisor();
        let position = row as f64 / (self.ir_ref_rows - 1) as f64;
        (1.0 - gamma * position).max(CURRENT_FLOOR)
    }

    /// Variation-free discharge delay of a row with `n` mismatches at `row`,
    /// including searchline arrival but excluding the sense/latch delay.
    pub fn nominal_discharge_delay(
        &self,
        cols: usize,
        mitigation: &MitigationConfig,
        n: usize,
        row: usize,
    ) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        self.searchline_arrival(mitigation, row)
            + self.unit_discharge_time(cols) / (self.ir_current_factor(mitigation, row) * n as f64)
    }

    /// Percentage increase of the discharge delay at `hdist` mismatches from
    /// the row nearest the driver to the farthest row.
    pub fn skew_percent(
        &self,
        rows: usize,
        cols: usize,
        mitigation: &MitigationConfig,
        hdist: usize,
    ) -> Result<f64> {
        if hdist == 0 {
            return Err(Error::Precondition("skew_percent needs hdist >= 1".into()));
        }
        if rows < 2 {
            return Err(Error::Precondition("skew_percent needs rows >= 2".into()));
        }
        let near = self.nominal_discharge_delay(cols, mitigation, hdist, 0);
        let far = self.nominal_discharge_delay(cols, mitigation, hdist, rows - 1);
        Ok(100.0 * (far - near) / near)
    }

    /// Energy per search of one `rows × cols` array, in pJ.
    ///
    /// The linear row model is fit at `eps_ref_cols` columns; the per-row
    /// term scales in proportion to the column count.
    pub fn energy_per_search(
        &self,
        rows: usize,
        cols: usize,
        mitigation: &MitigationConfig,
    ) -> Result<f64> {
        if rows == 0 {
            return Err(Error::Precondition(
                "energy_per_search needs rows >= 1".into(),
            ));
        }
        let slope = self.eps_slope * cols as f64 / self.eps_ref_cols as f64;
        let base = self.eps_intercept + slope * rows as f64;
        Ok(base * (1.0 + mitigation.energy_overhead()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// A profile with `C·ΔV/I = 1` at any column count.
    pub(crate) fn normalized() -> TechProfile {
        let mut p = TechProfile::builtin("sram_0v5").unwrap();
        p.c_cell = 0.0;
        p.c_fixed = 1.0;
        p.v_ml = 1.5;
        p.v_sa_threshold = 0.5;
        p.i_sat0 = 1.0;
        p.r_sl_row = 0.0;
        p.c_sl_row = 0.0;
        p.ir_gamma = 0.0;
        p.t_sa_latch = 0.0;
        p
    }

    #[test]
    fn ml_capacitance_is_linear_in_columns() {
        let mut p = normalized();
        p.c_cell = 1e-18;
        p.c_fixed = 0.0;
        assert_relative_eq!(p.ml_capacitance(128), 128e-18, max_relative = 1e-12);
        p.c_cell = 0.0;
        p.c_fixed = 3e-18;
        assert_eq!(p.ml_capacitance(1), p.ml_capacitance(512));
        p.c_cell = 0.5e-18;
        p.c_fixed = 2e-18;
        assert_relative_eq!(p.ml_capacitance(128), 66e-18, max_relative = 1e-12);
    }

    #[test]
    fn ideal_delay_follows_inverse_law() {
        let p = normalized();
        assert_eq!(p.ideal_discharge_delay(128, 1), 1.0);
        assert_eq!(p.ideal_discharge_delay(128, 2), 0.5);
        assert_eq!(p.ideal_discharge_delay(128, 4), 0.25);
        assert!(p.ideal_discharge_delay(128, 0).is_infinite());
        let gap = p.ideal_discharge_delay(128, 1) - p.ideal_discharge_delay(128, 2);
        assert_relative_eq!(gap, 1.0 / (2.0 * 1.0), max_relative = 1e-15);
    }

    #[test]
    fn searchline_arrival_is_an_elmore_sum() {
        let mut p = normalized();
        p.r_sl_row = 2.0;
        p.c_sl_row = 1.0;
        let base = MitigationConfig::baseline();
        assert_eq!(p.searchline_arrival(&base, 0), 0.0);
        // Three segments: 2·(1 + 2 + 3).
        assert_relative_eq!(p.searchline_arrival(&base, 3), 12.0, max_relative = 1e-15);
        let s2x = MitigationConfig::s2x(8.2, 0.254);
        assert_relative_eq!(
            p.searchline_arrival(&s2x, 3),
            12.0 / 8.2,
            max_relative = 1e-15
        );
    }

    #[test]
    fn ir_factor_ramps_to_gamma_at_reference_row() {
        let mut p = normalized();
        let base = MitigationConfig::baseline();
        assert_eq!(p.ir_current_factor(&base, 200), 1.0);
        p.ir_gamma = 0.2;
        p.ir_ref_rows = 256;
        assert_relative_eq!(p.ir_current_factor(&base, 255), 0.8, max_relative = 1e-12);
        assert_eq!(p.ir_current_factor(&base, 0), 1.0);
        let s2x = MitigationConfig::s2x(2.0, 0.0);
        assert_relative_eq!(p.ir_current_factor(&s2x, 255), 0.9, max_relative = 1e-12);
        // Arrays far taller than the reference stay physical.
        assert_eq!(p.ir_current_factor(&base, 100_000), CURRENT_FLOOR);
    }

    #[test]
    fn skew_vanishes_without_interconnect() {
        let p = normalized();
        let s = p
            .skew_percent(256, 128, &MitigationConfig::baseline(), 40)
            .unwrap();
        assert_eq!(s, 0.0);
        assert!(p
            .skew_percent(1, 128, &MitigationConfig::baseline(), 40)
            .is_err());
        assert!(p
            .skew_percent(256, 128, &MitigationConfig::baseline(), 0)
            .is_err());
    }

    #[test]
    fn s2x_divides_pure_rc_skew() {
        let p = TechProfile::builtin("fefet").unwrap();
        assert_eq!(p.ir_gamma, 0.0);
        let base = p
            .skew_percent(256, 128, &MitigationConfig::baseline(), 40)
            .unwrap();
        let s2x = p
            .skew_percent(256, 128, &MitigationConfig::s2x(8.2, 0.0), 40)
            .unwrap();
        assert_relative_eq!(s2x, base / 8.2, max_relative = 1e-6);
    }

    #[test]
    fn energy_overhead_is_multiplicative() {
        let p = TechProfile::builtin("sot").unwrap();
        let base = p
            .energy_per_search(256, 128, &MitigationConfig::baseline())
            .unwrap();
        let s2x = p
            .energy_per_search(256, 128, &MitigationConfig::s2x(7.6, 0.148))
            .unwrap();
        assert_relative_eq!(s2x, base * 1.148, max_relative = 1e-12);
        assert!(p
            .energy_per_search(0, 128, &MitigationConfig::baseline())
            .is_err());
    }

    #[test]
    fn energy_slope_scales_with_columns() {
        let p = TechProfile::builtin("fefet").unwrap();
        let m = MitigationConfig::baseline();
        let e128 = p.energy_per_search(100, 128, &m).unwrap();
        let e256 = p.energy_per_search(100, 256, &m).unwrap();
        assert_relative_eq!(
            e256 - p.eps_intercept,
            2.0 * (e128 - p.eps_intercept),
            max_relative = 1e-12
        );
    }

    #[test]
    fn mitigation_names_parse() {
        assert_eq!(
            "S2x".parse::<MitigationKind>().unwrap(),
            MitigationKind::S2x
        );
        assert_eq!(
            "clk_match".parse::<MitigationKind>().unwrap(),
            MitigationKind::ClkMatch
        );
        assert!("wider".parse::<MitigationKind>().is_err());
    }
}
